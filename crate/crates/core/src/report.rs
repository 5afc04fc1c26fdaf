//! Combined Markdown and JSON report. Both renderings are built from the same
//! rounded values, so their numbers agree exactly.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::SimilarityRow;
use crate::corpus::Composition;
use crate::eval::{gap, EvalReport};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ReportError {
    #[error("a report needs at least one section")]
    NoSections,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FigureRef {
    pub title: String,
    pub svg: String,
    pub csv: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositionEntry {
    pub source: String,
    pub non_gender_based_hs: usize,
    pub gender_based_hs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformanceEntry {
    pub dataset: String,
    pub model: String,
    pub accuracy: f64,
    pub accuracy_std: f64,
    pub f1: f64,
    pub f1_std: f64,
    pub f1_positive: f64,
    pub gap: f64,
    pub gap_flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformanceSection {
    pub cv_mode: String,
    pub k: usize,
    /// Which F1 the headline column holds.
    pub f1: String,
    pub rows: Vec<PerformanceEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityEntry {
    pub method: String,
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dataset_composition: Option<Vec<CompositionEntry>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model_performance: Option<PerformanceSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub semantic_similarity: Option<Vec<SimilarityEntry>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub figures: Option<Vec<FigureRef>>,
}

fn round(x: f64, places: i32) -> f64 {
    format!("{:.*}", places as usize, x).parse().expect("formatted float parses")
}

/// Builds the report from whichever sections are present.
pub fn assemble_report(
    composition: Option<&Composition>,
    eval: Option<&EvalReport>,
    similarity: Option<&[SimilarityRow]>,
    figures: Option<&[FigureRef]>,
) -> Result<Report, ReportError> {
    let report = Report {
        dataset_composition: composition.map(|c| {
            c.rows()
                .into_iter()
                .map(|r| CompositionEntry {
                    source: r.source.display_name().to_string(),
                    non_gender_based_hs: r.negative,
                    gender_based_hs: r.positive,
                })
                .collect()
        }),
        model_performance: eval.map(|e| PerformanceSection {
            cv_mode: e.cv_mode.as_str().to_string(),
            k: e.k,
            f1: "macro".into(),
            rows: e
                .cells
                .iter()
                .map(|c| {
                    let (g, flagged) = gap(c.mean.accuracy, c.mean.f1_macro);
                    PerformanceEntry {
                        dataset: c.dataset.clone(),
                        model: c.model.display_name().to_string(),
                        accuracy: round(c.mean.accuracy, 3),
                        accuracy_std: round(c.std.accuracy, 3),
                        f1: round(c.mean.f1_macro, 3),
                        f1_std: round(c.std.f1_macro, 3),
                        f1_positive: round(c.mean.f1_positive, 3),
                        gap: round(g, 3),
                        gap_flagged: flagged,
                    }
                })
                .collect(),
        }),
        semantic_similarity: similarity.map(|rows| {
            rows.iter()
                .map(|r| SimilarityEntry {
                    method: r.method.clone(),
                    similarity: round(r.similarity, 4),
                })
                .collect()
        }),
        figures: figures.map(<[FigureRef]>::to_vec),
    };
    if report.section_count() == 0 {
        return Err(ReportError::NoSections);
    }
    Ok(report)
}

impl Report {
    pub fn section_count(&self) -> usize {
        [
            self.dataset_composition.is_some(),
            self.model_performance.is_some(),
            self.semantic_similarity.is_some(),
            self.figures.is_some(),
        ]
        .iter()
        .filter(|&&b| b)
        .count()
    }

    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::from("# Augmentation Report\n");
        if let Some(rows) = &self.dataset_composition {
            out.push_str("\n## Dataset Composition\n\n");
            out.push_str("| Source | Non-gender-based HS | Gender-based HS |\n|---|---|---|\n");
            for r in rows {
                let _ = writeln!(out, "| {} | {} | {} |", r.source, r.non_gender_based_hs, r.gender_based_hs);
            }
        }
        if let Some(p) = &self.model_performance {
            out.push_str("\n## Model Performance\n\n");
            let _ = writeln!(
                out,
                "{}-fold cross-validation, mode `{}`; F1-Score is {}-averaged.\n",
                p.k, p.cv_mode, p.f1
            );
            out.push_str("| Dataset | Model | Accuracy | Accuracy Std | F1-Score | F1-Score Std |\n");
            out.push_str("|---|---|---|---|---|---|\n");
            let mut previous: Option<&str> = None;
            for r in &p.rows {
                let name = if previous == Some(r.dataset.as_str()) { "" } else { &r.dataset };
                previous = Some(&r.dataset);
                let _ = writeln!(
                    out,
                    "| {} | {} | {:.3} | {:.3} | {:.3} | {:.3} |",
                    name, r.model, r.accuracy, r.accuracy_std, r.f1, r.f1_std
                );
            }
            out.push_str("\n### Accuracy - F1 gap\n\n| Dataset | Model | Gap | Flagged |\n|---|---|---|---|\n");
            for r in &p.rows {
                let _ = writeln!(
                    out,
                    "| {} | {} | {:.3} | {} |",
                    r.dataset,
                    r.model,
                    r.gap,
                    if r.gap_flagged { "yes" } else { "no" }
                );
            }
        }
        if let Some(rows) = &self.semantic_similarity {
            out.push_str("\n## Semantic Similarity\n\n| Augmentation Method | Similarity to Original |\n|---|---|\n");
            for r in rows {
                let _ = writeln!(out, "| {} | {:.4} |", r.method, r.similarity);
            }
        }
        if let Some(figs) = &self.figures {
            out.push_str("\n## Figures\n\n");
            for f in figs {
                let _ = writeln!(out, "- [{}]({}) ([coordinates]({}))", f.title, f.svg, f.csv);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{CompositionRow, Source};
    use crate::eval::{compute_metrics, CvMode, EvalCell};
    use crate::corpus::Label::{Negative as N, Positive as P};
    use crate::models::ClassifierKind;

    fn eval() -> EvalReport {
        let a = compute_metrics(&[P, N, N, N], &[P, P, N, N]).unwrap();
        let b = compute_metrics(&[P, N, N, P], &[P, P, N, N]).unwrap();
        EvalReport {
            cv_mode: CvMode::HoldoutOriginal,
            k: 2,
            seed: 1,
            cells: vec![EvalCell::from_folds("Original", ClassifierKind::LogReg, vec![a, b])],
        }
    }

    #[test]
    fn requires_a_section() {
        assert_eq!(assemble_report(None, None, None, None), Err(ReportError::NoSections));
    }

    #[test]
    fn eval_only_has_one_section() {
        let r = assemble_report(None, Some(&eval()), None, None).unwrap();
        assert_eq!(r.section_count(), 1);
        let md = r.to_markdown();
        assert!(md.contains("## Model Performance"));
        assert!(!md.contains("## Semantic Similarity"));
        let j: serde_json::Value = serde_json::from_str(&r.to_json_string()).unwrap();
        assert!(j.get("semantic_similarity").is_none());
    }

    #[test]
    fn full_report_has_four_sections() {
        let comp = Composition::from_rows(&[
            CompositionRow {
                source: Source::Original,
                negative: 612,
                positive: 306,
            },
            CompositionRow {
                source: Source::DualClassGen,
                negative: 0,
                positive: 306,
            },
        ]);
        let sim = [SimilarityRow::new(Source::DualClassGen, 0.86841)];
        let figs = [FigureRef {
            title: "Original".into(),
            svg: "figures/original.svg".into(),
            csv: "figures/original.csv".into(),
        }];
        let r = assemble_report(Some(&comp), Some(&eval()), Some(&sim), Some(&figs)).unwrap();
        assert_eq!(r.section_count(), 4);
        let md = r.to_markdown();
        assert!(md.contains("| Original | 612 | 306 |"));
        assert!(md.contains("| Dual-class prompt generation | 0 | 306 |"));
        assert!(md.contains("| Dual-class prompt generation | 0.8684 |"));
        assert!(md.contains("](figures/original.svg)"));
    }
}

//! Labeled binary text corpora: ingestion, normalization, rebalancing and
//! composition counts.

mod normalize;
pub mod synthetic;

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use normalize::{normalize, NUM_PLACEHOLDER, USERNAME_PLACEHOLDER};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: unparseable label {value:?}")]
    BadLabel { line: usize, value: String },
    #[error("duplicate document id {id:?}")]
    DuplicateId { id: String },
    #[error("document {id:?} has empty text")]
    EmptyText { id: String },
    #[error("document id must be nonempty")]
    EmptyId,
    #[error("corpus has no positive documents")]
    NoPositives,
    #[error("requested {requested} negative documents but only {available} are available")]
    InsufficientNegatives { requested: usize, available: usize },
    #[error("negative-per-positive ratio must be a finite value >= 1, got {0}")]
    InvalidRatio(f64),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Binary task label. `Positive` is the minority class being augmented.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Negative,
    Positive,
}

impl Label {
    pub const ALL: [Label; 2] = [Label::Negative, Label::Positive];

    pub fn as_index(self) -> usize {
        match self {
            Label::Negative => 0,
            Label::Positive => 1,
        }
    }

    pub fn code(self) -> &'static str {
        match self {
            Label::Negative => "0",
            Label::Positive => "1",
        }
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "1" | "gender_hs" => Ok(Label::Positive),
            "0" | "non_gender_hs" => Ok(Label::Negative),
            other => Err(other.to_string()),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl Serialize for Label {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.code())
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = serde_json::Value::deserialize(d)?;
        label_from_json(&v).map_err(serde::de::Error::custom)
    }
}

fn label_from_json(v: &serde_json::Value) -> Result<Label, String> {
    match v {
        serde_json::Value::String(s) => s.parse(),
        serde_json::Value::Number(n) => n.to_string().parse(),
        serde_json::Value::Bool(true) => Ok(Label::Positive),
        serde_json::Value::Bool(false) => Ok(Label::Negative),
        other => Err(other.to_string()),
    }
}

/// Where a document came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Original,
    Backtranslation,
    SingleClassGen,
    DualClassGen,
}

impl Source {
    pub const ALL: [Source; 4] = [
        Source::Original,
        Source::Backtranslation,
        Source::SingleClassGen,
        Source::DualClassGen,
    ];

    pub fn as_index(self) -> usize {
        match self {
            Source::Original => 0,
            Source::Backtranslation => 1,
            Source::SingleClassGen => 2,
            Source::DualClassGen => 3,
        }
    }

    /// Row label used in composition and similarity tables.
    pub fn display_name(self) -> &'static str {
        match self {
            Source::Original => "Original",
            Source::Backtranslation => "Backtranslation",
            Source::SingleClassGen => "Single-class prompt generation",
            Source::DualClassGen => "Dual-class prompt generation",
        }
    }

    pub fn slug(self) -> &'static str {
        match self {
            Source::Original => "original",
            Source::Backtranslation => "backtranslation",
            Source::SingleClassGen => "single",
            Source::DualClassGen => "dual",
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.display_name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    #[serde(rename = "text")]
    pub raw_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub norm_text: Option<String>,
    pub label: Label,
    #[serde(default = "original_source")]
    pub source: Source,
}

fn original_source() -> Source {
    Source::Original
}

impl Document {
    pub fn new(id: impl Into<String>, raw_text: impl Into<String>, label: Label, source: Source) -> Self {
        Document {
            id: id.into(),
            raw_text: raw_text.into(),
            norm_text: None,
            label,
            source,
        }
    }

    /// Normalized text, computing it on the fly when not cached.
    pub fn normalized(&self) -> String {
        match &self.norm_text {
            Some(t) => t.clone(),
            None => normalize(&self.raw_text),
        }
    }

    pub fn with_normalized(mut self) -> Self {
        self.norm_text = Some(normalize(&self.raw_text));
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub name: String,
    documents: Vec<Document>,
}

impl Corpus {
    /// Builds a corpus, enforcing unique nonempty ids and nonblank text.
    pub fn new(name: impl Into<String>, documents: Vec<Document>) -> Result<Self, CorpusError> {
        let mut seen = HashSet::with_capacity(documents.len());
        for doc in &documents {
            if doc.id.is_empty() {
                return Err(CorpusError::EmptyId);
            }
            if doc.raw_text.trim().is_empty() {
                return Err(CorpusError::EmptyText { id: doc.id.clone() });
            }
            if !seen.insert(doc.id.as_str()) {
                return Err(CorpusError::DuplicateId { id: doc.id.clone() });
            }
        }
        Ok(Corpus {
            name: name.into(),
            documents,
        })
    }

    pub fn empty(name: impl Into<String>) -> Self {
        Corpus {
            name: name.into(),
            documents: Vec::new(),
        }
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn with_label(&self, label: Label) -> impl Iterator<Item = &Document> {
        self.documents.iter().filter(move |d| d.label == label)
    }

    pub fn count(&self, label: Label) -> usize {
        self.with_label(label).count()
    }

    pub fn get(&self, id: &str) -> Option<&Document> {
        self.documents.iter().find(|d| d.id == id)
    }

    /// Returns a copy with `norm_text` filled for every document.
    pub fn normalized(&self) -> Corpus {
        Corpus {
            name: self.name.clone(),
            documents: self
                .documents
                .iter()
                .cloned()
                .map(Document::with_normalized)
                .collect(),
        }
    }

    /// Appends documents, rechecking id uniqueness.
    pub fn extended(&self, extra: impl IntoIterator<Item = Document>) -> Result<Corpus, CorpusError> {
        let mut docs = self.documents.clone();
        docs.extend(extra);
        Corpus::new(self.name.clone(), docs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Jsonl,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "jsonl" | "ndjson" => Ok(Format::Jsonl),
            other => Err(format!("unknown corpus format {other:?}")),
        }
    }
}

impl Format {
    /// Guesses the format from a file extension.
    pub fn from_path(path: &Path) -> Option<Format> {
        path.extension()?.to_str()?.parse().ok()
    }
}

fn auto_id(row: usize) -> String {
    format!("row-{row:06}")
}

struct RowCollector {
    docs: Vec<Document>,
    seen: HashSet<String>,
}

impl RowCollector {
    fn push(
        &mut self,
        line: usize,
        row_index: usize,
        id: Option<String>,
        text: String,
        label: Label,
        source: Source,
    ) -> Result<(), CorpusError> {
        let id = match id {
            Some(id) if !id.trim().is_empty() => id,
            _ => auto_id(row_index + 1),
        };
        if text.trim().is_empty() {
            return Err(CorpusError::Malformed {
                line,
                message: format!("document {id:?} has empty text"),
            });
        }
        if !self.seen.insert(id.clone()) {
            return Err(CorpusError::Malformed {
                line,
                message: format!("duplicate document id {id:?}"),
            });
        }
        self.docs.push(Document::new(id, text, label, source));
        Ok(())
    }
}

/// Reads a labeled corpus from CSV (`id,text,label` header) or JSONL.
///
/// The `id` column is optional; missing ids become `row-NNNNNN`. A `source`
/// column, when present, is honored so augmented corpora can be read back;
/// otherwise every document is `Original`.
pub fn ingest(path: &Path, format: Format) -> Result<Corpus, CorpusError> {
    let name = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("corpus")
        .to_string();
    let mut rows = RowCollector {
        docs: Vec::new(),
        seen: HashSet::new(),
    };
    match format {
        Format::Csv => read_csv(path, &mut rows)?,
        Format::Jsonl => read_jsonl(path, &mut rows)?,
    }
    Ok(Corpus {
        name,
        documents: rows.docs,
    })
}

fn read_csv(path: &Path, rows: &mut RowCollector) -> Result<(), CorpusError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| csv_error(e, 1))?;
    let headers = reader.headers().map_err(|e| csv_error(e, 1))?.clone();
    let col = |name: &str| headers.iter().position(|h| h.trim() == name);
    let text_col = col("text").ok_or(CorpusError::Malformed {
        line: 1,
        message: "missing `text` column".into(),
    })?;
    let label_col = col("label").ok_or(CorpusError::Malformed {
        line: 1,
        message: "missing `label` column".into(),
    })?;
    let id_col = col("id");
    let source_col = col("source");

    for (i, record) in reader.records().enumerate() {
        let fallback_line = i + 2;
        let record = record.map_err(|e| csv_error(e, fallback_line))?;
        let line = record
            .position()
            .map(|p| p.line() as usize)
            .unwrap_or(fallback_line);
        let field = |c: usize| {
            record.get(c).ok_or_else(|| CorpusError::Malformed {
                line,
                message: format!("expected at least {} fields, found {}", c + 1, record.len()),
            })
        };
        let text = field(text_col)?.to_string();
        let raw_label = field(label_col)?;
        let label = raw_label.parse().map_err(|value| CorpusError::BadLabel { line, value })?;
        let id = id_col.and_then(|c| record.get(c)).map(str::to_string);
        let source = match source_col.and_then(|c| record.get(c)) {
            Some(s) if !s.is_empty() => parse_source(s, line)?,
            _ => Source::Original,
        };
        rows.push(line, i, id, text, label, source)?;
    }
    Ok(())
}

fn parse_source(s: &str, line: usize) -> Result<Source, CorpusError> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|_| CorpusError::Malformed {
        line,
        message: format!("unknown source {s:?}"),
    })
}

fn csv_error(e: csv::Error, fallback_line: usize) -> CorpusError {
    let line = e
        .position()
        .map(|p| p.line() as usize)
        .unwrap_or(fallback_line);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CorpusError::Io(io),
        kind => CorpusError::Malformed {
            line,
            message: format!("{kind:?}"),
        },
    }
}

fn read_jsonl(path: &Path, rows: &mut RowCollector) -> Result<(), CorpusError> {
    let reader = BufReader::new(File::open(path)?);
    let mut row_index = 0;
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(&line).map_err(|e| CorpusError::Malformed {
            line: line_no,
            message: e.to_string(),
        })?;
        let obj = value.as_object().ok_or(CorpusError::Malformed {
            line: line_no,
            message: "expected a JSON object".into(),
        })?;
        let text = obj
            .get("text")
            .and_then(|t| t.as_str())
            .ok_or(CorpusError::Malformed {
                line: line_no,
                message: "missing string key `text`".into(),
            })?
            .to_string();
        let raw_label = obj.get("label").ok_or(CorpusError::Malformed {
            line: line_no,
            message: "missing key `label`".into(),
        })?;
        let label = label_from_json(raw_label).map_err(|value| CorpusError::BadLabel { line: line_no, value })?;
        let id = match obj.get("id") {
            None | Some(serde_json::Value::Null) => None,
            Some(serde_json::Value::String(s)) => Some(s.clone()),
            Some(serde_json::Value::Number(n)) => Some(n.to_string()),
            Some(other) => {
                return Err(CorpusError::Malformed {
                    line: line_no,
                    message: format!("id must be a string or number, got {other}"),
                })
            }
        };
        let source = match obj.get("source").and_then(|s| s.as_str()) {
            Some(s) => parse_source(s, line_no)?,
            None => Source::Original,
        };
        rows.push(line_no, row_index, id, text, label, source)?;
        row_index += 1;
    }
    Ok(())
}

/// Writes `id,text,label,source` rows in the chosen format.
pub fn write_corpus(corpus: &Corpus, path: &Path, format: Format) -> Result<(), CorpusError> {
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(e, 0))?;
            w.write_record(["id", "text", "label", "source"])
                .map_err(|e| csv_error(e, 0))?;
            for d in &corpus.documents {
                let source = serde_json::to_value(d.source).expect("source serializes");
                w.write_record([
                    d.id.as_str(),
                    d.raw_text.as_str(),
                    d.label.code(),
                    source.as_str().unwrap_or_default(),
                ])
                .map_err(|e| csv_error(e, 0))?;
            }
            w.flush()?;
        }
        Format::Jsonl => {
            let mut w = BufWriter::new(File::create(path)?);
            for d in &corpus.documents {
                serde_json::to_writer(&mut w, d).map_err(std::io::Error::from)?;
                w.write_all(b"\n")?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

/// Keeps every positive document and a seeded uniform sample (without
/// replacement) of `floor(ratio * positives)` negatives. Corpus order is
/// preserved among the kept documents.
pub fn balance(corpus: &Corpus, negative_per_positive: f64, seed: u64) -> Result<Corpus, CorpusError> {
    if !negative_per_positive.is_finite() || negative_per_positive < 1.0 {
        return Err(CorpusError::InvalidRatio(negative_per_positive));
    }
    let positives = corpus.count(Label::Positive);
    if positives == 0 {
        return Err(CorpusError::NoPositives);
    }
    let negatives: Vec<usize> = corpus
        .documents
        .iter()
        .enumerate()
        .filter(|(_, d)| d.label == Label::Negative)
        .map(|(i, _)| i)
        .collect();
    let requested = (negative_per_positive * positives as f64).floor() as usize;
    if requested > negatives.len() {
        return Err(CorpusError::InsufficientNegatives {
            requested,
            available: negatives.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep = vec![false; corpus.len()];
    for i in index::sample(&mut rng, negatives.len(), requested) {
        keep[negatives[i]] = true;
    }
    let documents = corpus
        .documents
        .iter()
        .enumerate()
        .filter(|(i, d)| d.label == Label::Positive || keep[*i])
        .map(|(_, d)| d.clone())
        .collect();
    Ok(Corpus {
        name: format!("{}-balanced", corpus.name),
        documents,
    })
}

/// Document counts keyed by (source, label).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Composition {
    counts: [[usize; 2]; 4],
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompositionRow {
    pub source: Source,
    pub negative: usize,
    pub positive: usize,
}

impl Composition {
    pub fn get(&self, source: Source, label: Label) -> usize {
        self.counts[source.as_index()][label.as_index()]
    }

    pub fn add(&mut self, doc: &Document) {
        self.counts[doc.source.as_index()][doc.label.as_index()] += 1;
    }

    pub fn add_all<'a>(&mut self, docs: impl IntoIterator<Item = &'a Document>) {
        for d in docs {
            self.add(d);
        }
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn rows(&self) -> Vec<CompositionRow> {
        Source::ALL
            .iter()
            .map(|&source| CompositionRow {
                source,
                negative: self.get(source, Label::Negative),
                positive: self.get(source, Label::Positive),
            })
            .collect()
    }

    pub fn from_rows(rows: &[CompositionRow]) -> Self {
        let mut c = Composition::default();
        for r in rows {
            c.counts[r.source.as_index()] = [r.negative, r.positive];
        }
        c
    }
}

pub fn composition(corpus: &Corpus) -> Composition {
    let mut c = Composition::default();
    c.add_all(corpus.documents());
    c
}

#[cfg(test)]
mod tests {
    use super::*;


    fn tmp_file(contents: &str, suffix: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::Builder::new().suffix(suffix).tempfile().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    fn labeled(n_pos: usize, n_neg: usize) -> Corpus {
        let mut docs = Vec::new();
        for i in 0..n_pos {
            docs.push(Document::new(format!("p{i}"), format!("pos text {i}"), Label::Positive, Source::Original));
        }
        for i in 0..n_neg {
            docs.push(Document::new(format!("n{i}"), format!("neg text {i}"), Label::Negative, Source::Original));
        }
        Corpus::new("t", docs).unwrap()
    }

    #[test]
    fn label_encodings() {
        assert_eq!("1".parse::<Label>(), Ok(Label::Positive));
        assert_eq!("gender_hs".parse::<Label>(), Ok(Label::Positive));
        assert_eq!("0".parse::<Label>(), Ok(Label::Negative));
        assert_eq!("non_gender_hs".parse::<Label>(), Ok(Label::Negative));
        assert!("maybe".parse::<Label>().is_err());
    }

    #[test]
    fn ingest_two_row_csv() {
        let f = tmp_file("id,text,label\na,halo dunia,1\nb,\"apa, kabar\",0\n", ".csv");
        let c = ingest(f.path(), Format::Csv).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.count(Label::Positive), 1);
        assert_eq!(c.count(Label::Negative), 1);
        assert_eq!(c.documents()[1].raw_text, "apa, kabar");
        assert!(c.documents().iter().all(|d| d.source == Source::Original));
    }

    #[test]
    fn ingest_bad_label_names_line() {
        let f = tmp_file("id,text,label\na,halo,1\nb,dunia,maybe\n", ".csv");
        let err = ingest(f.path(), Format::Csv).unwrap_err();
        match err {
            CorpusError::BadLabel { line, value } => {
                assert_eq!(line, 3);
                assert_eq!(value, "maybe");
            }
            e => panic!("unexpected {e}"),
        }
        let f = tmp_file("{\"text\":\"a\",\"label\":1}\n{\"text\":\"b\",\"label\":\"maybe\"}\n", ".jsonl");
        assert!(matches!(
            ingest(f.path(), Format::Jsonl),
            Err(CorpusError::BadLabel { line: 2, .. })
        ));
    }

    #[test]
    fn ingest_duplicate_and_auto_ids() {
        let f = tmp_file("id,text,label\na,x,1\na,y,0\n", ".csv");
        assert!(matches!(
            ingest(f.path(), Format::Csv),
            Err(CorpusError::Malformed { line: 3, .. })
        ));
        let f = tmp_file("text,label\nx,1\ny,0\n", ".csv");
        let c = ingest(f.path(), Format::Csv).unwrap();
        assert_eq!(c.documents()[0].id, "row-000001");
        assert_eq!(c.documents()[1].id, "row-000002");
    }

    #[test]
    fn ingest_malformed_jsonl() {
        let f = tmp_file("{\"text\":\"a\",\"label\":1}\nnot json\n", ".jsonl");
        assert!(matches!(
            ingest(f.path(), Format::Jsonl),
            Err(CorpusError::Malformed { line: 2, .. })
        ));
    }

    #[test]
    fn ingest_table_one_sized_jsonl() {
        let mut s = String::new();
        for i in 0..306 {
            s.push_str(&format!("{{\"id\":\"p{i}\",\"text\":\"t {i}\",\"label\":1}}\n"));
        }
        for i in 0..12863 {
            s.push_str(&format!("{{\"id\":\"n{i}\",\"text\":\"t {i}\",\"label\":\"0\"}}\n"));
        }
        let f = tmp_file(&s, ".jsonl");
        let c = ingest(f.path(), Format::Jsonl).unwrap();
        let comp = composition(&c);
        assert_eq!(comp.get(Source::Original, Label::Positive), 306);
        assert_eq!(comp.get(Source::Original, Label::Negative), 12863);
        assert_eq!(comp.total(), 13169);
    }

    #[test]
    fn write_then_ingest() {
        let c = labeled(3, 4);
        for fmt in [Format::Csv, Format::Jsonl] {
            let f = tempfile::NamedTempFile::new().unwrap();
            write_corpus(&c, f.path(), fmt).unwrap();
            let back = ingest(f.path(), fmt).unwrap();
            assert_eq!(back.documents(), c.documents());
        }
    }

    #[test]
    fn balance_table_counts() {
        let c = labeled(306, 12863);
        let b1 = balance(&c, 1.0, 3).unwrap();
        assert_eq!((b1.count(Label::Positive), b1.count(Label::Negative)), (306, 306));
        let b2 = balance(&c, 2.0, 3).unwrap();
        assert_eq!((b2.count(Label::Positive), b2.count(Label::Negative)), (306, 612));
    }

    #[test]
    fn balance_already_balanced_is_unchanged() {
        let c = labeled(10, 10);
        let b = balance(&c, 1.0, 99).unwrap();
        assert_eq!(b.documents(), c.documents());
    }

    #[test]
    fn balance_errors() {
        assert!(matches!(balance(&labeled(0, 5), 1.0, 0), Err(CorpusError::NoPositives)));
        assert!(matches!(
            balance(&labeled(5, 6), 2.0, 0),
            Err(CorpusError::InsufficientNegatives { requested: 10, available: 6 })
        ));
        assert!(matches!(balance(&labeled(5, 6), 0.5, 0), Err(CorpusError::InvalidRatio(_))));
    }

    #[test]
    fn composition_of_empty_and_augmented() {
        let empty = composition(&Corpus::empty("e"));
        assert_eq!(empty.total(), 0);
        assert!(empty.rows().iter().all(|r| r.negative == 0 && r.positive == 0));

        let base = labeled(306, 612);
        let gen = (0..306).map(|i| {
            Document::new(format!("dual-{i}"), "x y z", Label::Positive, Source::DualClassGen)
        });
        let all = base.extended(gen).unwrap();
        let comp = composition(&all);
        assert_eq!(comp.get(Source::DualClassGen, Label::Positive), 306);
        assert_eq!(comp.get(Source::DualClassGen, Label::Negative), 0);
        assert_eq!(comp.get(Source::Original, Label::Negative), 612);
        assert_eq!(comp.total(), all.len());
    }

    #[test]
    fn corpus_rejects_blank_text() {
        let d = Document::new("a", "   ", Label::Positive, Source::Original);
        assert!(matches!(Corpus::new("x", vec![d]), Err(CorpusError::EmptyText { .. })));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn balance_is_seeded_and_keeps_positives(
                n_pos in 1usize..20, extra in 0usize..30, ratio in 1.0f64..2.0, seed in any::<u64>()
            ) {
                let n_neg = (ratio * n_pos as f64).floor() as usize + extra;
                let c = labeled(n_pos, n_neg);
                let a = balance(&c, ratio, seed).unwrap();
                let b = balance(&c, ratio, seed).unwrap();
                let ids = |c: &Corpus| c.documents().iter().map(|d| d.id.clone()).collect::<Vec<_>>();
                prop_assert_eq!(ids(&a), ids(&b));
                let pos = |c: &Corpus| c.with_label(Label::Positive).map(|d| d.id.clone()).collect::<HashSet<_>>();
                prop_assert_eq!(pos(&a), pos(&c));
            }

            #[test]
            fn composition_conserves_count(labels in proptest::collection::vec((0usize..4, any::<bool>()), 0..50)) {
                let docs = labels.iter().enumerate().map(|(i, (s, l))| {
                    Document::new(
                        format!("d{i}"),
                        "t",
                        if *l { Label::Positive } else { Label::Negative },
                        Source::ALL[*s],
                    )
                }).collect();
                let c = Corpus::new("p", docs).unwrap();
                let comp = composition(&c);
                let sum: usize = comp.rows().iter().map(|r| r.negative + r.positive).sum();
                prop_assert_eq!(sum, c.len());
            }
        }
    }
}

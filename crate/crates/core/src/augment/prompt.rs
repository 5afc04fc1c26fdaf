//! Few-shot prompt rendering.

use super::AugmentError;

pub const NEGATIVE_HEADER: &str =
    "The following tweets belong to the category of 'non-hate speech towards gender':";
pub const POSITIVE_HEADER: &str = "The following tweets belong to the category of 'hate speech towards gender':";
pub const INSTRUCTION: &str = "Please generate a new tweet that belongs to the category of 'hate speech towards gender'. Important requirement: Generate the tweet in Indonesian language.";
pub const CUE: &str = "Generated tweet:";

/// Number of examples per class in a dual-class prompt.
pub const DUAL_EXAMPLES_PER_CLASS: usize = 5;

/// Layout of a generation prompt: optional negative block, positive block,
/// then the instruction and answer cue. Examples are numbered from 1 and
/// inserted verbatim (embedded newlines are kept).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub negative_header: String,
    pub positive_header: String,
    pub instruction: String,
    pub cue: String,
}

impl Default for PromptTemplate {
    fn default() -> Self {
        PromptTemplate {
            negative_header: NEGATIVE_HEADER.to_string(),
            positive_header: POSITIVE_HEADER.to_string(),
            instruction: INSTRUCTION.to_string(),
            cue: CUE.to_string(),
        }
    }
}

impl PromptTemplate {
    fn push_block<S: AsRef<str>>(out: &mut String, header: &str, examples: &[S]) {
        out.push_str(header);
        out.push_str("\n\n");
        for (i, ex) in examples.iter().enumerate() {
            out.push_str(&format!("{}. {}\n", i + 1, ex.as_ref()));
        }
        out.push('\n');
    }

    fn finish(&self, mut out: String) -> String {
        out.push_str(&self.instruction);
        out.push('\n');
        out.push_str(&self.cue);
        out
    }

    pub fn render_dual<N: AsRef<str>, P: AsRef<str>>(&self, negative: &[N], positive: &[P]) -> String {
        let mut out = String::new();
        Self::push_block(&mut out, &self.negative_header, negative);
        Self::push_block(&mut out, &self.positive_header, positive);
        self.finish(out)
    }

    pub fn render_single<P: AsRef<str>>(&self, positive: &[P]) -> String {
        let mut out = String::new();
        Self::push_block(&mut out, &self.positive_header, positive);
        self.finish(out)
    }
}

fn check_examples<S: AsRef<str>>(examples: &[S], class: &str) -> Result<(), AugmentError> {
    if let Some(i) = examples.iter().position(|e| e.as_ref().trim().is_empty()) {
        return Err(AugmentError::Precondition(format!("{class} example #{} is empty", i + 1)));
    }
    Ok(())
}

/// Renders the dual-class prompt: five negative then five positive examples.
pub fn build_dual_class_prompt<N: AsRef<str>, P: AsRef<str>>(
    negative_examples: &[N],
    positive_examples: &[P],
) -> Result<String, AugmentError> {
    for (n, class) in [(negative_examples.len(), "negative"), (positive_examples.len(), "positive")] {
        if n != DUAL_EXAMPLES_PER_CLASS {
            return Err(AugmentError::Precondition(format!(
                "dual-class prompt needs exactly {DUAL_EXAMPLES_PER_CLASS} {class} examples, got {n}"
            )));
        }
    }
    check_examples(negative_examples, "negative")?;
    check_examples(positive_examples, "positive")?;
    Ok(PromptTemplate::default().render_dual(negative_examples, positive_examples))
}

/// Renders the single-class prompt from `k >= 1` positive examples.
pub fn build_single_class_prompt<P: AsRef<str>>(positive_examples: &[P]) -> Result<String, AugmentError> {
    if positive_examples.is_empty() {
        return Err(AugmentError::Precondition(
            "single-class prompt needs at least one example".into(),
        ));
    }
    check_examples(positive_examples, "positive")?;
    Ok(PromptTemplate::default().render_single(positive_examples))
}

/// Cleans a raw completion: drops an echoed answer cue, then trims
/// whitespace and one pair of surrounding quotes.
pub fn parse_completion(raw: &str) -> String {
    let mut s = raw.trim();
    if s.len() >= CUE.len() && s[..CUE.len()].eq_ignore_ascii_case(CUE) {
        s = s[CUE.len()..].trim();
    }
    for (open, close) in [('"', '"'), ('\'', '\''), ('\u{201c}', '\u{201d}')] {
        if s.len() >= 2 && s.starts_with(open) && s.ends_with(close) {
            s = s[open.len_utf8()..s.len() - close.len_utf8()].trim();
            break;
        }
    }
    s.to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn five(prefix: &str) -> Vec<String> {
        (1..=5).map(|i| format!("{prefix}{i}")).collect()
    }

    #[test]
    fn dual_contains_both_blocks_in_order() {
        let p = build_dual_class_prompt(&five("n"), &five("p")).unwrap();
        let neg = p.find(NEGATIVE_HEADER).unwrap();
        let pos = p.find(POSITIVE_HEADER).unwrap();
        assert!(neg < pos);
        for i in 1..=5 {
            assert!(p.contains(&format!("{i}. n{i}\n")));
            assert!(p.contains(&format!("{i}. p{i}\n")));
        }
        assert!(p.ends_with(&format!("{INSTRUCTION}\n{CUE}")));
    }

    #[test]
    fn dual_arity_and_empty_errors() {
        assert!(build_dual_class_prompt(&five("n"), &five("p")[..4]).is_err());
        assert!(build_dual_class_prompt(&five("n")[..3], &five("p")).is_err());
        let mut bad = five("p");
        bad[2] = "  ".into();
        assert!(build_dual_class_prompt(&five("n"), &bad).is_err());
    }

    #[test]
    fn newlines_pass_through() {
        let mut pos = five("p");
        pos[0] = "line one\nline two".into();
        let p = build_dual_class_prompt(&five("n"), &pos).unwrap();
        assert!(p.contains("1. line one\nline two\n2. p2"));
    }

    #[test]
    fn single_class_variants() {
        let p = build_single_class_prompt(&five("p")).unwrap();
        assert!(!p.contains(NEGATIVE_HEADER));
        assert_eq!(p.matches(POSITIVE_HEADER).count(), 1);
        assert!(p.ends_with(CUE));

        let one = build_single_class_prompt(&["only"]).unwrap();
        assert!(one.contains("1. only\n"));
        assert!(!one.contains("2. "));

        assert!(build_single_class_prompt::<&str>(&[]).is_err());
    }

    #[test]
    fn single_is_dual_with_negative_block_elided() {
        let dual = build_dual_class_prompt(&five("n"), &five("p")).unwrap();
        let single = build_single_class_prompt(&five("p")).unwrap();
        let pos_start = dual.find(POSITIVE_HEADER).unwrap();
        assert_eq!(&dual[pos_start..], single);
    }

    #[test]
    fn completion_parsing() {
        assert_eq!(parse_completion("  halo semua \n"), "halo semua");
        assert_eq!(parse_completion("Generated tweet: \"dasar kamu\""), "dasar kamu");
        assert_eq!(parse_completion("generated tweet:   'x y'"), "x y");
        assert_eq!(parse_completion("\u{201c}kutip\u{201d}"), "kutip");
        assert_eq!(parse_completion("\"unbalanced"), "\"unbalanced");
    }

    #[test]
    fn prompt_length_monotone_in_example_length() {
        let mut prev = 0;
        for extra in 0..20 {
            let pos: Vec<String> = (0..5).map(|i| format!("p{i}{}", "x".repeat(extra))).collect();
            let len = build_dual_class_prompt(&five("n"), &pos).unwrap().len();
            assert!(len > prev);
            prev = len;
        }
    }
}

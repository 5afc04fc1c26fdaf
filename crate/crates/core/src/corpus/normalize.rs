use std::sync::OnceLock;

use regex::Regex;

pub const NUM_PLACEHOLDER: &str = "[NUM]";
pub const USERNAME_PLACEHOLDER: &str = "[USERNAME]";

enum Segment {
    Text(String),
    Placeholder(&'static str),
}

fn placeholder_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\[NUM\]|\[USERNAME\]").unwrap())
}

fn handle_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"@\w+").unwrap())
}

fn digits_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\d+").unwrap())
}

fn non_letter_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"[^\p{L}\s]+").unwrap())
}

fn whitespace_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\s+").unwrap())
}

/// Splits every text segment on `re`, turning each match into the placeholder
/// chosen by `pick`.
fn substitute(
    segments: Vec<Segment>,
    re: &Regex,
    pick: impl Fn(&str) -> &'static str,
) -> Vec<Segment> {
    let mut out = Vec::with_capacity(segments.len());
    for seg in segments {
        match seg {
            Segment::Text(text) => {
                let mut last = 0;
                for m in re.find_iter(&text) {
                    if m.start() > last {
                        out.push(Segment::Text(text[last..m.start()].to_string()));
                    }
                    out.push(Segment::Placeholder(pick(m.as_str())));
                    last = m.end();
                }
                if last < text.len() {
                    out.push(Segment::Text(text[last..].to_string()));
                }
            }
            p => out.push(p),
        }
    }
    out
}

/// Canonical text normalization applied before tokenization.
///
/// Steps, in order: @-handles become `[USERNAME]`, digit runs become `[NUM]`,
/// text is lowercased, everything except Unicode letters, whitespace and the
/// two placeholders is dropped, and whitespace is collapsed and trimmed.
/// Placeholders already present in the input are kept verbatim, which makes
/// the function idempotent.
pub fn normalize(raw_text: &str) -> String {
    let mut segments = substitute(
        vec![Segment::Text(raw_text.to_string())],
        placeholder_re(),
        |lit| {
            if lit == NUM_PLACEHOLDER {
                NUM_PLACEHOLDER
            } else {
                USERNAME_PLACEHOLDER
            }
        },
    );
    segments = substitute(segments, handle_re(), |_| USERNAME_PLACEHOLDER);
    segments = substitute(segments, digits_re(), |_| NUM_PLACEHOLDER);

    let mut joined = String::with_capacity(raw_text.len());
    for seg in segments {
        match seg {
            Segment::Text(t) => {
                let lowered = t.to_lowercase();
                joined.push_str(&non_letter_re().replace_all(&lowered, ""));
            }
            Segment::Placeholder(p) => joined.push_str(p),
        }
    }
    whitespace_re().replace_all(joined.trim(), " ").into_owned()
}

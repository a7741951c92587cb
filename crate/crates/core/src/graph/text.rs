use std::sync::OnceLock;

use regex::Regex;

fn zbl_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        let code = r"Zbl\s*\d+(?:\.\d+)?";
        Regex::new(&format!(
            r"\s*(?:\[\s*{code}\s*\]|\(\s*{code}\s*\)|\b{code}\b)\s*"
        ))
        .expect("static pattern")
    })
}

/// Removes zbMATH document identifiers (`Zbl 0940.14001`, optionally wrapped
/// in `[...]` or `(...)`) from an abstract. The whitespace around a removed
/// identifier collapses to a single space, or to nothing at either end of the
/// text.
pub fn strip_reference_mentions(text: &str) -> String {
    let re = zbl_pattern();
    let mut current = text.to_string();
    // Removing one mention can splice together a new one ("Zbl [Zbl 1] 2").
    while re.is_match(&current) {
        let len = current.len();
        current = re
            .replace_all(&current, |caps: &regex::Captures<'_>| {
                let m = caps.get(0).expect("whole match");
                if m.start() == 0 || m.end() == len {
                    ""
                } else {
                    " "
                }
            })
            .into_owned();
    }
    current
}

//! Cell text normalization ahead of tokenization and embedding.
//!
//! Markdown loses hyperlinks, heading markers, and the characters
//! `{ } : ` " ' !`, and has its whitespace collapsed. Code keeps its syntax;
//! only Jupyter magics, shell escapes, trailing whitespace, and long runs of
//! blank lines are removed.

use std::sync::OnceLock;

use regex::Regex;

/// Characters deleted from markdown text.
pub const MARKDOWN_DELETED_CHARS: [char; 7] = ['{', '}', ':', '`', '"', '\'', '!'];

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CleanText {
    pub text: String,
    pub removed_url_count: usize,
}

fn link_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    // [anchor](target "optional title")
    RE.get_or_init(|| Regex::new(r#"\[([^\[\]]*)\]\(\s*([^()\s]*)(?:\s+"[^"]*")?\s*\)"#).unwrap())
}

fn autolink_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"<https?://[^>\s]*>").unwrap())
}

fn bare_url_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"https?://\S*").unwrap())
}

fn heading_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?m)^[ \t]*#[ \t#]*").unwrap())
}

pub fn clean_markdown(source: &str) -> CleanText {
    let mut text = source.to_string();
    let mut removed_url_count = 0;
    // A pass can expose new patterns (e.g. `[[a](x)](y)`), so iterate to a
    // fixed point. Every changing pass shortens the text or removes newlines.
    loop {
        let (next, urls) = markdown_pass(&text);
        removed_url_count += urls;
        if next == text {
            break;
        }
        text = next;
    }
    CleanText { text, removed_url_count }
}

fn markdown_pass(input: &str) -> (String, usize) {
    let mut urls = link_re().find_iter(input).count();
    let s = link_re().replace_all(input, "$1");
    urls += autolink_re().find_iter(&s).count();
    let s = autolink_re().replace_all(&s, "");
    urls += bare_url_re().find_iter(&s).count();
    let s = bare_url_re().replace_all(&s, "");
    let s: String = s.chars().filter(|c| !MARKDOWN_DELETED_CHARS.contains(c)).collect();
    let s = heading_re().replace_all(&s, "");
    (s.split_whitespace().collect::<Vec<_>>().join(" "), urls)
}

fn is_magic_line(line: &str) -> bool {
    matches!(line.trim_start().chars().next(), Some('%') | Some('!'))
}

pub fn clean_code(source: &str) -> CleanText {
    let mut lines: Vec<&str> = Vec::new();
    let mut blank_run = 0usize;
    for line in source.lines().map(str::trim_end).filter(|l| !is_magic_line(l)) {
        if line.is_empty() {
            blank_run += 1;
            continue;
        }
        if !lines.is_empty() {
            // runs of three or more blank lines shrink to one
            let keep = if blank_run >= 3 { 1 } else { blank_run };
            lines.extend(std::iter::repeat_n("", keep));
        }
        blank_run = 0;
        lines.push(line);
    }
    CleanText { text: lines.join("\n"), removed_url_count: 0 }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn markdown_heading_link_and_punctuation() {
        let c = clean_markdown("## Intro: see [docs](https://ex.com/d)!");
        assert_eq!(c, CleanText { text: "Intro see docs".into(), removed_url_count: 1 });
    }

    #[test]
    fn markdown_empty_and_plain() {
        assert_eq!(clean_markdown(""), CleanText::default());
        assert_eq!(clean_markdown("plain paragraph with no markup").text, "plain paragraph with no markup");
    }

    #[test]
    fn markdown_bare_and_auto_links() {
        let c = clean_markdown("Data from https://x.org/a.csv and <http://y.io/b>.\nDone");
        assert_eq!(c.text, "Data from and . Done");
        assert_eq!(c.removed_url_count, 2);
    }

    #[test]
    fn markdown_nested_link_reaches_fixed_point() {
        let c = clean_markdown("[[a](x)](y)");
        assert_eq!(c.text, "a");
        assert_eq!(c.removed_url_count, 2);
    }

    #[test]
    fn markdown_image_keeps_alt_text() {
        assert_eq!(clean_markdown("![loss curve](img/loss.png)").text, "loss curve");
    }

    #[test]
    fn markdown_collapses_multiline() {
        let c = clean_markdown("# Title\n\n  * item `one`\n  * item {two}\n");
        assert_eq!(c.text, "Title * item one * item two");
    }

    #[test]
    fn code_blank_runs() {
        assert_eq!(clean_code("x = 1   \n\n\n\n\ny = 2").text, "x = 1\n\ny = 2");
        assert_eq!(clean_code("a\n\n\nb").text, "a\n\n\nb");
    }

    #[test]
    fn code_magic_lines() {
        assert_eq!(clean_code("%matplotlib inline\nimport os").text, "import os");
        assert_eq!(clean_code("!pip install x\n  %time f()\nf()").text, "f()");
    }

    #[test]
    fn code_identity() {
        let src = "def f(a: int) -> int:\n    return a";
        assert_eq!(clean_code(src).text, src);
        assert_eq!(clean_code("print('it\"s: {x}!')").text, "print('it\"s: {x}!')");
    }

    #[test]
    fn code_trims_outer_blank_lines() {
        assert_eq!(clean_code("\n\n  \nx = 1\n\n").text, "x = 1");
    }

    proptest! {
        #[test]
        fn markdown_idempotent(s in "[a-z #\\[\\]()!:'\"{}`<>/.\n htps]{0,60}") {
            let once = clean_markdown(&s).text;
            prop_assert_eq!(clean_markdown(&once).text, once);
        }

        #[test]
        fn markdown_charset_and_urls(s in "\\PC{0,80}") {
            let t = clean_markdown(&s).text;
            prop_assert!(!t.chars().any(|c| MARKDOWN_DELETED_CHARS.contains(&c)));
            prop_assert!(!t.contains("http://") && !t.contains("https://"));
            prop_assert!(!t.contains("  ") && !t.contains('\n'));
            prop_assert_eq!(t.trim(), t.as_str());
        }

        #[test]
        fn code_idempotent(s in "[a-z=%! \t\n:'\"]{0,80}") {
            let once = clean_code(&s).text;
            prop_assert_eq!(clean_code(&once).text, once);
        }

        #[test]
        fn code_keeps_ordinary_lines(s in "[a-z=:'\" ]{0,20}(\n[a-z=:'\" %!]{0,20}){0,8}") {
            let cleaned = clean_code(&s).text;
            let kept: Vec<&str> = cleaned.lines().filter(|l| !l.is_empty()).collect();
            let expected: Vec<&str> = s
                .lines()
                .map(str::trim_end)
                .filter(|l| !l.is_empty() && !is_magic_line(l))
                .collect();
            prop_assert_eq!(kept, expected);
        }
    }
}

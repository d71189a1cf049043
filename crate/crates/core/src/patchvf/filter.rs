//! Rule-based filtering of vulnerability-irrelevant hunks.
//!
//! A candidate is dropped when its pre/post texts are equal after
//! normalization (whitespace, comments, string quote style), when the only
//! difference is logging or debug statements, or when a deletion removes a
//! trivial field accessor. Everything else is kept.

use std::path::Path;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::diff::{Hunk, HunkKind};
use super::{DecisionSource, PatchError, VfDecision, Verdict};

/// Default logger call patterns, matched against each trimmed source line.
pub const DEFAULT_LOGGING_PATTERNS: &[&str] = &[
    r"^(this\.)?(log|logger|LOG|LOGGER|Log|Logger|_log|_logger)\s*\.\s*(trace|debug|info|warn|warning|error|fatal|fine|finer|finest|severe|log)\s*\(",
    r"^System\s*\.\s*(out|err)\s*\.\s*print(ln|f)?\s*\(",
    r"^console\s*\.\s*(log|debug|info|warn|error|trace)\s*\(",
    r"^(\w+\s*\.\s*)?printStackTrace\s*\(",
    r"^(println|eprintln|print|eprint|dbg|trace|debug|info|warn|error)!\s*\(",
    r"^(if\s*\(\s*)?(log|logger|LOG|LOGGER)\s*\.\s*is(Trace|Debug|Info)Enabled\s*\(\s*\)\s*\)?\s*\{?\s*$",
];

/// `filters.toml` layout:
///
/// ```toml
/// logging = ['^log\.debug\(', '^System\.out\.println\(']
/// ```
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterConfig {
    pub logging: Vec<String>,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            logging: DEFAULT_LOGGING_PATTERNS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl FilterConfig {
    pub fn from_toml(text: &str) -> Result<Self, PatchError> {
        toml::from_str(text).map_err(|e| PatchError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, PatchError> {
        let text = std::fs::read_to_string(path).map_err(|e| PatchError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }
}

#[derive(Clone, Debug)]
pub struct HeuristicFilter {
    logging: Vec<Regex>,
}

impl Default for HeuristicFilter {
    fn default() -> Self {
        HeuristicFilter::new(&FilterConfig::default()).expect("default patterns compile")
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Token {
    Word(String),
    Str(String),
    Punct(char),
}

/// Quote-sensitive view of a token stream, for telling "only whitespace or
/// comments changed" apart from "quote style changed".
fn quoted(tokens: &[(Token, char)]) -> Vec<(&Token, char)> {
    tokens.iter().map(|(t, q)| (t, *q)).collect()
}

fn bare(tokens: &[(Token, char)]) -> Vec<&Token> {
    tokens.iter().map(|(t, _)| t).collect()
}

/// Tokenizes source text, dropping whitespace and comments. String and char
/// literals become `Str` tokens paired with their quote character.
fn tokenize(text: &str) -> Vec<(Token, char)> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
        } else if c == '/' && chars.get(i + 1) == Some(&'*') {
            i += 2;
            while i < chars.len() && !(chars[i] == '*' && chars.get(i + 1) == Some(&'/')) {
                i += 1;
            }
            i += 2;
        } else if c == '"' || c == '\'' || c == '`' {
            let mut s = String::new();
            i += 1;
            while i < chars.len() && chars[i] != c && chars[i] != '\n' {
                if chars[i] == '\\' && i + 1 < chars.len() && chars[i + 1] != '\n' {
                    // normalize escaped quotes so '\'' and "'" compare equal
                    if chars[i + 1] == '"' || chars[i + 1] == '\'' || chars[i + 1] == '`' {
                        s.push(chars[i + 1]);
                    } else {
                        s.push('\\');
                        s.push(chars[i + 1]);
                    }
                    i += 2;
                    continue;
                }
                s.push(chars[i]);
                i += 1;
            }
            if chars.get(i) == Some(&'\n') {
                // unterminated literal ends at the line break
                s.truncate(s.trim_end().len());
            } else {
                i += 1;
            }
            out.push((Token::Str(s), c));
        } else if c.is_alphanumeric() || c == '_' || c == '$' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_' || chars[i] == '$' || chars[i] == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit()) && chars[start].is_ascii_digit()) {
                i += 1;
            }
            out.push((Token::Word(chars[start..i].iter().collect()), ' '));
        } else {
            out.push((Token::Punct(c), ' '));
            i += 1;
        }
    }
    out
}

/// Collapses runs of whitespace outside string literals and comments,
/// trims lines and drops blank ones. Line structure is preserved, and
/// literal contents are copied verbatim.
pub fn normalize_whitespace(text: &str) -> String {
    #[derive(PartialEq)]
    enum State {
        Code,
        Str(char),
        Block,
    }
    let mut state = State::Code;
    let mut out = String::new();
    for line in text.lines() {
        let chars: Vec<char> = line.chars().collect();
        let mut buf = String::new();
        let mut pending_space = false;
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            match state {
                State::Code => {
                    if c.is_whitespace() {
                        pending_space = !buf.is_empty();
                        i += 1;
                        continue;
                    }
                    if pending_space {
                        buf.push(' ');
                        pending_space = false;
                    }
                    if c == '/' && chars.get(i + 1) == Some(&'/') {
                        buf.extend(&chars[i..]);
                        break;
                    }
                    if c == '/' && chars.get(i + 1) == Some(&'*') {
                        buf.push_str("/*");
                        state = State::Block;
                        i += 2;
                        continue;
                    }
                    if c == '"' || c == '\'' || c == '`' {
                        state = State::Str(c);
                    }
                    buf.push(c);
                }
                State::Str(q) => {
                    buf.push(c);
                    if c == '\\' && i + 1 < chars.len() {
                        buf.push(chars[i + 1]);
                        i += 2;
                        continue;
                    }
                    if c == q {
                        state = State::Code;
                    }
                }
                State::Block => {
                    buf.push(c);
                    if c == '*' && chars.get(i + 1) == Some(&'/') {
                        buf.push('/');
                        state = State::Code;
                        i += 2;
                        continue;
                    }
                }
            }
            i += 1;
        }
        // string literals never span lines
        if matches!(state, State::Str(_)) {
            state = State::Code;
        }
        if !buf.is_empty() {
            out.push_str(&buf);
            out.push('\n');
        }
    }
    out
}

/// Body tokens of a trivial accessor: `return [this.]field;` or
/// `[this.]field = value;`, optionally wrapped in a single function.
fn is_trivial_accessor(text: &str) -> bool {
    let toks = tokenize(text);
    let toks = bare(&toks);
    // take the outermost brace block if there is one
    let body: &[&Token] = match toks.iter().position(|t| **t == Token::Punct('{')) {
        Some(open) => {
            let Some(close) = toks.iter().rposition(|t| **t == Token::Punct('}')) else {
                return false;
            };
            if close <= open {
                return false;
            }
            &toks[open + 1..close]
        }
        None => &toks[..],
    };
    let is_word = |t: &Token| matches!(t, Token::Word(_));
    let strip_this = |s: &[&Token]| -> Vec<Token> {
        let v: Vec<Token> = s.iter().map(|t| (*t).clone()).collect();
        if v.len() >= 2 && v[0] == Token::Word("this".into()) && v[1] == Token::Punct('.') {
            v[2..].to_vec()
        } else {
            v
        }
    };
    match body {
        [] => false,
        [Token::Word(r), rest @ ..] if r == "return" => {
            let rest = strip_this(rest);
            matches!(rest.as_slice(), [f, Token::Punct(';')] if is_word(f))
        }
        _ => {
            let rest = strip_this(body);
            matches!(rest.as_slice(), [f, Token::Punct('='), v, Token::Punct(';')] if is_word(f) && is_word(v))
        }
    }
}

impl HeuristicFilter {
    pub fn new(config: &FilterConfig) -> Result<Self, PatchError> {
        let logging = config
            .logging
            .iter()
            .map(|p| Regex::new(p).map_err(|e| PatchError::Config(format!("pattern `{p}`: {e}"))))
            .collect::<Result<_, _>>()?;
        Ok(HeuristicFilter { logging })
    }

    fn is_logging_line(&self, line: &str) -> bool {
        let t = line.trim();
        self.logging.iter().any(|r| r.is_match(t))
    }

    fn without_logging(&self, text: &str) -> String {
        text.lines()
            .filter(|l| !self.is_logging_line(l))
            .collect::<Vec<_>>()
            .join("\n")
    }

    /// Decides whether the change from `pre_text` to `post_text` in `hunk`
    /// could matter to a vulnerability.
    pub fn decide(&self, hunk: &Hunk, pre_text: &str, post_text: &str) -> VfDecision {
        let fqn = hunk.touched_fqns.iter().next().cloned().unwrap_or_default();
        let decision = |verdict, reason: &str| VfDecision {
            fqn: fqn.clone(),
            verdict,
            reason: reason.to_owned(),
            source: DecisionSource::Heuristic,
        };

        let deletion = matches!(hunk.kind, HunkKind::FunctionDeletion | HunkKind::InternalDeletion);
        if deletion && is_trivial_accessor(pre_text) {
            return decision(Verdict::Drop, "trivial accessor: only reads or writes a field, no logic");
        }
        if hunk.kind != HunkKind::FunctionDeletion {
            let (a, b) = (tokenize(pre_text), tokenize(post_text));
            if quoted(&a) == quoted(&b) {
                return decision(Verdict::Drop, "semantics-equivalent: whitespace or comments only");
            }
            if bare(&a) == bare(&b) {
                return decision(Verdict::Drop, "semantics-equivalent: literal quoting");
            }
            let (a, b) = (
                tokenize(&self.without_logging(pre_text)),
                tokenize(&self.without_logging(post_text)),
            );
            if bare(&a) == bare(&b) {
                return decision(Verdict::Drop, "logging/debug statements only");
            }
        }
        decision(Verdict::Keep, "semantics-changing modification")
    }
}

/// [`HeuristicFilter::decide`] with the default configuration.
pub fn heuristic_filter(hunk: &Hunk, pre_text: &str, post_text: &str) -> VfDecision {
    HeuristicFilter::default().decide(hunk, pre_text, post_text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::patchvf::diff::LineRange;
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    fn hunk(kind: HunkKind) -> Hunk {
        Hunk {
            file: "f".into(),
            pre_range: LineRange { start: 1, len: 1 },
            post_range: LineRange { start: 1, len: 1 },
            removed: vec![],
            added: vec![],
            kind,
            touched_fqns: BTreeSet::from(["X.toString".to_owned()]),
            pre_text: String::new(),
            post_text: String::new(),
        }
    }

    #[test]
    fn quote_style_change_is_dropped() {
        let pre = "    buf.append(\"?\");\n";
        let post = "    buf.append('?');\n";
        let d = heuristic_filter(&hunk(HunkKind::InternalModification), pre, post);
        assert_eq!(d.verdict, Verdict::Drop);
        assert_eq!(d.reason, "semantics-equivalent: literal quoting");
    }

    #[test]
    fn whitespace_reflow_is_dropped() {
        let pre = "int x = a+b;\n";
        let post = "int x =\n    a + b; // sum\n";
        let d = heuristic_filter(&hunk(HunkKind::InternalModification), pre, post);
        assert_eq!(d.verdict, Verdict::Drop);
        assert!(d.reason.contains("whitespace"));
    }

    #[test]
    fn logging_only_change_is_dropped() {
        let pre = "  process(req);\n";
        let post = "  LOG.debug(\"processing {}\", req);\n  process(req);\n";
        let d = heuristic_filter(&hunk(HunkKind::InternalAddition), pre, post);
        assert_eq!((d.verdict, d.reason.as_str()), (Verdict::Drop, "logging/debug statements only"));
    }

    #[test]
    fn bounds_check_is_kept() {
        let pre = "  return buf[i];\n";
        let post = "  if (i >= buf.length) { throw new IndexOutOfBoundsException(); }\n  return buf[i];\n";
        let d = heuristic_filter(&hunk(HunkKind::InternalAddition), pre, post);
        assert_eq!(d.verdict, Verdict::Keep);
        assert_eq!(d.source, DecisionSource::Heuristic);
    }

    #[test]
    fn accessor_deletions_are_dropped_but_real_deletions_kept() {
        let getter = "public Session getAdvisorySession() {\n    return this.advisorySession;\n}\n";
        let setter = "public void setAdvisorySession(Session s) {\n    this.advisorySession = s;\n}\n";
        let logic = "public void close() {\n    session.close();\n    closed = true;\n}\n";
        let f = HeuristicFilter::default();
        assert_eq!(f.decide(&hunk(HunkKind::FunctionDeletion), getter, "").verdict, Verdict::Drop);
        assert_eq!(f.decide(&hunk(HunkKind::FunctionDeletion), setter, "").verdict, Verdict::Drop);
        assert_eq!(f.decide(&hunk(HunkKind::FunctionDeletion), logic, "").verdict, Verdict::Keep);
    }

    #[test]
    fn custom_config_round_trips_from_toml() {
        let cfg = FilterConfig::from_toml("logging = ['^audit\\(']\n").unwrap();
        let f = HeuristicFilter::new(&cfg).unwrap();
        let d = f.decide(&hunk(HunkKind::InternalAddition), "go();\n", "audit(x);\ngo();\n");
        assert_eq!(d.verdict, Verdict::Drop);
        let d = f.decide(&hunk(HunkKind::InternalAddition), "go();\n", "LOG.info(x);\ngo();\n");
        assert_eq!(d.verdict, Verdict::Keep);
        assert!(FilterConfig::from_toml("logging = ['(']").map(|c| HeuristicFilter::new(&c)).unwrap().is_err());
    }

    proptest! {
        #[test]
        fn decisions_invariant_under_whitespace_normalization(
            pre in "[ a-z;=(){}\"'\n\t]{0,40}",
            post in "[ a-z;=(){}\"'\n\t]{0,40}",
            kind in prop::sample::select(vec![
                HunkKind::InternalAddition, HunkKind::InternalDeletion,
                HunkKind::InternalModification, HunkKind::FunctionDeletion,
            ]),
        ) {
            let f = HeuristicFilter::default();
            let h = hunk(kind);
            let raw = f.decide(&h, &pre, &post);
            let norm = f.decide(&h, &normalize_whitespace(&pre), &normalize_whitespace(&post));
            prop_assert_eq!(raw.clone(), norm);
            prop_assert_eq!(raw, f.decide(&h, &pre, &post));
        }
    }
}

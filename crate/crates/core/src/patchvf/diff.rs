//! Unified diff parsing and function-level hunk classification.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::funcmap::FunctionMap;
use super::PatchError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LineKind {
    Context,
    Removed,
    Added,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiffLine {
    pub kind: LineKind,
    pub text: String,
}

/// Start line and line count of one side of a hunk header.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineRange {
    pub start: u32,
    pub len: u32,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DiffHunk {
    pub pre: LineRange,
    pub post: LineRange,
    pub lines: Vec<DiffLine>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DiffFile {
    pub old_path: Option<String>,
    pub new_path: Option<String>,
    pub hunks: Vec<DiffHunk>,
}

impl DiffFile {
    /// The file identifier used to look up function maps.
    pub fn file_id(&self) -> &str {
        self.new_path
            .as_deref()
            .or(self.old_path.as_deref())
            .unwrap_or_default()
    }
}

fn strip_path(raw: &str) -> Option<String> {
    let path = raw.split('\t').next().unwrap_or(raw).trim();
    if path == "/dev/null" {
        return None;
    }
    let path = path
        .strip_prefix("a/")
        .or_else(|| path.strip_prefix("b/"))
        .unwrap_or(path);
    Some(path.to_owned())
}

fn parse_range(s: &str, line: usize) -> Result<LineRange, PatchError> {
    let bad = || PatchError::MalformedDiff {
        line,
        message: format!("bad range `{s}`"),
    };
    let (start, len) = match s.split_once(',') {
        Some((a, b)) => (a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?),
        None => (s.parse().map_err(|_| bad())?, 1),
    };
    Ok(LineRange { start, len })
}

fn parse_header(text: &str, line: usize) -> Result<(LineRange, LineRange), PatchError> {
    let malformed = || PatchError::MalformedDiff {
        line,
        message: format!("bad hunk header `{text}`"),
    };
    let inner = text
        .strip_prefix("@@ ")
        .and_then(|r| r.split_once(" @@"))
        .map(|(h, _)| h)
        .ok_or_else(malformed)?;
    let (old, new) = inner.split_once(' ').ok_or_else(malformed)?;
    let old = old.strip_prefix('-').ok_or_else(malformed)?;
    let new = new.strip_prefix('+').ok_or_else(malformed)?;
    Ok((parse_range(old, line)?, parse_range(new, line)?))
}

/// Parses unified diff text into files and hunks, checking that every hunk
/// body matches its header counts.
pub fn parse_unified(text: &str) -> Result<Vec<DiffFile>, PatchError> {
    let mut files: Vec<DiffFile> = Vec::new();
    let lines: Vec<&str> = text.lines().collect();
    let mut i = 0;
    while i < lines.len() {
        let line = lines[i];
        if let Some(old) = line.strip_prefix("--- ") {
            let next = lines.get(i + 1).copied().unwrap_or_default();
            let new = next.strip_prefix("+++ ").ok_or_else(|| PatchError::MalformedDiff {
                line: i + 2,
                message: "expected `+++` after `---`".into(),
            })?;
            files.push(DiffFile {
                old_path: strip_path(old),
                new_path: strip_path(new),
                hunks: Vec::new(),
            });
            i += 2;
            continue;
        }
        if line.starts_with("@@ ") {
            let file = files.last_mut().ok_or_else(|| PatchError::MalformedDiff {
                line: i + 1,
                message: "hunk before file header".into(),
            })?;
            let (pre, post) = parse_header(line, i + 1)?;
            let (mut old_left, mut new_left) = (pre.len, post.len);
            let mut body = Vec::new();
            i += 1;
            while old_left > 0 || new_left > 0 {
                let Some(&l) = lines.get(i) else {
                    return Err(PatchError::MalformedDiff {
                        line: i + 1,
                        message: format!("hunk truncated, {old_left} old and {new_left} new lines missing"),
                    });
                };
                let (kind, rest) = match l.as_bytes().first() {
                    Some(b' ') => (LineKind::Context, &l[1..]),
                    None => (LineKind::Context, ""),
                    Some(b'-') => (LineKind::Removed, &l[1..]),
                    Some(b'+') => (LineKind::Added, &l[1..]),
                    Some(b'\\') => {
                        i += 1;
                        continue;
                    }
                    _ => {
                        return Err(PatchError::MalformedDiff {
                            line: i + 1,
                            message: format!("unexpected line inside hunk: `{l}`"),
                        })
                    }
                };
                let ok = match kind {
                    LineKind::Context => old_left > 0 && new_left > 0,
                    LineKind::Removed => old_left > 0,
                    LineKind::Added => new_left > 0,
                };
                if !ok {
                    return Err(PatchError::MalformedDiff {
                        line: i + 1,
                        message: "hunk body exceeds header line counts".into(),
                    });
                }
                if kind != LineKind::Added {
                    old_left -= 1;
                }
                if kind != LineKind::Removed {
                    new_left -= 1;
                }
                body.push(DiffLine {
                    kind,
                    text: rest.to_owned(),
                });
                i += 1;
            }
            while lines.get(i).is_some_and(|l| l.starts_with('\\')) {
                i += 1;
            }
            if let Some(l) = lines.get(i) {
                let overflow = (l.starts_with('+') && !l.starts_with("+++ "))
                    || (l.starts_with('-') && !l.starts_with("--- "));
                if overflow {
                    return Err(PatchError::MalformedDiff {
                        line: i + 1,
                        message: "hunk body exceeds header line counts".into(),
                    });
                }
            }
            file.hunks.push(DiffHunk {
                pre,
                post,
                lines: body,
            });
            continue;
        }
        // diff --git, index, mode lines and free text between files
        i += 1;
    }
    Ok(files)
}

/// Renders parsed files back into unified diff text.
pub fn render_unified(files: &[DiffFile]) -> String {
    let mut out = String::new();
    for f in files {
        let old = f.old_path.as_ref().map_or("/dev/null".to_owned(), |p| format!("a/{p}"));
        let new = f.new_path.as_ref().map_or("/dev/null".to_owned(), |p| format!("b/{p}"));
        let _ = writeln!(out, "--- {old}\n+++ {new}");
        for h in &f.hunks {
            out.push_str(&render_hunk(h));
        }
    }
    out
}

pub fn render_hunk(h: &DiffHunk) -> String {
    let mut out = format!(
        "@@ -{},{} +{},{} @@\n",
        h.pre.start, h.pre.len, h.post.start, h.post.len
    );
    for l in &h.lines {
        let sigil = match l.kind {
            LineKind::Context => ' ',
            LineKind::Removed => '-',
            LineKind::Added => '+',
        };
        out.push(sigil);
        out.push_str(&l.text);
        out.push('\n');
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HunkKind {
    FunctionAddition,
    FunctionDeletion,
    InternalDeletion,
    InternalAddition,
    InternalModification,
}

/// A diff hunk restricted to one function.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hunk {
    pub file: String,
    pub pre_range: LineRange,
    pub post_range: LineRange,
    pub removed: Vec<String>,
    pub added: Vec<String>,
    pub kind: HunkKind,
    pub touched_fqns: BTreeSet<String>,
    /// Pre-patch text of the function region covered by the hunk.
    pub pre_text: String,
    /// Post-patch text of the function region covered by the hunk.
    pub post_text: String,
}

impl Hunk {
    /// Diff-style rendering of this function's changes.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for r in &self.removed {
            let _ = writeln!(out, "-{r}");
        }
        for a in &self.added {
            let _ = writeln!(out, "+{a}");
        }
        out
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseOutcome {
    pub hunks: Vec<Hunk>,
    /// Diff hunks whose changes touch no function.
    pub discarded: usize,
    pub warnings: Vec<String>,
}

#[derive(Default)]
struct Group {
    removed: Vec<String>,
    added: Vec<String>,
    pre_text: Vec<String>,
    post_text: Vec<String>,
}

/// Splits a unified diff into function-level hunks and classifies each.
pub fn parse_patch(diff_text: &str, pre_map: &FunctionMap, post_map: &FunctionMap) -> Result<ParseOutcome, PatchError> {
    let files = parse_unified(diff_text)?;
    Ok(classify_files(&files, pre_map, post_map))
}

pub fn classify_files(files: &[DiffFile], pre_map: &FunctionMap, post_map: &FunctionMap) -> ParseOutcome {
    let mut out = ParseOutcome::default();
    for f in files {
        let pre_file = f.old_path.as_deref();
        let post_file = f.new_path.as_deref();
        for h in &f.hunks {
            let mut groups: BTreeMap<String, Group> = BTreeMap::new();
            let mut unmapped = 0usize;
            let (mut old_ln, mut new_ln) = (h.pre.start, h.post.start);
            for l in &h.lines {
                let pre_fn = pre_file.and_then(|p| pre_map.find(p, old_ln));
                let post_fn = post_file.and_then(|p| post_map.find(p, new_ln));
                match l.kind {
                    LineKind::Context => {
                        if let Some(s) = pre_fn {
                            groups.entry(s.fqn.clone()).or_default().pre_text.push(l.text.clone());
                        }
                        if let Some(s) = post_fn {
                            groups.entry(s.fqn.clone()).or_default().post_text.push(l.text.clone());
                        }
                    }
                    LineKind::Removed => match pre_fn {
                        Some(s) => {
                            let g = groups.entry(s.fqn.clone()).or_default();
                            g.removed.push(l.text.clone());
                            g.pre_text.push(l.text.clone());
                        }
                        None => unmapped += 1,
                    },
                    LineKind::Added => match post_fn {
                        Some(s) => {
                            let g = groups.entry(s.fqn.clone()).or_default();
                            g.added.push(l.text.clone());
                            g.post_text.push(l.text.clone());
                        }
                        None => unmapped += 1,
                    },
                }
                if l.kind != LineKind::Added {
                    old_ln += 1;
                }
                if l.kind != LineKind::Removed {
                    new_ln += 1;
                }
            }
            groups.retain(|_, g| !g.removed.is_empty() || !g.added.is_empty());
            if groups.is_empty() {
                if unmapped > 0 {
                    out.discarded += 1;
                }
                continue;
            }
            if unmapped > 0 {
                out.warnings.push(format!(
                    "{}: {unmapped} changed line(s) in hunk @@ -{},{} +{},{} @@ lie outside any function",
                    f.file_id(),
                    h.pre.start,
                    h.pre.len,
                    h.post.start,
                    h.post.len
                ));
            }
            for (fqn, g) in groups {
                let in_pre = pre_file.is_some_and(|p| pre_map.span_of(p, &fqn).is_some());
                let in_post = post_file.is_some_and(|p| post_map.span_of(p, &fqn).is_some());
                let kind = if !in_pre {
                    HunkKind::FunctionAddition
                } else if !in_post {
                    HunkKind::FunctionDeletion
                } else {
                    match (g.removed.is_empty(), g.added.is_empty()) {
                        (false, true) => HunkKind::InternalDeletion,
                        (true, false) => HunkKind::InternalAddition,
                        _ => HunkKind::InternalModification,
                    }
                };
                out.hunks.push(Hunk {
                    file: f.file_id().to_owned(),
                    pre_range: h.pre,
                    post_range: h.post,
                    removed: g.removed,
                    added: g.added,
                    kind,
                    touched_fqns: BTreeSet::from([fqn]),
                    pre_text: join_lines(&g.pre_text),
                    post_text: join_lines(&g.post_text),
                });
            }
        }
    }
    out
}

fn join_lines(lines: &[String]) -> String {
    let mut s = lines.join("\n");
    if !s.is_empty() {
        s.push('\n');
    }
    s
}

/// Union of touched functions over every hunk that is not a pure function
/// addition.
pub fn candidate_vfs(hunks: &[Hunk]) -> BTreeSet<String> {
    hunks
        .iter()
        .filter(|h| h.kind != HunkKind::FunctionAddition)
        .flat_map(|h| h.touched_fqns.iter().cloned())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::patchvf::funcmap::{extract_function_map, Side};
    use proptest::prelude::*;

    const PRE: &str = "class Runner {\n    public void exec(String cmd) {\n        run(cmd);\n    }\n\n    public int size() {\n        return n;\n    }\n}\n";
    const POST: &str = "class Runner {\n    public void exec(String cmd) {\n        if (cmd.length() > MAX) { return; }\n        run(cmd);\n    }\n\n    public int size() {\n        return n;\n    }\n\n    public void reset() {\n        n = 0;\n    }\n}\n";

    const DIFF: &str = "diff --git a/R.java b/R.java\nindex 1..2 100644\n--- a/R.java\n+++ b/R.java\n@@ -1,4 +1,5 @@\n class Runner {\n     public void exec(String cmd) {\n+        if (cmd.length() > MAX) { return; }\n         run(cmd);\n     }\n@@ -8,2 +9,6 @@\n     }\n+\n+    public void reset() {\n+        n = 0;\n+    }\n }\n";

    fn maps() -> (FunctionMap, FunctionMap) {
        (
            extract_function_map(Side::Pre, "R.java", PRE).unwrap(),
            extract_function_map(Side::Post, "R.java", POST).unwrap(),
        )
    }

    #[test]
    fn empty_diff_is_empty() {
        let (pre, post) = maps();
        let out = parse_patch("", &pre, &post).unwrap();
        assert!(out.hunks.is_empty());
        assert_eq!(out.discarded, 0);
    }

    #[test]
    fn mixed_patch_classifies_addition_and_modification() {
        let (pre, post) = maps();
        let out = parse_patch(DIFF, &pre, &post).unwrap();
        let kinds: Vec<_> = out
            .hunks
            .iter()
            .map(|h| (h.touched_fqns.iter().next().unwrap().as_str(), h.kind))
            .collect();
        assert_eq!(
            kinds,
            [
                ("Runner.exec", HunkKind::InternalAddition),
                ("Runner.reset", HunkKind::FunctionAddition)
            ]
        );
        // the blank line added between functions maps to no function
        assert_eq!(out.warnings.len(), 1);
        assert_eq!(candidate_vfs(&out.hunks), BTreeSet::from(["Runner.exec".to_owned()]));
    }

    #[test]
    fn header_count_mismatch_is_malformed() {
        let bad = "--- a/x\n+++ b/x\n@@ -1,2 +1,2 @@\n a\n-b\n+c\n+d\n";
        assert!(matches!(parse_unified(bad), Err(PatchError::MalformedDiff { line: 7, .. })));
        let truncated = "--- a/x\n+++ b/x\n@@ -1,3 +1,3 @@\n a\n";
        assert!(matches!(parse_unified(truncated), Err(PatchError::MalformedDiff { .. })));
    }

    #[test]
    fn non_function_hunks_are_discarded_and_counted() {
        let (pre, post) = maps();
        let diff = "--- a/README.md\n+++ b/README.md\n@@ -1,1 +1,1 @@\n-old\n+new\n";
        let out = parse_patch(diff, &pre, &post).unwrap();
        assert!(out.hunks.is_empty());
        assert_eq!(out.discarded, 1);
    }

    fn arb_hunk() -> impl Strategy<Value = DiffHunk> {
        let line = (0u8..3, "[a-z ;(){}]{0,12}").prop_map(|(k, text)| DiffLine {
            kind: match k {
                0 => LineKind::Context,
                1 => LineKind::Removed,
                _ => LineKind::Added,
            },
            text,
        });
        (1u32..50, 1u32..50, prop::collection::vec(line, 1..12)).prop_map(|(ps, qs, lines)| {
            let old = lines.iter().filter(|l| l.kind != LineKind::Added).count() as u32;
            let new = lines.iter().filter(|l| l.kind != LineKind::Removed).count() as u32;
            DiffHunk {
                pre: LineRange { start: ps, len: old },
                post: LineRange { start: qs, len: new },
                lines,
            }
        })
    }

    proptest! {
        #[test]
        fn render_then_parse_is_stable(hunks in prop::collection::vec(arb_hunk(), 1..4)) {
            let files = vec![DiffFile { old_path: Some("f.src".into()), new_path: Some("f.src".into()), hunks }];
            let text = render_unified(&files);
            let parsed = parse_unified(&text).unwrap();
            prop_assert_eq!(&parsed, &files);
            prop_assert_eq!(render_unified(&parsed), text);

            let span = |side, a, b| FunctionMap::new(side, vec![
                crate::patchvf::funcmap::FunctionSpan { file: "f.src".into(), fqn: "f".into(), start_line: a, end_line: b },
            ]).unwrap();
            let (pre, post) = (span(Side::Pre, 5, 30), span(Side::Post, 10, 40));
            prop_assert_eq!(classify_files(&parsed, &pre, &post), classify_files(&files, &pre, &post));
        }
    }
}

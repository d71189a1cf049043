use serde::{Deserialize, Serialize};

use super::PatchError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Pre,
    Post,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionSpan {
    pub file: String,
    pub fqn: String,
    /// 1-based, inclusive.
    pub start_line: u32,
    pub end_line: u32,
}

impl FunctionSpan {
    pub fn contains(&self, line: u32) -> bool {
        (self.start_line..=self.end_line).contains(&line)
    }
}

/// Function boundaries on one side of a patch.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionMap {
    pub side: Side,
    pub entries: Vec<FunctionSpan>,
}

impl FunctionMap {
    /// Sorts entries per file and rejects overlapping or inverted spans.
    pub fn new(side: Side, mut entries: Vec<FunctionSpan>) -> Result<Self, PatchError> {
        entries.sort_by(|a, b| (&a.file, a.start_line).cmp(&(&b.file, b.start_line)));
        for e in &entries {
            if e.start_line == 0 || e.end_line < e.start_line {
                return Err(PatchError::InvalidFunctionMap(format!(
                    "{}:{} has span {}..{}",
                    e.file, e.fqn, e.start_line, e.end_line
                )));
            }
        }
        for pair in entries.windows(2) {
            if pair[0].file == pair[1].file && pair[1].start_line <= pair[0].end_line {
                return Err(PatchError::InvalidFunctionMap(format!(
                    "{} and {} overlap in {}",
                    pair[0].fqn, pair[1].fqn, pair[0].file
                )));
            }
        }
        Ok(FunctionMap { side, entries })
    }

    pub fn from_json(text: &str) -> Result<Self, PatchError> {
        let raw: FunctionMap =
            serde_json::from_str(text).map_err(|e| PatchError::InvalidFunctionMap(e.to_string()))?;
        FunctionMap::new(raw.side, raw.entries)
    }

    pub fn find(&self, file: &str, line: u32) -> Option<&FunctionSpan> {
        let start = self.entries.partition_point(|e| e.file.as_str() < file);
        self.entries[start..]
            .iter()
            .take_while(|e| e.file == file)
            .find(|e| e.contains(line))
    }

    pub fn span_of(&self, file: &str, fqn: &str) -> Option<&FunctionSpan> {
        self.entries.iter().find(|e| e.file == file && e.fqn == fqn)
    }

    pub fn extend(&mut self, other: FunctionMap) -> Result<(), PatchError> {
        let mut all = std::mem::take(&mut self.entries);
        all.extend(other.entries);
        *self = FunctionMap::new(self.side, all)?;
        Ok(())
    }
}

const NAMESPACE_KEYWORDS: &[&str] = &["class", "interface", "enum", "struct", "impl", "mod", "namespace", "trait"];
const CONTROL_KEYWORDS: &[&str] = &[
    "if", "for", "while", "switch", "catch", "synchronized", "match", "loop", "else", "try", "do", "return",
    "new",
];

enum Scope {
    Namespace(String),
    Function { fqn: String, start: u32 },
    Block,
}

/// Recovers function spans from a brace-delimited toy language.
///
/// Recognized shapes, one header per line:
///
/// ```text
/// class Name {            // namespace, prefixes nested fqns with "Name."
/// [modifiers] [type] name(args) [throws X] {   // function
/// ```
///
/// Braces inside string/char literals and `//` comments are ignored.
/// Blocks inside a function never open new functions.
pub fn extract_function_map(side: Side, file: &str, source: &str) -> Result<FunctionMap, PatchError> {
    let mut stack: Vec<Scope> = Vec::new();
    let mut spans = Vec::new();

    for (idx, line) in source.lines().enumerate() {
        let line_no = idx as u32 + 1;
        let mut header_start = 0usize;
        let bytes = line.as_bytes();
        let mut i = 0;
        let mut quote: Option<u8> = None;
        while i < bytes.len() {
            let c = bytes[i];
            if let Some(q) = quote {
                if c == b'\\' {
                    i += 2;
                    continue;
                }
                if c == q {
                    quote = None;
                }
                i += 1;
                continue;
            }
            match c {
                b'"' | b'\'' => quote = Some(c),
                b'/' if bytes.get(i + 1) == Some(&b'/') => break,
                b'{' => {
                    let header = line[header_start..i].trim();
                    let in_function = stack.iter().any(|s| matches!(s, Scope::Function { .. }));
                    let scope = if in_function {
                        Scope::Block
                    } else if let Some(name) = namespace_name(header) {
                        Scope::Namespace(name)
                    } else if let Some(name) = function_name(header) {
                        let mut fqn: Vec<&str> = stack
                            .iter()
                            .filter_map(|s| match s {
                                Scope::Namespace(n) => Some(n.as_str()),
                                _ => None,
                            })
                            .collect();
                        fqn.push(name);
                        Scope::Function {
                            fqn: fqn.join("."),
                            start: line_no,
                        }
                    } else {
                        Scope::Block
                    };
                    stack.push(scope);
                    header_start = i + 1;
                }
                b'}' => {
                    match stack.pop() {
                        Some(Scope::Function { fqn, start }) => spans.push(FunctionSpan {
                            file: file.to_owned(),
                            fqn,
                            start_line: start,
                            end_line: line_no,
                        }),
                        Some(_) => {}
                        None => {
                            return Err(PatchError::InvalidFunctionMap(format!(
                                "{file}:{line_no}: unbalanced `}}`"
                            )))
                        }
                    }
                    header_start = i + 1;
                }
                b';' => header_start = i + 1,
                _ => {}
            }
            i += 1;
        }
    }
    if !stack.is_empty() {
        return Err(PatchError::InvalidFunctionMap(format!("{file}: unclosed `{{`")));
    }
    FunctionMap::new(side, spans)
}

fn words(header: &str) -> Vec<&str> {
    header
        .split(|c: char| !(c.is_alphanumeric() || c == '_' || c == '$'))
        .filter(|w| !w.is_empty())
        .collect()
}

fn namespace_name(header: &str) -> Option<String> {
    let w = words(header);
    let pos = w.iter().position(|x| NAMESPACE_KEYWORDS.contains(x))?;
    // `impl Foo for Bar` names the implementing type.
    if w[pos] == "impl" {
        if let Some(f) = w.iter().position(|x| *x == "for") {
            return w.get(f + 1).map(|s| s.to_string());
        }
    }
    w.get(pos + 1).map(|s| s.to_string())
}

fn function_name(header: &str) -> Option<&str> {
    let open = header.find('(')?;
    header[open..].rfind(')')?;
    let before = header[..open].trim_end();
    let name_start = before
        .rfind(|c: char| !(c.is_alphanumeric() || c == '_' || c == '$'))
        .map(|i| i + 1)
        .unwrap_or(0);
    let name = &before[name_start..];
    if name.is_empty()
        || name.chars().next().is_some_and(|c| c.is_ascii_digit())
        || CONTROL_KEYWORDS.contains(&name)
    {
        return None;
    }
    let first = words(header).into_iter().next().unwrap_or("");
    if CONTROL_KEYWORDS.contains(&first) {
        return None;
    }
    Some(name)
}

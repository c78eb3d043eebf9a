//! Problem description and the `.prob` file format.
//!
//! ```text
//! # leading comment lines are kept as notes
//! dim = 2
//!
//! [meta]
//! name = "poisson_disk"
//!
//! [fields]
//! X0 = "0", "0"
//! X1 = "1", "0"
//! X2 = "0", "1"
//!
//! [coeff]
//! c = "0"
//!
//! [data]
//! f = "1"
//! g = "0"
//!
//! [domain]
//! phi = "1 - x^2 - y^2"
//! bbox = -1, 1, -1, 1      # optional: lo1, hi1, lo2, hi2, ...
//!
//! [surface]
//! psi = "x"                # optional
//! ```
//!
//! Keys outside a section may be written in dotted form (`fields.X1 = ...`).

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::expr::{self, Expr, ExprError};
use crate::vf_algebra::VectorField;

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("line {line}, column {column}: in `{key}`: {source}")]
    Expr {
        key: String,
        line: usize,
        column: usize,
        #[source]
        source: ExprError,
    },
    #[error("missing required key `{0}`")]
    MissingKey(String),
    #[error("line {line}: `{key}` expects {expected} entries, found {found}")]
    Dimension {
        key: String,
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("invalid problem: {0}")]
    Invalid(String),
}

/// Dirichlet problem `L u = f` in `D = {φ > 0}`, `u = g` on `∂D`, with
/// `L = Σ Xᵢ² + X₀ + c`.
#[derive(Debug, Clone)]
pub struct Problem {
    pub name: String,
    pub notes: Vec<String>,
    pub dim: usize,
    /// `X0..Xn`.
    pub fields: Vec<VectorField>,
    pub c: Expr,
    pub f: Expr,
    pub g: Expr,
    pub phi: Expr,
    pub psi: Option<Expr>,
    /// Optional bounding box `(lo, hi)` per axis.
    pub bbox: Option<Vec<(f64, f64)>>,
}

impl Problem {
    /// Number of noise fields `n`.
    pub fn n_noise(&self) -> usize {
        self.fields.len() - 1
    }

    pub fn drift(&self) -> &VectorField {
        &self.fields[0]
    }

    /// `X1..Xn`.
    pub fn noise(&self) -> &[VectorField] {
        &self.fields[1..]
    }

    /// Copy with `f` replaced.
    pub fn with_f(&self, f: Expr) -> Problem {
        Problem { f, ..self.clone() }
    }

    /// Copy with `g` replaced.
    pub fn with_g(&self, g: Expr) -> Problem {
        Problem { g, ..self.clone() }
    }

    pub fn summary(&self) -> ProblemSummary {
        ProblemSummary {
            name: self.name.clone(),
            dim: self.dim,
            n: self.n_noise(),
            fields: self
                .fields
                .iter()
                .map(|f| f.components().iter().map(ToString::to_string).collect())
                .collect(),
            c: self.c.to_string(),
            f: self.f.to_string(),
            g: self.g.to_string(),
            phi: self.phi.to_string(),
            psi: self.psi.as_ref().map(ToString::to_string),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ProblemSummary {
    pub name: String,
    pub dim: usize,
    pub n: usize,
    pub fields: Vec<Vec<String>>,
    pub c: String,
    pub f: String,
    pub g: String,
    pub phi: String,
    pub psi: Option<String>,
}

pub fn load_problem(path: impl AsRef<Path>) -> Result<Problem, ProblemError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ProblemError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut problem = parse_problem(&text)?;
    if problem.name.is_empty() {
        problem.name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
    }
    Ok(problem)
}

/// One list item of a value with its 1-based column.
#[derive(Debug, Clone)]
struct Item {
    text: String,
    column: usize,
}

#[derive(Debug, Clone)]
struct Entry {
    line: usize,
    items: Vec<Item>,
}

pub fn parse_problem(text: &str) -> Result<Problem, ProblemError> {
    let mut entries: BTreeMap<String, Entry> = BTreeMap::new();
    let mut notes = Vec::new();
    let mut in_header = true;
    let mut section: Option<String> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            in_header = false;
            continue;
        }
        if let Some(comment) = trimmed.strip_prefix('#') {
            if in_header {
                notes.push(comment.trim().to_string());
            }
            continue;
        }
        in_header = false;
        let indent = raw.len() - raw.trim_start().len();
        if trimmed.starts_with('[') {
            let body = strip_comment(trimmed).trim();
            let name = body
                .strip_prefix('[')
                .and_then(|s| s.strip_suffix(']'))
                .map(str::trim)
                .filter(|s| is_ident(s))
                .ok_or_else(|| syntax(line_no, indent + 1, "malformed section header"))?;
            section = Some(name.to_string());
            continue;
        }
        let eq = raw
            .find('=')
            .ok_or_else(|| syntax(line_no, indent + 1, "expected `key = value`"))?;
        let key = raw[..eq].trim();
        if key.is_empty() || !key.split('.').all(is_ident) {
            return Err(syntax(line_no, indent + 1, "invalid key"));
        }
        let full = match &section {
            Some(s) if !key.contains('.') => format!("{s}.{key}"),
            Some(_) => return Err(syntax(line_no, indent + 1, "dotted key inside a section")),
            None => key.to_string(),
        };
        let items = parse_items(&raw[eq + 1..], line_no, eq + 2)?;
        if entries.contains_key(&full) {
            return Err(syntax(line_no, indent + 1, &format!("duplicate key `{full}`")));
        }
        entries.insert(full, Entry { line: line_no, items });
    }

    build(entries, notes)
}

fn syntax(line: usize, column: usize, message: &str) -> ProblemError {
    ProblemError::Syntax {
        line,
        column,
        message: message.to_string(),
    }
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Strip a trailing `#` comment outside quotes.
fn strip_comment(s: &str) -> &str {
    let mut in_quote = false;
    let mut escaped = false;
    for (i, ch) in s.char_indices() {
        match ch {
            '\\' if in_quote && !escaped => {
                escaped = true;
                continue;
            }
            '"' if !escaped => in_quote = !in_quote,
            '#' if !in_quote => return &s[..i],
            _ => {}
        }
        escaped = false;
    }
    s
}

/// Comma-separated list of quoted strings or bare tokens. `base_column` is
/// the 1-based column of `value`'s first byte.
fn parse_items(value: &str, line: usize, base_column: usize) -> Result<Vec<Item>, ProblemError> {
    let bytes = value.as_bytes();
    let mut items = Vec::new();
    let mut i = 0;
    let skip_ws = |i: &mut usize| {
        while *i < bytes.len() && (bytes[*i] == b' ' || bytes[*i] == b'\t') {
            *i += 1;
        }
    };
    loop {
        skip_ws(&mut i);
        if i >= bytes.len() || bytes[i] == b'#' {
            if items.is_empty() {
                return Err(syntax(line, base_column + i, "missing value"));
            }
            return Err(syntax(line, base_column + i, "expected a value after `,`"));
        }
        if bytes[i] == b'"' {
            let start = i + 1;
            let mut text = String::new();
            let mut j = start;
            let mut closed = false;
            while j < bytes.len() {
                match bytes[j] {
                    b'\\' if j + 1 < bytes.len() => {
                        text.push(bytes[j + 1] as char);
                        j += 2;
                    }
                    b'"' => {
                        closed = true;
                        break;
                    }
                    _ => {
                        let ch = value[j..].chars().next().unwrap_or('\u{fffd}');
                        text.push(ch);
                        j += ch.len_utf8();
                    }
                }
            }
            if !closed {
                return Err(syntax(line, base_column + i, "unterminated string"));
            }
            items.push(Item {
                text,
                column: base_column + start,
            });
            i = j + 1;
        } else {
            let start = i;
            while i < bytes.len() && bytes[i] != b',' && bytes[i] != b'#' {
                i += 1;
            }
            let token = value[start..i].trim_end();
            if token.contains('"') {
                return Err(syntax(line, base_column + start, "stray quote"));
            }
            items.push(Item {
                text: token.to_string(),
                column: base_column + start,
            });
        }
        skip_ws(&mut i);
        if i >= bytes.len() || bytes[i] == b'#' {
            return Ok(items);
        }
        if bytes[i] != b',' {
            return Err(syntax(line, base_column + i, "expected `,` between values"));
        }
        i += 1;
    }
}

fn build(mut entries: BTreeMap<String, Entry>, notes: Vec<String>) -> Result<Problem, ProblemError> {
    let dim_entry = entries
        .remove("dim")
        .ok_or_else(|| ProblemError::MissingKey("dim".into()))?;
    let dim_item = single(&dim_entry, "dim")?;
    let dim: usize = dim_item
        .text
        .parse()
        .ok()
        .filter(|&d| d >= 1)
        .ok_or_else(|| syntax(dim_entry.line, dim_item.column, "dim must be a positive integer"))?;

    let name = match entries.remove("meta.name") {
        Some(e) => single(&e, "meta.name")?.text.clone(),
        None => String::new(),
    };

    let mut fields = Vec::new();
    loop {
        let key = format!("fields.X{}", fields.len());
        let Some(entry) = entries.remove(&key) else { break };
        if entry.items.len() != dim {
            return Err(ProblemError::Dimension {
                key,
                line: entry.line,
                expected: dim,
                found: entry.items.len(),
            });
        }
        let comps = entry
            .items
            .iter()
            .map(|item| parse_expr(&key, entry.line, item, dim))
            .collect::<Result<Vec<_>, _>>()?;
        fields.push(VectorField::new(format!("X{}", fields.len()), comps));
    }
    if fields.is_empty() {
        return Err(ProblemError::MissingKey("fields.X0".into()));
    }
    if fields.len() < 2 {
        return Err(ProblemError::MissingKey("fields.X1".into()));
    }

    let mut scalar = |key: &str, required: bool| -> Result<Option<Expr>, ProblemError> {
        match entries.remove(key) {
            Some(e) => Ok(Some(parse_expr(key, e.line, single(&e, key)?, dim)?)),
            None if required => Err(ProblemError::MissingKey(key.to_string())),
            None => Ok(None),
        }
    };
    let c = scalar("coeff.c", true)?.unwrap_or_else(Expr::zero);
    let f = scalar("data.f", true)?.unwrap_or_else(Expr::zero);
    let g = scalar("data.g", true)?.unwrap_or_else(Expr::zero);
    let phi = scalar("domain.phi", true)?.unwrap_or_else(Expr::zero);
    let psi = scalar("surface.psi", false)?;

    let bbox = match entries.remove("domain.bbox") {
        None => None,
        Some(e) => Some(parse_bbox(&e, dim)?),
    };

    if let Some((key, e)) = entries.into_iter().next() {
        return Err(syntax(e.line, 1, &format!("unknown key `{key}`")));
    }
    if phi.is_constant() {
        return Err(ProblemError::Invalid("domain.phi must not be constant".into()));
    }

    Ok(Problem {
        name,
        notes,
        dim,
        fields,
        c,
        f,
        g,
        phi,
        psi,
        bbox,
    })
}

fn single<'a>(entry: &'a Entry, key: &str) -> Result<&'a Item, ProblemError> {
    match entry.items.as_slice() {
        [item] => Ok(item),
        items => Err(ProblemError::Dimension {
            key: key.to_string(),
            line: entry.line,
            expected: 1,
            found: items.len(),
        }),
    }
}

fn parse_expr(key: &str, line: usize, item: &Item, dim: usize) -> Result<Expr, ProblemError> {
    expr::parse(&item.text, dim).map_err(|source| ProblemError::Expr {
        key: key.to_string(),
        line,
        column: item.column + source.offset(),
        source,
    })
}

fn parse_bbox(entry: &Entry, dim: usize) -> Result<Vec<(f64, f64)>, ProblemError> {
    if entry.items.len() != 2 * dim {
        return Err(ProblemError::Dimension {
            key: "domain.bbox".into(),
            line: entry.line,
            expected: 2 * dim,
            found: entry.items.len(),
        });
    }
    let mut values = Vec::with_capacity(2 * dim);
    for item in &entry.items {
        let v: f64 = item
            .text
            .trim()
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| syntax(entry.line, item.column, "bbox entries must be finite numbers"))?;
        values.push(v);
    }
    let pairs: Vec<(f64, f64)> = values.chunks(2).map(|c| (c[0], c[1])).collect();
    if pairs.iter().any(|(lo, hi)| lo >= hi) {
        return Err(syntax(entry.line, 1, "bbox needs lo < hi on every axis"));
    }
    Ok(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;

    const DISK: &str = r#"# Poisson problem on the unit disk
# check: exit 0
dim = 2

[meta]
name = "poisson_disk"

[fields]
X0 = "0", "0"
X1 = "1", "0"
X2 = "0", "1"   # second noise field

[coeff]
c = "0"

[data]
f = "1"
g = "0"

[domain]
phi = "1 - x^2 - y^2"
"#;

    #[test]
    fn loads_sections() {
        let p = parse_problem(DISK).unwrap();
        assert_eq!(p.dim, 2);
        assert_eq!(p.n_noise(), 2);
        assert_eq!(p.name, "poisson_disk");
        assert_eq!(p.notes, vec!["Poisson problem on the unit disk", "check: exit 0"]);
        assert!(p.psi.is_none());
        assert_eq!(p.phi.eval(&[0.5, 0.5]), 0.5);
        assert!(p.drift().is_zero());
    }

    #[test]
    fn dotted_keys() {
        let text = "dim = 1\nfields.X0 = \"0\"\nfields.X1 = \"x\"\ncoeff.c = \"-1\"\ndata.f = 0\ndata.g = 1\ndomain.phi = \"1 - x^2\"\nsurface.psi = \"x\"\n";
        let p = parse_problem(text).unwrap();
        assert_eq!(p.c.as_const(), Some(-1.0));
        assert_eq!(p.g.as_const(), Some(1.0));
        assert!(p.psi.is_some());
    }

    #[test]
    fn dimension_mismatch() {
        let text = DISK.replace(r#"X1 = "1", "0""#, r#"X1 = "1", "0", "0""#);
        match parse_problem(&text).unwrap_err() {
            ProblemError::Dimension {
                key, expected, found, ..
            } => {
                assert_eq!(key, "fields.X1");
                assert_eq!((expected, found), (2, 3));
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn expression_error_has_line_and_column() {
        let text = DISK.replace(r#"f = "1""#, r#"f = "1 + *""#);
        match parse_problem(&text).unwrap_err() {
            ProblemError::Expr { line, column, key, .. } => {
                assert_eq!(key, "data.f");
                assert_eq!(line, 17);
                assert_eq!(column, 10);
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn variable_out_of_range() {
        let text = DISK.replace(r#"g = "0""#, r#"g = "x3""#);
        assert!(matches!(parse_problem(&text), Err(ProblemError::Expr { .. })));
    }

    #[test]
    fn missing_and_unknown_keys() {
        let text = DISK.replace("phi = \"1 - x^2 - y^2\"\n", "");
        assert!(matches!(parse_problem(&text), Err(ProblemError::MissingKey(k)) if k == "domain.phi"));
        let text = format!("{DISK}typo = \"1\"\n");
        assert!(matches!(
            parse_problem(&text),
            Err(ProblemError::Syntax { line: 22, .. })
        ));
        let text = DISK
            .replace("X1 = \"1\", \"0\"\n", "")
            .replace("X2 = \"0\", \"1\"   # second noise field\n", "");
        assert!(matches!(parse_problem(&text), Err(ProblemError::MissingKey(k)) if k == "fields.X1"));
    }

    #[test]
    fn syntax_errors() {
        for bad in [
            "dim = 2\n[fields\n",
            "dim 2\n",
            "dim = 2\ndim = 3\n",
            "dim = 2\n[data]\nf = \"1\n",
            "dim = 2\n[data]\nf = \"1\" \"2\"\n",
            "dim = 2\n[data]\nf = \"1\",\n",
        ] {
            assert!(matches!(parse_problem(bad), Err(ProblemError::Syntax { .. })), "{bad}");
        }
    }

    #[test]
    fn bbox_and_constant_phi() {
        let text = DISK.replace("[domain]\n", "[domain]\nbbox = -2, 2, -1.5, 1.5\n");
        assert_eq!(parse_problem(&text).unwrap().bbox, Some(vec![(-2.0, 2.0), (-1.5, 1.5)]));
        let text = DISK.replace("[domain]\n", "[domain]\nbbox = 2, -2, -1.5, 1.5\n");
        assert!(parse_problem(&text).is_err());
        let text = DISK.replace("\"1 - x^2 - y^2\"", "\"1\"");
        assert!(matches!(parse_problem(&text), Err(ProblemError::Invalid(_))));
    }

    #[test]
    fn quoted_hash_is_not_a_comment() {
        let items = parse_items(r#" "a#b", c  # tail"#, 1, 1).unwrap();
        assert_eq!(items[0].text, "a#b");
        assert_eq!(items[1].text, "c");
        assert_eq!(items[0].column, 3);
    }
}

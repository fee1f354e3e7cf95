//! Line-oriented structured text used for landscapes, model weights and
//! snapshots.
//!
//! ```text
//! # rss 0.1.0 seed=7
//! [landscape]
//! length = 4
//! vocab = 3
//! [field 4 3]
//! 1.0000000000000000e0 -2.5000000000000000e-1 0.0000000000000000e0
//! ...
//! ```
//!
//! A `[name args...]` line opens a section. Inside a section, `key = value`
//! lines are scalar entries and every other non-empty line is a row of
//! whitespace-separated numbers. Reals are written with 17 significant digits
//! so values round-trip bit-exactly. Lines starting with `#` are comments.

use std::fmt::Display;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub fn format_real(v: f64) -> String {
    format!("{v:.16e}")
}

/// The `# rss <version> seed=<seed>` header line.
pub fn header_line(seed: u64) -> String {
    format!("# {} {} seed={seed}", crate::TOOL_NAME, crate::TOOL_VERSION)
}

/// Tool name, version and seed, embedded in JSON outputs in place of a
/// header comment.
#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize)]
pub struct Generator {
    pub tool: &'static str,
    pub version: &'static str,
    pub seed: u64,
}

impl Generator {
    pub fn new(seed: u64) -> Self {
        Self {
            tool: crate::TOOL_NAME,
            version: crate::TOOL_VERSION,
            seed,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Section {
    pub name: String,
    pub args: Vec<String>,
    pub entries: Vec<(String, String)>,
    pub rows: Vec<Vec<f64>>,
    /// Rows hold token indices and render without exponent notation.
    pub integer_rows: bool,
    line: usize,
}

impl Section {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            ..Self::default()
        }
    }

    pub fn arg(mut self, value: impl Display) -> Self {
        self.args.push(value.to_string());
        self
    }

    pub fn entry(mut self, key: &str, value: impl Display) -> Self {
        self.entries.push((key.to_string(), value.to_string()));
        self
    }

    pub fn real(self, key: &str, value: f64) -> Self {
        self.entry(key, format_real(value))
    }

    pub fn matrix(mut self, m: &Matrix) -> Self {
        self.rows.extend(m.row_iter().map(<[f64]>::to_vec));
        self
    }

    pub fn tokens(mut self, tokens: &[usize]) -> Self {
        self.rows.push(tokens.iter().map(|&t| t as f64).collect());
        self.integer_rows = true;
        self
    }

    pub fn line(&self) -> usize {
        self.line
    }

    fn err(&self, message: String) -> Error {
        Error::Parse {
            line: self.line,
            message: format!("[{}] {message}", self.name),
        }
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T> {
        let raw = self
            .entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v)
            .ok_or_else(|| self.err(format!("missing key `{key}`")))?;
        raw.parse()
            .map_err(|_| self.err(format!("cannot parse `{key}` from `{raw}`")))
    }

    pub fn arg_at<T: FromStr>(&self, index: usize) -> Result<T> {
        let raw = self
            .args
            .get(index)
            .ok_or_else(|| self.err(format!("missing argument {index}")))?;
        raw.parse()
            .map_err(|_| self.err(format!("cannot parse argument `{raw}`")))
    }

    pub fn to_matrix(&self, rows: usize, cols: usize) -> Result<Matrix> {
        if self.rows.len() != rows || self.rows.iter().any(|r| r.len() != cols) {
            return Err(self.err(format!("expected a {rows}x{cols} block")));
        }
        Matrix::from_rows(&self.rows)
    }

    pub fn to_vector(&self, len: usize) -> Result<Vec<f64>> {
        Ok(self.to_matrix(1, len)?.into_vec())
    }

    pub fn to_token_rows(&self) -> Result<Vec<Vec<usize>>> {
        self.rows
            .iter()
            .map(|row| {
                row.iter()
                    .map(|&v| {
                        if v >= 0.0 && v.fract() == 0.0 {
                            Ok(v as usize)
                        } else {
                            Err(self.err(format!("`{v}` is not a token index")))
                        }
                    })
                    .collect()
            })
            .collect()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Document {
    pub comments: Vec<String>,
    pub sections: Vec<Section>,
}

impl Document {
    pub fn new(seed: u64) -> Self {
        Self {
            comments: vec![header_line(seed)],
            sections: Vec::new(),
        }
    }

    pub fn push(&mut self, section: Section) -> &mut Self {
        self.sections.push(section);
        self
    }

    pub fn section(&self, name: &str) -> Result<&Section> {
        self.sections
            .iter()
            .find(|s| s.name == name)
            .ok_or_else(|| Error::Parse {
                line: 0,
                message: format!("missing section [{name}]"),
            })
    }

    pub fn sections_named<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a Section> + 'a {
        self.sections.iter().filter(move |s| s.name == name)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.comments {
            out.push_str(c);
            out.push('\n');
        }
        for s in &self.sections {
            out.push_str(&render_section(s));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut doc = Document::default();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                if doc.sections.is_empty() {
                    doc.comments.push(format!("#{comment}"));
                }
                continue;
            }
            if let Some(inner) = line.strip_prefix('[') {
                let inner = inner.strip_suffix(']').ok_or_else(|| Error::Parse {
                    line: line_no,
                    message: "unterminated section header".into(),
                })?;
                let mut parts = inner.split_whitespace();
                let name = parts.next().ok_or_else(|| Error::Parse {
                    line: line_no,
                    message: "empty section header".into(),
                })?;
                doc.sections.push(Section {
                    name: name.to_string(),
                    args: parts.map(str::to_string).collect(),
                    line: line_no,
                    ..Section::default()
                });
                continue;
            }
            let section = doc.sections.last_mut().ok_or_else(|| Error::Parse {
                line: line_no,
                message: "content before the first section".into(),
            })?;
            if let Some((k, v)) = line.split_once('=') {
                section.entries.push((k.trim().to_string(), v.trim().to_string()));
            } else {
                let row = line
                    .split_whitespace()
                    .map(|t| {
                        t.parse::<f64>().map_err(|_| Error::Parse {
                            line: line_no,
                            message: format!("`{t}` is not a number"),
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                section.rows.push(row);
            }
        }
        Ok(doc)
    }
}

pub fn render_section(s: &Section) -> String {
    let mut out = String::new();
    out.push('[');
    out.push_str(&s.name);
    for a in &s.args {
        out.push(' ');
        out.push_str(a);
    }
    out.push_str("]\n");
    for (k, v) in &s.entries {
        out.push_str(k);
        out.push_str(" = ");
        out.push_str(v);
        out.push('\n');
    }
    for row in &s.rows {
        let cells: Vec<String> = if s.integer_rows {
            row.iter().map(|v| format!("{}", *v as i64)).collect()
        } else {
            row.iter().map(|&v| format_real(v)).collect()
        };
        out.push_str(&cells.join(" "));
        out.push('\n');
    }
    out
}

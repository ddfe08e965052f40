//! Flat `key = value` documents with `[section]` headers.
//!
//! ```text
//! # comment
//! experiment = defect
//! [pair]
//! name = helix
//! [field twist]
//! dim = 3
//! ```
//!
//! A header may carry a label after the section kind (`[field twist]`).
//! Keys before the first header belong to the root section (kind `""`).

use std::collections::BTreeMap;
use std::str::FromStr;

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub kind: String,
    pub label: Option<String>,
    pub line: usize,
    pub entries: Vec<Entry>,
}

impl Section {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .rev()
            .find(|e| e.key == key)
            .map(|e| e.value.as_str())
    }

    pub fn entry(&self, key: &str) -> Option<&Entry> {
        self.entries.iter().rev().find(|e| e.key == key)
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key).ok_or_else(|| Error::Parse {
            line: self.line,
            message: format!("section [{}] is missing key `{key}`", self.kind),
        })
    }

    pub fn parse<V: FromStr>(&self, key: &str) -> Result<Option<V>> {
        match self.entry(key) {
            None => Ok(None),
            Some(e) => e.value.parse::<V>().map(Some).map_err(|_| Error::Parse {
                line: e.line,
                message: format!("cannot parse `{}` for key `{key}`", e.value),
            }),
        }
    }

    pub fn parse_or<V: FromStr>(&self, key: &str, default: V) -> Result<V> {
        Ok(self.parse(key)?.unwrap_or(default))
    }

    /// Comma or whitespace separated list of numbers.
    pub fn parse_list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        match self.entry(key) {
            None => Ok(None),
            Some(e) => parse_number_list(&e.value)
                .map(Some)
                .map_err(|message| Error::Parse {
                    line: e.line,
                    message: format!("key `{key}`: {message}"),
                }),
        }
    }
}

pub fn parse_number_list(s: &str) -> std::result::Result<Vec<f64>, String> {
    s.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| parse_number(t).ok_or_else(|| format!("`{t}` is not a number")))
        .collect()
}

/// Number literal, additionally accepting `pi`, `-pi`, `inf`, `-inf`.
pub fn parse_number(t: &str) -> Option<f64> {
    match t {
        "pi" => Some(std::f64::consts::PI),
        "-pi" => Some(-std::f64::consts::PI),
        "2pi" => Some(2.0 * std::f64::consts::PI),
        "inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        _ => t.parse().ok(),
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Document {
    pub sections: Vec<Section>,
}

impl Document {
    pub fn parse(text: &str) -> Result<Self> {
        let mut sections = vec![Section {
            kind: String::new(),
            label: None,
            line: 0,
            entries: Vec::new(),
        }];
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = strip_comment(raw).trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let inner = rest.strip_suffix(']').ok_or_else(|| Error::Parse {
                    line: line_no,
                    message: "unterminated section header".into(),
                })?;
                let mut words = inner.split_whitespace();
                let kind = words.next().ok_or_else(|| Error::Parse {
                    line: line_no,
                    message: "empty section header".into(),
                })?;
                let label: Vec<&str> = words.collect();
                sections.push(Section {
                    kind: kind.to_string(),
                    label: (!label.is_empty()).then(|| label.join(" ")),
                    line: line_no,
                    entries: Vec::new(),
                });
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: line_no,
                message: format!("expected `key = value`, got `{line}`"),
            })?;
            let key = key.trim();
            if key.is_empty() {
                return Err(Error::Parse {
                    line: line_no,
                    message: "empty key".into(),
                });
            }
            sections
                .last_mut()
                .expect("root section")
                .entries
                .push(Entry {
                    key: key.to_string(),
                    value: value.trim().to_string(),
                    line: line_no,
                });
        }
        Ok(Self { sections })
    }

    pub fn root(&self) -> &Section {
        &self.sections[0]
    }

    /// First unlabelled section of the given kind.
    pub fn section(&self, kind: &str) -> Option<&Section> {
        self.sections
            .iter()
            .find(|s| s.kind == kind && s.label.is_none())
    }

    pub fn sections_of<'a>(&'a self, kind: &'a str) -> impl Iterator<Item = &'a Section> + 'a {
        self.sections.iter().filter(move |s| s.kind == kind)
    }

    /// Canonical text: sections in order, keys sorted, last assignment wins.
    /// Two documents with the same canonical form describe the same run.
    pub fn canonical(&self) -> String {
        let mut out = String::new();
        for s in &self.sections {
            let map: BTreeMap<&str, &str> = s
                .entries
                .iter()
                .map(|e| (e.key.as_str(), e.value.as_str()))
                .collect();
            if map.is_empty() && s.kind.is_empty() {
                continue;
            }
            if !s.kind.is_empty() {
                match &s.label {
                    Some(l) => out.push_str(&format!("[{} {}]\n", s.kind, l)),
                    None => out.push_str(&format!("[{}]\n", s.kind)),
                }
            }
            for (k, v) in map {
                out.push_str(&format!("{k}={v}\n"));
            }
        }
        out
    }
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    }
}

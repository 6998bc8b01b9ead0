//! Flat `key = value` config files with `[section]` headers.
//!
//! Lines are either blank, a `#` comment, a `[name]` header, or a single
//! `key = value` pair. Keys before the first header form the preamble.
//! Every parse failure carries the one-based line number it came from.

use std::fmt;

/// A parse or lookup failure, pinned to a config line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub line: usize,
    pub detail: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.detail)
    }
}

impl std::error::Error for ConfigError {}

fn err(line: usize, detail: impl Into<String>) -> ConfigError {
    ConfigError {
        line,
        detail: detail.into(),
    }
}

/// One `key = value` pair and the line it was read from.
#[derive(Debug, Clone)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

/// A header block: its name, the header's line, and its entries in file
/// order. The preamble uses an empty name and line 0.
#[derive(Debug, Clone)]
pub struct Section {
    pub name: String,
    pub line: usize,
    pub entries: Vec<Entry>,
}

impl Section {
    fn new(name: &str, line: usize) -> Section {
        Section {
            name: name.to_string(),
            line,
            entries: Vec::new(),
        }
    }

    pub fn get(&self, key: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.key == key)
    }

    /// Value of `key`, or a [`ConfigError`] naming the section header line.
    pub fn require(&self, key: &str) -> Result<&Entry, ConfigError> {
        self.get(key).ok_or_else(|| {
            err(
                self.line,
                format!("section [{}] is missing key '{key}'", self.name),
            )
        })
    }

    pub fn get_f64(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        self.get(key).map(parse_f64).transpose()
    }

    pub fn get_u64(&self, key: &str) -> Result<Option<u64>, ConfigError> {
        self.get(key)
            .map(|e| {
                e.value
                    .parse::<u64>()
                    .map_err(|_| err(e.line, format!("key '{}' is not an integer", e.key)))
            })
            .transpose()
    }

    pub fn get_usize(&self, key: &str) -> Result<Option<usize>, ConfigError> {
        Ok(self.get_u64(key)?.map(|v| v as usize))
    }

    /// Comma-separated float list.
    pub fn get_f64_list(&self, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        self.get(key)
            .map(|e| {
                e.value
                    .split(',')
                    .map(|part| {
                        part.trim().parse::<f64>().map_err(|_| {
                            err(e.line, format!("key '{}' has a non-numeric list entry", e.key))
                        })
                    })
                    .collect()
            })
            .transpose()
    }

    /// Comma-separated nonnegative integer list.
    pub fn get_usize_list(&self, key: &str) -> Result<Option<Vec<usize>>, ConfigError> {
        self.get(key)
            .map(|e| {
                e.value
                    .split(',')
                    .map(|part| {
                        part.trim().parse::<usize>().map_err(|_| {
                            err(e.line, format!("key '{}' has a non-integer list entry", e.key))
                        })
                    })
                    .collect()
            })
            .transpose()
    }
}

fn parse_f64(e: &Entry) -> Result<f64, ConfigError> {
    e.value
        .parse::<f64>()
        .map_err(|_| err(e.line, format!("key '{}' is not a number", e.key)))
}

/// A parsed config file: preamble entries plus named sections in file
/// order.
#[derive(Debug, Clone)]
pub struct ConfigFile {
    pub preamble: Section,
    pub sections: Vec<Section>,
}

impl ConfigFile {
    pub fn section(&self, name: &str) -> Option<&Section> {
        self.sections.iter().find(|s| s.name == name)
    }
}

/// Parses config text. Duplicate keys within a section and duplicate
/// section names are rejected; both would make a run ambiguous.
pub fn parse(text: &str) -> Result<ConfigFile, ConfigError> {
    let mut preamble = Section::new("", 0);
    let mut sections: Vec<Section> = Vec::new();
    let mut in_preamble = true;

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(inner) = line.strip_prefix('[') {
            let Some(name) = inner.strip_suffix(']') else {
                return Err(err(line_no, "unterminated section header"));
            };
            let name = name.trim();
            if name.is_empty() {
                return Err(err(line_no, "empty section name"));
            }
            if sections.iter().any(|s| s.name == name) {
                return Err(err(line_no, format!("duplicate section [{name}]")));
            }
            sections.push(Section::new(name, line_no));
            in_preamble = false;
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(err(line_no, format!("expected 'key = value', got '{line}'")));
        };
        let key = key.trim();
        let value = value.trim();
        if key.is_empty() {
            return Err(err(line_no, "empty key"));
        }
        if value.is_empty() {
            return Err(err(line_no, format!("key '{key}' has no value")));
        }
        let target = if in_preamble {
            &mut preamble
        } else {
            sections.last_mut().expect("a section header was seen")
        };
        if target.get(key).is_some() {
            return Err(err(line_no, format!("duplicate key '{key}'")));
        }
        target.entries.push(Entry {
            key: key.to_string(),
            value: value.to_string(),
            line: line_no,
        });
    }

    Ok(ConfigFile { preamble, sections })
}

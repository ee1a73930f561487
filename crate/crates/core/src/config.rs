//! Block-structured text config: `[kind name]` headers, `key = value` lines,
//! `#` comments.
//!
//! This layer only knows about syntax. Chain and plan loaders interpret the
//! blocks and reject unknown kinds and keys.

use std::str::FromStr;

use thiserror::Error;

use crate::units::FrequencyHz;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("line {line}: unknown component kind `{kind}`")]
    UnknownComponentKind { line: usize, kind: String },
    #[error("line {line}: unknown key `{key}` in block `{block}`")]
    UnknownKey { line: usize, block: String, key: String },
    #[error("block `{block}` is missing required key `{key}`")]
    MissingKey { block: String, key: String },
    #[error("invalid value for `{field}`: {message}")]
    InvariantViolation { field: String, message: String },
    #[error("mixer `{mixer}` references LO chain `{lo}`, which is not defined")]
    DanglingLoReference { mixer: String, lo: String },
    #[error("duplicate name `{0}`")]
    DuplicateName(String),
    #[error("bad override `{spec}`: {reason}")]
    BadOverride { spec: String, reason: String },
    #[error("config is empty")]
    Empty,
}

impl ConfigError {
    pub fn invariant(field: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError::InvariantViolation { field: field.into(), message: message.into() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
    pub column: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub kind: String,
    pub name: Option<String>,
    pub line: usize,
    pub entries: Vec<Entry>,
}

impl Block {
    /// `name` when present, else `kind`. Used in diagnostics and overrides.
    pub fn label(&self) -> &str {
        self.name.as_deref().unwrap_or(&self.kind)
    }

    pub fn get(&self, key: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.key == key)
    }

    fn field(&self, key: &str) -> String {
        format!("{}.{}", self.label(), key)
    }

    /// Fails on any key not accepted by `allowed`.
    pub fn check_keys(&self, allowed: impl Fn(&str) -> bool) -> Result<(), ConfigError> {
        match self.entries.iter().find(|e| !allowed(&e.key)) {
            Some(e) => Err(ConfigError::UnknownKey { line: e.line, block: self.label().to_string(), key: e.key.clone() }),
            None => Ok(()),
        }
    }

    pub fn require(&self, key: &str) -> Result<&Entry, ConfigError> {
        self.get(key).ok_or_else(|| ConfigError::MissingKey { block: self.label().to_string(), key: key.to_string() })
    }

    pub fn parse_opt<T: FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key).map(|e| e.parse()).transpose()
    }

    pub fn parse_req<T: FromStr>(&self, key: &str) -> Result<T, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        self.require(key)?.parse()
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        let v = self.parse_opt::<f64>(key)?.unwrap_or(default);
        if !v.is_finite() {
            return Err(ConfigError::invariant(self.field(key), "must be finite"));
        }
        Ok(v)
    }

    pub fn f64_req(&self, key: &str) -> Result<f64, ConfigError> {
        let v: f64 = self.parse_req(key)?;
        if !v.is_finite() {
            return Err(ConfigError::invariant(self.field(key), "must be finite"));
        }
        Ok(v)
    }

    pub fn freq_req(&self, key: &str) -> Result<FrequencyHz, ConfigError> {
        self.parse_req(key)
    }

    pub fn violation(&self, key: &str, message: impl Into<String>) -> ConfigError {
        ConfigError::invariant(self.field(key), message)
    }
}

impl Entry {
    pub fn parse<T: FromStr>(&self) -> Result<T, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        self.value.parse::<T>().map_err(|e| ConfigError::Syntax {
            line: self.line,
            column: self.column,
            message: format!("`{}` for key `{}`: {e}", self.value, self.key),
        })
    }

    /// Splits a comma-separated value into trimmed, non-empty items.
    pub fn items(&self) -> impl Iterator<Item = &str> {
        self.value.split(',').map(str::trim).filter(|s| !s.is_empty())
    }

    pub fn syntax(&self, message: impl Into<String>) -> ConfigError {
        ConfigError::Syntax { line: self.line, column: self.column, message: message.into() }
    }
}

/// Reads the block structure of a config document.
pub fn parse_blocks(text: &str) -> Result<Vec<Block>, ConfigError> {
    let mut blocks: Vec<Block> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        let trimmed = content.trim();
        if trimmed.is_empty() {
            continue;
        }
        let indent = content.len() - content.trim_start().len();
        if let Some(rest) = trimmed.strip_prefix('[') {
            let inner = rest.strip_suffix(']').ok_or(ConfigError::Syntax {
                line,
                column: indent + trimmed.len(),
                message: "header is missing closing `]`".into(),
            })?;
            let mut words = inner.split_whitespace();
            let kind =
                words.next().ok_or(ConfigError::Syntax { line, column: indent + 2, message: "empty block header".into() })?;
            let name = words.next().map(str::to_string);
            if let Some(extra) = words.next() {
                let column = indent + 1 + rest.find(extra).unwrap_or(0) + 1;
                return Err(ConfigError::Syntax {
                    line,
                    column,
                    message: format!("unexpected `{extra}` in header; expected `[kind name]`"),
                });
            }
            blocks.push(Block { kind: kind.to_string(), name, line, entries: Vec::new() });
            continue;
        }
        let eq = trimmed.find('=').ok_or(ConfigError::Syntax {
            line,
            column: indent + 1,
            message: "expected `key = value` or `[kind name]`".into(),
        })?;
        let key = trimmed[..eq].trim();
        let value = trimmed[eq + 1..].trim();
        if key.is_empty() || key.contains(char::is_whitespace) {
            return Err(ConfigError::Syntax { line, column: indent + 1, message: "invalid key".into() });
        }
        let value_col = indent + eq + 2 + (trimmed[eq + 1..].len() - trimmed[eq + 1..].trim_start().len());
        let block = blocks.last_mut().ok_or(ConfigError::Syntax {
            line,
            column: indent + 1,
            message: "key outside of any block".into(),
        })?;
        if block.get(key).is_some() {
            return Err(ConfigError::Syntax { line, column: indent + 1, message: format!("duplicate key `{key}`") });
        }
        block.entries.push(Entry { key: key.to_string(), value: value.to_string(), line, column: value_col });
    }
    if blocks.is_empty() {
        return Err(ConfigError::Empty);
    }
    Ok(blocks)
}

/// Applies `target.key=value` overrides. `target` is a block name, or the
/// kind of an unnamed block. Whether the key is valid for the block is checked
/// later by the loader.
pub fn apply_overrides(blocks: &mut [Block], overrides: &[String]) -> Result<(), ConfigError> {
    for spec in overrides {
        let bad = |reason: &str| ConfigError::BadOverride { spec: spec.clone(), reason: reason.into() };
        let (lhs, value) = spec.split_once('=').ok_or_else(|| bad("expected `block.key=value`"))?;
        let (target, key) = lhs.trim().split_once('.').ok_or_else(|| bad("expected `block.key=value`"))?;
        if key.is_empty() {
            return Err(bad("empty key"));
        }
        let idx = blocks
            .iter()
            .position(|b| b.name.as_deref() == Some(target))
            .or_else(|| blocks.iter().position(|b| b.name.is_none() && b.kind == target))
            .ok_or_else(|| bad(&format!("no block named `{target}`")))?;
        let block = &mut blocks[idx];
        let value = value.trim().to_string();
        match block.entries.iter_mut().find(|e| e.key == key) {
            Some(e) => e.value = value,
            None => {
                let line = block.line;
                block.entries.push(Entry { key: key.to_string(), value, line, column: 1 })
            }
        }
    }
    Ok(())
}

/// Renders blocks back to text in canonical layout.
pub fn write_blocks(blocks: &[Block]) -> String {
    let mut out = String::new();
    for (i, b) in blocks.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        match &b.name {
            Some(n) => out.push_str(&format!("[{} {}]\n", b.kind, n)),
            None => out.push_str(&format!("[{}]\n", b.kind)),
        }
        for e in &b.entries {
            out.push_str(&format!("{} = {}\n", e.key, e.value));
        }
    }
    out
}

//! `key = value` text files used for manifests and configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Keys are
//! case-sensitive and may appear once.

use std::collections::BTreeMap;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default)]
pub(crate) struct KvFile {
    entries: BTreeMap<String, (usize, String)>,
}

impl KvFile {
    pub(crate) fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Format(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            let key = key.trim().to_string();
            if key.is_empty() {
                return Err(Error::Format(format!("line {}: empty key", lineno + 1)));
            }
            if entries
                .insert(key.clone(), (lineno + 1, value.trim().to_string()))
                .is_some()
            {
                return Err(Error::Format(format!(
                    "line {}: duplicate key {key:?}",
                    lineno + 1
                )));
            }
        }
        Ok(Self { entries })
    }

    pub(crate) fn take(&mut self, key: &str) -> Option<String> {
        self.entries.remove(key).map(|(_, v)| v)
    }

    pub(crate) fn take_parsed<T: FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        match self.entries.remove(key) {
            None => Ok(None),
            Some((line, v)) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::Format(format!("line {line}: cannot parse {key} = {v:?}"))),
        }
    }

    /// Fails if any key was left unconsumed.
    pub(crate) fn finish(self) -> Result<()> {
        match self.entries.into_iter().next() {
            None => Ok(()),
            Some((key, (line, _))) => {
                Err(Error::Format(format!("line {line}: unknown key {key:?}")))
            }
        }
    }
}

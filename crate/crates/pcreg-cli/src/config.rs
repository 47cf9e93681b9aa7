//! Config files: TOML-shaped key=value text with one section per
//! subcommand. Values carry the same syntax as the matching flags, and
//! flags always win over the file.

use std::path::Path;

use crate::CliError;

pub struct FileConfig {
    doc: toml::Table,
}

pub fn load(path: &Path) -> Result<FileConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let doc: toml::Table = text
        .parse()
        .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
    Ok(FileConfig { doc })
}

pub fn empty() -> FileConfig {
    FileConfig {
        doc: toml::Table::new(),
    }
}

impl FileConfig {
    /// Borrows one section, verifying every key in it is recognized.
    pub fn section<'a>(
        &'a self,
        name: &'static str,
        allowed: &'static [&'static str],
    ) -> Result<Section<'a>, CliError> {
        let table = match self.doc.get(name) {
            None => None,
            Some(toml::Value::Table(t)) => Some(t),
            Some(_) => {
                return Err(CliError::Usage(format!(
                    "config section [{name}] must be a table"
                )))
            }
        };
        if let Some(t) = table {
            for key in t.keys() {
                if !allowed.contains(&key.as_str()) {
                    return Err(CliError::Usage(format!(
                        "config key {name}.{key} is not recognized (allowed: {})",
                        allowed.join(", ")
                    )));
                }
            }
        }
        Ok(Section { name, table })
    }
}

pub struct Section<'a> {
    name: &'static str,
    table: Option<&'a toml::Table>,
}

impl Section<'_> {
    fn value(&self, key: &str) -> Option<&toml::Value> {
        self.table.and_then(|t| t.get(key))
    }

    fn type_error(&self, key: &str, expected: &str) -> CliError {
        CliError::Usage(format!(
            "config key {}.{key} must be {expected}",
            self.name
        ))
    }

    pub fn usize(&self, key: &str) -> Result<Option<usize>, CliError> {
        match self.value(key) {
            None => Ok(None),
            Some(toml::Value::Integer(i)) if *i >= 0 => Ok(Some(*i as usize)),
            Some(_) => Err(self.type_error(key, "a non-negative integer")),
        }
    }

    pub fn u64(&self, key: &str) -> Result<Option<u64>, CliError> {
        match self.value(key) {
            None => Ok(None),
            Some(toml::Value::Integer(i)) if *i >= 0 => Ok(Some(*i as u64)),
            Some(_) => Err(self.type_error(key, "a non-negative integer")),
        }
    }

    pub fn f64(&self, key: &str) -> Result<Option<f64>, CliError> {
        match self.value(key) {
            None => Ok(None),
            Some(toml::Value::Float(x)) => Ok(Some(*x)),
            Some(toml::Value::Integer(i)) => Ok(Some(*i as f64)),
            Some(_) => Err(self.type_error(key, "a number")),
        }
    }

    pub fn string(&self, key: &str) -> Result<Option<String>, CliError> {
        match self.value(key) {
            None => Ok(None),
            Some(toml::Value::String(s)) => Ok(Some(s.clone())),
            Some(_) => Err(self.type_error(key, "a string")),
        }
    }
}

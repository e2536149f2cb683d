//! TOML config layered under command-line flags.
//!
//! ```toml
//! seed = 7
//! workers = 4
//!
//! [generate-mix]
//! count = 100
//! families = ["composition"]
//! ```
//!
//! A flag wins over the subcommand table, which wins over top-level keys.

use std::cell::RefCell;
use std::collections::BTreeSet;
use std::path::Path;

use anyhow::{anyhow, Context, Result};
use serde::de::DeserializeOwned;
use toml::{Table, Value};

#[derive(Debug, Default)]
pub struct Config {
    global: Table,
    section: Table,
    name: String,
    used: RefCell<BTreeSet<String>>,
}

impl Config {
    pub fn load(path: Option<&Path>, subcommand: &str) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Config { name: subcommand.into(), ..Config::default() });
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text, subcommand).with_context(|| format!("config {}", path.display()))
    }

    pub fn parse(text: &str, subcommand: &str) -> Result<Self> {
        let mut global: Table = text.parse().map_err(|e| anyhow!("{e}"))?;
        let section = match global.remove(subcommand) {
            Some(Value::Table(t)) => t,
            Some(_) => return Err(anyhow!("[{subcommand}] must be a table")),
            None => Table::new(),
        };
        global.retain(|_, v| !v.is_table());
        Ok(Config { global, section, name: subcommand.into(), used: RefCell::default() })
    }

    pub fn get<T: DeserializeOwned>(&self, key: &str) -> Result<Option<T>> {
        self.used.borrow_mut().insert(key.to_string());
        let Some(v) = self.section.get(key).or_else(|| self.global.get(key)) else {
            return Ok(None);
        };
        v.clone().try_into().map(Some).map_err(|e| anyhow!("config key `{key}`: {e}"))
    }

    /// The flag if given, else the config value.
    pub fn pick<T: DeserializeOwned>(&self, flag: Option<T>, key: &str) -> Result<Option<T>> {
        let from_file = self.get(key)?;
        Ok(flag.or(from_file))
    }

    pub fn pick_or<T: DeserializeOwned>(&self, flag: Option<T>, key: &str, default: T) -> Result<T> {
        Ok(self.pick(flag, key)?.unwrap_or(default))
    }

    /// Keys under `[subcommand]` that nothing asked for.
    pub fn check_unused(&self) -> Result<()> {
        let used = self.used.borrow();
        let extra: Vec<&String> = self.section.keys().filter(|k| !used.contains(*k)).collect();
        if extra.is_empty() {
            Ok(())
        } else {
            Err(anyhow!("unknown key(s) in [{}]: {}", self.name, extra.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(", ")))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layering() {
        let c = Config::parse("seed = 1\ncount = 5\n[generate-mix]\ncount = 9\n[eval]\nworkers = 3\n", "generate-mix").unwrap();
        assert_eq!(c.pick::<u64>(None, "seed").unwrap(), Some(1));
        assert_eq!(c.pick::<usize>(None, "count").unwrap(), Some(9));
        assert_eq!(c.pick(Some(2usize), "count").unwrap(), Some(2));
        assert_eq!(c.get::<usize>("workers").unwrap(), None);
        assert!(c.check_unused().is_ok());
        assert!(c.get::<String>("seed").is_err());
    }

    #[test]
    fn unknown_section_keys() {
        let c = Config::parse("[check]\nsamples = 3\n", "check").unwrap();
        let _ = c.get::<usize>("n");
        assert!(c.check_unused().unwrap_err().to_string().contains("samples"));
    }
}

//! Flat key=value experiment config files. Command-line flags always win
//! over file values; file values win over built-in defaults.

use std::collections::HashMap;
use std::path::Path;

use anyhow::{bail, Context, Result};

#[derive(Debug, Default, Clone)]
pub struct KvConfig {
    values: HashMap<String, String>,
}

impl KvConfig {
    pub fn load(path: &Path) -> Result<KvConfig> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut values = HashMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!(
                    "{}:{}: expected key=value, got {:?}",
                    path.display(),
                    lineno + 1,
                    raw
                );
            };
            values.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(KvConfig { values })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.get(key) {
            None => Ok(None),
            Some(raw) => match raw.parse() {
                Ok(v) => Ok(Some(v)),
                Err(e) => bail!("config key {key}={raw:?}: {e}"),
            },
        }
    }
}

/// Flag value, else config value, else default.
pub fn resolve<T: Clone>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_ignores_comments() {
        let dir = std::env::temp_dir().join(format!("nurd-kv-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("exp.conf");
        std::fs::write(&path, "# comment\nalpha = 0.25\nmode=gbtr\n\n").unwrap();
        let cfg = KvConfig::load(&path).unwrap();
        assert_eq!(cfg.parsed::<f64>("alpha").unwrap(), Some(0.25));
        assert_eq!(cfg.get("mode"), Some("gbtr"));
        assert_eq!(cfg.get("missing"), None);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn flags_win_over_file() {
        assert_eq!(resolve(Some(1.0), Some(2.0), 3.0), 1.0);
        assert_eq!(resolve(None, Some(2.0), 3.0), 2.0);
        assert_eq!(resolve::<f64>(None, None, 3.0), 3.0);
    }
}

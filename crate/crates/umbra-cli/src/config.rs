//! Flat key=value run configuration: a config file seeds the values, command
//! line flags override them, and the resolved set is written next to every
//! result so a run can be replayed from its output directory.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};

#[derive(Debug, Clone, Default)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut values = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!("{}:{}: expected key=value, got {raw:?}", path.display(), lineno + 1);
            };
            values.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(Self { values })
    }

    /// Flag value wins over config value.
    pub fn set_override<T: ToString>(&mut self, key: &str, flag: Option<T>) {
        if let Some(v) = flag {
            self.values.insert(key.to_string(), v.to_string());
        }
    }

    /// Record the resolved value of a defaulted setting.
    pub fn record<T: ToString>(&mut self, key: &str, value: T) {
        self.values.insert(key.to_string(), value.to_string());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn parsed<T>(&self, key: &str) -> Result<Option<T>>
    where
        T: std::str::FromStr,
        T::Err: std::fmt::Display,
    {
        match self.values.get(key) {
            None => Ok(None),
            Some(raw) => match raw.parse() {
                Ok(v) => Ok(Some(v)),
                Err(e) => bail!("config key {key}={raw:?}: {e}"),
            },
        }
    }

    pub fn parsed_or<T>(&self, key: &str, default: T) -> Result<T>
    where
        T: std::str::FromStr,
        T::Err: std::fmt::Display,
    {
        Ok(self.parsed(key)?.unwrap_or(default))
    }

    /// Serialize as sorted key=value lines.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.values {
            out.push_str(k);
            out.push('=');
            out.push_str(v);
            out.push('\n');
        }
        out
    }

    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::write(dir.join("run_config.txt"), self.to_text())
            .with_context(|| format!("writing run config under {}", dir.display()))?;
        Ok(())
    }
}

/// Parse "a,b,c" into a numeric list.
pub fn parse_list<T>(raw: &str) -> Result<Vec<T>>
where
    T: std::str::FromStr,
    T::Err: std::fmt::Display,
{
    raw.split(',')
        .map(|s| {
            s.trim()
                .parse::<T>()
                .map_err(|e| anyhow::anyhow!("bad list entry {s:?}: {e}"))
        })
        .collect()
}

/// Parse "x,y,z;x,y,z;..." into 3D vertices.
pub fn parse_vertices(raw: &str) -> Result<Vec<[f64; 3]>> {
    raw.split(';')
        .map(|v| {
            let coords: Vec<f64> = parse_list(v)?;
            if coords.len() != 3 {
                bail!("vertex {v:?} needs exactly three coordinates");
            }
            Ok([coords[0], coords[1], coords[2]])
        })
        .collect()
}

pub fn format_vertices(vertices: &[[f64; 3]]) -> String {
    vertices
        .iter()
        .map(|v| format!("{},{},{}", v[0], v[1], v[2]))
        .collect::<Vec<_>>()
        .join(";")
}

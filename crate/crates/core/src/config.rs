//! Line-oriented run configuration: `[section]` headers with `key = value`
//! entries; repeated keys build arrays. Unknown keys are rejected by the
//! consuming command.
//!
//! Units at this boundary: frequencies in Hz, durations in seconds,
//! fields in tesla, distances in meters. Conversion to rad/s happens in
//! the owning module.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Default seed used when none is supplied; fixed so runs stay
/// reproducible without an explicit seed.
pub const DEFAULT_SEED: u64 = 0x6E76_5F73_656E_7365;

/// Parsed configuration: ordered sections, each a multimap of keys.
#[derive(Debug, Clone, Default)]
pub struct RunConfig {
    sections: Vec<(String, Section)>,
}

#[derive(Debug, Clone, Default)]
pub struct Section {
    entries: BTreeMap<String, Vec<String>>,
    /// insertion order of keys for deterministic iteration
    order: Vec<String>,
}

impl Section {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).and_then(|v| v.first()).map(|s| s.as_str())
    }

    pub fn get_all(&self, key: &str) -> &[String] {
        self.entries.get(key).map(|v| v.as_slice()).unwrap_or(&[])
    }

    pub fn f64(&self, key: &str) -> Result<Option<f64>> {
        match self.get(key) {
            None => Ok(None),
            Some(s) => s
                .parse::<f64>()
                .map(Some)
                .map_err(|_| Error::ConfigValidation(format!("key `{key}`: not a number: {s}"))),
        }
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.order.iter().map(|s| s.as_str())
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        let mut current: Option<usize> = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name.strip_suffix(']').ok_or(Error::Parse {
                    line: lineno + 1,
                    msg: "unterminated section header".into(),
                })?;
                cfg.sections.push((name.trim().to_string(), Section::default()));
                current = Some(cfg.sections.len() - 1);
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(Error::Parse {
                line: lineno + 1,
                msg: format!("expected `key = value`, got `{line}`"),
            })?;
            let idx = current.ok_or(Error::Parse {
                line: lineno + 1,
                msg: "entry before any [section] header".into(),
            })?;
            let section = &mut cfg.sections[idx].1;
            let key = key.trim().to_string();
            if !section.entries.contains_key(&key) {
                section.order.push(key.clone());
            }
            section
                .entries
                .entry(key)
                .or_default()
                .push(value.trim().to_string());
        }
        Ok(cfg)
    }

    pub fn section(&self, name: &str) -> Option<&Section> {
        self.sections
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, s)| s)
    }

    pub fn sections_named(&self, name: &str) -> Vec<&Section> {
        self.sections
            .iter()
            .filter(|(n, _)| n == name)
            .map(|(_, s)| s)
            .collect()
    }

    /// Reject keys outside `allowed` in the named section.
    pub fn check_keys(&self, name: &str, allowed: &[&str]) -> Result<()> {
        for s in self.sections_named(name) {
            for k in s.keys() {
                if !allowed.contains(&k) {
                    return Err(Error::ConfigValidation(format!(
                        "unknown key `{k}` in section [{name}]"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Grid specification for parameter sweeps.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    /// Dotted parameter path, e.g. `deer.tau`.
    pub parameter: String,
    pub log_scale: bool,
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.points < 2 {
            return Err(Error::ConfigValidation(format!(
                "sweep of `{}` needs points >= 2, got {}",
                self.parameter, self.points
            )));
        }
        if self.start == self.stop {
            return Err(Error::ConfigValidation(format!(
                "sweep of `{}` is degenerate: start == stop",
                self.parameter
            )));
        }
        if self.log_scale && (self.start <= 0.0 || self.stop <= 0.0) {
            return Err(Error::ConfigValidation(
                "log sweep needs positive endpoints".into(),
            ));
        }
        Ok(())
    }

    pub fn grid(&self) -> Vec<f64> {
        let n = self.points;
        (0..n)
            .map(|k| {
                let s = k as f64 / (n - 1) as f64;
                if self.log_scale {
                    (self.start.ln() + s * (self.stop.ln() - self.start.ln())).exp()
                } else {
                    self.start + s * (self.stop - self.start)
                }
            })
            .collect()
    }

    pub fn from_section(section: &Section) -> Result<SweepSpec> {
        let parameter = section
            .get("parameter")
            .ok_or_else(|| Error::ConfigValidation("sweep needs `parameter`".into()))?
            .to_string();
        let scale = section.get("scale").unwrap_or("linear");
        let log_scale = match scale {
            "linear" => false,
            "log" => true,
            other => {
                return Err(Error::ConfigValidation(format!(
                    "scale must be linear|log, got {other}"
                )))
            }
        };
        let need = |key: &str| -> Result<f64> {
            section.f64(key)?.ok_or_else(|| {
                Error::ConfigValidation(format!("sweep needs `{key}`"))
            })
        };
        let spec = SweepSpec {
            parameter,
            log_scale,
            start: need("start")?,
            stop: need("stop")?,
            points: need("points")? as usize,
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_and_repeated_keys() {
        let cfg = RunConfig::parse(
            "# comment\n[system]\nb0_z = 0.01\n\n[deer]\ncoupling_hz = 1e5\ncoupling_hz = 2.5e5\nn = 16\n",
        )
        .unwrap();
        let sys = cfg.section("system").unwrap();
        assert_eq!(sys.f64("b0_z").unwrap(), Some(0.01));
        let deer = cfg.section("deer").unwrap();
        assert_eq!(deer.get_all("coupling_hz").len(), 2);
        assert_eq!(deer.f64("n").unwrap(), Some(16.0));
    }

    #[test]
    fn rejects_malformed_lines() {
        assert!(RunConfig::parse("[a]\nnonsense\n").is_err());
        assert!(RunConfig::parse("key = 1\n").is_err());
        assert!(RunConfig::parse("[unterminated\n").is_err());
    }

    #[test]
    fn unknown_keys_rejected() {
        let cfg = RunConfig::parse("[deer]\nn = 4\nwhat = 3\n").unwrap();
        assert!(cfg.check_keys("deer", &["n", "tau"]).is_err());
        assert!(cfg.check_keys("deer", &["n", "what"]).is_ok());
    }

    #[test]
    fn sweep_validation_and_grids() {
        let lin = SweepSpec {
            parameter: "deer.tau".into(),
            log_scale: false,
            start: 1.0,
            stop: 2.0,
            points: 5,
        };
        assert_eq!(lin.grid(), vec![1.0, 1.25, 1.5, 1.75, 2.0]);
        let log = SweepSpec {
            log_scale: true,
            start: 1.0,
            stop: 100.0,
            points: 3,
            ..lin.clone()
        };
        let g = log.grid();
        assert!((g[1] - 10.0).abs() < 1e-12);
        let degenerate = SweepSpec {
            points: 1,
            ..lin.clone()
        };
        assert!(degenerate.validate().is_err());
        let flat = SweepSpec {
            stop: 1.0,
            ..lin
        };
        assert!(flat.validate().is_err());
    }
}

//! Run configuration: defaults, `key = value` config files, flag overrides.

use std::collections::BTreeMap;
use std::path::Path;

use kinsym_core::catalog::VerifyCfg;
use kinsym_core::classify::DimCfg;
use kinsym_core::expr::ZeroCfg;

/// Everything that determines randomized behavior in one run. Values come
/// from the defaults, then the config file, then the command-line flags, in
/// that order.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub seed: u64,
    pub tol: f64,
    pub samples: usize,
    pub draws: usize,
    pub instantiations: usize,
    pub degree: usize,
    /// `json` (machine output only) or `table` (add the human view).
    pub format: String,
}

impl Default for RunConfig {
    fn default() -> RunConfig {
        RunConfig {
            seed: 0,
            tol: 1e-9,
            samples: 100,
            draws: 3,
            instantiations: 2,
            degree: 3,
            format: "json".to_string(),
        }
    }
}

impl RunConfig {
    /// Parse a `key = value` file (one pair per line, `#` comments).
    pub fn load(path: &Path) -> Result<RunConfig, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        let mut cfg = RunConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("{}:{}: expected key = value", path.display(), lineno + 1))?;
            cfg.set(key.trim(), value.trim())
                .map_err(|e| format!("{}:{}: {e}", path.display(), lineno + 1))?;
        }
        Ok(cfg)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, String> {
            value
                .parse()
                .map_err(|_| format!("bad value {value:?} for {key}"))
        }
        match key {
            "seed" => self.seed = num(key, value)?,
            "tol" => self.tol = num(key, value)?,
            "samples" => self.samples = num(key, value)?,
            "draws" => self.draws = num(key, value)?,
            "instantiations" => self.instantiations = num(key, value)?,
            "degree" => self.degree = num(key, value)?,
            "format" => match value {
                "json" | "table" => self.format = value.to_string(),
                _ => return Err(format!("bad value {value:?} for format (json|table)")),
            },
            _ => return Err(format!("unknown config key {key:?}")),
        }
        Ok(())
    }

    /// The zero-test configuration this run implies.
    pub fn zero_cfg(&self) -> ZeroCfg {
        ZeroCfg {
            tol: self.tol,
            n_samples: self.samples,
            param_draws: self.draws,
            seed: self.seed,
            ..ZeroCfg::default()
        }
    }

    /// The dimension-estimation configuration this run implies.
    pub fn dim_cfg(&self) -> DimCfg {
        DimCfg {
            seed: self.seed,
            ..DimCfg::default()
        }
    }

    /// The full table-verification configuration this run implies.
    pub fn verify_cfg(&self) -> VerifyCfg {
        let mut cfg = VerifyCfg {
            zero: self.zero_cfg(),
            dim: self.dim_cfg(),
            degree: self.degree,
            ..VerifyCfg::default()
        };
        cfg.closure.seed = self.seed;
        cfg
    }
}

/// Parse repeated `name=value` parameter flags.
pub fn parse_params(pairs: &[String]) -> Result<BTreeMap<String, f64>, String> {
    let mut out = BTreeMap::new();
    for p in pairs {
        let (k, v) = p
            .split_once('=')
            .ok_or_else(|| format!("bad parameter {p:?}, expected name=value"))?;
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|_| format!("bad numeric value in {p:?}"))?;
        out.insert(k.trim().to_string(), v);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_file_round_trip() {
        let dir = std::env::temp_dir().join("kinsym-cfg-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("run.cfg");
        std::fs::write(&path, "seed = 7\ntol = 1e-6 # loose\n\nformat = table\n").unwrap();
        let cfg = RunConfig::load(&path).unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.tol, 1e-6);
        assert_eq!(cfg.format, "table");
        assert_eq!(cfg.samples, RunConfig::default().samples);
    }

    #[test]
    fn unknown_key_is_rejected() {
        let dir = std::env::temp_dir().join("kinsym-cfg-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("bad.cfg");
        std::fs::write(&path, "sneed = 7\n").unwrap();
        assert!(RunConfig::load(&path).is_err());
    }

    #[test]
    fn params_parse() {
        let m = parse_params(&["P=1.5".into(), "k = 2".into()]).unwrap();
        assert_eq!(m["P"], 1.5);
        assert_eq!(m["k"], 2.0);
        assert!(parse_params(&["nope".into()]).is_err());
    }
}

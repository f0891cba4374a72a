//! Run configuration: a flat `key=value` file overlaid by command-line flags.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use lightcone_core::{Problem, ProblemParams};

use crate::CliError;

pub const KEYS: &[&str] = &[
    "p",
    "k",
    "n",
    "dtau",
    "tau-end",
    "seed",
    "out",
    "free",
    "no-gauge",
    "allow-real-p",
    "filter",
    "jmax",
    "mode",
    "samples",
    "ps",
    "ks",
];

pub const K_RANGE: (usize, usize) = (1, 4);
pub const N_RANGE: (usize, usize) = (16, 512);
pub const MAX_JMAX: usize = 64;

/// Raw settings, keyed by flag name without the leading dashes.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings(BTreeMap<String, String>);

impl Settings {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut out = Settings::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected key=value", i + 1)))?;
            out.set(key.trim(), value.trim())?;
        }
        Ok(out)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let key = key.replace('_', "-");
        if !KEYS.contains(&key.as_str()) {
            return Err(CliError::Config(format!("unknown config key '{key}'")));
        }
        self.0.insert(key, value.to_string());
        Ok(())
    }

    /// Later settings win.
    pub fn overlay(&mut self, other: &Settings) {
        for (k, v) in &other.0 {
            self.0.insert(k.clone(), v.clone());
        }
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        self.get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|_| CliError::Config(format!("invalid value '{v}' for {key}")))
            })
            .transpose()
    }

    fn flag(&self, key: &str) -> Result<bool, CliError> {
        match self.get(key) {
            None => Ok(false),
            Some("true" | "1" | "yes" | "") => Ok(true),
            Some("false" | "0" | "no") => Ok(false),
            Some(v) => Err(CliError::Config(format!("invalid boolean '{v}' for {key}"))),
        }
    }

    fn list(&self, key: &str) -> Vec<String> {
        self.get(key)
            .map(|v| {
                v.split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(str::to_string)
                    .collect()
            })
            .unwrap_or_default()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// `None` when neither `--free` nor `--p` was given.
    pub problem: Option<Problem<f64>>,
    pub k: usize,
    pub n: usize,
    pub dtau: Option<f64>,
    pub tau_end: f64,
    pub seed: u64,
    pub out: PathBuf,
    pub free: bool,
    pub no_gauge: bool,
    pub allow_real_p: bool,
    pub filter: bool,
    pub jmax: usize,
    pub mode: Option<String>,
    pub samples: usize,
    pub ps: Vec<f64>,
    pub ks: Vec<usize>,
}

pub fn parse_p(text: &str, allow_real_p: bool) -> Result<ProblemParams<f64>, CliError> {
    let p: f64 = text
        .parse()
        .map_err(|_| CliError::Config(format!("invalid value '{text}' for p")))?;
    if allow_real_p {
        return ProblemParams::with_real_exponent(p).map_err(|e| CliError::Config(e.to_string()));
    }
    if p.fract() != 0.0 || p < 3.0 || p % 2.0 != 1.0 || p > 1e9 {
        return Err(CliError::Config(format!(
            "p must be an odd integer >= 3 (got {text}); pass --allow-real-p for real exponents"
        )));
    }
    ProblemParams::new(p as i64).map_err(|e| CliError::Config(e.to_string()))
}

pub fn check_k(k: usize) -> Result<usize, CliError> {
    if !(K_RANGE.0..=K_RANGE.1).contains(&k) {
        return Err(CliError::Config(format!(
            "k must lie in [{}, {}], got {k}",
            K_RANGE.0, K_RANGE.1
        )));
    }
    Ok(k)
}

impl RunConfig {
    pub fn resolve(s: &Settings) -> Result<Self, CliError> {
        let free = s.flag("free")?;
        let allow_real_p = s.flag("allow-real-p")?;
        let problem = match (free, s.get("p")) {
            (true, Some(_)) => {
                return Err(CliError::Config("--free and --p are mutually exclusive".into()))
            }
            (true, None) => Some(Problem::Free),
            (false, Some(p)) => Some(Problem::Semilinear(parse_p(p, allow_real_p)?)),
            (false, None) => None,
        };
        let k = check_k(s.parsed("k")?.unwrap_or(1))?;
        let n = s.parsed("n")?.unwrap_or(64);
        if !(N_RANGE.0..=N_RANGE.1).contains(&n) {
            return Err(CliError::Config(format!(
                "n must lie in [{}, {}], got {n}",
                N_RANGE.0, N_RANGE.1
            )));
        }
        let dtau: Option<f64> = s.parsed("dtau")?;
        if dtau.is_some_and(|d| !(d > 0.0 && d.is_finite())) {
            return Err(CliError::Config("dtau must be positive".into()));
        }
        let tau_end: f64 = s.parsed("tau-end")?.unwrap_or(6.0);
        if !(tau_end > 0.0 && tau_end.is_finite()) {
            return Err(CliError::Config("tau-end must be positive".into()));
        }
        let jmax = s.parsed("jmax")?.unwrap_or(3);
        if jmax > MAX_JMAX {
            return Err(CliError::Config(format!("jmax must be at most {MAX_JMAX}")));
        }
        let samples = s.parsed("samples")?.unwrap_or(5);
        if samples == 0 {
            return Err(CliError::Config("samples must be at least 1".into()));
        }
        let no_gauge = s.flag("no-gauge")?;
        if free && no_gauge {
            return Err(CliError::Config("--no-gauge applies to the semilinear problem only".into()));
        }
        let ps = s
            .list("ps")
            .iter()
            .map(|p| parse_p(p, allow_real_p).map(|q| q.p()))
            .collect::<Result<Vec<_>, _>>()?;
        let ks = s
            .list("ks")
            .iter()
            .map(|k| {
                k.parse::<usize>()
                    .map_err(|_| CliError::Config(format!("invalid value '{k}' in ks")))
                    .and_then(check_k)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            problem,
            k,
            n,
            dtau,
            tau_end,
            seed: s.parsed("seed")?.unwrap_or(0),
            out: PathBuf::from(s.get("out").unwrap_or("lightcone-out")),
            free,
            no_gauge,
            allow_real_p,
            filter: s.flag("filter")?,
            jmax,
            mode: s.get("mode").map(str::to_string),
            samples,
            ps,
            ks,
        })
    }

    pub fn problem(&self) -> Result<Problem<f64>, CliError> {
        self.problem
            .ok_or_else(|| CliError::Config("pass --p <odd p >= 3> or --free".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn settings(pairs: &[(&str, &str)]) -> Settings {
        let mut s = Settings::default();
        for (k, v) in pairs {
            s.set(k, v).unwrap();
        }
        s
    }

    #[test]
    fn defaults() {
        let c = RunConfig::resolve(&Settings::default()).unwrap();
        assert_eq!((c.k, c.n, c.tau_end, c.seed, c.jmax), (1, 64, 6.0, 0, 3));
        assert!(c.problem.is_none() && !c.filter);
    }

    #[test]
    fn file_parsing_and_override() {
        let mut s = Settings::parse("# run\np = 5\nk=2\ntau_end = 4 # short\n").unwrap();
        s.overlay(&settings(&[("k", "1")]));
        let c = RunConfig::resolve(&s).unwrap();
        assert_eq!(c.k, 1);
        assert_eq!(c.tau_end, 4.0);
        assert_eq!(c.problem.unwrap().pc0(), 2.0 * 5.0 * 6.0 / 16.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(Settings::parse("colour = red").is_err());
        assert!(Settings::parse("k 2").is_err());
        for pairs in [
            &[("p", "4")][..],
            &[("p", "1")],
            &[("p", "3.5")],
            &[("k", "0")],
            &[("k", "5")],
            &[("n", "8")],
            &[("n", "1024")],
            &[("free", "true"), ("p", "3")],
            &[("free", "true"), ("no-gauge", "true")],
            &[("ps", "3,4")],
            &[("samples", "0")],
        ] {
            assert!(RunConfig::resolve(&settings(pairs)).is_err(), "{pairs:?}");
        }
    }

    #[test]
    fn real_p_needs_the_flag() {
        let c = RunConfig::resolve(&settings(&[("p", "4"), ("allow-real-p", "true")])).unwrap();
        assert_eq!(c.problem.unwrap().params().unwrap().p(), 4.0);
    }
}

//! Experiment configuration shared by `sample` and `sweep`.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;

use mgd::baselines::ExpFamilyTarget;
use mgd::moments::{AbsQuadraticMap, LogDensityMap, MonomialMap, QuadraticMap};
use mgd::scattering::{FilterBank, ScatteringMap};
use mgd::solver::{MgdConfig, StepRule};
use mgd::MomentFunction;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

/// Moment family, written `monomial:r`, `quadratic`, `abs`, `scattering:J,L`
/// or `logpoly:c0,c1,…` (log-density `Σ c_k x^k`, giving `φ = (x², log p)`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Family {
    Monomial(usize),
    Quadratic,
    Abs,
    Scattering { j: usize, l: usize },
    LogPoly(Vec<f64>),
}

fn parse_list<T: FromStr>(s: &str, what: &str) -> CliResult<Vec<T>> {
    s.split(',')
        .map(|v| {
            v.trim()
                .parse()
                .map_err(|_| CliError::config(format!("cannot parse {what} entry {v:?}")))
        })
        .collect()
}

fn join(v: &[f64]) -> String {
    v.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(",")
}

impl FromStr for Family {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        let (name, args) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        match (name, args) {
            ("monomial", Some(a)) => {
                let r: usize = a
                    .parse()
                    .map_err(|_| CliError::config(format!("monomial degree must be an integer, got {a:?}")))?;
                if r == 0 {
                    return Err(CliError::config("monomial degree must be at least 1"));
                }
                Ok(Family::Monomial(r))
            }
            ("quadratic", None) => Ok(Family::Quadratic),
            ("abs", None) => Ok(Family::Abs),
            ("scattering", Some(a)) => match parse_list::<usize>(a, "scattering")?[..] {
                [j, l] if j >= 1 && l >= 1 => Ok(Family::Scattering { j, l }),
                _ => Err(CliError::config(format!("scattering needs J,L ≥ 1, got {a:?}"))),
            },
            ("logpoly", Some(a)) => {
                let c = parse_list::<f64>(a, "log-density")?;
                if c.iter().any(|v| !v.is_finite()) {
                    return Err(CliError::config("log-density coefficients must be finite"));
                }
                Ok(Family::LogPoly(c))
            }
            _ => Err(CliError::config(format!(
                "unknown moment family {s:?}; expected monomial:r, quadratic, abs, scattering:J,L or logpoly:c0,c1,..."
            ))),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::Monomial(r) => write!(f, "monomial:{r}"),
            Family::Quadratic => write!(f, "quadratic"),
            Family::Abs => write!(f, "abs"),
            Family::Scattering { j, l } => write!(f, "scattering:{j},{l}"),
            Family::LogPoly(c) => write!(f, "logpoly:{}", join(c)),
        }
    }
}

impl TryFrom<String> for Family {
    type Error = CliError;
    fn try_from(s: String) -> CliResult<Self> {
        s.parse()
    }
}

impl From<Family> for String {
    fn from(f: Family) -> Self {
        f.to_string()
    }
}

/// How samples are laid out for a family.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    /// Trailing axes forming one sample.
    pub sample_dims: Vec<usize>,
}

impl Layout {
    pub fn dim(&self) -> usize {
        self.sample_dims.iter().product()
    }
}

impl Family {
    /// Number of trailing data axes forming one sample when the data is an
    /// array. Scattering with one orientation works on 1D series, with more
    /// on square 2D fields.
    pub fn field_axes(&self) -> Option<usize> {
        match self {
            Family::Scattering { l, .. } => Some(if *l == 1 { 1 } else { 2 }),
            _ => None,
        }
    }

    pub fn build(&self, layout: &Layout) -> CliResult<Arc<dyn MomentFunction>> {
        let d = layout.dim();
        let scalar = |name: &str| -> CliResult<()> {
            if d == 1 {
                Ok(())
            } else {
                Err(CliError::data(format!("family {name} needs scalar samples, data has dimension {d}")))
            }
        };
        Ok(match self {
            Family::Monomial(r) => {
                scalar("monomial")?;
                Arc::new(MonomialMap::new(*r)?)
            }
            Family::Quadratic => Arc::new(QuadraticMap::new(d)?),
            Family::Abs => {
                scalar("abs")?;
                Arc::new(AbsQuadraticMap::new())
            }
            Family::LogPoly(c) => {
                scalar("logpoly")?;
                Arc::new(LogDensityMap::polynomial(c.clone())?)
            }
            Family::Scattering { j, l } => {
                let dims = &layout.sample_dims;
                let n = dims[0];
                if dims.iter().any(|&v| v != n) {
                    return Err(CliError::data(format!("scattering needs square fields, got {dims:?}")));
                }
                if !n.is_power_of_two() {
                    return Err(CliError::data(format!(
                        "scattering needs dyadic sizes, got {n}; crop with `mgd ingest --scattering`"
                    )));
                }
                let bank = FilterBank::new(n, dims.len(), *j, *l)?;
                Arc::new(ScatteringMap::new(bank))
            }
        })
    }
}

/// Reference law for divergences in a sweep, written `poly:θ1,θ2,…` for
/// `p ∝ exp(−Σ θ_k x^k)` or `abs:a,b` for `p ∝ exp(−a x² − b|x|)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Target {
    Poly(Vec<f64>),
    Abs { a: f64, b: f64 },
}

impl FromStr for Target {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        match s.split_once(':') {
            Some(("poly", a)) => {
                let t = parse_list::<f64>(a, "target")?;
                if t.iter().any(|v| !v.is_finite()) {
                    return Err(CliError::config("target coefficients must be finite"));
                }
                Ok(Target::Poly(t))
            }
            Some(("abs", a)) => match parse_list::<f64>(a, "target")?[..] {
                [a, b] if a.is_finite() && b.is_finite() => Ok(Target::Abs { a, b }),
                _ => Err(CliError::config(format!("abs target needs a,b, got {a:?}"))),
            },
            _ => Err(CliError::config(format!(
                "unknown target {s:?}; expected poly:θ1,θ2,... or abs:a,b"
            ))),
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::Poly(t) => write!(f, "poly:{}", join(t)),
            Target::Abs { a, b } => write!(f, "abs:{a},{b}"),
        }
    }
}

impl TryFrom<String> for Target {
    type Error = CliError;
    fn try_from(s: String) -> CliResult<Self> {
        s.parse()
    }
}

impl From<Target> for String {
    fn from(t: Target) -> Self {
        t.to_string()
    }
}

impl Target {
    pub fn build(&self) -> CliResult<ExpFamilyTarget> {
        Ok(match self {
            Target::Poly(t) => ExpFamilyTarget::polynomial(t.clone())?,
            Target::Abs { a, b } => ExpFamilyTarget::new(vec![*a, *b], Arc::new(AbsQuadraticMap::new()))?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum DataFormat {
    /// Comma or whitespace separated rows.
    Csv,
    /// Raw f64 payload with a JSON sidecar.
    Field,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub family: Family,
    /// One value for `sample`, the list for `sweep`.
    pub sigma2: Vec<f64>,
    /// Fixed step count; otherwise `step_a σ² + step_b`.
    pub n_steps: Option<usize>,
    pub step_a: f64,
    pub step_b: f64,
    pub n_rep: usize,
    /// Gram regularization.
    pub delta: f64,
    /// Confinement drift `−ε x`.
    pub epsilon: f64,
    pub seed: u64,
    pub deterministic: bool,
    /// Interpolant pairs used to estimate the moment path; `n_rep` if unset.
    pub n_mc: Option<usize>,
    pub data: Option<PathBuf>,
    pub data_format: Option<DataFormat>,
    pub target: Option<Target>,
    /// Histogram bins for 1D entropies and divergences.
    pub bins: usize,
    pub output: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let rule = StepRule::default();
        Self {
            family: Family::Monomial(4),
            sigma2: vec![1.0],
            n_steps: None,
            step_a: rule.a,
            step_b: rule.b,
            n_rep: 10_000,
            delta: 1e-7,
            epsilon: 0.0,
            seed: 0,
            deterministic: false,
            n_mc: None,
            data: None,
            data_format: None,
            target: None,
            bins: 500,
            output: PathBuf::from("mgd-out"),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> CliResult<Self> {
        serde_json::from_str(text).map_err(|e| CliError::config(format!("bad configuration: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configuration serializes")
    }

    /// SHA-256 of the configuration without its output directory, so the
    /// same experiment hashes alike wherever it is written.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output = PathBuf::new();
        let bytes = serde_json::to_vec(&c).expect("configuration serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.sigma2.is_empty() {
            return Err(CliError::config("the sigma2 list is empty"));
        }
        if let Some(s) = self.sigma2.iter().find(|s| !(s.is_finite() && **s >= 0.0)) {
            return Err(CliError::config(format!("sigma2 must be finite and >= 0, got {s}")));
        }
        if self.n_rep == 0 || self.n_mc == Some(0) || self.bins == 0 {
            return Err(CliError::config("n_rep, n_mc and bins must be positive"));
        }
        if self.n_steps == Some(0) {
            return Err(CliError::config("n_steps must be positive"));
        }
        if !(self.step_a >= 0.0 && self.step_b >= 0.0 && self.step_a.is_finite() && self.step_b.is_finite()) {
            return Err(CliError::config("step rule coefficients must be finite and >= 0"));
        }
        if self.data.is_none() {
            return Err(CliError::config("no data file given"));
        }
        Ok(())
    }

    pub fn solver(&self, sigma2: f64) -> MgdConfig {
        let mut c = MgdConfig::new(sigma2, self.n_rep, self.seed);
        c.step_rule = StepRule {
            a: self.step_a,
            b: self.step_b,
        };
        c.n_steps = self.n_steps;
        c.delta = self.delta;
        c.epsilon_confine = self.epsilon;
        c.deterministic = self.deterministic;
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn families_parse_and_print_back() {
        for s in ["monomial:4", "quadratic", "abs", "scattering:2,4", "logpoly:0,0.4,4,0,-0.8"] {
            assert_eq!(s.parse::<Family>().unwrap().to_string(), s);
        }
        for bad in ["monomial", "monomial:0", "scattering:2", "cubic", "logpoly:x", "abs:1"] {
            assert!(bad.parse::<Family>().is_err(), "{bad}");
        }
    }

    #[test]
    fn targets_parse_and_print_back() {
        for s in ["poly:-0.4,-4,0,0.8", "abs:0,1"] {
            assert_eq!(s.parse::<Target>().unwrap().to_string(), s);
        }
        assert!("abs:1".parse::<Target>().is_err());
        assert!("gauss:1".parse::<Target>().is_err());
    }

    #[test]
    fn config_round_trips() {
        let c = ExperimentConfig {
            family: Family::LogPoly(vec![0.1, 1.0 / 3.0]),
            sigma2: vec![0.5, 2.0],
            n_steps: Some(77),
            data: Some("x.csv".into()),
            data_format: Some(DataFormat::Csv),
            target: Some(Target::Abs { a: 0.0, b: 1.0 }),
            seed: u64::MAX,
            ..ExperimentConfig::default()
        };
        let back = ExperimentConfig::from_json(&c.to_json()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = ExperimentConfig::from_json(r#"{"sigma2": [1.0], "volatility": 3}"#).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        let ok = ExperimentConfig::from_json(r#"{"sigma2": [2.0], "family": "abs"}"#).unwrap();
        assert_eq!(ok.family, Family::Abs);
    }

    #[test]
    fn hash_ignores_the_output_directory_only() {
        let a = ExperimentConfig::default();
        let b = ExperimentConfig {
            output: "elsewhere".into(),
            ..a.clone()
        };
        let c = ExperimentConfig { seed: 1, ..a.clone() };
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn validation_catches_bad_settings() {
        let good = ExperimentConfig {
            data: Some("d.csv".into()),
            ..ExperimentConfig::default()
        };
        assert!(good.validate().is_ok());
        for bad in [
            ExperimentConfig { sigma2: vec![], ..good.clone() },
            ExperimentConfig { sigma2: vec![-1.0], ..good.clone() },
            ExperimentConfig { n_rep: 0, ..good.clone() },
            ExperimentConfig { n_steps: Some(0), ..good.clone() },
            ExperimentConfig { data: None, ..good.clone() },
        ] {
            assert_eq!(bad.validate().unwrap_err().exit_code(), 2);
        }
    }

    #[test]
    fn scattering_layout_follows_orientations() {
        assert_eq!(Family::Scattering { j: 2, l: 1 }.field_axes(), Some(1));
        assert_eq!(Family::Scattering { j: 2, l: 4 }.field_axes(), Some(2));
        let phi = Family::Scattering { j: 2, l: 4 }
            .build(&Layout { sample_dims: vec![32, 32] })
            .unwrap();
        assert_eq!(phi.dim(), 1024);
        assert!(Family::Monomial(4).build(&Layout { sample_dims: vec![3] }).is_err());
        assert_eq!(Family::Quadratic.build(&Layout { sample_dims: vec![3] }).unwrap().n_moments(), 6);
    }
}

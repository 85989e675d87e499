//! Cost to reach a fixed KL divergence on double-well targets of growing
//! barrier height, for MALA and for MGD.

use std::fmt::Write as _;

use super::mala::{adapt_step_size, MalaChains, OPTIMAL_ACCEPTANCE};
use super::target::ExpFamilyTarget;
use crate::analysis::{kl_histogram, kl_histogram_corrected, Density1D, Histogram1D};
use crate::ensemble::ParticleEnsemble;
use crate::error::{Error, Result};
use crate::interpolant::InterpolantSchedule;
use crate::moments::MonomialMap;
use crate::path::monomial_moment_path;
use crate::rng::RngContract;
use crate::solver::{mgd_run, MgdConfig, StepRule};

#[derive(Debug, Clone, PartialEq)]
pub struct BarrierConfig {
    pub betas: Vec<f64>,
    pub kl_target: f64,
    /// Equal-width bins on `range` for the KL estimate.
    pub n_bins: usize,
    pub range: (f64, f64),
    /// Subtract the Miller–Madow term from the plug-in KL, so the target is
    /// reachable with ensembles whose binning bias `(B − 1)/2N` alone
    /// would exceed it.
    pub bias_corrected_kl: bool,
    /// Simpson nodes normalizing the target.
    pub quadrature_nodes: usize,
    pub mala_chains: usize,
    pub mala_pilot_steps: usize,
    /// Drift cap for MALA in proposal standard deviations; see
    /// [`super::MalaParams::drift_cap`].
    pub mala_drift_cap: Option<f64>,
    /// Censoring budget for MALA.
    pub mala_max_steps: usize,
    /// KL is checked at steps growing by this factor, then the crossing is
    /// located exactly by bisection.
    pub checkpoint_ratio: f64,
    pub mgd_n_rep: usize,
    /// Bracket of σ² searched for MGD; runs use `step_rule.n_steps(σ²)`.
    pub mgd_sigma2_range: (f64, f64),
    pub mgd_bisections: usize,
    pub step_rule: StepRule,
    pub seed: u64,
}

impl Default for BarrierConfig {
    fn default() -> Self {
        Self {
            betas: vec![0.4, 0.8, 1.2],
            kl_target: 1e-3,
            n_bins: 500,
            range: (-4.0, 4.0),
            bias_corrected_kl: true,
            quadrature_nodes: 10_001,
            mala_chains: 100_000,
            mala_pilot_steps: 500,
            mala_drift_cap: Some(3.0),
            mala_max_steps: 200_000,
            checkpoint_ratio: 1.05,
            mgd_n_rep: 100_000,
            mgd_sigma2_range: (0.25, 8.0),
            mgd_bisections: 4,
            step_rule: StepRule::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sampler {
    Mala,
    Mgd,
}

impl Sampler {
    pub fn name(self) -> &'static str {
        match self {
            Sampler::Mala => "MALA",
            Sampler::Mgd => "MGD",
        }
    }
}

/// Steps needed by one sampler at one `β`.
#[derive(Debug, Clone, PartialEq)]
pub struct BarrierRow {
    pub beta: f64,
    pub sampler: Sampler,
    /// First step count meeting the target, or the budget when censored.
    pub n_steps: usize,
    pub kl: f64,
    pub censored: bool,
    /// MALA: frozen step size. MGD: chosen σ².
    pub parameter: f64,
}

/// `β,algorithm,n_steps,kl,censored,parameter` rows with a header.
pub fn barrier_table_csv(rows: &[BarrierRow]) -> String {
    let mut s = String::from("beta,algorithm,n_steps,kl,censored,parameter\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{:e},{},{:e}",
            r.beta,
            r.sampler.name(),
            r.n_steps,
            r.kl,
            r.censored,
            r.parameter
        );
    }
    s
}

fn validate(cfg: &BarrierConfig) -> Result<()> {
    if cfg.betas.is_empty() {
        return Err(Error::InvalidConfig("β list is empty".into()));
    }
    if let Some(b) = cfg.betas.iter().find(|b| !(**b > 0.0 && b.is_finite())) {
        return Err(Error::InvalidConfig(format!("β must be positive, got {b}")));
    }
    if !(cfg.kl_target > 0.0) {
        return Err(Error::InvalidConfig("KL target must be positive".into()));
    }
    if !(cfg.checkpoint_ratio > 1.0) {
        return Err(Error::InvalidConfig("checkpoint ratio must exceed 1".into()));
    }
    let (lo, hi) = cfg.mgd_sigma2_range;
    if !(0.0 < lo && lo < hi) {
        return Err(Error::InvalidConfig("σ² bracket must satisfy 0 < lo < hi".into()));
    }
    if cfg.mala_chains < 2 || cfg.mgd_n_rep < 2 {
        return Err(Error::InvalidConfig("need at least 2 chains/particles".into()));
    }
    Ok(())
}

/// Runs MALA and MGD for every `β` and reports the step counts.
pub fn barrier_cost_experiment(cfg: &BarrierConfig) -> Result<Vec<BarrierRow>> {
    validate(cfg)?;
    let mut rows = Vec::new();
    for &beta in &cfg.betas {
        rows.push(mala_steps_to_target(cfg, beta)?);
        rows.push(mgd_steps_to_target(cfg, beta)?);
    }
    Ok(rows)
}

/// KL of `samples` to the target over the configured bins.
pub fn barrier_kl(cfg: &BarrierConfig, samples: &[f64], density: &Density1D) -> Result<f64> {
    let hist = Histogram1D::equal_width(samples, cfg.n_bins, cfg.range.0, cfg.range.1)?;
    let q = density.bin_masses(hist.edges());
    Ok(if cfg.bias_corrected_kl {
        kl_histogram_corrected(&hist, &q)
    } else {
        kl_histogram(&hist, &q)
    })
}

fn target_density(cfg: &BarrierConfig, target: &ExpFamilyTarget) -> Result<Density1D> {
    target.density_1d(cfg.range.0, cfg.range.1, cfg.quadrature_nodes)
}

/// MALA from white noise with a step size tuned on a pilot ensemble, then
/// frozen. KL is tracked at geometric checkpoints; the first crossing is
/// pinned down by bisection, replaying from the last failing checkpoint.
pub fn mala_steps_to_target(cfg: &BarrierConfig, beta: f64) -> Result<BarrierRow> {
    validate(cfg)?;
    let target = ExpFamilyTarget::double_well(beta)?;
    let density = target_density(cfg, &target)?;
    let rng = RngContract::new(cfg.seed);
    let kl = |c: &MalaChains<'_>| barrier_kl(cfg, &c.x, &density);

    // pilot tuning on a separate, smaller ensemble
    let pilot_rng = RngContract::new(cfg.seed ^ 0x5eed_0f_91107);
    let pilot_init = ParticleEnsemble::standard_normal(cfg.mala_chains.min(8192), 1, &pilot_rng)?;
    let mut pilot = MalaChains::new(&target, pilot_init)?;
    pilot.drift_cap = cfg.mala_drift_cap;
    let mut h = 0.1 / beta;
    for i in 0..cfg.mala_pilot_steps {
        let a = pilot.sweep(h, i, &pilot_rng)?;
        h = adapt_step_size(h, i + 1, a as f64 / pilot.n_chains() as f64, OPTIMAL_ACCEPTANCE);
    }

    let init = ParticleEnsemble::standard_normal(cfg.mala_chains, 1, &rng)?;
    let mut chains = MalaChains::new(&target, init)?;
    chains.drift_cap = cfg.mala_drift_cap;
    let mut last_fail = (0usize, chains.clone());
    let mut next = 1usize;
    let mut n = 0usize;
    let mut current = f64::INFINITY;
    while n < cfg.mala_max_steps {
        chains.sweep(h, n, &rng)?;
        n += 1;
        if n < next && n < cfg.mala_max_steps {
            continue;
        }
        current = kl(&chains)?;
        if current <= cfg.kl_target {
            break;
        }
        last_fail = (n, chains.clone());
        next = ((n as f64 * cfg.checkpoint_ratio).ceil() as usize).max(n + 1);
    }
    if current > cfg.kl_target {
        return Ok(BarrierRow {
            beta,
            sampler: Sampler::Mala,
            n_steps: n,
            kl: current,
            censored: true,
            parameter: h,
        });
    }
    // bisection on (lo, hi]: lo fails, hi passes
    let (mut lo, mut base) = last_fail;
    let (mut hi, mut hi_kl) = (n, current);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        let mut c = base.clone();
        for s in lo..mid {
            c.sweep(h, s, &rng)?;
        }
        let v = kl(&c)?;
        if v <= cfg.kl_target {
            hi = mid;
            hi_kl = v;
        } else {
            lo = mid;
            base = c;
        }
    }
    Ok(BarrierRow {
        beta,
        sampler: Sampler::Mala,
        n_steps: hi,
        kl: hi_kl,
        censored: false,
        parameter: h,
    })
}

/// KL of one MGD run at `σ²` with data distributed as the target, using the
/// exact moment path of the target.
pub fn mgd_kl_at(cfg: &BarrierConfig, beta: f64, sigma2: f64) -> Result<(usize, f64)> {
    let target = ExpFamilyTarget::double_well(beta)?;
    let density = target_density(cfg, &target)?;
    // data moments from a wider quadrature so the tails are not clipped
    let wide = target.density_1d(-8.0, 8.0, cfg.quadrature_nodes)?;
    let m: Vec<f64> = (1..=4).map(|k| wide.expectation(|x| x.powi(k))).collect();
    let n_steps = cfg.step_rule.n_steps(sigma2);
    let path = monomial_moment_path(&m, n_steps, &InterpolantSchedule::Linear)?;
    let mut mc = MgdConfig::new(sigma2, cfg.mgd_n_rep, cfg.seed);
    mc.step_rule = cfg.step_rule;
    let phi = MonomialMap::new(4)?;
    let init = ParticleEnsemble::standard_normal(cfg.mgd_n_rep, 1, &mc.rng())?;
    let (out, _) = mgd_run(&mc, &phi, &path, init)?;
    Ok((n_steps, barrier_kl(cfg, out.as_slice(), &density)?))
}

/// Smallest σ² (bisection in log σ²) whose MGD output meets the KL target;
/// the cost is the matching step count `n_σ`.
pub fn mgd_steps_to_target(cfg: &BarrierConfig, beta: f64) -> Result<BarrierRow> {
    validate(cfg)?;
    let (lo, hi) = cfg.mgd_sigma2_range;
    let row = |sigma2: f64, n_steps: usize, kl: f64, censored: bool| BarrierRow {
        beta,
        sampler: Sampler::Mgd,
        n_steps,
        kl,
        censored,
        parameter: sigma2,
    };
    let (n_hi, kl_hi) = mgd_kl_at(cfg, beta, hi)?;
    if kl_hi > cfg.kl_target {
        return Ok(row(hi, n_hi, kl_hi, true));
    }
    let (n_lo, kl_lo) = mgd_kl_at(cfg, beta, lo)?;
    if kl_lo <= cfg.kl_target {
        return Ok(row(lo, n_lo, kl_lo, false));
    }
    let (mut a, mut b) = (lo.ln(), hi.ln());
    let mut best = (hi, n_hi, kl_hi);
    for _ in 0..cfg.mgd_bisections {
        let mid = 0.5 * (a + b);
        let s2 = mid.exp();
        let (n, kl) = mgd_kl_at(cfg, beta, s2)?;
        if kl <= cfg.kl_target {
            b = mid;
            best = (s2, n, kl);
        } else {
            a = mid;
        }
    }
    Ok(row(best.0, best.1, best.2, false))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> BarrierConfig {
        BarrierConfig {
            betas: vec![0.4],
            kl_target: 5e-2,
            n_bins: 100,
            mala_chains: 4000,
            mala_pilot_steps: 100,
            mala_max_steps: 5000,
            mgd_n_rep: 4000,
            mgd_sigma2_range: (0.1, 2.0),
            mgd_bisections: 2,
            step_rule: StepRule { a: 40.0, b: 100.0 },
            ..BarrierConfig::default()
        }
    }

    #[test]
    fn small_experiment_produces_both_rows() {
        let rows = barrier_cost_experiment(&small()).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].sampler, Sampler::Mala);
        assert_eq!(rows[1].sampler, Sampler::Mgd);
        for r in &rows {
            assert!(!r.censored, "{r:?}");
            assert!(r.kl <= 5e-2);
        }
        let csv = barrier_table_csv(&rows);
        assert_eq!(csv.lines().count(), 3);
    }

    #[test]
    fn mala_crossing_is_the_first_passing_step() {
        let cfg = small();
        let row = mala_steps_to_target(&cfg, 0.4).unwrap();
        // replay: one step fewer must still fail
        let target = ExpFamilyTarget::double_well(0.4).unwrap();
        let density = target.density_1d(-4.0, 4.0, cfg.quadrature_nodes).unwrap();
        let rng = RngContract::new(cfg.seed);
        let init = ParticleEnsemble::standard_normal(cfg.mala_chains, 1, &rng).unwrap();
        let mut c = MalaChains::new(&target, init).unwrap();
        c.drift_cap = cfg.mala_drift_cap;
        for s in 0..row.n_steps - 1 {
            c.sweep(row.parameter, s, &rng).unwrap();
        }
        assert!(barrier_kl(&cfg, &c.x, &density).unwrap() > cfg.kl_target);
        c.sweep(row.parameter, row.n_steps - 1, &rng).unwrap();
        assert!(barrier_kl(&cfg, &c.x, &density).unwrap() <= cfg.kl_target);
    }

    #[test]
    fn unreachable_targets_are_censored() {
        let cfg = BarrierConfig {
            kl_target: 1e-9,
            mala_max_steps: 20,
            ..small()
        };
        let row = mala_steps_to_target(&cfg, 1.2).unwrap();
        assert!(row.censored);
        assert_eq!(row.n_steps, 20);
        let row = mgd_steps_to_target(&cfg, 1.2).unwrap();
        assert!(row.censored);
    }

    #[test]
    fn empty_beta_list_is_rejected() {
        let cfg = BarrierConfig {
            betas: vec![],
            ..small()
        };
        assert!(barrier_cost_experiment(&cfg).is_err());
    }
}

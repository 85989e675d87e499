//! The subcommands. Each writes its files into the output directory and
//! returns the summary it also prints.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use mgd::analysis::{
    gaussian_entropy_of, gaussian_entropy_rate, histogram_entropy, kl_histogram_corrected, loglog_rate_fit,
    negentropy_estimate, Histogram1D, WelchParams,
};
use mgd::baselines::{barrier_cost_experiment, barrier_table_csv, BarrierConfig};
use mgd::path::estimate_moment_path;
use mgd::scattering::{FilterBank, ScatteringMap, ScatteringMoment};
use mgd::solver::{mgd_run, SolverTrace};
use mgd::{InterpolantSchedule, MomentFunction, ParticleEnsemble};
use nalgebra::DMatrix;
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, Layout};
use crate::data::{check_finite, dyadic_crop, log_returns, read_array, standardize, to_samples};
use crate::error::{CliError, CliResult};
use crate::fieldfile::FieldFile;

/// One trace row per step: `k,t,eta_inf,theta_inf,moment_residual,entropy_partial_sum`.
pub fn trace_csv(trace: &SolverTrace) -> String {
    let inf = |v: &[f64]| v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let mut s = String::from("k,t,eta_inf,theta_inf,moment_residual,entropy_partial_sum\n");
    for st in &trace.steps {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            st.k,
            st.t,
            inf(&st.eta),
            inf(&st.theta),
            st.moment_residual,
            st.entropy_partial_sum
        );
    }
    s
}

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(format!("cannot create {}: {e}", dir.display())))
}

fn write_json(path: &Path, v: &Value) -> CliResult<()> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

/// Data, moment map and layout resolved from a configuration.
struct Prepared {
    data: ParticleEnsemble,
    layout: Layout,
    phi: Arc<dyn MomentFunction>,
}

fn prepare(cfg: &ExperimentConfig) -> CliResult<Prepared> {
    let path = cfg.data.as_ref().ok_or_else(|| CliError::config("no data file given"))?;
    let array = read_array(path, cfg.data_format)?;
    let (data, layout) = to_samples(&array, &cfg.family)?;
    let phi = cfg.family.build(&layout)?;
    Ok(Prepared { data, layout, phi })
}

fn run_at(cfg: &ExperimentConfig, p: &Prepared, sigma2: f64) -> CliResult<(ParticleEnsemble, SolverTrace)> {
    let solver = cfg.solver(sigma2);
    solver.validate()?;
    let rng = solver.rng();
    let path = estimate_moment_path(
        &p.data,
        p.phi.as_ref(),
        solver.n_steps() + 1,
        cfg.n_mc.unwrap_or(cfg.n_rep),
        &InterpolantSchedule::Linear,
        &rng,
    )?;
    let init = ParticleEnsemble::standard_normal(cfg.n_rep, p.layout.dim(), &rng)?;
    Ok(mgd_run(&solver, p.phi.as_ref(), &path, init)?)
}

fn sample_dims(n: usize, layout: &Layout) -> Vec<usize> {
    let mut dims = vec![n];
    if layout.dim() > 1 {
        dims.extend(&layout.sample_dims);
    }
    dims
}

/// Entropy of the Gaussian sharing the data covariance: Welch spectra for
/// fields, the sample covariance otherwise.
fn gaussian_reference(p: &Prepared, is_field: bool) -> CliResult<f64> {
    if is_field {
        return Ok(gaussian_entropy_rate(p.data.as_slice(), &p.layout.sample_dims, WelchParams::default())?.entropy);
    }
    let d = p.data.dim();
    if p.data.n_rep() <= d {
        return Err(CliError::data("too few data samples for a covariance estimate"));
    }
    Ok(gaussian_entropy_of(&DMatrix::from_row_slice(d, d, &p.data.covariance()))?)
}

/// `mgd sample`: one run at one σ².
pub fn sample(cfg: &ExperimentConfig) -> CliResult<Value> {
    cfg.validate()?;
    let &[sigma2] = &cfg.sigma2[..] else {
        return Err(CliError::config("sample takes a single sigma2 value; use sweep for a list"));
    };
    let p = prepare(cfg)?;
    let clock = Instant::now();
    let (out, trace) = run_at(cfg, &p, sigma2)?;
    let wall = clock.elapsed().as_secs_f64();

    create_dir(&cfg.output)?;
    FieldFile::new(sample_dims(out.n_rep(), &p.layout), out.as_slice().to_vec())?
        .write(&cfg.output.join("samples.f64"))?;
    fs::write(cfg.output.join("trace.csv"), trace_csv(&trace))?;
    fs::write(cfg.output.join("config.json"), cfg.to_json() + "\n")?;
    let hist = if p.layout.dim() == 1 && out.n_rep() >= cfg.bins {
        Some(histogram_entropy(out.as_slice(), cfg.bins)?)
    } else {
        None
    };
    let summary = json!({
        "command": "sample",
        "seed": cfg.seed,
        "config_hash": cfg.hash(),
        "family": cfg.family.to_string(),
        "sigma2": sigma2,
        "n_steps": cfg.solver(sigma2).n_steps(),
        "n_rep": cfg.n_rep,
        "dim": p.layout.dim(),
        "moment_residual_max": trace.max_moment_residual(),
        "moment_residual_final": trace.final_moment_residual(),
        "H_star": trace.h_star(),
        "bound_valid": trace.bound_valid,
        "corrector_flips": trace.corrector_flips(),
        "histogram_entropy": hist,
        "wall_time": wall,
    });
    write_json(&cfg.output.join("summary.json"), &summary)?;
    Ok(summary)
}

/// `mgd sweep`: one run per σ², with entropy gaps and their rate fits when a
/// reference law is given.
pub fn sweep(cfg: &ExperimentConfig) -> CliResult<Value> {
    cfg.validate()?;
    let p = prepare(cfg)?;
    let is_field = cfg.family.field_axes().is_some();
    let h_gauss = gaussian_reference(&p, is_field)?;
    let target = match &cfg.target {
        Some(t) if p.layout.dim() == 1 => Some(t.build()?),
        Some(_) => return Err(CliError::config("a reference law is only supported for scalar data")),
        None => None,
    };
    let clock = Instant::now();
    create_dir(&cfg.output)?;
    let mut table = String::from(
        "sigma2,n_steps,h_star,histogram_entropy,kl,negentropy,moment_residual_max,wall_time\n",
    );
    let mut rows = Vec::new();
    let (mut kl_gaps, mut bound_gaps) = (Vec::new(), Vec::new());
    let mut h_target = None;
    for &sigma2 in &cfg.sigma2 {
        let t0 = Instant::now();
        let (out, trace) = run_at(cfg, &p, sigma2)?;
        let wall = t0.elapsed().as_secs_f64();
        let x = out.as_slice();
        let hist = if p.layout.dim() == 1 && x.len() >= cfg.bins {
            Some(histogram_entropy(x, cfg.bins)?)
        } else {
            None
        };
        let kl = match &target {
            Some(t) => {
                let lo = x.iter().fold(f64::INFINITY, |m, &v| m.min(v)) - 0.5;
                let hi = x.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v)) + 0.5;
                let dens = t.density_1d(lo, hi, 10_001)?;
                h_target = Some(dens.entropy());
                let h = Histogram1D::equal_width(x, cfg.bins, lo, hi)?;
                Some(kl_histogram_corrected(&h, &dens.bin_masses(h.edges())))
            }
            None => None,
        };
        let neg = negentropy_estimate(h_gauss, trace.h_star(), p.layout.dim())?;
        if let Some(k) = kl {
            kl_gaps.push((sigma2, k));
        }
        if let Some(h) = h_target {
            bound_gaps.push((sigma2, h - trace.h_star()));
        }
        let opt = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
        let _ = writeln!(
            table,
            "{},{},{},{},{},{},{},{}",
            sigma2,
            cfg.solver(sigma2).n_steps(),
            trace.h_star(),
            opt(hist),
            opt(kl),
            neg,
            trace.max_moment_residual(),
            wall
        );
        rows.push(json!({
            "sigma2": sigma2,
            "H_star": trace.h_star(),
            "histogram_entropy": hist,
            "kl": kl,
            "negentropy": neg,
            "moment_residual_max": trace.max_moment_residual(),
        }));
    }
    let slope = |pts: &[(f64, f64)]| -> Option<f64> {
        let pos: Vec<(f64, f64)> = pts.iter().copied().filter(|&(s, g)| s > 0.0 && g > 0.0).collect();
        loglog_rate_fit(&pos).ok().map(|f| f.slope)
    };
    fs::write(cfg.output.join("sweep.csv"), &table)?;
    fs::write(cfg.output.join("config.json"), cfg.to_json() + "\n")?;
    let residual_max = rows
        .iter()
        .filter_map(|r| r["moment_residual_max"].as_f64())
        .fold(0.0_f64, f64::max);
    let summary = json!({
        "command": "sweep",
        "seed": cfg.seed,
        "config_hash": cfg.hash(),
        "family": cfg.family.to_string(),
        "gaussian_entropy": h_gauss,
        "target_entropy": h_target,
        "kl_slope": slope(&kl_gaps),
        "bound_gap_slope": slope(&bound_gaps),
        "runs": rows,
        "moment_residual_max": residual_max,
        "H_star": rows.last().and_then(|r| r["H_star"].as_f64()),
        "wall_time": clock.elapsed().as_secs_f64(),
    });
    write_json(&cfg.output.join("summary.json"), &summary)?;
    Ok(summary)
}

/// `mgd benchmark`: MALA and MGD step counts to a fixed KL per β.
pub fn benchmark(cfg: &BarrierConfig, output: &Path) -> CliResult<String> {
    if cfg.betas.is_empty() {
        return Err(CliError::config("the beta list is empty"));
    }
    let clock = Instant::now();
    let rows = barrier_cost_experiment(cfg)?;
    let csv = barrier_table_csv(&rows);
    create_dir(output)?;
    fs::write(output.join("barrier.csv"), &csv)?;
    log::info!("benchmark finished in {:.1}s", clock.elapsed().as_secs_f64());
    Ok(csv)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum IngestKind {
    Series,
    Field,
}

#[derive(Debug, Clone)]
pub struct IngestOptions {
    pub input: PathBuf,
    pub format: Option<crate::config::DataFormat>,
    pub kind: IngestKind,
    pub log_returns: bool,
    pub standardize: bool,
    /// Crop to the largest dyadic size.
    pub scattering: bool,
    pub output: PathBuf,
}

/// `mgd ingest`: cleans a series or field and writes it as a field file with
/// a `.stats.json` next to it.
pub fn ingest(o: &IngestOptions) -> CliResult<Value> {
    let array = read_array(&o.input, o.format)?;
    check_finite(&array.values)?;
    let dims_in = array.dims().to_vec();
    let (mut values, mut dims) = match o.kind {
        IngestKind::Series => (array.values, vec![dims_in.iter().product::<usize>()]),
        IngestKind::Field => {
            if dims_in.len() != 2 {
                return Err(CliError::data(format!("a field needs two axes, got dims {dims_in:?}")));
            }
            (array.values, dims_in.clone())
        }
    };
    if o.log_returns {
        if o.kind != IngestKind::Series {
            return Err(CliError::config("log-returns apply to series only"));
        }
        values = log_returns(&values)?;
        dims = vec![values.len()];
    }
    let mut cropped = false;
    if o.scattering {
        let (v, d) = dyadic_crop(&values, &dims)?;
        if d != dims {
            log::warn!("cropped {:?} to dyadic size {:?} for scattering", dims, d);
            cropped = true;
        }
        values = v;
        dims = d;
    }
    let (mean, sd) = if o.standardize {
        let (m, s) = standardize(&mut values)?;
        (Some(m), Some(s))
    } else {
        (None, None)
    };
    if let Some(parent) = o.output.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    FieldFile::new(dims.clone(), values)?.write(&o.output)?;
    let stats = json!({
        "command": "ingest",
        "input": o.input.display().to_string(),
        "dims_in": dims_in,
        "dims_out": dims,
        "log_returns": o.log_returns,
        "cropped": cropped,
        "mean": mean,
        "std": sd,
    });
    let mut sp = o.output.as_os_str().to_owned();
    sp.push(".stats.json");
    write_json(Path::new(&sp), &stats)?;
    Ok(stats)
}

/// Column name of one scattering moment.
pub fn moment_name(m: &ScatteringMoment) -> String {
    let part = |im: bool| if im { "im" } else { "re" };
    match *m {
        ScatteringMoment::MeanModulus { channel } => format!("mean_modulus_{channel}"),
        ScatteringMoment::Power { channel } => format!("power_{channel}"),
        ScatteringMoment::EnvelopePhase { fine, coarse, imaginary } => {
            format!("envelope_phase_{fine}_{coarse}_{}", part(imaginary))
        }
        ScatteringMoment::EnvelopeCross {
            fine_a,
            coarse,
            fine_b,
            imaginary,
        } => format!("envelope_cross_{fine_a}_{coarse}_{fine_b}_{}", part(imaginary)),
    }
}

/// `mgd scatter`: scattering moments of every series or field in a file, as
/// CSV with one row per sample.
pub fn scatter(
    input: &Path,
    format: Option<crate::config::DataFormat>,
    j: usize,
    l: usize,
) -> CliResult<String> {
    let family = crate::config::Family::Scattering { j, l };
    let array = read_array(input, format)?;
    let (data, layout) = to_samples(&array, &family)?;
    let n = layout.sample_dims[0];
    if !n.is_power_of_two() {
        return Err(CliError::data(format!(
            "scattering needs dyadic sizes, got {n}; crop with `mgd ingest --scattering`"
        )));
    }
    let map = ScatteringMap::new(FilterBank::new(n, layout.sample_dims.len(), j, l)?);
    let names: Vec<String> = map.index().entries().iter().map(moment_name).collect();
    let mut csv = names.join(",");
    csv.push('\n');
    let mut phi = vec![0.0; map.n_moments()];
    for i in 0..data.n_rep() {
        map.eval(data.row(i), &mut phi)?;
        let row: Vec<String> = phi.iter().map(|v| v.to_string()).collect();
        csv.push_str(&row.join(","));
        csv.push('\n');
    }
    Ok(csv)
}

/// `mgd entropy`: histogram entropy of all values in a file.
pub fn entropy(input: &Path, format: Option<crate::config::DataFormat>, bins: usize) -> CliResult<Value> {
    let array = read_array(input, format)?;
    check_finite(&array.values)?;
    if bins == 0 {
        return Err(CliError::config("bins must be positive"));
    }
    let h = histogram_entropy(&array.values, bins)?;
    Ok(json!({
        "command": "entropy",
        "n": array.values.len(),
        "bins": bins,
        "entropy": h,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use mgd::solver::StepRecord;

    #[test]
    fn trace_rows_follow_the_steps() {
        let mut t = SolverTrace::default();
        t.steps.push(StepRecord {
            k: 0,
            t: 0.5,
            eta: vec![1.0, -3.0],
            theta: vec![0.25],
            moment_residual: 1e-9,
            entropy_increment: 0.1,
            entropy_partial_sum: 0.1,
            corrector_flipped: false,
        });
        let csv = trace_csv(&t);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "k,t,eta_inf,theta_inf,moment_residual,entropy_partial_sum");
        assert_eq!(lines[1], "0,0.5,3,0.25,0.000000001,0.1");
    }

    #[test]
    fn scattering_columns_are_named_uniquely() {
        let map = ScatteringMap::new(FilterBank::new(32, 2, 2, 4).unwrap());
        let mut names: Vec<String> = map.index().entries().iter().map(moment_name).collect();
        let n = names.len();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), n);
    }
}

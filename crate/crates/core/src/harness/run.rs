//! Executing experiments: simulation, analysis and files on disk.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::config::{ConfigError, ExperimentConfig, ModelKind, ModelParams, RunDescriptor, SweepValue};
use super::csv::{fmt_float, write_trace_csv};
use crate::fc_minimal::{fit_shape, lattice_histogram, total_variation, EquilibriumDensity, FcModel, RateKind};
use crate::gcmg::GcmgModel;
use crate::lux_marchesi::LmModel;
use crate::model::{run_model_partial, Model, ModelError, RunError, Trace};
use crate::rng::RngStream;
use crate::series::PriceSeries;
use crate::stylized_facts::{Estimate, SfReport};
use crate::thurner::ThurnerModel;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Serial,
    #[default]
    Parallel,
}

/// Builds the model for one run. GCMG draws its strategy tables from `rng`.
pub fn build_model(desc: &RunDescriptor, rng: &mut RngStream) -> Result<Box<dyn Model + Send>, ModelError> {
    Ok(match &desc.params {
        ModelParams::FcMinimal(p) => Box::new(FcModel::new(p.clone(), desc.soc.clone())?),
        ModelParams::LuxMarchesi(p) => Box::new(LmModel::new(p.clone())?),
        ModelParams::Gcmg(p) => Box::new(GcmgModel::new(p.clone(), rng)?),
        ModelParams::Thurner(p) => Box::new(ThurnerModel::new(p.clone())?),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Abort {
    /// Tick at which the model failed; 0 when it could not be built.
    pub tick: u64,
    pub error: String,
}

/// The raw result of simulating one run.
#[derive(Debug, Clone)]
pub struct RunData {
    pub descriptor: RunDescriptor,
    pub trace: Trace,
    pub abort: Option<Abort>,
    pub diagnostics: BTreeMap<String, f64>,
}

/// Simulates one run on RNG stream `desc.index` of the config seed.
pub fn simulate(config: &ExperimentConfig, desc: &RunDescriptor) -> RunData {
    let mut rng = RngStream::new(config.seed, desc.index as u64);
    let mut model = match build_model(desc, &mut rng) {
        Ok(m) => m,
        Err(e) => {
            return RunData {
                descriptor: desc.clone(),
                trace: Trace::default(),
                abort: Some(Abort {
                    tick: 0,
                    error: e.to_string(),
                }),
                diagnostics: BTreeMap::new(),
            }
        }
    };
    let (trace, err) = run_model_partial(&mut model, config.steps, &mut rng);
    let abort = err.map(|e| match e {
        RunError::Aborted { tick, source, .. } => Abort {
            tick,
            error: source.to_string(),
        },
        other => Abort {
            tick: 0,
            error: other.to_string(),
        },
    });
    let diagnostics = model
        .diagnostics()
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
    RunData {
        descriptor: desc.clone(),
        trace,
        abort,
        diagnostics,
    }
}

/// Ticks on which the market has active traders, where the model defines it.
///
/// Leveraged funds only trade when the asset is below its fundamental value.
pub fn active_mask(kind: ModelKind, trace: &Trace) -> Option<Vec<bool>> {
    match kind {
        ModelKind::Thurner => trace.column("m").map(|m| m.iter().map(|&v| v > 0.0).collect()),
        _ => None,
    }
}

/// Stylized facts of a completed run, computed after the burn-in.
pub fn analyze(config: &ExperimentConfig, data: &RunData) -> Option<SfReport> {
    if data.abort.is_some() {
        return None;
    }
    let from = config.burn_in as usize;
    let prices = data.trace.prices.get(from..)?.to_vec();
    let t0 = data.trace.ticks.get(from).copied().unwrap_or(0) as i64;
    let series = PriceSeries::new(prices, t0).ok()?;
    let mask = active_mask(config.model, &data.trace).map(|m| m[from..].to_vec());
    Some(SfReport::analyze(&series, mask.as_deref(), &config.analysis))
}

/// Empirical chartist-fraction histogram against the analytic density with
/// a fitted shape.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct XDistribution {
    pub r: f64,
    pub tv_distance: f64,
    pub empirical: Vec<f64>,
    pub analytic: Vec<f64>,
}

pub const X_BINS: usize = 50;

/// Only defined for the fixed-size model with constant herding rates.
pub fn x_distribution(config: &ExperimentConfig, data: &RunData) -> Option<XDistribution> {
    let ModelParams::FcMinimal(p) = &data.descriptor.params else {
        return None;
    };
    if p.rates != RateKind::Simplified || data.descriptor.soc.is_some() || data.abort.is_some() {
        return None;
    }
    let n_c = data.trace.column("n_c")?;
    let mut counts = vec![0u64; p.n + 1];
    for &c in n_c.get(config.burn_in as usize..)? {
        counts[c as usize] += 1;
    }
    let r = fit_shape(&counts, p.delta, p.n as f64).ok()?;
    let density = EquilibriumDensity::new(r, p.delta, p.n as f64).ok()?;
    let empirical = lattice_histogram(&counts, X_BINS);
    let analytic = density.bin_masses(X_BINS);
    Some(XDistribution {
        r,
        tv_distance: total_variation(&empirical, &analytic),
        empirical,
        analytic,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Artifact {
    /// Relative to the output directory, with `/` separators.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

/// What one sweep point produced.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub descriptor: RunDescriptor,
    pub ticks: usize,
    pub abort: Option<Abort>,
    pub report: Option<SfReport>,
    pub x_distribution: Option<XDistribution>,
    pub diagnostics: BTreeMap<String, f64>,
    pub artifacts: Vec<Artifact>,
}

impl RunOutcome {
    pub fn completed(&self) -> bool {
        self.abort.is_none()
    }
}

struct HashingWriter<W> {
    inner: W,
    hasher: Sha256,
    bytes: u64,
}

impl<W: Write> Write for HashingWriter<W> {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        let n = self.inner.write(buf)?;
        self.hasher.update(&buf[..n]);
        self.bytes += n as u64;
        Ok(n)
    }

    fn flush(&mut self) -> io::Result<()> {
        self.inner.flush()
    }
}

fn write_artifact(
    root: &Path,
    rel: &str,
    body: impl FnOnce(&mut dyn Write) -> io::Result<()>,
) -> Result<Artifact, HarnessError> {
    let path = root.join(rel);
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let file = File::create(&path).map_err(io_err(&path))?;
    let mut w = HashingWriter {
        inner: BufWriter::new(file),
        hasher: Sha256::new(),
        bytes: 0,
    };
    body(&mut w).and_then(|_| w.flush()).map_err(io_err(&path))?;
    Ok(Artifact {
        path: rel.to_string(),
        sha256: hex::encode(w.hasher.finalize()),
        bytes: w.bytes,
    })
}

fn x_distribution_csv(x: &XDistribution) -> String {
    let mut s = String::from("bin_lo,bin_hi,empirical,analytic\n");
    let w = 1.0 / x.empirical.len() as f64;
    for (i, (e, a)) in x.empirical.iter().zip(&x.analytic).enumerate() {
        s.push_str(&format!(
            "{},{},{},{}\n",
            fmt_float(i as f64 * w),
            fmt_float((i + 1) as f64 * w),
            fmt_float(*e),
            fmt_float(*a)
        ));
    }
    s
}

fn run_point(config: &ExperimentConfig, desc: &RunDescriptor, out: Option<&Path>) -> Result<RunOutcome, HarnessError> {
    let data = simulate(config, desc);
    let report = analyze(config, &data);
    let x_distribution = x_distribution(config, &data);
    let mut artifacts = Vec::new();
    if let Some(root) = out {
        let dir = &desc.label;
        artifacts.push(write_artifact(root, &format!("{dir}/ticks.csv"), |w| {
            write_trace_csv(&data.trace, w)
        })?);
        if let Some(r) = &report {
            let json = serde_json::to_string_pretty(r).expect("report serializes");
            artifacts.push(write_artifact(root, &format!("{dir}/report.json"), |w| {
                w.write_all(json.as_bytes())?;
                w.write_all(b"\n")
            })?);
        }
        if let Some(x) = &x_distribution {
            let csv = x_distribution_csv(x);
            artifacts.push(write_artifact(root, &format!("{dir}/x_distribution.csv"), |w| {
                w.write_all(csv.as_bytes())
            })?);
        }
    }
    Ok(RunOutcome {
        descriptor: data.descriptor,
        ticks: data.trace.len(),
        abort: data.abort,
        report,
        x_distribution,
        diagnostics: data.diagnostics,
        artifacts,
    })
}

/// Runs every sweep point in memory, in sweep order.
pub fn sweep(config: &ExperimentConfig, exec: Execution) -> Result<Vec<RunOutcome>, HarnessError> {
    execute(config, exec, None)
}

fn execute(config: &ExperimentConfig, exec: Execution, out: Option<&Path>) -> Result<Vec<RunOutcome>, HarnessError> {
    let runs = config.runs()?;
    match exec {
        Execution::Serial => runs.iter().map(|d| run_point(config, d, out)).collect(),
        Execution::Parallel => runs.par_iter().map(|d| run_point(config, d, out)).collect(),
    }
}

fn estimate<T>(e: &Estimate<T>, f: impl Fn(&T) -> f64) -> f64 {
    e.value().map_or(f64::NAN, f)
}

/// One row per run: key statistics, diagnostics and the fitted x shape.
pub fn summary_csv(config: &ExperimentConfig, runs: &[RunOutcome]) -> String {
    let param = config.sweep.as_ref().map_or("value", |s| s.param.as_str());
    let mut header: Vec<String> = [
        "point",
        "label",
        param,
        "status",
        "abort_tick",
        "ticks",
        "n_returns",
        "excess_kurtosis",
        "vol_acf_lag1",
        "vol_acf_lag10",
        "vol_acf_exponent",
        "alpha_negative",
        "alpha_negative_stderr",
        "alpha_positive",
        "alpha_positive_stderr",
        "alpha_absolute",
    ]
    .map(String::from)
    .to_vec();
    let diag: Vec<&String> = {
        let mut d: Vec<&String> = runs.iter().flat_map(|r| r.diagnostics.keys()).collect();
        d.sort();
        d.dedup();
        d
    };
    header.extend(diag.iter().map(|d| d.to_string()));
    let with_x = runs.iter().any(|r| r.x_distribution.is_some());
    if with_x {
        header.extend(["shape_r".to_string(), "tv_distance".to_string()]);
    }
    let mut s = header.join(",");
    s.push('\n');
    for r in runs {
        let d = &r.descriptor;
        let mut row = vec![
            d.index.to_string(),
            d.label.clone(),
            d.value.map_or(String::new(), |v: SweepValue| v.to_string()),
            if r.completed() { "completed" } else { "aborted" }.to_string(),
            r.abort.as_ref().map_or(String::new(), |a| a.tick.to_string()),
            r.ticks.to_string(),
        ];
        let stats: [f64; 10] = match &r.report {
            Some(rep) => [
                rep.n_returns as f64,
                estimate(&rep.excess_kurtosis, |k| *k),
                estimate(&rep.acf_volatility, |a| a.at(1).unwrap_or(f64::NAN)),
                estimate(&rep.acf_volatility, |a| a.at(10).unwrap_or(f64::NAN)),
                estimate(&rep.vol_acf_fit, |f| f.exponent),
                estimate(&rep.tail_negative, |t| t.alpha),
                estimate(&rep.tail_negative, |t| t.stderr),
                estimate(&rep.tail_positive, |t| t.alpha),
                estimate(&rep.tail_positive, |t| t.stderr),
                estimate(&rep.tail_absolute, |t| t.alpha),
            ],
            None => [f64::NAN; 10],
        };
        row.push(if r.report.is_some() {
            (stats[0] as usize).to_string()
        } else {
            String::new()
        });
        row.extend(stats[1..].iter().map(|v| fmt_float(*v)));
        row.extend(diag.iter().map(|k| r.diagnostics.get(*k).map_or(String::new(), |v| fmt_float(*v))));
        if with_x {
            match &r.x_distribution {
                Some(x) => row.extend([fmt_float(x.r), fmt_float(x.tv_distance)]),
                None => row.extend([String::new(), String::new()]),
            }
        }
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

#[derive(Debug, Clone, Serialize)]
pub struct Software {
    pub name: &'static str,
    pub version: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct ManifestRun {
    pub index: usize,
    pub label: String,
    pub stream_id: u64,
    pub sweep_value: Option<SweepValue>,
    pub status: &'static str,
    pub ticks: usize,
    pub abort: Option<Abort>,
    pub diagnostics: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub software: Software,
    pub model: &'static str,
    pub config_sha256: String,
    pub seed: u64,
    pub config: ExperimentConfig,
    pub runs: Vec<ManifestRun>,
    /// Every file written except the manifest itself, sorted by path.
    pub artifacts: Vec<Artifact>,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub runs: Vec<RunOutcome>,
    pub manifest: Manifest,
    pub summary: String,
}

impl ExperimentOutcome {
    pub fn any_aborted(&self) -> bool {
        self.runs.iter().any(|r| !r.completed())
    }
}

pub const MANIFEST_FILE: &str = "manifest.json";
pub const SUMMARY_FILE: &str = "summary.csv";

/// Runs the experiment and writes everything under `config.output_dir`.
///
/// A run that aborts is recorded in the manifest with its tick; the other
/// sweep points still run.
pub fn run_experiment(config: &ExperimentConfig, exec: Execution) -> Result<ExperimentOutcome, HarnessError> {
    let root = config.output_dir.as_path();
    fs::create_dir_all(root).map_err(io_err(root))?;
    let runs = execute(config, exec, Some(root))?;
    let summary = summary_csv(config, &runs);
    let mut artifacts: Vec<Artifact> = runs.iter().flat_map(|r| r.artifacts.iter().cloned()).collect();
    artifacts.push(write_artifact(root, SUMMARY_FILE, |w| w.write_all(summary.as_bytes()))?);
    artifacts.sort_by(|a, b| a.path.cmp(&b.path));
    let manifest = Manifest {
        software: Software {
            name: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
        },
        model: config.model.name(),
        config_sha256: config.hash(),
        seed: config.seed,
        config: config.clone(),
        runs: runs
            .iter()
            .map(|r| ManifestRun {
                index: r.descriptor.index,
                label: r.descriptor.label.clone(),
                stream_id: r.descriptor.index as u64,
                sweep_value: r.descriptor.value,
                status: if r.completed() { "completed" } else { "aborted" },
                ticks: r.ticks,
                abort: r.abort.clone(),
                diagnostics: r.diagnostics.clone(),
            })
            .collect(),
        artifacts,
    };
    let path = root.join(MANIFEST_FILE);
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, json + "\n").map_err(io_err(&path))?;
    Ok(ExperimentOutcome {
        runs,
        manifest,
        summary,
    })
}

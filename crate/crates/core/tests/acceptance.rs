//! End-to-end acceptance checks on the shipped presets.
//!
//! Prints one PASS/FAIL line per criterion and exits non-zero if any fails.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, Read};
use std::path::Path;
use std::process::ExitCode;
use std::sync::OnceLock;
use std::time::Instant;

use marketabm::harness::presets;
use marketabm::harness::run::{run_experiment, simulate, sweep, x_distribution, Execution, RunOutcome};
use marketabm::harness::{ExperimentConfig, ModelParams};
use marketabm::stylized_facts::{excess_kurtosis, hill_estimator, power_law_fit, TailSide};
use marketabm::RngStream;
use rand_distr::{Distribution, Pareto, StandardNormal};

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn preset(name: &str) -> ExperimentConfig {
    presets::find(name)
        .unwrap_or_else(|| panic!("no preset {name}"))
        .config()
        .expect("preset loads")
}

fn verdict(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn kurtosis(r: &RunOutcome) -> f64 {
    r.report
        .as_ref()
        .and_then(|rep| rep.excess_kurtosis.value().copied())
        .unwrap_or(f64::NAN)
}

fn vol_acf(r: &RunOutcome, lag: usize) -> f64 {
    r.report
        .as_ref()
        .and_then(|rep| rep.acf_volatility.value())
        .and_then(|a| a.at(lag))
        .unwrap_or(f64::NAN)
}

fn completed(runs: &[RunOutcome]) -> Result<(), String> {
    match runs.iter().find(|r| !r.completed()) {
        Some(r) => Err(format!("{} aborted: {:?}", r.descriptor.label, r.abort)),
        None => Ok(()),
    }
}

fn x_density() -> Check {
    let start = Instant::now();
    let config = preset("fig1");
    let desc = &config.runs().unwrap()[0];
    let data = simulate(&config, desc);
    let x = x_distribution(&config, &data).ok_or("no x distribution")?;
    let secs = start.elapsed().as_secs_f64();
    verdict(
        x.tv_distance < 0.05 && secs < 60.0,
        format!("TV = {:.4} (< 0.05), fitted r = {:.3}, {secs:.1} s (< 60 s)", x.tv_distance, x.r),
    )
}

fn intermittency() -> Check {
    let mut config = preset("fig2");
    let mut passes = 0;
    let mut rows = Vec::new();
    for seed in 1..=5 {
        config.seed = seed;
        let runs = sweep(&config, Execution::Parallel).map_err(|e| e.to_string())?;
        completed(&runs)?;
        let k: Vec<f64> = runs.iter().map(kurtosis).collect();
        let a: Vec<f64> = runs.iter().map(|r| vol_acf(r, 10)).collect();
        let ok = k[1] - k[0].max(k[2]) >= 1.0 && a[1] > 0.05 && a[0] <= 0.05 && a[2] <= 0.05;
        passes += ok as usize;
        rows.push(format!(
            "seed {seed}: kurt {:.2}/{:.2}/{:.2} acf10 {:.3}/{:.3}/{:.3}{}",
            k[0],
            k[1],
            k[2],
            a[0],
            a[1],
            a[2],
            if ok { " ok" } else { "" }
        ));
    }
    verdict(passes >= 3, format!("{passes}/5 seeds [{}]", rows.join("; ")))
}

fn self_organization() -> Check {
    let config = preset("fig5");
    let mut halves = Vec::new();
    for desc in config.runs().unwrap() {
        let data = simulate(&config, &desc);
        if let Some(a) = &data.abort {
            return Err(format!("{} aborted at {}: {}", desc.label, a.tick, a.error));
        }
        let n = data.trace.column("N").ok_or("no N column")?;
        halves.push(n[n.len() / 2..].to_vec());
    }
    let means: Vec<f64> = halves.iter().map(|h| h.iter().sum::<f64>() / h.len() as f64).collect();
    let star = means.iter().sum::<f64>() / means.len() as f64;
    let (lo, hi) = (star / 2.0, star * 2.0);
    let inside: Vec<f64> = halves
        .iter()
        .map(|h| h.iter().filter(|&&v| v >= lo && v <= hi).count() as f64 / h.len() as f64)
        .collect();
    let gap = (means[0] - means[1]).abs() / star;
    verdict(
        inside.iter().all(|&f| f > 0.8) && gap < 0.2,
        format!(
            "N* = {star:.0}, band [{lo:.0}, {hi:.0}]: time inside {:.3} / {:.3} (> 0.8), means {:.0} / {:.0} differ by {:.3} (< 0.2)",
            inside[0], inside[1], means[0], means[1], gap
        ),
    )
}

fn fundamentalist_share(name: &str) -> Result<f64, String> {
    let config = preset(name);
    let desc = &config.runs().unwrap()[0];
    let ModelParams::LuxMarchesi(p) = &desc.params else {
        return Err(format!("{name} is not a Lux-Marchesi preset"));
    };
    let data = simulate(&config, desc);
    if let Some(a) = &data.abort {
        return Err(format!("{name} aborted at {}: {}", a.tick, a.error));
    }
    let n_f = &data.trace.column("n_f").ok_or("no n_f column")?[config.burn_in as usize..];
    Ok(n_f.iter().filter(|&&v| v / p.n as f64 > 0.9).count() as f64 / n_f.len() as f64)
}

fn lock_in() -> Check {
    let large = fundamentalist_share("lm-largeN")?;
    let base = fundamentalist_share("lm-baseline")?;
    verdict(
        large > 0.95 && base < 0.8,
        format!("ticks with n_f/N > 0.9: N=10000 {large:.3} (> 0.95), N=500 {base:.3} (< 0.8)"),
    )
}

fn gcmg_baseline() -> Check {
    let prod = sweep(&preset("gcmg-producers-only"), Execution::Serial).map_err(|e| e.to_string())?;
    let spec = sweep(&preset("gcmg-speculators"), Execution::Serial).map_err(|e| e.to_string())?;
    completed(&prod)?;
    completed(&spec)?;
    let band = prod[0]
        .report
        .as_ref()
        .and_then(|r| r.acf_returns.value())
        .map_or(f64::NAN, |a| a.fraction_within_iid_band());
    let (kp, ks) = (kurtosis(&prod[0]), kurtosis(&spec[0]));
    verdict(
        band >= 0.95 && kp.abs() < 0.2 && ks > 1.0,
        format!("producers only: ACF lags in band {band:.2} (>= 0.95), kurtosis {kp:.3} (|.| < 0.2); speculators: kurtosis {ks:.2} (> 1)"),
    )
}

fn leverage_scan() -> &'static Result<Vec<RunOutcome>, String> {
    static RUNS: OnceLock<Result<Vec<RunOutcome>, String>> = OnceLock::new();
    RUNS.get_or_init(|| {
        let runs = sweep(&preset("thurner-leverage-scan"), Execution::Parallel).map_err(|e| e.to_string())?;
        completed(&runs)?;
        Ok(runs)
    })
}

fn tails_fatten() -> Check {
    let runs = leverage_scan().as_ref().map_err(Clone::clone)?;
    let tail = |r: &RunOutcome, side: TailSide| {
        let rep = r.report.as_ref()?;
        let t = match side {
            TailSide::Negative => &rep.tail_negative,
            _ => &rep.tail_positive,
        };
        t.value().map(|t| (t.alpha, t.stderr))
    };
    let mut neg = Vec::new();
    for r in runs {
        neg.push(tail(r, TailSide::Negative).ok_or_else(|| format!("{}: no tail fit", r.descriptor.label))?);
    }
    let active: Vec<usize> = runs.iter().map(|r| r.report.as_ref().map_or(0, |rep| rep.n_returns)).collect();
    let mut inversions = 0;
    let mut monotone = true;
    for w in neg.windows(2) {
        let ((a0, s0), (a1, s1)) = (w[0], w[1]);
        if a1 > a0 {
            inversions += 1;
            monotone &= a1 - a0 <= s0.max(s1);
        }
    }
    monotone &= inversions <= 1;
    let (k1, k10) = (kurtosis(&runs[0]), kurtosis(&runs[3]));
    let pos10 = tail(&runs[3], TailSide::Positive).ok_or("no positive tail fit")?.0;
    let neg10 = neg[3].0;
    let enough = active.iter().all(|&n| n >= 100_000);
    let alphas: Vec<String> = neg.iter().map(|(a, s)| format!("{a:.2}±{s:.2}")).collect();
    verdict(
        enough && monotone && k1 < 0.5 && k10 > 1.0 && neg10 < pos10,
        format!(
            "active returns {active:?} (>= 1e5); alpha- {} ({inversions} inversion(s)); kurtosis {k1:.3} (< 0.5) -> {k10:.2} (> 1); at 10: alpha- {neg10:.2} < alpha+ {pos10:.2}",
            alphas.join(", ")
        ),
    )
}

fn clearing() -> Check {
    let runs = leverage_scan().as_ref().map_err(Clone::clone)?;
    let mut ok = true;
    let mut rows = Vec::new();
    for r in runs {
        let ModelParams::Thurner(p) = &r.descriptor.params else {
            return Err("not a Thurner run".into());
        };
        let res = r.diagnostics["peak_residual"];
        let lev = r.diagnostics["peak_leverage"];
        ok &= res < 1e-10 * p.n_shares && lev <= p.lambda_max + 1e-9;
        rows.push(format!("cap {}: residual {res:.1e}, leverage {lev:.9}", p.lambda_max));
    }
    verdict(ok, rows.join("; "))
}

fn estimators() -> Check {
    let mut rng = RngStream::new(8, 0);
    let pareto = Pareto::new(1.0, 3.0).unwrap();
    let x: Vec<f64> = (0..100_000).map(|_| pareto.sample(&mut rng)).collect();
    let hill = hill_estimator(&x, 0.01, TailSide::Positive).map_err(|e| e.to_string())?.alpha;
    let z: Vec<f64> = (0..1_000_000).map(|_| StandardNormal.sample(&mut rng)).collect();
    let kurt = excess_kurtosis(&z).map_err(|e| e.to_string())?;
    let lags: Vec<usize> = (1..=100).collect();
    let acf: Vec<f64> = lags.iter().map(|&t| (t as f64).powf(-0.2)).collect();
    let slope = power_law_fit(&lags, &acf).map_err(|e| e.to_string())?.exponent;
    verdict(
        (2.7..=3.3).contains(&hill) && kurt.abs() <= 0.05 && (slope - 0.2).abs() <= 1e-6,
        format!("Hill on Pareto(3) {hill:.3} in [2.7, 3.3]; normal kurtosis {kurt:.4} in [-0.05, 0.05]; power-law exponent {slope:.9} = 0.2 ± 1e-6"),
    )
}

fn same_bytes(a: &Path, b: &Path) -> std::io::Result<bool> {
    let (mut fa, mut fb) = (BufReader::new(File::open(a)?), BufReader::new(File::open(b)?));
    let (mut ba, mut bb) = (vec![0u8; 1 << 16], vec![0u8; 1 << 16]);
    loop {
        let n = fa.read(&mut ba)?;
        if n == 0 {
            return Ok(fb.read(&mut bb)? == 0);
        }
        if fb.read_exact(&mut bb[..n]).is_err() || ba[..n] != bb[..n] {
            return Ok(false);
        }
    }
}

fn files_under(root: &Path, dir: &Path, out: &mut Vec<String>) {
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            files_under(root, &path, out);
        } else {
            let rel = path.strip_prefix(root).unwrap().to_string_lossy().replace('\\', "/");
            out.push(rel);
        }
    }
}

fn determinism() -> Check {
    let mut rows = Vec::new();
    let mut ok = true;
    for p in presets::PRESETS {
        let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
        let mut outcomes = BTreeMap::new();
        for (tag, exec) in [("parallel", Execution::Parallel), ("serial", Execution::Serial)] {
            let mut config = p.config().map_err(|e| e.to_string())?;
            config.output_dir = tmp.path().join(tag);
            let out = run_experiment(&config, exec).map_err(|e| format!("{}: {e}", p.name))?;
            outcomes.insert(tag, (config.output_dir, out));
        }
        let (dir_a, a) = &outcomes["parallel"];
        let (dir_b, b) = &outcomes["serial"];
        let mut csvs = 0;
        let mut identical = a.summary == b.summary;
        for art in a.manifest.artifacts.iter().filter(|f| f.path.ends_with(".csv")) {
            csvs += 1;
            identical &= same_bytes(&dir_a.join(&art.path), &dir_b.join(&art.path)).unwrap_or(false);
        }
        let hashes = |o: &marketabm::harness::ExperimentOutcome| {
            o.manifest.artifacts.iter().map(|f| (f.path.clone(), f.sha256.clone())).collect::<Vec<_>>()
        };
        identical &= hashes(a) == hashes(b);
        let mut on_disk = Vec::new();
        files_under(dir_a, dir_a, &mut on_disk);
        on_disk.retain(|f| f != "manifest.json");
        on_disk.sort();
        let listed: Vec<String> = a.manifest.artifacts.iter().map(|f| f.path.clone()).collect();
        let complete = on_disk == listed;
        ok &= identical && complete;
        rows.push(format!(
            "{} {}{}",
            p.name,
            if identical { format!("{csvs} csv identical") } else { "DIFFERS".into() },
            if complete { "" } else { ", manifest incomplete" }
        ));
    }
    verdict(ok, rows.join("; "))
}

fn main() -> ExitCode {
    let checks: [Criterion; 9] = [
        ("constant-rate x density matches the analytic form", x_density),
        ("intermittency only at the intermediate N", intermittency),
        ("market size self-organizes from both starts", self_organization),
        ("Lux-Marchesi large-N fundamentalist lock-in", lock_in),
        ("GCMG random walk without speculators, fat tails with", gcmg_baseline),
        ("leverage fattens and skews the negative tail", tails_fatten),
        ("market clearing residual and leverage cap", clearing),
        ("estimator oracles", estimators),
        ("presets are deterministic, parallel equals serial", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let start = Instant::now();
        let (tag, detail) = match check() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("{tag} {}. {name} ({:.0} s): {detail}", i + 1, start.elapsed().as_secs_f64());
    }
    println!("acceptance: {} passed, {failed} failed", checks.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

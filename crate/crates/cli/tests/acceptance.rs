//! Acceptance criteria, one line each. Runs as a plain binary so the verdicts
//! are always printed; exits non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use nalgebra::DMatrix;

use netrecon::consensus::{consensus_disagreement, disagreement_decay_rate, simulate_consensus, InitialState, SimConfig};
use netrecon::experiment::{perturbation_errors, prepare_trial, run_experiment, ExperimentConfig, LambdaSource};
use netrecon::graph::{self, Graph, Topology};
use netrecon::linalg::pseudoinverse;
use netrecon::noise::{band_power_fraction, gen_hf_noise, psd, recover_low_pass, FrequencyBand, NoiseConfig};
use netrecon::probe::{estimate_lambda_max, probe_spectrum, ProbeParams};
use netrecon::reconstruct::{estimate_laplacian, oracle_correlation, reconstruct_by_eigenvalue, ThresholdSweep};
use netrecon::{laplacian, Exec};

type Check = fn() -> Verdict;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn sw(n: usize, seed: u64) -> Graph {
    graph::small_world(n, 4, 0.1, seed).unwrap()
}

fn benchmark_graphs() -> Vec<(String, Graph)> {
    let mut out = vec![
        ("K3".to_string(), Graph::complete(3)),
        ("K5".to_string(), Graph::complete(5)),
        ("P5".to_string(), Graph::path(5)),
        ("star(3)".to_string(), Graph::star(3)),
        ("grid(4x6)".to_string(), graph::grid(4, 6).unwrap()),
    ];
    for seed in 0..3 {
        out.push((format!("SW(24) seed {seed}"), sw(24, seed)));
    }
    out.push(("pipeline(24)".to_string(), graph::pipeline(24, 2, Some(43)).unwrap()));
    let (er, s) = graph::erdos_renyi_connected(24, 0.15, 0).unwrap();
    out.push((format!("ER(24, 0.15) seed {s}"), er));
    out
}

fn oracle_round_trip() -> Verdict {
    let mut bad = Vec::new();
    let graphs = benchmark_graphs();
    for (name, g) in &graphs {
        let c = oracle_correlation(g, 0.01).unwrap();
        let l = estimate_laplacian(&c, 0.01, None).unwrap();
        let lambda = graph::lambda_max(g).unwrap();
        match reconstruct_by_eigenvalue(&l, lambda, &ThresholdSweep::default(), Some(g), Exec::Parallel) {
            Ok((r, _)) if r.errors_vs_truth == Some(0) && r.g_value == 0.0 => {}
            Ok((r, _)) => bad.push(format!("{name}: errors {:?} g {}", r.errors_vs_truth, r.g_value)),
            Err(e) => bad.push(format!("{name}: {e}")),
        }
    }
    verdict(
        bad.is_empty(),
        if bad.is_empty() {
            format!("{} graphs, 0 mistaken entries, g = 0", graphs.len())
        } else {
            bad.join("; ")
        },
    )
}

fn campaign(topology: Topology, samples: usize, source: LambdaSource) -> ExperimentConfig {
    ExperimentConfig {
        trials: 10,
        topology,
        sim: SimConfig::default().with_samples(samples),
        lambda_source: source,
        ..ExperimentConfig::default()
    }
}

fn campaigns(setups: &[(Topology, usize)], need: usize) -> Verdict {
    let mut parts = Vec::new();
    let mut pass = true;
    for (t, samples) in setups {
        let cfg = campaign(t.clone(), *samples, LambdaSource::Oracle);
        let r = run_experiment(&cfg, Exec::Parallel).unwrap();
        let entries = t.node_count() * (t.node_count() - 1) / 2;
        pass &= r.aggregate.exact >= need;
        parts.push(format!(
            "{} {}/{} exact of {entries} entries ({samples} samples)",
            t.label(),
            r.aggregate.exact,
            r.aggregate.trials
        ));
    }
    verdict(pass, parts.join("; "))
}

fn table_small() -> Verdict {
    campaigns(
        &[
            (Topology::SmallWorld { n: 24, k: 4, p: 0.1 }, 1500),
            (Topology::Grid { rows: 4, cols: 6 }, 1500),
            (Topology::Pipeline { n: 24, k: 2, target_edges: Some(43) }, 1500),
        ],
        9,
    )
}

fn table_large() -> Verdict {
    campaigns(
        &[
            (Topology::SmallWorld { n: 100, k: 4, p: 0.1 }, 3700),
            (Topology::Grid { rows: 10, cols: 10 }, 3700),
        ],
        8,
    )
}

const TOLERANCE_STEP: f64 = 1e-4;

/// Largest level on a `TOLERANCE_STEP` grid such that it and every smaller
/// level reconstruct exactly for both signs.
fn zero_error_tolerance(p: &netrecon::experiment::PreparedTrial, sweep: &ThresholdSweep) -> f64 {
    let mut ok = 0.0;
    for k in 1..=2000 {
        let level = k as f64 * TOLERANCE_STEP;
        if perturbation_errors(p, level, sweep, Exec::Parallel).unwrap() != [0, 0] {
            break;
        }
        ok = level;
    }
    ok
}

/// First seed of the campaign whose oracle reconstruction is exact.
fn first_exact(cfg: &ExperimentConfig) -> Option<netrecon::experiment::PreparedTrial> {
    (0..cfg.trials).find_map(|t| {
        let p = prepare_trial(cfg, t).ok()?;
        let e = perturbation_errors(&p, 0.0, &cfg.sweep, Exec::Parallel).ok()?;
        (e == [0, 0]).then_some(p)
    })
}

fn robustness() -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for (n, samples, level) in [(24usize, 1500usize, 0.0022), (100, 3700, 0.0322)] {
        let cfg = campaign(Topology::SmallWorld { n, k: 4, p: 0.1 }, samples, LambdaSource::Oracle);
        let Some(p) = first_exact(&cfg) else {
            pass = false;
            parts.push(format!("SW({n}): no exactly-reconstructing seed"));
            continue;
        };
        let at_level = perturbation_errors(&p, level, &cfg.sweep, Exec::Parallel).unwrap();
        let tol = zero_error_tolerance(&p, &cfg.sweep);
        let probe_level = 3.0 * tol.max(TOLERANCE_STEP);
        let beyond = perturbation_errors(&p, probe_level, &cfg.sweep, Exec::Parallel).unwrap();
        let held = at_level == [0, 0];
        let breaks = beyond[0].max(beyond[1]) >= 1;
        pass &= held && breaks;
        // how the other seeds fare at the same level, for context
        let survey: Vec<usize> = (0..cfg.trials)
            .filter_map(|t| prepare_trial(&cfg, t).ok())
            .map(|q| {
                let e = perturbation_errors(&q, level, &cfg.sweep, Exec::Parallel).unwrap();
                e[0].max(e[1])
            })
            .collect();
        parts.push(format!(
            "SW({n}) seed {}: ±{:.2}% -> errors {:?} (need [0, 0]); measured zero-error tolerance {:.2}%, errors at {:.2}%: {:?}; worst-sign errors over seeds at ±{:.2}%: {:?}",
            p.seed,
            100.0 * level,
            at_level,
            100.0 * tol,
            100.0 * probe_level,
            beyond,
            100.0 * level,
            survey
        ));
    }
    verdict(pass, parts.join("; "))
}

fn consensus() -> Verdict {
    let graphs = [
        ("SW(24)", sw(24, 0)),
        ("grid(4x6)", graph::grid(4, 6).unwrap()),
        ("pipeline(24)", graph::pipeline(24, 2, Some(43)).unwrap()),
        ("K5", Graph::complete(5)),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, g) in &graphs {
        let cfg = SimConfig {
            initial_state: InitialState::Uniform { seed: 11 },
            ..SimConfig::default()
        }
        .noise_free()
        .with_samples(6000);
        let ts = simulate_consensus(g, &cfg).unwrap();
        let x0 = ts.values().column(0);
        let mean0 = x0.mean();
        let last = ts.values().column(ts.sample_count() - 1);
        let dev = last.iter().map(|v| (v - mean0).abs()).fold(0.0, f64::max);

        let spread = consensus_disagreement(&ts);
        let s0 = spread.samples[0];
        let from = spread.samples.iter().position(|&s| s < 1e-3 * s0).unwrap_or(0);
        let to = spread.samples.iter().position(|&s| s < 1e-9 * s0).unwrap_or(spread.len());
        let fiedler = graph::spectrum(g).unwrap().fiedler();
        let slope = disagreement_decay_rate(&spread, from, to).unwrap();
        let rel = (slope + fiedler).abs() / fiedler;
        let ok = dev < 1e-6 && rel <= 0.2;
        pass &= ok;
        parts.push(format!("{name}: |x - mean| {dev:.1e}, slope {slope:.4} vs -λ2 {:.4} ({:.1}%)", -fiedler, 100.0 * rel));
    }
    verdict(pass, parts.join("; "))
}

fn probe() -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    let params = ProbeParams::default();
    let small = [
        ("K2", Graph::complete(2)),
        ("K3", Graph::complete(3)),
        ("star(3)", Graph::star(3)),
        ("grid(4x6)", graph::grid(4, 6).unwrap()),
    ];
    for (name, g) in &small {
        let est = probe_spectrum(g, &params).unwrap();
        let truth = graph::spectrum(g).unwrap().distinct(1e-9);
        let matched = truth
            .iter()
            .all(|t| est.values.iter().any(|e| (e - t).abs() <= est.resolution));
        let spurious = est
            .values
            .iter()
            .filter(|e| truth.iter().all(|t| (*e - t).abs() > est.resolution))
            .count();
        let worst = truth
            .iter()
            .map(|t| est.values.iter().map(|e| (e - t).abs()).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max);
        let ok = matched && spurious == 0;
        pass &= ok;
        parts.push(format!(
            "{name}: {}/{} lines, worst {worst:.4} vs bin {:.4}, {spurious} spurious",
            est.values.len(),
            truth.len(),
            est.resolution
        ));
    }

    let mut worst_rel = 0.0f64;
    for seed in 0..10 {
        let g = sw(24, seed);
        let lambda = graph::lambda_max(&g).unwrap();
        let est = estimate_lambda_max(&g, &ProbeParams { seed, ..params.clone() }).unwrap();
        worst_rel = worst_rel.max((est.value - lambda).abs() / lambda);
    }
    pass &= worst_rel <= 0.0022;
    parts.push(format!(
        "SW(24) λ_N worst relative error {:.4}% over 10 seeds at {} samples, dt {}",
        100.0 * worst_rel,
        params.samples,
        params.dt
    ));

    let cfg = campaign(Topology::SmallWorld { n: 24, k: 4, p: 0.1 }, 1500, LambdaSource::Probe);
    let r = run_experiment(&cfg, Exec::Parallel).unwrap();
    pass &= r.aggregate.exact >= 8;
    parts.push(format!("probe-fed SW(24) reconstruction {}/{} exact", r.aggregate.exact, r.aggregate.trials));
    verdict(pass, parts.join("; "))
}

fn penrose_residual(a: &DMatrix<f64>) -> f64 {
    let p = pseudoinverse(a, None).unwrap();
    let rel = |x: &DMatrix<f64>, y: &DMatrix<f64>| (x - y).norm() / y.norm().max(1.0);
    let ap = a * &p;
    let pa = &p * a;
    [
        rel(&(&ap * a), a),
        rel(&(&pa * &p), &p),
        rel(&ap.transpose(), &ap),
        rel(&pa.transpose(), &pa),
    ]
    .into_iter()
    .fold(0.0, f64::max)
}

fn random_symmetric(n: usize, seed: u64, zeros: usize) -> DMatrix<f64> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let q = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0)).qr().q();
    let d = nalgebra::DVector::from_fn(n, |k, _| {
        if k < zeros {
            0.0
        } else {
            rng.random_range(0.1..10.0) * if rng.random::<bool>() { 1.0 } else { -1.0 }
        }
    });
    let m = &q * DMatrix::from_diagonal(&d) * q.transpose();
    (&m + m.transpose()) * 0.5
}

fn penrose() -> Verdict {
    let mut graphs = benchmark_graphs();
    graphs.push(("grid(10x10)".into(), graph::grid(10, 10).unwrap()));
    graphs.push(("SW(100)".into(), sw(100, 0)));
    let worst_graph = graphs
        .iter()
        .map(|(_, g)| penrose_residual(&laplacian(g)))
        .fold(0.0, f64::max);
    let worst_random = (0..50u64)
        .map(|s| {
            let n = 2 + (s as usize * 37) % 99;
            let zeros = if s % 2 == 0 { n / 4 } else { 0 };
            penrose_residual(&random_symmetric(n, s, zeros))
        })
        .fold(0.0, f64::max);
    verdict(
        worst_graph <= 1e-9 && worst_random <= 1e-9,
        format!(
            "worst residual {worst_graph:.1e} on {} Laplacians, {worst_random:.1e} on 50 random symmetric",
            graphs.len()
        ),
    )
}

fn noise() -> Verdict {
    let sigma2 = 0.01;
    let cfg = NoiseConfig { sigma2, band: FrequencyBand::HIGH, seed: 3 };
    let s = gen_hf_noise(1500, &cfg, 0.1).unwrap();
    let var_err = (s.variance() / sigma2 - 1.0).abs();
    let p = psd(&s, 256).unwrap();
    let in_band = band_power_fraction(&p, FrequencyBand::HIGH.lo(), FrequencyBand::HIGH.hi());

    let g = sw(24, 0);
    let clean_cfg = SimConfig::default().noise_free().with_samples(1500);
    let clean = simulate_consensus(&g, &clean_cfg).unwrap().node_signal(0);
    let rec = recover_low_pass(&clean, &NoiseConfig { seed: 4, ..cfg }, 0.25).unwrap();
    let ratio = rec.rms_error / rec.noise_rms;
    verdict(
        var_err <= 0.1 && in_band >= 0.95 && ratio < 0.1,
        format!(
            "variance off by {:.2}%, {:.2}% of PSD mass in [{}, {}], recovery rms error {:.2}% of noise rms",
            100.0 * var_err,
            100.0 * in_band,
            FrequencyBand::HIGH.lo(),
            FrequencyBand::HIGH.hi(),
            100.0 * ratio
        ),
    )
}

fn run_cli(args: &[&str]) {
    let out = Command::new(env!("CARGO_BIN_EXE_netrecon")).args(args).output().unwrap();
    assert!(out.status.success(), "netrecon {args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn collect(dir: &Path, base: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            collect(&path, base, out);
        } else {
            let rel = path.strip_prefix(base).unwrap().display().to_string();
            out.insert(rel, std::fs::read(&path).unwrap());
        }
    }
}

fn cli_pass(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let p = |name: &str| dir.join(name).display().to_string();
    let config = p("campaign.toml");
    std::fs::write(
        &config,
        "trials = 2\nseed = 5\n[topology]\nkind = \"small_world\"\nn = 16\nk = 4\np = 0.1\n[sim]\nsteps = 80\n",
    )
    .unwrap();
    run_cli(&["generate", "--topology", "small-world", "--n", "24", "--k", "4", "--p", "0.1", "--seed", "3", "--out", &p("graph.txt")]);
    run_cli(&["simulate", "--graph", &p("graph.txt"), "--seed", "3", "--samples", "600", "--out", &p("series.csv")]);
    run_cli(&["reconstruct", "--series", &p("series.csv"), "--truth", &p("graph.txt"), "--out", &p("rec")]);
    run_cli(&["probe", "--graph", &p("graph.txt"), "--seed", "3", "--samples", "2048", "--out", &p("probe.json")]);
    run_cli(&["experiment", "--config", &config, "--out", &p("campaign")]);
    run_cli(&["sweep-lambda", "--config", &config, "--levels", "0,0.05", "--out", &p("sweep")]);
    run_cli(&["plot", "noise", "--seed", "2", "--out", &p("noise")]);
    let mut files = BTreeMap::new();
    collect(dir, dir, &mut files);
    files
}

fn determinism() -> Verdict {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let fa = cli_pass(a.path());
    let fb = cli_pass(b.path());
    let data: Vec<&String> = fa
        .keys()
        .filter(|k| k.ends_with(".csv") || k.ends_with(".json") || k.ends_with(".txt"))
        .collect();
    let differing: Vec<&String> = fa.keys().filter(|k| fa.get(*k) != fb.get(*k)).collect();
    verdict(
        fa.len() == fb.len() && differing.is_empty() && data.len() >= 10,
        format!("{} files ({} CSV/JSON/edge lists) identical across two runs; differing: {differing:?}", fa.len(), data.len()),
    )
}

fn main() {
    let criteria: [(&str, Check); 9] = [
        ("oracle round-trip", oracle_round_trip),
        ("N=24 reconstruction campaigns", table_small),
        ("N=100 reconstruction campaigns", table_large),
        ("eigenvalue perturbation robustness", robustness),
        ("consensus convergence and decay", consensus),
        ("spectral probe accuracy", probe),
        ("pseudoinverse Penrose conditions", penrose),
        ("noise synthesis and low-pass recovery", noise),
        ("CLI determinism", determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = Vec::new();
    for (k, (name, check)) in criteria.iter().enumerate() {
        let id = k + 1;
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str()) || *f == id.to_string()) {
            continue;
        }
        let start = Instant::now();
        let v = check();
        let tag = if v.pass { "PASS" } else { "FAIL" };
        println!("criterion {id} [{tag}] {name} ({:.1}s): {}", start.elapsed().as_secs_f64(), v.detail);
        if !v.pass {
            failed.push(id);
        }
    }
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}

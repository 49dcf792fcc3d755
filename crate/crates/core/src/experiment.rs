//! Seeded reconstruction campaigns and eigenvalue-perturbation sweeps.
//!
//! Trial `i` of a campaign with base seed `s` generates its graph with seed
//! `s + i`; the initial state, the driving noise and the probe use seeds
//! mixed from that value, so each trial is reproducible on its own.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::consensus::{simulate_consensus, InitialState, SimConfig};
use crate::error::{Error, Result};
use crate::graph::{self, write_edge_list, GeneratorParams, Graph, Topology};
use crate::par::{self, Exec};
use crate::probe::{estimate_lambda_max, ProbeParams};
use crate::reconstruct::{
    correlation_matrix, count_errors, estimate_laplacian, reconstruct_by_eigenvalue, write_trace_csv,
    LaplacianEstimate, ReconstructionResult, ThresholdSweep, TraceRecord,
};
use crate::series::TimeSeriesMatrix;

/// Where the target eigenvalue comes from.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LambdaSource {
    /// Exact λ_N of the ground-truth graph.
    #[default]
    Oracle,
    /// Oscillator protocol on the ground-truth graph, then FFT peak picking.
    Probe,
    /// Exact λ_N scaled by `1 + relative_error`.
    OraclePerturbed { relative_error: f64 },
}

/// Campaign definition, normally read from TOML.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub trials: usize,
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    pub topology: Topology,
    /// The noise strength and transient length used for inversion come from here.
    pub sim: SimConfig,
    pub lambda_source: LambdaSource,
    pub probe: ProbeParams,
    pub sweep: ThresholdSweep,
    /// Relative pseudoinverse rank cut-off; `None` for the default.
    pub rank_tolerance: Option<f64>,
    /// When set, each trial also reports the shortest record (in multiples of
    /// this many samples past the transient) that reconstructs exactly.
    pub min_samples_step: Option<usize>,
    pub save_timeseries: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            name: "experiment".into(),
            trials: 10,
            seed: 0,
            output_dir: None,
            topology: Topology::SmallWorld { n: 24, k: 4, p: 0.1 },
            sim: SimConfig::default(),
            lambda_source: LambdaSource::Oracle,
            probe: ProbeParams::default(),
            sweep: ThresholdSweep::default(),
            rank_tolerance: None,
            min_samples_step: None,
            save_timeseries: false,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::parse(None, e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| e.at_path(path))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::param("trials must be at least 1"));
        }
        if let LambdaSource::OraclePerturbed { relative_error } = self.lambda_source {
            if !(relative_error.is_finite() && relative_error >= 0.0) {
                return Err(Error::param(format!(
                    "relative_error must be >= 0, got {relative_error}"
                )));
            }
        }
        if self.sim.noise.is_none() {
            return Err(Error::param("reconstruction campaigns need a noise-driven simulation"));
        }
        if self.min_samples_step == Some(0) {
            return Err(Error::param("min_samples_step must be positive"));
        }
        self.sim.validate()?;
        self.sweep.validate()
    }

    fn sigma2(&self) -> f64 {
        self.sim.noise.as_ref().map_or(0.0, |n| n.sigma2)
    }
}

/// SplitMix64 finaliser, used to derive independent sub-seeds.
fn mix(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const SALT_INIT: u64 = 1;
const SALT_NOISE: u64 = 2;
const SALT_PROBE: u64 = 3;

/// Graph, record and `L̂` for one trial, before any eigenvalue matching.
#[derive(Clone, Debug)]
pub struct PreparedTrial {
    pub trial: usize,
    pub seed: u64,
    pub graph: Graph,
    pub series: TimeSeriesMatrix,
    pub l_hat: LaplacianEstimate,
    pub lambda_true: f64,
}

/// Simulation settings for `trial`, with seeds replaced by derived ones.
pub fn trial_sim_config(cfg: &ExperimentConfig, seed: u64) -> SimConfig {
    let mut sim = cfg.sim.clone();
    if let InitialState::Uniform { .. } = sim.initial_state {
        sim.initial_state = InitialState::Uniform {
            seed: mix(seed, SALT_INIT),
        };
    }
    if let Some(noise) = sim.noise.as_mut() {
        noise.seed = mix(seed, SALT_NOISE);
    }
    sim
}

pub fn trial_seed(cfg: &ExperimentConfig, trial: usize) -> u64 {
    cfg.seed.wrapping_add(trial as u64)
}

/// Generate, simulate and invert for one trial.
pub fn prepare_trial(cfg: &ExperimentConfig, trial: usize) -> Result<PreparedTrial> {
    let seed = trial_seed(cfg, trial);
    let graph = GeneratorParams::new(cfg.topology.clone(), seed).generate()?;
    let series = simulate_consensus(&graph, &trial_sim_config(cfg, seed))?;
    let c = correlation_matrix(&series, cfg.sim.transient_discard)?;
    let l_hat = estimate_laplacian(&c, cfg.sigma2(), cfg.rank_tolerance)?;
    let lambda_true = graph::lambda_max(&graph)?;
    Ok(PreparedTrial {
        trial,
        seed,
        graph,
        series,
        l_hat,
        lambda_true,
    })
}

/// One row of a campaign. Outcome fields are `None` when the trial failed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub nodes: usize,
    pub true_edges: usize,
    pub samples_used: usize,
    pub lambda_true: Option<f64>,
    pub lambda_target: Option<f64>,
    pub threshold: Option<f64>,
    pub g_value: Option<f64>,
    pub lambda_achieved: Option<f64>,
    pub edge_count: Option<usize>,
    pub errors: Option<usize>,
    /// Shortest exactly-reconstructing record length, if searched for and found.
    pub min_exact_samples: Option<usize>,
    pub failure: Option<String>,
}

impl TrialRecord {
    pub fn is_exact(&self) -> bool {
        self.errors == Some(0)
    }
}

/// Campaign summary; always equal to [`Aggregate::from_trials`] of the records.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub trials: usize,
    pub failed: usize,
    pub exact: usize,
    pub exact_fraction: f64,
    /// Mean over trials that produced a result.
    pub mean_errors: Option<f64>,
    pub samples_used: usize,
    pub mean_min_exact_samples: Option<f64>,
}

impl Aggregate {
    pub fn from_trials(records: &[TrialRecord]) -> Self {
        let trials = records.len();
        let failed = records.iter().filter(|r| r.failure.is_some()).count();
        let exact = records.iter().filter(|r| r.is_exact()).count();
        let errors: Vec<f64> = records.iter().filter_map(|r| r.errors).map(|e| e as f64).collect();
        let mins: Vec<f64> = records
            .iter()
            .filter_map(|r| r.min_exact_samples)
            .map(|m| m as f64)
            .collect();
        let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
        Aggregate {
            trials,
            failed,
            exact,
            exact_fraction: if trials == 0 { 0.0 } else { exact as f64 / trials as f64 },
            mean_errors: mean(&errors),
            samples_used: records.iter().map(|r| r.samples_used).max().unwrap_or(0),
            mean_min_exact_samples: mean(&mins),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub topology: String,
    pub trials: Vec<TrialRecord>,
    pub aggregate: Aggregate,
}

impl ExperimentReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn trials_csv(&self) -> String {
        fn opt<T: ToString>(v: &Option<T>) -> String {
            v.as_ref().map(T::to_string).unwrap_or_default()
        }
        let mut out = String::from(
            "trial,seed,nodes,true_edges,samples_used,lambda_true,lambda_target,threshold,g_value,lambda_achieved,edge_count,errors,min_exact_samples,failure\n",
        );
        for r in &self.trials {
            let failure = r.failure.as_deref().unwrap_or("").replace([',', '\n'], ";");
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.trial,
                r.seed,
                r.nodes,
                r.true_edges,
                r.samples_used,
                opt(&r.lambda_true),
                opt(&r.lambda_target),
                opt(&r.threshold),
                opt(&r.g_value),
                opt(&r.lambda_achieved),
                opt(&r.edge_count),
                opt(&r.errors),
                opt(&r.min_exact_samples),
                failure
            );
        }
        out
    }
}

/// Everything a trial leaves behind on disk.
struct TrialArtifacts {
    record: TrialRecord,
    graph: Option<Graph>,
    result: Option<ReconstructionResult>,
    trace: Vec<TraceRecord>,
    series: Option<TimeSeriesMatrix>,
}

fn target_for(cfg: &ExperimentConfig, prepared: &PreparedTrial) -> Result<f64> {
    match cfg.lambda_source {
        LambdaSource::Oracle => Ok(prepared.lambda_true),
        LambdaSource::OraclePerturbed { relative_error } => Ok(prepared.lambda_true * (1.0 + relative_error)),
        LambdaSource::Probe => {
            let mut params = cfg.probe.clone();
            params.seed = mix(prepared.seed, SALT_PROBE);
            estimate_lambda_max(&prepared.graph, &params).map(|e| e.value)
        }
    }
}

/// Shortest prefix `discard + k·step` whose reconstruction is exact.
fn min_exact_samples(
    cfg: &ExperimentConfig,
    prepared: &PreparedTrial,
    target: f64,
    step: usize,
) -> Result<Option<usize>> {
    let discard = cfg.sim.transient_discard;
    let total = prepared.series.sample_count();
    let mut len = discard + step;
    while len <= total {
        let prefix = prepared.series.prefix(len)?;
        let exact = correlation_matrix(&prefix, discard)
            .and_then(|c| estimate_laplacian(&c, cfg.sigma2(), cfg.rank_tolerance))
            .and_then(|l| reconstruct_by_eigenvalue(&l, target, &cfg.sweep, Some(&prepared.graph), Exec::Sequential))
            .map(|(r, _)| r.errors_vs_truth == Some(0))
            .unwrap_or(false);
        if exact {
            return Ok(Some(len));
        }
        len += step;
    }
    Ok(None)
}

fn run_trial(cfg: &ExperimentConfig, trial: usize, exec: Exec) -> TrialArtifacts {
    let seed = trial_seed(cfg, trial);
    let mut record = TrialRecord {
        trial,
        seed,
        nodes: cfg.topology.node_count(),
        true_edges: 0,
        samples_used: cfg.sim.sample_count(),
        lambda_true: None,
        lambda_target: None,
        threshold: None,
        g_value: None,
        lambda_achieved: None,
        edge_count: None,
        errors: None,
        min_exact_samples: None,
        failure: None,
    };
    let mut art = TrialArtifacts {
        record: record.clone(),
        graph: None,
        result: None,
        trace: Vec::new(),
        series: None,
    };

    let outcome = (|| -> Result<(PreparedTrial, ReconstructionResult, Vec<TraceRecord>, f64)> {
        let prepared = prepare_trial(cfg, trial)?;
        let target = target_for(cfg, &prepared)?;
        let (result, trace) =
            reconstruct_by_eigenvalue(&prepared.l_hat, target, &cfg.sweep, Some(&prepared.graph), exec)?;
        Ok((prepared, result, trace, target))
    })();

    match outcome {
        Ok((prepared, result, trace, target)) => {
            record.true_edges = prepared.graph.edge_count();
            record.lambda_true = Some(prepared.lambda_true);
            record.lambda_target = Some(target);
            record.threshold = Some(result.threshold);
            record.g_value = Some(result.g_value);
            record.lambda_achieved = Some(result.lambda_achieved);
            record.edge_count = Some(result.edge_count);
            record.errors = result.errors_vs_truth;
            if let Some(step) = cfg.min_samples_step {
                match min_exact_samples(cfg, &prepared, target, step) {
                    Ok(m) => record.min_exact_samples = m,
                    Err(e) => record.failure = Some(format!("min-samples search: {e}")),
                }
            }
            art.graph = Some(prepared.graph);
            art.result = Some(result);
            art.trace = trace;
            if cfg.save_timeseries {
                art.series = Some(prepared.series);
            }
        }
        Err(e) => {
            if let Error::Reconstruction { trace, .. } = &e {
                art.trace = trace.as_ref().clone();
            }
            if let Ok(g) = GeneratorParams::new(cfg.topology.clone(), seed).generate() {
                record.true_edges = g.edge_count();
                art.graph = Some(g);
            }
            record.failure = Some(e.to_string());
        }
    }
    art.record = record;
    art
}

/// Run every trial, then write artifacts if `output_dir` is set.
///
/// Per-trial failures are recorded, not propagated; only configuration and
/// output errors abort the campaign.
pub fn run_experiment(cfg: &ExperimentConfig, exec: Exec) -> Result<ExperimentReport> {
    cfg.validate()?;
    let artifacts = par::map_range(exec, cfg.trials, |t| run_trial(cfg, t, exec));
    let trials: Vec<TrialRecord> = artifacts.iter().map(|a| a.record.clone()).collect();
    let report = ExperimentReport {
        name: cfg.name.clone(),
        topology: cfg.topology.label(),
        aggregate: Aggregate::from_trials(&trials),
        trials,
    };
    if let Some(dir) = &cfg.output_dir {
        write_campaign(dir, cfg, &report, &artifacts)?;
    }
    Ok(report)
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_campaign(
    dir: &Path,
    cfg: &ExperimentConfig,
    report: &ExperimentReport,
    artifacts: &[TrialArtifacts],
) -> Result<()> {
    create_dir(dir)?;
    // stored without the output location
    let stored = ExperimentConfig {
        output_dir: None,
        ..cfg.clone()
    };
    write_text(&dir.join("config.toml"), &stored.to_toml())?;
    write_text(&dir.join("report.json"), &(report.to_json() + "\n"))?;
    write_text(&dir.join("trials.csv"), &report.trials_csv())?;
    for a in artifacts {
        let sub = dir.join(format!("trial_{:02}", a.record.trial));
        create_dir(&sub)?;
        if let Some(g) = &a.graph {
            write_edge_list(g, sub.join("graph.txt"))?;
        }
        if let Some(r) = &a.result {
            r.write_json(sub.join("result.json"))?;
        }
        if !a.trace.is_empty() {
            write_trace_csv(&a.trace, sub.join("g_trace.csv"))?;
        }
        if let Some(ts) = &a.series {
            ts.write_csv(sub.join("timeseries.csv"))?;
        }
    }
    Ok(())
}

/// Mistaken entries when the target is `λ(1 − level)` and `λ(1 + level)`.
/// A failed reconstruction counts as the empty graph.
pub fn perturbation_errors(
    prepared: &PreparedTrial,
    level: f64,
    sweep: &ThresholdSweep,
    exec: Exec,
) -> Result<[usize; 2]> {
    let mut out = [0; 2];
    for (slot, sign) in out.iter_mut().zip([-1.0, 1.0]) {
        let target = prepared.lambda_true * (1.0 + sign * level);
        *slot = match reconstruct_by_eigenvalue(&prepared.l_hat, target, sweep, Some(&prepared.graph), exec) {
            Ok((r, _)) => r.errors_vs_truth.unwrap_or(0),
            Err(Error::Reconstruction { .. }) => {
                count_errors(&Graph::empty(prepared.graph.node_count()), &prepared.graph)?
            }
            Err(e) => return Err(e),
        };
    }
    Ok(out)
}

/// One row of a perturbation sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaSweepRow {
    pub level: f64,
    /// Mean over trials of the worse of the two signs.
    pub mean_mistaken: f64,
    pub worst_mistaken: usize,
    pub exact_trials: usize,
    /// Worse-sign error count per successful trial, in trial order.
    pub per_trial: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaSweepReport {
    pub name: String,
    pub topology: String,
    pub trials: usize,
    pub failed_trials: Vec<usize>,
    pub rows: Vec<LambdaSweepRow>,
}

impl LambdaSweepReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("level,mean_mistaken,worst_mistaken,exact_trials\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{},{}", r.level, r.mean_mistaken, r.worst_mistaken, r.exact_trials);
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Simulate each trial once and re-run only the eigenvalue matching at every
/// perturbation level (both signs, worse one kept). Trials whose preparation
/// fails are listed in `failed_trials` and left out of the rows.
pub fn lambda_error_sweep(cfg: &ExperimentConfig, levels: &[f64], exec: Exec) -> Result<LambdaSweepReport> {
    cfg.validate()?;
    if let Some(bad) = levels.iter().find(|l| !(l.is_finite() && **l >= 0.0)) {
        return Err(Error::param(format!("perturbation levels must be >= 0, got {bad}")));
    }
    let prepared = par::map_range(exec, cfg.trials, |t| prepare_trial(cfg, t));
    let mut ok = Vec::new();
    let mut failed_trials = Vec::new();
    for (t, p) in prepared.into_iter().enumerate() {
        match p {
            Ok(p) => ok.push(p),
            Err(_) => failed_trials.push(t),
        }
    }
    let per_trial: Vec<Vec<usize>> = par::map(exec, &ok, |p| -> Result<Vec<usize>> {
        levels
            .iter()
            .map(|&l| perturbation_errors(p, l, &cfg.sweep, Exec::Sequential).map(|e| e[0].max(e[1])))
            .collect()
    })
    .into_iter()
    .collect::<Result<_>>()?;

    let rows = levels
        .iter()
        .enumerate()
        .map(|(k, &level)| {
            let col: Vec<usize> = per_trial.iter().map(|v| v[k]).collect();
            LambdaSweepRow {
                level,
                mean_mistaken: if col.is_empty() {
                    0.0
                } else {
                    col.iter().sum::<usize>() as f64 / col.len() as f64
                },
                worst_mistaken: col.iter().copied().max().unwrap_or(0),
                exact_trials: col.iter().filter(|&&e| e == 0).count(),
                per_trial: col,
            }
        })
        .collect();
    let report = LambdaSweepReport {
        name: cfg.name.clone(),
        topology: cfg.topology.label(),
        trials: cfg.trials,
        failed_trials,
        rows,
    };
    if let Some(dir) = &cfg.output_dir {
        create_dir(dir)?;
        write_text(&dir.join("lambda_sweep.csv"), &report.to_csv())?;
        write_text(&dir.join("lambda_sweep.json"), &(report.to_json() + "\n"))?;
    }
    Ok(report)
}

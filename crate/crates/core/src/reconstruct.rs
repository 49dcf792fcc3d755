//! Topology reconstruction from consensus fluctuations.
//!
//! The pipeline is: fluctuation correlation `C` → `L̂ = (σ²/2)·C⁺` →
//! normalised off-diagonals → threshold sweep, keeping the candidate whose
//! largest Laplacian eigenvalue best matches a known target.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{laplacian, Graph};
use crate::linalg;
use crate::par::{self, Exec};
use crate::series::TimeSeriesMatrix;

pub use crate::graph::count_errors;

/// Time-averaged outer product of fluctuations about the network mean.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationMatrix {
    pub c: DMatrix<f64>,
    pub sample_count: usize,
    pub discard: usize,
}

impl CorrelationMatrix {
    /// Same metadata, matrix multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        CorrelationMatrix {
            c: &self.c * factor,
            ..self.clone()
        }
    }
}

/// `ζ_i(t) = x_i(t) − mean_j x_j(t)`, `C = ⟨ζ ζᵀ⟩` over the samples after `discard`.
pub fn correlation_matrix(ts: &TimeSeriesMatrix, discard: usize) -> Result<CorrelationMatrix> {
    let total = ts.sample_count();
    if total <= discard {
        return Err(Error::param(format!(
            "{total} samples leave nothing after discarding {discard}"
        )));
    }
    let n = ts.node_count();
    let used = total - discard;
    let mut zeta = ts.values().columns(discard, used).into_owned();
    for mut col in zeta.column_iter_mut() {
        let m = col.mean();
        col.add_scalar_mut(-m);
    }
    let mut c = &zeta * zeta.transpose() / used as f64;
    // exact symmetry; the product can differ in the last bit across the diagonal
    for j in 0..n {
        for i in 0..j {
            c[(i, j)] = c[(j, i)];
        }
    }
    Ok(CorrelationMatrix {
        c,
        sample_count: used,
        discard,
    })
}

/// `L̂ = (σ²/2)·C⁺`.
#[derive(Clone, Debug, PartialEq)]
pub struct LaplacianEstimate {
    pub l_hat: DMatrix<f64>,
    pub sigma2: f64,
    pub warnings: Vec<String>,
}

/// Invert the correlation matrix. `rank_tolerance` is relative to the largest
/// eigenvalue of `C`; `None` uses [`linalg::DEFAULT_RELATIVE_RANK_TOL`].
///
/// More than one null direction (the consensus mode) is reported as a
/// warning, not an error.
pub fn estimate_laplacian(
    c: &CorrelationMatrix,
    sigma2: f64,
    rank_tolerance: Option<f64>,
) -> Result<LaplacianEstimate> {
    if !(sigma2.is_finite() && sigma2 > 0.0) {
        return Err(Error::param(format!("sigma2 must be positive, got {sigma2}")));
    }
    let rel = rank_tolerance.unwrap_or(linalg::DEFAULT_RELATIVE_RANK_TOL);
    if !(rel.is_finite() && rel >= 0.0) {
        return Err(Error::param(format!("rank tolerance must be >= 0, got {rel}")));
    }
    let values = linalg::symmetric_eigenvalues(&c.c)?;
    let scale = values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if scale == 0.0 {
        return Err(Error::numerical("correlation matrix is identically zero"));
    }
    let tol = rel * scale;
    let mut warnings = Vec::new();
    let nulls = linalg::null_count(&values, tol);
    if nulls > 1 {
        warnings.push(format!(
            "correlation matrix has {nulls} null directions; expected 1 (consensus mode)"
        ));
    }
    let l_hat = linalg::pseudoinverse(&c.c, Some(tol))? * (0.5 * sigma2);
    Ok(LaplacianEstimate {
        l_hat,
        sigma2,
        warnings,
    })
}

/// Threshold grid `start, start + step, …` up to and including `stop`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThresholdSweep {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Default for ThresholdSweep {
    fn default() -> Self {
        ThresholdSweep {
            start: 0.05,
            stop: 0.95,
            step: 0.005,
        }
    }
}

impl ThresholdSweep {
    pub fn single(tau: f64) -> Self {
        ThresholdSweep {
            start: tau,
            stop: tau,
            step: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.start.is_finite()
            && self.stop.is_finite()
            && self.step.is_finite()
            && self.step > 0.0
            && self.start <= self.stop;
        if !ok {
            return Err(Error::param(format!(
                "bad threshold sweep start={} stop={} step={}",
                self.start, self.stop, self.step
            )));
        }
        Ok(())
    }

    /// Grid values generated by integer index so they do not drift.
    pub fn values(&self) -> Result<Vec<f64>> {
        self.validate()?;
        let count = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        Ok((0..count).map(|i| self.start + i as f64 * self.step).collect())
    }
}

/// Off-diagonal entries of `L̂` divided by the magnitude of the most negative
/// one. The diagonal is set to zero. If no entry is negative the matrix is
/// returned unscaled.
pub fn normalized_offdiagonal(l_hat: &DMatrix<f64>) -> DMatrix<f64> {
    let n = l_hat.nrows();
    let mut most_negative = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                most_negative = most_negative.min(l_hat[(i, j)]);
            }
        }
    }
    let scale = if most_negative < 0.0 { -most_negative } else { 1.0 };
    DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { l_hat[(i, j)] / scale })
}

/// One point of the `g(τ)` curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub tau: f64,
    pub g: f64,
    pub lambda_candidate: f64,
    pub edge_count: usize,
    pub error_count: Option<usize>,
}

/// Normalised off-diagonal pairs, sorted by value (most negative first).
/// Candidate `A(τ)` is exactly the prefix of entries with value `≤ −τ`.
struct Ranking {
    n: usize,
    pairs: Vec<(f64, usize, usize)>,
}

impl Ranking {
    fn new(l_hat: &DMatrix<f64>) -> Result<Self> {
        if !l_hat.is_square() {
            return Err(Error::param("L̂ must be square"));
        }
        if l_hat.iter().any(|v| !v.is_finite()) {
            return Err(Error::numerical("L̂ contains non-finite entries"));
        }
        let n = l_hat.nrows();
        let norm = normalized_offdiagonal(l_hat);
        let mut pairs = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            for j in (i + 1)..n {
                // average the two halves in case L̂ is slightly asymmetric
                pairs.push((0.5 * (norm[(i, j)] + norm[(j, i)]), i, j));
            }
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then((a.1, a.2).cmp(&(b.1, b.2))));
        Ok(Ranking { n, pairs })
    }

    fn edge_count(&self, tau: f64) -> usize {
        self.pairs.partition_point(|p| p.0 <= -tau)
    }

    fn graph(&self, edges: usize) -> Graph {
        let mut g = Graph::empty(self.n);
        for &(_, i, j) in &self.pairs[..edges] {
            g.set(i, j, true);
        }
        g
    }

    fn max_edges(&self) -> usize {
        self.pairs.len()
    }
}

/// Sweep `τ` and report `g`, `λ_N*` and the edge count at each grid point;
/// `error_count` is filled when `truth` is given.
///
/// Candidates are nested, so `λ_N*` is evaluated once per distinct edge count.
pub fn g_trace(
    l_hat: &LaplacianEstimate,
    lambda_target: f64,
    sweep: &ThresholdSweep,
    truth: Option<&Graph>,
    exec: Exec,
) -> Result<Vec<TraceRecord>> {
    if !lambda_target.is_finite() {
        return Err(Error::param(format!("target eigenvalue must be finite, got {lambda_target}")));
    }
    let taus = sweep.values()?;
    let ranking = Ranking::new(&l_hat.l_hat)?;
    if let Some(t) = truth {
        if t.node_count() != ranking.n {
            return Err(Error::param(format!(
                "truth has {} nodes, estimate has {}",
                t.node_count(),
                ranking.n
            )));
        }
    }
    let counts: Vec<usize> = taus.iter().map(|&t| ranking.edge_count(t)).collect();
    let mut distinct = counts.clone();
    distinct.sort_unstable();
    distinct.dedup();

    let evaluated = par::map(exec, &distinct, |&m| -> Result<(f64, Option<usize>)> {
        let g = ranking.graph(m);
        let lambda = linalg::symmetric_eigenvalues(&laplacian(&g))?
            .last()
            .copied()
            .unwrap_or(0.0)
            .max(0.0);
        let errors = truth.map(|t| count_errors(&g, t)).transpose()?;
        Ok((lambda, errors))
    });
    let mut by_count = BTreeMap::new();
    for (m, r) in distinct.iter().zip(evaluated) {
        by_count.insert(*m, r?);
    }

    Ok(taus
        .iter()
        .zip(&counts)
        .map(|(&tau, &m)| {
            let (lambda, errors) = by_count[&m];
            TraceRecord {
                tau,
                g: (lambda_target - lambda).abs(),
                lambda_candidate: lambda,
                edge_count: m,
                error_count: errors,
            }
        })
        .collect())
}

/// Selected candidate and its diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionResult {
    pub adjacency: Graph,
    pub threshold: f64,
    pub g_value: f64,
    pub lambda_target: f64,
    pub lambda_achieved: f64,
    pub edge_count: usize,
    pub errors_vs_truth: Option<usize>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl ReconstructionResult {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("result serializes")
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json() + "\n").map_err(|e| Error::io(path, e))
    }
}

/// Values of `g` closer than this are treated as tied.
fn tie_tolerance(lambda_target: f64) -> f64 {
    1e-9 * lambda_target.abs().max(1.0)
}

/// Index of the selected record: minimal `g`; among ties, the most frequent
/// edge count (smaller count on equal frequency); then the smallest `τ`.
fn select(trace: &[TraceRecord], lambda_target: f64) -> Option<usize> {
    let best = trace.iter().map(|r| r.g).fold(f64::INFINITY, f64::min);
    if !best.is_finite() {
        return None;
    }
    let tol = tie_tolerance(lambda_target);
    let tied: Vec<usize> = (0..trace.len()).filter(|&k| trace[k].g <= best + tol).collect();
    let mut freq: BTreeMap<usize, usize> = BTreeMap::new();
    for &k in &tied {
        *freq.entry(trace[k].edge_count).or_default() += 1;
    }
    let mode = freq
        .iter()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
        .map(|(&m, _)| m)?;
    tied.into_iter()
        .filter(|&k| trace[k].edge_count == mode)
        .min_by(|&a, &b| trace[a].tau.total_cmp(&trace[b].tau))
}

/// Choose the candidate whose `λ_N*` best matches `lambda_target`.
///
/// Fails with [`Error::Reconstruction`] (trace attached) when every candidate
/// in the sweep is the empty or the complete graph and none of them matches
/// the target to within `1e-6·max(1, λ)`.
pub fn reconstruct_by_eigenvalue(
    l_hat: &LaplacianEstimate,
    lambda_target: f64,
    sweep: &ThresholdSweep,
    truth: Option<&Graph>,
    exec: Exec,
) -> Result<(ReconstructionResult, Vec<TraceRecord>)> {
    if !(lambda_target.is_finite() && lambda_target > 0.0) {
        return Err(Error::param(format!("target eigenvalue must be positive, got {lambda_target}")));
    }
    let trace = g_trace(l_hat, lambda_target, sweep, truth, exec)?;
    let full = {
        let n = l_hat.l_hat.nrows();
        n * n.saturating_sub(1) / 2
    };
    let trivial = trace.iter().all(|r| r.edge_count == 0 || r.edge_count == full);
    let matched = trace.iter().any(|r| r.g <= 1e-6 * lambda_target.max(1.0));
    if trivial && !matched {
        return Err(Error::Reconstruction {
            reason: "every threshold yields the empty or the complete graph".into(),
            trace: Box::new(trace),
        });
    }
    let k = select(&trace, lambda_target).ok_or_else(|| Error::Reconstruction {
        reason: "cost function is not finite".into(),
        trace: Box::new(trace.clone()),
    })?;
    let rec = &trace[k];
    let ranking = Ranking::new(&l_hat.l_hat)?;
    debug_assert!(rec.edge_count <= ranking.max_edges());
    let adjacency = ranking.graph(rec.edge_count);

    let mut warnings = l_hat.warnings.clone();
    if !adjacency.is_connected() {
        warnings.push(format!(
            "reconstructed graph has {} connected components",
            adjacency.component_count()
        ));
    }
    if truth.is_some_and(|t| !t.is_connected()) {
        warnings.push("ground-truth graph is disconnected".into());
    }
    let result = ReconstructionResult {
        adjacency,
        threshold: rec.tau,
        g_value: rec.g,
        lambda_target,
        lambda_achieved: rec.lambda_candidate,
        edge_count: rec.edge_count,
        errors_vs_truth: rec.error_count,
        warnings,
    };
    Ok((result, trace))
}

/// `tau,g,error_count`; `error_count` is blank without ground truth.
pub fn trace_to_csv(trace: &[TraceRecord]) -> String {
    let mut out = String::from("tau,g,error_count\n");
    for r in trace {
        let e = r.error_count.map(|e| e.to_string()).unwrap_or_default();
        let _ = writeln!(out, "{},{},{}", r.tau, r.g, e);
    }
    out
}

pub fn write_trace_csv(trace: &[TraceRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, trace_to_csv(trace)).map_err(|e| Error::io(path, e))
}

/// Parse a `tau,g,error_count` CSV. The file does not carry `λ_N*` or edge
/// counts, so those come back as `NaN` and `0`.
pub fn trace_from_csv(text: &str) -> Result<Vec<TraceRecord>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, h)) if h.trim() == "tau,g,error_count" => {}
        _ => return Err(Error::parse(Some(1), "expected header `tau,g,error_count`")),
    }
    let num = |idx: usize, f: &str| -> Result<f64> {
        f.trim()
            .parse()
            .map_err(|e| Error::parse(Some(idx + 1), format!("bad number {f:?}: {e}")))
    };
    lines
        .map(|(idx, line)| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 3 {
                return Err(Error::parse(Some(idx + 1), format!("expected 3 fields, found {}", f.len())));
            }
            let error_count = match f[2].trim() {
                "" => None,
                e => Some(
                    e.parse()
                        .map_err(|err| Error::parse(Some(idx + 1), format!("bad count {e:?}: {err}")))?,
                ),
            };
            Ok(TraceRecord {
                tau: num(idx, f[0])?,
                g: num(idx, f[1])?,
                lambda_candidate: f64::NAN,
                edge_count: 0,
                error_count,
            })
        })
        .collect()
}

pub fn read_trace_csv(path: impl AsRef<Path>) -> Result<Vec<TraceRecord>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    trace_from_csv(&text).map_err(|e| e.at_path(path))
}

/// Settings for the series → adjacency pipeline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReconstructionConfig {
    /// Leading samples dropped as transient.
    pub discard: usize,
    /// Injected noise strength used to scale `L̂`.
    pub sigma2: f64,
    /// Relative rank cut-off for the pseudoinverse.
    pub rank_tolerance: Option<f64>,
    pub sweep: ThresholdSweep,
}

impl Default for ReconstructionConfig {
    fn default() -> Self {
        ReconstructionConfig {
            discard: 30,
            sigma2: 0.01,
            rank_tolerance: None,
            sweep: ThresholdSweep::default(),
        }
    }
}

/// Correlate, invert and sweep in one call.
pub fn reconstruct_from_series(
    ts: &TimeSeriesMatrix,
    lambda_target: f64,
    cfg: &ReconstructionConfig,
    truth: Option<&Graph>,
    exec: Exec,
) -> Result<(ReconstructionResult, Vec<TraceRecord>)> {
    let c = correlation_matrix(ts, cfg.discard)?;
    let l_hat = estimate_laplacian(&c, cfg.sigma2, cfg.rank_tolerance)?;
    reconstruct_by_eigenvalue(&l_hat, lambda_target, &cfg.sweep, truth, exec)
}

/// `C = (σ²/2)·L⁺` for a known graph.
pub fn oracle_correlation(g: &Graph, sigma2: f64) -> Result<CorrelationMatrix> {
    let c = linalg::pseudoinverse(&laplacian(g), None)? * (0.5 * sigma2);
    Ok(CorrelationMatrix {
        c,
        sample_count: 0,
        discard: 0,
    })
}

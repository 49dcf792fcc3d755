use std::sync::OnceLock;

use nalgebra::DMatrix;
use proptest::prelude::*;

use netrecon::consensus::{simulate_consensus, InitialState, SimConfig};
use netrecon::graph::{self, format_edge_list, parse_edge_list, Graph};
use netrecon::linalg::{pseudoinverse, symmetric_eigen};
use netrecon::noise::{band_power_fraction, gen_hf_noise, low_pass, psd, FrequencyBand, NoiseConfig, Signal};
use netrecon::probe::{estimate_eigenvalues_fft, FrequencyMap, PeakConfig};
use netrecon::reconstruct::{
    correlation_matrix, estimate_laplacian, g_trace, oracle_correlation, reconstruct_by_eigenvalue,
    LaplacianEstimate, ThresholdSweep,
};
use netrecon::{count_errors, laplacian, Exec, TimeSeriesMatrix};

fn rel_frob(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

/// Symmetric matrix `Q diag(d) Qᵀ` with `zeros` eigenvalues forced to zero.
fn symmetric_with_rank(n: usize, seed: u64, zeros: usize) -> DMatrix<f64> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let raw = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let q = raw.qr().q();
    let d: Vec<f64> = (0..n)
        .map(|k| {
            if k < zeros {
                0.0
            } else {
                let mag = rng.random_range(0.1..10.0);
                if rng.random::<bool>() { mag } else { -mag }
            }
        })
        .collect();
    let m = &q * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(d)) * q.transpose();
    (&m + m.transpose()) * 0.5
}

fn arb_graph(max_n: usize) -> impl Strategy<Value = Graph> {
    (3..max_n, 0.0..1.0f64, any::<u64>()).prop_map(|(n, p, s)| graph::erdos_renyi(n, p, s).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn penrose_conditions(n in 1usize..=100, seed in any::<u64>(), zero_frac in 0.0..0.5f64) {
        let zeros = (zero_frac * n as f64) as usize;
        let a = symmetric_with_rank(n, seed, zeros);
        let p = pseudoinverse(&a, None).unwrap();
        let tol = 1e-9;
        prop_assert!(rel_frob(&(&a * &p * &a), &a) < tol);
        prop_assert!(rel_frob(&(&p * &a * &p), &p) < tol);
        let ap = &a * &p;
        let pa = &p * &a;
        prop_assert!((&ap - ap.transpose()).norm() / ap.norm().max(1.0) < tol);
        prop_assert!((&pa - pa.transpose()).norm() / pa.norm().max(1.0) < tol);
    }

    #[test]
    fn graph_invariants(g in arb_graph(30)) {
        let a = g.adjacency_matrix();
        let n = g.node_count();
        for i in 0..n {
            prop_assert_eq!(a[(i, i)], 0.0);
            for j in 0..n {
                prop_assert_eq!(a[(i, j)], a[(j, i)]);
            }
        }
        prop_assert_eq!(a.sum() as usize, 2 * g.edge_count());
        let s = graph::spectrum(&g).unwrap();
        prop_assert!(s.eigenvalues[0].abs() <= s.zero_tolerance());
        prop_assert!(s.eigenvalues.iter().all(|&v| v >= -s.zero_tolerance()));
        prop_assert_eq!(s.zero_count(), g.component_count());
    }

    #[test]
    fn edge_list_round_trip(g in arb_graph(40)) {
        prop_assert_eq!(parse_edge_list(&format_edge_list(&g)).unwrap(), g);
    }

    #[test]
    fn grid_counts(rows in 2usize..12, cols in 2usize..12) {
        let g = graph::grid(rows, cols).unwrap();
        prop_assert_eq!(g.node_count(), rows * cols);
        prop_assert_eq!(g.edge_count(), rows * (cols - 1) + cols * (rows - 1));
        prop_assert!(g.is_connected());
    }

    #[test]
    fn small_world_edges(half_k in 1usize..4, extra in 1usize..40, p in 0.0..1.0f64, seed in any::<u64>()) {
        let k = 2 * half_k;
        let n = k + extra;
        let g = graph::small_world(n, k, p, seed).unwrap();
        prop_assert_eq!(g.edge_count(), n * k / 2);
        let ring = graph::small_world(n, k, 0.0, seed).unwrap();
        prop_assert!(ring.degrees().iter().all(|&d| d == k));
    }

    #[test]
    fn hamming_metric(a in arb_graph(12), seed in any::<u64>(), p1 in 0.0..1.0f64, p2 in 0.0..1.0f64) {
        let n = a.node_count();
        let b = graph::erdos_renyi(n, p1, seed).unwrap();
        let c = graph::erdos_renyi(n, p2, seed ^ 1).unwrap();
        let ab = count_errors(&a, &b).unwrap();
        prop_assert_eq!(ab, count_errors(&b, &a).unwrap());
        prop_assert_eq!(count_errors(&a, &a).unwrap(), 0);
        prop_assert!(count_errors(&a, &c).unwrap() <= ab + count_errors(&b, &c).unwrap());
    }

    #[test]
    fn low_pass_is_linear(xs in prop::collection::vec(-5.0..5.0f64, 80..200), alpha in -3.0..3.0f64, beta in -3.0..3.0f64, cutoff in 0.05..0.45f64) {
        let ys: Vec<f64> = xs.iter().rev().copied().collect();
        let x = Signal::new(xs.clone(), 0.1).unwrap();
        let y = Signal::new(ys.clone(), 0.1).unwrap();
        let mix = Signal::new(xs.iter().zip(&ys).map(|(a, b)| alpha * a + beta * b).collect(), 0.1).unwrap();
        let fx = low_pass(&x, cutoff).unwrap().signal;
        let fy = low_pass(&y, cutoff).unwrap().signal;
        let fm = low_pass(&mix, cutoff).unwrap().signal;
        for k in 0..fm.len() {
            let expect = alpha * fx.samples[k] + beta * fy.samples[k];
            prop_assert!((fm.samples[k] - expect).abs() < 1e-9 * (1.0 + expect.abs()));
        }
    }

    #[test]
    fn hf_noise_variance_and_band(sigma2 in 0.001..1.0f64, lo in 0.05..0.3f64, width in 0.12..0.19f64, seed in any::<u64>()) {
        let band = FrequencyBand::new(lo, lo + width).unwrap();
        let cfg = NoiseConfig { sigma2, band, seed };
        let s = gen_hf_noise(8192, &cfg, 0.1).unwrap();
        prop_assert!((s.variance() / sigma2 - 1.0).abs() < 1e-9);
        let p = psd(&s, 256).unwrap();
        let (wlo, whi) = band.widened(3.3 / 65.0);
        prop_assert!(band_power_fraction(&p, wlo, whi) >= 0.95);
    }

    #[test]
    fn oracle_round_trip(n in 6usize..30, seed in any::<u64>(), sigma2 in 1e-4..1.0f64) {
        let g = graph::small_world(n, 4, 0.2, seed).unwrap();
        let c = oracle_correlation(&g, sigma2).unwrap();
        let l = estimate_laplacian(&c, sigma2, None).unwrap();
        prop_assert!((&l.l_hat - laplacian(&g)).amax() < 1e-8);
        let lambda = graph::lambda_max(&g).unwrap();
        let (r, _) = reconstruct_by_eigenvalue(&l, lambda, &ThresholdSweep::default(), Some(&g), Exec::Sequential).unwrap();
        prop_assert_eq!(r.errors_vs_truth, Some(0));
        prop_assert!(r.g_value <= 1e-9 * lambda);
    }
}

/// One empirical `L̂` from a short noisy SW(16) run, shared across cases.
fn empirical() -> &'static (Graph, netrecon::reconstruct::CorrelationMatrix) {
    static CELL: OnceLock<(Graph, netrecon::reconstruct::CorrelationMatrix)> = OnceLock::new();
    CELL.get_or_init(|| {
        let g = graph::small_world(16, 4, 0.1, 7).unwrap();
        let ts = simulate_consensus(&g, &SimConfig::default().with_samples(600)).unwrap();
        (g, correlation_matrix(&ts, 30).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn decision_is_scale_invariant(factor in 1e-3..1e3f64, target_scale in 0.5..1.5f64) {
        let (g, c) = empirical();
        let lambda = graph::lambda_max(g).unwrap() * target_scale;
        let sweep = ThresholdSweep::default();
        let base = estimate_laplacian(c, 0.01, None).unwrap();
        let scaled = estimate_laplacian(&c.scaled(factor), 0.01, None).unwrap();
        let (a, _) = reconstruct_by_eigenvalue(&base, lambda, &sweep, None, Exec::Sequential).unwrap();
        let (b, _) = reconstruct_by_eigenvalue(&scaled, lambda, &sweep, None, Exec::Sequential).unwrap();
        prop_assert_eq!(a.adjacency, b.adjacency);
    }

    #[test]
    fn sweep_is_monotone(target in 0.5..12.0f64) {
        let (g, c) = empirical();
        let l = estimate_laplacian(c, 0.01, None).unwrap();
        let trace = g_trace(&l, target, &ThresholdSweep::default(), Some(g), Exec::Sequential).unwrap();
        for w in trace.windows(2) {
            prop_assert!(w[1].edge_count <= w[0].edge_count);
            prop_assert!(w[1].lambda_candidate <= w[0].lambda_candidate + 1e-9);
        }
        prop_assert!(trace.iter().all(|r| r.g >= 0.0));
        let (res, _) = reconstruct_by_eigenvalue(&l, target, &ThresholdSweep::default(), None, Exec::Sequential).unwrap();
        if res.g_value == 0.0 {
            prop_assert!((res.lambda_achieved - target).abs() < 1e-9);
        }
    }

    #[test]
    fn sequential_and_parallel_traces_agree(target in 1.0..10.0f64) {
        let (g, c) = empirical();
        let l = estimate_laplacian(c, 0.01, None).unwrap();
        let sweep = ThresholdSweep::default();
        let a = g_trace(&l, target, &sweep, Some(g), Exec::Sequential).unwrap();
        let b = g_trace(&l, target, &sweep, Some(g), Exec::Parallel).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn noise_free_mean_conserved(g in arb_graph(20), seed in any::<u64>()) {
        let cfg = SimConfig {
            initial_state: InitialState::Uniform { seed },
            ..SimConfig::default()
        }
        .noise_free()
        .with_samples(200);
        let ts = simulate_consensus(&g, &cfg).unwrap();
        let m0 = ts.values().column(0).mean();
        for k in [50, 100, 199] {
            prop_assert!((ts.values().column(k).mean() - m0).abs() < 1e-12);
        }
    }

    #[test]
    fn correlation_scales_with_sigma2(seed in any::<u64>(), factor in 0.1..10.0f64) {
        // a consensus start leaves only the noise-driven part, which is linear in σ
        let g = graph::small_world(12, 4, 0.1, seed).unwrap();
        let run = |sigma2: f64| {
            let mut cfg = SimConfig {
                initial_state: InitialState::Explicit { values: vec![0.5; 12] },
                ..SimConfig::default()
            }
            .with_samples(300);
            cfg.noise.as_mut().unwrap().sigma2 = sigma2;
            cfg.noise.as_mut().unwrap().seed = seed;
            correlation_matrix(&simulate_consensus(&g, &cfg).unwrap(), 30).unwrap().c
        };
        let a = run(0.01);
        let b = run(0.01 * factor);
        prop_assert!(rel_frob(&b, &(a * factor)) < 1e-9);
    }

    #[test]
    fn sinusoid_lines_are_recovered(l1 in 0.2..3.0f64, gap in 0.5..3.0f64) {
        // two-node record with lines at 1 + l1 and 1 + l1 + gap, continuous sampling
        let dt = 0.05;
        let t_len = 4096;
        let l2 = l1 + gap;
        let v = DMatrix::from_fn(2, t_len, |i, k| {
            let t = k as f64 * dt;
            if i == 0 { ((1.0 + l1) * t).cos() } else { ((1.0 + l2) * t).cos() + 0.5 * ((1.0 + l1) * t).sin() }
        });
        let ts = TimeSeriesMatrix::new(v, dt).unwrap();
        let cfg = PeakConfig { frequency_map: FrequencyMap::Continuous, ..PeakConfig::default() };
        let est = estimate_eigenvalues_fft(&ts, &cfg).unwrap();
        prop_assert_eq!(est.values.len(), 2);
        prop_assert!((est.values[0] - l1).abs() <= est.resolution);
        prop_assert!((est.values[1] - l2).abs() <= est.resolution);
    }
}

#[test]
fn exact_laplacian_estimate_is_identity_on_oracle() {
    let g = graph::grid(4, 6).unwrap();
    let c = oracle_correlation(&g, 0.01).unwrap();
    let l = estimate_laplacian(&c, 0.01, None).unwrap();
    assert!((&l.l_hat - laplacian(&g)).amax() < 1e-8);
    let e = symmetric_eigen(&c.c).unwrap();
    assert!(e.values[0].abs() < 1e-12);
    let direct = LaplacianEstimate { l_hat: laplacian(&g), sigma2: 0.01, warnings: vec![] };
    let lambda = graph::lambda_max(&g).unwrap();
    let (r, _) = reconstruct_by_eigenvalue(&direct, lambda, &ThresholdSweep::default(), Some(&g), Exec::Sequential).unwrap();
    assert_eq!(r.adjacency, g);
}

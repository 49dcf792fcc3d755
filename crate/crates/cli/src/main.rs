//! `netrecon` command-line front end.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use netrecon::consensus::simulate_consensus;
use netrecon::experiment::{lambda_error_sweep, run_experiment, trial_sim_config, ExperimentConfig};
use netrecon::graph::{self, read_edge_list, write_edge_list, format_edge_list, GeneratorParams, Topology};
use netrecon::noise::{self, psd, psd_to_csv, recover_low_pass, NoiseConfig, FrequencyBand, Signal};
use netrecon::plot::{self, Layout};
use netrecon::probe::probe_spectrum;
use netrecon::reconstruct::{
    correlation_matrix, estimate_laplacian, read_trace_csv, reconstruct_by_eigenvalue, write_trace_csv,
};
use netrecon::{Error, Exec, Result, TimeSeriesMatrix};

#[derive(Parser)]
#[command(name = "netrecon", version, about = "Network reconstruction from noisy consensus time series")]
struct Cli {
    /// Run every loop on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a topology and write it as an edge list.
    Generate(GenerateArgs),
    /// Simulate the noisy consensus protocol on a graph.
    Simulate(SimulateArgs),
    /// Reconstruct the adjacency from a time series and λ_N.
    Reconstruct(ReconstructArgs),
    /// Run a seeded campaign.
    Experiment(CampaignArgs),
    /// Reconstruction errors under perturbed λ_N targets.
    SweepLambda(SweepArgs),
    /// Estimate Laplacian eigenvalues with the oscillator protocol.
    Probe(ProbeArgs),
    /// Render SVG charts.
    Plot {
        #[command(subcommand)]
        what: PlotCommand,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    ErdosRenyi,
    SmallWorld,
    Pipeline,
    Grid,
}

/// Shared options. Flags override values from `--config`.
#[derive(Args, Clone)]
struct Common {
    /// TOML experiment configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum)]
    topology: Option<Kind>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    rows: Option<usize>,
    #[arg(long)]
    cols: Option<usize>,
    /// Pipeline only: trim the band down to this many edges.
    #[arg(long)]
    target_edges: Option<usize>,
    /// Erdős–Rényi only: redraw until connected.
    #[arg(long)]
    connected: bool,
    /// Output edge-list file (stdout if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    /// Edge-list file.
    #[arg(long)]
    graph: PathBuf,
    /// Number of recorded samples.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    sigma2: Option<f64>,
    #[arg(long)]
    noise_free: bool,
    /// Output time-series CSV.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReconstructArgs {
    #[command(flatten)]
    common: Common,
    /// Time-series CSV.
    #[arg(long)]
    series: PathBuf,
    /// Target λ_N. Taken from `--truth` when omitted.
    #[arg(long)]
    lambda: Option<f64>,
    /// Ground-truth edge list, for error counts.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long)]
    discard: Option<usize>,
    #[arg(long)]
    sigma2: Option<f64>,
    /// Output directory for result.json and g_trace.csv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CampaignArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl CampaignArgs {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = self.common.load()?;
        if let Some(t) = self.trials {
            cfg.trials = t;
        }
        if let Some(o) = &self.out {
            cfg.output_dir = Some(o.clone());
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    campaign: CampaignArgs,
    /// Relative perturbation levels, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0,0.0022,0.0322,0.07,0.152")]
    levels: Vec<f64>,
}

#[derive(Args)]
struct ProbeArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    restarts: Option<usize>,
    /// Output JSON file (stdout if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum PlotCommand {
    /// g(τ) curve from a g_trace.csv.
    Trace {
        #[arg(long)]
        trace: PathBuf,
        /// Node count, for the error percentage axis.
        #[arg(long)]
        nodes: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Topology drawing from an edge list.
    Graph {
        #[arg(long)]
        graph: PathBuf,
        /// Lay nodes out on a ROWSxCOLS lattice instead of a circle.
        #[arg(long, value_parser = parse_dims)]
        grid: Option<(usize, usize)>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Noisy consensus signal, its spectrum and the low-pass recovery.
    Noise {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0.25)]
        cutoff: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_dims(s: &str) -> std::result::Result<(usize, usize), String> {
    let (r, c) = s.split_once('x').ok_or("expected ROWSxCOLS")?;
    Ok((
        r.parse().map_err(|e| format!("rows: {e}"))?,
        c.parse().map_err(|e| format!("cols: {e}"))?,
    ))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::Io {
            path: parent.to_path_buf(),
            source: e,
        })?;
    }
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn write_or_print(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => write_file(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn missing(flag: &str) -> Error {
    Error::Parameter(format!("--{flag} is required for this topology"))
}

fn generate(a: &GenerateArgs) -> Result<()> {
    let cfg = a.common.load()?;
    let topology = match a.topology {
        None => cfg.topology,
        Some(Kind::ErdosRenyi) => Topology::ErdosRenyi {
            n: a.n.ok_or_else(|| missing("n"))?,
            p: a.p.ok_or_else(|| missing("p"))?,
            require_connected: a.connected,
        },
        Some(Kind::SmallWorld) => Topology::SmallWorld {
            n: a.n.ok_or_else(|| missing("n"))?,
            k: a.k.unwrap_or(4),
            p: a.p.ok_or_else(|| missing("p"))?,
        },
        Some(Kind::Pipeline) => Topology::Pipeline {
            n: a.n.ok_or_else(|| missing("n"))?,
            k: a.k.unwrap_or(2),
            target_edges: a.target_edges,
        },
        Some(Kind::Grid) => Topology::Grid {
            rows: a.rows.ok_or_else(|| missing("rows"))?,
            cols: a.cols.ok_or_else(|| missing("cols"))?,
        },
    };
    let g = GeneratorParams::new(topology, cfg.seed).generate()?;
    match &a.out {
        Some(p) => write_edge_list(&g, p),
        None => write_or_print(None, &format_edge_list(&g)),
    }
}

fn simulate(a: &SimulateArgs) -> Result<()> {
    let mut cfg = a.common.load()?;
    if let Some(s) = a.samples {
        cfg.sim = cfg.sim.with_samples(s);
    }
    if let (Some(s), Some(noise)) = (a.sigma2, cfg.sim.noise.as_mut()) {
        noise.sigma2 = s;
    }
    let g = read_edge_list(&a.graph)?;
    let mut sim = trial_sim_config(&cfg, cfg.seed);
    if a.noise_free {
        sim = sim.noise_free();
    }
    let ts = simulate_consensus(&g, &sim)?;
    write_file(&a.out, &ts.to_csv())
}

fn reconstruct(a: &ReconstructArgs, exec: Exec) -> Result<()> {
    let cfg = a.common.load()?;
    let ts = TimeSeriesMatrix::read_csv(&a.series)?;
    let truth = a.truth.as_ref().map(read_edge_list).transpose()?;
    let lambda = match (a.lambda, &truth) {
        (Some(l), _) => l,
        (None, Some(t)) => graph::lambda_max(t)?,
        (None, None) => return Err(Error::Parameter("give --lambda or --truth".into())),
    };
    let discard = a.discard.unwrap_or(cfg.sim.transient_discard);
    let sigma2 = a
        .sigma2
        .or(cfg.sim.noise.as_ref().map(|n| n.sigma2))
        .unwrap_or(0.01);
    let c = correlation_matrix(&ts, discard)?;
    let l_hat = estimate_laplacian(&c, sigma2, cfg.rank_tolerance)?;
    create_dir(&a.out)?;
    match reconstruct_by_eigenvalue(&l_hat, lambda, &cfg.sweep, truth.as_ref(), exec) {
        Ok((result, trace)) => {
            result.write_json(a.out.join("result.json"))?;
            write_trace_csv(&trace, a.out.join("g_trace.csv"))?;
            for w in &result.warnings {
                eprintln!("warning: {w}");
            }
            Ok(())
        }
        Err(Error::Reconstruction { reason, trace }) => {
            write_trace_csv(&trace, a.out.join("g_trace.csv"))?;
            Err(Error::Reconstruction { reason, trace })
        }
        Err(e) => Err(e),
    }
}

fn experiment(a: &CampaignArgs, exec: Exec) -> Result<()> {
    let cfg = a.load()?;
    let report = run_experiment(&cfg, exec)?;
    let ag = &report.aggregate;
    eprintln!(
        "{}: {} of {} trials exact, {} failed",
        report.topology, ag.exact, ag.trials, ag.failed
    );
    if cfg.output_dir.is_none() {
        println!("{}", report.to_json());
    }
    Ok(())
}

fn sweep_lambda(a: &SweepArgs, exec: Exec) -> Result<()> {
    let cfg = a.campaign.load()?;
    let report = lambda_error_sweep(&cfg, &a.levels, exec)?;
    if cfg.output_dir.is_none() {
        print!("{}", report.to_csv());
    }
    Ok(())
}

fn probe(a: &ProbeArgs) -> Result<()> {
    let cfg = a.common.load()?;
    let mut params = cfg.probe.clone();
    if let Some(s) = a.common.seed {
        params.seed = s;
    }
    if let Some(dt) = a.dt {
        params.dt = dt;
    }
    if let Some(s) = a.samples {
        params.samples = s;
    }
    if let Some(r) = a.restarts {
        params.restarts = r;
    }
    let g = read_edge_list(&a.graph)?;
    let est = probe_spectrum(&g, &params)?;
    let json = serde_json::to_string_pretty(&est).expect("estimate serializes") + "\n";
    write_or_print(a.out.as_deref(), &json)
}

fn plot_noise(common: &Common, cutoff: f64, out: &Path) -> Result<()> {
    let cfg = common.load()?;
    let sim = trial_sim_config(&cfg, cfg.seed).noise_free();
    let g = GeneratorParams::new(cfg.topology.clone(), cfg.seed).generate()?;
    let ts = simulate_consensus(&g, &sim)?;
    let clean = ts.node_signal(0);
    // the demo always uses the high band; the campaign noise may be white
    let noise_cfg = NoiseConfig {
        sigma2: cfg.sim.noise.as_ref().map_or(0.01, |n| n.sigma2),
        band: FrequencyBand::HIGH,
        seed: cfg.seed,
    };
    let rec = recover_low_pass(&clean, &noise_cfg, cutoff)?;
    let hf = noise::gen_hf_noise(clean.len(), &noise_cfg, clean.dt)?;
    let spectrum = psd(&hf, 256.min(hf.len()))?;

    create_dir(out)?;
    write_file(&out.join("clean.csv"), &rec.clean.to_csv())?;
    write_file(&out.join("noisy.csv"), &rec.noisy.to_csv())?;
    write_file(&out.join("recovered.csv"), &rec.recovered.signal.to_csv())?;
    write_file(&out.join("psd.csv"), &psd_to_csv(&spectrum))?;
    let shifted: Signal = rec.recovered.signal.clone();
    let delay = rec.recovered.group_delay;
    plot::write_svg(
        out.join("signal.svg"),
        &plot::signals_svg(
            &[("noisy", &rec.noisy, 0), ("recovered (delay removed)", &shifted, delay), ("clean", &rec.clean, 0)],
            "Consensus signal with HF noise",
        ),
    )?;
    plot::write_svg(
        out.join("psd.svg"),
        &plot::psd_svg(&spectrum, Some((noise_cfg.band.lo(), noise_cfg.band.hi())), "HF noise PSD"),
    )?;
    eprintln!(
        "recovery rms error {:.3e} ({:.2}% of noise rms)",
        rec.rms_error,
        100.0 * rec.rms_error / rec.noise_rms
    );
    Ok(())
}

fn plot(cmd: &PlotCommand) -> Result<()> {
    match cmd {
        PlotCommand::Trace { trace, nodes, out } => {
            let t = read_trace_csv(trace)?;
            let title = trace.display().to_string();
            plot::write_svg(out, &plot::g_trace_svg(&t, *nodes, &title))
        }
        PlotCommand::Graph { graph, grid, out } => {
            let g = read_edge_list(graph)?;
            let layout = match grid {
                Some((rows, cols)) => Layout::Grid { rows: *rows, cols: *cols },
                None => Layout::Circular,
            };
            let title = graph.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            plot::write_svg(out, &plot::graph_svg(&g, layout, &title))
        }
        PlotCommand::Noise { common, cutoff, out } => plot_noise(common, *cutoff, out),
    }
}

fn run(cli: &Cli) -> Result<()> {
    let exec = if cli.sequential { Exec::Sequential } else { Exec::Parallel };
    match &cli.command {
        Command::Generate(a) => generate(a),
        Command::Simulate(a) => simulate(a),
        Command::Reconstruct(a) => reconstruct(a, exec),
        Command::Experiment(a) => experiment(a, exec),
        Command::SweepLambda(a) => sweep_lambda(a, exec),
        Command::Probe(a) => probe(a),
        Command::Plot { what } => plot(what),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.kind().exit_code() as u8)
        }
    }
}

//! Command-line front end.
//!
//! ```text
//! fadecv channel from-samples --input F [--bins N]
//! fadecv channel beam-wandering --a A --w W --sigma-b S --samples N --seed K [--fixed-loss T]
//! fadecv channel moments --input F
//! fadecv analyze entanglement|keyrate|thresholds --channel F --V v|--sigma s --chi c [--eta-min x] [--sweep SPEC]...
//! fadecv optimize ps --channel F --sigma s --chi c
//! fadecv optimize full --channel F [--chi c | --chi-sweep SPEC]
//! fadecv simulate --channel F --V v --chi c --n N --seed K [--eta-min x] [--sigma-eta s] [--repeats R]
//! ```
//!
//! Instead of `--channel F`, the analysis commands accept a beam-wandering
//! model through `--a`, `--w`, `--sigma-b` and `--beam-seed`. Single results
//! are JSON, sweeps are CSV. `--output` writes to a file instead of stdout.
//! `FADECV_THREADS` caps the worker pool.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::beam::{BeamGeometry, TransmittanceScale, DEFAULT_SAMPLES};
use crate::channel::{
    parse_samples, TransmittanceDistribution, DEFAULT_EMPIRICAL_BINS,
    DEFAULT_MODEL_BINS,
};
use crate::error::{domain, Error, Result};
use crate::montecarlo::{simulate, simulate_imperfect_estimation, SimConfig, SimulationRun};
use crate::postselect::{
    default_sigma_grid, log_space, noise_threshold, optimize_modulation, optimize_ps,
    optimize_ps_and_modulation, ps_sweep,
};
use crate::security::{
    key_rate_from_moments, max_fading_variance_collective, max_fading_variance_entanglement,
    max_fading_variance_individual, ProtocolParams,
};
use crate::sweep::{Axis, CsvTable, Param, SweepSpec};

const THRESHOLD_TOLERANCE: f64 = 1e-5;

#[derive(Debug, Parser)]
#[command(name = "fadecv", version, about = "Gaussian entanglement and CV-QKD key rates over fading channels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build, ingest or describe transmittance distributions.
    #[command(subcommand)]
    Channel(ChannelCmd),
    /// Entanglement, key-rate and threshold tables.
    #[command(subcommand)]
    Analyze(AnalyzeCmd),
    /// Post-selection and modulation optimization.
    #[command(subcommand)]
    Optimize(OptimizeCmd),
    /// Finite-ensemble Monte Carlo runs.
    Simulate(SimulateArgs),
}

#[derive(Debug, Subcommand)]
enum ChannelCmd {
    /// Histogram a file of transmittance samples.
    FromSamples {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = DEFAULT_EMPIRICAL_BINS)]
        bins: usize,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Sample the beam-wandering model.
    BeamWandering {
        #[arg(long)]
        a: f64,
        #[arg(long)]
        w: f64,
        #[arg(long)]
        sigma_b: f64,
        #[arg(long, default_value_t = DEFAULT_SAMPLES)]
        samples: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        fixed_loss: Option<f64>,
        #[arg(long, default_value_t = DEFAULT_MODEL_BINS)]
        bins: usize,
        #[arg(long, default_value = "amplitude")]
        scale: TransmittanceScale,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Moments of a distribution JSON or samples file.
    Moments {
        #[arg(long)]
        input: PathBuf,
    },
}

#[derive(Debug, Clone, Args)]
struct ChannelOpts {
    /// Distribution JSON file.
    #[arg(long, conflicts_with_all = ["a", "w", "sigma_b"])]
    channel: Option<PathBuf>,
    /// Aperture radius of a beam-wandering channel.
    #[arg(long)]
    a: Option<f64>,
    /// Beam spot radius.
    #[arg(long)]
    w: Option<f64>,
    /// Beam-wandering standard deviation.
    #[arg(long)]
    sigma_b: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    samples: usize,
    #[arg(long)]
    beam_seed: Option<u64>,
    #[arg(long)]
    fixed_loss: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_MODEL_BINS)]
    bins: usize,
    #[arg(long, default_value = "amplitude")]
    scale: TransmittanceScale,
}

impl ChannelOpts {
    fn is_beam(&self) -> bool {
        self.channel.is_none()
    }

    fn load(&self, sigma_b: Option<f64>, w: Option<f64>) -> Result<TransmittanceDistribution> {
        if let Some(path) = &self.channel {
            return TransmittanceDistribution::load_json(path);
        }
        let need = |v: Option<f64>, flag: &str| {
            v.ok_or_else(|| Error::Usage(format!("either --channel or --{flag} is required")))
        };
        let a = need(self.a, "a")?;
        let w = need(w.or(self.w), "w")?;
        let sigma_b = need(sigma_b.or(self.sigma_b), "sigma-b")?;
        let seed = self
            .beam_seed
            .ok_or_else(|| Error::Usage("--beam-seed is required for a beam-wandering channel".into()))?;
        beam_channel(a, w, sigma_b, self.samples, seed, self.fixed_loss, self.bins, self.scale)
    }

    fn describe(&self, t: &mut CsvTable) {
        match &self.channel {
            Some(p) => {
                t.meta("channel", p.display());
            }
            None => {
                t.meta("channel", "beam-wandering");
                for (k, v) in [("a", self.a), ("W", self.w), ("sigma_b", self.sigma_b), ("fixed_loss", self.fixed_loss)] {
                    if let Some(v) = v {
                        t.meta(k, v);
                    }
                }
                t.meta("samples", self.samples).meta("bins", self.bins).meta("scale", format!("{:?}", self.scale));
                if let Some(s) = self.beam_seed {
                    t.meta("beam_seed", s);
                }
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn beam_channel(
    a: f64,
    w: f64,
    sigma_b: f64,
    samples: usize,
    seed: u64,
    fixed_loss: Option<f64>,
    bins: usize,
    scale: TransmittanceScale,
) -> Result<TransmittanceDistribution> {
    let d = BeamGeometry::new(a, w, sigma_b)?.sample_distribution_scaled(scale, samples, bins, seed)?;
    match fixed_loss {
        Some(t) => d.compose_fixed_loss(t),
        None => Ok(d),
    }
}

#[derive(Debug, Clone, Args)]
struct StateOpts {
    /// State variance `V`.
    #[arg(long = "V", conflicts_with = "sigma")]
    v: Option<f64>,
    /// Modulation variance `σ = V − 1`.
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    chi: f64,
}

impl StateOpts {
    fn state_variance(&self) -> Option<f64> {
        self.v.or(self.sigma.map(|s| s + 1.0))
    }
}

#[derive(Debug, Clone, Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    channel: ChannelOpts,
    #[command(flatten)]
    state: StateOpts,
    #[arg(long, default_value_t = 0.0)]
    eta_min: f64,
    /// Sweep axis `name:min:max:count[:log]`; repeat for a grid.
    #[arg(long)]
    sweep: Vec<String>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum AnalyzeCmd {
    /// Log-negativity, distillable-entanglement bound and purity.
    Entanglement(AnalyzeArgs),
    /// Mutual information, Holevo bound and key rate.
    Keyrate(AnalyzeArgs),
    /// Maximal fading variances for entanglement and security.
    Thresholds {
        #[command(flatten)]
        args: AnalyzeArgs,
        /// `⟨√η⟩²` values; taken from the channel when omitted.
        #[arg(long, value_delimiter = ',')]
        mean_sqrt_sq: Vec<f64>,
    },
}

#[derive(Debug, Subcommand)]
enum OptimizeCmd {
    /// Best post-selection region at fixed modulation.
    Ps {
        #[command(flatten)]
        channel: ChannelOpts,
        #[command(flatten)]
        state: StateOpts,
        /// Also write the per-`η_min` table here.
        #[arg(long)]
        sweep_output: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Joint optimization of modulation and post-selection region.
    Full {
        #[command(flatten)]
        channel: ChannelOpts,
        #[arg(long, default_value_t = 0.0, conflicts_with = "chi_sweep")]
        chi: f64,
        /// Sweep of the excess noise, `chi:min:max:count`.
        #[arg(long)]
        chi_sweep: Option<String>,
        /// Modulation grid `min:max:count`, log-spaced.
        #[arg(long)]
        sigma_grid: Option<String>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Args)]
struct SimulateArgs {
    #[command(flatten)]
    channel: ChannelOpts,
    #[command(flatten)]
    state: StateOpts,
    /// Ensemble size.
    #[arg(long)]
    n: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 0.0)]
    eta_min: f64,
    /// Estimation error; the post-selection edge is then optimized.
    #[arg(long, default_value_t = 0.0)]
    sigma_eta: f64,
    /// Optimize the post-selection edge even with perfect estimation.
    #[arg(long)]
    optimize_ps: bool,
    /// Runs with seeds `seed, seed + 1, …`, reported as CSV.
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long)]
    sweep: Vec<String>,
    #[arg(long)]
    output: Option<PathBuf>,
}

/// Parses `args` (including the program name) and runs the command, writing
/// results to `out` unless an output file is given.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                write!(out, "{}", e.render())?;
                return Ok(());
            }
            return Err(Error::Usage(e.render().to_string()));
        }
    };
    init_threads();
    match cli.command {
        Command::Channel(cmd) => cmd_channel(cmd, out),
        Command::Analyze(cmd) => cmd_analyze(cmd, out),
        Command::Optimize(cmd) => cmd_optimize(cmd, out),
        Command::Simulate(args) => cmd_simulate(args, out),
    }
}

fn init_threads() {
    let Ok(value) = std::env::var("FADECV_THREADS") else {
        return;
    };
    match value.trim().parse::<usize>() {
        Ok(n) if n > 0 => {
            if rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
                log::debug!("worker pool already initialized");
            }
        }
        _ => log::warn!("ignoring FADECV_THREADS={value}"),
    }
}

fn emit(text: &str, path: Option<&Path>, out: &mut dyn Write) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => out.write_all(text.as_bytes())?,
    }
    Ok(())
}

fn emit_json<T: Serialize>(value: &T, path: Option<&Path>, out: &mut dyn Write) -> Result<()> {
    emit(&(serde_json::to_string_pretty(value)? + "\n"), path, out)
}

fn emit_table(t: &CsvTable, path: Option<&Path>, out: &mut dyn Write) -> Result<()> {
    emit(&t.to_csv_string()?, path, out)
}

#[derive(Serialize)]
struct MomentsSummary {
    mean_sqrt: f64,
    mean: f64,
    var_sqrt: f64,
    mean_sqrt_sq: f64,
    n_bins: usize,
    delta_eta: f64,
    min_eta: f64,
    max_eta: f64,
}

fn load_any(path: &Path) -> Result<TransmittanceDistribution> {
    let text = std::fs::read_to_string(path)?;
    if text.trim_start().starts_with('{') {
        TransmittanceDistribution::from_json(&text)
    } else {
        TransmittanceDistribution::from_samples(&parse_samples(&text)?, DEFAULT_EMPIRICAL_BINS)
    }
}

fn cmd_channel(cmd: ChannelCmd, out: &mut dyn Write) -> Result<()> {
    match cmd {
        ChannelCmd::FromSamples { input, bins, output } => {
            let samples = parse_samples(&std::fs::read_to_string(&input)?)?;
            let d = TransmittanceDistribution::from_samples(&samples, bins)?;
            log::info!("{} samples into {} non-empty bins", samples.len(), d.len());
            emit(&(d.to_json()? + "\n"), output.as_deref(), out)
        }
        ChannelCmd::BeamWandering {
            a,
            w,
            sigma_b,
            samples,
            seed,
            fixed_loss,
            bins,
            scale,
            output,
        } => {
            let d = beam_channel(a, w, sigma_b, samples, seed, fixed_loss, bins, scale)?;
            let m = d.moments();
            log::info!(
                "<sqrt eta>^2 = {:.5}, Var(sqrt eta) = {:.3e}",
                m.mean_sqrt_sq(),
                m.var_sqrt
            );
            emit(&(d.to_json()? + "\n"), output.as_deref(), out)
        }
        ChannelCmd::Moments { input } => {
            let d = load_any(&input)?;
            let m = d.moments();
            emit_json(
                &MomentsSummary {
                    mean_sqrt: m.mean_sqrt,
                    mean: m.mean,
                    var_sqrt: m.var_sqrt,
                    mean_sqrt_sq: m.mean_sqrt_sq(),
                    n_bins: d.len(),
                    delta_eta: d.delta_eta(),
                    min_eta: d.min_eta(),
                    max_eta: d.max_eta(),
                },
                None,
                out,
            )
        }
    }
}

fn parse_sweep(specs: &[String], allowed: &[Param]) -> Result<SweepSpec> {
    let axes = specs
        .iter()
        .map(|s| s.parse::<Axis>())
        .collect::<Result<Vec<_>>>()?;
    for a in &axes {
        if !allowed.contains(&a.param) {
            return Err(Error::Usage(format!("parameter {} cannot be swept by this command", a.param)));
        }
    }
    if axes.iter().any(|a| a.param == Param::V) && axes.iter().any(|a| a.param == Param::Sigma) {
        return Err(Error::Usage("sweep either V or sigma, not both".into()));
    }
    SweepSpec::new(axes)
}

/// Values of the swept and fixed parameters at one point.
#[derive(Debug, Clone, Copy)]
struct Point {
    v: Option<f64>,
    chi: f64,
    eta_min: f64,
    sigma_b: Option<f64>,
    w: Option<f64>,
    sigma_eta: f64,
    n_points: Option<usize>,
}

impl Point {
    fn apply(mut self, values: &[(Param, f64)]) -> Self {
        for &(p, x) in values {
            match p {
                Param::V => self.v = Some(x),
                Param::Sigma => self.v = Some(x + 1.0),
                Param::Chi => self.chi = x,
                Param::EtaMin => self.eta_min = x,
                Param::SigmaB => self.sigma_b = Some(x),
                Param::W => self.w = Some(x),
                Param::SigmaEta => self.sigma_eta = x,
                Param::NPoints => self.n_points = Some(x.round() as usize),
            }
        }
        self
    }

    fn state_variance(&self) -> Result<f64> {
        self.v
            .ok_or_else(|| Error::Usage("one of --V or --sigma is required".into()))
    }
}

/// Swept parameters that do not already have a column of their own.
fn extra_axes(spec: &SweepSpec, columns: &[&str]) -> Vec<Param> {
    spec.axes
        .iter()
        .map(|a| a.param)
        .filter(|p| !columns.contains(&p.name()))
        .collect()
}

fn extra_values(values: &[(Param, f64)], extra: &[Param]) -> Vec<f64> {
    values.iter().filter(|(p, _)| extra.contains(p)).map(|&(_, x)| x).collect()
}

fn metadata(t: &mut CsvTable, command: &str, spec: &SweepSpec) {
    t.meta("command", command);
    for a in &spec.axes {
        t.meta("sweep", a);
    }
}

fn cmd_analyze(cmd: AnalyzeCmd, out: &mut dyn Write) -> Result<()> {
    let (kind, args, msq) = match cmd {
        AnalyzeCmd::Entanglement(a) => ("entanglement", a, Vec::new()),
        AnalyzeCmd::Keyrate(a) => ("keyrate", a, Vec::new()),
        AnalyzeCmd::Thresholds { args, mean_sqrt_sq } => ("thresholds", args, mean_sqrt_sq),
    };
    let spec = parse_sweep(
        &args.sweep,
        &[Param::V, Param::Sigma, Param::Chi, Param::EtaMin, Param::SigmaB, Param::W],
    )?;
    let geometry_swept = spec.contains(Param::SigmaB) || spec.contains(Param::W);
    if geometry_swept && !args.channel.is_beam() {
        return Err(Error::Usage("sweeping sigma_b or W needs a beam-wandering channel, not --channel".into()));
    }
    if !spec.contains(Param::V) && !spec.contains(Param::Sigma) && args.state.state_variance().is_none() {
        return Err(Error::Usage("one of --V or --sigma is required".into()));
    }
    let base = Point {
        v: args.state.state_variance(),
        chi: args.state.chi,
        eta_min: args.eta_min,
        sigma_b: args.channel.sigma_b,
        w: args.channel.w,
        sigma_eta: 0.0,
        n_points: None,
    };
    let needs_channel = kind != "thresholds" || msq.is_empty();
    let fixed_channel = if needs_channel && !geometry_swept {
        Some(args.channel.load(None, None)?)
    } else {
        None
    };

    let columns: &[&str] = match kind {
        "entanglement" => &[
            "V", "chi", "eta_min", "success_probability", "mean_sqrt", "mean", "var_sqrt",
            "log_negativity", "distillable_bound", "purity", "var_max_entanglement",
        ],
        "keyrate" => &[
            "V", "sigma", "chi", "eta_min", "success_probability", "mean_sqrt_sq", "var_sqrt",
            "I_AB", "chi_BE", "K", "K_weighted", "lambda1", "lambda2", "lambda3",
        ],
        _ => &[
            "mean_sqrt_sq", "V", "sigma", "chi", "var_sqrt", "var_max_entanglement",
            "var_max_individual", "var_max_collective", "insecure_at_zero_fading",
        ],
    };
    let extra = extra_axes(&spec, columns);
    let mut header: Vec<&str> = extra.iter().map(|p| p.name()).collect();
    header.extend(columns.iter().copied());
    let mut table = CsvTable::new(header);
    metadata(&mut table, &format!("analyze {kind}"), &spec);
    if needs_channel {
        args.channel.describe(&mut table);
    }
    table.meta("chi", args.state.chi).meta("eta_min", args.eta_min);
    if let Some(v) = args.state.state_variance() {
        table.meta("V", v);
    }

    for values in spec.points() {
        let pt = base.apply(&values);
        let v = pt.state_variance()?;
        let mut row = extra_values(&values, &extra);
        let channel = if !needs_channel {
            None
        } else if geometry_swept {
            Some(args.channel.load(pt.sigma_b, pt.w)?)
        } else {
            fixed_channel.clone()
        };
        let restricted = match &channel {
            Some(d) => match d.restrict_from(pt.eta_min) {
                Ok((r, p)) => Some((r.moments(), p)),
                Err(Error::EmptySelection { .. }) => None,
                Err(e) => return Err(e),
            },
            None => None,
        };
        match kind {
            "entanglement" => {
                row.extend([v, pt.chi, pt.eta_min]);
                match restricted {
                    Some((m, p)) => {
                        let g = m.evolve_tmsv(v, pt.chi)?;
                        row.extend([
                            p,
                            m.mean_sqrt,
                            m.mean,
                            m.var_sqrt,
                            g.log_negativity()?,
                            g.distillable_entanglement_lower_bound()?,
                            g.purity()?,
                            max_fading_variance_entanglement(m.mean_sqrt_sq(), v, pt.chi).unwrap_or(f64::NAN),
                        ]);
                    }
                    None => row.extend([0.0].into_iter().chain([f64::NAN; 7])),
                }
            }
            "keyrate" => {
                row.extend([v, v - 1.0, pt.chi, pt.eta_min]);
                match restricted {
                    Some((m, p)) => {
                        let r = key_rate_from_moments(&m, &ProtocolParams::from_state_variance(v, pt.chi)?)?
                            .with_success(p);
                        row.extend([
                            p,
                            m.mean_sqrt_sq(),
                            m.var_sqrt,
                            r.i_ab,
                            r.chi_be,
                            r.k,
                            r.k_weighted,
                            r.lambda1,
                            r.lambda2,
                            r.lambda3,
                        ]);
                    }
                    None => {
                        row.extend([0.0, f64::NAN, f64::NAN, f64::NAN, f64::NAN, f64::NAN, 0.0]);
                        row.extend([f64::NAN; 3]);
                    }
                }
            }
            _ => {
                let targets: Vec<(f64, f64)> = if msq.is_empty() {
                    match restricted {
                        Some((m, _)) => vec![(m.mean_sqrt_sq(), m.var_sqrt)],
                        None => continue,
                    }
                } else {
                    msq.iter().map(|&s| (s, f64::NAN)).collect()
                };
                let prefix = row.clone();
                for (i, (s, var)) in targets.into_iter().enumerate() {
                    if i > 0 {
                        table.push(row)?;
                        row = prefix.clone();
                    }
                    let sigma = v - 1.0;
                    let coll = max_fading_variance_collective(s, sigma, pt.chi).ok();
                    row.extend([
                        s,
                        v,
                        sigma,
                        pt.chi,
                        var,
                        max_fading_variance_entanglement(s, v, pt.chi).unwrap_or(f64::NAN),
                        max_fading_variance_individual(s, sigma, pt.chi).unwrap_or(f64::NAN),
                        coll.map_or(f64::NAN, |c| c.var_max),
                        coll.map_or(f64::NAN, |c| if c.insecure_at_zero_fading { 1.0 } else { 0.0 }),
                    ]);
                }
            }
        }
        table.push(row)?;
    }
    emit_table(&table, args.output.as_deref(), out)
}

fn parse_sigma_grid(spec: Option<&str>) -> Result<Vec<f64>> {
    let Some(s) = spec else {
        return Ok(default_sigma_grid());
    };
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || domain(format!("modulation grid '{s}' must look like min:max:count"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].parse().map_err(|_| bad())?;
    let n: usize = parts[2].parse().map_err(|_| bad())?;
    if !(lo > 0.0 && lo < hi && n >= 2) {
        return Err(bad());
    }
    Ok(log_space(lo, hi, n))
}

#[derive(Serialize)]
struct FullOptimum {
    chi: f64,
    with_ps: crate::postselect::PsOptimum,
    without_ps: crate::postselect::PsOptimum,
}

fn cmd_optimize(cmd: OptimizeCmd, out: &mut dyn Write) -> Result<()> {
    match cmd {
        OptimizeCmd::Ps {
            channel,
            state,
            sweep_output,
            output,
        } => {
            let d = channel.load(None, None)?;
            let v = state
                .state_variance()
                .ok_or_else(|| Error::Usage("one of --V or --sigma is required".into()))?;
            let p = ProtocolParams::from_state_variance(v, state.chi)?;
            let opt = optimize_ps(&d, &p)?;
            if let Some(path) = sweep_output {
                let mut t = CsvTable::new(["eta_min", "success_probability", "I_AB", "chi_BE", "K", "K_weighted"]);
                t.meta("command", "optimize ps").meta("sigma", p.modulation()).meta("chi", p.excess_noise());
                channel.describe(&mut t);
                for r in ps_sweep(&d, &p)? {
                    t.push(vec![r.eta_min, r.success_probability, r.i_ab, r.chi_be, r.k, r.k_weighted])?;
                }
                emit_table(&t, Some(&path), out)?;
            }
            emit_json(&opt, output.as_deref(), out)
        }
        OptimizeCmd::Full {
            channel,
            chi,
            chi_sweep,
            sigma_grid,
            output,
        } => {
            let d = channel.load(None, None)?;
            let grid = parse_sigma_grid(sigma_grid.as_deref())?;
            let Some(sweep) = chi_sweep else {
                let result = FullOptimum {
                    chi,
                    with_ps: optimize_ps_and_modulation(&d, chi, &grid)?,
                    without_ps: optimize_modulation(&d, chi, &grid)?,
                };
                return emit_json(&result, output.as_deref(), out);
            };
            let axis: Axis = sweep.parse()?;
            if axis.param != Param::Chi {
                return Err(Error::Usage(format!("--chi-sweep must sweep chi, got {}", axis.param)));
            }
            let mut t = CsvTable::new([
                "chi", "sigma_no_ps", "K_no_ps", "sigma_ps", "eta_min_ps", "success_ps", "K_ps",
                "K_weighted_ps",
            ]);
            t.meta("command", "optimize full").meta("chi_sweep", axis);
            t.meta("sigma_grid", format!("{}:{}:{}", grid[0], grid[grid.len() - 1], grid.len()));
            channel.describe(&mut t);
            let no_ps = noise_threshold(&d, &grid, false, THRESHOLD_TOLERANCE)?;
            let with_ps = noise_threshold(&d, &grid, true, THRESHOLD_TOLERANCE)?;
            t.meta("chi_threshold_no_ps", no_ps).meta("chi_threshold_ps", with_ps);
            for c in axis.values() {
                let a = optimize_modulation(&d, c, &grid)?;
                let b = optimize_ps_and_modulation(&d, c, &grid)?;
                t.push(vec![
                    c,
                    a.modulation,
                    a.k_weighted,
                    b.modulation,
                    b.eta_min,
                    b.success_probability,
                    b.report.k,
                    b.k_weighted,
                ])?;
            }
            emit_table(&t, output.as_deref(), out)
        }
    }
}

fn cmd_simulate(args: SimulateArgs, out: &mut dyn Write) -> Result<()> {
    let spec = parse_sweep(
        &args.sweep,
        &[Param::V, Param::Sigma, Param::Chi, Param::EtaMin, Param::SigmaEta, Param::NPoints],
    )?;
    if !spec.contains(Param::V) && !spec.contains(Param::Sigma) && args.state.state_variance().is_none() {
        return Err(Error::Usage("one of --V or --sigma is required".into()));
    }
    let d = args.channel.load(None, None)?;
    let base = Point {
        v: args.state.state_variance(),
        chi: args.state.chi,
        eta_min: args.eta_min,
        sigma_b: None,
        w: None,
        sigma_eta: args.sigma_eta,
        n_points: Some(args.n),
    };
    let run_one = |pt: &Point, seed: u64| -> Result<SimulationRun> {
        let cfg = SimConfig::new(pt.state_variance()?, d.clone(), pt.chi, pt.n_points.unwrap_or(args.n), seed)?
            .with_eta_min(pt.eta_min)
            .with_estimation_error(pt.sigma_eta);
        if pt.sigma_eta > 0.0 || args.optimize_ps {
            simulate_imperfect_estimation(&cfg)
        } else {
            simulate(&cfg)
        }
    };

    if args.repeats.is_none() && spec.axes.is_empty() {
        let run = run_one(&base, args.seed)?;
        if !run.sample.physical {
            log::warn!("sample covariance matrix is unphysical; key rate omitted");
        }
        return emit(&(run.to_json()? + "\n"), args.output.as_deref(), out);
    }

    let repeats = args.repeats.unwrap_or(1);
    if repeats == 0 {
        return Err(domain("--repeats must be >= 1"));
    }
    let columns = [
        "seed", "V", "chi", "sigma_eta", "n_points", "eta_min", "retained_count", "physical",
        "lambda_min", "I_AB", "chi_BE", "K", "K_weighted", "K_asymptotic",
    ];
    let extra = extra_axes(&spec, &columns);
    let mut header: Vec<&str> = extra.iter().map(|p| p.name()).collect();
    header.extend(columns);
    let mut t = CsvTable::new(header);
    metadata(&mut t, "simulate", &spec);
    args.channel.describe(&mut t);
    t.meta("seed", args.seed).meta("repeats", repeats).meta("n", args.n);
    t.meta("optimize_ps", args.optimize_ps || args.sigma_eta > 0.0);
    for values in spec.points() {
        let pt = base.apply(&values);
        for k in 0..repeats as u64 {
            let seed = args.seed.wrapping_add(k);
            let run = match run_one(&pt, seed) {
                Ok(r) => Some(r),
                Err(Error::EmptyEnsemble) => None,
                Err(e) => return Err(e),
            };
            let mut row = extra_values(&values, &extra);
            let v = pt.state_variance()?;
            let eta_min = run.as_ref().map_or(pt.eta_min, |r| r.config.eta_min);
            let asymptotic = asymptotic_key(&d, eta_min, v, pt.chi)?;
            row.extend([
                seed as f64,
                v,
                pt.chi,
                pt.sigma_eta,
                pt.n_points.unwrap_or(args.n) as f64,
                eta_min,
            ]);
            match run {
                Some(r) => {
                    let rep = r.key_rate_report;
                    row.extend([
                        r.sample.retained as f64,
                        if r.sample.physical { 1.0 } else { 0.0 },
                        r.sample.min_symplectic_eigenvalue,
                        rep.map_or(f64::NAN, |x| x.i_ab),
                        rep.map_or(f64::NAN, |x| x.chi_be),
                        rep.map_or(f64::NAN, |x| x.k),
                        rep.map_or(0.0, |x| x.k_weighted),
                        asymptotic,
                    ]);
                }
                None => row.extend([0.0, 0.0, f64::NAN, f64::NAN, f64::NAN, f64::NAN, 0.0, asymptotic]),
            }
            t.push(row)?;
        }
    }
    emit_table(&t, args.output.as_deref(), out)
}

/// Key rate of the restricted channel in the infinite-ensemble limit.
fn asymptotic_key(d: &TransmittanceDistribution, eta_min: f64, v: f64, chi: f64) -> Result<f64> {
    match d.restrict_from(eta_min) {
        Ok((r, _)) => Ok(key_rate_from_moments(&r.moments(), &ProtocolParams::from_state_variance(v, chi)?)?.k),
        Err(Error::EmptySelection { .. }) => Ok(f64::NAN),
        Err(e) => Err(e),
    }
}

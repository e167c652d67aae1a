//! The `starkfit` command line.
//!
//! Every data file is written with a `<stem>.meta.json` sidecar holding the
//! command, seed, configuration and tool version. Exit codes: 0 on success,
//! 1 for usage and input errors, 2 when a solver or fit fails numerically.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;
use thiserror::Error;

use crate::fieldmap::{solve_potential, ElectrodeGeometry, FieldError, SolverOptions};
use crate::fit::linewidth::linewidth_curve;
use crate::fit::{
    analyze_scan_series, fit_g2, fit_linewidth_vs_field, fit_peak, fit_stark_trajectory, DataPoint, FitError,
    G2FitOptions, StarkFitOptions, StarkFitReport, StarkPoint,
};
use crate::io::{self, Format, IoError, Sidecar};
use crate::lineshape::{expected_linewidth, Shape};
use crate::population::{simulate_population, summarize_population, PopulationError, PopulationModel};
use crate::simulate::{
    poisson_g2, simulate_g2, simulate_ple_scan, simulate_scan_series, Emitter, NoiseModel, ScanConfig, SimError,
    TwoLevelParams,
};
use crate::starkmodel::StarkCoefficients;

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "STARKFIT_OUT";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Numerical(String),
    #[error(transparent)]
    Io(#[from] IoError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Numerical(_) => 2,
            _ => 1,
        }
    }
}

impl From<FitError> for CliError {
    fn from(e: FitError) -> Self {
        match e {
            FitError::InvalidInput(_) | FitError::Simulation(SimError::InvalidConfig(_)) => {
                CliError::Usage(e.to_string())
            }
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::StepSizeInfeasible { .. } => CliError::Numerical(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<FieldError> for CliError {
    fn from(e: FieldError) -> Self {
        match e {
            FieldError::NotConverged { .. } => CliError::Numerical(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<PopulationError> for CliError {
    fn from(e: PopulationError) -> Self {
        CliError::Usage(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Csv,
    Json,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ShapeArg {
    Lorentzian,
    Gaussian,
    PseudoVoigt,
}

impl From<ShapeArg> for Shape {
    fn from(s: ShapeArg) -> Self {
        match s {
            ShapeArg::Lorentzian => Shape::Lorentzian,
            ShapeArg::Gaussian => Shape::Gaussian,
            ShapeArg::PseudoVoigt => Shape::PseudoVoigt,
        }
    }
}

/// `start:stop:count`, inclusive at both ends.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sweep {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl Sweep {
    pub fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.start];
        }
        (0..self.count)
            .map(|i| self.start + (self.stop - self.start) * i as f64 / (self.count - 1) as f64)
            .collect()
    }
}

impl std::str::FromStr for Sweep {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        let [a, b, n] = parts.as_slice() else {
            return Err(format!("expected start:stop:count, got {s:?}"));
        };
        let start: f64 = a.trim().parse().map_err(|_| format!("bad start in {s:?}"))?;
        let stop: f64 = b.trim().parse().map_err(|_| format!("bad stop in {s:?}"))?;
        let count: usize = n.trim().parse().map_err(|_| format!("bad count in {s:?}"))?;
        if count == 0 || !start.is_finite() || !stop.is_finite() {
            return Err(format!("sweep needs finite ends and count >= 1, got {s:?}"));
        }
        Ok(Sweep { start, stop, count })
    }
}

fn positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("expected a positive number, got {s:?}")),
    }
}

fn non_negative(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v >= 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("expected a number >= 0, got {s:?}")),
    }
}

#[derive(Debug, Parser)]
#[command(name = "starkfit", version, about = "Stark-shift simulation and inference for solid-state emitters")]
pub struct Cli {
    /// Output directory.
    #[arg(long, global = true, env = OUT_ENV, default_value = ".")]
    pub out: PathBuf,
    /// Table format for outputs.
    #[arg(long, global = true, value_enum, default_value_t = FormatArg::Csv)]
    pub format: FormatArg,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the electrode field and convert bias to local field.
    Field(FieldArgs),
    /// Generate synthetic datasets.
    #[command(subcommand)]
    Simulate(SimulateCommand),
    /// Run an inference pipeline on a dataset.
    #[command(subcommand)]
    Fit(FitCommand),
    /// Tabulate Δμ and Δα over a set of emitters.
    Population(PopulationArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FieldArgs {
    #[arg(long, default_value_t = 2.0, allow_hyphen_values = true)]
    pub gap_um: f64,
    #[arg(long, default_value_t = 2.0, allow_hyphen_values = true)]
    pub width_um: f64,
    #[arg(long, default_value_t = 0.1, allow_hyphen_values = true)]
    pub thickness_um: f64,
    #[arg(long, default_value_t = 200.0, allow_hyphen_values = true)]
    pub voltage: f64,
    #[arg(long, default_value_t = 76.0, allow_hyphen_values = true)]
    pub depth_nm: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub offset_um: f64,
    #[arg(long, default_value_t = crate::starkmodel::DIAMOND_EPSILON)]
    pub epsilon: f64,
    /// Core grid spacing.
    #[arg(long, default_value_t = 0.015, value_parser = positive)]
    pub grid_um: f64,
    #[arg(long, default_value_t = 1e-10, value_parser = positive)]
    pub tol: f64,
    #[arg(long, default_value_t = 200_000)]
    pub max_iter: usize,
    /// Voltage sweep `start:stop:count` for a bias-to-field table.
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip)]
    pub sweep: Option<Sweep>,
    /// Skip writing the full potential map.
    #[arg(long)]
    pub no_map: bool,
}

#[derive(Debug, Subcommand)]
pub enum SimulateCommand {
    /// PLE spectra over a range of static fields.
    Stark(SimStarkArgs),
    /// Repeated fast scans at one field.
    Series(SimSeriesArgs),
    /// Photon correlation curves.
    G2(SimG2Args),
    /// Noise-broadened linewidths versus field.
    Linewidth(SimLinewidthArgs),
    /// Stark trajectories of a population of emitters.
    Population(SimPopulationArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct StarkModelArgs {
    #[arg(long, default_value_t = StarkCoefficients::reference().c1, allow_hyphen_values = true)]
    pub c1: f64,
    #[arg(long, default_value_t = StarkCoefficients::reference().c2, allow_hyphen_values = true)]
    pub c2: f64,
    #[arg(long, default_value_t = StarkCoefficients::reference().c3, allow_hyphen_values = true)]
    pub c3: f64,
    #[arg(long, default_value_t = StarkCoefficients::reference().c4, allow_hyphen_values = true)]
    pub c4: f64,
}

impl StarkModelArgs {
    fn coeffs(&self) -> StarkCoefficients {
        StarkCoefficients::new(self.c1, self.c2, self.c3, self.c4)
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimStarkArgs {
    /// Static local fields `start:stop:count`, MV/m.
    #[arg(long, default_value = "-250:250:26", allow_hyphen_values = true)]
    #[serde(skip)]
    pub fields: Sweep,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub stark: StarkModelArgs,
    #[arg(long, default_value_t = 60.0, value_parser = positive)]
    pub gamma_l_mhz: f64,
    #[arg(long, default_value_t = 2.4, value_parser = non_negative)]
    pub f_rms_mv_per_m: f64,
    #[arg(long, default_value_t = 50.0, value_parser = positive)]
    pub tau_c_ms: f64,
    #[arg(long, default_value_t = 0.4, value_parser = positive)]
    pub half_span_ghz: f64,
    #[arg(long, default_value_t = 160)]
    pub bins: usize,
    #[arg(long, default_value_t = 0.32, value_parser = positive)]
    pub scan_rate_ghz_per_s: f64,
    /// Count rate at the line centre.
    #[arg(long, default_value_t = 4000.0, value_parser = non_negative)]
    pub peak_rate_hz: f64,
    #[arg(long, default_value_t = 200.0, value_parser = non_negative)]
    pub background_rate_hz: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimSeriesArgs {
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    /// Static local field, MV/m.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub field: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub stark: StarkModelArgs,
    #[arg(long, default_value_t = 45.0, value_parser = positive)]
    pub gamma_l_mhz: f64,
    #[arg(long, default_value_t = 2.4, value_parser = non_negative)]
    pub f_rms_mv_per_m: f64,
    #[arg(long, default_value_t = 50.0, value_parser = positive)]
    pub tau_c_ms: f64,
    #[arg(long, default_value_t = 0.6, value_parser = positive)]
    pub half_span_ghz: f64,
    #[arg(long, default_value_t = 120)]
    pub bins: usize,
    #[arg(long, default_value_t = 20.0, value_parser = positive)]
    pub scan_rate_ghz_per_s: f64,
    /// Expected counts per bin at the line centre.
    #[arg(long, default_value_t = 60.0, value_parser = positive)]
    pub peak_counts: f64,
    #[arg(long, default_value_t = 2.0, value_parser = non_negative)]
    pub background_counts: f64,
    /// Dead time between scans, s.
    #[arg(long, default_value_t = 0.1, value_parser = non_negative)]
    pub gap_s: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimG2Args {
    #[arg(long, default_value_t = 6.0, value_parser = positive)]
    pub t1_ns: f64,
    #[arg(long, default_value_t = 4.0, value_parser = positive)]
    pub t2_ns: f64,
    #[arg(long, default_value_t = 200.0, value_parser = positive)]
    pub rabi_mhz: f64,
    #[arg(long, default_value_t = 0.985)]
    pub purity: f64,
    /// Relative drive powers, one curve each.
    #[arg(long, default_value = "1", value_delimiter = ',')]
    pub powers: Vec<f64>,
    #[arg(long, default_value_t = 50.0, value_parser = positive)]
    pub tau_max_ns: f64,
    #[arg(long, default_value_t = 201)]
    pub points: usize,
    /// Coincidences per bin at g² = 1; 0 gives noiseless curves.
    #[arg(long, default_value_t = 500.0, value_parser = non_negative)]
    pub coincidences: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimLinewidthArgs {
    #[arg(long, default_value = "-200:200:21", allow_hyphen_values = true)]
    #[serde(skip)]
    pub fields: Sweep,
    #[command(flatten)]
    pub stark: StarkModelArgs,
    #[arg(long, default_value_t = 60.0, value_parser = positive)]
    pub gamma_l_mhz: f64,
    #[arg(long, default_value_t = 2.4, value_parser = non_negative)]
    pub f_rms_mv_per_m: f64,
    /// Relative scatter of each width.
    #[arg(long, default_value_t = 0.05, value_parser = non_negative)]
    pub noise_frac: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimPopulationArgs {
    #[arg(long, default_value_t = 11)]
    pub n: usize,
    #[arg(long, default_value_t = 1e-3, value_parser = non_negative)]
    pub delta_mu_max_debye: f64,
    #[arg(long, default_value_t = 0.23, allow_hyphen_values = true)]
    pub delta_alpha_half_mean_a3: f64,
    #[arg(long, default_value_t = 0.05, value_parser = non_negative)]
    pub delta_alpha_half_std_a3: f64,
    #[arg(long, default_value = "-250:250:26", allow_hyphen_values = true)]
    #[serde(skip)]
    pub fields: Sweep,
    /// Scatter of the line centres.
    #[arg(long, default_value_t = 0.005, value_parser = positive)]
    pub center_sigma_ghz: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Subcommand)]
pub enum FitCommand {
    /// Fit one peak.
    Peak(FitPeakArgs),
    /// Fit the Stark polynomial to spectra or line positions.
    Stark(FitStarkArgs),
    /// Fit field noise and homogeneous width to linewidths.
    Linewidth(FitLinewidthArgs),
    /// Fit the Bloch-equation model to g² curves.
    G2(FitG2Args),
    /// Per-scan fits and spectral-diffusion summary of a scan series.
    Series(FitSeriesArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FitPeakArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = ShapeArg::Lorentzian)]
    #[serde(skip)]
    pub shape: ShapeArg,
    /// Output stem.
    #[arg(long, default_value = "peak_fit")]
    pub name: String,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FitStarkArgs {
    /// Stark spectra (field, frequency, counts) or line positions
    /// (field, centre, sigma).
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 4)]
    pub order: usize,
    /// Ignore per-point uncertainties.
    #[arg(long)]
    pub unweighted: bool,
    /// Add bootstrap errors from this many resampled refits.
    #[arg(long, default_value_t = 0)]
    pub bootstrap: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Peak shape for spectra input.
    #[arg(long, value_enum, default_value_t = ShapeArg::Lorentzian)]
    #[serde(skip)]
    pub shape: ShapeArg,
    /// Output stem; defaults to `stark_fit_order<N>`.
    #[arg(long)]
    pub name: Option<String>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FitLinewidthArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Stark coefficients `c1,c2,c3,c4`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, conflicts_with = "stark_report")]
    pub coeffs: Option<Vec<f64>>,
    /// Take the coefficients from a Stark fit report.
    #[arg(long)]
    pub stark_report: Option<PathBuf>,
    #[arg(long, default_value = "linewidth_fit")]
    pub name: String,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FitG2Args {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 6.0, value_parser = positive)]
    pub t1_ns: f64,
    #[arg(long, default_value_t = 4.0, value_parser = positive)]
    pub t2_ns: f64,
    #[arg(long, default_value_t = 200.0, value_parser = positive)]
    pub rabi_mhz: f64,
    #[arg(long, default_value_t = 0.98)]
    pub purity: f64,
    #[arg(long)]
    pub fix_t1: bool,
    #[arg(long)]
    pub fix_t2: bool,
    #[arg(long)]
    pub fix_rabi: bool,
    #[arg(long)]
    pub fix_purity: bool,
    #[arg(long, default_value = "g2_fit")]
    pub name: String,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FitSeriesArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = "diffusion")]
    pub name: String,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PopulationArgs {
    /// Stark fit reports (JSON); the emitter id is the file stem.
    #[arg(long, num_args = 1..)]
    pub reports: Vec<PathBuf>,
    /// Line-position files to fit first.
    #[arg(long, num_args = 1..)]
    pub trajectories: Vec<PathBuf>,
    /// Polynomial order for `--trajectories`.
    #[arg(long, default_value_t = 4)]
    pub order: usize,
    #[arg(long, default_value = "population")]
    pub name: String,
}

/// Parses arguments and runs; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    let ctx = Context {
        out: cli.out.clone(),
        format: cli.format.into(),
    };
    match &cli.command {
        Command::Field(a) => cmd_field(&ctx, a),
        Command::Simulate(s) => match s {
            SimulateCommand::Stark(a) => sim_stark(&ctx, a),
            SimulateCommand::Series(a) => sim_series(&ctx, a),
            SimulateCommand::G2(a) => sim_g2(&ctx, a),
            SimulateCommand::Linewidth(a) => sim_linewidth(&ctx, a),
            SimulateCommand::Population(a) => sim_population(&ctx, a),
        },
        Command::Fit(f) => match f {
            FitCommand::Peak(a) => fit_peak_cmd(&ctx, a),
            FitCommand::Stark(a) => fit_stark_cmd(&ctx, a),
            FitCommand::Linewidth(a) => fit_linewidth_cmd(&ctx, a),
            FitCommand::G2(a) => fit_g2_cmd(&ctx, a),
            FitCommand::Series(a) => fit_series_cmd(&ctx, a),
        },
        Command::Population(a) => cmd_population(&ctx, a),
    }
}

struct Context {
    out: PathBuf,
    format: Format,
}

impl Context {
    fn table(&self, stem: &str) -> PathBuf {
        self.out.join(format!("{stem}.{}", self.format.extension()))
    }

    fn json(&self, stem: &str) -> PathBuf {
        self.out.join(format!("{stem}.json"))
    }

    fn write_rows<T: Serialize>(&self, stem: &str, rows: &[T], sidecar: &Sidecar) -> Result<PathBuf, CliError> {
        let p = self.table(stem);
        io::write_rows(&p, rows)?;
        io::write_sidecar(&p, sidecar)?;
        Ok(p)
    }
}

fn require_input(path: &Path) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("input file {} not found", path.display())))
    }
}

#[derive(Serialize, serde::Deserialize)]
struct BiasRow {
    voltage_v: f64,
    external_field_mv_per_m: f64,
    local_field_mv_per_m: f64,
}

fn cmd_field(ctx: &Context, a: &FieldArgs) -> Result<(), CliError> {
    let geom = ElectrodeGeometry {
        gap: a.gap_um,
        electrode_width: a.width_um,
        electrode_thickness: a.thickness_um,
        applied_voltage: a.voltage,
        epsilon_substrate: a.epsilon,
        emitter_depth: a.depth_nm,
        emitter_lateral_offset: a.offset_um,
    };
    let opts = SolverOptions {
        grid_spacing: a.grid_um,
        max_iter: a.max_iter,
        tol: a.tol,
        ..SolverOptions::default()
    };
    let map = solve_potential(&geom, &opts)?;
    let header = map.header();
    let sidecar = Sidecar::new("field", None, a).with("header", &header);
    if !a.no_map {
        let p = ctx.out.join("fieldmap.csv");
        let mut buf = Vec::new();
        map.write_csv(&mut buf)?;
        io::write_atomic(&p, &buf)?;
        io::write_sidecar(&p, &sidecar)?;
    }
    let (fx, fy) = map.emitter_field()?;
    let local = map.local_field()?;
    println!("external field at emitter: ({fx:.6}, {fy:.6}) MV/m");
    println!("local field at emitter: {local:.6} MV/m");
    if let Some(sweep) = &a.sweep {
        let rows: Vec<BiasRow> = sweep
            .values()
            .into_iter()
            .map(|v| {
                let m = map.scaled_to(v);
                let (ex, ey) = m.emitter_field()?;
                Ok(BiasRow {
                    voltage_v: v,
                    external_field_mv_per_m: ex.hypot(ey),
                    local_field_mv_per_m: m.local_field()?,
                })
            })
            .collect::<Result<_, FieldError>>()?;
        println!("{:>10} {:>14} {:>14}", "V", "F_ext MV/m", "F_loc MV/m");
        for r in &rows {
            println!(
                "{:>10.3} {:>14.6} {:>14.6}",
                r.voltage_v, r.external_field_mv_per_m, r.local_field_mv_per_m
            );
        }
        let sc = Sidecar::new("field --sweep", None, a).with("sweep", sweep);
        ctx.write_rows("bias_sweep", &rows, &sc)?;
    }
    Ok(())
}

fn sim_stark(ctx: &Context, a: &SimStarkArgs) -> Result<(), CliError> {
    let coeffs = a.stark.coeffs();
    let emitter = Emitter::lorentzian(coeffs, a.gamma_l_mhz);
    let noise = NoiseModel {
        f_rms: a.f_rms_mv_per_m,
        tau_c: a.tau_c_ms * 1e-3,
    };
    let scan = ScanConfig {
        f_start: -a.half_span_ghz,
        f_stop: a.half_span_ghz,
        n_bins: a.bins,
        scan_rate: a.scan_rate_ghz_per_s,
        peak_count_rate: a.peak_rate_hz,
        background_rate: a.background_rate_hz,
        rng_seed: a.seed,
        ..ScanConfig::default()
    };
    let fields = a.fields.values();
    let spectra = fields
        .iter()
        .enumerate()
        .map(|(i, &f)| {
            let cfg = ScanConfig {
                rng_seed: a.seed.wrapping_add(i as u64),
                ..scan.clone()
            };
            Ok((f, simulate_ple_scan(&emitter, f, &cfg, &noise)?))
        })
        .collect::<Result<Vec<_>, SimError>>()?;
    let p = ctx.table("stark_spectra");
    io::write_stark_spectra(&p, &spectra)?;
    let sc = Sidecar::new("simulate stark", Some(a.seed), a)
        .with("fields", &a.fields)
        .with("scan", &scan)
        .with("noise", &noise)
        .with_truth(&coeffs);
    io::write_sidecar(&p, &sc)?;
    println!("wrote {} spectra to {}", spectra.len(), p.display());
    Ok(())
}

fn sim_series(ctx: &Context, a: &SimSeriesArgs) -> Result<(), CliError> {
    let emitter = Emitter::lorentzian(a.stark.coeffs(), a.gamma_l_mhz);
    let noise = NoiseModel {
        f_rms: a.f_rms_mv_per_m,
        tau_c: a.tau_c_ms * 1e-3,
    };
    let mut scan = ScanConfig::fast(a.half_span_ghz, a.bins, a.peak_counts, a.background_counts);
    scan.scan_rate = a.scan_rate_ghz_per_s;
    let dwell = scan.dwell();
    scan.peak_count_rate = a.peak_counts / dwell;
    scan.background_rate = a.background_counts / dwell;
    scan.rng_seed = a.seed;
    let series = simulate_scan_series(a.n, a.gap_s, &emitter, a.field, &scan, &noise)?;
    let p = ctx.table("series");
    io::write_series(&p, &series)?;
    let sc = Sidecar::new("simulate series", Some(a.seed), a)
        .with("scan", &scan)
        .with("noise", &noise)
        .with_truth(&emitter);
    io::write_sidecar(&p, &sc)?;
    println!("wrote {} scans at {} MV/m to {}", series.len(), a.field, p.display());
    Ok(())
}

fn sim_g2(ctx: &Context, a: &SimG2Args) -> Result<(), CliError> {
    if a.points < 2 {
        return Err(CliError::Usage("need at least 2 points".into()));
    }
    if a.powers.is_empty() || a.powers.iter().any(|p| !(*p > 0.0)) {
        return Err(CliError::Usage("relative powers must be positive".into()));
    }
    let truth = TwoLevelParams {
        t1: a.t1_ns,
        t2: a.t2_ns,
        rabi: a.rabi_mhz,
        signal_purity: a.purity,
        ..TwoLevelParams::default()
    };
    truth.validate()?;
    let tau: Vec<f64> = (0..a.points)
        .map(|i| a.tau_max_ns * i as f64 / (a.points - 1) as f64)
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let curves = a
        .powers
        .iter()
        .map(|&power| {
            let p = TwoLevelParams {
                rabi: truth.rabi * power.sqrt(),
                ..truth
            };
            let g = simulate_g2(&p, &tau)?;
            let (g2, sigma): (Vec<f64>, Vec<f64>) = if a.coincidences > 0.0 {
                poisson_g2(&g, a.coincidences, &mut rng).into_iter().unzip()
            } else {
                let s = vec![1e-3; g.len()];
                (g, s)
            };
            Ok(crate::fit::G2Curve::new(tau.clone(), g2, sigma).with_power(power))
        })
        .collect::<Result<Vec<_>, SimError>>()?;
    let p = ctx.table("g2");
    io::write_g2(&p, &curves)?;
    let sc = Sidecar::new("simulate g2", Some(a.seed), a)
        .with("powers", &a.powers)
        .with_truth(&truth);
    io::write_sidecar(&p, &sc)?;
    println!("wrote {} g2 curve(s) to {}", curves.len(), p.display());
    Ok(())
}

fn sim_linewidth(ctx: &Context, a: &SimLinewidthArgs) -> Result<(), CliError> {
    let coeffs = a.stark.coeffs();
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let points: Vec<DataPoint> = a
        .fields
        .values()
        .into_iter()
        .map(|f| {
            let w = expected_linewidth(a.gamma_l_mhz, a.f_rms_mv_per_m, &coeffs, f);
            let noisy = w * (1.0 + a.noise_frac * unit.sample(&mut rng));
            DataPoint::new(f, noisy, (a.noise_frac * w).max(1e-6 * w))
        })
        .collect();
    let p = ctx.table("linewidths");
    io::write_linewidths(&p, &points)?;
    let sc = Sidecar::new("simulate linewidth", Some(a.seed), a)
        .with("fields", &a.fields)
        .with_truth(&serde_json::json!({
            "gamma_l_mhz": a.gamma_l_mhz,
            "f_rms": a.f_rms_mv_per_m,
            "coeffs": coeffs,
        }));
    io::write_sidecar(&p, &sc)?;
    println!("wrote {} linewidths to {}", points.len(), p.display());
    Ok(())
}

fn sim_population(ctx: &Context, a: &SimPopulationArgs) -> Result<(), CliError> {
    let model = PopulationModel {
        n_emitters: a.n,
        delta_mu_max: a.delta_mu_max_debye,
        delta_alpha_half_mean: a.delta_alpha_half_mean_a3,
        delta_alpha_half_std: a.delta_alpha_half_std_a3,
        fields: a.fields.values(),
        center_sigma: a.center_sigma_ghz,
        seed: a.seed,
        ..PopulationModel::default()
    };
    let emitters = simulate_population(&model)?;
    for e in &emitters {
        let p = ctx.table(&e.id);
        io::write_trajectory(&p, &e.points)?;
        let sc = Sidecar::new("simulate population", Some(a.seed), &model)
            .with("emitter", &e.id)
            .with_truth(&serde_json::json!({"coeffs": e.coeffs, "physical": e.physical}));
        io::write_sidecar(&p, &sc)?;
    }
    println!("wrote {} emitter trajectories to {}", emitters.len(), ctx.out.display());
    Ok(())
}

#[derive(Serialize)]
struct CurveRow {
    x: f64,
    model: f64,
}

fn dense(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

fn fit_peak_cmd(ctx: &Context, a: &FitPeakArgs) -> Result<(), CliError> {
    require_input(&a.input)?;
    let s = io::read_spectrum(&a.input)?;
    let shape: Shape = a.shape.into();
    let fit = fit_peak(&s, shape)?;
    io::write_json(&ctx.json(&a.name), &fit)?;
    let lo = s.frequencies.iter().cloned().fold(f64::MAX, f64::min);
    let hi = s.frequencies.iter().cloned().fold(f64::MIN, f64::max);
    let curve = dense(lo, hi, 801)
        .into_iter()
        .map(|x| Ok(CurveRow { x, model: fit.params.eval(shape, x)? }))
        .collect::<Result<Vec<_>, crate::lineshape::LineshapeError>>()
        .map_err(|e| CliError::Numerical(e.to_string()))?;
    let sc = Sidecar::new("fit peak", None, a).with("shape", &shape);
    ctx.write_rows(&format!("{}_curve", a.name), &curve, &sc)?;
    println!(
        "centre {:.6} ± {:.6} GHz, FWHM {:.3} ± {:.3} MHz",
        fit.center(),
        fit.center_sigma(),
        fit.fwhm(),
        fit.fwhm_sigma()
    );
    Ok(())
}

fn load_stark_points(input: &Path, shape: Shape) -> Result<(Vec<StarkPoint>, bool), CliError> {
    let header = if io::Format::Json == format_of(input) {
        Vec::new()
    } else {
        io::csv_header(input)?
    };
    let is_spectra = header.iter().any(|h| h == "counts")
        || (header.is_empty() && io::read_stark_spectra(input).is_ok());
    if !is_spectra {
        return Ok((io::read_trajectory(input)?, false));
    }
    let spectra = io::read_stark_spectra(input)?;
    let points = spectra
        .iter()
        .map(|(f, s)| {
            let fit = fit_peak(s, shape).map_err(|e| CliError::Numerical(format!("peak at {f} MV/m: {e}")))?;
            Ok(StarkPoint {
                field: *f,
                center: fit.center(),
                sigma: fit.center_sigma(),
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    Ok((points, true))
}

fn format_of(path: &Path) -> Format {
    match path.extension().and_then(|e| e.to_str()) {
        Some(e) if e.eq_ignore_ascii_case("json") => Format::Json,
        _ => Format::Csv,
    }
}

fn fit_stark_cmd(ctx: &Context, a: &FitStarkArgs) -> Result<(), CliError> {
    require_input(&a.input)?;
    let (points, from_spectra) = load_stark_points(&a.input, a.shape.into())?;
    let opts = StarkFitOptions {
        weighted: !a.unweighted,
        bootstrap_resamples: a.bootstrap,
        bootstrap_seed: a.seed,
        ..StarkFitOptions::default()
    };
    let report = fit_stark_trajectory(&points, a.order, &opts)?;
    let name = a.name.clone().unwrap_or_else(|| format!("stark_fit_order{}", a.order));
    io::write_json(&ctx.json(&name), &report)?;
    let sc = Sidecar::new("fit stark", (a.bootstrap > 0).then_some(a.seed), a);
    if from_spectra {
        let p = ctx.table(&format!("{name}_points"));
        io::write_trajectory(&p, &points)?;
        io::write_sidecar(&p, &sc)?;
    }
    let (lo, hi) = report.field_range;
    let curve: Vec<CurveRow> = dense(lo, hi, 501)
        .into_iter()
        .map(|x| CurveRow {
            x,
            model: report.offset + report.coeffs.shift(x),
        })
        .collect();
    ctx.write_rows(&format!("{name}_curve"), &curve, &sc)?;
    print_stark(&report);
    Ok(())
}

fn print_stark(r: &StarkFitReport) {
    let c = r.coeffs.as_array();
    let s = r.coeff_sigmas.as_array();
    println!("order {} fit over {:.1}..{:.1} MV/m", r.order, r.field_range.0, r.field_range.1);
    let b = r.bootstrap.as_ref().map(|b| b.coeff_sigmas.as_array());
    for k in 0..r.order {
        match b {
            Some(b) => println!("  c{} = {:.6e} ± {:.2e} (bootstrap {:.2e})", k + 1, c[k], s[k], b[k]),
            None => println!("  c{} = {:.6e} ± {:.2e}", k + 1, c[k], s[k]),
        }
    }
    println!(
        "  Δμ = {:.4e} ± {:.1e} D, Δα = {:.4} ± {:.4} Å³ (Δα/2 = {:.4})",
        r.physical.delta_mu,
        r.physical_sigmas.delta_mu,
        r.physical.delta_alpha,
        r.physical_sigmas.delta_alpha,
        r.physical.delta_alpha_half()
    );
    println!("  higher_order_fraction = {:.4}", r.higher_order_fraction);
}

fn fit_linewidth_cmd(ctx: &Context, a: &FitLinewidthArgs) -> Result<(), CliError> {
    require_input(&a.input)?;
    let coeffs = match (&a.coeffs, &a.stark_report) {
        (Some(c), _) => {
            let arr: [f64; 4] = c
                .as_slice()
                .try_into()
                .map_err(|_| CliError::Usage("--coeffs needs four values".into()))?;
            StarkCoefficients::from_array(arr)
        }
        (None, Some(p)) => {
            require_input(p)?;
            io::read_json::<StarkFitReport>(p)?.coeffs
        }
        (None, None) => StarkCoefficients::reference(),
    };
    let points = io::read_linewidths(&a.input)?;
    let fit = fit_linewidth_vs_field(&points, &coeffs)?;
    io::write_json(&ctx.json(&a.name), &fit)?;
    let lo = points.iter().map(|p| p.x).fold(f64::MAX, f64::min);
    let hi = points.iter().map(|p| p.x).fold(f64::MIN, f64::max);
    let curve: Vec<CurveRow> = linewidth_curve(&fit, &coeffs, &dense(lo, hi, 401))
        .into_iter()
        .map(|(x, model)| CurveRow { x, model })
        .collect();
    let sc = Sidecar::new("fit linewidth", None, a).with("coeffs", &coeffs);
    ctx.write_rows(&format!("{}_curve", a.name), &curve, &sc)?;
    println!(
        "F_rms = {:.3} ± {:.3} MV/m, Γ_L = {:.2} ± {:.2} MHz",
        fit.f_rms, fit.f_rms_sigma, fit.gamma_l, fit.gamma_l_sigma
    );
    Ok(())
}

fn fit_g2_cmd(ctx: &Context, a: &FitG2Args) -> Result<(), CliError> {
    require_input(&a.input)?;
    let curves = io::read_g2(&a.input)?;
    let init = TwoLevelParams {
        t1: a.t1_ns,
        t2: a.t2_ns,
        rabi: a.rabi_mhz,
        signal_purity: a.purity,
        ..TwoLevelParams::default()
    };
    let opts = G2FitOptions {
        fix_t1: a.fix_t1,
        fix_t2: a.fix_t2,
        fix_rabi: a.fix_rabi || (curves.len() == 1 && !a.fix_t1 && !a.fix_t2),
        fix_purity: a.fix_purity,
        ..G2FitOptions::default()
    };
    let fit = fit_g2(&curves, &init, &opts)?;
    io::write_json(&ctx.json(&a.name), &fit)?;
    let mut rows = Vec::new();
    for (k, c) in curves.iter().enumerate() {
        let tmax = c.tau.last().copied().unwrap_or(0.0);
        let tau = dense(c.tau[0], tmax, 1001);
        let p = TwoLevelParams {
            rabi: fit.params.rabi * c.relative_power.sqrt(),
            ..fit.params
        };
        for (t, g) in tau.iter().zip(simulate_g2(&p, &tau)?) {
            rows.push(G2CurveRow {
                curve: k,
                tau_ns: *t,
                model: g,
            });
        }
    }
    let sc = Sidecar::new("fit g2", None, a).with("options", &opts);
    ctx.write_rows(&format!("{}_curve", a.name), &rows, &sc)?;
    let [s1, s2, sr, sp] = fit.sigmas;
    println!(
        "T1 = {:.3} ± {:.3} ns, T2 = {:.3} ± {:.3} ns, Rabi = {:.2} ± {:.2} MHz, purity = {:.4} ± {:.4}",
        fit.params.t1, s1, fit.params.t2, s2, fit.params.rabi, sr, fit.params.signal_purity, sp
    );
    if !fit.fit.converged {
        return Err(CliError::Numerical("g2 fit did not converge".into()));
    }
    Ok(())
}

#[derive(Serialize)]
struct G2CurveRow {
    curve: usize,
    tau_ns: f64,
    model: f64,
}

fn fit_series_cmd(ctx: &Context, a: &FitSeriesArgs) -> Result<(), CliError> {
    require_input(&a.input)?;
    let series = io::read_series(&a.input)?;
    let report = analyze_scan_series(&series)?;
    io::write_json(&ctx.json(&a.name), &report)?;
    let sc = Sidecar::new("fit series", None, a);
    ctx.write_rows(&format!("{}_scans", a.name), &report.scans, &sc)?;
    println!(
        "{} scans ({} failed) at {} MV/m: mean FWHM {:.2} ± {:.2} MHz, centre std {:.2} MHz, predicted {:.2} MHz",
        report.n_scans,
        report.n_failed,
        report.bias_field,
        report.mean_fwhm,
        report.fwhm_std,
        report.center_std,
        report.predicted_width
    );
    Ok(())
}

fn cmd_population(ctx: &Context, a: &PopulationArgs) -> Result<(), CliError> {
    let stem = |p: &Path| {
        p.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    };
    let mut reports: Vec<(String, StarkFitReport)> = Vec::new();
    for p in &a.reports {
        require_input(p)?;
        reports.push((stem(p), io::read_json(p)?));
    }
    for p in &a.trajectories {
        require_input(p)?;
        let points = io::read_trajectory(p)?;
        reports.push((stem(p), fit_stark_trajectory(&points, a.order, &StarkFitOptions::default())?));
    }
    let (rows, summary) = summarize_population(&reports)?;
    let sc = Sidecar::new("population", None, a).with("summary", &summary);
    ctx.write_rows(&a.name, &rows, &sc)?;
    io::write_json(&ctx.json(&format!("{}_summary", a.name)), &summary)?;
    println!("{:>8} {:>14} {:>12} {:>10} {:>10}", "emitter", "Δμ D", "σ", "Δα Å³", "σ");
    for r in &rows {
        println!(
            "{:>8} {:>14.4e} {:>12.2e} {:>10.4} {:>10.4}",
            r.emitter, r.delta_mu_debye, r.delta_mu_sigma_debye, r.delta_alpha_a3, r.delta_alpha_sigma_a3
        );
    }
    println!(
        "mean Δμ = {:.3e} ± {:.1e} D, mean Δα = {:.4} ± {:.4} Å³ (Δα/2 = {:.4})",
        summary.delta_mu_debye.mean,
        summary.delta_mu_debye.sem,
        summary.delta_alpha_a3.mean,
        summary.delta_alpha_a3.sem,
        summary.delta_alpha_half_a3.mean
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_parsing() {
        let s: Sweep = "-250:250:26".parse().unwrap();
        let v = s.values();
        assert_eq!(v.len(), 26);
        assert_eq!(v[0], -250.0);
        assert_eq!(v[25], 250.0);
        assert_eq!(v[1], -230.0);
        assert!("1:2".parse::<Sweep>().is_err());
        assert!("1:2:0".parse::<Sweep>().is_err());
        assert_eq!("5:9:1".parse::<Sweep>().unwrap().values(), vec![5.0]);
    }

    fn starkfit(out: &Path, args: &[&str]) -> i32 {
        let mut all = vec!["starkfit", "--out", out.to_str().unwrap()];
        all.extend_from_slice(args);
        run(all)
    }

    #[test]
    fn field_writes_map_and_scales_with_voltage() {
        let dir = tempfile::tempdir().unwrap();
        let coarse = ["--depth-nm", "250", "--grid-um", "0.05"];
        let mut args = vec!["field", "--gap-um", "2", "--voltage", "200", "--sweep", "0:200:3"];
        args.extend_from_slice(&coarse);
        assert_eq!(starkfit(dir.path(), &args), 0);
        assert_eq!(
            io::csv_header(&dir.path().join("fieldmap.csv")).unwrap(),
            ["x_um", "y_um", "potential_v", "fx_mv_per_m", "fy_mv_per_m"]
        );
        assert!(dir.path().join("fieldmap.meta.json").is_file());
        let rows: Vec<BiasRow> = io::read_rows(&dir.path().join("bias_sweep.csv")).unwrap();
        let local: Vec<f64> = rows.iter().map(|r| r.local_field_mv_per_m).collect();
        assert_eq!(local[0], 0.0);
        assert!(local[2] > 0.0);
        assert!((local[1] / local[2] - 0.5).abs() < 1e-12);

        let mut zero = vec!["field", "--voltage", "0"];
        zero.extend_from_slice(&coarse);
        assert_eq!(starkfit(dir.path(), &zero), 0);
        #[derive(serde::Deserialize)]
        struct MapRow {
            fx_mv_per_m: f64,
            fy_mv_per_m: f64,
        }
        let map: Vec<MapRow> = io::read_rows(&dir.path().join("fieldmap.csv")).unwrap();
        assert!(map.iter().all(|r| r.fx_mv_per_m == 0.0 && r.fy_mv_per_m == 0.0));
    }

    #[test]
    fn simulate_is_byte_identical_under_a_seed() {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        for d in [&a, &b] {
            assert_eq!(starkfit(d.path(), &["simulate", "stark", "--fields", "-250:250:26", "--seed", "7"]), 0);
            assert_eq!(starkfit(d.path(), &["simulate", "series", "--n", "20", "--field", "250", "--seed", "7"]), 0);
        }
        for f in ["stark_spectra.csv", "stark_spectra.meta.json", "series.csv", "series.meta.json"] {
            let x = std::fs::read(a.path().join(f)).unwrap();
            let y = std::fs::read(b.path().join(f)).unwrap();
            assert_eq!(x, y, "{f}");
        }
        let spectra = io::read_stark_spectra(&a.path().join("stark_spectra.csv")).unwrap();
        assert_eq!(spectra.len(), 26);
        let sc: Sidecar = io::read_json(&a.path().join("stark_spectra.meta.json")).unwrap();
        assert_eq!(sc.seed, Some(7));
        assert_eq!(sc.truth.unwrap()["c2"], serde_json::json!(StarkCoefficients::reference().c2));
    }

    #[test]
    fn stark_fit_recovers_the_sidecar_truth() {
        let dir = tempfile::tempdir().unwrap();
        let d = dir.path();
        let sim = ["simulate", "stark", "--seed", "3", "--f-rms-mv-per-m", "0"];
        assert_eq!(starkfit(d, &sim), 0);
        let input = d.join("stark_spectra.csv");
        let input = input.to_str().unwrap();
        assert_eq!(starkfit(d, &["fit", "stark", "--input", input, "--order", "2"]), 0);
        assert_eq!(starkfit(d, &["fit", "stark", "--input", input, "--order", "4"]), 0);
        let q: StarkFitReport = io::read_json(&d.join("stark_fit_order2.json")).unwrap();
        let r: StarkFitReport = io::read_json(&d.join("stark_fit_order4.json")).unwrap();
        assert_eq!(q.order, 2);
        assert_eq!(q.higher_order_fraction, 0.0);
        assert!(r.higher_order_fraction > 0.2);
        let truth = StarkCoefficients::reference().as_array();
        let (c, s) = (r.coeffs.as_array(), r.coeff_sigmas.as_array());
        for k in 0..4 {
            assert!((c[k] - truth[k]).abs() < 4.0 * s[k], "c{}: {} vs {}", k + 1, c[k], truth[k]);
        }
        let curve: Vec<serde_json::Value> = io::read_rows(&d.join("stark_fit_order4_curve.csv")).unwrap();
        assert_eq!(curve.len(), 501);

        // the extracted line positions are themselves a valid input
        let points = d.join("stark_fit_order4_points.csv");
        let args = ["fit", "stark", "--input", points.to_str().unwrap(), "--name", "again"];
        assert_eq!(starkfit(d, &args), 0);
        let again: StarkFitReport = io::read_json(&d.join("again.json")).unwrap();
        assert!((again.coeffs.c2 / r.coeffs.c2 - 1.0).abs() < 1e-9);
        assert!(again.bootstrap.is_none());

        let args = ["fit", "stark", "--input", points.to_str().unwrap(), "--name", "boot", "--bootstrap", "50"];
        assert_eq!(starkfit(d, &args), 0);
        let boot: StarkFitReport = io::read_json(&d.join("boot.json")).unwrap();
        let b = boot.bootstrap.unwrap();
        assert_eq!(b.resamples, 50);
        assert!(b.coeff_sigmas.as_array().iter().all(|s| *s > 0.0));
    }

    #[test]
    fn linewidth_g2_and_series_pipelines() {
        let dir = tempfile::tempdir().unwrap();
        let d = dir.path();
        let p = |f: &str| d.join(f).to_str().unwrap().to_string();

        assert_eq!(starkfit(d, &["simulate", "linewidth", "--seed", "4"]), 0);
        assert_eq!(starkfit(d, &["fit", "linewidth", "--input", &p("linewidths.csv")]), 0);
        let lw: crate::fit::LinewidthFit = io::read_json(&d.join("linewidth_fit.json")).unwrap();
        assert!((lw.f_rms - 2.4).abs() < 3.0 * lw.f_rms_sigma + 1e-9, "{lw:?}");
        assert!((lw.gamma_l - 60.0).abs() < 3.0 * lw.gamma_l_sigma, "{lw:?}");

        assert_eq!(starkfit(d, &["simulate", "g2", "--coincidences", "0"]), 0);
        let args = ["fit", "g2", "--input", &p("g2.csv"), "--t1-ns", "7", "--t2-ns", "3.5", "--purity", "0.95"];
        assert_eq!(starkfit(d, &args), 0);
        let g: crate::fit::G2Fit = io::read_json(&d.join("g2_fit.json")).unwrap();
        assert!((g.params.t1 / 6.0 - 1.0).abs() < 1e-4 && (g.params.t2 / 4.0 - 1.0).abs() < 1e-4);

        assert_eq!(starkfit(d, &["simulate", "series", "--n", "40", "--field", "250", "--seed", "5"]), 0);
        assert_eq!(starkfit(d, &["fit", "series", "--input", &p("series.csv")]), 0);
        let rep: crate::fit::DiffusionReport = io::read_json(&d.join("diffusion.json")).unwrap();
        assert_eq!(rep.n_scans + rep.n_failed, 40);
        assert!(rep.center_std > 30.0, "{}", rep.center_std);
    }

    #[test]
    fn population_from_simulated_trajectories() {
        let dir = tempfile::tempdir().unwrap();
        let d = dir.path();
        assert_eq!(starkfit(d, &["simulate", "population", "--seed", "5"]), 0);
        let mut args: Vec<String> = ["population", "--trajectories"].iter().map(|s| s.to_string()).collect();
        for k in 1..=11 {
            args.push(d.join(format!("E{k:02}.csv")).to_str().unwrap().to_string());
        }
        let refs: Vec<&str> = args.iter().map(String::as_str).collect();
        assert_eq!(starkfit(d, &refs), 0);
        let s: crate::population::PopulationSummary = io::read_json(&d.join("population_summary.json")).unwrap();
        assert_eq!(s.n_emitters, 11);
        assert!(s.delta_mu_debye.mean.abs() < 3.0 * s.delta_mu_debye.sem);
        assert!((s.delta_alpha_half_a3.mean / 0.23 - 1.0).abs() < 0.1);
        let rows: Vec<crate::population::PopulationRow> = io::read_rows(&d.join("population.csv")).unwrap();
        assert_eq!(rows[0].emitter, "E01");
        assert_eq!(starkfit(d, &["population"]), 1);
    }

    #[test]
    fn json_format_and_missing_input() {
        let dir = tempfile::tempdir().unwrap();
        let d = dir.path();
        assert_eq!(starkfit(d, &["--format", "json", "simulate", "stark", "--fields", "-100:100:11"]), 0);
        let input = d.join("stark_spectra.json");
        assert!(input.is_file());
        assert_eq!(starkfit(d, &["fit", "stark", "--input", input.to_str().unwrap(), "--order", "2"]), 0);
        let missing = d.join("nope.csv");
        assert_eq!(starkfit(d, &["fit", "peak", "--input", missing.to_str().unwrap()]), 1);
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(run(["starkfit", "field", "--gap-um", "-1", "--no-map", "--out", "/tmp"]), 1);
        assert_eq!(run(["starkfit", "bogus"]), 1);
        assert_eq!(run(["starkfit", "--help"]), 0);
    }

    #[test]
    fn numerical_errors_exit_two() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().to_str().unwrap();
        assert_eq!(
            run([
                "starkfit", "field", "--gap-um", "2", "--depth-nm", "250", "--grid-um", "0.05", "--max-iter", "2",
                "--no-map", "--out", out
            ]),
            2
        );
    }
}

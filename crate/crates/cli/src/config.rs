//! Command-line surface: flags, defaults, and the helpers that turn them
//! into validated core objects.

use std::path::PathBuf;
use std::sync::Arc;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};

use magnls_core::dynamics::EvolveConfig;
use magnls_core::field_grid::{Grid, Params, MASS_CRITICAL_ALPHA};

use crate::Failure;

#[derive(Parser)]
#[command(
    name = "magnls",
    version,
    about = "Spectral toolkit for the 3D nonlinear Schrödinger equation in a constant magnetic field",
    after_help = "The environment variable MAGNLS_THREADS caps the worker count; results do not depend on it."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Solve the radial soliton profile Q and write its sharp constants.
    SolveQ(SolveQArgs),
    /// Run the seeded identity and inequality property suites.
    Verify(VerifyArgs),
    /// Classify a datum: global-existence versus blow-up certificates.
    Classify(ClassifyArgs),
    /// Integrate a datum and record the diagnostics series.
    Evolve(EvolveArgs),
    /// Compute a variational ground state and archive it.
    GroundState(GroundStateArgs),
    /// Dilation-perturbation experiment on a ground state.
    Instability(InstabilityArgs),
    /// Paired global/blow-up scenario at a dichotomy power.
    DichotomySuite(DichotomyArgs),
}

// ---------------------------------------------------------------------------
// Shared flag groups
// ---------------------------------------------------------------------------

/// How far a requested `--alpha` may sit from 4/3 and still mean the exact
/// mass-critical power (so `--alpha 1.3333` selects the critical theory).
pub const ALPHA_SNAP_TOL: f64 = 1e-3;

/// Returns the effective power: requests within [`ALPHA_SNAP_TOL`] of 4/3
/// snap to the exact value, everything else passes through.
pub fn snap_alpha(alpha: f64) -> f64 {
    if (alpha - MASS_CRITICAL_ALPHA).abs() <= ALPHA_SNAP_TOL {
        MASS_CRITICAL_ALPHA
    } else {
        alpha
    }
}

#[derive(Args)]
pub struct PhysArgs {
    /// Nonlinearity power α ∈ (0,4); values within 1e-3 of 4/3 snap to the
    /// exact mass-critical power.
    #[arg(long)]
    pub alpha: f64,
    /// Magnetic field strength b ≠ 0.
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub b: f64,
}

impl PhysArgs {
    pub fn params(&self) -> Result<Params, Failure> {
        Ok(Params::new(self.b, snap_alpha(self.alpha))?)
    }
}

#[derive(Args)]
pub struct GridArgs {
    /// Points per axis: one value for a cube, or three comma-separated.
    #[arg(long, default_value = "64", value_parser = parse_dims)]
    pub grid: Triple<usize>,
    /// Half-widths of the periodic box, one value or three.
    #[arg(long = "box", default_value = "8", value_parser = parse_half_widths)]
    pub box_half_widths: Triple<f64>,
}

impl GridArgs {
    pub fn build(&self) -> Result<Arc<Grid>, Failure> {
        Ok(Grid::new(self.grid.0, self.box_half_widths.0)?)
    }
}

/// Evolution controls shared by every command that integrates in time.
#[derive(Args)]
pub struct EvolveFlags {
    /// Initial (and, with adaptation, maximal) time step.
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    /// Integration horizon.
    #[arg(long, default_value_t = 1.0)]
    pub t_final: f64,
    /// Disable adaptive step shrinking.
    #[arg(long)]
    pub no_adapt: bool,
    /// Gradient-growth factor that, together with the tail criterion,
    /// declares numerical blow-up.
    #[arg(long, default_value_t = 40.0)]
    pub blowup_grad_ratio: f64,
    /// Spectral tail fraction past which the grid has lost the solution.
    #[arg(long, default_value_t = 1e-4)]
    pub tail_fraction_max: f64,
    /// Record diagnostics every this many steps.
    #[arg(long, default_value_t = 10)]
    pub record_stride: usize,
}

impl EvolveFlags {
    pub fn build(&self) -> Result<EvolveConfig, Failure> {
        let cfg = EvolveConfig {
            dt_initial: self.dt,
            t_final: self.t_final,
            adapt: !self.no_adapt,
            blowup_grad_ratio: self.blowup_grad_ratio,
            tail_fraction_max: self.tail_fraction_max,
            record_stride: self.record_stride,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
pub struct OutArgs {
    /// Directory for reports and artifacts (created if missing).
    #[arg(long, default_value = "magnls-out")]
    pub out: PathBuf,
}

/// Initial-data constructor selection plus its parameters. Which parameter
/// flags apply depends on `--data`; the rest are ignored.
#[derive(Args)]
pub struct DataArgs {
    /// Initial-data constructor.
    #[arg(long, value_enum)]
    pub data: DataKind,
    /// Amplitude factor a (scaled-soliton, gaussian).
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub amp: f64,
    /// Dilation scale λ (scaled-soliton, bump).
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    /// Center offset, one value or three (scaled-soliton, gaussian).
    #[arg(long, default_value = "0", value_parser = parse_point, allow_hyphen_values = true)]
    pub center: Triple<f64>,
    /// Target mass c (bump).
    #[arg(long, default_value_t = 1.0)]
    pub mass: f64,
    /// Gaussian widths, one value or three.
    #[arg(long, default_value = "1", value_parser = parse_half_widths)]
    pub widths: Triple<f64>,
    /// Quadratic phase chirp μ (gaussian); μ > 0 drives inward flux.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub chirp: f64,
    /// Checkpoint file to load (data = checkpoint).
    #[arg(long, value_name = "FILE")]
    pub from_checkpoint: Option<PathBuf>,
    /// Directory for cached soliton profiles (default: <out>/cache).
    #[arg(long, value_name = "DIR")]
    pub cache: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, PartialEq, Eq, Debug)]
pub enum DataKind {
    /// a·λ^{3/2}·Q(λ(x−center)) from the solved soliton profile.
    ScaledSoliton,
    /// Transverse ground Gaussian times a longitudinal bump of mass c.
    #[value(alias = "transverse-gaussian-bump")]
    Bump,
    /// Anisotropic Gaussian packet with a quadratic phase chirp.
    Gaussian,
    /// A field stored by a previous run (grid and params come from the file).
    Checkpoint,
}

// ---------------------------------------------------------------------------
// Per-command argument sets
// ---------------------------------------------------------------------------

#[derive(Args)]
pub struct SolveQArgs {
    /// Nonlinearity power α ∈ (0,4); snaps to 4/3 as elsewhere.
    #[arg(long)]
    pub alpha: f64,
    /// Shooting tolerance for the radial profile.
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args)]
pub struct VerifyArgs {
    /// Seed for the sample streams.
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Samples per suite.
    #[arg(long, default_value_t = 1000)]
    pub samples: u64,
    /// Points per axis for the sampled fields.
    #[arg(long, default_value = "24", value_parser = parse_dims)]
    pub grid: Triple<usize>,
    /// Half-widths of the sample box.
    #[arg(long = "box", default_value = "7", value_parser = parse_half_widths)]
    pub box_half_widths: Triple<f64>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args)]
pub struct ClassifyArgs {
    #[command(flatten)]
    pub phys: PhysArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args)]
pub struct EvolveArgs {
    #[command(flatten)]
    pub phys: PhysArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub evolve: EvolveFlags,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args)]
#[command(group = ArgGroup::new("problem").args(["omega", "mass"]).required(true))]
pub struct GroundStateArgs {
    #[command(flatten)]
    pub phys: PhysArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Frequency ω for the action problem (needs ω > −|b|).
    #[arg(long, allow_negative_numbers = true)]
    pub omega: Option<f64>,
    /// Mass constraint c for the energy problems.
    #[arg(long)]
    pub mass: Option<f64>,
    /// Magnetic-kinetic cap m for the ball-constrained problem (with --mass).
    #[arg(long, requires = "mass")]
    pub cap: Option<f64>,
    /// Stationarity tolerance, relative to √mass.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args)]
#[command(group = ArgGroup::new("source").args(["from", "omega"]).required(true))]
pub struct InstabilityArgs {
    /// Ground-state archive (a previous `ground-state` output directory).
    #[arg(long, value_name = "DIR")]
    pub from: Option<PathBuf>,
    /// Solve the action problem inline at this frequency instead.
    #[arg(long, allow_negative_numbers = true)]
    pub omega: Option<f64>,
    /// Nonlinearity power for the inline solve (required with --omega).
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Magnetic field strength for the inline solve.
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub b: f64,
    /// Points per axis for the inline solve.
    #[arg(long, default_value = "64", value_parser = parse_dims)]
    pub grid: Triple<usize>,
    /// Half-widths of the box for the inline solve.
    #[arg(long = "box", default_value = "10", value_parser = parse_half_widths)]
    pub box_half_widths: Triple<f64>,
    /// Stationarity tolerance for the inline solve.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    /// Dilation factor applied to the ground state before evolving.
    #[arg(long, default_value_t = 1.05)]
    pub lambda: f64,
    #[command(flatten)]
    pub evolve: EvolveFlags,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args)]
pub struct DichotomyArgs {
    #[command(flatten)]
    pub phys: PhysArgs,
    /// Points per axis: one value for a cube, or three comma-separated.
    /// The default resolves the default data pair at the critical power.
    #[arg(long, default_value = "80", value_parser = parse_dims)]
    pub grid: Triple<usize>,
    /// Half-widths of the periodic box, one value or three.
    #[arg(long = "box", default_value = "8", value_parser = parse_half_widths)]
    pub box_half_widths: Triple<f64>,
    /// Mass ratio M(u₀)/M(Q) of the global-side datum (default 0.9 at the
    /// critical power, 0.75 above it).
    #[arg(long)]
    pub ratio_global: Option<f64>,
    /// Dilation scale of the global-side datum (default 1).
    #[arg(long)]
    pub lambda_global: Option<f64>,
    /// Mass ratio of the blow-up-side datum (default 1.44).
    #[arg(long)]
    pub ratio_blowup: Option<f64>,
    /// Dilation scale of the blow-up-side datum (default 1.15 at the critical
    /// power so the reduced energy is negative, 1 above it).
    #[arg(long)]
    pub lambda_blowup: Option<f64>,
    /// Initial time step.
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    /// Horizon for the global-side run.
    #[arg(long, default_value_t = 5.0)]
    pub t_final: f64,
    /// Gradient-growth factor of the blow-up detector (collapse runs ride
    /// the detector, so the default is tighter than `evolve`'s).
    #[arg(long, default_value_t = 2.0)]
    pub blowup_grad_ratio: f64,
    /// Spectral tail fraction past which the grid has lost the solution.
    #[arg(long, default_value_t = 1e-2)]
    pub tail_fraction_max: f64,
    /// Record diagnostics every this many steps.
    #[arg(long, default_value_t = 10)]
    pub record_stride: usize,
    /// Directory for cached soliton profiles (default: <out>/cache).
    #[arg(long, value_name = "DIR")]
    pub cache: Option<PathBuf>,
    #[command(flatten)]
    pub out: OutArgs,
}

// ---------------------------------------------------------------------------
// Triple-valued flags
// ---------------------------------------------------------------------------

/// A per-axis triple parsed from `v` (all axes) or `v1,v2,v3`.
#[derive(Clone, Copy, Debug)]
pub struct Triple<T>(pub [T; 3]);

fn split3<T: Copy + std::str::FromStr>(s: &str, what: &str) -> Result<[T; 3], String> {
    let parts: Vec<&str> = s.split(',').collect();
    let parse = |t: &str| {
        t.trim()
            .parse::<T>()
            .map_err(|_| format!("cannot parse {what} component {t:?}"))
    };
    match parts.as_slice() {
        [one] => {
            let v = parse(one)?;
            Ok([v, v, v])
        }
        [a, b, c] => Ok([parse(a)?, parse(b)?, parse(c)?]),
        _ => Err(format!(
            "{what} takes one value or three comma-separated values, got {:?}",
            s
        )),
    }
}

fn parse_dims(s: &str) -> Result<Triple<usize>, String> {
    Ok(Triple(split3::<usize>(s, "--grid")?))
}

fn parse_half_widths(s: &str) -> Result<Triple<f64>, String> {
    let v = split3::<f64>(s, "width")?;
    for &w in &v {
        if !(w > 0.0 && w.is_finite()) {
            return Err(format!("widths must be positive and finite, got {w}"));
        }
    }
    Ok(Triple(v))
}

fn parse_point(s: &str) -> Result<Triple<f64>, String> {
    let v = split3::<f64>(s, "--center")?;
    for &x in &v {
        if !x.is_finite() {
            return Err(format!("center components must be finite, got {x}"));
        }
    }
    Ok(Triple(v))
}

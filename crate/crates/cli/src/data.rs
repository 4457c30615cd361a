//! Initial-data construction: resolving the constructor flags into a spec,
//! the resolution guard, and the soliton-profile cache.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde_json::{json, Value};

use magnls_core::field_grid::{
    gaussian_packet, read_checkpoint, sample_radial, transverse_gaussian_bump, Field, Grid,
    Params,
};
use magnls_core::soliton_q::{load_or_solve_cached, RadialProfile};

use crate::config::{DataArgs, DataKind, GridArgs, PhysArgs};
use crate::Failure;

/// Tolerance at which constructor profiles are solved and cached.
pub const PROFILE_TOL: f64 = 1e-10;

/// Minimum number of grid points across a datum's full width at half maximum.
pub const MIN_POINTS_PER_WIDTH: f64 = 8.0;

const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_4; // 2·√(2 ln 2)

/// A fully resolved constructor: every number the build uses, in one place,
/// echoed verbatim into reports.
#[derive(Clone, Debug)]
pub enum DataSpec {
    ScaledSoliton {
        amp: f64,
        lambda: f64,
        center: [f64; 3],
    },
    Bump {
        mass: f64,
        lambda: f64,
    },
    Gaussian {
        widths: [f64; 3],
        amp: f64,
        chirp: f64,
        center: [f64; 3],
    },
    Checkpoint {
        path: PathBuf,
    },
}

impl DataSpec {
    pub fn resolve(args: &DataArgs) -> Result<DataSpec, Failure> {
        let need_positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(v)
            } else {
                Err(Failure::config(format!(
                    "{name} must be positive and finite, got {v}"
                )))
            }
        };
        let need_nonzero = |name: &str, v: f64| {
            if v.is_finite() && v != 0.0 {
                Ok(v)
            } else {
                Err(Failure::config(format!(
                    "{name} must be nonzero and finite, got {v}"
                )))
            }
        };
        match args.data {
            DataKind::ScaledSoliton => Ok(DataSpec::ScaledSoliton {
                amp: need_nonzero("--amp", args.amp)?,
                lambda: need_positive("--lambda", args.lambda)?,
                center: args.center.0,
            }),
            DataKind::Bump => Ok(DataSpec::Bump {
                mass: need_positive("--mass", args.mass)?,
                lambda: need_positive("--lambda", args.lambda)?,
            }),
            DataKind::Gaussian => {
                if !args.chirp.is_finite() {
                    return Err(Failure::config(format!(
                        "--chirp must be finite, got {}",
                        args.chirp
                    )));
                }
                Ok(DataSpec::Gaussian {
                    widths: args.widths.0,
                    amp: need_nonzero("--amp", args.amp)?,
                    chirp: args.chirp,
                    center: args.center.0,
                })
            }
            DataKind::Checkpoint => {
                let path = args.from_checkpoint.clone().ok_or_else(|| {
                    Failure::config("--data checkpoint requires --from-checkpoint")
                })?;
                Ok(DataSpec::Checkpoint { path })
            }
        }
    }

    /// The spec as a JSON fragment for report provenance.
    pub fn echo(&self) -> Value {
        match self {
            DataSpec::ScaledSoliton {
                amp,
                lambda,
                center,
            } => json!({
                "kind": "scaled-soliton",
                "amp": amp,
                "lambda": lambda,
                "center": center,
            }),
            DataSpec::Bump { mass, lambda } => json!({
                "kind": "bump",
                "mass": mass,
                "lambda": lambda,
            }),
            DataSpec::Gaussian {
                widths,
                amp,
                chirp,
                center,
            } => json!({
                "kind": "gaussian",
                "widths": widths,
                "amp": amp,
                "chirp": chirp,
                "center": center,
            }),
            DataSpec::Checkpoint { path } => json!({
                "kind": "checkpoint",
                "path": path.display().to_string(),
            }),
        }
    }
}

/// A command's input field together with the parameters it belongs to.
pub struct Datum {
    pub field: Field,
    pub p: Params,
    /// Time stored with a checkpoint; zero for synthesized data.
    pub t0: f64,
    pub spec: DataSpec,
}

/// Builds the requested datum. Synthesized constructors use the flags' grid
/// and parameters and pass the resolution guard first; checkpoint data
/// brings its own grid, and the physics flags must agree with the file.
pub fn build_datum(
    args: &DataArgs,
    phys: &PhysArgs,
    grid_args: &GridArgs,
    out: &Path,
) -> Result<Datum, Failure> {
    let spec = DataSpec::resolve(args)?;
    if let DataSpec::Checkpoint { path } = &spec {
        let (field, p, t0) = read_checkpoint(path)?;
        let requested = phys.params()?;
        if (requested.alpha() - p.alpha()).abs() > 1e-9 {
            return Err(Failure::config(format!(
                "--alpha {} disagrees with the checkpoint's alpha {}",
                requested.alpha(),
                p.alpha()
            )));
        }
        if requested.b() != p.b() {
            return Err(Failure::config(format!(
                "--b {} disagrees with the checkpoint's b {}",
                requested.b(),
                p.b()
            )));
        }
        return Ok(Datum {
            field,
            p,
            t0,
            spec,
        });
    }

    let p = phys.params()?;
    let grid = grid_args.build()?;
    let cache = cache_dir(args, out);
    check_resolution(&spec, &grid, &p, &cache)?;
    let field = match &spec {
        DataSpec::ScaledSoliton {
            amp,
            lambda,
            center,
        } => {
            let profile = profile_for(&cache, p.alpha())?;
            sample_radial(&profile, &grid, *amp, *lambda, *center)?
        }
        DataSpec::Bump { mass, lambda } => transverse_gaussian_bump(&grid, &p, *mass, *lambda)?,
        DataSpec::Gaussian {
            widths,
            amp,
            chirp,
            center,
        } => gaussian_packet(&grid, *widths, *amp, *chirp, *center)?,
        DataSpec::Checkpoint { .. } => unreachable!("handled above"),
    };
    Ok(Datum {
        field,
        p,
        t0: 0.0,
        spec,
    })
}

pub fn cache_dir(args: &DataArgs, out: &Path) -> PathBuf {
    args.cache.clone().unwrap_or_else(|| out.join("cache"))
}

/// Loads (or solves and caches) the soliton profile for `alpha`.
pub fn profile_for(cache: &Path, alpha: f64) -> Result<RadialProfile, Failure> {
    fs::create_dir_all(cache)?;
    Ok(load_or_solve_cached(cache, alpha, PROFILE_TOL)?)
}

/// Radius where the profile falls to half its central value.
pub fn half_max_radius(profile: &RadialProfile) -> f64 {
    let q0 = profile.q0();
    let r_max = profile.r_max();
    let n = 4096;
    let step = r_max / n as f64;
    let mut lo = 0.0;
    let mut hi = r_max;
    for i in 1..=n {
        let r = i as f64 * step;
        if profile.value(r) < 0.5 * q0 {
            lo = r - step;
            hi = r;
            break;
        }
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if profile.value(mid) < 0.5 * q0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Rejects data the grid cannot carry: every axis must put at least
/// [`MIN_POINTS_PER_WIDTH`] points across the datum's width at half maximum.
pub fn check_resolution(
    spec: &DataSpec,
    grid: &Arc<Grid>,
    p: &Params,
    cache: &Path,
) -> Result<(), Failure> {
    // (full width, the flag to adjust) per axis
    let widths: [(f64, &str); 3] = match spec {
        DataSpec::ScaledSoliton { lambda, .. } => {
            let profile = profile_for(cache, p.alpha())?;
            let w = 2.0 * half_max_radius(&profile) / lambda;
            [(w, "--lambda"); 3]
        }
        DataSpec::Gaussian { widths, .. } => {
            [0, 1, 2].map(|j| (FWHM_PER_SIGMA * widths[j], "--widths"))
        }
        DataSpec::Bump { lambda, .. } => {
            let transverse = FWHM_PER_SIGMA * (2.0 / p.b().abs()).sqrt();
            let longitudinal = FWHM_PER_SIGMA / lambda;
            [
                (transverse, "--b"),
                (transverse, "--b"),
                (longitudinal, "--lambda"),
            ]
        }
        DataSpec::Checkpoint { .. } => return Ok(()),
    };
    let h = grid.spacings();
    for j in 0..3 {
        let (w, flag) = widths[j];
        let points = w / h[j];
        if points < MIN_POINTS_PER_WIDTH {
            return Err(Failure::config(format!(
                "grid too small for the requested datum: its width along axis {j} spans \
                 {points:.1} grid points (needs ≥ {MIN_POINTS_PER_WIDTH}); refine --grid \
                 or adjust {flag}"
            )));
        }
    }
    Ok(())
}

//! Periodic 3D grid, complex field storage, spectral operators, deterministic
//! reductions, random sample generators, and checkpoint I/O.
//!
//! Axis `j` covers `[-L_j, L_j)` with `n_j` uniform cells; grid point `i` maps
//! to `-L_j + i·h_j` (cell-left convention), which makes the DFT wavenumber
//! bookkeeping exact: the discrete frequencies are `k = π·m/L_j` with `m` in
//! the standard symmetric ordering `0, 1, …, n/2−1, −n/2, …, −1`.
//!
//! All reductions (norms, integrals) use fixed-block pairwise summation so
//! diagnostics are bit-identical regardless of thread count.

use std::collections::HashMap;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustfft::{Fft, FftDirection, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::soliton_q::RadialProfile;

/// Physical parameters of the equation: magnetic strength `b` (the field is
/// `(0,0,b)` in the symmetric gauge `A(x) = (b/2)(−x₂, x₁, 0)`) and the
/// nonlinearity power `alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams")]
pub struct Params {
    pub(crate) b: f64,
    pub(crate) alpha: f64,
}

#[derive(Deserialize)]
struct RawParams {
    b: f64,
    alpha: f64,
}

impl TryFrom<RawParams> for Params {
    type Error = Error;
    fn try_from(raw: RawParams) -> Result<Self> {
        Params::new(raw.b, raw.alpha)
    }
}

/// Half-open tolerance for treating `alpha` as exactly mass-critical (4/3).
pub const MASS_CRITICAL_ALPHA: f64 = 4.0 / 3.0;

impl Params {
    /// Validates `b ≠ 0` and `0 < alpha < 4`.
    pub fn new(b: f64, alpha: f64) -> Result<Self> {
        if !b.is_finite() || b == 0.0 {
            return Err(Error::InvalidParams(format!(
                "magnetic strength b must be finite and nonzero, got {b}"
            )));
        }
        if !alpha.is_finite() || alpha <= 0.0 || alpha >= 4.0 {
            return Err(Error::InvalidParams(format!(
                "nonlinearity power alpha must lie in (0, 4), got {alpha}"
            )));
        }
        Ok(Params { b, alpha })
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// True when `alpha` is the mass-critical power 4/3 (within 1e−9).
    pub fn is_mass_critical(&self) -> bool {
        (self.alpha - MASS_CRITICAL_ALPHA).abs() < 1e-9
    }

    /// The scaling exponent `σ_c = (4−α)/(3α−4)`, defined for `α > 4/3`.
    pub fn sigma_c(&self) -> Option<f64> {
        if self.alpha > MASS_CRITICAL_ALPHA + 1e-9 {
            Some((4.0 - self.alpha) / (3.0 * self.alpha - 4.0))
        } else {
            None
        }
    }
}

/// A periodic 3D computational box with spectral transform support.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    dims: [usize; 3],
    half_widths: [f64; 3],
    spacings: [f64; 3],
    wavenumbers: [Vec<f64>; 3],
    deriv_wavenumbers: [Vec<f64>; 3],
    coords: [Vec<f64>; 3],
}

impl Grid {
    /// Builds a grid with `dims[j] ≥ 8` even points per axis covering
    /// `[-half_widths[j], half_widths[j])`.
    pub fn new(dims: [usize; 3], half_widths: [f64; 3]) -> Result<Arc<Grid>> {
        for (j, &n) in dims.iter().enumerate() {
            if n < 8 || n % 2 != 0 {
                return Err(Error::InvalidGrid(format!(
                    "axis {j}: need an even point count >= 8, got {n}"
                )));
            }
        }
        for (j, &l) in half_widths.iter().enumerate() {
            if !l.is_finite() || l <= 0.0 {
                return Err(Error::InvalidGrid(format!(
                    "axis {j}: half-width must be positive and finite, got {l}"
                )));
            }
        }
        if dims.iter().product::<usize>() > (1usize << 28) {
            return Err(Error::InvalidGrid(format!(
                "grid of {} points exceeds the supported size",
                dims.iter().product::<usize>()
            )));
        }
        let spacings = [
            2.0 * half_widths[0] / dims[0] as f64,
            2.0 * half_widths[1] / dims[1] as f64,
            2.0 * half_widths[2] / dims[2] as f64,
        ];
        let wavenumbers: [Vec<f64>; 3] = std::array::from_fn(|j| {
            (0..dims[j])
                .map(|m| {
                    let signed = if m < dims[j] / 2 {
                        m as i64
                    } else {
                        m as i64 - dims[j] as i64
                    };
                    std::f64::consts::PI * signed as f64 / half_widths[j]
                })
                .collect()
        });
        // First-derivative multipliers zero the unpaired Nyquist frequency:
        // `ik` there has no conjugate partner, so keeping it would make the
        // derivative of a real field complex. Even-order symbols (`k²`) keep
        // the full table.
        let deriv_wavenumbers = std::array::from_fn(|j| {
            let mut k = wavenumbers[j].clone();
            k[dims[j] / 2] = 0.0;
            k
        });
        let coords = std::array::from_fn(|j| {
            (0..dims[j])
                .map(|i| -half_widths[j] + i as f64 * spacings[j])
                .collect()
        });
        Ok(Arc::new(Grid {
            dims,
            half_widths,
            spacings,
            wavenumbers,
            deriv_wavenumbers,
            coords,
        }))
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn half_widths(&self) -> [f64; 3] {
        self.half_widths
    }

    pub fn spacings(&self) -> [f64; 3] {
        self.spacings
    }

    /// Total number of grid points.
    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Volume element `h₁h₂h₃` of the uniform quadrature.
    pub fn cell_volume(&self) -> f64 {
        self.spacings[0] * self.spacings[1] * self.spacings[2]
    }

    /// Discrete Fourier frequencies `π·m/L_j` along `axis`, symmetric ordering.
    pub fn wavenumbers(&self, axis: usize) -> &[f64] {
        &self.wavenumbers[axis]
    }

    /// Frequencies for first-derivative multipliers: as [`wavenumbers`],
    /// with the unpaired Nyquist slot zeroed.
    ///
    /// [`wavenumbers`]: Grid::wavenumbers
    pub(crate) fn deriv_wavenumbers(&self, axis: usize) -> &[f64] {
        &self.deriv_wavenumbers[axis]
    }

    /// Coordinates `-L_j + i·h_j` along `axis`.
    pub fn coords(&self, axis: usize) -> &[f64] {
        &self.coords[axis]
    }

    /// Row-major flat index of `(i₁, i₂, i₃)`.
    pub fn index(&self, i1: usize, i2: usize, i3: usize) -> usize {
        (i1 * self.dims[1] + i2) * self.dims[2] + i3
    }

    /// Position of the flat index `idx`.
    pub fn position(&self, idx: usize) -> [f64; 3] {
        let n3 = self.dims[2];
        let n2 = self.dims[1];
        let i3 = idx % n3;
        let i2 = (idx / n3) % n2;
        let i1 = idx / (n2 * n3);
        [self.coords[0][i1], self.coords[1][i2], self.coords[2][i3]]
    }

    pub fn min_half_width(&self) -> f64 {
        self.half_widths.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

/// A complex-valued wavefunction sampled on a [`Grid`].
#[derive(Debug, Clone)]
pub struct Field {
    grid: Arc<Grid>,
    values: Vec<Complex64>,
}

impl Field {
    pub fn zeros(grid: &Arc<Grid>) -> Field {
        Field {
            grid: Arc::clone(grid),
            values: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    /// Wraps raw values; fails if the count does not match the grid.
    pub fn from_values(grid: &Arc<Grid>, values: Vec<Complex64>) -> Result<Field> {
        if values.len() != grid.len() {
            return Err(Error::ShapeMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        Ok(Field {
            grid: Arc::clone(grid),
            values,
        })
    }

    /// Fills a field by evaluating `f` at every grid position (in parallel;
    /// the result is deterministic).
    pub fn from_fn<F>(grid: &Arc<Grid>, f: F) -> Field
    where
        F: Fn([f64; 3]) -> Complex64 + Sync,
    {
        let [_, n2, n3] = grid.dims();
        let mut values = vec![Complex64::new(0.0, 0.0); grid.len()];
        values
            .par_chunks_mut(n3)
            .enumerate()
            .for_each(|(line, chunk)| {
                let i1 = line / n2;
                let i2 = line % n2;
                let x1 = grid.coords(0)[i1];
                let x2 = grid.coords(1)[i2];
                for (i3, v) in chunk.iter_mut().enumerate() {
                    *v = f([x1, x2, grid.coords(2)[i3]]);
                }
            });
        Field {
            grid: Arc::clone(grid),
            values,
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    /// Multiplies the field by a real scalar in place.
    pub fn scale(&mut self, a: f64) {
        self.values.par_iter_mut().for_each(|v| *v *= a);
    }

    /// Multiplies the field by a complex scalar in place.
    pub fn scale_complex(&mut self, a: Complex64) {
        self.values.par_iter_mut().for_each(|v| *v *= a);
    }

    /// `self += a·other`; both fields must live on identical grids.
    pub fn axpy(&mut self, a: f64, other: &Field) {
        assert_eq!(
            self.grid.dims(),
            other.grid.dims(),
            "axpy across mismatched grids"
        );
        self.values
            .par_iter_mut()
            .zip(other.values.par_iter())
            .for_each(|(v, o)| *v += a * o);
    }
}

// ---------------------------------------------------------------------------
// Deterministic reductions
// ---------------------------------------------------------------------------

/// Block size for parallel reductions. Fixing it (rather than deriving it
/// from the worker count) makes every reduction bit-identical across thread
/// counts.
const SUM_BLOCK: usize = 4096;

/// Pairwise (cascade) summation; deterministic and accurate to a few ulps.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        let mut acc = 0.0;
        for &x in xs {
            acc += x;
        }
        acc
    } else {
        let mid = xs.len() / 2;
        pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
    }
}

/// Deterministic parallel sum of `f(0) + … + f(len−1)`: fixed-size blocks are
/// reduced pairwise and the per-block partials are combined pairwise in index
/// order, so the result does not depend on the rayon worker count.
pub fn par_sum_indexed<F>(len: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    let blocks = len.div_ceil(SUM_BLOCK);
    let partials: Vec<f64> = (0..blocks)
        .into_par_iter()
        .map(|blk| {
            let lo = blk * SUM_BLOCK;
            let hi = (lo + SUM_BLOCK).min(len);
            let vals: Vec<f64> = (lo..hi).map(&f).collect();
            pairwise_sum(&vals)
        })
        .collect();
    pairwise_sum(&partials)
}

/// Complex-valued variant of [`par_sum_indexed`].
pub fn par_sum_indexed_complex<F>(len: usize, f: F) -> Complex64
where
    F: Fn(usize) -> Complex64 + Sync,
{
    let blocks = len.div_ceil(SUM_BLOCK);
    let partials: Vec<Complex64> = (0..blocks)
        .into_par_iter()
        .map(|blk| {
            let lo = blk * SUM_BLOCK;
            let hi = (lo + SUM_BLOCK).min(len);
            let re: Vec<f64> = (lo..hi).map(|i| f(i).re).collect();
            let im: Vec<f64> = (lo..hi).map(|i| f(i).im).collect();
            Complex64::new(pairwise_sum(&re), pairwise_sum(&im))
        })
        .collect();
    let re: Vec<f64> = partials.iter().map(|c| c.re).collect();
    let im: Vec<f64> = partials.iter().map(|c| c.im).collect();
    Complex64::new(pairwise_sum(&re), pairwise_sum(&im))
}

/// Installs a global rayon pool sized from the `MAGNLS_THREADS` environment
/// variable (if set and valid). Safe to call more than once; later calls are
/// no-ops once a pool exists.
pub fn init_thread_pool_from_env() {
    if let Ok(raw) = std::env::var("MAGNLS_THREADS") {
        if let Ok(n) = raw.trim().parse::<usize>() {
            if n >= 1 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Fourier transforms
// ---------------------------------------------------------------------------

pub(crate) fn fft_plan(n: usize, direction: FftDirection) -> Arc<dyn Fft<f64>> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, bool), Arc<dyn Fft<f64>>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let key = (n, direction == FftDirection::Forward);
    let mut guard = cache.lock().expect("fft plan cache poisoned");
    Arc::clone(guard.entry(key).or_insert_with(|| {
        let mut planner = FftPlanner::new();
        planner.plan_fft(n, direction)
    }))
}

/// Applies `op` to every 1D line of `values` along `axis`, with the line
/// gathered into a contiguous buffer. The line index passed to `op` is the
/// row-major flat index over the two remaining axes (in ascending axis
/// order), so callers can recover the transverse coordinates.
pub(crate) fn for_each_line<F>(values: &mut [Complex64], dims: [usize; 3], axis: usize, op: F)
where
    F: Fn(usize, &mut [Complex64]) + Sync,
{
    let [n1, n2, n3] = dims;
    match axis {
        2 => {
            values
                .par_chunks_mut(n3)
                .enumerate()
                .for_each(|(line, chunk)| op(line, chunk));
        }
        1 => {
            values
                .par_chunks_mut(n2 * n3)
                .enumerate()
                .for_each(|(i1, slab)| {
                    let mut buf = vec![Complex64::new(0.0, 0.0); n2];
                    for i3 in 0..n3 {
                        for i2 in 0..n2 {
                            buf[i2] = slab[i2 * n3 + i3];
                        }
                        op(i1 * n3 + i3, &mut buf);
                        for i2 in 0..n2 {
                            slab[i2 * n3 + i3] = buf[i2];
                        }
                    }
                });
        }
        0 => {
            // Two-phase transpose through a scratch buffer: lines along the
            // leading axis are strided by n₂·n₃, which defeats chunk-based
            // parallel mutable access.
            let mut scratch = vec![Complex64::new(0.0, 0.0); values.len()];
            {
                let shared: &[Complex64] = values;
                scratch
                    .par_chunks_mut(n1)
                    .enumerate()
                    .for_each(|(line, buf)| {
                        // line = i2·n₃ + i3
                        for (i1, v) in buf.iter_mut().enumerate() {
                            *v = shared[i1 * n2 * n3 + line];
                        }
                        op(line, buf);
                    });
            }
            values
                .par_chunks_mut(n2 * n3)
                .enumerate()
                .for_each(|(i1, slab)| {
                    for (line, dst) in slab.iter_mut().enumerate() {
                        *dst = scratch[line * n1 + i1];
                    }
                });
        }
        _ => panic!("axis out of range"),
    }
}

/// In-place 1D FFT of every line along `axis`. The inverse direction applies
/// the 1/n normalization.
pub(crate) fn fft_axis(values: &mut [Complex64], dims: [usize; 3], axis: usize, forward: bool) {
    let n = dims[axis];
    let direction = if forward {
        FftDirection::Forward
    } else {
        FftDirection::Inverse
    };
    let plan = fft_plan(n, direction);
    let inv_n = 1.0 / n as f64;
    for_each_line(values, dims, axis, |_, line| {
        let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        plan.process_with_scratch(line, &mut scratch);
        if !forward {
            for v in line.iter_mut() {
                *v *= inv_n;
            }
        }
    });
}

/// Forward 3D DFT of a field (unnormalized, matching the plain DFT sum).
pub fn to_spectrum(f: &Field) -> Vec<Complex64> {
    let mut spec = f.values().to_vec();
    let dims = f.grid().dims();
    for axis in 0..3 {
        fft_axis(&mut spec, dims, axis, true);
    }
    spec
}

/// Inverse 3D DFT; together with [`to_spectrum`] this is an exact round trip
/// up to roundoff.
pub fn from_spectrum(grid: &Arc<Grid>, mut spec: Vec<Complex64>) -> Result<Field> {
    if spec.len() != grid.len() {
        return Err(Error::ShapeMismatch {
            expected: grid.len(),
            got: spec.len(),
        });
    }
    let dims = grid.dims();
    for axis in 0..3 {
        fft_axis(&mut spec, dims, axis, false);
    }
    Field::from_values(grid, spec)
}

// ---------------------------------------------------------------------------
// Differential operators
// ---------------------------------------------------------------------------

/// Spectral Laplacian; exact for band-limited inputs.
pub fn apply_laplacian(f: &Field) -> Field {
    let grid = f.grid();
    let [_, n2, n3] = grid.dims();
    let mut spec = to_spectrum(f);
    let k1 = grid.wavenumbers(0);
    let k2 = grid.wavenumbers(1);
    let k3 = grid.wavenumbers(2);
    spec.par_chunks_mut(n3).enumerate().for_each(|(line, chunk)| {
        let m1 = line / n2;
        let m2 = line % n2;
        let k12 = k1[m1] * k1[m1] + k2[m2] * k2[m2];
        for (m3, v) in chunk.iter_mut().enumerate() {
            *v *= -(k12 + k3[m3] * k3[m3]);
        }
    });
    from_spectrum(grid, spec).expect("spectrum length matches grid")
}

/// All three spectral partial derivatives of `f`, sharing one forward
/// transform.
pub(crate) fn partial_derivatives(f: &Field) -> [Field; 3] {
    let grid = f.grid();
    let dims = grid.dims();
    let [_, n2, n3] = dims;
    let spec = to_spectrum(f);
    let out: Vec<Field> = (0..3usize)
        .map(|axis| {
            let mut s = spec.clone();
            let k1 = grid.deriv_wavenumbers(0);
            let k2 = grid.deriv_wavenumbers(1);
            let k3 = grid.deriv_wavenumbers(2);
            s.par_chunks_mut(n3).enumerate().for_each(|(line, chunk)| {
                let m1 = line / n2;
                let m2 = line % n2;
                for (m3, v) in chunk.iter_mut().enumerate() {
                    let k = match axis {
                        0 => k1[m1],
                        1 => k2[m2],
                        _ => k3[m3],
                    };
                    *v *= Complex64::new(0.0, k);
                }
            });
            from_spectrum(grid, s).expect("spectrum length matches grid")
        })
        .collect();
    let mut it = out.into_iter();
    [
        it.next().unwrap(),
        it.next().unwrap(),
        it.next().unwrap(),
    ]
}

/// Spectral partial derivative along one axis.
pub fn partial_derivative(f: &Field, axis: usize) -> Field {
    assert!(axis < 3, "axis out of range");
    let grid = f.grid();
    let [_, n2, n3] = grid.dims();
    let mut spec = to_spectrum(f);
    let k1 = grid.deriv_wavenumbers(0);
    let k2 = grid.deriv_wavenumbers(1);
    let k3 = grid.deriv_wavenumbers(2);
    spec.par_chunks_mut(n3).enumerate().for_each(|(line, chunk)| {
        let m1 = line / n2;
        let m2 = line % n2;
        for (m3, v) in chunk.iter_mut().enumerate() {
            let k = match axis {
                0 => k1[m1],
                1 => k2[m2],
                _ => k3[m3],
            };
            *v *= Complex64::new(0.0, k);
        }
    });
    from_spectrum(grid, spec).expect("spectrum length matches grid")
}

/// Angular-momentum operator `L_z f = i(x₂∂₁ − x₁∂₂)f` around the field axis.
pub fn apply_lz(f: &Field) -> Field {
    let grid = f.grid();
    let [_, n2, n3] = grid.dims();
    let [d1, d2, _] = partial_derivatives(f);
    let mut out = Field::zeros(grid);
    out.values_mut()
        .par_chunks_mut(n3)
        .enumerate()
        .for_each(|(line, chunk)| {
            let i1 = line / n2;
            let i2 = line % n2;
            let x1 = grid.coords(0)[i1];
            let x2 = grid.coords(1)[i2];
            let base = line * n3;
            for (i3, v) in chunk.iter_mut().enumerate() {
                let idx = base + i3;
                *v = Complex64::new(0.0, 1.0)
                    * (x2 * d1.values()[idx] - x1 * d2.values()[idx]);
            }
        });
    out
}

/// The covariant (magnetic) gradient `(∇+iA)f` in the symmetric gauge:
/// component `j` is the spectral `∂_j f` plus the pointwise `i·A_j·f`, with
/// `A = (b/2)(−x₂, x₁, 0)`. The third component carries no gauge term.
pub fn covariant_gradient(f: &Field, p: &Params) -> (Field, Field, Field) {
    let grid = f.grid();
    let [_, n2, n3] = grid.dims();
    let [mut d1, mut d2, d3] = partial_derivatives(f);
    let half_b = 0.5 * p.b;
    d1.values_mut()
        .par_chunks_mut(n3)
        .enumerate()
        .for_each(|(line, chunk)| {
            let i2 = line % n2;
            let a1 = -half_b * grid.coords(1)[i2];
            let base = line * n3;
            for (i3, v) in chunk.iter_mut().enumerate() {
                *v += Complex64::new(0.0, a1) * f.values()[base + i3];
            }
        });
    d2.values_mut()
        .par_chunks_mut(n3)
        .enumerate()
        .for_each(|(line, chunk)| {
            let i1 = line / n2;
            let a2 = half_b * grid.coords(0)[i1];
            let base = line * n3;
            for (i3, v) in chunk.iter_mut().enumerate() {
                *v += Complex64::new(0.0, a2) * f.values()[base + i3];
            }
        });
    (d1, d2, d3)
}

/// Fraction of the spectral energy `Σ|f̂|²` carried by modes in the outer
/// third of the resolved band (any axis). A rising value signals that the
/// solution is falling off the grid's resolution.
pub fn spectral_tail_fraction(f: &Field) -> f64 {
    let grid = f.grid();
    let [n1, n2, n3] = grid.dims();
    let spec = to_spectrum(f);
    let frac = |m: usize, n: usize| -> f64 {
        let signed = if m < n / 2 { m as f64 } else { m as f64 - n as f64 };
        signed.abs() / (n as f64 / 2.0)
    };
    let total = par_sum_indexed(spec.len(), |i| spec[i].norm_sqr());
    if total == 0.0 {
        return 0.0;
    }
    let tail = par_sum_indexed(spec.len(), |i| {
        let m3 = i % n3;
        let m2 = (i / n3) % n2;
        let m1 = i / (n2 * n3);
        debug_assert!(m1 < n1);
        let r = frac(m1, n1).max(frac(m2, n2)).max(frac(m3, n3));
        if r > 2.0 / 3.0 {
            spec[i].norm_sqr()
        } else {
            0.0
        }
    });
    tail / total
}

// ---------------------------------------------------------------------------
// Band-limited dilation
// ---------------------------------------------------------------------------

/// Evaluates the mass-preserving dilation `λ^{3/2} f(λx)` by summing the
/// trigonometric interpolant of `f` at the scaled points, axis by axis.
///
/// This is exact (to roundoff) for band-limited fields as long as the scaled
/// argument stays inside the box; for decaying fields the periodic wrap of
/// points with `λ|x| > L` contributes only at the level of the boundary
/// amplitude.
pub fn resample_scaled(f: &Field, lambda: f64) -> Result<Field> {
    if !lambda.is_finite() || lambda <= 0.0 {
        return Err(Error::ScaleNotPositive(lambda));
    }
    let grid = f.grid();
    let dims = grid.dims();
    let mut values = f.values().to_vec();
    for axis in 0..3 {
        let n = dims[axis];
        fft_axis(&mut values, dims, axis, true);
        // Evaluation matrix: out[i] = (1/n) Σ_m spec[m] · e^{i k_m (λ·x_i + L)}.
        let ks = grid.wavenumbers(axis);
        let xs = grid.coords(axis);
        let l = grid.half_widths()[axis];
        let inv_n = 1.0 / n as f64;
        let mut eval = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            let y = lambda * xs[i] + l;
            for m in 0..n {
                // The unpaired Nyquist mode is evaluated as a cosine — the
                // symmetric interpolant that keeps real inputs real and
                // matches the plain exponential at the unscaled grid points.
                eval[i * n + m] = if m == n / 2 {
                    Complex64::new((ks[m] * y).cos() * inv_n, 0.0)
                } else {
                    Complex64::new(0.0, ks[m] * y).exp() * inv_n
                };
            }
        }
        for_each_line(&mut values, dims, axis, |_, line| {
            let mut out = vec![Complex64::new(0.0, 0.0); n];
            for (i, o) in out.iter_mut().enumerate() {
                let row = &eval[i * n..(i + 1) * n];
                let mut acc = Complex64::new(0.0, 0.0);
                for (m, &s) in line.iter().enumerate() {
                    acc += row[m] * s;
                }
                *o = acc;
            }
            line.copy_from_slice(&out);
        });
    }
    let amp = lambda.powf(1.5);
    let mut out = Field::from_values(grid, values)?;
    out.scale(amp);
    Ok(out)
}

// ---------------------------------------------------------------------------
// Initial-data constructors
// ---------------------------------------------------------------------------

/// Samples the dilated radial profile `amplitude·scale^{3/2}·Q(scale·|x−center|)`
/// on the grid, using cubic interpolation on the profile table and its fitted
/// exponential tail beyond the table's reach.
pub fn sample_radial(
    profile: &RadialProfile,
    grid: &Arc<Grid>,
    amplitude: f64,
    scale: f64,
    center: [f64; 3],
) -> Result<Field> {
    if !scale.is_finite() || scale <= 0.0 {
        return Err(Error::ScaleNotPositive(scale));
    }
    profile.require_tail()?;
    let amp = amplitude * scale.powf(1.5);
    Ok(Field::from_fn(grid, |x| {
        let r = ((x[0] - center[0]).powi(2)
            + (x[1] - center[1]).powi(2)
            + (x[2] - center[2]).powi(2))
        .sqrt();
        Complex64::new(amp * profile.value(scale * r), 0.0)
    }))
}

/// An anisotropic Gaussian packet with an optional quadratic phase chirp:
/// `amplitude · exp(−Σ (x_j−c_j)²/(2 w_j²)) · exp(−i·chirp·|x−c|²)`.
///
/// A positive chirp gives the inward radial flux `Im ∫ x·∇u ū = −2·chirp·‖xu‖²`
/// used by the blow-up constructions.
pub fn gaussian_packet(
    grid: &Arc<Grid>,
    widths: [f64; 3],
    amplitude: f64,
    chirp: f64,
    center: [f64; 3],
) -> Result<Field> {
    for &w in &widths {
        if !w.is_finite() || w <= 0.0 {
            return Err(Error::InvalidParams(format!(
                "gaussian width must be positive, got {w}"
            )));
        }
    }
    Ok(Field::from_fn(grid, |x| {
        let d = [x[0] - center[0], x[1] - center[1], x[2] - center[2]];
        let shape = -0.5
            * (d[0] * d[0] / (widths[0] * widths[0])
                + d[1] * d[1] / (widths[1] * widths[1])
                + d[2] * d[2] / (widths[2] * widths[2]));
        let r2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
        (Complex64::new(shape, 0.0) + Complex64::new(0.0, -chirp * r2)).exp() * amplitude
    }))
}

/// The transverse-Gaussian test family `f_λ(x) = g(x_⊥)·h_λ(x₃)` with
/// `g = √(|b|/2π)·e^{−(|b|/4)ρ²}` (unit mass in the plane; it saturates the
/// spectral-gap bound and carries no angular momentum) and a longitudinally
/// scaled unit-profile bump `h_λ(x₃) = √(c·λ)·π^{−1/4}·e^{−(λx₃)²/2}`, so
/// `‖f_λ‖² = c`.
pub fn transverse_gaussian_bump(
    grid: &Arc<Grid>,
    p: &Params,
    c: f64,
    lambda: f64,
) -> Result<Field> {
    if !c.is_finite() || c <= 0.0 {
        return Err(Error::InvalidParams(format!(
            "target mass must be positive, got {c}"
        )));
    }
    if !lambda.is_finite() || lambda <= 0.0 {
        return Err(Error::ScaleNotPositive(lambda));
    }
    let abs_b = p.b.abs();
    let g_norm = (abs_b / (2.0 * std::f64::consts::PI)).sqrt();
    let h_norm = (c * lambda).sqrt() * std::f64::consts::PI.powf(-0.25);
    Ok(Field::from_fn(grid, |x| {
        let rho2 = x[0] * x[0] + x[1] * x[1];
        let g = g_norm * (-abs_b / 4.0 * rho2).exp();
        let h = h_norm * (-0.5 * (lambda * x[2]).powi(2)).exp();
        Complex64::new(g * h, 0.0)
    }))
}

// ---------------------------------------------------------------------------
// Seeded random samples
// ---------------------------------------------------------------------------

/// Counter-based RNG: `seed` selects the experiment, `stream` the sample
/// within it. Identical across platforms and thread counts.
pub fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// A random band-limited field: independent uniform complex coefficients on
/// the modes with `|m_j| ≤ max_frac·(n_j/2)` on every axis, zero elsewhere,
/// normalized to unit mass. Coefficients are drawn in a fixed mode order,
/// single-threaded, so the field depends only on `(seed, stream)`.
pub fn random_band_limited(grid: &Arc<Grid>, seed: u64, stream: u64, max_frac: f64) -> Field {
    let mut rng = seeded_rng(seed, stream);
    let [n1, n2, n3] = grid.dims();
    let mut spec = vec![Complex64::new(0.0, 0.0); grid.len()];
    let in_band = |m: usize, n: usize| -> bool {
        let signed = if m < n / 2 { m as f64 } else { m as f64 - n as f64 };
        signed.abs() <= max_frac * (n as f64 / 2.0)
    };
    for m1 in 0..n1 {
        for m2 in 0..n2 {
            for m3 in 0..n3 {
                if in_band(m1, n1) && in_band(m2, n2) && in_band(m3, n3) {
                    spec[(m1 * n2 + m2) * n3 + m3] = Complex64::new(
                        rng.gen_range(-1.0..1.0),
                        rng.gen_range(-1.0..1.0),
                    );
                }
            }
        }
    }
    let mut f = from_spectrum(grid, spec).expect("spectrum length matches grid");
    normalize_mass(&mut f, 1.0);
    f
}

/// A random decaying sample: a band-limited field under a Gaussian envelope
/// whose width is a random fraction of the box, normalized to unit mass.
/// Suitable wherever the test quantity needs spatial decay (weighted norms,
/// functional inequalities posed on ℝ³).
pub fn random_wave_packet(grid: &Arc<Grid>, seed: u64, stream: u64) -> Field {
    let mut rng = seeded_rng(seed, stream.wrapping_mul(2));
    let l = grid.min_half_width();
    let w = l / 6.0 * rng.gen_range(0.75..1.05);
    let modulation = random_band_limited(grid, seed, stream.wrapping_mul(2).wrapping_add(1), 0.33);
    let mut f = Field::from_fn(grid, |x| {
        let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
        Complex64::new((-0.5 * r2 / (w * w)).exp(), 0.0)
    });
    f.values_mut()
        .par_iter_mut()
        .zip(modulation.values().par_iter())
        .for_each(|(v, m)| *v *= m);
    normalize_mass(&mut f, 1.0);
    f
}

/// A nowhere-vanishing decaying sample: a Gaussian modulus with a smooth
/// random phase, `|f|` itself a Gaussian. On such fields `|f|` is smooth, so
/// pointwise-derived quantities of `|f|` are spectrally accurate.
pub fn random_phase_twisted_gaussian(grid: &Arc<Grid>, seed: u64, stream: u64) -> Field {
    let mut rng = seeded_rng(seed, stream.wrapping_mul(3).wrapping_add(1));
    let l = grid.min_half_width();
    let w = l / 6.0 * rng.gen_range(0.75..1.05);
    let phase_strength = rng.gen_range(0.5..3.0);
    let phase_src = random_band_limited(grid, seed, stream.wrapping_mul(3).wrapping_add(2), 0.25);
    let max_abs = phase_src
        .values()
        .iter()
        .map(|v| v.re.abs())
        .fold(0.0f64, f64::max)
        .max(f64::MIN_POSITIVE);
    let scale = phase_strength / max_abs;
    let mut f = Field::from_fn(grid, |x| {
        let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
        Complex64::new((-0.5 * r2 / (w * w)).exp(), 0.0)
    });
    f.values_mut()
        .par_iter_mut()
        .zip(phase_src.values().par_iter())
        .for_each(|(v, s)| *v *= Complex64::new(0.0, scale * s.re).exp());
    normalize_mass(&mut f, 1.0);
    f
}

/// Rescales `f` so its mass (squared L² norm) equals `target`.
pub fn normalize_mass(f: &mut Field, target: f64) {
    let dv = f.grid().cell_volume();
    let m = {
        let vals = f.values();
        par_sum_indexed(vals.len(), |i| vals[i].norm_sqr()) * dv
    };
    if m > 0.0 {
        f.scale((target / m).sqrt());
    }
}

// ---------------------------------------------------------------------------
// Checkpoint I/O
// ---------------------------------------------------------------------------

const CHECKPOINT_MAGIC: &[u8; 4] = b"MNLS";
const CHECKPOINT_VERSION: u32 = 1;

/// Writes a field snapshot in the binary checkpoint format:
/// magic `MNLS`, version u32, dims 3×u32, half-widths 3×f64, `b`, `alpha`,
/// `t` as f64 (all little-endian), then row-major interleaved `(re, im)` f64
/// pairs.
pub fn write_checkpoint(path: &Path, f: &Field, p: &Params, t: f64) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    for &n in &f.grid().dims() {
        w.write_all(&(n as u32).to_le_bytes())?;
    }
    for &l in &f.grid().half_widths() {
        w.write_all(&l.to_le_bytes())?;
    }
    w.write_all(&p.b.to_le_bytes())?;
    w.write_all(&p.alpha.to_le_bytes())?;
    w.write_all(&t.to_le_bytes())?;
    for v in f.values() {
        w.write_all(&v.re.to_le_bytes())?;
        w.write_all(&v.im.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a checkpoint written by [`write_checkpoint`]. The payload is
/// returned bit-exactly (including non-finite values from post-blow-up
/// snapshots); header metadata is validated.
pub fn read_checkpoint(path: &Path) -> Result<(Field, Params, f64)> {
    let file = std::fs::File::open(path)?;
    let mut r = BufReader::new(file);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(Error::Format(format!(
            "bad checkpoint magic {:?} (expected MNLS)",
            magic
        )));
    }
    let mut u32buf = [0u8; 4];
    r.read_exact(&mut u32buf)?;
    let version = u32::from_le_bytes(u32buf);
    if version != CHECKPOINT_VERSION {
        return Err(Error::Format(format!(
            "unsupported checkpoint version {version}"
        )));
    }
    let mut dims = [0usize; 3];
    for d in &mut dims {
        r.read_exact(&mut u32buf)?;
        *d = u32::from_le_bytes(u32buf) as usize;
    }
    let mut f64buf = [0u8; 8];
    let mut read_f64 = |r: &mut BufReader<std::fs::File>| -> Result<f64> {
        r.read_exact(&mut f64buf)?;
        Ok(f64::from_le_bytes(f64buf))
    };
    let half_widths = [read_f64(&mut r)?, read_f64(&mut r)?, read_f64(&mut r)?];
    let b = read_f64(&mut r)?;
    let alpha = read_f64(&mut r)?;
    let t = read_f64(&mut r)?;
    if !t.is_finite() {
        return Err(Error::Format(format!("non-finite checkpoint time {t}")));
    }
    let grid = Grid::new(dims, half_widths)?;
    let p = Params::new(b, alpha)?;
    let mut payload = vec![0u8; grid.len() * 16];
    r.read_exact(&mut payload)?;
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(Error::Format(
            "checkpoint has trailing bytes after the payload".to_string(),
        ));
    }
    let values: Vec<Complex64> = payload
        .chunks_exact(16)
        .map(|c| {
            Complex64::new(
                f64::from_le_bytes(c[0..8].try_into().unwrap()),
                f64::from_le_bytes(c[8..16].try_into().unwrap()),
            )
        })
        .collect();
    Ok((Field::from_values(&grid, values)?, p, t))
}

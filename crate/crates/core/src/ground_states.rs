//! Standing-wave solvers: mass-constrained energy minimizers, kinetically
//! capped minimizers, action ground states on the Nehari set, and the
//! dilation analysis feeding the instability experiments.
//!
//! All three solvers are preconditioned descent loops over [`Field`]s: the
//! L² gradient of the objective is smoothed by `(κ−Δ)^{-1}` (diagonal in the
//! Fourier basis), stepped with a Barzilai–Borwein guess, safeguarded by
//! monotone backtracking, and re-projected onto the constraint after every
//! step (mass renormalization, or the exact Nehari rescale).

use std::sync::{Arc, OnceLock};

use rayon::prelude::*;

use crate::dynamics::{self, EvolveConfig, EvolveOutcome};
use crate::error::{Error, Result};
use crate::field_grid::{self, Field, Grid, Params};
use crate::functionals;
use crate::soliton_q::{self, QConstants};

/// A converged standing-wave profile with its certificate numbers.
#[derive(Debug, Clone)]
pub struct GroundStateResult {
    pub phi: Field,
    /// Frequency / Lagrange multiplier of the stationary equation.
    pub omega: f64,
    /// Final objective value: `E(φ)` for the mass-constrained problems,
    /// `S_ω(φ)` for the action problem.
    pub objective: f64,
    /// L² norm of the stationary-equation residual
    /// `−(∇+iA)²φ + ωφ − |φ|^αφ`.
    pub residual_el: f64,
    /// `K_ω(φ)`; vanishes for action ground states.
    pub k_omega: f64,
    /// `H(φ)`; vanishes for action ground states (checked, not imposed).
    pub h_value: f64,
    /// Fitted exponential decay rate of `|φ|` over the resolved tail.
    pub decay_delta: f64,
    /// `∂²_λ S_ω(φ^λ)|_{λ=1}` with `φ^λ = λ^{3/2}φ(λ·)`; nonpositive values
    /// license the blow-up instability experiment.
    pub scaling_second_deriv: f64,
    pub iterations: usize,
}

// ---------------------------------------------------------------------------
// Gradients and the preconditioner
// ---------------------------------------------------------------------------

/// L² gradient of the energy: `∇E(f) = −(∇+iA)²f − |f|^α f`.
pub fn energy_gradient(f: &Field, p: &Params) -> Field {
    action_gradient(f, p, 0.0)
}

/// L² gradient of the action `S_ω`, which is also the stationary-equation
/// residual field: `−(∇+iA)²f + ωf − |f|^α f`.
pub fn action_gradient(f: &Field, p: &Params, omega: f64) -> Field {
    let grid = f.grid().clone();
    let lap = field_grid::apply_laplacian(f);
    let lz = field_grid::apply_lz(f);
    let [_, n2, n3] = grid.dims();
    let x1 = grid.coords(0);
    let x2 = grid.coords(1);
    let b = p.b();
    let quarter_b_sq = 0.25 * b * b;
    let alpha = p.alpha();
    let alpha_is_two = (alpha - 2.0).abs() < 1e-12;

    let mut out = Field::zeros(&grid);
    let fv = f.values();
    let lapv = lap.values();
    let lzv = lz.values();
    out.values_mut()
        .par_chunks_mut(n3)
        .enumerate()
        .for_each(|(slab, chunk)| {
            let i1 = slab / n2;
            let i2 = slab % n2;
            let rho_sq = x1[i1] * x1[i1] + x2[i2] * x2[i2];
            let linear = quarter_b_sq * rho_sq + omega;
            for (i3, dst) in chunk.iter_mut().enumerate() {
                let idx = slab * n3 + i3;
                let v = fv[idx];
                let amp_sq = v.norm_sqr();
                let nl = if alpha_is_two {
                    amp_sq
                } else {
                    amp_sq.powf(0.5 * alpha)
                };
                *dst = -lapv[idx] + b * lzv[idx] + (linear - nl) * v;
            }
        });
    out
}

/// Applies `(κ − Δ)^{-1}` — diagonal in the Fourier basis — to smooth a raw
/// L² gradient into a well-scaled descent direction.
fn precondition(g: &Field, kappa: f64) -> Field {
    let grid = g.grid().clone();
    let [_, n2, n3] = grid.dims();
    let mut spec = field_grid::to_spectrum(g);
    let k1 = grid.wavenumbers(0);
    let k2 = grid.wavenumbers(1);
    let k3 = grid.wavenumbers(2);
    spec.par_chunks_mut(n3)
        .enumerate()
        .for_each(|(slab, chunk)| {
            let m1 = slab / n2;
            let m2 = slab % n2;
            let k12 = k1[m1] * k1[m1] + k2[m2] * k2[m2];
            for (m3, v) in chunk.iter_mut().enumerate() {
                *v /= kappa + k12 + k3[m3] * k3[m3];
            }
        });
    field_grid::from_spectrum(&grid, spec).expect("spectrum length matches grid")
}

fn real_inner(a: &Field, b: &Field) -> f64 {
    functionals::l2_inner(a, b).re
}

fn difference(a: &Field, b: &Field) -> Field {
    let mut d = a.clone();
    d.axpy(-1.0, b);
    d
}

/// Barzilai–Borwein step guess from successive iterates and (preconditioned)
/// gradients; `None` when the curvature estimate is unusable.
fn bb_step(
    phi: &Field,
    pg: &Field,
    prev_phi: &Option<Field>,
    prev_pg: &Option<Field>,
) -> Option<f64> {
    let (pp, pg_prev) = match (prev_phi, prev_pg) {
        (Some(a), Some(b)) => (a, b),
        _ => return None,
    };
    let s = difference(phi, pp);
    let y = difference(pg, pg_prev);
    let sy = real_inner(&s, &y);
    let yy = real_inner(&y, &y);
    if sy > 0.0 && yy > 0.0 {
        Some((sy / yy).clamp(1e-3, 1e3))
    } else {
        None
    }
}

// ---------------------------------------------------------------------------
// Linearized operator and the Newton–Krylov polish
// ---------------------------------------------------------------------------

/// Applies the linearization of [`action_gradient`] at `phi` to `v` — the
/// second variation of `S_ω`, a symmetric real-linear operator:
/// `−(∇+iA)²v + ωv − |φ|^α v − α|φ|^{α−2}·Re(φ̄v)·φ`.
fn linearized_gradient(phi: &Field, p: &Params, omega: f64, v: &Field) -> Field {
    let grid = v.grid().clone();
    let lap = field_grid::apply_laplacian(v);
    let lz = field_grid::apply_lz(v);
    let [_, n2, n3] = grid.dims();
    let x1 = grid.coords(0);
    let x2 = grid.coords(1);
    let b = p.b();
    let quarter_b_sq = 0.25 * b * b;
    let alpha = p.alpha();
    let alpha_is_two = (alpha - 2.0).abs() < 1e-12;

    let mut out = Field::zeros(&grid);
    let pv = phi.values();
    let vv = v.values();
    let lapv = lap.values();
    let lzv = lz.values();
    out.values_mut()
        .par_chunks_mut(n3)
        .enumerate()
        .for_each(|(slab, chunk)| {
            let i1 = slab / n2;
            let i2 = slab % n2;
            let rho_sq = x1[i1] * x1[i1] + x2[i2] * x2[i2];
            let linear = quarter_b_sq * rho_sq + omega;
            for (i3, dst) in chunk.iter_mut().enumerate() {
                let idx = slab * n3 + i3;
                let w = vv[idx];
                let q = pv[idx];
                let m_sq = q.norm_sqr();
                let m_alpha = if alpha_is_two {
                    m_sq
                } else {
                    m_sq.powf(0.5 * alpha)
                };
                let mut nl = m_alpha * w;
                // The projection term vanishes like |φ|^α where φ does; the
                // cutoff only skips points where it underflows anyway.
                if m_sq > 1e-300 {
                    nl += alpha * m_alpha * ((q.conj() * w).re / m_sq) * q;
                }
                *dst = -lapv[idx] + b * lzv[idx] + linear * w - nl;
            }
        });
    out
}

/// Preconditioned MINRES for `A x = rhs` with `A` symmetric (possibly
/// indefinite) under the real inner product and `(κ−Δ)` as the positive
/// preconditioner. Returns the iterate and its relative preconditioned
/// residual.
fn minres(
    apply: &dyn Fn(&Field) -> Field,
    rhs: &Field,
    kappa: f64,
    rtol: f64,
    max_iter: usize,
) -> (Field, f64) {
    let grid = rhs.grid().clone();
    let mut x = Field::zeros(&grid);
    let z0 = precondition(rhs, kappa);
    let beta1 = real_inner(rhs, &z0).max(0.0).sqrt();
    if beta1 == 0.0 {
        return (x, 0.0);
    }
    // Lanczos pair: `v` in residual space, `q = (κ−Δ)^{-1}v`, normalized so
    // ⟨v, q⟩ = 1.
    let mut v_cur = rhs.clone();
    v_cur.scale(1.0 / beta1);
    let mut q_cur = z0;
    q_cur.scale(1.0 / beta1);
    let mut v_prev: Option<Field> = None;
    let mut beta = 0.0f64;

    // Givens bookkeeping for the QR of the Lanczos tridiagonal.
    let (mut c_prev2, mut s_prev2) = (1.0f64, 0.0f64);
    let (mut c_prev, mut s_prev) = (1.0f64, 0.0f64);
    let mut phi_bar = beta1;
    let mut d_prev: Option<Field> = None;
    let mut d_prev2: Option<Field> = None;
    let mut rel = 1.0f64;

    for _ in 0..max_iter {
        let u = apply(&q_cur);
        let alpha = real_inner(&u, &q_cur);
        let mut v_hat = u;
        v_hat.axpy(-alpha, &v_cur);
        if let Some(vp) = &v_prev {
            v_hat.axpy(-beta, vp);
        }
        let z_hat = precondition(&v_hat, kappa);
        let beta_next = real_inner(&v_hat, &z_hat).max(0.0).sqrt();

        // Rotate the new column (β_j, α_j, β_{j+1}) through the two previous
        // reflections, then zero the subdiagonal with a fresh one.
        let eps_j = s_prev2 * beta;
        let tmp = c_prev2 * beta;
        let delta_j = c_prev * tmp + s_prev * alpha;
        let gamma_hat = -s_prev * tmp + c_prev * alpha;
        let gamma_j = (gamma_hat * gamma_hat + beta_next * beta_next).sqrt();
        if gamma_j == 0.0 {
            break;
        }
        let c = gamma_hat / gamma_j;
        let s = beta_next / gamma_j;
        let phi_j = c * phi_bar;
        phi_bar = -s * phi_bar;

        let mut d = q_cur.clone();
        if let Some(dp) = &d_prev {
            d.axpy(-delta_j, dp);
        }
        if let Some(dp2) = &d_prev2 {
            d.axpy(-eps_j, dp2);
        }
        d.scale(1.0 / gamma_j);
        x.axpy(phi_j, &d);
        d_prev2 = d_prev.take();
        d_prev = Some(d);

        rel = phi_bar.abs() / beta1;
        if rel <= rtol || beta_next <= f64::EPSILON * beta1 {
            break;
        }

        v_prev = Some(v_cur);
        v_cur = v_hat;
        v_cur.scale(1.0 / beta_next);
        q_cur = z_hat;
        q_cur.scale(1.0 / beta_next);
        (c_prev2, s_prev2) = (c_prev, s_prev);
        (c_prev, s_prev) = (c, s);
        beta = beta_next;
    }
    (x, rel)
}

/// Damped inexact-Newton polish of a near-stationary state: each step solves
/// the linearized stationary equation with [`minres`] and backtracks on the
/// residual norm. Returns the refined state, its residual, and the steps
/// taken; stops early when no step length makes progress.
fn newton_refine(
    mut phi: Field,
    p: &Params,
    omega: f64,
    target: f64,
    max_steps: usize,
) -> (Field, f64, usize) {
    let kappa = 1.0 + p.b().abs() + omega.abs();
    let mut residual = functionals::mass(&action_gradient(&phi, p, omega)).sqrt();
    for step in 0..max_steps {
        if residual <= target {
            return (phi, residual, step);
        }
        let rhs = action_gradient(&phi, p, omega);
        let apply = |w: &Field| linearized_gradient(&phi, p, omega, w);
        let (delta, _) = minres(&apply, &rhs, kappa, 1e-2, 200);
        let mut accepted = false;
        let mut t = 1.0;
        for _ in 0..12 {
            let mut cand = phi.clone();
            cand.axpy(-t, &delta);
            let r_new = functionals::mass(&action_gradient(&cand, p, omega)).sqrt();
            if r_new < residual {
                phi = cand;
                residual = r_new;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            return (phi, residual, step);
        }
    }
    (phi, residual, max_steps)
}

// ---------------------------------------------------------------------------
// Nehari projection and result assembly
// ---------------------------------------------------------------------------

/// Rescales `f ↦ s·f` with `s = (H_ω(f)/‖f‖^{α+2})^{1/α}`, the unique
/// multiple on the Nehari set `K_ω = 0`.
fn nehari_project(f: &Field, p: &Params, omega: f64) -> Result<Field> {
    let h = functionals::h_omega(f, p, omega);
    let lp = functionals::lp_norm(f, p);
    if !(h > 0.0) || !(lp > 0.0) {
        return Err(Error::Degenerate(
            "Nehari projection needs H_ω > 0 and a nonvanishing field".into(),
        ));
    }
    let s = (h / lp).powf(1.0 / p.alpha());
    let mut g = f.clone();
    g.scale(s);
    Ok(g)
}

/// Fits the exponential decay rate of `|φ|`: shell-averaged modulus versus
/// radius, least squares on `ln` over the amplitude window
/// `[1e−5, 1e−3]·max|φ|` (widened once if too few shells resolve it).
/// Returns `NaN` when no resolved tail exists.
fn fit_decay_rate(phi: &Field) -> f64 {
    let grid = phi.grid();
    let v = phi.values();
    let spacings = grid.spacings();
    let dr = spacings[0].max(spacings[1]).max(spacings[2]);
    let r_max = grid.min_half_width();
    let nbins = (r_max / dr) as usize;
    if nbins < 8 {
        return f64::NAN;
    }
    let mut sum = vec![0.0f64; nbins];
    let mut count = vec![0usize; nbins];
    let mut amp_max = 0.0f64;
    for (i, val) in v.iter().enumerate() {
        let x = grid.position(i);
        let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        let a = val.norm();
        amp_max = amp_max.max(a);
        let bin = (r / dr) as usize;
        if bin < nbins {
            sum[bin] += a;
            count[bin] += 1;
        }
    }
    if amp_max == 0.0 {
        return f64::NAN;
    }
    let fit = |lo_frac: f64, hi_frac: f64| -> Option<f64> {
        let pts: Vec<(f64, f64)> = (0..nbins)
            .filter(|&bin| count[bin] > 0)
            .filter_map(|bin| {
                let avg = sum[bin] / count[bin] as f64;
                let frac = avg / amp_max;
                if frac > lo_frac && frac < hi_frac {
                    Some(((bin as f64 + 0.5) * dr, avg.ln()))
                } else {
                    None
                }
            })
            .collect();
        if pts.len() < 5 {
            return None;
        }
        let n = pts.len() as f64;
        let (sr, sl, srr, srl) = pts.iter().fold((0.0, 0.0, 0.0, 0.0), |acc, &(r, l)| {
            (acc.0 + r, acc.1 + l, acc.2 + r * r, acc.3 + r * l)
        });
        let denom = n * srr - sr * sr;
        if denom <= 0.0 {
            return None;
        }
        Some(-(n * srl - sr * sl) / denom)
    };
    fit(1e-5, 1e-3)
        .or_else(|| fit(1e-6, 1e-2))
        .unwrap_or(f64::NAN)
}

fn build_result(
    phi: Field,
    p: &Params,
    omega: f64,
    objective: f64,
    iterations: usize,
) -> GroundStateResult {
    let residual_el = functionals::mass(&action_gradient(&phi, p, omega)).sqrt();
    let k_omega = functionals::nehari_k(&phi, p, omega);
    let grad = functionals::grad_norm_sq(&phi);
    let rho = functionals::rho_norm_sq(&phi);
    let lp = functionals::lp_norm(&phi, p);
    let alpha = p.alpha();
    let b_sq = p.b() * p.b();
    let h_value = grad - 0.25 * b_sq * rho - 1.5 * alpha / (alpha + 2.0) * lp;
    let scaling_second_deriv = grad + 0.75 * b_sq * rho
        - 1.5 * alpha / (alpha + 2.0) * (1.5 * alpha - 1.0) * lp;
    let decay_delta = fit_decay_rate(&phi);
    GroundStateResult {
        phi,
        omega,
        objective,
        residual_el,
        k_omega,
        h_value,
        decay_delta,
        scaling_second_deriv,
        iterations,
    }
}

// ---------------------------------------------------------------------------
// Action ground states d(ω)
// ---------------------------------------------------------------------------

const MAX_ITER: usize = 20_000;
const ETA_MIN: f64 = 1e-14;

/// Minimizes the action `S_ω` over the Nehari set, yielding a ground state
/// of the stationary equation at frequency `ω`.
///
/// Each iteration takes a preconditioned gradient step and re-projects with
/// the exact Nehari rescale, so `K_ω` vanishes identically along the
/// iteration; the derived identity `H(φ) = 0` is reported as evidence of
/// stationarity, never imposed. Requires `ω > −|b|`.
pub fn minimize_action(
    omega: f64,
    p: &Params,
    grid: &Arc<Grid>,
    tol: f64,
) -> Result<GroundStateResult> {
    check_tol(tol)?;
    let bound = -p.b().abs();
    if !(omega > bound) || !omega.is_finite() {
        return Err(Error::OmegaOutOfRange { omega, bound });
    }

    let h = grid.spacings();
    let h_max = h[0].max(h[1]).max(h[2]);
    let l_min = grid.min_half_width();
    let (w_lo, w_hi) = (4.0 * h_max, l_min / 6.0);
    if w_lo > w_hi {
        return Err(Error::InvalidGrid(format!(
            "no warm-start width is both resolved (≥ {w_lo:.3}) and contained \
             (≤ {w_hi:.3}) on this grid; refine it or enlarge the box"
        )));
    }
    let clamp_w = |w: f64| w.clamp(w_lo, w_hi);
    let w_perp = clamp_w((2.0 / p.b().abs()).sqrt());
    let w_axial = clamp_w((2.0 / (1.0 + omega.abs() + p.b().abs())).sqrt());
    let start = field_grid::gaussian_packet(grid, [w_perp, w_perp, w_axial], 1.0, 0.0, [0.0; 3])?;
    let mut phi = nehari_project(&start, p, omega)?;

    let kappa = 1.0 + p.b().abs() + omega.abs();
    let mut s_old = functionals::action_s(&phi, p, omega);
    let mut eta = 0.5;
    let mut prev_phi: Option<Field> = None;
    let mut prev_pg: Option<Field> = None;
    let mut residual = f64::INFINITY;
    // The projected descent stalls around 1e-2 relative residual (the
    // Hessian is indefinite and the Nehari rescale keeps re-coupling its
    // modes), so it only has to deliver a coarse iterate; the Newton–Krylov
    // polish below carries it to the requested tolerance.
    let warm_tol = tol.max(1e-2);
    let mut iters = MAX_ITER;

    'descent: for iter in 1..=MAX_ITER {
        let g = action_gradient(&phi, p, omega);
        residual = functionals::mass(&g).sqrt();
        let scale = functionals::mass(&phi).sqrt().max(1.0);
        if residual <= warm_tol * scale {
            iters = iter;
            break;
        }
        let pg = precondition(&g, kappa);
        if let Some(bb) = bb_step(&phi, &pg, &prev_phi, &prev_pg) {
            eta = bb;
        }
        prev_phi = Some(phi.clone());
        prev_pg = Some(pg.clone());

        loop {
            let mut cand = phi.clone();
            cand.axpy(-eta, &pg);
            // Collapse toward zero (or H_ω ≤ 0) means the step overshot:
            // halve and retry rather than fail.
            match nehari_project(&cand, p, omega) {
                Ok(projected) => {
                    let s_new = functionals::action_s(&projected, p, omega);
                    if s_new <= s_old + 1e-12 * s_old.abs() {
                        phi = projected;
                        s_old = s_new;
                        break;
                    }
                }
                Err(_) => {}
            }
            eta *= 0.5;
            if eta < ETA_MIN {
                // A stalled line search still leaves a usable Newton start.
                iters = iter;
                break 'descent;
            }
        }
    }

    let scale = functionals::mass(&phi).sqrt().max(1.0);
    if residual <= tol * scale {
        return Ok(build_result(phi, p, omega, s_old, iters));
    }
    // Aim two orders below the request so the derived certificates (K_ω, H)
    // inherit slack rather than sitting on the tolerance.
    let target = (0.01 * tol).max(1e-12) * scale;
    let (phi, residual, steps) = newton_refine(phi, p, omega, target, 40);
    let scale = functionals::mass(&phi).sqrt().max(1.0);
    if residual > tol * scale {
        return Err(Error::Unconverged {
            what: "action Newton polish",
            residual: residual / scale,
            tol,
        });
    }
    let s_final = functionals::action_s(&phi, p, omega);
    Ok(build_result(phi, p, omega, s_final, iters + steps))
}

// ---------------------------------------------------------------------------
// Mass-constrained minimizers I(c) and I^m(c)
// ---------------------------------------------------------------------------

fn check_tol(tol: f64) -> Result<()> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::InvalidParams(format!(
            "tolerance must be positive and finite, got {tol}"
        )));
    }
    Ok(())
}

fn check_mass(c: f64) -> Result<()> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidParams(format!(
            "target mass must be positive and finite, got {c}"
        )));
    }
    Ok(())
}

/// Soliton constants at the mass-critical power, solved once per process
/// (the non-existence threshold `M(Q)` needs them).
fn mass_critical_soliton_constants() -> Result<QConstants> {
    static CACHE: OnceLock<QConstants> = OnceLock::new();
    if let Some(qc) = CACHE.get() {
        return Ok(*qc);
    }
    let profile = soliton_q::solve_q(field_grid::MASS_CRITICAL_ALPHA, 1e-9)?;
    let qc = soliton_q::q_constants(&profile)?;
    Ok(*CACHE.get_or_init(|| qc))
}

struct FlowOutcome {
    phi: Field,
    omega: f64,
    energy: f64,
    iterations: usize,
}

/// Preconditioned projected-gradient flow for `E` on the mass sphere
/// `‖u‖² = c`, optionally refusing to leave the kinetic ball
/// `‖(∇+iA)u‖² ≤ cap`.
fn constrained_energy_flow(
    start: &Field,
    c: f64,
    p: &Params,
    cap: Option<f64>,
    tol: f64,
) -> Result<FlowOutcome> {
    let mut u = start.clone();
    field_grid::normalize_mass(&mut u, c);
    if let Some(m) = cap {
        let kin = functionals::magnetic_kinetic(&u, p);
        if kin > m {
            return Err(Error::BoundaryTrapped {
                kinetic_sq: kin,
                half_cap: 0.5 * m,
                cap: m,
            });
        }
    }

    let mut e_old = functionals::energy_e(&u, p);
    let scale = c.sqrt().max(1.0);
    let mut eta = 0.25;
    let mut prev_u: Option<Field> = None;
    let mut prev_pg: Option<Field> = None;
    let mut trace: Vec<(f64, f64)> = Vec::new();
    let mut residual = f64::INFINITY;

    for iter in 1..=MAX_ITER {
        let magkin = functionals::magnetic_kinetic(&u, p);
        let lp = functionals::lp_norm(&u, p);
        let omega = (lp - magkin) / c;
        // ∇E + ωu is exactly the tangential component of ∇E on the sphere.
        let g = action_gradient(&u, p, omega);
        residual = functionals::mass(&g).sqrt();
        let kappa = 1.0 + p.b().abs() + omega.abs();
        let pg = precondition(&g, kappa);
        if let Some(bb) = bb_step(&u, &pg, &prev_u, &prev_pg) {
            eta = bb;
        }
        prev_u = Some(u.clone());
        prev_pg = Some(pg.clone());

        let mut stalled = false;
        let e_new = loop {
            let mut cand = u.clone();
            cand.axpy(-eta, &pg);
            field_grid::normalize_mass(&mut cand, c);
            let cand_kin = cap.map(|_| functionals::magnetic_kinetic(&cand, p));
            let over_cap = matches!((cap, cand_kin), (Some(m), Some(k)) if k > m);
            if !over_cap {
                let e_cand = functionals::energy_e(&cand, p);
                if e_cand <= e_old + 1e-12 * e_old.abs() {
                    u = cand;
                    break e_cand;
                }
            }
            eta *= 0.5;
            if eta < ETA_MIN {
                stalled = true;
                break e_old;
            }
        };

        trace.push((iter as f64, e_new));
        if trace.len() > 8 {
            trace.remove(0);
        }
        if e_new < -1e8 * (1.0 + e_old.abs()) {
            return Err(Error::EnergyUnboundedBelow { witness: trace });
        }

        let decrement = e_old - e_new;
        e_old = e_new;
        let converged = residual <= tol * scale && decrement <= tol * e_new.abs().max(1.0);
        if converged || stalled {
            if let Some(m) = cap {
                let kin = functionals::magnetic_kinetic(&u, p);
                if kin > 0.5 * m {
                    return Err(Error::BoundaryTrapped {
                        kinetic_sq: kin,
                        half_cap: 0.5 * m,
                        cap: m,
                    });
                }
            }
            if converged {
                let magkin = functionals::magnetic_kinetic(&u, p);
                let lp = functionals::lp_norm(&u, p);
                return Ok(FlowOutcome {
                    phi: u,
                    omega: (lp - magkin) / c,
                    energy: e_old,
                    iterations: iter,
                });
            }
            return Err(Error::Unconverged {
                what: "constrained energy flow",
                residual: residual / scale,
                tol,
            });
        }
    }
    Err(Error::Unconverged {
        what: "constrained energy flow",
        residual: residual / scale,
        tol,
    })
}

/// Warm-start candidates: the transverse-Gaussian family over a coarse
/// dyadic grid of longitudinal scales, restricted to scales the grid
/// resolves (at least four points per axial width, width at most a quarter
/// box).
fn warm_start_family(grid: &Arc<Grid>, p: &Params, c: f64) -> Result<Vec<(f64, Field)>> {
    let h3 = grid.spacings()[2];
    let l3 = grid.half_widths()[2];
    let mut out = Vec::new();
    for k in -6i32..=6 {
        let lambda = 2f64.powf(k as f64 / 2.0);
        let width = 1.0 / lambda;
        if width < 4.0 * h3 || width > l3 / 4.0 {
            continue;
        }
        let f = field_grid::transverse_gaussian_bump(grid, p, c, lambda)?;
        out.push((lambda, f));
    }
    if out.is_empty() {
        return Err(Error::InvalidGrid(
            "no longitudinal scale of the warm-start family fits this grid".into(),
        ));
    }
    Ok(out)
}

/// Minimizes `E` over the mass sphere `S(c)`.
///
/// Refuses the regimes where no minimizer exists: at the mass-critical power
/// for `c ≥ M(Q)`, and for supercritical powers outright — in the latter
/// case the returned error carries the dilation witness `(λ, E(f^λ))`
/// demonstrating `E` unbounded below on `S(c)`.
pub fn minimize_i_c(
    c: f64,
    p: &Params,
    grid: &Arc<Grid>,
    tol: f64,
) -> Result<GroundStateResult> {
    check_mass(c)?;
    check_tol(tol)?;
    if p.alpha() > field_grid::MASS_CRITICAL_ALPHA + 1e-12 {
        let f = field_grid::transverse_gaussian_bump(grid, p, c, 1.0)?;
        let grad = functionals::grad_norm_sq(&f);
        let rho = functionals::rho_norm_sq(&f);
        let lp = functionals::lp_norm(&f, p);
        let alpha = p.alpha();
        let witness: Vec<(f64, f64)> = (0..=6)
            .map(|k| {
                let lam = 2f64.powi(k);
                let e = 0.5 * (lam * lam * grad + 0.25 * p.b() * p.b() * rho / (lam * lam))
                    - lam.powf(1.5 * alpha) * lp / (alpha + 2.0);
                (lam, e)
            })
            .collect();
        return Err(Error::EnergyUnboundedBelow { witness });
    }
    if p.is_mass_critical() {
        let qc = mass_critical_soliton_constants()?;
        if c >= qc.mass_q {
            return Err(Error::NonExistence(format!(
                "no minimizer on the mass sphere at c = {c} ≥ soliton mass {}",
                qc.mass_q
            )));
        }
    }
    let candidates = warm_start_family(grid, p, c)?;
    let start = candidates
        .into_iter()
        .map(|(_, f)| {
            let e = functionals::energy_e(&f, p);
            (e, f)
        })
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, f)| f)
        .expect("warm-start family is nonempty");
    let out = constrained_energy_flow(&start, c, p, None, tol)?;
    Ok(build_result(out.phi, p, out.omega, out.energy, out.iterations))
}

/// Minimizes `E` over `S(c)` within the kinetic ball `‖(∇+iA)u‖² ≤ m`,
/// starting from the best admissible warm start.
///
/// A converged minimizer must sit in the interior half-ball; an iterate
/// pinned in `(m/2, m]` is reported as boundary-trapped (the mass is too
/// large for this cap).
pub fn minimize_im_c(
    c: f64,
    m: f64,
    p: &Params,
    grid: &Arc<Grid>,
    tol: f64,
) -> Result<GroundStateResult> {
    check_supercritical_alpha(p)?;
    check_mass(c)?;
    check_cap(m)?;
    // ‖(∇+iA)u‖² ≥ |b|·‖u‖² for every state, so an interior minimizer needs
    // the half-cap above the spectral-gap floor.
    if 0.5 * m <= p.b().abs() * c {
        return Err(Error::BoundaryTrapped {
            kinetic_sq: p.b().abs() * c,
            half_cap: 0.5 * m,
            cap: m,
        });
    }
    let candidates = warm_start_family(grid, p, c)?;
    let mut best: Option<(f64, Field)> = None;
    let mut least_kin = f64::INFINITY;
    for (_, f) in candidates {
        let kin = functionals::magnetic_kinetic(&f, p);
        least_kin = least_kin.min(kin);
        if kin <= 0.5 * m {
            let e = functionals::energy_e(&f, p);
            if best.as_ref().map_or(true, |(eb, _)| e < *eb) {
                best = Some((e, f));
            }
        }
    }
    let start = match best {
        Some((_, f)) => f,
        None => {
            return Err(Error::BoundaryTrapped {
                kinetic_sq: least_kin,
                half_cap: 0.5 * m,
                cap: m,
            })
        }
    };
    minimize_im_c_from(&start, c, m, p, tol)
}

/// [`minimize_im_c`] from an explicit starting iterate (used to compare
/// interior against shell starts).
pub fn minimize_im_c_from(
    start: &Field,
    c: f64,
    m: f64,
    p: &Params,
    tol: f64,
) -> Result<GroundStateResult> {
    check_supercritical_alpha(p)?;
    check_mass(c)?;
    check_cap(m)?;
    check_tol(tol)?;
    let out = constrained_energy_flow(start, c, p, Some(m), tol)?;
    Ok(build_result(out.phi, p, out.omega, out.energy, out.iterations))
}

fn check_supercritical_alpha(p: &Params) -> Result<()> {
    if p.alpha() <= field_grid::MASS_CRITICAL_ALPHA + 1e-12 {
        return Err(Error::InvalidParams(format!(
            "capped minimization is posed for 4/3 < alpha < 4, got {}",
            p.alpha()
        )));
    }
    Ok(())
}

fn check_cap(m: f64) -> Result<()> {
    if !(m > 0.0 && m.is_finite()) {
        return Err(Error::InvalidParams(format!(
            "kinetic cap must be positive and finite, got {m}"
        )));
    }
    Ok(())
}

/// Fitted constant of the frequency bound
/// `ω ≤ −|b|(1 − K·c^{(4−α)/4}·m^{(3α−4)/4})`: the smallest `K` for which
/// the computed multiplier satisfies it.
pub fn fitted_omega_constant(omega: f64, c: f64, m: f64, p: &Params) -> f64 {
    let abs_b = p.b().abs();
    let alpha = p.alpha();
    let x = c.powf((4.0 - alpha) / 4.0) * m.powf((3.0 * alpha - 4.0) / 4.0);
    (1.0 + omega / abs_b) / x
}

// ---------------------------------------------------------------------------
// Dilation analysis and the instability experiment
// ---------------------------------------------------------------------------

/// Evaluates `(S_ω(φ^λ), ∂_λS_ω(φ^λ), ∂²_λS_ω(φ^λ), K_ω(φ^λ))` for each
/// requested dilation scale, using the closed forms in `λ` of the base
/// norms: `φ^λ = λ^{3/2}φ(λ·)` sends `‖∇φ‖² ↦ λ²‖∇φ‖²`,
/// `‖ρφ‖² ↦ λ^{−2}‖ρφ‖²`, `‖φ‖^{α+2} ↦ λ^{3α/2}‖φ‖^{α+2}`, and leaves the
/// mass and angular momentum fixed.
pub fn scaling_curve(
    phi: &Field,
    p: &Params,
    omega: f64,
    lambdas: &[f64],
) -> Result<Vec<(f64, f64, f64, f64)>> {
    for &lam in lambdas {
        if !(lam > 0.0 && lam.is_finite()) {
            return Err(Error::ScaleNotPositive(lam));
        }
    }
    let d = functionals::diagnostics(phi, p, 0.0);
    let (grad, rho, lp, mass, r) = (
        d.grad_norm_sq,
        d.rho_norm_sq,
        d.lp_norm,
        d.mass,
        d.angular_r,
    );
    let alpha = p.alpha();
    let b = p.b();
    let pot = 1.5 * alpha / (alpha + 2.0);
    Ok(lambdas
        .iter()
        .map(|&lam| {
            let s = 0.5 * lam * lam * grad
                + b * b / (8.0 * lam * lam) * rho
                + 0.5 * b * r
                + 0.5 * omega * mass
                - lam.powf(1.5 * alpha) * lp / (alpha + 2.0);
            let ds = lam * grad - b * b / (4.0 * lam.powi(3)) * rho
                - pot * lam.powf(1.5 * alpha - 1.0) * lp;
            let dss = grad + 0.75 * b * b / lam.powi(4) * rho
                - pot * (1.5 * alpha - 1.0) * lam.powf(1.5 * alpha - 2.0) * lp;
            let k = lam * lam * grad
                + b * r
                + b * b / (4.0 * lam * lam) * rho
                + omega * mass
                - lam.powf(1.5 * alpha) * lp;
            (s, ds, dss, k)
        })
        .collect())
}

/// Evolves the dilated ground state `u₀ = φ^λ` under the full flow.
///
/// The blow-up instability theorem covers `λ > 1` under the hypothesis
/// `∂²_λS_ω(φ^λ)|_{λ=1} ≤ 0`, which is checked and refused when violated;
/// other positive `λ` run as uncovered control experiments.
pub fn instability_experiment(
    phi: &Field,
    p: &Params,
    omega: f64,
    lambda: f64,
    cfg: &EvolveConfig,
) -> Result<EvolveOutcome> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::ScaleNotPositive(lambda));
    }
    let at_one = scaling_curve(phi, p, omega, &[1.0])?[0];
    let d2 = at_one.2;
    let scale = functionals::grad_norm_sq(phi).max(1e-300);
    if d2 > 1e-9 * scale {
        return Err(Error::HypothesisFailed(format!(
            "dilation second derivative at λ=1 is {d2} > 0; the instability \
             hypothesis does not hold for this state"
        )));
    }
    let u0 = field_grid::resample_scaled(phi, lambda)?;
    dynamics::evolve(&u0, p, cfg)
}

//! Conserved quantities, energies, and auxiliary functionals of the magnetic
//! NLS flow, computed on sampled fields with the grid's uniform quadrature.
//!
//! Everything here is a pure function of an immutable field snapshot, and all
//! reductions go through the deterministic blocked pairwise sums of
//! [`field_grid`], so repeated evaluation is bit-identical regardless of the
//! rayon worker count.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field_grid::{
    self, covariant_gradient, par_sum_indexed, par_sum_indexed_complex, Field, Params,
};

/// Boundary-mass fraction above which |x|²-weighted integrals are considered
/// unreliable (the box truncation is no longer invisible).
pub const BOUNDARY_MASS_LIMIT: f64 = 1e-8;

/// Mass `M(f) = ‖f‖²_{L²}`.
pub fn mass(f: &Field) -> f64 {
    let dv = f.grid().cell_volume();
    let v = f.values();
    par_sum_indexed(v.len(), |i| v[i].norm_sqr()) * dv
}

/// `‖f‖^{α+2}_{L^{α+2}}`, the potential-energy norm.
pub fn lp_norm(f: &Field, p: &Params) -> f64 {
    let dv = f.grid().cell_volume();
    let v = f.values();
    let e = p.alpha() + 2.0;
    par_sum_indexed(v.len(), |i| v[i].norm().powf(e)) * dv
}

/// `‖ρf‖²_{L²}` with `ρ = √(x₁²+x₂²)` the distance from the field axis.
pub fn rho_norm_sq(f: &Field) -> f64 {
    let grid = f.grid();
    let dv = grid.cell_volume();
    let v = f.values();
    par_sum_indexed(v.len(), |i| {
        let x = grid.position(i);
        (x[0] * x[0] + x[1] * x[1]) * v[i].norm_sqr()
    }) * dv
}

/// Free kinetic norm `‖∇f‖²_{L²}` (spectral derivatives).
pub fn grad_norm_sq(f: &Field) -> f64 {
    let ds = field_grid::partial_derivatives(f);
    grad_norm_sq_from(&ds, f.grid().cell_volume())
}

fn grad_norm_sq_from(ds: &[Field; 3], dv: f64) -> f64 {
    let (d1, d2, d3) = (ds[0].values(), ds[1].values(), ds[2].values());
    par_sum_indexed(d1.len(), |i| {
        d1[i].norm_sqr() + d2[i].norm_sqr() + d3[i].norm_sqr()
    }) * dv
}

/// Angular momentum `R(f) = i ∫ (x₂∂₁f − x₁∂₂f) f̄ dx` (real part; the
/// imaginary part of the raw integral is discretization noise for smooth
/// fields; see [`angular_momentum_with_residual`]).
pub fn angular_momentum(f: &Field) -> f64 {
    angular_momentum_with_residual(f).0
}

/// Angular momentum together with the imaginary residual of the raw
/// integral. A residual above `1e−6·mass` signals discretization failure.
pub fn angular_momentum_with_residual(f: &Field) -> (f64, f64) {
    let ds = field_grid::partial_derivatives(f);
    angular_from(f, &ds)
}

fn angular_from(f: &Field, ds: &[Field; 3]) -> (f64, f64) {
    let grid = f.grid();
    let dv = grid.cell_volume();
    let v = f.values();
    let (d1, d2) = (ds[0].values(), ds[1].values());
    let raw = par_sum_indexed_complex(v.len(), |i| {
        let x = grid.position(i);
        Complex64::new(0.0, 1.0) * (x[1] * d1[i] - x[0] * d2[i]) * v[i].conj()
    }) * dv;
    (raw.re, raw.im)
}

/// The magnetic kinetic energy `‖(∇+iA)f‖²` together with its exact
/// decomposition `‖∇f‖² + bR(f) + (b²/4)‖ρf‖²`. All four numbers come from
/// one set of spectral derivatives, so the decomposition holds to roundoff
/// whenever the field is resolved.
#[derive(Debug, Clone, Copy)]
pub struct MagneticKineticSplit {
    /// `‖(∇+iA)f‖²` summed directly from the covariant gradient.
    pub total: f64,
    /// `‖∇f‖²`.
    pub grad_sq: f64,
    /// `b·R(f)`.
    pub b_angular: f64,
    /// `(b²/4)·‖ρf‖²`.
    pub rho_potential: f64,
}

impl MagneticKineticSplit {
    /// Relative residual of the decomposition identity; large values signal
    /// an under-resolved field.
    pub fn residual(&self) -> f64 {
        let sum = self.grad_sq + self.b_angular + self.rho_potential;
        let scale = self.total.abs().max(self.grad_sq.abs()).max(1e-300);
        (self.total - sum).abs() / scale
    }
}

/// `‖(∇+iA)f‖²_{L²}` via the covariant gradient.
pub fn magnetic_kinetic(f: &Field, p: &Params) -> f64 {
    let (g1, g2, g3) = covariant_gradient(f, p);
    let dv = f.grid().cell_volume();
    let (v1, v2, v3) = (g1.values(), g2.values(), g3.values());
    par_sum_indexed(v1.len(), |i| {
        v1[i].norm_sqr() + v2[i].norm_sqr() + v3[i].norm_sqr()
    }) * dv
}

/// Magnetic kinetic energy with its decomposition triple.
pub fn magnetic_kinetic_split(f: &Field, p: &Params) -> MagneticKineticSplit {
    let ds = field_grid::partial_derivatives(f);
    magnetic_split_from(f, p, &ds)
}

fn magnetic_split_from(f: &Field, p: &Params, ds: &[Field; 3]) -> MagneticKineticSplit {
    let grid = f.grid();
    let dv = grid.cell_volume();
    let v = f.values();
    let (d1, d2, d3) = (ds[0].values(), ds[1].values(), ds[2].values());
    let half_b = 0.5 * p.b();
    let total = par_sum_indexed(v.len(), |i| {
        let x = grid.position(i);
        let c1 = d1[i] + Complex64::new(0.0, -half_b * x[1]) * v[i];
        let c2 = d2[i] + Complex64::new(0.0, half_b * x[0]) * v[i];
        c1.norm_sqr() + c2.norm_sqr() + d3[i].norm_sqr()
    }) * dv;
    let grad_sq = grad_norm_sq_from(ds, dv);
    let (r, _) = angular_from(f, ds);
    MagneticKineticSplit {
        total,
        grad_sq,
        b_angular: p.b() * r,
        rho_potential: 0.25 * p.b() * p.b() * rho_norm_sq(f),
    }
}

/// Conserved energy `E(f) = ½‖(∇+iA)f‖² − ‖f‖^{α+2}/(α+2)`.
pub fn energy_e(f: &Field, p: &Params) -> f64 {
    0.5 * magnetic_kinetic(f, p) - lp_norm(f, p) / (p.alpha() + 2.0)
}

/// Rotation-free energy `E₀(f) = ½‖∇f‖² + (b²/8)‖ρf‖² − ‖f‖^{α+2}/(α+2)`;
/// conserved because both `E` and `R` are, via `E = E₀ + (b/2)R`.
pub fn energy_e0(f: &Field, p: &Params) -> f64 {
    0.5 * grad_norm_sq(f) + p.b() * p.b() / 8.0 * rho_norm_sq(f)
        - lp_norm(f, p) / (p.alpha() + 2.0)
}

/// Free (non-magnetic) energy `E⁰(f) = ½‖∇f‖² − ‖f‖^{α+2}/(α+2)`.
pub fn energy_free(f: &Field, p: &Params) -> f64 {
    0.5 * grad_norm_sq(f) - lp_norm(f, p) / (p.alpha() + 2.0)
}

/// Virial weight `F(f) = ∫ |x|² |f|²`.
pub fn virial_f(f: &Field) -> f64 {
    let grid = f.grid();
    let dv = grid.cell_volume();
    let v = f.values();
    par_sum_indexed(v.len(), |i| {
        let x = grid.position(i);
        (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) * v[i].norm_sqr()
    }) * dv
}

/// First virial derivative along the flow: `F′ = 4·Im ∫ (x·∇f) f̄`.
pub fn virial_fprime(f: &Field) -> f64 {
    let ds = field_grid::partial_derivatives(f);
    virial_fprime_from(f, &ds)
}

fn virial_fprime_from(f: &Field, ds: &[Field; 3]) -> f64 {
    let grid = f.grid();
    let dv = grid.cell_volume();
    let v = f.values();
    let (d1, d2, d3) = (ds[0].values(), ds[1].values(), ds[2].values());
    4.0 * dv
        * par_sum_indexed(v.len(), |i| {
            let x = grid.position(i);
            ((x[0] * d1[i] + x[1] * d2[i] + x[2] * d3[i]) * v[i].conj()).im
        })
}

/// Second virial derivative along the flow (the virial identity):
/// `F″ = 8‖∇f‖² − 2b²‖ρf‖² − (12α/(α+2))‖f‖^{α+2}`.
pub fn virial_fsecond(f: &Field, p: &Params) -> f64 {
    8.0 * grad_norm_sq(f) - 2.0 * p.b() * p.b() * rho_norm_sq(f)
        - 12.0 * p.alpha() / (p.alpha() + 2.0) * lp_norm(f, p)
}

/// The Pohozaev functional
/// `H(f) = ‖∇f‖² − (b²/4)‖ρf‖² − (3α/(2(α+2)))‖f‖^{α+2}`;
/// along the flow `F″ = 8H` identically.
pub fn pohozaev_h(f: &Field, p: &Params) -> f64 {
    grad_norm_sq(f) - 0.25 * p.b() * p.b() * rho_norm_sq(f)
        - 1.5 * p.alpha() / (p.alpha() + 2.0) * lp_norm(f, p)
}

/// Nehari functional `K_ω(f) = ‖(∇+iA)f‖² + ω‖f‖² − ‖f‖^{α+2}`.
pub fn nehari_k(f: &Field, p: &Params, omega: f64) -> f64 {
    magnetic_kinetic(f, p) + omega * mass(f) - lp_norm(f, p)
}

/// Action `S_ω(f) = E(f) + (ω/2)M(f)`.
pub fn action_s(f: &Field, p: &Params, omega: f64) -> f64 {
    energy_e(f, p) + 0.5 * omega * mass(f)
}

/// The quadratic part `H_ω(f) = ‖(∇+iA)f‖² + ω‖f‖²` of the action; the
/// rescale `λ₀ = (H_ω(f)/‖f‖^{α+2})^{1/α}` projects any field onto the
/// Nehari set.
pub fn h_omega(f: &Field, p: &Params, omega: f64) -> f64 {
    magnetic_kinetic(f, p) + omega * mass(f)
}

/// Threshold comparison function `G(λ) = λ²/2 − C_opt·λ^{3α/2}/(α+2)`.
pub fn g_threshold(lambda: f64, c_opt: f64, p: &Params) -> f64 {
    assert!(lambda >= 0.0, "G is defined for nonnegative arguments");
    0.5 * lambda * lambda - c_opt / (p.alpha() + 2.0) * lambda.powf(1.5 * p.alpha())
}

/// Slack of the Cauchy–Schwarz virial inequality
/// `(Im ∫ f̄ x·∇f)² ≤ ‖xf‖²·(‖∇f‖² − (‖f‖^{α+2}/(C_opt‖f‖^{(4−α)/2}))^{4/(3α)})`
/// as RHS − LHS; nonnegative up to discretization error on decaying fields.
pub fn cs_virial_gap(f: &Field, c_opt: f64, p: &Params) -> Result<f64> {
    let frac = boundary_mass_fraction(f);
    if frac > BOUNDARY_MASS_LIMIT {
        return Err(Error::BoundaryMass {
            fraction: frac,
            limit: BOUNDARY_MASS_LIMIT,
        });
    }
    let ds = field_grid::partial_derivatives(f);
    let dv = f.grid().cell_volume();
    let flux = virial_fprime_from(f, &ds) / 4.0;
    let grad_sq = grad_norm_sq_from(&ds, dv);
    let m = mass(f);
    let lp = lp_norm(f, p);
    let xf_sq = virial_f(f);
    let reduced = (lp / (c_opt * m.powf((4.0 - p.alpha()) / 4.0)))
        .powf(4.0 / (3.0 * p.alpha()));
    Ok(xf_sq * (grad_sq - reduced) - flux * flux)
}

/// Fraction of the mass outside the ball of radius `0.9·min_j L_j`; the
/// indicator that the box truncation is felt by |x|-weighted quantities.
pub fn boundary_mass_fraction(f: &Field) -> f64 {
    let grid = f.grid();
    let v = f.values();
    let r_edge = 0.9 * grid.min_half_width();
    let r_edge_sq = r_edge * r_edge;
    let total = par_sum_indexed(v.len(), |i| v[i].norm_sqr());
    if total == 0.0 {
        return 0.0;
    }
    let outer = par_sum_indexed(v.len(), |i| {
        let x = grid.position(i);
        if x[0] * x[0] + x[1] * x[1] + x[2] * x[2] > r_edge_sq {
            v[i].norm_sqr()
        } else {
            0.0
        }
    });
    outer / total
}

/// L² inner product `∫ f ḡ` (complex), with the grid quadrature weight.
pub fn l2_inner(f: &Field, g: &Field) -> Complex64 {
    assert_eq!(f.grid().dims(), g.grid().dims(), "inner product across grids");
    let dv = f.grid().cell_volume();
    let (a, b) = (f.values(), g.values());
    par_sum_indexed_complex(a.len(), |i| a[i] * b[i].conj()) * dv
}

/// One row of the evolution diagnostics series.
#[derive(Debug, Clone, Copy)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub mass: f64,
    pub energy_e: f64,
    pub energy_e0: f64,
    pub angular_r: f64,
    pub grad_norm_sq: f64,
    pub mag_kinetic_sq: f64,
    pub rho_norm_sq: f64,
    /// `‖u‖^{α+2}_{L^{α+2}}`.
    pub lp_norm: f64,
    pub virial_f: f64,
    pub virial_fprime: f64,
    pub boundary_mass_fraction: f64,
}

impl DiagnosticsRecord {
    /// Fixed CSV column order for the series files.
    pub const CSV_HEADER: &'static str =
        "t,mass,E,E0,R,grad2,magkin2,rho2,lp,F,Fprime,boundary_frac";

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.t,
            self.mass,
            self.energy_e,
            self.energy_e0,
            self.angular_r,
            self.grad_norm_sq,
            self.mag_kinetic_sq,
            self.rho_norm_sq,
            self.lp_norm,
            self.virial_f,
            self.virial_fprime,
            self.boundary_mass_fraction,
        )
    }
}

/// Computes every diagnostic of a snapshot, sharing one set of spectral
/// derivatives across all derivative-dependent quantities.
pub fn diagnostics(f: &Field, p: &Params, t: f64) -> DiagnosticsRecord {
    let ds = field_grid::partial_derivatives(f);
    let m = mass(f);
    let lp = lp_norm(f, p);
    let rho_sq = rho_norm_sq(f);
    let split = magnetic_split_from(f, p, &ds);
    let e = 0.5 * split.total - lp / (p.alpha() + 2.0);
    let e0 = 0.5 * split.grad_sq + p.b() * p.b() / 8.0 * rho_sq - lp / (p.alpha() + 2.0);
    DiagnosticsRecord {
        t,
        mass: m,
        energy_e: e,
        energy_e0: e0,
        angular_r: split.b_angular / p.b(),
        grad_norm_sq: split.grad_sq,
        mag_kinetic_sq: split.total,
        rho_norm_sq: rho_sq,
        lp_norm: lp,
        virial_f: virial_f(f),
        virial_fprime: virial_fprime_from(f, &ds),
        boundary_mass_fraction: boundary_mass_fraction(f),
    }
}

//! Decidable global-existence / blow-up criteria on initial data, with
//! evidence-carrying verdicts.
//!
//! Every classifier reports the raw numbers behind its decision: each
//! inequality that was consulted appears in the evidence map with both sides
//! and the signed margin `lhs − rhs`, so a verdict can be audited (and
//! recomputed independently) without rerunning the classifier.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field_grid::{Field, Params};
use crate::functionals::{self, DiagnosticsRecord, BOUNDARY_MASS_LIMIT};
use crate::soliton_q::QConstants;

/// Relative tolerance inside which two sides of an inequality are treated as
/// equal; verdicts that would hinge on such a knife edge are downgraded.
pub const EQUALITY_REL_TOL: f64 = 1e-9;

/// Predicted behavior of a datum under the flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    /// Mass-critical datum strictly below the soliton mass: global.
    GlobalMassCritical,
    /// Blow-up certificate: rotation-free energy `E₀ < 0`.
    BlowupKiefferLoss1,
    /// Blow-up certificate: `E₀ = 0` and inward virial flux.
    BlowupKiefferLoss2,
    /// Blow-up certificate: `E₀ > 0` and flux below `−√(2E₀)‖xu₀‖`.
    BlowupKiefferLoss3,
    /// Supercritical, strictly below the energy-mass threshold with
    /// sub-soliton gradient product: global.
    GlobalBelowThreshold,
    /// Supercritical, strictly below the energy-mass threshold with
    /// super-soliton gradient product: blow-up.
    BlowupBelowThreshold,
    /// Exactly at the energy-mass threshold with sub-soliton gradient: global.
    GlobalAtThreshold,
    /// At a threshold where theory leaves two alternatives, or a comparison
    /// too close to equality to call.
    ConditionalAtThreshold,
    /// Supercritical, above the threshold, all four blow-up conditions hold.
    BlowupAboveThreshold,
    /// Conserved energy `E < 0`: blow-up.
    NegativeEnergyBlowup,
    /// No criterion applied.
    Indeterminate,
}

/// One consulted inequality: `lhs` compared against `rhs`, with the signed
/// slack `margin = lhs − rhs`. The key under which a comparison is stored
/// names the criterion; which sign of the margin satisfies it follows from
/// that criterion's direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
}

impl Comparison {
    fn new(lhs: f64, rhs: f64) -> Self {
        Comparison {
            lhs,
            rhs,
            margin: lhs - rhs,
        }
    }
}

/// Tolerances a report's verdict was decided under.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Relative equality band for inequality decisions.
    pub equality_rel: f64,
    /// Boundary-mass fraction above which weighted integrals are refused.
    pub boundary_mass_limit: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            equality_rel: EQUALITY_REL_TOL,
            boundary_mass_limit: BOUNDARY_MASS_LIMIT,
        }
    }
}

/// A verdict together with the numbers that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub verdict: Verdict,
    pub alpha: f64,
    pub b: f64,
    pub evidence: BTreeMap<String, Comparison>,
    pub tolerances: Tolerances,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl ClassificationReport {
    fn new(verdict: Verdict, p: &Params, evidence: BTreeMap<String, Comparison>) -> Self {
        ClassificationReport {
            verdict,
            alpha: p.alpha(),
            b: p.b(),
            evidence,
            tolerances: Tolerances::default(),
            note: None,
        }
    }

    fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    /// Deterministic JSON rendering (keys sorted, no timestamps).
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Signed decision against an equality band: `Holds`/`Fails` only when the
/// margin clears `tol·scale`, otherwise the comparison is a knife edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Decision {
    Holds,
    Knife,
    Fails,
}

fn decide(margin: f64, scale: f64) -> Decision {
    let band = EQUALITY_REL_TOL * scale.abs().max(f64::MIN_POSITIVE);
    if margin > band {
        Decision::Holds
    } else if margin < -band {
        Decision::Fails
    } else {
        Decision::Knife
    }
}

fn check_finite(u0: &Field) -> Result<()> {
    if !u0.is_finite() {
        return Err(Error::NonFinite("classification input".into()));
    }
    Ok(())
}

fn check_boundary(d: &DiagnosticsRecord) -> Result<()> {
    if d.boundary_mass_fraction > BOUNDARY_MASS_LIMIT {
        return Err(Error::BoundaryMass {
            fraction: d.boundary_mass_fraction,
            limit: BOUNDARY_MASS_LIMIT,
        });
    }
    Ok(())
}

fn check_alpha_matches(p: &Params, qc: &QConstants) -> Result<()> {
    if (p.alpha() - qc.alpha).abs() > 1e-12 {
        return Err(Error::WrongAlpha {
            expected: p.alpha(),
            got: qc.alpha,
        });
    }
    Ok(())
}

/// Scale against which `E₀ ≈ 0` is judged: the sum of the absolute values of
/// its three constituents.
fn e0_scale(d: &DiagnosticsRecord, p: &Params) -> f64 {
    0.5 * d.grad_norm_sq
        + p.b() * p.b() / 8.0 * d.rho_norm_sq
        + d.lp_norm / (p.alpha() + 2.0)
}

/// Scale for the virial flux `Im∫ x·∇u ū`, from its Cauchy–Schwarz bound.
fn flux_scale(d: &DiagnosticsRecord) -> f64 {
    (d.virial_f * d.grad_norm_sq).sqrt()
}

/// Evaluates the blow-up certificates in order — the three virial conditions
/// (1) `E₀ < 0`, (2) `E₀ = 0` and flux `< 0`, (3) `E₀ > 0` and flux
/// `< −√(2E₀)‖xu₀‖` — then the unconditional `E < 0` criterion. Records
/// every consulted comparison and returns the first verdict earned, if any.
fn blowup_certificates(
    d: &DiagnosticsRecord,
    p: &Params,
    evidence: &mut BTreeMap<String, Comparison>,
) -> Option<Verdict> {
    let flux = d.virial_fprime / 4.0;
    let e0 = d.energy_e0;
    let es = e0_scale(d, p);
    let fs = flux_scale(d);

    evidence.insert("blowup_cond1_rot_energy".into(), Comparison::new(e0, 0.0));
    evidence.insert("blowup_cond2_flux".into(), Comparison::new(flux, 0.0));
    evidence.insert(
        "blowup_neg_energy".into(),
        Comparison::new(d.energy_e, 0.0),
    );

    let e0_sign = decide(-e0, es);
    if e0_sign == Decision::Holds {
        return Some(Verdict::BlowupKiefferLoss1);
    }
    if e0_sign == Decision::Knife {
        // E₀ = 0 within tolerance: condition (2).
        if decide(-flux, fs) == Decision::Holds {
            return Some(Verdict::BlowupKiefferLoss2);
        }
    } else {
        // E₀ > 0 strictly: condition (3).
        let bound = -(2.0 * e0 * d.virial_f).sqrt();
        evidence.insert(
            "blowup_cond3_flux_bound".into(),
            Comparison::new(flux, bound),
        );
        if decide(bound - flux, fs) == Decision::Holds {
            return Some(Verdict::BlowupKiefferLoss3);
        }
    }
    if decide(-d.energy_e, es) == Decision::Holds {
        return Some(Verdict::NegativeEnergyBlowup);
    }
    None
}

/// Classifies a datum by the virial blow-up certificates alone: evaluates
/// conditions (1)–(3) in order and returns the first satisfied, or
/// `Indeterminate`. The unconditional `E < 0` criterion is reported in the
/// evidence but does not decide here. Requires `α ≥ 4/3` (the virial
/// coefficient changes sign below it) and negligible boundary mass.
pub fn classify_kieffer_loss(u0: &Field, p: &Params) -> Result<ClassificationReport> {
    check_finite(u0)?;
    if p.alpha() < 4.0 / 3.0 - 1e-12 {
        return Err(Error::InvalidParams(format!(
            "blow-up certificates require alpha >= 4/3, got {}",
            p.alpha()
        )));
    }
    let d = functionals::diagnostics(u0, p, 0.0);
    check_boundary(&d)?;
    let mut evidence = BTreeMap::new();
    let verdict = match blowup_certificates(&d, p, &mut evidence) {
        Some(v @ (Verdict::BlowupKiefferLoss1
        | Verdict::BlowupKiefferLoss2
        | Verdict::BlowupKiefferLoss3)) => v,
        // The E < 0 certificate is outside this classifier's mandate.
        _ => Verdict::Indeterminate,
    };
    Ok(ClassificationReport::new(verdict, p, evidence))
}

/// Mass-critical (`α = 4/3`) classification: global existence iff the mass
/// is strictly below the soliton mass; at or above it, falls back to the
/// blow-up certificates; exact threshold mass with no certificate is open.
pub fn classify_mass_critical(
    u0: &Field,
    p: &Params,
    qc: &QConstants,
) -> Result<ClassificationReport> {
    check_finite(u0)?;
    if !p.is_mass_critical() {
        return Err(Error::WrongAlpha {
            expected: crate::field_grid::MASS_CRITICAL_ALPHA,
            got: p.alpha(),
        });
    }
    check_alpha_matches(p, qc)?;
    let d = functionals::diagnostics(u0, p, 0.0);
    let mut evidence = BTreeMap::new();
    let mass_cmp = Comparison::new(d.mass, qc.mass_q);
    evidence.insert("mass_vs_soliton_mass".into(), mass_cmp);

    match decide(-mass_cmp.margin, qc.mass_q) {
        Decision::Holds => {
            return Ok(ClassificationReport::new(
                Verdict::GlobalMassCritical,
                p,
                evidence,
            ))
        }
        Decision::Knife | Decision::Fails => {}
    }

    // At or above the soliton mass the virial certificates may still decide.
    check_boundary(&d)?;
    if let Some(v) = blowup_certificates(&d, p, &mut evidence) {
        return Ok(ClassificationReport::new(v, p, evidence));
    }
    let report = ClassificationReport::new(Verdict::Indeterminate, p, evidence);
    Ok(if decide(-mass_cmp.margin, qc.mass_q) == Decision::Knife {
        report.with_note("mass exactly at the soliton mass: minimal-mass behavior is open")
    } else {
        report
    })
}

/// `λ₀ = 16E₀(1 − e0_mq/(E₀M^{σc}))`, the threshold gap that drives the
/// above-threshold blow-up conditions, cross-checked against the implicit
/// equation it solves (a consistency test of the soliton constants).
pub fn lambda0(e0: f64, mass: f64, qc: &QConstants) -> Result<f64> {
    if !(e0 > 0.0) {
        return Err(Error::InvalidParams(format!(
            "lambda0 requires E0 > 0, got {e0}"
        )));
    }
    if !qc.sigma_c.is_finite() {
        return Err(Error::Degenerate(
            "lambda0 requires supercritical soliton constants".into(),
        ));
    }
    let alpha = qc.alpha;
    let t_lhs = e0 * mass.powf(qc.sigma_c);
    let lam = 16.0 * e0 * (1.0 - qc.e0_mq / t_lhs);

    // Residual of the implicit form: with W = C_opt·M^{(4−α)/4},
    // 3αW/(2(α+2)) = ((α+2)(16E₀−λ₀)/(4(3α−4)W))^{(4−3α)/(3α)}.
    let w = qc.c_opt * mass.powf((4.0 - alpha) / 4.0);
    let lhs = 3.0 * alpha * w / (2.0 * (alpha + 2.0));
    let base = (alpha + 2.0) * (16.0 * e0 - lam) / (4.0 * (3.0 * alpha - 4.0) * w);
    let rhs = base.powf((4.0 - 3.0 * alpha) / (3.0 * alpha));
    let residual = (lhs - rhs).abs() / lhs.abs().max(f64::MIN_POSITIVE);
    if residual > 1e-9 {
        return Err(Error::Unconverged {
            what: "threshold gap implicit-equation residual",
            residual,
            tol: 1e-9,
        });
    }
    Ok(lam)
}

/// Outcome of evaluating the four above-threshold conditions.
struct AboveConditions {
    all_hold: bool,
    formulations_agree: bool,
}

/// Evaluates the four above-threshold blow-up conditions and their
/// reformulation through `λ₀` and `z(t) = ‖xu(t)‖`, recording both sets:
///
/// 1. `E₀M^{σc} ≥ e0_mq`  ⟺  `λ₀ ≥ 0`;
/// 2. `(E₀M^{σc}/e0_mq)(1 − (F′)²/(32E₀F)) ≤ 1`  ⟺  `(z′(0))² ≥ λ₀/2`;
/// 3. `‖u₀‖^{α+2}_{α+2}‖u₀‖^{2σc} > lp·M^{σc} of the soliton`  ⟺
///    `F″(u₀) + 4b²‖ρu₀‖² < λ₀`;
/// 4. flux `≤ 0`  ⟺  `z′(0) ≤ 0`.
///
/// The comparison constant in (2) is the one under which the two
/// formulations are algebraically identical.
fn conditions_above(
    d: &DiagnosticsRecord,
    p: &Params,
    qc: &QConstants,
    evidence: &mut BTreeMap<String, Comparison>,
) -> Result<AboveConditions> {
    let e0 = d.energy_e0;
    let mass = d.mass;
    let flux = d.virial_fprime / 4.0;
    let t_lhs = e0 * mass.powf(qc.sigma_c);
    let lam = lambda0(e0, mass, qc)?;
    let ratio = t_lhs / qc.e0_mq;

    let c1 = Comparison::new(t_lhs, qc.e0_mq);
    let c2 = Comparison::new(
        ratio * (1.0 - d.virial_fprime * d.virial_fprime / (32.0 * e0 * d.virial_f)),
        1.0,
    );
    let c3 = Comparison::new(
        d.lp_norm * mass.powf(qc.sigma_c),
        qc.lp_mass_product,
    );
    let c4 = Comparison::new(flux, 0.0);
    evidence.insert("above_cond1_energy_product".into(), c1);
    evidence.insert("above_cond2_flux_ratio".into(), c2);
    evidence.insert("above_cond3_potential_product".into(), c3);
    evidence.insert("above_cond4_flux_sign".into(), c4);

    let zprime = d.virial_fprime / (2.0 * d.virial_f.sqrt());
    let fsecond = 8.0 * d.grad_norm_sq
        - 2.0 * p.b() * p.b() * d.rho_norm_sq
        - 12.0 * p.alpha() / (p.alpha() + 2.0) * d.lp_norm;
    let r1 = Comparison::new(lam, 0.0);
    let r2 = Comparison::new(zprime * zprime, 0.5 * lam);
    let r3 = Comparison::new(fsecond + 4.0 * p.b() * p.b() * d.rho_norm_sq, lam);
    let r4 = Comparison::new(zprime, 0.0);
    evidence.insert("reform1_threshold_gap".into(), r1);
    evidence.insert("reform2_zprime_sq".into(), r2);
    evidence.insert("reform3_virial_second".into(), r3);
    evidence.insert("reform4_zprime_sign".into(), r4);

    let fs = flux_scale(d);
    let zs = fs / (2.0 * d.virial_f.sqrt().max(f64::MIN_POSITIVE));
    let primal = [
        decide(c1.margin, c1.lhs.abs().max(c1.rhs)),
        decide(-c2.margin, 1.0),
        decide(c3.margin, c3.lhs.abs().max(c3.rhs)),
        decide(-c4.margin, fs),
    ];
    let reform = [
        decide(r1.margin, 16.0 * e0),
        decide(r2.margin, zs * zs + 0.5 * lam.abs()),
        decide(-r3.margin, r3.lhs.abs().max(lam.abs())),
        decide(-r4.margin, zs),
    ];
    let formulations_agree = primal
        .iter()
        .zip(&reform)
        .all(|(a, b)| a == b || *a == Decision::Knife || *b == Decision::Knife);
    let all_hold = primal.iter().all(|s| *s == Decision::Holds);
    Ok(AboveConditions {
        all_hold,
        formulations_agree,
    })
}

/// Above-threshold classification: blow-up iff all four conditions hold
/// strictly. Requires supercritical `α`, `E₀ > 0`, and a datum the weighted
/// integrals can trust.
pub fn classify_above(u0: &Field, p: &Params, qc: &QConstants) -> Result<ClassificationReport> {
    check_finite(u0)?;
    require_supercritical(p, qc)?;
    let d = functionals::diagnostics(u0, p, 0.0);
    check_boundary(&d)?;
    if !(d.energy_e0 > 0.0) {
        return Err(Error::Degenerate(format!(
            "above-threshold conditions need E0 > 0, got {}",
            d.energy_e0
        )));
    }
    if !(d.virial_f > 0.0) {
        return Err(Error::Degenerate(
            "above-threshold conditions need a nonzero datum (F > 0)".into(),
        ));
    }
    let mut evidence = BTreeMap::new();
    let out = conditions_above(&d, p, qc, &mut evidence)?;
    let report = if !out.formulations_agree {
        ClassificationReport::new(Verdict::Indeterminate, p, evidence)
            .with_note("condition formulations disagree: datum sits on a knife edge")
    } else if out.all_hold {
        ClassificationReport::new(Verdict::BlowupAboveThreshold, p, evidence)
    } else {
        ClassificationReport::new(Verdict::Indeterminate, p, evidence)
    };
    Ok(report)
}

fn require_supercritical(p: &Params, qc: &QConstants) -> Result<()> {
    if p.alpha() <= 4.0 / 3.0 + 1e-12 || p.alpha() >= 4.0 {
        return Err(Error::InvalidParams(format!(
            "supercritical classification requires 4/3 < alpha < 4, got {}",
            p.alpha()
        )));
    }
    check_alpha_matches(p, qc)?;
    if !qc.sigma_c.is_finite() || !qc.e0_mq.is_finite() {
        return Err(Error::Degenerate(
            "soliton constants lack supercritical thresholds".into(),
        ));
    }
    Ok(())
}

/// Full supercritical (`4/3 < α < 4`) decision tree:
/// blow-up certificates first; then the energy-mass threshold `E₀M^{σc}`
/// against `e0_mq` (below: the gradient product decides global vs blow-up;
/// at: global only for sub-soliton gradient); above it, the magnetic-energy
/// global criterion (`E`, `‖(∇+iA)u₀‖` in place of `E₀`, `‖∇u₀‖`) and the
/// four blow-up conditions are both consulted.
pub fn classify_supercritical(
    u0: &Field,
    p: &Params,
    qc: &QConstants,
) -> Result<ClassificationReport> {
    check_finite(u0)?;
    require_supercritical(p, qc)?;
    let d = functionals::diagnostics(u0, p, 0.0);
    check_boundary(&d)?;

    let mut evidence = BTreeMap::new();
    if let Some(v) = blowup_certificates(&d, p, &mut evidence) {
        return Ok(ClassificationReport::new(v, p, evidence));
    }

    let sigma = qc.sigma_c;
    let t_lhs = d.energy_e0 * d.mass.powf(sigma);
    let g_lhs = d.grad_norm_sq.sqrt() * d.mass.powf(0.5 * sigma);
    let me_lhs = d.energy_e * d.mass.powf(sigma);
    let mg_lhs = d.mag_kinetic_sq.sqrt() * d.mass.powf(0.5 * sigma);
    let energy_cmp = Comparison::new(t_lhs, qc.e0_mq);
    let grad_cmp = Comparison::new(g_lhs, qc.grad_mass_product);
    let mag_energy_cmp = Comparison::new(me_lhs, qc.e0_mq);
    let mag_grad_cmp = Comparison::new(mg_lhs, qc.grad_mass_product);
    evidence.insert("rot_energy_product".into(), energy_cmp);
    evidence.insert("grad_mass_product".into(), grad_cmp);
    evidence.insert("mag_energy_product".into(), mag_energy_cmp);
    evidence.insert("mag_kinetic_product".into(), mag_grad_cmp);

    let e_scale = t_lhs.abs().max(qc.e0_mq);
    let g_scale = g_lhs.max(qc.grad_mass_product);
    let energy_side = decide(-energy_cmp.margin, e_scale);
    let grad_side = decide(-grad_cmp.margin, g_scale);

    let verdict = match energy_side {
        // Strictly below the threshold: the gradient product decides.
        Decision::Holds => match grad_side {
            Decision::Holds => Verdict::GlobalBelowThreshold,
            Decision::Fails => Verdict::BlowupBelowThreshold,
            Decision::Knife => Verdict::ConditionalAtThreshold,
        },
        // At the threshold: global below the soliton gradient; the
        // super-soliton side leaves blow-up or soliton capture open.
        Decision::Knife => match grad_side {
            Decision::Holds => Verdict::GlobalAtThreshold,
            Decision::Knife => {
                let report = ClassificationReport::new(Verdict::Indeterminate, p, evidence);
                return Ok(report.with_note(
                    "equality in both threshold quantities is numerically unreachable",
                ));
            }
            Decision::Fails => Verdict::ConditionalAtThreshold,
        },
        // Strictly above: magnetic global criterion and the four blow-up
        // conditions are both live.
        Decision::Fails => {
            let mag_global = decide(-mag_energy_cmp.margin, me_lhs.abs().max(qc.e0_mq))
                == Decision::Holds
                && decide(-mag_grad_cmp.margin, mg_lhs.max(qc.grad_mass_product))
                    == Decision::Holds
                && d.energy_e >= 0.0;
            let above = if d.energy_e0 > 0.0 && d.virial_f > 0.0 {
                Some(conditions_above(&d, p, qc, &mut evidence)?)
            } else {
                None
            };
            let blow = above.as_ref().map_or(false, |a| a.all_hold && a.formulations_agree);
            match (mag_global, blow) {
                (true, false) => Verdict::GlobalBelowThreshold,
                (false, true) => Verdict::BlowupAboveThreshold,
                (true, true) => {
                    let report =
                        ClassificationReport::new(Verdict::Indeterminate, p, evidence);
                    return Ok(report.with_note(
                        "global and blow-up certificates both fired; datum is numerically suspect",
                    ));
                }
                (false, false) => Verdict::Indeterminate,
            }
        }
    };
    Ok(ClassificationReport::new(verdict, p, evidence))
}

//! End-to-end acceptance battery for the toolkit.
//!
//! Eleven numbered criteria cover the soliton constants, the identity and
//! inequality property suites, conservation and virial consistency of the
//! integrator, the mass-critical and supercritical dichotomies, above-threshold
//! blow-up, the variational ground states, strong instability, and binary
//! determinism across thread counts. Every criterion prints one
//! `criterion N: PASS` / `criterion N: FAIL` line; the test fails if any
//! criterion does. All tolerances are pinned as constants below.
//!
//! The full battery integrates several 64³–96³ evolutions to t = 5 and takes
//! about twenty minutes on one core. Run it with
//! `cargo test -p magnls-cli --test acceptance -- --nocapture` to watch the
//! per-criterion lines appear as they finish.

mod oracles;

use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use magnls_core::classify::{classify_above, classify_supercritical, Verdict};
use magnls_core::dynamics::{evolve, EvolveConfig, EvolveStatus};
use magnls_core::field_grid::{gaussian_packet, sample_radial, Grid, Params};
use magnls_core::functionals::{
    self, diagnostics, grad_norm_sq, magnetic_kinetic, virial_fsecond, DiagnosticsRecord,
};
use magnls_core::ground_states::{
    fitted_omega_constant, instability_experiment, minimize_action, minimize_im_c, scaling_curve,
};
use magnls_core::soliton_q::{q_constants, solve_q, QConstants, RadialProfile};

// --- pinned tolerances and budgets ------------------------------------------

/// Residual bound for the two linear stationarity relations among the soliton
/// norms (criterion 1).
const POHOZAEV_TOL: f64 = 1e-8;
/// Relative agreement required between the shooting solver's soliton mass and
/// the independent fixed-point mesh oracle (criterion 1).
const MASS_AGREEMENT_TOL: f64 = 1e-6;
/// Wall-clock budget per power for the soliton solve (criterion 1).
const SOLITON_BUDGET: Duration = Duration::from_secs(5);

/// Identity-suite residual bounds (criterion 2): the magnetic-norm split, the
/// energy/angular-momentum split, and the virial second-derivative identity.
const IDENTITY_SPLIT_TOL: f64 = 1e-10;
const IDENTITY_ENERGY_TOL: f64 = 1e-9;
const IDENTITY_VIRIAL_TOL: f64 = 1e-10;
/// Samples per property suite (criteria 2 and 3) and its wall-clock budget.
const SUITE_SAMPLES: u64 = 1000;
const SUITE_BUDGET: Duration = Duration::from_secs(60);

/// Conservation drift bounds at dt = 1e-3 over t ∈ [0,1] (criterion 4): mass
/// and energy relative to their initial values, angular momentum absolute
/// (the datum carries R(0) = 0, so a relative bound would divide by noise).
const DRIFT_MASS_REL: f64 = 1e-10;
const DRIFT_ENERGY_REL: f64 = 1e-6;
const DRIFT_ANGULAR_ABS: f64 = 1e-6;
/// Minimal factor by which the energy and angular drifts must shrink when the
/// step is halved (criterion 4; the splitting converges at second order, so
/// the clean value is 4).
const DRIFT_SHRINK_MIN: f64 = 3.5;

/// Relative mismatch allowed between the centered second difference of
/// F(u(t)) = ‖xu(t)‖² along a dt = 5e-4 trajectory and the virial
/// second-derivative functional at the center time (criterion 5).
const FSECOND_MATCH_REL: f64 = 0.01;

/// Slack factor on the virial vanishing-time bound for the negative-energy
/// blow-up datum (criterion 6): detection must land at t ≤ slack · bound.
const VANISHING_SLACK: f64 = 1.2;

/// Stationarity quality of the action minimizer (criterion 9): |K_ω| and |H|
/// relative to ‖∇φ‖², and the absolute L² Euler–Lagrange residual.
const STATIONARITY_REL: f64 = 1e-6;
const EULER_LAGRANGE_TOL: f64 = 1e-6;
/// Wall-clock budget per minimizer (criterion 9).
const MINIMIZER_BUDGET: Duration = Duration::from_secs(600);

/// Pointwise bound on | |u(1,x)| − |φ(x)| | for the unperturbed ground-state
/// run (criterion 10).
const MODULUS_PRESERVATION: f64 = 1e-6;

/// Seeds for the property suites: the main 1000-sample run and the short
/// determinism rerun.
const SUITE_SEED: u64 = 20260823;
const RERUN_SEED: u64 = 7;

/// Frozen oracle values: soliton mass from the fixed-point mesh solver in
/// `oracles.rs` under two-level Richardson extrapolation (meshes 4000, 8000,
/// 16000 over [0, 25]). Guards the oracle itself against silent drift; the
/// runtime oracle must reproduce them to `ORACLE_REPRO_TOL` relative.
const ORACLE_MASS: [(f64, f64); 3] = [
    (4.0 / 3.0, 6.378311578295e1),
    (2.0, 1.889725129379e1),
    (3.0, 3.194196268928e0),
];
const ORACLE_REPRO_TOL: f64 = 1e-9;

// --- harness ----------------------------------------------------------------

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_magnls")
}

fn scratch(sub: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR"))
        .join("acceptance")
        .join(sub);
    std::fs::create_dir_all(&dir).expect("scratch dir");
    dir
}

/// Runs the CLI with the given arguments and extra environment, returning the
/// exit code. Stdout/stderr go to the parent so long runs show progress.
fn run_cli(args: &[&str], envs: &[(&str, &str)]) -> i32 {
    let mut cmd = Command::new(bin());
    cmd.args(args);
    for (k, v) in envs {
        cmd.env(k, v);
    }
    let status = cmd.status().expect("spawn magnls");
    status.code().unwrap_or(-1)
}

fn read_json(path: &PathBuf) -> serde_json::Value {
    let bytes = std::fs::read(path).unwrap_or_else(|e| panic!("read {}: {e}", path.display()));
    serde_json::from_slice(&bytes).unwrap_or_else(|e| panic!("parse {}: {e}", path.display()))
}

fn json_f64(v: &serde_json::Value, path: &[&str]) -> f64 {
    let mut cur = v;
    for k in path {
        cur = &cur[*k];
    }
    cur.as_f64()
        .unwrap_or_else(|| panic!("missing number at {}", path.join(".")))
}

type CriterionResult = Result<String, String>;

struct SolitonSet {
    profile: RadialProfile,
    qc: QConstants,
}

/// Artifacts shared between criteria: solved soliton profiles and the wide
/// grid used for classification (sized so the boundary-mass gate passes for
/// every solitonic datum used below).
struct Context {
    alpha_crit: SolitonSet,
    alpha_two: SolitonSet,
    cls_grid: Arc<Grid>,
}

fn max_series<F: Fn(&DiagnosticsRecord) -> f64>(series: &[DiagnosticsRecord], f: F) -> f64 {
    series.iter().map(f).fold(f64::NEG_INFINITY, f64::max)
}

fn main_config(dt: f64, t_final: f64) -> EvolveConfig {
    EvolveConfig {
        dt_initial: dt,
        t_final,
        adapt: true,
        blowup_grad_ratio: 40.0,
        tail_fraction_max: 1e-4,
        record_stride: 10,
    }
}

fn collapse_config(dt: f64, t_final: f64) -> EvolveConfig {
    EvolveConfig {
        dt_initial: dt,
        t_final,
        adapt: true,
        blowup_grad_ratio: 2.0,
        tail_fraction_max: 1e-2,
        record_stride: 10,
    }
}

// --- criterion 1: soliton constants -----------------------------------------

fn criterion_soliton(ctx: &mut Option<Context>) -> CriterionResult {
    let mut detail = String::new();
    let mut sets: Vec<(f64, SolitonSet)> = Vec::new();
    for &(alpha, frozen_mass) in &ORACLE_MASS {
        let start = Instant::now();
        let profile = solve_q(alpha, 1e-10).map_err(|e| format!("solve_q({alpha}): {e}"))?;
        let qc = q_constants(&profile).map_err(|e| format!("q_constants({alpha}): {e}"))?;
        let elapsed = start.elapsed();
        let oracle = oracles::soliton_oracle(alpha);

        let (m, g, lp) = (qc.mass_q, qc.grad_q_sq, qc.lp_q);
        let pairing = (g + m - lp).abs() / lp;
        let dilation = (0.5 * g + 1.5 * m - 3.0 * lp / (alpha + 2.0)).abs() / lp;
        if pairing >= POHOZAEV_TOL || dilation >= POHOZAEV_TOL {
            return Err(format!(
                "alpha {alpha}: stationarity residuals {pairing:.2e} / {dilation:.2e} \
                 exceed {POHOZAEV_TOL:.0e}"
            ));
        }
        let oracle_drift = (oracle.mass - frozen_mass).abs() / frozen_mass;
        if oracle_drift >= ORACLE_REPRO_TOL {
            return Err(format!(
                "alpha {alpha}: oracle mass {:.12e} drifted {oracle_drift:.2e} from its frozen \
                 value {frozen_mass:.12e}",
                oracle.mass
            ));
        }
        let agreement = (m - oracle.mass).abs() / oracle.mass;
        if agreement >= MASS_AGREEMENT_TOL {
            return Err(format!(
                "alpha {alpha}: solver mass {m:.12e} vs oracle {:.12e}, relative gap \
                 {agreement:.2e} exceeds {MASS_AGREEMENT_TOL:.0e}",
                oracle.mass
            ));
        }
        if elapsed > SOLITON_BUDGET {
            return Err(format!(
                "alpha {alpha}: solve took {elapsed:.1?} (budget {SOLITON_BUDGET:?})"
            ));
        }
        detail.push_str(&format!(
            "alpha {alpha}: residuals {pairing:.1e}/{dilation:.1e}, mass gap {agreement:.1e}, \
             {elapsed:.2?}; "
        ));
        sets.push((alpha, SolitonSet { profile, qc }));
    }

    let mut crit = None;
    let mut two = None;
    for (alpha, set) in sets {
        if alpha < 1.5 {
            crit = Some(set);
        } else if alpha < 2.5 {
            two = Some(set);
        }
    }
    *ctx = Some(Context {
        alpha_crit: crit.expect("critical power solved"),
        alpha_two: two.expect("alpha 2 solved"),
        cls_grid: Grid::new([128; 3], [12.0; 3]).expect("classification grid"),
    });
    Ok(detail)
}

// --- criteria 2 and 3: property suites --------------------------------------

/// Runs the 1000-sample property suite once; criterion 2 reads the identity
/// residuals, criterion 3 the inequality violation counts.
fn run_property_suite() -> (PathBuf, Duration, i32) {
    let out = scratch("verify_main");
    let start = Instant::now();
    let code = run_cli(
        &[
            "verify",
            "--samples",
            &SUITE_SAMPLES.to_string(),
            "--seed",
            &SUITE_SEED.to_string(),
            "--out",
            out.to_str().unwrap(),
        ],
        &[],
    );
    (out, start.elapsed(), code)
}

fn criterion_identities(report: &serde_json::Value, elapsed: Duration) -> CriterionResult {
    let checks = [
        ("magnetic_norm_split", IDENTITY_SPLIT_TOL),
        ("energy_angular_split", IDENTITY_ENERGY_TOL),
        ("virial_eight_h", IDENTITY_VIRIAL_TOL),
    ];
    let mut detail = String::new();
    for (name, tol) in checks {
        let worst = json_f64(report, &["identities", name, "worst"]);
        let samples = json_f64(report, &["identities", name, "samples"]);
        if samples < SUITE_SAMPLES as f64 {
            return Err(format!("{name}: only {samples} samples"));
        }
        if !(worst <= tol) {
            return Err(format!("{name}: worst residual {worst:.2e} exceeds {tol:.0e}"));
        }
        detail.push_str(&format!("{name} worst {worst:.1e}; "));
    }
    if elapsed > SUITE_BUDGET {
        return Err(format!("suite took {elapsed:.1?} (budget {SUITE_BUDGET:?})"));
    }
    detail.push_str(&format!("{elapsed:.1?}"));
    Ok(detail)
}

fn criterion_inequalities(report: &serde_json::Value) -> CriterionResult {
    let names = [
        "diamagnetic",
        "spectral_gap",
        "interpolation_sharp",
        "interpolation_mass_critical",
        "cauchy_schwarz_virial",
    ];
    let mut detail = String::new();
    for name in names {
        let violations = json_f64(report, &["inequalities", name, "violations"]);
        let worst = json_f64(report, &["inequalities", name, "worst"]);
        if violations != 0.0 {
            return Err(format!("{name}: {violations} violations"));
        }
        detail.push_str(&format!("{name} worst margin {worst:.1e}; "));
    }
    let skipped = json_f64(report, &["boundary_skipped"]);
    detail.push_str(&format!("skipped {skipped}"));
    Ok(detail)
}

// --- criterion 4: conservation under step halving ---------------------------

fn criterion_conservation() -> CriterionResult {
    let datum: &[&str] = &[
        "--alpha", "2", "--b", "1", "--grid", "64", "--box", "8",
        "--data", "gaussian", "--amp", "0.75", "--widths", "1.2,1.5,1.8",
        "--center", "0.6,0.4,0", "--chirp", "0.15", "--t-final", "1", "--no-adapt",
    ];
    let mut drifts = Vec::new();
    for (dt, stride, tag) in [("1e-3", "10", "coarse"), ("5e-4", "20", "fine")] {
        let out = scratch(&format!("drift_{tag}"));
        let mut args: Vec<&str> = vec!["evolve"];
        args.extend_from_slice(datum);
        args.extend_from_slice(&[
            "--dt", dt, "--record-stride", stride, "--out", out.to_str().unwrap(),
        ]);
        let code = run_cli(&args, &[]);
        if code != 0 {
            return Err(format!("{tag} run exited {code}"));
        }
        let report = read_json(&out.join("report.json"));
        drifts.push((
            json_f64(&report, &["outcome", "drift", "mass"]),
            json_f64(&report, &["outcome", "drift", "energy"]),
            json_f64(&report, &["outcome", "drift", "angular"]),
        ));
    }
    let (mass_c, energy_c, angular_c) = drifts[0];
    let (_, energy_f, angular_f) = drifts[1];
    if !(mass_c < DRIFT_MASS_REL) {
        return Err(format!("mass drift {mass_c:.2e} exceeds {DRIFT_MASS_REL:.0e}"));
    }
    if !(energy_c < DRIFT_ENERGY_REL) {
        return Err(format!("energy drift {energy_c:.2e} exceeds {DRIFT_ENERGY_REL:.0e}"));
    }
    if !(angular_c < DRIFT_ANGULAR_ABS) {
        return Err(format!("angular drift {angular_c:.2e} exceeds {DRIFT_ANGULAR_ABS:.0e}"));
    }
    let shrink_e = energy_c / energy_f;
    let shrink_r = angular_c / angular_f;
    if !(shrink_e >= DRIFT_SHRINK_MIN && shrink_r >= DRIFT_SHRINK_MIN) {
        return Err(format!(
            "drift shrink factors {shrink_e:.2} (energy), {shrink_r:.2} (angular) \
             below {DRIFT_SHRINK_MIN}"
        ));
    }
    Ok(format!(
        "drifts mass {mass_c:.1e}, energy {energy_c:.1e}, angular {angular_c:.1e}; \
         halving shrinks energy {shrink_e:.2}x, angular {shrink_r:.2}x"
    ))
}

// --- criterion 5: virial second derivative along the flow -------------------

fn criterion_virial_consistency() -> CriterionResult {
    let p = Params::new(1.0, 2.0).map_err(|e| e.to_string())?;
    let grid = Grid::new([64; 3], [8.0; 3]).map_err(|e| e.to_string())?;
    let u0 = gaussian_packet(&grid, [1.2, 1.5, 1.8], 0.75, 0.15, [0.6, 0.4, 0.0])
        .map_err(|e| e.to_string())?;

    let dt = 5e-4;
    let t_center = 0.1;
    let mut series_cfg = main_config(dt, t_center + dt);
    series_cfg.adapt = false;
    series_cfg.record_stride = 1;
    let run = evolve(&u0, &p, &series_cfg).map_err(|e| e.to_string())?;
    if run.status != EvolveStatus::ReachedTFinal {
        return Err(format!("trajectory run ended {:?}", run.status));
    }
    let f_at = |t: f64| -> Result<f64, String> {
        run.series
            .iter()
            .find(|r| (r.t - t).abs() < dt / 4.0)
            .map(|r| r.virial_f)
            .ok_or_else(|| format!("no sample at t = {t}"))
    };
    let centered =
        (f_at(t_center + dt)? - 2.0 * f_at(t_center)? + f_at(t_center - dt)?) / (dt * dt);

    let mut state_cfg = main_config(dt, t_center);
    state_cfg.adapt = false;
    let mid = evolve(&u0, &p, &state_cfg).map_err(|e| e.to_string())?;
    if mid.status != EvolveStatus::ReachedTFinal {
        return Err(format!("center-state run ended {:?}", mid.status));
    }
    let functional = virial_fsecond(&mid.final_state, &p);
    let rel = (centered - functional).abs() / functional.abs();
    if !(rel < FSECOND_MATCH_REL) {
        return Err(format!(
            "second difference {centered:.6e} vs functional {functional:.6e}: \
             relative gap {rel:.2e} exceeds {FSECOND_MATCH_REL}"
        ));
    }
    Ok(format!(
        "F'' by centered difference {centered:.6e}, functional {functional:.6e}, gap {rel:.1e}"
    ))
}

// --- criterion 6: mass-critical dichotomy -----------------------------------

fn criterion_mass_critical(ctx: &Context) -> CriterionResult {
    let set = &ctx.alpha_crit;
    let p = Params::new(1.0, set.qc.alpha).map_err(|e| e.to_string())?;

    // Global side: mass ratio 0.9, unit dilation, integrated to t = 5. The
    // magnetic kinetic norm must stay below its cap at every recorded sample;
    // the cap is evaluated from wide-grid functionals of the datum.
    let amp_g = 0.9f64.sqrt();
    let grid_g = Grid::new([80; 3], [8.0; 3]).map_err(|e| e.to_string())?;
    let u0_g = sample_radial(&set.profile, &grid_g, amp_g, 1.0, [0.0; 3])
        .map_err(|e| e.to_string())?;
    let wide = sample_radial(&set.profile, &ctx.cls_grid, amp_g, 1.0, [0.0; 3])
        .map_err(|e| e.to_string())?;
    let d_wide = diagnostics(&wide, &p, 0.0);
    drop(wide);
    let mass_ratio = d_wide.mass / set.qc.mass_q;
    let cap = 2.0 * d_wide.energy_e / (1.0 - mass_ratio.powf(2.0 / 3.0));
    let run_g = evolve(&u0_g, &p, &main_config(2e-3, 5.0)).map_err(|e| e.to_string())?;
    if run_g.status != EvolveStatus::ReachedTFinal {
        return Err(format!("global run ended {:?} at t = {:.3}", run_g.status, run_g.t_end));
    }
    let kin_max = max_series(&run_g.series, |r| r.mag_kinetic_sq);
    if !(kin_max <= cap) {
        return Err(format!("magnetic kinetic max {kin_max:.4e} exceeds cap {cap:.4e}"));
    }

    // Blow-up side: mass ratio 1.2 with the dilation pushed until the reduced
    // energy is negative; detection must precede the virial vanishing-time
    // bound with slack.
    let amp_b = 1.2f64.sqrt();
    let lambda_b = 1.5;
    let grid_b = Grid::new([64; 3], [4.0; 3]).map_err(|e| e.to_string())?;
    let u0_b = sample_radial(&set.profile, &grid_b, amp_b, lambda_b, [0.0; 3])
        .map_err(|e| e.to_string())?;
    let wide_b = sample_radial(&set.profile, &ctx.cls_grid, amp_b, lambda_b, [0.0; 3])
        .map_err(|e| e.to_string())?;
    let d_b = diagnostics(&wide_b, &p, 0.0);
    drop(wide_b);
    if !(d_b.energy_e0 < 0.0) {
        return Err(format!("blow-up datum has E0 = {:.4e} >= 0", d_b.energy_e0));
    }
    let e0 = d_b.energy_e0;
    let fp = d_b.virial_fprime;
    let bound = (fp + (fp * fp - 32.0 * e0 * d_b.virial_f).sqrt()) / (-16.0 * e0);
    let run_b = evolve(&u0_b, &p, &collapse_config(1e-3, 2.0)).map_err(|e| e.to_string())?;
    if run_b.status != EvolveStatus::NumericalBlowUp {
        return Err(format!("blow-up run ended {:?} at t = {:.3}", run_b.status, run_b.t_end));
    }
    if !(run_b.t_end <= VANISHING_SLACK * bound) {
        return Err(format!(
            "detection at t = {:.4} exceeds {VANISHING_SLACK} x bound {bound:.4}",
            run_b.t_end
        ));
    }
    Ok(format!(
        "global: kinetic max {kin_max:.4e} <= cap {cap:.4e} to t = 5; blow-up: detected \
         t = {:.3} within bound {bound:.3} (E0 = {e0:.3e})",
        run_b.t_end
    ))
}

// --- criterion 7: supercritical dichotomy -----------------------------------

fn criterion_supercritical(ctx: &Context) -> CriterionResult {
    let set = &ctx.alpha_two;
    let p = Params::new(1.0, 2.0).map_err(|e| e.to_string())?;
    let grid = Grid::new([64, 64, 128], [4.0, 4.0, 8.0]).map_err(|e| e.to_string())?;
    let product_limit = set.qc.grad_mass_product;

    // This soliton is narrower than the critical one, so its classifications
    // get a finer wide grid that keeps eight points across the profile width.
    let cls = Grid::new([176; 3], [12.0; 3]).map_err(|e| e.to_string())?;

    // Sub-gradient side: below both thresholds; the free gradient-mass product
    // must stay under the soliton value at every recorded time through t = 5.
    let amp_sub = 0.75f64.sqrt();
    let wide_sub = sample_radial(&set.profile, &cls, amp_sub, 1.0, [0.0; 3])
        .map_err(|e| e.to_string())?;
    let verdict_sub = classify_supercritical(&wide_sub, &p, &set.qc)
        .map_err(|e| format!("classify sub datum: {e}"))?;
    drop(wide_sub);
    if verdict_sub.verdict != Verdict::GlobalBelowThreshold {
        return Err(format!("sub datum verdict {:?}", verdict_sub.verdict));
    }
    let u0_sub = sample_radial(&set.profile, &grid, amp_sub, 1.0, [0.0; 3])
        .map_err(|e| e.to_string())?;
    let run_sub = evolve(&u0_sub, &p, &main_config(2e-3, 5.0)).map_err(|e| e.to_string())?;
    drop(u0_sub);
    if run_sub.status != EvolveStatus::ReachedTFinal {
        return Err(format!(
            "sub run ended {:?} at t = {:.3}",
            run_sub.status, run_sub.t_end
        ));
    }
    let product_max = max_series(&run_sub.series, |r| {
        r.grad_norm_sq.sqrt() * r.mass.powf(0.5 * set.qc.sigma_c)
    });
    if !(product_max < product_limit) {
        return Err(format!(
            "sub run gradient-mass product reached {product_max:.4e} \
             (soliton value {product_limit:.4e})"
        ));
    }

    // Super-gradient side: still below the energy threshold but above the
    // gradient product; must collapse numerically, and the classifier must
    // have said so.
    let amp_super = 1.4f64.sqrt();
    let wide_super = sample_radial(&set.profile, &cls, amp_super, 1.0, [0.0; 3])
        .map_err(|e| e.to_string())?;
    let verdict_super = classify_supercritical(&wide_super, &p, &set.qc)
        .map_err(|e| format!("classify super datum: {e}"))?;
    drop(wide_super);
    if verdict_super.verdict != Verdict::BlowupBelowThreshold {
        return Err(format!("super datum verdict {:?}", verdict_super.verdict));
    }
    let u0_super = sample_radial(&set.profile, &grid, amp_super, 1.0, [0.0; 3])
        .map_err(|e| e.to_string())?;
    let run_super = evolve(&u0_super, &p, &collapse_config(1e-3, 5.0)).map_err(|e| e.to_string())?;
    if run_super.status != EvolveStatus::NumericalBlowUp {
        return Err(format!(
            "super run ended {:?} at t = {:.3}",
            run_super.status, run_super.t_end
        ));
    }
    Ok(format!(
        "sub: GlobalBelowThreshold, product max {product_max:.4e} < {product_limit:.4e} to \
         t = 5; super: BlowupBelowThreshold, collapse detected t = {:.3}",
        run_super.t_end
    ))
}

// --- criterion 8: above-threshold blow-up -----------------------------------

fn criterion_above_threshold(ctx: &Context) -> CriterionResult {
    let set = &ctx.alpha_two;
    let p = Params::new(1.0, 2.0).map_err(|e| e.to_string())?;

    // Inward-chirped Gaussian. The chirp drives the flux negative and lifts
    // the reduced energy above the threshold; the combination tested by the
    // second condition is chirp-invariant and equals the unchirped energy
    // product, so the amplitude is chosen to put that below threshold while
    // keeping the potential-term product above the soliton's.
    let widths = [1.0; 3];
    let (amp, chirp) = (3.2, 1.0);
    let wide = gaussian_packet(&ctx.cls_grid, widths, amp, chirp, [0.0; 3])
        .map_err(|e| e.to_string())?;
    let report = classify_above(&wide, &p, &set.qc).map_err(|e| format!("classify: {e}"))?;
    drop(wide);
    if report.verdict != Verdict::BlowupAboveThreshold {
        return Err(format!("verdict {:?}", report.verdict));
    }
    let margin = |name: &str| -> Result<f64, String> {
        report
            .evidence
            .get(name)
            .map(|c| c.margin)
            .ok_or_else(|| format!("missing evidence {name}"))
    };
    let c1 = margin("above_cond1_energy_product")?;
    let c2 = margin("above_cond2_flux_ratio")?;
    let c3 = margin("above_cond3_potential_product")?;
    let c4 = margin("above_cond4_flux_sign")?;
    if !(c1 >= 0.0 && c2 <= 0.0 && c3 > 0.0 && c4 <= 0.0) {
        return Err(format!(
            "condition margins {c1:.3e} / {c2:.3e} / {c3:.3e} / {c4:.3e} \
             inconsistent with the verdict"
        ));
    }

    let grid = Grid::new([64; 3], [8.0; 3]).map_err(|e| e.to_string())?;
    let u0 = gaussian_packet(&grid, widths, amp, chirp, [0.0; 3]).map_err(|e| e.to_string())?;
    let run = evolve(&u0, &p, &collapse_config(1e-3, 2.0)).map_err(|e| e.to_string())?;
    if run.status != EvolveStatus::NumericalBlowUp {
        return Err(format!("run ended {:?} at t = {:.3}", run.status, run.t_end));
    }
    Ok(format!(
        "all four conditions hold (margins {c1:.2e}, {c2:.2e}, {c3:.2e}, {c4:.2e}); \
         collapse detected t = {:.3}",
        run.t_end
    ))
}

// --- criterion 9: variational ground states ---------------------------------

fn criterion_ground_states() -> CriterionResult {
    let p = Params::new(1.0, 2.0).map_err(|e| e.to_string())?;

    let grid_a = Grid::new([96; 3], [10.0; 3]).map_err(|e| e.to_string())?;
    let start = Instant::now();
    let action = minimize_action(0.0, &p, &grid_a, 1e-6).map_err(|e| e.to_string())?;
    let action_time = start.elapsed();
    if action_time > MINIMIZER_BUDGET {
        return Err(format!("action minimizer took {action_time:.1?}"));
    }
    let grad = grad_norm_sq(&action.phi);
    let k_rel = action.k_omega.abs() / grad;
    let h_rel = action.h_value.abs() / grad;
    if !(k_rel < STATIONARITY_REL && h_rel < STATIONARITY_REL) {
        return Err(format!(
            "stationarity defects |K|/grad {k_rel:.2e}, |H|/grad {h_rel:.2e} \
             exceed {STATIONARITY_REL:.0e}"
        ));
    }
    if !(action.residual_el < EULER_LAGRANGE_TOL) {
        return Err(format!(
            "stationary-equation residual {:.2e} exceeds {EULER_LAGRANGE_TOL:.0e}",
            action.residual_el
        ));
    }
    if !(action.decay_delta > 0.0) {
        return Err(format!("fitted decay rate {:.3e} not positive", action.decay_delta));
    }

    // Ball-constrained energy minimizer at small mass: the frequency must be
    // interior to (−|b|, 0) with its shape-bound fit constant reported. The
    // mass must sit well under half the cap, since the kinetic norm of any
    // mass-c state is at least |b|·c and the minimizer must come to rest in
    // the interior half-ball.
    let grid_b = Grid::new([64; 3], [8.0; 3]).map_err(|e| e.to_string())?;
    let (c, cap) = (0.2, 1.0);
    let start = Instant::now();
    let ball = minimize_im_c(c, cap, &p, &grid_b, 1e-6).map_err(|e| e.to_string())?;
    let ball_time = start.elapsed();
    if ball_time > MINIMIZER_BUDGET {
        return Err(format!("ball minimizer took {ball_time:.1?}"));
    }
    if !(-p.b().abs() < ball.omega && ball.omega < 0.0) {
        return Err(format!("frequency {:.6e} not interior to (-|b|, 0)", ball.omega));
    }
    let kin = magnetic_kinetic(&ball.phi, &p);
    if !(kin < cap) {
        return Err(format!("magnetic kinetic {kin:.4e} sits on the cap {cap}"));
    }
    let fit = fitted_omega_constant(ball.omega, c, cap, &p);
    if !(fit.is_finite() && fit > 0.0) {
        return Err(format!("frequency bound fit constant {fit:.4e} not positive"));
    }
    Ok(format!(
        "action: |K|/grad {k_rel:.1e}, |H|/grad {h_rel:.1e}, residual {:.1e}, decay \
         {:.2}, {action_time:.1?}; ball: omega {:.4e} interior, kinetic {kin:.3e} < cap, \
         fit constant {fit:.3e}, {ball_time:.1?}",
        action.residual_el, action.decay_delta, ball.omega
    ))
}

// --- criterion 10: strong instability of the ground state -------------------

fn criterion_instability() -> CriterionResult {
    let p = Params::new(1.0, 2.0).map_err(|e| e.to_string())?;
    let grid = Grid::new([64; 3], [8.0; 3]).map_err(|e| e.to_string())?;
    let omega = 0.0;
    let gs = minimize_action(omega, &p, &grid, 1e-6).map_err(|e| e.to_string())?;
    let curve = scaling_curve(&gs.phi, &p, omega, &[1.0]).map_err(|e| e.to_string())?[0];
    if !(curve.2 <= 0.0) {
        return Err(format!("scaling second derivative {:.4e} positive", curve.2));
    }
    let d_omega = functionals::action_s(&gs.phi, &p, omega);

    // Dilated run: must collapse, with the invariant-set membership holding at
    // every recorded sample until detection.
    let up = instability_experiment(&gs.phi, &p, omega, 1.05, &collapse_config(1e-3, 4.0))
        .map_err(|e| e.to_string())?;
    if up.status != EvolveStatus::NumericalBlowUp {
        return Err(format!("dilated run ended {:?} at t = {:.3}", up.status, up.t_end));
    }
    let (alpha, b) = (p.alpha(), p.b());
    let mut bad = None;
    for r in &up.series {
        let k = r.mag_kinetic_sq + omega * r.mass - r.lp_norm;
        let h = r.grad_norm_sq
            - 0.25 * b * b * r.rho_norm_sq
            - 1.5 * alpha / (alpha + 2.0) * r.lp_norm;
        let s = r.energy_e + 0.5 * omega * r.mass;
        if !(k < 0.0 && h < 0.0 && s < d_omega) {
            bad = Some((r.t, k, h, s - d_omega));
            break;
        }
    }
    if let Some((t, k, h, gap)) = bad {
        return Err(format!(
            "invariant-set membership fails at t = {t:.4}: K = {k:.3e}, H = {h:.3e}, \
             S - d = {gap:.3e}"
        ));
    }

    // Unperturbed run: the modulus must hold pointwise to t = 1. The step is
    // sized for that bound — the splitting's shape error on a stationary
    // state scales cleanly as dt² from 2.4e-4 at dt = 1e-3.
    let mut flat_cfg = main_config(5e-5, 1.0);
    flat_cfg.adapt = false;
    flat_cfg.record_stride = 200;
    let flat = instability_experiment(&gs.phi, &p, omega, 1.0, &flat_cfg)
        .map_err(|e| e.to_string())?;
    if flat.status != EvolveStatus::ReachedTFinal {
        return Err(format!("unperturbed run ended {:?}", flat.status));
    }
    let phi_vals = gs.phi.values();
    let end_vals = flat.final_state.values();
    let mut worst = 0.0f64;
    for (a, bb) in phi_vals.iter().zip(end_vals.iter()) {
        worst = worst.max((a.norm() - bb.norm()).abs());
    }
    if !(worst < MODULUS_PRESERVATION) {
        return Err(format!(
            "modulus deviation {worst:.2e} exceeds {MODULUS_PRESERVATION:.0e} at t = 1"
        ));
    }
    Ok(format!(
        "scaling curvature {:.3e} <= 0; dilated run collapses at t = {:.3} with invariant-set \
         membership at all {} samples; unperturbed modulus deviation {worst:.1e}",
        curve.2,
        up.t_end,
        up.series.len()
    ))
}

// --- criterion 11: determinism across worker counts -------------------------

fn criterion_determinism() -> CriterionResult {
    let mut reference: Option<Vec<u8>> = None;
    for threads in ["1", "4", "8"] {
        let out = scratch("determinism");
        let code = run_cli(
            &[
                "verify",
                "--samples",
                "200",
                "--seed",
                &RERUN_SEED.to_string(),
                "--out",
                out.to_str().unwrap(),
            ],
            &[("MAGNLS_THREADS", threads)],
        );
        if code != 0 {
            return Err(format!("verify with {threads} workers exited {code}"));
        }
        let bytes = std::fs::read(out.join("report.json")).map_err(|e| e.to_string())?;
        match &reference {
            None => reference = Some(bytes),
            Some(first) => {
                if *first != bytes {
                    return Err(format!(
                        "report bytes differ between 1 and {threads} workers"
                    ));
                }
            }
        }
    }
    Ok("reports byte-identical across 1, 4, and 8 workers".into())
}

// --- runner -----------------------------------------------------------------

#[test]
fn acceptance() {
    // Start on a fresh line: libtest prints its "test ..." prefix without one.
    println!();
    let mut outcomes: Vec<(usize, bool, String)> = Vec::new();
    let mut record = |n: usize, result: CriterionResult| {
        let (pass, detail) = match result {
            Ok(d) => (true, d),
            Err(d) => (false, d),
        };
        println!("criterion {n}: {}", if pass { "PASS" } else { "FAIL" });
        if !detail.is_empty() {
            println!("  - {detail}");
        }
        outcomes.push((n, pass, detail));
    };
    let guarded = |f: &mut dyn FnMut() -> CriterionResult| -> CriterionResult {
        match catch_unwind(AssertUnwindSafe(f)) {
            Ok(r) => r,
            Err(panic) => {
                let msg = panic
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_else(|| "panic".into());
                Err(format!("panicked: {msg}"))
            }
        }
    };

    let mut ctx: Option<Context> = None;
    record(1, guarded(&mut || criterion_soliton(&mut ctx)));

    let (suite_out, suite_time, suite_code) = run_property_suite();
    if suite_code != 0 {
        record(2, Err(format!("property suite exited {suite_code}")));
        record(3, Err(format!("property suite exited {suite_code}")));
    } else {
        let report = read_json(&suite_out.join("report.json"));
        record(2, guarded(&mut || criterion_identities(&report, suite_time)));
        record(3, guarded(&mut || criterion_inequalities(&report)));
    }

    record(4, guarded(&mut || criterion_conservation()));
    record(5, guarded(&mut || criterion_virial_consistency()));
    match &ctx {
        Some(c) => {
            record(6, guarded(&mut || criterion_mass_critical(c)));
            record(7, guarded(&mut || criterion_supercritical(c)));
            record(8, guarded(&mut || criterion_above_threshold(c)));
        }
        None => {
            for n in [6, 7, 8] {
                record(n, Err("soliton profiles unavailable (criterion 1 failed)".into()));
            }
        }
    }
    record(9, guarded(&mut || criterion_ground_states()));
    record(10, guarded(&mut || criterion_instability()));
    record(11, guarded(&mut || criterion_determinism()));

    let failed: Vec<String> = outcomes
        .iter()
        .filter(|(_, pass, _)| !pass)
        .map(|(n, _, d)| format!("criterion {n}: {d}"))
        .collect();
    assert!(
        failed.is_empty(),
        "{} of {} criteria failed:\n{}",
        failed.len(),
        outcomes.len(),
        failed.join("\n")
    );
}

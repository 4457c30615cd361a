//! The seven commands: orchestration, report assembly, persistence.

use std::fs;
use std::sync::Arc;

use serde_json::{json, Value};

use magnls_core::classify::{classify_mass_critical, classify_supercritical, Verdict};
use magnls_core::dynamics::{evolve, EvolveConfig, EvolveStatus};
use magnls_core::field_grid::{
    random_band_limited, random_phase_twisted_gaussian, random_wave_packet, read_checkpoint,
    sample_radial, write_checkpoint, Field, Grid, Params, MASS_CRITICAL_ALPHA,
};
use magnls_core::functionals::{
    self, cs_virial_gap, diagnostics, grad_norm_sq, lp_norm, magnetic_kinetic,
    magnetic_kinetic_split, mass, pohozaev_h, virial_fsecond, DiagnosticsRecord,
};
use magnls_core::ground_states::{
    fitted_omega_constant, instability_experiment, minimize_action, minimize_i_c, minimize_im_c,
    scaling_curve, GroundStateResult,
};
use magnls_core::soliton_q::{cache_file_name, load_or_solve_cached, q_constants, QConstants};

use crate::config::{
    snap_alpha, ClassifyArgs, Command, DichotomyArgs, EvolveArgs, GroundStateArgs,
    InstabilityArgs, SolveQArgs, VerifyArgs,
};
use crate::data::{build_datum, cache_dir, check_resolution, profile_for, DataSpec};
use crate::reports::{outcome_summary, write_json, write_series};
use crate::Failure;

pub fn run(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::SolveQ(a) => solve_q_cmd(a),
        Command::Verify(a) => verify_cmd(a),
        Command::Classify(a) => classify_cmd(a),
        Command::Evolve(a) => evolve_cmd(a),
        Command::GroundState(a) => ground_state_cmd(a),
        Command::Instability(a) => instability_cmd(a),
        Command::DichotomySuite(a) => dichotomy_cmd(a),
    }
}

// ---------------------------------------------------------------------------
// Small shared helpers
// ---------------------------------------------------------------------------

fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

fn finite_or_null(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

fn grid_echo(grid: &Arc<Grid>) -> Value {
    json!({ "dims": grid.dims(), "half_widths": grid.half_widths() })
}

fn record_echo(r: &DiagnosticsRecord) -> Value {
    json!({
        "t": r.t,
        "mass": r.mass,
        "E": r.energy_e,
        "E0": r.energy_e0,
        "R": r.angular_r,
        "grad2": r.grad_norm_sq,
        "magkin2": r.mag_kinetic_sq,
        "rho2": r.rho_norm_sq,
        "lp": r.lp_norm,
        "F": r.virial_f,
        "Fprime": r.virial_fprime,
        "boundary_frac": r.boundary_mass_fraction,
    })
}

fn constants_echo(qc: &QConstants) -> Value {
    json!({
        "alpha": qc.alpha,
        "mass_q": qc.mass_q,
        "grad_q_sq": qc.grad_q_sq,
        "lp_q": qc.lp_q,
        "e0_free": qc.e0_free(),
        "sigma_c": finite_or_null(qc.sigma_c),
        "c_opt": qc.c_opt,
        "e0_mass_product": finite_or_null(qc.e0_mq),
        "grad_mass_product": finite_or_null(qc.grad_mass_product),
        "lp_mass_product": finite_or_null(qc.lp_mass_product),
    })
}

fn check_tol_flag(tol: f64) -> Result<f64, Failure> {
    if tol > 0.0 && tol.is_finite() {
        Ok(tol)
    } else {
        Err(Failure::config(format!(
            "--tol must be positive and finite, got {tol}"
        )))
    }
}

// ---------------------------------------------------------------------------
// solve-q
// ---------------------------------------------------------------------------

fn solve_q_cmd(args: SolveQArgs) -> Result<(), Failure> {
    let alpha = snap_alpha(args.alpha);
    let tol = check_tol_flag(args.tol)?;
    let out = &args.out.out;
    fs::create_dir_all(out)?;
    let profile = load_or_solve_cached(out, alpha, tol)?;
    let qc = q_constants(&profile)?;

    // Stationarity of the profile under L² pairing and under dilation; both
    // are linear relations between the three stored norms.
    let (m, g, lp) = (qc.mass_q, qc.grad_q_sq, qc.lp_q);
    let pairing = (g + m - lp).abs() / lp;
    let dilation = (0.5 * g + 1.5 * m - 3.0 * lp / (alpha + 2.0)).abs() / lp;

    let report = json!({
        "config": {
            "command": "solve-q",
            "alpha_requested": args.alpha,
            "alpha": alpha,
            "tol": tol,
            "out": out.display().to_string(),
        },
        "profile": {
            "cache_file": cache_file_name(alpha, tol),
            "r_max": profile.r_max(),
            "q0": profile.q0(),
            "tail_rate": profile.tail_rate(),
            "ode_residual_sup": profile.ode_residual_sup(),
        },
        "constants": constants_echo(&qc),
        "pohozaev_residuals": { "pairing": pairing, "dilation": dilation },
    });
    write_json(&out.join("constants.json"), &report)?;
    println!(
        "solve-q: alpha = {alpha}, M(Q) = {:.12e}, Pohozaev residuals {pairing:.2e} / {dilation:.2e}",
        qc.mass_q
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

/// One property check's tally over the sampled fields.
struct Check {
    name: &'static str,
    tolerance: f64,
    samples: u64,
    violations: u64,
    worst: f64,
}

impl Check {
    fn new(name: &'static str, tolerance: f64) -> Check {
        Check {
            name,
            tolerance,
            samples: 0,
            violations: 0,
            worst: f64::NEG_INFINITY,
        }
    }

    /// Records one normalized residual/margin; positive past the tolerance
    /// counts as a violation.
    fn record(&mut self, value: f64) {
        self.samples += 1;
        self.worst = self.worst.max(value);
        if !(value <= self.tolerance) {
            self.violations += 1;
        }
    }

    fn echo(&self) -> (String, Value) {
        let worst = if self.samples == 0 {
            Value::Null
        } else {
            json!(self.worst)
        };
        (
            self.name.to_string(),
            json!({
                "tolerance": self.tolerance,
                "samples": self.samples,
                "violations": self.violations,
                "worst": worst,
            }),
        )
    }
}

fn modulus_field(f: &Field) -> Field {
    let values = f
        .values()
        .iter()
        .map(|v| num_complex::Complex64::new(v.norm(), 0.0))
        .collect();
    Field::from_values(f.grid(), values).expect("same grid, same length")
}

fn verify_cmd(args: VerifyArgs) -> Result<(), Failure> {
    if args.samples == 0 {
        return Err(Failure::config("--samples must be at least 1"));
    }
    let grid = Grid::new(args.grid.0, args.box_half_widths.0)?;
    let out = &args.out.out;
    fs::create_dir_all(out)?;

    // Identity battery: exact relations between independently computed
    // functionals, on random band-limited fields over a parameter palette.
    let palette = [(1.0, 2.0), (-1.6, MASS_CRITICAL_ALPHA), (0.7, 3.0), (2.3, 1.1)];
    let mut split_check = Check::new("magnetic_norm_split", 1e-10);
    let mut energy_check = Check::new("energy_angular_split", 1e-9);
    let mut virial_check = Check::new("virial_eight_h", 1e-10);
    for i in 0..args.samples {
        let (b, alpha) = palette[(i % 4) as usize];
        let p = Params::new(b, alpha).expect("palette params are valid");
        let f = random_band_limited(&grid, args.seed, i, 0.45);
        let d = diagnostics(&f, &p, 0.0);
        split_check.record(magnetic_kinetic_split(&f, &p).residual());
        energy_check.record(rel_diff(d.energy_e, d.energy_e0 + 0.5 * b * d.angular_r));
        virial_check.record(rel_diff(8.0 * pohozaev_h(&f, &p), virial_fsecond(&f, &p)));
    }

    // Inequality battery: one-sided bounds on a mix of band-limited fields,
    // decaying wave packets, and nowhere-vanishing twisted Gaussians.
    let qc2 = q_constants(&load_or_solve_cached(
        &out.join("cache"),
        2.0,
        crate::data::PROFILE_TOL,
    )?)?;
    let qc_crit = q_constants(&load_or_solve_cached(
        &out.join("cache"),
        MASS_CRITICAL_ALPHA,
        crate::data::PROFILE_TOL,
    )?)?;
    let b_palette = [1.0, -1.6, 0.7];
    let mut diamagnetic = Check::new("diamagnetic", 1e-9);
    let mut spectral_gap = Check::new("spectral_gap", 1e-9);
    let mut gn_sharp = Check::new("interpolation_sharp", 1e-9);
    let mut gn_critical = Check::new("interpolation_mass_critical", 1e-9);
    let mut cs_virial = Check::new("cauchy_schwarz_virial", 1e-8);
    let mut cs_skipped = 0u64;
    for i in 0..args.samples {
        let b = b_palette[(i % 3) as usize];
        let p2 = Params::new(b, 2.0).expect("valid");
        let p_crit = Params::new(b, MASS_CRITICAL_ALPHA).expect("valid");
        let family = i % 3;
        let f = match family {
            0 => random_band_limited(&grid, args.seed ^ 0x51_0a11, i, 0.45),
            1 => random_wave_packet(&grid, args.seed ^ 0x51_0a11, i),
            _ => random_phase_twisted_gaussian(&grid, args.seed ^ 0x51_0a11, i),
        };
        let m = mass(&f);
        let kin = magnetic_kinetic(&f, &p2);
        spectral_gap.record((b.abs() * m - kin) / kin.max(1e-300));
        let gn_rhs = qc2.c_opt * kin.powf(1.5) * m.powf(0.5);
        gn_sharp.record((lp_norm(&f, &p2) - gn_rhs) / gn_rhs.max(1e-300));
        let crit_rhs = 5.0 / 3.0 * (m / qc_crit.mass_q).powf(2.0 / 3.0) * kin;
        gn_critical.record((lp_norm(&f, &p_crit) - crit_rhs) / crit_rhs.max(1e-300));
        if family == 2 {
            // Smooth modulus: the spectral gradient of |f| is trustworthy.
            diamagnetic.record((grad_norm_sq(&modulus_field(&f)) - kin) / kin.max(1e-300));
        }
        if family == 1 {
            // Decaying data keeps the |x|-weighted quadratures honest.
            match cs_virial_gap(&f, qc2.c_opt, &p2) {
                Ok(gap) => {
                    let scale = (functionals::virial_f(&f) * grad_norm_sq(&f)).max(1e-300);
                    cs_virial.record(-gap / scale);
                }
                Err(_) => cs_skipped += 1,
            }
        }
    }

    let identity_checks = [&split_check, &energy_check, &virial_check];
    let inequality_checks = [
        &diamagnetic,
        &spectral_gap,
        &gn_sharp,
        &gn_critical,
        &cs_virial,
    ];
    let total_violations: u64 = identity_checks
        .iter()
        .chain(inequality_checks.iter())
        .map(|c| c.violations)
        .sum();

    let as_map = |checks: &[&Check]| -> Value {
        let mut map = serde_json::Map::new();
        for c in checks {
            let (k, v) = c.echo();
            map.insert(k, v);
        }
        Value::Object(map)
    };
    let report = json!({
        "config": {
            "command": "verify",
            "seed": args.seed,
            "samples": args.samples,
            "grid": { "dims": args.grid.0, "half_widths": args.box_half_widths.0 },
            "out": out.display().to_string(),
        },
        "identities": as_map(&identity_checks),
        "inequalities": as_map(&inequality_checks),
        "boundary_skipped": cs_skipped,
        "violations": total_violations,
    });
    write_json(&out.join("report.json"), &report)?;
    println!(
        "verify: {} samples per suite, {} violations",
        args.samples, total_violations
    );
    if total_violations > 0 {
        return Err(Failure::violations(format!(
            "{total_violations} property violations (see {})",
            out.join("report.json").display()
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// classify
// ---------------------------------------------------------------------------

fn classify_cmd(args: ClassifyArgs) -> Result<(), Failure> {
    let out = &args.out.out;
    let datum = build_datum(&args.data, &args.phys, &args.grid, out)?;
    let p = datum.p;
    if p.alpha() < MASS_CRITICAL_ALPHA - 1e-9 {
        return Err(Failure::config(format!(
            "--alpha {}: the dichotomy classifications need the mass-critical power 4/3 or larger",
            p.alpha()
        )));
    }
    let cache = cache_dir(&args.data, out);
    let qc = q_constants(&profile_for(&cache, p.alpha())?)?;
    let report = if p.is_mass_critical() {
        classify_mass_critical(&datum.field, &p, &qc)?
    } else {
        classify_supercritical(&datum.field, &p, &qc)?
    };
    let doc = json!({
        "config": {
            "command": "classify",
            "alpha_requested": args.phys.alpha,
            "alpha": p.alpha(),
            "b": p.b(),
            "grid": grid_echo(datum.field.grid()),
            "data": datum.spec.echo(),
            "out": out.display().to_string(),
        },
        "initial": record_echo(&diagnostics(&datum.field, &p, datum.t0)),
        "classification": report,
    });
    write_json(&out.join("report.json"), &doc)?;
    println!("classify: verdict {:?}", report.verdict);
    Ok(())
}

// ---------------------------------------------------------------------------
// evolve
// ---------------------------------------------------------------------------

fn evolve_cmd(args: EvolveArgs) -> Result<(), Failure> {
    let out = &args.out.out;
    let datum = build_datum(&args.data, &args.phys, &args.grid, out)?;
    let cfg = args.evolve.build()?;
    let outcome = evolve(&datum.field, &datum.p, &cfg)?;
    write_series(&out.join("series.csv"), &outcome.series)?;
    write_checkpoint(
        &out.join("state_final.mnls"),
        &outcome.final_state,
        &datum.p,
        datum.t0 + outcome.t_end,
    )?;
    let doc = json!({
        "config": {
            "command": "evolve",
            "alpha_requested": args.phys.alpha,
            "alpha": datum.p.alpha(),
            "b": datum.p.b(),
            "grid": grid_echo(datum.field.grid()),
            "data": datum.spec.echo(),
            "t0": datum.t0,
            "evolve": cfg,
            "out": out.display().to_string(),
        },
        "initial": record_echo(&outcome.series[0]),
        "outcome": outcome_summary(&outcome),
        "artifacts": { "series": "series.csv", "final_state": "state_final.mnls" },
    });
    write_json(&out.join("report.json"), &doc)?;
    println!(
        "evolve: {:?} at t = {:.6} ({} samples)",
        outcome.status,
        outcome.t_end,
        outcome.series.len()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// ground-state
// ---------------------------------------------------------------------------

fn ground_state_cmd(args: GroundStateArgs) -> Result<(), Failure> {
    let p = args.phys.params()?;
    let grid = args.grid.build()?;
    let tol = check_tol_flag(args.tol)?;
    let out = &args.out.out;
    fs::create_dir_all(out)?;

    let (result, problem): (GroundStateResult, Value) = match (args.omega, args.mass) {
        (Some(omega), None) => (
            minimize_action(omega, &p, &grid, tol)?,
            json!({ "kind": "action", "omega": omega }),
        ),
        (None, Some(c)) => match args.cap {
            Some(m) => (
                minimize_im_c(c, m, &p, &grid, tol)?,
                json!({ "kind": "energy-in-ball", "mass": c, "cap": m }),
            ),
            None => (
                minimize_i_c(c, &p, &grid, tol)?,
                json!({ "kind": "energy", "mass": c }),
            ),
        },
        _ => unreachable!("clap enforces exactly one of --omega/--mass"),
    };

    write_checkpoint(&out.join("phi.mnls"), &result.phi, &p, 0.0)?;
    let mut sidecar = json!({
        "omega": result.omega,
        "objective": result.objective,
        "residual_el": result.residual_el,
        "k_omega": result.k_omega,
        "h_value": result.h_value,
        "decay_delta": result.decay_delta,
        "scaling_second_deriv": result.scaling_second_deriv,
        "iterations": result.iterations,
        "mass": mass(&result.phi),
        "mag_kinetic": magnetic_kinetic(&result.phi, &p),
        "provenance": {
            "command": "ground-state",
            "alpha_requested": args.phys.alpha,
            "alpha": p.alpha(),
            "b": p.b(),
            "grid": grid_echo(&grid),
            "problem": problem,
            "tol": tol,
        },
    });
    if let (Some(c), Some(m)) = (args.mass, args.cap) {
        // Shape constant of the frequency bound: ω sits between −|b| and 0,
        // and (1 + ω/|b|) should scale like c^{(4−α)/4}·m^{(3α−4)/4}.
        sidecar["omega_fit_constant"] = json!(fitted_omega_constant(result.omega, c, m, &p));
    }
    write_json(&out.join("ground_state.json"), &sidecar)?;
    println!(
        "ground-state: omega = {:.9}, objective = {:.9e}, residual = {:.3e} ({} iterations)",
        result.omega, result.objective, result.residual_el, result.iterations
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// instability
// ---------------------------------------------------------------------------

fn instability_cmd(args: InstabilityArgs) -> Result<(), Failure> {
    let out = &args.out.out;
    fs::create_dir_all(out)?;
    let (phi, p, omega, source) = if let Some(dir) = &args.from {
        let (phi, p, _) = read_checkpoint(&dir.join("phi.mnls"))?;
        let sidecar: Value = serde_json::from_str(&fs::read_to_string(dir.join("ground_state.json"))?)?;
        let omega = sidecar
            .get("omega")
            .and_then(Value::as_f64)
            .ok_or_else(|| {
                Failure::config(format!(
                    "{} lacks a numeric \"omega\"",
                    dir.join("ground_state.json").display()
                ))
            })?;
        (phi, p, omega, json!({ "from": dir.display().to_string() }))
    } else {
        let omega = args.omega.expect("clap enforces the source group");
        let alpha = args
            .alpha
            .ok_or_else(|| Failure::config("--omega needs --alpha for the inline solve"))?;
        let p = Params::new(args.b, snap_alpha(alpha))?;
        let grid = Grid::new(args.grid.0, args.box_half_widths.0)?;
        let tol = check_tol_flag(args.tol)?;
        let gs = minimize_action(omega, &p, &grid, tol)?;
        (
            gs.phi,
            p,
            omega,
            json!({ "inline": { "alpha": p.alpha(), "b": p.b(), "omega": omega, "tol": tol } }),
        )
    };

    let cfg = args.evolve.build()?;
    let curve_at_one = scaling_curve(&phi, &p, omega, &[1.0])?[0];
    let d_omega = functionals::action_s(&phi, &p, omega);
    let outcome = instability_experiment(&phi, &p, omega, args.lambda, &cfg)?;
    write_series(&out.join("series.csv"), &outcome.series)?;
    write_checkpoint(
        &out.join("state_final.mnls"),
        &outcome.final_state,
        &p,
        outcome.t_end,
    )?;

    // Invariant-set membership along the recorded series, from its columns.
    let (alpha, b) = (p.alpha(), p.b());
    let mut k_negative = 0usize;
    let mut h_negative = 0usize;
    let mut s_below_d = 0usize;
    for r in &outcome.series {
        let k = r.mag_kinetic_sq + omega * r.mass - r.lp_norm;
        let h = r.grad_norm_sq
            - 0.25 * b * b * r.rho_norm_sq
            - 1.5 * alpha / (alpha + 2.0) * r.lp_norm;
        let s = r.energy_e + 0.5 * omega * r.mass;
        if k < 0.0 {
            k_negative += 1;
        }
        if h < 0.0 {
            h_negative += 1;
        }
        if s < d_omega {
            s_below_d += 1;
        }
    }

    let doc = json!({
        "config": {
            "command": "instability",
            "source": source,
            "lambda": args.lambda,
            "evolve": cfg,
            "out": out.display().to_string(),
        },
        "ground_state": {
            "omega": omega,
            "alpha": p.alpha(),
            "b": p.b(),
            "grid": grid_echo(phi.grid()),
            "action": d_omega,
            "scaling_second_deriv": curve_at_one.2,
        },
        "invariant_set": {
            "recorded": outcome.series.len(),
            "k_negative": k_negative,
            "h_negative": h_negative,
            "s_below_d": s_below_d,
        },
        "outcome": outcome_summary(&outcome),
        "artifacts": { "series": "series.csv", "final_state": "state_final.mnls" },
    });
    write_json(&out.join("report.json"), &doc)?;
    println!(
        "instability: lambda = {}, {:?} at t = {:.6}",
        args.lambda, outcome.status, outcome.t_end
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// dichotomy-suite
// ---------------------------------------------------------------------------

fn predicted_status(v: &Verdict) -> Option<EvolveStatus> {
    match v {
        Verdict::GlobalMassCritical
        | Verdict::GlobalBelowThreshold
        | Verdict::GlobalAtThreshold => Some(EvolveStatus::ReachedTFinal),
        Verdict::BlowupKiefferLoss1
        | Verdict::BlowupKiefferLoss2
        | Verdict::BlowupKiefferLoss3
        | Verdict::BlowupBelowThreshold
        | Verdict::BlowupAboveThreshold
        | Verdict::NegativeEnergyBlowup => Some(EvolveStatus::NumericalBlowUp),
        Verdict::ConditionalAtThreshold | Verdict::Indeterminate => None,
    }
}

/// Positive root of `F(0) + F′(0)·t + 8E₀·t² = 0`, the vanishing time of the
/// virial upper envelope, defined when `E₀ < 0`.
fn vanishing_time(f0: f64, fp: f64, e0: f64) -> Option<f64> {
    if e0 >= 0.0 {
        return None;
    }
    Some((fp + (fp * fp - 32.0 * e0 * f0).sqrt()) / (-16.0 * e0))
}

fn dichotomy_cmd(args: DichotomyArgs) -> Result<(), Failure> {
    let p = args.phys.params()?;
    if p.alpha() < MASS_CRITICAL_ALPHA - 1e-9 {
        return Err(Failure::config(format!(
            "--alpha {}: the dichotomy needs the mass-critical power 4/3 or larger",
            p.alpha()
        )));
    }
    let grid = Grid::new(args.grid.0, args.box_half_widths.0)?;
    let out = args.out.out.clone();
    fs::create_dir_all(&out)?;
    let cache = args.cache.clone().unwrap_or_else(|| out.join("cache"));
    let profile = profile_for(&cache, p.alpha())?;
    let qc = q_constants(&profile)?;
    let critical = p.is_mass_critical();

    let need_positive = |name: &str, v: f64| {
        if v > 0.0 && v.is_finite() {
            Ok(v)
        } else {
            Err(Failure::config(format!(
                "{name} must be positive and finite, got {v}"
            )))
        }
    };
    let ratio_g = if critical { 0.9 } else { 0.75 };
    let ratio_global = need_positive("--ratio-global", args.ratio_global.unwrap_or(ratio_g))?;
    let lambda_global = need_positive("--lambda-global", args.lambda_global.unwrap_or(1.0))?;
    let lambda_b = if critical { 1.15 } else { 1.0 };
    let ratio_blowup = need_positive("--ratio-blowup", args.ratio_blowup.unwrap_or(1.44))?;
    let lambda_blowup = need_positive("--lambda-blowup", args.lambda_blowup.unwrap_or(lambda_b))?;

    // The verdicts compare |x|-weighted integrals against soliton constants,
    // which the classifier only trusts when the far field is clean (boundary
    // mass below its gate). The evolution grid is sized for propagation cost,
    // not for that, so each datum is classified on a dedicated wide grid and
    // evolved on the requested one.
    let cls_grid = Grid::new([128; 3], [12.0; 3])?;

    let cfg = EvolveConfig {
        dt_initial: args.dt,
        t_final: args.t_final,
        adapt: true,
        blowup_grad_ratio: args.blowup_grad_ratio,
        tail_fraction_max: args.tail_fraction_max,
        record_stride: args.record_stride,
    };
    cfg.validate()?;

    let mut runs = serde_json::Map::new();
    let mut lines = Vec::new();
    for (name, ratio, lambda) in [
        ("global", ratio_global, lambda_global),
        ("blowup", ratio_blowup, lambda_blowup),
    ] {
        let amp = ratio.sqrt();
        let spec = DataSpec::ScaledSoliton {
            amp,
            lambda,
            center: [0.0; 3],
        };
        check_resolution(&spec, &grid, &p, &cache)?;
        let u0 = sample_radial(&profile, &grid, amp, lambda, [0.0; 3])?;
        let d0 = diagnostics(&u0, &p, 0.0);
        let u0_cls = sample_radial(&profile, &cls_grid, amp, lambda, [0.0; 3])?;
        let d0_cls = diagnostics(&u0_cls, &p, 0.0);
        let classification = if critical {
            classify_mass_critical(&u0_cls, &p, &qc)?
        } else {
            classify_supercritical(&u0_cls, &p, &qc)?
        };
        drop(u0_cls);
        let outcome = evolve(&u0, &p, &cfg)?;
        let dir = out.join(name);
        write_series(&dir.join("series.csv"), &outcome.series)?;
        write_checkpoint(&dir.join("state_final.mnls"), &outcome.final_state, &p, outcome.t_end)?;

        let analysis = if critical {
            let mass_ratio = d0_cls.mass / qc.mass_q;
            let cap = if mass_ratio < 1.0 {
                Some(2.0 * d0_cls.energy_e / (1.0 - mass_ratio.powf(2.0 / 3.0)))
            } else {
                None
            };
            let kin_max = outcome
                .series
                .iter()
                .map(|r| r.mag_kinetic_sq)
                .fold(f64::NEG_INFINITY, f64::max);
            json!({
                "mass_ratio": mass_ratio,
                "mag_kinetic_cap": cap,
                "mag_kinetic_max": kin_max,
                "cap_satisfied": cap.map(|c| kin_max <= c),
                "vanishing_time_bound":
                    vanishing_time(d0_cls.virial_f, d0_cls.virial_fprime, d0_cls.energy_e0),
            })
        } else {
            let sigma = qc.sigma_c;
            let product = |r: &DiagnosticsRecord| r.grad_norm_sq.sqrt() * r.mass.powf(0.5 * sigma);
            let max_product = outcome
                .series
                .iter()
                .map(product)
                .fold(f64::NEG_INFINITY, f64::max);
            json!({
                "mass_ratio": d0.mass / qc.mass_q,
                "grad_mass_product_initial": product(&d0),
                "grad_mass_product_max": max_product,
                "grad_mass_product_soliton": qc.grad_mass_product,
                "stays_sub_gradient": max_product < qc.grad_mass_product,
            })
        };
        let agreement = predicted_status(&classification.verdict)
            .map(|pred| pred == outcome.status);

        lines.push(format!(
            "dichotomy-suite[{name}]: verdict {:?}, run {:?} at t = {:.4}",
            classification.verdict, outcome.status, outcome.t_end
        ));
        runs.insert(
            name.to_string(),
            json!({
                "datum": spec.echo(),
                "initial": record_echo(&d0),
                "initial_classification_grid": record_echo(&d0_cls),
                "classification": classification,
                "outcome": outcome_summary(&outcome),
                "analysis": analysis,
                "agreement": agreement,
                "artifacts": {
                    "series": format!("{name}/series.csv"),
                    "final_state": format!("{name}/state_final.mnls"),
                },
            }),
        );
    }

    let doc = json!({
        "config": {
            "command": "dichotomy-suite",
            "alpha_requested": args.phys.alpha,
            "alpha": p.alpha(),
            "b": p.b(),
            "grid": grid_echo(&grid),
            "classification_grid": grid_echo(&cls_grid),
            "ratio_global": ratio_global,
            "lambda_global": lambda_global,
            "ratio_blowup": ratio_blowup,
            "lambda_blowup": lambda_blowup,
            "evolve": cfg,
            "out": out.display().to_string(),
        },
        "q_constants": constants_echo(&qc),
        "runs": Value::Object(runs),
    });
    write_json(&out.join("report.json"), &doc)?;
    for line in lines {
        println!("{line}");
    }
    Ok(())
}

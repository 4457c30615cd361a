//! Behavior of the split-step propagator: exactness on propagator
//! eigenfunctions, second-order convergence in the step size, conservation of
//! the flow invariants, agreement of the recorded virial series with its
//! closed-form curvature, and the blow-up/resolution-loss exits.

mod common;

use common::{cube, cubic_profile, rel_diff};
use magnls_core::dynamics::{evolve, evolve_with, step_mode, EvolveConfig, EvolveStatus, StepMode};
use magnls_core::field_grid::{gaussian_packet, sample_radial, Field, Params};
use magnls_core::functionals::virial_fsecond;
use num_complex::Complex64;

#[test]
fn plane_wave_phase_is_exact_in_the_linear_mode() {
    let grid = cube(32, 4.0);
    // At negligible field strength the linear flow reduces to the free
    // propagator; a box mode along the field axis is an exact eigenfunction,
    // so every step must reproduce e^{−ik²t} to roundoff.
    let p = Params::new(1e-8, 2.0).unwrap();
    let k = grid.wavenumbers(2)[3];
    let mut u = Field::from_fn(&grid, |x| Complex64::new(0.0, k * x[2]).exp());
    let u0 = u.clone();
    let dt = 1e-2;
    let steps = 100;
    for _ in 0..steps {
        u = step_mode(&u, &p, dt, StepMode::Linear);
    }
    let phase = Complex64::new(0.0, -k * k * dt * steps as f64).exp();
    let err = u
        .values()
        .iter()
        .zip(u0.values())
        .map(|(a, b)| (a - b * phase).norm())
        .fold(0.0f64, f64::max);
    assert!(err < 1e-10, "plane-wave phase error {err:.3e} after {steps} steps");
}

#[test]
fn full_steps_converge_at_second_order() {
    let grid = cube(32, 8.0);
    let p = Params::new(1.0, 2.0).unwrap();
    let u0 = gaussian_packet(&grid, [1.0, 1.2, 0.9], 1.0, 0.1, [0.3, 0.0, -0.2]).unwrap();
    let t = 0.2;
    let run = |dt: f64| {
        let mut u = u0.clone();
        let n = (t / dt).round() as usize;
        for _ in 0..n {
            u = step_mode(&u, &p, dt, StepMode::Full);
        }
        u
    };
    let sup_diff = |a: &Field, b: &Field| {
        a.values()
            .iter()
            .zip(b.values())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0f64, f64::max)
    };
    let (u1, u2, u4) = (run(0.02), run(0.01), run(0.005));
    let d1 = sup_diff(&u1, &u2);
    let d2 = sup_diff(&u2, &u4);
    let ratio = d1 / d2;
    assert!(
        (3.4..=4.7).contains(&ratio),
        "step-halving error ratio {ratio:.3} is not second order (d1={d1:.3e}, d2={d2:.3e})"
    );
}

#[test]
fn invariants_drift_below_tolerance_on_a_smooth_run() {
    let grid = cube(32, 8.0);
    let p = Params::new(1.0, 2.0).unwrap();
    // A winding factor gives the datum genuinely nonzero angular momentum,
    // so its relative drift is meaningful.
    let u0 = Field::from_fn(&grid, |x| {
        let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
        Complex64::new(x[0], x[1]) * 0.6 * (-0.5 * r2).exp() * Complex64::new(0.0, -0.2 * r2).exp()
    });
    let cfg = EvolveConfig::new(1e-3, 0.5).unwrap();
    let out = evolve(&u0, &p, &cfg).unwrap();
    assert_eq!(out.status, EvolveStatus::ReachedTFinal);
    assert!((out.t_end - 0.5).abs() < 1e-9);
    assert!(out.blowup_time_estimate.is_none());
    assert!(out.series.windows(2).all(|w| w[1].t > w[0].t));

    let (first, last) = (&out.series[0], out.series.last().unwrap());
    assert!(rel_diff(first.mass, last.mass) < 1e-10, "mass drift");
    assert!(rel_diff(first.energy_e, last.energy_e) < 1e-7, "energy drift");
    assert!(
        rel_diff(first.angular_r, last.angular_r) < 1e-7,
        "angular-momentum drift {:.3e}",
        rel_diff(first.angular_r, last.angular_r)
    );
    // The rotation-free energy is conserved through E and R jointly.
    assert!(rel_diff(first.energy_e0, last.energy_e0) < 1e-7);
}

#[test]
fn energy_drift_shrinks_fourfold_when_the_step_halves() {
    // The drift comparison needs spatial error well below the splitting
    // error, hence the finer grid than the other runs use.
    let grid = cube(48, 8.0);
    let p = Params::new(1.0, 2.0).unwrap();
    let u0 = gaussian_packet(&grid, [1.0; 3], 1.0, 0.3, [0.0; 3]).unwrap();
    let drift = |dt: f64| {
        let mut cfg = EvolveConfig::new(dt, 0.25).unwrap();
        cfg.adapt = false;
        let out = evolve(&u0, &p, &cfg).unwrap();
        (out.series[0].energy_e - out.series.last().unwrap().energy_e).abs()
    };
    let (d1, d2) = (drift(2e-3), drift(1e-3));
    assert!(
        d1 / d2 > 3.5,
        "energy drift ratio {:.2} under step halving (d1={d1:.3e}, d2={d2:.3e})",
        d1 / d2
    );
}

#[test]
fn recorded_variance_curvature_matches_its_closed_form() {
    let grid = cube(32, 8.0);
    let p = Params::new(0.7, 2.0).unwrap();
    let u0 = gaussian_packet(&grid, [1.0, 1.1, 0.9], 0.9, 0.25, [0.0; 3]).unwrap();
    let dt = 5e-4;
    let mut cfg = EvolveConfig::new(dt, 0.05).unwrap();
    cfg.adapt = false;
    cfg.record_stride = 1;
    let mut curvature = Vec::new();
    let out = evolve_with(&u0, &p, &cfg, |rec, state| {
        curvature.push((rec.t, rec.virial_f, virial_fsecond(state, &p)));
    })
    .unwrap();
    assert_eq!(out.status, EvolveStatus::ReachedTFinal);
    // Central second difference of the recorded variance against the
    // closed-form curvature evaluated on the matching snapshots.
    let mut checked = 0;
    for w in curvature.windows(3) {
        let [(t0, f0, _), (t1, f1, fsec), (t2, f2, _)] = [w[0], w[1], w[2]];
        let (h1, h2) = (t1 - t0, t2 - t1);
        if (h1 - h2).abs() > 1e-12 {
            continue;
        }
        let second_diff = (f2 - 2.0 * f1 + f0) / (h1 * h1);
        assert!(
            rel_diff(second_diff, fsec) < 0.01,
            "curvature mismatch at t={t1}: {second_diff:.6e} vs {fsec:.6e}"
        );
        checked += 1;
    }
    assert!(checked > 50, "only {checked} interior records compared");
}

#[test]
fn focusing_data_exits_with_a_blowup_estimate_just_past_the_run() {
    let grid = cube(48, 6.0);
    let p = Params::new(0.5, 2.0).unwrap();
    // An amplified soliton: spectrally compact, negative energy — a clean
    // supercritical collapse. During collapse the spectral tail outruns the
    // gradient ratio by orders of magnitude, so the detector pairs a
    // permissive tail limit with a modest gradient threshold.
    let u0 = sample_radial(cubic_profile(), &grid, 1.3, 1.0, [0.0; 3]).unwrap();
    let mut cfg = EvolveConfig::new(2e-4, 2.0).unwrap();
    cfg.blowup_grad_ratio = 2.0;
    cfg.tail_fraction_max = 1e-2;
    let out = evolve(&u0, &p, &cfg).unwrap();
    assert_eq!(out.status, EvolveStatus::NumericalBlowUp);
    assert!(out.t_end < 0.5, "collapse should be fast, ran to {}", out.t_end);
    let estimate = out.blowup_time_estimate.expect("blow-up estimate");
    assert!(
        estimate > out.t_end && estimate < out.t_end + 0.1,
        "estimate {estimate:.4} vs run end {:.4}",
        out.t_end
    );
    // Gradient grows monotonically over the last stretch of the series.
    let grads: Vec<f64> = out.series.iter().map(|r| r.grad_norm_sq).collect();
    let tail = &grads[grads.len().saturating_sub(5)..];
    assert!(tail.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn tail_growth_without_gradient_growth_is_resolution_loss() {
    let grid = cube(32, 8.0);
    let p = Params::new(1.0, 2.0).unwrap();
    let u0 = gaussian_packet(&grid, [1.0; 3], 1.0, 0.0, [0.0; 3]).unwrap();
    let mut cfg = EvolveConfig::new(1e-3, 0.5).unwrap();
    // A tail threshold below the datum's own spectral floor trips at the
    // first check while the gradient has not moved: the run must be reported
    // as lost resolution, not blow-up, and carry no singularity estimate.
    cfg.tail_fraction_max = 1e-30;
    let out = evolve(&u0, &p, &cfg).unwrap();
    assert_eq!(out.status, EvolveStatus::ResolutionLoss);
    assert!(out.blowup_time_estimate.is_none());
    assert!(out.t_end < 0.5);
}

//! Shared fixtures: the shooting solve is the only expensive setup, so the
//! soliton profiles are computed once per test binary and reused.
#![allow(dead_code)]

use std::sync::{Arc, OnceLock};

use magnls_core::field_grid::Grid;
use magnls_core::soliton_q::{solve_q, RadialProfile};

pub fn mass_critical_profile() -> &'static RadialProfile {
    static Q: OnceLock<RadialProfile> = OnceLock::new();
    Q.get_or_init(|| solve_q(4.0 / 3.0, 1e-9).expect("mass-critical soliton profile"))
}

pub fn cubic_profile() -> &'static RadialProfile {
    static Q: OnceLock<RadialProfile> = OnceLock::new();
    Q.get_or_init(|| solve_q(2.0, 1e-9).expect("cubic soliton profile"))
}

pub fn cube(n: usize, half_width: f64) -> Arc<Grid> {
    Grid::new([n, n, n], [half_width; 3]).expect("cubic grid")
}

/// Relative difference with an absolute floor, so comparisons against values
/// that should vanish stay meaningful.
pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

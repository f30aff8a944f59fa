//! Search over measurement angles (fixed `r`) and over `r` (fixed angles).

use std::f64::consts::TAU;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chsh::{bell_s, correlation_e, postselected_probs, pr_fidelity, MeasurementSettings};
use crate::error::{Error, Result};
use crate::frft::wrap_angle;
use crate::state::GaussianTwoModeState;

/// Refinement sweeps before giving up on convergence.
pub const MAX_SWEEPS: usize = 100;

/// Absolute tolerance on `r` for [`tune_r`].
pub const R_TOL: f64 = 1e-4;

/// Points sampled on `[0, r_max]` to check monotonicity before bisecting.
pub const MONOTONICITY_SAMPLES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub settings: MeasurementSettings,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn settings_from(angles: [f64; 4], r: f64) -> MeasurementSettings {
    MeasurementSettings {
        alpha: wrap_angle(angles[0]),
        alpha_prime: wrap_angle(angles[1]),
        beta: wrap_angle(angles[2]),
        beta_prime: wrap_angle(angles[3]),
        r,
    }
}

/// Maximizes the Bell parameter over `(alpha, alpha', beta, beta')` at fixed `r`.
///
/// A grid of step `angle_grid_step` over `[0, 2pi)` is scanned first (ties go
/// to the lexicographically smallest angle indices), then each angle in turn
/// is refined by golden-section search within one grid step of its current
/// value, repeating until a full sweep moves no angle by more than
/// `refine_tol`. The result is a local optimum.
pub fn maximize_s(state: &GaussianTwoModeState, r: f64, angle_grid_step: f64, refine_tol: f64) -> Result<SearchResult> {
    if !(angle_grid_step > 0.0 && angle_grid_step <= TAU) {
        return Err(Error::invalid("angle_grid_step", format!("must lie in (0, 2pi], got {angle_grid_step}")));
    }
    if !(refine_tol > 0.0 && refine_tol.is_finite()) {
        return Err(Error::invalid("refine_tol", format!("must be positive, got {refine_tol}")));
    }
    if !(r.is_finite() && r >= 0.0) {
        return Err(Error::invalid("r", format!("must be finite and >= 0, got {r}")));
    }

    let count = ((TAU / angle_grid_step) - 1e-9).ceil().max(1.0) as usize;
    let grid: Vec<f64> = (0..count).map(|i| i as f64 * angle_grid_step).collect();

    // E on the (alice, bob) grid; each CHSH combination then costs four lookups.
    let table: Vec<f64> = (0..count * count)
        .into_par_iter()
        .map(|idx| {
            let t = postselected_probs(state, grid[idx / count], grid[idx % count], r)?;
            Ok(correlation_e(&t))
        })
        .collect::<Result<_>>()?;
    let e = |a: usize, b: usize| table[a * count + b];

    let mut best = (f64::NEG_INFINITY, [0usize; 4]);
    for a in 0..count {
        for ap in 0..count {
            for b in 0..count {
                let partial = e(a, b) + e(ap, b);
                for bp in 0..count {
                    let s = partial + e(a, bp) - e(ap, bp);
                    if s > best.0 {
                        best = (s, [a, ap, b, bp]);
                    }
                }
            }
        }
    }

    let mut angles = best.1.map(|i| grid[i]);
    let objective = |angles: &[f64; 4]| bell_s(state, &settings_from(*angles, r));
    let mut current = objective(&angles)?;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < MAX_SWEEPS {
        iterations += 1;
        let mut largest_move: f64 = 0.0;
        for coord in 0..4 {
            let centre = angles[coord];
            let (x, value) = golden_section_max(
                |x| {
                    let mut trial = angles;
                    trial[coord] = x;
                    objective(&trial)
                },
                centre - angle_grid_step,
                centre + angle_grid_step,
                0.5 * refine_tol,
            )?;
            if value > current {
                largest_move = largest_move.max((x - centre).abs());
                angles[coord] = x;
                current = value;
            }
        }
        if largest_move < refine_tol {
            converged = true;
            break;
        }
    }

    let settings = settings_from(angles, r);
    Ok(SearchResult { objective: bell_s(state, &settings)?, settings, iterations, converged })
}

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Golden-section search for a maximum of `f` on `[lo, hi]`.
fn golden_section_max<F>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> Result<(f64, f64)>
where
    F: Fn(f64) -> Result<f64>,
{
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    while hi - lo > tol {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2)?;
        }
    }
    Ok(if f1 >= f2 { (x1, f1) } else { (x2, f2) })
}

/// PR fidelity of `settings` with its dark region replaced by `r`.
pub fn fidelity_at(state: &GaussianTwoModeState, settings: &MeasurementSettings, r: f64) -> Result<f64> {
    Ok(pr_fidelity(bell_s(state, &settings.with_r(r))?))
}

/// Smallest dark-region half-width whose fidelity reaches `target_fidelity`.
///
/// The returned `r` is the upper end of the final bisection bracket, so the
/// target is always met and `r` overshoots the crossing by at most [`R_TOL`].
///
/// Fidelity is sampled on `[0, r_max]` first; the search fails if those
/// samples are not non-decreasing, since bisection would then be meaningless.
pub fn tune_r(state: &GaussianTwoModeState, settings: &MeasurementSettings, target_fidelity: f64, r_max: f64) -> Result<f64> {
    if !(target_fidelity > 0.0 && target_fidelity < 1.0) {
        return Err(Error::invalid("target_fidelity", format!("must lie in (0, 1), got {target_fidelity}")));
    }
    if !(r_max.is_finite() && r_max > 0.0) {
        return Err(Error::invalid("r_max", format!("must be positive and finite, got {r_max}")));
    }
    let at = |r: f64| fidelity_at(state, settings, r);

    let samples: Vec<(f64, f64)> = (0..=MONOTONICITY_SAMPLES)
        .into_par_iter()
        .map(|i| {
            let r = r_max * i as f64 / MONOTONICITY_SAMPLES as f64;
            Ok((r, at(r)?))
        })
        .collect::<Result<_>>()?;

    if target_fidelity <= samples[0].1 {
        return Ok(0.0);
    }
    let max_fidelity = samples[MONOTONICITY_SAMPLES].1;
    if max_fidelity < target_fidelity {
        return Err(Error::TargetUnreachable { target: target_fidelity, r_max, max_fidelity });
    }
    if samples.windows(2).any(|w| w[1].1 < w[0].1 - 1e-12) {
        return Err(Error::NonMonotone { lo: 0.0, hi: r_max });
    }

    let bracket = samples
        .windows(2)
        .find(|w| w[0].1 < target_fidelity && w[1].1 >= target_fidelity)
        .expect("target lies between first and last samples");
    let (mut lo, mut hi) = (bracket[0].0, bracket[1].0);
    while hi - lo > R_TOL {
        let mid = 0.5 * (lo + hi);
        if at(mid)? >= target_fidelity {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chsh::TSIRELSON_BOUND;
    use std::f64::consts::PI;

    #[test]
    fn golden_section_finds_parabola_peak() {
        let (x, v) = golden_section_max(|x| Ok(-(x - 0.3) * (x - 0.3) + 2.0), -1.0, 1.0, 1e-9).unwrap();
        // A flat peak in f64 cannot locate x finer than ~sqrt(eps).
        assert!((x - 0.3).abs() < 1e-6);
        assert!((v - 2.0).abs() < 1e-12);
    }

    #[test]
    fn separable_state_objective_is_zero() {
        let sep = GaussianTwoModeState::separable(1.0).unwrap();
        let res = maximize_s(&sep, 0.5, PI / 2.0, 1e-3).unwrap();
        assert!(res.objective.abs() < 1e-12);
    }

    #[test]
    fn result_is_reproducible() {
        let state = GaussianTwoModeState::new(0.75, 1.25).unwrap();
        let a = maximize_s(&state, 0.0, PI / 4.0, 1e-4).unwrap();
        let b = maximize_s(&state, 0.0, PI / 4.0, 1e-4).unwrap();
        assert_eq!(a, b);
        let again = bell_s(&state, &a.settings).unwrap();
        assert!((again - a.objective).abs() < 1e-8);
        assert!(a.objective <= TSIRELSON_BOUND + 1e-6);
    }

    #[test]
    fn rejects_bad_arguments() {
        let state = GaussianTwoModeState::new(0.75, 1.25).unwrap();
        assert!(maximize_s(&state, 0.0, 0.0, 1e-3).is_err());
        assert!(maximize_s(&state, -1.0, 0.5, 1e-3).is_err());
        let settings = MeasurementSettings::experiment(0.0).unwrap();
        assert!(tune_r(&state, &settings, 1.5, 2.0).is_err());
        assert!(tune_r(&state, &settings, 0.9, 0.0).is_err());
    }

    #[test]
    fn tune_r_trivial_target_returns_zero() {
        let state = GaussianTwoModeState::new(0.75, 1.25).unwrap();
        let settings = MeasurementSettings::experiment(0.0).unwrap();
        let f0 = fidelity_at(&state, &settings, 0.0).unwrap();
        assert_eq!(tune_r(&state, &settings, f0, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn tune_r_reports_unreachable_target() {
        let state = GaussianTwoModeState::new(0.75, 1.25).unwrap();
        let settings = MeasurementSettings::experiment(0.0).unwrap();
        match tune_r(&state, &settings, 0.99, 0.5).unwrap_err() {
            Error::TargetUnreachable { max_fidelity, .. } => assert!(max_fidelity < 0.99),
            other => panic!("unexpected {other:?}"),
        }
    }
}

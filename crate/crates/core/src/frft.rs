//! Lens systems realizing fractional Fourier transforms.
//!
//! A thin lens of focal length `f` with input and output planes at distance
//! `z = 2 f sin^2(theta / 2)` on either side rotates phase space by `theta`.
//! Orders add under composition, so a large rotation can be split across
//! several stages.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Length comparisons are made at this precision (cm).
pub const LENGTH_TOL_CM: f64 = 0.05;

/// Largest order a single positive-focal-length stage reaches (`z = 2f`, imaging).
pub const MAX_STAGE_ORDER: f64 = PI;

/// Upper bound on the ordered lens assignments examined by the planner.
pub const MAX_ASSIGNMENTS: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrftStage {
    pub order: f64,
    pub focal_cm: f64,
    pub z_cm: f64,
}

impl FrftStage {
    /// Stage of the given order built around a lens of focal length `focal_cm`.
    pub fn new(order: f64, focal_cm: f64) -> Result<Self> {
        let z_cm = frft_distance(order, focal_cm)?;
        Ok(Self { order, focal_cm, z_cm })
    }

    /// Stage realized by placing the lens at `z_cm` from both planes.
    pub fn from_distance(z_cm: f64, focal_cm: f64) -> Result<Self> {
        let order = frft_order_from_distance(z_cm, focal_cm)?;
        Ok(Self { order, focal_cm, z_cm })
    }

    pub fn validate(&self) -> Result<()> {
        let z = frft_distance(self.order, self.focal_cm)?;
        if (z - self.z_cm).abs() > LENGTH_TOL_CM {
            return Err(Error::invalid(
                "z_cm",
                format!("{} cm does not realize order {} with f = {} cm (expected {z:.2})", self.z_cm, self.order, self.focal_cm),
            ));
        }
        Ok(())
    }
}

/// `z = 2 f sin^2(theta / 2)`.
pub fn frft_distance(order: f64, focal_cm: f64) -> Result<f64> {
    if !(order > 0.0 && order < TAU) {
        return Err(Error::invalid("order", format!("must lie in (0, 2pi), got {order}")));
    }
    check_focal(focal_cm)?;
    let half = (0.5 * order).sin();
    Ok(2.0 * focal_cm * half * half)
}

/// Inverse of [`frft_distance`] on `(0, pi]`: the order reached with the lens at `z_cm`.
pub fn frft_order_from_distance(z_cm: f64, focal_cm: f64) -> Result<f64> {
    check_focal(focal_cm)?;
    if !(z_cm > 0.0 && z_cm <= 2.0 * focal_cm) {
        return Err(Error::invalid("z_cm", format!("must lie in (0, 2f] = (0, {}], got {z_cm}", 2.0 * focal_cm)));
    }
    Ok(2.0 * (z_cm / (2.0 * focal_cm)).sqrt().asin())
}

fn check_focal(focal_cm: f64) -> Result<()> {
    if !(focal_cm.is_finite() && focal_cm > 0.0) {
        return Err(Error::invalid("focal_cm", format!("must be positive and finite, got {focal_cm}")));
    }
    Ok(())
}

/// Wraps an angle into `[0, 2pi)`.
pub fn wrap_angle(theta: f64) -> f64 {
    let w = theta.rem_euclid(TAU);
    if w >= TAU { 0.0 } else { w }
}

/// Shortest distance between two angles on the circle.
pub fn angular_distance(a: f64, b: f64) -> f64 {
    let d = wrap_angle(a - b);
    d.min(TAU - d)
}

/// Order of a cascade of transforms, modulo `2pi`.
pub fn compose_orders(orders: &[f64]) -> Result<f64> {
    if orders.is_empty() {
        return Err(Error::invalid("orders", "nothing to compose"));
    }
    Ok(wrap_angle(orders.iter().sum()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrftPlan {
    pub stages: Vec<FrftStage>,
    pub target_order: f64,
}

impl FrftPlan {
    pub fn composed_order(&self) -> f64 {
        wrap_angle(self.stages.iter().map(|s| s.order).sum())
    }

    pub fn deviation(&self) -> f64 {
        angular_distance(self.composed_order(), self.target_order)
    }

    pub fn total_z_cm(&self) -> f64 {
        self.stages.iter().map(|s| s.z_cm).sum()
    }

    pub fn is_identity(&self) -> bool {
        self.stages.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Split {
    /// Every stage gets `target / k`.
    Equal,
    /// Leading stages are Fourier transforms (`pi/2`), the last takes the rest.
    FourierLead,
}

/// Orders for `k` stages, or `None` when the last stage would need a
/// non-positive order. The last stage is clamped to [`MAX_STAGE_ORDER`].
fn split_orders(target: f64, k: usize, split: Split) -> Option<Vec<f64>> {
    let lead = match split {
        Split::Equal => target / k as f64,
        Split::FourierLead => FRAC_PI_2,
    };
    if k > 1 && lead > MAX_STAGE_ORDER {
        return None;
    }
    let mut orders = vec![lead; k - 1];
    let last = target - lead * (k - 1) as f64;
    if last <= 0.0 {
        return None;
    }
    orders.push(last.min(MAX_STAGE_ORDER));
    Some(orders)
}

struct Candidate {
    deviation: f64,
    stages: usize,
    total_z: f64,
    plan: Vec<FrftStage>,
}

impl Candidate {
    fn better_than(&self, other: &Candidate) -> bool {
        const EPS: f64 = 1e-12;
        if (self.deviation - other.deviation).abs() > EPS {
            return self.deviation < other.deviation;
        }
        if self.stages != other.stages {
            return self.stages < other.stages;
        }
        self.total_z < other.total_z - 1e-9
    }
}

/// Visits every ordered selection of `k` distinct inventory indices.
fn for_each_assignment(n: usize, k: usize, visit: &mut dyn FnMut(&[usize])) {
    fn rec(n: usize, k: usize, used: &mut Vec<bool>, current: &mut Vec<usize>, visit: &mut dyn FnMut(&[usize])) {
        if current.len() == k {
            visit(current);
            return;
        }
        for i in 0..n {
            if !used[i] {
                used[i] = true;
                current.push(i);
                rec(n, k, used, current, visit);
                current.pop();
                used[i] = false;
            }
        }
    }
    rec(n, k, &mut vec![false; n], &mut Vec::with_capacity(k), visit);
}

fn assignment_count(n: usize, k: usize) -> usize {
    (0..k).fold(1usize, |acc, i| acc.saturating_mul(n - i))
}

/// Exhaustive search for the lens cascade best realizing `target`.
///
/// Each inventory entry is one physical lens and is used at most once. For
/// every stage count up to `max_stages` and every ordered lens assignment the
/// target is split either equally or as Fourier stages followed by a remainder
/// stage; each stage's distance then follows from its focal length. Plans are
/// ranked by deviation from the target, then stage count, then total distance.
pub fn plan_lens_system(target: f64, inventory: &[f64], max_stages: usize, angle_tol: f64) -> Result<FrftPlan> {
    if inventory.is_empty() {
        return Err(Error::EmptyInventory);
    }
    for &f in inventory {
        check_focal(f)?;
    }
    if max_stages == 0 {
        return Err(Error::invalid("max_stages", "must be at least 1"));
    }
    if !target.is_finite() {
        return Err(Error::invalid("target", format!("must be finite, got {target}")));
    }
    if !(angle_tol.is_finite() && angle_tol >= 0.0) {
        return Err(Error::invalid("angle_tol", format!("must be finite and >= 0, got {angle_tol}")));
    }
    let target = wrap_angle(target);
    let max_stages = max_stages.min(inventory.len());
    if assignment_count(inventory.len(), max_stages) > MAX_ASSIGNMENTS {
        return Err(Error::invalid("inventory", "too many lens assignments to search exhaustively"));
    }

    let mut best = Candidate {
        deviation: angular_distance(0.0, target),
        stages: 0,
        total_z: 0.0,
        plan: Vec::new(),
    };

    for k in 1..=max_stages {
        for split in [Split::Equal, Split::FourierLead] {
            let Some(orders) = split_orders(target, k, split) else { continue };
            for_each_assignment(inventory.len(), k, &mut |lenses| {
                let plan: Vec<FrftStage> = orders
                    .iter()
                    .zip(lenses)
                    .map(|(&o, &i)| FrftStage::new(o, inventory[i]).expect("orders and focal lengths validated"))
                    .collect();
                let composed = wrap_angle(orders.iter().sum());
                let cand = Candidate {
                    deviation: angular_distance(composed, target),
                    stages: k,
                    total_z: plan.iter().map(|s| s.z_cm).sum(),
                    plan,
                };
                if cand.better_than(&best) {
                    best = cand;
                }
            });
        }
    }

    if best.deviation > angle_tol {
        return Err(Error::NoPlanWithinTolerance { best_deviation: best.deviation, tolerance: angle_tol });
    }
    Ok(FrftPlan { stages: best.plan, target_order: target })
}

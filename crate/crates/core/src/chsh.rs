//! Dark-region post-selection, sign binning and the CHSH quantities built on it.
//!
//! A photon landing at `|x| <= r` is never detected; the rest are binned by
//! the half-plane they fall in. Tables are renormalized by the surviving
//! probability mass, which is kept separately as `kept_fraction`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::quadrature::{integrate_with_breakpoints, Tolerance};
use crate::state::{position_joint_density, BivariateGaussian, GaussianTwoModeState};

/// Post-selections keeping less than this mass are rejected.
pub const MIN_KEPT_FRACTION: f64 = 1e-12;

/// Absolute accuracy of a quadrant mass.
pub const QUADRANT_ABS_TOL: f64 = 1e-10;

/// Classical (local) bound on the Bell parameter.
pub const CLASSICAL_BOUND: f64 = 2.0;

/// Tsirelson bound `2 sqrt 2`.
pub const TSIRELSON_BOUND: f64 = 2.0 * std::f64::consts::SQRT_2;

/// Fidelity above which communication complexity becomes trivial.
pub const TRIVIAL_COMPLEXITY_FIDELITY: f64 = 0.908;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    Plus,
    Minus,
}

impl Outcome {
    pub fn sign(self) -> f64 {
        match self {
            Outcome::Plus => 1.0,
            Outcome::Minus => -1.0,
        }
    }
}

/// Alice's two rotations, Bob's two rotations, and the dark-region half-width
/// (dimensionless).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSettings {
    pub alpha: f64,
    pub alpha_prime: f64,
    pub beta: f64,
    pub beta_prime: f64,
    pub r: f64,
}

impl MeasurementSettings {
    pub fn new(alpha: f64, alpha_prime: f64, beta: f64, beta_prime: f64, r: f64) -> Result<Self> {
        let s = Self { alpha, alpha_prime, beta, beta_prime, r };
        s.validate()?;
        Ok(s)
    }

    /// The experiment's choice: imaging and Fourier systems for Alice,
    /// `5pi/4` and `3pi/4` for Bob.
    pub fn experiment(r: f64) -> Result<Self> {
        Self::new(PI, PI / 2.0, 5.0 * PI / 4.0, 3.0 * PI / 4.0, r)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("alpha", self.alpha),
            ("alpha_prime", self.alpha_prime),
            ("beta", self.beta),
            ("beta_prime", self.beta_prime),
        ] {
            if !v.is_finite() {
                return Err(Error::invalid(name, format!("angle must be finite, got {v}")));
            }
        }
        check_r(self.r)
    }

    pub fn with_r(&self, r: f64) -> Self {
        Self { r, ..*self }
    }

    /// The four `(alice, bob)` angle pairs in CHSH order.
    pub fn pairs(&self) -> [(SettingPair, f64, f64); 4] {
        [
            (SettingPair::AlphaBeta, self.alpha, self.beta),
            (SettingPair::AlphaPrimeBeta, self.alpha_prime, self.beta),
            (SettingPair::AlphaBetaPrime, self.alpha, self.beta_prime),
            (SettingPair::AlphaPrimeBetaPrime, self.alpha_prime, self.beta_prime),
        ]
    }
}

fn check_r(r: f64) -> Result<()> {
    if !(r.is_finite() && r >= 0.0) {
        return Err(Error::invalid("r", format!("dark-region half-width must be finite and >= 0, got {r}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SettingPair {
    AlphaBeta,
    AlphaPrimeBeta,
    AlphaBetaPrime,
    AlphaPrimeBetaPrime,
}

impl SettingPair {
    pub const ALL: [SettingPair; 4] = [
        SettingPair::AlphaBeta,
        SettingPair::AlphaPrimeBeta,
        SettingPair::AlphaBetaPrime,
        SettingPair::AlphaPrimeBetaPrime,
    ];

    pub fn label(self) -> &'static str {
        match self {
            SettingPair::AlphaBeta => "alpha,beta",
            SettingPair::AlphaPrimeBeta => "alpha',beta",
            SettingPair::AlphaBetaPrime => "alpha,beta'",
            SettingPair::AlphaPrimeBetaPrime => "alpha',beta'",
        }
    }

    /// Short identifier usable in column names.
    pub fn key(self) -> &'static str {
        match self {
            SettingPair::AlphaBeta => "ab",
            SettingPair::AlphaPrimeBeta => "apb",
            SettingPair::AlphaBetaPrime => "abp",
            SettingPair::AlphaPrimeBetaPrime => "apbp",
        }
    }

    /// Sign with which `E` enters the Bell parameter.
    pub fn chsh_sign(self) -> f64 {
        match self {
            SettingPair::AlphaPrimeBetaPrime => -1.0,
            _ => 1.0,
        }
    }

    /// Whether the PR-box truth table wants anti-correlated outcomes here.
    pub fn wants_anticorrelation(self) -> bool {
        self == SettingPair::AlphaPrimeBetaPrime
    }
}

/// Renormalized probabilities of the four sign outcomes plus the kept mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointProbTable {
    pub p_pp: f64,
    pub p_pm: f64,
    pub p_mp: f64,
    pub p_mm: f64,
    pub kept_fraction: f64,
}

impl JointProbTable {
    pub fn get(&self, alice: Outcome, bob: Outcome) -> f64 {
        match (alice, bob) {
            (Outcome::Plus, Outcome::Plus) => self.p_pp,
            (Outcome::Plus, Outcome::Minus) => self.p_pm,
            (Outcome::Minus, Outcome::Plus) => self.p_mp,
            (Outcome::Minus, Outcome::Minus) => self.p_mm,
        }
    }

    pub fn sum(&self) -> f64 {
        self.p_pp + self.p_pm + self.p_mp + self.p_mm
    }

    pub fn alice_plus(&self) -> f64 {
        self.p_pp + self.p_pm
    }

    pub fn bob_plus(&self) -> f64 {
        self.p_pp + self.p_mp
    }

    pub fn correlation(&self) -> f64 {
        correlation_e(self)
    }
}

/// Standard normal upper tail `Q(z) = P(Z > z)`.
pub fn normal_sf(z: f64) -> f64 {
    0.5 * erfc(z * FRAC_1_SQRT_2)
}

fn standard_normal_pdf(u: f64) -> f64 {
    (-0.5 * u * u).exp() / (2.0 * PI).sqrt()
}

/// Width of the integration window past the lower limit; `phi(h + 40) / phi(h) < e^-800`.
const TAIL_SPAN: f64 = 40.0;

/// Un-normalized mass of `{s1 x1 > r} x {s2 x2 > r}`.
///
/// Conditioning on `u = s1 x1 / sigma1` reduces the rectangle to
/// `int_h^inf phi(u) Q((k - rho u) / sqrt(1 - rho^2)) du` with `h = r/sigma1`,
/// `k = r/sigma2` and `rho = s1 s2 corr`. The integral is evaluated adaptively
/// to relative accuracy 1e-10 (hence absolute 1e-10 as the mass is <= 1), so
/// renormalized tables stay accurate deep in the tails.
pub fn quadrant_probability(bg: &BivariateGaussian, s1: Outcome, s2: Outcome, r: f64) -> Result<f64> {
    check_r(r)?;
    let h = r / bg.std1();
    let k = r / bg.std2();
    let rho = s1.sign() * s2.sign() * bg.corr();
    let one_minus = 1.0 - rho * rho;

    if one_minus <= 0.0 {
        // Perfect (anti-)correlation: the distribution lives on a line.
        return Ok(if rho > 0.0 { normal_sf(h.max(k)) } else { 0.0 });
    }
    if rho == 0.0 {
        return Ok(normal_sf(h) * normal_sf(k));
    }

    let scale = one_minus.sqrt();
    let integrand = |u: f64| standard_normal_pdf(u) * normal_sf((k - rho * u) / scale);

    let upper = h + TAIL_SPAN;
    let mut breakpoints = vec![h];
    // The conditional tail switches from ~0 to ~1 around u = k / rho.
    let step = k / rho;
    if step > h && step < upper {
        breakpoints.push(step);
    }
    breakpoints.push(upper);

    let tol = Tolerance::new(f64::MIN_POSITIVE, QUADRANT_ABS_TOL);
    let res = integrate_with_breakpoints(integrand, &breakpoints, tol, 4000)?;
    Ok(res.value.clamp(0.0, 1.0))
}

/// Renormalized table for `bg` with dark region `r`.
pub fn postselected_table(bg: &BivariateGaussian, r: f64) -> Result<JointProbTable> {
    use Outcome::{Minus, Plus};
    let pp = quadrant_probability(bg, Plus, Plus, r)?;
    let pm = quadrant_probability(bg, Plus, Minus, r)?;
    let mp = quadrant_probability(bg, Minus, Plus, r)?;
    let mm = quadrant_probability(bg, Minus, Minus, r)?;
    let kept = pp + pm + mp + mm;
    if !(kept >= MIN_KEPT_FRACTION) {
        return Err(Error::EmptyPostSelection { kept_fraction: kept });
    }
    Ok(JointProbTable {
        p_pp: pp / kept,
        p_pm: pm / kept,
        p_mp: mp / kept,
        p_mm: mm / kept,
        kept_fraction: kept.min(1.0),
    })
}

/// Post-selected sign-binned probabilities after rotations `alpha`, `beta`.
pub fn postselected_probs(state: &GaussianTwoModeState, alpha: f64, beta: f64, r: f64) -> Result<JointProbTable> {
    postselected_table(&position_joint_density(state, alpha, beta)?, r)
}

/// `E = P(+,+) + P(-,-) - P(+,-) - P(-,+)`.
pub fn correlation_e(table: &JointProbTable) -> f64 {
    (table.p_pp + table.p_mm - table.p_pm - table.p_mp).clamp(-1.0, 1.0)
}

/// `<sgn(x1^alpha) sgn(x2^beta)>` without post-selection, via the arcsine law.
pub fn sign_expectation(state: &GaussianTwoModeState, alpha: f64, beta: f64) -> Result<f64> {
    let bg = position_joint_density(state, alpha, beta)?;
    Ok(2.0 / PI * bg.corr().asin())
}

/// The four post-selected tables of one CHSH configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChshTables {
    pub settings: MeasurementSettings,
    pub tables: [JointProbTable; 4],
}

impl ChshTables {
    pub fn table(&self, pair: SettingPair) -> &JointProbTable {
        &self.tables[pair as usize]
    }

    pub fn correlations(&self) -> [f64; 4] {
        self.tables.map(|t| correlation_e(&t))
    }

    pub fn bell_s(&self) -> f64 {
        SettingPair::ALL
            .iter()
            .map(|&p| p.chsh_sign() * correlation_e(self.table(p)))
            .sum()
    }

    /// Mean kept fraction over the four settings.
    pub fn mean_kept_fraction(&self) -> f64 {
        self.tables.iter().map(|t| t.kept_fraction).sum::<f64>() / 4.0
    }

    /// Eight-term success probability of the post-selected AND gate: outcomes
    /// agree unless both parties pick their primed setting.
    pub fn and_gate_success(&self) -> f64 {
        let mut total = 0.0;
        for pair in SettingPair::ALL {
            let t = self.table(pair);
            total += if pair.wants_anticorrelation() { t.p_pm + t.p_mp } else { t.p_pp + t.p_mm };
        }
        total / 4.0
    }
}

pub fn chsh_tables(state: &GaussianTwoModeState, settings: &MeasurementSettings) -> Result<ChshTables> {
    settings.validate()?;
    let pairs = settings.pairs();
    let mut tables = [JointProbTable { p_pp: 0.0, p_pm: 0.0, p_mp: 0.0, p_mm: 0.0, kept_fraction: 0.0 }; 4];
    for (slot, (_, a, b)) in tables.iter_mut().zip(pairs) {
        *slot = postselected_probs(state, a, b, settings.r)?;
    }
    Ok(ChshTables { settings: *settings, tables })
}

/// `S = E(a,b) + E(a',b) + E(a,b') - E(a',b')` from post-selected tables.
pub fn bell_s(state: &GaussianTwoModeState, settings: &MeasurementSettings) -> Result<f64> {
    Ok(chsh_tables(state, settings)?.bell_s())
}

/// Success probability `(4 + S) / 8` of the probabilistic PR box reaching `S`.
pub fn pr_fidelity(s: f64) -> f64 {
    debug_assert!(s.abs() <= 4.0 + 1e-9, "Bell parameter {s} outside [-4, 4]");
    (s + 4.0) / 8.0
}

pub fn and_gate_success(state: &GaussianTwoModeState, settings: &MeasurementSettings) -> Result<f64> {
    Ok(chsh_tables(state, settings)?.and_gate_success())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Party {
    Alice,
    Bob,
}

/// One party's `P(+)` for one joint setting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Marginal {
    pub party: Party,
    pub pair: SettingPair,
    pub p_plus: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoSignalingReport {
    pub marginals: Vec<Marginal>,
    pub max_deviation: f64,
}

impl NoSignalingReport {
    pub fn from_tables(tables: &ChshTables) -> Self {
        let mut marginals = Vec::with_capacity(8);
        for party in [Party::Alice, Party::Bob] {
            for pair in SettingPair::ALL {
                let t = tables.table(pair);
                let p_plus = match party {
                    Party::Alice => t.alice_plus(),
                    Party::Bob => t.bob_plus(),
                };
                marginals.push(Marginal { party, pair, p_plus });
            }
        }
        let max_deviation = marginals.iter().map(|m| (m.p_plus - 0.5).abs()).fold(0.0, f64::max);
        Self { marginals, max_deviation }
    }

    pub fn get(&self, party: Party, pair: SettingPair) -> f64 {
        self.marginals
            .iter()
            .find(|m| m.party == party && m.pair == pair)
            .map(|m| m.p_plus)
            .expect("report covers every party and pair")
    }
}

pub fn no_signaling_report(state: &GaussianTwoModeState, settings: &MeasurementSettings) -> Result<NoSignalingReport> {
    Ok(NoSignalingReport::from_tables(&chsh_tables(state, settings)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub beta: f64,
    pub value: f64,
}

/// `E(alpha, beta)` at fixed `r` for each `beta` in `grid`, in grid order.
pub fn sweep_beta(state: &GaussianTwoModeState, alpha: f64, r: f64, grid: &[f64]) -> Result<Vec<CurvePoint>> {
    if grid.is_empty() {
        return Err(Error::invalid("grid", "sweep grid is empty"));
    }
    check_r(r)?;
    grid.par_iter()
        .map(|&beta| {
            let table = postselected_probs(state, alpha, beta, r)?;
            Ok(CurvePoint { beta, value: correlation_e(&table) })
        })
        .collect()
}

/// Unit-amplitude sinusoid `sin(beta + phase)` used as a plotting overlay.
pub fn quantum_reference_curve(grid: &[f64], phase: f64) -> Result<Vec<CurvePoint>> {
    if grid.is_empty() {
        return Err(Error::invalid("grid", "reference grid is empty"));
    }
    Ok(grid.iter().map(|&beta| CurvePoint { beta, value: (beta + phase).sin() }).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use Outcome::{Minus, Plus};

    fn reference_state() -> GaussianTwoModeState {
        GaussianTwoModeState::new(0.75, 1.25).unwrap()
    }

    #[test]
    fn independent_quadrants_are_quarters() {
        let bg = BivariateGaussian::new(0.7, 2.0, 0.0).unwrap();
        for (a, b) in [(Plus, Plus), (Plus, Minus), (Minus, Plus), (Minus, Minus)] {
            assert!((quadrant_probability(&bg, a, b, 0.0).unwrap() - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn perfectly_correlated_limit() {
        let bg = BivariateGaussian::new(1.0, 1.0, 1.0).unwrap();
        assert_eq!(quadrant_probability(&bg, Plus, Plus, 0.0).unwrap(), 0.5);
        assert_eq!(quadrant_probability(&bg, Plus, Minus, 0.0).unwrap(), 0.0);
        let anti = BivariateGaussian::new(1.0, 4.0, -1.0).unwrap();
        assert_eq!(quadrant_probability(&anti, Plus, Minus, 0.5).unwrap(), normal_sf(0.5));
    }

    #[test]
    fn orthant_identity_at_r_zero() {
        for rho in [-0.95, -0.4, 0.1, 0.6, 0.999] {
            let bg = BivariateGaussian::new(1.3, 0.4, rho).unwrap();
            let p = quadrant_probability(&bg, Plus, Plus, 0.0).unwrap();
            let expected = 0.25 + rho.asin() / (2.0 * PI);
            assert!((p - expected).abs() < 1e-11, "rho={rho}: {p} vs {expected}");
        }
    }

    #[test]
    fn near_unit_correlation_with_dark_region() {
        let rho: f64 = 1.0 - 1e-11;
        let bg = BivariateGaussian::new(1.0, 1.0, rho).unwrap();
        let p = quadrant_probability(&bg, Plus, Plus, 1.0).unwrap();
        assert!((p - normal_sf(1.0)).abs() < 1e-5);
    }

    #[test]
    fn negative_r_rejected() {
        let bg = BivariateGaussian::new(1.0, 1.0, 0.2).unwrap();
        assert!(quadrant_probability(&bg, Plus, Plus, -0.1).is_err());
    }

    #[test]
    fn no_dark_region_keeps_everything() {
        let t = postselected_probs(&reference_state(), PI, 1.0, 0.0).unwrap();
        assert!((t.kept_fraction - 1.0).abs() < 1e-10);
        assert!((t.sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn separable_tables_are_uniform() {
        let sep = GaussianTwoModeState::separable(1.1).unwrap();
        for r in [0.0, 0.7, 2.5] {
            let t = postselected_probs(&sep, 0.4, 2.0, r).unwrap();
            for p in [t.p_pp, t.p_pm, t.p_mp, t.p_mm] {
                assert!((p - 0.25).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn far_tail_post_selection_is_rejected() {
        let err = postselected_probs(&reference_state(), PI, 1.0, 40.0).unwrap_err();
        assert!(matches!(err, Error::EmptyPostSelection { .. }));
    }

    #[test]
    fn correlation_examples() {
        let uniform = JointProbTable { p_pp: 0.25, p_pm: 0.25, p_mp: 0.25, p_mm: 0.25, kept_fraction: 1.0 };
        assert_eq!(correlation_e(&uniform), 0.0);
        let perfect = JointProbTable { p_pp: 0.5, p_pm: 0.0, p_mp: 0.0, p_mm: 0.5, kept_fraction: 1.0 };
        assert_eq!(correlation_e(&perfect), 1.0);
    }

    #[test]
    fn sign_expectation_limits() {
        let sep = GaussianTwoModeState::separable(0.8).unwrap();
        assert_eq!(sign_expectation(&sep, 0.3, 1.9).unwrap(), 0.0);
        assert!((2.0 / PI * 1.0_f64.asin() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn fidelity_anchors() {
        assert!((pr_fidelity(TSIRELSON_BOUND) - 0.854).abs() < 1e-3);
        assert_eq!(pr_fidelity(2.0), 0.75);
        assert!((pr_fidelity(3.42) - 0.9275).abs() < 1e-12);
    }

    #[test]
    fn separable_state_gives_zero_bell_parameter() {
        let sep = GaussianTwoModeState::separable(1.0).unwrap();
        let settings = MeasurementSettings::experiment(0.8).unwrap();
        assert!(bell_s(&sep, &settings).unwrap().abs() < 1e-12);
        assert!((and_gate_success(&sep, &settings).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn experiment_settings_exceed_tsirelson_at_r_two() {
        let s = bell_s(&reference_state(), &MeasurementSettings::experiment(2.0).unwrap()).unwrap();
        assert!(s > TSIRELSON_BOUND, "S = {s}");
        let s0 = bell_s(&reference_state(), &MeasurementSettings::experiment(0.0).unwrap()).unwrap();
        assert!(s0 <= CLASSICAL_BOUND, "S(0) = {s0}");
    }

    #[test]
    fn and_gate_matches_fidelity_identity() {
        let settings = MeasurementSettings::experiment(1.3).unwrap();
        let tables = chsh_tables(&reference_state(), &settings).unwrap();
        assert!((tables.and_gate_success() - pr_fidelity(tables.bell_s())).abs() < 1e-12);
    }

    #[test]
    fn marginals_are_exactly_half() {
        let report = no_signaling_report(&reference_state(), &MeasurementSettings::experiment(0.9).unwrap()).unwrap();
        assert_eq!(report.marginals.len(), 8);
        assert!(report.max_deviation < 1e-12);
        let a = report.get(Party::Alice, SettingPair::AlphaBeta);
        let b = report.get(Party::Alice, SettingPair::AlphaBetaPrime);
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn sweep_is_periodic_and_ordered() {
        let grid = [0.3, 0.3 + 2.0 * PI, 1.0];
        let curve = sweep_beta(&reference_state(), PI, 0.5, &grid).unwrap();
        assert_eq!(curve.len(), 3);
        assert_eq!(curve[2].beta, 1.0);
        assert!((curve[0].value - curve[1].value).abs() < 1e-9);
        assert!(sweep_beta(&reference_state(), PI, 0.5, &[]).is_err());
    }

    #[test]
    fn reference_curve_is_unit_sine() {
        let grid: Vec<f64> = (0..=64).map(|i| i as f64 * PI / 32.0).collect();
        let curve = quantum_reference_curve(&grid, 0.0).unwrap();
        assert_eq!(curve[0].value, 0.0);
        let amp = curve.iter().map(|p| p.value.abs()).fold(0.0, f64::max);
        assert!((amp - 1.0).abs() < 1e-12);
        assert!(quantum_reference_curve(&[], 0.0).is_err());
    }
}

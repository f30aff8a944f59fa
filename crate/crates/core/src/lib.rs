//! Simulation of sign-binned, post-selected position measurements on a
//! two-mode Gaussian photon-pair state.
//!
//! Discarding detections inside a dark region `|x| <= r` turns the weak
//! correlations of the Gaussian state into correlations that approach those of
//! a Popescu-Rohrlich box: the CHSH parameter climbs past the Tsirelson bound
//! towards 4 as `r` grows. The crate computes these quantities analytically
//! ([`chsh`]), checks them against a coincidence-counting Monte Carlo
//! ([`montecarlo`]), searches over settings ([`optimizer`]) and plans the
//! fractional-Fourier-transform lens systems that implement the rotations
//! ([`frft`]).

pub mod chsh;
pub mod error;
pub mod frft;
pub mod montecarlo;
pub mod optimizer;
pub mod quadrature;
pub mod state;

pub use chsh::{
    and_gate_success, bell_s, chsh_tables, correlation_e, no_signaling_report, postselected_probs, pr_fidelity,
    quadrant_probability, quantum_reference_curve, sign_expectation, sweep_beta, ChshTables, CurvePoint,
    JointProbTable, MeasurementSettings, NoSignalingReport, Outcome, Party, SettingPair,
};
pub use error::{Error, Result};
pub use frft::{compose_orders, frft_distance, frft_order_from_distance, plan_lens_system, FrftPlan, FrftStage};
pub use montecarlo::{
    estimate_probabilities, mc_bell_s, sample_pairs, simulate_counts, BellEstimate, CountTable, ProbabilityEstimate,
};
pub use optimizer::{maximize_s, tune_r, SearchResult};
pub use state::{
    closed_form_r_half_pi, closed_form_r_pi, covariance_from_state, position_joint_density, quad_form_matrix,
    rotate_covariance, wigner_value, BivariateGaussian, CovarianceMatrix4, GaussianTwoModeState,
};

//! Ergodic secrecy-rate analysis of uplink RIS-aided MU-MISO systems under
//! Von Mises phase errors, for passive, active and energy-harvesting RIS.
//!
//! The crate pairs closed-form second-order moments and rate expressions
//! (`closed_form`) with a first-principles Monte-Carlo engine
//! (`monte_carlo`) that serves as their verification oracle, plus phase
//! design and configuration selection (`design`) and experiment
//! orchestration for the CLI (`experiment`).

pub mod closed_form;
pub mod design;
mod error;
pub mod experiment;
pub mod geometry;
pub mod instantaneous;
pub mod monte_carlo;
pub mod scenario;
pub mod stochastic;

pub use error::{Error, Result};

pub use closed_form::{CoherenceFactors, MomentSet, RateReport};
pub use design::{GaConfig, GaOutcome, PowerBudgets, SelectionOutcome};
pub use geometry::{AnglePair, AngleSet, ArraySpec, Link, NodeLayout, PathLossSpec, Point};
pub use instantaneous::{PhasePlan, RisMode, RisModeKind, SinrBreakdown};
pub use monte_carlo::{AgreementReport, Estimate, McOptions, MomentId};
pub use scenario::{parse_scenario, parse_scenario_str, Gains, RicianFactors, Scenario};
pub use stochastic::{ChannelDraw, LosSet, PhaseErrorSpec};

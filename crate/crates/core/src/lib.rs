//! Computational laboratory for toric K-stability and canonical Kähler
//! metrics.
//!
//! * [`polytope`] and [`kstability`]: exact lattice combinatorics,
//!   Donaldson–Futaki invariants and CM-degree numerics.
//! * [`psh`]: Lelong numbers and integrability thresholds of model weights.
//! * [`metric_models`]: closed-form singular model metrics.
//! * [`ma_engine`]: rotationally reduced Monge–Ampère, soliton, continuity
//!   path and Kähler–Ricci flow solvers on the sphere.
//! * [`fibration`]: Weil–Petersson geometry of one-parameter families.
//! * [`jobs`]: JSON job configs, deterministic reports and sweeps.

pub mod error;
pub mod exec;
pub mod fibration;
pub mod jobs;
pub mod kstability;
pub mod ma_engine;
pub mod metric_models;
pub mod poly;
pub mod polytope;
pub mod psh;
pub mod quad;
pub mod rational;

pub use error::{LabError, Result};
pub use exec::Exec;
pub use rational::Rational;

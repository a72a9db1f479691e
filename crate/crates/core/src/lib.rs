//! Numerical laboratory for career-concerns games in which a principal pools
//! the outcomes of a consumer segment to forecast each member's type.
//!
//! Two kinds of linkage are modelled. Under a *quality* linkage the agents'
//! types share a common component; under a *circumstance* linkage their
//! transient shocks do. The crate computes the marginal value of effort
//! `MV(N)` for a segment of `N` agents, the resulting entry-and-effort
//! equilibrium, and welfare, profit, and consumer surplus under several
//! market arrangements.
//!
//! Marginal values come from three independent routes:
//!
//! * [`gaussian`]: closed forms and covariance projection for Gaussian models,
//! * [`posterior`]: nested quadrature for logistic / Student-t components,
//! * [`oracle`]: a brute-force Monte Carlo estimate of the agent's expected
//!   forecast under a unilateral deviation.
//!
//! The crate is `no_std` compatible (it needs `alloc`). The default `std`
//! feature only enables parallel Monte Carlo chunks; results are bit-identical
//! with and without it.
#![cfg_attr(not(feature = "std"), no_std)]
#![warn(missing_debug_implementations)]
// `!(x > 0.0)` is how NaN inputs get rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod equilibrium;
mod error;
pub mod gaussian;
pub mod math;
pub mod model;
pub mod oracle;
pub mod posterior;
pub mod qmc;
pub mod welfare;

pub use error::{Error, Result};
pub use model::{
    ComponentDist, CostFunction, GaussianParams, GeneralParams, LinkageKind, Scenario,
};

/// Which numerical route produced a marginal value.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum MvMethod {
    ClosedForm,
    Projection,
    Quadrature,
    MonteCarlo,
}

/// A marginal value of effort together with how it was obtained.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MvResult {
    pub value: f64,
    /// `None` for deterministic routes.
    pub std_error: Option<f64>,
    pub method: MvMethod,
}

impl MvResult {
    pub fn exact(value: f64, method: MvMethod) -> Self {
        Self {
            value,
            std_error: None,
            method,
        }
    }
}

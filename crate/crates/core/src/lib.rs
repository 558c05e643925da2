//! Residual-diagnostics workbench built around the lineup protocol.
//!
//! The crate simulates regression data with controlled departures
//! ([`simulate`]), runs the conventional RESET / Breusch-Pagan /
//! Shapiro-Wilk tests ([`conventional`]), measures departure strength as a
//! Kullback-Leibler effect size ([`effect_size`]), builds and renders
//! lineups ([`lineup`]), turns human lineup evaluations into visual
//! p-values ([`visual`]) and compares both test families through power
//! curves ([`power`]).

pub mod conventional;
pub mod effect_size;
pub mod error;
pub mod fsutil;
pub mod lineup;
pub mod numerics;
pub mod parallel;
pub mod power;
pub mod simulate;
pub mod visual;

pub use error::{Error, Result};

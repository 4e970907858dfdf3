//! Numerical laboratory for the growth and transport of entanglement in a gas.
//!
//! The library follows one physical story across scales:
//!
//! * [`algebra`] — per-atom channel-index operators (projectors, raisers), the
//!   pair contagion operator, and the projection that collapses every index
//!   string onto full intricacy.
//! * [`evolution`] — exact time evolution of an index-resolved wave function
//!   on a small discretized configuration space, with independent dense
//!   oracles for cross-checking.
//! * [`kmc`] — event-driven hard-sphere gas in which the intricacy tag spreads
//!   by collision contagion; produces empirical front trajectories.
//! * [`kinetics`] — explicit finite-difference solver for the logistic
//!   reaction-diffusion transport equations, with an optional imposed moving
//!   front.
//! * [`front`] — the traveling-wave profile behind the front: tail exponent
//!   3 − √3 and the shooting integration of the profile ODE.
//! * [`census`] — order-of-magnitude counts of environment-induced intricacy
//!   waves in a macroscopic body.
//!
//! [`config`], [`output`], [`plot`], and [`verify`] are the experiment
//! harness: INI-style configuration, CSV/manifest emission, SVG plots, and
//! the bundled verification checks run by `intricacy verify`.

pub mod algebra;
pub mod census;
pub mod config;
pub mod error;
pub mod evolution;
pub mod front;
pub mod kinetics;
pub mod kmc;
pub mod output;
pub mod plot;
pub mod verify;

pub use error::{Error, Result};

//! Quantum rate equations for electron transport through quantum dots
//! monitored by a single-electron-transistor detector.

pub mod analytic;
pub mod builders;
pub mod config;
pub mod exec;
pub mod experiments;
pub mod linalg;
pub mod model;
pub mod observables;
pub mod output;
pub mod solver;
pub mod validation;

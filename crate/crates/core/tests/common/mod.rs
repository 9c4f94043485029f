//! Shared oracles and fixtures for the integration tests.
#![allow(dead_code)]

pub mod checks;
pub mod jet;
pub mod models;
pub mod oracle;
pub mod quadrature;

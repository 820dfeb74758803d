//! Calculus of concave desingularizing functions for the generalized
//! Kurdyka-Łojasiewicz property, with grid-based verification and
//! exact-modulus estimation from sampled subgradient data.

pub mod calculus;
pub mod desing;
pub mod error;
pub mod eta;
pub mod grid;
pub mod linalg;
pub mod modulus;
pub mod oracle;
pub mod oracles;
pub mod selftest;
pub mod tables;
pub mod verifier;

pub use desing::{DesingFn, Form};
pub use error::{KlError, Result};
pub use eta::Eta;
pub use grid::GridSpec;
pub use oracle::{AnalyticOracle, DomainHint, FnOracle};
pub use verifier::{
    dominance_test, estimate_alpha, estimate_alpha_seeded, verify_kl, verify_kl_with_tolerance,
    AlphaEstimate, KLReport,
};

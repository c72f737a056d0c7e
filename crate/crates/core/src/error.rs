use thiserror::Error;

/// Errors raised while constructing or transforming crystallographic objects.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum CrystalError {
    #[error("degenerate lattice (volume {volume:e})")]
    DegenerateLattice { volume: f64 },

    #[error("lattice contains non-finite entries")]
    NonFiniteLattice,

    #[error("invalid cell parameters: {0}")]
    InvalidParameters(String),

    #[error("matrix is not unimodular (det = {det})")]
    NotUnimodular { det: i64 },

    #[error("{species} species for {coords} coordinates")]
    LengthMismatch { species: usize, coords: usize },

    #[error("structure has no sites")]
    EmptyStructure,

    #[error("non-finite fractional coordinate at site {site}")]
    NonFiniteCoordinate { site: usize },

    #[error("Niggli reduction did not converge after {iterations} iterations")]
    NiggliNotConverged { iterations: usize },

    #[error("supercell multiplier must be >= 1")]
    InvalidSupercell,
}

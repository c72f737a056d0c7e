//! Screening duplicate candidates for mirror-image (enantiomorph) pairs.

use serde::{Deserialize, Serialize};

use crate::matcher::{MatchOptions, MatchTolerances, PairAnalysis, PreparedStructure};

/// Proper-only rmse must be at least this many times the unconstrained rmse.
pub const ENANTIOMORPH_RATIO: f64 = 10.0;

/// Both rmse values are floored here before the ratio test, so two numerically
/// exact matches (ratio 0/0) are not flagged and round-off cannot trigger it.
pub const RMSE_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnantiomorphCheck {
    pub id1: String,
    pub id2: String,
    /// Best rmse with improper alignments allowed; `None` if the pair does not
    /// match at all.
    pub rmse_improper: Option<f64>,
    /// Best rmse restricted to proper rotations; `None` if none matches.
    pub rmse_proper_only: Option<f64>,
    pub flagged: bool,
}

/// The tenfold rule on a pair of rmse values.
pub fn is_enantiomorph(rmse_improper: f64, rmse_proper_only: Option<f64>) -> bool {
    match rmse_proper_only {
        None => true,
        Some(p) => p.max(RMSE_FLOOR) >= ENANTIOMORPH_RATIO * rmse_improper.max(RMSE_FLOOR),
    }
}

/// Compare a pair with and without improper alignments at tolerances `tol`.
pub fn screen_pair(
    id1: &str,
    id2: &str,
    p1: &PreparedStructure,
    p2: &PreparedStructure,
    tol: &MatchTolerances,
    opts: &MatchOptions,
) -> EnantiomorphCheck {
    let both = MatchOptions {
        allow_improper: true,
        ..*opts
    };
    let analysis = PairAnalysis::from_prepared(p1, p2, tol, &both);
    let improper = analysis.best(tol, true).map(|r| r.rmse);
    let proper = analysis.best(tol, false).map(|r| r.rmse);
    EnantiomorphCheck {
        id1: id1.to_string(),
        id2: id2.to_string(),
        rmse_improper: improper,
        rmse_proper_only: proper,
        flagged: improper.is_some_and(|i| is_enantiomorph(i, proper)),
    }
}

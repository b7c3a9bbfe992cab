//! Decision-optimal interval designs for phase I dose finding.
//!
//! Boundaries come in a closed-form local family and a numerically
//! optimized global family. Decisions compare the observed toxicity rate at
//! the current dose with those boundaries after a posterior safety check,
//! and the MTD is selected from an isotonic fit at the end of the trial.

pub mod boundaries;
pub mod decision;
pub mod design;
pub mod elimination;
pub mod error;
pub mod isotonic;
pub mod special;
pub mod state;
pub mod table;

pub use boundaries::{
    global_boundaries, global_cutoff_table, global_error_rate, global_error_rate_quadrature, local_boundaries,
    local_error_rate, BoundaryFamily, CompositeMarginals, Cutoffs, IntervalBoundaries, Signal,
};
pub use decision::{decide, resolve_signal, Decision, IntervalDesign, Termination};
pub use design::{DesignSpec, EliminationRule, HypothesisPriors};
pub use elimination::{eliminate_check, elimination_table, EliminationBoundaries};
pub use error::{Error, Result};
pub use isotonic::{isotonic_fit, pava, select_from_counts, select_mtd, SelectionReport, TieRule};
pub use state::{CohortRecord, DoseCounts, TrialState};
pub use table::{BoundaryRow, BoundaryTable};

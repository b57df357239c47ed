//! Explicit lattice with forward propagation (curve calibration) and
//! backward propagation (valuation).
//!
//! Each step maps a node through a four-branch tree matching the first two
//! moments of the diffusion, then spreads every branch endpoint onto its
//! three nearest target nodes with quadratic interpolation weights. The
//! drift of each slice is solved in closed form so that the lattice
//! reproduces the forward curve.

mod field;
mod pricing;
mod stencil;
mod time_grid;

pub use field::{
    build_state_grid, forward_propagate, transition_row_onto, GridField, GridSlice, SliceDiagnostics, TransitionRow,
    WIDTH_IN_STD_DEVS,
};
pub use pricing::{price_american, price_european_on_grid};
pub use stencil::{interp_weights, quaternary_branches, BRANCH_WEIGHTS};
pub use time_grid::{build_time_grid, TimeGrid, DEFAULT_MAX_GAP_DAYS};

#[cfg(test)]
mod tests;

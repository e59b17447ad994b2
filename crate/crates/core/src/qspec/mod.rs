//! Quantum side: finite-difference discretization of `−h²Δ + V`, window
//! eigensolves, symmetry sectors and the smoothed sector density.

pub mod band;
mod eigen;
mod operator;
mod sectors;
mod windows;

pub use eigen::{eigensolve, eigenvalues_in, EigenPair, RESIDUAL_TOL};
pub use operator::{build_grid, discretize, stencil, DiscreteOperator, Grid, BOX_FRACTION};
pub use sectors::{
    classify_sectors, grid_action, grid_actions, sector_projector, GridAction, SectorLevel, SectorProjector,
    SectorSpectrum, DEGEN_TOL, TRACE_TOL,
};
pub use windows::{build_windows, bump, smooth_step, spectral_density, FhatSpec, PsiSpec, WindowPair};

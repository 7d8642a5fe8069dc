//! Simulation and spectral analysis of the two-dimensional five-state Grover walk.
//!
//! The walker lives on the square lattice with an internal chirality in
//! `{L, R, O, D, U}`. Each step applies the 5×5 Grover coin and then moves the
//! L/R components along the first axis, the D/U components along the second,
//! and leaves the O component in place.
//!
//! The crate offers two independent routes to the wave function:
//!
//! * [`walk`] evolves the lattice state exactly in position space;
//! * [`spectral`] and [`reconstruction`] diagonalize the momentum-space step
//!   operator and integrate over the Brillouin zone.
//!
//! [`localization`] combines both routes to measure the limiting distribution
//! contributed by the flat band at eigenvalue 1, the decay of every other band,
//! and the time-averaged occupation of the origin. [`io`] serializes the
//! results as CSV, JSON, and PGM.
//!
//! With the default `parallel` feature, per-site and per-node loops run on
//! rayon. Every reduction happens in a fixed order, so results are bitwise
//! identical with or without the feature.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod io;
pub mod localization;
mod par;
pub mod reconstruction;
pub mod spectral;
pub mod walk;

pub use error::{Error, Result};
pub use localization::{
    decay_probe, limiting_distribution, localization_decision, min_limit_mass_search,
    time_averaged_probability, DecaySeries, LocalizationReport,
};
pub use reconstruction::{
    component_wavefunction, reconstruction_error, spectral_wavefunction, BandSelection,
    MomentumProfile, QuadratureGrid, SpectralTable,
};
pub use spectral::{
    band_functions, band_surface, eigendecompose, flat_band_projector, flat_band_residual,
    fourier_step_operator, gram_schmidt, three_state_operator, three_state_phase_check,
    BandFunctions, BandRow, MomentumOperator, MomentumPoint, SpectralDecomposition,
};
pub use walk::{
    evolve, evolve_step, grover_coin, initial_state, probability_grid, shift_partition, Chirality,
    CoinOperator, LatticeState, ProbabilityGrid, Spinor, Walk,
};

/// Complex amplitude type used throughout the crate.
pub type Complex = num_complex::Complex64;

/// Dense 5×5 complex matrix.
pub type CMatrix5 = nalgebra::Matrix5<Complex>;

/// Complex 5-vector.
pub type CVector5 = nalgebra::Vector5<Complex>;

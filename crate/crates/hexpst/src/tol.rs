//! Numerical tolerances, centralized so every module and test agrees on what
//! "exact" means.
//!
//! Lattice construction and the ξ-basis transform only ever add and multiply
//! ±1/2 and ±1/4 — dyadic rationals that binary floating point represents
//! exactly — so the structural tolerances are there to catch construction
//! bugs, not roundoff. The dynamic tolerances are set by dense-eigensolver
//! accuracy at desk-scale dimensions (a few hundred sites).

/// Entries of QᵀHQ off the expected chain pattern must vanish to this level.
pub const STRUCTURAL_ZERO: f64 = 1e-13;

/// Effective chain couplings in QᵀHQ must equal 1 to this level.
pub const CHAIN_COUPLING: f64 = 1e-12;

/// ‖QᵀQ − I‖_max for the ξ-basis transform.
pub const ORTHOGONALITY: f64 = 1e-14;

/// Eigenvalues of H vs. the multiset predicted by the chain inventory.
pub const SPECTRUM: f64 = 1e-10;

/// ‖U(−Δt)U(Δt)ψ − ψ‖ per propagator round trip.
pub const UNITARITY: f64 = 1e-11;

/// Allowed drift of ‖ψ‖ from 1 along any pulse schedule.
pub const NORM_DRIFT: f64 = 1e-12;

/// Certified truncation error of the polynomial (Chebyshev) propagator.
pub const PROPAGATOR_SERIES: f64 = 1e-10;

/// Default pass threshold on |fidelity modulus − 1| for a simulated route.
pub const MODULUS_DEFAULT: f64 = 1e-9;

/// Default pass threshold (radians) on the route's phase vs. prediction.
pub const PHASE_DEFAULT: f64 = 1e-8;

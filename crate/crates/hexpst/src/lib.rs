//! Perfect state transfer on hexagonal lattices of Hadamard switches.
//!
//! Every vertex of a honeycomb plane carries a *switch*: four center qubits
//! `v_0..v_3` (layer 0 in the plane, layers 1–3 stacked above it as control
//! layers) coupled to the vertex's external qubits — the three link qubits
//! shared with its neighbours, plus either a read/write head or an
//! inter-plane connector on the fourth leg — with signs taken from the 4×4
//! Hadamard matrix. In the single-excitation sector an orthogonal change of
//! basis on each switch block-diagonalizes the whole lattice into uniform XY
//! chains of length two and three, and sign pulses on the control layers
//! permute the chain endpoints. Together these two facts let a particle be
//! routed between any two heads with unit fidelity using only globally
//! applied pulses.
//!
//! The crate is organised bottom-up:
//!
//! * [`chains`] — self-contained reference chains (uniform / engineered)
//!   whose transfer amplitudes serve as ground truth for everything else;
//! * [`lattice`] — honeycomb geometry, switch sites, coupling list;
//! * [`hamiltonian`] — sparse single-excitation matrix, the ξ-basis
//!   transform, and the block-structure verifier;
//! * [`dynamics`] — exact propagators, sign pulses, schedule execution;
//! * [`routing`] — path planning around faults, pulse-schedule compilation,
//!   end-to-end simulated transfers and sweep reports.

pub mod chains;
pub mod dynamics;
pub mod hamiltonian;
pub mod lattice;
pub mod routing;
pub mod tol;

/// Transfer time of a unit-coupled two-site chain: π/2.
///
/// A head uploads to (or downloads from) its switch in this time, picking up
/// a factor −i.
pub const T0: f64 = std::f64::consts::FRAC_PI_2;

/// Transfer time of a unit-coupled three-site chain: π/√2.
///
/// One hop between neighbouring switches (through a link qubit, or through
/// an inter-plane connector) takes this long and contributes a factor −1.
pub const T1: f64 = std::f64::consts::PI / std::f64::consts::SQRT_2;

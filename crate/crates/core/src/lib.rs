//! Discrete-time block models for transmission-line channels.
//!
//! The crate maps frequency-domain ABCD two-port descriptions of cables,
//! shunt/series impedances and bridged taps onto finite-memory discrete-time
//! kernels, lifts those kernels into block channel matrices, and simulates
//! terminated links block by block with trailing-zero guard intervals. Linear
//! periodically time-varying loads are handled through their harmonic
//! (Zadeh) impulse responses.
//!
//! Module map:
//!
//! * [`twoport`] frequency grids, cable parameters, ABCD spectra and the
//!   frequency-domain chain rule.
//! * [`kernels`] spectrum to FIR kernel synthesis with transmit/receive
//!   filtering, causal alignment and energy-based truncation.
//! * [`lptv`] periodic timing, harmonic responses, the block Zadeh form and
//!   harmonic estimation.
//! * [`lifting`] lifted `(H0, H1)` pairs, trailing-zero application and the
//!   tall least-squares solve.
//! * [`chainrule`] lifted cascades with and without inter-block interference.
//! * [`simulate`] terminated link simulation in lifted form.
//! * [`topology`] the text format describing links and cable libraries.
//! * [`network`] assembly of topology documents into models.
//! * [`export`] CSV writers and readers for kernels, matrices and block streams.

pub mod chainrule;
pub mod error;
pub mod export;
pub mod kernels;
pub mod lifting;
pub mod linalg;
pub mod lptv;
pub mod network;
pub mod simulate;
pub mod topology;
pub mod twoport;

pub use error::{Error, Result};
pub use num_complex::Complex64;

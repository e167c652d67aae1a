//! Stark-effect modelling and inference for centrosymmetric quantum
//! emitters.
//!
//! The crate covers the full chain from an applied electrode bias to the
//! numbers one extracts from measured spectra:
//!
//! * [`fieldmap`]: finite-volume electrostatics of surface electrodes on a
//!   dielectric, giving the field at the emitter for a given bias.
//! * [`starkmodel`]: the quartic Stark polynomial, the induced dipole,
//!   conversions to Debye and Å³, the Lorentz local-field correction, and a
//!   parity-symmetric level model.
//! * [`lineshape`]: Lorentzian, Gaussian and pseudo-Voigt profiles plus the
//!   noise-broadened linewidth model.
//! * [`simulate`]: Poisson PLE sweeps with Ornstein–Uhlenbeck field noise,
//!   repeated-scan series, and g²(τ) from the optical Bloch equations.
//! * [`fit`]: Levenberg–Marquardt engine and the inference pipelines built
//!   on it (peaks, Stark trajectories, noise inversion, g², diffusion
//!   statistics).
//! * [`io`] and [`cli`]: CSV/JSON formats and the `starkfit` command line.
//!
//! Units are fixed by name: fields in MV/m, detunings in GHz, linewidths in
//! MHz, times in ns for photon correlations and seconds for scans.
//!
//! See the `examples/` directory of this crate for one runnable program per
//! capability.

pub mod cli;
pub mod fieldmap;
pub mod fit;
pub mod io;
pub mod lineshape;
pub mod population;
pub mod simulate;
pub mod spectrum;
pub mod starkmodel;

pub use lineshape::{LineshapeParams, Shape};
pub use spectrum::{ScanSeries, Spectrum, TimedSpectrum};
pub use starkmodel::{PhysicalStarkParams, StarkCoefficients};

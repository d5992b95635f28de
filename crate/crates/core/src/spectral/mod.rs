//! Exact Fourier analysis of hash functions on the Hamming cube: spectra of
//! the indicator-vector embedding, noise stability `S(rho)`, the curve
//! `K(t) = S(e^{-t})`, and certificates for its log-convexity.

mod curve;
mod fwht;
mod spectrum;

pub use curve::{
    check_log_convexity, linear_grid, stability_curve, LogConvexityCertificate, Provenance, StabilityCurve,
    LOG_CONVEXITY_TOLERANCE,
};
pub use fwht::fwht;
pub use spectrum::{
    brute_force_stability, family_k, family_spectrum, fourier_spectrum, stability, stability_at, stability_ratio,
    FourierSpectrum, PruneRecord, SpectrumMode, BRUTE_FORCE_MAX_DIM, PRUNE_THRESHOLD, SPECTRUM_MAX_DIM,
};

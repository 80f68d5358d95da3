//! Equilibrium eigen-structure, modal solutions, Euler-angle kinematics and
//! spectral peak measurement.

pub mod eig;
pub mod euler;
pub mod fft;
pub mod nutation;

pub use eig::{classify_equilibrium, eig6, overlap, Classification, EigenPair, EigenStructure};
pub use euler::{euler313_extract, euler_rates, nutation_rate, Euler313, EulerRates};
pub use fft::{fft_peak, fft_peak_in_band, SpectralPeak};
pub use nutation::{
    linearized_solution, modal_coefficients, nutation_freq_estimate, nutation_frequency,
    nutation_rate_reconstruction, ModalCoefficients, NutationRate,
};

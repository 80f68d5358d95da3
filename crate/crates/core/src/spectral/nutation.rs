//! Modal solutions of the linearization and the nutation-frequency estimate.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linearization::Vec6;
use crate::spectral::eig::{lift, CVec6, EigenStructure};

/// Largest accepted condition number of the eigenvector matrix.
pub const MAX_BASIS_CONDITION: f64 = 1e12;

/// Coordinates of an initial condition in the eigenbasis.
///
/// `coeffs[k]` multiplies `v_k`; conjugate modes carry conjugate
/// coefficients, so for a complex pair `x` contains `2 Re[c_k v_k]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModalCoefficients {
    pub coeffs: [Complex64; 6],
}

impl ModalCoefficients {
    pub fn zero() -> Self {
        Self {
            coeffs: [Complex64::new(0.0, 0.0); 6],
        }
    }

    /// `a_k` of a real mode.
    pub fn real(&self, k: usize) -> f64 {
        self.coeffs[k].re
    }

    /// `c_k` of a complex mode.
    pub fn complex(&self, k: usize) -> Complex64 {
        self.coeffs[k]
    }
}

/// Solve `x₀ = Σ a_k v_k + 2 Re[Σ c_k v_k]` for the modal coefficients.
pub fn modal_coefficients(es: &EigenStructure, x0: &Vec6) -> Result<ModalCoefficients> {
    if let Some(c) = &es.constraint {
        let residual = c.apply(x0).abs();
        if residual > 1e-9 * x0.norm().max(1.0) {
            return Err(Error::OutsideNullSpace { residual });
        }
    }
    let basis = es.basis();
    let sv = basis.singular_values();
    let condition = sv.max() / sv.min();
    if !(condition <= MAX_BASIS_CONDITION) {
        return Err(Error::DefectiveEigenbasis { condition });
    }
    let solution = basis
        .lu()
        .solve(&lift(x0))
        .ok_or(Error::DefectiveEigenbasis { condition: f64::INFINITY })?;
    let mut coeffs = [Complex64::new(0.0, 0.0); 6];
    for k in 0..6 {
        coeffs[k] = match es.conjugate_index(k) {
            // Average with the partner so the conjugate symmetry is exact.
            Some(j) => 0.5 * (solution[k] + solution[j].conj()),
            None => Complex64::new(solution[k].re, 0.0),
        };
    }
    Ok(ModalCoefficients { coeffs })
}

/// Contribution of one complex pair, written with real trigonometric terms:
/// `2 e^{πt} {Re c (cos μt Re v − sin μt Im v) − Im c (cos μt Im v + sin μt Re v)}`.
fn pair_term(lambda: Complex64, c: Complex64, v: &CVec6, t: f64) -> Vec6 {
    let (s, co) = (lambda.im * t).sin_cos();
    let re_v = v.map(|z| z.re);
    let im_v = v.map(|z| z.im);
    ((re_v * co - im_v * s) * c.re - (im_v * co + re_v * s) * c.im) * (2.0 * (lambda.re * t).exp())
}

/// `x(t)` of the linear system from its modal coefficients.
pub fn linearized_solution(es: &EigenStructure, coeffs: &ModalCoefficients, t: f64) -> Vec6 {
    let mut x = Vec6::zeros();
    for k in 0..6 {
        match es.conjugate_index(k) {
            Some(j) if k < j => x += pair_term(es.value(k), coeffs.complex(k), es.vector(k), t),
            Some(_) => {}
            None => x += es.vector(k).map(|z| z.re) * (coeffs.real(k) * (es.value(k).re * t).exp()),
        }
    }
    x
}

/// Index of the slowly decaying admissible complex mode: among admissible
/// eigenvalues with positive imaginary part and negative real part, the one
/// with the largest real part.
pub fn slow_pair_index(es: &EigenStructure) -> Result<usize> {
    (0..es.complex_pair_count())
        .filter(|&k| es.pairs[k].admissible && es.value(k).re < 0.0)
        .max_by(|&i, &j| es.value(i).re.total_cmp(&es.value(j).re))
        .ok_or_else(|| Error::NoComplexPair(format!("eigenvalues {:?}", es.values())))
}

/// `(ω_d + μ) / 2π`, Hz.
pub fn nutation_frequency(omega_d: f64, mu: f64) -> f64 {
    (omega_d + mu) / (2.0 * PI)
}

/// Nutation frequency predicted from the slow pair of the desired-equilibrium spectrum.
pub fn nutation_freq_estimate(omega_d: f64, es_desired: &EigenStructure) -> Result<f64> {
    let k = slow_pair_index(es_desired)?;
    Ok(nutation_frequency(omega_d, es_desired.value(k).im))
}

/// Nutation rate predicted by the linearization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NutationRate {
    /// `cos ψ δω₁ − sin ψ δω₂` with all modes retained.
    pub full: f64,
    /// Only the slow complex pair retained.
    pub approx: f64,
}

/// Coefficients `(C̆₁, D̆₁, C̆₂, D̆₂)` of the slow-mode nutation signal.
pub fn slow_mode_coefficients(es: &EigenStructure, coeffs: &ModalCoefficients, psi0: f64) -> Result<[f64; 4]> {
    let k = slow_pair_index(es)?;
    let c = coeffs.complex(k);
    let v = es.vector(k);
    let cd = |i: usize| {
        let z = v[i + 2];
        (c.re * z.re - c.im * z.im, -c.re * z.im - c.im * z.re)
    };
    let (c1, d1) = cd(1);
    let (c2, d2) = cd(2);
    let (s0, c0) = psi0.sin_cos();
    Ok([c0 * c1 - s0 * c2, c0 * d1 - s0 * d2, c0 * c2 + s0 * c1, c0 * d2 + s0 * d1])
}

/// Nutation rate of the linearized motion about the desired equilibrium,
/// with the spin angle approximated by `ψ = ω_d t + ψ₀`.
///
/// Both forms keep the modal decay `e^{Re λ · t}`.
pub fn nutation_rate_reconstruction(
    es: &EigenStructure,
    coeffs: &ModalCoefficients,
    psi0: f64,
    omega_d: f64,
    t: f64,
) -> Result<NutationRate> {
    let x = linearized_solution(es, coeffs, t);
    let (s, c) = (omega_d * t + psi0).sin_cos();
    let full = c * x[3] - s * x[4];

    let k = slow_pair_index(es)?;
    let lambda = es.value(k);
    let [cb1, db1, cb2, db2] = slow_mode_coefficients(es, coeffs, psi0)?;
    let (sm, cm) = (lambda.im * t).sin_cos();
    let (sw, cw) = (omega_d * t).sin_cos();
    let approx = 2.0 * (lambda.re * t).exp() * (cw * (cb1 * cm + db1 * sm) - sw * (cb2 * cm + db2 * sm));
    Ok(NutationRate { full, approx })
}

//! "313" Euler angles: precession φ, nutation θ and spin ψ.

use crate::error::{Error, Result};
use crate::geom::{rodrigues_exp, Rotation, Vec3};

/// Below this |sin θ| the angles φ and ψ are not separately defined.
pub const SINGULARITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Euler313 {
    pub phi: f64,
    pub theta: f64,
    pub psi: f64,
}

impl Euler313 {
    /// `R₃(φ) R₁(θ) R₃(ψ)`.
    pub fn to_rotation(&self) -> Rotation {
        rodrigues_exp(&Vec3::z(), self.phi) * rodrigues_exp(&Vec3::x(), self.theta) * rodrigues_exp(&Vec3::z(), self.psi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerRates {
    pub precession: f64,
    pub nutation: f64,
    pub spin: f64,
}

pub fn euler313_extract(r: &Rotation) -> Result<Euler313> {
    let m = r.matrix();
    let sin_theta = m[(0, 2)].hypot(m[(1, 2)]);
    if sin_theta < SINGULARITY_TOL {
        return Err(Error::EulerSingular { sin_theta });
    }
    Ok(Euler313 {
        phi: m[(0, 2)].atan2(-m[(1, 2)]),
        theta: sin_theta.atan2(m[(2, 2)]),
        psi: m[(2, 0)].atan2(m[(2, 1)]),
    })
}

/// Euler angle rates from the body angular velocity.
pub fn euler_rates(angles: &Euler313, omega: &Vec3) -> Result<EulerRates> {
    let (s_theta, c_theta) = angles.theta.sin_cos();
    if s_theta.abs() < SINGULARITY_TOL {
        return Err(Error::EulerSingular { sin_theta: s_theta });
    }
    let (s_psi, c_psi) = angles.psi.sin_cos();
    let lateral = s_psi * omega.x + c_psi * omega.y;
    Ok(EulerRates {
        precession: lateral / s_theta,
        nutation: nutation_rate(angles.psi, omega),
        spin: omega.z - c_theta * lateral / s_theta,
    })
}

/// `θ̇ = cos ψ ω₁ − sin ψ ω₂`, which stays defined at the gimbal singularity.
pub fn nutation_rate(psi: f64, omega: &Vec3) -> f64 {
    let (s, c) = psi.sin_cos();
    c * omega.x - s * omega.y
}

#[cfg(test)]
mod tests {
    use std::f64::consts::{FRAC_PI_2, PI};

    use proptest::prelude::*;

    use super::*;
    use crate::geom::exp_so3;

    #[test]
    fn quarter_turn_about_e1() {
        let e = euler313_extract(&rodrigues_exp(&Vec3::x(), FRAC_PI_2)).unwrap();
        assert!(e.phi.abs() < 1e-15 && (e.theta - FRAC_PI_2).abs() < 1e-15 && e.psi.abs() < 1e-15);
    }

    #[test]
    fn identity_is_singular() {
        assert!(matches!(euler313_extract(&Rotation::identity()), Err(Error::EulerSingular { .. })));
        assert!(euler313_extract(&rodrigues_exp(&Vec3::x(), PI)).is_err());
    }

    #[test]
    fn rate_examples() {
        let a = Euler313 {
            phi: 0.3,
            theta: FRAC_PI_2,
            psi: 0.0,
        };
        let r = euler_rates(&a, &Vec3::new(2.0, 3.0, 5.0)).unwrap();
        assert_eq!((r.precession, r.nutation), (3.0, 2.0));
        assert!((r.spin - 5.0).abs() < 1e-15);
        let z = euler_rates(&a, &Vec3::zeros()).unwrap();
        assert_eq!((z.precession, z.nutation, z.spin), (0.0, 0.0, 0.0));
    }

    #[test]
    fn rates_match_finite_difference_along_constant_rate_motion() {
        let r0 = Euler313 {
            phi: 0.4,
            theta: 1.1,
            psi: -0.7,
        }
        .to_rotation();
        let w = Vec3::new(0.8, -0.3, 5.0);
        let at = |t: f64| euler313_extract(&(r0 * exp_so3(&(w * t)))).unwrap();
        let h = 1e-6;
        let angles = at(0.0);
        let rates = euler_rates(&angles, &w).unwrap();
        let (p, m) = (at(h), at(-h));
        let fd = |a: f64, b: f64| {
            let mut d = a - b;
            if d > PI {
                d -= 2.0 * PI;
            } else if d < -PI {
                d += 2.0 * PI;
            }
            d / (2.0 * h)
        };
        assert!((fd(p.phi, m.phi) - rates.precession).abs() < 1e-5);
        assert!((fd(p.theta, m.theta) - rates.nutation).abs() < 1e-5);
        assert!((fd(p.psi, m.psi) - rates.spin).abs() < 1e-5);
    }

    proptest! {
        #[test]
        fn extract_reconstruct_round_trip(
            x in -1.0..1.0f64, y in -1.0..1.0f64, z in -1.0..1.0f64, angle in 0.0..PI,
        ) {
            let v = Vec3::new(x, y, z);
            prop_assume!(v.norm() > 1e-3);
            let r = rodrigues_exp(&v, angle);
            let sin_theta = r.matrix()[(0, 2)].hypot(r.matrix()[(1, 2)]);
            prop_assume!(sin_theta > 1e-3);
            let back = euler313_extract(&r).unwrap().to_rotation();
            prop_assert!((back.matrix() - r.matrix()).abs().max() < 1e-10);
        }
    }
}

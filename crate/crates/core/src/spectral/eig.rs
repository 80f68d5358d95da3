//! Eigen-decomposition of the 6×6 linearization with stable labels.

use nalgebra::{Matrix6, Vector6};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linearization::{split, ConstraintRow, Mat6, Vec6};

pub type CVec6 = Vector6<Complex64>;
pub type CMat6 = Matrix6<Complex64>;

const MAX_SCHUR_ITERATIONS: usize = 10_000;

/// Eigenvectors whose component along the constraint normal is below this are admissible.
pub const ADMISSIBILITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenPair {
    pub value: Complex64,
    /// Unit norm; the largest-magnitude component is real and positive.
    pub vector: CVec6,
    /// Whether the eigenvector lies in the null space of the pointing constraint.
    pub admissible: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Classification {
    StableFocus,
    Saddle,
    Other,
}

impl std::fmt::Display for Classification {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Classification::StableFocus => "stable-focus",
            Classification::Saddle => "saddle",
            Classification::Other => "other",
        })
    }
}

/// Six eigenpairs in canonical order: complex eigenvalues with positive
/// imaginary part by decreasing imaginary part, then real eigenvalues in
/// decreasing order, then the conjugates of the leading block in the same order.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenStructure {
    pub pairs: [EigenPair; 6],
    complex_pairs: usize,
    pub classification: Option<Classification>,
    pub constraint: Option<ConstraintRow>,
}

impl EigenStructure {
    pub fn value(&self, k: usize) -> Complex64 {
        self.pairs[k].value
    }

    pub fn vector(&self, k: usize) -> &CVec6 {
        &self.pairs[k].vector
    }

    pub fn values(&self) -> [Complex64; 6] {
        self.pairs.map(|p| p.value)
    }

    /// Number of complex-conjugate pairs.
    pub fn complex_pair_count(&self) -> usize {
        self.complex_pairs
    }

    /// Index of the conjugate partner of a complex eigenvalue.
    pub fn conjugate_index(&self, k: usize) -> Option<usize> {
        let p = self.complex_pairs;
        if k < p {
            Some(6 - p + k)
        } else if k >= 6 - p {
            Some(k + p - 6)
        } else {
            None
        }
    }

    pub fn is_real_mode(&self, k: usize) -> bool {
        self.conjugate_index(k).is_none()
    }

    /// Largest `‖A v − λ v‖` over all pairs.
    pub fn max_residual(&self, a: &Mat6) -> f64 {
        let ac = complexify(a);
        self.pairs
            .iter()
            .map(|p| (ac * p.vector - p.vector * p.value).norm())
            .fold(0.0, f64::max)
    }

    /// Eigenvector matrix with columns in canonical order.
    pub fn basis(&self) -> CMat6 {
        CMat6::from_columns(&self.pairs.map(|p| p.vector))
    }
}

fn complexify(a: &Mat6) -> CMat6 {
    a.map(|x| Complex64::new(x, 0.0))
}

/// Scale to unit norm and rotate the phase so the largest component is real
/// and positive. Components within a relative 1e-6 of the largest count as
/// ties and the highest index wins, which makes the ω₂ entry real for the
/// planar modes of an axisymmetric equilibrium.
fn normalize_phase(v: &CVec6) -> CVec6 {
    let v = v / Complex64::new(v.norm(), 0.0);
    let max = v.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let pivot = v.iter().rposition(|c| c.norm() >= max * (1.0 - 1e-6)).unwrap_or(0);
    let phase = v[pivot] / v[pivot].norm();
    v.map(|c| c / phase)
}

/// Orthonormal vectors spanning the (approximate) null space of `m`, taking
/// the `count` right-singular vectors with the smallest singular values.
fn null_vectors_complex(m: &CMat6, count: usize) -> Vec<CVec6> {
    let svd = m.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let mut order: Vec<usize> = (0..6).collect();
    order.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
    order
        .into_iter()
        .take(count)
        .map(|i| v_t.row(i).transpose().map(|c| c.conj()))
        .collect()
}

fn null_vectors_real(m: &Mat6, count: usize) -> Vec<CVec6> {
    let svd = m.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let mut order: Vec<usize> = (0..6).collect();
    order.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
    order
        .into_iter()
        .take(count)
        .map(|i| v_t.row(i).transpose().map(|x| Complex64::new(x, 0.0)))
        .collect()
}

/// Polish a simple eigenpair with inverse iteration and Rayleigh quotients,
/// keeping each update only while the residual shrinks.
fn refine(ac: &CMat6, lambda: Complex64, v: CVec6) -> (Complex64, CVec6) {
    let residual = |l: Complex64, x: &CVec6| (ac * x - x * l).norm() / x.norm();
    let mut best = (lambda, v / Complex64::new(v.norm(), 0.0));
    let mut best_res = residual(best.0, &best.1);
    for _ in 0..3 {
        let shifted = ac - CMat6::identity() * best.0;
        let Some(w) = shifted.lu().solve(&best.1) else { break };
        let n = w.norm();
        if !(n.is_finite() && n > 0.0) {
            break;
        }
        let w = w / Complex64::new(n, 0.0);
        let rayleigh = w.dotc(&(ac * w));
        let res = residual(rayleigh, &w);
        if !(res < best_res) {
            break;
        }
        best = (rayleigh, w);
        best_res = res;
    }
    best
}

/// Group consecutive eigenvalues (already sorted) that coincide within `tol`.
fn clusters(values: &[Complex64], tol: f64) -> Vec<std::ops::Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for k in 1..=values.len() {
        if k == values.len() || (values[k] - values[start]).norm() > tol {
            out.push(start..k);
            start = k;
        }
    }
    out
}

/// All six eigenpairs of a real 6×6 matrix.
pub fn eig6(a: &Mat6) -> Result<EigenStructure> {
    let scale = a.abs().max().max(1.0);
    let schur = nalgebra::Schur::try_new(*a, f64::EPSILON, MAX_SCHUR_ITERATIONS).ok_or(Error::EigenNoConvergence)?;
    let raw = schur.complex_eigenvalues();
    let imag_tol = 1e-10 * scale;

    let mut upper: Vec<Complex64> = raw.iter().copied().filter(|z| z.im > imag_tol).collect();
    let lower = raw.iter().filter(|z| z.im < -imag_tol).count();
    let mut reals: Vec<Complex64> = raw
        .iter()
        .filter(|z| z.im.abs() <= imag_tol)
        .map(|z| Complex64::new(z.re, 0.0))
        .collect();
    if upper.len() != lower {
        return Err(Error::EigenNoConvergence);
    }
    upper.sort_by(|x, y| y.im.total_cmp(&x.im).then(y.re.total_cmp(&x.re)));
    reals.sort_by(|x, y| y.re.total_cmp(&x.re));

    let cluster_tol = 1e-7 * scale;
    let ac = complexify(a);
    let mut upper_vecs = Vec::with_capacity(upper.len());
    for range in clusters(&upper, cluster_tol) {
        let lambda = upper[range.start];
        let shifted = ac - CMat6::identity() * lambda;
        let vectors = null_vectors_complex(&shifted, range.len());
        if range.len() == 1 {
            let (l, v) = refine(&ac, lambda, vectors[0]);
            upper[range.start] = l;
            upper_vecs.push(v);
        } else {
            upper_vecs.extend(vectors);
        }
    }
    let mut real_vecs = Vec::with_capacity(reals.len());
    for range in clusters(&reals, cluster_tol) {
        let shifted = a - Mat6::identity() * reals[range.start].re;
        let vectors = null_vectors_real(&shifted, range.len());
        if range.len() == 1 {
            let (l, v) = refine(&ac, reals[range.start], vectors[0]);
            // A real eigenvalue of a real matrix has a real eigenvector up to phase.
            let v = normalize_phase(&v).map(|c| Complex64::new(c.re, 0.0));
            reals[range.start] = Complex64::new(l.re, 0.0);
            real_vecs.push(v);
        } else {
            real_vecs.extend(vectors);
        }
    }

    let p = upper.len();
    let placeholder = EigenPair {
        value: Complex64::new(0.0, 0.0),
        vector: CVec6::zeros(),
        admissible: true,
    };
    let mut pairs = [placeholder; 6];
    for (k, (value, vector)) in upper.iter().zip(&upper_vecs).enumerate() {
        let v = normalize_phase(vector);
        pairs[k] = EigenPair {
            value: *value,
            vector: v,
            admissible: true,
        };
        pairs[6 - p + k] = EigenPair {
            value: value.conj(),
            vector: v.map(|c| c.conj()),
            admissible: true,
        };
    }
    for (k, (value, vector)) in reals.iter().zip(&real_vecs).enumerate() {
        let v = normalize_phase(vector).map(|c| Complex64::new(c.re, 0.0));
        pairs[p + k] = EigenPair {
            value: *value,
            vector: v / Complex64::new(v.norm(), 0.0),
            admissible: true,
        };
    }
    Ok(EigenStructure {
        pairs,
        complex_pairs: p,
        classification: None,
        constraint: None,
    })
}

/// Component of a (unit) eigenvector along the constraint normal.
pub fn constraint_violation(c: &ConstraintRow, v: &CVec6) -> f64 {
    let row = c.row();
    let dot: Complex64 = (0..6).map(|i| v[i] * row[i]).sum();
    dot.norm() / v.norm()
}

/// Flag inadmissible eigenvectors and classify on the admissible spectrum.
pub fn classify_equilibrium(es: &EigenStructure, c: &ConstraintRow) -> EigenStructure {
    let mut out = es.clone();
    for pair in out.pairs.iter_mut() {
        pair.admissible = constraint_violation(c, &pair.vector) <= ADMISSIBILITY_TOL;
    }
    let scale = out.pairs.iter().map(|p| p.value.norm()).fold(1.0, f64::max);
    let tol = 1e-9 * scale;
    let admissible: Vec<Complex64> = out.pairs.iter().filter(|p| p.admissible).map(|p| p.value).collect();
    let stable = admissible.iter().filter(|z| z.re < -tol).count();
    let unstable = admissible.iter().filter(|z| z.re > tol).count();
    out.classification = Some(if admissible.is_empty() {
        Classification::Other
    } else if stable == admissible.len() {
        Classification::StableFocus
    } else if stable > 0 && unstable > 0 && stable + unstable == admissible.len() {
        Classification::Saddle
    } else {
        Classification::Other
    });
    out.constraint = Some(*c);
    out
}

/// Phase-invariant overlap `|⟨u, v⟩| / (‖u‖‖v‖)`.
pub fn overlap(u: &CVec6, v: &CVec6) -> f64 {
    let dot: Complex64 = (0..6).map(|i| u[i].conj() * v[i]).sum();
    dot.norm() / (u.norm() * v.norm())
}

/// Real 6-vector lifted to a complex one.
pub fn lift(x: &Vec6) -> CVec6 {
    x.map(|v| Complex64::new(v, 0.0))
}

/// Attitude and rate parts of the real and imaginary components of `v`.
pub fn split_complex(v: &CVec6) -> ((nalgebra::Vector3<f64>, nalgebra::Vector3<f64>), (nalgebra::Vector3<f64>, nalgebra::Vector3<f64>)) {
    (split(&v.map(|c| c.re)), split(&v.map(|c| c.im)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{antipodal_equilibrium_state, desired_equilibrium_state, GainSet, ReferenceSample};
    use crate::geom::{Rotation, UnitVec};
    use crate::linearization::{assemble_a, constraint_row};

    fn unit(i: usize) -> CVec6 {
        let mut v = CVec6::zeros();
        v[i] = Complex64::new(1.0, 0.0);
        v
    }

    fn equilibrium_matrices() -> (Mat6, Mat6) {
        let r = ReferenceSample::stationary(Rotation::identity(), 1000.0);
        let g = GainSet::default();
        (
            assemble_a(&desired_equilibrium_state(&r), &r, &g).a,
            assemble_a(&antipodal_equilibrium_state(&r), &r, &g).a,
        )
    }

    #[test]
    fn diagonal_matrix() {
        let a = Mat6::from_diagonal(&Vec6::new(1.0, 2.0, 3.0, 4.0, 5.0, 6.0));
        let es = eig6(&a).unwrap();
        for k in 0..6 {
            assert_eq!(es.value(k), Complex64::new(6.0 - k as f64, 0.0));
            assert!(overlap(es.vector(k), &unit(5 - k)) > 1.0 - 1e-12);
            assert!(es.vector(k)[5 - k].re > 0.0);
        }
    }

    #[test]
    fn desired_equilibrium_spectrum() {
        let (a, _) = equilibrium_matrices();
        let es = eig6(&a).unwrap();
        let expected = [
            Complex64::new(-14.0634, 1005.5038),
            Complex64::new(-2569.2700, 5.5038),
            Complex64::new(0.0, 0.0),
            Complex64::new(-500.0, 0.0),
        ];
        for (k, z) in expected.iter().enumerate() {
            assert!((es.value(k) - z).norm() < 1e-3, "λ{} = {}", k + 1, es.value(k));
        }
        assert_eq!(es.value(4), es.value(0).conj());
        assert_eq!(es.value(5), es.value(1).conj());
        assert!(overlap(es.vector(2), &unit(2)) > 0.999);
        assert!(overlap(es.vector(3), &unit(5)) > 0.999);
        assert!(es.max_residual(&a) < 1e-8 * a.abs().max());
    }

    #[test]
    fn antipodal_equilibrium_spectrum() {
        let (_, a) = equilibrium_matrices();
        let es = eig6(&a).unwrap();
        assert!((es.value(0) - Complex64::new(-783.6246, 751.2763)).norm() < 1e-3);
        assert!((es.value(1) - Complex64::new(2366.9581, 248.7237)).norm() < 1e-3);
        assert!(es.value(2).norm() < 1e-6);
        assert!((es.value(3).re + 500.0).abs() < 1e-9 * 500.0);
        assert!(es.max_residual(&a) < 1e-8 * a.abs().max());
    }

    #[test]
    fn classification_at_equilibria() {
        let (ad, aa) = equilibrium_matrices();
        let des = classify_equilibrium(&eig6(&ad).unwrap(), &constraint_row(&UnitVec::e3()));
        assert_eq!(des.classification, Some(Classification::StableFocus));
        let flags: Vec<bool> = des.pairs.iter().map(|p| p.admissible).collect();
        assert_eq!(flags, [true, true, false, true, true, true]);

        let anti = classify_equilibrium(&eig6(&aa).unwrap(), &constraint_row(&-UnitVec::e3()));
        assert_eq!(anti.classification, Some(Classification::Saddle));
        assert!(!anti.pairs[2].admissible);
        assert_eq!(anti.pairs.iter().filter(|p| !p.admissible).count(), 1);
    }

    #[test]
    fn negative_identity_is_stable() {
        let es = eig6(&(-Mat6::identity())).unwrap();
        assert!(es.values().iter().all(|z| *z == Complex64::new(-1.0, 0.0)));
        let c = classify_equilibrium(&es, &constraint_row(&UnitVec::e3()));
        assert_eq!(c.classification, Some(Classification::StableFocus));
        assert!(c.pairs.iter().filter(|p| !p.admissible).count() <= 1);
    }

    #[test]
    fn swapping_planar_axes_preserves_spectrum() {
        let (a, _) = equilibrium_matrices();
        let mut p = Mat6::zeros();
        for (i, j) in [(0, 1), (1, 0), (2, 2), (3, 4), (4, 3), (5, 5)] {
            p[(i, j)] = 1.0;
        }
        let b = p * a * p.transpose();
        let ea = eig6(&a).unwrap();
        let eb = eig6(&b).unwrap();
        for k in 0..6 {
            let za = ea.value(k);
            assert!((za - eb.value(k)).norm() <= 1e-8 * za.norm().max(1.0));
        }
    }

    #[test]
    fn conjugate_indices() {
        let (a, _) = equilibrium_matrices();
        let es = eig6(&a).unwrap();
        assert_eq!(es.complex_pair_count(), 2);
        assert_eq!(es.conjugate_index(0), Some(4));
        assert_eq!(es.conjugate_index(5), Some(1));
        assert_eq!(es.conjugate_index(2), None);
        assert!(es.is_real_mode(3));
    }
}

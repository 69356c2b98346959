//! Lie algebra `hsp(2n)`: triples `(S, w, r)` with `S` infinitesimally
//! symplectic, realized as
//!
//! ```text
//! X = [[S, 0, w], [−wᵗζ°, 0, r], [0, 0, 0]]
//! ```
//!
//! The generators `W_α` (unit `w`) and `U` (unit `r`) close into the
//! Weyl-Heisenberg algebra with `U` central. With the realization above the
//! commutator is `[W_α, W_β] = −2ζ°_{αβ} U = 2ζ°^{αβ} U`, where `ζ°^{αβ} = −ζ°`
//! is the inverse form; the sign matches the central term `−w′ᵗζ°Σ′w` of the
//! group law.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{check_square, max_abs, Dimension, MetricForms};
use crate::group::{HspElement, DEFAULT_MEMBERSHIP_TOL};

#[derive(Debug, Clone, PartialEq)]
pub struct HspAlgebraElement {
    dim: Dimension,
    s: DMatrix<f64>,
    w: DVector<f64>,
    r: f64,
}

impl HspAlgebraElement {
    pub fn new(s: DMatrix<f64>, w: DVector<f64>, r: f64, tol: f64) -> Result<Self> {
        let dim = Dimension::from_phase_len(s.nrows())?;
        check_square(&s, dim.phase_len())?;
        dim.check_phase(w.len())?;
        let residual = infinitesimal_symplectic_residual(&s, &MetricForms::new(dim));
        if !(residual <= tol) {
            return Err(Error::NotSymplectic { residual, tol });
        }
        Ok(HspAlgebraElement { dim, s, w, r })
    }

    pub fn zero(dim: Dimension) -> Self {
        let m = dim.phase_len();
        HspAlgebraElement {
            dim,
            s: DMatrix::zeros(m, m),
            w: DVector::zeros(m),
            r: 0.0,
        }
    }

    pub fn dim(&self) -> Dimension {
        self.dim
    }

    pub fn s(&self) -> &DMatrix<f64> {
        &self.s
    }

    pub fn w(&self) -> &DVector<f64> {
        &self.w
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn is_zero(&self) -> bool {
        self.r == 0.0 && self.w.iter().all(|x| *x == 0.0) && self.s.iter().all(|x| *x == 0.0)
    }

    pub fn scale(&self, k: f64) -> Self {
        HspAlgebraElement {
            dim: self.dim,
            s: &self.s * k,
            w: &self.w * k,
            r: self.r * k,
        }
    }

    pub fn realization(&self) -> DMatrix<f64> {
        let forms = MetricForms::new(self.dim);
        let m = self.dim.phase_len();
        let (e, t) = (self.dim.e_index(), self.dim.t_index());
        let mut x = DMatrix::zeros(m + 2, m + 2);
        x.view_mut((0, 0), (m, m)).copy_from(&self.s);
        x.view_mut((0, t), (m, 1)).copy_from(&self.w);
        let c = -(self.w.transpose() * forms.zeta0());
        x.view_mut((e, 0), (1, m)).copy_from(&c);
        x[(e, t)] = self.r;
        x
    }

    /// Reads `(S, w, r)` back from a realization, checking that every block
    /// has the algebra shape.
    pub fn from_realization(x: &DMatrix<f64>, tol: f64) -> Result<Self> {
        let dim = Dimension::from_extended_len(x.nrows())?;
        check_square(x, dim.extended_len())?;
        let forms = MetricForms::new(dim);
        let m = dim.phase_len();
        let (e, t) = (dim.e_index(), dim.t_index());

        let t_row = x.row(t).amax();
        let e_col = x.column(e).amax();
        let s = x.view((0, 0), (m, m)).into_owned();
        let w = x.view((0, t), (m, 1)).column(0).into_owned();
        let c = x.view((e, 0), (1, m)).into_owned();
        let e_row = max_abs(&(c + w.transpose() * forms.zeta0()));
        let s_res = infinitesimal_symplectic_residual(&s, &forms);

        for (block, residual) in [
            ("t row", t_row),
            ("e column", e_col),
            ("e row", e_row),
            ("S block", s_res),
        ] {
            if !(residual <= tol) {
                return Err(Error::DecompositionFailure { block, residual });
            }
        }
        Ok(HspAlgebraElement {
            dim,
            s,
            w,
            r: x[(e, t)],
        })
    }

    /// Matrix commutator `XY − YX`, decomposed back into the algebra.
    pub fn bracket(&self, other: &HspAlgebraElement) -> Result<HspAlgebraElement> {
        crate::geometry::expect_len(self.dim.n(), other.dim.n())?;
        let x = self.realization();
        let y = other.realization();
        let comm = &x * &y - &y * &x;
        let scale = 1.0 + max_abs(&x) * max_abs(&y);
        Self::from_realization(&comm, 1e-13 * scale)
    }

    /// Group exponential. Pure translations (`S = 0`) use the terminating
    /// series `1 + X`, since `X² = 0` there.
    pub fn exp(&self) -> Result<HspElement> {
        if self.s.iter().all(|x| *x == 0.0) {
            return HspElement::heisenberg_wr(self.w.clone(), self.r);
        }
        let g = matrix_exp(&self.realization());
        HspElement::from_matrix(&g, DEFAULT_MEMBERSHIP_TOL)
    }
}

fn infinitesimal_symplectic_residual(s: &DMatrix<f64>, forms: &MetricForms) -> f64 {
    let z0 = forms.zeta0();
    max_abs(&(s.transpose() * z0 + z0 * s))
}

/// Generators `W₁ … W₂ₙ, U`.
pub fn algebra_basis(dim: Dimension) -> Vec<HspAlgebraElement> {
    let m = dim.phase_len();
    let mut basis: Vec<_> = (0..m)
        .map(|a| HspAlgebraElement {
            dim,
            s: DMatrix::zeros(m, m),
            w: DVector::from_fn(m, |i, _| if i == a { 1.0 } else { 0.0 }),
            r: 0.0,
        })
        .collect();
    basis.push(HspAlgebraElement {
        dim,
        s: DMatrix::zeros(m, m),
        w: DVector::zeros(m),
        r: 1.0,
    });
    basis
}

/// Scaling and squaring with a truncated Taylor series.
pub(crate) fn matrix_exp(a: &DMatrix<f64>) -> DMatrix<f64> {
    let norm = a
        .row_iter()
        .map(|row| row.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let mut squarings = 0;
    let mut scale = 1.0;
    while norm * scale > 0.25 {
        scale *= 0.5;
        squarings += 1;
    }
    let scaled = a * scale;
    let dim = a.nrows();
    let mut sum = DMatrix::identity(dim, dim);
    let mut term = DMatrix::identity(dim, dim);
    // 0.25^18 / 18! is far below one ulp
    for k in 1..=18 {
        term = &term * &scaled / (k as f64);
        sum += &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

/// Algebra element with every coordinate uniform in `[−scale, scale]`.
/// `S = ζ°K` with `K` symmetric, whose upper triangle carries the coordinates.
pub fn random_algebra_element<R: Rng>(dim: Dimension, rng: &mut R, scale: f64) -> HspAlgebraElement {
    let m = dim.phase_len();
    let forms = MetricForms::new(dim);
    let mut draw = || {
        if scale > 0.0 {
            rng.random_range(-scale..=scale)
        } else {
            0.0
        }
    };
    let mut k = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let x = draw();
            k[(i, j)] = x;
            k[(j, i)] = x;
        }
    }
    let w = DVector::from_fn(m, |_, _| draw());
    let r = draw();
    HspAlgebraElement {
        dim,
        s: forms.zeta0() * k,
        w,
        r,
    }
}

/// Seeded random group element, `exp` of [`random_algebra_element`] drawn
/// from a `ChaCha8` stream seeded with `seed`.
pub fn random_element(dim: Dimension, seed: u64, scale: f64) -> HspElement {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_element_from(dim, &mut rng, scale)
}

pub fn random_element_from<R: Rng>(dim: Dimension, rng: &mut R, scale: f64) -> HspElement {
    random_algebra_element(dim, rng, scale)
        .exp()
        .expect("exponential of an algebra element lies in the group")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dim(n: usize) -> Dimension {
        Dimension::new(n).unwrap()
    }

    #[test]
    fn basis_has_2n_plus_1_elements() {
        let b = algebra_basis(dim(2));
        assert_eq!(b.len(), 5);
        assert_eq!(b[4].r(), 1.0);
        assert_eq!(b[1].w()[1], 1.0);
    }

    #[test]
    fn weyl_heisenberg_relations_n1() {
        let b = algebra_basis(dim(1));
        let w1w2 = b[0].bracket(&b[1]).unwrap();
        assert!(w1w2.s().iter().all(|x| *x == 0.0));
        assert!(w1w2.w().iter().all(|x| *x == 0.0));
        // hand commutator: X[e][1]·Y[1][t] − Y[e][0]·X[0][t] = −1 − 1
        assert_eq!(w1w2.r(), -2.0);
        assert_eq!(b[1].bracket(&b[0]).unwrap().r(), 2.0);
        assert!(b[0].bracket(&b[2]).unwrap().is_zero());
        assert!(b[2].bracket(&b[2]).unwrap().is_zero());
    }

    #[test]
    fn generator_brackets_follow_the_inverse_form() {
        for n in 1..=3 {
            let forms = MetricForms::new(dim(n));
            let b = algebra_basis(dim(n));
            let u = &b[2 * n];
            for a in 0..2 * n {
                for c in 0..2 * n {
                    let br = b[a].bracket(&b[c]).unwrap();
                    let expected = u.scale(-2.0 * forms.zeta0()[(a, c)]);
                    assert_eq!(br.realization(), expected.realization());
                }
                assert!(b[a].bracket(u).unwrap().is_zero());
            }
        }
    }

    #[test]
    fn self_bracket_vanishes() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random_algebra_element(dim(2), &mut rng, 1.0);
        assert!(max_abs(&x.bracket(&x).unwrap().realization()) == 0.0);
    }

    #[test]
    fn bracket_of_pure_s_elements_stays_symplectic() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut a = random_algebra_element(dim(2), &mut rng, 1.0);
        let mut b = random_algebra_element(dim(2), &mut rng, 1.0);
        a.w.fill(0.0);
        a.r = 0.0;
        b.w.fill(0.0);
        b.r = 0.0;
        let c = a.bracket(&b).unwrap();
        assert!(c.w().iter().all(|x| *x == 0.0));
        assert_eq!(c.r(), 0.0);
        // oracle: block commutator of the S parts
        assert!(max_abs(&(c.s() - (a.s() * b.s() - b.s() * a.s()))) < 1e-15);
    }

    #[test]
    fn realization_satisfies_infinitesimal_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 1..=3 {
            let forms = MetricForms::new(dim(n));
            for _ in 0..50 {
                let x = random_algebra_element(dim(n), &mut rng, 1.0);
                let (sym, deg) = forms.algebra_residuals(&x.realization()).unwrap();
                assert!(sym <= 1e-14, "{sym}");
                assert!(deg <= 1e-14, "{deg}");
            }
        }
    }

    #[test]
    fn exp_of_zero_is_identity() {
        assert_eq!(
            HspAlgebraElement::zero(dim(2)).exp().unwrap(),
            HspElement::identity(dim(2))
        );
    }

    #[test]
    fn exp_of_pure_translation_is_exact() {
        let w = DVector::from_row_slice(&[0.3, -1.2, 2.0, 0.5]);
        let x = HspAlgebraElement::new(DMatrix::zeros(4, 4), w.clone(), 0.75, 0.0).unwrap();
        let g = x.exp().unwrap();
        assert_eq!(g.w(), &w);
        assert_eq!(g.r(), 0.75);
        // the general series agrees with the nilpotent shortcut
        let series = matrix_exp(&x.realization());
        assert!(max_abs(&(series - g.to_matrix())) < 1e-15);
    }

    #[test]
    fn exp_of_rotation_generator() {
        let th = 0.8_f64;
        let s = DMatrix::from_row_slice(2, 2, &[0.0, th, -th, 0.0]);
        let x = HspAlgebraElement::new(s, DVector::zeros(2), 0.0, 1e-15).unwrap();
        let g = x.exp().unwrap();
        let expected =
            DMatrix::from_row_slice(2, 2, &[th.cos(), th.sin(), -th.sin(), th.cos()]);
        assert!(max_abs(&(g.sigma() - expected)) < 1e-15);
    }

    #[test]
    fn random_elements_are_deterministic() {
        let a = random_element(dim(2), 42, 1.0);
        let b = random_element(dim(2), 42, 1.0);
        assert_eq!(a, b);
        assert_ne!(a, random_element(dim(2), 43, 1.0));
        assert_eq!(random_element(dim(2), 7, 0.0), HspElement::identity(dim(2)));
    }

    #[test]
    fn random_elements_preserve_both_forms() {
        let forms = MetricForms::new(dim(2));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut worst = 0.0_f64;
        for _ in 0..1000 {
            let g = random_element_from(dim(2), &mut rng, 1.0);
            let (sym, deg) = forms.extended_invariance_residuals(&g.to_matrix()).unwrap();
            worst = worst.max(sym).max(deg);
        }
        assert!(worst <= 1e-12, "{worst}");
    }

    #[test]
    fn non_symplectic_s_is_rejected() {
        let s = DMatrix::identity(2, 2);
        assert!(HspAlgebraElement::new(s, DVector::zeros(2), 0.0, 1e-12).is_err());
    }
}

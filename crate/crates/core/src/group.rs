//! The group `HSp(2n) = Sp(2n) ⋉ H(n)` as structured triples `(Σ, w, r)`.
//!
//! The matrix realization acting on `(dp, dq, de, dt)` is
//!
//! ```text
//!         ⎡ Σ          0   w ⎤
//! Γ(Σ,w,r) = ⎢ −wᵗζ°Σ     1   r ⎥
//!         ⎣ 0          0   1 ⎦
//! ```
//!
//! and every operation here is checked against plain matrix multiplication of
//! that realization. The translation part `w` is split as `w = (f, v)`: the
//! force `f` sits in the `p` rows and the velocity `v` in the `q` rows.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{check_square, expect_len, max_abs, Dimension, MetricForms};

/// Absolute membership tolerance used when none is given.
pub const DEFAULT_MEMBERSHIP_TOL: f64 = 1e-10;

/// An element `Γ(Σ, w, r)` of `HSp(2n)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "ElementJson", try_from = "ElementJson")]
pub struct HspElement {
    dim: Dimension,
    sigma: DMatrix<f64>,
    w: DVector<f64>,
    r: f64,
}

/// Velocity, force and power parameters of a Weyl-Heisenberg element.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityForcePower {
    pub v: DVector<f64>,
    pub f: DVector<f64>,
    pub r: f64,
}

impl VelocityForcePower {
    pub fn new(v: DVector<f64>, f: DVector<f64>, r: f64) -> Self {
        VelocityForcePower { v, f, r }
    }

    /// Packs as `w = (f, v)`.
    pub fn to_w(&self) -> Result<DVector<f64>> {
        expect_len(self.f.len(), self.v.len())?;
        Dimension::new(self.f.len())?;
        Ok(concat(&self.f, &self.v))
    }

    pub fn from_w(w: &DVector<f64>, r: f64) -> Result<Self> {
        let dim = Dimension::from_phase_len(w.len())?;
        Ok(VelocityForcePower {
            f: w.rows(0, dim.n()).into_owned(),
            v: w.rows(dim.n(), dim.n()).into_owned(),
            r,
        })
    }
}

/// Per-block residuals of a `(2n+2)`-square matrix against the `Γ(Σ, w, r)`
/// structure. All are max-abs deviations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StructureResiduals {
    /// The `(t, t)` entry, `+1` on the identity component, `−1` on the
    /// time-reversing one.
    pub time_orientation: f64,
    /// Bottom row against `(0, …, 0, 1)`.
    pub t_row: f64,
    /// `e` column against `(0, …, 0, 1, 0)ᵗ`.
    pub e_column: f64,
    /// `e` row, `y` block against `−wᵗζ°Σ`.
    pub e_row: f64,
    /// `ΣᵗζΣ − ζ°`.
    pub sigma_symplectic: f64,
}

impl StructureResiduals {
    pub fn of(m: &DMatrix<f64>) -> Result<Self> {
        let dim = Dimension::from_extended_len(m.nrows())?;
        check_square(m, dim.extended_len())?;
        let forms = MetricForms::new(dim);
        let len = dim.phase_len();
        let (e, t) = (dim.e_index(), dim.t_index());

        let time_orientation = m[(t, t)];
        let t_row = (0..=t)
            .map(|j| {
                let target = if j == t { time_orientation.signum() } else { 0.0 };
                (m[(t, j)] - target).abs()
            })
            .fold(0.0, f64::max);
        let e_column = (0..=t)
            .map(|i| {
                let target = if i == e { 1.0 } else { 0.0 };
                (m[(i, e)] - target).abs()
            })
            .fold(0.0, f64::max);

        let sigma = m.view((0, 0), (len, len)).into_owned();
        let w = m.view((0, t), (len, 1)).into_owned();
        let expected_c = -(w.transpose() * forms.zeta0() * &sigma);
        let c = m.view((e, 0), (1, len)).into_owned();
        let e_row = max_abs(&(c - expected_c));
        let sigma_symplectic = forms.symplectic_residual(&sigma)?;

        Ok(StructureResiduals {
            time_orientation,
            t_row,
            e_column,
            e_row,
            sigma_symplectic,
        })
    }

    pub fn max(&self) -> f64 {
        [
            self.t_row,
            self.e_column,
            self.e_row,
            self.sigma_symplectic,
            (self.time_orientation - 1.0).abs(),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

impl HspElement {
    /// Builds `Γ(Σ, w, r)`, rejecting `Σ` whose symplectic residual exceeds `tol`.
    pub fn new(sigma: DMatrix<f64>, w: DVector<f64>, r: f64, tol: f64) -> Result<Self> {
        let dim = Dimension::from_phase_len(sigma.nrows())?;
        check_square(&sigma, dim.phase_len())?;
        dim.check_phase(w.len())?;
        let residual = MetricForms::new(dim).symplectic_residual(&sigma)?;
        if !(residual <= tol) {
            return Err(Error::NotSymplectic { residual, tol });
        }
        Ok(HspElement { dim, sigma, w, r })
    }

    pub(crate) fn from_parts_unchecked(
        dim: Dimension,
        sigma: DMatrix<f64>,
        w: DVector<f64>,
        r: f64,
    ) -> Self {
        HspElement { dim, sigma, w, r }
    }

    pub fn identity(dim: Dimension) -> Self {
        let m = dim.phase_len();
        HspElement {
            dim,
            sigma: DMatrix::identity(m, m),
            w: DVector::zeros(m),
            r: 0.0,
        }
    }

    /// `Υ(w, r) = Γ(1, w, r)`.
    pub fn heisenberg_wr(w: DVector<f64>, r: f64) -> Result<Self> {
        let dim = Dimension::from_phase_len(w.len())?;
        let m = dim.phase_len();
        Ok(HspElement {
            dim,
            sigma: DMatrix::identity(m, m),
            w,
            r,
        })
    }

    /// `Υ(f, v, r)`. Acting on differentials it gives `dp̃ = dp + f dt`,
    /// `dq̃ = dq + v dt`, `dẽ = de + v·dp − f·dq + r dt`.
    pub fn heisenberg(vfp: &VelocityForcePower) -> Result<Self> {
        Self::heisenberg_wr(vfp.to_w()?, vfp.r)
    }

    /// Pure velocity boost, `Υ(0, v, 0)`.
    pub fn galilei_boost(v: &DVector<f64>) -> Result<Self> {
        let zero = DVector::zeros(v.len());
        Self::heisenberg(&VelocityForcePower::new(v.clone(), zero, 0.0))
    }

    /// `Γ(Σ, 0, 0)`.
    pub fn symplectic(sigma: DMatrix<f64>, tol: f64) -> Result<Self> {
        let w = DVector::zeros(sigma.nrows());
        Self::new(sigma, w, 0.0, tol)
    }

    pub fn dim(&self) -> Dimension {
        self.dim
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn w(&self) -> &DVector<f64> {
        &self.w
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    /// The translation part split as velocity, force and power.
    pub fn velocity_force_power(&self) -> VelocityForcePower {
        VelocityForcePower::from_w(&self.w, self.r).expect("w has even length")
    }

    /// The `(2n+2)`-square matrix realization.
    pub fn to_matrix(&self) -> DMatrix<f64> {
        let m = self.dim.phase_len();
        let (e, t) = (self.dim.e_index(), self.dim.t_index());
        let c = self.e_row();
        let mut g = DMatrix::zeros(m + 2, m + 2);
        g.view_mut((0, 0), (m, m)).copy_from(&self.sigma);
        g.view_mut((0, t), (m, 1)).copy_from(&self.w);
        g.view_mut((e, 0), (1, m)).copy_from(&c);
        g[(e, e)] = 1.0;
        g[(e, t)] = self.r;
        g[(t, t)] = 1.0;
        g
    }

    /// The row `−wᵗζ°Σ`.
    fn e_row(&self) -> nalgebra::RowDVector<f64> {
        let forms = MetricForms::new(self.dim);
        -(self.w.transpose() * forms.zeta0() * &self.sigma)
    }

    /// Decomposes a matrix back into `(Σ, w, r)`, checking every block.
    pub fn from_matrix(m: &DMatrix<f64>, tol: f64) -> Result<Self> {
        let res = StructureResiduals::of(m)?;
        if (res.time_orientation + 1.0).abs() <= tol {
            return Err(Error::NotConnectedComponent(res.time_orientation));
        }
        let checks = [
            ("t row", res.t_row.max((res.time_orientation - 1.0).abs())),
            ("e column", res.e_column),
        ];
        for (block, residual) in checks {
            if !(residual <= tol) {
                return Err(Error::StructureViolation { block, residual });
            }
        }
        if !(res.sigma_symplectic <= tol) {
            return Err(Error::NotSymplectic {
                residual: res.sigma_symplectic,
                tol,
            });
        }
        if !(res.e_row <= tol) {
            return Err(Error::StructureViolation {
                block: "e row",
                residual: res.e_row,
            });
        }
        let dim = Dimension::from_extended_len(m.nrows())?;
        let len = dim.phase_len();
        Ok(HspElement {
            dim,
            sigma: m.view((0, 0), (len, len)).into_owned(),
            w: m.view((0, dim.t_index()), (len, 1)).column(0).into_owned(),
            r: m[(dim.e_index(), dim.t_index())],
        })
    }

    /// Group product `self · other`:
    /// `Σ″ = Σ′Σ`, `w″ = w′ + Σ′w`, `r″ = r′ + r − w′ᵗζ°Σ′w`.
    pub fn compose(&self, other: &HspElement) -> Result<HspElement> {
        expect_len(self.dim.n(), other.dim.n())?;
        let forms = MetricForms::new(self.dim);
        let sw = &self.sigma * &other.w;
        let central = self.w.dot(&(forms.zeta0() * &sw));
        Ok(HspElement {
            dim: self.dim,
            sigma: &self.sigma * &other.sigma,
            w: &self.w + &sw,
            r: self.r + other.r - central,
        })
    }

    /// `Γ(Σ⁻¹, −Σ⁻¹w, −r)` with `Σ⁻¹ = −ζ°Σᵗζ°`.
    pub fn inverse(&self) -> HspElement {
        let forms = MetricForms::new(self.dim);
        let z0 = forms.zeta0();
        let sigma_inv = -(z0 * self.sigma.transpose() * z0);
        let w = -(&sigma_inv * &self.w);
        HspElement {
            dim: self.dim,
            sigma: sigma_inv,
            w,
            r: -self.r,
        }
    }

    /// `Γ(1, w, r)`, so that `self = heisenberg_part · symplectic_part`.
    pub fn heisenberg_part(&self) -> HspElement {
        HspElement::heisenberg_wr(self.w.clone(), self.r).expect("valid w")
    }

    /// `Γ(Σ, 0, 0)`.
    pub fn symplectic_part(&self) -> HspElement {
        HspElement {
            dim: self.dim,
            sigma: self.sigma.clone(),
            w: DVector::zeros(self.dim.phase_len()),
            r: 0.0,
        }
    }

    /// Max-abs deviation of `Σ` from the identity.
    pub fn heisenberg_defect(&self) -> f64 {
        let m = self.dim.phase_len();
        max_abs(&(&self.sigma - DMatrix::identity(m, m)))
    }

    /// `Γ · dz` on an extended differential.
    pub fn apply_differential(&self, dz: &DVector<f64>) -> Result<DVector<f64>> {
        self.dim.check_extended(dz.len())?;
        Ok(self.to_matrix() * dz)
    }

    /// Plain conjugation `self · h · self⁻¹`.
    pub fn conjugate(&self, h: &HspElement) -> Result<HspElement> {
        self.compose(h)?.compose(&self.inverse())
    }

    /// Conjugates a Weyl-Heisenberg element. The result is again in `H(n)`;
    /// its `Σ` part is returned as the exact identity.
    pub fn conjugate_heisenberg(&self, h: &HspElement) -> Result<HspElement> {
        let defect = h.heisenberg_defect();
        if !(defect <= DEFAULT_MEMBERSHIP_TOL) {
            return Err(Error::NotHeisenberg(defect));
        }
        let raw = self.conjugate(h)?;
        let defect = raw.heisenberg_defect();
        if !(defect <= DEFAULT_MEMBERSHIP_TOL) {
            return Err(Error::NotHeisenberg(defect));
        }
        HspElement::heisenberg_wr(raw.w, raw.r)
    }

    /// Largest field-wise difference between two elements.
    pub fn max_field_diff(&self, other: &HspElement) -> f64 {
        if self.dim != other.dim {
            return f64::INFINITY;
        }
        max_abs(&(&self.sigma - &other.sigma))
            .max(max_abs(&(&self.w - &other.w)))
            .max((self.r - other.r).abs())
    }
}

/// `Σ(R) = diag(R, R)` for an orthogonal `R`, together with whether `R` is a
/// proper rotation (`det R = +1`).
#[derive(Debug, Clone, PartialEq)]
pub struct RotationElement {
    pub element: HspElement,
    pub special_orthogonal: bool,
}

pub fn rotation_element(rot: &DMatrix<f64>, tol: f64) -> Result<RotationElement> {
    let dim = Dimension::new(rot.nrows())?;
    check_square(rot, dim.n())?;
    let n = dim.n();
    let residual = max_abs(&(rot.transpose() * rot - DMatrix::identity(n, n)));
    if !(residual <= tol) {
        return Err(Error::NotOrthogonal(residual));
    }
    let mut sigma = DMatrix::zeros(2 * n, 2 * n);
    sigma.view_mut((0, 0), (n, n)).copy_from(rot);
    sigma.view_mut((n, n), (n, n)).copy_from(rot);
    let element = HspElement::symplectic(sigma, DEFAULT_MEMBERSHIP_TOL.max(tol))?;
    Ok(RotationElement {
        element,
        special_orthogonal: rot.determinant() > 0.0,
    })
}

/// `r(Υ(f,0,0)·Υ(0,v,0)) − r(Υ(0,v,0)·Υ(f,0,0))`, which equals `−2 f·v`.
pub fn central_discrepancy(f: &DVector<f64>, v: &DVector<f64>) -> Result<f64> {
    expect_len(f.len(), v.len())?;
    let zero = DVector::zeros(f.len());
    let force = HspElement::heisenberg(&VelocityForcePower::new(zero.clone(), f.clone(), 0.0))?;
    let boost = HspElement::heisenberg(&VelocityForcePower::new(v.clone(), zero, 0.0))?;
    let a = force.compose(&boost)?;
    let b = boost.compose(&force)?;
    Ok(a.r() - b.r())
}

fn concat(a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
    DVector::from_iterator(a.len() + b.len(), a.iter().chain(b.iter()).copied())
}

/// JSON shape `{n, sigma: row-major, w, r}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElementJson {
    pub n: usize,
    pub sigma: Vec<f64>,
    pub w: Vec<f64>,
    pub r: f64,
}

impl From<HspElement> for ElementJson {
    fn from(g: HspElement) -> Self {
        let m = g.dim.phase_len();
        let sigma = (0..m)
            .flat_map(|i| (0..m).map(move |j| (i, j)))
            .map(|(i, j)| g.sigma[(i, j)])
            .collect();
        ElementJson {
            n: g.dim.n(),
            sigma,
            w: g.w.iter().copied().collect(),
            r: g.r,
        }
    }
}

impl TryFrom<ElementJson> for HspElement {
    type Error = Error;

    fn try_from(j: ElementJson) -> Result<Self> {
        let dim = Dimension::new(j.n)?;
        let m = dim.phase_len();
        expect_len(m * m, j.sigma.len())?;
        let sigma = DMatrix::from_row_slice(m, m, &j.sigma);
        HspElement::new(sigma, DVector::from_vec(j.w), j.r, DEFAULT_MEMBERSHIP_TOL)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(xs)
    }

    fn upsilon(f: &[f64], vel: &[f64], r: f64) -> HspElement {
        HspElement::heisenberg(&VelocityForcePower::new(v(vel), v(f), r)).unwrap()
    }

    fn d1() -> Dimension {
        Dimension::new(1).unwrap()
    }

    #[test]
    fn identity_realizes_as_identity_matrix() {
        let g = HspElement::new(DMatrix::identity(2, 2), DVector::zeros(2), 0.0, 1e-10).unwrap();
        assert_eq!(g, HspElement::identity(d1()));
        assert_eq!(g.to_matrix(), DMatrix::identity(4, 4));
    }

    #[test]
    fn quarter_turn_is_symplectic() {
        let s = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        assert!(HspElement::symplectic(s, 1e-10).is_ok());
    }

    #[test]
    fn scaling_is_rejected() {
        let s = DMatrix::from_diagonal_element(2, 2, 2.0);
        match HspElement::symplectic(s, 1e-10) {
            Err(Error::NotSymplectic { residual, .. }) => assert_eq!(residual, 3.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn e_row_of_pure_force() {
        let g = upsilon(&[1.0], &[0.0], 0.0);
        let m = g.to_matrix();
        let row: Vec<f64> = m.row(2).iter().copied().collect();
        assert_eq!(row, vec![0.0, -1.0, 1.0, 0.0]);
    }

    #[test]
    fn e_row_is_velocity_minus_force() {
        let g = upsilon(&[2.0], &[3.0], 5.0);
        let m = g.to_matrix();
        let row: Vec<f64> = m.row(2).iter().copied().collect();
        assert_eq!(row, vec![3.0, -2.0, 1.0, 5.0]);
        // (q, e) slot is zero, not 1
        assert_eq!(m[(1, 2)], 0.0);
    }

    #[test]
    fn from_matrix_rejects_time_reversal() {
        let mut m = DMatrix::identity(4, 4);
        m[(3, 3)] = -1.0;
        assert_eq!(
            HspElement::from_matrix(&m, 1e-10),
            Err(Error::NotConnectedComponent(-1.0))
        );
    }

    #[test]
    fn from_matrix_rejects_time_position_coupling() {
        let mut m = DMatrix::identity(4, 4);
        m[(3, 1)] = 0.5;
        assert!(matches!(
            HspElement::from_matrix(&m, 1e-10),
            Err(Error::StructureViolation { block: "t row", .. })
        ));
    }

    #[test]
    fn from_matrix_rejects_bad_e_row() {
        let mut m = upsilon(&[1.0], &[2.0], 0.0).to_matrix();
        m[(2, 0)] += 0.1;
        assert!(matches!(
            HspElement::from_matrix(&m, 1e-10),
            Err(Error::StructureViolation { block: "e row", .. })
        ));
    }

    #[test]
    fn from_matrix_rejects_energy_column() {
        let mut m = DMatrix::identity(4, 4);
        m[(0, 2)] = 0.1;
        assert!(matches!(
            HspElement::from_matrix(&m, 1e-10),
            Err(Error::StructureViolation { block: "e column", .. })
        ));
    }

    #[test]
    fn force_then_boost_composition() {
        let force = upsilon(&[1.0], &[0.0], 0.0);
        let boost = upsilon(&[0.0], &[1.0], 0.0);
        let fb = force.compose(&boost).unwrap();
        assert_eq!(fb.w().as_slice(), &[1.0, 1.0]);
        assert_eq!(fb.r(), -1.0);
        let bf = boost.compose(&force).unwrap();
        assert_eq!(bf.w().as_slice(), &[1.0, 1.0]);
        assert_eq!(bf.r(), 1.0);
        // oracle: plain matrix product
        assert_eq!(force.to_matrix() * boost.to_matrix(), fb.to_matrix());
        assert_eq!(boost.to_matrix() * force.to_matrix(), bf.to_matrix());
    }

    #[test]
    fn heisenberg_inverse_negates_parameters() {
        let g = upsilon(&[1.5, -2.0], &[0.25, 3.0], 7.0);
        let inv = g.inverse();
        assert_eq!(inv, upsilon(&[-1.5, 2.0], &[-0.25, -3.0], -7.0));
        assert_eq!(
            g.compose(&inv).unwrap(),
            HspElement::identity(Dimension::new(2).unwrap())
        );
    }

    #[test]
    fn heisenberg_action_on_differentials() {
        let boost = upsilon(&[0.0], &[1.0], 0.0);
        let out = boost.apply_differential(&v(&[0.0, 0.0, 0.0, 1.0])).unwrap();
        assert_eq!(out.as_slice(), &[0.0, 1.0, 0.0, 1.0]);

        let g = upsilon(&[2.0], &[3.0], 5.0);
        let out = g.apply_differential(&v(&[1.0, 1.0, 0.0, 0.0])).unwrap();
        assert_eq!(out[2], 1.0);

        let out = g.apply_differential(&v(&[0.0, 0.0, 0.0, 1.0])).unwrap();
        assert_eq!(out.as_slice(), &[2.0, 3.0, 5.0, 1.0]);

        assert!(g.apply_differential(&v(&[1.0, 0.0])).is_err());
    }

    #[test]
    fn galilei_boost_adds_momentum_to_energy() {
        let boost = HspElement::galilei_boost(&v(&[2.0])).unwrap();
        let out = boost.apply_differential(&v(&[1.0, 0.0, 0.0, 0.0])).unwrap();
        assert_eq!(out[2], 2.0);
        assert_eq!(
            HspElement::galilei_boost(&v(&[0.0])).unwrap(),
            HspElement::identity(d1())
        );
    }

    #[test]
    fn boost_and_rotation_order() {
        let th = std::f64::consts::FRAC_PI_2;
        let rot = DMatrix::from_row_slice(2, 2, &[th.cos(), -th.sin(), th.sin(), th.cos()]);
        let r = rotation_element(&rot, 1e-12).unwrap();
        assert!(r.special_orthogonal);
        let forms = MetricForms::for_n(2).unwrap();
        assert!(forms.symplectic_residual(r.element.sigma()).unwrap() < 1e-15);

        let vel = v(&[1.0, 0.5]);
        let boost = HspElement::galilei_boost(&vel).unwrap();
        let rb = r.element.compose(&boost).unwrap();
        let br = boost.compose(&r.element).unwrap();
        let rotated = &rot * &vel;
        assert!((rb.w().rows(2, 2) - &rotated).amax() < 1e-15);
        assert_eq!(br.w().rows(2, 2), vel.rows(0, 2));
        assert_eq!(rb.sigma(), br.sigma());
    }

    #[test]
    fn reflection_is_accepted_but_flagged() {
        let refl = DMatrix::from_diagonal(&v(&[1.0, -1.0]));
        let r = rotation_element(&refl, 1e-12).unwrap();
        assert!(!r.special_orthogonal);
        let not_orth = DMatrix::from_diagonal(&v(&[2.0, 1.0]));
        assert!(matches!(
            rotation_element(&not_orth, 1e-12),
            Err(Error::NotOrthogonal(_))
        ));
        let id = rotation_element(&DMatrix::identity(3, 3), 1e-12).unwrap();
        assert_eq!(id.element, HspElement::identity(Dimension::new(3).unwrap()));
    }

    #[test]
    fn conjugation_by_pure_symplectic_keeps_central_part() {
        let s = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 1.0]);
        let g = HspElement::symplectic(s.clone(), 1e-12).unwrap();
        let h = upsilon(&[0.3], &[-0.7], 1.25);
        let c = g.conjugate_heisenberg(&h).unwrap();
        assert_eq!(c.heisenberg_defect(), 0.0);
        assert!((c.w() - &s * h.w()).amax() < 1e-15);
        assert!((c.r() - 1.25).abs() < 1e-15);
    }

    #[test]
    fn conjugation_of_boost_by_force() {
        let g = upsilon(&[1.0], &[0.0], 0.0);
        let h = upsilon(&[0.0], &[1.0], 0.0);
        let c = g.conjugate_heisenberg(&h).unwrap();
        let triple = g.to_matrix() * h.to_matrix() * g.inverse().to_matrix();
        assert_eq!(c.to_matrix(), triple);
        assert_eq!(c.w(), h.w());
        assert_eq!(c.r().abs(), 2.0);
        assert_eq!(
            HspElement::identity(d1()).conjugate_heisenberg(&h).unwrap(),
            h
        );
        assert!(matches!(h.conjugate_heisenberg(&g.compose(&HspElement::symplectic(
            DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]), 1e-12).unwrap()).unwrap()),
            Err(Error::NotHeisenberg(_))));
    }

    #[test]
    fn discrepancy_examples() {
        assert_eq!(central_discrepancy(&v(&[1.0, 0.0]), &v(&[0.0, 1.0])).unwrap(), 0.0);
        assert_eq!(central_discrepancy(&v(&[1.0]), &v(&[1.0])).unwrap().abs(), 2.0);
        let f = v(&[0.3, -1.1]);
        let vel = v(&[2.0, 0.7]);
        let base = central_discrepancy(&f, &vel).unwrap();
        assert!((base + 2.0 * f.dot(&vel)).abs() < 1e-15);
        let scaled = central_discrepancy(&(&f * 2.0), &(&vel * 3.0)).unwrap();
        assert!((scaled - 6.0 * base).abs() < 1e-14);
        assert!(central_discrepancy(&v(&[1.0]), &v(&[1.0, 2.0])).is_err());
    }

    #[test]
    fn json_round_trip() {
        let g = upsilon(&[1.0, 2.0], &[3.0, 4.0], 0.5)
            .compose(
                &rotation_element(&DMatrix::from_row_slice(2, 2, &[0.6, -0.8, 0.8, 0.6]), 1e-12)
                    .unwrap()
                    .element,
            )
            .unwrap();
        let s = serde_json::to_string(&g).unwrap();
        let back: HspElement = serde_json::from_str(&s).unwrap();
        assert!(back.max_field_diff(&g) <= 1e-15);

        let bad = r#"{"n":1,"sigma":[2,0,0,2],"w":[0,0],"r":0}"#;
        assert!(serde_json::from_str::<HspElement>(bad).is_err());
        let extra = r#"{"n":1,"sigma":[1,0,0,1],"w":[0,0],"r":0,"x":1}"#;
        assert!(serde_json::from_str::<HspElement>(extra).is_err());
    }
}

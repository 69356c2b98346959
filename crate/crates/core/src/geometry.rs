//! Extended phase space `(p, q, e, t)` and the two forms living on it: the
//! symplectic metric `ζ` (with its phase-space block `ζ°`) and the degenerate
//! time line element `η° = dt²`.
//!
//! Every block index used anywhere in the crate comes from [`Dimension`], so
//! the coordinate ordering is fixed in exactly one place.

use std::ops::Range;

use nalgebra::{DMatrix, DVector, Dim, Matrix, RawStorage};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of (unextended) phase space, `(p₁..pₙ, q₁..qₙ)`.
pub type PhaseVector = DVector<f64>;

/// Number of degrees of freedom `n`. Phase space has dimension `2n`, extended
/// phase space `2n + 2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct Dimension(usize);

impl Dimension {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidDimension(n));
        }
        Ok(Dimension(n))
    }

    /// Degrees of freedom.
    pub fn n(self) -> usize {
        self.0
    }

    /// Length of a phase vector, `2n`.
    pub fn phase_len(self) -> usize {
        2 * self.0
    }

    /// Length of an extended vector, `2n + 2`.
    pub fn extended_len(self) -> usize {
        2 * self.0 + 2
    }

    pub fn p_range(self) -> Range<usize> {
        0..self.0
    }

    pub fn q_range(self) -> Range<usize> {
        self.0..2 * self.0
    }

    /// Index of the energy coordinate.
    pub fn e_index(self) -> usize {
        2 * self.0
    }

    /// Index of the time coordinate.
    pub fn t_index(self) -> usize {
        2 * self.0 + 1
    }

    /// Recovers `n` from a phase-vector length.
    pub fn from_phase_len(len: usize) -> Result<Self> {
        if len == 0 || !len.is_multiple_of(2) {
            return Err(Error::DimensionMismatch {
                expected: 2 * (len / 2).max(1),
                found: len,
            });
        }
        Dimension::new(len / 2)
    }

    /// Recovers `n` from an extended-vector length.
    pub fn from_extended_len(len: usize) -> Result<Self> {
        if len < 4 || !len.is_multiple_of(2) {
            return Err(Error::DimensionMismatch {
                expected: 2 * (len / 2).max(2),
                found: len,
            });
        }
        Dimension::new(len / 2 - 1)
    }

    pub(crate) fn check_phase(self, len: usize) -> Result<()> {
        expect_len(self.phase_len(), len)
    }

    pub(crate) fn check_extended(self, len: usize) -> Result<()> {
        expect_len(self.extended_len(), len)
    }
}

impl TryFrom<usize> for Dimension {
    type Error = Error;

    fn try_from(n: usize) -> Result<Self> {
        Dimension::new(n)
    }
}

impl From<Dimension> for usize {
    fn from(d: Dimension) -> usize {
        d.0
    }
}

pub(crate) fn expect_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

/// A point `z = (y, e, t)` of extended phase space.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedPoint {
    pub y: PhaseVector,
    pub e: f64,
    pub t: f64,
}

impl ExtendedPoint {
    pub fn new(y: PhaseVector, e: f64, t: f64) -> Self {
        ExtendedPoint { y, e, t }
    }

    pub fn dim(&self) -> Result<Dimension> {
        Dimension::from_phase_len(self.y.len())
    }

    /// Flattens to `(p, q, e, t)`.
    pub fn to_vector(&self) -> DVector<f64> {
        let m = self.y.len();
        DVector::from_fn(m + 2, |i, _| match i {
            i if i < m => self.y[i],
            i if i == m => self.e,
            _ => self.t,
        })
    }

    pub fn from_vector(z: &DVector<f64>) -> Result<Self> {
        let dim = Dimension::from_extended_len(z.len())?;
        Ok(ExtendedPoint {
            y: z.rows(0, dim.phase_len()).into_owned(),
            e: z[dim.e_index()],
            t: z[dim.t_index()],
        })
    }
}

/// The symplectic metric `ζ`, its phase block `ζ°`, and the degenerate form `η°`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricForms {
    dim: Dimension,
    zeta0: DMatrix<f64>,
    zeta: DMatrix<f64>,
    eta0: DMatrix<f64>,
}

impl MetricForms {
    pub fn new(dim: Dimension) -> Self {
        let n = dim.n();
        let m = dim.phase_len();
        let zeta0_int = |i: usize, j: usize| -> i32 {
            if i < n && j == i + n {
                1
            } else if i >= n && i < m && j + n == i {
                -1
            } else {
                0
            }
        };
        let zeta0 = DMatrix::from_fn(m, m, |i, j| f64::from(zeta0_int(i, j)));

        let (e, t) = (dim.e_index(), dim.t_index());
        let zeta = DMatrix::from_fn(m + 2, m + 2, |i, j| {
            let v = if i < m && j < m {
                zeta0_int(i, j)
            } else if i == e && j == t {
                -1
            } else if i == t && j == e {
                1
            } else {
                0
            };
            f64::from(v)
        });
        let eta0 = DMatrix::from_fn(m + 2, m + 2, |i, j| if i == t && j == t { 1.0 } else { 0.0 });

        MetricForms {
            dim,
            zeta0,
            zeta,
            eta0,
        }
    }

    pub fn for_n(n: usize) -> Result<Self> {
        Ok(Self::new(Dimension::new(n)?))
    }

    pub fn dim(&self) -> Dimension {
        self.dim
    }

    /// `ζ° = [[0, 1ₙ], [−1ₙ, 0]]`.
    pub fn zeta0(&self) -> &DMatrix<f64> {
        &self.zeta0
    }

    /// The extended symplectic metric, `ζ° ⊕ [[0, −1], [1, 0]]` on `(e, t)`.
    pub fn zeta(&self) -> &DMatrix<f64> {
        &self.zeta
    }

    /// Zero except for a 1 at `(t, t)`.
    pub fn eta0(&self) -> &DMatrix<f64> {
        &self.eta0
    }

    /// Evaluates `uᵗ ζ v` for extended tangent vectors.
    pub fn two_form(&self, u: &DVector<f64>, v: &DVector<f64>) -> Result<f64> {
        self.dim.check_extended(u.len())?;
        self.dim.check_extended(v.len())?;
        Ok(u.dot(&(&self.zeta * v)))
    }

    /// Max-abs entry of `Mᵗ ζ° M − ζ°`; zero iff `M` is symplectic.
    pub fn symplectic_residual(&self, m: &DMatrix<f64>) -> Result<f64> {
        check_square(m, self.dim.phase_len())?;
        Ok(max_abs(&(m.transpose() * &self.zeta0 * m - &self.zeta0)))
    }

    /// Returns `(‖JᵗζJ − ζ‖, ‖Jᵗη°J − η°‖)` in the max-abs norm.
    pub fn extended_invariance_residuals(&self, j: &DMatrix<f64>) -> Result<(f64, f64)> {
        check_square(j, self.dim.extended_len())?;
        let jt = j.transpose();
        let sym = max_abs(&(&jt * &self.zeta * j - &self.zeta));
        let deg = max_abs(&(&jt * &self.eta0 * j - &self.eta0));
        Ok((sym, deg))
    }

    /// Residuals of `Xᵗζ + ζX` and `Xᵗη° + η°X`, the infinitesimal versions
    /// of the invariance conditions.
    pub fn algebra_residuals(&self, x: &DMatrix<f64>) -> Result<(f64, f64)> {
        check_square(x, self.dim.extended_len())?;
        let xt = x.transpose();
        let sym = max_abs(&(&xt * &self.zeta + &self.zeta * x));
        let deg = max_abs(&(&xt * &self.eta0 + &self.eta0 * x));
        Ok((sym, deg))
    }
}

pub(crate) fn check_square(m: &DMatrix<f64>, size: usize) -> Result<()> {
    expect_len(size, m.nrows())?;
    expect_len(size, m.ncols())
}

/// Max-abs-entry norm, the norm used by every residual in this crate.
pub fn max_abs<R: Dim, C: Dim, S: RawStorage<f64, R, C>>(m: &Matrix<f64, R, C, S>) -> f64 {
    m.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

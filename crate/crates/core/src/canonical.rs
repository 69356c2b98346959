//! Time-independent canonical maps `ỹ = ϱ(y)` and the transformed
//! Hamiltonian `H̃ = H ∘ ϱ⁻¹`.
//!
//! A canonical map carries trajectories to trajectories: if `φ` solves
//! Hamilton's equations for `H`, then `ϱ ∘ φ` solves them for `H̃`. Note that
//! `H̃` is not `H` evaluated at the new coordinates.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::dynamics::{Hamiltonian, Params};
use crate::error::{Error, Result};
use crate::geometry::{Dimension, PhaseVector};
use crate::verify::{fd_jacobian, FdScheme, JacobianConfig};

type MapFn = dyn Fn(&PhaseVector) -> PhaseVector + Send + Sync;
type TryMapFn = dyn Fn(&PhaseVector) -> Result<PhaseVector> + Send + Sync;
type JacobianFn = dyn Fn(&PhaseVector) -> DMatrix<f64> + Send + Sync;

/// Names accepted by [`builtin_canonical_map`].
pub const CANONICAL_MAP_NAMES: [&str; 4] = ["identity", "scaling", "phase_rotation", "shear"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JacobianKind {
    Analytic,
    FiniteDifference,
}

/// A phase-space diffeomorphism with its inverse and Jacobian.
#[derive(Clone)]
pub struct CanonicalMap {
    name: String,
    dim: Dimension,
    forward: Arc<MapFn>,
    inverse: Arc<TryMapFn>,
    jacobian: Option<Arc<JacobianFn>>,
    keeps_separable: bool,
}

impl fmt::Debug for CanonicalMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CanonicalMap")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("jacobian", &self.jacobian_kind())
            .finish()
    }
}

impl CanonicalMap {
    /// A map from closures. Without [`with_jacobian`](Self::with_jacobian)
    /// the Jacobian is taken by finite differences.
    pub fn new(
        name: impl Into<String>,
        dim: Dimension,
        forward: impl Fn(&PhaseVector) -> PhaseVector + Send + Sync + 'static,
        inverse: impl Fn(&PhaseVector) -> Result<PhaseVector> + Send + Sync + 'static,
    ) -> Self {
        CanonicalMap {
            name: name.into(),
            dim,
            forward: Arc::new(forward),
            inverse: Arc::new(inverse),
            jacobian: None,
            keeps_separable: false,
        }
    }

    pub fn with_jacobian(
        mut self,
        jacobian: impl Fn(&PhaseVector) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        self.jacobian = Some(Arc::new(jacobian));
        self
    }

    /// The linear map `y ↦ M y`. Fails if `M` is singular.
    pub fn linear(name: impl Into<String>, matrix: DMatrix<f64>) -> Result<Self> {
        let dim = Dimension::from_phase_len(matrix.nrows())?;
        dim.check_phase(matrix.ncols())?;
        let name = name.into();
        let inv = matrix
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::InversionFailure(format!("{name}: matrix is singular")))?;
        let (fwd, jac) = (matrix.clone(), matrix);
        Ok(CanonicalMap::new(name, dim, move |y| &fwd * y, move |y| Ok(&inv * y)).with_jacobian(move |_| jac.clone()))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> Dimension {
        self.dim
    }

    pub fn jacobian_kind(&self) -> JacobianKind {
        if self.jacobian.is_some() {
            JacobianKind::Analytic
        } else {
            JacobianKind::FiniteDifference
        }
    }

    pub fn forward(&self, y: &PhaseVector) -> Result<PhaseVector> {
        self.dim.check_phase(y.len())?;
        Ok((self.forward)(y))
    }

    pub fn inverse(&self, y: &PhaseVector) -> Result<PhaseVector> {
        self.dim.check_phase(y.len())?;
        (self.inverse)(y)
    }

    /// `∂ϱ/∂y` at `y`.
    pub fn jacobian(&self, y: &PhaseVector) -> Result<DMatrix<f64>> {
        self.dim.check_phase(y.len())?;
        match &self.jacobian {
            Some(j) => Ok(j(y)),
            None => {
                let cfg = JacobianConfig {
                    h: 1e-5,
                    scheme: FdScheme::Central4th,
                    per_coordinate_scaling: true,
                };
                fd_jacobian(|x| Ok((self.forward)(x)), y, &cfg)
            }
        }
    }
}

fn linear_builtin(name: &str, matrix: DMatrix<f64>, keeps_separable: bool) -> Result<CanonicalMap> {
    let mut map = CanonicalMap::linear(name, matrix)?;
    map.keeps_separable = keeps_separable;
    Ok(map)
}

/// Builds one of the named maps in [`CANONICAL_MAP_NAMES`].
///
/// * `identity`
/// * `scaling` with `lambda ≠ 0`: `(p, q) ↦ (λp, q/λ)`
/// * `phase_rotation` with `theta`, one degree of freedom only
/// * `shear` with `g`: `(p, q) ↦ (p, q + g·p)`
pub fn builtin_canonical_map(name: &str, dim: Dimension, params: &Params) -> Result<CanonicalMap> {
    let n = dim.n();
    let m = dim.phase_len();
    let required = |key: &str| {
        params
            .get(key)
            .ok_or_else(|| Error::InvalidParams(format!("{name} requires parameter `{key}`")))
    };
    match name {
        "identity" => {
            params.check_keys(&[])?;
            linear_builtin(name, DMatrix::identity(m, m), true)
        }
        "scaling" => {
            params.check_keys(&["lambda"])?;
            let lambda = required("lambda")?;
            if lambda == 0.0 || !lambda.is_finite() {
                return Err(Error::InvalidParams(format!("scaling needs finite lambda != 0, got {lambda}")));
            }
            let diag = PhaseVector::from_fn(m, |i, _| if i < n { lambda } else { 1.0 / lambda });
            linear_builtin(name, DMatrix::from_diagonal(&diag), true)
        }
        "phase_rotation" => {
            params.check_keys(&["theta"])?;
            if n != 1 {
                return Err(Error::WrongDimension {
                    name: "phase_rotation",
                    required: 1,
                    found: n,
                });
            }
            let theta = required("theta")?;
            let (s, c) = theta.sin_cos();
            linear_builtin(name, DMatrix::from_row_slice(2, 2, &[c, -s, s, c]), false)
        }
        "shear" => {
            params.check_keys(&["g"])?;
            let g = required("g")?;
            let matrix = DMatrix::from_fn(m, m, |i, j| {
                if i == j {
                    1.0
                } else if i >= n && j + n == i {
                    g
                } else {
                    0.0
                }
            });
            linear_builtin(name, matrix, false)
        }
        other => Err(Error::UnknownName(other.to_string())),
    }
}

/// `H̃(ỹ, t) = H(ϱ⁻¹(ỹ), t)` with gradient `J⁻ᵗ ∇H` by the chain rule.
///
/// Points where the inverse fails evaluate to NaN through the [`Hamiltonian`]
/// interface; use [`try_value`](Self::try_value) to get the error instead.
#[derive(Debug, Clone)]
pub struct TransformedHamiltonian<H> {
    inner: H,
    map: CanonicalMap,
    name: String,
}

pub fn transform_hamiltonian<H: Hamiltonian>(h: H, map: CanonicalMap) -> Result<TransformedHamiltonian<H>> {
    if h.dim() != map.dim() {
        return Err(Error::DimensionMismatch {
            expected: h.dim().phase_len(),
            found: map.dim().phase_len(),
        });
    }
    let name = format!("{}@{}", h.name(), map.name());
    Ok(TransformedHamiltonian { inner: h, map, name })
}

impl<H: Hamiltonian> TransformedHamiltonian<H> {
    pub fn map(&self) -> &CanonicalMap {
        &self.map
    }

    pub fn inner(&self) -> &H {
        &self.inner
    }

    pub fn try_value(&self, y: &PhaseVector, t: f64) -> Result<f64> {
        Ok(self.inner.value(&self.map.inverse(y)?, t))
    }

    pub fn try_gradient(&self, y: &PhaseVector, t: f64) -> Result<PhaseVector> {
        let x = self.map.inverse(y)?;
        let g = self.inner.gradient(&x, t);
        let jt = self.map.jacobian(&x)?.transpose();
        jt.lu()
            .solve(&g)
            .ok_or_else(|| Error::InversionFailure(format!("{}: singular Jacobian", self.map.name())))
    }

    pub fn try_time_derivative(&self, y: &PhaseVector, t: f64) -> Result<f64> {
        Ok(self.inner.time_derivative(&self.map.inverse(y)?, t))
    }
}

impl<H: Hamiltonian> Hamiltonian for TransformedHamiltonian<H> {
    fn dim(&self) -> Dimension {
        self.inner.dim()
    }

    fn name(&self) -> &str {
        &self.name
    }

    fn value(&self, y: &PhaseVector, t: f64) -> f64 {
        self.try_value(y, t).unwrap_or(f64::NAN)
    }

    fn gradient(&self, y: &PhaseVector, t: f64) -> PhaseVector {
        self.try_gradient(y, t)
            .unwrap_or_else(|_| PhaseVector::from_element(y.len(), f64::NAN))
    }

    fn time_derivative(&self, y: &PhaseVector, t: f64) -> f64 {
        self.try_time_derivative(y, t).unwrap_or(f64::NAN)
    }

    fn is_separable(&self) -> bool {
        self.map.keeps_separable && self.inner.is_separable()
    }

    fn is_autonomous(&self) -> bool {
        self.inner.is_autonomous()
    }

    fn lower_accuracy(&self) -> bool {
        self.inner.lower_accuracy() || self.map.jacobian.is_none()
    }
}

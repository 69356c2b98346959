//! Hamiltonians and Hamilton's equations in the `(p, q)` ordering:
//! `ṗ = −∂H/∂q`, `q̇ = ∂H/∂p`, i.e. `ẏ = −ζ° ∇H`.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Dimension, PhaseVector};
use crate::group::VelocityForcePower;

/// A (possibly time dependent) Hamiltonian `H(y, t)` on `ℝ²ⁿ × ℝ`.
///
/// Implementations must be pure: the flow Jacobians computed by
/// finite differences rely on bitwise-repeatable evaluation.
pub trait Hamiltonian: Send + Sync {
    fn dim(&self) -> Dimension;

    fn name(&self) -> &str;

    fn value(&self, y: &PhaseVector, t: f64) -> f64;

    /// `(∂H/∂p, ∂H/∂q)`.
    fn gradient(&self, y: &PhaseVector, t: f64) -> PhaseVector;

    /// `∂H/∂t`, the power.
    fn time_derivative(&self, y: &PhaseVector, t: f64) -> f64;

    /// `H = K(p) + V(q, t)`.
    fn is_separable(&self) -> bool {
        false
    }

    fn is_autonomous(&self) -> bool {
        false
    }

    /// True when derivatives come from finite differences instead of
    /// closed forms.
    fn lower_accuracy(&self) -> bool {
        false
    }
}

impl<H: Hamiltonian + ?Sized> Hamiltonian for Arc<H> {
    fn dim(&self) -> Dimension {
        (**self).dim()
    }
    fn name(&self) -> &str {
        (**self).name()
    }
    fn value(&self, y: &PhaseVector, t: f64) -> f64 {
        (**self).value(y, t)
    }
    fn gradient(&self, y: &PhaseVector, t: f64) -> PhaseVector {
        (**self).gradient(y, t)
    }
    fn time_derivative(&self, y: &PhaseVector, t: f64) -> f64 {
        (**self).time_derivative(y, t)
    }
    fn is_separable(&self) -> bool {
        (**self).is_separable()
    }
    fn is_autonomous(&self) -> bool {
        (**self).is_autonomous()
    }
    fn lower_accuracy(&self) -> bool {
        (**self).lower_accuracy()
    }
}

/// Named scalar parameters, parsed from `k=v,k=v`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Params(BTreeMap<String, f64>);

impl Params {
    pub fn new() -> Self {
        Params::default()
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.0.insert(key.to_string(), value);
        self
    }

    pub fn insert(&mut self, key: &str, value: f64) {
        self.0.insert(key.to_string(), value);
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.0.get(key).copied()
    }

    pub fn get_or(&self, key: &str, default: f64) -> f64 {
        self.get(key).unwrap_or(default)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.0.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Parses `k=v,k=v`. An empty string gives no parameters.
    pub fn parse(s: &str) -> Result<Self> {
        let mut params = Params::new();
        for item in s.split(',').map(str::trim).filter(|x| !x.is_empty()) {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| Error::InvalidParams(format!("expected key=value, got `{item}`")))?;
            let value: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::InvalidParams(format!("`{}` is not a number", v.trim())))?;
            params.insert(k.trim(), value);
        }
        Ok(params)
    }

    /// Rejects keys outside `allowed`.
    pub fn check_keys(&self, allowed: &[&str]) -> Result<()> {
        match self.0.keys().find(|k| !allowed.contains(&k.as_str())) {
            Some(k) => Err(Error::InvalidParams(format!(
                "unknown parameter `{k}` (allowed: {})",
                allowed.join(", ")
            ))),
            None => Ok(()),
        }
    }
}

impl fmt::Display for Params {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|(k, v)| format!("{k}={v}")).collect();
        f.write_str(&parts.join(","))
    }
}

/// The Hamiltonians shipped with the library.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CatalogKind {
    /// `p²/2m`
    Free { m: f64 },
    /// `p²/2m + k q²/2`
    Harmonic { m: f64, k: f64 },
    /// `p²/2m − f₀ Σ qᵢ`
    LinearPotential { m: f64, f0: f64 },
    /// `p²/2m + k q²/2 − F₀ cos(ω t) Σ qᵢ`
    DrivenOscillator { m: f64, k: f64, amp: f64, omega: f64 },
    /// `(p − (ε/c) A(q))² / 2m` with `A = (−B q₂/2, B q₁/2)`, `n = 2` only.
    ChargedUniformB { m: f64, b: f64, charge: f64, c: f64 },
}

pub const CATALOG_NAMES: [&str; 5] = [
    "free",
    "harmonic",
    "linear_potential",
    "driven_oscillator",
    "charged_uniform_B",
];

#[derive(Debug, Clone, PartialEq)]
pub struct CatalogHamiltonian {
    name: &'static str,
    dim: Dimension,
    kind: CatalogKind,
    params: Params,
}

/// Builds a catalog Hamiltonian. Missing parameters default to 1.
pub fn catalog(name: &str, dim: Dimension, params: &Params) -> Result<CatalogHamiltonian> {
    let (name, allowed): (&'static str, &[&str]) = match name {
        "free" => ("free", &["m"]),
        "harmonic" => ("harmonic", &["m", "k"]),
        "linear_potential" => ("linear_potential", &["m", "f0"]),
        "driven_oscillator" => ("driven_oscillator", &["m", "k", "amp", "omega"]),
        "charged_uniform_B" => ("charged_uniform_B", &["m", "b", "charge", "c"]),
        other => return Err(Error::UnknownName(other.to_string())),
    };
    params.check_keys(allowed)?;
    let m = params.get_or("m", 1.0);
    if !(m > 0.0) {
        return Err(Error::InvalidParams(format!("mass must be positive, got {m}")));
    }
    let kind = match name {
        "free" => CatalogKind::Free { m },
        "harmonic" => CatalogKind::Harmonic {
            m,
            k: params.get_or("k", 1.0),
        },
        "linear_potential" => CatalogKind::LinearPotential {
            m,
            f0: params.get_or("f0", 1.0),
        },
        "driven_oscillator" => CatalogKind::DrivenOscillator {
            m,
            k: params.get_or("k", 1.0),
            amp: params.get_or("amp", 1.0),
            omega: params.get_or("omega", 1.0),
        },
        _ => {
            if dim.n() != 2 {
                return Err(Error::WrongDimension {
                    name: "charged_uniform_B",
                    required: 2,
                    found: dim.n(),
                });
            }
            let c = params.get_or("c", 1.0);
            if c == 0.0 {
                return Err(Error::InvalidParams("c must be nonzero".into()));
            }
            CatalogKind::ChargedUniformB {
                m,
                b: params.get_or("b", 1.0),
                charge: params.get_or("charge", 1.0),
                c,
            }
        }
    };
    Ok(CatalogHamiltonian {
        name,
        dim,
        kind,
        params: params.clone(),
    })
}

impl CatalogHamiltonian {
    pub fn kind(&self) -> CatalogKind {
        self.kind
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    /// Kinetic momentum `p − (ε/c)A(q)` for the magnetic case, `p` otherwise.
    fn kinetic_momentum(&self, y: &PhaseVector) -> PhaseVector {
        let n = self.dim.n();
        let mut pi = y.rows(0, n).into_owned();
        if let CatalogKind::ChargedUniformB { b, charge, c, .. } = self.kind {
            let (q1, q2) = (y[2], y[3]);
            let a = [-b * q2 / 2.0, b * q1 / 2.0];
            pi[0] -= charge / c * a[0];
            pi[1] -= charge / c * a[1];
        }
        pi
    }
}

impl Hamiltonian for CatalogHamiltonian {
    fn dim(&self) -> Dimension {
        self.dim
    }

    fn name(&self) -> &str {
        self.name
    }

    fn value(&self, y: &PhaseVector, t: f64) -> f64 {
        let n = self.dim.n();
        let q = y.rows(n, n);
        match self.kind {
            CatalogKind::Free { m } => y.rows(0, n).norm_squared() / (2.0 * m),
            CatalogKind::Harmonic { m, k } => {
                y.rows(0, n).norm_squared() / (2.0 * m) + k * q.norm_squared() / 2.0
            }
            CatalogKind::LinearPotential { m, f0 } => {
                y.rows(0, n).norm_squared() / (2.0 * m) - f0 * q.sum()
            }
            CatalogKind::DrivenOscillator { m, k, amp, omega } => {
                y.rows(0, n).norm_squared() / (2.0 * m) + k * q.norm_squared() / 2.0
                    - amp * (omega * t).cos() * q.sum()
            }
            CatalogKind::ChargedUniformB { m, .. } => {
                self.kinetic_momentum(y).norm_squared() / (2.0 * m)
            }
        }
    }

    fn gradient(&self, y: &PhaseVector, t: f64) -> PhaseVector {
        let n = self.dim.n();
        let mut g = DVector::zeros(2 * n);
        let p = y.rows(0, n);
        let q = y.rows(n, n);
        match self.kind {
            CatalogKind::Free { m } => {
                g.rows_mut(0, n).copy_from(&(p / m));
            }
            CatalogKind::Harmonic { m, k } => {
                g.rows_mut(0, n).copy_from(&(p / m));
                g.rows_mut(n, n).copy_from(&(q * k));
            }
            CatalogKind::LinearPotential { m, f0 } => {
                g.rows_mut(0, n).copy_from(&(p / m));
                g.rows_mut(n, n).fill(-f0);
            }
            CatalogKind::DrivenOscillator { m, k, amp, omega } => {
                g.rows_mut(0, n).copy_from(&(p / m));
                let drive = amp * (omega * t).cos();
                g.rows_mut(n, n).copy_from(&q.map(|x| k * x - drive));
            }
            CatalogKind::ChargedUniformB { m, b, charge, c } => {
                let v = self.kinetic_momentum(y) / m;
                let coupling = charge / c * b / 2.0;
                g[0] = v[0];
                g[1] = v[1];
                g[2] = -coupling * v[1];
                g[3] = coupling * v[0];
            }
        }
        g
    }

    fn time_derivative(&self, y: &PhaseVector, t: f64) -> f64 {
        match self.kind {
            CatalogKind::DrivenOscillator { amp, omega, .. } => {
                let n = self.dim.n();
                amp * omega * (omega * t).sin() * y.rows(n, n).sum()
            }
            _ => 0.0,
        }
    }

    fn is_separable(&self) -> bool {
        !matches!(self.kind, CatalogKind::ChargedUniformB { .. })
    }

    fn is_autonomous(&self) -> bool {
        !matches!(self.kind, CatalogKind::DrivenOscillator { .. })
    }
}

type ValueFn = dyn Fn(&PhaseVector, f64) -> f64 + Send + Sync;
type GradFn = dyn Fn(&PhaseVector, f64) -> PhaseVector + Send + Sync;

/// A Hamiltonian built from closures. Missing derivatives are replaced by
/// central differences with step `ε^{1/3} · max(1, |x|)`.
#[derive(Clone)]
pub struct FnHamiltonian {
    name: String,
    dim: Dimension,
    value: Arc<ValueFn>,
    gradient: Option<Arc<GradFn>>,
    time_derivative: Option<Arc<ValueFn>>,
    separable: bool,
    autonomous: bool,
}

impl fmt::Debug for FnHamiltonian {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnHamiltonian")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("analytic_gradient", &self.gradient.is_some())
            .field("analytic_time_derivative", &self.time_derivative.is_some())
            .finish()
    }
}

impl FnHamiltonian {
    pub fn new(
        name: impl Into<String>,
        dim: Dimension,
        value: impl Fn(&PhaseVector, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        FnHamiltonian {
            name: name.into(),
            dim,
            value: Arc::new(value),
            gradient: None,
            time_derivative: None,
            separable: false,
            autonomous: false,
        }
    }

    pub fn with_gradient(
        mut self,
        grad: impl Fn(&PhaseVector, f64) -> PhaseVector + Send + Sync + 'static,
    ) -> Self {
        self.gradient = Some(Arc::new(grad));
        self
    }

    pub fn with_time_derivative(
        mut self,
        dt: impl Fn(&PhaseVector, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.time_derivative = Some(Arc::new(dt));
        self
    }

    pub fn separable(mut self, yes: bool) -> Self {
        self.separable = yes;
        self
    }

    pub fn autonomous(mut self, yes: bool) -> Self {
        self.autonomous = yes;
        self
    }
}

pub(crate) fn fd_step(x: f64) -> f64 {
    f64::EPSILON.cbrt() * x.abs().max(1.0)
}

impl Hamiltonian for FnHamiltonian {
    fn dim(&self) -> Dimension {
        self.dim
    }

    fn name(&self) -> &str {
        &self.name
    }

    fn value(&self, y: &PhaseVector, t: f64) -> f64 {
        (self.value)(y, t)
    }

    fn gradient(&self, y: &PhaseVector, t: f64) -> PhaseVector {
        if let Some(g) = &self.gradient {
            return g(y, t);
        }
        let mut yy = y.clone();
        DVector::from_fn(y.len(), |i, _| {
            let h = fd_step(y[i]);
            yy[i] = y[i] + h;
            let plus = (self.value)(&yy, t);
            yy[i] = y[i] - h;
            let minus = (self.value)(&yy, t);
            yy[i] = y[i];
            (plus - minus) / (2.0 * h)
        })
    }

    fn time_derivative(&self, y: &PhaseVector, t: f64) -> f64 {
        if let Some(d) = &self.time_derivative {
            return d(y, t);
        }
        if self.autonomous {
            return 0.0;
        }
        let h = fd_step(t);
        ((self.value)(y, t + h) - (self.value)(y, t - h)) / (2.0 * h)
    }

    fn is_separable(&self) -> bool {
        self.separable
    }

    fn is_autonomous(&self) -> bool {
        self.autonomous
    }

    fn lower_accuracy(&self) -> bool {
        self.gradient.is_none() || (self.time_derivative.is_none() && !self.autonomous)
    }
}

/// Hamilton's vector field `(−∂H/∂q, ∂H/∂p)`.
pub fn hamilton_rhs<H: Hamiltonian + ?Sized>(h: &H, y: &PhaseVector, t: f64) -> Result<PhaseVector> {
    h.dim().check_phase(y.len())?;
    Ok(rhs_unchecked(h, y, t))
}

pub(crate) fn rhs_unchecked<H: Hamiltonian + ?Sized>(h: &H, y: &PhaseVector, t: f64) -> PhaseVector {
    let g = h.gradient(y, t);
    let n = h.dim().n();
    DVector::from_fn(2 * n, |i, _| if i < n { -g[i + n] } else { g[i - n] })
}

/// `v = ∂H/∂p`, `f = −∂H/∂q`, `r = ∂H/∂t`.
pub fn velocity_force_power<H: Hamiltonian + ?Sized>(
    h: &H,
    y: &PhaseVector,
    t: f64,
) -> Result<VelocityForcePower> {
    h.dim().check_phase(y.len())?;
    let n = h.dim().n();
    let g = h.gradient(y, t);
    Ok(VelocityForcePower {
        v: g.rows(0, n).into_owned(),
        f: -g.rows(n, n).into_owned(),
        r: h.time_derivative(y, t),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dim(n: usize) -> Dimension {
        Dimension::new(n).unwrap()
    }

    fn y(xs: &[f64]) -> PhaseVector {
        DVector::from_row_slice(xs)
    }

    fn all_catalog(n: usize) -> Vec<CatalogHamiltonian> {
        let params = [
            ("free", Params::new().with("m", 1.3)),
            ("harmonic", Params::new().with("m", 0.7).with("k", 2.0)),
            ("linear_potential", Params::new().with("f0", 3.0)),
            (
                "driven_oscillator",
                Params::new().with("amp", 0.8).with("omega", 1.7).with("k", 1.5),
            ),
            (
                "charged_uniform_B",
                Params::new().with("b", 1.3).with("charge", 0.9).with("c", 1.1).with("m", 0.6),
            ),
        ];
        params
            .iter()
            .filter(|(name, _)| n == 2 || *name != "charged_uniform_B")
            .map(|(name, p)| catalog(name, dim(n), p).unwrap())
            .collect()
    }

    #[test]
    fn free_particle_values() {
        let h = catalog("free", dim(1), &Params::new()).unwrap();
        assert_eq!(h.value(&y(&[2.0, 0.0]), 0.0), 2.0);
        assert_eq!(h.gradient(&y(&[2.0, 0.0]), 0.0).as_slice(), &[2.0, 0.0]);
        assert_eq!(hamilton_rhs(&h, &y(&[2.0, 5.0]), 0.0).unwrap().as_slice(), &[0.0, 2.0]);
        let vfp = velocity_force_power(&h, &y(&[2.0, 5.0]), 0.0).unwrap();
        assert_eq!(vfp.f[0], 0.0);
        assert_eq!(vfp.r, 0.0);
    }

    #[test]
    fn harmonic_minimum_and_rhs() {
        let h = catalog("harmonic", dim(1), &Params::new()).unwrap();
        assert_eq!(h.value(&y(&[0.0, 0.0]), 0.0), 0.0);
        assert_eq!(h.gradient(&y(&[0.0, 0.0]), 0.0).as_slice(), &[0.0, 0.0]);
        assert_eq!(hamilton_rhs(&h, &y(&[0.0, 1.0]), 0.0).unwrap().as_slice(), &[-1.0, 0.0]);
    }

    #[test]
    fn linear_potential_force_is_constant() {
        let h = catalog("linear_potential", dim(1), &Params::new().with("f0", 3.0)).unwrap();
        for q in [-2.0, 0.0, 5.5] {
            let vfp = velocity_force_power(&h, &y(&[0.4, q]), 1.0).unwrap();
            assert_eq!(vfp.f[0], 3.0);
        }
    }

    #[test]
    fn driven_oscillator_power() {
        let (amp, omega) = (0.8, 1.7);
        let h = catalog(
            "driven_oscillator",
            dim(1),
            &Params::new().with("amp", amp).with("omega", omega),
        )
        .unwrap();
        assert_eq!(h.time_derivative(&y(&[0.0, 1.0]), 0.0), 0.0);
        let t = std::f64::consts::FRAC_PI_2 / omega;
        assert!((h.time_derivative(&y(&[0.0, 1.0]), t) - amp * omega).abs() < 1e-15);
        assert!(!h.is_autonomous());
        assert!(h.is_separable());
    }

    #[test]
    fn charged_velocity_relation() {
        let (m, b, charge, c) = (0.6, 1.3, 0.9, 1.1);
        let h = catalog(
            "charged_uniform_B",
            dim(2),
            &Params::new().with("m", m).with("b", b).with("charge", charge).with("c", c),
        )
        .unwrap();
        let pt = y(&[0.3, -0.2, 1.5, 0.7]);
        let vfp = velocity_force_power(&h, &pt, 0.0).unwrap();
        let a = [-b * pt[3] / 2.0, b * pt[2] / 2.0];
        for i in 0..2 {
            let expected = pt[i] / m - charge / (m * c) * a[i];
            assert!((vfp.v[i] - expected).abs() < 1e-15);
        }
        assert!(!h.is_separable());
    }

    #[test]
    fn catalog_errors() {
        assert!(matches!(
            catalog("nope", dim(1), &Params::new()),
            Err(Error::UnknownName(_))
        ));
        assert!(matches!(
            catalog("free", dim(1), &Params::new().with("m", 0.0)),
            Err(Error::InvalidParams(_))
        ));
        assert!(matches!(
            catalog("charged_uniform_B", dim(1), &Params::new()),
            Err(Error::WrongDimension { required: 2, .. })
        ));
        assert!(matches!(
            catalog("harmonic", dim(1), &Params::new().with("q", 1.0)),
            Err(Error::InvalidParams(_))
        ));
    }

    #[test]
    fn params_parse() {
        let p = Params::parse("m=2, k=0.5").unwrap();
        assert_eq!(p.get("m"), Some(2.0));
        assert_eq!(p.get("k"), Some(0.5));
        assert!(Params::parse("").unwrap().is_empty());
        assert!(Params::parse("m").is_err());
        assert!(Params::parse("m=x").is_err());
    }

    #[test]
    fn rhs_dimension_mismatch() {
        let h = catalog("free", dim(2), &Params::new()).unwrap();
        assert!(hamilton_rhs(&h, &y(&[1.0, 2.0]), 0.0).is_err());
    }

    #[test]
    fn fn_hamiltonian_falls_back_to_differences() {
        let h = FnHamiltonian::new("quartic", dim(1), |y, t| y[0].powi(2) / 2.0 + y[1].powi(4) * (1.0 + t));
        assert!(h.lower_accuracy());
        let g = h.gradient(&y(&[0.5, 1.2]), 0.3);
        assert!((g[0] - 0.5).abs() < 1e-9);
        assert!((g[1] - 4.0 * 1.2_f64.powi(3) * 1.3).abs() < 1e-8);
        assert!((h.time_derivative(&y(&[0.5, 1.2]), 0.3) - 1.2_f64.powi(4)).abs() < 1e-8);
    }

    proptest! {
        #[test]
        fn analytic_derivatives_match_differences(
            pts in proptest::collection::vec(-2.0f64..2.0, 4),
            t in -3.0f64..3.0,
        ) {
            for n in [1usize, 2] {
                for h in all_catalog(n) {
                    let yv = DVector::from_row_slice(&pts[..2 * n]);
                    let g = h.gradient(&yv, t);
                    let step = 1e-5;
                    let mut yy = yv.clone();
                    for i in 0..2 * n {
                        yy[i] = yv[i] + step;
                        let plus = h.value(&yy, t);
                        yy[i] = yv[i] - step;
                        let minus = h.value(&yy, t);
                        yy[i] = yv[i];
                        let fd = (plus - minus) / (2.0 * step);
                        prop_assert!((fd - g[i]).abs() <= 1e-6 * (1.0 + g[i].abs()),
                            "{} d/dy{}: fd {} analytic {}", h.name(), i, fd, g[i]);
                    }
                    let fd_t = (h.value(&yv, t + step) - h.value(&yv, t - step)) / (2.0 * step);
                    let an_t = h.time_derivative(&yv, t);
                    prop_assert!((fd_t - an_t).abs() <= 1e-6 * (1.0 + an_t.abs()));
                }
            }
        }

        #[test]
        fn rhs_reassembles_force_and_velocity(
            pts in proptest::collection::vec(-2.0f64..2.0, 4),
            t in -3.0f64..3.0,
        ) {
            for h in all_catalog(2) {
                let yv = DVector::from_row_slice(&pts);
                let rhs = hamilton_rhs(&h, &yv, t).unwrap();
                let vfp = velocity_force_power(&h, &yv, t).unwrap();
                prop_assert_eq!(rhs.rows(0, 2).into_owned(), vfp.f);
                prop_assert_eq!(rhs.rows(2, 2).into_owned(), vfp.v);
            }
        }
    }
}

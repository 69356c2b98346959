//! Finite-difference certification of the invariance conditions.
//!
//! A map on extended phase space preserves `ω` and `dt²` iff its Jacobian
//! satisfies `JᵗζJ = ζ` and `Jᵗη°J = η°`, and those together force the
//! `Γ(Σ, w, r)` block structure. The checks here compute `J` numerically,
//! independently of any analytic gradient, and report every residual.
//!
//! Mathematical failures are reported, never returned as errors. Errors mean
//! a map could not be evaluated or an input had the wrong shape.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::algebra::HspAlgebraElement;
use crate::canonical::CanonicalMap;
use crate::dynamics::{rhs_unchecked, velocity_force_power, Hamiltonian};
use crate::error::{Error, Result};
use crate::geometry::{max_abs, Dimension, ExtendedPoint, MetricForms, PhaseVector};
use crate::group::{HspElement, StructureResiduals};
use crate::integrate::{extended_flow_map, flow_map, Integrator, Method, Trajectory};
use crate::report::CheckRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FdScheme {
    /// `(f(x+h) − f(x−h)) / 2h`
    Central2nd,
    /// Five-point stencil.
    Central4th,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JacobianConfig {
    pub h: f64,
    pub scheme: FdScheme,
    /// Scale the step by `max(1, |z_b|)` per coordinate.
    pub per_coordinate_scaling: bool,
}

impl JacobianConfig {
    /// Fourth order at `h = 1e-4`, for Jacobians of integrated flows.
    pub fn flow() -> Self {
        JacobianConfig {
            h: 1e-4,
            scheme: FdScheme::Central4th,
            per_coordinate_scaling: false,
        }
    }

    /// Second order at `h = 1e-6`, exact up to round-off on linear maps.
    pub fn linear() -> Self {
        JacobianConfig {
            h: 1e-6,
            scheme: FdScheme::Central2nd,
            per_coordinate_scaling: false,
        }
    }
}

impl Default for JacobianConfig {
    fn default() -> Self {
        JacobianConfig::flow()
    }
}

/// Column `b` of the result is the central difference of `map` along
/// coordinate `b` at `z`.
pub fn fd_jacobian<F>(map: F, z: &DVector<f64>, cfg: &JacobianConfig) -> Result<DMatrix<f64>>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>>,
{
    if !(cfg.h > 0.0 && cfg.h.is_finite()) {
        return Err(Error::InvalidParams(format!("finite-difference step must be positive, got {}", cfg.h)));
    }
    let cols = z.len();
    let mut probe = z.clone();
    let mut eval = |b: usize, offset: f64| -> Result<DVector<f64>> {
        probe[b] = z[b] + offset;
        let out = map(&probe);
        probe[b] = z[b];
        let out = out?;
        if out.iter().any(|x| !x.is_finite()) {
            return Err(Error::MapEvaluation(format!("non-finite output along coordinate {b}")));
        }
        Ok(out)
    };

    let mut columns = Vec::with_capacity(cols);
    for b in 0..cols {
        let nominal = if cfg.per_coordinate_scaling {
            cfg.h * z[b].abs().max(1.0)
        } else {
            cfg.h
        };
        // a power-of-two step puts every stencil point exactly on the grid
        let h = 2f64.powi(nominal.log2().round() as i32);
        let col = match cfg.scheme {
            FdScheme::Central2nd => (eval(b, h)? - eval(b, -h)?) / (2.0 * h),
            FdScheme::Central4th => {
                let (p1, m1) = (eval(b, h)?, eval(b, -h)?);
                let (p2, m2) = (eval(b, 2.0 * h)?, eval(b, -2.0 * h)?);
                ((p1 - m1) * 8.0 - (p2 - m2)) / (12.0 * h)
            }
        };
        columns.push(col);
    }
    let rows = columns.first().map_or(0, |c| c.len());
    if columns.iter().any(|c| c.len() != rows) {
        return Err(Error::MapEvaluation("map output length varies".into()));
    }
    Ok(DMatrix::from_fn(rows, cols, |i, j| columns[j][i]))
}

/// [`fd_jacobian`] for maps written on [`ExtendedPoint`]s.
pub fn fd_jacobian_extended<F>(map: F, z: &ExtendedPoint, cfg: &JacobianConfig) -> Result<DMatrix<f64>>
where
    F: Fn(&ExtendedPoint) -> Result<ExtendedPoint>,
{
    fd_jacobian(
        |v| Ok(map(&ExtendedPoint::from_vector(v)?)?.to_vector()),
        &z.to_vector(),
        cfg,
    )
}

/// Thresholds for metric invariance and for the block decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub symplectic: f64,
    pub degenerate: f64,
    pub decomposition: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            symplectic: 1e-6,
            degenerate: 1e-8,
            decomposition: 1e-5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport {
    /// `‖JᵗζJ − ζ‖`
    pub symplectic_residual: f64,
    /// `‖Jᵗη°J − η°‖`
    pub degenerate_residual: f64,
    pub decomposition: Option<HspElement>,
    pub block_errors: BTreeMap<String, f64>,
    pub passed: bool,
    pub tolerances: Tolerances,
}

impl VerificationReport {
    fn finish(mut self) -> Self {
        self.passed = self.symplectic_residual <= self.tolerances.symplectic
            && self.degenerate_residual <= self.tolerances.degenerate
            && self.decomposition.is_some()
            && self.block_errors.values().all(|&e| e <= self.tolerances.decomposition);
        self
    }

    pub fn to_record(&self, check: &str, inputs: serde_json::Map<String, serde_json::Value>) -> CheckRecord {
        let mut residuals = BTreeMap::from([
            ("symplectic".to_string(), self.symplectic_residual),
            ("degenerate".to_string(), self.degenerate_residual),
        ]);
        residuals.extend(self.block_errors.iter().map(|(k, v)| (k.clone(), *v)));
        let mut record = CheckRecord::new(check, inputs, self.passed)
            .with_residuals(residuals)
            .with_tolerances([
                ("symplectic", self.tolerances.symplectic),
                ("degenerate", self.tolerances.degenerate),
                ("decomposition", self.tolerances.decomposition),
            ]);
        if let Some(d) = &self.decomposition {
            record.decomposition = serde_json::to_value(d).ok();
        }
        record
    }
}

/// Checks a `(2n+2)`-square Jacobian with the default decomposition
/// threshold.
pub fn verify_jacobian(j: &DMatrix<f64>, tol_sym: f64, tol_deg: f64) -> Result<VerificationReport> {
    verify_jacobian_with(
        j,
        &Tolerances {
            symplectic: tol_sym,
            degenerate: tol_deg,
            ..Tolerances::default()
        },
    )
}

pub fn verify_jacobian_with(j: &DMatrix<f64>, tol: &Tolerances) -> Result<VerificationReport> {
    let dim = Dimension::from_extended_len(j.nrows())?;
    let forms = MetricForms::new(dim);
    let (sym, deg) = forms.extended_invariance_residuals(j)?;
    let blocks = StructureResiduals::of(j)?;
    let block_errors = BTreeMap::from([
        (
            "t_row".to_string(),
            blocks.t_row.max((blocks.time_orientation - 1.0).abs()),
        ),
        ("e_column".to_string(), blocks.e_column),
        ("e_row".to_string(), blocks.e_row),
        ("sigma_symplectic".to_string(), blocks.sigma_symplectic),
    ]);
    Ok(VerificationReport {
        symplectic_residual: sym,
        degenerate_residual: deg,
        decomposition: HspElement::from_matrix(j, tol.decomposition).ok(),
        block_errors,
        passed: false,
        tolerances: *tol,
    }
    .finish())
}

/// Certifies the extended time-`s` flow of `h` at `z0`.
///
/// Besides the checks of [`verify_jacobian_with`], the `Σ` block of the
/// extended Jacobian is compared with the Jacobian of the phase-space flow
/// alone (`sigma_vs_phase_flow`).
pub fn verify_flow_membership<H: Hamiltonian + ?Sized>(
    h: &H,
    z0: &ExtendedPoint,
    s: f64,
    integrator: &Integrator,
    cfg: &JacobianConfig,
    tol: &Tolerances,
) -> Result<VerificationReport> {
    h.dim().check_phase(z0.y.len())?;
    let ext = extended_flow_map(h, s, *integrator)?;
    let j = fd_jacobian_extended(|z| ext.apply(z), z0, cfg)?;
    let mut report = verify_jacobian_with(&j, tol)?;

    let phase = flow_map(h, z0.t, s, *integrator)?;
    let phase_j = fd_jacobian(|y| phase.apply(y), &z0.y, cfg)?;
    let m = h.dim().phase_len();
    let gap = max_abs(&(j.view((0, 0), (m, m)) - &phase_j));
    report.block_errors.insert("sigma_vs_phase_flow".into(), gap);
    Ok(report.finish())
}

/// Default settings for flow verification: implicit midpoint at `dt = 1e-4`.
pub fn verification_integrator() -> Integrator {
    Integrator::new(Method::ImplicitMidpoint, 1e-4)
}

/// Infinitesimal check: the linearization `X` of the extended vector field
/// `(ẏ, ė, ṫ) = (−ζ°∇H, ∂H/∂t, 1)` must lie in the algebra.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorReport {
    pub generator: DMatrix<f64>,
    /// `‖Xᵗζ + ζX‖`
    pub symplectic_residual: f64,
    /// `‖Xᵗη° + η°X‖`
    pub degenerate_residual: f64,
    pub decomposition: Option<HspAlgebraElement>,
    pub tol: f64,
    pub passed: bool,
}

impl GeneratorReport {
    pub fn to_record(&self, check: &str, inputs: serde_json::Map<String, serde_json::Value>) -> CheckRecord {
        CheckRecord::new(check, inputs, self.passed)
            .with_residuals([
                ("symplectic".to_string(), self.symplectic_residual),
                ("degenerate".to_string(), self.degenerate_residual),
            ])
            .with_tolerances([("algebra", self.tol)])
    }
}

pub fn verify_generator<H: Hamiltonian + ?Sized>(h: &H, z: &ExtendedPoint, tol: f64) -> Result<GeneratorReport> {
    let dim = h.dim();
    dim.check_phase(z.y.len())?;
    let field = |v: &DVector<f64>| -> Result<DVector<f64>> {
        let p = ExtendedPoint::from_vector(v)?;
        let ydot = rhs_unchecked(h, &p.y, p.t);
        let edot = h.time_derivative(&p.y, p.t);
        Ok(ExtendedPoint::new(ydot, edot, 1.0).to_vector())
    };
    let cfg = JacobianConfig {
        h: 1e-4,
        scheme: FdScheme::Central4th,
        per_coordinate_scaling: true,
    };
    let x = fd_jacobian(field, &z.to_vector(), &cfg)?;
    let (sym, deg) = MetricForms::new(dim).algebra_residuals(&x)?;
    let decomposition = HspAlgebraElement::from_realization(&x, tol).ok();
    let passed = sym <= tol && deg <= tol && decomposition.is_some();
    Ok(GeneratorReport {
        generator: x,
        symplectic_residual: sym,
        degenerate_residual: deg,
        decomposition,
        tol,
        passed,
    })
}

/// Round-trip threshold for `ϱ⁻¹ ∘ ϱ` in [`verify_canonical_map`].
pub const ROUND_TRIP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalMapReport {
    pub points: usize,
    pub max_symplectic_residual: f64,
    pub max_round_trip_error: f64,
    pub tol: f64,
    pub passed: bool,
}

impl CanonicalMapReport {
    pub fn to_record(&self, check: &str, inputs: serde_json::Map<String, serde_json::Value>) -> CheckRecord {
        CheckRecord::new(check, inputs, self.passed)
            .with_residuals([
                ("symplectic".to_string(), self.max_symplectic_residual),
                ("round_trip".to_string(), self.max_round_trip_error),
            ])
            .with_tolerances([("symplectic", self.tol), ("round_trip", ROUND_TRIP_TOL)])
    }
}

/// Checks that the map's Jacobian is symplectic at every sample point and
/// that the inverse undoes the forward map.
pub fn verify_canonical_map(map: &CanonicalMap, points: &[PhaseVector], tol: f64) -> Result<CanonicalMapReport> {
    let forms = MetricForms::new(map.dim());
    let mut sym = 0.0_f64;
    let mut round_trip = 0.0_f64;
    for y in points {
        let j = map.jacobian(y)?;
        sym = sym.max(forms.symplectic_residual(&j)?);
        let err = match map.inverse(&map.forward(y)?) {
            Ok(back) => max_abs(&(back - y)),
            Err(_) => f64::INFINITY,
        };
        round_trip = round_trip.max(err);
    }
    Ok(CanonicalMapReport {
        points: points.len(),
        max_symplectic_residual: sym,
        max_round_trip_error: round_trip,
        tol,
        passed: sym <= tol && round_trip <= ROUND_TRIP_TOL,
    })
}

/// Trapezoidal energy bookkeeping along a trajectory:
/// `A = ∫v·dp`, `B = −∫f·dq`, `C = ∫r dt`, against `ΔH`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyAudit {
    pub kinetic: f64,
    pub work: f64,
    pub power: f64,
    pub delta_h: f64,
    /// `|A + B + C − ΔH|`
    pub residual: f64,
    pub tol: f64,
    pub passed: bool,
}

impl EnergyAudit {
    pub fn to_record(&self, check: &str, inputs: serde_json::Map<String, serde_json::Value>) -> CheckRecord {
        CheckRecord::new(check, inputs, self.passed)
            .with_residuals([("bookkeeping".to_string(), self.residual)])
            .with_tolerances([("bookkeeping", self.tol)])
    }
}

pub fn energy_audit<H: Hamiltonian + ?Sized>(h: &H, traj: &Trajectory, tol: f64) -> Result<EnergyAudit> {
    if traj.len() < 2 {
        return Err(Error::TooFewSamples(traj.len()));
    }
    let n = h.dim().n();
    let terms = traj
        .samples
        .iter()
        .map(|s| velocity_force_power(h, &s.y, s.t))
        .collect::<Result<Vec<_>>>()?;

    let (mut kinetic, mut work, mut power) = (0.0, 0.0, 0.0);
    for (k, pair) in traj.samples.windows(2).enumerate() {
        let (a, b) = (&pair[0], &pair[1]);
        let (ta, tb) = (&terms[k], &terms[k + 1]);
        let dp = b.y.rows(0, n) - a.y.rows(0, n);
        let dq = b.y.rows(n, n) - a.y.rows(n, n);
        kinetic += 0.5 * (&ta.v + &tb.v).dot(&dp);
        work -= 0.5 * (&ta.f + &tb.f).dot(&dq);
        power += 0.5 * (ta.r + tb.r) * (b.t - a.t);
    }
    let (first, last) = (traj.first(), traj.last());
    let delta_h = h.value(&last.y, last.t) - h.value(&first.y, first.t);
    let residual = (kinetic + work + power - delta_h).abs();
    Ok(EnergyAudit {
        kinetic,
        work,
        power,
        delta_h,
        residual,
        tol,
        passed: residual <= tol,
    })
}

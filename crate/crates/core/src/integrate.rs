//! Fixed-step integration of the extended flow
//!
//! ```text
//! ẏ = −ζ°∇H(y, t),   ė = ∂H/∂t,   ṫ = 1
//! ```
//!
//! Implicit midpoint and Störmer-Verlet are symplectic for the extended form
//! `ζ`; RK4 is kept as a non-structure-preserving baseline.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dynamics::{fd_step, rhs_unchecked, Hamiltonian};
use crate::error::{Error, Result};
use crate::geometry::{max_abs, ExtendedPoint, PhaseVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ImplicitMidpoint,
    StormerVerlet,
    Rk4,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::ImplicitMidpoint, Method::StormerVerlet, Method::Rk4];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::ImplicitMidpoint => "implicit_midpoint",
            Method::StormerVerlet => "stormer_verlet",
            Method::Rk4 => "rk4",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::UnknownName(s.to_string()))
    }
}

/// Step size, method, and implicit-solver controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integrator {
    pub method: Method,
    /// Requested step; the actual step is shortened so that it divides the
    /// interval evenly.
    pub dt: f64,
    /// Implicit solver stops once the update is below `tol · max(1, |y|)`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Integrator {
    pub fn new(method: Method, dt: f64) -> Self {
        Integrator {
            method,
            dt,
            tol: 1e-13,
            max_iter: 50,
        }
    }

    fn validate<H: Hamiltonian + ?Sized>(&self, h: &H) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidInterval(format!("dt must be positive, got {}", self.dt)));
        }
        if self.method == Method::StormerVerlet && !h.is_separable() {
            return Err(Error::NonseparableForVerlet(h.name().to_string()));
        }
        Ok(())
    }

    /// Number of uniform steps covering `span`.
    pub fn steps_for(&self, span: f64) -> usize {
        if span == 0.0 {
            return 0;
        }
        let raw = span / self.dt;
        // tolerate round-off when span is an exact multiple of dt
        let k = (raw - 1e-9 * raw.max(1.0)).ceil();
        (k as usize).max(1)
    }

    /// Advances `z` by one step of size `dt`.
    pub fn step<H: Hamiltonian + ?Sized>(&self, h: &H, z: &ExtendedPoint, dt: f64) -> Result<ExtendedPoint> {
        let next = match self.method {
            Method::ImplicitMidpoint => self.midpoint_step(h, z, dt)?,
            Method::StormerVerlet => verlet_step(h, z, dt),
            Method::Rk4 => rk4_step(h, z, dt),
        };
        if next.y.iter().any(|x| !x.is_finite()) || !next.e.is_finite() {
            return Err(Error::MapEvaluation(format!(
                "state became non-finite at t = {}",
                next.t
            )));
        }
        Ok(next)
    }

    fn midpoint_step<H: Hamiltonian + ?Sized>(
        &self,
        h: &H,
        z: &ExtendedPoint,
        dt: f64,
    ) -> Result<ExtendedPoint> {
        let tm = z.t + 0.5 * dt;
        let y0 = &z.y;
        let field = |y1: &PhaseVector| -> PhaseVector {
            let mid = (y0 + y1) * 0.5;
            y0 + rhs_unchecked(h, &mid, tm) * dt
        };

        let mut y1 = y0 + rhs_unchecked(h, y0, z.t) * dt;
        let mut prev = f64::INFINITY;
        let mut residual = f64::INFINITY;
        let mut newton = false;
        let mut converged = false;
        for _ in 0..self.max_iter {
            let next = if newton {
                self.newton_update(h, y0, &y1, tm, dt, &field)?
            } else {
                field(&y1)
            };
            residual = max_abs(&(&next - &y1));
            y1 = next;
            if residual <= self.tol * max_abs(&y1).max(1.0) {
                converged = true;
                break;
            }
            // contraction stalled: less than 10% reduction
            if !newton && residual > 0.9 * prev {
                newton = true;
            }
            prev = residual;
        }
        if !converged {
            return Err(Error::NoConvergence {
                iterations: self.max_iter,
                residual,
            });
        }
        let mid = (y0 + &y1) * 0.5;
        let e1 = z.e + dt * h.time_derivative(&mid, tm);
        Ok(ExtendedPoint::new(y1, e1, z.t + dt))
    }

    /// One Newton step on `G(Y) = Y − y₀ − dt·F((y₀ + Y)/2)`.
    fn newton_update<H: Hamiltonian + ?Sized>(
        &self,
        h: &H,
        y0: &PhaseVector,
        y1: &PhaseVector,
        tm: f64,
        dt: f64,
        field: &impl Fn(&PhaseVector) -> PhaseVector,
    ) -> Result<PhaseVector> {
        let m = y0.len();
        let mid = (y0 + y1) * 0.5;
        let mut jac = DMatrix::identity(m, m);
        let mut probe = mid.clone();
        for j in 0..m {
            let step = fd_step(mid[j]);
            probe[j] = mid[j] + step;
            let plus = rhs_unchecked(h, &probe, tm);
            probe[j] = mid[j] - step;
            let minus = rhs_unchecked(h, &probe, tm);
            probe[j] = mid[j];
            let col = (plus - minus) * (0.5 * dt / (2.0 * step));
            let mut target = jac.column_mut(j);
            target -= col;
        }
        let g = y1 - field(y1);
        let delta = jac.lu().solve(&g).ok_or(Error::NoConvergence {
            iterations: 0,
            residual: f64::NAN,
        })?;
        Ok(y1 - delta)
    }

    /// Integrates from `z0` over a time span `s ≥ 0`, returning every sample.
    pub fn trajectory<H: Hamiltonian + ?Sized>(
        &self,
        h: &H,
        z0: &ExtendedPoint,
        s: f64,
    ) -> Result<Trajectory> {
        self.validate(h)?;
        h.dim().check_phase(z0.y.len())?;
        if !(s >= 0.0 && s.is_finite()) {
            return Err(Error::InvalidInterval(format!("span must be non-negative, got {s}")));
        }
        let steps = self.steps_for(s);
        let dt = if steps == 0 { self.dt } else { s / steps as f64 };
        let mut samples = Vec::with_capacity(steps + 1);
        samples.push(Sample {
            t: z0.t,
            y: z0.y.clone(),
            e: z0.e,
        });
        let mut z = z0.clone();
        for k in 1..=steps {
            z = self.step(h, &z, dt)?;
            // sample times are laid out on the grid, not accumulated
            z.t = z0.t + k as f64 * dt;
            samples.push(Sample {
                t: z.t,
                y: z.y.clone(),
                e: z.e,
            });
        }
        Ok(Trajectory {
            samples,
            method: self.method,
            dt,
        })
    }

    /// End point of the flow over span `s`.
    pub fn advance<H: Hamiltonian + ?Sized>(&self, h: &H, z0: &ExtendedPoint, s: f64) -> Result<ExtendedPoint> {
        self.validate(h)?;
        h.dim().check_phase(z0.y.len())?;
        if !(s >= 0.0 && s.is_finite()) {
            return Err(Error::InvalidInterval(format!("span must be non-negative, got {s}")));
        }
        let steps = self.steps_for(s);
        if steps == 0 {
            return Ok(z0.clone());
        }
        let dt = s / steps as f64;
        let mut z = z0.clone();
        for k in 1..=steps {
            z = self.step(h, &z, dt)?;
            z.t = z0.t + k as f64 * dt;
        }
        Ok(z)
    }
}

/// Strang splitting `B(dt/2) A(dt) B(dt/2)` with
/// `A: q̇ = ∂K/∂p, ṫ = 1` and `B: ṗ = −∂V/∂q, ė = ∂V/∂t` at frozen `(q, t)`.
fn verlet_step<H: Hamiltonian + ?Sized>(h: &H, z: &ExtendedPoint, dt: f64) -> ExtendedPoint {
    let n = h.dim().n();
    let mut y = z.y.clone();
    let mut e = z.e;

    let kick = |y: &mut PhaseVector, e: &mut f64, t: f64, tau: f64| {
        let g = h.gradient(y, t);
        *e += tau * h.time_derivative(y, t);
        for i in 0..n {
            y[i] -= tau * g[n + i];
        }
    };

    kick(&mut y, &mut e, z.t, 0.5 * dt);
    let g = h.gradient(&y, z.t);
    for i in 0..n {
        y[n + i] += dt * g[i];
    }
    let t1 = z.t + dt;
    kick(&mut y, &mut e, t1, 0.5 * dt);
    ExtendedPoint::new(y, e, t1)
}

fn rk4_step<H: Hamiltonian + ?Sized>(h: &H, z: &ExtendedPoint, dt: f64) -> ExtendedPoint {
    let f = |y: &PhaseVector, t: f64| -> (PhaseVector, f64) {
        (rhs_unchecked(h, y, t), h.time_derivative(y, t))
    };
    let (t, y) = (z.t, &z.y);
    let (k1, r1) = f(y, t);
    let (k2, r2) = f(&(y + &k1 * (0.5 * dt)), t + 0.5 * dt);
    let (k3, r3) = f(&(y + &k2 * (0.5 * dt)), t + 0.5 * dt);
    let (k4, r4) = f(&(y + &k3 * dt), t + dt);
    let y1 = y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
    let e1 = z.e + (r1 + 2.0 * r2 + 2.0 * r3 + r4) * (dt / 6.0);
    ExtendedPoint::new(y1, e1, t + dt)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub y: PhaseVector,
    pub e: f64,
}

/// Uniformly spaced samples of `(t, y, e)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub method: Method,
    pub dt: f64,
}

impl Trajectory {
    pub fn first(&self) -> &Sample {
        &self.samples[0]
    }

    pub fn last(&self) -> &Sample {
        self.samples.last().expect("trajectory is never empty")
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Integrates Hamilton's equations on `[t0, t1]`, starting with `e = 0`.
pub fn integrate<H: Hamiltonian + ?Sized>(
    h: &H,
    y0: &PhaseVector,
    t0: f64,
    t1: f64,
    integrator: &Integrator,
) -> Result<Trajectory> {
    if !(t1 > t0) {
        return Err(Error::InvalidInterval(format!("need t1 > t0, got [{t0}, {t1}]")));
    }
    integrator.trajectory(h, &ExtendedPoint::new(y0.clone(), 0.0, t0), t1 - t0)
}

/// Time-`s` flow `y ↦ φ_{t0 → t0+s}(y)` on phase space.
pub struct FlowMap<'a, H: Hamiltonian + ?Sized> {
    h: &'a H,
    t0: f64,
    s: f64,
    integrator: Integrator,
}

pub fn flow_map<'a, H: Hamiltonian + ?Sized>(
    h: &'a H,
    t0: f64,
    s: f64,
    integrator: Integrator,
) -> Result<FlowMap<'a, H>> {
    integrator.validate(h)?;
    if !(s >= 0.0) {
        return Err(Error::InvalidInterval(format!("span must be non-negative, got {s}")));
    }
    Ok(FlowMap { h, t0, s, integrator })
}

impl<H: Hamiltonian + ?Sized> FlowMap<'_, H> {
    pub fn apply(&self, y: &PhaseVector) -> Result<PhaseVector> {
        let z = ExtendedPoint::new(y.clone(), 0.0, self.t0);
        Ok(self.integrator.advance(self.h, &z, self.s)?.y)
    }

    pub fn span(&self) -> f64 {
        self.s
    }
}

/// Time-`s` map of the extended flow,
/// `(y, e, t) ↦ (φ_{t→t+s}(y), e + ∫ₜ^{t+s} ∂H/∂t dt′, t + s)`.
/// The start time is read from the point, so the map depends on `t`.
pub struct ExtendedFlowMap<'a, H: Hamiltonian + ?Sized> {
    h: &'a H,
    s: f64,
    integrator: Integrator,
}

pub fn extended_flow_map<'a, H: Hamiltonian + ?Sized>(
    h: &'a H,
    s: f64,
    integrator: Integrator,
) -> Result<ExtendedFlowMap<'a, H>> {
    integrator.validate(h)?;
    if !(s >= 0.0) {
        return Err(Error::InvalidInterval(format!("span must be non-negative, got {s}")));
    }
    Ok(ExtendedFlowMap { h, s, integrator })
}

impl<H: Hamiltonian + ?Sized> ExtendedFlowMap<'_, H> {
    pub fn apply(&self, z: &ExtendedPoint) -> Result<ExtendedPoint> {
        let mut out = self.integrator.advance(self.h, z, self.s)?;
        // exact time translation, independent of the step grid
        out.t = z.t + self.s;
        Ok(out)
    }

    pub fn apply_vector(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.apply(&ExtendedPoint::from_vector(z)?)?.to_vector())
    }

    pub fn span(&self) -> f64 {
        self.s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{catalog, FnHamiltonian, Params};
    use crate::geometry::Dimension;

    fn dim(n: usize) -> Dimension {
        Dimension::new(n).unwrap()
    }

    fn y(xs: &[f64]) -> PhaseVector {
        DVector::from_row_slice(xs)
    }

    #[test]
    fn midpoint_harmonic_matches_closed_form() {
        let h = catalog("harmonic", dim(1), &Params::new()).unwrap();
        let traj = integrate(&h, &y(&[0.0, 1.0]), 0.0, 10.0, &Integrator::new(Method::ImplicitMidpoint, 1e-3)).unwrap();
        assert_eq!(traj.len(), 10001);
        let worst = traj
            .samples
            .iter()
            .map(|s| (s.y[1] - s.t.cos()).abs().max((s.y[0] + s.t.sin()).abs()))
            .fold(0.0, f64::max);
        assert!(worst <= 1e-4, "{worst}");
        assert_eq!(traj.first().t, 0.0);
        assert_eq!(traj.last().t, 10.0);
    }

    #[test]
    fn free_particle_exact_for_every_method() {
        let h = catalog("free", dim(2), &Params::new().with("m", 2.0)).unwrap();
        let y0 = y(&[1.0, -0.5, 0.25, 3.0]);
        for method in Method::ALL {
            let traj = integrate(&h, &y0, 0.0, 2.0, &Integrator::new(method, 0.1)).unwrap();
            let end = &traj.last().y;
            let expected = y(&[1.0, -0.5, 0.25 + 1.0, 3.0 - 0.5]);
            assert!(max_abs(&(end - expected)) < 1e-13, "{method}");
            assert_eq!(traj.last().e, 0.0);
        }
    }

    #[test]
    fn verlet_rejects_nonseparable() {
        let h = catalog("charged_uniform_B", dim(2), &Params::new()).unwrap();
        let err = integrate(&h, &y(&[1.0, 0.0, 0.0, 0.0]), 0.0, 1.0, &Integrator::new(Method::StormerVerlet, 0.1));
        assert!(matches!(err, Err(Error::NonseparableForVerlet(_))));
    }

    #[test]
    fn invalid_intervals() {
        let h = catalog("free", dim(1), &Params::new()).unwrap();
        let int = Integrator::new(Method::Rk4, 0.1);
        assert!(integrate(&h, &y(&[0.0, 0.0]), 1.0, 1.0, &int).is_err());
        assert!(integrate(&h, &y(&[0.0, 0.0]), 0.0, 1.0, &Integrator::new(Method::Rk4, 0.0)).is_err());
    }

    #[test]
    fn uneven_span_uses_shortened_uniform_step() {
        let h = catalog("free", dim(1), &Params::new()).unwrap();
        let traj = integrate(&h, &y(&[1.0, 0.0]), 0.0, 1.05, &Integrator::new(Method::Rk4, 0.1)).unwrap();
        assert_eq!(traj.len(), 12);
        assert!((traj.dt - 1.05 / 11.0).abs() < 1e-15);
        for w in traj.samples.windows(2) {
            assert!(w[1].t > w[0].t);
        }
    }

    #[test]
    fn zero_span_flow_is_identity() {
        let h = catalog("harmonic", dim(1), &Params::new()).unwrap();
        let map = flow_map(&h, 0.0, 0.0, Integrator::new(Method::ImplicitMidpoint, 1e-3)).unwrap();
        let p = y(&[0.3, -0.4]);
        assert_eq!(map.apply(&p).unwrap(), p);
        let ext = extended_flow_map(&h, 0.0, Integrator::new(Method::ImplicitMidpoint, 1e-3)).unwrap();
        let z = ExtendedPoint::new(p, 1.5, 2.0);
        assert_eq!(ext.apply(&z).unwrap(), z);
    }

    #[test]
    fn flow_is_deterministic() {
        let h = catalog("charged_uniform_B", dim(2), &Params::new()).unwrap();
        let map = flow_map(&h, 0.0, 0.7, Integrator::new(Method::ImplicitMidpoint, 1e-3)).unwrap();
        let p = y(&[0.3, -0.4, 1.0, 2.0]);
        let a = map.apply(&p).unwrap();
        let b = map.apply(&p).unwrap();
        assert_eq!(a.as_slice(), b.as_slice());
    }

    #[test]
    fn harmonic_flow_is_a_rotation() {
        let h = catalog("harmonic", dim(1), &Params::new()).unwrap();
        let s = 1.3_f64;
        let map = flow_map(&h, 0.0, s, Integrator::new(Method::ImplicitMidpoint, 1e-4)).unwrap();
        for p in [y(&[1.0, 0.0]), y(&[0.0, 1.0]), y(&[0.4, -0.7])] {
            let out = map.apply(&p).unwrap();
            let expected = y(&[s.cos() * p[0] - s.sin() * p[1], s.sin() * p[0] + s.cos() * p[1]]);
            assert!(max_abs(&(out - expected)) < 1e-8);
        }
    }

    #[test]
    fn flow_semigroup() {
        let h = catalog("harmonic", dim(1), &Params::new().with("k", 2.0)).unwrap();
        let int = Integrator::new(Method::ImplicitMidpoint, 1e-3);
        let a = flow_map(&h, 0.0, 0.4, int).unwrap();
        let b = flow_map(&h, 0.0, 0.6, int).unwrap();
        let ab = flow_map(&h, 0.0, 1.0, int).unwrap();
        let p = y(&[0.5, 0.8]);
        let composed = a.apply(&b.apply(&p).unwrap()).unwrap();
        let direct = ab.apply(&p).unwrap();
        // both routes hit the same grid, so only solver noise separates them
        assert!(max_abs(&(composed - direct)) < 1e-11);
    }

    #[test]
    fn autonomous_energy_channel_is_constant() {
        let h = catalog("harmonic", dim(1), &Params::new()).unwrap();
        let ext = extended_flow_map(&h, 2.0, Integrator::new(Method::ImplicitMidpoint, 1e-2)).unwrap();
        let z = ExtendedPoint::new(y(&[0.2, 0.9]), 3.5, 1.0);
        let out = ext.apply(&z).unwrap();
        assert_eq!(out.e, 3.5);
        assert_eq!(out.t, 3.0);
    }

    #[test]
    fn driven_energy_channel_tracks_hamiltonian() {
        let h = catalog("driven_oscillator", dim(1), &Params::new().with("amp", 0.5).with("omega", 2.0)).unwrap();
        for method in Method::ALL {
            let ext = extended_flow_map(&h, 3.0, Integrator::new(method, 1e-3)).unwrap();
            let z = ExtendedPoint::new(y(&[0.2, 0.9]), 0.0, 0.3);
            let out = ext.apply(&z).unwrap();
            let dh = h.value(&out.y, out.t) - h.value(&z.y, z.t);
            assert!((out.e - dh).abs() < 1e-5, "{method}: {} vs {dh}", out.e);
        }
    }

    #[test]
    fn midpoint_conserves_quadratic_energy() {
        let h = catalog("harmonic", dim(1), &Params::new()).unwrap();
        let traj = integrate(&h, &y(&[0.0, 1.0]), 0.0, 100.0, &Integrator::new(Method::ImplicitMidpoint, 0.01)).unwrap();
        assert_eq!(traj.len(), 10001);
        let e0 = h.value(&traj.first().y, 0.0);
        let drift = traj
            .samples
            .iter()
            .map(|s| (h.value(&s.y, 0.0) - e0).abs())
            .fold(0.0, f64::max);
        assert!(drift <= 1e-8, "{drift}");
    }

    #[test]
    fn newton_fallback_handles_stiff_step() {
        // fixed-point iteration diverges when dt·|∂F| > 2; Newton must take over
        let h = catalog("harmonic", dim(1), &Params::new().with("k", 400.0)).unwrap();
        let z = ExtendedPoint::new(y(&[0.0, 1.0]), 0.0, 0.0);
        let int = Integrator::new(Method::ImplicitMidpoint, 0.2);
        let out = int.step(&h, &z, 0.2).unwrap();
        // midpoint preserves the quadratic energy exactly
        let e0 = h.value(&z.y, 0.0);
        assert!((h.value(&out.y, 0.0) - e0).abs() < 1e-9 * e0);
    }

    #[test]
    fn no_convergence_is_reported() {
        let h = FnHamiltonian::new("blowup", dim(1), |y, _| (y[1] * 50.0).exp() + y[0] * y[0] / 2.0);
        let mut int = Integrator::new(Method::ImplicitMidpoint, 1.0);
        int.max_iter = 3;
        let z = ExtendedPoint::new(y(&[0.0, 1.0]), 0.0, 0.0);
        assert!(int.step(&h, &z, 1.0).is_err());
    }
}

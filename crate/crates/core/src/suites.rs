//! Runnable check suites shared by the command-line tool and the tests.
//!
//! Everything that ends up in a report is computed here. Callers only format.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::algebra::random_element_from;
use crate::canonical::{transform_hamiltonian, CanonicalMap};
use crate::dynamics::{velocity_force_power, CatalogHamiltonian, CatalogKind, Hamiltonian};
use crate::error::{Error, Result};
use crate::geometry::{max_abs, Dimension, ExtendedPoint, MetricForms, PhaseVector};
use crate::group::{HspElement, StructureResiduals, VelocityForcePower};
use crate::integrate::{integrate, Integrator, Trajectory};
use crate::report::CheckRecord;
use crate::verify::{
    energy_audit, verify_canonical_map, verify_flow_membership, verify_generator, EnergyAudit, JacobianConfig,
    Tolerances,
};

/// Group-law residual threshold (closure, associativity, identity, inverse).
pub const GROUP_LAW_TOL: f64 = 1e-11;
/// Threshold for `ΓᵗζΓ = ζ` and `Γᵗη°Γ = η°` on generated elements.
pub const METRIC_TOL: f64 = 1e-12;
/// Threshold for the `Σ` part of a conjugated Weyl-Heisenberg element.
pub const NORMALITY_SIGMA_TOL: f64 = 1e-12;
/// Threshold for conjugation against its closed form.
pub const NORMALITY_TOL: f64 = 1e-11;
/// Threshold for the linearized-flow algebra check.
pub const GENERATOR_TOL: f64 = 1e-8;

/// Runs `f` on a pool of `jobs` worker threads.
pub fn with_jobs<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidParams(format!("cannot start {jobs} workers: {e}")))?;
    Ok(pool.install(f))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteResult {
    pub name: String,
    pub samples: usize,
    pub max_residual: f64,
    pub tol: f64,
    pub passed: bool,
}

impl SuiteResult {
    fn new(name: &str, samples: usize, max_residual: f64, tol: f64) -> Self {
        SuiteResult {
            name: name.to_string(),
            samples,
            max_residual,
            tol,
            passed: max_residual <= tol,
        }
    }

    pub fn to_record(&self, inputs: Map<String, Value>) -> CheckRecord {
        CheckRecord::new(&self.name, inputs, self.passed)
            .with_residuals([("max", self.max_residual)])
            .with_tolerances([("max", self.tol)])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupCheckConfig {
    pub dim: Dimension,
    pub seed: u64,
    pub samples: usize,
    /// Fault injection: added to entry `(0, 0)` of every generated element.
    pub perturb: Option<f64>,
    pub jobs: usize,
    /// Coordinate range of the random algebra elements that are exponentiated.
    pub scale: f64,
}

impl GroupCheckConfig {
    pub fn new(dim: Dimension, seed: u64, samples: usize) -> Self {
        GroupCheckConfig {
            dim,
            seed,
            samples,
            perturb: None,
            jobs: 1,
            scale: 1.0,
        }
    }
}

const GROUP_SUITES: [(&str, f64); 7] = [
    ("closure", GROUP_LAW_TOL),
    ("associativity", GROUP_LAW_TOL),
    ("identity", GROUP_LAW_TOL),
    ("inverse", GROUP_LAW_TOL),
    ("normality_sigma", NORMALITY_SIGMA_TOL),
    ("normality_closed_form", NORMALITY_TOL),
    ("metric_invariance", METRIC_TOL),
];

struct GroupSample {
    a: HspElement,
    b: HspElement,
    c: HspElement,
    heis: HspElement,
}

/// Property suites over seeded random elements. Samples are drawn
/// sequentially from one ChaCha8 stream and checked in parallel; the result
/// does not depend on `jobs`.
pub fn group_check(cfg: &GroupCheckConfig) -> Result<Vec<SuiteResult>> {
    if cfg.samples == 0 {
        return Err(Error::InvalidParams("need at least one sample".into()));
    }
    let dim = cfg.dim;
    let m = dim.phase_len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let draw = |rng: &mut ChaCha8Rng| {
        let g = random_element_from(dim, rng, cfg.scale);
        match cfg.perturb {
            Some(delta) => {
                let mut sigma = g.sigma().clone();
                sigma[(0, 0)] += delta;
                HspElement::from_parts_unchecked(dim, sigma, g.w().clone(), g.r())
            }
            None => g,
        }
    };
    let samples: Vec<GroupSample> = (0..cfg.samples)
        .map(|_| {
            let (a, b, c) = (draw(&mut rng), draw(&mut rng), draw(&mut rng));
            let w = DVector::from_fn(m, |_, _| rng.random_range(-cfg.scale..=cfg.scale));
            let r = rng.random_range(-cfg.scale..=cfg.scale);
            let heis = HspElement::heisenberg_wr(w, r).expect("length 2n");
            GroupSample { a, b, c, heis }
        })
        .collect();

    let forms = MetricForms::new(dim);
    let identity = HspElement::identity(dim);
    let per_sample = |s: &GroupSample| -> Result<[f64; 7]> {
        let (am, bm) = (s.a.to_matrix(), s.b.to_matrix());
        let ab = s.a.compose(&s.b)?;
        let product = &am * &bm;
        let closure = max_abs(&(ab.to_matrix() - &product)).max(StructureResiduals::of(&product)?.max());

        let assoc = ab.compose(&s.c)?.max_field_diff(&s.a.compose(&s.b.compose(&s.c)?)?);
        let ident = identity
            .compose(&s.a)?
            .max_field_diff(&s.a)
            .max(s.a.compose(&identity)?.max_field_diff(&s.a));
        let inv = s.a.inverse();
        let inverse = s
            .a
            .compose(&inv)?
            .max_field_diff(&identity)
            .max(inv.compose(&s.a)?.max_field_diff(&identity));

        let conj = s.a.conjugate(&s.heis)?;
        let sigma_defect = conj.heisenberg_defect();
        let closed = conjugation_closed_form(&s.a, &s.heis);
        let closed_gap = max_abs(&(conj.w() - closed.w())).max((conj.r() - closed.r()).abs());

        let (sym, deg) = forms.extended_invariance_residuals(&am)?;
        Ok([closure, assoc, ident, inverse, sigma_defect, closed_gap, sym.max(deg)])
    };
    let rows: Vec<[f64; 7]> = with_jobs(cfg.jobs, || samples.par_iter().map(per_sample).collect::<Result<Vec<_>>>())??;

    Ok(GROUP_SUITES
        .iter()
        .enumerate()
        .map(|(k, (name, tol))| {
            let worst = rows.iter().map(|r| r[k]).fold(0.0, nan_max);
            SuiteResult::new(name, rows.len(), worst, *tol)
        })
        .collect())
}

fn nan_max(acc: f64, x: f64) -> f64 {
    if x.is_nan() || acc.is_nan() {
        f64::NAN
    } else {
        acc.max(x)
    }
}

/// `Γ(Σ′, w′, r′) · Υ(w, r) · Γ(Σ′, w′, r′)⁻¹ = Υ(Σ′w, r + (Σ′w)ᵗζ°w′ − w′ᵗζ°Σ′w)`.
pub fn conjugation_closed_form(g: &HspElement, heis: &HspElement) -> HspElement {
    let forms = MetricForms::new(g.dim());
    let zeta0 = forms.zeta0();
    let moved = g.sigma() * heis.w();
    let r = heis.r() + moved.dot(&(zeta0 * g.w())) - g.w().dot(&(zeta0 * &moved));
    HspElement::heisenberg_wr(moved, r).expect("length 2n")
}

/// `w` and `r` of one composition order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositionFields {
    pub w: Vec<f64>,
    pub r: f64,
}

impl From<&HspElement> for CompositionFields {
    fn from(g: &HspElement) -> Self {
        CompositionFields {
            w: g.w().iter().copied().collect(),
            r: g.r(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub force_scale: f64,
    pub velocity_scale: f64,
    pub discrepancy: f64,
    /// `force_scale · velocity_scale ·` the unscaled discrepancy.
    pub bilinear_reference: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoncommuteReport {
    pub f: Vec<f64>,
    pub v: Vec<f64>,
    pub force_then_boost: CompositionFields,
    pub boost_then_force: CompositionFields,
    /// `r` of force·boost minus `r` of boost·force.
    pub discrepancy: f64,
    /// `2|f·v|`
    pub expected_magnitude: f64,
    pub magnitude_error: f64,
    pub commute: bool,
    pub sweep: Vec<SweepRow>,
    pub max_sweep_residual: f64,
    pub tol: f64,
    pub passed: bool,
}

/// Scalings used for the bilinearity table.
pub const SWEEP_SCALES: [f64; 5] = [-2.0, -0.5, 0.0, 1.0, 3.0];

/// Composes a pure force `Υ(f, 0, 0)` and a pure boost `Υ(0, v, 0)` in both
/// orders and tabulates how the central discrepancy scales.
pub fn noncommute(f: &DVector<f64>, v: &DVector<f64>) -> Result<NoncommuteReport> {
    if f.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: f.len(),
            found: v.len(),
        });
    }
    Dimension::new(f.len())?;
    let zero = DVector::zeros(f.len());
    let build = |fs: f64, vs: f64| -> Result<(HspElement, HspElement)> {
        let force = HspElement::heisenberg(&VelocityForcePower::new(zero.clone(), f * fs, 0.0))?;
        let boost = HspElement::heisenberg(&VelocityForcePower::new(v * vs, zero.clone(), 0.0))?;
        Ok((force.compose(&boost)?, boost.compose(&force)?))
    };
    let (fb, bf) = build(1.0, 1.0)?;
    let discrepancy = fb.r() - bf.r();
    let expected = 2.0 * f.dot(v).abs();
    let magnitude_error = (discrepancy.abs() - expected).abs();
    let tol = 1e-14;

    let mut sweep = Vec::new();
    for &a in &SWEEP_SCALES {
        for &b in &SWEEP_SCALES {
            let (x, y) = build(a, b)?;
            let d = x.r() - y.r();
            // + 0.0 turns a negative zero into zero
            let reference = a * b * discrepancy + 0.0;
            sweep.push(SweepRow {
                force_scale: a,
                velocity_scale: b,
                discrepancy: d,
                bilinear_reference: reference,
                residual: (d - reference).abs() / reference.abs().max(1.0),
            });
        }
    }
    let max_sweep_residual = sweep.iter().map(|r| r.residual).fold(0.0, nan_max);
    let scale = expected.max(1.0);
    Ok(NoncommuteReport {
        f: f.iter().copied().collect(),
        v: v.iter().copied().collect(),
        force_then_boost: (&fb).into(),
        boost_then_force: (&bf).into(),
        discrepancy,
        expected_magnitude: expected,
        magnitude_error,
        commute: fb.max_field_diff(&bf) == 0.0,
        passed: magnitude_error <= tol * scale && max_sweep_residual <= tol,
        sweep,
        max_sweep_residual,
        tol,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformRow {
    pub y_tilde: Vec<f64>,
    /// `H̃(ỹ)`
    pub h_tilde: f64,
    /// `H(ϱ⁻¹(ỹ))`, equal to `h_tilde` by construction.
    pub h_at_preimage: f64,
    /// `H(ỹ)`, shown for contrast: `H̃` is not `H` in new coordinates.
    pub h_at_same_point: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformReport {
    pub map: String,
    pub hamiltonian: String,
    pub table: Vec<TransformRow>,
    /// `max_k |ϱ(φ(t_k)) − φ̃(t_k)|`
    pub max_deviation: f64,
    pub tol: f64,
    pub map_symplectic_residual: f64,
    pub map_round_trip_error: f64,
    pub passed: bool,
}

/// Tabulates `H̃ = H ∘ ϱ⁻¹` at `points` and integrates both sides from `y0`
/// to check `φ̃ = ϱ ∘ φ`.
#[allow(clippy::too_many_arguments)]
pub fn transform_demo<H: Hamiltonian + Clone>(
    h: &H,
    map: &CanonicalMap,
    points: &[PhaseVector],
    y0: &PhaseVector,
    t0: f64,
    t1: f64,
    integrator: &Integrator,
    tol: f64,
) -> Result<TransformReport> {
    let ht = transform_hamiltonian(h.clone(), map.clone())?;
    let table = points
        .iter()
        .map(|p| {
            Ok(TransformRow {
                y_tilde: p.iter().copied().collect(),
                h_tilde: ht.try_value(p, t0)?,
                h_at_preimage: h.value(&map.inverse(p)?, t0),
                h_at_same_point: h.value(p, t0),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let base = integrate(h, y0, t0, t1, integrator)?;
    let moved = integrate(&ht, &map.forward(y0)?, t0, t1, integrator)?;
    let mut max_deviation = 0.0_f64;
    for (a, b) in base.samples.iter().zip(&moved.samples) {
        max_deviation = nan_max(max_deviation, max_abs(&(map.forward(&a.y)? - &b.y)));
    }

    let mut probe = points.to_vec();
    probe.push(y0.clone());
    let canonical = verify_canonical_map(map, &probe, 1e-9)?;
    Ok(TransformReport {
        map: map.name().to_string(),
        hamiltonian: h.name().to_string(),
        table,
        max_deviation,
        tol,
        map_symplectic_residual: canonical.max_symplectic_residual,
        map_round_trip_error: canonical.max_round_trip_error,
        passed: max_deviation <= tol && canonical.passed,
    })
}

/// One base point and horizon for [`verify_cases`].
#[derive(Debug, Clone)]
pub struct VerifyCase {
    pub hamiltonian: CatalogHamiltonian,
    pub z0: ExtendedPoint,
    pub s: f64,
    /// Also check the linearized vector field at `z0`. It does not depend on
    /// `s`, so one case per base point is enough.
    pub generator: bool,
}

/// Seeded base points: `y` and `e` uniform in `[−1, 1]`, `t` uniform in `[0, 1]`.
pub fn random_base_points(dim: Dimension, seed: u64, count: usize) -> Vec<ExtendedPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let y = PhaseVector::from_fn(dim.phase_len(), |_, _| rng.random_range(-1.0..=1.0));
            let e = rng.random_range(-1.0..=1.0);
            let t = rng.random_range(0.0..=1.0);
            ExtendedPoint::new(y, e, t)
        })
        .collect()
}

fn vector_json(v: &DVector<f64>) -> Value {
    Value::from(v.iter().copied().collect::<Vec<_>>())
}

/// Runs flow membership and generator checks on every case, in input order.
pub fn verify_cases(
    cases: &[VerifyCase],
    integrator: &Integrator,
    cfg: &JacobianConfig,
    tol: &Tolerances,
    jobs: usize,
) -> Result<Vec<CheckRecord>> {
    let run = |case: &VerifyCase| -> Result<Vec<CheckRecord>> {
        let h = &case.hamiltonian;
        let mut inputs = Map::new();
        inputs.insert("hamiltonian".into(), json!(h.name()));
        inputs.insert("params".into(), serde_json::to_value(h.params()).unwrap_or(Value::Null));
        inputs.insert("z0".into(), vector_json(&case.z0.to_vector()));
        inputs.insert("s".into(), json!(case.s));
        inputs.insert("method".into(), json!(integrator.method.as_str()));
        inputs.insert("dt".into(), json!(integrator.dt));
        inputs.insert("fd_h".into(), json!(cfg.h));
        let flow = verify_flow_membership(h, &case.z0, case.s, integrator, cfg, tol)?;
        let mut records = vec![flow.to_record("flow_membership", inputs.clone())];
        if case.generator {
            let gen = verify_generator(h, &case.z0, GENERATOR_TOL)?;
            let mut gen_inputs = Map::new();
            gen_inputs.insert("hamiltonian".into(), json!(h.name()));
            gen_inputs.insert("params".into(), inputs["params"].clone());
            gen_inputs.insert("z".into(), inputs["z0"].clone());
            records.push(gen.to_record("generator", gen_inputs));
        }
        Ok(records)
    };
    let nested = with_jobs(jobs, || cases.par_iter().map(run).collect::<Result<Vec<_>>>())??;
    Ok(nested.into_iter().flatten().collect())
}

/// Least-squares circle through planar points (algebraic fit):
/// returns `(center_x, center_y, radius)`.
pub fn fit_circle(points: &[(f64, f64)]) -> Result<(f64, f64, f64)> {
    if points.len() < 3 {
        return Err(Error::TooFewSamples(points.len()));
    }
    let a = DMatrix::from_fn(points.len(), 3, |i, j| match j {
        0 => points[i].0,
        1 => points[i].1,
        _ => 1.0,
    });
    let b = DVector::from_fn(points.len(), |i, _| -(points[i].0.powi(2) + points[i].1.powi(2)));
    let sol = a
        .svd(true, true)
        .solve(&b, 1e-14)
        .map_err(|e| Error::InversionFailure(e.to_string()))?;
    let (cx, cy) = (-sol[0] / 2.0, -sol[1] / 2.0);
    let r2 = cx * cx + cy * cy - sol[2];
    if !(r2 > 0.0) {
        return Err(Error::InversionFailure("points do not determine a circle".into()));
    }
    Ok((cx, cy, r2.sqrt()))
}

/// `m|v|c / (|ε| B)` at `y`, for the magnetic Hamiltonian only.
pub fn gyration_radius(h: &CatalogHamiltonian, y: &PhaseVector) -> Option<f64> {
    match h.kind() {
        CatalogKind::ChargedUniformB { m, b, charge, c } if charge * b != 0.0 => {
            let v = velocity_force_power(h, y, 0.0).ok()?.v;
            Some(m * v.norm() * c.abs() / (charge * b).abs())
        }
        _ => None,
    }
}

/// `2π m c / (|ε| B)`.
pub fn gyration_period(h: &CatalogHamiltonian) -> Option<f64> {
    match h.kind() {
        CatalogKind::ChargedUniformB { m, b, charge, c } if charge * b != 0.0 => {
            Some(2.0 * std::f64::consts::PI * m * c.abs() / (charge * b).abs())
        }
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GyrationCheck {
    pub radius_fit: f64,
    pub radius_theory: f64,
    pub relative_error: f64,
    /// Largest `| |q − center| − radius_fit |` over the samples.
    pub max_radial_deviation: f64,
    pub center: [f64; 2],
    pub period: f64,
}

pub fn gyration_check(h: &CatalogHamiltonian, traj: &Trajectory) -> Result<Option<GyrationCheck>> {
    let first = traj.first();
    let (Some(theory), Some(period)) = (gyration_radius(h, &first.y), gyration_period(h)) else {
        return Ok(None);
    };
    let pts: Vec<(f64, f64)> = traj.samples.iter().map(|s| (s.y[2], s.y[3])).collect();
    let (cx, cy, r) = fit_circle(&pts)?;
    let radial = pts
        .iter()
        .map(|(x, y)| ((x - cx).hypot(y - cy) - r).abs())
        .fold(0.0, f64::max);
    Ok(Some(GyrationCheck {
        radius_fit: r,
        radius_theory: theory,
        relative_error: (r - theory).abs() / theory,
        max_radial_deviation: radial,
        center: [cx, cy],
        period,
    }))
}

/// Energy diagnostics of a computed trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowSummary {
    pub samples: usize,
    pub h_start: f64,
    pub h_end: f64,
    /// `max_k |H(y_k, t_k) − H(y_0, t_0)|`
    pub max_energy_drift: f64,
    pub autonomous: bool,
    /// Final value of the energy channel `e` (starts at 0).
    pub e_end: f64,
    pub audit: EnergyAudit,
    pub gyration: Option<GyrationCheck>,
}

/// Quadrature tolerance used by [`flow_summary`] for the energy audit.
pub const AUDIT_TOL: f64 = 1e-6;

pub fn flow_summary(h: &CatalogHamiltonian, traj: &Trajectory) -> Result<FlowSummary> {
    let (first, last) = (traj.first(), traj.last());
    let h0 = h.value(&first.y, first.t);
    let drift = traj
        .samples
        .iter()
        .map(|s| (h.value(&s.y, s.t) - h0).abs())
        .fold(0.0, nan_max);
    Ok(FlowSummary {
        samples: traj.len(),
        h_start: h0,
        h_end: h.value(&last.y, last.t),
        max_energy_drift: drift,
        autonomous: h.is_autonomous(),
        e_end: last.e,
        audit: energy_audit(h, traj, AUDIT_TOL)?,
        gyration: gyration_check(h, traj)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{catalog, Params};
    use crate::integrate::Method;

    fn dim(n: usize) -> Dimension {
        Dimension::new(n).unwrap()
    }

    #[test]
    fn group_suites_pass_and_are_job_independent() {
        let mut cfg = GroupCheckConfig::new(dim(2), 42, 200);
        let serial = group_check(&cfg).unwrap();
        assert!(serial.iter().all(|s| s.passed), "{serial:?}");
        cfg.jobs = 4;
        assert_eq!(group_check(&cfg).unwrap(), serial);
    }

    #[test]
    fn perturbation_is_caught() {
        let mut cfg = GroupCheckConfig::new(dim(2), 42, 50);
        cfg.perturb = Some(0.1);
        let res = group_check(&cfg).unwrap();
        let failed: Vec<_> = res.iter().filter(|s| !s.passed).map(|s| s.name.as_str()).collect();
        assert!(failed.contains(&"metric_invariance"), "{failed:?}");
        assert!(failed.contains(&"closure"));
    }

    #[test]
    fn closed_form_conjugation_matches_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = random_element_from(dim(2), &mut rng, 1.0);
        let heis = HspElement::heisenberg_wr(DVector::from_row_slice(&[0.3, -0.1, 0.7, 0.2]), 0.4).unwrap();
        let closed = conjugation_closed_form(&g, &heis);
        assert!(g.conjugate(&heis).unwrap().max_field_diff(&closed) <= 1e-12);
    }

    #[test]
    fn noncommute_unit_vectors() {
        let f = DVector::from_row_slice(&[1.0, 0.0]);
        let rep = noncommute(&f, &f).unwrap();
        assert_eq!(rep.discrepancy.abs(), 2.0);
        assert!(!rep.commute && rep.passed);
        let v = DVector::from_row_slice(&[0.0, 1.0]);
        let rep = noncommute(&f, &v).unwrap();
        assert_eq!(rep.discrepancy, 0.0);
        assert!(rep.commute && rep.passed);
    }

    #[test]
    fn circle_fit_recovers_circle() {
        let pts: Vec<_> = (0..40)
            .map(|k| {
                let a = k as f64 * 0.3;
                (1.5 + 2.0 * a.cos(), -0.5 + 2.0 * a.sin())
            })
            .collect();
        let (cx, cy, r) = fit_circle(&pts).unwrap();
        assert!((cx - 1.5).abs() < 1e-12 && (cy + 0.5).abs() < 1e-12 && (r - 2.0).abs() < 1e-12);
        assert!(fit_circle(&pts[..2]).is_err());
    }

    #[test]
    fn gyration_of_charged_particle() {
        let h = catalog("charged_uniform_B", dim(2), &Params::new().with("b", 2.0).with("m", 1.5)).unwrap();
        let y0 = PhaseVector::from_row_slice(&[1.0, 0.5, 0.2, -0.3]);
        let period = gyration_period(&h).unwrap();
        let traj = integrate(&h, &y0, 0.0, period, &Integrator::new(Method::ImplicitMidpoint, 1e-3)).unwrap();
        let g = gyration_check(&h, &traj).unwrap().unwrap();
        assert!(g.relative_error <= 1e-4, "{g:?}");
        assert!(g.max_radial_deviation <= 1e-10);
        assert!(gyration_check(&catalog("free", dim(2), &Params::new()).unwrap(), &traj).unwrap().is_none());
    }

    #[test]
    fn flow_summary_of_harmonic() {
        let h = catalog("harmonic", dim(1), &Params::new()).unwrap();
        let traj = integrate(
            &h,
            &PhaseVector::from_row_slice(&[0.0, 1.0]),
            0.0,
            10.0,
            &Integrator::new(Method::ImplicitMidpoint, 1e-3),
        )
        .unwrap();
        let s = flow_summary(&h, &traj).unwrap();
        assert_eq!(s.samples, 10001);
        assert!(s.max_energy_drift <= 1e-8 && s.autonomous && s.e_end == 0.0);
        assert!(s.audit.passed);
    }
}

//! Training objectives assembled from sampled field jets.
//!
//! Every loss is computed from a [`FieldEval`] (the trial deflection or mode
//! shape evaluated at the quadrature points) and returns, besides the value,
//! the adjoint of the loss with respect to every sampled jet slot. The network
//! objective feeds those adjoints into the reverse sweep; tests can instead
//! inject closed-form fields directly.

use serde::{Deserialize, Serialize};

use crate::autodiff::Jet2;
use crate::error::{Error, Result};
use crate::geometry::{EdgeKind, SampleSet};
use crate::plate::{
    bending_energy_density, bending_energy_density_grad, edge_load_density, edge_moment_density, external_work_density,
    inplane_work_density, normal_rotation, winkler_energy_density, PlateSpec,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Problem {
    Bending,
    Vibration,
    Buckling,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossConfig {
    /// Weight on the deflection boundary mismatch.
    #[serde(default = "one")]
    pub beta_w: f64,
    /// Weight on the normal-rotation boundary mismatch.
    #[serde(default = "one")]
    pub beta_theta: f64,
    /// Normalisation penalty for vibration and buckling.
    #[serde(default = "ten")]
    pub kp: f64,
}

fn one() -> f64 {
    1.0
}

fn ten() -> f64 {
    10.0
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig { beta_w: 1.0, beta_theta: 1.0, kp: 10.0 }
    }
}

impl LossConfig {
    pub fn validate(&self, problem: Problem) -> Result<()> {
        if !(self.beta_w > 0.0 && self.beta_theta > 0.0) {
            return Err(Error::InvalidConfig("boundary weights must be positive".into()));
        }
        if problem != Problem::Bending && !(self.kp > 0.0) {
            return Err(Error::InvalidConfig("normalisation penalty kp must be positive".into()));
        }
        Ok(())
    }

    /// True when `kp` sits outside the `[1, 100]` band known to work well.
    pub fn kp_out_of_band(&self) -> bool {
        !(1.0..=100.0).contains(&self.kp)
    }
}

/// Trial field sampled at the points of a [`SampleSet`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FieldEval {
    pub interior: Vec<Jet2>,
    /// One vector per boundary segment; only value and first partials are used.
    pub boundary: Vec<Vec<Jet2>>,
}

impl FieldEval {
    /// Evaluates a closed-form field at every sample point.
    pub fn from_fn(samples: &SampleSet, f: impl Fn([f64; 2]) -> Jet2) -> Self {
        FieldEval {
            interior: samples.interior.iter().map(|&p| f(p)).collect(),
            boundary: samples.boundary.iter().map(|b| b.points.iter().map(|&p| f(p)).collect()).collect(),
        }
    }
}

/// `dLoss / d(jet slot)` for every sample point.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FieldAdjoint {
    pub interior: Vec<[f64; 6]>,
    pub boundary: Vec<Vec<[f64; 3]>>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossTerms {
    pub total: f64,
    /// Total potential energy, Rayleigh quotient `ω²`, or load factor `λ`.
    pub principal: f64,
    /// `kp (∫w² - 1)²`; zero for bending.
    pub normalization: f64,
    pub mse_w: f64,
    pub mse_theta: f64,
    /// `∫ w² dΩ`
    pub norm: f64,
}

/// Mean squared deviation.
pub fn boundary_mse(values: &[f64], targets: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptySample("boundary set".into()));
    }
    if values.len() != targets.len() {
        return Err(Error::Dimension("boundary values and targets differ in length".into()));
    }
    let s: f64 = values.iter().zip(targets).map(|(v, t)| (v - t) * (v - t)).sum();
    Ok(s / values.len() as f64)
}

struct BoundaryPenalty {
    mse_w: f64,
    mse_theta: f64,
}

/// Essential-condition mismatch; accumulates its adjoint into `adj`.
fn boundary_penalty(
    field: &FieldEval,
    samples: &SampleSet,
    cfg: &LossConfig,
    adj: &mut [Vec<[f64; 3]>],
) -> Result<BoundaryPenalty> {
    let mut n_w = 0usize;
    let mut n_t = 0usize;
    for b in &samples.boundary {
        let kind = b.segment.kind;
        if kind.constrains_deflection() {
            if b.points.is_empty() {
                return Err(Error::MissingBoundary(b.segment.name.clone()));
            }
            n_w += b.points.len();
        }
        if kind.constrains_rotation() {
            n_t += b.points.len();
        }
    }
    let mut sw = 0.0;
    let mut st = 0.0;
    for (s, b) in samples.boundary.iter().enumerate() {
        let seg = &b.segment;
        for (i, (w, n)) in field.boundary[s].iter().zip(&b.normals).enumerate() {
            if seg.kind.constrains_deflection() {
                let r = w.v - seg.w_target;
                sw += r * r;
                adj[s][i][0] += cfg.beta_w * 2.0 * r / n_w as f64;
            }
            if seg.kind.constrains_rotation() {
                let r = normal_rotation(w, *n) - seg.theta_target;
                st += r * r;
                let g = cfg.beta_theta * 2.0 * r / n_t as f64;
                adj[s][i][1] += g * n[0];
                adj[s][i][2] += g * n[1];
            }
        }
    }
    Ok(BoundaryPenalty {
        mse_w: if n_w > 0 { sw / n_w as f64 } else { 0.0 },
        mse_theta: if n_t > 0 { st / n_t as f64 } else { 0.0 },
    })
}

fn check_shapes(field: &FieldEval, samples: &SampleSet) -> Result<()> {
    if field.interior.len() != samples.interior.len() {
        return Err(Error::Dimension("interior field length".into()));
    }
    if samples.interior.is_empty() {
        return Err(Error::EmptySample("interior".into()));
    }
    if field.boundary.len() != samples.boundary.len()
        || field.boundary.iter().zip(&samples.boundary).any(|(f, b)| f.len() != b.points.len())
    {
        return Err(Error::Dimension("boundary field shape".into()));
    }
    Ok(())
}

fn empty_adjoint(field: &FieldEval) -> FieldAdjoint {
    FieldAdjoint {
        interior: vec![[0.0; 6]; field.interior.len()],
        boundary: field.boundary.iter().map(|b| vec![[0.0; 3]; b.len()]).collect(),
    }
}

/// Loss and adjoint for the chosen problem.
pub fn evaluate(
    problem: Problem,
    field: &FieldEval,
    samples: &SampleSet,
    plate: &PlateSpec,
    cfg: &LossConfig,
) -> Result<(LossTerms, FieldAdjoint)> {
    match problem {
        Problem::Bending => bending(field, samples, plate, cfg),
        Problem::Vibration => vibration(field, samples, plate, cfg),
        Problem::Buckling => buckling(field, samples, plate, cfg),
    }
}

pub fn bending_loss(field: &FieldEval, samples: &SampleSet, plate: &PlateSpec, cfg: &LossConfig) -> Result<LossTerms> {
    bending(field, samples, plate, cfg).map(|r| r.0)
}

pub fn vibration_loss(
    field: &FieldEval,
    samples: &SampleSet,
    plate: &PlateSpec,
    cfg: &LossConfig,
) -> Result<LossTerms> {
    vibration(field, samples, plate, cfg).map(|r| r.0)
}

pub fn buckling_loss(field: &FieldEval, samples: &SampleSet, plate: &PlateSpec, cfg: &LossConfig) -> Result<LossTerms> {
    buckling(field, samples, plate, cfg).map(|r| r.0)
}

fn bending(
    field: &FieldEval,
    samples: &SampleSet,
    plate: &PlateSpec,
    cfg: &LossConfig,
) -> Result<(LossTerms, FieldAdjoint)> {
    check_shapes(field, samples)?;
    let mut adj = empty_adjoint(field);
    let wq = samples.area / samples.interior.len() as f64;
    let k = plate.foundation;

    let mut pi = 0.0;
    let mut norm = 0.0;
    for (i, (w, &x)) in field.interior.iter().zip(&samples.interior).enumerate() {
        let p = plate.load.at(x);
        pi += bending_energy_density(w, plate) + winkler_energy_density(w.v, k) + external_work_density(w.v, p);
        norm += w.v * w.v;
        let g = bending_energy_density_grad(w, plate);
        let a = &mut adj.interior[i];
        a[0] = wq * (k * w.v - p);
        a[3] = wq * g[0];
        a[4] = wq * g[1];
        a[5] = wq * g[2];
    }
    pi *= wq;
    norm *= wq;

    for (s, b) in samples.boundary.iter().enumerate() {
        let seg = &b.segment;
        let lw = b.length / b.points.len() as f64;
        let free = seg.kind == EdgeKind::Free;
        let moment_edge = seg.kind != EdgeKind::Clamped;
        if !(free && seg.shear_load != 0.0) && !(moment_edge && seg.moment_load != 0.0) {
            continue;
        }
        for (i, (w, n)) in field.boundary[s].iter().zip(&b.normals).enumerate() {
            if free {
                pi += lw * edge_load_density(w.v, seg.shear_load);
                adj.boundary[s][i][0] -= lw * seg.shear_load;
            }
            if moment_edge {
                pi += lw * edge_moment_density(normal_rotation(w, *n), seg.moment_load);
                adj.boundary[s][i][1] += lw * seg.moment_load * n[0];
                adj.boundary[s][i][2] += lw * seg.moment_load * n[1];
            }
        }
    }

    let bc = boundary_penalty(field, samples, cfg, &mut adj.boundary)?;
    let total = pi + cfg.beta_w * bc.mse_w + cfg.beta_theta * bc.mse_theta;
    Ok((LossTerms { total, principal: pi, normalization: 0.0, mse_w: bc.mse_w, mse_theta: bc.mse_theta, norm }, adj))
}

/// Shared quotient machinery: `num / den + kp (∫w² - 1)²`.
fn quotient_loss(
    field: &FieldEval,
    samples: &SampleSet,
    plate: &PlateSpec,
    cfg: &LossConfig,
    denominator: impl Fn(&Jet2) -> (f64, [f64; 3]),
    degenerate: &str,
) -> Result<(LossTerms, FieldAdjoint)> {
    check_shapes(field, samples)?;
    let wq = samples.area / samples.interior.len() as f64;
    let mut u = 0.0;
    let mut den = 0.0;
    let mut norm = 0.0;
    for w in &field.interior {
        u += bending_energy_density(w, plate);
        den += denominator(w).0;
        norm += w.v * w.v;
    }
    u *= wq;
    den *= wq;
    norm *= wq;
    if !(den.abs() > 1e-14) || !den.is_finite() {
        return Err(Error::Degenerate(degenerate.to_string()));
    }
    let q = u / den;
    let pen = cfg.kp * (norm - 1.0).powi(2);

    let mut adj = empty_adjoint(field);
    let du = wq / den;
    let dden = -wq * u / (den * den);
    let dnorm = wq * 2.0 * cfg.kp * (norm - 1.0);
    for (i, w) in field.interior.iter().enumerate() {
        let g = bending_energy_density_grad(w, plate);
        let (_, dg) = denominator(w);
        let a = &mut adj.interior[i];
        a[0] = dden * dg[0] + dnorm * 2.0 * w.v;
        a[1] = dden * dg[1];
        a[2] = dden * dg[2];
        a[3] = du * g[0];
        a[4] = du * g[1];
        a[5] = du * g[2];
    }
    let bc = boundary_penalty(field, samples, cfg, &mut adj.boundary)?;
    let total = q + pen + cfg.beta_w * bc.mse_w + cfg.beta_theta * bc.mse_theta;
    Ok((LossTerms { total, principal: q, normalization: pen, mse_w: bc.mse_w, mse_theta: bc.mse_theta, norm }, adj))
}

fn vibration(
    field: &FieldEval,
    samples: &SampleSet,
    plate: &PlateSpec,
    cfg: &LossConfig,
) -> Result<(LossTerms, FieldAdjoint)> {
    // ω² = U / (½∫ρhW²)
    let half_rho_h = 0.5 * plate.areal_mass();
    quotient_loss(
        field,
        samples,
        plate,
        cfg,
        |w| (half_rho_h * w.v * w.v, [2.0 * half_rho_h * w.v, 0.0, 0.0]),
        "mode shape collapsed to zero",
    )
}

fn buckling(
    field: &FieldEval,
    samples: &SampleSet,
    plate: &PlateSpec,
    cfg: &LossConfig,
) -> Result<(LossTerms, FieldAdjoint)> {
    if plate.inplane.is_zero() {
        return Err(Error::InvalidConfig("buckling needs non-zero in-plane forces".into()));
    }
    let n = plate.inplane;
    quotient_loss(
        field,
        samples,
        plate,
        cfg,
        |w| (inplane_work_density(w, &n), [0.0, n.nx * w.dx + n.nxy * w.dy, n.ny * w.dy + n.nxy * w.dx]),
        "in-plane work vanishes",
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::jet_seed;
    use crate::geometry::{BoundarySpec, DomainSpec};
    use crate::plate::{InPlane, Load};
    use std::f64::consts::PI;

    fn square(edges: &str, n: usize, nb: usize) -> SampleSet {
        let d = DomainSpec::Rectangle { a: 1.0, b: 1.0 };
        let segs = d.segments(&BoundarySpec::new(edges)).unwrap();
        SampleSet::generate(&d, &segs, n, nb, 3).unwrap()
    }

    fn sine(amp: f64, m: f64) -> impl Fn([f64; 2]) -> Jet2 {
        move |p| {
            let (x, y) = jet_seed(p[0], p[1]);
            (x * (m * PI)).sin() * (y * PI).sin() * amp
        }
    }

    #[test]
    fn zero_field_zero_loss() {
        let s = square("SSSS", 256, 32);
        let f = FieldEval::from_fn(&s, |_| Jet2::ZERO);
        let plate = PlateSpec::nondimensional(0.3);
        let t = bending_loss(&f, &s, &plate, &LossConfig::default()).unwrap();
        assert_eq!(t.total, 0.0);
    }

    #[test]
    fn navier_field_gives_minus_strain_energy() {
        let s = square("SSSS", 16384, 64);
        let plate = PlateSpec::nondimensional(0.3).with_load(Load::Sinusoidal { p0: 1.0, a: 1.0, b: 1.0 });
        let amp = 1.0 / (4.0 * PI.powi(4));
        let f = FieldEval::from_fn(&s, sine(amp, 1.0));
        let t = bending_loss(&f, &s, &plate, &LossConfig::default()).unwrap();
        // U = ½ ∫ p w = amp / 8
        let u = amp / 8.0;
        assert!(t.mse_w < 1e-30);
        let vals: Vec<f64> = f
            .interior
            .iter()
            .zip(&s.interior)
            .map(|(w, &x)| bending_energy_density(w, &plate) - plate.load.at(x) * w.v)
            .collect();
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        let sd = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!((t.total + u).abs() < 3.0 * sd / n.sqrt(), "{} vs {}", t.total, -u);
    }

    #[test]
    fn boundary_weight_is_linear() {
        let s = square("CCCC", 128, 32);
        let plate = PlateSpec::nondimensional(0.3);
        let f = FieldEval::from_fn(&s, |p| Jet2::constant(0.1 + p[0]));
        let c1 = LossConfig::default();
        let c2 = LossConfig { beta_w: 2.0, ..c1.clone() };
        let a = bending_loss(&f, &s, &plate, &c1).unwrap();
        let b = bending_loss(&f, &s, &plate, &c2).unwrap();
        assert!(((b.total - a.total) - a.mse_w).abs() < 1e-14);
    }

    #[test]
    fn vibration_exact_mode() {
        let s = square("SSSS", 4096, 64);
        let plate = PlateSpec::nondimensional(0.3);
        let cfg = LossConfig::default();
        let exact = 4.0 * PI.powi(4);
        // normalised amplitude: ∫(2 sin sin)² = 1
        let f = FieldEval::from_fn(&s, sine(2.0, 1.0));
        let t = vibration_loss(&f, &s, &plate, &cfg).unwrap();
        // quotient of sampled sums: MC error partly cancels
        assert!((t.principal - exact).abs() / exact < 0.05);
        assert!(t.normalization < 0.05);

        let g = FieldEval::from_fn(&s, sine(2.0 * 2f64.sqrt(), 1.0));
        let tg = vibration_loss(&g, &s, &plate, &cfg).unwrap();
        assert!((tg.principal - t.principal).abs() < 1e-9 * exact);
        assert!(tg.normalization > 5.0);

        let zero = LossConfig { kp: 1e-300, ..cfg };
        let a = vibration_loss(&f, &s, &plate, &zero).unwrap();
        let b = vibration_loss(&g, &s, &plate, &zero).unwrap();
        assert!((a.total - b.total).abs() < 1e-9 * exact);
    }

    #[test]
    fn buckling_modes_order() {
        let s = square("SSSS", 4096, 64);
        let plate = PlateSpec::nondimensional(0.3).with_inplane(InPlane { nx: 1.0, ny: 0.0, nxy: 0.0 });
        let cfg = LossConfig::default();
        let one = buckling_loss(&FieldEval::from_fn(&s, sine(2.0, 1.0)), &s, &plate, &cfg).unwrap();
        let two = buckling_loss(&FieldEval::from_fn(&s, sine(2.0, 2.0)), &s, &plate, &cfg).unwrap();
        assert!((one.principal / (PI * PI) - 4.0).abs() < 0.2);
        assert!(two.total > one.total);

        let none = PlateSpec::nondimensional(0.3);
        assert!(buckling_loss(&FieldEval::from_fn(&s, sine(2.0, 1.0)), &s, &none, &cfg).is_err());
    }

    #[test]
    fn mse_examples() {
        assert_eq!(boundary_mse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(boundary_mse(&[3.0, 0.0, 1.0], &[1.0, -2.0, -1.0]).unwrap(), 4.0);
        let a = boundary_mse(&[1.0, 2.0], &[0.0, 0.0]).unwrap();
        let b = boundary_mse(&[3.0, -1.0], &[0.0, 0.0]).unwrap();
        let ab = boundary_mse(&[1.0, 2.0, 3.0, -1.0], &[0.0; 4]).unwrap();
        assert!((ab - 0.5 * (a + b)).abs() < 1e-15);
        assert!(boundary_mse(&[], &[]).is_err());
    }

    #[test]
    fn adjoint_matches_finite_differences() {
        let s = square("CSCS", 64, 8);
        let plate = PlateSpec::nondimensional(0.3)
            .with_load(Load::Uniform { p: 1.0 })
            .with_foundation(3.0)
            .with_inplane(InPlane { nx: 1.0, ny: 0.3, nxy: 0.2 });
        let cfg = LossConfig { beta_w: 3.0, beta_theta: 2.0, kp: 5.0 };
        let field = FieldEval::from_fn(&s, |p| {
            let (x, y) = jet_seed(p[0], p[1]);
            (x * 2.0 + y).sin() * 0.7 + x * y * 0.3
        });
        for problem in [Problem::Bending, Problem::Vibration, Problem::Buckling] {
            let (_, adj) = evaluate(problem, &field, &s, &plate, &cfg).unwrap();
            let h = 1e-6;
            for i in [0usize, 17, 63] {
                for slot in 0..6 {
                    let mut a = field.clone();
                    let mut b = field.clone();
                    let mut sa = a.interior[i].slots();
                    let mut sb = b.interior[i].slots();
                    sa[slot] += h;
                    sb[slot] -= h;
                    a.interior[i] = Jet2::from_slots(sa);
                    b.interior[i] = Jet2::from_slots(sb);
                    let fa = evaluate(problem, &a, &s, &plate, &cfg).unwrap().0.total;
                    let fb = evaluate(problem, &b, &s, &plate, &cfg).unwrap().0.total;
                    let fd = (fa - fb) / (2.0 * h);
                    let an = adj.interior[i][slot];
                    assert!((fd - an).abs() < 1e-6 * an.abs().max(1e-3), "{problem:?} slot {slot}: {fd} vs {an}");
                }
            }
            for (seg, i) in [(0usize, 3usize), (1, 5)] {
                for slot in 0..3 {
                    let mut a = field.clone();
                    let mut b = field.clone();
                    let mut sa = a.boundary[seg][i].slots();
                    let mut sb = b.boundary[seg][i].slots();
                    sa[slot] += h;
                    sb[slot] -= h;
                    a.boundary[seg][i] = Jet2::from_slots(sa);
                    b.boundary[seg][i] = Jet2::from_slots(sb);
                    let fa = evaluate(problem, &a, &s, &plate, &cfg).unwrap().0.total;
                    let fb = evaluate(problem, &b, &s, &plate, &cfg).unwrap().0.total;
                    let fd = (fa - fb) / (2.0 * h);
                    let an = adj.boundary[seg][i][slot];
                    assert!((fd - an).abs() < 1e-6 * an.abs().max(1e-3), "{problem:?} boundary slot {slot}");
                }
            }
        }
    }
}

//! Property suite run by the `validate` command: no training, only checks of
//! the numerical building blocks against independent references.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{jet_seed, Activation, Jet2};
use crate::error::Result;
use crate::geometry::{mc_integrate, sample_interior, BoundarySpec, DomainSpec, SampleSet};
use crate::losses::{bending_loss, buckling_loss, vibration_loss, FieldEval, LossConfig, Problem};
use crate::network::{forward, forward_jet, init_params, InputScaling, NetworkConfig};
use crate::objective::Objective;
use crate::optimizer::{train, OptimConfig, Termination};
use crate::oracles::{annular_deflection, navier_deflection, winkler_deflection, WINKLER_TERMS};
use crate::plate::{buckling_coefficient, buckling_ratio, rayleigh_quotient, InPlane, Load, PlateSpec};

/// Input-derivative tolerance (relative).
pub const INPUT_TOL: f64 = 1e-6;
/// Parameter-gradient tolerance (relative).
pub const PARAM_TOL: f64 = 1e-5;
/// Accepted range of the Monte-Carlo error slope in log-log scale.
pub const MC_SLOPE_RANGE: (f64, f64) = (-0.6, -0.4);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl CheckResult {
    fn below(name: &str, measured: f64, tolerance: f64, detail: impl Into<String>) -> Self {
        CheckResult { name: name.into(), passed: measured <= tolerance, measured, tolerance, detail: detail.into() }
    }
}

/// Runs every check in a fixed order.
pub fn run_all() -> Result<Vec<CheckResult>> {
    let mut out = vec![activation_golden()];
    out.push(jets_vs_finite_differences()?);
    out.push(gradient_vs_finite_differences()?);
    out.extend(mc_closed_forms()?);
    out.push(mc_convergence_slope()?);
    out.push(rayleigh_scale_invariance()?);
    out.extend(exact_mode_losses()?);
    out.push(rayleigh_upper_bound()?);
    out.extend(oracle_identities()?);
    out.push(rosenbrock()?);
    Ok(out)
}

fn max_rel(a: &[f64], b: &[f64], floor: f64) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs() / y.abs().max(floor)).fold(0.0, f64::max)
}

/// Activation values against direct evaluation of `tanh(πu/2)`.
pub fn activation_golden() -> CheckResult {
    let act = Activation::ScaledTanh;
    let d0 = act.derivatives(0.0);
    let d1 = act.derivatives(1.0);
    let got = [d0[0], d0[1], d0[2], d1[0]];
    let want = [0.0, FRAC_PI_2, 0.0, 0.917_152_335_667_274_3];
    let err = got.iter().zip(&want).map(|(g, w)| (g - w).abs()).fold(0.0, f64::max);
    CheckResult::below("activation_golden_values", err, 1e-15, format!("sigma(1) = {:.16}", d1[0]))
}

fn test_network() -> NetworkConfig {
    NetworkConfig::autoencoder(&[40, 20], Activation::ScaledTanh)
        .with_scaling(InputScaling::from_bbox([0.0, 0.0], [1.0, 1.0]))
}

/// Forward jets against fourth-order finite differences of the scalar forward pass.
pub fn jets_vs_finite_differences() -> Result<CheckResult> {
    let cfg = test_network();
    let params = init_params(&cfg, 11);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let h = 1e-3;
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let p = [rng.gen::<f64>(), rng.gen::<f64>()];
        let f = |dx: f64, dy: f64| forward(&params, &cfg, [p[0] + dx, p[1] + dy]);
        let d1 = |e: [f64; 2]| -> Result<f64> {
            Ok((-f(2.0 * h * e[0], 2.0 * h * e[1])? + 8.0 * f(h * e[0], h * e[1])? - 8.0 * f(-h * e[0], -h * e[1])?
                + f(-2.0 * h * e[0], -2.0 * h * e[1])?)
                / (12.0 * h))
        };
        let d2 = |e: [f64; 2]| -> Result<f64> {
            Ok((-f(2.0 * h * e[0], 2.0 * h * e[1])? + 16.0 * f(h * e[0], h * e[1])? - 30.0 * f(0.0, 0.0)?
                + 16.0 * f(-h * e[0], -h * e[1])?
                - f(-2.0 * h * e[0], -2.0 * h * e[1])?)
                / (12.0 * h * h))
        };
        let dxx = d2([1.0, 0.0])?;
        let dyy = d2([0.0, 1.0])?;
        // mixed partial from the diagonal direction
        let dxy = (d2([1.0, 1.0])? - dxx - dyy) / 2.0;
        let fd = [f(0.0, 0.0)?, d1([1.0, 0.0])?, d1([0.0, 1.0])?, dxx, dxy, dyy];
        let jet = forward_jet(&params, &cfg, p)?.slots();
        let scale = fd.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        worst = worst.max(max_rel(&jet, &fd, 1e-2 * scale));
    }
    Ok(CheckResult::below("jets_vs_finite_differences", worst, INPUT_TOL, "20 points, encoder [40,20]"))
}

/// Parameter gradients of every loss against central differences.
pub fn gradient_vs_finite_differences() -> Result<CheckResult> {
    let d = DomainSpec::Rectangle { a: 1.0, b: 1.0 };
    let segs = d.segments(&BoundarySpec::new("CSCF"))?;
    let s = SampleSet::generate(&d, &segs, 40, 8, 2)?;
    let cfg = NetworkConfig::autoencoder(&[6, 3], Activation::ScaledTanh)
        .with_scaling(InputScaling::from_bbox([0.0, 0.0], [1.0, 1.0]));
    let plate = PlateSpec::nondimensional(0.3)
        .with_load(Load::Uniform { p: 1.0 })
        .with_foundation(3.0)
        .with_inplane(InPlane { nx: 1.0, ny: 0.5, nxy: 0.0 });
    let lc = LossConfig { beta_w: 2.0, beta_theta: 3.0, kp: 10.0 };
    let x0 = init_params(&cfg, 4).flatten();
    let mut worst = 0.0f64;
    for problem in [Problem::Bending, Problem::Vibration, Problem::Buckling] {
        let obj = Objective::new(problem, &cfg, &s, &plate, &lc);
        let (_, g) = obj.value_and_gradient(&x0)?;
        let gmax = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let h = 1e-5;
        for i in 0..x0.len() {
            let f = |dv: f64| -> Result<f64> {
                let mut x = x0.clone();
                x[i] += dv;
                Ok(obj.value_and_gradient(&x)?.0)
            };
            let fd = (-f(2.0 * h)? + 8.0 * f(h)? - 8.0 * f(-h)? + f(-2.0 * h)?) / (12.0 * h);
            worst = worst.max((fd - g[i]).abs() / g[i].abs().max(1e-2 * gmax));
        }
    }
    Ok(CheckResult::below(
        "parameter_gradient_vs_finite_differences",
        worst,
        PARAM_TOL,
        "bending, vibration and buckling losses",
    ))
}

fn mc_case(name: &str, domain: DomainSpec, f: impl Fn([f64; 2]) -> f64, exact: f64) -> Result<CheckResult> {
    let n = 20_000;
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let s = sample_interior(&domain, n, &mut rng)?;
    let v: Vec<f64> = s.points.iter().map(|&p| f(p)).collect();
    let est = mc_integrate(&v, s.area)?;
    let mean = v.iter().sum::<f64>() / n as f64;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let stderr = s.area * (var / n as f64).sqrt();
    let z = (est - exact).abs() / stderr;
    Ok(CheckResult::below(name, z, 3.0, format!("estimate {est:.6} exact {exact:.6} (deviation in standard errors)")))
}

/// Monte-Carlo integrals with closed forms.
pub fn mc_closed_forms() -> Result<Vec<CheckResult>> {
    Ok(vec![
        mc_case("mc_square_polynomial", DomainSpec::Rectangle { a: 1.0, b: 1.0 }, |p| p[0] * p[0] * p[1], 1.0 / 6.0)?,
        mc_case(
            "mc_square_sine",
            DomainSpec::Rectangle { a: 1.0, b: 1.0 },
            |p| (PI * p[0]).sin() * (PI * p[1]).sin(),
            4.0 / (PI * PI),
        )?,
        mc_case(
            "mc_annulus_radial",
            DomainSpec::Annulus { outer: 1.0, inner: 0.5 },
            |p| p[0] * p[0] + p[1] * p[1],
            PI * (1.0 - 0.5f64.powi(4)) / 2.0,
        )?,
    ])
}

/// Empirical convergence order of the RMS Monte-Carlo error.
pub fn mc_convergence_slope() -> Result<CheckResult> {
    let domain = DomainSpec::Rectangle { a: 1.0, b: 1.0 };
    let exact = 1.0 / 6.0;
    let reps = 256;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for k in 6..=13 {
        let n = 1usize << k;
        let mut sq = 0.0;
        for r in 0..reps {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 * k as u64 + r);
            let s = sample_interior(&domain, n, &mut rng)?;
            let v: Vec<f64> = s.points.iter().map(|p| p[0] * p[0] * p[1]).collect();
            sq += (mc_integrate(&v, s.area)? - exact).powi(2);
        }
        xs.push((n as f64).ln());
        ys.push((sq / reps as f64).sqrt().ln());
    }
    let slope = least_squares_slope(&xs, &ys);
    Ok(CheckResult {
        name: "mc_convergence_slope".into(),
        passed: slope >= MC_SLOPE_RANGE.0 && slope <= MC_SLOPE_RANGE.1,
        measured: slope,
        tolerance: MC_SLOPE_RANGE.1,
        detail: format!("slope in [{}, {}]", MC_SLOPE_RANGE.0, MC_SLOPE_RANGE.1),
    })
}

pub fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

fn sine_mode(amp: f64) -> impl Fn([f64; 2]) -> Jet2 {
    move |p| {
        let (x, y) = jet_seed(p[0], p[1]);
        (x * PI).sin() * (y * PI).sin() * amp
    }
}

fn square_samples(edges: &str, n: usize, seed: u64) -> Result<SampleSet> {
    let d = DomainSpec::Rectangle { a: 1.0, b: 1.0 };
    let segs = d.segments(&BoundarySpec::new(edges))?;
    SampleSet::generate(&d, &segs, n, 64, seed)
}

/// Rayleigh quotient and buckling ratio under `w -> c w`.
pub fn rayleigh_scale_invariance() -> Result<CheckResult> {
    let cfg = test_network();
    let params = init_params(&cfg, 3);
    let s = square_samples("SSSS", 512, 4)?;
    let field: Vec<Jet2> = s.interior.iter().map(|&p| forward_jet(&params, &cfg, p)).collect::<Result<_>>()?;
    let plate = PlateSpec::nondimensional(0.3).with_inplane(InPlane { nx: 1.0, ny: 0.0, nxy: 0.0 });
    let r0 = rayleigh_quotient(&field, &plate, s.area)?;
    let b0 = buckling_ratio(&field, &plate, s.area)?;
    let mut mismatches = 0.0;
    for c in [2.0, 0.5, -4.0, 1024.0] {
        let scaled: Vec<Jet2> = field.iter().map(|w| *w * c).collect();
        let r = rayleigh_quotient(&scaled, &plate, s.area)?;
        let b = buckling_ratio(&scaled, &plate, s.area)?;
        if r.to_bits() != r0.to_bits() || b.to_bits() != b0.to_bits() {
            mismatches += 1.0;
        }
    }
    Ok(CheckResult::below("rayleigh_scale_invariance", mismatches, 0.0, "bitwise equality for power-of-two scalings"))
}

/// Losses evaluated on exact fields.
pub fn exact_mode_losses() -> Result<Vec<CheckResult>> {
    let tol = 2e-2;
    let s = square_samples("SSSS", 65536, 8)?;
    let lc = LossConfig::default();

    let w0 = 1.0 / (4.0 * PI.powi(4));
    let navier = FieldEval::from_fn(&s, sine_mode(w0));
    let plate = PlateSpec::nondimensional(0.3).with_load(Load::Sinusoidal { p0: 1.0, a: 1.0, b: 1.0 });
    let t = bending_loss(&navier, &s, &plate, &lc)?;
    let bend = (t.total - (-w0 / 8.0)).abs() / (w0 / 8.0);

    let mode = FieldEval::from_fn(&s, sine_mode(2.0));
    let plate = PlateSpec::nondimensional(0.3);
    let t = vibration_loss(&mode, &s, &plate, &lc)?;
    let four_pi4 = 4.0 * PI.powi(4);
    let vib = ((t.principal - four_pi4).abs() / four_pi4).max(t.normalization.abs()).max(t.mse_w);

    let plate = plate.with_inplane(InPlane { nx: 1.0, ny: 0.0, nxy: 0.0 });
    let t = buckling_loss(&mode, &s, &plate, &lc)?;
    let k = buckling_coefficient(t.principal, 1.0, &plate);
    let buck = ((k - 4.0).abs() / 4.0).max(t.normalization.abs()).max(t.mse_w);

    Ok(vec![
        CheckResult::below("exact_navier_energy", bend, tol, "total potential energy of the exact deflection"),
        CheckResult::below("exact_mode_vibration_loss", vib, tol, "quotient 4 pi^4, zero penalty"),
        CheckResult::below("exact_mode_buckling_loss", buck, tol, "coefficient 4, zero penalty"),
    ])
}

/// The exact mode has a lower vibration loss than perturbed admissible modes.
pub fn rayleigh_upper_bound() -> Result<CheckResult> {
    let s = square_samples("SSSS", 16384, 9)?;
    let plate = PlateSpec::nondimensional(0.3);
    let lc = LossConfig::default();
    let exact = vibration_loss(&FieldEval::from_fn(&s, sine_mode(2.0)), &s, &plate, &lc)?.total;
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut violations = 0.0;
    for _ in 0..20 {
        let c: [f64; 3] = [rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3)];
        let f = move |p: [f64; 2]| {
            let (x, y) = jet_seed(p[0], p[1]);
            let sx = (x * PI).sin();
            let sy = (y * PI).sin();
            (sx * sy
                + (x * (2.0 * PI)).sin() * sy * c[0]
                + sx * (y * (2.0 * PI)).sin() * c[1]
                + (x * (3.0 * PI)).sin() * (y * (3.0 * PI)).sin() * c[2])
                * 2.0
        };
        let t = vibration_loss(&FieldEval::from_fn(&s, f), &s, &plate, &lc)?;
        if t.total < exact {
            violations += 1.0;
        }
    }
    Ok(CheckResult::below("rayleigh_upper_bound", violations, 0.0, "20 perturbed simply supported modes"))
}

/// Identities between the closed-form oracles.
pub fn oracle_identities() -> Result<Vec<CheckResult>> {
    let w0 = 1.0 / (4.0 * PI.powi(4));
    let centre = (navier_deflection(0.5, 0.5, 1.0, 1.0, 1.0, 1.0) - w0).abs() / w0;
    // plate centre deflection under uniform load, simply supported square
    let reference = 0.004_062_35;
    let series = winkler_deflection(0.5, 0.5, 1.0, 1.0, 1.0, 1.0, 0.0, WINKLER_TERMS);
    let winkler = (series - reference).abs() / reference;
    let outer = annular_deflection(1.0, 1.0, 0.5, 1.0, 1.0, 0.3)?.abs();
    Ok(vec![
        CheckResult::below("oracle_navier_centre", centre, 1e-14, "centre deflection 1/(4 pi^4)"),
        CheckResult::below("oracle_series_without_foundation", winkler, 1e-4, "centre deflection 0.00406 q a^4 / D"),
        CheckResult::below("oracle_annulus_outer_edge", outer, 1e-12, "zero deflection on the supported edge"),
    ])
}

/// L-BFGS on the Rosenbrock function.
pub fn rosenbrock() -> Result<CheckResult> {
    let f = |x: &[f64]| -> Result<(f64, Vec<f64>)> {
        let (a, b) = (x[0], x[1]);
        Ok((
            (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2),
            vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)],
        ))
    };
    let cfg = OptimConfig { max_iter: 200, ..OptimConfig::default() };
    let (x, r) = train(f, &[-1.2, 1.0], &cfg)?;
    let err = ((x[0] - 1.0).powi(2) + (x[1] - 1.0).powi(2)).sqrt();
    let ok_term = r.termination != Termination::NonFinite && r.termination != Termination::MaxIter;
    Ok(CheckResult::below(
        "lbfgs_rosenbrock",
        if ok_term { err } else { f64::INFINITY },
        1e-6,
        format!("{} iterations, {}", r.iterations, r.termination.as_str()),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_checks_pass() {
        for c in run_all().unwrap() {
            assert!(c.passed, "{c:?}");
        }
    }

    #[test]
    fn slope_of_exact_power_law() {
        let xs: Vec<f64> = (1..6).map(|k| (k as f64).ln()).collect();
        let ys: Vec<f64> = xs.iter().map(|x| -0.5 * x + 3.0).collect();
        assert!((least_squares_slope(&xs, &ys) + 0.5).abs() < 1e-12);
    }
}

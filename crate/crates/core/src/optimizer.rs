//! Full-batch L-BFGS with a strong-Wolfe line search.
//!
//! The objective is any closure returning `(value, gradient)` for a flat
//! parameter vector. An evaluation that fails with [`Error::NonFinite`] or
//! returns a non-finite value is treated as an overshoot inside the line
//! search; training stops with [`Termination::NonFinite`] only when no finite
//! descent step can be found.

use std::collections::VecDeque;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pairs with `sᵀy` at or below this fraction of `yᵀy` are skipped.
pub const CURVATURE_EPS: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimConfig {
    pub memory: usize,
    pub max_iter: usize,
    pub g_tol: f64,
    pub f_tol: f64,
    pub c1: f64,
    pub c2: f64,
    pub max_line_search: usize,
}

impl Default for OptimConfig {
    fn default() -> Self {
        OptimConfig { memory: 20, max_iter: 2000, g_tol: 1e-9, f_tol: 1e-12, c1: 1e-4, c2: 0.9, max_line_search: 25 }
    }
}

impl OptimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(format!("optim: {m}")));
        if self.memory < 1 {
            return bad("memory must be at least 1");
        }
        if !(self.g_tol > 0.0 && self.f_tol > 0.0) {
            return bad("tolerances must be positive");
        }
        if !(0.0 < self.c1 && self.c1 < self.c2 && self.c2 < 1.0) {
            return bad("line search needs 0 < c1 < c2 < 1");
        }
        if self.max_line_search < 1 {
            return bad("max_line_search must be at least 1");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    GTol,
    FTol,
    MaxIter,
    NonFinite,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::GTol => "g_tol",
            Termination::FTol => "f_tol",
            Termination::MaxIter => "max_iter",
            Termination::NonFinite => "non_finite",
        }
    }
}

/// Named scalar computed from the trained network, e.g. a frequency parameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Derived {
    pub name: String,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub iterations: usize,
    pub evaluations: usize,
    /// Loss at the start and after every accepted step.
    pub losses: Vec<f64>,
    pub final_loss: f64,
    pub wall_time_s: f64,
    pub termination: Termination,
    /// Iterations where the Wolfe search failed and steepest descent was used.
    pub fallbacks: usize,
    pub derived: Option<Derived>,
}

#[derive(Clone, Debug)]
pub struct CurvaturePair {
    pub s: Vec<f64>,
    pub y: Vec<f64>,
}

impl CurvaturePair {
    pub fn is_admissible(&self) -> bool {
        let sy = dot(&self.s, &self.y);
        let yy = dot(&self.y, &self.y);
        sy.is_finite() && yy > 0.0 && sy > CURVATURE_EPS * yy
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// L-BFGS search direction `-H g` from the stored pairs, oldest first.
/// With no admissible pairs this is plain steepest descent.
pub fn two_loop_recursion(grad: &[f64], history: &[CurvaturePair]) -> Vec<f64> {
    let pairs: Vec<&CurvaturePair> = history.iter().filter(|p| p.is_admissible()).collect();
    let mut q = grad.to_vec();
    let mut alpha = vec![0.0; pairs.len()];
    for (k, p) in pairs.iter().enumerate().rev() {
        let rho = 1.0 / dot(&p.s, &p.y);
        alpha[k] = rho * dot(&p.s, &q);
        for (qi, yi) in q.iter_mut().zip(&p.y) {
            *qi -= alpha[k] * yi;
        }
    }
    let gamma = match pairs.last() {
        Some(p) => dot(&p.s, &p.y) / dot(&p.y, &p.y),
        None => 1.0,
    };
    for qi in q.iter_mut() {
        *qi *= gamma;
    }
    for (k, p) in pairs.iter().enumerate() {
        let rho = 1.0 / dot(&p.s, &p.y);
        let b = rho * dot(&p.y, &q);
        for (qi, si) in q.iter_mut().zip(&p.s) {
            *qi += (alpha[k] - b) * si;
        }
    }
    for qi in q.iter_mut() {
        *qi = -*qi;
    }
    q
}

struct Trial {
    alpha: f64,
    f: f64,
    g: Vec<f64>,
    /// Directional derivative; NaN when the evaluation failed.
    slope: f64,
}

impl Trial {
    fn finite(&self) -> bool {
        self.f.is_finite() && self.slope.is_finite()
    }
}

struct Problem<'f, F> {
    f: &'f mut F,
    evaluations: usize,
    any_non_finite: bool,
}

impl<F> Problem<'_, F>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    fn eval(&mut self, x: &[f64]) -> Result<Option<(f64, Vec<f64>)>> {
        self.evaluations += 1;
        match (self.f)(x) {
            Ok((v, g)) if v.is_finite() && g.iter().all(|t| t.is_finite()) => Ok(Some((v, g))),
            Ok(_) | Err(Error::NonFinite(_)) => {
                self.any_non_finite = true;
                Ok(None)
            }
            Err(e) => Err(e),
        }
    }

    fn trial(&mut self, x: &[f64], d: &[f64], alpha: f64) -> Result<Trial> {
        let xt: Vec<f64> = x.iter().zip(d).map(|(xi, di)| xi + alpha * di).collect();
        Ok(match self.eval(&xt)? {
            Some((f, g)) => {
                let slope = dot(&g, d);
                Trial { alpha, f, g, slope }
            }
            None => Trial { alpha, f: f64::INFINITY, g: Vec::new(), slope: f64::NAN },
        })
    }
}

/// Minimizer of the cubic through two points with slopes, if it exists.
fn cubic_min(a: &Trial, b: &Trial) -> Option<f64> {
    let d1 = a.slope + b.slope - 3.0 * (a.f - b.f) / (a.alpha - b.alpha);
    let disc = d1 * d1 - a.slope * b.slope;
    if !(disc >= 0.0) {
        return None;
    }
    let d2 = (b.alpha - a.alpha).signum() * disc.sqrt();
    let t = b.alpha - (b.alpha - a.alpha) * (b.slope + d2 - d1) / (b.slope - a.slope + 2.0 * d2);
    t.is_finite().then_some(t)
}

/// Strong-Wolfe search along `d`. Returns `None` when no acceptable step
/// is found within the trial budget.
fn wolfe_search<F>(
    prob: &mut Problem<F>,
    x: &[f64],
    f0: f64,
    d: &[f64],
    d0: f64,
    alpha0: f64,
    cfg: &OptimConfig,
) -> Result<Option<Trial>>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let armijo = |t: &Trial| t.f <= f0 + cfg.c1 * t.alpha * d0;
    let curvature = |t: &Trial| t.slope.abs() <= -cfg.c2 * d0;
    let mut prev = Trial { alpha: 0.0, f: f0, g: Vec::new(), slope: d0 };
    let mut alpha = alpha0;
    let mut used = 0;
    let (mut lo, mut hi);
    loop {
        if used == cfg.max_line_search {
            return Ok(None);
        }
        let t = prob.trial(x, d, alpha)?;
        used += 1;
        if !t.finite() || !armijo(&t) || (used > 1 && t.f >= prev.f) {
            lo = prev;
            hi = t;
            break;
        }
        if curvature(&t) {
            return Ok(Some(t));
        }
        if t.slope >= 0.0 {
            lo = t;
            hi = prev;
            break;
        }
        alpha = (2.0 * t.alpha).min(1e10);
        prev = t;
    }

    while used < cfg.max_line_search {
        let (a, b) = (lo.alpha.min(hi.alpha), lo.alpha.max(hi.alpha));
        let width = b - a;
        if width <= f64::EPSILON * b {
            return Ok(None);
        }
        let mid = 0.5 * (a + b);
        let guess = if hi.finite() { cubic_min(&lo, &hi) } else { None };
        let alpha = match guess {
            Some(t) if t > a + 0.1 * width && t < b - 0.1 * width => t,
            _ => mid,
        };
        let t = prob.trial(x, d, alpha)?;
        used += 1;
        if !t.finite() || !armijo(&t) || t.f >= lo.f {
            hi = t;
        } else {
            if curvature(&t) {
                return Ok(Some(t));
            }
            if t.slope * (hi.alpha - lo.alpha) >= 0.0 {
                hi = lo;
            }
            lo = t;
        }
    }
    Ok(None)
}

/// Armijo backtracking along steepest descent.
fn backtrack<F>(
    prob: &mut Problem<F>,
    x: &[f64],
    f0: f64,
    g: &[f64],
    cfg: &OptimConfig,
) -> Result<Option<(Trial, Vec<f64>)>>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let d: Vec<f64> = g.iter().map(|v| -v).collect();
    let d0 = -dot(g, g);
    let mut alpha = (1.0 / g.iter().map(|v| v.abs()).sum::<f64>()).min(1.0);
    for _ in 0..cfg.max_line_search {
        let t = prob.trial(x, &d, alpha)?;
        if t.finite() && t.f <= f0 + cfg.c1 * alpha * d0 && t.f < f0 {
            return Ok(Some((t, d)));
        }
        alpha *= 0.5;
    }
    Ok(None)
}

/// Minimizes `f` from `x0`. Fails only when the starting point itself is not
/// finite or the objective returns an error other than non-finite.
pub fn train<F>(mut f: F, x0: &[f64], cfg: &OptimConfig) -> Result<(Vec<f64>, TrainReport)>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    cfg.validate()?;
    let start = Instant::now();
    let mut prob = Problem { f: &mut f, evaluations: 0, any_non_finite: false };
    let mut x = x0.to_vec();
    let (mut fx, mut g) =
        prob.eval(&x)?.ok_or_else(|| Error::NonFinite("loss or gradient at the initial parameters".into()))?;
    let mut losses = vec![fx];
    let mut history: VecDeque<CurvaturePair> = VecDeque::with_capacity(cfg.memory);
    let mut fallbacks = 0;

    let termination = loop {
        if inf_norm(&g) <= cfg.g_tol {
            break Termination::GTol;
        }
        if losses.len() > cfg.max_iter {
            break Termination::MaxIter;
        }
        let pairs: Vec<CurvaturePair> = history.iter().cloned().collect();
        let mut d = two_loop_recursion(&g, &pairs);
        let mut d0 = dot(&g, &d);
        if !(d0 < 0.0) {
            history.clear();
            d = g.iter().map(|v| -v).collect();
            d0 = -dot(&g, &g);
        }
        let alpha0 = if history.is_empty() { (1.0 / inf_norm(&d)).min(1.0) } else { 1.0 };
        prob.any_non_finite = false;
        let step = match wolfe_search(&mut prob, &x, fx, &d, d0, alpha0, cfg)? {
            Some(t) => Some((t, d)),
            None => {
                fallbacks += 1;
                history.clear();
                backtrack(&mut prob, &x, fx, &g, cfg)?
            }
        };
        let Some((t, d)) = step else {
            if prob.any_non_finite {
                losses.push(f64::NAN);
                break Termination::NonFinite;
            }
            break Termination::FTol;
        };
        let s: Vec<f64> = d.iter().map(|v| t.alpha * v).collect();
        let y: Vec<f64> = t.g.iter().zip(&g).map(|(a, b)| a - b).collect();
        for (xi, si) in x.iter_mut().zip(&s) {
            *xi += si;
        }
        let f_prev = fx;
        fx = t.f;
        g = t.g;
        losses.push(fx);
        let pair = CurvaturePair { s, y };
        if pair.is_admissible() {
            if history.len() == cfg.memory {
                history.pop_front();
            }
            history.push_back(pair);
        }
        if (f_prev - fx).abs() <= cfg.f_tol * f_prev.abs().max(fx.abs()).max(1.0) {
            break Termination::FTol;
        }
    };

    let final_loss = losses.iter().rev().copied().find(|v| v.is_finite()).unwrap_or(f64::NAN);
    let report = TrainReport {
        iterations: losses.len() - 1,
        evaluations: prob.evaluations,
        losses,
        final_loss,
        wall_time_s: start.elapsed().as_secs_f64(),
        termination,
        fallbacks,
        derived: None,
    };
    Ok((x, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn bowl(target: Vec<f64>) -> impl FnMut(&[f64]) -> Result<(f64, Vec<f64>)> {
        move |x| {
            let d: Vec<f64> = x.iter().zip(&target).map(|(a, b)| a - b).collect();
            Ok((dot(&d, &d), d.iter().map(|v| 2.0 * v).collect()))
        }
    }

    fn rosenbrock(x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let (a, b) = (x[0], x[1]);
        let f = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
        let g = vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)];
        Ok((f, g))
    }

    #[test]
    fn default_config_is_valid() {
        OptimConfig::default().validate().unwrap();
        let bad = OptimConfig { c1: 0.95, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = OptimConfig { memory: 0, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn quadratic_bowl_converges() {
        let target = vec![1.0, -2.0, 3.5, 0.25, -0.75];
        let cfg = OptimConfig::default();
        let (x, r) = train(bowl(target.clone()), &[0.0; 5], &cfg).unwrap();
        for (a, b) in x.iter().zip(&target) {
            assert!((a - b).abs() < 1e-8);
        }
        assert!(r.iterations <= 2 * cfg.memory);
    }

    #[test]
    fn rosenbrock_converges() {
        let (x, r) = train(rosenbrock, &[-1.2, 1.0], &OptimConfig::default()).unwrap();
        assert!(r.final_loss < 1e-10, "{r:?}");
        assert!(r.iterations <= 200);
        assert!((x[0] - 1.0).abs() < 1e-4 && (x[1] - 1.0).abs() < 1e-4);
    }

    #[test]
    fn loss_never_increases() {
        let (_, r) = train(rosenbrock, &[-1.2, 1.0], &OptimConfig::default()).unwrap();
        assert!(r.losses.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn empty_history_is_steepest_descent() {
        let g = [1.0, -2.0, 0.5];
        assert_eq!(two_loop_recursion(&g, &[]), vec![-1.0, 2.0, -0.5]);
    }

    #[test]
    fn exact_history_recovers_newton_direction() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 5;
        // A = BᵀB + I
        let bm: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let mut a = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                a[i][j] = (0..n).map(|k| bm[k][i] * bm[k][j]).sum::<f64>() + if i == j { 1.0 } else { 0.0 };
            }
        }
        let mul = |v: &[f64]| -> Vec<f64> { (0..n).map(|i| dot(&a[i], v)).collect() };
        // A-conjugate steps, as produced by exact line searches on a quadratic
        let mut steps: Vec<Vec<f64>> = Vec::new();
        for _ in 0..n {
            let mut s: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            for p in &steps {
                let ap = mul(p);
                let c = dot(&s, &ap) / dot(p, &ap);
                for (si, pi) in s.iter_mut().zip(p) {
                    *si -= c * pi;
                }
            }
            steps.push(s);
        }
        let history: Vec<CurvaturePair> = steps
            .into_iter()
            .map(|s| {
                let y = mul(&s);
                CurvaturePair { s, y }
            })
            .collect();
        let g: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let d = two_loop_recursion(&g, &history);
        // A d should equal -g
        let ad = mul(&d);
        for (x, y) in ad.iter().zip(&g) {
            assert!((x + y).abs() < 1e-10, "{x} vs {}", -y);
        }
    }

    #[test]
    fn random_histories_give_descent() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let n = rng.gen_range(1..8);
            let m = rng.gen_range(0..6);
            let mut history = Vec::new();
            while history.len() < m {
                let s: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let p = CurvaturePair { s, y };
                if p.is_admissible() {
                    history.push(p);
                }
            }
            let g: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let d = two_loop_recursion(&g, &history);
            assert!(dot(&d, &g) < 0.0);
        }
    }

    #[test]
    fn violating_pairs_are_skipped() {
        let bad = CurvaturePair { s: vec![1.0, 0.0], y: vec![-1.0, 0.0] };
        let g = [0.5, 0.5];
        assert_eq!(two_loop_recursion(&g, &[bad]), vec![-0.5, -0.5]);
    }

    #[test]
    fn training_is_deterministic() {
        let cfg = OptimConfig::default();
        let (xa, ra) = train(rosenbrock, &[-1.2, 1.0], &cfg).unwrap();
        let (xb, rb) = train(rosenbrock, &[-1.2, 1.0], &cfg).unwrap();
        assert_eq!(xa, xb);
        assert_eq!(ra.losses, rb.losses);
        assert_eq!(ra.termination, rb.termination);
    }

    #[test]
    fn termination_g_tol() {
        let (_, r) = train(bowl(vec![0.5, 0.5]), &[0.0, 0.0], &OptimConfig::default()).unwrap();
        assert_eq!(r.termination, Termination::GTol);
    }

    #[test]
    fn termination_max_iter() {
        let cfg = OptimConfig { max_iter: 3, ..Default::default() };
        let (_, r) = train(rosenbrock, &[-1.2, 1.0], &cfg).unwrap();
        assert_eq!(r.termination, Termination::MaxIter);
        assert_eq!(r.iterations, 3);
        assert_eq!(r.losses.len(), 4);
    }

    #[test]
    fn termination_f_tol() {
        // a large offset makes the relative loss change negligible after one step
        let f = |x: &[f64]| -> Result<(f64, Vec<f64>)> { Ok((1e6 + x[0] * x[0], vec![2.0 * x[0]])) };
        let cfg = OptimConfig { f_tol: 1e-3, ..Default::default() };
        let (_, r) = train(f, &[1.0], &cfg).unwrap();
        assert_eq!(r.termination, Termination::FTol);
        assert_eq!(r.iterations, 1);
    }

    #[test]
    fn termination_non_finite() {
        // finite only at the starting point
        let f = |x: &[f64]| -> Result<(f64, Vec<f64>)> {
            if x[0] == 1.0 {
                Ok((1.0, vec![1.0]))
            } else {
                Ok((f64::NAN, vec![f64::NAN]))
            }
        };
        let (x, r) = train(f, &[1.0], &OptimConfig::default()).unwrap();
        assert_eq!(r.termination, Termination::NonFinite);
        assert_eq!(x, vec![1.0]);
        assert!(r.losses.last().unwrap().is_nan());
        assert!(r.losses[..r.losses.len() - 1].iter().all(|v| v.is_finite()));
        assert_eq!(r.final_loss, 1.0);
    }

    #[test]
    fn non_finite_start_is_an_error() {
        let f = |_: &[f64]| -> Result<(f64, Vec<f64>)> { Err(Error::NonFinite("x".into())) };
        assert!(matches!(train(f, &[0.0], &OptimConfig::default()), Err(Error::NonFinite(_))));
    }

    #[test]
    fn overshoot_into_nan_region_is_recovered() {
        // NaN outside |x| < 2 forces the search to shrink but a minimum exists inside
        let f = |x: &[f64]| -> Result<(f64, Vec<f64>)> {
            if x[0].abs() >= 2.0 {
                return Err(Error::NonFinite("outside".into()));
            }
            Ok(((x[0] - 1.0).powi(2), vec![2.0 * (x[0] - 1.0)]))
        };
        let (x, r) = train(f, &[-1.9], &OptimConfig::default()).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-6, "{r:?}");
    }
}

//! End-to-end runs: sampling, best-of-K training, derived quantities,
//! reference comparison and artifact export.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::geometry::{DomainSpec, SampleSet};
use crate::losses::{LossConfig, LossTerms, Problem};
use crate::network::{forward, init_params, save_checkpoint, NetworkConfig, NetworkParams};
use crate::objective::Objective;
use crate::optimizer::{train, Derived, Termination, TrainReport};
use crate::oracles::{
    annular_deflection, navier_deflection, reference_for, relative_error, winkler_deflection, Case, RefTable,
    WINKLER_TERMS,
};
use crate::parallel::{self, Execution};
use crate::plate::{buckling_coefficient, frequency_parameter, Load, PlateSpec};

/// Points used to normalise exported mode shapes.
const NORMALIZATION_POINTS: usize = 65536;

pub const REPORT_FILE: &str = "report.toml";
pub const TIMING_FILE: &str = "timing.toml";
pub const CHECKPOINT_FILE: &str = "checkpoint.plnt";
pub const FIELD_FILE: &str = "field.csv";
pub const SAMPLES_FILE: &str = "samples.csv";

/// Closed-form solution matched to a bending config.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Oracle {
    Navier { a: f64, b: f64, p0: f64, d: f64 },
    Winkler { a: f64, b: f64, p: f64, d: f64, k: f64 },
    Annular { a: f64, b: f64, q: f64, d: f64, nu: f64 },
}

impl Oracle {
    pub fn name(&self) -> &'static str {
        match self {
            Oracle::Navier { .. } => "navier",
            Oracle::Winkler { .. } => "winkler_series",
            Oracle::Annular { .. } => "annular",
        }
    }

    /// Exact deflection, or `None` outside the oracle's domain.
    pub fn eval(&self, x: [f64; 2]) -> Option<f64> {
        match *self {
            Oracle::Navier { a, b, p0, d } => Some(navier_deflection(x[0], x[1], a, b, p0, d)),
            Oracle::Winkler { a, b, p, d, k } => Some(winkler_deflection(x[0], x[1], a, b, p, d, k, WINKLER_TERMS)),
            Oracle::Annular { a, b, q, d, nu } => annular_deflection(x[0].hypot(x[1]), a, b, q, d, nu).ok(),
        }
    }
}

fn homogeneous(cfg: &RunConfig) -> bool {
    let b = &cfg.boundary;
    b.w_target == 0.0 && b.theta_target == 0.0 && b.shear_load == 0.0 && b.moment_load == 0.0
}

/// Finds a closed-form solution for the configured bending problem.
pub fn match_oracle(cfg: &RunConfig) -> Option<Oracle> {
    if cfg.problem != Problem::Bending || !homogeneous(cfg) {
        return None;
    }
    let plate = cfg.plate_spec();
    let d = plate.rigidity;
    let k = plate.foundation;
    match (cfg.domain, cfg.boundary.edges.as_str(), cfg.load) {
        (DomainSpec::Rectangle { a, b }, "SSSS", Load::Sinusoidal { p0, a: la, b: lb })
            if k == 0.0 && la == a && lb == b =>
        {
            Some(Oracle::Navier { a, b, p0, d })
        }
        (DomainSpec::Rectangle { a, b }, "SSSS", Load::Uniform { p }) => Some(Oracle::Winkler { a, b, p, d, k }),
        (DomainSpec::Annulus { outer, inner }, "S", Load::Uniform { p }) if k == 0.0 && cfg.boundary.inner == "F" => {
            Some(Oracle::Annular { a: outer, b: inner, q: p, d, nu: plate.poisson })
        }
        _ => None,
    }
}

/// Reference-table row that matches an eigenvalue config, if any.
pub fn match_reference(cfg: &RunConfig) -> Option<(&'static str, Case)> {
    if !homogeneous(cfg) {
        return None;
    }
    let edges = cfg.boundary.edges.clone();
    match (cfg.problem, cfg.domain) {
        (Problem::Vibration, DomainSpec::Rectangle { a, b }) if a == b => {
            Some(("vibration", Case::new(&edges, 0.0, 0.0)))
        }
        (Problem::Vibration, DomainSpec::SquareCutout { ratio, .. }) if cfg.boundary.inner == "F" => {
            Some(("vibration", Case::new(&edges, ratio, 0.0)))
        }
        (Problem::Buckling, dom) => {
            let n = cfg.inplane;
            if !(n.nx > 0.0 && n.ny == 0.0 && n.nxy == 0.0) {
                return None;
            }
            let (a, b, angle) = match dom {
                DomainSpec::Rectangle { a, b } => (a, b, 0.0),
                DomainSpec::Skew { a, b, angle_deg } => (a, b, angle_deg),
                _ => return None,
            };
            Some(("buckling", Case::new(&edges, a / b, angle)))
        }
        _ => None,
    }
}

fn reference_tables(problem: Problem) -> &'static [RefTable] {
    match problem {
        Problem::Vibration => &[RefTable::CutoutFrequency, RefTable::CutoutEdges],
        Problem::Buckling => &[RefTable::SkewSimplySupported, RefTable::SkewClamped],
        Problem::Bending => &[],
    }
}

/// Length `L` in the frequency parameter.
fn frequency_length(domain: &DomainSpec) -> f64 {
    match *domain {
        DomainSpec::Rectangle { a, .. } => a,
        DomainSpec::SquareCutout { side, .. } => side,
        DomainSpec::Annulus { outer, .. } => outer,
        DomainSpec::Skew { a, .. } => a,
    }
}

/// Side `b` in the buckling coefficient.
fn buckling_width(domain: &DomainSpec) -> f64 {
    match *domain {
        DomainSpec::Rectangle { b, .. } => b,
        DomainSpec::SquareCutout { side, .. } => side,
        DomainSpec::Annulus { outer, .. } => 2.0 * outer,
        DomainSpec::Skew { b, .. } => b,
    }
}

/// Converts the principal loss term into the reported quantity.
pub fn derived_quantity(cfg: &RunConfig, plate: &PlateSpec, terms: &LossTerms) -> Option<Derived> {
    match cfg.problem {
        Problem::Bending => None,
        Problem::Vibration => Some(Derived {
            name: "omega_bar".into(),
            value: frequency_parameter(terms.principal, frequency_length(&cfg.domain), plate),
        }),
        Problem::Buckling => {
            let n = plate.inplane;
            if n.ny == 0.0 && n.nxy == 0.0 {
                Some(Derived {
                    name: "k_cr".into(),
                    value: buckling_coefficient(terms.principal * n.nx, buckling_width(&cfg.domain), plate),
                })
            } else {
                Some(Derived { name: "lambda_cr".into(), value: terms.principal })
            }
        }
    }
}

/// One trained initialisation.
#[derive(Clone, Debug)]
pub struct SeedRun {
    pub seed: u64,
    pub report: TrainReport,
    pub params: NetworkParams,
    /// Loss terms of the final parameters on the training samples.
    pub terms: Option<LossTerms>,
    /// Indices into `report.losses` where each continuation stage starts.
    pub stage_starts: Vec<usize>,
}

impl SeedRun {
    pub fn finite(&self) -> bool {
        self.report.termination != Termination::NonFinite && self.terms.is_some()
    }
}

/// Everything a command prints or writes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub problem: Problem,
    pub best_seed: u64,
    pub termination: Termination,
    pub final_loss: f64,
    pub terms: Option<LossTerms>,
    pub derived: Option<Derived>,
    /// The derived quantity re-evaluated on fresh quadrature points.
    pub derived_fresh: Option<f64>,
    pub reference: Option<ReferenceComparison>,
    pub oracle: Option<OracleComparison>,
    pub runs: Vec<SeedSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub termination: Termination,
    pub iterations: usize,
    pub evaluations: usize,
    pub fallbacks: usize,
    pub final_loss: f64,
    pub derived: Option<f64>,
    /// Training-loss trajectory; warm-up stages come first.
    pub losses: Vec<f64>,
    /// Indices into `losses` where each continuation stage starts.
    pub stage_starts: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceComparison {
    pub table: String,
    pub column: String,
    pub raw: String,
    pub value: f64,
    pub relative_deviation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleComparison {
    pub name: String,
    /// Relative ℓ² error over the in-domain points of the evaluation grid.
    pub relative_error: f64,
    pub grid_points: usize,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub config: RunConfig,
    pub network: NetworkConfig,
    pub plate: PlateSpec,
    pub samples: SampleSet,
    pub runs: Vec<SeedRun>,
    pub best: usize,
    pub summary: RunSummary,
}

impl RunOutcome {
    pub fn best_run(&self) -> &SeedRun {
        &self.runs[self.best]
    }

    pub fn is_non_finite(&self) -> bool {
        self.summary.termination == Termination::NonFinite
    }
}

fn scaled_loss(loss: &LossConfig, factor: f64) -> LossConfig {
    LossConfig { beta_w: loss.beta_w * factor, beta_theta: loss.beta_theta * factor, kp: loss.kp }
}

fn train_seed(
    cfg: &RunConfig,
    network: &NetworkConfig,
    samples: &SampleSet,
    plate: &PlateSpec,
    seed: u64,
    execution: Execution,
) -> Result<SeedRun> {
    let mut x = init_params(network, seed).flatten();
    let mut stages: Vec<(LossConfig, usize)> =
        cfg.continuation.factors.iter().map(|&f| (scaled_loss(&cfg.loss, f), cfg.continuation.max_iter)).collect();
    stages.push((cfg.loss.clone(), cfg.optim.max_iter));

    let mut merged: Option<TrainReport> = None;
    let mut stage_starts = Vec::new();
    for (loss, max_iter) in &stages {
        let objective = Objective::new(cfg.problem, network, samples, plate, loss).with_execution(execution);
        let optim = crate::optimizer::OptimConfig { max_iter: *max_iter, ..cfg.optim.clone() };
        let (xn, report) = match train(|p| objective.value_and_gradient(p), &x, &optim) {
            Ok(r) => r,
            Err(Error::NonFinite(_)) => (
                x.clone(),
                TrainReport {
                    iterations: 0,
                    evaluations: 1,
                    losses: vec![f64::NAN],
                    final_loss: f64::NAN,
                    wall_time_s: 0.0,
                    termination: Termination::NonFinite,
                    fallbacks: 0,
                    derived: None,
                },
            ),
            Err(e) => return Err(e),
        };
        x = xn;
        stage_starts.push(merged.as_ref().map_or(0, |m| m.losses.len()));
        let stop = report.termination == Termination::NonFinite;
        merged = Some(match merged {
            None => report,
            Some(mut m) => {
                m.iterations += report.iterations;
                m.evaluations += report.evaluations;
                m.losses.extend(report.losses);
                m.final_loss = report.final_loss;
                m.wall_time_s += report.wall_time_s;
                m.termination = report.termination;
                m.fallbacks += report.fallbacks;
                m
            }
        });
        if stop {
            break;
        }
    }
    let mut report = merged.expect("at least one stage");
    let mut params = NetworkParams::zeros(network);
    params.assign(&x)?;
    let final_objective = Objective::new(cfg.problem, network, samples, plate, &cfg.loss).with_execution(execution);
    let terms = match final_objective.loss_terms(&params) {
        Ok(t) if t.total.is_finite() => Some(t),
        Ok(_) | Err(Error::NonFinite(_)) | Err(Error::Degenerate(_)) => None,
        Err(e) => return Err(e),
    };
    report.derived = terms.as_ref().and_then(|t| derived_quantity(cfg, plate, t));
    Ok(SeedRun { seed, report, params, terms, stage_starts })
}

/// Trains every seed and assembles the summary.
pub fn run(cfg: &RunConfig, execution: Execution) -> Result<RunOutcome> {
    cfg.validate()?;
    let network = cfg.network_config();
    let plate = cfg.plate_spec();
    let segments = cfg.segments()?;
    let samples = SampleSet::generate(&cfg.domain, &segments, cfg.n_interior, cfg.n_boundary, cfg.sample_seed)?;

    let results =
        parallel::map(execution, &cfg.seeds, |&seed| train_seed(cfg, &network, &samples, &plate, seed, execution));
    let runs: Vec<SeedRun> = results.into_iter().collect::<Result<_>>()?;
    let best = select_best(&runs);
    let summary = summarize(cfg, &network, &plate, &runs, best, execution)?;
    Ok(RunOutcome { config: cfg.clone(), network, plate, samples, runs, best, summary })
}

/// Lowest final loss among finite runs; the first run if none is finite.
pub fn select_best(runs: &[SeedRun]) -> usize {
    runs.iter()
        .enumerate()
        .filter(|(_, r)| r.finite())
        .min_by(|a, b| a.1.report.final_loss.total_cmp(&b.1.report.final_loss))
        .map(|(i, _)| i)
        .unwrap_or(0)
}

fn summarize(
    cfg: &RunConfig,
    network: &NetworkConfig,
    plate: &PlateSpec,
    runs: &[SeedRun],
    best: usize,
    execution: Execution,
) -> Result<RunSummary> {
    let b = &runs[best];
    let derived = b.report.derived.clone();
    let derived_fresh = match (&derived, b.finite()) {
        (Some(_), true) => {
            let segments = cfg.segments()?;
            let fresh = SampleSet::generate(
                &cfg.domain,
                &segments,
                cfg.n_interior,
                cfg.n_boundary,
                cfg.sample_seed.wrapping_add(1),
            )?;
            let obj = Objective::new(cfg.problem, network, &fresh, plate, &cfg.loss).with_execution(execution);
            obj.loss_terms(&b.params).ok().and_then(|t| derived_quantity(cfg, plate, &t)).map(|d| d.value)
        }
        _ => None,
    };
    let reference = match (&derived, match_reference(cfg)) {
        (Some(d), Some((_, case))) => {
            reference_for(reference_tables(cfg.problem), &case).map(|e| ReferenceComparison {
                table: e.table.name().to_string(),
                column: e.column.to_string(),
                raw: e.raw.to_string(),
                value: e.value,
                relative_deviation: (d.value - e.value).abs() / e.value.abs(),
            })
        }
        _ => None,
    };
    let oracle = match (match_oracle(cfg), b.finite()) {
        (Some(o), true) => {
            let grid = evaluation_grid(&cfg.domain, cfg.grid);
            let mut pred = Vec::new();
            let mut exact = Vec::new();
            for (p, inside) in &grid {
                if !inside {
                    continue;
                }
                if let Some(e) = o.eval(*p) {
                    pred.push(forward(&b.params, network, *p)?);
                    exact.push(e);
                }
            }
            Some(OracleComparison {
                name: o.name().to_string(),
                relative_error: relative_error(&pred, &exact)?,
                grid_points: pred.len(),
            })
        }
        _ => None,
    };
    Ok(RunSummary {
        problem: cfg.problem,
        best_seed: b.seed,
        termination: if runs.iter().any(|r| r.finite()) { b.report.termination } else { Termination::NonFinite },
        final_loss: b.report.final_loss,
        terms: b.terms,
        derived,
        derived_fresh,
        reference,
        oracle,
        runs: runs
            .iter()
            .map(|r| SeedSummary {
                seed: r.seed,
                termination: r.report.termination,
                iterations: r.report.iterations,
                evaluations: r.report.evaluations,
                fallbacks: r.report.fallbacks,
                final_loss: r.report.final_loss,
                derived: r.report.derived.as_ref().map(|d| d.value),
                losses: r.report.losses.clone(),
                stage_starts: r.stage_starts.clone(),
            })
            .collect(),
    })
}

/// Tensor grid over the bounding box with an in-domain flag, row by row in `y`.
pub fn evaluation_grid(domain: &DomainSpec, n: usize) -> Vec<([f64; 2], bool)> {
    let (lo, hi) = domain.bbox();
    let n = n.max(2);
    let mut out = Vec::with_capacity(n * n);
    for j in 0..n {
        let y = lo[1] + (hi[1] - lo[1]) * j as f64 / (n - 1) as f64;
        for i in 0..n {
            let x = lo[0] + (hi[0] - lo[0]) * i as f64 / (n - 1) as f64;
            let p = [x, y];
            out.push((p, domain.contains(p)));
        }
    }
    out
}

/// Factor that scales a mode shape to unit `∫w² dΩ` with a positive extremum.
pub fn mode_scale(cfg: &RunConfig, network: &NetworkConfig, params: &NetworkParams) -> Result<f64> {
    let segments = cfg.segments()?;
    let s = SampleSet::generate(&cfg.domain, &segments, NORMALIZATION_POINTS, 1, cfg.sample_seed.wrapping_add(2))?;
    let mut sq = 0.0;
    let mut extreme = 0.0f64;
    for p in &s.interior {
        let w = forward(params, network, *p)?;
        sq += w * w;
        if w.abs() > extreme.abs() {
            extreme = w;
        }
    }
    let norm = sq * s.area / s.interior.len() as f64;
    if !(norm > 0.0) {
        return Err(Error::Degenerate("mode shape vanishes".into()));
    }
    Ok(extreme.signum() / norm.sqrt())
}

/// Writes the deflection or mode field on the evaluation grid.
pub fn write_field_csv<W: Write>(
    mut out: W,
    cfg: &RunConfig,
    network: &NetworkConfig,
    params: &NetworkParams,
) -> Result<()> {
    let oracle = match_oracle(cfg);
    let scale = match cfg.problem {
        Problem::Bending => 1.0,
        Problem::Vibration | Problem::Buckling => mode_scale(cfg, network, params)?,
    };
    writeln!(out, "x,y,in_domain,w_pred,w_exact,abs_err")?;
    for (p, inside) in evaluation_grid(&cfg.domain, cfg.grid) {
        let w = scale * forward(params, network, p)?;
        let exact = if inside { oracle.and_then(|o| o.eval(p)) } else { None };
        match exact {
            Some(e) => writeln!(out, "{},{},{},{},{},{}", p[0], p[1], inside as u8, w, e, (w - e).abs())?,
            None => writeln!(out, "{},{},{},{},nan,nan", p[0], p[1], inside as u8, w)?,
        }
    }
    Ok(())
}

/// One row of a field CSV.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldRow {
    pub x: f64,
    pub y: f64,
    pub in_domain: bool,
    pub w_pred: f64,
    pub w_exact: f64,
    pub abs_err: f64,
}

pub fn read_field_csv(text: &str) -> Result<Vec<FieldRow>> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Parse("empty field file".into()))?;
    if header.trim() != "x,y,in_domain,w_pred,w_exact,abs_err" {
        return Err(Error::Parse(format!("unexpected header {header:?}")));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let v: Vec<&str> = line.split(',').collect();
            if v.len() != 6 {
                return Err(Error::Parse(format!("line {}: expected 6 columns", i + 2)));
            }
            let f = |s: &str| -> Result<f64> {
                s.trim().parse().map_err(|_| Error::Parse(format!("line {}: bad number {s:?}", i + 2)))
            };
            Ok(FieldRow {
                x: f(v[0])?,
                y: f(v[1])?,
                in_domain: f(v[2])? != 0.0,
                w_pred: f(v[3])?,
                w_exact: f(v[4])?,
                abs_err: f(v[5])?,
            })
        })
        .collect()
}

/// Wall-clock data kept apart from the report so reports stay reproducible.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Timing {
    pub seeds: Vec<u64>,
    pub wall_time_s: Vec<f64>,
}

/// Paths of the artifacts written for a run.
#[derive(Clone, Debug)]
pub struct Artifacts {
    pub report: PathBuf,
    pub timing: PathBuf,
    pub checkpoint: PathBuf,
    pub field: PathBuf,
    pub samples: PathBuf,
}

pub fn write_report(summary: &RunSummary) -> String {
    toml::to_string(summary).expect("summary serializes")
}

pub fn read_report(text: &str) -> Result<RunSummary> {
    toml::from_str(text).map_err(|e| Error::Parse(e.message().to_string()))
}

/// Writes report, timing, checkpoint, field and sample files into `dir`.
pub fn write_artifacts(outcome: &RunOutcome, dir: &Path) -> Result<Artifacts> {
    std::fs::create_dir_all(dir)?;
    let a = Artifacts {
        report: dir.join(REPORT_FILE),
        timing: dir.join(TIMING_FILE),
        checkpoint: dir.join(CHECKPOINT_FILE),
        field: dir.join(FIELD_FILE),
        samples: dir.join(SAMPLES_FILE),
    };
    let best = outcome.best_run();
    std::fs::write(&a.report, write_report(&outcome.summary))?;
    let timing = Timing {
        seeds: outcome.runs.iter().map(|r| r.seed).collect(),
        wall_time_s: outcome.runs.iter().map(|r| r.report.wall_time_s).collect(),
    };
    std::fs::write(&a.timing, toml::to_string(&timing).expect("timing serializes"))?;
    save_checkpoint(&a.checkpoint, &outcome.network, &best.params, best.seed)?;
    let mut buf = Vec::new();
    write_field_csv(&mut buf, &outcome.config, &outcome.network, &best.params)?;
    std::fs::write(&a.field, buf)?;
    let mut buf = Vec::new();
    outcome.samples.write_csv(&mut buf)?;
    std::fs::write(&a.samples, buf)?;
    Ok(a)
}

/// `∫w²` of a field CSV by the grid rule over in-domain points.
pub fn grid_mean_square(rows: &[FieldRow], area: f64) -> f64 {
    let inside: Vec<f64> = rows.iter().filter(|r| r.in_domain).map(|r| r.w_pred * r.w_pred).collect();
    if inside.is_empty() {
        return 0.0;
    }
    area * inside.iter().sum::<f64>() / inside.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizer::Termination;

    const SMALL: &str = r#"
problem = "bending"
seeds = [0, 1]
n_interior = 256
n_boundary = 16
grid = 9

[domain]
kind = "rectangle"
a = 1.0
b = 1.0

[boundary]
edges = "SSSS"

[plate]
poisson = 0.3

[load]
kind = "sinusoidal"
p0 = 1.0
a = 1.0
b = 1.0

[network]
encoder = [5, 3]
activation = "scaled_tanh"

[loss]
beta_w = 100.0

[optim]
max_iter = 8

[continuation]
factors = [0.1]
max_iter = 5
"#;

    fn small() -> RunConfig {
        RunConfig::from_toml(SMALL).unwrap()
    }

    #[test]
    fn oracles_match_their_configs() {
        let cfg = small();
        assert!(matches!(match_oracle(&cfg), Some(Oracle::Navier { .. })));

        let mut c = small();
        c.load = Load::Uniform { p: 1.0 };
        c.plate.foundation = 50.0;
        assert!(matches!(match_oracle(&c), Some(Oracle::Winkler { k, .. }) if k == 50.0));

        c.boundary.edges = "CSSS".into();
        assert_eq!(match_oracle(&c), None);

        let mut c = small();
        c.domain = DomainSpec::Annulus { outer: 1.0, inner: 0.5 };
        c.boundary.edges = "S".into();
        c.load = Load::Uniform { p: 2.0 };
        assert!(matches!(match_oracle(&c), Some(Oracle::Annular { q, .. }) if q == 2.0));
        c.boundary.inner = "S".into();
        assert_eq!(match_oracle(&c), None);

        let mut c = small();
        c.boundary.w_target = 0.1;
        assert_eq!(match_oracle(&c), None);
    }

    #[test]
    fn references_match_eigen_configs() {
        let mut c = small();
        c.problem = Problem::Vibration;
        c.load = Load::None;
        c.domain = DomainSpec::SquareCutout { side: 1.0, ratio: 0.4 };
        c.boundary.edges = "CSCS".into();
        let (kind, case) = match_reference(&c).unwrap();
        assert_eq!(kind, "vibration");
        assert_eq!(case, Case::new("CSCS", 0.4, 0.0));
        let e = reference_for(reference_tables(c.problem), &case).unwrap();
        assert_eq!(e.raw, "35,4996");

        c.problem = Problem::Buckling;
        c.domain = DomainSpec::Skew { a: 1.0, b: 1.0, angle_deg: 45.0 };
        c.boundary.edges = "CCCC".into();
        c.inplane.nx = 1.0;
        let (_, case) = match_reference(&c).unwrap();
        let e = reference_for(reference_tables(c.problem), &case).unwrap();
        assert_eq!(e.raw, "20,4000");

        c.inplane.ny = 1.0;
        assert_eq!(match_reference(&c), None);
    }

    #[test]
    fn derived_quantities_of_exact_values() {
        let mut c = small();
        let plate = PlateSpec::nondimensional(0.3);
        let terms = LossTerms { principal: 4.0 * std::f64::consts::PI.powi(4), ..LossTerms::default() };
        assert!(derived_quantity(&c, &plate, &terms).is_none());
        c.problem = Problem::Vibration;
        let d = derived_quantity(&c, &plate, &terms).unwrap();
        assert_eq!(d.name, "omega_bar");
        assert!((d.value - 2.0 * std::f64::consts::PI.powi(2)).abs() < 1e-12);

        c.problem = Problem::Buckling;
        let plate = plate.with_inplane(crate::plate::InPlane { nx: 2.0, ny: 0.0, nxy: 0.0 });
        let terms = LossTerms { principal: 2.0 * std::f64::consts::PI.powi(2), ..LossTerms::default() };
        // λ N_x = 4π²
        let d = derived_quantity(&c, &plate, &terms).unwrap();
        assert_eq!(d.name, "k_cr");
        assert!((d.value - 4.0).abs() < 1e-12);
    }

    #[test]
    fn grid_is_row_major_with_mask() {
        let g = evaluation_grid(&DomainSpec::SquareCutout { side: 1.0, ratio: 0.4 }, 11);
        assert_eq!(g.len(), 121);
        assert_eq!(g[1].0, [0.1, 0.0]);
        assert_eq!(g[11].0, [0.0, 0.1]);
        assert!(!g[60].1);
        assert!(g[0].1);
    }

    #[test]
    fn best_run_skips_non_finite() {
        let o = run(&small(), Execution::Sequential).unwrap();
        let mut runs = o.runs.clone();
        assert_eq!(runs.len(), 2);
        runs[0].report.final_loss = -1.0;
        runs[0].report.termination = Termination::NonFinite;
        runs[1].report.final_loss = 5.0;
        assert_eq!(select_best(&runs), 1);
        runs[0].report.termination = Termination::MaxIter;
        assert_eq!(select_best(&runs), 0);
    }

    #[test]
    fn continuation_stages_are_recorded() {
        let o = run(&small(), Execution::Sequential).unwrap();
        for r in &o.summary.runs {
            assert_eq!(r.stage_starts.len(), 2);
            assert_eq!(r.losses.len(), r.iterations + 2);
            let split = r.stage_starts[1];
            for w in r.losses[..split].windows(2).chain(r.losses[split..].windows(2)) {
                assert!(w[1] <= w[0]);
            }
        }
        assert!(o.summary.oracle.as_ref().unwrap().grid_points == 81);
    }

    #[test]
    fn report_and_field_round_trip() {
        let o = run(&small(), Execution::Sequential).unwrap();
        let text = write_report(&o.summary);
        assert_eq!(read_report(&text).unwrap(), o.summary);
        let mut buf = Vec::new();
        write_field_csv(&mut buf, &o.config, &o.network, &o.best_run().params).unwrap();
        let rows = read_field_csv(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(rows.len(), 81);
        let r = rows[40];
        let w = forward(&o.best_run().params, &o.network, [r.x, r.y]).unwrap();
        assert_eq!(r.w_pred, w);
        assert_eq!(r.abs_err, (r.w_pred - r.w_exact).abs());
        assert!(read_field_csv("a,b\n").is_err());
    }

    #[test]
    fn mode_shapes_are_normalized() {
        let mut c = small();
        c.problem = Problem::Vibration;
        c.load = Load::None;
        c.grid = 201;
        let net = c.network_config();
        let params = init_params(&net, 3);
        let mut buf = Vec::new();
        write_field_csv(&mut buf, &c, &net, &params).unwrap();
        let rows = read_field_csv(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert!((grid_mean_square(&rows, 1.0) - 1.0).abs() < 0.05);
        let (lo, hi) = rows.iter().fold((f64::MAX, f64::MIN), |(lo, hi), r| (lo.min(r.w_pred), hi.max(r.w_pred)));
        assert!(hi >= -lo);
    }

    #[test]
    fn artifacts_are_written() {
        let o = run(&small(), Execution::Sequential).unwrap();
        let dir = std::env::temp_dir().join(format!("platenet-runner-{}", std::process::id()));
        let a = write_artifacts(&o, &dir).unwrap();
        for p in [&a.report, &a.timing, &a.checkpoint, &a.field, &a.samples] {
            assert!(p.is_file());
        }
        let ck = crate::network::load_checkpoint(&a.checkpoint).unwrap();
        assert_eq!(ck.params_for(&o.network).unwrap(), o.best_run().params);
        std::fs::remove_dir_all(dir).unwrap();
    }
}

//! Network-backed loss: parameters in, loss and parameter gradient out.

use crate::autodiff::{param_gradient, JetOrder, ParamTape, DX, DXX, DXY, DY, DYY, V};
use crate::error::{Error, Result};
use crate::geometry::SampleSet;
use crate::losses::{evaluate, FieldEval, LossConfig, LossTerms, Problem};
use crate::network::{NetworkConfig, NetworkParams};
use crate::parallel::{self, Execution};
use crate::plate::PlateSpec;

/// Points per block. Each block is recorded and swept independently.
pub const BLOCK_POINTS: usize = 256;

#[derive(Clone, Debug)]
struct Block {
    points: Vec<[f64; 2]>,
    order: JetOrder,
    /// Index of the first point in the interior list or the flattened boundary list.
    start: usize,
}

/// Frozen training objective over a fixed sample set.
pub struct Objective<'a> {
    pub problem: Problem,
    pub network: &'a NetworkConfig,
    pub samples: &'a SampleSet,
    pub plate: &'a PlateSpec,
    pub loss: &'a LossConfig,
    pub execution: Execution,
    blocks: Vec<Block>,
    n_interior_blocks: usize,
    template: NetworkParams,
}

#[derive(Clone, Debug)]
pub struct Evaluation {
    pub terms: LossTerms,
    pub gradient: Vec<f64>,
}

impl<'a> Objective<'a> {
    pub fn new(
        problem: Problem,
        network: &'a NetworkConfig,
        samples: &'a SampleSet,
        plate: &'a PlateSpec,
        loss: &'a LossConfig,
    ) -> Self {
        let mut blocks = Vec::new();
        for (k, chunk) in samples.interior.chunks(BLOCK_POINTS).enumerate() {
            blocks.push(Block { points: chunk.to_vec(), order: JetOrder::Second, start: k * BLOCK_POINTS });
        }
        let n_interior_blocks = blocks.len();
        let boundary: Vec<[f64; 2]> = samples.boundary.iter().flat_map(|b| b.points.iter().copied()).collect();
        for (k, chunk) in boundary.chunks(BLOCK_POINTS).enumerate() {
            blocks.push(Block { points: chunk.to_vec(), order: JetOrder::First, start: k * BLOCK_POINTS });
        }
        Objective {
            problem,
            network,
            samples,
            plate,
            loss,
            execution: Execution::default(),
            blocks,
            n_interior_blocks,
            template: NetworkParams::zeros(network),
        }
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    pub fn param_count(&self) -> usize {
        self.template.len()
    }

    fn record(&self, params: &NetworkParams) -> Result<Vec<ParamTape>> {
        parallel::map(self.execution, &self.blocks, |b| ParamTape::record(self.network, params, &b.points, b.order))
            .into_iter()
            .collect()
    }

    fn field(&self, tapes: &[ParamTape]) -> FieldEval {
        let mut interior = Vec::with_capacity(self.samples.interior.len());
        for t in &tapes[..self.n_interior_blocks] {
            interior.extend(t.output_jets());
        }
        let mut flat = Vec::with_capacity(self.samples.boundary_point_count());
        for t in &tapes[self.n_interior_blocks..] {
            flat.extend(t.output_jets());
        }
        let mut boundary = Vec::with_capacity(self.samples.boundary.len());
        let mut it = flat.into_iter();
        for b in &self.samples.boundary {
            boundary.push(it.by_ref().take(b.points.len()).collect());
        }
        FieldEval { interior, boundary }
    }

    /// The sampled field of the current network.
    pub fn field_for(&self, params: &NetworkParams) -> Result<FieldEval> {
        Ok(self.field(&self.record(params)?))
    }

    pub fn loss_terms(&self, params: &NetworkParams) -> Result<LossTerms> {
        let field = self.field_for(params)?;
        Ok(evaluate(self.problem, &field, self.samples, self.plate, self.loss)?.0)
    }

    pub fn evaluate(&self, params: &NetworkParams) -> Result<Evaluation> {
        let tapes = self.record(params)?;
        let field = self.field(&tapes);
        let (terms, adj) = evaluate(self.problem, &field, self.samples, self.plate, self.loss)?;
        if !terms.total.is_finite() {
            return Err(Error::NonFinite("loss".into()));
        }
        let flat_boundary: Vec<[f64; 3]> = adj.boundary.into_iter().flatten().collect();

        let jobs: Vec<(usize, &ParamTape)> = tapes.iter().enumerate().collect();
        let partials = parallel::map(self.execution, &jobs, |&(k, tape)| {
            let b = &self.blocks[k];
            let n = b.points.len();
            let slots = b.order.slots();
            let mut seed = vec![0.0; slots * n];
            if k < self.n_interior_blocks {
                for p in 0..n {
                    let a = &adj.interior[b.start + p];
                    for s in [V, DX, DY, DXX, DXY, DYY] {
                        seed[s * n + p] = a[s];
                    }
                }
            } else {
                for p in 0..n {
                    let a = &flat_boundary[b.start + p];
                    for s in [V, DX, DY] {
                        seed[s * n + p] = a[s];
                    }
                }
            }
            param_gradient(tape, params, &seed)
        });
        // fixed block order keeps the sum identical across execution modes
        let mut gradient = vec![0.0; params.len()];
        for g in partials {
            for (acc, v) in gradient.iter_mut().zip(g?) {
                *acc += v;
            }
        }
        Ok(Evaluation { terms, gradient })
    }

    /// Flat-vector interface for the optimizer.
    pub fn value_and_gradient(&self, flat: &[f64]) -> Result<(f64, Vec<f64>)> {
        let mut p = self.template.clone();
        p.assign(flat)?;
        let e = self.evaluate(&p)?;
        Ok((e.terms.total, e.gradient))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Activation;
    use crate::geometry::{BoundarySpec, DomainSpec};
    use crate::network::{forward_jet, init_params, InputScaling};
    use crate::plate::{InPlane, Load};

    fn setup(edges: &str, n: usize, nb: usize) -> (NetworkConfig, SampleSet) {
        let d = DomainSpec::Rectangle { a: 1.0, b: 1.0 };
        let segs = d.segments(&BoundarySpec::new(edges)).unwrap();
        let s = SampleSet::generate(&d, &segs, n, nb, 1).unwrap();
        let (lo, hi) = d.bbox();
        let cfg =
            NetworkConfig::autoencoder(&[5, 3], Activation::ScaledTanh).with_scaling(InputScaling::from_bbox(lo, hi));
        (cfg, s)
    }

    #[test]
    fn field_matches_pointwise_jets() {
        let (cfg, s) = setup("CSCS", 300, 20);
        let plate = PlateSpec::nondimensional(0.3);
        let lc = LossConfig::default();
        let obj = Objective::new(Problem::Bending, &cfg, &s, &plate, &lc);
        let p = init_params(&cfg, 2);
        let f = obj.field_for(&p).unwrap();
        for (i, x) in [0usize, 255, 256, 299].iter().map(|&i| (i, s.interior[i])) {
            let j = forward_jet(&p, &cfg, x).unwrap();
            for (a, b) in f.interior[i].slots().iter().zip(j.slots()) {
                assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
            }
        }
        let j = forward_jet(&p, &cfg, s.boundary[2].points[7]).unwrap();
        assert!((f.boundary[2][7].dy - j.dy).abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_finite_differences_all_problems() {
        let (cfg, s) = setup("CSCS", 10, 4);
        let plate = PlateSpec::nondimensional(0.3)
            .with_load(Load::Uniform { p: 1.0 })
            .with_foundation(2.0)
            .with_inplane(InPlane { nx: 1.0, ny: 0.0, nxy: 0.0 });
        let lc = LossConfig { beta_w: 2.0, beta_theta: 3.0, kp: 10.0 };
        let p0 = init_params(&cfg, 7);
        let x0 = p0.flatten();
        for problem in [Problem::Bending, Problem::Vibration, Problem::Buckling] {
            let obj = Objective::new(problem, &cfg, &s, &plate, &lc);
            let (_, g) = obj.value_and_gradient(&x0).unwrap();
            let gmax = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for i in 0..x0.len() {
                let h = 1e-5;
                let f = |d: f64| {
                    let mut x = x0.clone();
                    x[i] += d;
                    obj.value_and_gradient(&x).unwrap().0
                };
                let fd = (-f(2.0 * h) + 8.0 * f(h) - 8.0 * f(-h) + f(-2.0 * h)) / (12.0 * h);
                assert!(
                    (fd - g[i]).abs() <= 1e-5 * g[i].abs().max(1e-2 * gmax),
                    "{problem:?} param {i}: fd {fd} vs {}",
                    g[i]
                );
            }
        }
    }

    #[test]
    fn sequential_and_parallel_are_bit_identical() {
        let (cfg, s) = setup("SSSS", 700, 64);
        let plate = PlateSpec::nondimensional(0.3).with_load(Load::Uniform { p: 1.0 });
        let lc = LossConfig::default();
        let p = init_params(&cfg, 3).flatten();
        let a = Objective::new(Problem::Bending, &cfg, &s, &plate, &lc)
            .with_execution(Execution::Sequential)
            .value_and_gradient(&p)
            .unwrap();
        let b = Objective::new(Problem::Bending, &cfg, &s, &plate, &lc)
            .with_execution(Execution::Parallel)
            .value_and_gradient(&p)
            .unwrap();
        assert_eq!(a.0.to_bits(), b.0.to_bits());
        assert!(a.1.iter().zip(&b.1).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}

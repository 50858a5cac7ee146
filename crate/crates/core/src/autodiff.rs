//! Second-order input jets and reverse accumulation of parameter gradients.
//!
//! Spatial derivatives of the network output are carried forward as 2-jets:
//! every neuron holds its value together with the first and second partials
//! with respect to the two physical coordinates. A loss built from those jets
//! is differentiated with respect to the weights by walking a recorded
//! [`ParamTape`] backwards, so derivatives that flow through the curvature
//! slots are accounted for exactly.
//!
//! The batched tape stores each layer as a `(width, slots * points)` matrix in
//! slot-major column order: columns `[s * n, (s + 1) * n)` hold slot `s` of all
//! `n` points. Affine maps then become a single matrix product per layer.

use std::ops::{Add, Mul, Neg, Sub};
use std::sync::atomic::{AtomicU64, Ordering};

use ndarray::{s, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{NetworkConfig, NetworkParams};

pub const V: usize = 0;
pub const DX: usize = 1;
pub const DY: usize = 2;
pub const DXX: usize = 3;
pub const DXY: usize = 4;
pub const DYY: usize = 5;

/// A scalar field value with its first and second partials in `(x, y)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Jet2 {
    pub v: f64,
    pub dx: f64,
    pub dy: f64,
    pub dxx: f64,
    pub dxy: f64,
    pub dyy: f64,
}

impl Jet2 {
    pub const ZERO: Jet2 = Jet2 { v: 0.0, dx: 0.0, dy: 0.0, dxx: 0.0, dxy: 0.0, dyy: 0.0 };

    pub fn constant(v: f64) -> Self {
        Jet2 { v, ..Self::ZERO }
    }

    pub fn from_slots(s: [f64; 6]) -> Self {
        Jet2 { v: s[V], dx: s[DX], dy: s[DY], dxx: s[DXX], dxy: s[DXY], dyy: s[DYY] }
    }

    pub fn slots(&self) -> [f64; 6] {
        [self.v, self.dx, self.dy, self.dxx, self.dxy, self.dyy]
    }

    pub fn is_finite(&self) -> bool {
        self.slots().iter().all(|s| s.is_finite())
    }

    pub fn check_finite(self, what: &str) -> Result<Self> {
        if self.is_finite() {
            Ok(self)
        } else {
            Err(Error::NonFinite(what.to_string()))
        }
    }

    /// Applies a scalar function given `[f(u), f'(u), f''(u)]` at `u = self.v`.
    pub fn compose(self, f: [f64; 3]) -> Self {
        let [f0, f1, f2] = f;
        Jet2 {
            v: f0,
            dx: f1 * self.dx,
            dy: f1 * self.dy,
            dxx: f2 * self.dx * self.dx + f1 * self.dxx,
            dxy: f2 * self.dx * self.dy + f1 * self.dxy,
            dyy: f2 * self.dy * self.dy + f1 * self.dyy,
        }
    }

    pub fn sin(self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.compose([s, c, -s])
    }

    pub fn cos(self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.compose([c, -s, -c])
    }

    pub fn ln(self) -> Self {
        let u = self.v;
        self.compose([u.ln(), 1.0 / u, -1.0 / (u * u)])
    }

    pub fn powi(self, n: i32) -> Self {
        let u = self.v;
        let nf = n as f64;
        self.compose([u.powi(n), nf * u.powi(n - 1), nf * (nf - 1.0) * u.powi(n - 2)])
    }

    pub fn sqrt(self) -> Self {
        let r = self.v.sqrt();
        self.compose([r, 0.5 / r, -0.25 / (r * r * r)])
    }
}

impl Add for Jet2 {
    type Output = Jet2;
    fn add(self, o: Jet2) -> Jet2 {
        Jet2 {
            v: self.v + o.v,
            dx: self.dx + o.dx,
            dy: self.dy + o.dy,
            dxx: self.dxx + o.dxx,
            dxy: self.dxy + o.dxy,
            dyy: self.dyy + o.dyy,
        }
    }
}

impl Sub for Jet2 {
    type Output = Jet2;
    fn sub(self, o: Jet2) -> Jet2 {
        self + (-o)
    }
}

impl Neg for Jet2 {
    type Output = Jet2;
    fn neg(self) -> Jet2 {
        self * -1.0
    }
}

impl Mul<f64> for Jet2 {
    type Output = Jet2;
    fn mul(self, c: f64) -> Jet2 {
        Jet2 {
            v: self.v * c,
            dx: self.dx * c,
            dy: self.dy * c,
            dxx: self.dxx * c,
            dxy: self.dxy * c,
            dyy: self.dyy * c,
        }
    }
}

impl Mul for Jet2 {
    type Output = Jet2;
    fn mul(self, o: Jet2) -> Jet2 {
        Jet2 {
            v: self.v * o.v,
            dx: self.dx * o.v + self.v * o.dx,
            dy: self.dy * o.v + self.v * o.dy,
            dxx: self.dxx * o.v + 2.0 * self.dx * o.dx + self.v * o.dxx,
            dxy: self.dxy * o.v + self.dx * o.dy + self.dy * o.dx + self.v * o.dxy,
            dyy: self.dyy * o.v + 2.0 * self.dy * o.dy + self.v * o.dyy,
        }
    }
}

/// Lifts a coordinate pair into the jet algebra.
pub fn jet_seed(x: f64, y: f64) -> (Jet2, Jet2) {
    (Jet2 { v: x, dx: 1.0, ..Jet2::ZERO }, Jet2 { v: y, dy: 1.0, ..Jet2::ZERO })
}

/// Hidden-layer nonlinearity. Both variants are `tanh(c * u)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    ScaledTanh,
}

/// Additive perturbation of every activation slope, stored as `f64` bits.
static SCALE_FAULT: AtomicU64 = AtomicU64::new(0);

/// Perturbs the activation slope globally. Used to check that the property
/// suite detects a wrong activation; zero restores normal behaviour.
pub fn inject_activation_fault(delta: f64) {
    SCALE_FAULT.store(delta.to_bits(), Ordering::Relaxed);
}

impl Activation {
    pub fn scale(self) -> f64 {
        let base = match self {
            Activation::Tanh => 1.0,
            Activation::ScaledTanh => std::f64::consts::FRAC_PI_2,
        };
        base + f64::from_bits(SCALE_FAULT.load(Ordering::Relaxed))
    }

    pub fn tag(self) -> u8 {
        match self {
            Activation::Tanh => 0,
            Activation::ScaledTanh => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Activation::Tanh),
            1 => Some(Activation::ScaledTanh),
            _ => None,
        }
    }

    /// `[f, f', f'', f''']` at `u`.
    #[inline]
    pub fn derivatives(self, u: f64) -> [f64; 4] {
        tanh_derivatives(self.scale(), (self.scale() * u).tanh())
    }

    #[inline]
    pub fn value(self, u: f64) -> f64 {
        (self.scale() * u).tanh()
    }
}

/// Derivatives of `tanh(c u)` expressed through `t = tanh(c u)`.
#[inline]
pub(crate) fn tanh_derivatives(c: f64, t: f64) -> [f64; 4] {
    let f1 = c * (1.0 - t * t);
    let f2 = -2.0 * c * t * f1;
    let f3 = -2.0 * c * (f1 * f1 + t * f2);
    [t, f1, f2, f3]
}

/// `W * input + b`, applied to every jet slot independently (bias on the value only).
pub fn jet_affine(w: ArrayView2<f64>, b: ArrayView1<f64>, input: &[Jet2]) -> Result<Vec<Jet2>> {
    let (rows, cols) = w.dim();
    if cols != input.len() || b.len() != rows {
        return Err(Error::Dimension(format!(
            "affine map {rows}x{cols} with bias {} applied to {} inputs",
            b.len(),
            input.len()
        )));
    }
    let mut out = Vec::with_capacity(rows);
    for i in 0..rows {
        let mut acc = [0.0; 6];
        for (k, z) in input.iter().enumerate() {
            let wik = w[[i, k]];
            let zs = z.slots();
            for (a, zv) in acc.iter_mut().zip(zs) {
                *a += wik * zv;
            }
        }
        acc[V] += b[i];
        out.push(Jet2::from_slots(acc));
    }
    Ok(out)
}

pub fn jet_activation(input: Jet2, act: Activation) -> Result<Jet2> {
    let [f0, f1, f2, _] = act.derivatives(input.v);
    input.compose([f0, f1, f2]).check_finite("activation")
}

/// How many jet slots a batch carries. Boundary terms only need first partials.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum JetOrder {
    First,
    Second,
}

impl JetOrder {
    pub fn slots(self) -> usize {
        match self {
            JetOrder::First => 3,
            JetOrder::Second => 6,
        }
    }
}

#[derive(Clone, Debug)]
struct LayerTrace {
    /// Layer input, `(fan_in, slots * n)`.
    input: Array2<f64>,
    /// Pre-activation jets, `(fan_out, slots * n)`; only kept for hidden layers.
    pre: Option<Array2<f64>>,
    /// `tanh(c u)` of the value slot, `(fan_out, n)`; hidden layers only.
    act: Option<Array2<f64>>,
}

/// Forward record of one batch of points through the network.
///
/// Holds what the reverse sweep needs: every layer input and, for hidden
/// layers, the pre-activation jets and activation values.
#[derive(Clone, Debug)]
pub struct ParamTape {
    order: JetOrder,
    n_points: usize,
    activation: Activation,
    layers: Vec<LayerTrace>,
    output: Array2<f64>,
}

impl ParamTape {
    pub fn record(cfg: &NetworkConfig, params: &NetworkParams, points: &[[f64; 2]], order: JetOrder) -> Result<Self> {
        let n = points.len();
        let slots = order.slots();
        let n_layers = params.layers().len();
        if n_layers == 0 {
            return Err(Error::Dimension("network has no layers".into()));
        }
        let mut z = seed_batch(cfg, points, order);
        let mut layers = Vec::with_capacity(n_layers);
        for (l, layer) in params.layers().iter().enumerate() {
            if layer.weight.ncols() != z.nrows() {
                return Err(Error::Dimension(format!(
                    "layer {l} expects {} inputs, got {}",
                    layer.weight.ncols(),
                    z.nrows()
                )));
            }
            let mut a = layer.weight.dot(&z);
            {
                let mut value = a.slice_mut(s![.., 0..n]);
                value += &layer.bias.view().insert_axis(Axis(1));
            }
            if l + 1 == n_layers {
                check_all_finite(&a, l)?;
                layers.push(LayerTrace { input: z, pre: None, act: None });
                return Ok(ParamTape { order, n_points: n, activation: cfg.activation, layers, output: a });
            }
            let (next, act) = activation_forward(&a, n, slots, cfg.activation);
            check_all_finite(&next, l)?;
            layers.push(LayerTrace { input: z, pre: Some(a), act: Some(act) });
            z = next;
        }
        unreachable!("loop returns at the output layer")
    }

    pub fn order(&self) -> JetOrder {
        self.order
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    /// Number of recorded layer entries.
    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    /// Output jet slot `slot` of point `p`.
    #[inline]
    pub fn output(&self, slot: usize, p: usize) -> f64 {
        self.output[[0, slot * self.n_points + p]]
    }

    /// Output jets; second-order slots are zero for first-order tapes.
    pub fn output_jets(&self) -> Vec<Jet2> {
        let slots = self.order.slots();
        (0..self.n_points)
            .map(|p| {
                let mut s = [0.0; 6];
                for (k, sk) in s.iter_mut().enumerate().take(slots) {
                    *sk = self.output(k, p);
                }
                Jet2::from_slots(s)
            })
            .collect()
    }

    /// Reruns the forward computation on the recorded inputs.
    pub fn replay(&self, cfg: &NetworkConfig, params: &NetworkParams) -> Result<Array2<f64>> {
        let first = &self.layers[0].input;
        let mut z = first.clone();
        let n = self.n_points;
        let n_layers = params.layers().len();
        for (l, layer) in params.layers().iter().enumerate() {
            let mut a = layer.weight.dot(&z);
            {
                let mut value = a.slice_mut(s![.., 0..n]);
                value += &layer.bias.view().insert_axis(Axis(1));
            }
            if l + 1 == n_layers {
                return Ok(a);
            }
            z = activation_forward(&a, n, self.order.slots(), cfg.activation).0;
        }
        unreachable!()
    }
}

fn check_all_finite(a: &Array2<f64>, layer: usize) -> Result<()> {
    if a.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(format!("layer {layer} output")))
    }
}

fn seed_batch(cfg: &NetworkConfig, points: &[[f64; 2]], order: JetOrder) -> Array2<f64> {
    let n = points.len();
    let sc = &cfg.scaling;
    let mut z = Array2::zeros((2, order.slots() * n));
    for (p, pt) in points.iter().enumerate() {
        let [xs, ys] = sc.apply(*pt);
        z[[0, V * n + p]] = xs;
        z[[1, V * n + p]] = ys;
        z[[0, DX * n + p]] = 1.0 / sc.half_width[0];
        z[[1, DY * n + p]] = 1.0 / sc.half_width[1];
    }
    z
}

fn activation_forward(a: &Array2<f64>, n: usize, slots: usize, act: Activation) -> (Array2<f64>, Array2<f64>) {
    let c = act.scale();
    let rows = a.nrows();
    let mut out = Array2::zeros(a.raw_dim());
    let mut tv = Array2::zeros((rows, n));
    for j in 0..rows {
        let u = a.row(j);
        let u = u.as_slice().expect("standard layout");
        let mut o = out.row_mut(j);
        let o = o.as_slice_mut().expect("standard layout");
        let mut trow = tv.row_mut(j);
        let trow = trow.as_slice_mut().expect("standard layout");
        for p in 0..n {
            let t = (c * u[p]).tanh();
            trow[p] = t;
            let [f0, f1, f2, _] = tanh_derivatives(c, t);
            let ux = u[DX * n + p];
            let uy = u[DY * n + p];
            o[p] = f0;
            o[DX * n + p] = f1 * ux;
            o[DY * n + p] = f1 * uy;
            if slots == 6 {
                o[DXX * n + p] = f2 * ux * ux + f1 * u[DXX * n + p];
                o[DXY * n + p] = f2 * ux * uy + f1 * u[DXY * n + p];
                o[DYY * n + p] = f2 * uy * uy + f1 * u[DYY * n + p];
            }
        }
    }
    (out, tv)
}

/// Pulls output adjoints of an activated layer back onto its pre-activation jets.
fn activation_backward(
    pre: &Array2<f64>,
    act_values: &Array2<f64>,
    out_bar: &Array2<f64>,
    n: usize,
    slots: usize,
    c: f64,
) -> Array2<f64> {
    let rows = pre.nrows();
    let mut u_bar = Array2::zeros(pre.raw_dim());
    for j in 0..rows {
        let u = pre.row(j);
        let u = u.as_slice().expect("standard layout");
        let t = act_values.row(j);
        let t = t.as_slice().expect("standard layout");
        let g = out_bar.row(j);
        let g = g.as_slice().expect("standard layout");
        let mut ub = u_bar.row_mut(j);
        let ub = ub.as_slice_mut().expect("standard layout");
        for p in 0..n {
            let [_, f1, f2, f3] = tanh_derivatives(c, t[p]);
            let ux = u[DX * n + p];
            let uy = u[DY * n + p];
            let gv = g[p];
            let gx = g[DX * n + p];
            let gy = g[DY * n + p];
            let mut du = gv * f1 + f2 * (gx * ux + gy * uy);
            let mut dux = gx * f1;
            let mut duy = gy * f1;
            if slots == 6 {
                let gxx = g[DXX * n + p];
                let gxy = g[DXY * n + p];
                let gyy = g[DYY * n + p];
                let uxx = u[DXX * n + p];
                let uxy = u[DXY * n + p];
                let uyy = u[DYY * n + p];
                du +=
                    gxx * (f3 * ux * ux + f2 * uxx) + gxy * (f3 * ux * uy + f2 * uxy) + gyy * (f3 * uy * uy + f2 * uyy);
                dux += 2.0 * gxx * f2 * ux + gxy * f2 * uy;
                duy += 2.0 * gyy * f2 * uy + gxy * f2 * ux;
                ub[DXX * n + p] = gxx * f1;
                ub[DXY * n + p] = gxy * f1;
                ub[DYY * n + p] = gyy * f1;
            }
            ub[p] = du;
            ub[DX * n + p] = dux;
            ub[DY * n + p] = duy;
        }
    }
    u_bar
}

/// Reverse sweep over a tape.
///
/// `output_adjoint` holds `dLoss/d(output slot)` in the tape's slot-major
/// layout (length `slots * n_points`). The result is laid out like
/// [`NetworkParams::flatten`].
pub fn param_gradient(tape: &ParamTape, params: &NetworkParams, output_adjoint: &[f64]) -> Result<Vec<f64>> {
    let n = tape.n_points;
    let slots = tape.order.slots();
    if params.layers().len() != tape.layers.len() {
        return Err(Error::Dimension(format!(
            "tape has {} layers, parameters have {}",
            tape.layers.len(),
            params.layers().len()
        )));
    }
    if output_adjoint.len() != slots * n {
        return Err(Error::Dimension(format!(
            "output adjoint has {} entries, tape expects {}",
            output_adjoint.len(),
            slots * n
        )));
    }
    let c = tape.activation.scale();
    let mut grad = vec![0.0; params.len()];
    let offsets = params.offsets();
    let mut bar =
        Array2::from_shape_vec((1, slots * n), output_adjoint.to_vec()).map_err(|e| Error::Dimension(e.to_string()))?;

    for l in (0..tape.layers.len()).rev() {
        let trace = &tape.layers[l];
        let layer = &params.layers()[l];
        if let (Some(pre), Some(act)) = (&trace.pre, &trace.act) {
            bar = activation_backward(pre, act, &bar, n, slots, c);
        }
        let gw = bar.dot(&trace.input.t());
        let (out_dim, in_dim) = layer.weight.dim();
        if gw.dim() != (out_dim, in_dim) {
            return Err(Error::Dimension(format!("layer {l} trace does not match weights")));
        }
        let off = offsets[l];
        for (g, v) in grad[off..off + out_dim * in_dim].iter_mut().zip(gw.iter()) {
            *g = *v;
        }
        let boff = off + out_dim * in_dim;
        for j in 0..out_dim {
            let row = bar.row(j);
            let row = row.as_slice().expect("standard layout");
            grad[boff + j] = row[..n].iter().sum();
        }
        if l > 0 {
            bar = layer.weight.t().dot(&bar);
        }
    }
    if grad.iter().all(|g| g.is_finite()) {
        Ok(grad)
    } else {
        Err(Error::NonFinite("parameter gradient".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn fd2(f: impl Fn(f64, f64) -> f64, x: f64, y: f64, h: f64) -> [f64; 6] {
        let d1 = |g: &dyn Fn(f64) -> f64| (-g(2.0 * h) + 8.0 * g(h) - 8.0 * g(-h) + g(-2.0 * h)) / (12.0 * h);
        let fx = d1(&|t| f(x + t, y));
        let fy = d1(&|t| f(x, y + t));
        let fxx = (f(x + h, y) - 2.0 * f(x, y) + f(x - h, y)) / (h * h);
        let fyy = (f(x, y + h) - 2.0 * f(x, y) + f(x, y - h)) / (h * h);
        let fxy = (f(x + h, y + h) - f(x + h, y - h) - f(x - h, y + h) + f(x - h, y - h)) / (4.0 * h * h);
        [f(x, y), fx, fy, fxx, fxy, fyy]
    }

    #[test]
    fn seeds_are_unit_first_derivatives() {
        let (x, y) = jet_seed(0.5, 0.25);
        assert_eq!(x.slots(), [0.5, 1.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(y.slots(), [0.25, 0.0, 1.0, 0.0, 0.0, 0.0]);
        let (x, y) = jet_seed(0.0, 0.0);
        assert_eq!((x.dx, y.dy, x.v, y.v), (1.0, 1.0, 0.0, 0.0));
    }

    #[test]
    fn product_of_seeds_has_unit_mixed_partial() {
        let (x, y) = jet_seed(0.3, -1.7);
        let p = x * y;
        assert_eq!(p.dxy, 1.0);
        assert_eq!(p.dxx, 0.0);
        assert_eq!(p.dyy, 0.0);
        assert_eq!(p.dx, -1.7);
    }

    #[test]
    fn affine_identity_and_linearity() {
        let (x, y) = jet_seed(0.4, 0.9);
        let input = [x * y, x.sin()];
        let eye = array![[1.0, 0.0], [0.0, 1.0]];
        let zero = array![0.0, 0.0];
        let out = jet_affine(eye.view(), zero.view(), &input).unwrap();
        assert_eq!(out, input.to_vec());

        let two = array![[2.0, 0.0], [0.0, 2.0]];
        let one = array![1.0, 1.0];
        let out = jet_affine(two.view(), one.view(), &input).unwrap();
        for (o, i) in out.iter().zip(&input) {
            assert_eq!(o.v, 2.0 * i.v + 1.0);
            assert_eq!(o.dxx, 2.0 * i.dxx);
            assert_eq!(o.dxy, 2.0 * i.dxy);
        }
    }

    #[test]
    fn affine_rejects_mismatch() {
        let w = array![[1.0, 2.0, 3.0]];
        let b = array![0.0];
        assert!(matches!(jet_affine(w.view(), b.view(), &[Jet2::ZERO; 2]), Err(Error::Dimension(_))));
    }

    #[test]
    fn affine_matches_finite_differences() {
        let w = array![[0.3, -1.2], [0.7, 0.25], [-0.4, 0.9]];
        let b = array![0.1, -0.2, 0.05];
        let (x, y) = jet_seed(0.37, -0.61);
        let input = [x.sin() * y, (x * x + y).cos()];
        let out = jet_affine(w.view(), b.view(), &input).unwrap();
        for (i, o) in out.iter().enumerate() {
            let f = |px: f64, py: f64| w[[i, 0]] * (px.sin() * py) + w[[i, 1]] * (px * px + py).cos() + b[i];
            let fd = fd2(f, 0.37, -0.61, 1e-4);
            // first derivatives by the 5-point rule, second by the 3-point rule
            for (k, (a, e)) in o.slots().iter().zip(fd).enumerate() {
                let tol = if k < 3 { 1e-9 } else { 1e-6 };
                assert!((a - e).abs() <= tol * e.abs().max(1.0), "slot {k}: {a} vs {e}");
            }
        }
    }

    #[test]
    fn scaled_tanh_at_origin() {
        let (x, _) = jet_seed(0.0, 0.0);
        let j = jet_activation(x, Activation::ScaledTanh).unwrap();
        assert_eq!(j.v, 0.0);
        assert!((j.dx - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        assert_eq!(j.dxx, 0.0);
    }

    #[test]
    fn scaled_tanh_value_at_one() {
        let (x, _) = jet_seed(1.0, 0.0);
        let j = jet_activation(x, Activation::ScaledTanh).unwrap();
        assert!((j.v - 0.917_152_335_667_274_3).abs() < 1e-12);
    }

    #[test]
    fn activation_chain_rule_matches_finite_differences() {
        for &(px, py) in &[(0.2, 0.4), (-0.7, 0.15), (1.3, -0.9)] {
            let (x, y) = jet_seed(px, py);
            let u = x * y + x.sin() * 0.5;
            let j = jet_activation(u, Activation::ScaledTanh).unwrap();
            let f = |a: f64, b: f64| Activation::ScaledTanh.value(a * b + 0.5 * a.sin());
            let fd = fd2(f, px, py, 1e-4);
            for (k, (a, e)) in j.slots().iter().zip(fd).enumerate() {
                assert!((a - e).abs() / e.abs().max(1.0) < 1e-6, "slot {k}: {a} vs {e}");
            }
        }
    }

    #[test]
    fn third_derivative_of_activation() {
        let act = Activation::ScaledTanh;
        for &u in &[-1.1, -0.2, 0.0, 0.45, 2.0] {
            let h = 1e-5;
            let [_, _, _, f3] = act.derivatives(u);
            let fd = (act.derivatives(u + h)[2] - act.derivatives(u - h)[2]) / (2.0 * h);
            assert!((f3 - fd).abs() < 1e-6 * fd.abs().max(1.0));
        }
    }
}

//! Plate domains, random quadrature points and Monte-Carlo integration.

use std::f64::consts::PI;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainSpec {
    Rectangle {
        a: f64,
        b: f64,
    },
    /// Ring between radii `inner < outer`, centred at the origin.
    Annulus {
        outer: f64,
        inner: f64,
    },
    /// Square `[0, side]²` with a centred square hole of side `ratio * side`.
    SquareCutout {
        side: f64,
        ratio: f64,
    },
    /// Parallelogram with base `a` along x and sides of length `b` leaning by
    /// `angle_deg` from the y axis.
    Skew {
        a: f64,
        b: f64,
        angle_deg: f64,
    },
}

impl DomainSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        match *self {
            DomainSpec::Rectangle { a, b } if !(a > 0.0 && b > 0.0) => bad("rectangle needs a > 0 and b > 0"),
            DomainSpec::Annulus { outer, inner } if !(0.0 < inner && inner < outer) => {
                bad("annulus needs 0 < inner < outer")
            }
            DomainSpec::SquareCutout { side, ratio } if !(side > 0.0 && (0.0..1.0).contains(&ratio)) => {
                bad("cutout needs side > 0 and 0 <= ratio < 1")
            }
            DomainSpec::Skew { a, b, angle_deg } if !(a > 0.0 && b > 0.0 && (0.0..90.0).contains(&angle_deg)) => {
                bad("skew plate needs a, b > 0 and 0 <= angle < 90 degrees")
            }
            _ => Ok(()),
        }
    }

    pub fn area(&self) -> f64 {
        match *self {
            DomainSpec::Rectangle { a, b } => a * b,
            DomainSpec::Annulus { outer, inner } => PI * (outer * outer - inner * inner),
            DomainSpec::SquareCutout { side, ratio } => side * side * (1.0 - ratio * ratio),
            DomainSpec::Skew { a, b, angle_deg } => a * b * angle_deg.to_radians().cos(),
        }
    }

    /// Axis-aligned bounding box `(min, max)`.
    pub fn bbox(&self) -> ([f64; 2], [f64; 2]) {
        match *self {
            DomainSpec::Rectangle { a, b } => ([0.0, 0.0], [a, b]),
            DomainSpec::Annulus { outer, .. } => ([-outer, -outer], [outer, outer]),
            DomainSpec::SquareCutout { side, .. } => ([0.0, 0.0], [side, side]),
            DomainSpec::Skew { a, b, angle_deg } => {
                let (s, c) = angle_deg.to_radians().sin_cos();
                ([0.0, 0.0], [a + b * s, b * c])
            }
        }
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        let [x, y] = p;
        match *self {
            DomainSpec::Rectangle { a, b } => (0.0..=a).contains(&x) && (0.0..=b).contains(&y),
            DomainSpec::Annulus { outer, inner } => {
                let r = x.hypot(y);
                inner <= r && r <= outer
            }
            DomainSpec::SquareCutout { side, ratio } => {
                let inside = (0.0..=side).contains(&x) && (0.0..=side).contains(&y);
                let h = 0.5 * ratio * side;
                let c = 0.5 * side;
                let in_hole = (x - c).abs() < h && (y - c).abs() < h;
                inside && !in_hole
            }
            DomainSpec::Skew { a, b, angle_deg } => {
                let (s, c) = angle_deg.to_radians().sin_cos();
                let v = y / (b * c);
                let u = (x - b * s * v) / a;
                (0.0..=1.0).contains(&u) && (0.0..=1.0).contains(&v)
            }
        }
    }

    /// Named boundary curves, oriented so the outward normal lies to the right.
    pub fn edges(&self) -> Vec<(String, Curve)> {
        let line = |n: &str, s: [f64; 2], e: [f64; 2]| (n.to_string(), Curve::Line { start: s, end: e });
        match *self {
            DomainSpec::Rectangle { a, b } => vec![
                line("bottom", [0.0, 0.0], [a, 0.0]),
                line("right", [a, 0.0], [a, b]),
                line("top", [a, b], [0.0, b]),
                line("left", [0.0, b], [0.0, 0.0]),
            ],
            DomainSpec::Skew { a, b, angle_deg } => {
                let (s, c) = angle_deg.to_radians().sin_cos();
                let (dx, dy) = (b * s, b * c);
                vec![
                    line("bottom", [0.0, 0.0], [a, 0.0]),
                    line("right", [a, 0.0], [a + dx, dy]),
                    line("top", [a + dx, dy], [dx, dy]),
                    line("left", [dx, dy], [0.0, 0.0]),
                ]
            }
            DomainSpec::SquareCutout { side, ratio } => {
                let mut e = DomainSpec::Rectangle { a: side, b: side }.edges();
                if ratio > 0.0 {
                    let lo = 0.5 * side * (1.0 - ratio);
                    let hi = 0.5 * side * (1.0 + ratio);
                    // clockwise, so the right-hand normal points into the hole
                    e.push(line("hole_left", [lo, lo], [lo, hi]));
                    e.push(line("hole_top", [lo, hi], [hi, hi]));
                    e.push(line("hole_right", [hi, hi], [hi, lo]));
                    e.push(line("hole_bottom", [hi, lo], [lo, lo]));
                }
                e
            }
            DomainSpec::Annulus { outer, inner } => vec![
                ("outer".into(), Curve::Circle { center: [0.0, 0.0], radius: outer, inward: false }),
                ("inner".into(), Curve::Circle { center: [0.0, 0.0], radius: inner, inward: true }),
            ],
        }
    }

    /// Number of outer edges addressed by a boundary code such as `"CSCS"`.
    pub fn outer_edge_count(&self) -> usize {
        match self {
            DomainSpec::Annulus { .. } => 1,
            _ => 4,
        }
    }

    pub fn has_inner_boundary(&self) -> bool {
        match *self {
            DomainSpec::Annulus { .. } => true,
            DomainSpec::SquareCutout { ratio, .. } => ratio > 0.0,
            _ => false,
        }
    }

    /// Attaches boundary kinds to the edges.
    pub fn segments(&self, bc: &BoundarySpec) -> Result<Vec<BoundarySegment>> {
        let kinds = bc.outer_kinds()?;
        let n_outer = self.outer_edge_count();
        if kinds.len() != n_outer {
            return Err(Error::InvalidConfig(format!(
                "boundary code `{}` has {} letters, domain has {n_outer} outer edges",
                bc.edges,
                kinds.len()
            )));
        }
        let inner = bc.inner_kind()?;
        Ok(self
            .edges()
            .into_iter()
            .enumerate()
            .map(|(i, (name, curve))| BoundarySegment {
                kind: if i < n_outer { kinds[i] } else { inner },
                name,
                curve,
                w_target: bc.w_target,
                theta_target: bc.theta_target,
                shear_load: bc.shear_load,
                moment_load: bc.moment_load,
            })
            .collect())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Curve {
    Line { start: [f64; 2], end: [f64; 2] },
    Circle { center: [f64; 2], radius: f64, inward: bool },
}

impl Curve {
    pub fn length(&self) -> f64 {
        match *self {
            Curve::Line { start, end } => (end[0] - start[0]).hypot(end[1] - start[1]),
            Curve::Circle { radius, .. } => 2.0 * PI * radius,
        }
    }

    /// Point at normalised arc-length parameter `t ∈ [0, 1]`.
    pub fn point(&self, t: f64) -> [f64; 2] {
        match *self {
            Curve::Line { start, end } => [start[0] + t * (end[0] - start[0]), start[1] + t * (end[1] - start[1])],
            Curve::Circle { center, radius, .. } => {
                let (s, c) = (2.0 * PI * t).sin_cos();
                [center[0] + radius * c, center[1] + radius * s]
            }
        }
    }

    /// Unit normal pointing away from the plate.
    pub fn normal(&self, t: f64) -> [f64; 2] {
        match *self {
            Curve::Line { start, end } => {
                let (dx, dy) = (end[0] - start[0], end[1] - start[1]);
                let l = dx.hypot(dy);
                [dy / l, -dx / l]
            }
            Curve::Circle { inward, .. } => {
                let (s, c) = (2.0 * PI * t).sin_cos();
                if inward {
                    [-c, -s]
                } else {
                    [c, s]
                }
            }
        }
    }

    pub fn distance(&self, p: [f64; 2]) -> f64 {
        match *self {
            Curve::Line { start, end } => {
                let (dx, dy) = (end[0] - start[0], end[1] - start[1]);
                let l2 = dx * dx + dy * dy;
                let t = (((p[0] - start[0]) * dx + (p[1] - start[1]) * dy) / l2).clamp(0.0, 1.0);
                (p[0] - start[0] - t * dx).hypot(p[1] - start[1] - t * dy)
            }
            Curve::Circle { center, radius, .. } => ((p[0] - center[0]).hypot(p[1] - center[1]) - radius).abs(),
        }
    }
}

/// Edge support type.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    /// Deflection and normal rotation prescribed.
    Clamped,
    /// Deflection prescribed, normal moment natural.
    SimplySupported,
    /// Everything natural.
    Free,
}

impl EdgeKind {
    pub fn from_letter(c: char) -> Result<Self> {
        match c.to_ascii_uppercase() {
            'C' => Ok(EdgeKind::Clamped),
            'S' => Ok(EdgeKind::SimplySupported),
            'F' => Ok(EdgeKind::Free),
            other => Err(Error::InvalidConfig(format!("unknown edge kind `{other}`"))),
        }
    }

    pub fn letter(self) -> char {
        match self {
            EdgeKind::Clamped => 'C',
            EdgeKind::SimplySupported => 'S',
            EdgeKind::Free => 'F',
        }
    }

    pub fn constrains_deflection(self) -> bool {
        !matches!(self, EdgeKind::Free)
    }

    pub fn constrains_rotation(self) -> bool {
        matches!(self, EdgeKind::Clamped)
    }
}

/// Boundary conditions as written in run configs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundarySpec {
    /// One letter per outer edge (bottom, right, top, left), or one letter for
    /// the outer circle of an annulus.
    pub edges: String,
    /// Kind of the hole / inner circle.
    #[serde(default = "default_inner")]
    pub inner: String,
    #[serde(default)]
    pub w_target: f64,
    #[serde(default)]
    pub theta_target: f64,
    /// Line load on free edges.
    #[serde(default)]
    pub shear_load: f64,
    /// Prescribed normal moment on simply supported and free edges.
    #[serde(default)]
    pub moment_load: f64,
}

fn default_inner() -> String {
    "F".into()
}

impl BoundarySpec {
    pub fn new(edges: &str) -> Self {
        BoundarySpec {
            edges: edges.to_string(),
            inner: default_inner(),
            w_target: 0.0,
            theta_target: 0.0,
            shear_load: 0.0,
            moment_load: 0.0,
        }
    }

    pub fn outer_kinds(&self) -> Result<Vec<EdgeKind>> {
        self.edges.chars().map(EdgeKind::from_letter).collect()
    }

    pub fn inner_kind(&self) -> Result<EdgeKind> {
        let mut c = self.inner.chars();
        match (c.next(), c.next()) {
            (Some(l), None) => EdgeKind::from_letter(l),
            _ => Err(Error::InvalidConfig(format!("inner edge kind `{}`", self.inner))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundarySegment {
    pub name: String,
    pub curve: Curve,
    pub kind: EdgeKind,
    pub w_target: f64,
    pub theta_target: f64,
    pub shear_load: f64,
    pub moment_load: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundarySamples {
    pub segment: BoundarySegment,
    pub points: Vec<[f64; 2]>,
    pub normals: Vec<[f64; 2]>,
    pub length: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleSet {
    pub interior: Vec<[f64; 2]>,
    pub area: f64,
    pub boundary: Vec<BoundarySamples>,
    pub seed: u64,
}

impl SampleSet {
    /// Draws interior points and `n_boundary` points on every segment from one
    /// seeded stream.
    pub fn generate(
        domain: &DomainSpec,
        segments: &[BoundarySegment],
        n_interior: usize,
        n_boundary: usize,
        seed: u64,
    ) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let interior = sample_interior(domain, n_interior, &mut rng)?.points;
        let boundary = segments.iter().map(|s| sample_boundary(s, n_boundary, &mut rng)).collect::<Result<_>>()?;
        Ok(SampleSet { interior, area: domain.area(), boundary, seed })
    }

    pub fn boundary_point_count(&self) -> usize {
        self.boundary.iter().map(|b| b.points.len()).sum()
    }

    /// `x,y,tag` rows; tag is `interior` or the segment name.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "x,y,tag")?;
        for p in &self.interior {
            writeln!(out, "{},{},interior", p[0], p[1])?;
        }
        for b in &self.boundary {
            for p in &b.points {
                writeln!(out, "{},{},{}", p[0], p[1], b.segment.name)?;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct InteriorSample {
    pub points: Vec<[f64; 2]>,
    pub area: f64,
    /// Candidate draws consumed, including rejections.
    pub attempts: usize,
}

pub fn sample_interior<R: Rng>(domain: &DomainSpec, n: usize, rng: &mut R) -> Result<InteriorSample> {
    if n == 0 {
        return Err(Error::EmptySample("interior sample count is zero".into()));
    }
    domain.validate()?;
    let mut points = Vec::with_capacity(n);
    let mut attempts = 0;
    match *domain {
        DomainSpec::Skew { a, b, angle_deg } => {
            let (s, c) = angle_deg.to_radians().sin_cos();
            for _ in 0..n {
                let u: f64 = rng.gen();
                let v: f64 = rng.gen();
                points.push([a * u + b * s * v, b * c * v]);
            }
            attempts = n;
        }
        _ => {
            let (lo, hi) = domain.bbox();
            while points.len() < n {
                attempts += 1;
                let p = [rng.gen_range(lo[0]..hi[0]), rng.gen_range(lo[1]..hi[1])];
                if domain.contains(p) {
                    points.push(p);
                }
            }
        }
    }
    Ok(InteriorSample { points, area: domain.area(), attempts })
}

pub fn sample_boundary<R: Rng>(segment: &BoundarySegment, n: usize, rng: &mut R) -> Result<BoundarySamples> {
    if n == 0 {
        return Err(Error::EmptySample(format!("segment `{}`", segment.name)));
    }
    let mut points = Vec::with_capacity(n);
    let mut normals = Vec::with_capacity(n);
    for _ in 0..n {
        let t: f64 = rng.gen();
        points.push(segment.curve.point(t));
        normals.push(segment.curve.normal(t));
    }
    Ok(BoundarySamples { segment: segment.clone(), points, normals, length: segment.curve.length() })
}

/// `A / n · Σ values`.
pub fn mc_integrate(values: &[f64], area: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptySample("Monte-Carlo integrand".into()));
    }
    Ok(area / values.len() as f64 * values.iter().sum::<f64>())
}

//! Kirchhoff plate kinematics, constitutive law and energy functionals.
//!
//! Sign conventions: curvatures are `k = (-w_xx, -w_yy, -2 w_xy)` and moments
//! `M = D k` with the isotropic rigidity matrix. In-plane reference forces are
//! stored as compressive magnitudes, so a plate under uniaxial compression has
//! `n_x = 1` and the buckling factor comes out positive.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::autodiff::Jet2;
use crate::error::{Error, Result};
use crate::geometry::mc_integrate;

/// Transverse pressure.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Load {
    None,
    Uniform {
        p: f64,
    },
    /// `p0 · sin(πx/a) · sin(πy/b)`
    Sinusoidal {
        p0: f64,
        a: f64,
        b: f64,
    },
}

impl Load {
    pub fn at(&self, p: [f64; 2]) -> f64 {
        match *self {
            Load::None => 0.0,
            Load::Uniform { p: q } => q,
            Load::Sinusoidal { p0, a, b } => p0 * (PI * p[0] / a).sin() * (PI * p[1] / b).sin(),
        }
    }
}

/// Reference in-plane force resultants (compression positive).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct InPlane {
    #[serde(default)]
    pub nx: f64,
    #[serde(default)]
    pub ny: f64,
    #[serde(default)]
    pub nxy: f64,
}

impl InPlane {
    pub fn is_zero(&self) -> bool {
        self.nx == 0.0 && self.ny == 0.0 && self.nxy == 0.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlateSpec {
    pub youngs_modulus: f64,
    pub poisson: f64,
    pub thickness: f64,
    pub rigidity: f64,
    pub density: f64,
    /// Winkler modulus, zero when the plate rests on nothing.
    pub foundation: f64,
    pub load: Load,
    pub inplane: InPlane,
}

pub fn bending_rigidity(e: f64, nu: f64, h: f64) -> f64 {
    e * h.powi(3) / (12.0 * (1.0 - nu * nu))
}

impl PlateSpec {
    pub fn from_material(e: f64, nu: f64, h: f64, density: f64) -> Self {
        PlateSpec {
            youngs_modulus: e,
            poisson: nu,
            thickness: h,
            rigidity: bending_rigidity(e, nu, h),
            density,
            foundation: 0.0,
            load: Load::None,
            inplane: InPlane::default(),
        }
    }

    /// Unit rigidity, unit thickness and unit mass per area.
    pub fn nondimensional(nu: f64) -> Self {
        Self::from_material(12.0 * (1.0 - nu * nu), nu, 1.0, 1.0)
    }

    pub fn with_load(mut self, load: Load) -> Self {
        self.load = load;
        self
    }

    pub fn with_foundation(mut self, k: f64) -> Self {
        self.foundation = k;
        self
    }

    pub fn with_inplane(mut self, n: InPlane) -> Self {
        self.inplane = n;
        self
    }

    /// Mass per unit area `ρh`.
    pub fn areal_mass(&self) -> f64 {
        self.density * self.thickness
    }

    pub fn validate(&self) -> Result<()> {
        let nu = self.poisson;
        if !(0.0..0.5).contains(&nu) {
            return Err(Error::InvalidConfig(format!("Poisson ratio must satisfy 0 <= nu < 0.5, got {nu}")));
        }
        if !(self.thickness > 0.0) {
            return Err(Error::InvalidConfig("thickness h must be positive".into()));
        }
        if !(self.rigidity > 0.0) {
            return Err(Error::InvalidConfig("bending rigidity D0 must be positive".into()));
        }
        let d = bending_rigidity(self.youngs_modulus, nu, self.thickness);
        if (d - self.rigidity).abs() > 1e-12 * d.abs() {
            return Err(Error::InvalidConfig(format!(
                "bending rigidity {} disagrees with E h^3 / (12 (1 - nu^2)) = {d}",
                self.rigidity
            )));
        }
        if !(self.density > 0.0) {
            return Err(Error::InvalidConfig("density must be positive".into()));
        }
        if !(self.foundation >= 0.0) {
            return Err(Error::InvalidConfig("foundation modulus k must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Curvatures {
    pub kx: f64,
    pub ky: f64,
    pub kxy: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Moments {
    pub mx: f64,
    pub my: f64,
    pub mxy: f64,
}

pub fn curvatures(w: &Jet2) -> Curvatures {
    Curvatures { kx: -w.dxx, ky: -w.dyy, kxy: -2.0 * w.dxy }
}

pub fn moments(k: &Curvatures, spec: &PlateSpec) -> Moments {
    let d = spec.rigidity;
    let nu = spec.poisson;
    Moments { mx: d * (k.kx + nu * k.ky), my: d * (k.ky + nu * k.kx), mxy: d * 0.5 * (1.0 - nu) * k.kxy }
}

/// `½ kᵀ D k` written in second derivatives of `w`.
pub fn bending_energy_density(w: &Jet2, spec: &PlateSpec) -> f64 {
    let d = spec.rigidity;
    let nu = spec.poisson;
    let lap = w.dxx + w.dyy;
    0.5 * d * (lap * lap + 2.0 * (1.0 - nu) * (w.dxy * w.dxy - w.dxx * w.dyy))
}

/// Partials of [`bending_energy_density`] with respect to `(w_xx, w_xy, w_yy)`.
pub fn bending_energy_density_grad(w: &Jet2, spec: &PlateSpec) -> [f64; 3] {
    let d = spec.rigidity;
    let nu = spec.poisson;
    let lap = w.dxx + w.dyy;
    [d * (lap - (1.0 - nu) * w.dyy), 2.0 * d * (1.0 - nu) * w.dxy, d * (lap - (1.0 - nu) * w.dxx)]
}

/// Interior potential of the transverse load, `-p w`.
pub fn external_work_density(w: f64, p: f64) -> f64 {
    -p * w
}

/// Potential of a line load on a free edge, `-q w`.
pub fn edge_load_density(w: f64, q: f64) -> f64 {
    -q * w
}

/// Potential of a prescribed normal moment, `+M_n ∂w/∂n`.
pub fn edge_moment_density(dw_dn: f64, m: f64) -> f64 {
    m * dw_dn
}

pub fn winkler_energy_density(w: f64, k: f64) -> f64 {
    0.5 * k * w * w
}

/// `½ (N_x w_x² + N_y w_y² + 2 N_xy w_x w_y)` for the reference force state.
pub fn inplane_work_density(w: &Jet2, n: &InPlane) -> f64 {
    0.5 * (n.nx * w.dx * w.dx + n.ny * w.dy * w.dy + 2.0 * n.nxy * w.dx * w.dy)
}

pub fn normal_rotation(w: &Jet2, n: [f64; 2]) -> f64 {
    n[0] * w.dx + n[1] * w.dy
}

/// Strain energy `U = ∫ ½ kᵀDk` by Monte-Carlo quadrature.
pub fn strain_energy(field: &[Jet2], spec: &PlateSpec, area: f64) -> Result<f64> {
    let dens: Vec<f64> = field.iter().map(|w| bending_energy_density(w, spec)).collect();
    mc_integrate(&dens, area)
}

/// Squared circular frequency `ω² = 2U / ∫ρhW²`.
pub fn rayleigh_quotient(field: &[Jet2], spec: &PlateSpec, area: f64) -> Result<f64> {
    let u = strain_energy(field, spec, area)?;
    let m: Vec<f64> = field.iter().map(|w| spec.areal_mass() * w.v * w.v).collect();
    let m = mc_integrate(&m, area)?;
    if !(m > 0.0) {
        return Err(Error::Degenerate("mode has zero kinetic norm".into()));
    }
    Ok(2.0 * u / m)
}

/// Load factor `λ = U / W_N` on the reference in-plane state.
pub fn buckling_ratio(field: &[Jet2], spec: &PlateSpec, area: f64) -> Result<f64> {
    if spec.inplane.is_zero() {
        return Err(Error::Degenerate("no in-plane reference forces".into()));
    }
    let u = strain_energy(field, spec, area)?;
    let wn: Vec<f64> = field.iter().map(|w| inplane_work_density(w, &spec.inplane)).collect();
    let wn = mc_integrate(&wn, area)?;
    if wn == 0.0 || !wn.is_finite() {
        return Err(Error::Degenerate("in-plane work vanishes".into()));
    }
    Ok(u / wn)
}

/// Non-dimensional frequency `Ω = ω L² sqrt(ρh / D)`.
pub fn frequency_parameter(omega_sq: f64, length: f64, spec: &PlateSpec) -> f64 {
    omega_sq.sqrt() * length * length * (spec.areal_mass() / spec.rigidity).sqrt()
}

/// Buckling coefficient `K = λ b² / (π² D)`.
pub fn buckling_coefficient(lambda: f64, b: f64, spec: &PlateSpec) -> f64 {
    lambda * b * b / (PI * PI * spec.rigidity)
}

/// Moments sampled on a uniform grid, indexed `[i + nx * j]` with `x_i = x0 + i hx`.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentGrid {
    pub nx: usize,
    pub ny: usize,
    pub hx: f64,
    pub hy: f64,
    pub moments: Vec<Moments>,
}

/// Shear resultants on the `(nx-2) × (ny-2)` interior nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct ShearGrid {
    pub nx: usize,
    pub ny: usize,
    pub qx: Vec<f64>,
    pub qy: Vec<f64>,
}

/// `Q_x = ∂M_x/∂x + ∂M_xy/∂y`, `Q_y = ∂M_xy/∂x + ∂M_y/∂y` by central differences.
pub fn shear_postprocess(grid: &MomentGrid) -> Result<ShearGrid> {
    let (nx, ny) = (grid.nx, grid.ny);
    if nx < 3 || ny < 3 {
        return Err(Error::Dimension(format!("shear needs a 3x3 grid, got {nx}x{ny}")));
    }
    if grid.moments.len() != nx * ny {
        return Err(Error::Dimension("moment grid size".into()));
    }
    let m = |i: usize, j: usize| grid.moments[i + nx * j];
    let mut qx = Vec::with_capacity((nx - 2) * (ny - 2));
    let mut qy = Vec::with_capacity((nx - 2) * (ny - 2));
    for j in 1..ny - 1 {
        for i in 1..nx - 1 {
            let dmx_dx = (m(i + 1, j).mx - m(i - 1, j).mx) / (2.0 * grid.hx);
            let dmxy_dy = (m(i, j + 1).mxy - m(i, j - 1).mxy) / (2.0 * grid.hy);
            let dmxy_dx = (m(i + 1, j).mxy - m(i - 1, j).mxy) / (2.0 * grid.hx);
            let dmy_dy = (m(i, j + 1).my - m(i, j - 1).my) / (2.0 * grid.hy);
            qx.push(dmx_dx + dmxy_dy);
            qy.push(dmxy_dx + dmy_dy);
        }
    }
    Ok(ShearGrid { nx: nx - 2, ny: ny - 2, qx, qy })
}

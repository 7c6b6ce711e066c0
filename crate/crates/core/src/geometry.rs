//! Entropy-current identities on flat 1+1-dimensional grids.
//!
//! The metric is fixed to diag(−1, +1), so covariant derivatives are plain
//! partials and √g = 1. Fields live on an `nt × nx` grid of spacings
//! `dt, dx`, stored row-major with time as the slow index. This module
//! evaluates candidate entropy currents on given fields and checks
//! identities (divergence theorem, Killing residuals); it never solves for
//! the fields.
//!
//! Index conventions: stored `beta0, beta1` are the covariant components
//! `β_ν`; raising with the flat metric gives `β⁰ = −β₀`, `β¹ = β₁`. The
//! stress tensor components `t00, t01, t11` are contravariant `T^{μν}`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Fields every grid must carry before the entropy current can be formed.
pub const REQUIRED_FIELDS: [&str; 9] = [
    "t00", "t01", "t11", "n0", "n1", "beta0", "beta1", "alpha", "pressure",
];

/// Recognized optional fields: the mirrored stress component (checked for
/// symmetry when present) and an explicit free-energy current `w^μ`.
pub const OPTIONAL_FIELDS: [&str; 3] = ["t10", "w0", "w1"];

/// `T^{01}` and `T^{10}` may disagree by at most this much when both given.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Scalar fields on a fixed flat 1+1-d grid.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "GridJson", into = "GridJson")]
pub struct FieldGrid {
    nt: usize,
    nx: usize,
    dt: f64,
    dx: f64,
    fields: BTreeMap<String, Vec<f64>>,
}

impl FieldGrid {
    /// Empty grid; fields are added with [`FieldGrid::set_field`] or
    /// [`FieldGrid::set_fn`].
    pub fn new(nt: usize, nx: usize, dt: f64, dx: f64) -> Result<Self> {
        if nt == 0 || nx == 0 {
            return Err(Error::BadFieldGrid {
                reason: format!("grid must be nonempty, got {nt} x {nx}"),
            });
        }
        if !(dt > 0.0) || !(dx > 0.0) {
            return Err(Error::BadFieldGrid {
                reason: format!("spacings must be positive, got dt = {dt}, dx = {dx}"),
            });
        }
        Ok(Self {
            nt,
            nx,
            dt,
            dx,
            fields: BTreeMap::new(),
        })
    }

    pub fn nt(&self) -> usize {
        self.nt
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn len(&self) -> usize {
        self.nt * self.nx
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Row-major index of grid point `(it, ix)`.
    pub fn idx(&self, it: usize, ix: usize) -> usize {
        it * self.nx + ix
    }

    pub fn t_of(&self, it: usize) -> f64 {
        it as f64 * self.dt
    }

    pub fn x_of(&self, ix: usize) -> f64 {
        ix as f64 * self.dx
    }

    fn known_name(name: &str) -> Result<()> {
        if REQUIRED_FIELDS.contains(&name) || OPTIONAL_FIELDS.contains(&name) {
            Ok(())
        } else {
            Err(Error::BadFieldGrid {
                reason: format!("unknown field name '{name}'"),
            })
        }
    }

    pub fn set_field(&mut self, name: &str, values: Vec<f64>) -> Result<()> {
        Self::known_name(name)?;
        if values.len() != self.len() {
            return Err(Error::BadFieldGrid {
                reason: format!(
                    "field '{name}' has {} values for a {} x {} grid",
                    values.len(),
                    self.nt,
                    self.nx
                ),
            });
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::BadFieldGrid {
                reason: format!("field '{name}' contains non-finite values"),
            });
        }
        self.fields.insert(name.to_string(), values);
        self.check_symmetry()
    }

    /// Fills a field from an analytic function of the physical coordinates.
    pub fn set_fn(&mut self, name: &str, f: impl Fn(f64, f64) -> f64) -> Result<()> {
        let mut values = Vec::with_capacity(self.len());
        for it in 0..self.nt {
            for ix in 0..self.nx {
                values.push(f(self.t_of(it), self.x_of(ix)));
            }
        }
        self.set_field(name, values)
    }

    pub fn field(&self, name: &str) -> Result<&[f64]> {
        self.fields
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::BadFieldGrid {
                reason: format!("missing field '{name}'"),
            })
    }

    pub fn has_field(&self, name: &str) -> bool {
        self.fields.contains_key(name)
    }

    fn check_symmetry(&self) -> Result<()> {
        if let (Ok(a), Ok(b)) = (self.field("t01"), self.field("t10")) {
            for (k, (x, y)) in a.iter().zip(b).enumerate() {
                if (x - y).abs() > SYMMETRY_TOL {
                    return Err(Error::BadFieldGrid {
                        reason: format!(
                            "stress tensor asymmetric at point {k}: t01 = {x}, t10 = {y}"
                        ),
                    });
                }
            }
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridJson {
    nt: usize,
    nx: usize,
    dt: f64,
    dx: f64,
    fields: BTreeMap<String, Vec<f64>>,
}

impl TryFrom<GridJson> for FieldGrid {
    type Error = Error;
    fn try_from(json: GridJson) -> Result<Self> {
        let mut grid = FieldGrid::new(json.nt, json.nx, json.dt, json.dx)?;
        for (name, values) in json.fields {
            grid.set_field(&name, values)?;
        }
        Ok(grid)
    }
}

impl From<FieldGrid> for GridJson {
    fn from(grid: FieldGrid) -> GridJson {
        GridJson {
            nt: grid.nt,
            nx: grid.nx,
            dt: grid.dt,
            dx: grid.dx,
            fields: grid.fields,
        }
    }
}

/// Contravariant 2-vector field on the grid, one value pair per point.
#[derive(Clone, Debug)]
pub struct VectorField {
    pub t: Vec<f64>,
    pub x: Vec<f64>,
}

impl VectorField {
    pub fn from_fns(
        grid: &FieldGrid,
        ft: impl Fn(f64, f64) -> f64,
        fx: impl Fn(f64, f64) -> f64,
    ) -> Self {
        let mut t = Vec::with_capacity(grid.len());
        let mut x = Vec::with_capacity(grid.len());
        for it in 0..grid.nt {
            for ix in 0..grid.nx {
                t.push(ft(grid.t_of(it), grid.x_of(ix)));
                x.push(fx(grid.t_of(it), grid.x_of(ix)));
            }
        }
        Self { t, x }
    }
}

/// Candidate entropy current `s^μ = −β_ν T^{μν} − α N^μ + w^μ`, with the
/// free-energy current defaulting to `w^μ = p β^μ` when not supplied.
pub fn entropy_current(grid: &FieldGrid) -> Result<VectorField> {
    let t00 = grid.field("t00")?;
    let t01 = grid.field("t01")?;
    let t11 = grid.field("t11")?;
    // T^{10} falls back to T^{01} by symmetry.
    let t10 = if grid.has_field("t10") {
        grid.field("t10")?
    } else {
        t01
    };
    let n0 = grid.field("n0")?;
    let n1 = grid.field("n1")?;
    let b0 = grid.field("beta0")?;
    let b1 = grid.field("beta1")?;
    let alpha = grid.field("alpha")?;
    let p = grid.field("pressure")?;
    let w0 = grid.has_field("w0").then(|| grid.field("w0")).transpose()?;
    let w1 = grid.has_field("w1").then(|| grid.field("w1")).transpose()?;

    let mut out = VectorField {
        t: Vec::with_capacity(grid.len()),
        x: Vec::with_capacity(grid.len()),
    };
    for k in 0..grid.len() {
        // Raised components of the inverse-temperature covector.
        let beta_up0 = -b0[k];
        let beta_up1 = b1[k];
        let wt = w0.map_or(p[k] * beta_up0, |w| w[k]);
        let wx = w1.map_or(p[k] * beta_up1, |w| w[k]);
        out.t.push(-(b0[k] * t00[k] + b1[k] * t01[k]) - alpha[k] * n0[k] + wt);
        out.x.push(-(b0[k] * t10[k] + b1[k] * t11[k]) - alpha[k] * n1[k] + wx);
    }
    Ok(out)
}

/// Second-order partial derivative along the time axis: centered in the
/// interior, one-sided three-point at the first and last rows.
fn d_dt(grid: &FieldGrid, f: &[f64]) -> Vec<f64> {
    let (nt, nx, h) = (grid.nt, grid.nx, grid.dt);
    let mut out = vec![0.0; f.len()];
    for ix in 0..nx {
        let at = |it: usize| f[grid.idx(it, ix)];
        for it in 0..nt {
            out[grid.idx(it, ix)] = if it == 0 {
                (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h)
            } else if it == nt - 1 {
                (3.0 * at(nt - 1) - 4.0 * at(nt - 2) + at(nt - 3)) / (2.0 * h)
            } else {
                (at(it + 1) - at(it - 1)) / (2.0 * h)
            };
        }
    }
    out
}

/// Same scheme along the space axis.
fn d_dx(grid: &FieldGrid, f: &[f64]) -> Vec<f64> {
    let (nt, nx, h) = (grid.nt, grid.nx, grid.dx);
    let mut out = vec![0.0; f.len()];
    for it in 0..nt {
        let at = |ix: usize| f[grid.idx(it, ix)];
        for ix in 0..nx {
            out[grid.idx(it, ix)] = if ix == 0 {
                (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h)
            } else if ix == nx - 1 {
                (3.0 * at(nx - 1) - 4.0 * at(nx - 2) + at(nx - 3)) / (2.0 * h)
            } else {
                (at(ix + 1) - at(ix - 1)) / (2.0 * h)
            };
        }
    }
    out
}

fn require_stencil_room(grid: &FieldGrid) -> Result<()> {
    if grid.nt < 3 || grid.nx < 3 {
        return Err(Error::BadFieldGrid {
            reason: format!(
                "derivatives need at least 3 points per axis, got {} x {}",
                grid.nt, grid.nx
            ),
        });
    }
    Ok(())
}

/// `∂_t f^t + ∂_x f^x` pointwise; exact for affine fields.
pub fn divergence(grid: &FieldGrid, f: &VectorField) -> Result<Vec<f64>> {
    require_stencil_room(grid)?;
    if f.t.len() != grid.len() || f.x.len() != grid.len() {
        return Err(Error::BadFieldGrid {
            reason: "vector field size does not match the grid".into(),
        });
    }
    let dt_part = d_dt(grid, &f.t);
    let dx_part = d_dx(grid, &f.x);
    Ok(dt_part.iter().zip(&dx_part).map(|(a, b)| a + b).collect())
}

/// Pointwise equilibrium defect: the largest component of
/// `∂_μ β_ν + ∂_ν β_μ` plus the largest component of `∂_μ α`. Vanishes
/// exactly when `β` is a Killing covector and `α` is constant.
pub fn killing_residual(grid: &FieldGrid) -> Result<Vec<f64>> {
    require_stencil_room(grid)?;
    let b0 = grid.field("beta0")?;
    let b1 = grid.field("beta1")?;
    let alpha = grid.field("alpha")?;
    let dt_b0 = d_dt(grid, b0);
    let dt_b1 = d_dt(grid, b1);
    let dx_b0 = d_dx(grid, b0);
    let dx_b1 = d_dx(grid, b1);
    let dt_a = d_dt(grid, alpha);
    let dx_a = d_dx(grid, alpha);
    Ok((0..grid.len())
        .map(|k| {
            let k00 = 2.0 * dt_b0[k];
            let k01 = dt_b1[k] + dx_b0[k];
            let k11 = 2.0 * dx_b1[k];
            let grad_beta = k00.abs().max(k01.abs()).max(k11.abs());
            grad_beta + dt_a[k].abs().max(dx_a[k].abs())
        })
        .collect())
}

/// Discrete causal diamond: grid points within L1 distance `half_width` of
/// the center, each owning one dual cell of area `dt·dx`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Diamond {
    pub center_t: usize,
    pub center_x: usize,
    pub half_width: usize,
    /// Swap the roles of past and future cone; negates every boundary face
    /// contribution.
    #[serde(default)]
    pub past_oriented: bool,
}

/// Both sides of the divergence theorem over a diamond, and their gap.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct DiamondBalance {
    pub volume_integral: f64,
    pub boundary_integral: f64,
    pub residual: f64,
    /// Number of dual cells in the region: `2m² + 2m + 1` for half-width m.
    pub cells: usize,
}

/// Checks `∫_Ω ∇·s = ∮_{∂Ω} dΣ·s` on the staircase boundary of the diamond.
///
/// The volume side is midpoint quadrature of the centered divergence. The
/// boundary side walks the exposed dual-cell faces with the trapezoid rule
/// on bilinear corner values; with the Lorentzian convention of an inward
/// future normal (`n⁰ < 0` on the future cone) the covariant surface
/// element reproduces the Euclidean outward signs used here: future faces
/// contribute `+s⁰ dx`, past faces `−s⁰ dx`, and the spacelike sides
/// `±s¹ dt`.
///
/// The two quadratures are intentionally not algebraically dual, so the
/// residual measures genuine discretization error: it vanishes for affine
/// currents and shrinks at second order under refinement instead of
/// telescoping to machine zero.
pub fn diamond_balance(
    grid: &FieldGrid,
    diamond: &Diamond,
    f: &VectorField,
) -> Result<DiamondBalance> {
    require_stencil_room(grid)?;
    let m = diamond.half_width as isize;
    let (ct, cx) = (diamond.center_t as isize, diamond.center_x as isize);
    // Corners of boundary cells reach one point beyond the region, and the
    // volume side needs centered stencils: keep one interior cell of margin.
    if ct - m < 1
        || cx - m < 1
        || ct + m > grid.nt as isize - 2
        || cx + m > grid.nx as isize - 2
    {
        return Err(Error::BadDiamond {
            reason: format!(
                "half-width {} around ({}, {}) touches the edge of the {} x {} grid",
                diamond.half_width, diamond.center_t, diamond.center_x, grid.nt, grid.nx
            ),
        });
    }
    let inside =
        |it: isize, ix: isize| -> bool { (it - ct).abs() + (ix - cx).abs() <= m };

    let div = divergence(grid, f)?;
    let cell = grid.dt * grid.dx;
    let mut volume = 0.0;
    let mut cells = 0usize;
    for it in ct - m..=ct + m {
        for ix in cx - m..=cx + m {
            if inside(it, ix) {
                volume += div[grid.idx(it as usize, ix as usize)] * cell;
                cells += 1;
            }
        }
    }

    // Bilinear value at the dual-cell corner (it+1/2, ix+1/2).
    let corner = |comp: &[f64], it: isize, ix: isize| -> f64 {
        let (it, ix) = (it as usize, ix as usize);
        0.25 * (comp[grid.idx(it, ix)]
            + comp[grid.idx(it + 1, ix)]
            + comp[grid.idx(it, ix + 1)]
            + comp[grid.idx(it + 1, ix + 1)])
    };
    let sign = if diamond.past_oriented { -1.0 } else { 1.0 };
    let mut boundary = 0.0;
    for it in ct - m..=ct + m {
        for ix in cx - m..=cx + m {
            if !inside(it, ix) {
                continue;
            }
            if !inside(it + 1, ix) {
                let face = 0.5 * (corner(&f.t, it, ix - 1) + corner(&f.t, it, ix));
                boundary += sign * grid.dx * face;
            }
            if !inside(it - 1, ix) {
                let face = 0.5 * (corner(&f.t, it - 1, ix - 1) + corner(&f.t, it - 1, ix));
                boundary -= sign * grid.dx * face;
            }
            if !inside(it, ix + 1) {
                let face = 0.5 * (corner(&f.x, it - 1, ix) + corner(&f.x, it, ix));
                boundary += sign * grid.dt * face;
            }
            if !inside(it, ix - 1) {
                let face = 0.5 * (corner(&f.x, it - 1, ix - 1) + corner(&f.x, it, ix - 1));
                boundary -= sign * grid.dt * face;
            }
        }
    }

    let signed_volume = sign * volume;
    Ok(DiamondBalance {
        volume_integral: signed_volume,
        boundary_integral: boundary,
        residual: (signed_volume - boundary).abs(),
        cells,
    })
}

/// Grid dimensions handed to field presets.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridParams {
    pub nt: usize,
    pub nx: usize,
    pub dt: f64,
    pub dx: f64,
}

/// One named analytic field configuration.
pub trait FieldPreset: Send + Sync {
    fn kind(&self) -> &'static str;
    fn build(&self, params: &GridParams) -> Result<FieldGrid>;
}

fn uniform_fluid(
    params: &GridParams,
    t: [f64; 3],
    n: [f64; 2],
    beta: [f64; 2],
    alpha: f64,
    pressure: f64,
) -> Result<FieldGrid> {
    let mut grid = FieldGrid::new(params.nt, params.nx, params.dt, params.dx)?;
    let len = grid.len();
    grid.set_field("t00", vec![t[0]; len])?;
    grid.set_field("t01", vec![t[1]; len])?;
    grid.set_field("t11", vec![t[2]; len])?;
    grid.set_field("n0", vec![n[0]; len])?;
    grid.set_field("n1", vec![n[1]; len])?;
    grid.set_field("beta0", vec![beta[0]; len])?;
    grid.set_field("beta1", vec![beta[1]; len])?;
    grid.set_field("alpha", vec![alpha; len])?;
    grid.set_field("pressure", vec![pressure; len])?;
    Ok(grid)
}

struct Vacuum;
impl FieldPreset for Vacuum {
    fn kind(&self) -> &'static str {
        "vacuum"
    }
    // Everything zero, pressure included: the renormalization convention
    // that makes the vacuum carry no entropy current.
    fn build(&self, params: &GridParams) -> Result<FieldGrid> {
        uniform_fluid(params, [0.0; 3], [0.0; 2], [0.0; 2], 0.0, 0.0)
    }
}

struct RestFluid;
impl FieldPreset for RestFluid {
    fn kind(&self) -> &'static str {
        "rest_fluid"
    }
    // ε = 3, p = 1, n = 0 at T = 1: β_ν = (−1, 0) and s⁰ = ε + p = 4.
    fn build(&self, params: &GridParams) -> Result<FieldGrid> {
        uniform_fluid(params, [3.0, 0.0, 1.0], [0.0; 2], [-1.0, 0.0], 0.0, 1.0)
    }
}

/// Boost speed of the moving-fluid preset.
pub const BOOST_SPEED: f64 = 0.5;

struct BoostedFluid;
impl FieldPreset for BoostedFluid {
    fn kind(&self) -> &'static str {
        "boosted_fluid"
    }
    // The rest fluid boosted to v = 1/2: T^{μν} = (ε+p)u^μu^ν + p g^{μν},
    // u^μ = γ(1, v), β_ν = g_{νμ}u^μ/T.
    fn build(&self, params: &GridParams) -> Result<FieldGrid> {
        let v = BOOST_SPEED;
        let gamma = 1.0 / (1.0 - v * v).sqrt();
        let (eps, p) = (3.0, 1.0);
        let w = eps + p;
        let g2 = gamma * gamma;
        uniform_fluid(
            params,
            [w * g2 - p, w * g2 * v, w * g2 * v * v + p],
            [0.0; 2],
            [-gamma, gamma * v],
            0.0,
            p,
        )
    }
}

struct GradientBeta;
impl FieldPreset for GradientBeta {
    fn kind(&self) -> &'static str {
        "gradient_beta"
    }
    // Rest fluid with a spatial temperature gradient in β₀: not a Killing
    // configuration, so the residual is strictly positive.
    fn build(&self, params: &GridParams) -> Result<FieldGrid> {
        let mut grid =
            uniform_fluid(params, [3.0, 0.0, 1.0], [0.0; 2], [-1.0, 0.0], 0.0, 1.0)?;
        grid.set_fn("beta0", |_t, x| -(1.0 + 0.1 * x))?;
        Ok(grid)
    }
}

struct SmoothWave;
impl FieldPreset for SmoothWave {
    fn kind(&self) -> &'static str {
        "smooth_wave"
    }
    // Gently curved fields with no special structure. Nothing is conserved
    // here; the preset exists to exercise quadrature convergence, where
    // affine or uniform fields would sit at machine precision on every grid.
    fn build(&self, params: &GridParams) -> Result<FieldGrid> {
        let mut grid = FieldGrid::new(params.nt, params.nx, params.dt, params.dx)?;
        grid.set_fn("t00", |t, x| 3.0 + 0.2 * t.sin() * x.cos())?;
        grid.set_fn("t01", |t, x| 0.1 * (t + x).sin())?;
        grid.set_fn("t11", |t, x| 1.0 + 0.1 * t.cos() * x.sin())?;
        grid.set_fn("n0", |_t, x| 0.5 + 0.1 * x.cos())?;
        grid.set_fn("n1", |t, _x| 0.05 * t.sin())?;
        grid.set_fn("beta0", |t, x| -1.0 - 0.05 * (x + 0.3 * t).cos())?;
        grid.set_fn("beta1", |t, x| 0.05 * (t - 0.4 * x).sin())?;
        grid.set_fn("alpha", |t, x| 0.1 + 0.05 * x.sin() * t.cos())?;
        grid.set_fn("pressure", |t, x| 1.0 + 0.1 * (x + t).sin())?;
        Ok(grid)
    }
}

/// Name-keyed preset catalog, deterministically ordered.
pub struct PresetRegistry {
    presets: BTreeMap<&'static str, Box<dyn FieldPreset>>,
}

impl PresetRegistry {
    pub fn with_builtin() -> Self {
        let mut registry = Self {
            presets: BTreeMap::new(),
        };
        registry.register(Box::new(Vacuum));
        registry.register(Box::new(RestFluid));
        registry.register(Box::new(BoostedFluid));
        registry.register(Box::new(GradientBeta));
        registry.register(Box::new(SmoothWave));
        registry
    }

    pub fn register(&mut self, preset: Box<dyn FieldPreset>) {
        self.presets.insert(preset.kind(), preset);
    }

    pub fn kinds(&self) -> Vec<&'static str> {
        self.presets.keys().copied().collect()
    }

    pub fn build(&self, kind: &str, params: &GridParams) -> Result<FieldGrid> {
        self.presets
            .get(kind)
            .ok_or_else(|| Error::UnknownKind {
                kind: kind.to_string(),
                known: self.kinds().iter().map(|s| s.to_string()).collect(),
            })?
            .build(params)
    }
}

impl Default for PresetRegistry {
    fn default() -> Self {
        Self::with_builtin()
    }
}

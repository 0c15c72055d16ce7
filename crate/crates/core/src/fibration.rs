//! One-parameter families over a base patch: fibrewise Kähler–Einstein
//! metrics, the Weil–Petersson density by two routes, the null foliation
//! of the semi-KE form, and residuals of the relative KE and horizontal
//! identities.
//!
//! Torus fibres are `ℂ / (ℤ + τ(s) ℤ)` with the flat unit-area metric
//! `ω_s = (1/Im τ) (i/2) dz∧dz̄`. The semi-KE potential is
//! `Φ(z, s) = (Im z)² / Im τ(s) + log Im τ(s)`; the first term restricts
//! to `ω_s` on every fibre and the second is the relative canonical weight.
//! With `ω_SKE = i∂∂̄Φ`, the horizontal component
//! `c = Φ_{ss̄} - |Φ_{zs̄}|² / Φ_{zz̄}` equals `-|A|²` pointwise, where
//! `|A|² = |τ'|² / (4 (Im τ)²)` is the Kodaira–Spencer norm, and the
//! Weil–Petersson density is `-∫ c ω_s`.
//!
//! Sphere fibres are rigid, so a sphere family is isotrivial; its fibres
//! are solved by the radial Einstein solver.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{LabError, Result};
use crate::exec::Exec;
use crate::ma_engine::{ke_solve_radial, KeOptions};
use crate::metric_models::{CMatrix, Sampler};

/// Discrete Cauchy–Riemann tolerance for parameter maps.
pub const CR_TOL: f64 = 1e-8;
/// Eigenvalue threshold below which a horizontal direction counts as null.
pub const NULL_TOL: f64 = 1e-8;

fn c(p: [f64; 2]) -> Complex64 {
    Complex64::new(p[0], p[1])
}

fn pair(z: Complex64) -> [f64; 2] {
    [z.re, z.im]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    TorusFamily,
    Isotrivial,
    SphereFamily,
}

/// Parameter map `s ↦ τ(s)`; complex numbers are `[re, im]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case")]
pub enum TauMap {
    /// `τ0 + slope·s`.
    Affine { tau0: [f64; 2], slope: [f64; 2] },
    Constant { tau0: [f64; 2] },
    /// `i·(height + amplitude·max(Re s - edge, 0)³)`: constant for
    /// `Re s <= edge`, varying beyond. Smooth enough for second
    /// differences but not holomorphic.
    Mixed { height: f64, amplitude: f64, edge: f64 },
}

impl TauMap {
    pub fn eval(&self, s: Complex64) -> Complex64 {
        match *self {
            TauMap::Affine { tau0, slope } => c(tau0) + c(slope) * s,
            TauMap::Constant { tau0 } => c(tau0),
            TauMap::Mixed { height, amplitude, edge } => {
                let t = (s.re - edge).max(0.0);
                Complex64::new(0.0, height + amplitude * t * t * t)
            }
        }
    }

    /// `τ'(s)` for the holomorphic presets.
    pub fn derivative(&self, _s: Complex64) -> Option<Complex64> {
        match *self {
            TauMap::Affine { slope, .. } => Some(c(slope)),
            TauMap::Constant { .. } => Some(Complex64::new(0.0, 0.0)),
            TauMap::Mixed { .. } => None,
        }
    }

    pub fn is_holomorphic(&self) -> bool {
        !matches!(self, TauMap::Mixed { .. })
    }
}

/// Square base patch: nodes `center + spacing·(i + j·√-1)`, `|i|, |j| <= half_count`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaseGrid {
    pub center: [f64; 2],
    pub spacing: f64,
    pub half_count: usize,
}

impl BaseGrid {
    pub fn nodes(&self) -> Vec<Complex64> {
        let k = self.half_count as i64;
        let mut out = Vec::with_capacity(((2 * k + 1) * (2 * k + 1)) as usize);
        for j in -k..=k {
            for i in -k..=k {
                out.push(c(self.center) + Complex64::new(i as f64, j as f64) * self.spacing);
            }
        }
        out
    }

    /// Nodes whose 3×3 neighbourhood lies in the patch.
    pub fn interior_nodes(&self) -> Vec<Complex64> {
        let r = (self.half_count as f64 - 1.0) * self.spacing;
        self.nodes().into_iter().filter(|s| self.offset_ok(*s, r)).collect()
    }

    fn offset_ok(&self, s: Complex64, r: f64) -> bool {
        let d = s - c(self.center);
        let slack = 1e-9 * self.spacing;
        d.re.abs() <= r + slack && d.im.abs() <= r + slack
    }

    /// True when the stencil of width `h` around `s` stays in the patch.
    pub fn contains_stencil(&self, s: Complex64, h: f64) -> bool {
        self.offset_ok(s, self.half_count as f64 * self.spacing - h)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyDescriptor {
    pub kind: FamilyKind,
    #[serde(default)]
    pub tau: Option<TauMap>,
    pub base_grid: BaseGrid,
    /// Fibre grid size: `N×N` lattice points for tori, radial nodes for spheres.
    pub fiber_resolution: usize,
}

impl FamilyDescriptor {
    pub fn torus(tau: TauMap, base_grid: BaseGrid, fiber_resolution: usize) -> Self {
        let kind = if matches!(tau, TauMap::Constant { .. }) { FamilyKind::Isotrivial } else { FamilyKind::TorusFamily };
        Self { kind, tau: Some(tau), base_grid, fiber_resolution }
    }

    pub fn sphere(base_grid: BaseGrid, fiber_resolution: usize) -> Self {
        Self { kind: FamilyKind::SphereFamily, tau: None, base_grid, fiber_resolution }
    }

    /// The closed-form Kodaira–Spencer route applies.
    pub fn has_ks_class(&self) -> bool {
        self.tau.map_or(true, |t| t.is_holomorphic())
    }

    pub fn fiber_dimension(&self) -> usize {
        1
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.base_grid;
        if !(g.spacing > 0.0 && g.spacing.is_finite()) || g.half_count < 1 {
            return Err(LabError::Invalid("base grid needs positive spacing and at least a 3×3 patch".into()));
        }
        if !g.center.iter().all(|x| x.is_finite()) {
            return Err(LabError::Invalid("base grid centre must be finite".into()));
        }
        match self.kind {
            FamilyKind::SphereFamily => {
                if self.fiber_resolution < 64 {
                    return Err(LabError::Invalid("sphere fibres need at least 64 radial nodes".into()));
                }
                Ok(())
            }
            FamilyKind::TorusFamily | FamilyKind::Isotrivial => {
                let tau = self.tau.ok_or_else(|| LabError::Invalid("torus families need a parameter map".into()))?;
                if self.kind == FamilyKind::Isotrivial && !matches!(tau, TauMap::Constant { .. }) {
                    return Err(LabError::Invalid("isotrivial families take a constant parameter map".into()));
                }
                if self.fiber_resolution < 4 {
                    return Err(LabError::Invalid("torus fibres need at least a 4×4 grid".into()));
                }
                if let TauMap::Mixed { height, amplitude, edge } = tau {
                    if !(height.is_finite() && amplitude.is_finite() && edge.is_finite()) {
                        return Err(LabError::Invalid("mixed map parameters must be finite".into()));
                    }
                }
                let h = g.spacing;
                for s in g.nodes() {
                    let t = tau.eval(s);
                    if !(t.im > 0.0 && t.re.is_finite()) {
                        return Err(LabError::Invalid(format!("Im τ must be positive, got {t} at s = {s}")));
                    }
                    if tau.is_holomorphic() {
                        let dx = (tau.eval(s + h) - tau.eval(s - h)) / (2.0 * h);
                        let dy = (tau.eval(s + Complex64::i() * h) - tau.eval(s - Complex64::i() * h)) / (2.0 * h);
                        // ∂τ/∂s̄ = (∂x + i∂y)τ / 2.
                        let cr = ((dx + Complex64::i() * dy) / 2.0).norm();
                        if cr > CR_TOL {
                            return Err(LabError::Invalid(format!("parameter map fails Cauchy–Riemann by {cr:e}")));
                        }
                    }
                }
                Ok(())
            }
        }
    }

    fn tau_map(&self) -> Option<TauMap> {
        match self.kind {
            FamilyKind::SphereFamily => None,
            _ => self.tau,
        }
    }

    fn require_interior(&self, s: Complex64) -> Result<()> {
        if !self.base_grid.contains_stencil(s, self.base_grid.spacing) {
            return Err(LabError::Stencil(format!("base point {s} lacks a 3×3 stencil inside the patch")));
        }
        Ok(())
    }

    /// Semi-KE potential `Φ(z, s)`.
    pub fn potential(&self, z: Complex64, s: Complex64) -> f64 {
        match self.tau_map() {
            Some(tau) => {
                let y = tau.eval(s).im;
                z.im * z.im / y + y.ln()
            }
            None => 2.0 * (1.0 + z.norm_sqr()).ln(),
        }
    }

    /// Fibre quadrature nodes with area weights.
    pub fn fiber_points(&self, s: Complex64) -> Vec<(Complex64, f64)> {
        let n = self.fiber_resolution;
        match self.tau_map() {
            Some(tau) => {
                let t = tau.eval(s);
                let w = 1.0 / (n * n) as f64;
                let mut out = Vec::with_capacity(n * n);
                for j in 0..n {
                    for i in 0..n {
                        out.push((Complex64::new(i as f64 / n as f64, 0.0) + t * (j as f64 / n as f64), w));
                    }
                }
                out
            }
            None => {
                // Log-radial rule for the round sphere, density 2e^t/(1+e^t)².
                let (tmax, m) = (8.0, 16usize);
                let h = 2.0 * tmax / (n - 1) as f64;
                let mut out = Vec::with_capacity(n * m);
                for k in 0..n {
                    let t = -tmax + k as f64 * h;
                    let e = t.exp();
                    let f = 2.0 * e / ((1.0 + e) * (1.0 + e));
                    for a in 0..m {
                        let th = 2.0 * PI * a as f64 / m as f64;
                        out.push((Complex64::from_polar((t / 2.0).exp(), th), f * h * 2.0 * PI / m as f64));
                    }
                }
                out
            }
        }
    }

    /// `|A|²` from the closed-form harmonic Kodaira–Spencer representative.
    pub fn ks_density(&self, s: Complex64) -> Result<f64> {
        match self.tau_map() {
            Some(tau) => {
                let d = tau
                    .derivative(s)
                    .ok_or_else(|| LabError::Invalid("Kodaira–Spencer class needs a holomorphic parameter map".into()))?;
                let y = tau.eval(s).im;
                Ok(d.norm_sqr() / (4.0 * y * y))
            }
            None => Ok(0.0),
        }
    }
}

/// Complex Hessian entries `(Φ_{zz̄}, Φ_{zs̄}, Φ_{ss̄})` by central
/// differences with fibre step `dz` and base step `ds`.
pub fn complex_hessian(
    phi: &dyn Fn(Complex64, Complex64) -> f64,
    z: Complex64,
    s: Complex64,
    dz: f64,
    ds: f64,
) -> (f64, Complex64, f64) {
    let i = Complex64::i();
    let p0 = phi(z, s);
    let hzz = (phi(z + dz, s) + phi(z - dz, s) + phi(z + i * dz, s) + phi(z - i * dz, s) - 4.0 * p0) / (4.0 * dz * dz);
    let hss = (phi(z, s + ds) + phi(z, s - ds) + phi(z, s + i * ds) + phi(z, s - i * ds) - 4.0 * p0) / (4.0 * ds * ds);
    let mixed = |u: Complex64, v: Complex64| {
        (phi(z + u * dz, s + v * ds) - phi(z + u * dz, s - v * ds) - phi(z - u * dz, s + v * ds)
            + phi(z - u * dz, s - v * ds))
            / (4.0 * dz * ds)
    };
    let one = Complex64::new(1.0, 0.0);
    let (xa, yb, xb, ya) = (mixed(one, one), mixed(i, i), mixed(one, i), mixed(i, one));
    // ∂z∂s̄ = (∂x - i∂y)(∂a + i∂b) / 4.
    let hzs = Complex64::new(xa + yb, xb - ya) / 4.0;
    (hzz, hzs, hss)
}

/// Horizontal component `c = Φ_{ss̄} - |Φ_{zs̄}|² / Φ_{zz̄}` at `(z, s)`.
fn horizontal(fam: &FamilyDescriptor, z: Complex64, s: Complex64, dz: f64, ds: f64) -> Result<f64> {
    let phi = |z: Complex64, s: Complex64| fam.potential(z, s);
    // Relative fibre step keeps Φ_{zz̄} resolved far out on sphere fibres.
    let (hzz, hzs, hss) = complex_hessian(&phi, z, s, dz * (1.0 + z.norm()), ds);
    if !(hzz > 0.0) {
        return Err(LabError::NotPositive(format!("fibre metric not positive at z = {z}, s = {s}")));
    }
    Ok(hss - hzs.norm_sqr() / hzz)
}

fn fiber_step(fam: &FamilyDescriptor) -> f64 {
    1.0 / fam.fiber_resolution as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiberMetric {
    pub base_point: [f64; 2],
    /// `τ(s)` for torus fibres.
    pub tau: Option<[f64; 2]>,
    /// Metric coefficient against `(i/2) dz∧dz̄` on the fibre grid (tori)
    /// or the radial density `f` (spheres).
    pub density: Vec<f64>,
    pub area: f64,
    /// Flatness residual (tori) or Newton residual (spheres).
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemiKEMetric {
    pub fibers: Vec<FiberMetric>,
    /// Einstein constant of every fibre: 0 for flat tori, 1 for round spheres.
    pub fiberwise_constant: f64,
}

/// Flat fibre metric on the `N×N` lattice grid and the sup of its
/// discrete Ricci density `-Δ log g`.
fn torus_fiber(fam: &FamilyDescriptor, tau: TauMap, s: Complex64) -> Result<FiberMetric> {
    let n = fam.fiber_resolution;
    let t = tau.eval(s);
    let dz = fiber_step(fam);
    let pts = fam.fiber_points(s);
    let phi = |z: Complex64, s: Complex64| fam.potential(z, s);
    let density: Vec<f64> = pts.iter().map(|(z, _)| 2.0 * complex_hessian(&phi, *z, s, dz, dz).0).collect();
    if let Some(k) = density.iter().position(|g| !(*g > 0.0)) {
        return Err(LabError::NotPositive(format!("fibre metric not positive at node {k} over s = {s}")));
    }
    let area: f64 = density.iter().zip(&pts).map(|(g, (_, w))| g * w * t.im).sum();
    // Laplacian in lattice coordinates (a, b): ∂x = ∂a, ∂w = (∂b - Re τ ∂a) / Im τ.
    let lg: Vec<f64> = density.iter().map(|g| g.ln()).collect();
    let at = |i: usize, j: usize| lg[(j % n) * n + (i % n)];
    let h = 1.0 / n as f64;
    let mut residual = 0.0_f64;
    for j in 0..n {
        for i in 0..n {
            let (ip, im, jp, jm) = (i + 1, i + n - 1, j + 1, j + n - 1);
            let c0 = at(i, j);
            let aa = (at(ip, j) - 2.0 * c0 + at(im, j)) / (h * h);
            let bb = (at(i, jp) - 2.0 * c0 + at(i, jm)) / (h * h);
            let ab = (at(ip, jp) - at(ip, jm) - at(im, jp) + at(im, jm)) / (4.0 * h * h);
            let lap = aa + (bb - 2.0 * t.re * ab + t.re * t.re * aa) / (t.im * t.im);
            residual = residual.max(lap.abs());
        }
    }
    Ok(FiberMetric { base_point: pair(s), tau: Some(pair(t)), density, area, residual })
}

/// Fibrewise KE metrics at every base node.
pub fn fiberwise_ke(fam: &FamilyDescriptor, exec: Exec) -> Result<SemiKEMetric> {
    fam.validate()?;
    let nodes = fam.base_grid.nodes();
    match fam.tau_map() {
        Some(tau) => {
            let fibers = exec.map(&nodes, |s| torus_fiber(fam, tau, *s)).into_iter().collect::<Result<Vec<_>>>()?;
            Ok(SemiKEMetric { fibers, fiberwise_constant: 0.0 })
        }
        None => {
            let opts = KeOptions { nodes: fam.fiber_resolution, ..KeOptions::default() };
            let fibers = exec
                .map(&nodes, |s| {
                    let (p, rep) = ke_solve_radial((1.0, 1.0), 4.0 * PI, &opts)
                        .map_err(|e| LabError::Internal(format!("fibre over s = {s}: {e}")))?;
                    Ok(FiberMetric {
                        base_point: pair(*s),
                        tau: None,
                        area: p.total_area,
                        density: p.density,
                        residual: rep.residual,
                    })
                })
                .into_iter()
                .collect::<Result<Vec<_>>>()?;
            Ok(SemiKEMetric { fibers, fiberwise_constant: 1.0 })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WPSample {
    pub base_point: [f64; 2],
    /// Coefficient of `i ds∧ds̄`.
    pub wp_density: f64,
    /// `∫ |A|² ω_s`; absent when the parameter map is not holomorphic.
    pub ks_norm: Option<f64>,
}

/// Kodaira–Spencer route: integrate the closed-form `|A|²` over the fibre.
pub fn wp_via_ks_norm(fam: &FamilyDescriptor, s: Complex64) -> Result<WPSample> {
    fam.validate()?;
    fam.require_interior(s)?;
    let a2 = fam.ks_density(s)?;
    let area: f64 = fam.fiber_points(s).iter().map(|(_, w)| w).sum();
    let ks = a2 * area;
    Ok(WPSample { base_point: pair(s), wp_density: ks, ks_norm: Some(ks) })
}

/// Curvature route: `-∫ c ω_s` with `c` from second differences of the
/// semi-KE potential, base steps taken from the base grid.
pub fn wp_fiber_integral(fam: &FamilyDescriptor, s: Complex64) -> Result<WPSample> {
    fam.validate()?;
    fam.require_interior(s)?;
    let ks = if fam.has_ks_class() { wp_via_ks_norm(fam, s)?.ks_norm } else { None };
    let (dz, ds) = (fiber_step(fam), fam.base_grid.spacing);
    let mut total = 0.0;
    for (z, w) in fam.fiber_points(s) {
        total += horizontal(fam, z, s, dz, ds)? * w;
    }
    Ok(WPSample { base_point: pair(s), wp_density: -total, ks_norm: ks })
}

/// Both estimators at every interior base node; the first is absent for
/// non-holomorphic parameter maps.
pub fn wp_field(fam: &FamilyDescriptor, exec: Exec) -> Result<Vec<(Option<WPSample>, WPSample)>> {
    fam.validate()?;
    let nodes = fam.base_grid.interior_nodes();
    let ks = fam.has_ks_class();
    exec.map(&nodes, |s| {
        let a = if ks { Some(wp_via_ks_norm(fam, *s)?) } else { None };
        Ok((a, wp_fiber_integral(fam, *s)?))
    })
    .into_iter()
    .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoliationEntry {
    pub base_point: [f64; 2],
    /// Null directions of `ω_SKE` transverse to the fibre.
    pub rank: usize,
    /// Sup over the fibre of the horizontal eigenvalue `|c|`.
    pub horizontal_sup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoliationReport {
    pub entries: Vec<FoliationEntry>,
    pub fiber_dimension: usize,
    /// Rank equals the fibre dimension at every entry.
    pub leaf_indicator: bool,
}

/// Null rank of the horizontal block of `ω_SKE` over `s`. The base is one
/// dimensional, so the block is the scalar `c`; its direction is null when
/// `|c| < NULL_TOL` on the whole fibre.
pub fn foliation_rank(fam: &FamilyDescriptor, s: Complex64) -> Result<FoliationEntry> {
    fam.validate()?;
    fam.require_interior(s)?;
    let (dz, ds) = (fiber_step(fam), fam.base_grid.spacing);
    let mut sup = 0.0_f64;
    for (z, _) in fam.fiber_points(s) {
        sup = sup.max(horizontal(fam, z, s, dz, ds)?.abs());
    }
    let rank = if sup < NULL_TOL { fam.fiber_dimension() } else { 0 };
    Ok(FoliationEntry { base_point: pair(s), rank, horizontal_sup: sup })
}

pub fn foliation_report(fam: &FamilyDescriptor, exec: Exec) -> Result<FoliationReport> {
    fam.validate()?;
    let nodes = fam.base_grid.interior_nodes();
    let entries = exec.map(&nodes, |s| foliation_rank(fam, *s)).into_iter().collect::<Result<Vec<_>>>()?;
    let dim = fam.fiber_dimension();
    let leaf_indicator = entries.iter().all(|e| e.rank == dim);
    Ok(FoliationReport { entries, fiber_dimension: dim, leaf_indicator })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HorizontalReport {
    pub base_point: [f64; 2],
    /// Sup over the fibre of `|-Δc - c - |A|²|`.
    pub residual: f64,
    /// `residual / |A|²`, when `|A|²` is not negligible.
    pub relative: Option<f64>,
    pub c_mean: f64,
    pub ks_norm: f64,
}

/// Checks `-Δ_{ω_s} c - c = |A|²` on the fibre over `s`. All derivatives,
/// base directions included, use the fibre spacing `1/N`, so the residual
/// converges under fibre refinement.
pub fn horizontal_c_residual(fam: &FamilyDescriptor, s: Complex64) -> Result<HorizontalReport> {
    fam.validate()?;
    let tau = fam
        .tau_map()
        .ok_or_else(|| LabError::Invalid("the horizontal identity check runs on torus families".into()))?;
    let d = fiber_step(fam);
    if !fam.base_grid.contains_stencil(s, d) {
        return Err(LabError::Stencil(format!("base point {s} lacks a stencil of width {d} inside the patch")));
    }
    let a2 = fam.ks_density(s)?;
    let n = fam.fiber_resolution;
    let t = tau.eval(s);
    // c on the lattice grid plus a one-node halo; neighbours are evaluated
    // at the shifted points rather than wrapped, since the discrete c is
    // only periodic up to its truncation error.
    let m = n + 2;
    let mut cs = Vec::with_capacity(m * m);
    for j in 0..m {
        for i in 0..m {
            let (a, b) = ((i as f64 - 1.0) / n as f64, (j as f64 - 1.0) / n as f64);
            cs.push(horizontal(fam, Complex64::new(a, 0.0) + t * b, s, d, d)?);
        }
    }
    // Δ_ω = (Im τ / 2)(∂x² + ∂w²) in lattice coordinates.
    let at = |i: usize, j: usize| cs[j * m + i];
    let h = 1.0 / n as f64;
    let mut residual = 0.0_f64;
    let mut sum = 0.0;
    for j in 1..=n {
        for i in 1..=n {
            let c0 = at(i, j);
            sum += c0;
            let aa = (at(i + 1, j) - 2.0 * c0 + at(i - 1, j)) / (h * h);
            let bb = (at(i, j + 1) - 2.0 * c0 + at(i, j - 1)) / (h * h);
            let ab = (at(i + 1, j + 1) - at(i + 1, j - 1) - at(i - 1, j + 1) + at(i - 1, j - 1)) / (4.0 * h * h);
            let lap = 0.5 * t.im * (aa + (bb - 2.0 * t.re * ab + t.re * t.re * aa) / (t.im * t.im));
            residual = residual.max((-lap - c0 - a2).abs());
        }
    }
    let c_mean = sum / (n * n) as f64;
    let relative = (a2 > 1e-12).then(|| residual / a2);
    Ok(HorizontalReport { base_point: pair(s), residual, relative, c_mean, ks_norm: a2 })
}

/// Sign of `ω_B` in `Ric(ω_X) = ±ω_B + ω_WP + poles`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `Ric = -ω_B + …`.
    #[default]
    GeneralType,
    /// `Ric = +ω_B + …`.
    Fano,
}

impl Regime {
    fn sign(self) -> f64 {
        match self {
            Regime::GeneralType => -1.0,
            Regime::Fano => 1.0,
        }
    }
}

/// Divisor term `coefficient · [s = base_point]`, smoothed to
/// `coefficient · i∂∂̄ log(|s - s_P|² + ε²)` when `epsilon > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoleAtom {
    pub coefficient: f64,
    pub base_point: [f64; 2],
    #[serde(default)]
    pub epsilon: f64,
}

impl PoleAtom {
    fn density(&self, s: Complex64) -> f64 {
        if self.epsilon == 0.0 {
            return 0.0;
        }
        let e2 = self.epsilon * self.epsilon;
        let r2 = (s - c(self.base_point)).norm_sqr();
        self.coefficient * e2 / ((r2 + e2) * (r2 + e2))
    }
}

/// Product patch in `(z, s)`: `points` samples per real direction across
/// `[-half_width, half_width]`, differentiated with spacing `step`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Patch {
    pub z_center: [f64; 2],
    pub s_center: [f64; 2],
    pub half_width: f64,
    pub points: usize,
    pub step: f64,
}

impl Patch {
    fn offsets(&self) -> Vec<f64> {
        let p = self.points;
        if p == 1 {
            return vec![0.0];
        }
        (0..p).map(|k| -self.half_width + 2.0 * self.half_width * k as f64 / (p - 1) as f64).collect()
    }

    pub fn base_points(&self) -> Vec<Complex64> {
        let o = self.offsets();
        let mut out = Vec::with_capacity(o.len() * o.len());
        for b in &o {
            for a in &o {
                out.push(c(self.s_center) + Complex64::new(*a, *b));
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelativeKeReport {
    /// Sup over the patch of the largest entry of the residual form.
    pub residual: f64,
    pub fiber_block: f64,
    pub mixed_block: f64,
    pub base_block: f64,
    pub nodes: usize,
}

const D1: [f64; 5] = [1.0 / 12.0, -8.0 / 12.0, 0.0, 8.0 / 12.0, -1.0 / 12.0];
const D2: [f64; 5] = [-1.0 / 12.0, 16.0 / 12.0, -30.0 / 12.0, 16.0 / 12.0, -1.0 / 12.0];

/// Fourth-order `(∂z∂z̄, ∂z∂s̄, ∂s∂s̄)` of a function of `(z, s)`.
fn hessian4(f: &dyn Fn(Complex64, Complex64) -> Result<f64>, z: Complex64, s: Complex64, h: f64) -> Result<(f64, Complex64, f64)> {
    let i = Complex64::i();
    let one = Complex64::new(1.0, 0.0);
    let second = |dz: Complex64, ds: Complex64| -> Result<f64> {
        let mut acc = 0.0;
        for (k, w) in D2.iter().enumerate() {
            let t = (k as f64 - 2.0) * h;
            acc += w * f(z + dz * t, s + ds * t)?;
        }
        Ok(acc / (h * h))
    };
    let cross = |dz: Complex64, ds: Complex64| -> Result<f64> {
        let mut acc = 0.0;
        for (p, wp) in D1.iter().enumerate() {
            for (q, wq) in D1.iter().enumerate() {
                if *wp == 0.0 || *wq == 0.0 {
                    continue;
                }
                let (tp, tq) = ((p as f64 - 2.0) * h, (q as f64 - 2.0) * h);
                acc += wp * wq * f(z + dz * tp, s + ds * tq)?;
            }
        }
        Ok(acc / (h * h))
    };
    let zero = Complex64::new(0.0, 0.0);
    let hzz = (second(one, zero)? + second(i, zero)?) / 4.0;
    let hss = (second(zero, one)? + second(zero, i)?) / 4.0;
    let (xa, yb, xb, ya) = (cross(one, one)?, cross(i, i)?, cross(one, i)?, cross(i, one)?);
    Ok((hzz, Complex64::new(xa + yb, xb - ya) / 4.0, hss))
}

/// Sup over the patch of `Ric(ω_X) - (±ω_B + ω_WP + poles)`, with `Ric`
/// from fourth-order differences of `log det g_X`.
pub fn relative_ke_residual(
    total: &Sampler,
    base: &Sampler,
    wp: &(dyn Fn(Complex64) -> Result<f64> + Sync),
    poles: &[PoleAtom],
    patch: &Patch,
    regime: Regime,
    exec: Exec,
) -> Result<RelativeKeReport> {
    if patch.points == 0 || !(patch.step > 0.0) || !(patch.half_width >= 0.0) {
        return Err(LabError::Invalid("patch needs points >= 1, step > 0 and half_width >= 0".into()));
    }
    let reach = patch.half_width * std::f64::consts::SQRT_2 + 2.0 * patch.step;
    for p in poles {
        if !(p.epsilon >= 0.0 && p.coefficient.is_finite()) {
            return Err(LabError::Invalid("pole atoms need finite coefficients and epsilon >= 0".into()));
        }
        if p.epsilon == 0.0 && (c(p.base_point) - c(patch.s_center)).norm() <= reach {
            return Err(LabError::SingularLocus(format!("patch touches the divisor at s = {:?}", p.base_point)));
        }
    }
    let logdet = |z: Complex64, s: Complex64| -> Result<f64> {
        let g = total(&[z, s])?;
        if g.nrows() != 2 || g.ncols() != 2 {
            return Err(LabError::Invalid("total metric sampler must return 2×2 matrices".into()));
        }
        let det = (g[(0, 0)] * g[(1, 1)] - g[(0, 1)] * g[(1, 0)]).re;
        if !(det > 0.0) || !(g[(0, 0)].re > 0.0) {
            return Err(LabError::NotPositive(format!("total metric degenerate at z = {z}, s = {s}")));
        }
        Ok(det.ln())
    };
    let o = patch.offsets();
    let mut zs = Vec::with_capacity(o.len() * o.len());
    for b in &o {
        for a in &o {
            zs.push(c(patch.z_center) + Complex64::new(*a, *b));
        }
    }
    let nodes: Vec<(Complex64, Complex64)> =
        patch.base_points().into_iter().flat_map(|s| zs.iter().map(move |z| (*z, s))).collect();
    let per = exec.map(&nodes, |(z, s)| -> Result<(f64, f64, f64)> {
        let (lzz, lzs, lss) = hessian4(&logdet, *z, *s, patch.step)?;
        let b = base(&[*s])?;
        if b.nrows() != 1 || !(b[(0, 0)].re > 0.0) {
            return Err(LabError::NotPositive(format!("base metric not positive at s = {s}")));
        }
        let target = regime.sign() * b[(0, 0)].re + wp(*s)? + poles.iter().map(|p| p.density(*s)).sum::<f64>();
        Ok(((-lzz).abs(), lzs.norm(), (-lss - target).abs()))
    });
    let (mut fb, mut mb, mut bb) = (0.0_f64, 0.0_f64, 0.0_f64);
    for r in per {
        let (a, m, b) = r?;
        fb = fb.max(a);
        mb = mb.max(m);
        bb = bb.max(b);
    }
    Ok(RelativeKeReport { residual: fb.max(mb).max(bb), fiber_block: fb, mixed_block: mb, base_block: bb, nodes: nodes.len() })
}

/// Total-space models with known Ricci form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum RelativeModel {
    /// `i∂∂̄((Im z)²/Im τ) + τ*ω_P` over the hyperbolic pullback `ω_B = τ*ω_P`,
    /// `ω_P = i dτ∧dτ̄ / (Im τ)²`. Then `Ric(ω_X) = -ω_B + ω_WP` exactly.
    SemiFlat { tau: TauMap },
    /// Flat torus `τ0` times the upper half plane with `Ric(ω_B) = -ω_B`.
    Product { tau0: [f64; 2] },
}

impl RelativeModel {
    pub fn total(&self) -> Result<Box<Sampler<'static>>> {
        match *self {
            RelativeModel::SemiFlat { tau } => {
                if !tau.is_holomorphic() {
                    return Err(LabError::Invalid("semi-flat model needs a holomorphic parameter map".into()));
                }
                Ok(Box::new(move |p: &[Complex64]| {
                    let (z, s) = (p[0], p[1]);
                    let t = tau.eval(s);
                    let d = tau.derivative(s).unwrap_or_default();
                    let (y, w) = (t.im, z.im);
                    let ys = d / (2.0 * Complex64::i());
                    let gzz = Complex64::new(1.0 / (2.0 * y), 0.0);
                    let gzs = Complex64::i() * w * ys.conj() / (y * y);
                    let gss = Complex64::new(2.0 * w * w * ys.norm_sqr() / (y * y * y) + d.norm_sqr() / (y * y), 0.0);
                    Ok(CMatrix::from_row_slice(2, 2, &[gzz, gzs, gzs.conj(), gss]))
                }))
            }
            RelativeModel::Product { tau0 } => {
                let y0 = tau0[1];
                if !(y0 > 0.0) {
                    return Err(LabError::Invalid("Im τ0 must be positive".into()));
                }
                Ok(Box::new(move |p: &[Complex64]| {
                    let b = hyperbolic_ke(p[1])?;
                    let zero = Complex64::new(0.0, 0.0);
                    Ok(CMatrix::from_row_slice(2, 2, &[Complex64::new(1.0 / (2.0 * y0), 0.0), zero, zero, Complex64::new(b, 0.0)]))
                }))
            }
        }
    }

    pub fn base(&self) -> Box<Sampler<'static>> {
        match *self {
            RelativeModel::SemiFlat { tau } => Box::new(move |p: &[Complex64]| {
                let y = tau.eval(p[0]).im;
                let d = tau.derivative(p[0]).unwrap_or_default();
                Ok(CMatrix::from_element(1, 1, Complex64::new(d.norm_sqr() / (y * y), 0.0)))
            }),
            RelativeModel::Product { .. } => {
                Box::new(|p: &[Complex64]| Ok(CMatrix::from_element(1, 1, Complex64::new(hyperbolic_ke(p[0])?, 0.0))))
            }
        }
    }

    /// The torus family whose Weil–Petersson field enters the identity.
    pub fn family(&self, base_grid: BaseGrid, fiber_resolution: usize) -> FamilyDescriptor {
        match *self {
            RelativeModel::SemiFlat { tau } => FamilyDescriptor::torus(tau, base_grid, fiber_resolution),
            RelativeModel::Product { tau0 } => FamilyDescriptor::torus(TauMap::Constant { tau0 }, base_grid, fiber_resolution),
        }
    }
}

/// `1 / (2 (Im s)²)`, the Kähler–Einstein metric of curvature form `-ω` on
/// the upper half plane.
fn hyperbolic_ke(s: Complex64) -> Result<f64> {
    if !(s.im > 0.0) {
        return Err(LabError::SingularLocus(format!("s = {s} is off the upper half plane")));
    }
    Ok(1.0 / (2.0 * s.im * s.im))
}

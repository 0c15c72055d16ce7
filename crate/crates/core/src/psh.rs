//! Lelong numbers and integrability thresholds of model psh weights on balls
//! in `C^n`, `n` in {1, 2}.
//!
//! Normalization: `dd^c = (i / 2π) ∂∂̄`, so `dd^c log|z|^2` is the unit Dirac
//! mass. Points of `C^n` are given in JSON as real coordinates
//! `[x1, y1, (x2, y2)]`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::exec::Exec;
use crate::quad::{gauss_legendre_on, log_sum_exp};

pub type Point = Vec<Complex64>;

/// `lambda * log|z - center|^2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pole {
    pub center: Vec<f64>,
    pub lambda: f64,
}

/// `coefficient * log sum_a |z - center|^{2a}` over the exponent vectors `a`;
/// the weight of `(sum |S_a|^2)^{1/m}` with `coefficient = 1/m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Algebraic {
    pub center: Vec<f64>,
    pub exponents: Vec<Vec<u32>>,
    pub coefficient: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmoothPreset {
    None,
    /// `|z|^2`.
    Norm2,
    /// `Re z_1`, pluriharmonic.
    ReZ1,
    /// `|z|^2 + Re(z_1^2) / 2`, strictly psh.
    Tilted,
}

fn default_scale() -> f64 {
    1.0
}

/// Weight JSON: `{"poles": [...], "algebraic": ..., "smooth": "norm2"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PshWeight {
    #[serde(default)]
    pub poles: Vec<Pole>,
    #[serde(default)]
    pub algebraic: Option<Algebraic>,
    #[serde(default = "default_smooth")]
    pub smooth: SmoothPreset,
    #[serde(default = "default_scale")]
    pub smooth_scale: f64,
    /// Point the smooth preset is centred at; origin when absent.
    #[serde(default)]
    pub smooth_center: Option<Vec<f64>>,
}

fn default_smooth() -> SmoothPreset {
    SmoothPreset::None
}

/// The ball `|z| < radius` in `C^dim`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub dim: usize,
    pub radius: f64,
}

/// Reference measure `e^{-psi} dV` for integrability tests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ReferenceVolume {
    #[default]
    Lebesgue,
    Weighted { log_density: PshWeight },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LelongEstimate {
    pub value: f64,
    pub slope_value: f64,
    pub discrepancy: f64,
    pub r_schedule: Vec<f64>,
    pub mass_ratios: Vec<f64>,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdEstimate {
    pub threshold: f64,
    pub bracket: (f64, f64),
    /// True when no divergence was seen up to `alpha_max`; the upper end of
    /// the bracket is then infinite (serialized as null).
    pub open: bool,
    pub tolerance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum FamilyMode {
    Absolute,
    Relative { n: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyThreshold {
    pub estimate: ThresholdEstimate,
    pub per_weight: Vec<ThresholdEstimate>,
    pub argmin: usize,
    /// Relative mode: whether `threshold > n / (n + 1)`.
    pub criterion: Option<bool>,
    pub criterion_bound: Option<f64>,
}

pub const LELONG_TOLERANCE: f64 = 1e-2;
pub const RATIO_THRESHOLD: f64 = 1.05;
pub const ALPHA_MAX: f64 = 10.0;
pub const BRACKET_REL_WIDTH: f64 = 0.01;
const SHELLS_PER_BLOCK: usize = 8;
const BLOCKS: usize = 4;

fn to_point(c: &[f64], dim: usize) -> Result<Point> {
    if c.len() != 2 * dim {
        return Err(LabError::Invalid(format!(
            "point has {} real coordinates, expected {}",
            c.len(),
            2 * dim
        )));
    }
    if c.iter().any(|x| !x.is_finite()) {
        return Err(LabError::Invalid("non-finite coordinate".into()));
    }
    Ok(c.chunks(2).map(|p| Complex64::new(p[0], p[1])).collect())
}

pub fn point(c: &[f64]) -> Point {
    c.chunks(2).map(|p| Complex64::new(p[0], p[1])).collect()
}

fn norm2(z: &[Complex64]) -> f64 {
    z.iter().map(|c| c.norm_sqr()).sum()
}

fn diff(a: &[Complex64], b: &[Complex64]) -> Point {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Real inner product of `C^n = R^{2n}`.
fn rdot(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.re * y.re + x.im * y.im).sum()
}

/// Validated, dimension-resolved form of a [`PshWeight`].
#[derive(Debug, Clone)]
struct Compiled {
    poles: Vec<(Point, f64)>,
    algebraic: Option<(Point, Vec<Vec<u32>>, f64)>,
    smooth: SmoothPreset,
    smooth_scale: f64,
    smooth_center: Point,
}

impl PshWeight {
    pub fn pole(center: &[f64], lambda: f64) -> Self {
        Self {
            poles: vec![Pole { center: center.to_vec(), lambda }],
            ..Self::smooth(SmoothPreset::None)
        }
    }

    pub fn smooth(preset: SmoothPreset) -> Self {
        Self { poles: vec![], algebraic: None, smooth: preset, smooth_scale: 1.0, smooth_center: None }
    }

    /// `c * w`.
    pub fn scaled(&self, c: f64) -> Self {
        let mut w = self.clone();
        for p in &mut w.poles {
            p.lambda *= c;
        }
        if let Some(a) = &mut w.algebraic {
            a.coefficient *= c;
        }
        w.smooth_scale *= c;
        w
    }

    /// `w(. - v)`.
    pub fn translated(&self, v: &[f64]) -> Self {
        let shift = |c: &[f64]| c.iter().zip(v).map(|(a, b)| a + b).collect::<Vec<_>>();
        let mut w = self.clone();
        for p in &mut w.poles {
            p.center = shift(&p.center);
        }
        if let Some(a) = &mut w.algebraic {
            a.center = shift(&a.center);
        }
        let c = w.smooth_center.clone().unwrap_or_else(|| vec![0.0; v.len()]);
        w.smooth_center = Some(shift(&c));
        w
    }

    /// `w1 + w2` (smooth parts must agree up to scale or one must be absent).
    pub fn sum(&self, other: &Self) -> Result<Self> {
        let mut w = self.clone();
        w.poles.extend(other.poles.iter().cloned());
        if other.algebraic.is_some() {
            if w.algebraic.is_some() {
                return Err(LabError::Invalid("cannot add two algebraic parts".into()));
            }
            w.algebraic = other.algebraic.clone();
        }
        match (self.smooth, other.smooth) {
            (_, SmoothPreset::None) => {}
            (SmoothPreset::None, s) => {
                w.smooth = s;
                w.smooth_scale = other.smooth_scale;
                w.smooth_center = other.smooth_center.clone();
            }
            (a, b) if a == b && self.smooth_center == other.smooth_center => {
                w.smooth_scale += other.smooth_scale;
            }
            _ => return Err(LabError::Invalid("cannot add distinct smooth presets".into())),
        }
        Ok(w)
    }

    fn compile(&self, dim: usize) -> Result<Compiled> {
        if !(1..=2).contains(&dim) {
            return Err(LabError::UnsupportedDimension(dim));
        }
        let mut poles = Vec::with_capacity(self.poles.len());
        for p in &self.poles {
            if !(p.lambda >= 0.0) || !p.lambda.is_finite() {
                return Err(LabError::Invalid(format!("pole coefficient {} must be >= 0", p.lambda)));
            }
            poles.push((to_point(&p.center, dim)?, p.lambda));
        }
        let algebraic = match &self.algebraic {
            None => None,
            Some(a) => {
                if !(a.coefficient > 0.0) || !a.coefficient.is_finite() {
                    return Err(LabError::Invalid("algebraic coefficient must be > 0".into()));
                }
                if a.exponents.is_empty() || a.exponents.iter().any(|e| e.len() != dim) {
                    return Err(LabError::Invalid(format!(
                        "algebraic exponents must be nonempty vectors of length {dim}"
                    )));
                }
                // Isolated zero: each variable needs a pure power.
                for i in 0..dim {
                    let pure = a
                        .exponents
                        .iter()
                        .any(|e| e[i] > 0 && e.iter().enumerate().all(|(j, &x)| j == i || x == 0));
                    if !pure {
                        return Err(LabError::Invalid(format!(
                            "algebraic part needs a pure power of z_{}",
                            i + 1
                        )));
                    }
                }
                Some((to_point(&a.center, dim)?, a.exponents.clone(), a.coefficient))
            }
        };
        if !self.smooth_scale.is_finite() {
            return Err(LabError::Invalid("smooth scale must be finite".into()));
        }
        let smooth_center = match &self.smooth_center {
            Some(c) => to_point(c, dim)?,
            None => vec![Complex64::new(0.0, 0.0); dim],
        };
        Ok(Compiled {
            poles,
            algebraic,
            smooth: self.smooth,
            smooth_scale: self.smooth_scale,
            smooth_center,
        })
    }
}

impl Compiled {
    fn smooth_value(&self, z: &[Complex64]) -> f64 {
        let x = diff(z, &self.smooth_center);
        let v = match self.smooth {
            SmoothPreset::None => 0.0,
            SmoothPreset::Norm2 => norm2(&x),
            SmoothPreset::ReZ1 => x[0].re,
            SmoothPreset::Tilted => norm2(&x) + 0.5 * (x[0] * x[0]).re,
        };
        self.smooth_scale * v
    }

    fn smooth_derivative(&self, z: &[Complex64], u: &[Complex64]) -> f64 {
        let x = diff(z, &self.smooth_center);
        let d = match self.smooth {
            SmoothPreset::None => 0.0,
            SmoothPreset::Norm2 => 2.0 * rdot(&x, u),
            SmoothPreset::ReZ1 => u[0].re,
            SmoothPreset::Tilted => 2.0 * rdot(&x, u) + (x[0] * u[0]).re,
        };
        self.smooth_scale * d
    }

    fn algebraic_sum(w: &[Complex64], exps: &[Vec<u32>]) -> f64 {
        exps.iter()
            .map(|a| a.iter().zip(w).map(|(&k, c)| c.norm_sqr().powi(k as i32)).product::<f64>())
            .sum()
    }

    /// Value of the weight; `-inf` on the polar set.
    fn value(&self, z: &[Complex64]) -> f64 {
        let mut v = self.smooth_value(z);
        for (c, l) in &self.poles {
            if *l > 0.0 {
                v += l * norm2(&diff(z, c)).ln();
            }
        }
        if let Some((c, exps, coef)) = &self.algebraic {
            v += coef * Self::algebraic_sum(&diff(z, c), exps).ln();
        }
        v
    }

    /// Directional derivative along `u`, skipping poles centred at `skip`.
    fn derivative(&self, z: &[Complex64], u: &[Complex64], skip: Option<&[Complex64]>) -> f64 {
        let mut d = self.smooth_derivative(z, u);
        for (c, l) in &self.poles {
            if skip.is_some_and(|p| p == &c[..]) || *l == 0.0 {
                continue;
            }
            let w = diff(z, c);
            d += 2.0 * l * rdot(&w, u) / norm2(&w);
        }
        if let Some((c, exps, coef)) = &self.algebraic {
            let w = diff(z, c);
            let mut g = 0.0;
            let mut dg = 0.0;
            for a in exps {
                let term: f64 = a.iter().zip(&w).map(|(&k, c)| c.norm_sqr().powi(k as i32)).product();
                g += term;
                let mut s = 0.0;
                for (i, &k) in a.iter().enumerate() {
                    if k > 0 {
                        s += k as f64 * 2.0 * rdot(&w[i..=i], &u[i..=i]) / w[i].norm_sqr();
                    }
                }
                dg += term * s;
            }
            d += coef * dg / g;
        }
        d
    }

    fn singular_centers(&self) -> Vec<Point> {
        let mut out: Vec<Point> = self.poles.iter().filter(|(_, l)| *l > 0.0).map(|(c, _)| c.clone()).collect();
        if let Some((c, _, _)) = &self.algebraic {
            out.push(c.clone());
        }
        out.dedup();
        out
    }

    fn atom_at(&self, p: &[Complex64]) -> f64 {
        self.poles.iter().filter(|(c, _)| c[..] == *p).map(|(_, l)| l).sum()
    }
}

/// Quadrature on the unit sphere `S^{2n-1}`: unit vectors with weights
/// summing to one.
fn sphere_rule(dim: usize) -> Vec<(Point, f64)> {
    let nt = 64;
    match dim {
        1 => (0..nt)
            .map(|k| {
                let t = 2.0 * PI * (k as f64 + 0.5) / nt as f64;
                (vec![Complex64::new(t.cos(), t.sin())], 1.0 / nt as f64)
            })
            .collect(),
        _ => {
            // Hopf coordinates: z = (cos e * e^{i a}, sin e * e^{i b}),
            // measure proportional to sin e cos e de da db.
            let (eta, we) = gauss_legendre_on(24, 0.0, PI / 2.0);
            let nxi = 32;
            let mut out = Vec::with_capacity(eta.len() * nxi * nxi);
            for (e, w) in eta.iter().zip(&we) {
                let we = w * e.sin() * e.cos() * 2.0 / (nxi * nxi) as f64;
                for a in 0..nxi {
                    let ta = 2.0 * PI * (a as f64 + 0.5) / nxi as f64;
                    for b in 0..nxi {
                        let tb = 2.0 * PI * (b as f64 + 0.25) / nxi as f64;
                        out.push((
                            vec![
                                Complex64::from_polar(e.cos(), ta),
                                Complex64::from_polar(e.sin(), tb),
                            ],
                            we,
                        ));
                    }
                }
            }
            out
        }
    }
}

fn check_ball(domain: &Domain, p: &[Complex64], r: f64) -> Result<()> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(LabError::Invalid(format!("radius must be positive, got {r}")));
    }
    if norm2(p).sqrt() + r > domain.radius * (1.0 + 1e-12) {
        return Err(LabError::Invalid(format!(
            "ball of radius {r} around the point leaves the domain of radius {}",
            domain.radius
        )));
    }
    Ok(())
}

fn validate_domain(domain: &Domain) -> Result<()> {
    if !(1..=2).contains(&domain.dim) {
        return Err(LabError::UnsupportedDimension(domain.dim));
    }
    if !(domain.radius > 0.0) || !domain.radius.is_finite() {
        return Err(LabError::Invalid("domain radius must be positive".into()));
    }
    Ok(())
}

/// Sphere mean of the weight and normalized mass `r M'(r) / 2`.
fn sphere_stats(w: &Compiled, p: &[Complex64], r: f64, rule: &[(Point, f64)]) -> (f64, f64) {
    let mut mean = 0.0;
    let mut flux = 0.0;
    for (u, wt) in rule {
        let z: Point = p.iter().zip(u).map(|(a, b)| a + b * r).collect();
        mean += wt * w.value(&z);
        flux += wt * w.derivative(&z, u, Some(p));
    }
    (mean, w.atom_at(p) + 0.5 * r * flux)
}

/// Normalized mass `r^{-2(n-1)} ∫_{B_r(p)} dd^c w ∧ (dd^c|z|^2)^{n-1}`.
pub fn mass_ratio(w: &PshWeight, domain: &Domain, p: &[f64], r: f64) -> Result<f64> {
    validate_domain(domain)?;
    let c = w.compile(domain.dim)?;
    let p = to_point(p, domain.dim)?;
    check_ball(domain, &p, r)?;
    Ok(sphere_stats(&c, &p, r, &sphere_rule(domain.dim)).1)
}

/// Geometric schedule `r_j = 0.2 R 2^{-j}`, `j = 0..=8`.
pub fn r_schedule(domain: &Domain) -> Vec<f64> {
    (0..=8).map(|j| 0.2 * domain.radius * 0.5f64.powi(j)).collect()
}

fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let resid = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).abs())
        .fold(0.0, f64::max);
    (intercept, slope, resid)
}

pub fn lelong_number(w: &PshWeight, domain: &Domain, p: &[f64]) -> Result<LelongEstimate> {
    lelong_number_with(w, domain, p, Exec::default())
}

pub fn lelong_number_with(w: &PshWeight, domain: &Domain, p: &[f64], exec: Exec) -> Result<LelongEstimate> {
    validate_domain(domain)?;
    let c = w.compile(domain.dim)?;
    let p = to_point(p, domain.dim)?;
    let rs = r_schedule(domain);
    check_ball(domain, &p, rs[0])?;
    let rule = sphere_rule(domain.dim);
    let stats = exec.map(&rs, |&r| sphere_stats(&c, &p, r, &rule));
    if stats.iter().any(|(m, v)| !m.is_finite() || !v.is_finite()) {
        return Err(LabError::SingularLocus(
            "a sampling sphere passes through a singular centre".into(),
        ));
    }
    let masses: Vec<f64> = stats.iter().map(|s| s.1).collect();

    // Extrapolate the finest four mass ratios linearly in 1 / log(1 / r).
    let tail = rs.len() - 4;
    let x: Vec<f64> = rs[tail..].iter().map(|r| 1.0 / (1.0 / r).ln()).collect();
    let (value, _, resid) = linear_fit(&x, &masses[tail..]);
    if resid > LELONG_TOLERANCE {
        return Err(LabError::EstimateUnstable(format!(
            "mass ratios do not settle (fit residual {resid:.3e})"
        )));
    }

    // Sup-slope: regress sphere means on log r^2 over the finest five radii.
    let tail = rs.len() - 5;
    let x: Vec<f64> = rs[tail..].iter().map(|r| 2.0 * r.ln()).collect();
    let y: Vec<f64> = stats[tail..].iter().map(|s| s.0).collect();
    let (_, slope, _) = linear_fit(&x, &y);

    let value = value.max(0.0);
    let slope_value = slope.max(0.0);
    Ok(LelongEstimate {
        value,
        slope_value,
        discrepancy: (value - slope_value).abs(),
        r_schedule: rs,
        mass_ratios: masses,
        tolerance: LELONG_TOLERANCE,
    })
}

struct ThresholdProblem {
    weight: Compiled,
    reference: Option<Compiled>,
    sup: f64,
    centers: Vec<Point>,
    rho: f64,
    dim: usize,
}

impl ThresholdProblem {
    fn new(w: &PshWeight, domain: &Domain, reference: &ReferenceVolume) -> Result<Self> {
        validate_domain(domain)?;
        let weight = w.compile(domain.dim)?;
        let reference = match reference {
            ReferenceVolume::Lebesgue => None,
            ReferenceVolume::Weighted { log_density } => Some(log_density.compile(domain.dim)?),
        };
        let mut centers = weight.singular_centers();
        if let Some(r) = &reference {
            centers.extend(r.singular_centers());
        }
        for c in &centers {
            if norm2(c).sqrt() >= domain.radius {
                return Err(LabError::Invalid("singular centre outside the domain".into()));
            }
        }
        let rho = centers
            .iter()
            .map(|c| domain.radius - norm2(c).sqrt())
            .fold(0.5 * domain.radius, f64::min);
        // Sup over a coarse sample of the closed ball.
        let rule = sphere_rule(domain.dim);
        let mut sup = f64::NEG_INFINITY;
        for k in 1..=8 {
            let r = domain.radius * k as f64 / 8.0;
            for (u, _) in &rule {
                let z: Point = u.iter().map(|c| c * r).collect();
                sup = sup.max(weight.value(&z));
            }
        }
        if !sup.is_finite() {
            return Err(LabError::Unbounded("weight has no finite sample values".into()));
        }
        Ok(Self { weight, reference, sup, centers, rho, dim: domain.dim })
    }

    /// `log ∫` over the dyadic shell `rho 2^{-j-1} < |z - c| < rho 2^{-j}`.
    fn log_shell(&self, c: &[Complex64], j: usize, alpha: f64, rule: &[(Point, f64)]) -> f64 {
        let hi = self.rho.ln() - j as f64 * std::f64::consts::LN_2;
        let (ts, wts) = gauss_legendre_on(6, hi - std::f64::consts::LN_2, hi);
        let mut terms = Vec::with_capacity(ts.len() * rule.len());
        for (t, wt) in ts.iter().zip(&wts) {
            let r = t.exp();
            for (u, wu) in rule {
                let z: Point = c.iter().zip(u).map(|(a, b)| a + b * r).collect();
                let mut e = -alpha * (self.weight.value(&z) - self.sup);
                if let Some(rf) = &self.reference {
                    e -= rf.value(&z);
                }
                terms.push(e + 2.0 * self.dim as f64 * t + (wt * wu).ln());
            }
        }
        log_sum_exp(terms)
    }

    /// Divergence under two successive refinements of the inner cutoff.
    fn diverges(&self, alpha: f64, exec: Exec) -> bool {
        let rule = sphere_rule(self.dim);
        let shells: Vec<(usize, usize)> = (0..self.centers.len())
            .flat_map(|c| (0..SHELLS_PER_BLOCK * BLOCKS).map(move |j| (c, j)))
            .collect();
        let logs = exec.map(&shells, |&(c, j)| self.log_shell(&self.centers[c], j, alpha, &rule));
        (0..self.centers.len()).any(|c| {
            let per = &logs[c * SHELLS_PER_BLOCK * BLOCKS..(c + 1) * SHELLS_PER_BLOCK * BLOCKS];
            let blocks: Vec<f64> = per.chunks(SHELLS_PER_BLOCK).map(|b| log_sum_exp(b.iter().cloned())).collect();
            let lr = RATIO_THRESHOLD.ln();
            blocks[BLOCKS - 2] - blocks[BLOCKS - 3] > lr && blocks[BLOCKS - 1] - blocks[BLOCKS - 2] > lr
        })
    }
}

pub fn integrability_threshold(
    w: &PshWeight,
    domain: &Domain,
    reference: &ReferenceVolume,
) -> Result<ThresholdEstimate> {
    integrability_threshold_with(w, domain, reference, Exec::default())
}

/// Bisection on `alpha` of the finiteness of `∫ e^{-alpha (w - sup w)} dV`.
pub fn integrability_threshold_with(
    w: &PshWeight,
    domain: &Domain,
    reference: &ReferenceVolume,
    exec: Exec,
) -> Result<ThresholdEstimate> {
    let prob = ThresholdProblem::new(w, domain, reference)?;
    if !prob.diverges(ALPHA_MAX, exec) {
        return Ok(ThresholdEstimate {
            threshold: ALPHA_MAX,
            bracket: (ALPHA_MAX, f64::INFINITY),
            open: true,
            tolerance: BRACKET_REL_WIDTH,
        });
    }
    let (mut lo, mut hi) = (0.0, ALPHA_MAX);
    if prob.diverges(0.0, exec) {
        return Err(LabError::Invalid("reference measure is not integrable".into()));
    }
    for _ in 0..200 {
        if lo > 0.0 && hi - lo <= BRACKET_REL_WIDTH * lo {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if prob.diverges(mid, exec) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(ThresholdEstimate {
        threshold: 0.5 * (lo + hi),
        bracket: (lo, hi),
        open: false,
        tolerance: BRACKET_REL_WIDTH,
    })
}

/// Minimum threshold over a supplied family of weights.
pub fn alpha_over_family(
    weights: &[PshWeight],
    domain: &Domain,
    reference: &ReferenceVolume,
    mode: FamilyMode,
    exec: Exec,
) -> Result<FamilyThreshold> {
    if weights.is_empty() {
        return Err(LabError::Invalid("weight family is empty".into()));
    }
    let per_weight = weights
        .iter()
        .map(|w| integrability_threshold_with(w, domain, reference, exec))
        .collect::<Result<Vec<_>>>()?;
    let argmin = (0..per_weight.len())
        .min_by(|&a, &b| per_weight[a].threshold.total_cmp(&per_weight[b].threshold))
        .unwrap();
    let estimate = per_weight[argmin].clone();
    let (criterion, criterion_bound) = match mode {
        FamilyMode::Absolute => (None, None),
        FamilyMode::Relative { n } => {
            let bound = n as f64 / (n as f64 + 1.0);
            (Some(relative_criterion(&estimate, n)), Some(bound))
        }
    };
    Ok(FamilyThreshold { estimate, per_weight, argmin, criterion, criterion_bound })
}

/// `threshold > n / (n + 1)`; an open bracket satisfies it.
pub fn relative_criterion(t: &ThresholdEstimate, n: usize) -> bool {
    t.open || t.threshold > n as f64 / (n as f64 + 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    const D1: Domain = Domain { dim: 1, radius: 1.0 };
    const D2: Domain = Domain { dim: 2, radius: 1.0 };

    #[test]
    fn unit_atom() {
        let w = PshWeight::pole(&[0.0, 0.0], 1.0);
        for r in [0.5, 0.1, 1e-3] {
            assert!((mass_ratio(&w, &D1, &[0.0, 0.0], r).unwrap() - 1.0).abs() < 1e-12);
        }
        let w = PshWeight::pole(&[0.0, 0.0, 0.0, 0.0], 1.0);
        assert!((mass_ratio(&w, &D2, &[0.0; 4], 0.3).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn atom_plus_smooth() {
        let w = PshWeight::pole(&[0.0, 0.0], 1.5).sum(&PshWeight::smooth(SmoothPreset::Norm2)).unwrap();
        let m = mass_ratio(&w, &D1, &[0.0, 0.0], 0.1).unwrap();
        assert!((m - 1.51).abs() < 1e-12);
        // In C^2 the normalized mass of |z|^2 is r^2 as well.
        let w = PshWeight::smooth(SmoothPreset::Norm2);
        let m = mass_ratio(&w, &D2, &[0.0; 4], 0.2).unwrap();
        assert!((m - 0.04).abs() < 1e-10, "{m}");
    }

    #[test]
    fn off_centre_pole_is_counted_by_flux() {
        let w = PshWeight::pole(&[0.05, 0.0], 1.0);
        assert!((mass_ratio(&w, &D1, &[0.0, 0.0], 0.2).unwrap() - 1.0).abs() < 1e-10);
        assert!(mass_ratio(&w, &D1, &[0.0, 0.0], 0.02).unwrap().abs() < 1e-10);
    }

    #[test]
    fn radius_outside_domain() {
        let w = PshWeight::smooth(SmoothPreset::Norm2);
        assert!(mass_ratio(&w, &D1, &[0.5, 0.0], 0.6).is_err());
    }

    #[test]
    fn lelong_model_weights() {
        for l in [0.5, 1.0, 1.5] {
            let e = lelong_number(&PshWeight::pole(&[0.0, 0.0], l), &D1, &[0.0, 0.0]).unwrap();
            assert!((e.value - l).abs() < 1e-2 && (e.slope_value - l).abs() < 1e-2, "{e:?}");
        }
        let e = lelong_number(&PshWeight::smooth(SmoothPreset::Tilted), &D1, &[0.1, 0.0]).unwrap();
        assert!(e.value < 1e-2 && e.slope_value < 1e-2);
        let e = lelong_number(&PshWeight::pole(&[0.3, 0.0], 1.0), &D1, &[0.0, 0.0]).unwrap();
        assert!(e.value < 1e-2 && e.slope_value < 1e-2, "{e:?}");
    }

    #[test]
    fn lelong_algebraic_in_c2() {
        // log(|z1|^2 + |z2|^4): Lelong number min degree = 1.
        let w = PshWeight {
            algebraic: Some(Algebraic {
                center: vec![0.0; 4],
                exponents: vec![vec![1, 0], vec![0, 2]],
                coefficient: 1.0,
            }),
            ..PshWeight::smooth(SmoothPreset::None)
        };
        let e = lelong_number(&w, &D2, &[0.0; 4]).unwrap();
        assert!((e.value - 1.0).abs() < 2e-2, "{e:?}");
        assert!((e.slope_value - 1.0).abs() < 2e-2, "{e:?}");
    }

    #[test]
    fn algebraic_needs_isolated_zero() {
        let w = PshWeight {
            algebraic: Some(Algebraic {
                center: vec![0.0; 4],
                exponents: vec![vec![1, 1]],
                coefficient: 1.0,
            }),
            ..PshWeight::smooth(SmoothPreset::None)
        };
        assert!(matches!(lelong_number(&w, &D2, &[0.0; 4]), Err(LabError::Invalid(_))));
    }

    #[test]
    fn thresholds_of_log_poles() {
        for k in [1.0, 2.0, 3.0] {
            let t = integrability_threshold(&PshWeight::pole(&[0.0, 0.0], k), &D1, &ReferenceVolume::Lebesgue)
                .unwrap();
            assert!(!t.open);
            assert!(((t.threshold - 1.0 / k) * k).abs() < 0.02, "{t:?}");
            assert!(t.bracket.1 - t.bracket.0 <= 0.02 * t.threshold);
        }
    }

    #[test]
    fn threshold_in_c2_and_smooth() {
        // |z|^{-2 alpha} is integrable on C^2 iff alpha < 2.
        let t = integrability_threshold(&PshWeight::pole(&[0.0; 4], 1.0), &D2, &ReferenceVolume::Lebesgue)
            .unwrap();
        assert!((t.threshold - 2.0).abs() < 0.04, "{t:?}");
        let t = integrability_threshold(&PshWeight::smooth(SmoothPreset::Norm2), &D1, &ReferenceVolume::Lebesgue)
            .unwrap();
        assert!(t.open && t.bracket.1.is_infinite());
    }

    #[test]
    fn family_minimum_and_criterion() {
        let fam = [PshWeight::pole(&[0.0, 0.0], 1.0), PshWeight::pole(&[0.0, 0.0], 2.0)];
        let r = alpha_over_family(&fam, &D1, &ReferenceVolume::Lebesgue, FamilyMode::Relative { n: 2 }, Exec::default())
            .unwrap();
        assert_eq!(r.argmin, 1);
        assert!((r.estimate.threshold - 0.5).abs() < 0.01);
        assert_eq!(r.criterion, Some(false));
        let t = ThresholdEstimate { threshold: 0.75, bracket: (0.745, 0.755), open: false, tolerance: 0.01 };
        assert!(relative_criterion(&t, 1));
        assert!(alpha_over_family(&[], &D1, &ReferenceVolume::Lebesgue, FamilyMode::Absolute, Exec::default())
            .is_err());
    }
}

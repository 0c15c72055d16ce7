//! Closed-form singular model metrics.
//!
//! Matrices hold the coefficients `g_{jk}` of `√-1 Σ g_{jk} dz_j ∧ dz̄_k`,
//! with the `1/π` factors of the fibrewise models kept as stated.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::exec::Exec;

pub type CMatrix = DMatrix<Complex64>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConicalModelMetric {
    pub beta: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FibrewiseKind {
    Poincare,
    Conical,
}

/// All `z_k` are fibre coordinates and `t` is the base coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FibrewiseModelMetric {
    pub kind: FibrewiseKind,
    pub n: usize,
    /// Base value as `[re, im]`.
    pub t: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricSample {
    pub point: Vec<Complex64>,
    pub matrix: CMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FibrewiseSample {
    pub sample: MetricSample,
    /// Diagonal model part, entry `k`.
    pub diagonal: Vec<f64>,
    /// `L = log|t|^2 - Σ log|z_k|^2`.
    pub log_ratio: f64,
    /// `(1/π) L^{-2}`; the correction is this times `1/(z_j z̄_k)`.
    pub correction_scale: f64,
}

impl ConicalModelMetric {
    pub fn new(beta: f64, n: usize) -> Result<Self> {
        let m = Self { beta, n };
        m.validate()?;
        Ok(m)
    }

    fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(LabError::Invalid(format!("cone parameter must lie in (0,1), got {}", self.beta)));
        }
        if self.n == 0 {
            return Err(LabError::Invalid("dimension must be positive".into()));
        }
        Ok(())
    }
}

impl FibrewiseModelMetric {
    fn validate(&self) -> Result<Complex64> {
        if self.n == 0 {
            return Err(LabError::Invalid("dimension must be positive".into()));
        }
        let t = Complex64::new(self.t[0], self.t[1]);
        let a = t.norm();
        if !(a > 0.0 && a < 1.0) {
            return Err(LabError::Invalid(format!("base value must satisfy 0 < |t| < 1, got {a}")));
        }
        Ok(t)
    }
}

fn check_point(z: &[Complex64], n: usize) -> Result<()> {
    if z.len() != n {
        return Err(LabError::Invalid(format!("point has {} coordinates, expected {n}", z.len())));
    }
    if z.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
        return Err(LabError::Invalid("non-finite coordinate".into()));
    }
    Ok(())
}

/// `diag(|z_1|^{-2(1-β)}, 1, ..., 1)`.
pub fn eval_conical_model(m: &ConicalModelMetric, z: &[Complex64]) -> Result<MetricSample> {
    m.validate()?;
    check_point(z, m.n)?;
    let r2 = z[0].norm_sqr();
    if r2 == 0.0 {
        return Err(LabError::SingularLocus("z_1 = 0 lies on the cone divisor".into()));
    }
    let mut g = CMatrix::identity(m.n, m.n);
    g[(0, 0)] = Complex64::new(r2.powf(-(1.0 - m.beta)), 0.0);
    Ok(MetricSample { point: z.to_vec(), matrix: g })
}

pub fn eval_fibrewise_model(m: &FibrewiseModelMetric, z: &[Complex64]) -> Result<FibrewiseSample> {
    let t = m.validate()?;
    check_point(z, m.n)?;
    if z.iter().any(|c| c.norm_sqr() == 0.0) {
        return Err(LabError::ModelUndefined("some z_k vanishes".into()));
    }
    let logs: Vec<f64> = z.iter().map(|c| c.norm_sqr().ln()).collect();
    if m.kind == FibrewiseKind::Poincare && logs.iter().any(|&l| l >= 0.0) {
        return Err(LabError::ModelUndefined("Poincaré model needs 0 < |z_k| < 1".into()));
    }
    let l = t.norm_sqr().ln() - logs.iter().sum::<f64>();
    if l == 0.0 || !l.is_finite() {
        return Err(LabError::ModelUndefined("L = log|t|^2 - Σ log|z_k|^2 vanishes".into()));
    }
    let diagonal: Vec<f64> = z
        .iter()
        .zip(&logs)
        .map(|(c, lg)| match m.kind {
            FibrewiseKind::Poincare => 1.0 / (PI * c.norm_sqr() * lg * lg),
            FibrewiseKind::Conical => 1.0 / (PI * c.norm_sqr()),
        })
        .collect();
    let correction_scale = 1.0 / (PI * l * l);
    let inv: Vec<Complex64> = z.iter().map(|c| c.inv()).collect();
    let g = CMatrix::from_fn(m.n, m.n, |j, k| {
        let d = if j == k { diagonal[j] } else { 0.0 };
        Complex64::new(d, 0.0) + inv[j] * inv[k].conj() * correction_scale
    });
    Ok(FibrewiseSample {
        sample: MetricSample { point: z.to_vec(), matrix: g },
        diagonal,
        log_ratio: l,
        correction_scale,
    })
}

pub fn is_hermitian(g: &CMatrix, tol: f64) -> bool {
    let scale = g.iter().map(|c| c.norm()).fold(0.0, f64::max).max(1.0);
    g.is_square() && (g - g.adjoint()).iter().all(|c| c.norm() <= tol * scale)
}

/// Positive definiteness through leading principal minors.
pub fn is_positive_definite(g: &CMatrix) -> bool {
    (1..=g.nrows()).all(|k| {
        let d = g.view((0, 0), (k, k)).into_owned().determinant();
        d.re > 0.0 && d.re.is_finite()
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "model")]
pub enum ModelMetric {
    Conical(ConicalModelMetric),
    Fibrewise(FibrewiseModelMetric),
}

impl ModelMetric {
    pub fn dim(&self) -> usize {
        match self {
            ModelMetric::Conical(m) => m.n,
            ModelMetric::Fibrewise(m) => m.n,
        }
    }

    pub fn eval(&self, z: &[Complex64]) -> Result<CMatrix> {
        match self {
            ModelMetric::Conical(m) => Ok(eval_conical_model(m, z)?.matrix),
            ModelMetric::Fibrewise(m) => Ok(eval_fibrewise_model(m, z)?.sample.matrix),
        }
    }
}

/// Sample region: every coordinate modulus ranges log-uniformly over
/// `[r_min, r_max]`, with `angles` equispaced arguments per coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub r_min: f64,
    pub r_max: f64,
    #[serde(default = "default_angles")]
    pub angles: usize,
}

fn default_angles() -> usize {
    4
}

impl Region {
    fn validate(&self) -> Result<()> {
        if !(self.r_min > 0.0 && self.r_max > self.r_min && self.r_max.is_finite()) {
            return Err(LabError::Invalid("region needs 0 < r_min < r_max".into()));
        }
        if self.angles == 0 {
            return Err(LabError::Invalid("region needs at least one angle".into()));
        }
        Ok(())
    }

    /// Tensor grid with `levels` moduli per coordinate.
    pub fn grid(&self, n: usize, levels: usize) -> Vec<Vec<Complex64>> {
        let (a, b) = (self.r_min.ln(), self.r_max.ln());
        let mut one = Vec::with_capacity(levels * self.angles);
        for i in 0..levels {
            let r = if levels == 1 { a.exp() } else { (a + (b - a) * i as f64 / (levels - 1) as f64).exp() };
            for k in 0..self.angles {
                one.push(Complex64::from_polar(r, 2.0 * PI * (k as f64 + 0.5) / self.angles as f64));
            }
        }
        let mut pts: Vec<Vec<Complex64>> = vec![vec![]];
        for _ in 0..n {
            pts = pts
                .into_iter()
                .flat_map(|p| {
                    one.iter().map(move |c| {
                        let mut q = p.clone();
                        q.push(*c);
                        q
                    })
                })
                .collect();
        }
        pts
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuasiIsometry {
    pub c_low: f64,
    pub c_high: f64,
    pub levels: usize,
    pub samples: usize,
    pub converged: bool,
}

/// Extremal generalized eigenvalues of `candidate` against `model` at `z`.
fn generalized_extremes(model: &CMatrix, cand: &CMatrix) -> Result<(f64, f64)> {
    let chol = model
        .clone()
        .cholesky()
        .ok_or_else(|| LabError::Internal("model metric not positive definite".into()))?;
    let l = chol.l();
    let linv = l
        .try_inverse()
        .ok_or_else(|| LabError::Internal("singular Cholesky factor".into()))?;
    let a = &linv * cand * linv.adjoint();
    let a = (&a + a.adjoint()) * Complex64::new(0.5, 0.0);
    let ev = a.symmetric_eigenvalues();
    let lo = ev.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = ev.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok((lo, hi))
}

pub type Sampler<'a> = dyn Fn(&[Complex64]) -> Result<CMatrix> + Sync + 'a;

/// Empirical quasi-isometry constants `c g_model <= g <= C g_model` over the
/// region; the grid doubles until both constants move by less than 1%.
pub fn quasi_isometry_constants(
    model: &ModelMetric,
    candidate: &Sampler<'_>,
    region: &Region,
    exec: Exec,
) -> Result<QuasiIsometry> {
    region.validate()?;
    let n = model.dim();
    let eval = |levels: usize| -> Result<(f64, f64, usize)> {
        let pts = region.grid(n, levels);
        let res = exec.map(&pts, |z| -> Result<(f64, f64)> {
            let m = model.eval(z)?;
            let c = candidate(z)?;
            if c.nrows() != n || c.ncols() != n {
                return Err(LabError::Invalid("candidate matrix has wrong size".into()));
            }
            if !is_hermitian(&c, 1e-10) || !is_positive_definite(&c) {
                return Err(LabError::NotPositive(format!("candidate fails at {z:?}")));
            }
            generalized_extremes(&m, &c)
        });
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for r in res {
            let (a, b) = r?;
            lo = lo.min(a);
            hi = hi.max(b);
        }
        Ok((lo, hi, pts.len()))
    };
    let max_levels = if n == 1 { 256 } else { 32 };
    let mut levels = 8;
    let (mut lo, mut hi, mut samples) = eval(levels)?;
    let mut converged = false;
    while levels < max_levels {
        let (l2, h2, s2) = eval(2 * levels)?;
        let moved = ((l2 - lo) / lo).abs().max(((h2 - hi) / hi).abs());
        levels *= 2;
        (lo, hi, samples) = (l2, h2, s2);
        if moved < 0.01 {
            converged = true;
            break;
        }
    }
    Ok(QuasiIsometry { c_low: lo, c_high: hi, levels, samples, converged })
}

/// Constant-curvature football `2β²|z|^{2β-2} / (1 + |z|^{2β})^2`, the
/// curvature-1 metric on the sphere with two cone points of angle `2πβ`.
pub fn football_metric(beta: f64, z: Complex64) -> f64 {
    let r2 = z.norm_sqr();
    let p = r2.powf(beta);
    2.0 * beta * beta * r2.powf(beta - 1.0) / ((1.0 + p) * (1.0 + p))
}

/// CSV header for samples of an `n`-dimensional metric.
pub fn csv_header(n: usize) -> String {
    let mut cols: Vec<String> = (1..=n).flat_map(|k| [format!("x{k}"), format!("y{k}")]).collect();
    for j in 1..=n {
        for k in 1..=n {
            cols.push(format!("g{j}{k}_re"));
            cols.push(format!("g{j}{k}_im"));
        }
    }
    cols.join(",")
}

impl MetricSample {
    /// Point coordinates then matrix entries, row-major.
    pub fn csv_row(&self) -> String {
        let mut v: Vec<String> = self.point.iter().flat_map(|c| [fmt(c.re), fmt(c.im)]).collect();
        for j in 0..self.matrix.nrows() {
            for k in 0..self.matrix.ncols() {
                let c = self.matrix[(j, k)];
                v.push(fmt(c.re));
                v.push(fmt(c.im));
            }
        }
        v.join(",")
    }
}

fn fmt(x: f64) -> String {
    format!("{x:e}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn conical_examples() {
        let m = ConicalModelMetric::new(0.5, 2).unwrap();
        let s = eval_conical_model(&m, &[Complex64::from_polar(1.0, 0.7), c(0.3, 0.0)]).unwrap();
        assert!((s.matrix[(0, 0)].re - 1.0).abs() < 1e-15);
        let s = eval_conical_model(&m, &[c(0.0, 0.25), c(0.0, 0.0)]).unwrap();
        assert!((s.matrix[(0, 0)].re - 4.0).abs() < 1e-12);
        let m = ConicalModelMetric::new(1.0 - 1e-12, 2).unwrap();
        let s = eval_conical_model(&m, &[c(0.1, 0.2), c(0.0, 0.0)]).unwrap();
        assert!((s.matrix.clone() - CMatrix::identity(2, 2)).iter().all(|x| x.norm() < 1e-10));
        assert!(matches!(eval_conical_model(&m, &[c(0.0, 0.0), c(1.0, 0.0)]), Err(LabError::SingularLocus(_))));
        assert!(ConicalModelMetric::new(1.0, 1).is_err());
    }

    #[test]
    fn fibrewise_examples() {
        let m = FibrewiseModelMetric { kind: FibrewiseKind::Poincare, n: 1, t: [(-10f64).exp(), 0.0] };
        let s = eval_fibrewise_model(&m, &[c((-1f64).exp(), 0.0)]).unwrap();
        assert!((s.diagonal[0] - E * E / (4.0 * PI)).abs() < 1e-12);
        assert!((s.log_ratio + 18.0).abs() < 1e-12);
        let corr = s.sample.matrix[(0, 0)].re - s.diagonal[0];
        assert!((corr - E * E / (324.0 * PI)).abs() < 1e-12);

        let m = FibrewiseModelMetric { kind: FibrewiseKind::Conical, n: 1, t: [0.0, (-10f64).exp()] };
        let s = eval_fibrewise_model(&m, &[Complex64::from_polar(1.0, 2.0)]).unwrap();
        assert!((s.diagonal[0] - 1.0 / PI).abs() < 1e-14);
        assert!((s.correction_scale - 1.0 / (400.0 * PI)).abs() < 1e-15);
    }

    #[test]
    fn fibrewise_errors() {
        let m = FibrewiseModelMetric { kind: FibrewiseKind::Conical, n: 1, t: [0.5, 0.0] };
        assert!(matches!(eval_fibrewise_model(&m, &[c(0.5, 0.0)]), Err(LabError::ModelUndefined(_))));
        assert!(matches!(eval_fibrewise_model(&m, &[c(0.0, 0.0)]), Err(LabError::ModelUndefined(_))));
        let p = FibrewiseModelMetric { kind: FibrewiseKind::Poincare, n: 1, t: [0.5, 0.0] };
        assert!(matches!(eval_fibrewise_model(&p, &[c(1.5, 0.0)]), Err(LabError::ModelUndefined(_))));
    }

    #[test]
    fn rank_one_correction_is_hermitian_psd() {
        let m = FibrewiseModelMetric { kind: FibrewiseKind::Poincare, n: 2, t: [0.01, 0.0] };
        let s = eval_fibrewise_model(&m, &[c(0.3, 0.1), c(-0.2, 0.4)]).unwrap();
        assert!(is_hermitian(&s.sample.matrix, 1e-14));
        assert!(is_positive_definite(&s.sample.matrix));
    }

    #[test]
    fn quasi_isometry_trivial() {
        let model = ModelMetric::Conical(ConicalModelMetric::new(0.5, 1).unwrap());
        let region = Region { r_min: 1e-3, r_max: 0.5, angles: 4 };
        let same = |z: &[Complex64]| model.eval(z);
        let q = quasi_isometry_constants(&model, &same, &region, Exec::default()).unwrap();
        assert!((q.c_low - 1.0).abs() < 1e-12 && (q.c_high - 1.0).abs() < 1e-12);
        let double = |z: &[Complex64]| Ok(model.eval(z)? * Complex64::new(2.0, 0.0));
        let q = quasi_isometry_constants(&model, &double, &region, Exec::default()).unwrap();
        assert!((q.c_low - 2.0).abs() < 1e-12 && (q.c_high - 2.0).abs() < 1e-12);
    }

    #[test]
    fn football_near_cone_point() {
        let beta = 0.5;
        let model = ModelMetric::Conical(ConicalModelMetric::new(beta, 1).unwrap());
        let region = Region { r_min: 1e-6, r_max: 0.5, angles: 2 };
        let foot = |z: &[Complex64]| Ok(CMatrix::from_element(1, 1, Complex64::new(football_metric(beta, z[0]), 0.0)));
        let q = quasi_isometry_constants(&model, &foot, &region, Exec::default()).unwrap();
        assert!(q.c_low > 0.0 && q.c_high.is_finite());
        assert!((q.c_high - 2.0 * beta * beta).abs() < 1e-3);
        let bad = |_: &[Complex64]| Ok(CMatrix::from_element(1, 1, Complex64::new(-1.0, 0.0)));
        assert!(matches!(
            quasi_isometry_constants(&model, &bad, &region, Exec::default()),
            Err(LabError::NotPositive(_))
        ));
    }
}

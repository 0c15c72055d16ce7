//! Donaldson–Futaki invariants of toric test configurations and CM numerics.

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::exec::Exec;
use crate::poly;
use crate::polytope::{LatticePolytope, PolytopeSpec};
use crate::rational::{self, int, Rational};

/// One affine functional `x -> <gradient, x> + offset`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AffinePiece {
    #[serde(with = "crate::rational::serde_vec")]
    pub gradient: Vec<Rational>,
    #[serde(with = "crate::rational::serde_str")]
    pub offset: Rational,
}

impl AffinePiece {
    pub fn new(gradient: Vec<Rational>, offset: Rational) -> Self {
        Self { gradient, offset }
    }

    pub fn linear(gradient: &[i64]) -> Self {
        Self::new(gradient.iter().map(|&g| int(g)).collect(), Rational::zero())
    }

    pub fn constant(dim: usize, c: Rational) -> Self {
        Self::new(vec![Rational::zero(); dim], c)
    }

    /// Value of the homogenized functional `k * f(x / k)` at an integer point.
    fn homogeneous(&self, x: &[i64], k: i64) -> Rational {
        let mut v = &self.offset * int(k);
        for (g, &xi) in self.gradient.iter().zip(x) {
            v += g * int(xi);
        }
        v
    }

    pub fn eval(&self, x: &[Rational]) -> Rational {
        self.gradient
            .iter()
            .zip(x)
            .fold(self.offset.clone(), |acc, (g, xi)| acc + g * xi)
    }
}

/// Concave piecewise-linear weight `min_i (affine piece i)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Weight {
    pub affine_pieces: Vec<AffinePiece>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TestConfigurationSpec {
    pub polytope: PolytopeSpec,
    pub weight: Weight,
}

#[derive(Debug, Clone)]
pub struct ToricTestConfiguration {
    polytope: LatticePolytope,
    weight: Weight,
}

impl ToricTestConfiguration {
    pub fn new(polytope: LatticePolytope, weight: Weight) -> Result<Self> {
        if weight.affine_pieces.is_empty() {
            return Err(LabError::Unbounded(
                "weight has no affine pieces; min over an empty family is +inf".into(),
            ));
        }
        if let Some(p) = weight
            .affine_pieces
            .iter()
            .find(|p| p.gradient.len() != polytope.dim())
        {
            return Err(LabError::Invalid(format!(
                "affine piece has {} gradient entries, polytope dimension is {}",
                p.gradient.len(),
                polytope.dim()
            )));
        }
        Ok(Self { polytope, weight })
    }

    pub fn from_spec(spec: &TestConfigurationSpec) -> Result<Self> {
        Self::new(LatticePolytope::from_spec(&spec.polytope)?, spec.weight.clone())
    }

    /// A product configuration generated by a single linear functional.
    pub fn linear(polytope: LatticePolytope, gradient: &[i64]) -> Result<Self> {
        Self::new(polytope, Weight { affine_pieces: vec![AffinePiece::linear(gradient)] })
    }

    pub fn polytope(&self) -> &LatticePolytope {
        &self.polytope
    }

    pub fn weight(&self) -> &Weight {
        &self.weight
    }

    pub fn is_affine(&self) -> bool {
        self.weight.affine_pieces.len() == 1
    }

    fn homogeneous(&self, x: &[i64], k: i64) -> Rational {
        self.weight
            .affine_pieces
            .iter()
            .map(|p| p.homogeneous(x, k))
            .min()
            .expect("nonempty")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HilbertCoefficients {
    #[serde(with = "crate::rational::serde_str")]
    pub a0: Rational,
    #[serde(with = "crate::rational::serde_str")]
    pub a1: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeightCoefficients {
    #[serde(with = "crate::rational::serde_str")]
    pub b0: Rational,
    #[serde(with = "crate::rational::serde_str")]
    pub b1: Rational,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    StableDirection,
    UnstableDirection,
    Zero,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DFReport {
    #[serde(with = "crate::rational::serde_str")]
    pub futaki: Rational,
    pub verdict: Verdict,
    pub hilbert: HilbertCoefficients,
    pub weight: WeightCoefficients,
}

/// `a0, a1` from the exact Ehrhart polynomial.
pub fn hilbert_coefficients(p: &LatticePolytope) -> Result<HilbertCoefficients> {
    let e = p.ehrhart()?;
    Ok(HilbertCoefficients { a0: e.leading().clone(), a1: e.subleading().clone() })
}

/// `Tr(A_k) = sum over kP ∩ Z^n of k f(x/k)`.
pub fn weight_trace(tc: &ToricTestConfiguration, k: i64) -> Result<Rational> {
    weight_trace_with(tc, k, Exec::default())
}

pub fn weight_trace_with(tc: &ToricTestConfiguration, k: i64, exec: Exec) -> Result<Rational> {
    let pts = tc.polytope.lattice_points(k, exec)?;
    let values = exec.map(&pts, |x| tc.homogeneous(x, k));
    Ok(values.into_iter().fold(Rational::zero(), |a, b| a + b))
}

/// Degree `n + 1` fit of the trace over `k = 1..=n+2`, checked at `k = n + 3`.
pub fn weight_coefficients(tc: &ToricTestConfiguration) -> Result<WeightCoefficients> {
    weight_coefficients_with(tc, Exec::default())
}

pub fn weight_coefficients_with(tc: &ToricTestConfiguration, exec: Exec) -> Result<WeightCoefficients> {
    let n = tc.polytope.dim();
    let ks: Vec<i64> = (1..=n as i64 + 3).collect();
    let traces = exec.map(&ks, |&k| weight_trace_with(tc, k, Exec::Sequential));
    let samples = ks
        .iter()
        .zip(traces)
        .map(|(&k, t)| t.map(|t| (k, t)))
        .collect::<Result<Vec<_>>>()?;
    let c = poly::fit_exact(&samples, n + 1).map_err(|e| match e {
        LabError::FitInconsistent(msg) => LabError::FitInconsistent(format!(
            "weight trace is not polynomial of degree {} ({msg}); piecewise weights with \
             non-integral breaks give quasi-polynomial traces",
            n + 1
        )),
        other => other,
    })?;
    Ok(WeightCoefficients { b0: c[n + 1].clone(), b1: c[n].clone() })
}

pub fn futaki_from(h: &HilbertCoefficients, w: &WeightCoefficients) -> Result<Rational> {
    if !h.a0.is_positive() {
        return Err(LabError::Internal("leading Hilbert coefficient must be positive".into()));
    }
    Ok(int(2) * (&h.a1 * &w.b0 - &h.a0 * &w.b1) / &h.a0)
}

fn verdict(f: &Rational) -> Verdict {
    match rational::sign(f) {
        0 => Verdict::Zero,
        s if s > 0 => Verdict::StableDirection,
        _ => Verdict::UnstableDirection,
    }
}

/// `Fut = 2 (a1 b0 - a0 b1) / a0`.
pub fn donaldson_futaki(tc: &ToricTestConfiguration) -> Result<DFReport> {
    donaldson_futaki_with(tc, Exec::default())
}

pub fn donaldson_futaki_with(tc: &ToricTestConfiguration, exec: Exec) -> Result<DFReport> {
    let hilbert = hilbert_coefficients(&tc.polytope)?;
    let weight = weight_coefficients_with(tc, exec)?;
    let futaki = futaki_from(&hilbert, &weight)?;
    Ok(DFReport { verdict: verdict(&futaki), futaki, hilbert, weight })
}

/// `eta = n (-K).L^{n-1} / L^n`.
pub fn eta_constant(p: &LatticePolytope) -> Result<Rational> {
    let d = p.toric_degrees();
    if d.l_degree.is_zero() {
        return Err(LabError::Degenerate("L-degree vanishes".into()));
    }
    Ok(int(p.dim() as i64) * d.anticanonical_degree / d.l_degree)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PushforwardData {
    #[serde(with = "crate::rational::serde_str")]
    pub relcanonical_term: Rational,
    #[serde(with = "crate::rational::serde_str")]
    pub polarization_term: Rational,
    pub n: u32,
    #[serde(with = "crate::rational::serde_str")]
    pub eta: Rational,
}

/// `2^{n+1} ((n+1) rel + eta pol)`.
pub fn cm_degree(d: &PushforwardData) -> Rational {
    rational::pow2(d.n + 1) * (int(d.n as i64 + 1) * &d.relcanonical_term + &d.eta * &d.polarization_term)
}

/// Pushforward data of the trivial `P^1`-family over `P^1` polarized by the
/// fibre class, from toric intersections on `P^1 x P^1`.
pub fn p1xp1_trivial_family() -> PushforwardData {
    use crate::polytope::mixed_area;
    // H1: pullback of a point of the fibre factor; its polytope is a
    // horizontal unit segment. K_{X/B} = -2 H1, L = H1.
    let h1 = [[0, 0], [1, 0]];
    let h1h1 = mixed_area(&h1, &h1);
    PushforwardData {
        relcanonical_term: int(-2) * &h1h1,
        polarization_term: h1h1,
        n: 1,
        eta: int(2),
    }
}

/// The same configuration with weight `f + c`.
pub fn shifted(tc: &ToricTestConfiguration, c: &Rational) -> ToricTestConfiguration {
    let mut w = tc.weight.clone();
    for p in &mut w.affine_pieces {
        p.offset += c;
    }
    ToricTestConfiguration { polytope: tc.polytope.clone(), weight: w }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polytope::stock::*;
    use crate::rational::frac;

    #[test]
    fn hilbert_examples() {
        let h = hilbert_coefficients(&standard_simplex_2()).unwrap();
        assert_eq!((h.a0, h.a1), (frac(1, 2), frac(3, 2)));
        // (k + 1)^2 = k^2 + 2k + 1.
        let h = hilbert_coefficients(&unit_square()).unwrap();
        assert_eq!((h.a0, h.a1), (int(1), int(2)));
        let h = hilbert_coefficients(&segment(2)).unwrap();
        assert_eq!((h.a0, h.a1), (int(2), int(1)));
    }

    #[test]
    fn trace_examples() {
        let tc = ToricTestConfiguration::linear(standard_simplex_2(), &[1, 0]).unwrap();
        assert_eq!(weight_trace(&tc, 3).unwrap(), int(10));
        let zero = ToricTestConfiguration::linear(blowup_p2(), &[0, 0]).unwrap();
        assert_eq!(weight_trace(&zero, 4).unwrap(), int(0));
        let one = ToricTestConfiguration::new(
            unit_square(),
            Weight { affine_pieces: vec![AffinePiece::constant(2, int(1))] },
        )
        .unwrap();
        assert_eq!(weight_trace(&one, 3).unwrap(), int(3 * 16));
    }

    #[test]
    fn weight_coefficient_examples() {
        let tc = ToricTestConfiguration::linear(standard_simplex_2(), &[1, 0]).unwrap();
        let w = weight_coefficients(&tc).unwrap();
        assert_eq!((w.b0, w.b1), (frac(1, 6), frac(1, 2)));
        let tc = ToricTestConfiguration::linear(standard_simplex_2(), &[1, 1]).unwrap();
        let w = weight_coefficients(&tc).unwrap();
        assert_eq!((w.b0, w.b1), (frac(1, 3), int(1)));
    }

    #[test]
    fn futaki_examples() {
        let tc = ToricTestConfiguration::linear(p2_anticanonical(), &[1, 0]).unwrap();
        let r = donaldson_futaki(&tc).unwrap();
        assert_eq!(r.futaki, int(0));
        assert_eq!(r.verdict, Verdict::Zero);
        let tc = ToricTestConfiguration::linear(blowup_p2(), &[3, 7]).unwrap();
        assert!(!donaldson_futaki(&tc).unwrap().futaki.is_zero());
    }

    #[test]
    fn concave_piecewise_weight() {
        // min(x1, x2) on the unit square has integral breaks.
        let tc = ToricTestConfiguration::new(
            unit_square(),
            Weight { affine_pieces: vec![AffinePiece::linear(&[1, 0]), AffinePiece::linear(&[0, 1])] },
        )
        .unwrap();
        let w = weight_coefficients(&tc).unwrap();
        // integral of min(x, y) over [0,1]^2 is 1/3.
        assert_eq!(w.b0, frac(1, 3));
    }

    #[test]
    fn eta_examples() {
        assert_eq!(eta_constant(&segment(1)).unwrap(), int(2));
        assert_eq!(eta_constant(&standard_simplex_2()).unwrap(), int(6));
        let p = standard_simplex_2();
        assert_eq!(eta_constant(&p.dilate(2).unwrap()).unwrap(), int(3));
    }

    #[test]
    fn cm_examples() {
        let zero = PushforwardData {
            relcanonical_term: int(0),
            polarization_term: int(0),
            n: 1,
            eta: int(2),
        };
        assert_eq!(cm_degree(&zero), int(0));
        let d = PushforwardData { relcanonical_term: int(1), ..zero };
        assert_eq!(cm_degree(&d), int(8));
        assert_eq!(cm_degree(&p1xp1_trivial_family()), int(0));
    }

    #[test]
    fn empty_weight_is_unbounded() {
        let e = ToricTestConfiguration::new(unit_square(), Weight { affine_pieces: vec![] });
        assert!(matches!(e, Err(LabError::Unbounded(_))));
    }
}

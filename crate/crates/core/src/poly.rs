//! Exact polynomial interpolation over the rationals.

use num_traits::Zero;

use crate::error::{LabError, Result};
use crate::rational::{int, Rational};

/// Evaluate `coeffs[0] + coeffs[1] k + ...` at `k`.
pub fn eval(coeffs: &[Rational], k: &Rational) -> Rational {
    coeffs
        .iter()
        .rev()
        .fold(Rational::zero(), |acc, c| acc * k + c)
}

/// Fit a degree-`degree` polynomial through the first `degree + 1` samples and
/// check that it reproduces every remaining sample exactly.
///
/// Returns ascending coefficients.
pub fn fit_exact(samples: &[(i64, Rational)], degree: usize) -> Result<Vec<Rational>> {
    if samples.len() < degree + 1 {
        return Err(LabError::FitInconsistent(format!(
            "need {} samples for degree {degree}, got {}",
            degree + 1,
            samples.len()
        )));
    }
    let mut xs: Vec<i64> = samples.iter().map(|s| s.0).collect();
    xs.sort_unstable();
    xs.dedup();
    if xs.len() != samples.len() {
        return Err(LabError::FitInconsistent("repeated sample abscissae".into()));
    }
    let (base, rest) = samples.split_at(degree + 1);

    // Newton divided differences, then expand to monomial form.
    let x: Vec<Rational> = base.iter().map(|s| int(s.0)).collect();
    let mut dd: Vec<Rational> = base.iter().map(|s| s.1.clone()).collect();
    for level in 1..=degree {
        for i in (level..=degree).rev() {
            dd[i] = (&dd[i] - &dd[i - 1]) / (&x[i] - &x[i - level]);
        }
    }
    let mut coeffs = vec![Rational::zero(); degree + 1];
    coeffs[0] = dd[degree].clone();
    let mut len = 1;
    for i in (0..degree).rev() {
        // coeffs <- coeffs * (k - x_i) + dd_i
        let mut next = vec![Rational::zero(); degree + 1];
        for j in 0..len {
            next[j + 1] += &coeffs[j];
            next[j] -= &coeffs[j] * &x[i];
        }
        next[0] += &dd[i];
        coeffs = next;
        len += 1;
    }

    for (k, y) in base.iter().chain(rest) {
        let got = eval(&coeffs, &int(*k));
        if &got != y {
            return Err(LabError::FitInconsistent(format!(
                "degree-{degree} fit gives {got} at k = {k}, sample is {y}"
            )));
        }
    }
    Ok(coeffs)
}

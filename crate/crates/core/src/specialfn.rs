//! Special functions and a small univariate root finder.
//!
//! Everything here is a pure function of its arguments.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

const BETA_MAX_ITER: usize = 500;
const BETA_EPS: f64 = 1e-15;
const LENTZ_TINY: f64 = 1e-300;

/// Arguments of the regularized incomplete beta function `I_y(a, b)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaArgs {
    pub y: f64,
    pub a: f64,
    pub b: f64,
}

impl BetaArgs {
    pub fn new(y: f64, a: f64, b: f64) -> Result<Self> {
        let args = BetaArgs { y, a, b };
        args.check()?;
        Ok(args)
    }

    fn check(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.y) {
            return Err(Error::Domain(format!("incomplete beta: y = {} not in [0, 1]", self.y)));
        }
        if !(self.a > 0.0) || !(self.b > 0.0) || !self.a.is_finite() || !self.b.is_finite() {
            return Err(Error::Domain(format!(
                "incomplete beta: shape parameters must be positive, got a = {}, b = {}",
                self.a, self.b
            )));
        }
        Ok(())
    }
}

/// `I_y(a, b) = B_y(a, b) / B_1(a, b)`.
///
/// Evaluated with the classical continued fraction (modified Lentz), switching to
/// `1 - I_{1-y}(b, a)` past the mean so the fraction converges quickly.
pub fn regularized_incomplete_beta(args: BetaArgs) -> Result<f64> {
    args.check()?;
    let BetaArgs { y, a, b } = args;
    if y == 0.0 {
        return Ok(0.0);
    }
    if y == 1.0 {
        return Ok(1.0);
    }
    let value = if y < (a + 1.0) / (a + b + 2.0) {
        beta_front(a, b, y)? * beta_cf(a, b, y)? / a
    } else {
        1.0 - beta_front(b, a, 1.0 - y)? * beta_cf(b, a, 1.0 - y)? / b
    };
    Ok(value.clamp(0.0, 1.0))
}

/// `y^a (1-y)^b / B(a, b)`, computed in log space.
fn beta_front(a: f64, b: f64, y: f64) -> Result<f64> {
    let ln_beta = ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b);
    Ok((a * y.ln() + b * (1.0 - y).ln() - ln_beta).exp())
}

fn beta_cf(a: f64, b: f64, y: f64) -> Result<f64> {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let guard = |v: f64| if v.abs() < LENTZ_TINY { LENTZ_TINY } else { v };

    let mut c = 1.0;
    let mut d = 1.0 / guard(1.0 - qab * y / qap);
    let mut h = d;
    for m in 1..=BETA_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;

        let even = m * (b - m) * y / ((qam + m2) * (a + m2));
        d = 1.0 / guard(1.0 + even * d);
        c = guard(1.0 + even / c);
        h *= d * c;

        let odd = -(a + m) * (qab + m) * y / ((a + m2) * (qap + m2));
        d = 1.0 / guard(1.0 + odd * d);
        c = guard(1.0 + odd / c);
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < BETA_EPS {
            return Ok(h);
        }
    }
    Err(Error::Domain(format!(
        "incomplete beta continued fraction did not converge for a = {a}, b = {b}, y = {y}"
    )))
}

/// Lebesgue volume of the Euclidean `k`-ball of radius `x`.
pub fn ball_volume(k: usize, x: f64) -> Result<f64> {
    if k < 1 {
        return Err(Error::Domain("ball volume needs dimension k >= 1".into()));
    }
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("ball volume needs radius > 0, got {x}")));
    }
    // V_k = 2π/k · V_{k-2}, seeded with V_0 = 1 and V_1 = 2.
    let mut unit = if k % 2 == 0 { 1.0 } else { 2.0 };
    let mut j = if k % 2 == 0 { 2 } else { 3 };
    while j <= k {
        unit *= 2.0 * std::f64::consts::PI / j as f64;
        j += 2;
    }
    Ok(unit * x.powi(k as i32))
}

/// Dense univariate polynomial over ℂ, lowest degree first.
///
/// Trailing (highest degree) zero coefficients are dropped on construction, so
/// the leading coefficient is nonzero unless the polynomial is identically zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexPolynomial {
    coefficients: Vec<Complex64>,
}

impl ComplexPolynomial {
    pub fn new(mut coefficients: Vec<Complex64>) -> Self {
        while coefficients.last().is_some_and(|c| *c == Complex64::new(0.0, 0.0)) {
            coefficients.pop();
        }
        ComplexPolynomial { coefficients }
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }

    pub fn is_zero(&self) -> bool {
        self.coefficients.is_empty()
    }

    /// Degree; the zero polynomial reports 0.
    pub fn degree(&self) -> usize {
        self.coefficients.len().saturating_sub(1)
    }

    pub fn eval(&self, t: Complex64) -> Complex64 {
        self.coefficients
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, c| acc * t + c)
    }

    fn eval_with_derivative(coeffs: &[Complex64], t: Complex64) -> (Complex64, Complex64) {
        let zero = Complex64::new(0.0, 0.0);
        let mut p = zero;
        let mut dp = zero;
        for c in coeffs.iter().rev() {
            dp = dp * t + p;
            p = p * t + c;
        }
        (p, dp)
    }

    pub fn max_coefficient_modulus(&self) -> f64 {
        self.coefficients.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }
}

/// A root together with how many times it occurs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RootWithMultiplicity {
    pub root: Complex64,
    pub multiplicity: usize,
}

/// Roots closer than this are reported as one root with multiplicity.
pub const ROOT_MERGE_TOLERANCE: f64 = 1e-6;
/// Accepted residual `|p(r)|` relative to the largest coefficient modulus.
pub const ROOT_RESIDUAL_TOLERANCE: f64 = 1e-8;

const ABERTH_MAX_ITER: usize = 1000;

/// All complex roots of `poly`, with multiplicities summing to its degree.
///
/// Exact zero roots are split off first; the remaining factor is solved with
/// Aberth–Ehrlich simultaneous iteration followed by a Newton polish.
pub fn complex_roots(poly: &ComplexPolynomial) -> Result<Vec<RootWithMultiplicity>> {
    if poly.is_zero() {
        return Err(Error::ZeroPolynomial);
    }
    if poly.degree() == 0 {
        return Err(Error::Domain("complex_roots needs degree >= 1".into()));
    }
    let coeffs = poly.coefficients();
    let zero = Complex64::new(0.0, 0.0);
    let zero_roots = coeffs.iter().take_while(|c| **c == zero).count();
    let reduced = &coeffs[zero_roots..];

    let mut raw: Vec<Complex64> = vec![zero; zero_roots];
    let (mut rest, iterations) = aberth(reduced);
    for r in rest.iter_mut() {
        polish_newton(coeffs, r);
    }
    raw.extend(rest);

    let scale = poly.max_coefficient_modulus();
    let residual_ok = raw
        .iter()
        .all(|r| poly.eval(*r).norm() <= ROOT_RESIDUAL_TOLERANCE * scale);
    let merged = merge_roots(&raw);
    if !residual_ok {
        return Err(Error::NonConvergence {
            iterations,
            partial: merged,
        });
    }
    Ok(merged)
}

/// Number of pairwise distinct roots after merging.
pub fn distinct_root_count(poly: &ComplexPolynomial) -> Result<usize> {
    Ok(complex_roots(poly)?.len())
}

fn aberth(coeffs: &[Complex64]) -> (Vec<Complex64>, usize) {
    let n = coeffs.len() - 1;
    if n == 0 {
        return (Vec::new(), 0);
    }
    let lead = coeffs[n];
    if n == 1 {
        return (vec![-coeffs[0] / lead], 0);
    }
    // Fujiwara-style radius; every root lies inside 2·max |c_k / c_n|^(1/(n-k)).
    let radius = (0..n)
        .map(|k| (coeffs[k] / lead).norm().powf(1.0 / (n - k) as f64))
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let mut z: Vec<Complex64> = (0..n)
        .map(|k| {
            let angle = 2.0 * std::f64::consts::PI * k as f64 / n as f64 + 0.4;
            Complex64::from_polar(radius, angle)
        })
        .collect();

    for iter in 1..=ABERTH_MAX_ITER {
        let mut max_step: f64 = 0.0;
        for k in 0..n {
            let (p, dp) = ComplexPolynomial::eval_with_derivative(coeffs, z[k]);
            if p.norm() == 0.0 {
                continue;
            }
            let mut repulsion = Complex64::new(0.0, 0.0);
            for j in 0..n {
                if j != k {
                    let diff = z[k] - z[j];
                    if diff.norm() > 0.0 {
                        repulsion += diff.inv();
                    }
                }
            }
            let denom = dp - p * repulsion;
            let step = if denom.norm() > 0.0 {
                p / denom
            } else {
                Complex64::new(radius * 1e-3, radius * 1e-3)
            };
            z[k] -= step;
            max_step = max_step.max(step.norm() / (1.0 + z[k].norm()));
        }
        if max_step < 1e-15 {
            return (z, iter);
        }
    }
    (z, ABERTH_MAX_ITER)
}

fn polish_newton(coeffs: &[Complex64], r: &mut Complex64) {
    for _ in 0..3 {
        let (p, dp) = ComplexPolynomial::eval_with_derivative(coeffs, *r);
        if dp.norm() == 0.0 {
            return;
        }
        let next = *r - p / dp;
        let (p_next, _) = ComplexPolynomial::eval_with_derivative(coeffs, next);
        if p_next.norm() < p.norm() {
            *r = next;
        } else {
            return;
        }
    }
}

/// Single-linkage merge of roots at [`ROOT_MERGE_TOLERANCE`].
fn merge_roots(raw: &[Complex64]) -> Vec<RootWithMultiplicity> {
    let n = raw.len();
    let mut label: Vec<usize> = (0..n).collect();
    for i in 0..n {
        for j in (i + 1)..n {
            if (raw[i] - raw[j]).norm() < ROOT_MERGE_TOLERANCE {
                let (li, lj) = (label[i], label[j]);
                if li != lj {
                    for l in label.iter_mut() {
                        if *l == lj {
                            *l = li;
                        }
                    }
                }
            }
        }
    }
    let mut out: Vec<(usize, Complex64, usize)> = Vec::new();
    for (i, r) in raw.iter().enumerate() {
        match out.iter_mut().find(|(l, _, _)| *l == label[i]) {
            Some(entry) => {
                entry.1 += r;
                entry.2 += 1;
            }
            None => out.push((label[i], *r, 1)),
        }
    }
    out.into_iter()
        .map(|(_, sum, m)| RootWithMultiplicity {
            root: sum / m as f64,
            multiplicity: m,
        })
        .collect()
}

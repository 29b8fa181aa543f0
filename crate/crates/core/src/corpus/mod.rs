//! Test curves with known multiplicity at the origin, a uniform sampler on the
//! annulus `C' = C ∩ [B_ε(p) − B_ε₀(p)°]`, and numerical regularity estimates.

mod regularity;
mod sampler;
mod thinning;

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{AnnulusSpec, ChartPoint};
use crate::quadrature;

pub use regularity::{estimate_regularity, pointwise_reach, RegularityData, DEFAULT_PROBE_DENSITY, SAFETY_FACTOR};
pub use sampler::{sample_uniform, SampleMetadata, SampleSet, UniformSampler};
pub use thinning::{draw_slab, SlabDraw, SlabRegion};

/// `Σ c · x^i · y^j` over ℂ².
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanePolynomial {
    /// `(i, j, c)` triples.
    pub terms: Vec<(u32, u32, f64)>,
}

impl PlanePolynomial {
    pub fn new(terms: Vec<(u32, u32, f64)>) -> Self {
        PlanePolynomial { terms }
    }

    pub fn eval(&self, x: Complex64, y: Complex64) -> Complex64 {
        self.terms
            .iter()
            .map(|&(i, j, c)| x.powu(i) * y.powu(j) * c)
            .sum()
    }

    /// Coefficients of `f(p_1 + u, p_2 + v)` keyed by `(deg_u, deg_v)`.
    pub fn expand_at(&self, p: (Complex64, Complex64)) -> BTreeMap<(u32, u32), Complex64> {
        let mut out: BTreeMap<(u32, u32), Complex64> = BTreeMap::new();
        for &(i, j, c) in &self.terms {
            for k in 0..=i {
                let cx = binomial(i, k) * p.0.powu(i - k);
                for l in 0..=j {
                    let cy = binomial(j, l) * p.1.powu(j - l);
                    *out.entry((k, l)).or_default() += cx * cy * c;
                }
            }
        }
        out
    }

    pub fn max_coefficient(&self) -> f64 {
        self.terms.iter().map(|t| t.2.abs()).fold(0.0, f64::max)
    }
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, m| acc * (n - m) as f64 / (m + 1) as f64)
}

/// A polynomial map `t ↦ (x(t), y(t))` with real coefficients, lowest degree first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolynomialCurve {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

fn horner(c: &[f64], t: Complex64) -> Complex64 {
    c.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &a| acc * t + a)
}

fn derivative(c: &[f64]) -> Vec<f64> {
    c.iter().enumerate().skip(1).map(|(k, a)| k as f64 * a).collect()
}

impl PolynomialCurve {
    pub fn monomial(a: u32, b: u32) -> Self {
        let mono = |e: u32| {
            let mut c = vec![0.0; e as usize + 1];
            c[e as usize] = 1.0;
            c
        };
        PolynomialCurve { x: mono(a), y: mono(b) }
    }

    #[inline]
    pub fn eval(&self, t: Complex64) -> [Complex64; 2] {
        [horner(&self.x, t), horner(&self.y, t)]
    }

    pub fn derivative(&self) -> PolynomialCurve {
        PolynomialCurve {
            x: derivative(&self.x),
            y: derivative(&self.y),
        }
    }

    pub fn point(&self, t: Complex64) -> [f64; 4] {
        let [x, y] = self.eval(t);
        [x.re, x.im, y.re, y.im]
    }
}

/// How a corpus curve is given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveForm {
    /// `t ↦ (t^a, t^b)` with `1 ≤ a < b`, `gcd(a, b) = 1`, based at `t = 0`.
    Monomial { a: u32, b: u32 },
    /// `f(x, y) = 0`, sampled through a polynomial parametrization whose
    /// parameters in `base_params` are the preimages of the base point.
    Implicit {
        equation: PlanePolynomial,
        parametrization: PolynomialCurve,
        base_params: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusCurve {
    pub id: String,
    pub form: CurveForm,
    pub base_point: ChartPoint,
    pub true_multiplicity: usize,
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl CorpusCurve {
    pub fn monomial(id: &str, a: u32, b: u32) -> Result<Self> {
        if !(1 <= a && a < b) || gcd(a, b) != 1 {
            return Err(Error::Domain(format!(
                "monomial curve needs 1 <= a < b with gcd(a, b) = 1, got ({a}, {b})"
            )));
        }
        Ok(CorpusCurve {
            id: id.to_string(),
            form: CurveForm::Monomial { a, b },
            base_point: ChartPoint::origin(2),
            true_multiplicity: a as usize,
        })
    }

    /// Implicit equation; monomial curves use `y^a − x^b`.
    pub fn equation(&self) -> PlanePolynomial {
        match &self.form {
            CurveForm::Monomial { a, b } => PlanePolynomial::new(vec![(0, *a, 1.0), (*b, 0, -1.0)]),
            CurveForm::Implicit { equation, .. } => equation.clone(),
        }
    }

    pub fn parametrization(&self) -> PolynomialCurve {
        match &self.form {
            CurveForm::Monomial { a, b } => PolynomialCurve::monomial(*a, *b),
            CurveForm::Implicit { parametrization, .. } => parametrization.clone(),
        }
    }

    /// Parameter values mapping onto the base point, one per local branch.
    pub fn base_params(&self) -> Vec<Complex64> {
        match &self.form {
            CurveForm::Monomial { .. } => vec![Complex64::new(0.0, 0.0)],
            CurveForm::Implicit { base_params, .. } => {
                base_params.iter().map(|&t| Complex64::new(t, 0.0)).collect()
            }
        }
    }

    pub fn base(&self) -> [Complex64; 2] {
        [self.base_point.complex(0), self.base_point.complex(1)]
    }

    /// `|f(z)|` for a point of ℂ² in the interleaved layout.
    pub fn implicit_residual(&self, z: &[f64]) -> f64 {
        self.equation()
            .eval(Complex64::new(z[0], z[1]), Complex64::new(z[2], z[3]))
            .norm()
    }
}

/// The five built-in curves, all based at the origin of ℂ².
pub fn builtin_corpus() -> Vec<CorpusCurve> {
    let origin = ChartPoint::origin(2);
    vec![
        CorpusCurve {
            id: "smooth".into(),
            form: CurveForm::Implicit {
                equation: PlanePolynomial::new(vec![(0, 1, 1.0)]),
                parametrization: PolynomialCurve { x: vec![0.0, 1.0], y: vec![0.0] },
                base_params: vec![0.0],
            },
            base_point: origin.clone(),
            true_multiplicity: 1,
        },
        CorpusCurve::monomial("cusp", 2, 3).expect("valid exponents"),
        CorpusCurve {
            id: "node".into(),
            form: CurveForm::Implicit {
                // y² − x² − x³, parametrized by t ↦ (t² − 1, t(t² − 1))
                equation: PlanePolynomial::new(vec![(0, 2, 1.0), (2, 0, -1.0), (3, 0, -1.0)]),
                parametrization: PolynomialCurve {
                    x: vec![-1.0, 0.0, 1.0],
                    y: vec![0.0, -1.0, 0.0, 1.0],
                },
                base_params: vec![-1.0, 1.0],
            },
            base_point: origin,
            true_multiplicity: 2,
        },
        CorpusCurve::monomial("triple", 3, 4).expect("valid exponents"),
        CorpusCurve::monomial("quadruple", 4, 5).expect("valid exponents"),
    ]
}

pub fn find_curve(id: &str) -> Result<CorpusCurve> {
    builtin_corpus()
        .into_iter()
        .find(|c| c.id == id)
        .ok_or_else(|| Error::UnknownCurve(id.to_string()))
}

/// Preimage of the annulus in the parameter plane, organised by branch.
///
/// Along each ray `t_b + ρ e^{iθ}` the distance `|φ(t) − p|` is assumed to
/// increase with `ρ` on the range of interest; this holds for the corpus curves
/// near their base points and is spot-checked on construction.
#[derive(Debug, Clone)]
pub struct ParameterAnnulus {
    pub curve: PolynomialCurve,
    pub tangent: PolynomialCurve,
    pub base: [Complex64; 2],
    pub branches: Vec<Complex64>,
    pub inner: f64,
    pub outer: f64,
    /// Half-width of the square parameter box around each branch.
    pub half_width: f64,
}

const RAY_SAMPLES: usize = 720;

impl ParameterAnnulus {
    pub fn new(curve: &CorpusCurve, annulus: &AnnulusSpec) -> Result<Self> {
        if annulus.center != curve.base_point {
            return Err(Error::Precondition(format!(
                "annulus must be centred at the base point of `{}`",
                curve.id
            )));
        }
        let param = curve.parametrization();
        let mut pa = ParameterAnnulus {
            tangent: param.derivative(),
            curve: param,
            base: curve.base(),
            branches: curve.base_params(),
            inner: annulus.inner,
            outer: annulus.outer,
            half_width: 0.0,
        };
        let mut max_rho: f64 = 0.0;
        for b in 0..pa.branches.len() {
            for k in 0..RAY_SAMPLES {
                let theta = 2.0 * std::f64::consts::PI * k as f64 / RAY_SAMPLES as f64;
                let r_out = pa.radius_at(b, theta, pa.outer)?;
                let r_in = pa.radius_at(b, theta, pa.inner)?;
                if !(r_in < r_out) {
                    return Err(Error::Degenerate(format!(
                        "distance to the base point is not increasing along the ray θ = {theta}"
                    )));
                }
                max_rho = max_rho.max(r_out);
            }
        }
        pa.half_width = 1.02 * max_rho;
        for (i, a) in pa.branches.iter().enumerate() {
            for c in &pa.branches[i + 1..] {
                let gap = (a.re - c.re).abs().max((a.im - c.im).abs());
                if gap < 2.0 * pa.half_width {
                    return Err(Error::Precondition(format!(
                        "outer radius {} is too large: branch neighbourhoods overlap",
                        pa.outer
                    )));
                }
            }
        }
        pa.check_no_stray_components()?;
        Ok(pa)
    }

    #[inline]
    pub fn distance_from_base(&self, t: Complex64) -> f64 {
        let [x, y] = self.curve.eval(t);
        ((x - self.base[0]).norm_sqr() + (y - self.base[1]).norm_sqr()).sqrt()
    }

    /// `|φ'(t)|²`, the area magnification of the parametrization.
    #[inline]
    pub fn area_factor(&self, t: Complex64) -> f64 {
        let [dx, dy] = self.tangent.eval(t);
        dx.norm_sqr() + dy.norm_sqr()
    }

    #[inline]
    pub fn in_preimage(&self, t: Complex64) -> bool {
        let d = self.distance_from_base(t);
        self.inner <= d && d <= self.outer
    }

    /// Smallest `ρ` with `|φ(t_b + ρ e^{iθ}) − p| = level`.
    pub fn radius_at(&self, branch: usize, theta: f64, level: f64) -> Result<f64> {
        let center = self.branches[branch];
        let dir = Complex64::from_polar(1.0, theta);
        let f = |rho: f64| self.distance_from_base(center + dir * rho) - level;
        let mut hi = 1e-3;
        let mut guard = 0;
        while f(hi) < 0.0 {
            hi *= 2.0;
            guard += 1;
            if guard > 200 {
                return Err(Error::Degenerate(format!("no crossing of level {level} along ray θ = {theta}")));
            }
        }
        let mut lo = 0.0;
        if f(lo) >= 0.0 {
            return Ok(0.0);
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if f(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Area of `C'` by polar quadrature around each branch.
    pub fn area(&self) -> Result<f64> {
        const ANGLES: usize = 512;
        let rule = quadrature::gauss_legendre(24);
        let mut total = 0.0;
        for b in 0..self.branches.len() {
            let center = self.branches[b];
            let mut sum = 0.0;
            for k in 0..ANGLES {
                let theta = 2.0 * std::f64::consts::PI * k as f64 / ANGLES as f64;
                let dir = Complex64::from_polar(1.0, theta);
                let r_in = self.radius_at(b, theta, self.inner)?;
                let r_out = self.radius_at(b, theta, self.outer)?;
                sum += quadrature::integrate(&rule, r_in, r_out, |rho| {
                    self.area_factor(center + dir * rho) * rho
                });
            }
            total += sum * 2.0 * std::f64::consts::PI / ANGLES as f64;
        }
        Ok(total)
    }

    /// Rejects curves whose ball preimage has pieces away from the branch boxes.
    fn check_no_stray_components(&self) -> Result<()> {
        let reach = self
            .branches
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max)
            + 4.0 * self.half_width
            + 1.0;
        let steps = 400;
        for i in 0..=steps {
            for j in 0..=steps {
                let t = Complex64::new(
                    -reach + 2.0 * reach * i as f64 / steps as f64,
                    -reach + 2.0 * reach * j as f64 / steps as f64,
                );
                if self.in_box(t).is_none() && self.distance_from_base(t) <= self.outer {
                    return Err(Error::Precondition(format!(
                        "the outer ball of radius {} meets the curve away from the base point (t = {t})",
                        self.outer
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn in_box(&self, t: Complex64) -> Option<usize> {
        self.branches.iter().position(|c| {
            (t.re - c.re).abs() <= self.half_width && (t.im - c.im).abs() <= self.half_width
        })
    }
}

//! Affine-chart geometry: points of ℂⁿ⁺¹ stored as real vectors, the slicing
//! functional, the annulus around the base point, and the link parameters.
//!
//! Layout: a point with complex coordinates `(z_0, …, z_n)` is stored as
//! `[re z_0, im z_0, re z_1, im z_1, …]`. Files and reports use the same order.

use std::fmt;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numfmt;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ChartPoint {
    coords: Vec<f64>,
}

impl ChartPoint {
    /// Wraps interleaved real coordinates; the length must be even and nonzero.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() || coords.len() % 2 != 0 {
            return Err(Error::Domain(format!(
                "a chart point needs an even, nonzero number of real coordinates, got {}",
                coords.len()
            )));
        }
        Ok(ChartPoint { coords })
    }

    pub fn from_complex(z: &[Complex64]) -> Self {
        ChartPoint {
            coords: z.iter().flat_map(|c| [c.re, c.im]).collect(),
        }
    }

    pub fn origin(complex_dim: usize) -> Self {
        ChartPoint {
            coords: vec![0.0; 2 * complex_dim],
        }
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn real_dim(&self) -> usize {
        self.coords.len()
    }

    pub fn ambient_complex_dim(&self) -> usize {
        self.coords.len() / 2
    }

    pub fn complex(&self, j: usize) -> Complex64 {
        Complex64::new(self.coords[2 * j], self.coords[2 * j + 1])
    }

    pub fn to_complex(&self) -> Vec<Complex64> {
        (0..self.ambient_complex_dim()).map(|j| self.complex(j)).collect()
    }

    pub fn distance(&self, other: &ChartPoint) -> f64 {
        euclidean(&self.coords, &other.coords)
    }
}

impl AsRef<[f64]> for ChartPoint {
    fn as_ref(&self) -> &[f64] {
        &self.coords
    }
}

#[inline]
pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    squared_distance(a, b).sqrt()
}

#[inline]
pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// The point `p`, a unit direction `ξ ∈ ℂⁿ⁺¹` and an offset `δ > 0`.
///
/// `π_ξ(z) = Re⟨z - p, ξ⟩` with the Hermitian product `⟨u, v⟩ = Σ u_j · conj(v_j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceFunctional {
    pub base: ChartPoint,
    pub direction: Vec<Complex64>,
    pub offset: f64,
}

const UNIT_TOLERANCE: f64 = 1e-12;

impl SliceFunctional {
    pub fn new(base: ChartPoint, direction: Vec<Complex64>, offset: f64) -> Result<Self> {
        check_dim(base.real_dim(), 2 * direction.len())?;
        let norm = direction.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > UNIT_TOLERANCE {
            return Err(Error::Domain(format!("slice direction must be unit length, |ξ| = {norm}")));
        }
        if !(offset > 0.0) || !offset.is_finite() {
            return Err(Error::Domain(format!("slice offset δ must be positive, got {offset}")));
        }
        Ok(SliceFunctional { base, direction, offset })
    }

    /// Same `p` and `ξ` at a different level.
    pub fn with_offset(&self, offset: f64) -> Result<Self> {
        SliceFunctional::new(self.base.clone(), self.direction.clone(), offset)
    }

    /// `⟨z - p, ξ⟩` without a dimension check.
    #[inline]
    pub fn complex_value(&self, z: &[f64]) -> Complex64 {
        let p = self.base.coords();
        self.direction
            .iter()
            .enumerate()
            .map(|(j, xi)| Complex64::new(z[2 * j] - p[2 * j], z[2 * j + 1] - p[2 * j + 1]) * xi.conj())
            .sum()
    }

    pub fn pi_xi(&self, z: &ChartPoint) -> Result<f64> {
        check_dim(self.base.real_dim(), z.real_dim())?;
        Ok(self.complex_value(z.coords()).re)
    }

    /// Distance from `z` to the real hyperplane `π_ξ⁻¹(δ)`, i.e. `|π_ξ(z) - δ|`.
    pub fn hyperplane_distance(&self, z: &ChartPoint) -> Result<f64> {
        Ok((self.pi_xi(z)? - self.offset).abs())
    }

    /// Distance from `z` to the complex hyperplane `{⟨w - p, ξ⟩ = δ}`.
    pub fn complex_hyperplane_distance(&self, z: &ChartPoint) -> Result<f64> {
        check_dim(self.base.real_dim(), z.real_dim())?;
        Ok((self.complex_value(z.coords()) - self.offset).norm())
    }
}

/// Uniformly distributed unit vector of ℂⁿ (uniform on S^{2n-1}).
pub fn random_unit_direction<R: Rng + ?Sized>(rng: &mut R, complex_dim: usize) -> Vec<Complex64> {
    loop {
        let v: Vec<Complex64> = (0..complex_dim)
            .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        let norm = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-8 {
            return v.into_iter().map(|c| c / norm).collect();
        }
    }
}

/// Closed ball of radius `outer` minus the open ball of radius `inner`, both centred at `p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnulusSpec {
    pub center: ChartPoint,
    pub outer: f64,
    pub inner: f64,
}

impl AnnulusSpec {
    pub fn new(center: ChartPoint, outer: f64, inner: f64) -> Result<Self> {
        if !(inner > 0.0 && inner < outer && outer.is_finite()) {
            return Err(Error::Domain(format!(
                "annulus radii must satisfy 0 < ε₀ < ε, got ε₀ = {inner}, ε = {outer}"
            )));
        }
        Ok(AnnulusSpec { center, outer, inner })
    }

    pub fn contains(&self, z: &[f64]) -> bool {
        let r = euclidean(z, self.center.coords());
        self.inner <= r && r <= self.outer
    }

    pub fn in_annulus(&self, z: &ChartPoint) -> bool {
        self.contains(z.coords())
    }
}

/// The complex link points `x_i` with their separation data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkGeometry {
    pub points: Vec<ChartPoint>,
    pub cardinality: usize,
    /// Smallest pairwise distance `μ`; infinite for a single point.
    #[serde(with = "numfmt")]
    pub min_pairwise: f64,
    /// `κ = min_i (ε - ‖p - x_i‖)`.
    pub boundary_gap: f64,
}

impl LinkGeometry {
    /// Derives `μ` and `κ` from the points and the outer radius.
    pub fn from_points(points: Vec<ChartPoint>, base: &ChartPoint, outer: f64) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Domain("a complex link needs at least one point".into()));
        }
        let mut mu = f64::INFINITY;
        for (i, a) in points.iter().enumerate() {
            check_dim(base.real_dim(), a.real_dim())?;
            for b in &points[i + 1..] {
                mu = mu.min(a.distance(b));
            }
        }
        let kappa = points
            .iter()
            .map(|x| outer - x.distance(base))
            .fold(f64::INFINITY, f64::min);
        Ok(LinkGeometry {
            cardinality: points.len(),
            points,
            min_pairwise: mu,
            boundary_gap: kappa,
        })
    }
}

/// One term of the thickness bound `α < min{ε-δ, δ-ε₀, μ/4, κ, Δ/2}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundTerm {
    /// `ε - δ`
    OuterMargin,
    /// `δ - ε₀`
    InnerMargin,
    /// `μ / 4`
    Separation,
    /// `κ`
    BoundaryGap,
    /// `Δ_{C'} / 2`
    Regularity,
}

impl BoundTerm {
    pub const ALL: [BoundTerm; 5] = [
        BoundTerm::OuterMargin,
        BoundTerm::InnerMargin,
        BoundTerm::Separation,
        BoundTerm::BoundaryGap,
        BoundTerm::Regularity,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            BoundTerm::OuterMargin => "eps - delta",
            BoundTerm::InnerMargin => "delta - eps0",
            BoundTerm::Separation => "mu / 4",
            BoundTerm::BoundaryGap => "kappa",
            BoundTerm::Regularity => "Delta / 2",
        }
    }
}

impl fmt::Display for BoundTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub term: BoundTerm,
    pub bound: f64,
    pub alpha: f64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "alpha = {} is not below {} = {}", self.alpha, self.term, self.bound)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidityReport {
    pub violations: Vec<Violation>,
}

impl ValidityReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_ok() {
            Ok(())
        } else {
            Err(Error::InvalidParameters(self.violations))
        }
    }
}

/// Everything needed to run the slab estimator with the geometric guarantee.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkParameters {
    pub slice: SliceFunctional,
    pub annulus: AnnulusSpec,
    /// Slab thickness `α`.
    pub thickness: f64,
    /// `Δ_{C'}`.
    pub regularity: f64,
    pub link: LinkGeometry,
}

impl LinkParameters {
    pub fn term_value(&self, term: BoundTerm) -> f64 {
        let eps = self.annulus.outer;
        let eps0 = self.annulus.inner;
        let delta = self.slice.offset;
        match term {
            BoundTerm::OuterMargin => eps - delta,
            BoundTerm::InnerMargin => delta - eps0,
            BoundTerm::Separation => self.link.min_pairwise / 4.0,
            BoundTerm::BoundaryGap => self.link.boundary_gap,
            BoundTerm::Regularity => self.regularity / 2.0,
        }
    }

    /// `min{ε-δ, δ-ε₀, μ/4, κ, Δ/2}`.
    pub fn thickness_bound(&self) -> f64 {
        BoundTerm::ALL
            .iter()
            .map(|t| self.term_value(*t))
            .fold(f64::INFINITY, f64::min)
    }

    /// Lists every term the thickness fails to stay strictly below.
    pub fn validate(&self) -> ValidityReport {
        let alpha = self.thickness;
        let violations = BoundTerm::ALL
            .iter()
            .filter_map(|&term| {
                let bound = self.term_value(term);
                // NaN bounds count as violations too.
                if alpha < bound && alpha > 0.0 {
                    None
                } else {
                    Some(Violation { term, bound, alpha })
                }
            })
            .collect();
        ValidityReport { violations }
    }

    pub fn with_thickness(&self, alpha: f64) -> Self {
        LinkParameters {
            thickness: alpha,
            ..self.clone()
        }
    }
}

pub fn validate_parameters(params: &LinkParameters) -> ValidityReport {
    params.validate()
}

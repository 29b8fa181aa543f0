//! Exact multiplicity of the base point computed three independent ways.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::CorpusCurve;
use crate::error::{Error, Result};
use crate::geometry::{euclidean, random_unit_direction, AnnulusSpec, ChartPoint, LinkGeometry, SliceFunctional};
use crate::specialfn::{complex_roots, ComplexPolynomial, ROOT_MERGE_TOLERANCE};

/// Number of `(ξ, δ′)` draws `certify` asks `lambda0_by_roots` for.
pub const CONSENSUS_TRIALS: usize = 3;
const REDRAW_LIMIT: usize = 16;
const LAMBDA0_SEED: u64 = 0x1a_b0_0c;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiplicityCertificate {
    pub curve_id: String,
    pub order_of_vanishing: usize,
    pub lambda0: usize,
    pub link_cardinality: usize,
    pub link_points: LinkGeometry,
}

impl MultiplicityCertificate {
    /// The agreed multiplicity.
    pub fn value(&self) -> usize {
        self.order_of_vanishing
    }
}

/// Lowest total degree in the expansion of the defining polynomial at `p`.
pub fn order_of_vanishing(curve: &CorpusCurve) -> Result<usize> {
    let f = curve.equation();
    let [x0, y0] = curve.base();
    let expansion = f.expand_at((x0, y0));
    let tol = 1e-12 * f.max_coefficient().max(1.0);
    let constant = expansion.get(&(0, 0)).copied().unwrap_or_default();
    if constant.norm() > tol {
        return Err(Error::Precondition(format!(
            "`{}` does not pass through its base point (f(p) = {constant})",
            curve.id
        )));
    }
    expansion
        .iter()
        .filter(|(_, c)| c.norm() > tol)
        .map(|(&(i, j), _)| (i + j) as usize)
        .min()
        .ok_or(Error::ZeroPolynomial)
}

/// `⟨φ(t) − p, ξ⟩ − level` as a polynomial in `t`.
pub fn level_polynomial(curve: &CorpusCurve, direction: &[Complex64], level: Complex64) -> Result<ComplexPolynomial> {
    if direction.len() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 4,
            found: 2 * direction.len(),
        });
    }
    let phi = curve.parametrization();
    let p = curve.base();
    let n = phi.x.len().max(phi.y.len());
    let mut coeffs = vec![Complex64::new(0.0, 0.0); n];
    for (k, c) in coeffs.iter_mut().enumerate() {
        let x = phi.x.get(k).copied().unwrap_or(0.0);
        let y = phi.y.get(k).copied().unwrap_or(0.0);
        *c = direction[0].conj() * x + direction[1].conj() * y;
    }
    coeffs[0] -= p[0] * direction[0].conj() + p[1] * direction[1].conj() + level;
    Ok(ComplexPolynomial::new(coeffs))
}

struct LevelSet {
    /// Distinct image points.
    points: Vec<[f64; 4]>,
    /// Every root was simple.
    simple: bool,
}

fn level_set(curve: &CorpusCurve, direction: &[Complex64], level: Complex64) -> Result<LevelSet> {
    let poly = level_polynomial(curve, direction, level)?;
    let roots = complex_roots(&poly)?;
    let phi = curve.parametrization();
    let mut points: Vec<[f64; 4]> = Vec::new();
    for r in &roots {
        let x = phi.point(r.root);
        if !points.iter().any(|q| euclidean(q, &x) <= ROOT_MERGE_TOLERANCE) {
            points.push(x);
        }
    }
    Ok(LevelSet {
        points,
        simple: roots.iter().all(|r| r.multiplicity == 1),
    })
}

fn lambda0_once(curve: &CorpusCurve, direction: &[Complex64], level: f64) -> Result<Option<usize>> {
    let generic = level_set(curve, direction, Complex64::new(level, 0.0))?;
    if !generic.simple {
        return Ok(None);
    }
    let zero = level_set(curve, direction, Complex64::new(0.0, 0.0))?;
    Ok(Some(generic.points.len() + 1 - zero.points.len()))
}

/// `Λ⁰ = #{C ∩ H_δ′} − #{C ∩ H_0} + 1` for complex hyperplanes `⟨z − p, ξ⟩ = c`.
///
/// The first trial uses the slice itself; later trials draw a fresh unit `ξ`
/// and a level `δ′ ∈ [δ/2, 3δ/2)` from a fixed seed. Draws whose generic level
/// set has a repeated root are replaced. All trials must agree.
pub fn lambda0_by_roots(curve: &CorpusCurve, slice: &SliceFunctional, trials: usize) -> Result<usize> {
    if trials == 0 {
        return Err(Error::Precondition("lambda0 needs at least one trial".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(LAMBDA0_SEED);
    let mut values = Vec::with_capacity(trials);
    for trial in 0..trials {
        let mut found = None;
        for attempt in 0..REDRAW_LIMIT {
            let (direction, level) = if trial == 0 && attempt == 0 {
                (slice.direction.clone(), slice.offset)
            } else {
                let d = random_unit_direction(&mut rng, slice.direction.len());
                (d, slice.offset * rng.gen_range(0.5..1.5))
            };
            if let Some(v) = lambda0_once(curve, &direction, level)? {
                found = Some(v);
                break;
            }
        }
        values.push(found.ok_or_else(|| {
            Error::Degenerate(format!("no generic level found for `{}` in {REDRAW_LIMIT} draws", curve.id))
        })?);
    }
    if values.iter().any(|&v| v != values[0]) {
        return Err(Error::Degenerate(format!(
            "lambda0 draws for `{}` disagree: {values:?}; re-seed the slice",
            curve.id
        )));
    }
    Ok(values[0])
}

/// Halvings of `δ` over which the link count must stay put.
const STABILITY_HALVINGS: u32 = 3;

/// Points of the complex level set at `level` inside `B_ε(p)`; a solution in
/// `[ε, 2ε]` makes the split ambiguous and the slice degenerate.
fn near_points(curve: &CorpusCurve, slice: &SliceFunctional, level: f64, eps: f64) -> Result<Vec<[f64; 4]>> {
    let set = level_set(curve, &slice.direction, Complex64::new(level, 0.0))?;
    if !set.simple {
        return Err(Error::Degenerate(format!(
            "the slice of `{}` at δ = {level} has a repeated root",
            curve.id
        )));
    }
    let base = curve.base_point.coords();
    let mut near = Vec::new();
    for x in set.points {
        let r = euclidean(&x, base);
        if r < eps {
            near.push(x);
        } else if r <= 2.0 * eps {
            return Err(Error::Degenerate(format!(
                "slice point at distance {r} lies between ε = {eps} and 2ε at δ = {level}"
            )));
        }
    }
    Ok(near)
}

/// `Lk_p = C ∩ B_ε(p) ∩ {⟨z − p, ξ⟩ = δ}`.
///
/// Every solution must land either inside `B_ε(p)` or outside `B_2ε(p)`, and
/// the count must not change when `δ` is halved: otherwise a local branch
/// leaves the ball along this `ξ` and the draw is degenerate.
pub fn link_points(curve: &CorpusCurve, slice: &SliceFunctional, annulus: &AnnulusSpec) -> Result<LinkGeometry> {
    if slice.base != curve.base_point || annulus.center != curve.base_point {
        return Err(Error::Precondition(format!(
            "slice and annulus must be centred at the base point of `{}`",
            curve.id
        )));
    }
    let eps = annulus.outer;
    if !(slice.offset > annulus.inner && slice.offset < eps) {
        return Err(Error::Precondition(format!(
            "offset δ = {} must lie strictly between ε₀ = {} and ε = {eps}",
            slice.offset, annulus.inner
        )));
    }
    let base = curve.base_point.coords();
    let through_p = level_set(curve, &slice.direction, Complex64::new(0.0, 0.0))?;
    if let Some(r) = through_p
        .points
        .iter()
        .map(|x| euclidean(x, base))
        .find(|&r| r > ROOT_MERGE_TOLERANCE && r <= 2.0 * eps)
    {
        return Err(Error::Degenerate(format!(
            "the hyperplane through p meets `{}` again at distance {r} < 2ε",
            curve.id
        )));
    }
    let near = near_points(curve, slice, slice.offset, eps)?;
    for k in 1..=STABILITY_HALVINGS {
        let level = slice.offset / f64::from(1u32 << k);
        let n = near_points(curve, slice, level, eps)?.len();
        if n != near.len() {
            return Err(Error::Degenerate(format!(
                "link of `{}` has {} points at δ = {} but {n} at δ = {level}; re-seed the slice",
                curve.id,
                near.len(),
                slice.offset
            )));
        }
    }
    if near.is_empty() {
        return Err(Error::Degenerate(format!("the slice misses `{}` inside B_ε", curve.id)));
    }
    let points = near.into_iter().map(|x| ChartPoint::new(x.to_vec())).collect::<Result<Vec<_>>>()?;
    LinkGeometry::from_points(points, &curve.base_point, eps)
}

/// Cross-checks the three computations and returns their common value.
pub fn certify(curve: &CorpusCurve, slice: &SliceFunctional, annulus: &AnnulusSpec) -> Result<MultiplicityCertificate> {
    let order = order_of_vanishing(curve)?;
    let lambda0 = lambda0_by_roots(curve, slice, CONSENSUS_TRIALS)?;
    let link = link_points(curve, slice, annulus)?;
    if order != lambda0 || order != link.cardinality {
        return Err(Error::OracleDisagreement {
            curve: curve.id.clone(),
            order,
            lambda0,
            link: link.cardinality,
        });
    }
    Ok(MultiplicityCertificate {
        curve_id: curve.id.clone(),
        order_of_vanishing: order,
        lambda0,
        link_cardinality: link.cardinality,
        link_points: link,
    })
}

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{CorpusCurve, ParameterAnnulus};
use crate::error::{Error, Result};
use crate::geometry::AnnulusSpec;
use crate::pointcloud::PointCloud;

/// Independent uniform (area measure) points on `C'`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub points: PointCloud,
    pub seed: u64,
    pub curve_id: String,
    pub annulus: AnnulusSpec,
}

/// JSON sidecar written next to an exported point cloud.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMetadata {
    pub curve_id: String,
    pub seed: u64,
    pub annulus: AnnulusSpec,
    pub count: usize,
}

impl SampleSet {
    pub fn metadata(&self) -> SampleMetadata {
        SampleMetadata {
            curve_id: self.curve_id.clone(),
            seed: self.seed,
            annulus: self.annulus.clone(),
            count: self.points.len(),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Rejection sampler in the parameter plane.
///
/// Proposals are uniform on the union of equal square boxes around the branch
/// parameters; a proposal `t` whose image lies in the annulus is accepted with
/// probability `|φ'(t)|² / envelope`, which makes the image uniform in area.
#[derive(Debug, Clone)]
pub struct UniformSampler {
    pub domain: ParameterAnnulus,
    /// Upper bound on `|φ'|²` over the preimage.
    pub envelope: f64,
    area: f64,
}

const ENVELOPE_GRID: usize = 256;
const ENVELOPE_MARGIN: f64 = 1.1;

impl UniformSampler {
    pub fn new(curve: &CorpusCurve, annulus: &AnnulusSpec) -> Result<Self> {
        let domain = ParameterAnnulus::new(curve, annulus)?;
        let envelope = ENVELOPE_MARGIN * max_area_factor(&domain);
        if !(envelope > 0.0) {
            return Err(Error::Degenerate("area factor vanishes on the annulus preimage".into()));
        }
        let area = domain.area()?;
        Ok(UniformSampler { domain, envelope, area })
    }

    /// Area of `C'`.
    pub fn area(&self) -> f64 {
        self.area
    }

    /// Total area of the proposal boxes in the parameter plane.
    pub fn proposal_area(&self) -> f64 {
        let side = 2.0 * self.domain.half_width;
        side * side * self.domain.branches.len() as f64
    }

    /// Probability that one proposal is accepted.
    pub fn acceptance_probability(&self) -> f64 {
        self.area / (self.envelope * self.proposal_area())
    }

    /// One proposal: `Ok(Some(t))` if accepted, `Ok(None)` if rejected.
    #[inline]
    pub fn propose<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Option<Complex64>> {
        let h = self.domain.half_width;
        let branch = if self.domain.branches.len() == 1 {
            0
        } else {
            rng.gen_range(0..self.domain.branches.len())
        };
        let t = self.domain.branches[branch] + Complex64::new(rng.gen_range(-h..h), rng.gen_range(-h..h));
        let u: f64 = rng.gen();
        self.accept(t, u)
    }

    /// Acceptance step for a given proposal and uniform variate.
    #[inline]
    pub fn accept(&self, t: Complex64, u: f64) -> Result<Option<Complex64>> {
        if !self.domain.in_preimage(t) {
            return Ok(None);
        }
        let w = self.domain.area_factor(t);
        if w > self.envelope {
            return Err(Error::Degenerate(format!(
                "rejection envelope {} exceeded by |φ'|² = {w} at t = {t}",
                self.envelope
            )));
        }
        Ok((u * self.envelope < w).then_some(t))
    }

    pub fn point(&self, t: Complex64) -> [f64; 4] {
        self.domain.curve.point(t)
    }

    /// Draws `count` accepted points.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R, count: usize) -> Result<PointCloud> {
        let mut cloud = PointCloud::with_capacity(4, count);
        let budget = 1_000_000 + 10_000 * count as u64;
        let mut proposals = 0u64;
        while cloud.len() < count {
            proposals += 1;
            if proposals > budget {
                return Err(Error::RejectionFailure { proposals });
            }
            if let Some(t) = self.propose(rng)? {
                cloud.push(&self.point(t))?;
            }
        }
        Ok(cloud)
    }
}

/// Grid search for the largest `|φ'|²` on the preimage, then a local refinement.
fn max_area_factor(domain: &ParameterAnnulus) -> f64 {
    let h = domain.half_width;
    let mut best = 0.0;
    let mut best_t = None;
    for &c in &domain.branches {
        for i in 0..=ENVELOPE_GRID {
            for j in 0..=ENVELOPE_GRID {
                let t = c + Complex64::new(
                    -h + 2.0 * h * i as f64 / ENVELOPE_GRID as f64,
                    -h + 2.0 * h * j as f64 / ENVELOPE_GRID as f64,
                );
                if domain.in_preimage(t) {
                    let w = domain.area_factor(t);
                    if w > best {
                        best = w;
                        best_t = Some(t);
                    }
                }
            }
        }
    }
    let Some(mut t) = best_t else { return 0.0 };
    let mut step = 2.0 * h / ENVELOPE_GRID as f64;
    while step > 1e-12 * h {
        let mut moved = false;
        for d in [
            Complex64::new(step, 0.0),
            Complex64::new(-step, 0.0),
            Complex64::new(0.0, step),
            Complex64::new(0.0, -step),
        ] {
            let cand = t + d;
            if domain.in_preimage(cand) {
                let w = domain.area_factor(cand);
                if w > best {
                    best = w;
                    t = cand;
                    moved = true;
                }
            }
        }
        if !moved {
            step *= 0.5;
        }
    }
    best
}

/// `count` i.i.d. uniform points on `C'`, reproducible from `seed`.
pub fn sample_uniform(curve: &CorpusCurve, annulus: &AnnulusSpec, count: usize, seed: u64) -> Result<SampleSet> {
    if count == 0 {
        return Err(Error::Precondition("sample count must be at least 1".into()));
    }
    let sampler = UniformSampler::new(curve, annulus)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = sampler.draw(&mut rng, count)?;
    Ok(SampleSet {
        points,
        seed,
        curve_id: curve.id.clone(),
        annulus: annulus.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{builtin_corpus, find_curve};

    #[test]
    fn same_seed_same_points() {
        let curve = find_curve("cusp").unwrap();
        let annulus = AnnulusSpec::new(curve.base_point.clone(), 0.5, 0.05).unwrap();
        let a = sample_uniform(&curve, &annulus, 500, 9).unwrap();
        let b = sample_uniform(&curve, &annulus, 500, 9).unwrap();
        let c = sample_uniform(&curve, &annulus, 500, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.points, c.points);
    }

    #[test]
    fn samples_lie_on_curve_and_in_annulus() {
        for curve in builtin_corpus() {
            let annulus = AnnulusSpec::new(curve.base_point.clone(), 0.4, 0.05).unwrap();
            let s = sample_uniform(&curve, &annulus, 400, 1).unwrap();
            assert_eq!(s.len(), 400);
            for p in s.points.iter() {
                assert!(annulus.contains(p), "{}", curve.id);
                assert!(curve.implicit_residual(p) <= 1e-9, "{}", curve.id);
            }
        }
    }

    #[test]
    fn smooth_line_area_factor_is_constant() {
        let curve = find_curve("smooth").unwrap();
        let annulus = AnnulusSpec::new(curve.base_point.clone(), 1.0, 0.2).unwrap();
        let sampler = UniformSampler::new(&curve, &annulus).unwrap();
        for k in 0..20 {
            let t = Complex64::from_polar(0.2 + 0.04 * k as f64, k as f64);
            assert!((sampler.domain.area_factor(t) - 1.0).abs() < 1e-15);
        }
        let want = std::f64::consts::PI * (1.0 - 0.04);
        assert!((sampler.area() - want).abs() < 1e-10);
    }

    #[test]
    fn zero_count_rejected() {
        let curve = find_curve("cusp").unwrap();
        let annulus = AnnulusSpec::new(curve.base_point.clone(), 0.5, 0.05).unwrap();
        assert!(sample_uniform(&curve, &annulus, 0, 1).is_err());
    }
}

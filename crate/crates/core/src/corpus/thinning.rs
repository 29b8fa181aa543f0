//! The slab part of a very large uniform sample, without drawing the rest.
//!
//! Run the rejection sampler for a fixed number `T` of proposals. Its accepted
//! points are i.i.d. uniform on `C'` given their count `M ~ Bin(T, q)`. A proposal
//! can only yield a slab point if it lands in a parameter cell that meets the
//! slab preimage, and the number of proposals landing in those cells is
//! `Bin(T, |R| / |B|)`. Only those proposals are simulated, so the returned slab
//! has exactly the law of the slab of the full `T`-proposal sample.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Binomial, Distribution};

use super::UniformSampler;
use crate::error::{Error, Result};
use crate::geometry::SliceFunctional;
use crate::pointcloud::PointCloud;

/// Finest cell level: `2^CELL_LEVELS` cells per side of each branch box.
const CELL_LEVELS: u32 = 10;
/// Standard deviations of headroom between the expected sample size and its floor.
const SIZE_HEADROOM: f64 = 10.0;

/// Parameter cells that may contain points of the slab.
#[derive(Debug, Clone)]
pub struct SlabRegion {
    /// Lower-left corners.
    corners: Vec<Complex64>,
    side: f64,
}

impl SlabRegion {
    pub fn new(sampler: &UniformSampler, slice: &SliceFunctional, alpha: f64) -> Result<Self> {
        let domain = &sampler.domain;
        if slice.direction.len() != 2 {
            return Err(Error::DimensionMismatch {
                expected: 4,
                found: 2 * slice.direction.len(),
            });
        }
        let (xi0, xi1) = (slice.direction[0].conj(), slice.direction[1].conj());
        let p = slice.base.to_complex();
        let n = domain.curve.x.len().max(domain.curve.y.len());
        let coef = |c: &[f64], k: usize| c.get(k).copied().unwrap_or(0.0);
        let mut g: Vec<Complex64> = (0..n).map(|k| xi0 * coef(&domain.curve.x, k) + xi1 * coef(&domain.curve.y, k)).collect();
        g[0] -= p[0] * xi0 + p[1] * xi1;
        let mut x: Vec<Complex64> = domain.curve.x.iter().map(|&a| Complex64::new(a, 0.0)).collect();
        let mut y: Vec<Complex64> = domain.curve.y.iter().map(|&a| Complex64::new(a, 0.0)).collect();
        x[0] -= domain.base[0];
        y[0] -= domain.base[1];

        let test = CellTest {
            g,
            x,
            y,
            level: slice.offset,
            alpha,
            inner: domain.inner,
            outer: domain.outer,
        };
        let h = domain.half_width;
        let side = 2.0 * h / (1u64 << CELL_LEVELS) as f64;
        let mut corners = Vec::new();
        for &c in &domain.branches {
            let mut stack = vec![(c - Complex64::new(h, h), 2.0 * h, 0u32)];
            while let Some((corner, size, level)) = stack.pop() {
                let center = corner + Complex64::new(size / 2.0, size / 2.0);
                if test.excludes(center, size * std::f64::consts::FRAC_1_SQRT_2) {
                    continue;
                }
                if level == CELL_LEVELS {
                    corners.push(corner);
                    continue;
                }
                let s = size / 2.0;
                for (di, dj) in [(0.0, 0.0), (s, 0.0), (0.0, s), (s, s)] {
                    stack.push((corner + Complex64::new(di, dj), s, level + 1));
                }
            }
        }
        // a fixed order keeps draws reproducible
        corners.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        Ok(SlabRegion { corners, side })
    }

    pub fn cell_count(&self) -> usize {
        self.corners.len()
    }

    pub fn area(&self) -> f64 {
        self.corners.len() as f64 * self.side * self.side
    }
}

struct CellTest {
    g: Vec<Complex64>,
    x: Vec<Complex64>,
    y: Vec<Complex64>,
    level: f64,
    alpha: f64,
    inner: f64,
    outer: f64,
}

impl CellTest {
    /// True when no `t` within `radius` of `center` maps into the slab and the annulus.
    fn excludes(&self, center: Complex64, radius: f64) -> bool {
        let (g0, bg) = value_and_bound(&self.g, center, radius);
        if (g0.re - self.level).abs() - bg >= self.alpha {
            return true;
        }
        let (x0, bx) = value_and_bound(&self.x, center, radius);
        let (y0, by) = value_and_bound(&self.y, center, radius);
        let r = (x0.norm_sqr() + y0.norm_sqr()).sqrt();
        let b = (bx * bx + by * by).sqrt();
        r + b < self.inner || r - b > self.outer
    }
}

/// `f(c)` and a bound on `|f(t) − f(c)|` for `|t − c| ≤ r`, from the Taylor
/// expansion at `c`.
fn value_and_bound(coeffs: &[Complex64], c: Complex64, r: f64) -> (Complex64, f64) {
    let mut shifted = coeffs.to_vec();
    let n = shifted.len();
    for k in 0..n {
        for j in (k..n - 1).rev() {
            let next = shifted[j + 1];
            shifted[j] += c * next;
        }
    }
    let mut bound = 0.0;
    let mut rk = 1.0;
    for a in &shifted[1..] {
        rk *= r;
        bound += a.norm() * rk;
    }
    // slack for the rounding in the shift
    (shifted[0], bound * (1.0 + 1e-9) + 1e-14)
}

#[derive(Debug, Clone)]
pub struct SlabDraw {
    pub slab: PointCloud,
    /// Proposals of the full rejection run.
    pub proposals: u64,
    /// Proposals that fell in the slab region and were simulated.
    pub simulated: u64,
    /// `E[M] = T q`.
    pub expected_size: f64,
}

/// Slab points of a uniform sample on `C'` whose size exceeds `min_size` except
/// with probability below `1e-20`.
pub fn draw_slab<R: Rng + ?Sized>(
    sampler: &UniformSampler,
    region: &SlabRegion,
    slice: &SliceFunctional,
    alpha: f64,
    min_size: u64,
    rng: &mut R,
) -> Result<SlabDraw> {
    let q = sampler.acceptance_probability();
    let m = min_size as f64;
    let proposals = ((m + SIZE_HEADROOM * m.sqrt() + SIZE_HEADROOM * SIZE_HEADROOM) / q).ceil();
    if !(proposals < 1e18) {
        return Err(Error::Precondition(format!("sample size {min_size} is too large to simulate")));
    }
    let proposals = proposals as u64;
    let share = (region.area() / sampler.proposal_area()).min(1.0);
    let simulated = if share > 0.0 {
        Binomial::new(proposals, share)
            .map_err(|e| Error::Domain(format!("binomial split: {e}")))?
            .sample(rng)
    } else {
        0
    };
    let mut slab = PointCloud::new(4);
    for _ in 0..simulated {
        let corner = region.corners[rng.gen_range(0..region.corners.len())];
        let t = corner + Complex64::new(rng.gen::<f64>() * region.side, rng.gen::<f64>() * region.side);
        let u: f64 = rng.gen();
        if let Some(t) = sampler.accept(t, u)? {
            let x = sampler.point(t);
            if (slice.complex_value(&x).re - slice.offset).abs() < alpha {
                slab.push(&x)?;
            }
        }
    }
    Ok(SlabDraw {
        slab,
        proposals,
        simulated,
        expected_size: proposals as f64 * q,
    })
}

//! Numerical estimates of the reach-type quantities of `C'`.
//!
//! Probes are laid out on rings `|φ(t) − p| = const` so their ambient spacing is
//! roughly uniform. Tangent spaces come from local PCA over the 8 nearest probes.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{CorpusCurve, ParameterAnnulus};
use crate::error::{Error, Result};
use crate::geometry::{euclidean, AnnulusSpec};
use crate::numfmt;
use crate::pointcloud::PointCloud;
use crate::spatial::GridIndex;

/// Every raw estimate is multiplied by this before it is reported.
pub const SAFETY_FACTOR: f64 = 0.5;
pub const DEFAULT_PROBE_DENSITY: usize = 12;
const PCA_NEIGHBOURS: usize = 8;
/// Graph/ambient distance ratio above which a pair counts against `ρ`.
const GEODESIC_RATIO: f64 = std::f64::consts::FRAC_PI_2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularityData {
    /// Reach of `C'` (after the safety factor).
    #[serde(with = "numfmt")]
    pub tau_m: f64,
    /// Reach of `∂C'`.
    #[serde(with = "numfmt")]
    pub tau_boundary: f64,
    /// Injectivity-radius bound.
    #[serde(with = "numfmt")]
    pub rho_m: f64,
    /// `min{tau_m, tau_boundary, rho_m}`.
    pub delta_m: f64,
    /// Area of `C'`.
    pub volume: f64,
    pub intrinsic_dim: usize,
    pub probe_count: usize,
    pub probe_spacing: f64,
}

impl RegularityData {
    /// Builds the record from already-safe estimates, enforcing the min invariant.
    pub fn new(tau_m: f64, tau_boundary: f64, rho_m: f64, volume: f64) -> Result<Self> {
        let delta_m = tau_m.min(tau_boundary).min(rho_m);
        if !(delta_m > 0.0) || !delta_m.is_finite() || !(volume > 0.0) {
            return Err(Error::Domain(format!(
                "regularity data must be positive and finite: Δ = {delta_m}, Vol = {volume}"
            )));
        }
        Ok(RegularityData {
            tau_m,
            tau_boundary,
            rho_m,
            delta_m,
            volume,
            intrinsic_dim: 2,
            probe_count: 0,
            probe_spacing: 0.0,
        })
    }

    /// The same data for the embedding scaled by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        RegularityData {
            tau_m: self.tau_m * s,
            tau_boundary: self.tau_boundary * s,
            rho_m: self.rho_m * s,
            delta_m: self.delta_m * s,
            volume: self.volume * s.powi(self.intrinsic_dim as i32),
            probe_spacing: self.probe_spacing * s,
            ..self.clone()
        }
    }
}

struct Probes {
    surface: PointCloud,
    boundary: PointCloud,
}

fn ring_probes(domain: &ParameterAnnulus, spacing: f64) -> Result<Probes> {
    let mut surface = PointCloud::new(4);
    let mut boundary = PointCloud::new(4);
    let width = domain.outer - domain.inner;
    let rings = (width / spacing).ceil().max(1.0) as usize;
    for b in 0..domain.branches.len() {
        let center = domain.branches[b];
        for k in 0..=rings {
            let level = domain.inner + width * k as f64 / rings as f64;
            // ring length from a coarse polygon
            const COARSE: usize = 128;
            let mut length = 0.0;
            let mut prev: Option<[f64; 4]> = None;
            let mut first = None;
            for j in 0..COARSE {
                let theta = 2.0 * std::f64::consts::PI * j as f64 / COARSE as f64;
                let rho = domain.radius_at(b, theta, level)?;
                let p = domain.curve.point(center + Complex64::from_polar(rho, theta));
                if let Some(q) = prev {
                    length += euclidean(&p, &q);
                } else {
                    first = Some(p);
                }
                prev = Some(p);
            }
            length += euclidean(&prev.expect("nonempty"), &first.expect("nonempty"));
            let count = ((length / spacing).ceil() as usize).max(8);
            // stagger alternate rings
            let shift = if k % 2 == 0 { 0.0 } else { 0.5 };
            for j in 0..count {
                let theta = 2.0 * std::f64::consts::PI * (j as f64 + shift) / count as f64;
                let rho = domain.radius_at(b, theta, level)?;
                let p = domain.curve.point(center + Complex64::from_polar(rho, theta));
                surface.push(&p)?;
                if k == 0 || k == rings {
                    boundary.push(&p)?;
                }
            }
        }
    }
    Ok(Probes { surface, boundary })
}

/// Orthonormal top-`k` principal directions around each point, `k · d` values per point.
fn tangent_bases(cloud: &PointCloud, grid: &GridIndex, k: usize, max_radius: f64) -> Vec<Vec<f64>> {
    let d = cloud.dim();
    (0..cloud.len())
        .map(|i| {
            let mut idx = grid.nearest(i, PCA_NEIGHBOURS, max_radius);
            idx.push(i);
            let m = idx.len() as f64;
            let mut mean = DVector::<f64>::zeros(d);
            for &j in &idx {
                mean += DVector::from_column_slice(cloud.point(j));
            }
            mean /= m;
            let mut cov = DMatrix::<f64>::zeros(d, d);
            for &j in &idx {
                let v = DVector::from_column_slice(cloud.point(j)) - &mean;
                cov += &v * v.transpose();
            }
            let eig = cov.symmetric_eigen();
            let mut order: Vec<usize> = (0..d).collect();
            order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
            order
                .iter()
                .take(k)
                .flat_map(|&o| eig.eigenvectors.column(o).iter().copied().collect::<Vec<_>>())
                .collect()
        })
        .collect()
}

#[inline]
fn normal_component(v: &[f64], basis: &[f64]) -> f64 {
    let norm2: f64 = v.iter().map(|x| x * x).sum();
    let along: f64 = basis
        .chunks_exact(v.len())
        .map(|e| {
            let c: f64 = e.iter().zip(v).map(|(a, b)| a * b).sum();
            c * c
        })
        .sum();
    (norm2 - along).max(0.0).sqrt()
}

/// Pointwise reach estimate `min ‖q' − q‖² / (2 dist(q' − q, T_q))` over pairs.
///
/// Pairs further apart than twice the running minimum cannot lower it, so the
/// search radius shrinks as the minimum improves. The result is capped at
/// `horizon`: a returned `horizon` means "no smaller value was found".
pub fn pointwise_reach(cloud: &PointCloud, intrinsic_dim: usize, horizon: f64) -> f64 {
    if cloud.len() < PCA_NEIGHBOURS + 1 {
        return horizon;
    }
    let spacing = typical_spacing(cloud);
    let grid = GridIndex::new(cloud, 2.0 * spacing);
    let bases = tangent_bases(cloud, &grid, intrinsic_dim, 2.0 * horizon);
    let mut best = horizon;
    let mut diff = vec![0.0; cloud.dim()];
    let mut visit = |i: usize, radius: f64, best: &mut f64| {
        let q = cloud.point(i);
        grid.for_each_within(q, radius, |j, d2| {
            if j == i || d2 == 0.0 {
                return;
            }
            for (k, (a, b)) in cloud.point(j).iter().zip(q).enumerate() {
                diff[k] = a - b;
            }
            let normal = normal_component(&diff, &bases[i]);
            if normal > 1e-14 * d2.sqrt() {
                let r = d2 / (2.0 * normal);
                if r < *best {
                    *best = r;
                }
            }
        });
    };
    // local pass to get a small radius quickly, then the exhaustive pass
    for i in 0..cloud.len() {
        visit(i, (6.0 * spacing).min(2.0 * best), &mut best);
    }
    for i in 0..cloud.len() {
        let radius = 2.0 * best;
        visit(i, radius, &mut best);
    }
    best
}

/// Median nearest-neighbour distance of a sparse subsample.
fn typical_spacing(cloud: &PointCloud) -> f64 {
    let n = cloud.len();
    let stride = (n / 200).max(1);
    let mut d: Vec<f64> = (0..n)
        .step_by(stride)
        .map(|i| {
            (0..n)
                .filter(|&j| j != i)
                .map(|j| euclidean(cloud.point(i), cloud.point(j)))
                .filter(|&x| x > 0.0)
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    d.sort_by(f64::total_cmp);
    d[d.len() / 2]
}

#[derive(PartialEq)]
struct Frontier(f64, usize);
impl Eq for Frontier {}
impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

/// Smallest ambient distance `< limit` between probe pairs whose graph distance
/// exceeds `GEODESIC_RATIO` times it; `limit` if there is none.
fn injectivity_bound(cloud: &PointCloud, limit: f64) -> f64 {
    let n = cloud.len();
    let spacing = typical_spacing(cloud);
    let grid = GridIndex::new(cloud, 2.0 * spacing);
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for i in 0..n {
        for j in grid.nearest(i, PCA_NEIGHBOURS, limit.max(4.0 * spacing)) {
            let w = euclidean(cloud.point(i), cloud.point(j));
            adj[i].push((j, w));
            adj[j].push((i, w));
        }
    }
    let stride = (n / 4000).max(1);
    let mut dist = vec![f64::INFINITY; n];
    let mut touched: Vec<usize> = Vec::new();
    let mut best = limit;
    for src in (0..n).step_by(stride) {
        let cutoff = GEODESIC_RATIO * best;
        for &t in &touched {
            dist[t] = f64::INFINITY;
        }
        touched.clear();
        let mut heap = BinaryHeap::new();
        dist[src] = 0.0;
        touched.push(src);
        heap.push(Frontier(0.0, src));
        while let Some(Frontier(d, u)) = heap.pop() {
            if d > dist[u] || d > cutoff {
                continue;
            }
            for &(v, w) in &adj[u] {
                let nd = d + w;
                if nd < dist[v] && nd <= cutoff {
                    if dist[v].is_infinite() {
                        touched.push(v);
                    }
                    dist[v] = nd;
                    heap.push(Frontier(nd, v));
                }
            }
        }
        let q = cloud.point(src);
        grid.for_each_within(q, best, |j, d2| {
            let ambient = d2.sqrt();
            if j != src && ambient > 0.0 && dist[j] > GEODESIC_RATIO * ambient && ambient < best {
                best = ambient;
            }
        });
    }
    best
}

/// Numerical `τ`, `τ_∂`, `ρ` (each halved) and the area of `C'`.
///
/// Probe spacing is `ε₀ / probe_density`; the density must exceed 10.
pub fn estimate_regularity(curve: &CorpusCurve, annulus: &AnnulusSpec, probe_density: usize) -> Result<RegularityData> {
    if probe_density <= 10 {
        return Err(Error::Precondition(format!(
            "probe density {probe_density} leaves probe spacing at or above ε₀/10"
        )));
    }
    let domain = ParameterAnnulus::new(curve, annulus)?;
    let spacing = annulus.inner / probe_density as f64;
    let probes = ring_probes(&domain, spacing)?;
    let horizon = annulus.outer;

    let tau_boundary = pointwise_reach(&probes.boundary, 1, horizon);
    // values above τ_∂ cannot change Δ, so the surface search stops there
    let tau_m = pointwise_reach(&probes.surface, 2, tau_boundary);
    // ρ only matters below the two reach values
    let rho_m = injectivity_bound(&probes.surface, tau_m.min(tau_boundary));
    let volume = domain.area()?;

    let mut data = RegularityData::new(
        SAFETY_FACTOR * tau_m,
        SAFETY_FACTOR * tau_boundary,
        SAFETY_FACTOR * rho_m,
        volume,
    )?;
    data.probe_count = probes.surface.len();
    data.probe_spacing = spacing;
    Ok(data)
}

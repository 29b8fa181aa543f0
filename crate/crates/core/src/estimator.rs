//! Slab extraction and single-linkage clustering: the cluster count estimates
//! the multiplicity.

use serde::{Deserialize, Serialize};

use crate::cluster::{self, KdTree};
use crate::corpus::SampleSet;
use crate::error::{Error, Result};
use crate::geometry::{LinkParameters, SliceFunctional};
use crate::numfmt;
use crate::pointcloud::PointCloud;

/// Sample points strictly within `thickness` of `π_ξ⁻¹(δ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SlabSample {
    pub points: PointCloud,
    pub thickness: f64,
    pub slice: SliceFunctional,
}

/// Keeps the points with `|π_ξ(y) − δ| < α`, in their original order.
pub fn extract_slab(points: &PointCloud, slice: &SliceFunctional, alpha: f64) -> Result<SlabSample> {
    if !(alpha > 0.0) {
        return Err(Error::Precondition(format!("slab thickness must be positive, got {alpha}")));
    }
    let dim = slice.base.real_dim();
    if !points.is_empty() && points.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: points.dim(),
        });
    }
    let mut slab = PointCloud::new(dim);
    for p in points.iter() {
        if (slice.complex_value(p).re - slice.offset).abs() < alpha {
            slab.push(p)?;
        }
    }
    Ok(SlabSample {
        points: slab,
        thickness: alpha,
        slice: slice.clone(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterReport {
    /// Indices into the slab; each sorted, ordered by smallest member.
    pub clusters: Vec<Vec<usize>>,
    pub count: usize,
    pub diameters: Vec<f64>,
    pub max_diameter: f64,
    /// Infinite when there are fewer than two clusters.
    pub min_intercluster_gap: f64,
}

impl ClusterReport {
    pub fn cluster_points(&self, slab: &SlabSample, i: usize) -> PointCloud {
        slab.points.select(&self.clusters[i])
    }
}

/// Connected components of the `≤ threshold` distance graph on the slab.
pub fn single_linkage_clusters(slab: &SlabSample, threshold: f64) -> Result<ClusterReport> {
    cluster_cloud(&slab.points, threshold)
}

pub fn cluster_cloud(points: &PointCloud, threshold: f64) -> Result<ClusterReport> {
    cluster_owned(points.clone(), threshold)
}

/// As [`cluster_cloud`], reusing the cloud's storage for the search tree.
pub fn cluster_owned(points: PointCloud, threshold: f64) -> Result<ClusterReport> {
    if !(threshold > 0.0) {
        return Err(Error::Precondition(format!("clustering threshold must be positive, got {threshold}")));
    }
    let tree = KdTree::from_cloud(points);
    let clusters = cluster::components(&tree, threshold);
    let diameters = cluster::diameters(&tree, &clusters);
    let min_intercluster_gap = cluster::min_gap(&tree, &clusters);
    Ok(ClusterReport {
        count: clusters.len(),
        max_diameter: diameters.iter().copied().fold(0.0, f64::max),
        diameters,
        min_intercluster_gap,
        clusters,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateMode {
    /// Ground-truth separation `μ` is known.
    Corpus,
    /// Only the slice and thickness are known.
    Blind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub size: usize,
    pub diameter: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub mode: EstimateMode,
    pub curve_id: Option<String>,
    pub seed: Option<u64>,
    /// Size of the sample the slab was taken from.
    pub sample_size: u64,
    pub slice: SliceFunctional,
    pub thickness: f64,
    pub threshold: f64,
    pub parameters: Option<LinkParameters>,
    pub slab_size: usize,
    /// `ê`, the number of clusters.
    pub estimate: usize,
    pub clusters: Vec<ClusterSummary>,
    pub max_diameter: f64,
    #[serde(with = "numfmt")]
    pub min_intercluster_gap: f64,
    /// Every cluster has diameter at most `2α`.
    pub diameters_ok: bool,
    /// Clusters are more than `μ − 2α` apart; unknown in blind mode.
    pub gaps_ok: Option<bool>,
    pub well_separated: bool,
}

/// Where the sample came from, echoed into the report.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Provenance {
    pub curve_id: Option<String>,
    pub seed: Option<u64>,
}

/// Clusters a slab already extracted at thickness `params.thickness`.
pub fn estimate_from_slab(
    slab: SlabSample,
    sample_size: u64,
    params: Option<&LinkParameters>,
    provenance: Provenance,
) -> Result<EstimateReport> {
    if let Some(p) = params {
        p.validate().into_result()?;
    }
    let alpha = slab.thickness;
    let threshold = 2.0 * alpha;
    let slab_size = slab.points.len();
    let report = cluster_owned(slab.points, threshold)?;
    let diameters_ok = report.max_diameter <= threshold;
    // With a single cluster there is no pair to separate.
    let gaps_ok = params.map(|p| report.count < 2 || report.min_intercluster_gap > p.link.min_pairwise - threshold);
    Ok(EstimateReport {
        mode: if params.is_some() { EstimateMode::Corpus } else { EstimateMode::Blind },
        curve_id: provenance.curve_id,
        seed: provenance.seed,
        sample_size,
        slice: slab.slice,
        thickness: alpha,
        threshold,
        parameters: params.cloned(),
        slab_size,
        estimate: report.count,
        clusters: report
            .clusters
            .iter()
            .zip(&report.diameters)
            .map(|(c, &d)| ClusterSummary { size: c.len(), diameter: d })
            .collect(),
        max_diameter: report.max_diameter,
        min_intercluster_gap: report.min_intercluster_gap,
        diameters_ok,
        gaps_ok,
        well_separated: diameters_ok && gaps_ok.unwrap_or(true),
    })
}

/// Slab at `α`, single linkage at `2α`, `ê` = number of clusters.
pub fn estimate_multiplicity(sample: &SampleSet, params: &LinkParameters) -> Result<EstimateReport> {
    params.validate().into_result()?;
    let slab = extract_slab(&sample.points, &params.slice, params.thickness)?;
    estimate_from_slab(
        slab,
        sample.len() as u64,
        Some(params),
        Provenance {
            curve_id: Some(sample.curve_id.clone()),
            seed: Some(sample.seed),
        },
    )
}

/// Blind mode: no separation data, so only the diameter condition is checked.
pub fn estimate_blind(points: &PointCloud, slice: &SliceFunctional, alpha: f64) -> Result<EstimateReport> {
    let slab = extract_slab(points, slice, alpha)?;
    estimate_from_slab(slab, points.len() as u64, None, Provenance::default())
}

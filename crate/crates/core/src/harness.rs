//! Seeded Monte Carlo runs of the slab estimator against certified ground truth.

use std::io::Write;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bound::{sample_size_bound, BoundQuery};
use crate::corpus::{self, draw_slab, estimate_regularity, CorpusCurve, RegularityData, SlabRegion, UniformSampler};
use crate::error::{Error, Result};
use crate::estimator::{estimate_from_slab, extract_slab, EstimateReport, Provenance, SlabSample};
use crate::geometry::{random_unit_direction, AnnulusSpec, LinkParameters, SliceFunctional};
use crate::numfmt;
use crate::oracle::{certify, MultiplicityCertificate};

/// Samples up to this size are drawn point by point; larger ones through the slab region.
pub const DIRECT_LIMIT: u64 = 2_000_000;
const SLICE_REDRAWS: usize = 2048;
/// Seeded slices compared when fixing the plan's reference slice.
pub const REFERENCE_CANDIDATES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaPolicy {
    Explicit(f64),
    /// Fraction of `min{ε−δ, δ−ε₀, μ/4, κ, Δ/2}` for the reference slice.
    Fraction(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SizePolicy {
    /// `N + 1` points.
    Bound,
    /// `⌊m · N⌋ + 1` points.
    Multiplier(f64),
}

impl SizePolicy {
    pub fn multiplier(self) -> f64 {
        match self {
            SizePolicy::Bound => 1.0,
            SizePolicy::Multiplier(m) => m,
        }
    }

    /// Number of points a trial draws for bound `n`.
    pub fn sample_size(self, n: u64) -> u64 {
        match self {
            SizePolicy::Bound => n + 1,
            SizePolicy::Multiplier(m) => (m * n as f64).floor() as u64 + 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialPlan {
    pub curve_id: String,
    pub annulus: AnnulusSpec,
    /// Slice offset `δ`; `ε/4` when absent.
    pub offset: Option<f64>,
    pub gamma: f64,
    pub alpha_policy: AlphaPolicy,
    pub trial_count: usize,
    pub base_seed: u64,
    pub size_policy: SizePolicy,
    pub probe_density: usize,
}

impl TrialPlan {
    pub fn offset(&self) -> f64 {
        self.offset.unwrap_or(self.annulus.outer / 4.0)
    }

    pub fn check(&self) -> Result<()> {
        if self.trial_count == 0 {
            return Err(Error::Precondition("trial count must be at least 1".into()));
        }
        if let AlphaPolicy::Fraction(f) = self.alpha_policy {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::Precondition(format!("alpha fraction must lie in (0, 1), got {f}")));
            }
        }
        if let AlphaPolicy::Explicit(a) = self.alpha_policy {
            if !(a > 0.0) {
                return Err(Error::Precondition(format!("alpha must be positive, got {a}")));
            }
        }
        if let SizePolicy::Multiplier(m) = self.size_policy {
            if !(m > 0.0 && m.is_finite()) {
                return Err(Error::Precondition(format!("size multiplier must be positive, got {m}")));
            }
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::Precondition(format!("γ must lie in (0, 1), got {}", self.gamma)));
        }
        let delta = self.offset();
        if !(delta > self.annulus.inner && delta < self.annulus.outer) {
            return Err(Error::Precondition(format!(
                "offset δ = {delta} must lie strictly between ε₀ = {} and ε = {}",
                self.annulus.inner, self.annulus.outer
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub index: usize,
    pub seed: u64,
    /// Slices rejected before this one (degenerate or violating the α bound).
    pub slice_redraws: usize,
    /// Rejection proposals behind the sample; zero for direct draws.
    pub proposals: u64,
    pub report: EstimateReport,
    pub count_correct: bool,
    pub success: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub plan: TrialPlan,
    pub certificate: MultiplicityCertificate,
    pub regularity: RegularityData,
    pub alpha: f64,
    #[serde(rename = "n_used")]
    pub n_used: u64,
    /// Every trial's sample has more points than this.
    pub sample_size: u64,
    pub successes: usize,
    pub failures: usize,
    pub success_rate: f64,
    /// Share of trials with the right cluster count, ignoring the separation flag.
    pub count_rate: f64,
    #[serde(with = "numfmt")]
    pub mean_max_diameter: f64,
    pub trials: Vec<TrialRecord>,
}

/// Plan-level quantities shared by all trials.
pub struct Prepared {
    pub curve: CorpusCurve,
    pub certificate: MultiplicityCertificate,
    pub regularity: RegularityData,
    /// Reference slice at thickness `alpha`.
    pub reference: LinkParameters,
    pub alpha: f64,
    pub n: u64,
    sampler: UniformSampler,
}

/// Certifies a slice, or `None` when it is not usable at this annulus.
fn usable_slice(
    curve: &CorpusCurve,
    plan: &TrialPlan,
    rng: &mut ChaCha8Rng,
) -> Result<Option<(SliceFunctional, MultiplicityCertificate)>> {
    let xi = random_unit_direction(rng, 2);
    let slice = SliceFunctional::new(curve.base_point.clone(), xi, plan.offset())?;
    match certify(curve, &slice, &plan.annulus) {
        Ok(cert) => Ok(Some((slice, cert))),
        Err(Error::Degenerate(_) | Error::NonConvergence { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

fn link_parameters(plan: &TrialPlan, slice: SliceFunctional, cert: &MultiplicityCertificate, delta_m: f64, alpha: f64) -> LinkParameters {
    LinkParameters {
        slice,
        annulus: plan.annulus.clone(),
        thickness: alpha,
        regularity: delta_m,
        link: cert.link_points.clone(),
    }
}

/// The certified slice of median admissible slab width among the seeded
/// candidates, so that a fresh generic slice admits its `α` about half the time.
fn reference_slice(plan: &TrialPlan, curve: &CorpusCurve, delta_m: f64) -> Result<(LinkParameters, MultiplicityCertificate)> {
    let mut rng = ChaCha8Rng::seed_from_u64(plan.base_seed);
    rng.set_stream(1);
    let mut candidates: Vec<(LinkParameters, MultiplicityCertificate)> = Vec::new();
    for _ in 0..SLICE_REDRAWS {
        if candidates.len() == REFERENCE_CANDIDATES {
            break;
        }
        let Some((slice, cert)) = usable_slice(curve, plan, &mut rng)? else {
            continue;
        };
        if cert.value() != curve.true_multiplicity {
            return Err(Error::OracleDisagreement {
                curve: curve.id.clone(),
                order: cert.order_of_vanishing,
                lambda0: cert.lambda0,
                link: cert.link_cardinality,
            });
        }
        candidates.push((link_parameters(plan, slice, &cert, delta_m, 0.0), cert));
    }
    if candidates.is_empty() {
        return Err(Error::Degenerate(format!("no certified slice of `{}` at δ = {}", curve.id, plan.offset())));
    }
    candidates.sort_by(|a, b| a.0.thickness_bound().total_cmp(&b.0.thickness_bound()));
    let mid = candidates.len() / 2;
    Ok(candidates.swap_remove(mid))
}

/// Certifies the curve, estimates `Δ`, fixes `α` and computes `N`.
pub fn prepare(plan: &TrialPlan) -> Result<Prepared> {
    plan.check()?;
    let curve = corpus::find_curve(&plan.curve_id)?;
    let regularity = estimate_regularity(&curve, &plan.annulus, plan.probe_density)?;
    let (reference, certificate) = reference_slice(plan, &curve, regularity.delta_m)?;
    let alpha = match plan.alpha_policy {
        AlphaPolicy::Explicit(a) => a,
        AlphaPolicy::Fraction(f) => f * reference.thickness_bound(),
    };
    let reference = reference.with_thickness(alpha);
    reference.validate().into_result()?;
    let n = sample_size_bound(&BoundQuery::new(alpha, plan.gamma, regularity.clone())?)?;
    let sampler = UniformSampler::new(&curve, &plan.annulus)?;
    Ok(Prepared {
        curve,
        certificate,
        regularity,
        reference,
        alpha,
        n,
        sampler,
    })
}

/// Fresh generic slice for one trial: re-drawn until it certifies and admits
/// the plan's `α`.
fn trial_parameters(plan: &TrialPlan, prep: &Prepared, rng: &mut ChaCha8Rng) -> Result<(LinkParameters, usize)> {
    for redraw in 0..SLICE_REDRAWS {
        let Some((slice, cert)) = usable_slice(&prep.curve, plan, rng)? else {
            continue;
        };
        let params = link_parameters(plan, slice, &cert, prep.regularity.delta_m, prep.alpha);
        if params.validate().is_ok() {
            return Ok((params, redraw));
        }
    }
    Err(Error::Degenerate(format!(
        "no slice admitting α = {} found in {SLICE_REDRAWS} draws",
        prep.alpha
    )))
}

/// Slab of trial `index` before clustering.
pub struct TrialSlab {
    pub index: usize,
    pub seed: u64,
    pub params: LinkParameters,
    pub slice_redraws: usize,
    /// Points in the full sample.
    pub sample_size: u64,
    pub proposals: u64,
    pub slab: SlabSample,
}

pub fn trial_slab(plan: &TrialPlan, prep: &Prepared, index: usize) -> Result<TrialSlab> {
    let seed = plan.base_seed.wrapping_add(index as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (params, slice_redraws) = trial_parameters(plan, prep, &mut rng)?;
    let size = plan.size_policy.sample_size(prep.n);
    let (slab, proposals) = if size <= DIRECT_LIMIT {
        let points = prep.sampler.draw(&mut rng, size as usize)?;
        (extract_slab(&points, &params.slice, prep.alpha)?, 0)
    } else {
        let region = SlabRegion::new(&prep.sampler, &params.slice, prep.alpha)?;
        let draw = draw_slab(&prep.sampler, &region, &params.slice, prep.alpha, size - 1, &mut rng)?;
        let slab = SlabSample {
            points: draw.slab,
            thickness: prep.alpha,
            slice: params.slice.clone(),
        };
        (slab, draw.proposals)
    };
    Ok(TrialSlab {
        index,
        seed,
        params,
        slice_redraws,
        sample_size: size,
        proposals,
        slab,
    })
}

/// Runs trial `index` of the plan.
pub fn run_trial(plan: &TrialPlan, prep: &Prepared, index: usize) -> Result<TrialRecord> {
    let t = trial_slab(plan, prep, index)?;
    let report = estimate_from_slab(
        t.slab,
        t.sample_size,
        Some(&t.params),
        Provenance {
            curve_id: Some(prep.curve.id.clone()),
            seed: Some(t.seed),
        },
    )?;
    let count_correct = report.estimate == prep.certificate.value();
    Ok(TrialRecord {
        index,
        seed: t.seed,
        slice_redraws: t.slice_redraws,
        proposals: t.proposals,
        success: count_correct && report.well_separated,
        count_correct,
        report,
    })
}

/// Runs every trial; `threads` only changes scheduling, never the result.
pub fn run_trials(plan: &TrialPlan, threads: usize) -> Result<TrialSummary> {
    let prep = prepare(plan)?;
    run_prepared(plan, &prep, threads)
}

pub fn run_prepared(plan: &TrialPlan, prep: &Prepared, threads: usize) -> Result<TrialSummary> {
    let threads = threads.clamp(1, plan.trial_count);
    let mut records: Vec<TrialRecord> = if threads == 1 {
        (0..plan.trial_count)
            .map(|i| run_trial(plan, prep, i))
            .collect::<Result<_>>()?
    } else {
        let results: Vec<Result<Vec<TrialRecord>>> = std::thread::scope(|s| {
            let handles: Vec<_> = (0..threads)
                .map(|k| {
                    s.spawn(move || {
                        (k..plan.trial_count)
                            .step_by(threads)
                            .map(|i| run_trial(plan, prep, i))
                            .collect::<Result<Vec<_>>>()
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("trial worker panicked"))
                .collect()
        });
        let mut all = Vec::with_capacity(plan.trial_count);
        for r in results {
            all.extend(r?);
        }
        all
    };
    records.sort_by_key(|r| r.index);
    Ok(summarize(plan, prep, records))
}

fn summarize(plan: &TrialPlan, prep: &Prepared, trials: Vec<TrialRecord>) -> TrialSummary {
    let total = trials.len();
    let successes = trials.iter().filter(|t| t.success).count();
    let counted = trials.iter().filter(|t| t.count_correct).count();
    let mean_max_diameter = trials.iter().map(|t| t.report.max_diameter).sum::<f64>() / total as f64;
    TrialSummary {
        plan: plan.clone(),
        certificate: prep.certificate.clone(),
        regularity: prep.regularity.clone(),
        alpha: prep.alpha,
        n_used: prep.n,
        sample_size: plan.size_policy.sample_size(prep.n) - 1,
        successes,
        failures: total - successes,
        success_rate: successes as f64 / total as f64,
        count_rate: counted as f64 / total as f64,
        mean_max_diameter,
        trials,
    }
}

/// Report encodings written by [`emit_report`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    TrialCsv,
    PlotCsv,
}

pub const TRIAL_CSV_HEADER: [&str; 12] = [
    "trial",
    "seed",
    "sample_size",
    "slab_size",
    "estimate",
    "expected",
    "max_diameter",
    "min_intercluster_gap",
    "diameters_ok",
    "gaps_ok",
    "count_correct",
    "success",
];

pub const PLOT_CSV_HEADER: [&str; 4] = ["multiplier", "success_rate", "trial_count", "curve_id"];

pub fn emit_report(summary: &TrialSummary, format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Json => to_json(summary),
        ReportFormat::TrialCsv => trial_csv(summary),
        ReportFormat::PlotCsv => plot_csv(std::slice::from_ref(summary)),
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::Format(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn parse_summary(text: &str) -> Result<TrialSummary> {
    serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))
}

fn csv_text(rows: Vec<Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.write_record(&r).map_err(|e| Error::Format(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
}

fn trial_csv(summary: &TrialSummary) -> Result<String> {
    let mut rows = vec![TRIAL_CSV_HEADER.iter().map(|s| s.to_string()).collect()];
    for t in &summary.trials {
        let r = &t.report;
        rows.push(vec![
            t.index.to_string(),
            t.seed.to_string(),
            r.sample_size.to_string(),
            r.slab_size.to_string(),
            r.estimate.to_string(),
            summary.certificate.value().to_string(),
            r.max_diameter.to_string(),
            r.min_intercluster_gap.to_string(),
            r.diameters_ok.to_string(),
            r.gaps_ok.map_or("".into(), |g| g.to_string()),
            t.count_correct.to_string(),
            t.success.to_string(),
        ]);
    }
    csv_text(rows)
}

/// Success rate against sample-size multiplier, one row per summary.
pub fn plot_csv(summaries: &[TrialSummary]) -> Result<String> {
    let mut rows = vec![PLOT_CSV_HEADER.iter().map(|s| s.to_string()).collect()];
    for s in summaries {
        rows.push(vec![
            s.plan.size_policy.multiplier().to_string(),
            s.success_rate.to_string(),
            s.trials.len().to_string(),
            s.plan.curve_id.clone(),
        ]);
    }
    csv_text(rows)
}

/// Writes `text` to `path`, naming the path in any error.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

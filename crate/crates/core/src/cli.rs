//! Command-line front end.
//!
//! Settings resolve as flags, then the `--config` file, then built-in defaults.
//! The config file is JSON with the same field names as the flags.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bound::{sample_size_real, BoundQuery};
use crate::corpus::{self, sample_uniform, RegularityData};
use crate::error::{Error, Result};
use crate::estimator::{estimate_blind, estimate_from_slab, EstimateReport, Provenance};
use crate::geometry::{random_unit_direction, AnnulusSpec, ChartPoint, SliceFunctional};
use crate::harness::{self, AlphaPolicy, ReportFormat, SizePolicy, TrialPlan};
use crate::oracle::{certify, MultiplicityCertificate};
use crate::pointcloud::PointCloud;

/// Names the default output directory when `--out` is absent.
pub const OUT_DIR_ENV: &str = "CURVEMULT_OUT_DIR";

pub const DEFAULT_OUTER: f64 = 0.5;
pub const DEFAULT_INNER: f64 = 0.05;
pub const DEFAULT_GAMMA: f64 = 0.1;
pub const DEFAULT_ALPHA_FRACTION: f64 = 0.9;
pub const DEFAULT_PROBE_DENSITY: usize = 12;

#[derive(Debug, Parser)]
#[command(name = "curvemult", version, about = "Multiplicity of a point on a complex curve from uniform samples")]
pub struct Cli {
    /// Worker threads for trial runs; never changes the output.
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,

    /// JSON file with default settings.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample-size bound N and the regularity data behind it.
    Bound(Settings),
    /// Cluster one slab and report the multiplicity estimate.
    Estimate(Settings),
    /// Seeded Monte Carlo run of the estimator.
    Trials(Settings),
    /// Exact multiplicity by three independent computations.
    Certify(Settings),
    /// Uniform sample of a corpus curve, written as CSV.
    Sample(Settings),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    Plot,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    /// Corpus curve id.
    #[arg(long, conflicts_with = "input")]
    pub curve: Option<String>,
    /// Point-cloud CSV for blind estimation.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Outer radius ε.
    #[arg(long)]
    pub eps: Option<f64>,
    /// Inner radius ε₀.
    #[arg(long)]
    pub eps0: Option<f64>,
    /// Slice offset δ (default ε/4).
    #[arg(long)]
    pub delta: Option<f64>,
    /// Failure probability γ of the bound (default 0.1).
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Slab thickness; overrides --alpha-fraction.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Fraction of the thickness bound used as α.
    #[arg(long)]
    pub alpha_fraction: Option<f64>,
    /// Base seed; trial i uses seed + i.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of trials (default 100).
    #[arg(long)]
    pub trials: Option<usize>,
    /// Sample-size multiplier m: trials draw ⌊m·N⌋ + 1 points.
    #[arg(long)]
    pub multiplier: Option<f64>,
    /// Explicit point count, for `sample`.
    #[arg(long)]
    pub count: Option<usize>,
    /// Slice direction as `re0,im0,re1,im1` (blind mode).
    #[arg(long, value_delimiter = ',', num_args = 1.., allow_hyphen_values = true)]
    pub xi: Option<Vec<f64>>,
    /// Base point as `re0,im0,re1,im1` (blind mode; origin by default).
    #[arg(long, value_delimiter = ',', num_args = 1.., allow_hyphen_values = true)]
    pub base: Option<Vec<f64>>,
    /// Regularity probes per ε₀ of arc length (default 12, must exceed 10).
    #[arg(long)]
    pub probe_density: Option<usize>,
    /// Report format for `trials`.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Output file; otherwise $CURVEMULT_OUT_DIR or stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the clustered slab points as CSV.
    #[arg(long)]
    pub export: Option<PathBuf>,
}

impl Settings {
    /// Fills unset fields from `other`.
    pub fn or(self, other: Settings) -> Settings {
        Settings {
            curve: self.curve.or(other.curve),
            input: self.input.or(other.input),
            eps: self.eps.or(other.eps),
            eps0: self.eps0.or(other.eps0),
            delta: self.delta.or(other.delta),
            gamma: self.gamma.or(other.gamma),
            alpha: self.alpha.or(other.alpha),
            alpha_fraction: self.alpha_fraction.or(other.alpha_fraction),
            seed: self.seed.or(other.seed),
            trials: self.trials.or(other.trials),
            multiplier: self.multiplier.or(other.multiplier),
            count: self.count.or(other.count),
            xi: self.xi.or(other.xi),
            base: self.base.or(other.base),
            probe_density: self.probe_density.or(other.probe_density),
            format: self.format.or(other.format),
            out: self.out.or(other.out),
            export: self.export.or(other.export),
        }
    }

    pub fn load(path: &Path) -> Result<Settings> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
    }

    fn curve_id(&self) -> Result<String> {
        self.curve
            .clone()
            .ok_or_else(|| Error::Precondition("--curve is required".into()))
    }

    fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    fn annulus(&self, center: ChartPoint) -> Result<AnnulusSpec> {
        AnnulusSpec::new(center, self.eps.unwrap_or(DEFAULT_OUTER), self.eps0.unwrap_or(DEFAULT_INNER))
    }

    fn plan(&self, trial_count: usize) -> Result<TrialPlan> {
        let curve = corpus::find_curve(&self.curve_id()?)?;
        let alpha_policy = match self.alpha {
            Some(a) => AlphaPolicy::Explicit(a),
            None => AlphaPolicy::Fraction(self.alpha_fraction.unwrap_or(DEFAULT_ALPHA_FRACTION)),
        };
        Ok(TrialPlan {
            curve_id: curve.id.clone(),
            annulus: self.annulus(curve.base_point.clone())?,
            offset: self.delta,
            gamma: self.gamma.unwrap_or(DEFAULT_GAMMA),
            alpha_policy,
            trial_count,
            base_seed: self.seed(),
            size_policy: self.multiplier.map_or(SizePolicy::Bound, SizePolicy::Multiplier),
            probe_density: self.probe_density.unwrap_or(DEFAULT_PROBE_DENSITY),
        })
    }
}

/// Output of `bound`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub curve_id: String,
    pub seed: u64,
    pub annulus: AnnulusSpec,
    pub offset: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub thickness_bound: f64,
    /// `N` evaluated at `r = α`.
    pub radius: f64,
    pub n: u64,
    pub n_real: f64,
    pub regularity: RegularityData,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertifyReport {
    pub seed: u64,
    pub slice: SliceFunctional,
    pub agree: bool,
    pub certificate: MultiplicityCertificate,
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e, Error::Degenerate(_) | Error::OracleDisagreement { .. }) {
                eprintln!("hint: try another --seed");
            }
            e.exit_code()
        }
    }
}

pub fn execute(cli: Cli) -> Result<()> {
    let file = match &cli.config {
        Some(p) => Settings::load(p)?,
        None => Settings::default(),
    };
    let threads = cli.threads.max(1);
    match cli.command {
        Command::Bound(s) => cmd_bound(&s.or(file)),
        Command::Estimate(s) => cmd_estimate(&s.or(file)),
        Command::Trials(s) => cmd_trials(&s.or(file), threads),
        Command::Certify(s) => cmd_certify(&s.or(file)),
        Command::Sample(s) => cmd_sample(&s.or(file)),
    }
}

fn check_gamma(s: &Settings) -> Result<()> {
    let g = s.gamma.unwrap_or(DEFAULT_GAMMA);
    if !(g > 0.0 && g < 1.0) {
        return Err(Error::Precondition(format!("γ must lie in (0, 1), got {g}")));
    }
    Ok(())
}

pub fn cmd_bound(s: &Settings) -> Result<()> {
    check_gamma(s)?;
    let plan = s.plan(1)?;
    let prep = harness::prepare(&plan)?;
    let query = BoundQuery::new(prep.alpha, plan.gamma, prep.regularity.clone())?;
    let report = BoundReport {
        curve_id: plan.curve_id.clone(),
        seed: plan.base_seed,
        annulus: plan.annulus.clone(),
        offset: plan.offset(),
        gamma: plan.gamma,
        alpha: prep.alpha,
        thickness_bound: prep.reference.thickness_bound(),
        radius: prep.alpha,
        n: prep.n,
        n_real: sample_size_real(&query)?,
        regularity: prep.regularity.clone(),
    };
    emit(s, "bound", &plan.curve_id, &harness::to_json(&report)?)
}

fn parse_point(values: &[f64], what: &str) -> Result<Vec<Complex64>> {
    if values.len() != 4 {
        return Err(Error::Precondition(format!(
            "--{what} takes 4 comma-separated reals, got {}",
            values.len()
        )));
    }
    Ok(values.chunks(2).map(|c| Complex64::new(c[0], c[1])).collect())
}

pub fn cmd_estimate(s: &Settings) -> Result<()> {
    let report = match (&s.curve, &s.input) {
        (Some(_), None) => estimate_corpus(s)?,
        (None, Some(path)) => estimate_input(s, path)?,
        _ => return Err(Error::Precondition("give exactly one of --curve and --input".into())),
    };
    let name = report.curve_id.clone().unwrap_or_else(|| "blind".into());
    emit(s, "estimate", &name, &harness::to_json(&report)?)
}

fn estimate_corpus(s: &Settings) -> Result<EstimateReport> {
    check_gamma(s)?;
    let plan = s.plan(1)?;
    let prep = harness::prepare(&plan)?;
    let t = harness::trial_slab(&plan, &prep, 0)?;
    if let Some(path) = &s.export {
        t.slab.points.save_csv(path)?;
    }
    estimate_from_slab(
        t.slab,
        t.sample_size,
        Some(&t.params),
        Provenance {
            curve_id: Some(plan.curve_id.clone()),
            seed: Some(t.seed),
        },
    )
}

fn estimate_input(s: &Settings, path: &Path) -> Result<EstimateReport> {
    let (Some(alpha), Some(delta), Some(xi)) = (s.alpha, s.delta, s.xi.as_ref()) else {
        return Err(Error::Precondition("blind mode needs --alpha, --delta and --xi".into()));
    };
    let base = match &s.base {
        Some(b) => ChartPoint::from_complex(&parse_point(b, "base")?),
        None => ChartPoint::origin(2),
    };
    let slice = SliceFunctional::new(base, parse_point(xi, "xi")?, delta)?;
    let points = PointCloud::load_csv(path)?;
    let mut report = estimate_blind(&points, &slice, alpha)?;
    report.seed = s.seed;
    Ok(report)
}

pub fn cmd_trials(s: &Settings, threads: usize) -> Result<()> {
    check_gamma(s)?;
    let plan = s.plan(s.trials.unwrap_or(100))?;
    plan.check()?;
    let summary = harness::run_trials(&plan, threads)?;
    let (format, ext) = match s.format.unwrap_or(Format::Json) {
        Format::Json => (ReportFormat::Json, "json"),
        Format::Csv => (ReportFormat::TrialCsv, "csv"),
        Format::Plot => (ReportFormat::PlotCsv, "plot.csv"),
    };
    let text = harness::emit_report(&summary, format)?;
    emit_ext(s, "trials", &plan.curve_id, ext, &text)
}

pub fn cmd_certify(s: &Settings) -> Result<()> {
    let curve = corpus::find_curve(&s.curve_id()?)?;
    let annulus = s.annulus(curve.base_point.clone())?;
    let seed = s.seed();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let delta = s.delta.unwrap_or(annulus.outer / 4.0);
    let slice = SliceFunctional::new(curve.base_point.clone(), random_unit_direction(&mut rng, 2), delta)?;
    let certificate = certify(&curve, &slice, &annulus)?;
    let report = CertifyReport {
        seed,
        slice,
        agree: true,
        certificate,
    };
    emit(s, "certify", &curve.id, &harness::to_json(&report)?)
}

pub fn cmd_sample(s: &Settings) -> Result<()> {
    let curve = corpus::find_curve(&s.curve_id()?)?;
    let annulus = s.annulus(curve.base_point.clone())?;
    let count = s.count.ok_or_else(|| Error::Precondition("--count is required".into()))?;
    let set = sample_uniform(&curve, &annulus, count, s.seed())?;
    let mut buf = Vec::new();
    set.points.write_csv(&mut buf)?;
    let text = String::from_utf8(buf).map_err(|e| Error::Format(e.to_string()))?;
    emit_ext(s, "sample", &curve.id, "csv", &text)
}

fn emit(s: &Settings, command: &str, name: &str, text: &str) -> Result<()> {
    emit_ext(s, command, name, "json", text)
}

/// Writes to `--out`, else into `$CURVEMULT_OUT_DIR`, else to stdout.
fn emit_ext(s: &Settings, command: &str, name: &str, ext: &str, text: &str) -> Result<()> {
    let path = match (&s.out, std::env::var_os(OUT_DIR_ENV)) {
        (Some(p), _) => Some(p.clone()),
        (None, Some(dir)) => Some(PathBuf::from(dir).join(format!("{command}-{name}-{}.{ext}", s.seed()))),
        (None, None) => None,
    };
    match path {
        Some(p) => harness::write_text(&p, text),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).map_err(|e| Error::io("<stdout>", e))
        }
    }
}

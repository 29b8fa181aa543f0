//! Sample size sufficient for an `r`-dense uniform sample of a manifold with boundary.

use serde::{Deserialize, Serialize};

use crate::corpus::RegularityData;
use crate::error::{Error, Result};
use crate::specialfn::{ball_volume, regularized_incomplete_beta, BetaArgs};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundQuery {
    pub radius: f64,
    /// Failure probability `γ`.
    pub confidence_gap: f64,
    pub regularity: RegularityData,
}

impl BoundQuery {
    pub fn new(radius: f64, confidence_gap: f64, regularity: RegularityData) -> Result<Self> {
        let q = BoundQuery {
            radius,
            confidence_gap,
            regularity,
        };
        q.check()?;
        Ok(q)
    }

    fn check(&self) -> Result<()> {
        let half = self.regularity.delta_m / 2.0;
        if !(self.radius > 0.0 && self.radius < half) {
            return Err(Error::Precondition(format!(
                "density radius r = {} must lie in (0, Δ/2) = (0, {half})",
                self.radius
            )));
        }
        if !(self.confidence_gap > 0.0 && self.confidence_gap < 1.0) {
            return Err(Error::Precondition(format!(
                "confidence gap γ = {} must lie in (0, 1)",
                self.confidence_gap
            )));
        }
        Ok(())
    }
}

/// `β_M(x) = Vol / [(cos^k θ / 2^{k+1}) · I_y((k+1)/2, 1/2) · Vol(B^k_x)]`,
/// with `θ = asin(x / 4Δ)` and `y = 1 − x² cos²θ / 16Δ²`.
pub fn beta_m(regularity: &RegularityData, x: f64) -> Result<f64> {
    let k = regularity.intrinsic_dim;
    let delta = regularity.delta_m;
    let s = x / (4.0 * delta);
    if !(x > 0.0) || !(s <= 1.0) {
        return Err(Error::Domain(format!(
            "β_M needs 0 < x ≤ 4Δ, got x = {x} with Δ = {delta}"
        )));
    }
    let theta = s.asin();
    let cos = theta.cos();
    let y = (1.0 - x * x * cos * cos / (16.0 * delta * delta)).clamp(0.0, 1.0);
    let ib = regularized_incomplete_beta(BetaArgs::new(y, (k as f64 + 1.0) / 2.0, 0.5)?)?;
    let denom = cos.powi(k as i32) / 2f64.powi(k as i32 + 1) * ib * ball_volume(k, x)?;
    Ok(regularity.volume / denom)
}

/// `N = ⌈β_M(r) · [β_M(r/2) + ln(1/γ)]⌉`.
pub fn sample_size_bound(query: &BoundQuery) -> Result<u64> {
    query.check()?;
    let value = sample_size_real(query)?;
    if !value.is_finite() || value >= u64::MAX as f64 {
        return Err(Error::Domain(format!("sample size bound overflows: {value}")));
    }
    Ok(value.ceil() as u64)
}

/// The bound before rounding.
pub fn sample_size_real(query: &BoundQuery) -> Result<f64> {
    let r = query.radius;
    let g = &query.regularity;
    Ok(beta_m(g, r)? * (beta_m(g, r / 2.0)? + (1.0 / query.confidence_gap).ln()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reg(vol: f64, delta: f64) -> RegularityData {
        RegularityData::new(delta, delta, delta, vol).unwrap()
    }

    #[test]
    fn small_radius_limit() {
        let g = reg(4.0 * std::f64::consts::PI, 1.0);
        // cos θ → 1 and I_y → 1, leaving Vol / (π x² / 8)
        let limit = 4.0 * std::f64::consts::PI / (0.125 * std::f64::consts::PI);
        let v = beta_m(&g, 1e-6).unwrap() * 1e-12;
        assert!((v - limit).abs() < 1e-6 * limit, "{v} vs {limit}");
    }

    #[test]
    fn decreasing_in_x() {
        let g = reg(2.0, 0.5);
        let mut prev = f64::INFINITY;
        for i in 1..100 {
            let x = i as f64 * 0.01;
            let b = beta_m(&g, x).unwrap();
            assert!(b < prev);
            prev = b;
        }
    }

    #[test]
    fn radius_precondition() {
        let g = reg(1.0, 0.2);
        assert!(BoundQuery::new(0.1, 0.1, g.clone()).is_err());
        assert!(BoundQuery::new(0.05, 1.0, g.clone()).is_err());
        let q = BoundQuery::new(0.05, 0.1, g).unwrap();
        assert!(sample_size_bound(&q).unwrap() > 0);
    }

    #[test]
    fn scale_invariant() {
        let g = reg(0.7, 0.3);
        let q = BoundQuery::new(0.04, 0.1, g.clone()).unwrap();
        let s = 3.7;
        let qs = BoundQuery::new(0.04 * s, 0.1, g.scaled(s)).unwrap();
        let a = sample_size_real(&q).unwrap();
        let b = sample_size_real(&qs).unwrap();
        assert!((a - b).abs() <= 1e-9 * a);
    }
}

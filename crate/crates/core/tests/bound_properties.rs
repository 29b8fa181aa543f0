use curve_multiplicity::bound::{beta_m, sample_size_bound, sample_size_real, BoundQuery};
use curve_multiplicity::corpus::RegularityData;

fn reg() -> RegularityData {
    RegularityData::new(0.4, 0.3, 0.5, 2.0).unwrap()
}

#[test]
fn bound_is_monotone_on_a_grid() {
    let r = reg();
    let radii: Vec<f64> = (1..=10).map(|i| 0.014 * i as f64).collect();
    let gammas: Vec<f64> = (1..=10).map(|i| 0.09 * i as f64).collect();
    for &x in &radii {
        let n: Vec<u64> = gammas
            .iter()
            .map(|&g| sample_size_bound(&BoundQuery::new(x, g, r.clone()).unwrap()).unwrap())
            .collect();
        assert!(n.windows(2).all(|w| w[0] >= w[1]), "not decreasing in γ at r = {x}");
    }
    for &g in &gammas {
        let n: Vec<u64> = radii
            .iter()
            .map(|&x| sample_size_bound(&BoundQuery::new(x, g, r.clone()).unwrap()).unwrap())
            .collect();
        assert!(n.windows(2).all(|w| w[0] >= w[1]), "not decreasing in r at γ = {g}");
    }
}

#[test]
fn bound_is_scale_invariant() {
    for s in [0.1, 3.0, 17.0] {
        let a = sample_size_real(&BoundQuery::new(0.05, 0.1, reg()).unwrap()).unwrap();
        let b = sample_size_real(&BoundQuery::new(0.05 * s, 0.1, reg().scaled(s)).unwrap()).unwrap();
        assert!(((a - b) / a).abs() < 1e-9, "s = {s}: {a} vs {b}");
    }
}

#[test]
fn beta_times_square_stays_bounded() {
    let r = reg();
    let values: Vec<f64> = (0..30).map(|k| 0.1 * 0.5f64.powi(k)).map(|x| beta_m(&r, x).unwrap() * x * x).collect();
    let limit = values.last().unwrap();
    assert!(values.iter().all(|v| v.is_finite() && *v > 0.0 && *v <= 2.0 * limit));
    assert!((values[28] - values[29]).abs() / limit < 1e-6);
}

#[test]
fn radius_must_stay_below_half_delta() {
    assert!(BoundQuery::new(0.15, 0.1, reg()).is_err());
    assert!(BoundQuery::new(0.0, 0.1, reg()).is_err());
    assert!(BoundQuery::new(0.1, 1.0, reg()).is_err());
}

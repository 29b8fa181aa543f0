//! Independent reference computations for the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use curve_multiplicity::pointcloud::PointCloud;

/// Adaptive Simpson on `[lo, hi]` to absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64, tol: f64) -> f64 {
    fn step<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    if hi <= lo {
        return 0.0;
    }
    let (fa, fb, fm) = (f(lo), f(hi), f(0.5 * (lo + hi)));
    let whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, lo, hi, fa, fm, fb, whole, tol, 48)
}

/// `∫₀^y t^{a−1} (1−t)^{b−1} dt` for `y ≤ 1/2`; `t = u^{1/a}` removes the
/// endpoint singularity when `a < 1`.
fn partial_beta(y: f64, a: f64, b: f64) -> f64 {
    let tol = 1e-15;
    if a >= 1.0 {
        adaptive_simpson(&|t: f64| t.powf(a - 1.0) * (1.0 - t).powf(b - 1.0), 0.0, y, tol)
    } else {
        let g = |u: f64| (1.0 - u.powf(1.0 / a)).powf(b - 1.0) / a;
        adaptive_simpson(&g, 0.0, y.powf(a), tol)
    }
}

/// `I_y(a, b)` by direct quadrature of the beta integrand.
pub fn incbeta_quadrature(y: f64, a: f64, b: f64) -> f64 {
    if y <= 0.0 {
        return 0.0;
    }
    if y >= 1.0 {
        return 1.0;
    }
    let total = partial_beta(0.5, a, b) + partial_beta(0.5, b, a);
    if y <= 0.5 {
        partial_beta(y, a, b) / total
    } else {
        1.0 - partial_beta(1.0 - y, b, a) / total
    }
}

/// Components of the `≤ h` graph by checking every pair; each sorted,
/// ordered by smallest member.
pub fn brute_force_components(cloud: &PointCloud, h: f64) -> Vec<Vec<usize>> {
    let n = cloud.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for i in 0..n {
        for j in i + 1..n {
            let d2: f64 = cloud.point(i).iter().zip(cloud.point(j)).map(|(x, y)| (x - y) * (x - y)).sum();
            if d2.sqrt() <= h {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in 0..n {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }
    let mut out: Vec<Vec<usize>> = groups.into_values().collect();
    out.sort_by_key(|g| g[0]);
    out
}

/// Area of the cusp `t ↦ (t², t³)` inside `|z| < r`: with `ρ = |t|`,
/// `|z|² = ρ⁴ + ρ⁶` and `|φ'|² = 4ρ² + 9ρ⁴`, so the area is `2π(ρ⁴ + 3ρ⁶/2)`.
pub fn cusp_area_within(r: f64) -> f64 {
    let rho = cusp_rho(r);
    2.0 * PI * (rho.powi(4) + 1.5 * rho.powi(6))
}

/// `ρ` with `ρ⁴ + ρ⁶ = r²`, by bisection.
fn cusp_rho(r: f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64 + r);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid.powi(4) + mid.powi(6) < r * r {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Radii splitting the cusp annulus `ε₀ < |z| < ε` into `k` rings of equal area.
pub fn cusp_equal_area_radii(inner: f64, outer: f64, k: usize) -> Vec<f64> {
    let (a0, a1) = (cusp_area_within(inner), cusp_area_within(outer));
    (1..k)
        .map(|i| {
            let target = a0 + (a1 - a0) * i as f64 / k as f64;
            let (mut lo, mut hi) = (inner, outer);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if cusp_area_within(mid) < target {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        })
        .collect()
}

/// Bin counts of cusp samples over `rings × sectors` equal-area cells:
/// rings in `|z|`, sectors in `arg t` with `t = y/x`, under which the area
/// element is rotation invariant.
pub fn cusp_bin_counts(cloud: &PointCloud, inner: f64, outer: f64, rings: usize, sectors: usize) -> Vec<usize> {
    let radii = cusp_equal_area_radii(inner, outer, rings);
    let mut counts = vec![0usize; rings * sectors];
    for p in cloud.iter() {
        let r = p.iter().map(|v| v * v).sum::<f64>().sqrt();
        let ring = radii.iter().filter(|&&q| r >= q).count();
        let x = num_complex::Complex64::new(p[0], p[1]);
        let y = num_complex::Complex64::new(p[2], p[3]);
        let arg = (y / x).arg() + PI;
        let sector = ((arg / (2.0 * PI) * sectors as f64) as usize).min(sectors - 1);
        counts[ring * sectors + sector] += 1;
    }
    counts
}

/// Pearson statistic against equal expected counts.
pub fn chi_square_uniform(counts: &[usize]) -> f64 {
    let n: usize = counts.iter().sum();
    let e = n as f64 / counts.len() as f64;
    counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum()
}

/// Largest `s` with `P(X ≤ s) < level` for `X ~ Bin(n, p)`, or `None`.
pub fn binomial_rejection_threshold(n: u64, p: f64, level: f64) -> Option<u64> {
    use statrs::distribution::{Binomial, DiscreteCDF};
    let d = Binomial::new(p, n).unwrap();
    (0..=n).take_while(|&s| d.cdf(s) < level).last()
}

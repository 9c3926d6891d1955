//! Finite-size scaling fit `p_acc = f(L (p - p_th))` with a cubic `f`.

use std::collections::BTreeSet;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::code::Lattice;
use crate::error::{Error, Result};

use super::{evaluate, DecoderKind};

/// Grid resolution of the outer search before golden-section refinement.
const GRID: usize = 400;
/// Standard errors are floored so saturated points keep a finite weight.
const MIN_STD_ERR: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPoint {
    #[serde(rename = "L")]
    pub lattice: usize,
    pub p: f64,
    pub p_acc: f64,
    pub std_err: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ThresholdFit {
    pub p_th: f64,
    /// `f(x) = c0 + c1 x + c2 x^2 + c3 x^3`.
    pub coefficients: [f64; 4],
    /// Weighted sum of squared residuals at the optimum.
    pub residual: f64,
    pub degenerate: bool,
    pub warning: Option<String>,
    pub points: Vec<ThresholdPoint>,
}

/// Weighted least-squares cubic for a fixed `p_th`.
fn cubic_fit(points: &[ThresholdPoint], p_th: f64) -> ([f64; 4], f64) {
    let n = points.len();
    let mut a = DMatrix::<f64>::zeros(n, 4);
    let mut b = DVector::<f64>::zeros(n);
    for (i, pt) in points.iter().enumerate() {
        let w = 1.0 / pt.std_err.max(MIN_STD_ERR);
        let x = pt.lattice as f64 * (pt.p - p_th);
        let mut xp = 1.0;
        for k in 0..4 {
            a[(i, k)] = w * xp;
            xp *= x;
        }
        b[i] = w * pt.p_acc;
    }
    let svd = a.clone().svd(true, true);
    let c = svd.solve(&b, 1e-12).expect("SVD computed with both factors");
    let residual = (&a * &c - &b).norm_squared();
    ([c[0], c[1], c[2], c[3]], residual)
}

/// Minimizes the cubic-fit residual over `p_th` within the scanned range.
pub fn threshold_fit(points: &[ThresholdPoint]) -> Result<ThresholdFit> {
    let sizes: BTreeSet<usize> = points.iter().map(|p| p.lattice).collect();
    let rates: BTreeSet<u64> = points.iter().map(|p| p.p.to_bits()).collect();
    if sizes.len() < 3 {
        return Err(Error::Fit(format!("need at least 3 lattice sizes, got {}", sizes.len())));
    }
    if rates.len() < 5 {
        return Err(Error::Fit(format!("need at least 5 noise rates, got {}", rates.len())));
    }
    if points.iter().any(|p| !(p.p.is_finite() && p.p_acc.is_finite() && p.std_err.is_finite())) {
        return Err(Error::Fit("non-finite input point".into()));
    }
    let lo = points.iter().map(|p| p.p).fold(f64::INFINITY, f64::min);
    let hi = points.iter().map(|p| p.p).fold(f64::NEG_INFINITY, f64::max);

    let objective = |t: f64| cubic_fit(points, t).1;
    let grid: Vec<(f64, f64)> = (0..=GRID)
        .map(|i| {
            let t = lo + (hi - lo) * i as f64 / GRID as f64;
            (t, objective(t))
        })
        .collect();
    let (best_i, _) = grid
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .expect("non-empty grid");
    let r_min = grid.iter().map(|g| g.1).fold(f64::INFINITY, f64::min);
    let r_max = grid.iter().map(|g| g.1).fold(f64::NEG_INFINITY, f64::max);

    // Golden-section refinement inside the neighbouring grid cells.
    let mut a = grid[best_i.saturating_sub(1)].0;
    let mut b = grid[(best_i + 1).min(GRID)].0;
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut fc, mut fd) = (objective(c), objective(d));
    for _ in 0..80 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = objective(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = objective(d);
        }
    }
    let mut p_th = 0.5 * (a + b);
    if objective(p_th) > grid[best_i].1 {
        p_th = grid[best_i].0;
    }
    let (coefficients, residual) = cubic_fit(points, p_th);

    let flat = r_max - r_min <= 1e-9 * r_max.max(1.0);
    let mut warning = None;
    if flat {
        warning = Some("degenerate fit: residual does not depend on p_th (no crossing in the data)".into());
    } else if best_i == 0 || best_i == GRID {
        warning = Some("fit optimum lies on the edge of the scanned range".into());
    }
    Ok(ThresholdFit { p_th, coefficients, residual, degenerate: flat, warning, points: points.to_vec() })
}

/// Evaluates `kind` on every `(L, p)` cell. Cells use distinct seeds
/// derived from `seed`, the lattice size and the rate index.
pub fn threshold_sweep(
    kind: &DecoderKind,
    lattices: &[usize],
    rates: &[f64],
    n: usize,
    seed: u64,
    workers: usize,
) -> Result<Vec<ThresholdPoint>> {
    let mut points = Vec::with_capacity(lattices.len() * rates.len());
    for &l in lattices {
        let lattice = Lattice::new(l)?;
        for (i, &p) in rates.iter().enumerate() {
            let cell_seed = seed.wrapping_add((l as u64) << 32).wrapping_add(i as u64);
            let r = evaluate(kind, lattice, p, n, cell_seed, workers)?;
            points.push(ThresholdPoint { lattice: l, p, p_acc: r.p_acc, std_err: r.std_err });
        }
    }
    Ok(points)
}

/// Plot-ready CSV of sweep points with a format comment line.
pub fn write_points_csv<W: Write>(mut out: W, points: &[ThresholdPoint]) -> Result<()> {
    writeln!(out, "# toric-threshold-points v1")?;
    let mut w = csv::Writer::from_writer(out);
    for p in points {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn synthetic(p_th: f64, noise: f64, seed: u64) -> Vec<ThresholdPoint> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let f = |x: f64| 0.6 - 1.1 * x + 0.4 * x * x + 0.9 * x * x * x;
        let mut pts = Vec::new();
        for l in [11, 15, 17, 21] {
            for i in 0..21 {
                let p = 0.145 + 0.035 * i as f64 / 20.0;
                let clean = f(l as f64 * (p - p_th));
                let p_acc = clean * (1.0 + noise * (2.0 * rng.random::<f64>() - 1.0));
                pts.push(ThresholdPoint { lattice: l, p, p_acc, std_err: 0.003 });
            }
        }
        pts
    }

    #[test]
    fn recovers_exact_threshold_without_noise() {
        let fit = threshold_fit(&synthetic(0.16, 0.0, 0)).unwrap();
        assert!((fit.p_th - 0.16).abs() < 1e-6, "{}", fit.p_th);
        assert!(!fit.degenerate);
        assert!((fit.coefficients[3] - 0.9).abs() < 1e-4);
    }

    #[test]
    fn recovers_threshold_with_noise() {
        for seed in 0..5 {
            let fit = threshold_fit(&synthetic(0.16, 0.005, seed)).unwrap();
            assert!((fit.p_th - 0.16).abs() < 0.005, "seed {seed}: {}", fit.p_th);
        }
    }

    #[test]
    fn flat_data_is_flagged() {
        let mut pts = synthetic(0.16, 0.0, 0);
        pts.iter_mut().for_each(|p| p.p_acc = 0.5);
        let fit = threshold_fit(&pts).unwrap();
        assert!(fit.degenerate);
        assert!(fit.warning.is_some());
        assert!(fit.p_th >= 0.145 && fit.p_th <= 0.18);
    }

    #[test]
    fn rejects_thin_designs() {
        let pts = synthetic(0.16, 0.0, 0);
        let one_size: Vec<_> = pts.iter().copied().filter(|p| p.lattice == 11).collect();
        assert!(matches!(threshold_fit(&one_size), Err(Error::Fit(_))));
        let few_rates: Vec<_> = pts.iter().copied().filter(|p| p.p < 0.152).collect();
        assert!(matches!(threshold_fit(&few_rates), Err(Error::Fit(_))));
    }
}

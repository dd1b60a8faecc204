//! α-precision, β-recall and authenticity in the PCA latent space.
//!
//! Both clouds are projected through the fitted model; each cloud's sphere is
//! centered at its own centroid. Quantile radii use linear interpolation
//! between order statistics.

use ndarray::{Array1, Array2, ArrayView1, Axis};

use crate::error::{Error, Result};
use crate::latent::ReconstructionModel;
use crate::signalio::SignatureMatrix;

pub const DEFAULT_KNN_K: usize = 5;
pub const DEFAULT_GRID_STEPS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedCloud {
    points: Array2<f64>,
    center: Array1<f64>,
    radii: Array1<f64>,
}

impl EmbeddedCloud {
    /// Centers the sphere at the centroid of `points`.
    pub fn new(points: Array2<f64>) -> Result<Self> {
        let center = points
            .mean_axis(Axis(0))
            .ok_or_else(|| Error::Validation("cannot embed an empty cloud".into()))?;
        Ok(Self::with_center(points, center))
    }

    pub fn with_center(points: Array2<f64>, center: Array1<f64>) -> Self {
        let radii = points.rows().into_iter().map(|p| dist(p, center.view())).collect();
        Self { points, center, radii }
    }

    pub fn points(&self) -> &Array2<f64> {
        &self.points
    }

    pub fn center(&self) -> &Array1<f64> {
        &self.center
    }

    pub fn radii(&self) -> &Array1<f64> {
        &self.radii
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }
}

fn dist(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn check_dims(real: &EmbeddedCloud, synth: &EmbeddedCloud) -> Result<()> {
    if real.points.ncols() != synth.points.ncols() {
        return Err(Error::Dimension(format!(
            "real cloud has {} dimensions, synthetic {}",
            real.points.ncols(),
            synth.points.ncols()
        )));
    }
    Ok(())
}

pub fn embed(
    x_r: &SignatureMatrix,
    x_g: &SignatureMatrix,
    model: &ReconstructionModel,
) -> Result<(EmbeddedCloud, EmbeddedCloud)> {
    if x_r.rows() == 0 || x_g.rows() == 0 {
        return Err(Error::Validation("metric inputs must be non-empty".into()));
    }
    let zr = model.project_rows(x_r.data().view())?;
    let zg = model.project_rows(x_g.data().view())?;
    Ok((EmbeddedCloud::new(zr)?, EmbeddedCloud::new(zg)?))
}

/// Linear-interpolation quantile of already sorted values.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn sorted(values: &Array1<f64>) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.iter().any(|g| !(0.0..=1.0).contains(g)) || grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Validation("grid must be sorted within [0, 1]".into()));
    }
    Ok(())
}

/// Uniform grid 0, 1/steps, …, 1.
pub fn uniform_grid(steps: usize) -> Vec<f64> {
    (0..=steps).map(|i| i as f64 / steps as f64).collect()
}

/// Fraction of synthetic points within the α-quantile radius of the real
/// cloud, measured from the real center.
pub fn alpha_precision_curve(real: &EmbeddedCloud, synth: &EmbeddedCloud, alphas: &[f64]) -> Result<Vec<f64>> {
    check_dims(real, synth)?;
    check_grid(alphas)?;
    if real.is_empty() || synth.is_empty() {
        return Err(Error::Validation("α-precision needs non-empty clouds".into()));
    }
    let real_sorted = sorted(&real.radii);
    let mut to_real: Vec<f64> = synth
        .points
        .rows()
        .into_iter()
        .map(|p| dist(p, real.center.view()))
        .collect();
    to_real.sort_by(f64::total_cmp);
    let n = to_real.len() as f64;
    Ok(alphas
        .iter()
        .map(|&a| {
            let r = quantile_sorted(&real_sorted, a);
            to_real.partition_point(|d| *d <= r) as f64 / n
        })
        .collect())
}

/// Distance from each real point to its k-th nearest other real point.
fn knn_radii(real: &EmbeddedCloud, k: usize) -> Vec<f64> {
    let n = real.len();
    let mut buf = Vec::with_capacity(n);
    (0..n)
        .map(|i| {
            buf.clear();
            let p = real.points.row(i);
            buf.extend((0..n).filter(|&j| j != i).map(|j| dist(p, real.points.row(j))));
            *buf.select_nth_unstable_by(k - 1, f64::total_cmp).1
        })
        .collect()
}

/// Fraction of real points whose nearest synthetic point inside the
/// β-support lies within the real point's k-NN radius. The β-support holds
/// the synthetic points whose distance to the synthetic center is at most
/// the β-quantile of synthetic radii; at β = 0 it is empty.
pub fn beta_recall_curve(
    real: &EmbeddedCloud,
    synth: &EmbeddedCloud,
    betas: &[f64],
    k: usize,
) -> Result<Vec<f64>> {
    check_dims(real, synth)?;
    check_grid(betas)?;
    if k == 0 || k >= real.len() {
        return Err(Error::Config(format!(
            "knn k must satisfy 1 ≤ k < {} real points, got {k}",
            real.len()
        )));
    }
    if synth.is_empty() {
        return Ok(vec![0.0; betas.len()]);
    }
    // Synthetic points by increasing radius; a β-support is a prefix.
    let mut order: Vec<usize> = (0..synth.len()).collect();
    order.sort_by(|&a, &b| synth.radii[a].total_cmp(&synth.radii[b]));
    let radii_sorted: Vec<f64> = order.iter().map(|&i| synth.radii[i]).collect();
    let support_len: Vec<usize> = betas
        .iter()
        .map(|&b| {
            if b == 0.0 {
                0
            } else {
                let q = quantile_sorted(&radii_sorted, b);
                radii_sorted.partition_point(|r| *r <= q)
            }
        })
        .collect();

    let balls = knn_radii(real, k);
    let mut covered = vec![0usize; betas.len()];
    let mut prefix_min = vec![0.0; order.len()];
    for (i, p) in real.points.rows().into_iter().enumerate() {
        let mut best = f64::INFINITY;
        for (slot, &j) in order.iter().enumerate() {
            best = best.min(dist(p, synth.points.row(j)));
            prefix_min[slot] = best;
        }
        for (c, &len) in covered.iter_mut().zip(&support_len) {
            if len > 0 && prefix_min[len - 1] <= balls[i] {
                *c += 1;
            }
        }
    }
    let n = real.len() as f64;
    Ok(covered.into_iter().map(|c| c as f64 / n).collect())
}

/// Fraction of real points whose nearest other real point is strictly closer
/// than their nearest synthetic point.
pub fn authenticity(real: &EmbeddedCloud, synth: &EmbeddedCloud) -> Result<f64> {
    check_dims(real, synth)?;
    if real.len() < 2 || synth.is_empty() {
        return Err(Error::Validation(
            "authenticity needs at least 2 real points and 1 synthetic point".into(),
        ));
    }
    let n = real.len();
    let mut authentic = 0usize;
    for i in 0..n {
        let p = real.points.row(i);
        let d_real = (0..n)
            .filter(|&j| j != i)
            .map(|j| dist(p, real.points.row(j)))
            .fold(f64::INFINITY, f64::min);
        let d_synth = synth
            .points
            .rows()
            .into_iter()
            .map(|q| dist(p, q))
            .fold(f64::INFINITY, f64::min);
        if d_real < d_synth {
            authentic += 1;
        }
    }
    Ok(authentic as f64 / n as f64)
}

/// 1 − 2·∫|curve − grid| by the trapezoid rule, clamped to [0, 1].
pub fn integrated_score(grid: &[f64], curve: &[f64]) -> Result<f64> {
    if grid.len() != curve.len() || grid.len() < 2 {
        return Err(Error::Dimension(format!(
            "grid has {} points, curve {}",
            grid.len(),
            curve.len()
        )));
    }
    let dev: Vec<f64> = grid.iter().zip(curve).map(|(g, c)| (c - g).abs()).collect();
    let area: f64 = grid
        .windows(2)
        .zip(dev.windows(2))
        .map(|(g, d)| 0.5 * (g[1] - g[0]) * (d[0] + d[1]))
        .sum();
    Ok((1.0 - 2.0 * area).clamp(0.0, 1.0))
}

/// (IP_α, IR_β) for curves sampled on the same grid.
pub fn integrated_metrics(grid: &[f64], p_alpha: &[f64], r_beta: &[f64]) -> Result<(f64, f64)> {
    Ok((integrated_score(grid, p_alpha)?, integrated_score(grid, r_beta)?))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    /// Shared α and β grid.
    pub alphas: Vec<f64>,
    pub p_alpha_curve: Vec<f64>,
    pub r_beta_curve: Vec<f64>,
    pub authenticity: f64,
    pub ip_alpha: f64,
    pub ir_beta: f64,
    pub knn_k: usize,
}

pub fn evaluate_clouds(real: &EmbeddedCloud, synth: &EmbeddedCloud, steps: usize, knn_k: usize) -> Result<MetricReport> {
    let grid = uniform_grid(steps.max(1));
    let p = alpha_precision_curve(real, synth, &grid)?;
    let r = beta_recall_curve(real, synth, &grid, knn_k)?;
    let (ip_alpha, ir_beta) = integrated_metrics(&grid, &p, &r)?;
    Ok(MetricReport {
        authenticity: authenticity(real, synth)?,
        alphas: grid,
        p_alpha_curve: p,
        r_beta_curve: r,
        ip_alpha,
        ir_beta,
        knn_k,
    })
}

pub fn evaluate(
    x_r: &SignatureMatrix,
    x_g: &SignatureMatrix,
    model: &ReconstructionModel,
    knn_k: usize,
) -> Result<MetricReport> {
    let (real, synth) = embed(x_r, x_g, model)?;
    evaluate_clouds(&real, &synth, DEFAULT_GRID_STEPS, knn_k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cloud(rows: Vec<Vec<f64>>) -> EmbeddedCloud {
        let d = rows[0].len();
        let flat: Vec<f64> = rows.concat();
        EmbeddedCloud::new(Array2::from_shape_vec((flat.len() / d, d), flat).unwrap()).unwrap()
    }

    fn random_cloud(n: usize, d: usize, shift: f64, seed: u64) -> EmbeddedCloud {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        EmbeddedCloud::new(Array2::from_shape_fn((n, d), |_| rng.random_range(-1.0..1.0) + shift)).unwrap()
    }

    #[test]
    fn radii_and_trivial_clouds() {
        let one = cloud(vec![vec![3.0, 4.0]]);
        assert_eq!(one.radii()[0], 0.0);
        let pair = cloud(vec![vec![1.0, 1.0], vec![-1.0, -1.0]]);
        assert_eq!(pair.radii()[0], pair.radii()[1]);
        let c = EmbeddedCloud::with_center(array![[3.0, 4.0]], array![0.0, 0.0]);
        assert!((c.radii()[0] - 5.0).abs() < 1e-12);
    }

    #[test]
    fn alpha_step_under_linear_quantile() {
        // Radii 1..5 around the origin: r_α = 1 + 4α, so 2.5 is reached at α = 0.375.
        let real = EmbeddedCloud::with_center(array![[1.0], [2.0], [3.0], [4.0], [5.0]], array![0.0]);
        let synth = EmbeddedCloud::with_center(array![[2.5]], array![0.0]);
        let grid = [0.0, 0.25, 0.37, 0.375, 0.5, 1.0];
        let p = alpha_precision_curve(&real, &synth, &grid).unwrap();
        assert_eq!(p, vec![0.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn displaced_synthetic_has_zero_precision() {
        let real = random_cloud(40, 3, 0.0, 1);
        let synth = random_cloud(40, 3, 100.0, 2);
        let p = alpha_precision_curve(&real, &synth, &uniform_grid(100)).unwrap();
        assert!(p.iter().all(|v| *v == 0.0));
        assert_eq!(authenticity(&real, &synth).unwrap(), 1.0);
    }

    #[test]
    fn self_comparison() {
        let real = random_cloud(200, 4, 0.0, 3);
        let grid = uniform_grid(100);
        let p = alpha_precision_curve(&real, &real, &grid).unwrap();
        for (a, v) in grid.iter().zip(&p) {
            assert!((v - a).abs() <= 1.0 / 200.0 + 1e-12, "α={a}: {v}");
        }
        let (ip, _) = integrated_metrics(&grid, &p, &p).unwrap();
        assert!(ip >= 0.95);
        let r = beta_recall_curve(&real, &real, &grid, 1).unwrap();
        for (b, v) in grid.iter().zip(&r).skip(1) {
            assert!(*v >= b - 1.0 / 200.0 - 1e-12);
        }
        assert_eq!(r[0], 0.0);
        assert_eq!(authenticity(&real, &real).unwrap(), 0.0);
    }

    #[test]
    fn recall_hand_geometry() {
        let real = cloud(vec![vec![0.0], vec![1.0]]);
        let synth = cloud(vec![vec![0.0]]);
        let r = beta_recall_curve(&real, &synth, &[0.0, 1.0], 1).unwrap();
        assert_eq!(r, vec![0.0, 1.0]);
        assert!(beta_recall_curve(&real, &synth, &[1.0], 2).is_err());
    }

    #[test]
    fn authenticity_collinear() {
        let real = cloud(vec![vec![0.0], vec![1.0], vec![2.0]]);
        let synth = cloud(vec![vec![0.4]]);
        assert!((authenticity(&real, &synth).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn integrated_closed_forms() {
        let grid = uniform_grid(100);
        assert_eq!(integrated_score(&grid, &grid).unwrap(), 1.0);
        assert_eq!(integrated_score(&grid, &vec![0.0; 101]).unwrap(), 0.0);
        // ∫₀¹ |min(2α, 1) − α| dα = 1/8 + 1/8; the kink at 0.5 is a grid point.
        let curve: Vec<f64> = grid.iter().map(|a| (2.0 * a).min(1.0)).collect();
        assert!((integrated_score(&grid, &curve).unwrap() - 0.5).abs() < 1e-12);
    }

    fn brute_force(real: &EmbeddedCloud, synth: &EmbeddedCloud, grid: &[f64], k: usize) -> (Vec<f64>, Vec<f64>, f64) {
        let d = |a: ArrayView1<f64>, b: ArrayView1<f64>| -> f64 {
            a.iter().zip(b.iter()).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
        };
        let quant = |v: &Array1<f64>, q: f64| {
            let mut s = v.to_vec();
            s.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let h = (s.len() - 1) as f64 * q;
            let lo = h.floor() as usize;
            let hi = h.ceil() as usize;
            s[lo] + (h - lo as f64) * (s[hi] - s[lo])
        };
        let nr = real.len();
        let ng = synth.len();
        let mut p = Vec::new();
        let mut r = Vec::new();
        for &g in grid {
            let ra = quant(real.radii(), g);
            let inside = (0..ng)
                .filter(|&j| d(synth.points().row(j), real.center().view()) <= ra)
                .count();
            p.push(inside as f64 / ng as f64);

            let rb = quant(synth.radii(), g);
            let mut cov = 0;
            for i in 0..nr {
                let mut nn: Vec<f64> = (0..nr).filter(|&j| j != i).map(|j| d(real.points().row(i), real.points().row(j))).collect();
                nn.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let ball = nn[k - 1];
                let nearest = (0..ng)
                    .filter(|&j| g > 0.0 && synth.radii()[j] <= rb)
                    .map(|j| d(real.points().row(i), synth.points().row(j)))
                    .fold(f64::INFINITY, f64::min);
                if nearest <= ball {
                    cov += 1;
                }
            }
            r.push(cov as f64 / nr as f64);
        }
        let mut auth = 0;
        for i in 0..nr {
            let dr = (0..nr).filter(|&j| j != i).map(|j| d(real.points().row(i), real.points().row(j))).fold(f64::INFINITY, f64::min);
            let ds = (0..ng).map(|j| d(real.points().row(i), synth.points().row(j))).fold(f64::INFINITY, f64::min);
            if dr < ds {
                auth += 1;
            }
        }
        (p, r, auth as f64 / nr as f64)
    }

    #[test]
    fn matches_brute_force_oracle() {
        for seed in 0..5 {
            let real = random_cloud(50, 3, 0.0, 10 + seed);
            let synth = random_cloud(50, 3, 0.3, 20 + seed);
            let grid = uniform_grid(100);
            let (p, r, a) = brute_force(&real, &synth, &grid, 5);
            assert_eq!(alpha_precision_curve(&real, &synth, &grid).unwrap(), p);
            assert_eq!(beta_recall_curve(&real, &synth, &grid, 5).unwrap(), r);
            assert_eq!(authenticity(&real, &synth).unwrap(), a);
        }
    }

    #[test]
    fn curves_monotone_and_translation_invariant() {
        let real = random_cloud(60, 2, 0.0, 30);
        let synth = random_cloud(70, 2, 0.5, 31);
        let grid = uniform_grid(50);
        let p = alpha_precision_curve(&real, &synth, &grid).unwrap();
        let r = beta_recall_curve(&real, &synth, &grid, 3).unwrap();
        assert!(p.windows(2).all(|w| w[0] <= w[1]));
        assert!(r.windows(2).all(|w| w[0] <= w[1]));
        let shift = array![7.0, -3.0];
        let real2 = EmbeddedCloud::new(real.points() + &shift).unwrap();
        let synth2 = EmbeddedCloud::new(synth.points() + &shift).unwrap();
        let p2 = alpha_precision_curve(&real2, &synth2, &grid).unwrap();
        let r2 = beta_recall_curve(&real2, &synth2, &grid, 3).unwrap();
        // Translation perturbs distances at rounding level only.
        let diff = |a: &[f64], b: &[f64]| a.iter().zip(b).filter(|(x, y)| x != y).count();
        assert!(diff(&p, &p2) <= 1 && diff(&r, &r2) <= 1);
        assert_eq!(authenticity(&real, &synth).unwrap(), authenticity(&real2, &synth2).unwrap());
    }
}

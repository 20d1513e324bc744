//! Precision-recall-distributions evaluation for 2D sample sets: seeded
//! k-means binning of the pooled samples, the PRD curve over a tangent
//! lambda grid, and the F_8 / F_{1/8} summary scores.

use crate::error::{Error, Result};
use crate::rng::SeededRng;

pub const DEFAULT_BINS: usize = 20;
pub const DEFAULT_RESTARTS: usize = 10;
pub const LAMBDA_GRID: usize = 1001;
const KMEANS_MAX_ITERS: usize = 100;
const ANGLE_EPS: f64 = 1e-6;

/// Lloyd's algorithm with k-means++ seeding. Returns (centers, inertia).
fn kmeans_once(points: &[[f64; 2]], k: usize, rng: &mut SeededRng) -> (Vec<[f64; 2]>, f64) {
    let n = points.len();
    let mut centers: Vec<[f64; 2]> = Vec::with_capacity(k);
    centers.push(points[rng.usize_below(n)]);
    let mut d2 = vec![f64::INFINITY; n];
    while centers.len() < k {
        let last = centers[centers.len() - 1];
        let mut total = 0.0;
        for (i, p) in points.iter().enumerate() {
            let d = (p[0] - last[0]).powi(2) + (p[1] - last[1]).powi(2);
            if d < d2[i] {
                d2[i] = d;
            }
            total += d2[i];
        }
        if total <= 0.0 {
            // All remaining mass sits on existing centers; duplicate one.
            centers.push(points[rng.usize_below(n)]);
            continue;
        }
        let mut target = rng.uniform() * total;
        let mut chosen = n - 1;
        for (i, &d) in d2.iter().enumerate() {
            target -= d;
            if target <= 0.0 {
                chosen = i;
                break;
            }
        }
        centers.push(points[chosen]);
    }

    let mut assignment = vec![0usize; n];
    let mut inertia = f64::INFINITY;
    for _ in 0..KMEANS_MAX_ITERS {
        let mut changed = false;
        let mut new_inertia = 0.0;
        for (i, p) in points.iter().enumerate() {
            let (mut bi, mut bd) = (0usize, f64::INFINITY);
            for (j, c) in centers.iter().enumerate() {
                let d = (p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2);
                if d < bd {
                    bd = d;
                    bi = j;
                }
            }
            if assignment[i] != bi {
                assignment[i] = bi;
                changed = true;
            }
            new_inertia += bd;
        }
        inertia = new_inertia;
        if !changed {
            break;
        }
        let mut sums = vec![[0.0f64; 2]; k];
        let mut counts = vec![0usize; k];
        for (i, p) in points.iter().enumerate() {
            sums[assignment[i]][0] += p[0];
            sums[assignment[i]][1] += p[1];
            counts[assignment[i]] += 1;
        }
        for j in 0..k {
            if counts[j] > 0 {
                centers[j] = [sums[j][0] / counts[j] as f64, sums[j][1] / counts[j] as f64];
            }
        }
    }
    (centers, inertia)
}

/// Best-of-restarts k-means; deterministic given the seed (lowest inertia,
/// ties to the lowest restart index).
pub fn kmeans(points: &[[f64; 2]], k: usize, restarts: usize, seed: u64) -> Result<Vec<[f64; 2]>> {
    if points.is_empty() {
        return Err(Error::invalid("k-means over an empty point set"));
    }
    if k == 0 || k > points.len() {
        return Err(Error::invalid(format!("k = {k} invalid for {} points", points.len())));
    }
    let mut best: Option<(Vec<[f64; 2]>, f64)> = None;
    for r in 0..restarts.max(1) {
        let mut rng = SeededRng::derive(seed, r as u64);
        let (centers, inertia) = kmeans_once(points, k, &mut rng);
        if best.as_ref().map_or(true, |(_, bi)| inertia < *bi) {
            best = Some((centers, inertia));
        }
    }
    Ok(best.unwrap().0)
}

fn histogram(points: &[[f64; 2]], centers: &[[f64; 2]]) -> Vec<f64> {
    let mut counts = vec![0usize; centers.len()];
    for p in points {
        let (mut bi, mut bd) = (0usize, f64::INFINITY);
        for (j, c) in centers.iter().enumerate() {
            let d = (p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2);
            if d < bd {
                bd = d;
                bi = j;
            }
        }
        counts[bi] += 1;
    }
    counts.iter().map(|&c| c as f64 / points.len() as f64).collect()
}

/// PRD curve for two bin histograms over the tangent lambda grid:
/// `alpha(l) = sum_i min(l p_i, q_i)`, `beta(l) = sum_i min(p_i, q_i / l)`.
pub fn prd_curve(p: &[f64], q: &[f64], n_lambdas: usize) -> Result<Vec<(f64, f64)>> {
    if p.len() != q.len() || p.is_empty() {
        return Err(Error::invalid("histograms must be non-empty and equal length"));
    }
    let mut curve = Vec::with_capacity(n_lambdas);
    for j in 0..n_lambdas {
        let theta = ANGLE_EPS
            + (std::f64::consts::FRAC_PI_2 - 2.0 * ANGLE_EPS) * j as f64 / (n_lambdas - 1) as f64;
        let lambda = theta.tan();
        let alpha: f64 = p.iter().zip(q).map(|(&pi, &qi)| (lambda * pi).min(qi)).sum();
        let beta: f64 = p.iter().zip(q).map(|(&pi, &qi)| pi.min(qi / lambda)).sum();
        curve.push((alpha.clamp(0.0, 1.0), beta.clamp(0.0, 1.0)));
    }
    Ok(curve)
}

fn f_beta(precision: f64, recall: f64, beta: f64) -> f64 {
    let b2 = beta * beta;
    let denom = b2 * precision + recall;
    if denom <= 0.0 {
        0.0
    } else {
        (1.0 + b2) * precision * recall / denom
    }
}

/// Max-over-curve F scores; the first component treated as precision, the
/// second as recall. Returns (F_8, F_{1/8}).
pub fn f_scores_from_curve(curve: &[(f64, f64)]) -> (f64, f64) {
    let mut f8: f64 = 0.0;
    let mut f1_8: f64 = 0.0;
    for &(prec, rec) in curve {
        f8 = f8.max(f_beta(prec, rec, 8.0));
        f1_8 = f1_8.max(f_beta(prec, rec, 1.0 / 8.0));
    }
    (f8, f1_8)
}

/// F_8 / F_{1/8} between a real and a generated 2D sample set: pool, bin by
/// seeded k-means, trace the PRD curve, return the max F scores.
pub fn prd_f_scores(
    real: &[[f64; 2]],
    fake: &[[f64; 2]],
    n_bins: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if real.is_empty() || fake.is_empty() {
        return Err(Error::invalid("PRD needs non-empty real and fake sets"));
    }
    if n_bins < 2 {
        return Err(Error::invalid("PRD needs at least 2 bins"));
    }
    let mut pooled = Vec::with_capacity(real.len() + fake.len());
    pooled.extend_from_slice(real);
    pooled.extend_from_slice(fake);
    let k = n_bins.min(pooled.len());
    let centers = kmeans(&pooled, k, DEFAULT_RESTARTS, seed)?;
    let p = histogram(real, &centers);
    let q = histogram(fake, &centers);
    let curve = prd_curve(&p, &q, LAMBDA_GRID)?;
    Ok(f_scores_from_curve(&curve))
}

//! Quality indicators: IGD+, hypervolume (exact 2-D sweep and Monte Carlo),
//! and Schott's Spacing.
//!
//! All indicators assume minimization.

use rand::Rng;

use crate::error::{Error, Result};
use crate::problems::{dominates, ReferenceFront};

/// IGD+ value reported when no feasible solution exists.
pub const IGD_PLUS_SENTINEL: f64 = 100.0;
/// Hypervolume value reported when no feasible solution exists.
pub const HV_SENTINEL: f64 = 0.0;
/// Reference point used for normalized hypervolume reporting.
pub const NORMALIZED_HV_REF: f64 = 1.1;

/// Dominance-aware distance `d+(a, r) = sqrt(sum_j max(a_j - r_j, 0)^2)`.
fn modified_distance(a: &[f64], r: &[f64]) -> f64 {
    a.iter()
        .zip(r)
        .map(|(x, y)| (x - y).max(0.0).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Mean over reference points of the smallest `d+` to the approximation set.
pub fn igd_plus(approx: &[Vec<f64>], reference: &ReferenceFront) -> Result<f64> {
    if approx.is_empty() {
        return Err(Error::EmptyInput("approximation set"));
    }
    if reference.is_empty() {
        return Err(Error::EmptyInput("reference front"));
    }
    let total: f64 = reference
        .points
        .iter()
        .map(|r| {
            approx
                .iter()
                .map(|a| modified_distance(a, r))
                .fold(f64::INFINITY, f64::min)
        })
        .sum();
    Ok(total / reference.len() as f64)
}

/// Exact two-objective hypervolume dominated by `approx` and bounded by
/// `ref_point`. Points not strictly better than the reference point in both
/// objectives contribute nothing.
pub fn hypervolume_2d(approx: &[Vec<f64>], ref_point: &[f64]) -> f64 {
    assert_eq!(ref_point.len(), 2, "hypervolume_2d needs two objectives");
    let mut pts: Vec<(f64, f64)> = approx
        .iter()
        .filter(|p| p[0] < ref_point[0] && p[1] < ref_point[1])
        .map(|p| (p[0], p[1]))
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut volume = 0.0;
    let mut ceiling = ref_point[1];
    for (f1, f2) in pts {
        if f2 < ceiling {
            volume += (ref_point[0] - f1) * (ceiling - f2);
            ceiling = f2;
        }
    }
    volume
}

/// Monte Carlo estimate of the volume dominated by `approx` inside the box
/// spanned by the component-wise minimum of `approx` and `ref_point`.
pub fn hypervolume_mc<R: Rng + ?Sized>(
    approx: &[Vec<f64>],
    ref_point: &[f64],
    samples: usize,
    rng: &mut R,
) -> f64 {
    let inside: Vec<&Vec<f64>> = approx
        .iter()
        .filter(|p| p.iter().zip(ref_point).all(|(a, r)| a < r))
        .collect();
    if inside.is_empty() || samples == 0 {
        return 0.0;
    }
    let m = ref_point.len();
    let lower: Vec<f64> = (0..m)
        .map(|j| inside.iter().map(|p| p[j]).fold(f64::INFINITY, f64::min))
        .collect();
    let box_volume: f64 = lower.iter().zip(ref_point).map(|(l, r)| r - l).product();
    let mut sample = vec![0.0; m];
    let mut hits = 0usize;
    for _ in 0..samples {
        for j in 0..m {
            sample[j] = rng.gen_range(lower[j]..ref_point[j]);
        }
        if inside
            .iter()
            .any(|p| p.iter().zip(&sample).all(|(a, s)| a <= s))
        {
            hits += 1;
        }
    }
    box_volume * hits as f64 / samples as f64
}

/// Hypervolume of `approx` after mapping `ideal -> 0` and `nadir -> 1` per
/// objective, measured against the reference point `(1.1, ..., 1.1)`.
pub fn normalized_hypervolume(approx: &[Vec<f64>], ideal: &[f64], nadir: &[f64]) -> f64 {
    let scaled: Vec<Vec<f64>> = approx
        .iter()
        .map(|p| {
            p.iter()
                .zip(ideal.iter().zip(nadir))
                .map(|(v, (lo, hi))| {
                    let span = hi - lo;
                    if span > 0.0 {
                        (v - lo) / span
                    } else {
                        v - lo
                    }
                })
                .collect()
        })
        .collect();
    let reference = vec![NORMALIZED_HV_REF; ideal.len()];
    if ideal.len() == 2 {
        hypervolume_2d(&scaled, &reference)
    } else {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        hypervolume_mc(&scaled, &reference, 100_000, &mut rng)
    }
}

/// Schott's Spacing: sample standard deviation of nearest-neighbour
/// Manhattan distances. Zero for fewer than two points.
pub fn spacing(approx: &[Vec<f64>]) -> f64 {
    let n = approx.len();
    if n < 2 {
        return 0.0;
    }
    let nearest: Vec<f64> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&k| k != i)
                .map(|k| {
                    approx[i]
                        .iter()
                        .zip(&approx[k])
                        .map(|(a, b)| (a - b).abs())
                        .sum::<f64>()
                })
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let mean = nearest.iter().sum::<f64>() / n as f64;
    let ss: f64 = nearest.iter().map(|d| (d - mean).powi(2)).sum();
    (ss / (n - 1) as f64).sqrt()
}

/// Symmetric Hausdorff distance between two point sets under the Euclidean metric.
pub fn hausdorff_distance(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    fn directed(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
        a.iter()
            .map(|p| {
                b.iter()
                    .map(|q| {
                        p.iter()
                            .zip(q)
                            .map(|(x, y)| (x - y).powi(2))
                            .sum::<f64>()
                            .sqrt()
                    })
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    }
    directed(a, b).max(directed(b, a))
}

/// True when every reference point is weakly dominated by some approximation point.
pub fn covers(approx: &[Vec<f64>], reference: &[Vec<f64>]) -> bool {
    reference.iter().all(|r| {
        approx
            .iter()
            .any(|a| a == r || dominates(a, r))
    })
}

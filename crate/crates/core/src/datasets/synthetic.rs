use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;

use super::Dataset;
use crate::error::{Error, Result};
use crate::kernels::{eval_kernel, KernelSpec};

/// Squared within-cluster distance of the epsilon-kernel counterexample;
/// the intended radius is its square root.
pub const EPSILON_COUNTEREXAMPLE_RADIUS_SQ: f64 = 24.0;

/// Two interleaved unit half-circles, the second offset by `(1, 0.5)`,
/// with isotropic Gaussian noise.
pub fn gen_halfmoons(n: usize, noise_sd: f64, seed: u64) -> Result<Dataset> {
    if n < 2 {
        return Err(Error::InvalidParameter("halfmoons needs n >= 2".into()));
    }
    if !(noise_sd >= 0.0) {
        return Err(Error::InvalidParameter("noise_sd must be >= 0".into()));
    }
    let n_outer = n / 2;
    let n_inner = n - n_outer;
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    let angle = |i: usize, m: usize| {
        if m == 1 {
            0.0
        } else {
            std::f64::consts::PI * i as f64 / (m - 1) as f64
        }
    };
    for i in 0..n_outer {
        let t = angle(i, n_outer);
        rows.push(vec![t.cos(), t.sin()]);
        labels.push(0);
    }
    for i in 0..n_inner {
        let t = angle(i, n_inner);
        rows.push(vec![1.0 - t.cos(), 0.5 - t.sin()]);
        labels.push(1);
    }
    if noise_sd > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, noise_sd).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        for r in &mut rows {
            for v in r.iter_mut() {
                *v += normal.sample(&mut rng);
            }
        }
    }
    Dataset::from_rows("halfmoons", &rows, Some(labels))
}

/// Three one-dimensional clusters centred at -1, 0 and 1; half of each
/// cluster sits at `c - eps`, half at `c + eps`. `n = 6 * per_side`.
pub fn gen_exkmc_counterexample(eps: f64, per_side: usize) -> Result<Dataset> {
    if !(eps > 0.0 && eps < 0.25) {
        return Err(Error::InvalidParameter(format!("eps must lie in (0, 1/4), got {eps}")));
    }
    if per_side == 0 {
        return Err(Error::InvalidParameter("per_side must be >= 1".into()));
    }
    let mut rows = Vec::with_capacity(6 * per_side);
    let mut labels = Vec::with_capacity(6 * per_side);
    for (label, center) in [-1.0f64, 0.0, 1.0].into_iter().enumerate() {
        for offset in [-eps, eps] {
            for _ in 0..per_side {
                rows.push(vec![center + offset]);
                labels.push(label);
            }
        }
    }
    Dataset::from_rows("exkmc_counterexample", &rows, Some(labels))
}

/// The four points `(0,1), (0,-1), (1,0), (-1,0)`; under the quadratic
/// kernel the two axis pairs are perfectly tight clusters.
pub fn gen_quadratic_counterexample() -> Result<Dataset> {
    let ds = Dataset::from_rows(
        "quadratic_counterexample",
        &[vec![0.0, 1.0], vec![0.0, -1.0], vec![1.0, 0.0], vec![-1.0, 0.0]],
        Some(vec![0, 0, 1, 1]),
    )?;
    let spec = KernelSpec::quadratic();
    let labels = ds.labels().expect("labels set above");
    for i in 0..4 {
        for j in 0..4 {
            let k = eval_kernel(&spec, ds.point(i), ds.point(j))?;
            let expected = if labels[i] == labels[j] { 1.0 } else { 0.0 };
            if k != expected {
                return Err(Error::InvalidParameter(format!("quadratic counterexample identity failed at ({i}, {j}): {k}")));
            }
        }
    }
    Ok(ds)
}

/// Eight points in 36 dimensions. Each coordinate is indexed by a pair
/// `(a, b)` of 2-subsets of `{0,1,2,3}`: points of the first cluster take
/// value 1 when their index lies in `a`, points of the second cluster take
/// -1 when their index lies in `b`. Within-cluster squared distances are
/// 24, cross-cluster squared distances 54.
pub fn gen_epsilon_counterexample() -> Result<Dataset> {
    let pairs: Vec<[usize; 2]> = (0..4).flat_map(|p| ((p + 1)..4).map(move |q| [p, q])).collect();
    debug_assert_eq!(pairs.len(), 6);
    let dims: Vec<([usize; 2], [usize; 2])> = pairs.iter().flat_map(|&a| pairs.iter().map(move |&b| (a, b))).collect();
    let mut rows = Vec::with_capacity(8);
    for p in 0..4 {
        rows.push(dims.iter().map(|(a, _)| if a.contains(&p) { 1.0 } else { 0.0 }).collect());
    }
    for q in 0..4 {
        rows.push(dims.iter().map(|(_, b)| if b.contains(&q) { -1.0 } else { 0.0 }).collect());
    }
    let labels = vec![0, 0, 0, 0, 1, 1, 1, 1];
    let ds = Dataset::from_rows("epsilon_counterexample", &rows, Some(labels))?;

    for i in 0..8 {
        for j in (i + 1)..8 {
            let d2: f64 = ds.point(i).iter().zip(ds.point(j).iter()).map(|(a, b)| (a - b) * (a - b)).sum();
            let expected = if (i < 4) == (j < 4) { EPSILON_COUNTEREXAMPLE_RADIUS_SQ } else { 54.0 };
            if d2 != expected {
                return Err(Error::InvalidParameter(format!("epsilon counterexample distance identity failed at ({i}, {j}): {d2}")));
            }
        }
    }
    Ok(ds)
}

/// The two small witness sets showing that the Gaussian kernel admits
/// neither coordinate-separable nor monotone feature maps.
#[derive(Debug, Clone)]
pub struct FeatureMapWitnesses {
    /// `(0,0), (1,0), (1,1)` with `K12 + K23 < 1` at `separable_gamma`.
    pub separable: Dataset,
    pub separable_gamma: f64,
    /// Three increasing scalars with `K12 + K23 < K13 + 1` at `monotone_gamma`.
    pub monotone: Dataset,
    pub monotone_gamma: f64,
}

pub fn gen_featuremap_witnesses() -> Result<FeatureMapWitnesses> {
    let separable = Dataset::from_rows("separable_witness", &[vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0]], None)?;
    let separable_gamma = 2.0;
    let g = KernelSpec::gaussian(separable_gamma);
    let k12 = eval_kernel(&g, separable.point(0), separable.point(1))?;
    let k23 = eval_kernel(&g, separable.point(1), separable.point(2))?;
    if !(k12 + k23 < 1.0) {
        return Err(Error::InvalidParameter("separable witness inequality failed".into()));
    }

    let monotone = Dataset::from_rows("monotone_witness", &[vec![0.0], vec![3.0], vec![6.0]], None)?;
    let monotone_gamma = 1.0;
    let g = KernelSpec::gaussian(monotone_gamma);
    let k12 = eval_kernel(&g, monotone.point(0), monotone.point(1))?;
    let k23 = eval_kernel(&g, monotone.point(1), monotone.point(2))?;
    let k13 = eval_kernel(&g, monotone.point(0), monotone.point(2))?;
    if !(k12 + k23 < k13 + 1.0) {
        return Err(Error::InvalidParameter("monotone witness inequality failed".into()));
    }

    Ok(FeatureMapWitnesses { separable, separable_gamma, monotone, monotone_gamma })
}

/// Bin probabilities of the four source distributions of the histogram
/// mixture. Chosen constants: the distributions overlap in the two heavy
/// bins and differ mostly in the two light ones.
pub fn chi2_mixture_probabilities() -> [[f64; 4]; 4] {
    [[0.50, 0.30, 0.16, 0.04], [0.30, 0.50, 0.04, 0.16], [0.40, 0.40, 0.13, 0.07], [0.50, 0.30, 0.07, 0.13]]
}

const CHI2_INSTANCES: usize = 5;
const CHI2_SAMPLES: usize = 100;

/// Five instances of 100 draws from each of the four distributions; each
/// row holds the bin frequencies of one instance (`n = 20`, `d = 4`).
/// Instances with an empty bin are redrawn so every row is strictly
/// positive.
pub fn gen_chi2_mixture(seed: u64) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let probs = chi2_mixture_probabilities();
    let mut rows = Vec::with_capacity(probs.len() * CHI2_INSTANCES);
    let mut labels = Vec::with_capacity(rows.capacity());
    for (label, p) in probs.iter().enumerate() {
        let dist = WeightedIndex::new(p).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        for _ in 0..CHI2_INSTANCES {
            let counts = loop {
                let mut counts = [0usize; 4];
                for _ in 0..CHI2_SAMPLES {
                    counts[dist.sample(&mut rng)] += 1;
                }
                if counts.iter().all(|&c| c > 0) {
                    break counts;
                }
            };
            rows.push(counts.iter().map(|&c| c as f64 / CHI2_SAMPLES as f64).collect());
            labels.push(label);
        }
    }
    Dataset::from_rows("chi2_mixture", &rows, Some(labels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::gram_matrix;

    #[test]
    fn halfmoons_noiseless_points_lie_on_arcs() {
        let ds = gen_halfmoons(200, 0.0, 1).unwrap();
        assert_eq!((ds.n(), ds.d()), (200, 2));
        let labels = ds.labels().unwrap();
        for i in 0..ds.n() {
            let (x, y) = (ds.point(i)[0], ds.point(i)[1]);
            let r = if labels[i] == 0 { (x * x + y * y).sqrt() } else { ((x - 1.0).powi(2) + (y - 0.5).powi(2)).sqrt() };
            assert!((r - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn halfmoons_reproducible() {
        let a = gen_halfmoons(200, 0.05, 7).unwrap();
        let b = gen_halfmoons(200, 0.05, 7).unwrap();
        let c = gen_halfmoons(200, 0.05, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn exkmc_counterexample_layout() {
        let ds = gen_exkmc_counterexample(0.1, 10).unwrap();
        assert_eq!(ds.n(), 60);
        let labels = ds.labels().unwrap();
        for l in 0..3 {
            assert_eq!(labels.iter().filter(|&&x| x == l).count(), 20);
        }
        for i in 0..ds.n() {
            let c = labels[i] as f64 - 1.0;
            assert!(((ds.point(i)[0] - c).abs() - 0.1).abs() < 1e-15);
        }
        assert!(gen_exkmc_counterexample(0.25, 1).is_err());
        assert!(gen_exkmc_counterexample(0.1, 0).is_err());
    }

    #[test]
    fn quadratic_counterexample_gram() {
        let ds = gen_quadratic_counterexample().unwrap();
        let g = gram_matrix(&KernelSpec::quadratic(), &ds).unwrap();
        assert_eq!(g.get(0, 1), 1.0);
        assert_eq!(g.get(2, 3), 1.0);
        assert_eq!(g.get(0, 2), 0.0);
        assert_eq!(g.get(1, 3), 0.0);
    }

    #[test]
    fn epsilon_counterexample_gram_is_block_diagonal() {
        let ds = gen_epsilon_counterexample().unwrap();
        assert_eq!((ds.n(), ds.d()), (8, 36));
        let g = gram_matrix(&KernelSpec::epsilon_neighborhood(EPSILON_COUNTEREXAMPLE_RADIUS_SQ.sqrt()), &ds).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                let same = (i < 4) == (j < 4);
                assert_eq!(g.get(i, j), if same { 1.0 } else { 0.0 }, "({i},{j})");
            }
        }
    }

    #[test]
    fn featuremap_witness_inequalities() {
        let w = gen_featuremap_witnesses().unwrap();
        let g = gram_matrix(&KernelSpec::gaussian(w.separable_gamma), &w.separable).unwrap();
        assert!(g.get(0, 1) + g.get(1, 2) < 1.0);
        let g = gram_matrix(&KernelSpec::gaussian(w.monotone_gamma), &w.monotone).unwrap();
        assert!(g.get(0, 1) + g.get(1, 2) < g.get(0, 2) + 1.0);
    }

    #[test]
    fn chi2_mixture_rows_are_frequencies() {
        let ds = gen_chi2_mixture(3).unwrap();
        assert_eq!((ds.n(), ds.d()), (20, 4));
        for i in 0..ds.n() {
            let s: f64 = ds.point(i).sum();
            assert!((s - 1.0).abs() < 1e-12);
            assert!(ds.point(i).iter().all(|&v| v > 0.0));
        }
        assert_eq!(ds, gen_chi2_mixture(3).unwrap());
    }
}

//! Running moments and least-squares fits used by the diagnostics.

/// Welford accumulator for mean and sample variance.
#[derive(Debug, Clone, Copy, Default)]
pub struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance; zero with fewer than two samples.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn std_error(&self) -> f64 {
        if self.n == 0 {
            return f64::INFINITY;
        }
        (self.variance() / self.n as f64).sqrt()
    }

    /// Combine two accumulators (Chan et al. parallel update).
    pub fn merge(&self, other: &Moments) -> Moments {
        if self.n == 0 {
            return *other;
        }
        if other.n == 0 {
            return *self;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        let mean = self.mean + delta * other.n as f64 / n as f64;
        let m2 = self.m2 + other.m2 + delta * delta * (self.n as f64 * other.n as f64) / n as f64;
        Moments { n, mean, m2 }
    }
}

impl FromIterator<f64> for Moments {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut m = Moments::new();
        for x in iter {
            m.push(x);
        }
        m
    }
}

/// Derives an independent 64-bit seed for sub-stream `index` of `master`
/// (SplitMix64 finalizer over the pair).
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Ordinary least squares fit `y ≈ X β` with coefficient standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub residual_variance: f64,
}

/// Solves the normal equations by Gaussian elimination with partial pivoting.
/// Each row of `design` is one observation. Returns `None` when the design is
/// rank deficient or there are fewer observations than columns.
pub fn ols(design: &[Vec<f64>], y: &[f64]) -> Option<OlsFit> {
    let n = design.len();
    if n == 0 || n != y.len() {
        return None;
    }
    let p = design[0].len();
    if p == 0 || n < p || design.iter().any(|r| r.len() != p) {
        return None;
    }
    let mut xtx = vec![vec![0.0; p]; p];
    let mut xty = vec![0.0; p];
    for (row, &yi) in design.iter().zip(y) {
        for i in 0..p {
            xty[i] += row[i] * yi;
            for j in 0..p {
                xtx[i][j] += row[i] * row[j];
            }
        }
    }
    let inv = invert(&xtx)?;
    let coefficients: Vec<f64> = (0..p)
        .map(|i| (0..p).map(|j| inv[i][j] * xty[j]).sum())
        .collect();
    let rss: f64 = design
        .iter()
        .zip(y)
        .map(|(row, &yi)| {
            let fit: f64 = row.iter().zip(&coefficients).map(|(a, b)| a * b).sum();
            (yi - fit).powi(2)
        })
        .sum();
    let residual_variance = if n > p { rss / (n - p) as f64 } else { 0.0 };
    let std_errors = (0..p)
        .map(|i| (residual_variance * inv[i][i]).max(0.0).sqrt())
        .collect();
    Some(OlsFit {
        coefficients,
        std_errors,
        residual_variance,
    })
}

fn invert(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let p = a.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..p).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    let scale = a
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0f64, |s, x| s.max(x.abs()));
    for col in 0..p {
        let pivot = (col..p).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[pivot][col].abs() <= 1e-12 * scale.max(1.0) {
            return None;
        }
        m.swap(col, pivot);
        let d = m[col][col];
        for v in m[col].iter_mut() {
            *v /= d;
        }
        for r in 0..p {
            if r != col {
                let f = m[r][col];
                if f != 0.0 {
                    for c in 0..2 * p {
                        m[r][c] -= f * m[col][c];
                    }
                }
            }
        }
    }
    Some(m.into_iter().map(|r| r[p..].to_vec()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn welford_matches_two_pass() {
        let xs = [1.0, 4.0, 2.5, -3.0, 7.25];
        let m: Moments = xs.iter().copied().collect();
        let mean = xs.iter().sum::<f64>() / 5.0;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 4.0;
        assert!((m.mean() - mean).abs() < 1e-12);
        assert!((m.variance() - var).abs() < 1e-12);
    }

    #[test]
    fn merge_is_order_independent() {
        let a: Moments = [1.0, 2.0, 3.0].into_iter().collect();
        let b: Moments = [10.0, -1.0].into_iter().collect();
        let all: Moments = [1.0, 2.0, 3.0, 10.0, -1.0].into_iter().collect();
        for m in [a.merge(&b), b.merge(&a)] {
            assert!((m.mean() - all.mean()).abs() < 1e-12);
            assert!((m.variance() - all.variance()).abs() < 1e-12);
        }
    }

    #[test]
    fn ols_recovers_exact_plane() {
        let mut design = Vec::new();
        let mut y = Vec::new();
        for a in 0..3 {
            for b in 0..3 {
                let (x1, x2) = (a as f64, (b as f64).powi(2));
                design.push(vec![1.0, x1, x2]);
                y.push(0.5 + 2.0 * x1 - 0.25 * x2);
            }
        }
        let fit = ols(&design, &y).unwrap();
        for (c, e) in fit.coefficients.iter().zip([0.5, 2.0, -0.25]) {
            assert!((c - e).abs() < 1e-10);
        }
        assert!(fit.residual_variance < 1e-20);
    }

    #[test]
    fn derived_seeds_differ() {
        let seeds: std::collections::HashSet<u64> = (0..1000).map(|i| derive_seed(7, i)).collect();
        assert_eq!(seeds.len(), 1000);
        assert_ne!(derive_seed(7, 0), derive_seed(8, 0));
        assert_eq!(derive_seed(7, 3), derive_seed(7, 3));
    }

    #[test]
    fn ols_rejects_rank_deficient() {
        let design = vec![vec![1.0, 2.0], vec![2.0, 4.0], vec![3.0, 6.0]];
        assert!(ols(&design, &[1.0, 2.0, 3.0]).is_none());
    }
}

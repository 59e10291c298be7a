use alloc::vec::Vec;

/// Truncated Poisson(λ) probabilities `w_k` for `k in left..=right`, with the
/// discarded mass below `eps` and the kept weights renormalized to sum to 1.
#[derive(Clone, Debug)]
pub struct PoissonWindow {
    pub left: usize,
    pub weights: Vec<f64>,
    /// Rigorous upper bound on the probability outside the window.
    pub discarded: f64,
}

impl PoissonWindow {
    pub fn new(lambda: f64, eps: f64) -> Self {
        debug_assert!(lambda >= 0.0 && eps > 0.0);
        if lambda == 0.0 {
            return PoissonWindow {
                left: 0,
                weights: alloc::vec![1.0],
                discarded: 0.0,
            };
        }
        let mode = libm::floor(lambda) as usize;
        let log_w = -lambda + mode as f64 * libm::log(lambda) - libm::lgamma(mode as f64 + 1.0);
        let w_mode = libm::exp(log_w);

        // right tail: w_{k+1} = w_k λ/(k+1), geometric bound with ratio λ/(k+1)
        let mut right = Vec::new();
        let mut w = w_mode;
        let mut k = mode;
        let right_bound = loop {
            let r = lambda / (k as f64 + 1.0);
            let bound = if r < 1.0 { w * r / (1.0 - r) } else { f64::INFINITY };
            if bound < 0.5 * eps {
                break bound;
            }
            w *= r;
            k += 1;
            right.push(w);
        };

        // left tail: w_{k-1} = w_k k/λ, geometric bound with ratio k/λ
        let mut left = Vec::new();
        let mut w = w_mode;
        let mut k = mode;
        let left_bound = loop {
            if k == 0 {
                break 0.0;
            }
            let r = k as f64 / lambda;
            let bound = if r < 1.0 { w * r / (1.0 - r) } else { f64::INFINITY };
            if bound < 0.5 * eps {
                break bound;
            }
            w *= r;
            k -= 1;
            left.push(w);
        };

        let first = mode - left.len();
        let mut weights: Vec<f64> = left.into_iter().rev().collect();
        weights.push(w_mode);
        weights.extend(right);
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|v| *v /= total);
        PoissonWindow {
            left: first,
            weights,
            discarded: left_bound + right_bound,
        }
    }

    pub fn right(&self) -> usize {
        self.left + self.weights.len() - 1
    }

    pub fn weight(&self, k: usize) -> f64 {
        if k < self.left || k > self.right() {
            0.0
        } else {
            self.weights[k - self.left]
        }
    }

    /// `P(N > k)` for `k = 0..=right`, accumulated from the top.
    pub fn survival(&self) -> Vec<f64> {
        let right = self.right();
        let mut out = alloc::vec![0.0; right + 1];
        let mut acc = 0.0;
        for k in (0..=right).rev() {
            out[k] = acc;
            acc += self.weight(k);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn direct(lambda: f64, k: usize) -> f64 {
        libm::exp(-lambda + k as f64 * libm::log(lambda) - libm::lgamma(k as f64 + 1.0))
    }

    #[test]
    fn matches_direct_pmf() {
        for &lambda in &[1e-9, 0.3, 1.0, 7.5, 40.0, 1234.5, 20000.0] {
            let w = PoissonWindow::new(lambda, 1e-13);
            assert!(w.discarded < 1e-13);
            let total: f64 = w.weights.iter().sum();
            assert!((total - 1.0).abs() < 1e-14);
            for k in w.left..=w.right() {
                let d = direct(lambda, k);
                assert!(
                    (w.weight(k) - d).abs() <= 1e-10 * d.max(1e-300) + 1e-13,
                    "λ={lambda} k={k}"
                );
            }
            // mean of the window is λ
            let mean: f64 = (w.left..=w.right()).map(|k| k as f64 * w.weight(k)).sum();
            assert!((mean - lambda).abs() < 1e-9 * lambda.max(1.0));
        }
    }

    #[test]
    fn survival_sums_to_mean() {
        let lambda = 12.25;
        let w = PoissonWindow::new(lambda, 1e-15);
        let s: f64 = w.survival().iter().sum();
        assert!((s - lambda).abs() < 1e-10);
        assert!((w.survival()[0] - (1.0 - libm::exp(-lambda))).abs() < 1e-14);
    }

    #[test]
    fn zero_rate_is_identity() {
        let w = PoissonWindow::new(0.0, 1e-10);
        assert_eq!((w.left, w.right(), w.weight(0)), (0, 0, 1.0));
    }
}

//! Small numerical helpers shared across modules: nonuniform finite
//! difference stencils, grid builders, robust trend fits, and a tiny
//! deterministic RNG for oracle sweeps.

/// First derivative from three points on a nonuniform grid, evaluated at the
/// middle point.
pub fn d1_nonuniform(x0: f64, x1: f64, x2: f64, f0: f64, f1: f64, f2: f64) -> f64 {
    let hl = x1 - x0;
    let hr = x2 - x1;
    (hl * hl * f2 + (hr * hr - hl * hl) * f1 - hr * hr * f0) / (hl * hr * (hl + hr))
}

/// Second derivative from three points on a nonuniform grid, evaluated at the
/// middle point.
pub fn d2_nonuniform(x0: f64, x1: f64, x2: f64, f0: f64, f1: f64, f2: f64) -> f64 {
    let hl = x1 - x0;
    let hr = x2 - x1;
    2.0 * (hl * f2 - (hl + hr) * f1 + hr * f0) / (hl * hr * (hl + hr))
}

/// `n` logarithmically spaced points from `a` to `b` inclusive. Requires
/// `a, b > 0` and `n >= 2`.
pub fn logspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    assert!(a > 0.0 && b > 0.0 && n >= 2);
    let (la, lb) = (a.ln(), b.ln());
    (0..n)
        .map(|i| (la + (lb - la) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// `n` linearly spaced points from `a` to `b` inclusive.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2);
    (0..n)
        .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Theil–Sen slope estimate: median over all pairwise slopes. Used for trend
/// tests where a least-squares fit would be dragged by outliers.
pub fn theil_sen_slope(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let mut slopes = Vec::new();
    for i in 0..x.len() {
        for j in (i + 1)..x.len() {
            if (x[j] - x[i]).abs() > 1e-300 {
                slopes.push((y[j] - y[i]) / (x[j] - x[i]));
            }
        }
    }
    assert!(!slopes.is_empty(), "need at least two distinct abscissae");
    slopes.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = slopes.len();
    if n % 2 == 1 {
        slopes[n / 2]
    } else {
        0.5 * (slopes[n / 2 - 1] + slopes[n / 2])
    }
}

/// Theil–Sen slope on log-log axes; entries with nonpositive coordinates are
/// skipped.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let mut lx = Vec::new();
    let mut ly = Vec::new();
    for (&a, &b) in x.iter().zip(y) {
        if a > 0.0 && b > 0.0 {
            lx.push(a.ln());
            ly.push(b.ln());
        }
    }
    theil_sen_slope(&lx, &ly)
}

/// Deterministic xorshift64* generator for reproducible random sweeps in
/// oracle comparisons.
pub struct Rng(u64);

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng(seed.max(1))
    }

    pub fn next_u64(&mut self) -> u64 {
        let mut x = self.0;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        self.0 = x;
        x.wrapping_mul(0x2545_f491_4f6c_dd1d)
    }

    /// Uniform sample in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    /// Uniform sample in `[a, b)`.
    pub fn range(&mut self, a: f64, b: f64) -> f64 {
        a + (b - a) * self.uniform()
    }

    /// Log-uniform sample in `[a, b)`, both positive.
    pub fn log_range(&mut self, a: f64, b: f64) -> f64 {
        (self.range(a.ln(), b.ln())).exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stencils_recover_quadratic() {
        // f(x) = 3x² - 2x + 1 on an uneven triple.
        let f = |x: f64| 3.0 * x * x - 2.0 * x + 1.0;
        let (x0, x1, x2) = (0.3, 0.45, 0.7);
        let d1 = d1_nonuniform(x0, x1, x2, f(x0), f(x1), f(x2));
        let d2 = d2_nonuniform(x0, x1, x2, f(x0), f(x1), f(x2));
        assert!((d1 - (6.0 * x1 - 2.0)).abs() < 1e-12);
        assert!((d2 - 6.0).abs() < 1e-10);
    }

    #[test]
    fn theil_sen_ignores_outlier() {
        let x = vec![1.0, 2.0, 3.0, 4.0, 5.0];
        let y = vec![2.0, 4.0, 6.0, 100.0, 10.0];
        let s = theil_sen_slope(&x, &y);
        assert!((s - 2.0).abs() < 1.0, "slope {s}");
    }

    #[test]
    fn rng_is_deterministic() {
        let mut a = Rng::new(42);
        let mut b = Rng::new(42);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }
}

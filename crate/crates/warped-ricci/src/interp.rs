//! Monotone (Fritsch–Carlson) cubic interpolation for tabulated profile
//! data. Shape preservation matters here: barrier evaluations must not
//! overshoot between nodes.

/// Piecewise-cubic Hermite interpolant with Fritsch–Carlson limited slopes.
#[derive(Debug, Clone)]
pub struct MonotoneCubic {
    x: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>,
}

impl MonotoneCubic {
    /// Build an interpolant over strictly increasing abscissae.
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        assert_eq!(x.len(), y.len());
        assert!(x.len() >= 2, "need at least two nodes");
        for w in x.windows(2) {
            assert!(w[1] > w[0], "abscissae must be strictly increasing");
        }
        let n = x.len();
        let mut d = vec![0.0; n - 1];
        for i in 0..n - 1 {
            d[i] = (y[i + 1] - y[i]) / (x[i + 1] - x[i]);
        }
        let mut m = vec![0.0; n];
        m[0] = d[0];
        m[n - 1] = d[n - 2];
        for i in 1..n - 1 {
            if d[i - 1] * d[i] <= 0.0 {
                m[i] = 0.0;
            } else {
                // Weighted harmonic mean keeps the interpolant monotone on
                // monotone data.
                let h0 = x[i] - x[i - 1];
                let h1 = x[i + 1] - x[i];
                let w1 = 2.0 * h1 + h0;
                let w2 = h1 + 2.0 * h0;
                m[i] = (w1 + w2) / (w1 / d[i - 1] + w2 / d[i]);
            }
        }
        // Limit endpoint slopes as in Fritsch-Carlson.
        for (i, di) in [(0usize, 0usize), (n - 1, n - 2)] {
            if m[i] * d[di] <= 0.0 {
                m[i] = 0.0;
            } else if d[di].abs() > 0.0 && (m[i] / d[di]).abs() > 3.0 {
                m[i] = 3.0 * d[di];
            }
        }
        MonotoneCubic { x, y, m }
    }

    /// Build from slices.
    pub fn from_slices(x: &[f64], y: &[f64]) -> Self {
        Self::new(x.to_vec(), y.to_vec())
    }

    pub fn x_min(&self) -> f64 {
        self.x[0]
    }

    pub fn x_max(&self) -> f64 {
        *self.x.last().unwrap()
    }

    fn segment(&self, x: f64) -> usize {
        match self.x.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
            Ok(i) => i.min(self.x.len() - 2),
            Err(i) => i.saturating_sub(1).min(self.x.len() - 2),
        }
    }

    /// Interpolated value; clamps to the end segments outside the table.
    pub fn eval(&self, xq: f64) -> f64 {
        let i = self.segment(xq);
        let h = self.x[i + 1] - self.x[i];
        let t = (xq - self.x[i]) / h;
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.y[i] + h10 * h * self.m[i] + h01 * self.y[i + 1] + h11 * h * self.m[i + 1]
    }

    /// Derivative of the interpolant.
    pub fn eval_deriv(&self, xq: f64) -> f64 {
        let i = self.segment(xq);
        let h = self.x[i + 1] - self.x[i];
        let t = (xq - self.x[i]) / h;
        let t2 = t * t;
        let dh00 = (6.0 * t2 - 6.0 * t) / h;
        let dh10 = 3.0 * t2 - 4.0 * t + 1.0;
        let dh01 = (-6.0 * t2 + 6.0 * t) / h;
        let dh11 = 3.0 * t2 - 2.0 * t;
        dh00 * self.y[i] + dh10 * self.m[i] + dh01 * self.y[i + 1] + dh11 * self.m[i + 1]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::linspace;

    #[test]
    fn reproduces_nodes_exactly() {
        let x = vec![0.0, 0.5, 1.3, 2.0, 3.1];
        let y = vec![1.0, 0.7, 0.5, 0.2, 0.1];
        let s = MonotoneCubic::from_slices(&x, &y);
        for (a, b) in x.iter().zip(&y) {
            assert!((s.eval(*a) - b).abs() < 1e-14);
        }
    }

    #[test]
    fn monotone_data_stays_monotone() {
        let x = linspace(0.0, 1.0, 9);
        let y: Vec<f64> = x.iter().map(|t| 1.0 / (1.0 + 5.0 * t)).collect();
        let s = MonotoneCubic::from_slices(&x, &y);
        let probes = linspace(0.0, 1.0, 400);
        let mut prev = f64::INFINITY;
        for p in probes {
            let v = s.eval(p);
            assert!(v <= prev + 1e-12, "overshoot at {p}");
            prev = v;
        }
    }

    #[test]
    fn close_to_smooth_function() {
        let x = linspace(0.1, 1.4, 60);
        let y: Vec<f64> = x.iter().map(|t| t.sin()).collect();
        let s = MonotoneCubic::from_slices(&x, &y);
        for p in linspace(0.12, 1.38, 123) {
            assert!((s.eval(p) - p.sin()).abs() < 3e-5);
            assert!((s.eval_deriv(p) - p.cos()).abs() < 3e-3);
        }
    }
}

//! Divided differences of `exp` without cancellation.
//!
//! `exp[x_0, ..., x_n]` is the top-right entry of `exp(Z)`, where `Z` is
//! upper bidiagonal with the nodes on the diagonal and ones above it. Off the
//! diagonal `Z` is non-negative, so `exp(Z)` and all its powers are entrywise
//! non-negative and scaling-and-squaring never subtracts.

/// `log exp[x_0, ..., x_n]`. Nodes may repeat. Returns `-inf` on underflow.
pub(crate) fn log_exp_divided_difference(nodes: &[f64]) -> f64 {
    let n = nodes.len();
    assert!(n > 0, "need at least one node");
    let mu = nodes.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if n == 1 {
        return mu;
    }
    let lo = nodes.iter().copied().fold(f64::INFINITY, f64::min);
    let spread = mu - lo;
    let mut squarings = 0u32;
    while spread / f64::from(2u32).powi(squarings as i32) > 0.5 {
        squarings += 1;
    }
    let sigma = f64::from(2u32).powi(squarings as i32);

    let diag: Vec<f64> = nodes.iter().map(|x| (x - mu) / sigma).collect();
    let off = 1.0 / sigma;

    // Taylor series; entry (i, j) first appears at power j - i, and with
    // |diagonal| <= 1/2 another 24 powers push the remainder below 1e-24.
    let mut e = Upper::identity(n);
    let mut term = Upper::identity(n);
    for m in 1..(n + 24) {
        term.mul_bidiagonal(&diag, off, 1.0 / m as f64);
        e.add_assign(&term);
    }
    for _ in 0..squarings {
        e = e.matmul(&e);
    }
    mu + e.get(0, n - 1).ln()
}

/// Dense upper-triangular matrix stored row-major.
struct Upper {
    n: usize,
    data: Vec<f64>,
}

impl Upper {
    fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    fn add_assign(&mut self, other: &Upper) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    /// `self <- c · self · W` for `W` with `diag` on the diagonal and `off`
    /// above it.
    fn mul_bidiagonal(&mut self, diag: &[f64], off: f64, c: f64) {
        let n = self.n;
        for i in 0..n {
            let row = &mut self.data[i * n..(i + 1) * n];
            for j in (i..n).rev() {
                let carry = if j > i { row[j - 1] * off } else { 0.0 };
                row[j] = c * (row[j] * diag[j] + carry);
            }
        }
    }

    fn matmul(&self, other: &Upper) -> Upper {
        let n = self.n;
        let mut out = Upper::zeros(n);
        for i in 0..n {
            for k in i..n {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in k..n {
                    out.data[i * n + j] += a * other.get(k, j);
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::ln_factorial;

    #[test]
    fn single_and_two_nodes() {
        assert_eq!(log_exp_divided_difference(&[0.3]), 0.3);
        let (a, b) = (0.2f64.ln(), 0.8f64.ln());
        let expected = ((0.8 - 0.2) / (b - a)).ln();
        assert!((log_exp_divided_difference(&[a, b]) - expected).abs() < 1e-15);
    }

    #[test]
    fn repeated_nodes_give_taylor_coefficients() {
        for n in 1..10 {
            let nodes = vec![-0.4; n];
            let expected = -0.4 - ln_factorial(n - 1);
            assert!((log_exp_divided_difference(&nodes) - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn wide_spread_matches_recursion() {
        // well separated nodes, where the textbook recursion is accurate
        let nodes = [-30.0, -12.5, -4.0, 0.0, 3.5];
        let mut table: Vec<f64> = nodes.iter().map(|x: &f64| x.exp()).collect();
        for level in 1..nodes.len() {
            for i in 0..nodes.len() - level {
                table[i] = (table[i + 1] - table[i]) / (nodes[i + level] - nodes[i]);
            }
        }
        let rel = (log_exp_divided_difference(&nodes) - table[0].ln()).abs();
        assert!(rel < 1e-13, "{rel}");
    }
}

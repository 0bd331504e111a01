//! Square banded matrices with an in-place LU factorization.
//!
//! No pivoting: the operators assembled by the solver are M-matrices plus a
//! positive diagonal shift, for which Gaussian elimination is stable.

#[derive(Debug, Clone, PartialEq)]
pub struct BandedMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    // row-major: row i holds columns i-kl ..= i+ku
    data: Vec<f64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        Self { n, kl, ku, data: vec![0.0; n * (kl + ku + 1)] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.ku, "({i}, {j}) outside band");
        i * (self.kl + self.ku + 1) + (j + self.kl - i)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j + self.kl < i || j > i + self.ku {
            return 0.0;
        }
        self.data[self.slot(i, j)]
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let s = self.slot(i, j);
        self.data[s] += v;
    }

    /// `y = self * x`
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        let w = self.kl + self.ku + 1;
        for (i, yi) in y.iter_mut().enumerate() {
            let j0 = i.saturating_sub(self.kl);
            let j1 = (i + self.ku).min(self.n - 1);
            let row = &self.data[i * w..(i + 1) * w];
            let off = j0 + self.kl - i;
            *yi = dot(&row[off..off + (j1 - j0 + 1)], &x[j0..=j1]);
        }
    }

    /// `alpha * self + beta * I`
    pub fn scaled_plus_identity(&self, alpha: f64, beta: f64) -> Self {
        let mut out = self.clone();
        for v in &mut out.data {
            *v *= alpha;
        }
        for i in 0..self.n {
            out.add(i, i, beta);
        }
        out
    }

    pub fn factor(self) -> Result<BandedLu, SingularPivot> {
        let Self { n, kl, ku, mut data } = self;
        let w = kl + ku + 1;
        let at = |i: usize, j: usize| i * w + (j + kl - i);
        for k in 0..n {
            let pivot = data[at(k, k)];
            if pivot.abs() < f64::MIN_POSITIVE || !pivot.is_finite() {
                return Err(SingularPivot { row: k, value: pivot });
            }
            let last_row = (k + kl).min(n - 1);
            let last_col = (k + ku).min(n - 1);
            let width = last_col - k;
            let (head, tail) = data.split_at_mut((k + 1) * w);
            let pivot_row = &head[at(k, k) + 1..at(k, k) + 1 + width];
            for i in k + 1..=last_row {
                let base = at(i, k) - (k + 1) * w;
                let row = &mut tail[base..base + 1 + width];
                let l = row[0] / pivot;
                row[0] = l;
                if l != 0.0 {
                    for (r, u) in row[1..].iter_mut().zip(pivot_row) {
                        *r -= l * u;
                    }
                }
            }
        }
        // column-major copies so both sweeps are contiguous axpy updates
        let mut lower = vec![0.0; n * kl];
        let mut upper = vec![0.0; n * (ku + 1)];
        for k in 0..n {
            for i in k + 1..=(k + kl).min(n - 1) {
                lower[k * kl + (i - k - 1)] = data[at(i, k)];
            }
            for i in k.saturating_sub(ku)..=k {
                upper[k * (ku + 1) + (ku + i - k)] = data[at(i, k)];
            }
        }
        Ok(BandedLu { n, kl, ku, lower, upper })
    }
}

// four independent partial sums let the adds pipeline
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
#[error("zero pivot {value} at row {row}")]
pub struct SingularPivot {
    pub row: usize,
    pub value: f64,
}

#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    // column k: multipliers of rows k+1 ..= k+kl
    lower: Vec<f64>,
    // column k: rows k-ku ..= k, diagonal last
    upper: Vec<f64>,
}

impl BandedLu {
    /// Solve in place: `b` becomes `x`.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        for k in 0..n {
            let len = kl.min(n - 1 - k);
            let (head, tail) = b.split_at_mut(k + 1);
            let x = head[k];
            if x != 0.0 {
                let col = &self.lower[k * kl..k * kl + len];
                for (t, l) in tail[..len].iter_mut().zip(col) {
                    *t -= l * x;
                }
            }
        }
        for k in (0..n).rev() {
            let col = &self.upper[k * (ku + 1)..(k + 1) * (ku + 1)];
            let x = b[k] / col[ku];
            b[k] = x;
            let len = ku.min(k);
            if x != 0.0 {
                let above = &mut b[k - len..k];
                for (t, u) in above.iter_mut().zip(&col[ku - len..ku]) {
                    *t -= u * x;
                }
            }
        }
    }
}

/// Square tridiagonal matrix stored by diagonals.
///
/// `upper[i]` is entry `(i, i+1)` and `lower[i]` is entry `(i+1, i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
}

impl Tridiagonal {
    /// Panics if the off-diagonals are not one shorter than the diagonal.
    pub fn new(lower: Vec<f64>, diag: Vec<f64>, upper: Vec<f64>) -> Self {
        assert!(!diag.is_empty(), "tridiagonal matrix must be non-empty");
        assert_eq!(lower.len() + 1, diag.len());
        assert_eq!(upper.len() + 1, diag.len());
        Self { lower, diag, upper }
    }

    pub fn size(&self) -> usize {
        self.diag.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i == j {
            self.diag[i]
        } else if j == i + 1 {
            self.upper[i]
        } else if i == j + 1 {
            self.lower[j]
        } else {
            0.0
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.size();
        (0..n)
            .map(|i| (0..n).map(|j| self.get(i, j)).collect())
            .collect()
    }

    /// `I - self`.
    pub fn identity_minus(&self) -> Self {
        Self {
            lower: self.lower.iter().map(|x| -x).collect(),
            diag: self.diag.iter().map(|x| 1.0 - x).collect(),
            upper: self.upper.iter().map(|x| -x).collect(),
        }
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        let mut s = self.diag[i];
        if i > 0 {
            s += self.lower[i - 1];
        }
        if i + 1 < self.size() {
            s += self.upper[i];
        }
        s
    }

    /// Row vector times matrix, `v · A`, written into `out`.
    pub fn left_mul_into(&self, v: &[f64], out: &mut [f64]) {
        let n = self.size();
        debug_assert_eq!(v.len(), n);
        debug_assert_eq!(out.len(), n);
        for j in 0..n {
            let mut acc = v[j] * self.diag[j];
            if j > 0 {
                acc += v[j - 1] * self.upper[j - 1];
            }
            if j + 1 < n {
                acc += v[j + 1] * self.lower[j];
            }
            out[j] = acc;
        }
    }

    /// Matrix times column vector, `A · v`.
    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        let n = self.size();
        (0..n)
            .map(|i| {
                let mut acc = self.diag[i] * v[i];
                if i > 0 {
                    acc += self.lower[i - 1] * v[i - 1];
                }
                if i + 1 < n {
                    acc += self.upper[i] * v[i + 1];
                }
                acc
            })
            .collect()
    }

    /// Solves `A x = rhs` by Thomas elimination. Returns `None` on a zero pivot.
    ///
    /// No pivoting is performed; the systems built in this crate are
    /// diagonally dominant so elimination is stable.
    pub fn solve(&self, rhs: &[f64]) -> Option<Vec<f64>> {
        let n = self.size();
        assert_eq!(rhs.len(), n);
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        let mut pivot = self.diag[0];
        if pivot == 0.0 {
            return None;
        }
        if n > 1 {
            c[0] = self.upper[0] / pivot;
        }
        d[0] = rhs[0] / pivot;
        for i in 1..n {
            pivot = self.diag[i] - self.lower[i - 1] * c[i - 1];
            if pivot == 0.0 {
                return None;
            }
            if i + 1 < n {
                c[i] = self.upper[i] / pivot;
            }
            d[i] = (rhs[i] - self.lower[i - 1] * d[i - 1]) / pivot;
        }
        for i in (0..n - 1).rev() {
            d[i] -= c[i] * d[i + 1];
        }
        Some(d)
    }
}

//! Small dense complex matrices for the MMSE/EPA covariance work.
//!
//! Covariances here are tiny (receive-antenna count, or antenna count times
//! spreading length), so a direct Gauss-Jordan inverse with partial pivoting
//! is both fast and accurate. Singular inputs are retried once with a trace-
//! scaled ridge so that zero-noise corner cases never crash.

use num_complex::Complex64;

/// Row-major square complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CMat {
    dim: usize,
    data: Vec<Complex64>,
}

impl CMat {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![Complex64::new(0.0, 0.0); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Adds `scale * v * v^H` (outer product of a column with itself).
    pub fn add_scaled_outer(&mut self, v: &[Complex64], scale: f64) {
        debug_assert_eq!(v.len(), self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                self[(i, j)] += scale * v[i] * v[j].conj();
            }
        }
    }

    /// Adds `value` to every diagonal entry.
    pub fn add_diagonal(&mut self, value: f64) {
        for i in 0..self.dim {
            self[(i, i)] += value;
        }
    }

    pub fn trace_real(&self) -> f64 {
        (0..self.dim).map(|i| self[(i, i)].re).sum()
    }

    /// Matrix-vector product.
    pub fn mul_vec(&self, v: &[Complex64]) -> Vec<Complex64> {
        debug_assert_eq!(v.len(), self.dim);
        (0..self.dim)
            .map(|i| {
                (0..self.dim)
                    .map(|j| self[(i, j)] * v[j])
                    .sum::<Complex64>()
            })
            .collect()
    }

    /// Gauss-Jordan inverse with partial pivoting.
    ///
    /// Returns `None` when a pivot underflows relative to the matrix scale.
    pub fn try_inverse(&self) -> Option<CMat> {
        let n = self.dim;
        let mut a = self.clone();
        let mut inv = CMat::identity(n);
        let scale = self
            .data
            .iter()
            .map(|x| x.norm())
            .fold(0.0f64, f64::max)
            .max(f64::MIN_POSITIVE);

        for col in 0..n {
            // Partial pivot: largest magnitude in this column at or below the diagonal.
            let pivot_row = (col..n)
                .max_by(|&r1, &r2| {
                    a[(r1, col)]
                        .norm()
                        .partial_cmp(&a[(r2, col)].norm())
                        .unwrap()
                })
                .unwrap();
            if a[(pivot_row, col)].norm() < 1e-13 * scale {
                return None;
            }
            if pivot_row != col {
                for j in 0..n {
                    a.data.swap(pivot_row * n + j, col * n + j);
                    inv.data.swap(pivot_row * n + j, col * n + j);
                }
            }
            let pivot = a[(col, col)];
            for j in 0..n {
                a[(col, j)] /= pivot;
                inv[(col, j)] /= pivot;
            }
            for row in 0..n {
                if row == col {
                    continue;
                }
                let factor = a[(row, col)];
                if factor.norm() == 0.0 {
                    continue;
                }
                for j in 0..n {
                    let a_cj = a[(col, j)];
                    let i_cj = inv[(col, j)];
                    a[(row, j)] -= factor * a_cj;
                    inv[(row, j)] -= factor * i_cj;
                }
            }
        }
        Some(inv)
    }

    /// Inverse with a ridge fallback: ill-conditioned inputs get
    /// `1e-10 * trace/dim` added to the diagonal and are inverted again.
    pub fn inverse_regularized(&self) -> CMat {
        if let Some(inv) = self.try_inverse() {
            return inv;
        }
        let mut ridged = self.clone();
        let mut ridge = (self.trace_real().abs() / self.dim as f64).max(1.0) * 1e-10;
        loop {
            ridged.add_diagonal(ridge);
            if let Some(inv) = ridged.try_inverse() {
                return inv;
            }
            ridge *= 1e3;
        }
    }
}

impl std::ops::Index<(usize, usize)> for CMat {
    type Output = Complex64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.dim + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for CMat {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.dim + j]
    }
}

/// Hermitian inner product `a^H b`.
#[inline]
pub fn dot_h(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// Squared Euclidean norm of a complex vector.
#[inline]
pub fn norm_sqr(v: &[Complex64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SimRng;

    fn random_hermitian_pd(dim: usize, rng: &mut SimRng) -> CMat {
        let mut m = CMat::zeros(dim);
        m.add_diagonal(0.5);
        for _ in 0..dim + 2 {
            let v: Vec<Complex64> = (0..dim)
                .map(|_| Complex64::new(rng.next_gaussian(), rng.next_gaussian()))
                .collect();
            m.add_scaled_outer(&v, 0.3 + rng.next_f64());
        }
        m
    }

    #[test]
    fn inverse_times_matrix_is_identity() {
        let mut rng = SimRng::new(2);
        for dim in [1, 2, 4, 8] {
            let m = random_hermitian_pd(dim, &mut rng);
            let inv = m.try_inverse().expect("positive definite");
            for i in 0..dim {
                let e = {
                    let mut col = vec![Complex64::new(0.0, 0.0); dim];
                    col[i] = Complex64::new(1.0, 0.0);
                    col
                };
                let back = m.mul_vec(&inv.mul_vec(&e));
                for (j, v) in back.iter().enumerate() {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!(
                        (v - Complex64::new(expect, 0.0)).norm() < 1e-9,
                        "dim {dim} entry ({i},{j}) = {v}"
                    );
                }
            }
        }
    }

    #[test]
    fn singular_matrix_reports_none() {
        let mut m = CMat::zeros(2);
        let v = [Complex64::new(1.0, 0.0), Complex64::new(2.0, 0.0)];
        m.add_scaled_outer(&v, 1.0);
        assert!(m.try_inverse().is_none());
    }

    #[test]
    fn regularized_inverse_never_panics() {
        let mut m = CMat::zeros(2);
        let v = [Complex64::new(1.0, 0.0), Complex64::new(2.0, 0.0)];
        m.add_scaled_outer(&v, 1.0);
        let inv = m.inverse_regularized();
        assert!(inv
            .data
            .iter()
            .all(|x| x.re.is_finite() && x.im.is_finite()));
    }

    #[test]
    fn scalar_inverse_matches_reciprocal() {
        let mut m = CMat::zeros(1);
        m[(0, 0)] = Complex64::new(0.25, 0.0);
        let inv = m.try_inverse().unwrap();
        assert!((inv[(0, 0)].re - 4.0).abs() < 1e-12);
    }
}

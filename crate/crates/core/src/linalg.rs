//! Small dense linear algebra: symmetric indefinite LDLᵀ with inertia, LU, and a
//! coordinate-format sparse matrix used to exchange derivative structure.

/// Coordinate-format matrix. Duplicate entries are summed on densification.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

impl SparseMatrix {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        SparseMatrix {
            nrows,
            ncols,
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.nrows && col < self.ncols);
        self.entries.push((row, col, value));
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.nrows, self.ncols);
        for &(r, c, v) in &self.entries {
            m[(r, c)] += v;
        }
        m
    }

    /// Column indices with a structurally present entry in `row`, sorted and deduplicated.
    pub fn row_pattern(&self, row: usize) -> Vec<usize> {
        let mut cols: Vec<usize> = self
            .entries
            .iter()
            .filter(|e| e.0 == row)
            .map(|e| e.1)
            .collect();
        cols.sort_unstable();
        cols.dedup();
        cols
    }
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        DenseMatrix {
            nrows,
            ncols,
            data: vec![0.0; nrows * ncols],
        }
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.ncols..(r + 1) * self.ncols]
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.nrows)
            .map(|r| self.row(r).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn tr_mul_vec(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.ncols];
        for (r, &yr) in y.iter().enumerate() {
            if yr != 0.0 {
                for (o, a) in out.iter_mut().zip(self.row(r)) {
                    *o += a * yr;
                }
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl std::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        &self.data[r * self.ncols + c]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        &mut self.data[r * self.ncols + c]
    }
}

/// Counts of positive, negative and zero eigenvalues.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Inertia {
    pub positive: usize,
    pub negative: usize,
    pub zero: usize,
}

#[derive(Debug, Clone, Copy)]
enum Pivot {
    One(f64),
    Two(f64, f64, f64),
}

/// `P A Pᵀ = L D Lᵀ` with unit lower-triangular `L` and 1x1/2x2 diagonal blocks `D`,
/// computed with Bunch–Kaufman partial pivoting.
#[derive(Debug, Clone)]
pub struct Ldlt {
    n: usize,
    /// Strictly lower part holds `L`.
    l: Vec<f64>,
    /// `perm[k]` is the original row moved to position `k`.
    perm: Vec<usize>,
    pivots: Vec<(usize, Pivot)>,
    inertia: Inertia,
}

const BK_ALPHA: f64 = 0.640_388_203_202_208_4; // (1 + sqrt 17) / 8

impl Ldlt {
    /// Factor a symmetric matrix given in full storage. Only the lower triangle is read.
    /// Pivots below `zero_tol * max|A|` are treated as exact zeros.
    pub fn factor(a: &DenseMatrix, zero_tol: f64) -> Ldlt {
        Self::factor_abs(a, zero_tol * a.max_abs().max(f64::MIN_POSITIVE))
    }

    /// As [`Ldlt::factor`] with an absolute zero-pivot threshold.
    pub fn factor_abs(a: &DenseMatrix, threshold: f64) -> Ldlt {
        assert_eq!(a.nrows, a.ncols);
        let n = a.nrows;
        let mut m = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let v = a[(i, j)];
                m[i * n + j] = v;
                m[j * n + i] = v;
            }
        }
        let mut perm: Vec<usize> = (0..n).collect();
        let mut pivots = Vec::new();
        let mut inertia = Inertia {
            positive: 0,
            negative: 0,
            zero: 0,
        };

        let swap = |m: &mut Vec<f64>, perm: &mut Vec<usize>, p: usize, q: usize| {
            if p == q {
                return;
            }
            for c in 0..n {
                m.swap(p * n + c, q * n + c);
            }
            for r in 0..n {
                m.swap(r * n + p, r * n + q);
            }
            perm.swap(p, q);
        };

        let mut k = 0;
        while k < n {
            let akk = m[k * n + k].abs();
            let (mut r, mut colmax) = (k, 0.0);
            for i in k + 1..n {
                let v = m[i * n + k].abs();
                if v > colmax {
                    colmax = v;
                    r = i;
                }
            }
            if akk.max(colmax) <= threshold {
                // Column is numerically zero: record a zero pivot and drop the column.
                for i in k..n {
                    m[i * n + k] = 0.0;
                    m[k * n + i] = 0.0;
                }
                inertia.zero += 1;
                pivots.push((k, Pivot::One(0.0)));
                k += 1;
                continue;
            }
            let two_by_two = if akk >= BK_ALPHA * colmax {
                false
            } else {
                let mut rowmax = 0.0_f64;
                for j in k..n {
                    if j != r {
                        rowmax = rowmax.max(m[r * n + j].abs());
                    }
                }
                if akk * rowmax >= BK_ALPHA * colmax * colmax {
                    false
                } else if m[r * n + r].abs() >= BK_ALPHA * rowmax {
                    swap(&mut m, &mut perm, k, r);
                    false
                } else {
                    swap(&mut m, &mut perm, k + 1, r);
                    true
                }
            };

            if !two_by_two {
                let d = m[k * n + k];
                if d.abs() <= threshold {
                    inertia.zero += 1;
                    pivots.push((k, Pivot::One(0.0)));
                    for i in k + 1..n {
                        m[i * n + k] = 0.0;
                    }
                    k += 1;
                    continue;
                }
                if d > 0.0 {
                    inertia.positive += 1;
                } else {
                    inertia.negative += 1;
                }
                for i in k + 1..n {
                    let lik = m[i * n + k] / d;
                    if lik != 0.0 {
                        for j in k + 1..=i {
                            m[i * n + j] -= lik * m[j * n + k];
                        }
                    }
                }
                for i in k + 1..n {
                    m[i * n + k] /= d;
                    // keep the upper triangle in sync for later pivot searches
                    for j in k + 1..i {
                        m[j * n + i] = m[i * n + j];
                    }
                }
                pivots.push((k, Pivot::One(d)));
                k += 1;
            } else {
                let a = m[k * n + k];
                let b = m[(k + 1) * n + k];
                let c = m[(k + 1) * n + k + 1];
                let det = a * c - b * b;
                let tr = a + c;
                let disc = ((a - c) * (a - c) + 4.0 * b * b).sqrt();
                for ev in [0.5 * (tr + disc), 0.5 * (tr - disc)] {
                    if ev.abs() <= threshold {
                        inertia.zero += 1;
                    } else if ev > 0.0 {
                        inertia.positive += 1;
                    } else {
                        inertia.negative += 1;
                    }
                }
                // [l1 l2] = [a_ik a_i,k+1] D⁻¹
                let mut lcol = Vec::with_capacity(n - k - 2);
                for i in k + 2..n {
                    let x = m[i * n + k];
                    let y = m[i * n + k + 1];
                    let l1 = (c * x - b * y) / det;
                    let l2 = (a * y - b * x) / det;
                    lcol.push((l1, l2));
                }
                for i in k + 2..n {
                    let (l1, l2) = lcol[i - k - 2];
                    for j in k + 2..=i {
                        let wj = (m[j * n + k], m[j * n + k + 1]);
                        m[i * n + j] -= l1 * wj.0 + l2 * wj.1;
                    }
                }
                for i in k + 2..n {
                    let (l1, l2) = lcol[i - k - 2];
                    m[i * n + k] = l1;
                    m[i * n + k + 1] = l2;
                    for j in k + 2..i {
                        m[j * n + i] = m[i * n + j];
                    }
                }
                m[(k + 1) * n + k] = 0.0;
                pivots.push((k, Pivot::Two(a, b, c)));
                k += 2;
            }
        }
        Ldlt {
            n,
            l: m,
            perm,
            pivots,
            inertia,
        }
    }

    pub fn inertia(&self) -> Inertia {
        self.inertia
    }

    pub fn is_singular(&self) -> bool {
        self.inertia.zero > 0
    }

    /// Solve `A x = b`. Zero pivots contribute a zero component (minimum-norm in that block).
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        // forward: L y = b
        for (k, piv) in &self.pivots {
            let k = *k;
            let width = match piv {
                Pivot::One(_) => 1,
                Pivot::Two(..) => 2,
            };
            for col in k..k + width {
                let v = y[col];
                if v != 0.0 {
                    for i in k + width..n {
                        y[i] -= self.l[i * n + col] * v;
                    }
                }
            }
        }
        // diagonal
        for (k, piv) in &self.pivots {
            let k = *k;
            match *piv {
                Pivot::One(d) => y[k] = if d == 0.0 { 0.0 } else { y[k] / d },
                Pivot::Two(a, b, c) => {
                    let det = a * c - b * b;
                    let (u, v) = (y[k], y[k + 1]);
                    y[k] = (c * u - b * v) / det;
                    y[k + 1] = (a * v - b * u) / det;
                }
            }
        }
        // backward: Lᵀ x = y
        for (k, piv) in self.pivots.iter().rev() {
            let k = *k;
            let width = match piv {
                Pivot::One(_) => 1,
                Pivot::Two(..) => 2,
            };
            for col in (k..k + width).rev() {
                let mut s = y[col];
                for i in k + width..n {
                    s -= self.l[i * n + col] * y[i];
                }
                y[col] = s;
            }
        }
        let mut x = vec![0.0; n];
        for (k, &p) in self.perm.iter().enumerate() {
            x[p] = y[k];
        }
        x
    }
}

/// LU factorization with partial pivoting.
/// Symmetric scaling `D A D` with `D` chosen so every row of the result has
/// infinity norm close to one. Inertia is unchanged by the congruence.
pub fn equilibrate(a: &DenseMatrix) -> (DenseMatrix, Vec<f64>) {
    let n = a.nrows;
    let mut d = vec![1.0; n];
    let mut m = a.clone();
    for _ in 0..8 {
        let mut r = vec![1.0; n];
        let mut done = true;
        for i in 0..n {
            let big = m.row(i).iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
            if big > 0.0 {
                r[i] = 1.0 / big.sqrt();
                done &= (big - 1.0).abs() < 1e-2;
            }
        }
        if done {
            break;
        }
        for i in 0..n {
            d[i] *= r[i];
            for j in 0..n {
                m[(i, j)] *= r[i] * r[j];
            }
        }
    }
    (m, d)
}

/// LDLᵀ of an equilibrated symmetric matrix; solves with the original matrix.
#[derive(Debug, Clone)]
pub struct ScaledLdlt {
    ldlt: Ldlt,
    d: Vec<f64>,
}

impl ScaledLdlt {
    pub fn factor(a: &DenseMatrix, threshold: f64) -> ScaledLdlt {
        let (m, d) = equilibrate(a);
        ScaledLdlt {
            ldlt: Ldlt::factor_abs(&m, threshold),
            d,
        }
    }

    pub fn inertia(&self) -> Inertia {
        self.ldlt.inertia()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let rhs: Vec<f64> = b.iter().zip(&self.d).map(|(v, d)| v * d).collect();
        let y = self.ldlt.solve(&rhs);
        y.iter().zip(&self.d).map(|(v, d)| v * d).collect()
    }
}

#[derive(Debug, Clone)]
pub struct Lu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
    singular: bool,
}

impl Lu {
    pub fn factor(a: &DenseMatrix, zero_tol: f64) -> Lu {
        assert_eq!(a.nrows, a.ncols);
        let n = a.nrows;
        let mut lu = a.data.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let threshold = zero_tol * a.max_abs().max(f64::MIN_POSITIVE);
        let mut singular = false;
        for k in 0..n {
            let (mut p, mut best) = (k, lu[k * n + k].abs());
            for i in k + 1..n {
                let v = lu[i * n + k].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best <= threshold {
                singular = true;
                continue;
            }
            if p != k {
                for c in 0..n {
                    lu.swap(k * n + c, p * n + c);
                }
                perm.swap(k, p);
            }
            let d = lu[k * n + k];
            for i in k + 1..n {
                let f = lu[i * n + k] / d;
                lu[i * n + k] = f;
                if f != 0.0 {
                    for c in k + 1..n {
                        lu[i * n + c] -= f * lu[k * n + c];
                    }
                }
            }
        }
        Lu {
            n,
            lu,
            perm,
            singular,
        }
    }

    pub fn is_singular(&self) -> bool {
        self.singular
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = y[i];
            for c in 0..i {
                s -= self.lu[i * n + c] * y[c];
            }
            y[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for c in i + 1..n {
                s -= self.lu[i * n + c] * y[c];
            }
            y[i] = s / self.lu[i * n + i];
        }
        y
    }
}

pub fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn norm1(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use proptest::prelude::*;

    fn to_na(a: &DenseMatrix) -> DMatrix<f64> {
        DMatrix::from_row_slice(a.nrows, a.ncols, &a.data)
    }

    fn random_symmetric(n: usize, values: &[f64]) -> DenseMatrix {
        let mut a = DenseMatrix::zeros(n, n);
        let mut it = values.iter().cycle();
        for i in 0..n {
            for j in 0..=i {
                let v = *it.next().unwrap();
                a[(i, j)] = v;
                a[(j, i)] = v;
            }
        }
        a
    }

    fn eigen_inertia(a: &DenseMatrix) -> Inertia {
        let eig = to_na(a).symmetric_eigen();
        let scale = a.max_abs();
        let mut inertia = Inertia {
            positive: 0,
            negative: 0,
            zero: 0,
        };
        for &ev in eig.eigenvalues.iter() {
            if ev.abs() <= 1e-9 * scale {
                inertia.zero += 1;
            } else if ev > 0.0 {
                inertia.positive += 1;
            } else {
                inertia.negative += 1;
            }
        }
        inertia
    }

    proptest! {
        #[test]
        fn ldlt_inertia_matches_eigenvalues(
            n in 1usize..12,
            values in prop::collection::vec(-10.0f64..10.0, 80),
        ) {
            let a = random_symmetric(n, &values);
            let f = Ldlt::factor(&a, 1e-13);
            prop_assert_eq!(f.inertia(), eigen_inertia(&a));
        }

        #[test]
        fn ldlt_solve_matches_lu(
            n in 1usize..12,
            values in prop::collection::vec(-10.0f64..10.0, 80),
            rhs in prop::collection::vec(-5.0f64..5.0, 12),
        ) {
            let a = random_symmetric(n, &values);
            let eig = to_na(&a).symmetric_eigen();
            let min_ev = eig.eigenvalues.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
            prop_assume!(min_ev > 1e-3);
            let b = &rhs[..n];
            let x = Ldlt::factor(&a, 1e-13).solve(b);
            let reference = to_na(&a).lu().solve(&DVector::from_row_slice(b)).unwrap();
            for i in 0..n {
                prop_assert!((x[i] - reference[i]).abs() <= 1e-8 * (1.0 + reference[i].abs()));
            }
        }

        #[test]
        fn lu_solves(
            n in 1usize..10,
            values in prop::collection::vec(-10.0f64..10.0, 100),
            rhs in prop::collection::vec(-5.0f64..5.0, 10),
        ) {
            let mut a = DenseMatrix::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    a[(i, j)] = values[i * n + j];
                }
            }
            let sv = to_na(&a).singular_values();
            let smin = sv.iter().fold(f64::INFINITY, |m, v| m.min(*v));
            prop_assume!(smin > 1e-3);
            let b = &rhs[..n];
            let x = Lu::factor(&a, 1e-14).solve(b);
            let r = a.mul_vec(&x);
            for i in 0..n {
                prop_assert!((r[i] - b[i]).abs() <= 1e-9 * (1.0 + b[i].abs()));
            }
        }
    }

    #[test]
    fn saddle_point_inertia() {
        // [[I, Bᵀ], [B, 0]] with B full row rank has inertia (n, m, 0)
        let mut a = DenseMatrix::zeros(5, 5);
        for i in 0..3 {
            a[(i, i)] = 1.0;
        }
        let b = [[1.0, 2.0, 0.0], [0.0, 1.0, -1.0]];
        for (r, row) in b.iter().enumerate() {
            for (c, &v) in row.iter().enumerate() {
                a[(3 + r, c)] = v;
                a[(c, 3 + r)] = v;
            }
        }
        let f = Ldlt::factor(&a, 1e-14);
        assert_eq!(
            f.inertia(),
            Inertia {
                positive: 3,
                negative: 2,
                zero: 0
            }
        );
    }

    #[test]
    fn rank_deficient_detected() {
        let mut a = DenseMatrix::zeros(3, 3);
        a[(0, 0)] = 1.0;
        a[(0, 1)] = 1.0;
        a[(1, 0)] = 1.0;
        a[(1, 1)] = 1.0;
        a[(2, 2)] = -2.0;
        let f = Ldlt::factor(&a, 1e-12);
        assert_eq!(f.inertia().zero, 1);
        assert_eq!(f.inertia().negative, 1);
        assert_eq!(f.inertia().positive, 1);
    }

    #[test]
    fn zero_diagonal_needs_two_by_two() {
        let mut a = DenseMatrix::zeros(2, 2);
        a[(0, 1)] = 3.0;
        a[(1, 0)] = 3.0;
        let f = Ldlt::factor(&a, 1e-14);
        assert_eq!(f.inertia().positive, 1);
        assert_eq!(f.inertia().negative, 1);
        let x = f.solve(&[3.0, 6.0]);
        assert!((x[0] - 2.0).abs() < 1e-15 && (x[1] - 1.0).abs() < 1e-15);
    }
}

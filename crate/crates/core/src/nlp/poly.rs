//! Sparse multivariate polynomials with exact first and second derivatives.

/// `coef * prod x[var]^power`; variables are distinct and sorted.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Monomial {
    pub coef: f64,
    pub factors: Vec<(usize, u32)>,
}

impl Monomial {
    fn eval_without(&self, x: &[f64], skip: &[(usize, u32)]) -> f64 {
        let mut v = self.coef;
        for &(var, pow) in &self.factors {
            let reduce = skip
                .iter()
                .filter(|s| s.0 == var)
                .map(|s| s.1)
                .sum::<u32>();
            let p = pow - reduce;
            if p > 0 {
                v *= x[var].powi(p as i32);
            }
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub(crate) struct Polynomial {
    pub constant: f64,
    pub terms: Vec<Monomial>,
}

impl Polynomial {
    pub fn constant(c: f64) -> Self {
        Polynomial {
            constant: c,
            terms: Vec::new(),
        }
    }

    /// Add `coef * prod factors`; repeated variables are merged into powers.
    pub fn add(&mut self, coef: f64, factors: &[usize]) -> &mut Self {
        if coef == 0.0 {
            return self;
        }
        let mut merged: Vec<(usize, u32)> = Vec::with_capacity(factors.len());
        for &v in factors {
            match merged.iter_mut().find(|f| f.0 == v) {
                Some(f) => f.1 += 1,
                None => merged.push((v, 1)),
            }
        }
        merged.sort_unstable();
        if merged.is_empty() {
            self.constant += coef;
        } else {
            self.terms.push(Monomial {
                coef,
                factors: merged,
            });
        }
        self
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|t| t.eval_without(x, &[])).sum::<f64>()
    }

    /// Call `sink(var, w * d/dvar)` for every structural entry of the gradient.
    pub fn gradient(&self, x: &[f64], w: f64, mut sink: impl FnMut(usize, f64)) {
        for t in &self.terms {
            for &(var, pow) in &t.factors {
                let d = pow as f64 * t.eval_without(x, &[(var, 1)]);
                sink(var, w * d);
            }
        }
    }

    /// Call `sink(a, b, w * d²/da db)` for every structural entry, both triangles.
    pub fn hessian(&self, x: &[f64], w: f64, mut sink: impl FnMut(usize, usize, f64)) {
        for t in &self.terms {
            let f = &t.factors;
            for (i, &(a, pa)) in f.iter().enumerate() {
                if pa >= 2 {
                    let d = (pa * (pa - 1)) as f64 * t.eval_without(x, &[(a, 2)]);
                    sink(a, a, w * d);
                }
                for &(b, pb) in &f[i + 1..] {
                    let d = (pa * pb) as f64 * t.eval_without(x, &[(a, 1), (b, 1)]);
                    sink(a, b, w * d);
                    sink(b, a, w * d);
                }
            }
        }
    }

    /// Sorted distinct variables appearing in the polynomial.
    pub fn variables(&self) -> Vec<usize> {
        let mut vars: Vec<usize> = self
            .terms
            .iter()
            .flat_map(|t| t.factors.iter().map(|f| f.0))
            .collect();
        vars.sort_unstable();
        vars.dedup();
        vars
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivatives_of_cubic() {
        // p = 2 + 3 x0² x1 - x1 x2 + 4 x2
        let mut p = Polynomial::constant(2.0);
        p.add(3.0, &[0, 1, 0]).add(-1.0, &[1, 2]).add(4.0, &[2]);
        let x = [1.5, -2.0, 0.5];
        assert!((p.eval(&x) - (2.0 + 3.0 * 2.25 * -2.0 + 1.0 + 2.0)).abs() < 1e-14);
        let mut g = [0.0; 3];
        p.gradient(&x, 1.0, |i, v| g[i] += v);
        assert_eq!(g, [6.0 * 1.5 * -2.0, 3.0 * 2.25 - 0.5, 2.0 + 4.0]);
        let mut h = [[0.0; 3]; 3];
        p.hessian(&x, 2.0, |i, j, v| h[i][j] += v);
        assert_eq!(h[0][0], 2.0 * 6.0 * -2.0);
        assert_eq!(h[0][1], 2.0 * 6.0 * 1.5);
        assert_eq!(h[1][0], h[0][1]);
        assert_eq!(h[1][2], -2.0);
        assert_eq!(h[2][2], 0.0);
        assert_eq!(p.variables(), vec![0, 1, 2]);
    }
}

//! Tridiagonal linear algebra used by the cell solver and the global residual.

/// Symmetric tridiagonal matrix stored by its diagonal and first off-diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiagonal {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

/// `L D Lᵀ` factorization of a symmetric tridiagonal matrix.
#[derive(Debug, Clone)]
pub struct Ldlt {
    /// Pivots `D`.
    pub pivots: Vec<f64>,
    /// Sub-diagonal multipliers of the unit lower factor.
    pub lower: Vec<f64>,
}

impl SymTridiagonal {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Self {
        assert_eq!(off.len() + 1, diag.len().max(1));
        Self { diag, off }
    }

    /// P1 stiffness on `n` interior nodes of a uniform grid with spacing `h`.
    pub fn stiffness(n: usize, h: f64) -> Self {
        Self::new(vec![2.0 / h; n], vec![-1.0 / h; n.saturating_sub(1)])
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut s = self.diag[i] * x[i];
            if i > 0 {
                s += self.off[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                s += self.off[i] * x[i + 1];
            }
            y[i] = s;
        }
        y
    }

    pub fn quad_form(&self, x: &[f64]) -> f64 {
        dot(x, &self.mul_vec(x))
    }

    /// Factor, failing with the index of the first non-positive pivot.
    pub fn ldlt(&self) -> Result<Ldlt, usize> {
        let n = self.len();
        let mut pivots = Vec::with_capacity(n);
        let mut lower = Vec::with_capacity(n.saturating_sub(1));
        for i in 0..n {
            let d = if i == 0 {
                self.diag[0]
            } else {
                let l = self.off[i - 1] / pivots[i - 1];
                lower.push(l);
                self.diag[i] - l * self.off[i - 1]
            };
            if !(d > 0.0) {
                return Err(i);
            }
            pivots.push(d);
        }
        Ok(Ldlt { pivots, lower })
    }

    /// Number of eigenvalues strictly below `x` (Sturm sequence count).
    pub fn count_below(&self, x: f64) -> usize {
        let mut count = 0;
        let mut q = 1.0;
        for i in 0..self.len() {
            let b2 = if i > 0 { self.off[i - 1].powi(2) } else { 0.0 };
            q = self.diag[i] - x - if i > 0 { b2 / q } else { 0.0 };
            if q == 0.0 {
                q = f64::EPSILON * (self.diag[i].abs() + x.abs()).max(f64::MIN_POSITIVE);
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// The `index`-th smallest eigenvalue (0-based) by Sturm bisection.
    pub fn eigenvalue(&self, index: usize) -> f64 {
        assert!(index < self.len());
        // Gershgorin bounds
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..self.len() {
            let r = if i > 0 { self.off[i - 1].abs() } else { 0.0 }
                + if i + 1 < self.len() { self.off[i].abs() } else { 0.0 };
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid) > index {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

impl Ldlt {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.pivots.len();
        let mut y = b.to_vec();
        for i in 1..n {
            y[i] -= self.lower[i - 1] * y[i - 1];
        }
        for i in 0..n {
            y[i] /= self.pivots[i];
        }
        for i in (0..n.saturating_sub(1)).rev() {
            y[i] -= self.lower[i] * y[i + 1];
        }
        y
    }
}

/// Solve a general tridiagonal system with partial pivoting.
///
/// `sub[i]` couples row `i + 1` to column `i`, `sup[i]` couples row `i` to
/// column `i + 1`. Returns `None` for a numerically singular matrix.
pub fn solve_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Option<Vec<f64>> {
    let n = diag.len();
    if n == 0 {
        return Some(Vec::new());
    }
    let mut d = diag.to_vec();
    let mut du = sup.to_vec();
    du.push(0.0);
    let mut dl = sub.to_vec();
    let mut du2 = vec![0.0; n];
    let mut b = rhs.to_vec();
    let scale = diag
        .iter()
        .chain(sub)
        .chain(sup)
        .fold(0.0f64, |m, v| m.max(v.abs()));
    for i in 0..n - 1 {
        if dl[i].abs() > d[i].abs() {
            // swap rows i and i + 1
            let fact = d[i] / dl[i];
            d[i] = dl[i];
            let tmp = d[i + 1];
            d[i + 1] = du[i] - fact * tmp;
            du2[i] = du[i + 1];
            du[i + 1] = -fact * du[i + 1];
            du[i] = tmp;
            b.swap(i, i + 1);
            b[i + 1] -= fact * b[i];
            dl[i] = fact;
        } else {
            if d[i] == 0.0 {
                return None;
            }
            let fact = dl[i] / d[i];
            d[i + 1] -= fact * du[i];
            b[i + 1] -= fact * b[i];
            dl[i] = fact;
        }
    }
    if d.iter().any(|v| v.abs() <= f64::EPSILON * scale * 1e-3) {
        return None;
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = b[i];
        if i + 1 < n {
            s -= du[i] * x[i + 1];
        }
        if i + 2 < n {
            s -= du2[i] * x[i + 2];
        }
        x[i] = s / d[i];
    }
    Some(x)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

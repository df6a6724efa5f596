//! Small linear solvers for the implicit steps: tridiagonal (plain and
//! cyclic) and Jacobi-preconditioned BiCGSTAB on a row-compressed matrix.

/// Thomas algorithm for `lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1] = rhs[i]`.
/// `lower[0]` and `upper[n-1]` are ignored. Returns `None` on a zero pivot.
pub(crate) fn tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Option<Vec<f64>> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut beta = diag[0];
    if beta == 0.0 {
        return None;
    }
    c[0] = upper[0] / beta;
    d[0] = rhs[0] / beta;
    for i in 1..n {
        beta = diag[i] - lower[i] * c[i - 1];
        if beta == 0.0 {
            return None;
        }
        c[i] = if i + 1 < n { upper[i] / beta } else { 0.0 };
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    Some(d)
}

/// Cyclic tridiagonal system: `lower[0]` couples row 0 to `x[n-1]` and
/// `upper[n-1]` couples the last row to `x[0]`. Sherman-Morrison on top of
/// [`tridiagonal`]; needs `n >= 3`.
pub(crate) fn cyclic_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Option<Vec<f64>> {
    let n = diag.len();
    let alpha = upper[n - 1];
    let beta = lower[0];
    let gamma = -diag[0];
    let mut d = diag.to_vec();
    d[0] -= gamma;
    d[n - 1] -= alpha * beta / gamma;
    let x = tridiagonal(lower, &d, upper, rhs)?;
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = alpha;
    let z = tridiagonal(lower, &d, upper, &u)?;
    let denom = 1.0 + z[0] + beta * z[n - 1] / gamma;
    if denom == 0.0 {
        return None;
    }
    let fact = (x[0] + beta * x[n - 1] / gamma) / denom;
    Some(x.iter().zip(&z).map(|(a, b)| a - fact * b).collect())
}

/// Row-compressed sparse matrix assembled row by row.
#[derive(Clone, Debug, Default)]
pub(crate) struct Csr {
    pub start: Vec<usize>,
    pub col: Vec<usize>,
    pub val: Vec<f64>,
}

impl Csr {
    pub fn with_capacity(rows: usize, nnz: usize) -> Self {
        let mut start = Vec::with_capacity(rows + 1);
        start.push(0);
        Self { start, col: Vec::with_capacity(nnz), val: Vec::with_capacity(nnz) }
    }

    pub fn push(&mut self, col: usize, val: f64) {
        self.col.push(col);
        self.val.push(val);
    }

    pub fn end_row(&mut self) {
        self.start.push(self.col.len());
    }

    pub fn rows(&self) -> usize {
        self.start.len() - 1
    }

    pub fn mul(&self, x: &[f64], out: &mut [f64]) {
        for (r, o) in out.iter_mut().enumerate() {
            *o = (self.start[r]..self.start[r + 1]).map(|k| self.val[k] * x[self.col[k]]).sum();
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.rows())
            .map(|r| (self.start[r]..self.start[r + 1]).filter(|&k| self.col[k] == r).map(|k| self.val[k]).sum())
            .collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Right-preconditioned BiCGSTAB with a Jacobi preconditioner, starting from
/// `x`. Stops when `|b - Ax| <= tol |b|`. Returns the iteration count, or
/// `Err(residual ratio)` when it stalls or runs out of iterations.
pub(crate) fn bicgstab(a: &Csr, b: &[f64], x: &mut [f64], tol: f64, max_iter: usize) -> Result<usize, f64> {
    let n = b.len();
    let bnorm = norm(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(0);
    }
    let inv_diag: Vec<f64> = a.diagonal().iter().map(|&d| if d != 0.0 { 1.0 / d } else { 1.0 }).collect();
    let mut r = vec![0.0; n];
    a.mul(x, &mut r);
    r.iter_mut().zip(b).for_each(|(ri, bi)| *ri = bi - *ri);
    if norm(&r) <= tol * bnorm {
        return Ok(0);
    }
    let r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut t = vec![0.0; n];
    for it in 1..=max_iter {
        let rho_new = dot(&r_hat, &r);
        if rho_new == 0.0 || omega == 0.0 {
            return Err(norm(&r) / bnorm);
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for k in 0..n {
            p[k] = r[k] + beta * (p[k] - omega * v[k]);
            y[k] = inv_diag[k] * p[k];
        }
        a.mul(&y, &mut v);
        alpha = rho / dot(&r_hat, &v);
        for k in 0..n {
            s[k] = r[k] - alpha * v[k];
        }
        if norm(&s) <= tol * bnorm {
            x.iter_mut().zip(&y).for_each(|(xk, yk)| *xk += alpha * yk);
            return Ok(it);
        }
        for k in 0..n {
            z[k] = inv_diag[k] * s[k];
        }
        a.mul(&z, &mut t);
        let tt = dot(&t, &t);
        omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
        for k in 0..n {
            x[k] += alpha * y[k] + omega * z[k];
            r[k] = s[k] - omega * t[k];
        }
        if norm(&r) <= tol * bnorm {
            return Ok(it);
        }
    }
    Err(norm(&r) / bnorm)
}

//! Sparse symmetric storage, reverse Cuthill–McKee ordering, a skyline LDLᵀ
//! and a small dense complex SVD.

use alloc::collections::VecDeque;
use alloc::vec::Vec;

use nalgebra::{Complex, DMatrix, DVector};

#[allow(unused_imports)]
use crate::math::Float;

type C64 = Complex<f64>;

/// Symmetric matrix in compressed sparse row form (both triangles stored).
#[derive(Clone, Debug)]
pub(crate) struct Csr {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl Csr {
    /// Builds from (row, col, value) triplets, summing duplicates.
    pub fn from_triplets(n: usize, mut t: Vec<(usize, usize, f64)>) -> Self {
        t.sort_unstable_by_key(|a| (a.0, a.1));
        let mut row_ptr = alloc::vec![0usize; n + 1];
        let mut cols = Vec::with_capacity(t.len());
        let mut vals: Vec<f64> = Vec::with_capacity(t.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in t {
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(c);
                vals.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Csr { n, row_ptr, cols, vals }
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).map(|(j, v)| v * x[j]).sum()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub(crate) enum FactorError {
    #[error("non-positive pivot {pivot:e} at row {row}")]
    NonPositivePivot { row: usize, pivot: f64 },
}

/// Reverse Cuthill–McKee permutation of the sub-graph on `keep` nodes.
/// Returns `order[new] = old`.
pub(crate) fn rcm(adj: &Csr, keep: &[bool]) -> Vec<usize> {
    let n = adj.n;
    let degree: Vec<usize> = (0..n).map(|i| adj.row(i).filter(|&(j, _)| j != i && keep[j]).count()).collect();
    let mut visited: Vec<bool> = keep.iter().map(|k| !k).collect();
    let mut order = Vec::with_capacity(n);
    let bfs_levels = |start: usize, visited: &[bool]| -> (usize, usize) {
        // Returns (last node reached with minimal degree in the final level, depth).
        let mut seen = visited.to_vec();
        let mut frontier = alloc::vec![start];
        seen[start] = true;
        let mut depth = 0;
        loop {
            let mut next = Vec::new();
            for &u in &frontier {
                for (v, _) in adj.row(u) {
                    if !seen[v] {
                        seen[v] = true;
                        next.push(v);
                    }
                }
            }
            if next.is_empty() {
                let best = *frontier.iter().min_by_key(|&&u| degree[u]).unwrap();
                return (best, depth);
            }
            depth += 1;
            frontier = next;
        }
    };
    loop {
        let Some(seed) = (0..n).filter(|&i| !visited[i]).min_by_key(|&i| degree[i]) else { break };
        // Pseudo-peripheral start node.
        let mut start = seed;
        let mut depth = 0;
        for _ in 0..4 {
            let (far, d) = bfs_levels(start, &visited);
            if d <= depth {
                break;
            }
            depth = d;
            start = far;
        }
        let mut queue = VecDeque::new();
        queue.push_back(start);
        visited[start] = true;
        while let Some(u) = queue.pop_front() {
            order.push(u);
            let mut nb: Vec<usize> = adj.row(u).map(|(v, _)| v).filter(|&v| !visited[v]).collect();
            nb.sort_unstable_by_key(|&v| degree[v]);
            for v in nb {
                visited[v] = true;
                queue.push_back(v);
            }
        }
    }
    order.reverse();
    order
}

/// LDLᵀ factorisation in variable-band (skyline) storage.
#[derive(Clone, Debug)]
pub(crate) struct SkylineLdl {
    n: usize,
    first: Vec<usize>,
    offset: Vec<usize>,
    lower: Vec<f64>,
    diag: Vec<f64>,
}

impl SkylineLdl {
    /// Factorises the principal sub-matrix on `order` (order[new] = old index in `a`).
    pub fn factor(a: &Csr, order: &[usize]) -> Result<Self, FactorError> {
        let n = order.len();
        let mut inv = alloc::vec![usize::MAX; a.n];
        for (new, &old) in order.iter().enumerate() {
            inv[old] = new;
        }
        let mut first = alloc::vec![0usize; n];
        for i in 0..n {
            let mut f = i;
            for (j, _) in a.row(order[i]) {
                let jn = inv[j];
                if jn != usize::MAX && jn < f {
                    f = jn;
                }
            }
            first[i] = f;
        }
        let mut offset = alloc::vec![0usize; n + 1];
        for i in 0..n {
            offset[i + 1] = offset[i] + (i - first[i]);
        }
        let mut lower = alloc::vec![0.0; offset[n]];
        let mut diag = alloc::vec![0.0; n];
        for i in 0..n {
            for (j, v) in a.row(order[i]) {
                let jn = inv[j];
                if jn == usize::MAX {
                    continue;
                }
                if jn == i {
                    diag[i] += v;
                } else if jn < i {
                    lower[offset[i] + jn - first[i]] += v;
                }
            }
        }
        let scale = diag.iter().fold(0.0f64, |m, d| m.max(d.abs()));
        for i in 0..n {
            let fi = first[i];
            let (done, rest) = lower.split_at_mut(offset[i]);
            let row_i = &mut rest[..i - fi];
            // row_i holds g_ik = l_ik·d_k until the final division.
            for j in fi..i {
                let fj = first[j];
                let k0 = fi.max(fj);
                if k0 < j {
                    let row_j = &done[offset[j]..offset[j] + (j - fj)];
                    let gi = &row_i[k0 - fi..j - fi];
                    let lj = &row_j[k0 - fj..j - fj];
                    let s: f64 = gi.iter().zip(lj).map(|(a, b)| a * b).sum();
                    row_i[j - fi] -= s;
                }
            }
            let mut d = diag[i];
            for (k, g) in (fi..i).zip(row_i.iter_mut()) {
                let l = *g / diag[k];
                d -= *g * l;
                *g = l;
            }
            if !(d > 1e-14 * scale) {
                return Err(FactorError::NonPositivePivot { row: i, pivot: d });
            }
            diag[i] = d;
        }
        Ok(SkylineLdl { n, first, offset, lower, diag })
    }

    /// Solves in the permuted index space.
    pub fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.lower[self.offset[i]..self.offset[i + 1]];
            let s: f64 = row.iter().zip(&x[fi..i]).map(|(l, y)| l * y).sum();
            x[i] -= s;
        }
        for i in 0..n {
            x[i] /= self.diag[i];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let xi = x[i];
            let row = &self.lower[self.offset[i]..self.offset[i + 1]];
            for (l, y) in row.iter().zip(&mut x[fi..i]) {
                *y -= l * xi;
            }
        }
    }
}

/// Singular value decomposition A = U·diag(s)·Vᴴ with s descending.
pub(crate) struct ComplexSvd {
    pub u: DMatrix<C64>,
    pub s: Vec<f64>,
    pub v: DMatrix<C64>,
}

const JACOBI_SWEEPS: usize = 60;

/// One-sided Jacobi SVD. Small dense matrices only; accurate in the small
/// singular values, which the rank decisions rely on.
pub(crate) fn complex_svd(a: &DMatrix<C64>) -> ComplexSvd {
    if a.nrows() < a.ncols() {
        let t = complex_svd(&a.adjoint());
        return ComplexSvd { u: t.v, s: t.s, v: t.u };
    }
    let (m, n) = a.shape();
    let mut w = a.clone();
    let mut v = DMatrix::<C64>::identity(n, n);
    for _ in 0..JACOBI_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha: f64 = w.column(p).iter().map(|z| z.norm_sqr()).sum();
                let beta: f64 = w.column(q).iter().map(|z| z.norm_sqr()).sum();
                let gamma: C64 = w.column(p).iter().zip(w.column(q).iter()).map(|(x, y)| x.conj() * y).sum();
                let g = gamma.re.hypot(gamma.im);
                if g <= f64::EPSILON * (alpha * beta).sqrt() || g == 0.0 {
                    continue;
                }
                rotated = true;
                let phase = gamma / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let sn = c * t;
                for (mat, rows) in [(&mut w, m), (&mut v, n)] {
                    for r in 0..rows {
                        let x = mat[(r, p)];
                        let y = mat[(r, q)] * phase.conj();
                        mat[(r, p)] = x * c - y * sn;
                        mat[(r, q)] = x * sn + y * c;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<f64> = (0..n).map(|j| w.column(j).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]));
    let mut u = DMatrix::<C64>::zeros(m, n);
    let mut vs = DMatrix::<C64>::zeros(n, n);
    let mut s = Vec::with_capacity(n);
    for (k, &j) in order.iter().enumerate() {
        s.push(norms[j]);
        if norms[j] > 0.0 {
            u.set_column(k, &(w.column(j) / C64::new(norms[j], 0.0)));
        }
        vs.set_column(k, &v.column(j));
    }
    ComplexSvd { u, s, v: vs }
}

/// Minimum-norm least-squares solution, dropping singular values below
/// `rcond`·s₀.
pub(crate) fn complex_lstsq(a: &DMatrix<C64>, b: &DVector<C64>, rcond: f64) -> Option<DVector<C64>> {
    let svd = complex_svd(a);
    let s0 = *svd.s.first()?;
    if !(s0 > 0.0) || !s0.is_finite() {
        return None;
    }
    let mut x = DVector::<C64>::zeros(a.ncols());
    for (k, &sk) in svd.s.iter().enumerate() {
        if sk <= rcond * s0 {
            break;
        }
        let coef = svd.u.column(k).iter().zip(b.iter()).map(|(u, b)| u.conj() * b).sum::<C64>() / sk;
        x += svd.v.column(k) * coef;
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_1d(n: usize) -> Csr {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
                t.push((i - 1, i, -1.0));
            }
        }
        Csr::from_triplets(n, t)
    }

    #[test]
    fn solves_tridiagonal() {
        let a = laplacian_1d(50);
        let keep = alloc::vec![true; 50];
        let order = rcm(&a, &keep);
        let f = SkylineLdl::factor(&a, &order).unwrap();
        let x_true: Vec<f64> = (0..50).map(|i| (i as f64 * 0.3).sin()).collect();
        let b = a.mul(&x_true);
        let mut xp: Vec<f64> = order.iter().map(|&o| b[o]).collect();
        f.solve_in_place(&mut xp);
        for (new, &old) in order.iter().enumerate() {
            assert!((xp[new] - x_true[old]).abs() < 1e-10);
        }
    }

    #[test]
    fn detects_singular_matrix() {
        // Pure Neumann 1D Laplacian is singular.
        let mut t = Vec::new();
        for i in 0..4 {
            let d = if i == 0 || i == 3 { 1.0 } else { 2.0 };
            t.push((i, i, d));
            if i > 0 {
                t.push((i, i - 1, -1.0));
                t.push((i - 1, i, -1.0));
            }
        }
        let a = Csr::from_triplets(4, t);
        let order: Vec<usize> = (0..4).collect();
        assert!(SkylineLdl::factor(&a, &order).is_err());
    }

    fn pseudo_random(m: usize, n: usize, seed: u64) -> DMatrix<C64> {
        let mut x = seed;
        let mut next = move || {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (x >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        DMatrix::from_fn(m, n, |_, _| C64::new(next(), next()))
    }

    #[test]
    fn svd_reconstructs_and_orders() {
        for (m, n) in [(6, 6), (7, 4), (3, 5), (13, 2)] {
            let a = pseudo_random(m, n, (m * 31 + n) as u64);
            let svd = complex_svd(&a);
            let k = m.min(n);
            let s = DMatrix::from_fn(k, k, |i, j| if i == j { C64::new(svd.s[i], 0.0) } else { C64::new(0.0, 0.0) });
            let rec = svd.u.columns(0, k) * s * svd.v.columns(0, k).adjoint();
            assert!((rec - &a).norm() < 1e-13 * a.norm());
            assert!(svd.s.windows(2).all(|w| w[0] >= w[1]));
            let uu = svd.u.columns(0, k).adjoint() * svd.u.columns(0, k);
            assert!((uu - DMatrix::<C64>::identity(k, k)).norm() < 1e-13);
        }
    }

    #[test]
    fn svd_of_rank_one_hankel_with_noise() {
        let q = core::f64::consts::FRAC_PI_2;
        let p = C64::new(0.3, 0.1);
        let h = DMatrix::from_fn(6, 6, |i, j| p.powu((i + j) as u32) * q + C64::new(1e-16 * ((i * 7 + j) % 5) as f64, 0.0));
        let svd = complex_svd(&h);
        assert!((svd.s[0] - 1.745327506665078).abs() < 1e-12);
        assert!(svd.s[1] < 1e-14);
    }

    #[test]
    fn lstsq_solves_overdetermined_system() {
        let a = pseudo_random(9, 3, 5);
        let x = DVector::from_vec(alloc::vec![C64::new(1.0, -2.0), C64::new(0.5, 0.0), C64::new(0.0, 3.0)]);
        let got = complex_lstsq(&a, &(&a * &x), 1e-14).unwrap();
        assert!((got - x).norm() < 1e-12);
    }
}

//! Banded building blocks for the sparse eigensolver.
//!
//! A sparse symmetric operator is split into the connected components of its
//! sparsity graph. Each component, taken in ascending global-index order, is a
//! symmetric band matrix. Eigenvalues are isolated by Sylvester inertia counts
//! (LDLᵀ without pivoting), eigenvectors by inverse iteration with a banded LU.

use crate::model::SparseOperator;

/// One connected block of a symmetric operator in band storage.
#[derive(Debug, Clone)]
pub(crate) struct Component {
    /// Global basis indices, ascending.
    pub indices: Vec<usize>,
    /// Half bandwidth in local ordering.
    pub bw: usize,
    /// `lower[i * (bw + 1) + j] = A[i, i - j]` for `j <= min(i, bw)`.
    lower: Vec<f64>,
    /// Max-row-sum norm.
    pub norm: f64,
    /// Gershgorin enclosure.
    pub bounds: (f64, f64),
}

impl Component {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        let off = i - j;
        if off > self.bw {
            0.0
        } else {
            self.lower[i * (self.bw + 1) + off]
        }
    }

    /// `y = A x` on local coordinates.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = self.len();
        let w = self.bw + 1;
        y.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..n {
            let row = &self.lower[i * w..(i + 1) * w];
            y[i] += row[0] * x[i];
            for off in 1..=self.bw.min(i) {
                let a = row[off];
                if a != 0.0 {
                    y[i] += a * x[i - off];
                    y[i - off] += a * x[i];
                }
            }
        }
    }

    /// Number of eigenvalues strictly below `sigma`.
    pub fn count_below(&self, sigma: f64, pivmin: f64) -> usize {
        if self.bw == 0 {
            return self.lower.iter().filter(|&&a| a < sigma).count();
        }
        if self.bw == 1 {
            return self.count_below_tridiagonal(sigma, pivmin);
        }
        self.count_below_band(sigma, pivmin)
    }

    fn count_below_tridiagonal(&self, sigma: f64, pivmin: f64) -> usize {
        let mut count = 0;
        let mut d = self.lower[0] - sigma;
        if d.abs() < pivmin {
            d = -pivmin;
        }
        if d < 0.0 {
            count += 1;
        }
        for i in 1..self.len() {
            let e = self.lower[2 * i + 1];
            d = (self.lower[2 * i] - sigma) - e * e / d;
            if d.abs() < pivmin {
                d = -pivmin;
            }
            if d < 0.0 {
                count += 1;
            }
        }
        count
    }

    fn count_below_band(&self, sigma: f64, pivmin: f64) -> usize {
        let n = self.len();
        let b = self.bw;
        let w = b + 1;
        let mut work = self.lower.clone();
        for i in 0..n {
            work[i * w] -= sigma;
        }
        let mut count = 0;
        for k in 0..n {
            let mut d = work[k * w];
            if d.abs() < pivmin {
                d = -pivmin;
            }
            if d < 0.0 {
                count += 1;
            }
            let last = (k + b).min(n - 1);
            for i in k + 1..=last {
                let lik = work[i * w + (i - k)];
                if lik == 0.0 {
                    continue;
                }
                let f = lik / d;
                for j in k + 1..=i {
                    let ljk = work[j * w + (j - k)];
                    work[i * w + (i - j)] -= f * ljk;
                }
            }
        }
        count
    }
}

/// Splits `h` into connected components of its sparsity graph.
pub(crate) fn components(h: &SparseOperator) -> Vec<Component> {
    let n = h.dim();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for &(r, c, _) in h.entries() {
        if r != c {
            let (a, b) = (find(&mut parent, r), find(&mut parent, c));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut root_slot = vec![usize::MAX; n];
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        if root_slot[r] == usize::MAX {
            root_slot[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[root_slot[r]].push(i);
    }
    let mut local = vec![0usize; n];
    let mut owner = vec![0usize; n];
    for (g, idx) in groups.iter().enumerate() {
        for (l, &i) in idx.iter().enumerate() {
            local[i] = l;
            owner[i] = g;
        }
    }
    let mut bws = vec![0usize; groups.len()];
    for &(r, c, _) in h.entries() {
        let g = owner[r];
        bws[g] = bws[g].max(local[r].abs_diff(local[c]));
    }
    let mut comps: Vec<Component> = groups
        .into_iter()
        .zip(bws)
        .map(|(indices, bw)| Component {
            lower: vec![0.0; indices.len() * (bw + 1)],
            indices,
            bw,
            norm: 0.0,
            bounds: (0.0, 0.0),
        })
        .collect();
    let mut row_abs = vec![0.0f64; n];
    let mut diag = vec![0.0f64; n];
    for &(r, c, v) in h.entries() {
        if r == c {
            diag[r] = v;
        } else {
            row_abs[r] += v.abs();
        }
        if local[r] >= local[c] {
            let comp = &mut comps[owner[r]];
            let w = comp.bw + 1;
            comp.lower[local[r] * w + (local[r] - local[c])] = v;
        }
    }
    for comp in &mut comps {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut norm = 0.0f64;
        for &i in &comp.indices {
            lo = lo.min(diag[i] - row_abs[i]);
            hi = hi.max(diag[i] + row_abs[i]);
            norm = norm.max(diag[i].abs() + row_abs[i]);
        }
        comp.bounds = (lo, hi);
        comp.norm = norm;
    }
    comps
}

/// LU factorization with partial pivoting of `A - sigma I` for a symmetric
/// band matrix `A`.
pub(crate) struct BandLu {
    n: usize,
    kl: usize,
    /// Row stride; row `i` holds columns `i - kl ..= i + 2 kl`.
    width: usize,
    /// U factor and multipliers, row-major over the shifted window.
    a: Vec<f64>,
    mult: Vec<f64>,
    piv: Vec<usize>,
}

impl BandLu {
    /// Factors `A - sigma I`. Exactly zero pivots are replaced by `tiny`.
    pub fn new(comp: &Component, sigma: f64, tiny: f64) -> BandLu {
        let n = comp.len();
        let kl = comp.bw;
        let width = 3 * kl + 1;
        // column j of row i lives at a[i * width + (j + kl - i)]
        let mut a = vec![0.0; n * width];
        for i in 0..n {
            let lo = i.saturating_sub(kl);
            let hi = (i + kl).min(n - 1);
            for j in lo..=hi {
                let mut v = comp.at(i, j);
                if i == j {
                    v -= sigma;
                }
                a[i * width + (j + kl - i)] = v;
            }
        }
        let mut mult = vec![0.0; n * kl.max(1)];
        let mut piv = vec![0usize; n];
        let at = |i: usize, j: usize| i * width + (j + kl - i);
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = a[at(k, k)].abs();
            for i in k + 1..=last {
                let v = a[at(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            piv[k] = p;
            let jmax = (k + 2 * kl).min(n - 1);
            if p != k {
                for j in k..=jmax {
                    // row p may not store columns beyond p + 2kl; those are zero
                    let vk = a[at(k, j)];
                    let vp = if j + kl >= p && j <= p + 2 * kl {
                        a[at(p, j)]
                    } else {
                        0.0
                    };
                    a[at(k, j)] = vp;
                    if j + kl >= p && j <= p + 2 * kl {
                        a[at(p, j)] = vk;
                    }
                }
            }
            if a[at(k, k)] == 0.0 {
                a[at(k, k)] = tiny;
            }
            let pivot = a[at(k, k)];
            for i in k + 1..=last {
                let f = a[at(i, k)] / pivot;
                mult[k * kl.max(1) + (i - k - 1)] = f;
                a[at(i, k)] = 0.0;
                if f != 0.0 {
                    for j in k + 1..=jmax {
                        if j <= i + 2 * kl {
                            let u = a[at(k, j)];
                            a[at(i, j)] -= f * u;
                        }
                    }
                }
            }
        }
        BandLu {
            n,
            kl,
            width,
            a,
            mult,
            piv,
        }
    }

    /// Solves in place.
    pub fn solve(&self, x: &mut [f64]) {
        let (n, kl, width) = (self.n, self.kl, self.width);
        let at = |i: usize, j: usize| i * width + (j + kl - i);
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                x.swap(k, p);
            }
            let last = (k + kl).min(n - 1);
            let xk = x[k];
            for i in k + 1..=last {
                x[i] -= self.mult[k * kl.max(1) + (i - k - 1)] * xk;
            }
        }
        for k in (0..n).rev() {
            let jmax = (k + 2 * kl).min(n - 1);
            let mut s = x[k];
            for j in k + 1..=jmax {
                s -= self.a[at(k, j)] * x[j];
            }
            x[k] = s / self.a[at(k, k)];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn op(dim: usize, t: Vec<(usize, usize, f64)>) -> SparseOperator {
        let mut all = Vec::new();
        for (r, c, v) in t {
            all.push((r, c, v));
            if r != c {
                all.push((c, r, v));
            }
        }
        SparseOperator::from_triplets(dim, all).unwrap()
    }

    #[test]
    fn splits_components() {
        let h = op(
            5,
            vec![(0, 0, 1.0), (0, 2, 0.5), (2, 4, 0.3), (1, 1, -1.0), (3, 3, 2.0)],
        );
        let comps = components(&h);
        assert_eq!(comps.len(), 3);
        assert_eq!(comps[0].indices, vec![0, 2, 4]);
        assert_eq!(comps[0].bw, 1);
        assert_eq!(comps[1].indices, vec![1]);
        assert_eq!(comps[1].bw, 0);
    }

    #[test]
    fn inertia_counts_match_dense() {
        let h = op(
            6,
            vec![
                (0, 0, 1.0),
                (1, 1, -2.0),
                (2, 2, 0.5),
                (3, 3, 3.0),
                (4, 4, -1.0),
                (5, 5, 0.0),
                (0, 1, 0.7),
                (0, 2, -0.4),
                (1, 3, 1.1),
                (2, 4, 0.2),
                (3, 5, 0.9),
                (2, 3, 0.3),
            ],
        );
        let comps = components(&h);
        assert_eq!(comps.len(), 1);
        assert_eq!(comps[0].bw, 2);
        let mut ev: Vec<f64> = h.to_dense().symmetric_eigen().eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        for sigma in [-5.0, -1.5, 0.0, 0.77, 2.0, 10.0] {
            let expected = ev.iter().filter(|&&e| e < sigma).count();
            assert_eq!(comps[0].count_below(sigma, 1e-300), expected, "sigma {sigma}");
        }
    }

    #[test]
    fn band_lu_solves() {
        let h = op(
            5,
            vec![
                (0, 0, 4.0),
                (1, 1, 0.1),
                (2, 2, 5.0),
                (3, 3, -3.0),
                (4, 4, 1.0),
                (0, 1, 2.0),
                (0, 2, 1.0),
                (1, 2, -1.5),
                (1, 3, 0.5),
                (2, 4, 2.5),
                (3, 4, 1.0),
            ],
        );
        let comp = &components(&h)[0];
        let sigma = 0.3;
        let lu = BandLu::new(comp, sigma, 1e-300);
        let b = vec![1.0, -2.0, 0.5, 3.0, -1.0];
        let mut x = b.clone();
        lu.solve(&mut x);
        let mut y = vec![0.0; 5];
        comp.apply(&x, &mut y);
        for i in 0..5 {
            assert!((y[i] - sigma * x[i] - b[i]).abs() < 1e-12);
        }
    }
}

//! Sparse lowest-eigenpair solver: bisection on inertia counts per connected
//! component, then inverse iteration for the vectors.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::banded::{components, BandLu, Component};
use super::{fix_gauge, residual_norm, EigenSolution};
use crate::error::{Error, Result};
use crate::model::SparseOperator;

/// Seed of the inverse-iteration starting vectors.
pub const START_SEED: u64 = 0x5eed_2019_0b5e_55ed;

const MAX_BISECTIONS: usize = 256;
const MAX_INVERSE_STEPS: usize = 8;

fn pivmin(h: &SparseOperator) -> f64 {
    let max_off = h
        .entries()
        .iter()
        .filter(|e| e.0 != e.1)
        .map(|e| e.2 * e.2)
        .fold(1.0, f64::max);
    f64::MIN_POSITIVE * max_off
}

/// The `count` smallest eigenvalues of one component, ascending.
fn component_eigenvalues(comp: &Component, count: usize, pivmin: f64) -> Vec<f64> {
    let slack = 2.0 * f64::EPSILON * comp.norm.max(1.0) + pivmin;
    let mut lo = comp.bounds.0 - slack;
    let hi0 = comp.bounds.1 + slack;
    let mut out = Vec::with_capacity(count);
    for j in 0..count.min(comp.len()) {
        let mut hi = hi0;
        for _ in 0..MAX_BISECTIONS {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi || hi - lo <= 2.0 * f64::EPSILON * lo.abs().max(hi.abs()) {
                break;
            }
            if comp.count_below(mid, pivmin) > j {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        out.push(0.5 * (lo + hi));
    }
    out
}

fn local_residual(comp: &Component, x: &[f64], lambda: f64, scratch: &mut [f64]) -> f64 {
    comp.apply(x, scratch);
    scratch
        .iter()
        .zip(x)
        .map(|(y, v)| (y - lambda * v).powi(2))
        .sum::<f64>()
        .sqrt()
}

fn normalize(x: &mut [f64]) -> f64 {
    let n = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if n > 0.0 {
        x.iter_mut().for_each(|v| *v /= n);
    }
    n
}

fn orthogonalize(x: &mut [f64], against: &[&Vec<f64>]) {
    // two passes of classical Gram-Schmidt
    for _ in 0..2 {
        for q in against {
            let d: f64 = x.iter().zip(q.iter()).map(|(a, b)| a * b).sum();
            x.iter_mut().zip(q.iter()).for_each(|(a, b)| *a -= d * b);
        }
    }
}

fn inverse_iteration(comp: &Component, lambda: f64, cluster: &[&Vec<f64>], seed: u64, tol: f64) -> (Vec<f64>, f64) {
    let n = comp.len();
    if n == 1 {
        return (vec![1.0], 0.0);
    }
    let tiny = f64::EPSILON * comp.norm.max(f64::MIN_POSITIVE);
    let lu = BandLu::new(comp, lambda, tiny);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    orthogonalize(&mut x, cluster);
    normalize(&mut x);
    let mut scratch = vec![0.0; n];
    let mut best = (x.clone(), f64::INFINITY);
    for step in 0..MAX_INVERSE_STEPS {
        lu.solve(&mut x);
        orthogonalize(&mut x, cluster);
        if normalize(&mut x) == 0.0 || x.iter().any(|v| !v.is_finite()) {
            x = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            orthogonalize(&mut x, cluster);
            normalize(&mut x);
            continue;
        }
        let res = local_residual(comp, &x, lambda, &mut scratch);
        let improved = res < 0.5 * best.1;
        if res < best.1 {
            best = (x.clone(), res);
        }
        if step >= 1 && (best.1 <= 1e-3 * tol || !improved) {
            break;
        }
    }
    best
}

pub(crate) fn sparse_lowest_eigenpairs(h: &SparseOperator, k: usize, tol: f64) -> Result<EigenSolution> {
    let bound = super::residual_bound(h, tol);
    let comps = components(h);
    let pmin = pivmin(h);
    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for (c, comp) in comps.iter().enumerate() {
        for (j, lambda) in component_eigenvalues(comp, k, pmin).into_iter().enumerate() {
            candidates.push((lambda, c, j));
        }
    }
    candidates.sort_by(|a, b| {
        a.0.total_cmp(&b.0)
            .then(comps[a.1].indices[0].cmp(&comps[b.1].indices[0]))
            .then(a.2.cmp(&b.2))
    });
    candidates.truncate(k);

    let mut local_vectors: Vec<Option<Vec<f64>>> = vec![None; candidates.len()];
    let mut by_comp: Vec<usize> = (0..candidates.len()).collect();
    by_comp.sort_by_key(|&i| (candidates[i].1, candidates[i].2));
    for (pos, &i) in by_comp.iter().enumerate() {
        let (lambda, c, _) = candidates[i];
        let comp = &comps[c];
        let ortol = 1e-3 * comp.norm;
        let cluster: Vec<&Vec<f64>> = by_comp[..pos]
            .iter()
            .filter(|&&p| candidates[p].1 == c && (candidates[p].0 - lambda).abs() <= ortol)
            .map(|&p| local_vectors[p].as_ref().expect("computed earlier"))
            .collect();
        let seed = START_SEED ^ ((comp.indices[0] as u64) << 20) ^ candidates[i].2 as u64;
        let (v, _) = inverse_iteration(comp, lambda, &cluster, seed, bound);
        local_vectors[i] = Some(v);
    }

    let mut eigenvalues = Vec::with_capacity(candidates.len());
    let mut eigenvectors = Vec::with_capacity(candidates.len());
    let mut residuals = Vec::with_capacity(candidates.len());
    for (i, &(lambda, c, _)) in candidates.iter().enumerate() {
        let mut v = vec![0.0; h.dim()];
        for (l, &g) in comps[c].indices.iter().enumerate() {
            v[g] = local_vectors[i].as_ref().expect("filled")[l];
        }
        normalize(&mut v);
        fix_gauge(&mut v);
        residuals.push(residual_norm(h, &v, lambda));
        eigenvalues.push(lambda);
        eigenvectors.push(v);
    }
    let worst = residuals.iter().copied().fold(0.0, f64::max);
    if !(worst <= bound) {
        return Err(Error::NotConverged {
            best_residual: worst,
            tol: bound,
        });
    }
    Ok(EigenSolution {
        eigenvalues,
        eigenvectors,
        residuals,
        n_tr_used: super::n_tr_of(h.dim()),
    })
}

/// Applies the reduced resolvent `(H - e0)⁺ Q` to `rhs`, where `Q` projects
/// out `psi0`. `e0` must be a simple eigenvalue of `h` with eigenvector `psi0`.
pub(crate) fn reduced_resolvent(h: &SparseOperator, e0: f64, psi0: &[f64], rhs: &[f64]) -> Vec<f64> {
    let comps = components(h);
    let project = |x: &mut [f64]| {
        let d: f64 = x.iter().zip(psi0).map(|(a, b)| a * b).sum();
        x.iter_mut().zip(psi0).for_each(|(a, b)| *a -= d * b);
    };
    let factors: Vec<Option<BandLu>> = comps.iter().map(|_| None).collect();
    let mut factors = factors;
    let solve = |b: &[f64], factors: &mut Vec<Option<BandLu>>| -> Vec<f64> {
        let mut x = vec![0.0; b.len()];
        for (c, comp) in comps.iter().enumerate() {
            if comp.indices.iter().all(|&g| b[g] == 0.0) {
                continue;
            }
            let lu = factors[c]
                .get_or_insert_with(|| BandLu::new(comp, e0, f64::EPSILON * comp.norm.max(f64::MIN_POSITIVE)));
            let mut local: Vec<f64> = comp.indices.iter().map(|&g| b[g]).collect();
            lu.solve(&mut local);
            for (l, &g) in comp.indices.iter().enumerate() {
                x[g] = local[l];
            }
        }
        x
    };
    let mut b = rhs.to_vec();
    project(&mut b);
    let mut x = solve(&b, &mut factors);
    project(&mut x);
    for _ in 0..2 {
        let hx = h.mul_vec(&x);
        let mut r: Vec<f64> = b
            .iter()
            .zip(hx.iter().zip(&x))
            .map(|(bi, (hxi, xi))| bi - (hxi - e0 * xi))
            .collect();
        project(&mut r);
        let mut dx = solve(&r, &mut factors);
        project(&mut dx);
        x.iter_mut().zip(&dx).for_each(|(a, d)| *a += d);
    }
    x
}

//! Physical parameters and truncated-Fock-space operators for the Rabi-Stark
//! model (RSM) and the quantum Rabi model (QRM).
//!
//! Basis ordering is photon-major, spin-minor: the state `|n, s>` sits at index
//! `2n + s`, where `s = 0` is spin up (`σz = +1`) and `s = 1` is spin down.
//! All matrix elements are real.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Rsm,
    Qrm,
}

/// Which critical point a Stark coupling approaches: `Plus` for `U -> +ω`,
/// `Minus` for `U -> -ω`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    pub fn name(self) -> &'static str {
        match self {
            Branch::Plus => "plus",
            Branch::Minus => "minus",
        }
    }

    /// `+1.0` or `-1.0`.
    pub fn sign(self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub kind: ModelKind,
    /// Qubit splitting Δ.
    pub delta: f64,
    /// Cavity frequency ω.
    #[serde(default = "default_omega")]
    pub omega: f64,
    /// Stark coupling U; ignored for the QRM.
    #[serde(default)]
    pub stark_u: f64,
    /// Linear qubit-cavity coupling g.
    #[serde(default)]
    pub coupling_g: f64,
}

fn default_omega() -> f64 {
    1.0
}

impl ModelParams {
    pub fn rsm(delta: f64, stark_u: f64, coupling_g: f64) -> Self {
        ModelParams {
            kind: ModelKind::Rsm,
            delta,
            omega: 1.0,
            stark_u,
            coupling_g,
        }
    }

    pub fn qrm(delta: f64, coupling_g: f64) -> Self {
        ModelParams {
            kind: ModelKind::Qrm,
            delta,
            omega: 1.0,
            stark_u: 0.0,
            coupling_g,
        }
    }

    /// RSM with `U = ±ω (1 - 1/L)`, i.e. at effective size `L` on `branch`.
    pub fn rsm_at_size(delta: f64, size: f64, branch: Branch, coupling_g: f64) -> Self {
        ModelParams::rsm(delta, branch.sign() * (1.0 - 1.0 / size), coupling_g)
    }

    pub fn with_coupling(mut self, coupling_g: f64) -> Self {
        self.coupling_g = coupling_g;
        self
    }

    pub fn with_stark(mut self, stark_u: f64) -> Self {
        self.stark_u = stark_u;
        self
    }

    /// The Stark coupling actually entering the Hamiltonian (zero for the QRM).
    pub fn effective_stark(&self) -> f64 {
        match self.kind {
            ModelKind::Rsm => self.stark_u,
            ModelKind::Qrm => 0.0,
        }
    }

    /// Branch selected by the sign of U (`Plus` for `U >= 0`).
    pub fn branch(&self) -> Branch {
        if self.effective_stark() < 0.0 {
            Branch::Minus
        } else {
            Branch::Plus
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("delta", self.delta),
            ("omega", self.omega),
            ("stark_u", self.stark_u),
            ("coupling_g", self.coupling_g),
        ] {
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} = {v} is not finite")));
            }
        }
        if self.omega <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "omega = {} must be positive",
                self.omega
            )));
        }
        if self.coupling_g < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "coupling_g = {} must be non-negative",
                self.coupling_g
            )));
        }
        Ok(())
    }
}

/// Maximum photon number kept in the truncated bosonic space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FockTruncation {
    pub n_tr: usize,
}

impl FockTruncation {
    pub fn new(n_tr: usize) -> Result<Self> {
        if n_tr == 0 {
            return Err(Error::InvalidParameter("n_tr must be positive".into()));
        }
        Ok(FockTruncation { n_tr })
    }

    pub fn dim(&self) -> usize {
        2 * (self.n_tr + 1)
    }
}

/// Index of `|n, s>` in the product basis.
#[inline]
pub fn basis_index(n: usize, spin_down: bool) -> usize {
    2 * n + usize::from(spin_down)
}

/// Real symmetric operator in coordinate format. Entries are kept sorted by
/// `(row, col)` with no duplicates and no explicit zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    dim: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl SparseOperator {
    /// Builds an operator from arbitrary triplets; duplicates are summed and
    /// exact zeros dropped.
    pub fn from_triplets(dim: usize, mut triplets: Vec<(usize, usize, f64)>) -> Result<Self> {
        for &(r, c, v) in &triplets {
            if r >= dim || c >= dim {
                return Err(Error::InvalidParameter(format!(
                    "entry ({r}, {c}) outside dimension {dim}"
                )));
            }
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!("entry ({r}, {c}) = {v}")));
            }
        }
        triplets.sort_by_key(|a| (a.0, a.1));
        let mut entries: Vec<(usize, usize, f64)> = Vec::with_capacity(triplets.len());
        for (r, c, v) in triplets {
            match entries.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => entries.push((r, c, v)),
            }
        }
        entries.retain(|e| e.2 != 0.0);
        Ok(SparseOperator { dim, entries })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    /// Matrix element `<row|A|col>`; zero when absent.
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries
            .binary_search_by(|e| (e.0, e.1).cmp(&(row, col)))
            .map(|i| self.entries[i].2)
            .unwrap_or(0.0)
    }

    pub fn is_symmetric(&self) -> bool {
        self.entries.iter().all(|&(r, c, v)| self.get(c, r) == v)
    }

    /// `out = A x`.
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        assert_eq!(x.len(), self.dim);
        assert_eq!(out.len(), self.dim);
        out.iter_mut().for_each(|o| *o = 0.0);
        for &(r, c, v) in &self.entries {
            out[r] += v * x[c];
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.apply(x, &mut out);
        out
    }

    /// `<x|A|y>`.
    pub fn expectation(&self, x: &[f64], y: &[f64]) -> f64 {
        self.entries.iter().map(|&(r, c, v)| x[r] * v * y[c]).sum()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.dim];
        for &(r, c, v) in &self.entries {
            if r == c {
                d[r] = v;
            }
        }
        d
    }

    /// Gershgorin enclosure `(lo, hi)` of the spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let mut center = vec![0.0; self.dim];
        let mut radius = vec![0.0; self.dim];
        for &(r, c, v) in &self.entries {
            if r == c {
                center[r] = v;
            } else {
                radius[r] += v.abs();
            }
        }
        center
            .iter()
            .zip(&radius)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (&c, &r)| {
                (lo.min(c - r), hi.max(c + r))
            })
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.dim, self.dim);
        for &(r, c, v) in &self.entries {
            m[(r, c)] = v;
        }
        m
    }

    /// Sparse product `A B`.
    pub fn matmul(&self, other: &SparseOperator) -> SparseOperator {
        assert_eq!(self.dim, other.dim);
        let rows = other.row_starts();
        let mut triplets = Vec::new();
        for &(r, k, a) in &self.entries {
            for &(_, c, b) in &other.entries[rows[k]..rows[k + 1]] {
                triplets.push((r, c, a * b));
            }
        }
        SparseOperator::from_triplets(self.dim, triplets).expect("product of valid operators")
    }

    /// Frobenius norm of the commutator `[A, B]`.
    pub fn commutator_norm(&self, other: &SparseOperator) -> f64 {
        let ab = self.matmul(other);
        let ba = other.matmul(self);
        let neg: Vec<_> = ba.entries.iter().map(|&(r, c, v)| (r, c, -v)).collect();
        let mut all = ab.entries.clone();
        all.extend(neg);
        SparseOperator::from_triplets(self.dim, all)
            .expect("same dimension")
            .entries
            .iter()
            .map(|e| e.2 * e.2)
            .sum::<f64>()
            .sqrt()
    }

    /// Offsets of each row's first entry; length `dim + 1`.
    pub(crate) fn row_starts(&self) -> Vec<usize> {
        let mut starts = vec![0usize; self.dim + 1];
        for &(r, _, _) in &self.entries {
            starts[r + 1] += 1;
        }
        for i in 0..self.dim {
            starts[i + 1] += starts[i];
        }
        starts
    }
}

fn check_inputs(params: &ModelParams, trunc: FockTruncation) -> Result<()> {
    params.validate()?;
    if trunc.n_tr == 0 {
        return Err(Error::InvalidParameter("n_tr must be positive".into()));
    }
    Ok(())
}

/// `H = (Δ/2 + U a†a) σz + ω a†a + g (a† + a) σx` on the truncated space.
pub fn build_hamiltonian(params: &ModelParams, trunc: FockTruncation) -> Result<SparseOperator> {
    check_inputs(params, trunc)?;
    let u = params.effective_stark();
    let half = params.delta / 2.0;
    let mut triplets = Vec::with_capacity(3 * trunc.dim());
    for n in 0..=trunc.n_tr {
        let nf = n as f64;
        triplets.push((
            basis_index(n, false),
            basis_index(n, false),
            half + u * nf + params.omega * nf,
        ));
        triplets.push((
            basis_index(n, true),
            basis_index(n, true),
            -(half + u * nf) + params.omega * nf,
        ));
    }
    push_coupling(&mut triplets, trunc, params.coupling_g);
    SparseOperator::from_triplets(trunc.dim(), triplets)
}

/// `∂H/∂g = (a† + a) σx`.
pub fn build_coupling_operator(trunc: FockTruncation) -> Result<SparseOperator> {
    if trunc.n_tr == 0 {
        return Err(Error::InvalidParameter("n_tr must be positive".into()));
    }
    let mut triplets = Vec::with_capacity(4 * trunc.n_tr);
    push_coupling(&mut triplets, trunc, 1.0);
    SparseOperator::from_triplets(trunc.dim(), triplets)
}

fn push_coupling(triplets: &mut Vec<(usize, usize, f64)>, trunc: FockTruncation, g: f64) {
    if g == 0.0 {
        return;
    }
    for n in 0..trunc.n_tr {
        let v = g * ((n + 1) as f64).sqrt();
        // σx flips the spin while a† + a moves one photon.
        for (a, b) in [
            (basis_index(n, false), basis_index(n + 1, true)),
            (basis_index(n, true), basis_index(n + 1, false)),
        ] {
            triplets.push((a, b, v));
            triplets.push((b, a, v));
        }
    }
}

/// `P = σz ⊗ (-1)^{a†a}`.
pub fn build_parity_operator(trunc: FockTruncation) -> Result<SparseOperator> {
    if trunc.n_tr == 0 {
        return Err(Error::InvalidParameter("n_tr must be positive".into()));
    }
    let mut triplets = Vec::with_capacity(trunc.dim());
    for n in 0..=trunc.n_tr {
        let photon = if n % 2 == 0 { 1.0 } else { -1.0 };
        triplets.push((basis_index(n, false), basis_index(n, false), photon));
        triplets.push((basis_index(n, true), basis_index(n, true), -photon));
    }
    SparseOperator::from_triplets(trunc.dim(), triplets)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalData {
    pub g_c: f64,
    /// Collapse energy evaluated at the coupling carried by the parameters.
    pub e_c: f64,
    pub branch: Branch,
}

/// Critical coupling of the RSM branch selected by the sign of U (the family
/// `U -> ±ω`), or of the QRM in the limit `Δ/ω -> ∞`.
///
/// For the RSM, `g_c² = ω(ω ∓ Δ)/2` and `E_c = ∓Δ/2 - 2g²/ω`.
pub fn critical_point(params: &ModelParams) -> Result<CriticalData> {
    params.validate()?;
    match params.kind {
        ModelKind::Qrm => {
            if params.delta <= 0.0 {
                return Err(Error::NoCriticalPoint {
                    delta: params.delta,
                    branch: Branch::Plus.name(),
                    radicand: params.omega * params.delta,
                });
            }
            Ok(CriticalData {
                g_c: (params.omega * params.delta).sqrt() / 2.0,
                e_c: -params.delta / 2.0,
                branch: Branch::Plus,
            })
        }
        ModelKind::Rsm => {
            let u = params.stark_u / params.omega;
            if u == 0.0 || u.abs() > 1.0 {
                return Err(Error::InvalidParameter(format!(
                    "critical point needs 0 < |U|/ω <= 1, got U = {}",
                    params.stark_u
                )));
            }
            let branch = params.branch();
            Ok(branch_critical_point(
                params.delta,
                params.omega,
                branch,
                params.coupling_g,
            )?)
        }
    }
}

/// `g_c^±` and `E_c^±(g)` for an explicit branch.
pub fn branch_critical_point(delta: f64, omega: f64, branch: Branch, g: f64) -> Result<CriticalData> {
    let signed_delta = branch.sign() * delta;
    let radicand = omega * (omega - signed_delta) / 2.0;
    if radicand <= 0.0 || !radicand.is_finite() {
        return Err(Error::NoCriticalPoint {
            delta,
            branch: branch.name(),
            radicand,
        });
    }
    Ok(CriticalData {
        g_c: radicand.sqrt(),
        e_c: -signed_delta / 2.0 - 2.0 * g * g / omega,
        branch,
    })
}

/// Effective system size: `L = 1/(1 ∓ U/ω)` for the RSM and `L_R = Δ/ω` for
/// the QRM.
pub fn effective_size(params: &ModelParams) -> Result<f64> {
    params.validate()?;
    match params.kind {
        ModelKind::Qrm => {
            if params.delta <= 0.0 {
                return Err(Error::InvalidParameter("QRM size needs delta > 0".into()));
            }
            Ok(params.delta / params.omega)
        }
        ModelKind::Rsm => {
            let u = params.stark_u / params.omega;
            if u.abs() >= 1.0 {
                return Err(Error::InvalidParameter(format!(
                    "|U|/ω = {} gives an infinite or undefined size",
                    u.abs()
                )));
            }
            Ok(1.0 / (1.0 - u.abs()))
        }
    }
}

/// Natural coupling scale of a parameter set: the critical coupling of its
/// branch when one exists, otherwise `ω`.
pub fn coupling_scale(params: &ModelParams) -> f64 {
    match params.kind {
        ModelKind::Qrm => critical_point(params).map(|c| c.g_c).unwrap_or(params.omega),
        ModelKind::Rsm => branch_critical_point(params.delta, params.omega, params.branch(), 0.0)
            .map(|c| c.g_c)
            .unwrap_or(params.omega),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tr(n: usize) -> FockTruncation {
        FockTruncation::new(n).unwrap()
    }

    #[test]
    fn diagonal_element_reads_off() {
        let h = build_hamiltonian(&ModelParams::rsm(0.5, 1.0, 0.3), tr(8)).unwrap();
        assert_eq!(h.get(basis_index(3, false), basis_index(3, false)), 6.25);
        // spin-down diagonal is flat at U = 1
        for n in 0..=8 {
            assert_eq!(h.get(basis_index(n, true), basis_index(n, true)), -0.25);
        }
    }

    #[test]
    fn coupling_element() {
        for p in [ModelParams::rsm(0.5, 0.7, 0.4), ModelParams::qrm(2.0, 0.4)] {
            let h = build_hamiltonian(&p, tr(4)).unwrap();
            assert_eq!(h.get(basis_index(0, true), basis_index(1, false)), 0.4);
            assert_eq!(h.get(basis_index(1, false), basis_index(0, true)), 0.4);
            assert_eq!(h.get(basis_index(2, false), basis_index(3, true)), 0.4 * 3f64.sqrt());
            // no spin-conserving photon hops
            assert_eq!(h.get(basis_index(0, false), basis_index(1, false)), 0.0);
        }
    }

    #[test]
    fn qrm_ignores_stark() {
        let mut p = ModelParams::qrm(0.5, 0.2);
        p.stark_u = 0.9;
        let a = build_hamiltonian(&p, tr(6)).unwrap();
        let b = build_hamiltonian(&ModelParams::rsm(0.5, 0.0, 0.2), tr(6)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(FockTruncation::new(0).is_err());
        assert!(build_hamiltonian(&ModelParams::rsm(f64::NAN, 1.0, 0.1), tr(4)).is_err());
        assert!(build_hamiltonian(&ModelParams::rsm(0.5, 1.0, -0.1), tr(4)).is_err());
        let mut p = ModelParams::qrm(0.5, 0.1);
        p.omega = 0.0;
        assert!(build_hamiltonian(&p, tr(4)).is_err());
        assert!(build_hamiltonian(&ModelParams::qrm(0.5, f64::INFINITY), tr(4)).is_err());
    }

    #[test]
    fn parity_diagonal() {
        let p = build_parity_operator(tr(3)).unwrap();
        assert_eq!(p.get(0, 0), 1.0);
        assert_eq!(p.get(basis_index(1, false), basis_index(1, false)), -1.0);
        assert_eq!(p.get(basis_index(1, true), basis_index(1, true)), 1.0);
        assert_eq!(p.get(basis_index(0, true), basis_index(0, true)), -1.0);
        assert_eq!(p.nnz(), 8);
    }

    #[test]
    fn parity_commutes() {
        let t = tr(20);
        let p = build_parity_operator(t).unwrap();
        for params in [
            ModelParams::rsm(0.5, 1.0, 0.45),
            ModelParams::rsm(0.5, -0.3, 1.2),
            ModelParams::qrm(4.0, 2.0),
        ] {
            let h = build_hamiltonian(&params, t).unwrap();
            assert_eq!(h.commutator_norm(&p), 0.0);
        }
    }

    #[test]
    fn critical_points() {
        let c = critical_point(&ModelParams::rsm(0.5, 1.0, 0.5)).unwrap();
        assert_eq!(c.g_c, 0.5);
        assert_eq!(c.e_c, -0.75);
        assert_eq!(c.branch, Branch::Plus);

        let m = critical_point(&ModelParams::rsm(0.5, -1.0, 0.0)).unwrap();
        assert!((m.g_c - 0.75f64.sqrt()).abs() < 1e-15);
        assert_eq!(m.e_c, 0.25);
        assert_eq!(m.branch, Branch::Minus);

        let q = critical_point(&ModelParams::qrm(1e8, 0.0)).unwrap();
        assert!((q.g_c - 5000.0).abs() < 1e-9);

        assert!(matches!(
            critical_point(&ModelParams::rsm(1.0, 1.0, 0.1)),
            Err(Error::NoCriticalPoint { .. })
        ));
        assert!(critical_point(&ModelParams::rsm(0.5, 0.0, 0.1)).is_err());
    }

    #[test]
    fn sizes() {
        let l = effective_size(&ModelParams::rsm(0.5, 0.99, 0.1)).unwrap();
        assert!((l - 100.0).abs() < 1e-9);
        let l = effective_size(&ModelParams::rsm(0.5, -0.9, 0.1)).unwrap();
        assert!((l - 10.0).abs() < 1e-12);
        assert_eq!(effective_size(&ModelParams::qrm(1e8, 0.0)).unwrap(), 1e8);
        assert!(effective_size(&ModelParams::rsm(0.5, 1.0, 0.1)).is_err());
        assert!(effective_size(&ModelParams::rsm(0.5, -1.0, 0.1)).is_err());
    }

    #[test]
    fn size_roundtrip() {
        for l in [10.0, 1e3, 1e6] {
            let p = ModelParams::rsm_at_size(0.5, l, Branch::Minus, 0.2);
            assert!(p.stark_u < 0.0);
            assert!((effective_size(&p).unwrap() / l - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn symmetric_and_triplet_merge() {
        let h = build_hamiltonian(&ModelParams::rsm(0.3, 0.4, 0.7), tr(12)).unwrap();
        assert!(h.is_symmetric());
        let op = SparseOperator::from_triplets(3, vec![(0, 1, 1.0), (0, 1, 2.0), (2, 2, 0.0)]).unwrap();
        assert_eq!(op.get(0, 1), 3.0);
        assert_eq!(op.nnz(), 1);
        assert!(SparseOperator::from_triplets(2, vec![(2, 0, 1.0)]).is_err());
    }
}

//! Closed-form solution of the Rabi-Stark model at `U = ω = 1`, valid below the
//! critical coupling.
//!
//! Projecting out the spin-up manifold leaves a single oscillator with a
//! quadratic coupling `χ (a + a†)²`, `χ = g²/(Δ/2 + E)`, which a squeezing
//! transformation diagonalizes. The low levels solve
//!
//! ```text
//! √(-(Δ/2 + E)) (E + 1 - Δ/2) / √(-(Δ/2 + E + 2g²)) = 2n + 1
//! ```
//!
//! inside `(Δ/2 - 1, E_c)` with `E_c = -Δ/2 - 2g²`. The `U = -1` branch follows
//! from `Δ -> -Δ`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleLevel {
    pub n: usize,
    pub energy: f64,
    /// `E_c - E_n > 0`, kept separately because it is known to full relative
    /// precision even where `E_n` and `E_c` nearly coincide.
    pub depth: f64,
    pub chi: f64,
    /// Squeezing parameter `r = ¼ ln(1/(1 + 2χ))`.
    pub r: f64,
    pub c_n: f64,
    pub d_n: f64,
    pub norm: f64,
}

fn check_coupling(delta: f64, g: f64) -> Result<(f64, f64)> {
    if !delta.is_finite() || !g.is_finite() {
        return Err(Error::InvalidParameter(format!("delta = {delta}, g = {g}")));
    }
    if !(g > 0.0) {
        return Err(Error::InvalidParameter(format!("the closed form needs g > 0, got {g}")));
    }
    let radicand = (1.0 - delta) / 2.0;
    if radicand <= 0.0 {
        return Err(Error::NoCriticalPoint {
            delta,
            branch: "plus",
            radicand,
        });
    }
    let g_c = radicand.sqrt();
    if g >= g_c {
        return Err(Error::AboveCritical { g, g_c });
    }
    // width of (Δ/2 - 1, E_c), i.e. 2(g_c² - g²)
    Ok((g_c, 1.0 - delta - 2.0 * g * g))
}

/// Spectral condition in terms of the depth `u = E_c - E`, decreasing in `u`.
fn condition(g: f64, width: f64, n: usize, u: f64) -> f64 {
    (2.0 * g * g + u).sqrt() * (width - u) / u.sqrt() - (2 * n + 1) as f64
}

/// Depth `E_c - E_n` of level `n`.
pub fn level_depth(delta: f64, g: f64, n: usize) -> Result<f64> {
    let (_, width) = check_coupling(delta, g)?;
    if !(width > 0.0) {
        return Err(Error::NoSignChange {
            level: n,
            lo: delta / 2.0 - 1.0,
            hi: -delta / 2.0 - 2.0 * g * g,
        });
    }
    let mut hi = width;
    let mut lo = width * 1e-3;
    while condition(g, width, n, lo) <= 0.0 {
        lo *= 1e-3;
        if lo < 1e-300 {
            return Err(Error::NoSignChange {
                level: n,
                lo: delta / 2.0 - 1.0,
                hi: -delta / 2.0 - 2.0 * g * g,
            });
        }
    }
    // bisect in log u: the root can sit many decades below the bracket width
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if mid <= lo || mid >= hi || hi / lo - 1.0 <= 4.0 * f64::EPSILON {
            break;
        }
        if condition(g, width, n, mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo * hi).sqrt())
}

/// Energy `E_n` of the `n`-th low level at `U = 1`.
pub fn solve_low_spectrum(delta: f64, g: f64, n: usize) -> Result<f64> {
    let u = level_depth(delta, g, n)?;
    Ok(-delta / 2.0 - 2.0 * g * g - u)
}

/// Residual of the spectral condition at energy `e`.
pub fn spectral_condition(delta: f64, g: f64, n: usize, e: f64) -> f64 {
    (-(delta / 2.0 + e)).sqrt() * (e + 1.0 - delta / 2.0) / (-(delta / 2.0 + e + 2.0 * g * g)).sqrt()
        - (2 * n + 1) as f64
}

/// Energy from the self-consistency form `E = √(1 + 2χ)(2n + 1) - 1 + Δ/2`.
pub fn self_consistent_energy(delta: f64, g: f64, n: usize, e: f64) -> f64 {
    let chi = g * g / (delta / 2.0 + e);
    (1.0 + 2.0 * chi).sqrt() * (2 * n + 1) as f64 - 1.0 + delta / 2.0
}

pub fn oracle_level_data(delta: f64, g: f64, n: usize) -> Result<OracleLevel> {
    let u = level_depth(delta, g, n)?;
    let energy = -delta / 2.0 - 2.0 * g * g - u;
    // Δ/2 + E = -(2g² + u)
    let chi = -g * g / (2.0 * g * g + u);
    let stiffness = u / (2.0 * g * g + u);
    let r = 0.25 * (1.0 / stiffness).ln();
    let c_n = stiffness.powf(0.25);
    let d_n = chi / g;
    let norm = (c_n * c_n + (2 * n + 1) as f64 * d_n * d_n).sqrt();
    Ok(OracleLevel {
        n,
        energy,
        depth: u,
        chi,
        r,
        c_n,
        d_n,
        norm,
    })
}

/// Observables of level `n` evaluated exactly on the squeezed eigenfunction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelObservables {
    pub mean_photon: f64,
    pub delta_x: f64,
}

pub fn level_observables(delta: f64, g: f64, n: usize) -> Result<LevelObservables> {
    let lvl = oracle_level_data(delta, g, n)?;
    let nf = n as f64;
    let (c2, d2) = (lvl.c_n * lvl.c_n, lvl.d_n * lvl.d_n);
    let (ch, sh2, s2) = ((2.0 * lvl.r).cosh(), lvl.r.sinh().powi(2), (2.0 * lvl.r).sinh());
    let norm2 = lvl.norm * lvl.norm;
    let mean_photon = (c2 * (nf * ch + sh2)
        + d2 * ((2.0 * nf * nf + nf + 1.0) * ch + (2.0 * nf + 1.0) * sh2 + nf * (nf + 1.0) * s2))
        / norm2;
    let var = (2.0 * lvl.r).exp() / (2.0 * norm2) * (c2 * (2.0 * nf + 1.0) + d2 * (6.0 * nf * nf + 6.0 * nf + 3.0));
    Ok(LevelObservables {
        mean_photon,
        delta_x: var.sqrt(),
    })
}

/// Leading closed forms near the critical point in `λ = g/g_c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyticObservables {
    pub mean_photon: f64,
    pub delta_x: f64,
    /// Fidelity susceptibility per unit `λ`.
    pub chi_f_full: f64,
    /// Its most singular term, `(3/2) λ²/(1 - λ²)²`.
    pub chi_f_asymptotic: f64,
}

pub fn analytic_observables(delta: f64, lambda: f64, n: usize) -> Result<AnalyticObservables> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::InvalidParameter(format!("lambda = {lambda} outside (0, 1)")));
    }
    if !(delta < 1.0) || !delta.is_finite() {
        return Err(Error::NoCriticalPoint {
            delta,
            branch: "plus",
            radicand: (1.0 - delta) / 2.0,
        });
    }
    let m = (2 * n + 1) as f64;
    let a = 1.0 - delta;
    let l2 = lambda * lambda;
    let s = 1.0 - l2;
    let mean_photon = 0.375 * (m * m + 1.0) / (a * s) - 0.5 * (1.0 - a * l2);
    let delta_x = (3.0 * (m * m + 1.0) / (4.0 * a * s)).sqrt();
    let chi_f_asymptotic = 1.5 * l2 / (s * s);
    let chi_f_full = a * a * (2.0 + l2 * l2) / s + chi_f_asymptotic + 4.0 * a * a * l2;
    Ok(AnalyticObservables {
        mean_photon,
        delta_x,
        chi_f_full,
        chi_f_asymptotic,
    })
}

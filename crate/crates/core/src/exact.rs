//! Reference spectrum of the truncated Rabi Hamiltonian.
//!
//! The parity `P = -sz (-1)^{b'b}` splits the truncated space into two chains,
//! `|dn 0>, |up 1>, |dn 2>, ...` (P = +1) and `|up 0>, |dn 1>, |up 2>, ...`
//! (P = -1). Each chain is a symmetric tridiagonal matrix holding exactly the
//! eigenvalues of the dense matrix restricted to that sector, so the lowest
//! levels come from Sturm-sequence bisection at O(n_max) per probe.
//! [`dense_levels`] and [`parity_resolve`] go through the full matrix and are
//! used to check the sector route.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{build_hamiltonian, parity_matrix, FockConfig, RabiParams};

pub const START_N_MAX: usize = 64;
pub const MAX_N_MAX: usize = 4096;
pub const DEFAULT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Parity {
    Positive,
    Negative,
}

impl Parity {
    pub fn sign(self) -> f64 {
        match self {
            Parity::Positive => 1.0,
            Parity::Negative => -1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumResult {
    /// Lowest levels, ascending.
    pub levels: Vec<f64>,
    /// Sector each level was found in.
    pub parities: Vec<Parity>,
    pub n_max_used: usize,
    pub converged: bool,
    /// Largest change of the reported levels over the last doubling.
    pub residual: f64,
}

impl SpectrumResult {
    pub fn ground(&self) -> f64 {
        self.levels[0]
    }

    pub fn lowest_with_parity(&self, parity: Parity) -> Option<f64> {
        self.levels
            .iter()
            .zip(&self.parities)
            .find(|(_, p)| **p == parity)
            .map(|(e, _)| *e)
    }

    pub fn require_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NotConverged { n_max: self.n_max_used, residual: self.residual })
        }
    }
}

/// Diagonal and off-diagonal of the tridiagonal block of one parity sector.
pub fn sector_matrix(params: &RabiParams, parity: Parity, n_max: usize) -> (Vec<f64>, Vec<f64>) {
    let diag = (0..=n_max)
        .map(|k| {
            let lower_level = (k % 2 == 0) == (parity == Parity::Positive);
            let atom = if lower_level { -0.5 } else { 0.5 } * params.omega0;
            atom + params.omega * k as f64
        })
        .collect();
    let off = (1..=n_max).map(|k| 2.0 * params.g * (k as f64).sqrt()).collect();
    (diag, off)
}

/// Number of eigenvalues strictly below `lambda` (Sturm count).
fn count_below(diag: &[f64], off: &[f64], lambda: f64) -> usize {
    let mut count = 0;
    let mut q = 1.0;
    for (k, d) in diag.iter().enumerate() {
        let coupling = if k == 0 { 0.0 } else { off[k - 1] * off[k - 1] / q };
        q = d - lambda - coupling;
        if q == 0.0 {
            q = -f64::EPSILON * (d.abs() + lambda.abs()).max(f64::MIN_POSITIVE);
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// Lowest `count` eigenvalues of a symmetric tridiagonal matrix by bisection.
pub fn tridiagonal_lowest(diag: &[f64], off: &[f64], count: usize) -> Vec<f64> {
    let n = diag.len();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for k in 0..n {
        let r = if k > 0 { off[k - 1].abs() } else { 0.0 }
            + if k + 1 < n { off[k].abs() } else { 0.0 };
        lo = lo.min(diag[k] - r);
        hi = hi.max(diag[k] + r);
    }
    (0..count.min(n))
        .map(|index| {
            let (mut a, mut b) = (lo, hi);
            for _ in 0..200 {
                let mid = 0.5 * (a + b);
                if mid <= a || mid >= b {
                    break;
                }
                if count_below(diag, off, mid) > index {
                    b = mid;
                } else {
                    a = mid;
                }
            }
            0.5 * (a + b)
        })
        .collect()
}

pub fn sector_levels(params: &RabiParams, parity: Parity, n_max: usize, count: usize) -> Vec<f64> {
    let (diag, off) = sector_matrix(params, parity, n_max);
    tridiagonal_lowest(&diag, &off, count)
}

fn merged_levels(params: &RabiParams, n_max: usize, count: usize) -> (Vec<f64>, Vec<Parity>) {
    let mut all: Vec<(f64, Parity)> = [Parity::Positive, Parity::Negative]
        .into_iter()
        .flat_map(|p| sector_levels(params, p, n_max, count).into_iter().map(move |e| (e, p)))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0).then((a.1 == Parity::Negative).cmp(&(b.1 == Parity::Negative))));
    all.truncate(count);
    all.into_iter().unzip()
}

/// Lowest `count` levels, doubling `n_max` from 64 until they move by less
/// than `tol`. Past `n_max = 4096` the best levels are returned with
/// `converged = false`.
pub fn exact_levels(params: &RabiParams, count: usize, tol: f64) -> Result<SpectrumResult> {
    params.validate()?;
    if count == 0 || !(tol > 0.0) {
        return Err(Error::InvalidParams("need count >= 1 and tol > 0".into()));
    }
    let mut n_max = START_N_MAX;
    let (mut levels, _) = merged_levels(params, n_max, count);
    loop {
        let next_n = 2 * n_max;
        if next_n > MAX_N_MAX {
            let (levels, parities) = merged_levels(params, n_max, count);
            return Ok(SpectrumResult {
                levels,
                parities,
                n_max_used: n_max,
                converged: false,
                residual: f64::INFINITY,
            });
        }
        let (next, parities) = merged_levels(params, next_n, count);
        let residual = levels
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if residual < tol {
            return Ok(SpectrumResult {
                levels: next,
                parities,
                n_max_used: next_n,
                converged: true,
                residual,
            });
        }
        levels = next;
        n_max = next_n;
    }
}

/// All eigenvalues of the dense matrix, ascending.
pub fn dense_levels(params: &RabiParams, config: &FockConfig) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(build_hamiltonian(params, config))
        .eigenvalues
        .iter()
        .copied()
        .collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Labels each reported level by diagonalizing the full matrix at the same
/// cutoff and measuring `<P>` in its eigenvector. Degenerate clusters are
/// resolved by diagonalizing `P` inside the cluster; labels within a cluster
/// are listed positive first.
pub fn parity_resolve(params: &RabiParams, spectrum: &SpectrumResult) -> Result<Vec<Parity>> {
    let config = FockConfig::new(spectrum.n_max_used)?;
    let eig = SymmetricEigen::new(build_hamiltonian(params, &config));
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let count = spectrum.levels.len();
    let pm = parity_matrix(&config);

    let mut labels = Vec::with_capacity(count);
    let mut start = 0;
    while start < count {
        let e0 = eig.eigenvalues[order[start]];
        let mut end = start + 1;
        while end < order.len() && (eig.eigenvalues[order[end]] - e0).abs() <= 1e-8 * e0.abs().max(1.0) {
            end += 1;
        }
        let vectors: Vec<_> = order[start..end].iter().map(|&i| eig.eigenvectors.column(i)).collect();
        let block = DMatrix::from_fn(vectors.len(), vectors.len(), |a, b| {
            vectors[a].dot(&(&pm * vectors[b]))
        });
        let mut values: Vec<f64> = SymmetricEigen::new(block).eigenvalues.iter().copied().collect();
        values.sort_by(|a, b| b.total_cmp(a));
        for (offset, v) in values.into_iter().enumerate() {
            if v.abs() < 0.999 {
                return Err(Error::AmbiguousParity { level: start + offset, expectation: v });
            }
            labels.push(if v > 0.0 { Parity::Positive } else { Parity::Negative });
        }
        start = end;
    }
    labels.truncate(count);
    Ok(labels)
}

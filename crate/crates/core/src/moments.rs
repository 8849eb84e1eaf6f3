//! Raw moments `mu_m = <psi|H^m|psi>` and connected moments `I_m`.
//!
//! Connected moments for `m >= 2` are shift invariant, so they are always
//! formed from moments of `H - c` with `c = <psi|H|psi>`. At large coupling the
//! uncentered `mu_6` is of order `1e12` and the recursion would cancel away
//! most of the significant digits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{
    dot, trial_state, FockConfig, Operator, RabiHamiltonian, RabiParams, StateVector, TrialKind,
    TrialSpec, SMALL_X,
};

pub const MAX_ORDER: usize = 12;

/// Relative change of the highest moment below which the adaptive cutoff stops.
pub const ADAPTIVE_TOL: f64 = 1e-12;

/// `mu[k] = <psi|(H - shift)^(k+1)|psi>`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentSet {
    mu: Vec<f64>,
    shift: f64,
}

impl MomentSet {
    pub fn new(mu: Vec<f64>, shift: f64) -> Result<Self> {
        check_order(mu.len())?;
        Ok(Self { mu, shift })
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn order(&self) -> usize {
        self.mu.len()
    }

    /// One-based access, `get(1) = mu_1`.
    pub fn get(&self, m: usize) -> f64 {
        self.mu[m - 1]
    }
}

/// `values[k] = I_(k+1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConnectedMoments {
    values: Vec<f64>,
}

impl ConnectedMoments {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        check_order(values.len())?;
        Ok(Self { values })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn order(&self) -> usize {
        self.values.len()
    }

    /// One-based access, `get(1) = I_1`.
    pub fn get(&self, m: usize) -> f64 {
        self.values[m - 1]
    }

    /// Variational energy `I_1`.
    pub fn energy(&self) -> f64 {
        self.values[0]
    }

    /// Energy variance `I_2` (zero when only one moment is stored).
    pub fn variance(&self) -> f64 {
        self.values.get(1).copied().unwrap_or(0.0)
    }

    /// Moments of `H + c`: `I_1` moves by `c`, the rest is unchanged.
    pub fn shifted(&self, c: f64) -> Self {
        let mut values = self.values.clone();
        values[0] += c;
        Self { values }
    }

    /// True when the trial state is an eigenstate to working precision:
    /// `sqrt(I_2) <= 1e-8 max(1, |I_1|)`.
    pub fn is_eigenstate(&self) -> bool {
        self.variance().abs().sqrt() <= 1e-8 * self.energy().abs().max(1.0)
    }
}

fn check_order(m: usize) -> Result<()> {
    if m == 0 || m > MAX_ORDER {
        return Err(Error::InvalidOrder { order: m, reason: "moment order must be in 1..=12" });
    }
    Ok(())
}

/// Moments of `H - shift` by repeated application `v_(k+1) = (H - shift) v_k`
/// and the symmetric split `mu_m = <v_j|v_(m-j)>`, `j = floor(m/2)`.
pub fn raw_moments<O: Operator + ?Sized>(
    state: &StateVector,
    hamiltonian: &O,
    order: usize,
    shift: f64,
) -> Result<MomentSet> {
    check_order(order)?;
    let dim = state.as_slice().len();
    if hamiltonian.dim() != dim {
        return Err(Error::InvalidParams(format!(
            "operator dimension {} does not match state dimension {dim}",
            hamiltonian.dim()
        )));
    }
    let depth = order.div_ceil(2);
    let mut powers: Vec<Vec<f64>> = Vec::with_capacity(depth + 1);
    powers.push(state.as_slice().to_vec());
    for k in 0..depth {
        let mut next = vec![0.0; dim];
        hamiltonian.apply(&powers[k], &mut next);
        if shift != 0.0 {
            next.iter_mut().zip(&powers[k]).for_each(|(n, v)| *n -= shift * v);
        }
        powers.push(next);
    }
    let mu = (1..=order)
        .map(|m| {
            let j = m / 2;
            dot(&powers[j], &powers[m - j])
        })
        .collect();
    Ok(MomentSet { mu, shift })
}

fn binomial_row(n: usize) -> Vec<f64> {
    let mut row = vec![1.0; n + 1];
    for k in 1..n {
        row[k] = row[k - 1] * (n - k + 1) as f64 / k as f64;
    }
    row
}

/// `I_1 = mu_1`, `I_m = mu_m - sum_{k=0}^{m-2} C(m-1, k) I_(k+1) mu_(m-k-1)`.
///
/// The recursion runs on the moments as given; a non-zero shift is then added
/// back to `I_1` only.
pub fn connected_from_raw(moments: &MomentSet) -> ConnectedMoments {
    let mu = &moments.mu;
    let order = mu.len();
    let mut values = vec![0.0; order];
    values[0] = mu[0];
    for m in 2..=order {
        let binom = binomial_row(m - 1);
        let mut acc = mu[m - 1];
        for k in 0..=m - 2 {
            acc -= binom[k] * values[k] * mu[m - k - 2];
        }
        values[m - 1] = acc;
    }
    values[0] += moments.shift;
    ConnectedMoments { values }
}

/// Connected moments of a trial state, using the default cutoff for its
/// displacement and centering at `<H>`.
pub fn trial_moments(params: &RabiParams, spec: &TrialSpec, order: usize) -> Result<ConnectedMoments> {
    let config = FockConfig::for_displacement(spec.x);
    trial_moments_in(params, spec, order, &config).map(|(c, _)| c)
}

fn trial_moments_in(
    params: &RabiParams,
    spec: &TrialSpec,
    order: usize,
    config: &FockConfig,
) -> Result<(ConnectedMoments, MomentSet)> {
    check_order(order)?;
    let state = trial_state(spec, config)?;
    let h = RabiHamiltonian::new(*params, *config);
    let center = state.expectation(&h);
    let raw = raw_moments(&state, &h, order, center)?;
    Ok((connected_from_raw(&raw), raw))
}

/// As [`trial_moments`], doubling `n_max` until the highest centered moment
/// changes by less than `1e-12` relative.
pub fn trial_moments_adaptive(
    params: &RabiParams,
    spec: &TrialSpec,
    order: usize,
) -> Result<(ConnectedMoments, FockConfig)> {
    let mut config = FockConfig::for_displacement(spec.x);
    let (mut current, mut raw) = trial_moments_in(params, spec, order, &config)?;
    for _ in 0..6 {
        let bigger = config.doubled();
        let (next, next_raw) = trial_moments_in(params, spec, order, &bigger)?;
        let a = raw.get(order);
        let b = next_raw.get(order);
        let converged = (a - b).abs() <= ADAPTIVE_TOL * a.abs().max(b.abs()).max(f64::MIN_POSITIVE);
        config = bigger;
        current = next;
        raw = next_raw;
        if converged {
            break;
        }
    }
    Ok((current, config))
}

/// Closed-form `(mu_1, mu_2)` for the three trial families.
pub fn analytic_moments_12(params: &RabiParams, spec: &TrialSpec) -> (f64, f64) {
    let RabiParams { omega0: w0, omega: w, g } = *params;
    let TrialSpec { kind, x, y } = *spec;
    let y2 = y * y;
    let x2 = x * x;
    let spin = 0.5 * w0 * (y2 - 1.0) / (y2 + 1.0);
    match kind {
        TrialKind::NonSym => {
            let mu1 = w * x2 + 8.0 * g * x * y / (y2 + 1.0) + spin;
            let mu2 = 0.25 * w0 * w0
                + 4.0 * g * g * (1.0 + 4.0 * x2)
                + w * w * (x2 + x2 * x2)
                + (8.0 * g * w * x * y * (1.0 + 2.0 * x2) + w0 * w * x2 * (y2 - 1.0)) / (y2 + 1.0);
            (mu1, mu2)
        }
        TrialKind::PosParity | TrialKind::NegParity => {
            // x^2 coth(x^2), x^2 tanh(x^2) and x / sqrt(1 - exp(-4x^2))
            let (xcoth, xtanh, xroot) = if x.abs() < SMALL_X {
                (1.0, x2 * x2, if x < 0.0 { -0.5 } else { 0.5 })
            } else {
                let t = x2.tanh();
                (x2 / t, x2 * t, x / (-(-4.0 * x2).exp_m1()).sqrt())
            };
            // (coth)^{+1}, (tanh)^{+1} for the positive parity; swapped otherwise
            let (a, b) = if kind == TrialKind::PosParity { (xcoth, xtanh) } else { (xtanh, xcoth) };
            let mu1 = spin + 8.0 * g * xroot * y / (1.0 + y2) + w * (y2 * a + b) / (y2 + 1.0);
            let mu2 = 0.25 * w0 * w0
                + w * w * x2 * x2
                + 4.0 * g * g * (1.0 + 2.0 * x2)
                + 8.0 * g * w * xroot * y * (1.0 + 2.0 * x2) / (y2 + 1.0)
                + w0 * w * (y2 * a - b) / (y2 + 1.0)
                + (8.0 * g * g + w * w) * (y2 * a + b) / (y2 + 1.0);
            (mu1, mu2)
        }
    }
}

//! Truncated Fock-space realization of the Rabi Hamiltonian and of the three
//! trial-state families.
//!
//! Basis ordering is atom-level-major: indices `0..=n_max` hold the lower atomic
//! level (`sz = -1`) with boson number `n`, indices `n_max+1..` hold the upper
//! level. A spinor `(a, b)^T` puts `a` on the upper level and `b` on the lower
//! one, so `(0, 1)^T |0>` is the `g = 0` ground state.

use nalgebra::{DMatrix, DVectorView, DVectorViewMut};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this |x| the parity-symmetrized states are built from their x -> 0 limit.
pub const SMALL_X: f64 = 1e-6;

/// Tail mass above which a truncated coherent state is rejected.
pub const MAX_TAIL_MASS: f64 = 1e-10;

// exp(-x^2/2) stays a normal double up to x^2 ~ 1400.
const DIRECT_COHERENT_LIMIT: f64 = 1200.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RabiParams {
    pub omega0: f64,
    pub omega: f64,
    pub g: f64,
}

impl RabiParams {
    pub fn new(omega0: f64, omega: f64, g: f64) -> Result<Self> {
        let p = Self { omega0, omega, g };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("omega0", self.omega0), ("omega", self.omega), ("g", self.g)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidParams(format!(
                    "{name} must be finite and non-negative, got {v}"
                )));
            }
        }
        Ok(())
    }

    pub fn with_g(&self, g: f64) -> Self {
        Self { g, ..*self }
    }

    /// Asymptotic large-g displacement `2g/w` of the coherent state.
    pub fn asymptotic_x(&self) -> f64 {
        2.0 * self.g / self.omega
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FockConfig {
    pub n_max: usize,
}

impl FockConfig {
    pub fn new(n_max: usize) -> Result<Self> {
        if n_max < 1 {
            return Err(Error::InvalidParams("n_max must be at least 1".into()));
        }
        Ok(Self { n_max })
    }

    /// Default cutoff for a coherent state of displacement `x`:
    /// `max(32, ceil(x^2 + 10 sqrt(x^2 + 1) + 20))`.
    pub fn for_displacement(x: f64) -> Self {
        let x2 = x * x;
        let n = (x2 + 10.0 * (x2 + 1.0).sqrt() + 20.0).ceil();
        Self { n_max: (n as usize).max(32) }
    }

    pub fn doubled(&self) -> Self {
        Self { n_max: 2 * self.n_max }
    }

    /// Number of boson levels, `n_max + 1`.
    pub fn levels(&self) -> usize {
        self.n_max + 1
    }

    /// Full dimension `2 (n_max + 1)`.
    pub fn dim(&self) -> usize {
        2 * self.levels()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TrialKind {
    /// Spinor times a single coherent state.
    NonSym,
    /// Positive-parity cat-state combination; targets `E0`.
    PosParity,
    /// Negative-parity combination; targets `E1`.
    NegParity,
}

impl TrialKind {
    pub fn is_symmetrized(self) -> bool {
        !matches!(self, TrialKind::NonSym)
    }

    pub fn name(self) -> &'static str {
        match self {
            TrialKind::NonSym => "nonsym",
            TrialKind::PosParity => "pparity",
            TrialKind::NegParity => "nparity",
        }
    }
}

impl std::str::FromStr for TrialKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "nonsym" => Ok(TrialKind::NonSym),
            "pparity" | "p" => Ok(TrialKind::PosParity),
            "nparity" | "n" => Ok(TrialKind::NegParity),
            other => Err(Error::InvalidParams(format!("unknown trial kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialSpec {
    pub kind: TrialKind,
    pub x: f64,
    pub y: f64,
}

impl TrialSpec {
    pub fn new(kind: TrialKind, x: f64, y: f64) -> Self {
        Self { kind, x, y }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    config: FockConfig,
    coeffs: Vec<f64>,
}

impl StateVector {
    /// Wraps raw coefficients; the length must be `config.dim()`.
    pub fn from_coeffs(config: FockConfig, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != config.dim() {
            return Err(Error::InvalidParams(format!(
                "state has {} coefficients, basis needs {}",
                coeffs.len(),
                config.dim()
            )));
        }
        Ok(Self { config, coeffs })
    }

    pub fn config(&self) -> FockConfig {
        self.config
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.coeffs
    }

    /// Lower atomic level block.
    pub fn down(&self) -> &[f64] {
        &self.coeffs[..self.config.levels()]
    }

    /// Upper atomic level block.
    pub fn up(&self) -> &[f64] {
        &self.coeffs[self.config.levels()..]
    }

    pub fn norm(&self) -> f64 {
        dot(&self.coeffs, &self.coeffs).sqrt()
    }

    pub fn overlap(&self, other: &StateVector) -> f64 {
        dot(&self.coeffs, &other.coeffs)
    }

    pub fn expectation<O: Operator + ?Sized>(&self, op: &O) -> f64 {
        let mut tmp = vec![0.0; self.coeffs.len()];
        op.apply(&self.coeffs, &mut tmp);
        dot(&self.coeffs, &tmp)
    }

    fn normalize(&mut self) {
        let n = self.norm();
        self.coeffs.iter_mut().for_each(|c| *c /= n);
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// A real symmetric linear operator acting on coefficient slices.
pub trait Operator {
    fn dim(&self) -> usize;
    fn apply(&self, v: &[f64], out: &mut [f64]);
}

impl Operator for DMatrix<f64> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, v: &[f64], out: &mut [f64]) {
        let n = self.nrows();
        let v = DVectorView::from_slice(v, n);
        let mut out = DVectorViewMut::from_slice(out, n);
        out.gemv(1.0, self, &v, 0.0);
    }
}

/// Structured form of the Rabi Hamiltonian; `apply` costs O(n_max).
#[derive(Debug, Clone)]
pub struct RabiHamiltonian {
    params: RabiParams,
    config: FockConfig,
    sqrt_n: Vec<f64>,
}

impl RabiHamiltonian {
    pub fn new(params: RabiParams, config: FockConfig) -> Self {
        let sqrt_n = (0..=config.levels()).map(|n| (n as f64).sqrt()).collect();
        Self { params, config, sqrt_n }
    }

    pub fn params(&self) -> RabiParams {
        self.params
    }

    pub fn config(&self) -> FockConfig {
        self.config
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        build_hamiltonian(&self.params, &self.config)
    }
}

impl Operator for RabiHamiltonian {
    fn dim(&self) -> usize {
        self.config.dim()
    }

    fn apply(&self, v: &[f64], out: &mut [f64]) {
        let levels = self.config.levels();
        let RabiParams { omega0, omega, g } = self.params;
        let coupling = 2.0 * g;
        let (vd, vu) = v.split_at(levels);
        let (od, ou) = out.split_at_mut(levels);
        let s = &self.sqrt_n;
        for n in 0..levels {
            let boson = omega * n as f64;
            // (b + b') a at n: sqrt(n+1) a[n+1] + sqrt(n) a[n-1]
            let mut xd = 0.0;
            let mut xu = 0.0;
            if n + 1 < levels {
                xd += s[n + 1] * vu[n + 1];
                xu += s[n + 1] * vd[n + 1];
            }
            if n > 0 {
                xd += s[n] * vu[n - 1];
                xu += s[n] * vd[n - 1];
            }
            od[n] = (boson - 0.5 * omega0) * vd[n] + coupling * xd;
            ou[n] = (boson + 0.5 * omega0) * vu[n] + coupling * xu;
        }
    }
}

/// Dense matrix of `H = (w0/2) sz + w b'b + g (s+ + s-)(b' + b)` with
/// `s+ + s- = 2 sx`, in the atom-level-major basis.
pub fn build_hamiltonian(params: &RabiParams, config: &FockConfig) -> DMatrix<f64> {
    let levels = config.levels();
    let dim = config.dim();
    let mut h = DMatrix::zeros(dim, dim);
    let coupling = 2.0 * params.g;
    for n in 0..levels {
        let boson = params.omega * n as f64;
        h[(n, n)] = boson - 0.5 * params.omega0;
        h[(levels + n, levels + n)] = boson + 0.5 * params.omega0;
        if n + 1 < levels {
            let t = coupling * ((n + 1) as f64).sqrt();
            // down n <-> up n+1 and up n <-> down n+1
            let (a, b) = (n, levels + n + 1);
            h[(a, b)] = t;
            h[(b, a)] = t;
            let (a, b) = (levels + n, n + 1);
            h[(a, b)] = t;
            h[(b, a)] = t;
        }
    }
    h
}

/// Diagonal of the parity `P = -sz (-1)^{b'b}` in the basis ordering.
pub fn parity_diagonal(config: &FockConfig) -> Vec<f64> {
    let levels = config.levels();
    (0..config.dim())
        .map(|i| {
            let (n, sign) = if i < levels { (i, 1.0) } else { (i - levels, -1.0) };
            if n % 2 == 0 {
                sign
            } else {
                -sign
            }
        })
        .collect()
}

pub fn parity_matrix(config: &FockConfig) -> DMatrix<f64> {
    DMatrix::from_diagonal(&nalgebra::DVector::from_vec(parity_diagonal(config)))
}

pub fn parity_expectation(state: &StateVector) -> f64 {
    parity_diagonal(&state.config)
        .iter()
        .zip(state.as_slice())
        .map(|(p, c)| p * c * c)
        .sum()
}

/// `ln n!`, exact summation for small `n` and the Stirling series beyond.
pub(crate) fn ln_factorial(n: usize) -> f64 {
    if n < 32 {
        return (2..=n).map(|k| (k as f64).ln()).sum();
    }
    let x = n as f64;
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let series = inv
        * (1.0 / 12.0
            - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 * (1.0 / 1680.0))));
    x * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI * x).ln() + series
}

/// Coefficients `c_n = exp(-x^2/2) x^n / sqrt(n!)` of the coherent state `|x>`.
///
/// For large displacements the recurrence is anchored at the peak `n ~ x^2`
/// instead of `n = 0`, where `exp(-x^2/2)` would underflow.
pub fn coherent_state(x: f64, config: &FockConfig) -> Result<Vec<f64>> {
    let levels = config.levels();
    let mut c = vec![0.0; levels];
    let x2 = x * x;
    if x2 <= DIRECT_COHERENT_LIMIT {
        c[0] = (-0.5 * x2).exp();
        for n in 1..levels {
            c[n] = c[n - 1] * x / (n as f64).sqrt();
        }
    } else {
        let peak = (x2.floor() as usize).min(config.n_max);
        let ln_peak = -0.5 * x2 + peak as f64 * x.abs().ln() - 0.5 * ln_factorial(peak);
        let sign = if x < 0.0 && peak % 2 == 1 { -1.0 } else { 1.0 };
        c[peak] = sign * ln_peak.exp();
        for n in peak + 1..levels {
            c[n] = c[n - 1] * x / (n as f64).sqrt();
        }
        for n in (0..peak).rev() {
            c[n] = c[n + 1] * ((n + 1) as f64).sqrt() / x;
        }
    }
    let tail = 1.0 - dot(&c, &c);
    if tail > MAX_TAIL_MASS || !tail.is_finite() {
        return Err(Error::Truncation { x, n_max: config.n_max, tail });
    }
    Ok(c)
}

/// Even and odd cat combinations `[|x> +- |-x>] / sqrt(2 +- 2 exp(-2x^2))`.
fn cat_states(x: f64, config: &FockConfig) -> Result<(Vec<f64>, Vec<f64>)> {
    let levels = config.levels();
    let mut even = vec![0.0; levels];
    let mut odd = vec![0.0; levels];
    if x.abs() < SMALL_X {
        even[0] = 1.0;
        if levels > 1 {
            odd[1] = if x < 0.0 { -1.0 } else { 1.0 };
        }
        return Ok((even, odd));
    }
    let c = coherent_state(x, config)?;
    let e = (-2.0 * x * x).exp();
    let norm_even = (2.0 + 2.0 * e).sqrt();
    let norm_odd = (-2.0 * (-2.0 * x * x).exp_m1()).sqrt();
    for (n, cn) in c.iter().enumerate() {
        // <n|-x> = (-1)^n <n|x>, so the combinations keep only one parity of n.
        if n % 2 == 0 {
            even[n] = 2.0 * cn / norm_even;
        } else {
            odd[n] = 2.0 * cn / norm_odd;
        }
    }
    Ok((even, odd))
}

pub fn trial_state(spec: &TrialSpec, config: &FockConfig) -> Result<StateVector> {
    let levels = config.levels();
    let s = 1.0 / (1.0 + spec.y * spec.y).sqrt();
    let mut coeffs = vec![0.0; config.dim()];
    let (down, up) = coeffs.split_at_mut(levels);
    match spec.kind {
        TrialKind::NonSym => {
            let c = coherent_state(spec.x, config)?;
            for n in 0..levels {
                down[n] = s * c[n];
                up[n] = s * spec.y * c[n];
            }
        }
        TrialKind::PosParity | TrialKind::NegParity => {
            let (even, odd) = cat_states(spec.x, config)?;
            let (lower, upper) = if spec.kind == TrialKind::PosParity {
                (&even, &odd)
            } else {
                (&odd, &even)
            };
            for n in 0..levels {
                down[n] = s * lower[n];
                up[n] = s * spec.y * upper[n];
            }
        }
    }
    let mut state = StateVector { config: *config, coeffs };
    state.normalize();
    Ok(state)
}

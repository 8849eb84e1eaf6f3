//! Energy estimates from connected moments.
//!
//! * CMX models `E(t)` as a sum of exponentials; with `m = 2k + 1` moments
//!   `E0 = I_1 - X T^{-1} X^T`, `X = (I_2..I_(k+1))`, `T_ij = I_(i+j+1)`.
//! * CSM works with the inverse function `t(E)`. The short-time series
//!   `E(t) - I_1 = sum_j (-t)^j I_(j+1) / j!` is reverted to
//!   `t = sum_k b_k (E - I_1)^k` and
//!   `E0 = I_1 + (m - 2) t^(m-2)(I_1) / t^(m-1)(I_1)`, where `t^(k)` is the
//!   k-th derivative, i.e. `k! b_k`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::moments::ConnectedMoments;

/// Largest accepted condition estimate of the CMX moment matrix.
pub const MAX_CMX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    Variational,
    Cmx,
    Csm,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Variational => "var",
            Method::Cmx => "cmx",
            Method::Csm => "csm",
        }
    }

    /// Whether the method has an estimator with `order` moments.
    pub fn supports_order(self, order: usize) -> bool {
        match self {
            Method::Variational => order == 1,
            Method::Cmx => order % 2 == 1,
            Method::Csm => order != 2 && order >= 1,
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "var" | "variational" => Ok(Method::Variational),
            "cmx" => Ok(Method::Cmx),
            "csm" => Ok(Method::Csm),
            other => Err(Error::InvalidParams(format!("unknown method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyEstimate {
    pub value: f64,
    pub method: Method,
    /// Number of connected moments used.
    pub order: usize,
    /// CMX: condition estimate of `T_k`. CSM: `|b_(m-1)|`. Otherwise 1.
    pub condition: f64,
    /// The trial state was detected as an eigenstate and `I_1` returned.
    pub eigenstate: bool,
}

impl EnergyEstimate {
    fn first_moment(moments: &ConnectedMoments, method: Method, order: usize, eigenstate: bool) -> Self {
        Self { value: moments.energy(), method, order, condition: 1.0, eigenstate }
    }
}

/// Coefficients `a_1..a_K` of a formal power series without constant term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesCoeffs(Vec<f64>);

impl SeriesCoeffs {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Self(coeffs)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// One-based: `get(1) = a_1`.
    pub fn get(&self, k: usize) -> f64 {
        self.0[k - 1]
    }

    /// `self(inner(E))` truncated after `E^order`.
    pub fn compose(&self, inner: &SeriesCoeffs, order: usize) -> SeriesCoeffs {
        let inner = dense_poly(&inner.0, order);
        let mut power = vec![0.0; order + 1];
        power[0] = 1.0;
        let mut out = vec![0.0; order + 1];
        for &a in self.0.iter().take(order) {
            power = mul_trunc(&power, &inner, order);
            out.iter_mut().zip(&power).for_each(|(o, p)| *o += a * p);
        }
        SeriesCoeffs(out[1..].to_vec())
    }
}

// Index = power; entry 0 is the (zero) constant term.
fn dense_poly(coeffs: &[f64], order: usize) -> Vec<f64> {
    let mut p = vec![0.0; order + 1];
    for (k, c) in coeffs.iter().take(order).enumerate() {
        p[k + 1] = *c;
    }
    p
}

fn mul_trunc(p: &[f64], q: &[f64], order: usize) -> Vec<f64> {
    let mut out = vec![0.0; order + 1];
    for (i, pi) in p.iter().enumerate().filter(|(_, v)| **v != 0.0) {
        for (j, qj) in q.iter().enumerate().take(order + 1 - i) {
            out[i + j] += pi * qj;
        }
    }
    out
}

/// Reverts `E = sum a_m t^m` into `t = sum b_k E^k` up to `E^order`.
///
/// The coefficients follow from requiring the coefficient of `E^n` in
/// `a(b(E))` to vanish for `n >= 2`, which is linear in `b_n`.
pub fn series_revert(a: &SeriesCoeffs, order: usize) -> Result<SeriesCoeffs> {
    if order == 0 || order > a.len() {
        return Err(Error::InvalidOrder { order, reason: "reversion order must be in 1..=len(a)" });
    }
    let a1 = a.get(1);
    let scale = a.0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if a1 == 0.0 || a1.abs() < 1e-14 * scale {
        return Err(Error::ZeroLinearTerm { a1 });
    }
    let mut b = vec![0.0; order + 1];
    b[1] = 1.0 / a1;
    for n in 2..=order {
        // coefficient of E^n from a_2 b^2 + ... + a_n b^n with b_n still zero
        let mut power = b.clone();
        let mut acc = 0.0;
        for j in 2..=n {
            power = mul_trunc(&power, &b, n);
            acc += a.get(j) * power[n];
        }
        b[n] = -acc / a1;
    }
    Ok(SeriesCoeffs(b[1..].to_vec()))
}

fn check_available(moments: &ConnectedMoments, order: usize) -> Result<()> {
    if order > moments.order() {
        return Err(Error::InvalidOrder { order, reason: "more moments requested than available" });
    }
    Ok(())
}

pub fn cmx_estimate(moments: &ConnectedMoments, order: usize) -> Result<EnergyEstimate> {
    if order == 0 || order % 2 == 0 {
        return Err(Error::InvalidOrder { order, reason: "CMX needs an odd number of moments" });
    }
    check_available(moments, order)?;
    if order == 1 {
        return Ok(EnergyEstimate::first_moment(moments, Method::Cmx, 1, false));
    }
    if moments.is_eigenstate() {
        return Ok(EnergyEstimate::first_moment(moments, Method::Cmx, order, true));
    }
    let k = (order - 1) / 2;
    let t = DMatrix::from_fn(k, k, |i, j| moments.get(i + j + 3));
    let x = nalgebra::DVector::from_fn(k, |i, _| moments.get(i + 2));
    let sv = t.clone().singular_values();
    let condition = sv.max() / sv.min();
    if !condition.is_finite() || condition > MAX_CMX_CONDITION {
        return Err(Error::SingularMomentMatrix { condition });
    }
    let z = t
        .lu()
        .solve(&x)
        .ok_or(Error::SingularMomentMatrix { condition: f64::INFINITY })?;
    Ok(EnergyEstimate {
        value: moments.energy() - x.dot(&z),
        method: Method::Cmx,
        order,
        condition,
        eigenstate: false,
    })
}

pub fn csm_estimate(moments: &ConnectedMoments, order: usize) -> Result<EnergyEstimate> {
    if order == 0 || order == 2 {
        return Err(Error::InvalidOrder { order, reason: "CSM needs m = 1 or m >= 3 moments" });
    }
    check_available(moments, order)?;
    if order == 1 {
        return Ok(EnergyEstimate::first_moment(moments, Method::Csm, 1, false));
    }
    if moments.is_eigenstate() {
        return Ok(EnergyEstimate::first_moment(moments, Method::Csm, order, true));
    }
    let mut factorial = 1.0;
    let forward: Vec<f64> = (1..order)
        .map(|j| {
            factorial *= j as f64;
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            sign * moments.get(j + 1) / factorial
        })
        .collect();
    let b = match series_revert(&SeriesCoeffs(forward), order - 1) {
        Ok(b) => b,
        Err(Error::ZeroLinearTerm { .. }) => {
            return Ok(EnergyEstimate::first_moment(moments, Method::Csm, order, true));
        }
        Err(e) => return Err(e),
    };
    // (m-2) * [(m-2)! b_(m-2)] / [(m-1)! b_(m-1)]
    let denominator = b.get(order - 1);
    let correction = (order - 2) as f64 * b.get(order - 2) / ((order - 1) as f64 * denominator);
    let scale = moments.energy().abs().max(1.0);
    if denominator == 0.0 || !correction.is_finite() || correction.abs() > 1e12 * scale {
        return Err(Error::VanishingDenominator { denominator });
    }
    Ok(EnergyEstimate {
        value: moments.energy() + correction,
        method: Method::Csm,
        order,
        condition: denominator.abs(),
        eigenstate: false,
    })
}

/// Dispatches on `method`; `Variational` only accepts `order == 1`.
pub fn estimate(moments: &ConnectedMoments, method: Method, order: usize) -> Result<EnergyEstimate> {
    match method {
        Method::Variational if order == 1 => {
            Ok(EnergyEstimate::first_moment(moments, Method::Variational, 1, false))
        }
        Method::Variational => {
            Err(Error::InvalidOrder { order, reason: "the variational estimate uses one moment" })
        }
        Method::Cmx => cmx_estimate(moments, order),
        Method::Csm => csm_estimate(moments, order),
    }
}

/// Truncated short-time series `E(t) = sum_{m<M} (-t)^m I_(m+1) / m!`.
pub fn e_of_t(moments: &ConnectedMoments, t: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 0.0;
    for (m, i) in moments.as_slice().iter().enumerate() {
        if m > 0 {
            term *= -t / m as f64;
        }
        sum += term * i;
    }
    sum
}

//! Stationary points of the order-`m` energy surface `E(x, y)` and the
//! physical branch across a coupling grid.
//!
//! Derivatives are central differences: the gradient with one Richardson
//! refinement, the Hessian from a 3x3 stencil. Stationary points are found by
//! damped Newton iteration on the gradient from a grid of starts and classified
//! by the signs of the Hessian eigenvalues. Only minima are ever selected.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{sector_levels, Parity};
use crate::extrapolation::{estimate, EnergyEstimate, Method};
use crate::fock::{RabiParams, TrialKind, TrialSpec};
use crate::moments::{analytic_moments_12, trial_moments, MAX_ORDER};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HessianClass {
    Minimum,
    Maximum,
    Saddle,
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchBox {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl SearchBox {
    /// `x in [0, 2g/w + 1]`, `y in [-1.5, 0.5]`.
    pub fn default_for(params: &RabiParams) -> Result<Self> {
        params.validate()?;
        if params.omega <= 0.0 {
            return Err(Error::InvalidParams("optimization needs omega > 0".into()));
        }
        Ok(Self { x_min: 0.0, x_max: params.asymptotic_x() + 1.0, y_min: -1.5, y_max: 0.5 })
    }

    /// `n x n` starts on the closed box.
    pub fn grid(&self, n: usize) -> Vec<[f64; 2]> {
        let lin = |lo: f64, hi: f64, i: usize| {
            if n == 1 {
                0.5 * (lo + hi)
            } else {
                lo + (hi - lo) * i as f64 / (n - 1) as f64
            }
        };
        (0..n)
            .flat_map(|i| (0..n).map(move |j| [lin(self.x_min, self.x_max, i), lin(self.y_min, self.y_max, j)]))
            .collect()
    }

    /// The box grown by half its width on every side; Newton iterates may not leave it.
    fn contains_loosely(&self, z: [f64; 2]) -> bool {
        let wx = 0.5 * (self.x_max - self.x_min);
        let wy = 0.5 * (self.y_max - self.y_min);
        z[0] >= self.x_min - wx && z[0] <= self.x_max + wx && z[1] >= self.y_min - wy && z[1] <= self.y_max + wy
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizeConfig {
    /// Starts per axis of the coarse grid.
    pub grid: usize,
    /// Starts per axis when the coarse grid yields no candidate.
    pub refine_grid: usize,
    pub dedup_tol: f64,
    /// Acceptance: `|grad E| <= grad_rel_tol * max(1, |E|)`.
    pub grad_rel_tol: f64,
    /// Relative step of the gradient differences.
    pub gradient_step: f64,
    /// Relative step of the Hessian stencil.
    pub hessian_step: f64,
    /// Hessian eigenvalues below `degenerate_tol * max(1, |E|)` count as zero.
    pub degenerate_tol: f64,
    pub max_newton_iter: usize,
    pub max_descent_iter: usize,
    pub capture_min: f64,
    pub capture_factor: f64,
    pub min_dg: f64,
    /// Collect the non-physical minima into blind-arm traces.
    pub blind_arms: bool,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        Self {
            grid: 12,
            refine_grid: 24,
            dedup_tol: 1e-6,
            grad_rel_tol: 1e-8,
            gradient_step: 1e-5,
            hessian_step: 1e-4,
            degenerate_tol: 1e-6,
            max_newton_iter: 60,
            max_descent_iter: 2000,
            capture_min: 0.25,
            capture_factor: 3.0,
            min_dg: 1e-4,
            blind_arms: false,
        }
    }
}

/// The surface `E(x, y)` for one trial family, method and order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Objective {
    pub params: RabiParams,
    pub kind: TrialKind,
    pub method: Method,
    pub order: usize,
}

impl Objective {
    pub fn new(params: RabiParams, kind: TrialKind, method: Method, order: usize) -> Result<Self> {
        params.validate()?;
        if order > MAX_ORDER || !method.supports_order(order) {
            return Err(Error::InvalidOrder { order, reason: "unsupported order for this method" });
        }
        Ok(Self { params, kind, method, order })
    }

    pub fn variational(params: RabiParams, kind: TrialKind) -> Self {
        Self { params, kind, method: Method::Variational, order: 1 }
    }

    fn spec(&self, x: f64, y: f64) -> TrialSpec {
        let x = if self.kind.is_symmetrized() { x.abs() } else { x };
        TrialSpec::new(self.kind, x, y)
    }

    pub fn evaluate(&self, x: f64, y: f64) -> Result<EnergyEstimate> {
        let spec = self.spec(x, y);
        if self.order == 1 {
            let moments = trial_moments(&self.params, &spec, 2)?;
            return Ok(EnergyEstimate {
                value: moments.energy(),
                method: self.method,
                order: 1,
                condition: 1.0,
                eigenstate: moments.is_eigenstate(),
            });
        }
        let moments = trial_moments(&self.params, &spec, self.order)?;
        estimate(&moments, self.method, self.order)
    }

    /// `E(x, y)`, NaN where the estimate is undefined.
    pub fn value(&self, x: f64, y: f64) -> f64 {
        if !x.is_finite() || !y.is_finite() {
            return f64::NAN;
        }
        if self.order == 1 {
            return analytic_moments_12(&self.params, &self.spec(x, y)).0;
        }
        self.evaluate(x, y).map(|e| e.value).unwrap_or(f64::NAN)
    }

    pub fn gradient(&self, z: [f64; 2], rel_step: f64) -> [f64; 2] {
        let mut grad = [0.0; 2];
        for (i, gi) in grad.iter_mut().enumerate() {
            let h = rel_step * z[i].abs().max(1.0);
            let diff = |h: f64| {
                let mut p = z;
                let mut m = z;
                p[i] += h;
                m[i] -= h;
                (self.value(p[0], p[1]) - self.value(m[0], m[1])) / (2.0 * h)
            };
            *gi = (4.0 * diff(0.5 * h) - diff(h)) / 3.0;
        }
        grad
    }

    pub fn hessian(&self, z: [f64; 2], center: f64, rel_step: f64) -> [[f64; 2]; 2] {
        let hx = rel_step * z[0].abs().max(1.0);
        let hy = rel_step * z[1].abs().max(1.0);
        let f = |dx: f64, dy: f64| self.value(z[0] + dx, z[1] + dy);
        let fxx = (f(hx, 0.0) - 2.0 * center + f(-hx, 0.0)) / (hx * hx);
        let fyy = (f(0.0, hy) - 2.0 * center + f(0.0, -hy)) / (hy * hy);
        let fxy = (f(hx, hy) - f(hx, -hy) - f(-hx, hy) + f(-hx, -hy)) / (4.0 * hx * hy);
        [[fxx, fxy], [fxy, fyy]]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationaryPoint {
    pub g: f64,
    pub x: f64,
    pub y: f64,
    pub energy: f64,
    pub estimate: EnergyEstimate,
    pub hessian_class: HessianClass,
    pub hessian_eigenvalues: [f64; 2],
    pub grad_norm: f64,
}

impl StationaryPoint {
    pub fn position(&self) -> [f64; 2] {
        [self.x, self.y]
    }

    pub fn distance_to(&self, z: [f64; 2]) -> f64 {
        dist(self.position(), z)
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn norm(v: [f64; 2]) -> f64 {
    v[0].hypot(v[1])
}

fn sym_eigenvalues(h: [[f64; 2]; 2]) -> [f64; 2] {
    let mean = 0.5 * (h[0][0] + h[1][1]);
    let r = (0.5 * (h[0][0] - h[1][1])).hypot(h[0][1]);
    [mean - r, mean + r]
}

fn classify(eig: [f64; 2], energy: f64, cfg: &OptimizeConfig) -> HessianClass {
    let zero = cfg.degenerate_tol * energy.abs().max(1.0);
    if eig[0].abs() <= zero || eig[1].abs() <= zero {
        HessianClass::Degenerate
    } else if eig[0] > 0.0 {
        HessianClass::Minimum
    } else if eig[1] < 0.0 {
        HessianClass::Maximum
    } else {
        HessianClass::Saddle
    }
}

fn grad_tol(energy: f64, cfg: &OptimizeConfig) -> f64 {
    cfg.grad_rel_tol * energy.abs().max(1.0)
}

/// Classifies `z` without moving it.
fn finish(obj: &Objective, cfg: &OptimizeConfig, z: [f64; 2]) -> Option<StationaryPoint> {
    let x = if obj.kind.is_symmetrized() { z[0].abs() } else { z[0] };
    let z = [x, z[1]];
    let est = obj.evaluate(z[0], z[1]).ok()?;
    let center = obj.value(z[0], z[1]);
    let grad = obj.gradient(z, cfg.gradient_step);
    let eig = sym_eigenvalues(obj.hessian(z, center, cfg.hessian_step));
    if !(est.value.is_finite() && norm(grad).is_finite() && eig[0].is_finite() && eig[1].is_finite()) {
        return None;
    }
    Some(StationaryPoint {
        g: obj.params.g,
        x,
        y: z[1],
        energy: est.value,
        estimate: est,
        hessian_class: classify(eig, est.value, cfg),
        hessian_eigenvalues: eig,
        grad_norm: norm(grad),
    })
}

/// Damped Newton iteration on `grad E = 0`.
fn newton(obj: &Objective, cfg: &OptimizeConfig, bounds: &SearchBox, z0: [f64; 2]) -> Option<StationaryPoint> {
    if !bounds.contains_loosely(z0) {
        return None;
    }
    let max_dx = 0.25 * (bounds.x_max - bounds.x_min).max(1.0);
    let max_dy = 0.25 * (bounds.y_max - bounds.y_min);
    let mut z = z0;
    let mut grad = obj.gradient(z, cfg.gradient_step);
    for _ in 0..cfg.max_newton_iter {
        let center = obj.value(z[0], z[1]);
        let gn = norm(grad);
        if !(center.is_finite() && gn.is_finite()) {
            return None;
        }
        if gn <= grad_tol(center, cfg) {
            return finish(obj, cfg, z).filter(|p| p.grad_norm <= grad_tol(p.energy, cfg));
        }
        let h = obj.hessian(z, center, cfg.hessian_step);
        let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
        let mut d = if det.is_finite() && det != 0.0 {
            [
                -(h[1][1] * grad[0] - h[0][1] * grad[1]) / det,
                -(h[0][0] * grad[1] - h[1][0] * grad[0]) / det,
            ]
        } else {
            [-grad[0], -grad[1]]
        };
        if !(d[0].is_finite() && d[1].is_finite()) {
            return None;
        }
        let shrink = (max_dx / d[0].abs()).min(max_dy / d[1].abs()).min(1.0);
        d = [d[0] * shrink, d[1] * shrink];

        let mut t = 1.0;
        let mut moved = false;
        for _ in 0..16 {
            let trial = [z[0] + t * d[0], z[1] + t * d[1]];
            if bounds.contains_loosely(trial) {
                let g_trial = obj.gradient(trial, cfg.gradient_step);
                if norm(g_trial) < gn {
                    z = trial;
                    grad = g_trial;
                    moved = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !moved {
            return None;
        }
    }
    None
}

/// Steepest descent from `z0` polished by Newton: the minimum whose basin
/// holds `z0`.
fn descend(obj: &Objective, cfg: &OptimizeConfig, bounds: &SearchBox, z0: [f64; 2]) -> Option<StationaryPoint> {
    let mut z = z0;
    let mut e = obj.value(z[0], z[1]);
    let mut step = 1e-2;
    for _ in 0..cfg.max_descent_iter {
        let grad = obj.gradient(z, cfg.gradient_step);
        let gn = norm(grad);
        if !(e.is_finite() && gn.is_finite()) {
            return None;
        }
        if gn <= 1e3 * grad_tol(e, cfg) {
            break;
        }
        loop {
            let trial = [z[0] - step * grad[0] / gn, z[1] - step * grad[1] / gn];
            let e_trial = obj.value(trial[0], trial[1]);
            if e_trial < e {
                z = trial;
                e = e_trial;
                step *= 1.5;
                break;
            }
            step *= 0.5;
            if step < 1e-14 {
                return None;
            }
        }
        if !bounds.contains_loosely(z) {
            return None;
        }
    }
    newton(obj, cfg, bounds, z).filter(|p| p.hessian_class == HessianClass::Minimum)
}

/// Two converged points are the same when closer than `tol`, or when their
/// separation is within what the residual gradients allow on the local
/// curvature (flat directions at large `|E|`).
fn same_point(a: &StationaryPoint, b: &StationaryPoint, tol: f64) -> bool {
    let d = a.distance_to(b.position());
    if d <= tol {
        return true;
    }
    let curvature = [a.hessian_eigenvalues, b.hessian_eigenvalues]
        .iter()
        .flat_map(|e| e.iter().map(|v| v.abs()))
        .fold(f64::INFINITY, f64::min);
    a.hessian_class == b.hessian_class
        && d <= MAX_NOISE_MERGE
        && curvature > 0.0
        && d <= 2.0 * (a.grad_norm + b.grad_norm) / curvature
}

const MAX_NOISE_MERGE: f64 = 1e-4;

fn dedup(mut points: Vec<StationaryPoint>, tol: f64) -> Vec<StationaryPoint> {
    points.sort_by(|a, b| a.grad_norm.total_cmp(&b.grad_norm));
    let mut kept: Vec<StationaryPoint> = Vec::new();
    for p in points {
        if kept.iter().all(|q| !same_point(q, &p, tol)) {
            kept.push(p);
        }
    }
    kept.sort_by(|a, b| a.energy.total_cmp(&b.energy).then(a.x.total_cmp(&b.x)));
    kept
}

fn search(
    obj: &Objective,
    cfg: &OptimizeConfig,
    bounds: &SearchBox,
    n: usize,
    extra: &[[f64; 2]],
) -> Vec<StationaryPoint> {
    let mut starts = bounds.grid(n);
    starts.extend_from_slice(extra);
    let found: Vec<StationaryPoint> = starts.par_iter().filter_map(|&z| newton(obj, cfg, bounds, z)).collect();
    dedup(found, cfg.dedup_tol)
}

/// All distinct stationary points reached from the coarse grid of starts,
/// sorted by energy. An empty list is a legal result.
pub fn stationary_points(
    params: &RabiParams,
    kind: TrialKind,
    method: Method,
    order: usize,
    search_box: &SearchBox,
    cfg: &OptimizeConfig,
) -> Result<Vec<StationaryPoint>> {
    let obj = Objective::new(*params, kind, method, order)?;
    Ok(search(&obj, cfg, search_box, cfg.grid, &[]))
}

fn minima(points: &[StationaryPoint]) -> Vec<&StationaryPoint> {
    points.iter().filter(|p| p.hessian_class == HessianClass::Minimum).collect()
}

/// The decoupled point `x = 0`: `H` is diagonal and the lowest level of the
/// trial family's sector is reached at `y = 0`.
fn decoupled_point(obj: &Objective, cfg: &OptimizeConfig) -> Result<StationaryPoint> {
    let p = obj.params;
    if obj.kind == TrialKind::NegParity && p.omega > p.omega0 {
        return Err(Error::NoPhysicalSolution(
            "at g = 0 the lowest negative-parity level |up, 0> is outside the trial family".into(),
        ));
    }
    // without a gap every y is an eigenstate; y = -1 joins the g > 0 branch
    let y = if obj.kind == TrialKind::NonSym && p.omega0 == 0.0 { -1.0 } else { 0.0 };
    let mut point = finish(obj, cfg, [0.0, y])
        .ok_or_else(|| Error::NoPhysicalSolution("decoupled point not evaluable".into()))?;
    let sector = if obj.kind == TrialKind::NegParity { Parity::Negative } else { Parity::Positive };
    point.energy = sector_levels(&p, sector, 1, 1)[0];
    point.estimate.value = point.energy;
    point.estimate.eigenstate = true;
    Ok(point)
}

/// Global minimum of `I_1` over the default box from a multi-start local search.
pub fn variational_optimum(params: &RabiParams, kind: TrialKind, cfg: &OptimizeConfig) -> Result<StationaryPoint> {
    let bounds = SearchBox::default_for(params)?;
    let obj = Objective::variational(*params, kind);
    if params.g == 0.0 {
        return decoupled_point(&obj, cfg);
    }
    for n in [cfg.grid, cfg.refine_grid] {
        let points = search(&obj, cfg, &bounds, n, &[]);
        if let Some(best) = minima(&points).into_iter().min_by(|a, b| a.energy.total_cmp(&b.energy)) {
            return Ok(*best);
        }
    }
    Err(Error::NoMinimumFound)
}

/// The minimum nearest to `anchor`; near-ties go to the energy closest to `reference`.
fn select_nearest(
    candidates: &[&StationaryPoint],
    anchor: [f64; 2],
    reference: f64,
    tie: f64,
) -> Option<StationaryPoint> {
    let best = candidates.iter().map(|p| p.distance_to(anchor)).min_by(f64::total_cmp)?;
    candidates
        .iter()
        .filter(|p| p.distance_to(anchor) <= best + tie)
        .min_by(|a, b| (a.energy - reference).abs().total_cmp(&(b.energy - reference).abs()))
        .map(|p| **p)
}

fn relabel(mut point: StationaryPoint, method: Method, order: usize) -> StationaryPoint {
    point.estimate.method = method;
    point.estimate.order = order;
    point
}

/// Physical solution at a single coupling: the minimum whose basin holds the
/// variational optimum, else the minimum nearest to it. `NegParity` gives the
/// first excited level.
pub fn estimate_energy(
    params: &RabiParams,
    kind: TrialKind,
    method: Method,
    order: usize,
    cfg: &OptimizeConfig,
) -> Result<(EnergyEstimate, StationaryPoint)> {
    let obj = Objective::new(*params, kind, method, order)?;
    let var = variational_optimum(params, kind, cfg).map_err(|e| match e {
        Error::NoMinimumFound => Error::NoPhysicalSolution("no variational minimum".into()),
        other => other,
    })?;
    let point = physical_at(&obj, cfg, &var)?;
    Ok((point.estimate, point))
}

fn physical_at(obj: &Objective, cfg: &OptimizeConfig, var: &StationaryPoint) -> Result<StationaryPoint> {
    if obj.order == 1 || var.estimate.eigenstate {
        return Ok(relabel(*var, obj.method, obj.order));
    }
    let bounds = SearchBox::default_for(&obj.params)?;
    if let Some(p) = descend(obj, cfg, &bounds, var.position()) {
        return Ok(p);
    }
    for n in [cfg.grid, cfg.refine_grid] {
        let points = search(obj, cfg, &bounds, n, &[var.position()]);
        if let Some(p) = select_nearest(&minima(&points), var.position(), var.energy, cfg.dedup_tol) {
            return Ok(p);
        }
    }
    Err(Error::NoPhysicalSolution(format!("no minimum of the order-{} surface at g = {}", obj.order, obj.params.g)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BranchLabel {
    Physical,
    BlindArm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchTrace {
    pub g_grid: Vec<f64>,
    /// Aligned with `g_grid`; `None` where no physical point was found.
    pub points: Vec<Option<StationaryPoint>>,
    pub label: BranchLabel,
    /// The variational trace the physical branch was seeded from.
    pub parent: Option<Box<BranchTrace>>,
}

impl BranchTrace {
    pub fn found(&self) -> impl Iterator<Item = &StationaryPoint> {
        self.points.iter().flatten()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchOutcome {
    pub physical: BranchTrace,
    /// Intervals `(g_lo, g_hi)` the branch could not be followed across.
    pub gaps: Vec<(f64, f64)>,
    pub blind_arms: Vec<BranchTrace>,
}

impl BranchOutcome {
    pub fn require_continuous(&self) -> Result<&BranchTrace> {
        match self.gaps.first() {
            Some(&(g_lo, g_hi)) => Err(Error::BranchGap { g_lo, g_hi }),
            None => Ok(&self.physical),
        }
    }
}

struct Accepted {
    point: StationaryPoint,
    var: StationaryPoint,
}

struct Follower<'a> {
    base: RabiParams,
    kind: TrialKind,
    method: Method,
    order: usize,
    cfg: &'a OptimizeConfig,
}

impl Follower<'_> {
    fn objective(&self, g: f64) -> Objective {
        Objective { params: self.base.with_g(g), kind: self.kind, method: self.method, order: self.order }
    }

    /// Tries to continue `history` to `g`.
    fn step(&self, history: &[Accepted], g: f64, var: &StationaryPoint) -> Option<StationaryPoint> {
        if var.estimate.eigenstate {
            return Some(relabel(*var, self.method, self.order));
        }
        let last = history.last()?;
        let predicted = match history {
            [.., a, b] if b.point.g > a.point.g => {
                let s = (g - b.point.g) / (b.point.g - a.point.g);
                [b.point.x + s * (b.point.x - a.point.x), b.point.y + s * (b.point.y - a.point.y)]
            }
            _ => [var.x + last.point.x - last.var.x, var.y + last.point.y - last.var.y],
        };
        let radius = self.cfg.capture_min.max(self.cfg.capture_factor * dist(predicted, last.point.position()));
        if var.distance_to(last.var.position()) > radius {
            // the variational curve itself jumps; the branch cannot stay adjacent to it
            return None;
        }
        let obj = self.objective(g);
        let bounds = SearchBox::default_for(&obj.params).ok()?;
        if let Some(p) = descend(&obj, self.cfg, &bounds, predicted) {
            if p.distance_to(predicted) <= radius {
                return Some(p);
            }
        }
        for n in [self.cfg.grid, self.cfg.refine_grid] {
            let points = search(&obj, self.cfg, &bounds, n, &[predicted]);
            let mut inside = minima(&points);
            inside.retain(|p| p.distance_to(predicted) <= radius);
            if let Some(p) = select_nearest(&inside, var.position(), var.energy, self.cfg.dedup_tol) {
                return Some(p);
            }
        }
        None
    }
}

/// Follows the physical branch over an ascending `g_grid`, seeded at the
/// first point as in [`estimate_energy`]. Each step descends from the linear
/// prediction and must land within the capture radius of it; otherwise the
/// minimum nearest to the variational optimum inside that radius is taken.
/// Failed steps are bisected down to `min_dg`; below that a gap is recorded
/// and the branch is restarted from the variational optimum.
pub fn continue_branch(
    params_base: &RabiParams,
    kind: TrialKind,
    method: Method,
    order: usize,
    g_grid: &[f64],
    cfg: &OptimizeConfig,
) -> Result<BranchOutcome> {
    Objective::new(*params_base, kind, method, order)?;
    SearchBox::default_for(params_base)?;
    if g_grid.is_empty() || g_grid.iter().any(|g| !g.is_finite() || *g < 0.0) {
        return Err(Error::InvalidParams("g grid must be non-empty, finite and non-negative".into()));
    }
    if g_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParams("g grid must be strictly ascending".into()));
    }

    let var_points: Vec<Option<StationaryPoint>> = g_grid
        .par_iter()
        .map(|&g| variational_optimum(&params_base.with_g(g), kind, cfg).ok())
        .collect();
    let var_trace = BranchTrace {
        g_grid: g_grid.to_vec(),
        points: var_points.clone(),
        label: BranchLabel::Physical,
        parent: None,
    };

    let follower = Follower { base: *params_base, kind, method, order, cfg };
    let mut history: Vec<Accepted> = Vec::new();
    let mut points: Vec<Option<StationaryPoint>> = Vec::with_capacity(g_grid.len());
    let mut gaps = Vec::new();

    for (i, &g) in g_grid.iter().enumerate() {
        let Some(var) = var_points[i] else {
            points.push(None);
            history.clear();
            continue;
        };
        let mut reached = history.is_empty();
        if let Some(start) = history.last().map(|a| a.point.g) {
            let mut g_cur = start;
            let mut dg = g - g_cur;
            while g_cur < g {
                let g_try = if g_cur + dg >= g { g } else { g_cur + dg };
                let var_try = if g_try == g {
                    Some(var)
                } else {
                    variational_optimum(&params_base.with_g(g_try), kind, cfg).ok()
                };
                let next = var_try.and_then(|v| follower.step(&history, g_try, &v).map(|p| (p, v)));
                match next {
                    Some((point, v)) => {
                        history.push(Accepted { point, var: v });
                        g_cur = g_try;
                        dg = (2.0 * dg).min(g - g_cur);
                    }
                    None => {
                        dg *= 0.5;
                        if dg < cfg.min_dg {
                            gaps.push((g_cur, g));
                            history.clear();
                            break;
                        }
                    }
                }
            }
            reached = g_cur >= g && !history.is_empty();
            if !reached {
                history.clear();
            }
        }
        if reached && !history.is_empty() {
            points.push(Some(history.last().unwrap().point));
            continue;
        }
        match physical_at(&follower.objective(g), cfg, &var) {
            Ok(point) => {
                history.push(Accepted { point, var });
                points.push(Some(point));
            }
            Err(_) => points.push(None),
        }
    }

    let physical = BranchTrace {
        g_grid: g_grid.to_vec(),
        points,
        label: BranchLabel::Physical,
        parent: Some(Box::new(var_trace)),
    };
    let blind_arms = if cfg.blind_arms && order > 1 {
        blind_arms(&follower, &physical)
    } else {
        Vec::new()
    };
    Ok(BranchOutcome { physical, gaps, blind_arms })
}

/// Minima other than the physical point, chained across the grid by nearest
/// neighbour within the capture radius.
fn blind_arms(follower: &Follower, physical: &BranchTrace) -> Vec<BranchTrace> {
    let cfg = follower.cfg;
    let per_g: Vec<Vec<StationaryPoint>> = physical
        .g_grid
        .par_iter()
        .zip(&physical.points)
        .map(|(&g, phys)| {
            let obj = follower.objective(g);
            let Ok(bounds) = SearchBox::default_for(&obj.params) else {
                return Vec::new();
            };
            search(&obj, cfg, &bounds, cfg.grid, &[])
                .into_iter()
                .filter(|p| p.hessian_class == HessianClass::Minimum)
                .filter(|p| phys.map_or(true, |q| p.distance_to(q.position()) > 1e3 * cfg.dedup_tol))
                .collect()
        })
        .collect();

    let mut arms: Vec<(BranchTrace, usize)> = Vec::new();
    for (i, leftovers) in per_g.into_iter().enumerate() {
        let mut open: Vec<usize> = arms.iter().enumerate().filter(|(_, (_, last))| *last + 1 == i).map(|(k, _)| k).collect();
        for p in leftovers {
            let reach = |arm: &BranchTrace| {
                let pts: Vec<&StationaryPoint> = arm.found().collect();
                let last = pts[pts.len() - 1];
                let step = if pts.len() >= 2 { pts[pts.len() - 2].distance_to(last.position()) } else { 0.0 };
                let radius = cfg.capture_min.max(cfg.capture_factor * step);
                let d = p.distance_to(last.position());
                (d <= radius).then_some(d)
            };
            let best = open
                .iter()
                .enumerate()
                .filter_map(|(slot, &k)| reach(&arms[k].0).map(|d| (slot, k, d)))
                .min_by(|a, b| a.2.total_cmp(&b.2));
            match best {
                Some((slot, k, _)) => {
                    open.remove(slot);
                    arms[k].0.g_grid.push(p.g);
                    arms[k].0.points.push(Some(p));
                    arms[k].1 = i;
                }
                None => arms.push((
                    BranchTrace { g_grid: vec![p.g], points: vec![Some(p)], label: BranchLabel::BlindArm, parent: None },
                    i,
                )),
            }
        }
    }
    arms.into_iter().map(|(arm, _)| arm).collect()
}

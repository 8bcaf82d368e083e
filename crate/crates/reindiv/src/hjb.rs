//! Upwind finite-difference discretization and Howard policy iteration for
//! the dividend/reinsurance variational inequality on the transformed domain.
//!
//! The half-line is mapped to `[0, 1)` by `y = x / (x + 1)`, `ψ(y) = V(x)`.
//! On a uniform `y`-grid the problem becomes the complementarity system
//!
//! ```text
//! max{ G_j(ψ, u*), 1 - Dψ_j / Dx_j } = 0,   ψ_0 = 0,
//! ```
//!
//! where `G` is the discrete Hamiltonian (forward difference in the drift,
//! linear interpolation at the post-claim state) and the obstacle row is the
//! backward divided difference of `ψ` over the exact `x`-increment, the
//! first-order form of `1 - (1-y)^2 ψ'(y)`. Policy iteration alternates
//! damped Gauss-Seidel evaluation of the fixed-policy linear system with a
//! per-node argmax over the retention grid plus the pay-dividend action.

use crate::model::ModelParams;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HjbError {
    #[error("transformed coordinate y = {0} must lie in [0, 1)")]
    InvalidY(f64),
    #[error("grid must have at least 3 nodes, got {0}")]
    GridTooSmall(usize),
    #[error("control grid must have at least 1 point")]
    EmptyControlGrid,
    #[error("assumption A2 fails: r = {r} <= 2(1+k1)beta/zeta0 = {threshold}")]
    AssumptionViolated { r: f64, threshold: f64 },
    #[error("evaluation matrix not monotone at node {node}: {detail}")]
    NonMonotoneScheme { node: usize, detail: String },
}

/// `y = x / (x + 1)`; maps `[0, ∞)` into `[0, 1)`.
pub fn transform(x: f64) -> f64 {
    debug_assert!(x >= 0.0);
    x / (x + 1.0)
}

/// `x = y / (1 - y)`; rejects `y` outside `[0, 1)`.
pub fn inverse_transform(y: f64) -> Result<f64, HjbError> {
    if !(0.0..1.0).contains(&y) {
        return Err(HjbError::InvalidY(y));
    }
    Ok(y / (1.0 - y))
}

/// Which jump-target formula the scheme uses for the post-claim state.
///
/// `Derived` maps the claim through the original coordinates,
/// `X' = X (1 - c)`, `y' = X'/(X'+1) = y(1-c)/(1-cy)`, consistent with the
/// multiplicative jump of the reserve equation (`y = 0` is a fixed point).
/// `Printed` is the alternative algebraic form
/// `y' = (y(1-c) - c) / (cy + 1 - c)`, which jumps below zero even from
/// `y = 0`; it is kept selectable for comparison only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum JumpFormula {
    #[default]
    Derived,
    Printed,
}

/// Post-claim transformed coordinate for a claim of size `claim` at
/// retention `u`. A return value `<= 0` signals ruin (the reserve is wiped
/// out; only the sign is meaningful).
pub fn jump_destination(
    y: f64,
    u: f64,
    claim: f64,
    params: &ModelParams,
    formula: JumpFormula,
) -> f64 {
    let c = params.jump_fraction(u, claim);
    match formula {
        JumpFormula::Derived => {
            let x = y / (1.0 - y);
            let x_post = x * (1.0 - c);
            if x_post > 0.0 {
                x_post / (x_post + 1.0)
            } else {
                x_post
            }
        }
        JumpFormula::Printed => (y * (1.0 - c) - c) / (c * y + 1.0 - c),
    }
}

/// Uniform grid on `[0, 1 - h]` with `y_j = j h`, `h = 1/n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    n: usize,
    h: f64,
}

impl Grid {
    pub fn new(n: usize) -> Result<Self, HjbError> {
        if n < 3 {
            return Err(HjbError::GridTooSmall(n));
        }
        Ok(Self { n, h: 1.0 / n as f64 })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn y(&self, j: usize) -> f64 {
        j as f64 * self.h
    }

    /// Original coordinate of node `j`.
    pub fn x(&self, j: usize) -> f64 {
        let y = self.y(j);
        y / (1.0 - y)
    }

    /// Index of the node nearest to `x` (clamped to the grid).
    pub fn nearest_node(&self, x: f64) -> usize {
        let y = transform(x.max(0.0));
        ((y / self.h).round() as usize).min(self.n - 1)
    }
}

/// Discrete value function with the per-node optimizers.
///
/// `psi[j] = ψ(y_j) = V(x_j)`; `u_star[j]` is the retention maximizing the
/// discrete Hamiltonian at the converged solution; `dividend_flag[j]` marks
/// nodes where the obstacle row is active (immediate payout region).
#[derive(Debug, Clone)]
pub struct ValueGrid {
    pub grid: Grid,
    pub psi: Vec<f64>,
    pub u_star: Vec<f64>,
    pub dividend_flag: Vec<bool>,
}

impl ValueGrid {
    /// `V(x_j)` — same storage as `ψ(y_j)`.
    pub fn v(&self, j: usize) -> f64 {
        self.psi[j]
    }

    /// Value at an arbitrary reserve by linear interpolation in `x`
    /// (slope-1 extension above the top node, where the payout region lies).
    pub fn value_at(&self, x: f64) -> f64 {
        let n = self.grid.n();
        let top = self.grid.x(n - 1);
        if x <= 0.0 {
            return 0.0;
        }
        if x >= top {
            return self.psi[n - 1] + (x - top);
        }
        let y = transform(x);
        let j = ((y / self.grid.h()) as usize).min(n - 2);
        let (x0, x1) = (self.grid.x(j), self.grid.x(j + 1));
        let w = (x - x0) / (x1 - x0);
        self.psi[j] * (1.0 - w) + self.psi[j + 1] * w
    }
}

/// Interpolated value `ψ̃(y')`: zero at or below ruin, linear between grid
/// nodes, slope-1 extension in `x` above the top node (the payout slope).
pub fn interp_psi(grid: &Grid, psi: &[f64], y_post: f64) -> f64 {
    if y_post <= 0.0 {
        return 0.0;
    }
    let n = grid.n();
    let y_top = grid.y(n - 1);
    if y_post >= y_top {
        let x_post = y_post / (1.0 - y_post);
        return psi[n - 1] + (x_post - grid.x(n - 1));
    }
    let j = ((y_post / grid.h()) as usize).min(n - 2);
    let w = y_post / grid.h() - j as f64;
    psi[j] * (1.0 - w) + psi[j + 1] * w
}

/// Discrete Hamiltonian residual `G_j(u)` at node `j` for retention `u`.
///
/// Forward difference in the drift (the drift coefficient
/// `a p(u) y (1-y)` is nonnegative for admissible `u`); backward difference
/// at the last node. The jump term averages `ψ̃` at the post-claim states
/// over the claim atoms, with value zero past ruin.
pub fn discrete_hamiltonian(
    vg: &ValueGrid,
    j: usize,
    u: f64,
    params: &ModelParams,
    formula: JumpFormula,
) -> f64 {
    hamiltonian_at(&vg.grid, &vg.psi, j, u, params, formula)
}

pub(crate) fn hamiltonian_at(
    grid: &Grid,
    psi: &[f64],
    j: usize,
    u: f64,
    params: &ModelParams,
    formula: JumpFormula,
) -> f64 {
    let n = grid.n();
    debug_assert!(j >= 1 && j < n);
    let y = grid.y(j);
    let h = grid.h();
    let q = if j < n - 1 {
        (psi[j + 1] - psi[j]) / h
    } else {
        (psi[j] - psi[j - 1]) / h
    };
    let drift = params.solvency_coefficient()
        * params.premium_rate_unchecked(u)
        * y
        * (1.0 - y)
        * q;
    let jump: f64 = params
        .claims
        .atoms()
        .iter()
        .map(|atom| {
            let y_post = jump_destination(y, u, atom.size, params, formula);
            atom.prob * (interp_psi(grid, psi, y_post) - psi[j])
        })
        .sum();
    -params.r * psi[j] + drift + params.beta * jump
}

/// Obstacle residual `1 - (ψ_j - ψ_{j-1}) / (x_j - x_{j-1})` at node `j`,
/// the discrete form of `1 - (1-y)^2 ψ'(y)` with the Jacobian taken over the
/// exact mesh increment.
pub fn obstacle_residual(grid: &Grid, psi: &[f64], j: usize) -> f64 {
    debug_assert!(j >= 1);
    1.0 - (psi[j] - psi[j - 1]) / (grid.x(j) - grid.x(j - 1))
}

#[derive(Debug, Clone, Copy)]
pub struct GridConfig {
    pub n: usize,
    pub control_points: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { n: 2000, control_points: 101 }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolverConfig {
    /// Sup-norm tolerance on the complementarity residual.
    pub tol: f64,
    /// Maximum policy-iteration count.
    pub max_iter: usize,
    /// Gauss-Seidel evaluation tolerance (relative to the value scale).
    pub eval_tol: f64,
    pub eval_max_sweeps: usize,
    /// Gauss-Seidel damping factor in (0, 1].
    pub damping: f64,
    pub jump_formula: JumpFormula,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 500,
            eval_tol: 1e-10,
            eval_max_sweeps: 50_000,
            damping: 1.0,
            jump_formula: JumpFormula::Derived,
        }
    }
}

/// Policy-iteration diagnostics.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub iterations: usize,
    pub sup_residual: f64,
    pub converged: bool,
    pub policy_changes_last_iter: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Action {
    Dividend,
    Retention(usize),
}

/// Uniform control grid on `[ū, u_max]`.
pub fn control_grid(params: &ModelParams, points: usize) -> Vec<f64> {
    let lo = params.u_min();
    let hi = params.u_max();
    if points <= 1 || hi <= lo {
        return vec![hi];
    }
    (0..points)
        .map(|k| lo + (hi - lo) * k as f64 / (points - 1) as f64)
        .collect()
}

struct Scheme<'a> {
    params: &'a ModelParams,
    grid: Grid,
    controls: Vec<f64>,
    /// `a p(u)` per control.
    drift_rate: Vec<f64>,
    /// Post-claim target per (node, control, atom): `Some((i, w))` for
    /// interpolation between nodes `i` and `i+1`, `None` for ruin.
    targets: Vec<Option<(usize, f64)>>,
    dx: Vec<f64>,
}

impl<'a> Scheme<'a> {
    fn new(params: &'a ModelParams, grid: Grid, controls: Vec<f64>, formula: JumpFormula) -> Self {
        let n = grid.n();
        let n_atoms = params.claims.atoms().len();
        let drift_rate: Vec<f64> = controls
            .iter()
            .map(|&u| params.solvency_coefficient() * params.premium_rate_unchecked(u))
            .collect();
        let mut targets = Vec::with_capacity(n * controls.len() * n_atoms);
        for j in 0..n {
            let y = grid.y(j);
            for &u in &controls {
                for atom in params.claims.atoms() {
                    let y_post = jump_destination(y, u, atom.size, params, formula);
                    if y_post <= 0.0 {
                        targets.push(None);
                    } else {
                        // Jump targets never exceed y itself, so they stay on
                        // the grid; clamp defensively anyway.
                        let i = ((y_post / grid.h()) as usize).min(n - 2);
                        let w = (y_post / grid.h() - i as f64).clamp(0.0, 1.0);
                        targets.push(Some((i, w)));
                    }
                }
            }
        }
        let dx = (1..n).map(|j| grid.x(j) - grid.x(j - 1)).collect();
        Self { params, grid, controls, drift_rate, targets, dx }
    }

    fn target(&self, j: usize, k: usize, atom: usize) -> Option<(usize, f64)> {
        let n_atoms = self.params.claims.atoms().len();
        self.targets[(j * self.controls.len() + k) * n_atoms + atom]
    }

    /// Expected interpolated post-claim value at node `j` under control `k`.
    fn jump_value(&self, psi: &[f64], j: usize, k: usize) -> f64 {
        self.params
            .claims
            .atoms()
            .iter()
            .enumerate()
            .map(|(i, atom)| {
                atom.prob
                    * match self.target(j, k, i) {
                        Some((idx, w)) => psi[idx] * (1.0 - w) + psi[idx + 1] * w,
                        None => 0.0,
                    }
            })
            .sum()
    }

    /// Row solve: candidate value of `ψ_j` for retention control `k` given
    /// the current neighbor values.
    fn retention_candidate(&self, psi: &[f64], j: usize, k: usize) -> f64 {
        let n = self.grid.n();
        let y = self.grid.y(j);
        let beta = self.params.beta;
        let r = self.params.r;
        let d = self.drift_rate[k] * y * (1.0 - y) / self.grid.h();
        let jt = self.jump_value(psi, j, k);
        if j < n - 1 {
            (d * psi[j + 1] + beta * jt) / (r + d + beta)
        } else {
            // Backward difference at the top node; r + beta - d > 0 under A2.
            (beta * jt - d * psi[j - 1]) / (r + beta - d)
        }
    }

    fn dividend_candidate(&self, psi: &[f64], j: usize) -> f64 {
        psi[j - 1] + self.dx[j - 1]
    }

    /// Raw Hamiltonian residual `G_j(u_k)` at the current `psi`.
    fn hamiltonian(&self, psi: &[f64], j: usize, k: usize) -> f64 {
        let n = self.grid.n();
        let y = self.grid.y(j);
        let q = if j < n - 1 {
            (psi[j + 1] - psi[j]) / self.grid.h()
        } else {
            (psi[j] - psi[j - 1]) / self.grid.h()
        };
        -self.params.r * psi[j]
            + self.drift_rate[k] * y * (1.0 - y) * q
            + self.params.beta * (self.jump_value(psi, j, k) - psi[j])
    }

    /// Complementarity residual `max{ sup_u G_j, obstacle_j }`.
    fn node_residual(&self, psi: &[f64], j: usize) -> f64 {
        let obstacle = 1.0 - (psi[j] - psi[j - 1]) / self.dx[j - 1];
        let best_g = (0..self.controls.len())
            .map(|k| self.hamiltonian(psi, j, k))
            .fold(f64::NEG_INFINITY, f64::max);
        best_g.max(obstacle)
    }

    /// Monotonicity audit of the fixed-policy evaluation matrix: positive
    /// diagonal, nonpositive off-diagonals and row dominance by at least `r`
    /// on retention rows (the top-node backward row carries a positive
    /// off-diagonal of size `d`; strict dominance there needs `r > 2d`,
    /// which A2 guarantees).
    fn audit_matrix(&self, policy: &[Action]) -> Result<(), HjbError> {
        let n = self.grid.n();
        let beta = self.params.beta;
        let r = self.params.r;
        for j in 1..n {
            let Action::Retention(k) = policy[j] else {
                // Dividend row: diag 1, single off-diagonal -1, anchored
                // through the boundary.
                continue;
            };
            let y = self.grid.y(j);
            let d = self.drift_rate[k] * y * (1.0 - y) / self.grid.h();
            // Interpolation weight landing on node j itself reduces the
            // diagonal; collect it.
            let mut w_self = 0.0;
            let mut w_off = 0.0;
            for (i, atom) in self.params.claims.atoms().iter().enumerate() {
                if let Some((idx, w)) = self.target(j, k, i) {
                    let (w_lo, w_hi) = (1.0 - w, w);
                    if idx == j {
                        w_self += atom.prob * w_lo;
                        w_off += atom.prob * w_hi;
                    } else if idx + 1 == j {
                        w_self += atom.prob * w_hi;
                        w_off += atom.prob * w_lo;
                    } else {
                        w_off += atom.prob;
                    }
                }
            }
            let (diag, off_sum) = if j < n - 1 {
                (r + d + beta - beta * w_self, d + beta * w_off)
            } else {
                (r + beta - d - beta * w_self, d + beta * w_off)
            };
            if diag <= 0.0 || diag - off_sum <= 0.0 {
                return Err(HjbError::NonMonotoneScheme {
                    node: j,
                    detail: format!("diag = {diag}, off-diagonal sum = {off_sum}"),
                });
            }
        }
        Ok(())
    }
}

/// Solve the discrete variational inequality by Howard policy iteration.
///
/// Requires assumption A2 (otherwise the value is not finite and the scheme
/// loses diagonal dominance). Non-convergence within `max_iter` is reported
/// through `SolveReport::converged`, never silently.
pub fn solve(
    params: &ModelParams,
    grid_cfg: GridConfig,
    solver_cfg: SolverConfig,
) -> Result<(ValueGrid, SolveReport), HjbError> {
    let report = params.validate_assumptions();
    if !report.a2_ok {
        return Err(HjbError::AssumptionViolated {
            r: params.r,
            threshold: report.a2_threshold,
        });
    }
    let grid = Grid::new(grid_cfg.n)?;
    if grid_cfg.control_points == 0 {
        return Err(HjbError::EmptyControlGrid);
    }
    let controls = control_grid(params, grid_cfg.control_points);
    let scheme = Scheme::new(params, grid, controls, solver_cfg.jump_formula);
    let n = grid.n();

    let mut psi = vec![0.0; n];
    // Start from the largest-premium retention everywhere.
    let mut policy = vec![Action::Retention(scheme.controls.len() - 1); n];
    let mut iterations = 0;
    let mut converged = false;
    let mut sup_residual = f64::INFINITY;
    let mut changes = usize::MAX;

    for it in 1..=solver_cfg.max_iter {
        iterations = it;
        evaluate(&scheme, &policy, &mut psi, solver_cfg);
        // Improvement: per node the argmax over the normalized candidate
        // values; ties go to the dividend action, then to the larger
        // retention.
        changes = 0;
        for j in 1..n {
            let mut best = scheme.dividend_candidate(&psi, j);
            let mut best_action = Action::Dividend;
            for k in 0..scheme.controls.len() {
                let cand = scheme.retention_candidate(&psi, j, k);
                if cand > best {
                    best = cand;
                    best_action = Action::Retention(k);
                } else if let (Action::Retention(_), true) = (best_action, cand >= best) {
                    best_action = Action::Retention(k);
                }
            }
            if policy[j] != best_action {
                policy[j] = best_action;
                changes += 1;
            }
        }
        sup_residual = (1..n)
            .map(|j| scheme.node_residual(&psi, j).abs())
            .fold(0.0, f64::max);
        if changes == 0 && sup_residual <= solver_cfg.tol {
            converged = true;
            break;
        }
    }

    scheme.audit_matrix(&policy)?;

    // Report the Hamiltonian maximizer per node (ties toward the larger
    // retention), independent of whether the obstacle is the active row.
    let mut u_star = vec![scheme.controls[scheme.controls.len() - 1]; n];
    for j in 1..n {
        let mut best_g = f64::NEG_INFINITY;
        for (k, &u) in scheme.controls.iter().enumerate() {
            let g = scheme.hamiltonian(&psi, j, k);
            if g >= best_g {
                best_g = g;
                u_star[j] = u;
            }
        }
    }
    let dividend_flag: Vec<bool> = policy
        .iter()
        .map(|a| matches!(a, Action::Dividend))
        .collect();

    Ok((
        ValueGrid { grid, psi, u_star, dividend_flag },
        SolveReport {
            iterations,
            sup_residual,
            converged,
            policy_changes_last_iter: changes,
        },
    ))
}

/// Damped Gauss-Seidel sweeps for the fixed-policy linear system.
fn evaluate(scheme: &Scheme, policy: &[Action], psi: &mut Vec<f64>, cfg: SolverConfig) {
    let n = scheme.grid.n();
    psi[0] = 0.0;
    for _ in 0..cfg.eval_max_sweeps {
        let mut delta: f64 = 0.0;
        let mut scale: f64 = 1.0;
        for j in 1..n {
            let new = match policy[j] {
                Action::Dividend => scheme.dividend_candidate(psi, j),
                Action::Retention(k) => scheme.retention_candidate(psi, j, k),
            };
            let updated = psi[j] + cfg.damping * (new - psi[j]);
            delta = delta.max((updated - psi[j]).abs());
            psi[j] = updated;
            scale = scale.max(updated.abs());
        }
        if delta <= cfg.eval_tol * scale {
            break;
        }
    }
}

/// Executable feedback strategy extracted from a solved grid: nearest-node
/// retention lookup plus a dividend barrier (everything above is paid out
/// immediately).
#[derive(Debug, Clone)]
pub struct FeedbackPolicy {
    grid: Grid,
    u_star: Vec<f64>,
    /// Reserve level of the first dividend-flagged node; `+∞` when no node
    /// is flagged (reported with a warning, should not occur under A2).
    pub barrier: f64,
    /// False when the flagged nodes do not form a single upper interval.
    pub single_dividend_region: bool,
    pub no_dividend_warning: bool,
}

impl FeedbackPolicy {
    /// Retention as a function of the reserve; total on `x >= 0`.
    pub fn retention(&self, x: f64) -> f64 {
        self.u_star[self.grid.nearest_node(x)]
    }

    /// Constant-policy helper used by the simulator's audit library.
    pub fn constant(grid: Grid, retention: f64, barrier: f64) -> Self {
        let n = grid.n();
        Self {
            grid,
            u_star: vec![retention; n],
            barrier,
            single_dividend_region: true,
            no_dividend_warning: false,
        }
    }
}

/// Build the feedback policy from a converged grid.
pub fn extract_policy(vg: &ValueGrid) -> FeedbackPolicy {
    let first = vg.dividend_flag.iter().position(|&f| f);
    let barrier = match first {
        Some(j) => vg.grid.x(j),
        None => f64::INFINITY,
    };
    let single = match first {
        Some(j) => vg.dividend_flag[j..].iter().all(|&f| f),
        None => true,
    };
    FeedbackPolicy {
        grid: vg.grid,
        u_star: vg.u_star.clone(),
        barrier,
        single_dividend_region: single,
        no_dividend_warning: first.is_none(),
    }
}

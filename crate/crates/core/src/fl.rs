//! Monotone finite-difference solver for the flux-limited problem.
//!
//! Each node's numerical Hamiltonian is a max of sign-restricted branches,
//! the nondecreasing ones fed the backward normal difference and the
//! nonincreasing ones the forward difference:
//!
//! * region 1: `max(H₁⁻(D⁻), H₁⁺(D⁺))`,
//! * region 2: `max(H₂⁻(D⁻), H₂⁺(D⁺))`,
//! * interface: `max(G, H₁⁺(D⁺), H₂⁻(D⁻))`.
//!
//! At the box edge the missing neighbor is replaced by the node itself, so
//! the outward difference vanishes. In 2-D the tangential derivative is
//! central with Lax–Friedrichs dissipation of strength M_b.

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::grid::{Grid, Meta, ValueField};
use crate::hamiltonian::{flux_limiter, FluxLimiter, LineSet, Side};
use crate::junction::CROSS_CHECK_FAIL;
use crate::scenario::{mixed_from_tables, Region, Scenario};
use crate::Error;

pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_MAX_ITER: usize = 2_000_000;
/// Grids with at least this many nodes are swept in parallel.
pub const PARALLEL_MIN_NODES: usize = 20_000;
/// Residual history kept for non-convergence reports.
pub const HISTORY_TAIL: usize = 8;

/// Initial iterate.
#[derive(Debug, Clone, PartialEq)]
pub enum Start {
    Constant(f64),
    Values(Vec<f64>),
}

impl Start {
    pub fn materialize(&self, len: usize) -> Result<Vec<f64>, Error> {
        match self {
            Start::Constant(c) => Ok(vec![*c; len]),
            Start::Values(v) if v.len() == len => Ok(v.clone()),
            Start::Values(v) => Err(Error::Usage(format!(
                "initial field has {} values, grid has {len} nodes",
                v.len()
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlParams {
    pub tau: Option<f64>,
    pub tol: f64,
    pub max_iter: usize,
    pub u0: Option<Start>,
}

impl Default for FlParams {
    fn default() -> Self {
        FlParams {
            tau: None,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            u0: None,
        }
    }
}

/// Interface limiter as evaluated inside the scheme.
#[derive(Debug, Clone)]
enum NodeLimiter {
    Absent,
    Constant(f64),
    /// max over lines of -b·p_tan - l.
    Tangential(Vec<[f64; 2]>),
}

impl NodeLimiter {
    #[inline]
    fn eval(&self, p_tan: f64) -> f64 {
        match self {
            NodeLimiter::Absent => f64::NEG_INFINITY,
            NodeLimiter::Constant(c) => *c,
            NodeLimiter::Tangential(lines) => lines
                .iter()
                .map(|l| -l[0] * p_tan - l[1])
                .fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

#[derive(Debug, Clone)]
struct NodeData {
    /// Branch fed D⁻.
    minus: LineSet,
    /// Branch fed D⁺.
    plus: LineSet,
    limiter: NodeLimiter,
}

/// The discrete operator F(u) = u + H^num(u) of the scheme.
#[derive(Debug, Clone)]
pub struct FlScheme {
    pub grid: Grid,
    pub limiter: FluxLimiter,
    pub m_b: f64,
    nodes: Vec<NodeData>,
}

impl FlScheme {
    pub fn new(scenario: &Scenario, grid: &Grid, limiter: FluxLimiter) -> Result<FlScheme, Error> {
        if grid.dim != scenario.dim {
            return Err(Error::InvalidGrid(format!(
                "grid dim {} does not match scenario dim {}",
                grid.dim, scenario.dim
            )));
        }
        if grid.halfwidth > scenario.box_halfwidth * (1.0 + 1e-12) {
            return Err(Error::InvalidGrid(format!(
                "grid halfwidth {} exceeds the scenario box {}",
                grid.halfwidth, scenario.box_halfwidth
            )));
        }
        let dim = grid.dim;
        let mut nodes = Vec::with_capacity(grid.len());
        for k in 0..grid.len() {
            let x = grid.point(k);
            let data = match grid.region(k) {
                region @ (Region::One | Region::Two) => {
                    let table = scenario.controls_at(region, &x)?;
                    NodeData {
                        minus: LineSet::branch(&table, region, Side::Minus, dim),
                        plus: LineSet::branch(&table, region, Side::Plus, dim),
                        limiter: NodeLimiter::Absent,
                    }
                }
                Region::Interface => {
                    let r1 = scenario.controls_at(Region::One, &x)?;
                    let r2 = scenario.controls_at(Region::Two, &x)?;
                    NodeData {
                        minus: LineSet::branch(&r2, Region::Two, Side::Minus, dim),
                        plus: LineSet::branch(&r1, Region::One, Side::Plus, dim),
                        limiter: node_limiter(scenario, limiter, &x, &r1, &r2)?,
                    }
                }
            };
            if data.minus.is_empty() && data.plus.is_empty() && matches!(data.limiter, NodeLimiter::Absent) {
                return Err(Error::Usage(format!("no admissible control at node {x:?}")));
            }
            nodes.push(data);
        }
        Ok(FlScheme {
            grid: grid.clone(),
            limiter,
            m_b: scenario.m_b,
            nodes,
        })
    }

    /// Largest stable pseudo-time step.
    pub fn default_tau(&self) -> f64 {
        let h = self.grid.h;
        h / (h + 2.0 * self.grid.dim as f64 * self.m_b)
    }

    /// F_k(u).
    #[inline]
    pub fn residual_at(&self, u: &[f64], k: usize) -> f64 {
        let g = &self.grid;
        let h = g.h;
        let (i, j) = g.split(k);
        let uk = u[k];
        let below = if j > 0 { u[g.index(i, j - 1)] } else { uk };
        let above = if j + 1 < g.n { u[g.index(i, j + 1)] } else { uk };
        let d_minus = (uk - below) / h;
        let d_plus = (above - uk) / h;
        let (p_tan, dissipation) = if g.dim == 2 {
            let left = if i > 0 { u[g.index(i - 1, j)] } else { uk };
            let right = if i + 1 < g.n { u[g.index(i + 1, j)] } else { uk };
            ((right - left) / (2.0 * h), self.m_b * (2.0 * uk - left - right) / (2.0 * h))
        } else {
            (0.0, 0.0)
        };
        let node = &self.nodes[k];
        let ham = node
            .limiter
            .eval(p_tan)
            .max(node.minus.eval(p_tan, d_minus))
            .max(node.plus.eval(p_tan, d_plus));
        uk + ham + dissipation
    }

    pub fn residual(&self, u: &[f64], out: &mut [f64]) {
        if u.len() >= PARALLEL_MIN_NODES {
            out.par_iter_mut()
                .enumerate()
                .for_each(|(k, r)| *r = self.residual_at(u, k));
        } else {
            for (k, r) in out.iter_mut().enumerate() {
                *r = self.residual_at(u, k);
            }
        }
    }
}

fn node_limiter(
    scenario: &Scenario,
    spec: FluxLimiter,
    x: &[f64],
    r1: &[crate::scenario::ControlSample],
    r2: &[crate::scenario::ControlSample],
) -> Result<NodeLimiter, Error> {
    if scenario.dim == 1 || matches!(spec, FluxLimiter::None | FluxLimiter::Constant(_)) {
        let g = flux_limiter(scenario, spec, x, 0.0)?;
        return Ok(if g == f64::NEG_INFINITY {
            NodeLimiter::Absent
        } else {
            NodeLimiter::Constant(g)
        });
    }
    // In 2-D G depends on p_tan; it is a max of affine functions given by
    // the mixed (or interface) controls.
    let lines: Vec<[f64; 2]> = match spec {
        FluxLimiter::InterfaceControls => scenario
            .controls_at(Region::Interface, x)?
            .iter()
            .map(|c| [c.b[0], c.l])
            .collect(),
        FluxLimiter::Ht | FluxLimiter::HtReg => mixed_from_tables(r1, r2, scenario.dim)
            .into_iter()
            .filter(|m| spec == FluxLimiter::Ht || m.regular)
            .map(|m| [m.b_h[0], m.l_h])
            .collect(),
        FluxLimiter::None | FluxLimiter::Constant(_) => unreachable!(),
    };
    let limiter = NodeLimiter::Tangential(lines);
    for p_tan in [-1.0, 0.0, 1.0] {
        let reference = flux_limiter(scenario, spec, x, p_tan)?;
        let tabulated = limiter.eval(p_tan);
        if (reference - tabulated).abs() > CROSS_CHECK_FAIL {
            return Err(Error::Usage(format!(
                "limiter {spec} at {x:?}, p_tan={p_tan}: tabulated {tabulated} vs direct {reference}"
            )));
        }
    }
    Ok(limiter)
}

/// Damped fixed-point iteration u ← u − τ·F(u) until ‖F(u)‖∞ ≤ tol.
pub(crate) fn relax(
    residual: impl Fn(&[f64], &mut [f64]),
    mut u: Vec<f64>,
    tau: f64,
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, Vec<f64>, usize, f64), Error> {
    let mut r = vec![0.0; u.len()];
    let mut tail = std::collections::VecDeque::with_capacity(HISTORY_TAIL);
    for it in 0..=max_iter {
        residual(&u, &mut r);
        let norm = r.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if !norm.is_finite() {
            return Err(Error::NonConvergence {
                iterations: it,
                residual: norm,
                tol,
                tail: tail.into(),
            });
        }
        if norm <= tol {
            return Ok((u, r, it, norm));
        }
        if tail.len() == HISTORY_TAIL {
            tail.pop_front();
        }
        tail.push_back(norm);
        if it == max_iter {
            break;
        }
        for (uk, rk) in u.iter_mut().zip(&r) {
            *uk -= tau * rk;
        }
        if it % 100_000 == 0 && it > 0 {
            log::debug!("iteration {it}: residual {norm:.3e}");
        }
    }
    let residual = *tail.back().unwrap_or(&f64::NAN);
    Err(Error::NonConvergence {
        iterations: max_iter,
        residual,
        tol,
        tail: tail.into(),
    })
}

pub fn solve_fl(scenario: &Scenario, grid: &Grid, limiter: FluxLimiter, params: &FlParams) -> Result<ValueField, Error> {
    let started = Instant::now();
    let scheme = FlScheme::new(scenario, grid, limiter)?;
    let bound = 1.0 / (1.0 + 2.0 * grid.dim as f64 * scenario.m_b / grid.h);
    let tau = match params.tau {
        Some(t) if !(t > 0.0 && t <= bound * (1.0 + 1e-12)) => {
            return Err(Error::CflViolation { tau: t, bound });
        }
        Some(t) => t,
        None => scheme.default_tau(),
    };
    let u0 = params.u0.as_ref().unwrap_or(&Start::Constant(0.0)).materialize(grid.len())?;
    let (values, local_residual, iterations, final_residual) =
        relax(|u, r| scheme.residual(u, r), u0, tau, params.tol, params.max_iter)?;
    check_bounded(&values, scenario.m_l);
    Ok(ValueField {
        grid: grid.clone(),
        values,
        local_residual,
        meta: Meta {
            iterations,
            final_residual,
            scheme_tag: "fl-godunov".into(),
            limiter_spec: Some(limiter.to_string()),
            runtime_seconds: started.elapsed().as_secs_f64(),
        },
    })
}

pub(crate) fn check_bounded(values: &[f64], m_l: f64) {
    let sup = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if sup > m_l + 1.0 {
        log::warn!("converged field has sup norm {sup} above M_l + 1 = {}", m_l + 1.0);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IshiiNode {
    pub x: Vec<f64>,
    pub min_residual: f64,
    pub max_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IshiiReport {
    pub tol_diag: f64,
    pub nodes: Vec<IshiiNode>,
    pub passed: bool,
}

/// min(u+H₁, u+H₂) and max(u+H₁, u+H₂) at interface nodes, H₁ evaluated
/// with the forward normal difference and H₂ with the backward one.
pub fn residuals_ishii(scenario: &Scenario, field: &ValueField) -> Result<IshiiReport, Error> {
    let g = &field.grid;
    let u = &field.values;
    let h = g.h;
    let tol_diag = 10.0 * h;
    let mut nodes = Vec::new();
    for k in g.interface_nodes() {
        let x = g.point(k);
        let (i, j) = g.split(k);
        let h1 = LineSet::new(&scenario.controls_at(Region::One, &x)?, g.dim, |_| true);
        let h2 = LineSet::new(&scenario.controls_at(Region::Two, &x)?, g.dim, |_| true);
        let d_plus = (u[g.index(i, j + 1)] - u[k]) / h;
        let d_minus = (u[k] - u[g.index(i, j - 1)]) / h;
        let p_tan = if g.dim == 2 {
            let left = if i > 0 { u[g.index(i - 1, j)] } else { u[k] };
            let right = if i + 1 < g.n { u[g.index(i + 1, j)] } else { u[k] };
            (right - left) / (2.0 * h)
        } else {
            0.0
        };
        let a = u[k] + h1.eval(p_tan, d_plus);
        let b = u[k] + h2.eval(p_tan, d_minus);
        nodes.push(IshiiNode {
            x,
            min_residual: a.min(b),
            max_residual: a.max(b),
        });
    }
    let passed = nodes
        .iter()
        .all(|n| n.min_residual <= tol_diag && n.max_residual >= -tol_diag);
    Ok(IshiiReport { tol_diag, nodes, passed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::discrete_lipschitz;

    fn solve(name: &str, limiter: FluxLimiter, h: f64) -> ValueField {
        let s = Scenario::builtin(name).unwrap();
        let grid = Grid::new(1, s.box_halfwidth, h).unwrap();
        solve_fl(&s, &grid, limiter, &FlParams::default()).unwrap()
    }

    #[test]
    fn push_push_none_matches_profile() {
        let f = solve("push-push", FluxLimiter::None, 0.005);
        assert!(f.at_origin().abs() <= 0.02, "u(0) = {}", f.at_origin());
        let u_half = f.value_at_node(&[0.5]).unwrap();
        assert!((u_half - ((-0.5f64).exp() - 1.0)).abs() <= 0.02);
        assert!(f.meta.final_residual <= 1e-9);
        assert_eq!(f.meta.limiter_spec.as_deref(), Some("none"));
    }

    #[test]
    fn push_push_htreg_is_minus_one() {
        let f = solve("push-push", FluxLimiter::HtReg, 0.01);
        assert!(f.sup_error(|_| -1.0, 0.0) <= 0.02);
    }

    #[test]
    fn constant_cost_is_exact() {
        for limiter in [FluxLimiter::None, FluxLimiter::Ht, FluxLimiter::HtReg] {
            let f = solve("constant-cost", limiter, 0.05);
            assert!(f.sup_error(|_| 0.5, 0.0) <= 1e-6);
        }
    }

    #[test]
    fn cfl_override_checked() {
        let s = Scenario::builtin("push-push").unwrap();
        let grid = Grid::new(1, 1.0, 0.1).unwrap();
        let params = FlParams {
            tau: Some(0.5),
            ..FlParams::default()
        };
        assert!(matches!(
            solve_fl(&s, &grid, FluxLimiter::None, &params),
            Err(Error::CflViolation { .. })
        ));
    }

    #[test]
    fn non_convergence_reports_tail() {
        let s = Scenario::builtin("push-push").unwrap();
        let grid = Grid::new(1, 1.0, 0.1).unwrap();
        let params = FlParams {
            max_iter: 5,
            ..FlParams::default()
        };
        match solve_fl(&s, &grid, FluxLimiter::None, &params) {
            Err(Error::NonConvergence { iterations, tail, .. }) => {
                assert_eq!(iterations, 5);
                assert!(!tail.is_empty());
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn ishii_diagnostics() {
        let s = Scenario::builtin("push-push").unwrap();
        let mut f = solve("push-push", FluxLimiter::HtReg, 0.005);
        let r = residuals_ishii(&s, &f).unwrap();
        assert!(r.passed);
        assert!(r.nodes[0].min_residual <= 0.05 && r.nodes[0].max_residual >= -0.05);
        let k = f.grid.interface_nodes()[0];
        f.values[k] += 0.5;
        let r = residuals_ishii(&s, &f).unwrap();
        assert!(r.nodes[0].min_residual > 0.1);
        assert!(!r.passed);

        let c = Scenario::builtin("constant-cost").unwrap();
        let f = solve("constant-cost", FluxLimiter::None, 0.05);
        let r = residuals_ishii(&c, &f).unwrap();
        assert!(r.nodes[0].min_residual.abs() <= 1e-6 && r.nodes[0].max_residual.abs() <= 1e-6);
    }

    #[test]
    fn lipschitz_bound() {
        let s = Scenario::builtin("push-push").unwrap();
        let f = solve("push-push", FluxLimiter::None, 0.01);
        let bound = (f.sup_norm() + s.m_l) / s.delta_hat + 0.1;
        assert!(discrete_lipschitz(&f) <= bound);
    }

    #[test]
    fn larger_limiter_gives_smaller_solution() {
        let lo = solve("push-push", FluxLimiter::Constant(0.2), 0.02);
        let hi = solve("push-push", FluxLimiter::Constant(0.6), 0.02);
        for (a, b) in lo.values.iter().zip(&hi.values) {
            assert!(a + 1e-9 >= *b);
        }
        assert!(lo.at_origin() > hi.at_origin() + 0.1);
    }

    #[test]
    fn two_dimensional_constant_cost() {
        let cfg = r#"{
            "name": "flat2d", "dim": 2, "box_halfwidth": 1.0,
            "region1": {"controls": {"box": [[-1, 1], [-1, 1]], "samples": [5, 5]},
                        "dynamics": ["a1", "a2"], "cost": "0.25"},
            "region2": {"controls": {"box": [[-1, 1], [-1, 1]], "samples": [5, 5]},
                        "dynamics": ["a1", "a2"], "cost": "0.25"}
        }"#;
        let s = Scenario::from_json(cfg).unwrap();
        let grid = Grid::new(2, 1.0, 0.25).unwrap();
        for limiter in [FluxLimiter::None, FluxLimiter::Ht, FluxLimiter::HtReg] {
            let f = solve_fl(&s, &grid, limiter, &FlParams::default()).unwrap();
            assert!(f.sup_error(|_| 0.25, 0.0) <= 1e-6, "{limiter}");
        }
    }
}

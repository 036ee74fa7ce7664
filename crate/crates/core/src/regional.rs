//! Semi-Lagrangian value iteration for the regional value functions U⁻, U⁺
//! and the flux-limited value U^FL_G, plus greedy rollouts and the ordering
//! diagnostic.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::fl::{check_bounded, Start, DEFAULT_TOL, HISTORY_TAIL, PARALLEL_MIN_NODES};
use crate::grid::{Grid, Meta, ValueField, BOX_MARGIN};
use crate::scenario::{mixed_from_tables, ControlSample, Region, Scenario};
use crate::Error;

pub const DEFAULT_MAX_ITER: usize = 10_000_000;
/// Slack of the ordering check.
pub const ORDERING_EPS: f64 = 0.03;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Variant {
    Minus,
    Plus,
    FlG,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Minus => "minus",
            Variant::Plus => "plus",
            Variant::FlG => "flg",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "minus" => Ok(Variant::Minus),
            "plus" => Ok(Variant::Plus),
            "flg" | "fl_g" => Ok(Variant::FlG),
            _ => Err(Error::Usage(format!("unknown variant `{s}` (expected minus|plus|flg)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MoveTag {
    Region1,
    Region2,
    MixedRegular,
    MixedSingular,
    InterfaceA0,
}

impl MoveTag {
    pub fn as_str(self) -> &'static str {
        match self {
            MoveTag::Region1 => "region1",
            MoveTag::Region2 => "region2",
            MoveTag::MixedRegular => "mixed-regular",
            MoveTag::MixedSingular => "mixed-singular",
            MoveTag::InterfaceA0 => "interface-A0",
        }
    }

    /// Whether the move keeps a trajectory on H.
    pub fn stays_on_interface(self) -> bool {
        matches!(self, MoveTag::MixedRegular | MoveTag::MixedSingular | MoveTag::InterfaceA0)
    }
}

impl fmt::Display for MoveTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Move {
    pub b: [f64; 2],
    pub l: f64,
    pub tag: MoveTag,
}

/// Admissible moves at every node of a grid.
#[derive(Debug, Clone)]
pub struct MoveSet {
    pub variant: Variant,
    pub nodes: Vec<Vec<Move>>,
}

fn region_moves(table: &[ControlSample], tag: MoveTag, keep: impl Fn(&ControlSample) -> bool) -> Vec<Move> {
    table.iter().filter(|c| keep(c)).map(|c| Move { b: c.b, l: c.l, tag }).collect()
}

impl MoveSet {
    pub fn build(scenario: &Scenario, grid: &Grid, variant: Variant) -> Result<MoveSet, Error> {
        let dim = scenario.dim;
        let mut nodes = Vec::with_capacity(grid.len());
        for k in 0..grid.len() {
            let x = grid.point(k);
            let moves: Vec<Move> = match grid.region(k) {
                Region::One => region_moves(&scenario.controls_at(Region::One, &x)?, MoveTag::Region1, |_| true),
                Region::Two => region_moves(&scenario.controls_at(Region::Two, &x)?, MoveTag::Region2, |_| true),
                Region::Interface => {
                    let r1 = scenario.controls_at(Region::One, &x)?;
                    let r2 = scenario.controls_at(Region::Two, &x)?;
                    let mut moves = Vec::new();
                    match variant {
                        Variant::Minus | Variant::Plus => {
                            for m in mixed_from_tables(&r1, &r2, dim) {
                                if variant == Variant::Plus && !m.regular {
                                    continue;
                                }
                                moves.push(Move {
                                    b: m.b_h,
                                    l: m.l_h,
                                    tag: if m.regular {
                                        MoveTag::MixedRegular
                                    } else {
                                        MoveTag::MixedSingular
                                    },
                                });
                            }
                        }
                        Variant::FlG => {
                            if scenario.interface.is_some() {
                                for c in scenario.controls_at(Region::Interface, &x)? {
                                    let mut b = [0.0; 2];
                                    if dim == 2 {
                                        b[0] = c.b[0];
                                    }
                                    moves.push(Move {
                                        b,
                                        l: c.l,
                                        tag: MoveTag::InterfaceA0,
                                    });
                                }
                            }
                        }
                    }
                    moves.extend(region_moves(&r1, MoveTag::Region1, |c| c.normal(dim) >= 0.0));
                    moves.extend(region_moves(&r2, MoveTag::Region2, |c| c.normal(dim) <= 0.0));
                    moves
                }
            };
            if moves.is_empty() {
                log::warn!("empty move set at node {x:?}; the node keeps its initial value");
            }
            nodes.push(moves);
        }
        Ok(MoveSet { variant, nodes })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionalParams {
    /// Defaults to h / (2·M_b).
    pub dt: Option<f64>,
    pub tol: f64,
    pub max_iter: usize,
    pub u0: Option<Start>,
}

impl Default for RegionalParams {
    fn default() -> Self {
        RegionalParams {
            dt: None,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            u0: None,
        }
    }
}

/// A move with its running-cost term and interpolation stencil resolved.
#[derive(Debug, Clone, Copy)]
struct CompiledMove {
    cost: f64,
    len: u8,
    idx: [u32; 4],
    w: [f64; 4],
}

fn clip(grid: &Grid, x: &[f64]) -> [f64; 2] {
    let l = grid.halfwidth;
    let mut out = [0.0; 2];
    for (o, c) in out.iter_mut().zip(x) {
        *o = c.clamp(-l, l);
    }
    out
}

fn foot(grid: &Grid, x: &[f64], b: [f64; 2], dt: f64) -> [f64; 2] {
    let mut y = [0.0; 2];
    for d in 0..grid.dim {
        y[d] = x[d] + dt * b[d];
    }
    clip(grid, &y[..grid.dim])
}

fn interpolate(grid: &Grid, u: &[f64], y: &[f64]) -> f64 {
    grid.stencil(y).iter().map(|&(k, w)| w * u[k]).sum()
}

pub fn default_dt(scenario: &Scenario, grid: &Grid) -> f64 {
    grid.h / (2.0 * scenario.m_b)
}

pub fn solve_regional(scenario: &Scenario, grid: &Grid, variant: Variant, params: &RegionalParams) -> Result<ValueField, Error> {
    let moves = MoveSet::build(scenario, grid, variant)?;
    solve_with_moves(scenario, grid, &moves, params)
}

pub fn solve_with_moves(scenario: &Scenario, grid: &Grid, moves: &MoveSet, params: &RegionalParams) -> Result<ValueField, Error> {
    let started = Instant::now();
    if grid.dim != scenario.dim {
        return Err(Error::InvalidGrid(format!(
            "grid dim {} does not match scenario dim {}",
            grid.dim, scenario.dim
        )));
    }
    let dt = params.dt.unwrap_or_else(|| default_dt(scenario, grid));
    if !(dt > 0.0 && dt * scenario.m_b <= grid.h * (1.0 + 1e-12)) {
        return Err(Error::CflViolation {
            tau: dt,
            bound: grid.h / scenario.m_b,
        });
    }
    let discount = (-dt).exp();
    let weight = -(-dt).exp_m1();
    let mut offsets = Vec::with_capacity(grid.len() + 1);
    let mut compiled = Vec::new();
    offsets.push(0);
    for (k, node_moves) in moves.nodes.iter().enumerate() {
        let x = grid.point(k);
        for m in node_moves {
            let y = foot(grid, &x, m.b, dt);
            let stencil = grid.stencil(&y[..grid.dim]);
            let mut cm = CompiledMove {
                cost: m.l * weight,
                len: stencil.len() as u8,
                idx: [0; 4],
                w: [0.0; 4],
            };
            for (s, (i, w)) in stencil.into_iter().enumerate() {
                cm.idx[s] = i as u32;
                cm.w[s] = w * discount;
            }
            compiled.push(cm);
        }
        offsets.push(compiled.len());
    }

    let update = |u: &[f64], k: usize| -> f64 {
        let range = offsets[k]..offsets[k + 1];
        if range.is_empty() {
            return u[k];
        }
        let mut best = f64::INFINITY;
        for cm in &compiled[range] {
            let mut v = cm.cost;
            for s in 0..cm.len as usize {
                v += cm.w[s] * u[cm.idx[s] as usize];
            }
            if v < best {
                best = v;
            }
        }
        best
    };

    let mut u = params.u0.as_ref().unwrap_or(&Start::Constant(0.0)).materialize(grid.len())?;
    let mut next = vec![0.0; u.len()];
    let mut tail = std::collections::VecDeque::with_capacity(HISTORY_TAIL);
    let mut iterations = 0;
    let final_residual;
    loop {
        if u.len() >= PARALLEL_MIN_NODES {
            next.par_iter_mut().enumerate().for_each(|(k, v)| *v = update(&u, k));
        } else {
            for (k, v) in next.iter_mut().enumerate() {
                *v = update(&u, k);
            }
        }
        let res = u.iter().zip(&next).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        if tail.len() == HISTORY_TAIL {
            tail.pop_front();
        }
        tail.push_back(res);
        std::mem::swap(&mut u, &mut next);
        iterations += 1;
        if res <= params.tol {
            final_residual = res;
            break;
        }
        if !res.is_finite() || iterations >= params.max_iter {
            return Err(Error::NonConvergence {
                iterations,
                residual: res,
                tol: params.tol,
                tail: tail.into(),
            });
        }
    }
    let local_residual: Vec<f64> = (0..u.len()).map(|k| update(&u, k) - u[k]).collect();
    check_bounded(&u, scenario.m_l);
    Ok(ValueField {
        grid: grid.clone(),
        values: u,
        local_residual,
        meta: Meta {
            iterations,
            final_residual,
            scheme_tag: format!("semi-lagrangian-{}", moves.variant),
            limiter_spec: None,
            runtime_seconds: started.elapsed().as_secs_f64(),
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RolloutStep {
    pub t: f64,
    pub x: Vec<f64>,
    pub region: Region,
    pub control: MoveTag,
    pub b: [f64; 2],
    /// Discounted cost collected over the step.
    pub running_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Occupation {
    pub omega1: f64,
    pub omega2: f64,
    pub interface: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rollout {
    pub steps: Vec<RolloutStep>,
    pub final_x: Vec<f64>,
    pub cost: f64,
    pub occupation: Occupation,
    /// Largest |b·e_N| over steps that keep the path on H.
    pub max_interface_normal: f64,
}

/// Node of the move set used at `x`: the nearest node of the same stratum.
fn stratum_node(grid: &Grid, x: &[f64]) -> Option<usize> {
    let k = grid.nearest(x)?;
    let (i, j) = grid.split(k);
    let j = match Region::of_point(x) {
        Region::One => j.max(grid.mid + 1),
        Region::Two => j.min(grid.mid - 1),
        Region::Interface => grid.mid,
    };
    Some(grid.index(i, j))
}

/// Greedy rollout of the semi-Lagrangian policy of `field`.
pub fn simulate_trajectory(
    scenario: &Scenario,
    x0: &[f64],
    field: &ValueField,
    variant: Variant,
    horizon: f64,
    dt: f64,
) -> Result<Rollout, Error> {
    let grid = &field.grid;
    if x0.len() != grid.dim || grid.nearest(x0).is_none() {
        return Err(Error::Usage(format!("x0 = {x0:?} is not in the box")));
    }
    if !(dt > 0.0 && horizon >= 0.0) {
        return Err(Error::Usage(format!("need dt > 0 and T >= 0, got dt={dt}, T={horizon}")));
    }
    let moves = MoveSet::build(scenario, grid, variant)?;
    let discount = (-dt).exp();
    let weight = -(-dt).exp_m1();
    let n_steps = (horizon / dt).round() as usize;
    let dim = grid.dim;
    let mut x = x0.to_vec();
    let mut steps = Vec::with_capacity(n_steps);
    let mut cost = 0.0;
    let mut occupation = Occupation {
        omega1: 0.0,
        omega2: 0.0,
        interface: 0.0,
    };
    let mut max_interface_normal: f64 = 0.0;
    for s in 0..n_steps {
        let t = s as f64 * dt;
        let region = Region::of_point(&x);
        let node = stratum_node(grid, &x).expect("path stays in the box");
        let mut best: Option<(f64, Move)> = None;
        for m in &moves.nodes[node] {
            let y = foot(grid, &x, m.b, dt);
            let v = m.l * weight + discount * interpolate(grid, &field.values, &y[..dim]);
            if best.is_none_or(|(bv, _)| v < bv) {
                best = Some((v, *m));
            }
        }
        let Some((_, m)) = best else {
            return Err(Error::Usage(format!("empty move set at {x:?}")));
        };
        let running_cost = (-t).exp() * weight * m.l;
        cost += running_cost;
        match region {
            Region::One => occupation.omega1 += dt,
            Region::Two => occupation.omega2 += dt,
            Region::Interface => occupation.interface += dt,
        }
        if region == Region::Interface && m.tag.stays_on_interface() {
            max_interface_normal = max_interface_normal.max(m.b[dim - 1].abs());
        }
        steps.push(RolloutStep {
            t,
            x: x.clone(),
            region,
            control: m.tag,
            b: m.b,
            running_cost,
        });
        let y = foot(grid, &x, m.b, dt);
        let before = x[dim - 1];
        let mut next = y[..dim].to_vec();
        let after = next[dim - 1];
        if (before > 0.0 && after < 0.0) || (before < 0.0 && after > 0.0) {
            next[dim - 1] = 0.0;
        }
        x = next;
    }
    Ok(Rollout {
        steps,
        final_x: x,
        cost,
        occupation,
        max_interface_normal,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderingReport {
    pub eps: f64,
    pub margin: f64,
    /// max of U⁻ − U⁺ and where it occurs.
    pub minus_over_plus: f64,
    pub minus_over_plus_at: Vec<f64>,
    /// max of U⁺ − U^FL and where it occurs.
    pub plus_over_fl: f64,
    pub plus_over_fl_at: Vec<f64>,
    pub passed: bool,
}

/// Checks U⁻ ≤ U⁺ + ε ≤ U^FL + 2ε on the box minus `margin`.
pub fn ordering_check(minus: &ValueField, plus: &ValueField, fl: &ValueField, eps: f64, margin: f64) -> OrderingReport {
    let grid = &minus.grid;
    assert!(grid == &plus.grid && grid == &fl.grid, "fields live on different grids");
    let mut worst = [(f64::NEG_INFINITY, 0usize); 2];
    for k in (0..grid.len()).filter(|&k| grid.inside_margin(k, margin)) {
        for (w, d) in worst.iter_mut().zip([
            minus.values[k] - plus.values[k],
            plus.values[k] - fl.values[k],
        ]) {
            if d > w.0 {
                *w = (d, k);
            }
        }
    }
    OrderingReport {
        eps,
        margin,
        minus_over_plus: worst[0].0,
        minus_over_plus_at: grid.point(worst[0].1),
        plus_over_fl: worst[1].0,
        plus_over_fl_at: grid.point(worst[1].1),
        passed: worst[0].0 <= eps && worst[1].0 <= eps,
    }
}

/// [`ordering_check`] with the default slack and margin.
pub fn ordering_check_default(minus: &ValueField, plus: &ValueField, fl: &ValueField) -> OrderingReport {
    ordering_check(minus, plus, fl, ORDERING_EPS, BOX_MARGIN)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn solve(name: &str, variant: Variant, h: f64) -> ValueField {
        let s = Scenario::builtin(name).unwrap();
        let grid = Grid::new(1, s.box_halfwidth, h).unwrap();
        solve_regional(&s, &grid, variant, &RegionalParams::default()).unwrap()
    }

    #[test]
    fn push_push_plus_is_minus_one() {
        let f = solve("push-push", Variant::Plus, 0.01);
        assert!(f.sup_error(|_| -1.0, BOX_MARGIN) <= 0.03);
    }

    #[test]
    fn push_push_flg_matches_profile_at_origin() {
        let f = solve("push-push", Variant::FlG, 0.01);
        assert!(f.at_origin().abs() <= 0.02);
        let u = f.value_at_node(&[0.5]).unwrap();
        assert!((u - ((-0.5f64).exp() - 1.0)).abs() <= 0.03);
    }

    #[test]
    fn fading_reward_gap() {
        let minus = solve("fading-reward", Variant::Minus, 0.01);
        let plus = solve("fading-reward", Variant::Plus, 0.01);
        assert!((minus.at_origin() + 1.0).abs() <= 0.03, "{}", minus.at_origin());
        assert!((plus.at_origin() + 0.5).abs() <= 0.03, "{}", plus.at_origin());
    }

    #[test]
    fn constant_cost_all_variants() {
        for v in [Variant::Minus, Variant::Plus, Variant::FlG] {
            let f = solve("constant-cost", v, 0.05);
            assert!(f.sup_error(|_| 0.5, 0.0) <= 1e-6);
        }
    }

    #[test]
    fn move_sets_nest() {
        let s = Scenario::builtin("fading-reward").unwrap();
        let grid = Grid::new(1, 2.0, 0.1).unwrap();
        let minus = MoveSet::build(&s, &grid, Variant::Minus).unwrap();
        let plus = MoveSet::build(&s, &grid, Variant::Plus).unwrap();
        for (a, b) in minus.nodes.iter().zip(&plus.nodes) {
            assert!(b.iter().all(|m| a.contains(m)));
        }
        let k = grid.interface_nodes()[0];
        assert!(minus.nodes[k].iter().any(|m| m.tag == MoveTag::MixedSingular));
        assert!(plus.nodes[k].iter().all(|m| m.tag != MoveTag::MixedSingular));
        assert!(minus.nodes[k].iter().all(|m| !m.tag.stays_on_interface() || m.b[0] == 0.0));
    }

    #[test]
    fn residual_decreases_after_first_sweep() {
        let s = Scenario::builtin("push-push").unwrap();
        let grid = Grid::new(1, 1.0, 0.05).unwrap();
        let mut prev = f64::INFINITY;
        for iters in 2..40 {
            let params = RegionalParams {
                max_iter: iters,
                ..RegionalParams::default()
            };
            match solve_regional(&s, &grid, Variant::Minus, &params) {
                Err(Error::NonConvergence { residual, .. }) => {
                    assert!(residual <= prev + 1e-15);
                    prev = residual;
                }
                other => panic!("unexpected {other:?}"),
            }
        }
    }

    #[test]
    fn rollouts() {
        let s = Scenario::builtin("push-push").unwrap();
        let f = solve("push-push", Variant::Plus, 0.01);
        let r = simulate_trajectory(&s, &[0.5], &f, Variant::Plus, 20.0, 0.005).unwrap();
        assert!((r.cost + 1.0).abs() <= 0.05, "cost {}", r.cost);
        assert!((r.occupation.omega1 - 0.5).abs() <= 0.02);
        assert!(r.max_interface_normal <= 1e-12);
        assert_eq!(r.final_x, vec![0.0]);

        let s = Scenario::builtin("fading-reward").unwrap();
        let f = solve("fading-reward", Variant::Minus, 0.01);
        let r = simulate_trajectory(&s, &[0.0], &f, Variant::Minus, 5.0, 0.005).unwrap();
        assert!((r.occupation.interface - 5.0).abs() < 1e-9);
        assert!(r.steps.iter().all(|st| st.control == MoveTag::MixedSingular));

        let s = Scenario::builtin("constant-cost").unwrap();
        let f = solve("constant-cost", Variant::Minus, 0.05);
        let r = simulate_trajectory(&s, &[0.3], &f, Variant::Minus, 4.0, 0.01).unwrap();
        assert!((r.cost - 0.5 * (1.0 - (-4.0f64).exp())).abs() < 1e-9);
    }

    #[test]
    fn ordering_on_push_push() {
        let minus = solve("push-push", Variant::Minus, 0.02);
        let plus = solve("push-push", Variant::Plus, 0.02);
        let fl = solve("push-push", Variant::FlG, 0.02);
        let report = ordering_check_default(&minus, &plus, &fl);
        assert!(report.passed, "{report:?}");
    }
}

//! Vanishing-viscosity regularization in one dimension:
//! `-η u'' + u + H(x, u') = 0` with no condition imposed on H.
//!
//! Away from the interface node the first-order term is the Godunov split
//! of the local region. At the interface node both regions' nondecreasing
//! branches take D⁻ and both nonincreasing branches take D⁺, which is the
//! split of the upper envelope max(H₁, H₂).

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::fl::{check_bounded, relax, Start, DEFAULT_TOL};
use crate::grid::{Grid, Meta, ValueField, BOX_MARGIN};
use crate::hamiltonian::{in_branch, LineSet, Side};
use crate::scenario::{ControlSample, Region, Scenario};
use crate::Error;

pub const DEFAULT_MAX_ITER: usize = 20_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct ViscousParams {
    pub eta: f64,
    /// Defaults to the stability bound.
    pub tau: Option<f64>,
    pub tol: f64,
    pub max_iter: usize,
    /// Defaults to u = -H(x, 0).
    pub u0: Option<Start>,
}

impl ViscousParams {
    pub fn new(eta: f64) -> Self {
        ViscousParams {
            eta,
            tau: None,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            u0: None,
        }
    }
}

pub fn stability_bound(eta: f64, h: f64, m_b: f64) -> f64 {
    1.0 / (1.0 + 2.0 * eta / (h * h) + 2.0 * m_b / h)
}

/// Upwind branches at every node of a 1-D grid.
#[derive(Debug, Clone)]
pub struct ViscousScheme {
    pub grid: Grid,
    pub eta: f64,
    minus: Vec<LineSet>,
    plus: Vec<LineSet>,
}

impl ViscousScheme {
    pub fn new(scenario: &Scenario, grid: &Grid, eta: f64) -> Result<ViscousScheme, Error> {
        if scenario.dim != 1 || grid.dim != 1 {
            return Err(Error::Usage("the viscous solver is one-dimensional".into()));
        }
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::Usage(format!("eta must be positive, got {eta}")));
        }
        if eta < 0.5 * grid.h {
            log::warn!("eta = {eta} is below h/2 = {}", 0.5 * grid.h);
            return Err(Error::ViscosityUnderResolved { eta, h: grid.h });
        }
        let mut minus = Vec::with_capacity(grid.len());
        let mut plus = Vec::with_capacity(grid.len());
        for k in 0..grid.len() {
            let x = grid.point(k);
            let (m, p) = match grid.region(k) {
                region @ (Region::One | Region::Two) => {
                    let t = scenario.controls_at(region, &x)?;
                    (
                        LineSet::branch(&t, region, Side::Minus, 1),
                        LineSet::branch(&t, region, Side::Plus, 1),
                    )
                }
                Region::Interface => {
                    let r1 = scenario.controls_at(Region::One, &x)?;
                    let r2 = scenario.controls_at(Region::Two, &x)?;
                    let pick = |side: Side| -> Vec<ControlSample> {
                        r1.iter()
                            .filter(|c| in_branch(Region::One, side, c.normal(1)))
                            .chain(r2.iter().filter(|c| in_branch(Region::Two, side, c.normal(1))))
                            .copied()
                            .collect()
                    };
                    (
                        LineSet::new(&pick(Side::Minus), 1, |_| true),
                        LineSet::new(&pick(Side::Plus), 1, |_| true),
                    )
                }
            };
            minus.push(m);
            plus.push(p);
        }
        Ok(ViscousScheme {
            grid: grid.clone(),
            eta,
            minus,
            plus,
        })
    }

    /// Godunov Hamiltonian at node `k` for one-sided differences.
    #[inline]
    pub fn hamiltonian(&self, k: usize, d_minus: f64, d_plus: f64) -> f64 {
        self.minus[k].eval(0.0, d_minus).max(self.plus[k].eval(0.0, d_plus))
    }

    #[inline]
    pub fn residual_at(&self, u: &[f64], k: usize) -> f64 {
        let h = self.grid.h;
        let uk = u[k];
        let left = if k > 0 { u[k - 1] } else { uk };
        let right = if k + 1 < u.len() { u[k + 1] } else { uk };
        let laplacian = (right - 2.0 * uk + left) / (h * h);
        -self.eta * laplacian + uk + self.hamiltonian(k, (uk - left) / h, (right - uk) / h)
    }

    pub fn residual(&self, u: &[f64], out: &mut [f64]) {
        for (k, r) in out.iter_mut().enumerate() {
            *r = self.residual_at(u, k);
        }
    }

    /// -H(x_j, 0) at every node.
    pub fn rest_values(&self) -> Vec<f64> {
        (0..self.grid.len()).map(|k| -self.hamiltonian(k, 0.0, 0.0)).collect()
    }
}

pub fn solve_viscous(scenario: &Scenario, grid: &Grid, params: &ViscousParams) -> Result<ValueField, Error> {
    let started = Instant::now();
    let scheme = ViscousScheme::new(scenario, grid, params.eta)?;
    let bound = stability_bound(params.eta, grid.h, scenario.m_b);
    let tau = match params.tau {
        Some(t) if !(t > 0.0 && t <= bound * (1.0 + 1e-12)) => {
            return Err(Error::CflViolation { tau: t, bound });
        }
        Some(t) => t,
        None => bound,
    };
    let u0 = match &params.u0 {
        Some(start) => start.materialize(grid.len())?,
        None => scheme.rest_values(),
    };
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
            scheme_tag: format!("viscous-eta-{}", params.eta),
            limiter_spec: None,
            runtime_seconds: started.elapsed().as_secs_f64(),
        },
    })
}

/// Constants bracketing every viscous solution: min and max of -H(x_j, 0).
pub fn constant_bounds(scenario: &Scenario, grid: &Grid) -> Result<(f64, f64), Error> {
    let rest = ViscousScheme::new(scenario, grid, grid.h)?.rest_values();
    Ok(rest
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v))))
}

/// |D⁺u(0) − D⁻u(0)| at the interface node.
pub fn kirchhoff_gap(field: &ValueField) -> f64 {
    let g = &field.grid;
    let k = g.mid;
    let u = &field.values;
    ((u[k + 1] - u[k]) / g.h - (u[k] - u[k - 1]) / g.h).abs()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub eta: f64,
    pub sup_error: Option<f64>,
    pub iterations: Option<usize>,
    pub u_at_origin: Option<f64>,
    pub kirchhoff_gap: Option<f64>,
    pub error: Option<String>,
}

/// Sup-distance to `reference` on the margin-trimmed box for each η, in
/// input order. Rows are solved in parallel.
pub fn viscosity_sweep(
    scenario: &Scenario,
    grid: &Grid,
    etas: &[f64],
    reference: &ValueField,
    template: &ViscousParams,
) -> Result<Vec<SweepRow>, Error> {
    if etas.is_empty() {
        return Err(Error::Usage("empty eta list".into()));
    }
    if etas.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::Usage(format!("etas must be nonincreasing, got {etas:?}")));
    }
    if &reference.grid != grid {
        return Err(Error::InvalidGrid("reference field lives on a different grid".into()));
    }
    Ok(etas
        .par_iter()
        .map(|&eta| {
            let params = ViscousParams {
                eta,
                ..template.clone()
            };
            match solve_viscous(scenario, grid, &params) {
                Ok(field) => SweepRow {
                    eta,
                    sup_error: Some(field.sup_distance(reference, BOX_MARGIN)),
                    iterations: Some(field.meta.iterations),
                    u_at_origin: Some(field.at_origin()),
                    kirchhoff_gap: Some(kirchhoff_gap(&field)),
                    error: None,
                },
                Err(e) => SweepRow {
                    eta,
                    sup_error: None,
                    iterations: None,
                    u_at_origin: None,
                    kirchhoff_gap: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect())
}

/// Whether each error is at most (1 + slack) times the previous one.
pub fn nonincreasing_within(errors: &[f64], slack: f64) -> bool {
    errors.windows(2).all(|w| w[1] <= (1.0 + slack) * w[0])
}

//! Junction algebra at a fixed interface point and tangential gradient.
//!
//! Along the normal line s ↦ p' + s e_N the region Hamiltonians reduce to
//! one-variable convex functions:
//!
//! * `h1(s) = H₁`, `h2(s) = H₂` (convex, coercive),
//! * `f1(s) = H₁⁻` (nondecreasing), `f2(s) = H₂⁺` (nonincreasing),
//! * `phi(s) = max(f1, f2)`.
//!
//! From these we get the minima of h1/h2, the flat endpoints m₁ (right end
//! of argmin h1) and m₂ (left end of argmin h2), the leftmost crossing s* of
//! f1 and f2, the configuration case, the two tangential Hamiltonians and the
//! level-A root pair.
//!
//! Every supremum is over sampled controls, so each function above is a
//! maximum of finitely many lines and all searches are on exact piecewise
//! linear functions.

use std::borrow::Cow;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::hamiltonian::{in_branch, Side};
use crate::scenario::{mixed_from_tables, ControlSample, Region, Scenario};

/// Target width of located points.
pub const LOCATION_TOL: f64 = 1e-10;
/// Residual threshold for level sets and crossings.
pub const RESIDUAL_TOL: f64 = 1e-9;
/// Agreement expected between two routes to the same value.
pub const CROSS_CHECK_TOL: f64 = 1e-8;
/// Disagreement above this is reported as an error.
pub const CROSS_CHECK_FAIL: f64 = 1e-6;
/// Tolerance of the case comparisons.
pub const CASE_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum JunctionError {
    #[error("bracket [-{bracket}, {bracket}] too small: {what} reached the edge at s={s}")]
    BracketTooSmall { what: &'static str, s: f64, bracket: f64 },
    #[error(
        "{what}: min-form {min_form} and {other_route} {other} differ by more than {}",
        CROSS_CHECK_FAIL
    )]
    Inconsistent {
        what: &'static str,
        min_form: f64,
        other_route: &'static str,
        other: f64,
    },
    #[error("level {level} must exceed max(underline H1, underline H2) = {floor} by {}", RESIDUAL_TOL)]
    BelowFloor { level: f64, floor: f64 },
    #[error(
        "level roots not ordered: lambda2={lambda2} >= lambda1={lambda1}; levels at or below H_T^reg={ht_reg} do not separate"
    )]
    PairNotOrdered { lambda1: f64, lambda2: f64, ht_reg: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Case {
    Case1,
    Case2,
    Case3,
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// One candidate line `slope * s + intercept` of a normal profile.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Line {
    slope: f64,
    intercept: f64,
    /// b·e_N of the underlying control.
    normal: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Flat {
    pub underline: f64,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone)]
pub struct NormalProfile<'a> {
    pub x: Vec<f64>,
    pub p_tan: f64,
    pub bracket: f64,
    dim: usize,
    r1: Cow<'a, [ControlSample]>,
    r2: Cow<'a, [ControlSample]>,
    lines1: Vec<Line>,
    lines2: Vec<Line>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProfileRow {
    pub s: f64,
    pub f1: f64,
    pub f2: f64,
    pub h1: f64,
    pub h2: f64,
    pub phi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JunctionReport {
    pub underline_h1: f64,
    pub underline_h2: f64,
    pub m1: f64,
    pub m2: f64,
    pub s_star: f64,
    pub case: Case,
    pub ht: f64,
    pub ht_reg: f64,
    pub level: Option<f64>,
    pub lambda1: Option<f64>,
    pub lambda2: Option<f64>,
}

fn lines(table: &[ControlSample], dim: usize, p_tan: f64) -> Vec<Line> {
    table
        .iter()
        .map(|c| {
            let tangential = if dim == 2 { c.b[0] * p_tan } else { 0.0 };
            Line {
                slope: -c.normal(dim),
                intercept: -tangential - c.l,
                normal: c.normal(dim),
            }
        })
        .collect()
}

#[inline]
fn envelope<'l>(lines: impl Iterator<Item = &'l Line>, s: f64) -> f64 {
    lines.fold(f64::NEG_INFINITY, |acc, l| acc.max(l.slope * s + l.intercept))
}

/// Ternary search for the minimum of a convex function on [lo, hi].
fn ternary_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> (f64, f64) {
    while hi - lo > LOCATION_TOL {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if m1 >= m2 || m1 <= lo || m2 >= hi {
            break;
        }
        if f(m1) < f(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    let s = 0.5 * (lo + hi);
    (s, f(s))
}

/// Boundary of a predicate that is false at `outside` and true at `inside`;
/// returns the last point known to satisfy it.
fn bisect_edge(pred: impl Fn(f64) -> bool, mut inside: f64, mut outside: f64) -> f64 {
    while (outside - inside).abs() > LOCATION_TOL {
        let mid = 0.5 * (inside + outside);
        if mid == inside || mid == outside {
            break;
        }
        if pred(mid) {
            inside = mid;
        } else {
            outside = mid;
        }
    }
    inside
}

/// Root of a monotone `g` with `g(lo) < 0 < g(hi)`, driven to the finest
/// representable bracket; returns the endpoint with the smaller residual.
fn bisect_root(g: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let increasing = g(hi) > g(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = g(mid);
        if v == 0.0 {
            return mid;
        }
        if (v < 0.0) == increasing {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if g(lo).abs() <= g(hi).abs() {
        lo
    } else {
        hi
    }
}

impl NormalProfile<'static> {
    /// Profile at `x ∈ H` with brackets sized from the scenario bounds;
    /// `a_max` defaults to 1 + 2·M_l.
    pub fn at(scenario: &Scenario, x: &[f64], p_tan: f64, a_max: Option<f64>) -> Result<Self, crate::Error> {
        if x.len() != scenario.dim || x[scenario.dim - 1] != 0.0 {
            return Err(crate::Error::Usage(format!("{x:?} is not a point of the interface")));
        }
        let r1 = scenario.controls_at(Region::One, x)?;
        let r2 = scenario.controls_at(Region::Two, x)?;
        let mut profile = NormalProfile::from_tables(Cow::Owned(r1), Cow::Owned(r2), scenario.dim, p_tan, None, a_max);
        let scenario_bracket = bracket_size(scenario.m_b, scenario.m_l, scenario.delta_hat, p_tan, a_max);
        profile.bracket = profile.bracket.max(scenario_bracket);
        profile.x = x.to_vec();
        Ok(profile)
    }
}

fn bracket_size(m_b: f64, m_l: f64, delta: f64, p_tan: f64, a_max: Option<f64>) -> f64 {
    let a_max = a_max.unwrap_or(1.0 + 2.0 * m_l);
    (2.0 * m_l + 2.0 * m_b * p_tan.abs() + a_max.abs() + 1.0) / delta
}

impl<'a> NormalProfile<'a> {
    /// Profile over explicit control tables. Without `bracket`, the half-width
    /// is sized from the tables' own bounds so that every minimum, flat and
    /// level up to `a_max` lies inside.
    pub fn from_tables(
        r1: Cow<'a, [ControlSample]>,
        r2: Cow<'a, [ControlSample]>,
        dim: usize,
        p_tan: f64,
        bracket: Option<f64>,
        a_max: Option<f64>,
    ) -> Self {
        let bracket = bracket.unwrap_or_else(|| {
            let mut m_b: f64 = 0.0;
            let mut m_l: f64 = 0.0;
            let mut delta = f64::INFINITY;
            for t in [&r1, &r2] {
                let up = t.iter().map(|c| c.normal(dim)).fold(f64::NEG_INFINITY, f64::max);
                let down = t.iter().map(|c| -c.normal(dim)).fold(f64::NEG_INFINITY, f64::max);
                delta = delta.min(up).min(down);
                for c in t.iter() {
                    m_b = m_b.max((c.b[0] * c.b[0] + c.b[1] * c.b[1]).sqrt());
                    m_l = m_l.max(c.l.abs());
                }
            }
            bracket_size(m_b, m_l, delta.max(1e-3), p_tan, a_max)
        });
        let lines1 = lines(&r1, dim, p_tan);
        let lines2 = lines(&r2, dim, p_tan);
        NormalProfile {
            x: vec![0.0; dim],
            p_tan,
            bracket,
            dim,
            r1,
            r2,
            lines1,
            lines2,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn f1(&self, s: f64) -> f64 {
        envelope(self.lines1.iter().filter(|l| in_branch(Region::One, Side::Minus, l.normal)), s)
    }

    pub fn f2(&self, s: f64) -> f64 {
        envelope(self.lines2.iter().filter(|l| in_branch(Region::Two, Side::Plus, l.normal)), s)
    }

    pub fn h1(&self, s: f64) -> f64 {
        envelope(self.lines1.iter(), s)
    }

    pub fn h2(&self, s: f64) -> f64 {
        envelope(self.lines2.iter(), s)
    }

    pub fn phi(&self, lambda: f64) -> f64 {
        self.f1(lambda).max(self.f2(lambda))
    }

    fn h(&self, i: u8, s: f64) -> f64 {
        if i == 1 {
            self.h1(s)
        } else {
            self.h2(s)
        }
    }

    /// Minimum of h_i and the endpoints of the set where it is attained.
    pub fn underline_and_flat(&self, i: u8) -> Result<Flat, JunctionError> {
        assert!(i == 1 || i == 2, "region index must be 1 or 2");
        let what = if i == 1 { "min of H1" } else { "min of H2" };
        let big = self.bracket;
        let (s_min, underline) = ternary_min(|s| self.h(i, s), -big, big);
        let edge = |s: f64| BracketTooSmall(what, s, big);
        if big - s_min.abs() < 1e-6 * big {
            return Err(edge(s_min));
        }
        let level = underline + RESIDUAL_TOL;
        let pred = |s: f64| self.h(i, s) <= level;
        if pred(big) {
            return Err(edge(big));
        }
        if pred(-big) {
            return Err(edge(-big));
        }
        Ok(Flat {
            underline,
            lo: bisect_edge(pred, s_min, -big),
            hi: bisect_edge(pred, s_min, big),
        })
    }

    pub fn m1(&self) -> Result<f64, JunctionError> {
        Ok(self.underline_and_flat(1)?.hi)
    }

    pub fn m2(&self) -> Result<f64, JunctionError> {
        Ok(self.underline_and_flat(2)?.lo)
    }

    /// Leftmost solution of f1(s) = f2(s).
    pub fn s_star(&self) -> Result<f64, JunctionError> {
        let big = self.bracket;
        let pred = |s: f64| self.f1(s) - self.f2(s) >= -RESIDUAL_TOL;
        if pred(-big) {
            return Err(BracketTooSmall("s*", -big, big));
        }
        if !pred(big) {
            return Err(BracketTooSmall("s*", big, big));
        }
        // Return the first point at which the predicate holds.
        let mut inside = big;
        let mut outside = -big;
        while inside - outside > LOCATION_TOL {
            let mid = 0.5 * (inside + outside);
            if mid <= outside || mid >= inside {
                break;
            }
            if pred(mid) {
                inside = mid;
            } else {
                outside = mid;
            }
        }
        Ok(inside)
    }

    /// H_T^reg = min over s of phi, cross-checked against the case formula.
    pub fn ht_reg(&self) -> Result<f64, JunctionError> {
        let big = self.bracket;
        let (s, value) = ternary_min(|s| self.phi(s), -big, big);
        if big - s.abs() < 1e-6 * big {
            return Err(BracketTooSmall("min of phi", s, big));
        }
        let flat1 = self.underline_and_flat(1)?;
        let flat2 = self.underline_and_flat(2)?;
        let s_star = self.s_star()?;
        let formula = match classify_case(flat1.hi, flat2.lo, s_star) {
            Case::Case1 | Case::Case2 => flat1.underline.max(flat2.underline),
            Case::Case3 => self.phi(s_star),
        };
        check_routes("H_T^reg", value, "case formula", formula)?;
        Ok(value)
    }

    /// Max over all mixed interface controls of {-b_H·p' - l_H}.
    pub fn ht_control_form(&self) -> f64 {
        mixed_from_tables(&self.r1, &self.r2, self.dim)
            .iter()
            .map(|m| -m.b_h[0] * if self.dim == 2 { self.p_tan } else { 0.0 } - m.l_h)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Max over regular mixed interface controls of {-b_H·p' - l_H}.
    pub fn ht_reg_control_form(&self) -> f64 {
        mixed_from_tables(&self.r1, &self.r2, self.dim)
            .iter()
            .filter(|m| m.regular)
            .map(|m| -m.b_h[0] * if self.dim == 2 { self.p_tan } else { 0.0 } - m.l_h)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// H_T by the min-form alone.
    pub fn ht_min_form(&self) -> Result<f64, JunctionError> {
        let big = self.bracket;
        let (s, value) = ternary_min(|s| self.h1(s).max(self.h2(s)), -big, big);
        if big - s.abs() < 1e-6 * big {
            return Err(BracketTooSmall("min of max(H1, H2)", s, big));
        }
        Ok(value)
    }

    /// H_T = min over s of max(h1, h2), cross-checked against the mixed
    /// control enumeration.
    pub fn ht(&self) -> Result<f64, JunctionError> {
        let value = self.ht_min_form()?;
        check_routes("H_T", value, "control form", self.ht_control_form())?;
        Ok(value)
    }

    /// The pair λ₂ < λ₁ with f1(λ₁) = A = f2(λ₂).
    pub fn lambda_pair(&self, level: f64) -> Result<(f64, f64), JunctionError> {
        let flat1 = self.underline_and_flat(1)?;
        let flat2 = self.underline_and_flat(2)?;
        let floor = flat1.underline.max(flat2.underline);
        if !(level > floor + RESIDUAL_TOL) {
            return Err(JunctionError::BelowFloor { level, floor });
        }
        let big = self.bracket;
        if self.f1(big) <= level || self.f2(-big) <= level {
            return Err(BracketTooSmall("level root", big, big));
        }
        let lambda1 = bisect_root(|s| self.f1(s) - level, flat1.hi, big);
        let lambda2 = bisect_root(|s| self.f2(s) - level, -big, flat2.lo);
        for (what, r) in [
            ("f1(lambda1)", self.f1(lambda1) - level),
            ("f2(lambda2)", self.f2(lambda2) - level),
        ] {
            if r.abs() > RESIDUAL_TOL {
                return Err(JunctionError::Inconsistent {
                    what,
                    min_form: level,
                    other_route: "bisection",
                    other: level + r,
                });
            }
        }
        check_routes("H1(lambda1)", level, "H1 at root", self.h1(lambda1))?;
        check_routes("H2(lambda2)", level, "H2 at root", self.h2(lambda2))?;
        if lambda2 >= lambda1 {
            return Err(JunctionError::PairNotOrdered {
                lambda1,
                lambda2,
                ht_reg: self.ht_reg()?,
            });
        }
        Ok((lambda1, lambda2))
    }

    /// Rows (s, f1, f2, h1, h2, phi) on `n` evenly spaced points.
    pub fn profile_export(&self, s_lo: f64, s_hi: f64, n: usize) -> Vec<ProfileRow> {
        assert!(n >= 2, "profile export needs at least two rows");
        (0..n)
            .map(|k| {
                let s = if k + 1 == n {
                    s_hi
                } else {
                    s_lo + (s_hi - s_lo) * k as f64 / (n - 1) as f64
                };
                ProfileRow {
                    s,
                    f1: self.f1(s),
                    f2: self.f2(s),
                    h1: self.h1(s),
                    h2: self.h2(s),
                    phi: self.phi(s),
                }
            })
            .collect()
    }

    pub fn report(&self, level: Option<f64>) -> Result<JunctionReport, JunctionError> {
        let flat1 = self.underline_and_flat(1)?;
        let flat2 = self.underline_and_flat(2)?;
        let s_star = self.s_star()?;
        let (lambda1, lambda2) = match level {
            Some(a) => {
                let (l1, l2) = self.lambda_pair(a)?;
                (Some(l1), Some(l2))
            }
            None => (None, None),
        };
        Ok(JunctionReport {
            underline_h1: flat1.underline,
            underline_h2: flat2.underline,
            m1: flat1.hi,
            m2: flat2.lo,
            s_star,
            case: classify_case(flat1.hi, flat2.lo, s_star),
            ht: self.ht()?,
            ht_reg: self.ht_reg()?,
            level,
            lambda1,
            lambda2,
        })
    }
}

#[allow(non_snake_case)]
fn BracketTooSmall(what: &'static str, s: f64, bracket: f64) -> JunctionError {
    JunctionError::BracketTooSmall { what, s, bracket }
}

fn check_routes(what: &'static str, min_form: f64, other_route: &'static str, other: f64) -> Result<(), JunctionError> {
    let gap = (min_form - other).abs();
    if gap > CROSS_CHECK_FAIL {
        return Err(JunctionError::Inconsistent {
            what,
            min_form,
            other_route,
            other,
        });
    }
    if gap > CROSS_CHECK_TOL {
        log::warn!("{what}: routes differ by {gap:.3e} ({min_form} vs {other_route} {other})");
    }
    Ok(())
}

/// Configuration of (m₁, m₂, s*); ties go to the first matching case.
pub fn classify_case(m1: f64, m2: f64, s_star: f64) -> Case {
    let le = |a: f64, b: f64| a <= b + CASE_TOL;
    if le(s_star, m1) && le(s_star, m2) {
        Case::Case1
    } else if !le(s_star, m1) && le(m2, s_star) {
        Case::Case2
    } else {
        Case::Case3
    }
}

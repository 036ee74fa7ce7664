//! Pointwise Hamiltonians H_i, their sign-restricted branches H_i^±, and the
//! interface flux limiter G.

use std::fmt;
use std::str::FromStr;

use crate::junction::NormalProfile;
use crate::scenario::{ControlSample, Region, Scenario};
use crate::Error;

/// Gradient split into tangential and normal parts. In 1-D `p_tan` is zero.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GradientSplit {
    pub p_tan: f64,
    pub p_n: f64,
}

impl GradientSplit {
    pub fn new(p_tan: f64, p_n: f64) -> Self {
        GradientSplit { p_tan, p_n }
    }

    pub fn normal(p_n: f64) -> Self {
        GradientSplit { p_tan: 0.0, p_n }
    }

    /// Full gradient in coordinate order (tangential first, normal last).
    pub fn full(&self, dim: usize) -> [f64; 2] {
        if dim == 1 {
            [self.p_n, 0.0]
        } else {
            [self.p_tan, self.p_n]
        }
    }
}

/// A supremum over sampled controls. `value` is `-inf` only when the
/// restricted control set is empty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HamValue {
    pub value: f64,
    pub argmax_control: Option<usize>,
}

impl HamValue {
    pub const EMPTY: HamValue = HamValue {
        value: f64::NEG_INFINITY,
        argmax_control: None,
    };

    pub fn is_empty(&self) -> bool {
        self.argmax_control.is_none()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Minus,
    Plus,
}

/// Sign filter of the restricted Hamiltonians:
/// H₁⁻: b·e_N ≤ 0, H₁⁺: b·e_N > 0, H₂⁺: b·e_N ≥ 0, H₂⁻: b·e_N < 0.
#[inline]
pub fn in_branch(region: Region, side: Side, normal: f64) -> bool {
    match (region, side) {
        (Region::One, Side::Minus) => normal <= 0.0,
        (Region::One, Side::Plus) => normal > 0.0,
        (Region::Two, Side::Plus) => normal >= 0.0,
        (Region::Two, Side::Minus) => normal < 0.0,
        (Region::Interface, _) => false,
    }
}

/// max over `table` of {-b·p - l}; first maximizer wins ties.
pub fn sup_affine<'a, I>(table: I, p: [f64; 2]) -> HamValue
where
    I: IntoIterator<Item = (usize, &'a ControlSample)>,
{
    let mut best = HamValue::EMPTY;
    for (k, c) in table {
        let v = -c.b[0] * p[0] - c.b[1] * p[1] - c.l;
        if v > best.value || best.argmax_control.is_none() {
            best = HamValue {
                value: v,
                argmax_control: Some(k),
            };
        }
    }
    best
}

/// Value-only supremum used in the solver inner loops.
#[inline]
pub fn sup_value(table: &[ControlSample], p: [f64; 2]) -> f64 {
    table
        .iter()
        .map(|c| -c.b[0] * p[0] - c.b[1] * p[1] - c.l)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Samples of `table` belonging to the `side` branch of `region`.
pub fn branch_table(table: &[ControlSample], region: Region, side: Side, dim: usize) -> Vec<ControlSample> {
    table
        .iter()
        .filter(|c| in_branch(region, side, c.normal(dim)))
        .copied()
        .collect()
}

fn region_table(scenario: &Scenario, region: Region, x: &[f64]) -> Result<Vec<ControlSample>, Error> {
    if region == Region::Interface {
        return Err(Error::Usage("Hamiltonians are defined for regions 1 and 2".into()));
    }
    Ok(scenario.controls_at(region, x)?)
}

/// H_i(x, p) = max over sampled controls of {-b_i·p - l_i}.
pub fn ham(scenario: &Scenario, region: Region, x: &[f64], p: GradientSplit) -> Result<HamValue, Error> {
    let table = region_table(scenario, region, x)?;
    Ok(sup_affine(table.iter().enumerate(), p.full(scenario.dim)))
}

/// H_i^± with the sign convention of [`in_branch`]; `-inf` when no sample
/// qualifies.
pub fn ham_restricted(
    scenario: &Scenario,
    region: Region,
    side: Side,
    x: &[f64],
    p: GradientSplit,
) -> Result<HamValue, Error> {
    let table = region_table(scenario, region, x)?;
    let dim = scenario.dim;
    Ok(sup_affine(
        table
            .iter()
            .enumerate()
            .filter(|(_, c)| in_branch(region, side, c.normal(dim))),
        p.full(dim),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FluxLimiter {
    None,
    Constant(f64),
    InterfaceControls,
    Ht,
    HtReg,
}

impl fmt::Display for FluxLimiter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FluxLimiter::None => write!(f, "none"),
            FluxLimiter::Constant(c) => write!(f, "const:{c}"),
            FluxLimiter::InterfaceControls => write!(f, "interface"),
            FluxLimiter::Ht => write!(f, "ht"),
            FluxLimiter::HtReg => write!(f, "htreg"),
        }
    }
}

impl FromStr for FluxLimiter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "none" => Ok(FluxLimiter::None),
            "interface" => Ok(FluxLimiter::InterfaceControls),
            "ht" => Ok(FluxLimiter::Ht),
            "htreg" => Ok(FluxLimiter::HtReg),
            _ => match s.strip_prefix("const:").map(str::parse::<f64>) {
                Some(Ok(c)) if c.is_finite() => Ok(FluxLimiter::Constant(c)),
                _ => Err(Error::Usage(format!(
                    "unknown limiter `{s}` (expected none|const:c|interface|ht|htreg)"
                ))),
            },
        }
    }
}

/// G(x, p_tan) for a point of H; `-inf` for [`FluxLimiter::None`].
pub fn flux_limiter(scenario: &Scenario, spec: FluxLimiter, x: &[f64], p_tan: f64) -> Result<f64, Error> {
    match spec {
        FluxLimiter::None => Ok(f64::NEG_INFINITY),
        FluxLimiter::Constant(c) => Ok(c),
        FluxLimiter::InterfaceControls => {
            let table = scenario.controls_at(Region::Interface, x)?;
            Ok(sup_value(&table, [p_tan, 0.0]))
        }
        FluxLimiter::Ht => Ok(NormalProfile::at(scenario, x, p_tan, None)?.ht()?),
        FluxLimiter::HtReg => Ok(NormalProfile::at(scenario, x, p_tan, None)?.ht_reg()?),
    }
}

/// (M_b, M_l) as sampled at load time.
pub fn bounds_for_cfl(scenario: &Scenario) -> (f64, f64) {
    (scenario.m_b, scenario.m_l)
}

/// Affine pieces `-b_tan·p_tan - b_n·p_n - l` of a restricted Hamiltonian,
/// stored for repeated evaluation. In 1-D only the upper envelope is kept.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LineSet {
    lines: Vec<[f64; 3]>,
}

impl LineSet {
    pub fn new(table: &[ControlSample], dim: usize, keep: impl Fn(&ControlSample) -> bool) -> Self {
        let mut lines: Vec<[f64; 3]> = table
            .iter()
            .filter(|c| keep(c))
            .map(|c| {
                if dim == 1 {
                    [0.0, c.b[0], c.l]
                } else {
                    [c.b[0], c.b[1], c.l]
                }
            })
            .collect();
        if dim == 1 {
            lines = upper_envelope(lines);
        }
        LineSet { lines }
    }

    pub fn branch(table: &[ControlSample], region: Region, side: Side, dim: usize) -> Self {
        LineSet::new(table, dim, |c| in_branch(region, side, c.normal(dim)))
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }

    pub fn len(&self) -> usize {
        self.lines.len()
    }

    #[inline]
    pub fn eval(&self, p_tan: f64, p_n: f64) -> f64 {
        let mut best = f64::NEG_INFINITY;
        for l in &self.lines {
            let v = -l[0] * p_tan - l[1] * p_n - l[2];
            if v > best {
                best = v;
            }
        }
        best
    }
}

/// Lines (0, b_n, l) of p ↦ -b_n·p - l reduced to those on the upper envelope.
fn upper_envelope(mut lines: Vec<[f64; 3]>) -> Vec<[f64; 3]> {
    // Slope -b_n ascending; for equal slopes the largest intercept -l first.
    lines.sort_by(|a, b| b[1].total_cmp(&a[1]).then(a[2].total_cmp(&b[2])));
    lines.dedup_by(|next, kept| next[1] == kept[1]);
    let slope = |l: &[f64; 3]| -l[1];
    let icpt = |l: &[f64; 3]| -l[2];
    let mut hull: Vec<[f64; 3]> = Vec::with_capacity(lines.len());
    for l in lines {
        while hull.len() >= 2 {
            let a = hull[hull.len() - 2];
            let b = hull[hull.len() - 1];
            // b is useless if l overtakes a no later than b does.
            let lhs = (icpt(&a) - icpt(&l)) * (slope(&b) - slope(&a));
            let rhs = (icpt(&a) - icpt(&b)) * (slope(&l) - slope(&a));
            if lhs <= rhs {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(l);
    }
    hull
}

//! Two-region control problems: Ω₁ = {x_N > 0}, Ω₂ = {x_N < 0}, interface
//! H = {x_N = 0}.
//!
//! Control sets are sampled (uniform grids or explicit lists); every supremum
//! over controls elsewhere in the crate is a maximum over these samples.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::expr::{EvalError, Expression, ParseError};

/// Nodes per axis of the lattice used for bounds and controllability.
pub const VALIDATION_NODES: usize = 41;
/// Scenarios whose estimated controllability radius is below this are rejected.
pub const MIN_CONTROLLABILITY: f64 = 1e-3;
/// Number of unit directions probed in 2-D.
pub const DIRECTIONS_2D: usize = 64;
/// Tolerance on the normal component of mixed interface dynamics.
pub const MIXED_NORMAL_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("scenario schema: {0}")]
    Schema(String),
    #[error("scenario not found: {0}")]
    NotFound(String),
    #[error("{field}: {source}")]
    Parse {
        field: String,
        #[source]
        source: ParseError,
    },
    #[error("{field} at x={x:?}, a={a:?}: {source}")]
    Eval {
        field: String,
        x: Vec<f64>,
        a: Vec<f64>,
        #[source]
        source: EvalError,
    },
    #[error(
        "controllability failure in region {region}: radius {radius:.3e} along direction {direction:?} at x={x:?}"
    )]
    Controllability {
        region: u8,
        radius: f64,
        direction: Vec<f64>,
        x: Vec<f64>,
    },
    #[error("no interface controls")]
    NoInterfaceControls,
    #[error("point {x:?} invalid: {reason}")]
    InvalidPoint { x: Vec<f64>, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Region {
    Interface,
    One,
    Two,
}

impl Region {
    pub fn id(self) -> u8 {
        match self {
            Region::Interface => 0,
            Region::One => 1,
            Region::Two => 2,
        }
    }

    /// Region containing `x`, with points of H reported as `Interface`.
    pub fn of_point(x: &[f64]) -> Region {
        let xn = x[x.len() - 1];
        if xn > 0.0 {
            Region::One
        } else if xn < 0.0 {
            Region::Two
        } else {
            Region::Interface
        }
    }
}

/// One tabulated control: dynamics `b` (unused trailing entries are zero)
/// and running cost `l`. For interface controls `b` is tangential.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlSample {
    pub b: [f64; 2],
    pub l: f64,
}

impl ControlSample {
    #[inline]
    pub fn normal(&self, dim: usize) -> f64 {
        self.b[dim - 1]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ControlSet {
    Box {
        bounds: Vec<[f64; 2]>,
        samples: Vec<usize>,
    },
    Finite(Vec<Vec<f64>>),
}

impl ControlSet {
    pub fn arity(&self) -> usize {
        match self {
            ControlSet::Box { bounds, .. } => bounds.len(),
            ControlSet::Finite(list) => list.first().map_or(0, Vec::len),
        }
    }

    fn validate(&self) -> Result<(), ScenarioError> {
        match self {
            ControlSet::Box { bounds, samples } => {
                if bounds.is_empty() {
                    return Err(ScenarioError::Schema("control box has no dimensions".into()));
                }
                if bounds.len() != samples.len() {
                    return Err(ScenarioError::Schema(format!(
                        "control box has {} intervals but {} sample counts",
                        bounds.len(),
                        samples.len()
                    )));
                }
                if let Some(n) = samples.iter().find(|&&n| n < 2) {
                    return Err(ScenarioError::Schema(format!(
                        "sample count {n} < 2 in control box"
                    )));
                }
                if let Some(b) = bounds.iter().find(|b| !(b[0] <= b[1]) || !b[0].is_finite() || !b[1].is_finite()) {
                    return Err(ScenarioError::Schema(format!("bad control interval {b:?}")));
                }
            }
            ControlSet::Finite(list) => {
                if list.is_empty() {
                    return Err(ScenarioError::Schema("empty control list".into()));
                }
                let k = list[0].len();
                if k == 0 || list.iter().any(|c| c.len() != k) {
                    return Err(ScenarioError::Schema(
                        "control list entries must share a nonzero length".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Sample controls: uniform inclusive grid in row-major order (last
    /// component varies fastest), or the explicit list as given.
    pub fn enumerate(&self) -> Vec<Vec<f64>> {
        match self {
            ControlSet::Finite(list) => list.clone(),
            ControlSet::Box { bounds, samples } => {
                let total: usize = samples.iter().product();
                let mut out = Vec::with_capacity(total);
                for flat in 0..total {
                    let mut rem = flat;
                    let mut a = vec![0.0; bounds.len()];
                    for k in (0..bounds.len()).rev() {
                        let n = samples[k];
                        let i = rem % n;
                        rem /= n;
                        let [lo, hi] = bounds[k];
                        a[k] = if i + 1 == n {
                            hi
                        } else {
                            lo + (hi - lo) * i as f64 / (n - 1) as f64
                        };
                    }
                    out.push(a);
                }
                out
            }
        }
    }
}

// Serialized schema.

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ControlsConfig {
    Box {
        #[serde(rename = "box")]
        bounds: Vec<[f64; 2]>,
        samples: Vec<usize>,
    },
    List {
        list: Vec<Vec<f64>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionConfig {
    pub controls: ControlsConfig,
    #[serde(default)]
    pub dynamics: Vec<String>,
    pub cost: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub dim: usize,
    pub box_halfwidth: f64,
    pub region1: RegionConfig,
    pub region2: RegionConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interface: Option<RegionConfig>,
}

impl ScenarioConfig {
    /// Hex SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_value(self)
            .and_then(|v| serde_json::to_string(&v))
            .expect("scenario config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Debug, Clone)]
pub struct RegionSpec {
    pub control_set: ControlSet,
    pub controls: Vec<Vec<f64>>,
    pub dynamics: Vec<Expression>,
    pub cost: Expression,
}

impl RegionSpec {
    fn from_config(
        label: &str,
        cfg: &RegionConfig,
        dim: usize,
        dynamics_len: usize,
    ) -> Result<Self, ScenarioError> {
        let control_set = match &cfg.controls {
            ControlsConfig::Box { bounds, samples } => ControlSet::Box {
                bounds: bounds.clone(),
                samples: samples.clone(),
            },
            ControlsConfig::List { list } => ControlSet::Finite(list.clone()),
        };
        control_set.validate()?;
        let arity = control_set.arity();
        if cfg.dynamics.len() != dynamics_len {
            return Err(ScenarioError::Schema(format!(
                "{label}.dynamics has {} components, expected {dynamics_len}",
                cfg.dynamics.len()
            )));
        }
        let parse = |field: String, text: &str| {
            Expression::parse(text, dim, arity)
                .map_err(|source| ScenarioError::Parse { field, source })
        };
        let dynamics = cfg
            .dynamics
            .iter()
            .enumerate()
            .map(|(k, text)| parse(format!("{label}.dynamics[{k}]"), text))
            .collect::<Result<Vec<_>, _>>()?;
        let cost = parse(format!("{label}.cost"), &cfg.cost)?;
        Ok(RegionSpec {
            controls: control_set.enumerate(),
            control_set,
            dynamics,
            cost,
        })
    }

    fn tabulate(&self, label: &str, x: &[f64]) -> Result<Vec<ControlSample>, ScenarioError> {
        self.controls
            .iter()
            .map(|a| {
                let mut b = [0.0; 2];
                for (k, e) in self.dynamics.iter().enumerate() {
                    b[k] = e.evaluate(x, a).map_err(|source| ScenarioError::Eval {
                        field: format!("{label}.dynamics[{k}]"),
                        x: x.to_vec(),
                        a: a.clone(),
                        source,
                    })?;
                }
                let l = self.cost.evaluate(x, a).map_err(|source| ScenarioError::Eval {
                    field: format!("{label}.cost"),
                    x: x.to_vec(),
                    a: a.clone(),
                    source,
                })?;
                Ok(ControlSample { b, l })
            })
            .collect()
    }
}

/// A mixed interface control: region-1 and region-2 samples combined with
/// weight `mu` so that the normal velocity vanishes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixedControl {
    pub alpha1_index: usize,
    pub alpha2_index: usize,
    pub mu: f64,
    pub b_h: [f64; 2],
    pub l_h: f64,
    pub regular: bool,
}

impl MixedControl {
    /// Neither component leaves H on its own side.
    pub fn is_singular(&self) -> bool {
        !self.regular
    }
}

/// All admissible mixtures of the tabulated region controls at a point of H.
pub fn mixed_from_tables(
    r1: &[ControlSample],
    r2: &[ControlSample],
    dim: usize,
) -> Vec<MixedControl> {
    let mut out = Vec::new();
    for (i, c1) in r1.iter().enumerate() {
        let n1 = c1.normal(dim);
        for (j, c2) in r2.iter().enumerate() {
            let n2 = c2.normal(dim);
            let regular = n1 <= 0.0 && n2 >= 0.0;
            let mut push = |mu: f64| {
                let mut b_h = [0.0; 2];
                for k in 0..dim {
                    b_h[k] = mu * c1.b[k] + (1.0 - mu) * c2.b[k];
                }
                debug_assert!(b_h[dim - 1].abs() <= MIXED_NORMAL_TOL);
                b_h[dim - 1] = 0.0;
                out.push(MixedControl {
                    alpha1_index: i,
                    alpha2_index: j,
                    mu,
                    b_h,
                    l_h: mu * c1.l + (1.0 - mu) * c2.l,
                    regular,
                });
            };
            if n1 == 0.0 && n2 == 0.0 {
                // l_H is affine in mu: the endpoints carry its extremes.
                push(0.0);
                push(1.0);
            } else if n1 != n2 {
                let mu = n2 / (n2 - n1);
                if (0.0..=1.0).contains(&mu) {
                    push(mu);
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub dim: usize,
    pub box_halfwidth: f64,
    pub region1: RegionSpec,
    pub region2: RegionSpec,
    pub interface: Option<RegionSpec>,
    /// max |b_i| over the validation lattice, i = 0, 1, 2.
    pub m_b: f64,
    /// max |l_i| over the validation lattice, i = 0, 1, 2.
    pub m_l: f64,
    /// Smallest estimated controllability radius over both regions.
    pub delta_hat: f64,
    config: ScenarioConfig,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let config: ScenarioConfig =
            serde_json::from_str(text).map_err(|e| ScenarioError::Schema(e.to_string()))?;
        Self::from_config(config)
    }

    pub fn from_config(config: ScenarioConfig) -> Result<Self, ScenarioError> {
        let dim = config.dim;
        if !(1..=2).contains(&dim) {
            return Err(ScenarioError::Schema(format!("dim must be 1 or 2, got {dim}")));
        }
        if !(config.box_halfwidth > 0.0 && config.box_halfwidth.is_finite()) {
            return Err(ScenarioError::Schema(format!(
                "box_halfwidth must be positive, got {}",
                config.box_halfwidth
            )));
        }
        let region1 = RegionSpec::from_config("region1", &config.region1, dim, dim)?;
        let region2 = RegionSpec::from_config("region2", &config.region2, dim, dim)?;
        let interface = config
            .interface
            .as_ref()
            .map(|cfg| RegionSpec::from_config("interface", cfg, dim, dim - 1))
            .transpose()?;

        let mut scenario = Scenario {
            name: config.name.clone(),
            dim,
            box_halfwidth: config.box_halfwidth,
            region1,
            region2,
            interface,
            m_b: 0.0,
            m_l: 0.0,
            delta_hat: f64::INFINITY,
            config,
        };
        scenario.compute_bounds()?;
        Ok(scenario)
    }

    pub fn builtin(name: &str) -> Result<Self, ScenarioError> {
        let config = builtin_config(name).ok_or_else(|| ScenarioError::NotFound(name.into()))?;
        Self::from_config(config)
    }

    /// Resolves a built-in name or reads a JSON file.
    pub fn resolve(name_or_path: &str) -> Result<Self, ScenarioError> {
        if let Some(config) = builtin_config(name_or_path) {
            return Self::from_config(config);
        }
        match std::fs::read_to_string(name_or_path) {
            Ok(text) => Self::from_json(&text),
            Err(_) => Err(ScenarioError::NotFound(name_or_path.into())),
        }
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn normal_index(&self) -> usize {
        self.dim - 1
    }

    fn region_spec(&self, region: Region) -> Result<&RegionSpec, ScenarioError> {
        match region {
            Region::One => Ok(&self.region1),
            Region::Two => Ok(&self.region2),
            Region::Interface => self.interface.as_ref().ok_or(ScenarioError::NoInterfaceControls),
        }
    }

    fn check_point(&self, region: Region, x: &[f64]) -> Result<(), ScenarioError> {
        let bad = |reason: &str| ScenarioError::InvalidPoint {
            x: x.to_vec(),
            reason: reason.to_string(),
        };
        if x.len() != self.dim {
            return Err(bad("wrong dimension"));
        }
        let slack = 1e-9 * self.box_halfwidth;
        if x.iter().any(|c| !(c.abs() <= self.box_halfwidth + slack)) {
            return Err(bad("outside the computational box"));
        }
        let xn = x[self.dim - 1];
        match region {
            Region::One if xn < 0.0 => Err(bad("not in the closure of region 1")),
            Region::Two if xn > 0.0 => Err(bad("not in the closure of region 2")),
            Region::Interface if xn != 0.0 => Err(bad("not on the interface")),
            _ => Ok(()),
        }
    }

    /// Tabulated (b, l) for every control sample, in enumeration order.
    pub fn controls_at(&self, region: Region, x: &[f64]) -> Result<Vec<ControlSample>, ScenarioError> {
        let spec = self.region_spec(region)?;
        self.check_point(region, x)?;
        let label = match region {
            Region::One => "region1",
            Region::Two => "region2",
            Region::Interface => "interface",
        };
        spec.tabulate(label, x)
    }

    /// min over probe directions d of max over samples of b·d.
    pub fn controllability_radius(&self, region: Region, x: &[f64]) -> Result<f64, ScenarioError> {
        let table = self.controls_at(region, x)?;
        Ok(radius_and_direction(&table, self.dim).0)
    }

    pub fn mixed_interface_controls(&self, x: &[f64]) -> Result<Vec<MixedControl>, ScenarioError> {
        self.check_point(Region::Interface, x)?;
        let r1 = self.controls_at(Region::One, x)?;
        let r2 = self.controls_at(Region::Two, x)?;
        Ok(mixed_from_tables(&r1, &r2, self.dim))
    }

    /// Nodes of the validation lattice in the closure of `region`.
    pub fn validation_points(&self, region: Region) -> Vec<Vec<f64>> {
        let n = VALIDATION_NODES;
        let half = (n - 1) / 2;
        let coord = |k: usize| (k as f64 - half as f64) / half as f64 * self.box_halfwidth;
        let mut pts = Vec::new();
        match self.dim {
            1 => {
                for k in 0..n {
                    pts.push(vec![coord(k)]);
                }
            }
            _ => {
                for j in 0..n {
                    for i in 0..n {
                        pts.push(vec![coord(i), coord(j)]);
                    }
                }
            }
        }
        pts.retain(|x| {
            let xn = x[self.dim - 1];
            match region {
                Region::One => xn >= 0.0,
                Region::Two => xn <= 0.0,
                Region::Interface => xn == 0.0,
            }
        });
        pts
    }

    fn compute_bounds(&mut self) -> Result<(), ScenarioError> {
        let mut m_b: f64 = 0.0;
        let mut m_l: f64 = 0.0;
        let mut delta = f64::INFINITY;
        let mut regions = vec![Region::One, Region::Two];
        if self.interface.is_some() {
            regions.push(Region::Interface);
        }
        for region in regions {
            for x in self.validation_points(region) {
                let table = self.controls_at(region, &x)?;
                for c in &table {
                    m_b = m_b.max(c.b.iter().map(|v| v * v).sum::<f64>().sqrt());
                    m_l = m_l.max(c.l.abs());
                }
                if region != Region::Interface {
                    let (radius, direction) = radius_and_direction(&table, self.dim);
                    if radius <= MIN_CONTROLLABILITY {
                        return Err(ScenarioError::Controllability {
                            region: region.id(),
                            radius,
                            direction,
                            x,
                        });
                    }
                    delta = delta.min(radius);
                }
            }
        }
        self.m_b = m_b;
        self.m_l = m_l;
        self.delta_hat = delta;
        Ok(())
    }
}

fn probe_directions(dim: usize) -> Vec<[f64; 2]> {
    match dim {
        1 => vec![[-1.0, 0.0], [1.0, 0.0]],
        _ => (0..DIRECTIONS_2D)
            .map(|k| {
                let t = 2.0 * std::f64::consts::PI * k as f64 / DIRECTIONS_2D as f64;
                [t.cos(), t.sin()]
            })
            .collect(),
    }
}

fn radius_and_direction(table: &[ControlSample], dim: usize) -> (f64, Vec<f64>) {
    let mut worst = (f64::INFINITY, vec![]);
    for d in probe_directions(dim) {
        let reach = table
            .iter()
            .map(|c| c.b[0] * d[0] + c.b[1] * d[1])
            .fold(f64::NEG_INFINITY, f64::max);
        if reach < worst.0 {
            worst = (reach, d[..dim].to_vec());
        }
    }
    worst
}

/// Names of the embedded scenarios.
pub const BUILTIN_NAMES: [&str; 3] = ["push-push", "fading-reward", "constant-cost"];

/// Control samples per axis used by the embedded scenarios.
pub const BUILTIN_SAMPLES: usize = 21;

pub fn builtin_config(name: &str) -> Option<ScenarioConfig> {
    builtin_config_with_samples(name, BUILTIN_SAMPLES)
}

/// Embedded scenario with `samples` controls on [-1, 1].
pub fn builtin_config_with_samples(name: &str, samples: usize) -> Option<ScenarioConfig> {
    let region = |dynamics: &str, cost: &str| RegionConfig {
        controls: ControlsConfig::Box {
            bounds: vec![[-1.0, 1.0]],
            samples: vec![samples],
        },
        dynamics: vec![dynamics.to_string()],
        cost: cost.to_string(),
    };
    let (r1, r2, halfwidth) = match name {
        "push-push" => (region("a1", "a1"), region("a1", "-a1"), 1.0),
        // Wider box: optimal trajectories run outward and must not feel the
        // box edge near the interface.
        "fading-reward" => (
            region("a1", "-a1*exp(-x1)"),
            region("a1", "a1*exp(x1)"),
            2.0,
        ),
        "constant-cost" => (region("a1", "0.5"), region("0.5*a1", "0.5"), 1.0),
        _ => return None,
    };
    Some(ScenarioConfig {
        name: name.to_string(),
        dim: 1,
        box_halfwidth: halfwidth,
        region1: r1,
        region2: r2,
        interface: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn with_samples(name: &str, n: usize) -> Scenario {
        Scenario::from_config(builtin_config_with_samples(name, n).unwrap()).unwrap()
    }

    #[test]
    fn push_push_bounds() {
        let s = Scenario::builtin("push-push").unwrap();
        assert_eq!(s.m_b, 1.0);
        assert_eq!(s.m_l, 1.0);
        assert_eq!(s.delta_hat, 1.0);
    }

    #[test]
    fn fading_reward_bounds_by_brute_force() {
        let s = Scenario::builtin("fading-reward").unwrap();
        // Independent sweep: each region over its own closed half-box.
        let mut m_l: f64 = 0.0;
        for k in 0..=40 {
            let x = -2.0 + 4.0 * k as f64 / 40.0;
            for j in 0..=20 {
                let a = -1.0 + 2.0 * j as f64 / 20.0;
                if x >= 0.0 {
                    m_l = m_l.max((a * (-x).exp()).abs());
                }
                if x <= 0.0 {
                    m_l = m_l.max((a * x.exp()).abs());
                }
            }
        }
        assert_eq!(m_l, 1.0);
        assert!((s.m_l - m_l).abs() < 1e-15);
        assert_eq!(s.m_b, 1.0);
    }

    #[test]
    fn zero_dynamics_fail_controllability() {
        let mut cfg = builtin_config("push-push").unwrap();
        cfg.region1.dynamics = vec!["0".into()];
        match Scenario::from_config(cfg) {
            Err(ScenarioError::Controllability { region: 1, radius, .. }) => assert_eq!(radius, 0.0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn controls_at_push_push() {
        let s = with_samples("push-push", 5);
        let t = s.controls_at(Region::One, &[0.0]).unwrap();
        let got: Vec<(f64, f64)> = t.iter().map(|c| (c.b[0], c.l)).collect();
        assert_eq!(
            got,
            vec![(-1.0, -1.0), (-0.5, -0.5), (0.0, 0.0), (0.5, 0.5), (1.0, 1.0)]
        );
        assert_eq!(t, s.controls_at(Region::One, &[0.0]).unwrap());
        assert!(matches!(
            s.controls_at(Region::Interface, &[0.0]),
            Err(ScenarioError::NoInterfaceControls)
        ));
        assert!(s.controls_at(Region::One, &[-0.5]).is_err());
        assert!(s.controls_at(Region::Two, &[3.0]).is_err());
    }

    #[test]
    fn controls_at_fading_reward() {
        let s = Scenario::builtin("fading-reward").unwrap();
        let t = s.controls_at(Region::One, &[1.0]).unwrap();
        for (c, a) in t.iter().zip(&s.region1.controls) {
            assert!((c.l - (-a[0] * (-1.0f64).exp())).abs() < 1e-15);
        }
    }

    #[test]
    fn controllability_radius_examples() {
        let s = Scenario::builtin("push-push").unwrap();
        assert_eq!(s.controllability_radius(Region::One, &[0.3]).unwrap(), 1.0);
        let mut cfg = builtin_config("push-push").unwrap();
        cfg.region1.dynamics = vec!["0.5*a1".into()];
        let s = Scenario::from_config(cfg).unwrap();
        assert_eq!(s.controllability_radius(Region::One, &[0.3]).unwrap(), 0.5);
        assert_eq!(s.delta_hat, 0.5);
    }

    #[test]
    fn box_enumeration_is_row_major() {
        let set = ControlSet::Box {
            bounds: vec![[0.0, 1.0], [-1.0, 1.0]],
            samples: vec![2, 3],
        };
        assert_eq!(
            set.enumerate(),
            vec![
                vec![0.0, -1.0],
                vec![0.0, 0.0],
                vec![0.0, 1.0],
                vec![1.0, -1.0],
                vec![1.0, 0.0],
                vec![1.0, 1.0]
            ]
        );
    }

    #[test]
    fn mixed_controls_examples() {
        let s = with_samples("push-push", 5);
        let mixed = s.mixed_interface_controls(&[0.0]).unwrap();
        // a1 = -1 is index 0, a1 = +1 is index 4.
        let m = mixed
            .iter()
            .find(|m| m.alpha1_index == 0 && m.alpha2_index == 4)
            .unwrap();
        assert_eq!((m.mu, m.b_h[0], m.l_h, m.regular), (0.5, 0.0, -1.0, true));
        let m = mixed
            .iter()
            .find(|m| m.alpha1_index == 4 && m.alpha2_index == 0)
            .unwrap();
        assert_eq!((m.mu, m.l_h, m.regular), (0.5, 1.0, false));
        // Both normals zero: both endpoints of mu.
        let both: Vec<_> = mixed
            .iter()
            .filter(|m| m.alpha1_index == 2 && m.alpha2_index == 2)
            .map(|m| m.mu)
            .collect();
        assert_eq!(both, vec![0.0, 1.0]);

        let same = [ControlSample { b: [0.3, 0.0], l: 0.0 }];
        assert!(mixed_from_tables(&same, &same, 1).is_empty());
    }

    #[test]
    fn mixed_control_minima_by_enumeration() {
        let s = Scenario::builtin("push-push").unwrap();
        let mixed = s.mixed_interface_controls(&[0.0]).unwrap();
        let min_all = mixed.iter().map(|m| m.l_h).fold(f64::INFINITY, f64::min);
        let min_reg = mixed
            .iter()
            .filter(|m| m.regular)
            .map(|m| m.l_h)
            .fold(f64::INFINITY, f64::min);
        assert_eq!((min_all, min_reg), (-1.0, -1.0));

        let s = Scenario::builtin("fading-reward").unwrap();
        let r1 = s.controls_at(Region::One, &[0.0]).unwrap();
        let r2 = s.controls_at(Region::Two, &[0.0]).unwrap();
        let mixed = s.mixed_interface_controls(&[0.0]).unwrap();
        let min_all = mixed.iter().map(|m| m.l_h).fold(f64::INFINITY, f64::min);
        let min_reg = mixed
            .iter()
            .filter(|m| m.regular)
            .map(|m| m.l_h)
            .fold(f64::INFINITY, f64::min);
        assert_eq!((min_all, min_reg), (-1.0, 0.0));
        for m in &mixed {
            assert!(m.b_h[0].abs() <= MIXED_NORMAL_TOL);
            let n1 = r1[m.alpha1_index].b[0];
            let n2 = r2[m.alpha2_index].b[0];
            assert_eq!(m.regular, n1 <= 0.0 && n2 >= 0.0);
        }
    }

    #[test]
    fn schema_errors() {
        assert!(matches!(Scenario::from_json("{}"), Err(ScenarioError::Schema(_))));
        let mut cfg = builtin_config("push-push").unwrap();
        cfg.region2.cost = "a1 +".into();
        assert!(matches!(Scenario::from_config(cfg), Err(ScenarioError::Parse { .. })));
        let mut cfg = builtin_config("push-push").unwrap();
        cfg.dim = 3;
        assert!(Scenario::from_config(cfg).is_err());
        let mut cfg = builtin_config("push-push").unwrap();
        cfg.region1.controls = ControlsConfig::Box {
            bounds: vec![[-1.0, 1.0]],
            samples: vec![1],
        };
        assert!(Scenario::from_config(cfg).is_err());
        assert!(matches!(
            Scenario::resolve("missing-scenario"),
            Err(ScenarioError::NotFound(_))
        ));
    }

    #[test]
    fn json_round_trip_and_interface() {
        let text = r#"{
            "name": "two-d",
            "dim": 2,
            "box_halfwidth": 1.0,
            "region1": {"controls": {"box": [[-1,1],[-1,1]], "samples": [5,5]},
                        "dynamics": ["a1", "a2"], "cost": "1 + 0*x1"},
            "region2": {"controls": {"list": [[1,0],[-1,0],[0,1],[0,-1],[0,0]]},
                        "dynamics": ["a1", "a2"], "cost": "x2"},
            "interface": {"controls": {"list": [[-1],[1]]}, "dynamics": ["a1"], "cost": "0.25"}
        }"#;
        let s = Scenario::from_json(text).unwrap();
        assert_eq!(s.dim, 2);
        assert_eq!(s.m_l, 1.0);
        assert_eq!(s.delta_hat, (2.0 * std::f64::consts::PI * 8.0 / 64.0).cos().min(1.0));
        let t = s.controls_at(Region::Interface, &[0.5, 0.0]).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!((t[0].b, t[0].l), ([-1.0, 0.0], 0.25));
        let again = Scenario::from_json(&serde_json::to_string(s.config()).unwrap()).unwrap();
        assert_eq!(again.config().hash(), s.config().hash());
    }
}

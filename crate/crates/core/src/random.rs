//! Seeded random scenario families with affine dynamics and costs.
//!
//! Each region has one scalar control `a` sampled on [-1, 1] with
//! `b = c·(a - a₀) + g·x` and `l = d + e·a + k·x`, where `a₀` is one of the
//! interior samples. The pair (b, l) then runs along a segment and the
//! sampled set contains a control with b = 0 at x = 0, so sampled suprema
//! agree exactly with their continuous counterparts at the interface.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::scenario::{ControlsConfig, RegionConfig, ScenarioConfig};

/// Samples per family; odd so that a = 0 is a sample.
pub const FAMILY_SAMPLES: usize = 21;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_region(rng: &mut impl Rng) -> RegionConfig {
    let n = FAMILY_SAMPLES;
    // Keep a₀ away from the ends so that both signs of b are available.
    let k0 = rng.gen_range(3..n - 3);
    let a0 = -1.0 + 2.0 * k0 as f64 / (n - 1) as f64;
    let c: f64 = rng.gen_range(0.5..2.0);
    let g: f64 = rng.gen_range(-0.1..0.1);
    let d: f64 = rng.gen_range(-1.0..1.0);
    let e: f64 = rng.gen_range(-1.0..1.0);
    let k: f64 = rng.gen_range(-0.5..0.5);
    RegionConfig {
        controls: ControlsConfig::Box {
            bounds: vec![[-1.0, 1.0]],
            samples: vec![n],
        },
        dynamics: vec![format!("{c:?}*(a1-({a0:?}))+({g:?})*x1")],
        cost: format!("{d:?}+({e:?})*a1+({k:?})*x1"),
    }
}

/// A random two-region scenario on [-1, 1].
pub fn random_affine_config(rng: &mut impl Rng, name: &str) -> ScenarioConfig {
    ScenarioConfig {
        name: name.to_string(),
        dim: 1,
        box_halfwidth: 1.0,
        region1: random_region(rng),
        region2: random_region(rng),
        interface: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::Scenario;

    #[test]
    fn families_load_and_repeat() {
        let mut r1 = rng(7);
        let mut r2 = rng(7);
        for i in 0..20 {
            let a = random_affine_config(&mut r1, &format!("f{i}"));
            let b = random_affine_config(&mut r2, &format!("f{i}"));
            assert_eq!(a, b);
            let s = Scenario::from_config(a).unwrap();
            assert!(s.delta_hat > 0.0);
            let at_h = s.controls_at(crate::scenario::Region::One, &[0.0]).unwrap();
            assert!(at_h.iter().any(|c| c.b[0] == 0.0));
        }
    }
}

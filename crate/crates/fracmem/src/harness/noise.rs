//! Seeded noise injection for synthetic observation data.
//!
//! The generator is a self-contained SplitMix64 stream so that a (config,
//! seed) pair reproduces bit-identical noisy data on every platform and
//! build. Samples are drawn uniformly on [-1, 1], one per (time node, dof),
//! walking time-major in dof order.

use crate::fem2d::{Mesh, ObservationMask};
use crate::solver::SpaceTimeField;

/// Deterministic 64-bit stream (SplitMix64).
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E3779B97F4A7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        z ^ (z >> 31)
    }

    /// Uniform on [0, 1).
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    /// Uniform on [-1, 1].
    #[inline]
    pub fn uniform_symmetric(&mut self) -> f64 {
        2.0 * self.next_f64() - 1.0
    }
}

/// How the noise level delta is turned into sample perturbations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseScaling {
    /// delta * uniform[0, 1]: amplitude taken at face value, one-sided draw
    /// with mean delta/2 (the plain `rand` reading of u + delta rand).
    Uniform01,
    /// delta * uniform[-1, 1]: zero-mean, amplitude taken at face value.
    Absolute,
    /// delta * max |u| over observed nodes and times * uniform[-1, 1].
    RelativeToMax,
}

impl NoiseScaling {
    pub fn as_str(&self) -> &'static str {
        match self {
            NoiseScaling::Uniform01 => "uniform01",
            NoiseScaling::Absolute => "absolute",
            NoiseScaling::RelativeToMax => "relative",
        }
    }
}

/// u_delta = u + noise with iid uniform draws per (time node, dof).
///
/// Every (node, time) sample is perturbed, including nodes outside the
/// observation subdomain; downstream consumers only read masked values.
pub fn add_noise(
    u: &SpaceTimeField,
    mesh: &Mesh,
    mask: &ObservationMask,
    delta: f64,
    seed: u64,
    scaling: NoiseScaling,
) -> SpaceTimeField {
    assert!(delta >= 0.0, "noise level must be nonnegative");
    if delta == 0.0 {
        return u.clone();
    }
    let mut rng = SplitMix64::new(seed);
    let mut noisy = u.clone();
    let mut perturb = |amplitude: f64, symmetric: bool, field: &mut SpaceTimeField| {
        for n in 0..field.n_rows() {
            let row = field.row_mut(n);
            for v in row.iter_mut() {
                let r = if symmetric {
                    rng.uniform_symmetric()
                } else {
                    rng.next_f64()
                };
                *v += amplitude * r;
            }
        }
    };
    match scaling {
        NoiseScaling::Uniform01 => perturb(delta, false, &mut noisy),
        NoiseScaling::Absolute => perturb(delta, true, &mut noisy),
        NoiseScaling::RelativeToMax => {
            let amplitude = delta * u.max_abs_over(&mask.node_set(mesh));
            perturb(amplitude, true, &mut noisy);
        }
    }
    noisy
}

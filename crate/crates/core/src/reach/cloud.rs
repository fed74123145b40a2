use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::algebra::GroupPoint;
use crate::dynamics::{ControlRange, ControlSystem, PiecewiseControl, DEFAULT_STEP};
use crate::error::{Error, Result};

/// Largest number of segments in a random control.
pub const MAX_SEGMENTS: usize = 8;

/// Sampled points of `O⁺_S(x)` together with the controls that reach them.
#[derive(Debug, Clone, PartialEq)]
pub struct ReachableCloud {
    pub base: GroupPoint,
    pub horizon: f64,
    pub points: Vec<GroupPoint>,
    pub controls: Vec<PiecewiseControl>,
    pub seed: u64,
}

impl ReachableCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Index and sup-norm distance of the point closest to `y`.
    pub fn nearest(&self, y: &GroupPoint) -> Option<(usize, f64)> {
        self.points
            .iter()
            .enumerate()
            .map(|(i, p)| (i, (p - y).amax()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
    }
}

/// Control number `index` of the sampling sequence for `seed`.
///
/// Index 0 is `u ≡ 0`, the next `2^m` indices are the constant controls at
/// the vertices of `Ω`, and the rest have 1 to [`MAX_SEGMENTS`] segments
/// with random switching times. Their values are vertices or uniform points
/// of `Ω` with equal probability. Every index draws from its own stream, so
/// the result does not depend on how many controls are generated.
pub fn random_control(
    omega: &ControlRange,
    horizon: f64,
    index: usize,
    seed: u64,
) -> PiecewiseControl {
    let m = omega.num_channels();
    let vertices = omega.vertices();
    if index == 0 {
        return PiecewiseControl::constant(DVector::zeros(m), horizon).expect("valid control");
    }
    if index <= vertices.len() {
        return PiecewiseControl::constant(vertices[index - 1].clone(), horizon)
            .expect("valid control");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    let k = rng.random_range(1..=MAX_SEGMENTS);
    let mut cuts: Vec<f64> = (0..k - 1).map(|_| rng.random_range(0.0..horizon)).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.push(horizon);
    let mut prev = 0.0;
    let segments = cuts
        .into_iter()
        .map(|c| {
            let value = if rng.random_bool(0.5) {
                vertices[rng.random_range(0..vertices.len())].clone()
            } else {
                omega.sample_uniform(&mut rng)
            };
            let d = c - prev;
            prev = c;
            (d, value)
        })
        .collect();
    PiecewiseControl::new(segments).expect("valid control")
}

/// `n` points of `O⁺_S(x)` with the default RK4 step.
pub fn sample_reachable<S: ControlSystem + ?Sized>(
    sys: &S,
    x: &GroupPoint,
    horizon: f64,
    n: usize,
    seed: u64,
) -> Result<ReachableCloud> {
    sample_reachable_with_step(sys, x, horizon, n, seed, DEFAULT_STEP)
}

pub fn sample_reachable_with_step<S: ControlSystem + ?Sized>(
    sys: &S,
    x: &GroupPoint,
    horizon: f64,
    n: usize,
    seed: u64,
    h: f64,
) -> Result<ReachableCloud> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "horizon must be positive, got {horizon}"
        )));
    }
    if n == 0 {
        return Err(Error::InvalidParameter(
            "sample count must be at least 1".into(),
        ));
    }
    let controls: Vec<PiecewiseControl> = (0..n)
        .into_par_iter()
        .map(|i| random_control(sys.omega(), horizon, i, seed))
        .collect();
    let points = controls
        .par_iter()
        .map(|u| sys.endpoint_from(x, u, horizon, h))
        .collect::<Result<Vec<_>>>()?;
    Ok(ReachableCloud {
        base: x.clone(),
        horizon,
        points,
        controls,
        seed,
    })
}

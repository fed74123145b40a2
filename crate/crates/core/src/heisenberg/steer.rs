use std::f64::consts::PI;

use nalgebra::{dmatrix, dvector, DMatrix, DVector};

use crate::algebra::GroupPoint;
use crate::dynamics::{
    endpoint, ControlRange, LinearControlSystem, PiecewiseControl, DEFAULT_STEP,
};
use crate::error::{Error, Result};
use crate::expm::matrix_exponential;

/// Least number of segments in a planar steering control.
pub const PLANAR_SEGMENTS: usize = 32;
const MAX_DOUBLINGS: usize = 12;
const MAX_HALVINGS: usize = 30;
const PLANAR_HORIZON: f64 = 2.0 * PI;

fn single_interval(omega: &ControlRange) -> Result<(f64, f64)> {
    if omega.num_channels() != 1 {
        return Err(Error::InvalidOmega(
            "planar steering needs one control channel".into(),
        ));
    }
    Ok(omega.bounds()[0])
}

fn segment_count(t: f64) -> usize {
    PLANAR_SEGMENTS.max((4.0 * t).ceil() as usize)
}

/// Columns `Γ_k` with `v(T) = e^{FT} v(0) + Σ Γ_k u_k` for `n` equal
/// segments, together with `e^{FT}`.
fn input_columns(t: f64, n: usize) -> (Vec<DVector<f64>>, DMatrix<f64>) {
    let delta = t / n as f64;
    // exp of [[F, B], [0, 0]] holds e^{Fδ} and ∫₀^δ e^{Fs} B ds
    let aug = dmatrix![0.0, -1.0, 0.0; 1.0, 0.0, 1.0; 0.0, 0.0, 0.0];
    let e = matrix_exponential(&aug, delta);
    let step = e.view((0, 0), (2, 2)).into_owned();
    let g = e.view((0, 2), (2, 1)).column(0).into_owned();
    let mut cols = vec![DVector::zeros(2); n];
    let mut col = g;
    for k in (0..n).rev() {
        cols[k] = col.clone();
        col = &step * col;
    }
    let rot = dmatrix![0.0, -1.0; 1.0, 0.0];
    (cols, matrix_exponential(&rot, t))
}

/// `Σ Γ_k Γ_kᵀ` for `n` equal segments over `[0, T]`.
pub fn discrete_gramian(t: f64, n: usize) -> DMatrix<f64> {
    let (cols, _) = input_columns(t, n);
    cols.iter()
        .fold(DMatrix::zeros(2, 2), |acc, c| acc + c * c.transpose())
}

/// Minimum-energy piecewise-constant control of `ẋ = −y, ẏ = x + u`
/// from `from` to `to`. The horizon starts at `t` and doubles until the
/// control fits in `Ω`.
pub fn planar_steer(
    from: [f64; 2],
    to: [f64; 2],
    omega: &ControlRange,
    t: f64,
) -> Result<PiecewiseControl> {
    let (lo, hi) = single_interval(omega)?;
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "steering horizon must be positive, got {t}"
        )));
    }
    if from == to && to[1] == 0.0 && -to[0] > lo && -to[0] < hi {
        return PiecewiseControl::constant(dvector![-to[0]], t);
    }
    let mut horizon = t;
    for _ in 0..=MAX_DOUBLINGS {
        let n = segment_count(horizon);
        let (cols, flow) = input_columns(horizon, n);
        let d = DVector::from_column_slice(&to) - flow * DVector::from_column_slice(&from);
        let gram = cols
            .iter()
            .fold(DMatrix::zeros(2, 2), |acc, c| acc + c * c.transpose());
        let w = gram
            .lu()
            .solve(&d)
            .ok_or_else(|| Error::SteeringFailed("singular Gramian".into()))?;
        let values: Vec<f64> = cols.iter().map(|c| c.dot(&w)).collect();
        if values.iter().all(|&v| v > lo && v < hi) {
            let delta = horizon / n as f64;
            return PiecewiseControl::new(
                values.into_iter().map(|v| (delta, dvector![v])).collect(),
            );
        }
        horizon *= 2.0;
    }
    Err(Error::SteeringFailed(format!(
        "no control within [{lo}, {hi}] found up to horizon {}",
        horizon / 2.0
    )))
}

/// One leg of a steering plan and the point it is expected to reach.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanLeg {
    pub label: String,
    pub control: PiecewiseControl,
    pub waypoint: GroupPoint,
}

impl PlanLeg {
    pub fn duration(&self) -> f64 {
        self.control.total_duration()
    }
}

/// Concatenation of legs joining two points of the vertical axis.
#[derive(Debug, Clone, PartialEq)]
pub struct SteeringPlan {
    pub start: GroupPoint,
    pub legs: Vec<PlanLeg>,
    /// Number of descent loops, zero for ascent plans.
    pub loops: usize,
    /// Constant control used on the loops and the dwell.
    pub level: f64,
}

impl SteeringPlan {
    pub fn duration(&self) -> f64 {
        self.legs.iter().map(PlanLeg::duration).sum()
    }

    pub fn target(&self) -> &GroupPoint {
        self.legs.last().map(|l| &l.waypoint).unwrap_or(&self.start)
    }

    pub fn control(&self) -> PiecewiseControl {
        let segments = self
            .legs
            .iter()
            .flat_map(|l| l.control.segments().iter().cloned())
            .collect();
        PiecewiseControl::new(segments).expect("plans have at least one leg")
    }

    pub fn check_range(&self, omega: &ControlRange) -> Result<()> {
        self.legs
            .iter()
            .try_for_each(|l| l.control.check_range(omega))
    }

    /// Integrates the whole plan in one go.
    pub fn endpoint(&self, sys: &LinearControlSystem, h: f64) -> Result<GroupPoint> {
        endpoint(sys, &self.start, &self.control(), self.duration(), h)
    }

    /// Integrates leg by leg, starting every leg where the previous one
    /// ended.
    pub fn leg_endpoints(&self, sys: &LinearControlSystem, h: f64) -> Result<Vec<GroupPoint>> {
        let mut p = self.start.clone();
        let mut out = Vec::with_capacity(self.legs.len());
        for leg in &self.legs {
            p = endpoint(sys, &p, &leg.control, leg.duration(), h)?;
            out.push(p.clone());
        }
        Ok(out)
    }
}

fn point(v: [f64; 2], z: f64) -> GroupPoint {
    dvector![v[0], v[1], z]
}

/// Vertical displacement of a planar leg.
fn lift(sys: &LinearControlSystem, from: [f64; 2], u: &PiecewiseControl) -> Result<f64> {
    Ok(endpoint(sys, &point(from, 0.0), u, u.total_duration(), DEFAULT_STEP)?[2])
}

fn leg(label: impl Into<String>, control: PiecewiseControl, waypoint: GroupPoint) -> PlanLeg {
    PlanLeg {
        label: label.into(),
        control,
        waypoint,
    }
}

/// Time for the drift alone to rotate `from` onto `to` counter-clockwise.
fn rotation_time(from: [f64; 2], to: [f64; 2]) -> f64 {
    (to[1].atan2(to[0]) - from[1].atan2(from[0])).rem_euclid(2.0 * PI)
}

/// Plan from `(0, 0, z2)` down to `(0, 0, z1)` for the rotation example.
///
/// After steering to `v* = −α(1, π)`, each loop applies `u ≡ α` for time
/// `π`, which lowers `z` by `α²π/2`, and then lets the drift rotate the
/// planar part back to `v*`. A final dwell at the equilibrium `(−α, 0)`
/// absorbs the remainder.
pub fn build_descent_plan(
    z2: f64,
    z1: f64,
    alpha: f64,
    omega: &ControlRange,
) -> Result<SteeringPlan> {
    let (_, hi) = single_interval(omega)?;
    if !(z1 <= z2) {
        return Err(Error::InvalidParameter(format!(
            "descent needs z1 <= z2, got {z1} > {z2}"
        )));
    }
    if !(alpha > 0.0 && alpha < hi) {
        return Err(Error::InvalidParameter(format!(
            "alpha must lie in (0, {hi}), got {alpha}"
        )));
    }
    let sys = LinearControlSystem::example2(omega.clone())?;
    let origin = [0.0, 0.0];
    let v_star = [-alpha, -alpha * PI];
    let v_turn = [-alpha, alpha * PI];
    let v_eq = [-alpha, 0.0];

    let u2 = planar_steer(origin, v_star, omega, PLANAR_HORIZON)?;
    let u_star = planar_steer(v_star, v_eq, omega, PLANAR_HORIZON)?;
    let u1 = planar_steer(v_eq, origin, omega, PLANAR_HORIZON)?;
    let z2_bar = z2 + lift(&sys, origin, &u2)?;
    let z_star = lift(&sys, v_star, &u_star)?;
    let z1_bar = z1 - lift(&sys, v_eq, &u1)?;

    let drop = alpha * alpha * PI / 2.0;
    let limit = z1_bar - z_star;
    let mut loops = ((z2_bar - limit) / drop).ceil().max(0.0) as usize;
    while z2_bar - loops as f64 * drop > limit {
        loops += 1;
    }
    while loops > 0 && z2_bar - (loops - 1) as f64 * drop <= limit {
        loops -= 1;
    }
    let z2_hat = z2_bar - loops as f64 * drop;
    let dwell = 2.0 / (alpha * alpha) * (z1_bar - (z_star + z2_hat));

    let tau1 = rotation_time(v_turn, v_star);
    let mut legs = vec![leg("i", u2, point(v_star, z2_bar))];
    for k in 1..=loops {
        let z = z2_bar - k as f64 * drop;
        legs.push(leg(
            format!("ii.{k}"),
            PiecewiseControl::constant(dvector![alpha], PI)?,
            point(v_turn, z),
        ));
        legs.push(leg(
            format!("iii.{k}"),
            PiecewiseControl::constant(dvector![0.0], tau1)?,
            point(v_star, z),
        ));
    }
    legs.push(leg("v", u_star, point(v_eq, z_star + z2_hat)));
    legs.push(leg(
        "vi",
        PiecewiseControl::constant(dvector![alpha], dwell.max(0.0))?,
        point(v_eq, z1_bar),
    ));
    legs.push(leg("vii", u1, point(origin, z1)));
    Ok(SteeringPlan {
        start: point(origin, z2),
        legs,
        loops,
        level: alpha,
    })
}

/// Plan from `(0, 0, z1)` up to `(0, 0, z2)`: steer to the equilibrium
/// `(−u, 0)`, dwell there while `z` grows at rate `u²/2`, steer back.
///
/// If the two planar legs alone overshoot `z2`, `u` is halved until they
/// do not.
pub fn build_ascent_plan(z1: f64, z2: f64, u: f64, omega: &ControlRange) -> Result<SteeringPlan> {
    let (lo, hi) = single_interval(omega)?;
    if !(z1 <= z2) {
        return Err(Error::InvalidParameter(format!(
            "ascent needs z1 <= z2, got {z1} > {z2}"
        )));
    }
    if !(u > lo && u < hi) || u == 0.0 {
        return Err(Error::InvalidParameter(format!(
            "dwell control must be nonzero and inside ({lo}, {hi}), got {u}"
        )));
    }
    let origin = [0.0, 0.0];
    let start = point(origin, z1);
    if z1 == z2 {
        return Ok(SteeringPlan {
            legs: vec![leg(
                "up-dwell",
                PiecewiseControl::constant(dvector![u], 0.0)?,
                start.clone(),
            )],
            start,
            loops: 0,
            level: u,
        });
    }
    let sys = LinearControlSystem::example2(omega.clone())?;
    let mut level = u;
    for _ in 0..MAX_HALVINGS {
        let v_eq = [-level, 0.0];
        let up = planar_steer(origin, v_eq, omega, PLANAR_HORIZON)?;
        let back = planar_steer(v_eq, origin, omega, PLANAR_HORIZON)?;
        let z1_bar = z1 + lift(&sys, origin, &up)?;
        let z2_bar = z2 - lift(&sys, v_eq, &back)?;
        let dwell = (z2_bar - z1_bar) / (level * level / 2.0);
        if dwell >= 0.0 {
            return Ok(SteeringPlan {
                start,
                legs: vec![
                    leg("up-steer", up, point(v_eq, z1_bar)),
                    leg(
                        "up-dwell",
                        PiecewiseControl::constant(dvector![level], dwell)?,
                        point(v_eq, z2_bar),
                    ),
                    leg("up-return", back, point(origin, z2)),
                ],
                loops: 0,
                level,
            });
        }
        level /= 2.0;
    }
    Err(Error::SteeringFailed(format!(
        "planar legs overshoot the target height {z2} for every dwell control tried"
    )))
}

//! 2D point-mass navigation world: scenario generation, LTC controller
//! rollout, and obstacle clearance tracking.
//!
//! A robot of mass `m` with linear damping navigates `[-10, 10]^2` from a
//! start position toward a target while avoiding three circular obstacles.
//! The robot is launched at [`LAUNCH_SPEED`] perpendicular to the
//! start-to-target line, and two of the obstacles gate that launch
//! corridor, so safety is an active steering achievement: the controller
//! only observes the target direction and its own velocity, never the
//! obstacles. The controller is an LTC network integrated with the same
//! explicit Euler step as the physics.

use serde::{Deserialize, Serialize};

use crate::params::{GroupKind, ParamVector};
use crate::rng::RngStream;
use crate::{Error, Result};

/// World half-extent for start/target placement.
pub const WORLD_HALF: f64 = 10.0;
/// Number of circular obstacles in every scenario.
pub const N_OBSTACLES: usize = 3;
/// Observation width expected by controllers in this environment.
pub const ENV_N_OBS: usize = 4;
/// Action width expected by controllers in this environment.
pub const ENV_N_ACT: usize = 2;

/// Initial coasting speed, aimed almost perpendicular to the start-target
/// line (see [`Scenario::launch_direction`]).
pub const LAUNCH_SPEED: f64 = 2.5;
/// Tilt of the launch direction toward the target, radians.
const LAUNCH_TILT: f64 = 15.0 * std::f64::consts::PI / 180.0;

const OBSTACLE_RADIUS_RANGE: (f64, f64) = (0.8, 1.5);
const OBSTACLE_CENTER_HALF: f64 = 7.0;
const OBSTACLE_ENDPOINT_MARGIN: f64 = 0.3;
// Gate obstacles sit along the launch corridor: (distance along the
// launch direction, boundary clearance off the corridor line).
const GATE1_ALONG: (f64, f64) = (1.2, 2.6);
const GATE1_CLEARANCE: (f64, f64) = (0.6, 1.2);
const GATE2_ALONG: (f64, f64) = (3.0, 3.8);
const GATE2_CLEARANCE: (f64, f64) = (0.0135, 0.0425);
const POSITION_NORM: f64 = 10.0;
const VELOCITY_NORM: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Vec2) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        (dx * dx + dy * dy).sqrt()
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub center: Vec2,
    pub radius: f64,
}

/// One navigation task: start, target, and three obstacles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub start: Vec2,
    pub target: Vec2,
    pub obstacles: Vec<Obstacle>,
}

impl Scenario {
    /// Signed distance from `p` to the nearest obstacle boundary;
    /// negative inside an obstacle.
    pub fn clearance(&self, p: &Vec2) -> f64 {
        self.obstacles
            .iter()
            .map(|o| p.distance(&o.center) - o.radius)
            .fold(f64::INFINITY, f64::min)
    }

    /// Unit launch direction: the start-to-target direction rotated 75
    /// degrees, i.e. mostly perpendicular with a bias toward the target.
    /// The bias keeps progress scores and their gradients alive for
    /// steering controllers, while the perpendicular component is large
    /// enough that the idle controller still scores near zero.
    /// Derived from the endpoints, so it needs no extra scenario state.
    pub fn launch_direction(&self) -> Vec2 {
        let dx = self.target.x - self.start.x;
        let dy = self.target.y - self.start.y;
        let n = (dx * dx + dy * dy).sqrt();
        if n == 0.0 {
            return Vec2::new(1.0, 0.0);
        }
        let (cos_t, sin_t) = (LAUNCH_TILT.cos(), LAUNCH_TILT.sin());
        // rotate (dx, dy)/n by (90 - tilt) degrees: perp + tilt * along
        Vec2::new(
            (-dy * cos_t + dx * sin_t) / n,
            (dx * cos_t + dy * sin_t) / n,
        )
    }
}

/// Point-mass physics parameters. Defaults are the system constants:
/// mass 1.0 kg, damping 0.5, max force 5.0 N, dt 0.02 s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicsConfig {
    pub mass: f64,
    pub damping: f64,
    pub max_force: f64,
    pub dt: f64,
}

impl Default for PhysicsConfig {
    fn default() -> Self {
        Self {
            mass: 1.0,
            damping: 0.5,
            max_force: 5.0,
            dt: 0.02,
        }
    }
}

/// Rollout output: the position trace plus clearance and progress records.
#[derive(Debug, Clone)]
pub struct TrajectoryResult {
    pub positions: Vec<Vec2>,
    pub min_clearance: f64,
    pub initial_distance: f64,
    pub final_distance: f64,
    pub violated: bool,
}

/// Draw `count` scenarios. Start and target are uniform in the world box,
/// at least 5 m apart. Two gate obstacles straddle the launch corridor,
/// each on a random side: one early (1.2-2.6 m out, boundary clearance
/// off the corridor line uniform in [0.6, 1.2]) and one tight gate near
/// the end of the coast (3.0-3.8 m out, clearance in [0.15, 0.5]). The
/// launched robot threads them blind, meeting the tight gate late, when
/// parameter perturbations have had time to grow into real deviations.
/// The third obstacle is uniform in [-7, 7]^2, clear of the corridor and
/// of both endpoints by 0.3.
pub fn generate_scenarios(count: usize, rng: &mut RngStream) -> Result<Vec<Scenario>> {
    if count == 0 {
        return Err(Error::InvalidArgument("scenario count must be >= 1".into()));
    }
    const MAX_TRIES: usize = 10_000;
    let mut scenarios = Vec::with_capacity(count);
    for _ in 0..count {
        let (start, target, along, lateral) = loop {
            let start = Vec2::new(
                rng.uniform_in(-WORLD_HALF, WORLD_HALF),
                rng.uniform_in(-WORLD_HALF, WORLD_HALF),
            );
            let target = Vec2::new(
                rng.uniform_in(-WORLD_HALF, WORLD_HALF),
                rng.uniform_in(-WORLD_HALF, WORLD_HALF),
            );
            if start.distance(&target) < 5.0 {
                continue;
            }
            let stub = Scenario {
                start,
                target,
                obstacles: Vec::new(),
            };
            let along = stub.launch_direction();
            let lateral = Vec2::new(-along.y, along.x);
            // The whole gate corridor must fit in the world, padding for
            // the widest gate offset.
            let tip = Vec2::new(
                start.x + GATE2_ALONG.1 * along.x,
                start.y + GATE2_ALONG.1 * along.y,
            );
            let pad = OBSTACLE_RADIUS_RANGE.1 + GATE2_CLEARANCE.1 + 0.1;
            if tip.x.abs() <= WORLD_HALF - pad && tip.y.abs() <= WORLD_HALF - pad {
                break (start, target, along, lateral);
            }
        };

        let mut obstacles = Vec::with_capacity(N_OBSTACLES);
        for (along_band, clear_band) in [
            (GATE1_ALONG, GATE1_CLEARANCE),
            (GATE2_ALONG, GATE2_CLEARANCE),
        ] {
            let mut placed = false;
            for _ in 0..MAX_TRIES {
                let radius = rng.uniform_in(OBSTACLE_RADIUS_RANGE.0, OBSTACLE_RADIUS_RANGE.1);
                let s_along = rng.uniform_in(along_band.0, along_band.1);
                let clearance = rng.uniform_in(clear_band.0, clear_band.1);
                let side = if rng.uniform() < 0.5 { -1.0 } else { 1.0 };
                let off = side * (radius + clearance);
                let center = Vec2::new(
                    start.x + s_along * along.x + off * lateral.x,
                    start.y + s_along * along.y + off * lateral.y,
                );
                let in_world = center.x.abs() <= WORLD_HALF && center.y.abs() <= WORLD_HALF;
                if in_world
                    && center.distance(&target) >= radius + OBSTACLE_ENDPOINT_MARGIN
                    && center.distance(&start) > radius
                {
                    obstacles.push(Obstacle { center, radius });
                    placed = true;
                    break;
                }
            }
            if !placed {
                return Err(Error::Generation(format!(
                    "could not place a gate obstacle after {MAX_TRIES} tries"
                )));
            }
        }
        {
            let mut placed = false;
            for _ in 0..MAX_TRIES {
                let radius = rng.uniform_in(OBSTACLE_RADIUS_RANGE.0, OBSTACLE_RADIUS_RANGE.1);
                let center = Vec2::new(
                    rng.uniform_in(-OBSTACLE_CENTER_HALF, OBSTACLE_CENTER_HALF),
                    rng.uniform_in(-OBSTACLE_CENTER_HALF, OBSTACLE_CENTER_HALF),
                );
                let clear = radius + OBSTACLE_ENDPOINT_MARGIN;
                // Keep the launch lane clear: the free-field obstacle may
                // not intrude on the corridor the gates already control.
                let rel = Vec2::new(center.x - start.x, center.y - start.y);
                let s_along = (rel.x * along.x + rel.y * along.y).clamp(0.0, GATE2_ALONG.1 + 1.0);
                let foot = Vec2::new(start.x + s_along * along.x, start.y + s_along * along.y);
                let corridor_ok = foot.distance(&center) >= clear;
                if corridor_ok
                    && center.distance(&start) >= clear
                    && center.distance(&target) >= clear
                {
                    obstacles.push(Obstacle { center, radius });
                    placed = true;
                    break;
                }
            }
            if !placed {
                return Err(Error::Generation(format!(
                    "could not place an obstacle after {MAX_TRIES} tries"
                )));
            }
        }
        scenarios.push(Scenario {
            start,
            target,
            obstacles,
        });
    }
    Ok(scenarios)
}

/// Integrate the LTC controller and point mass for `steps` Euler steps.
///
/// Per step, in order: observe `((target - pos)/10, vel/5)`; advance the
/// hidden state `x += dt * (-x/tau + tanh(W_in obs + W_rec x + b))`;
/// compute `u = W_out tanh(x)` clipped per axis to `max_force`; then
/// `vel += dt * (u - damping*vel)/mass` and `pos += dt * vel`. Clearance
/// is tracked at every post-step position; the fixed start position does
/// not count toward the margin, so escaping a crowded start is rewarded.
pub fn rollout(
    theta: &ParamVector,
    scenario: &Scenario,
    steps: usize,
    cfg: &PhysicsConfig,
) -> Result<TrajectoryResult> {
    if steps == 0 {
        return Err(Error::InvalidArgument("rollout needs steps >= 1".into()));
    }
    if theta.arch.n_obs != ENV_N_OBS || theta.arch.n_act != ENV_N_ACT {
        return Err(Error::Structural(format!(
            "environment expects a {ENV_N_OBS}-obs/{ENV_N_ACT}-act controller, got {}/{}",
            theta.arch.n_obs, theta.arch.n_act
        )));
    }
    theta.validate()?;

    let n = theta.arch.n_hid;
    let w_in = theta.group_slice(GroupKind::WIn);
    let w_rec = theta.group_slice(GroupKind::WRec);
    let bias = theta.group_slice(GroupKind::Bias);
    let w_out = theta.group_slice(GroupKind::WOut);
    let tau = theta.group_slice(GroupKind::Tau);

    let mut x = vec![0.0f64; n];
    let mut tanh_x = vec![0.0f64; n];
    let mut pos = scenario.start;
    let launch = scenario.launch_direction();
    let mut vel = Vec2::new(LAUNCH_SPEED * launch.x, LAUNCH_SPEED * launch.y);

    let initial_distance = pos.distance(&scenario.target);
    let mut min_clearance = f64::INFINITY;
    let mut positions = Vec::with_capacity(steps + 1);
    positions.push(pos);

    for step in 0..steps {
        let obs = [
            (scenario.target.x - pos.x) / POSITION_NORM,
            (scenario.target.y - pos.y) / POSITION_NORM,
            vel.x / VELOCITY_NORM,
            vel.y / VELOCITY_NORM,
        ];
        for i in 0..n {
            let mut pre = bias[i];
            let wi = &w_in[i * ENV_N_OBS..(i + 1) * ENV_N_OBS];
            for (w, o) in wi.iter().zip(&obs) {
                pre += w * o;
            }
            let wr = &w_rec[i * n..(i + 1) * n];
            for (w, xv) in wr.iter().zip(&x) {
                pre += w * xv;
            }
            x[i] += cfg.dt * (-x[i] / tau[i] + pre.tanh());
        }
        for i in 0..n {
            tanh_x[i] = x[i].tanh();
        }
        let mut u = [0.0f64; ENV_N_ACT];
        for (a, ua) in u.iter_mut().enumerate() {
            let row = &w_out[a * n..(a + 1) * n];
            let mut s = 0.0;
            for (w, t) in row.iter().zip(&tanh_x) {
                s += w * t;
            }
            *ua = s.clamp(-cfg.max_force, cfg.max_force);
        }
        vel.x += cfg.dt * (u[0] - cfg.damping * vel.x) / cfg.mass;
        vel.y += cfg.dt * (u[1] - cfg.damping * vel.y) / cfg.mass;
        pos.x += cfg.dt * vel.x;
        pos.y += cfg.dt * vel.y;

        if !(pos.x.is_finite() && pos.y.is_finite() && vel.x.is_finite() && vel.y.is_finite()) {
            return Err(Error::Rollout { step });
        }

        let c = scenario.clearance(&pos);
        if c < min_clearance {
            min_clearance = c;
        }
        positions.push(pos);
    }

    let final_distance = pos.distance(&scenario.target);
    Ok(TrajectoryResult {
        positions,
        min_clearance,
        initial_distance,
        final_distance,
        violated: min_clearance <= 0.0,
    })
}

/// Sup over time of the Euclidean distance between two position traces.
pub fn trajectory_distance(a: &TrajectoryResult, b: &TrajectoryResult) -> Result<f64> {
    if a.positions.len() != b.positions.len() {
        return Err(Error::DimensionMismatch {
            expected: a.positions.len(),
            got: b.positions.len(),
        });
    }
    Ok(a.positions
        .iter()
        .zip(&b.positions)
        .map(|(p, q)| p.distance(q))
        .fold(0.0, f64::max))
}

/// Scenario CSV: one row per endpoint/obstacle so the operating domain is
/// a reviewable artifact. Columns: `scenario,kind,x,y,radius`.
pub fn scenarios_to_csv(scenarios: &[Scenario]) -> String {
    let mut out = String::from("scenario,kind,x,y,radius\n");
    for (i, s) in scenarios.iter().enumerate() {
        out.push_str(&format!("{i},start,{},{},\n", s.start.x, s.start.y));
        out.push_str(&format!("{i},target,{},{},\n", s.target.x, s.target.y));
        for o in &s.obstacles {
            out.push_str(&format!(
                "{i},obstacle,{},{},{}\n",
                o.center.x, o.center.y, o.radius
            ));
        }
    }
    out
}

pub fn scenarios_from_csv(text: &str) -> Result<Vec<Scenario>> {
    let mut rows: Vec<(usize, String, f64, f64, Option<f64>)> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("scenario,") {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 5 {
            return Err(Error::Parse(format!(
                "scenario CSV line {} has {} fields, expected 5",
                lineno + 1,
                parts.len()
            )));
        }
        let idx: usize = parts[0]
            .parse()
            .map_err(|_| Error::Parse(format!("bad scenario index {:?}", parts[0])))?;
        let x: f64 = parts[2]
            .parse()
            .map_err(|_| Error::Parse(format!("bad x {:?}", parts[2])))?;
        let y: f64 = parts[3]
            .parse()
            .map_err(|_| Error::Parse(format!("bad y {:?}", parts[3])))?;
        let radius = if parts[4].is_empty() {
            None
        } else {
            Some(
                parts[4]
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad radius {:?}", parts[4])))?,
            )
        };
        rows.push((idx, parts[1].to_string(), x, y, radius));
    }
    let count = rows.iter().map(|r| r.0 + 1).max().unwrap_or(0);
    let mut starts: Vec<Option<Vec2>> = vec![None; count];
    let mut targets: Vec<Option<Vec2>> = vec![None; count];
    let mut obstacles: Vec<Vec<Obstacle>> = vec![Vec::new(); count];
    for (idx, kind, x, y, radius) in rows {
        match kind.as_str() {
            "start" => starts[idx] = Some(Vec2::new(x, y)),
            "target" => targets[idx] = Some(Vec2::new(x, y)),
            "obstacle" => obstacles[idx].push(Obstacle {
                center: Vec2::new(x, y),
                radius: radius.ok_or_else(|| Error::Parse("obstacle row missing radius".into()))?,
            }),
            other => return Err(Error::Parse(format!("unknown row kind {other:?}"))),
        }
    }
    let mut scenarios = Vec::with_capacity(count);
    for i in 0..count {
        scenarios.push(Scenario {
            start: starts[i].ok_or_else(|| Error::Parse(format!("scenario {i} missing start")))?,
            target: targets[i]
                .ok_or_else(|| Error::Parse(format!("scenario {i} missing target")))?,
            obstacles: std::mem::take(&mut obstacles[i]),
        });
    }
    Ok(scenarios)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::LtcArchitecture;

    fn null_controller() -> ParamVector {
        let arch = LtcArchitecture::new(4, 12, 2).unwrap();
        let mut theta = ParamVector::zeros(arch);
        for t in theta.group_slice_mut(GroupKind::Tau) {
            *t = 1.0;
        }
        theta
    }

    fn simple_scenario() -> Scenario {
        Scenario {
            start: Vec2::new(-5.0, 0.0),
            target: Vec2::new(5.0, 0.0),
            obstacles: vec![Obstacle {
                center: Vec2::new(0.0, 4.0),
                radius: 1.0,
            }],
        }
    }

    #[test]
    fn generation_is_deterministic_and_valid() {
        let mut a = RngStream::new(12345);
        let mut b = RngStream::new(12345);
        let s1 = generate_scenarios(100, &mut a).unwrap();
        let s2 = generate_scenarios(100, &mut b).unwrap();
        assert_eq!(s1, s2);
        for s in &s1 {
            assert_eq!(s.obstacles.len(), N_OBSTACLES);
            assert!(s.clearance(&s.start) > 0.0, "start strictly outside");
            assert!(s.clearance(&s.target) >= OBSTACLE_ENDPOINT_MARGIN - 1e-12);
            assert!(s.start.distance(&s.target) >= 5.0);
            // Gate obstacles straddle the launch corridor within their
            // clearance bands.
            let along = s.launch_direction();
            for (oi, clear_band) in [(0, GATE1_CLEARANCE), (1, GATE2_CLEARANCE)] {
                let o = &s.obstacles[oi];
                let rel = Vec2::new(o.center.x - s.start.x, o.center.y - s.start.y);
                let lat = (rel.x * along.y - rel.y * along.x).abs();
                let off = lat - o.radius;
                assert!(
                    (clear_band.0 - 1e-9..=clear_band.1 + 1e-9).contains(&off),
                    "gate {oi} lateral clearance {off}"
                );
            }
            for p in [s.start, s.target] {
                assert!(p.x.abs() <= WORLD_HALF && p.y.abs() <= WORLD_HALF);
            }
        }
    }

    #[test]
    fn single_scenario_generation() {
        let mut rng = RngStream::new(7);
        let s = generate_scenarios(1, &mut rng).unwrap();
        assert_eq!(s.len(), 1);
        assert!(s[0].clearance(&s[0].start) > 0.0);
    }

    #[test]
    fn null_controller_coasts_to_rest() {
        let theta = null_controller();
        let sc = simple_scenario();
        let cfg = PhysicsConfig::default();
        let tr = rollout(&theta, &sc, 200, &cfg).unwrap();
        assert_eq!(tr.positions.len(), 201);
        // u = 0: the launch velocity decays under damping. The coast is
        // perpendicular to the target line, so the final distance stays
        // close to the initial one.
        let coast = tr.positions[0].distance(tr.positions.last().unwrap());
        let horizon = 200.0 * cfg.dt;
        let gamma = cfg.damping / cfg.mass;
        let expected_coast = LAUNCH_SPEED * (1.0 - (-gamma * horizon).exp()) / gamma;
        assert!(
            (coast - expected_coast).abs() < 0.05 * expected_coast,
            "coast {coast}"
        );
        assert!((tr.final_distance - tr.initial_distance).abs() < 0.2 * tr.initial_distance);
        // Speed decays to the damping tail of the launch speed.
        let last_step = tr.positions[199].distance(&tr.positions[200]) / cfg.dt;
        assert!(last_step < 1.1 * LAUNCH_SPEED * (-gamma * horizon).exp());
    }

    #[test]
    fn zero_steps_rejected() {
        let theta = null_controller();
        let sc = simple_scenario();
        assert!(rollout(&theta, &sc, 0, &PhysicsConfig::default()).is_err());
    }

    #[test]
    fn rollout_is_deterministic() {
        let mut rng = RngStream::new(3);
        let arch = LtcArchitecture::new(4, 12, 2).unwrap();
        let mut theta = ParamVector::new(arch, rng.normal_vec(arch.dimension(), 0.3)).unwrap();
        for t in theta.group_slice_mut(GroupKind::Tau) {
            *t = t.abs().max(0.3);
        }
        let sc = simple_scenario();
        let cfg = PhysicsConfig::default();
        let a = rollout(&theta, &sc, 200, &cfg).unwrap();
        let b = rollout(&theta, &sc, 200, &cfg).unwrap();
        assert_eq!(a.positions, b.positions);
    }

    #[test]
    fn velocity_stays_bounded() {
        let rng = RngStream::new(8);
        let arch = LtcArchitecture::new(4, 12, 2).unwrap();
        let cfg = PhysicsConfig::default();
        let bound = 2.0 * cfg.max_force / cfg.damping;
        for i in 0..10 {
            let mut child = rng.child_indexed("vel", i);
            let mut theta =
                ParamVector::new(arch, child.normal_vec(arch.dimension(), 1.0)).unwrap();
            for t in theta.group_slice_mut(GroupKind::Tau) {
                *t = t.abs().max(0.3);
            }
            let sc = simple_scenario();
            let tr = rollout(&theta, &sc, 300, &cfg).unwrap();
            // Reconstruct speeds from consecutive positions: dt * v.
            for w in tr.positions.windows(2) {
                let speed = w[0].distance(&w[1]) / cfg.dt;
                assert!(speed <= bound, "speed {speed} exceeds {bound}");
            }
        }
    }

    #[test]
    fn clearance_change_bounded_by_step_length() {
        let mut rng = RngStream::new(21);
        let arch = LtcArchitecture::new(4, 12, 2).unwrap();
        let mut theta = ParamVector::new(arch, rng.normal_vec(arch.dimension(), 0.5)).unwrap();
        for t in theta.group_slice_mut(GroupKind::Tau) {
            *t = t.abs().max(0.3);
        }
        let sc = simple_scenario();
        let cfg = PhysicsConfig::default();
        let tr = rollout(&theta, &sc, 200, &cfg).unwrap();
        for w in tr.positions.windows(2) {
            let dc = (sc.clearance(&w[1]) - sc.clearance(&w[0])).abs();
            assert!(dc <= w[0].distance(&w[1]) + 1e-12);
        }
    }

    #[test]
    fn trajectory_distance_oracle() {
        let theta = null_controller();
        let sc = simple_scenario();
        let cfg = PhysicsConfig::default();
        let a = rollout(&theta, &sc, 50, &cfg).unwrap();
        assert_eq!(trajectory_distance(&a, &a).unwrap(), 0.0);

        let mut b = a.clone();
        b.positions[20].x += 0.1;
        assert!((trajectory_distance(&a, &b).unwrap() - 0.1).abs() < 1e-15);

        // Random pair: result equals a brute-force max over per-step distances.
        let mut rng = RngStream::new(4);
        let mut c = a.clone();
        for p in &mut c.positions {
            p.x += 0.05 * rng.normal();
            p.y += 0.05 * rng.normal();
        }
        let brute = a
            .positions
            .iter()
            .zip(&c.positions)
            .map(|(p, q)| p.distance(q))
            .fold(0.0f64, f64::max);
        assert_eq!(trajectory_distance(&a, &c).unwrap(), brute);

        let mut short = a.clone();
        short.positions.pop();
        assert!(trajectory_distance(&a, &short).is_err());
    }

    #[test]
    fn scenario_csv_round_trip() {
        let mut rng = RngStream::new(12345);
        let scenarios = generate_scenarios(5, &mut rng).unwrap();
        let csv = scenarios_to_csv(&scenarios);
        let back = scenarios_from_csv(&csv).unwrap();
        assert_eq!(scenarios.len(), back.len());
        for (a, b) in scenarios.iter().zip(&back) {
            assert!((a.start.x - b.start.x).abs() < 1e-12);
            assert!((a.target.y - b.target.y).abs() < 1e-12);
            assert_eq!(a.obstacles.len(), b.obstacles.len());
        }
    }
}

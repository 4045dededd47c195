//! A 2D desk-scale manipulation suite.
//!
//! A point gripper moves in the unit square with actions `(dx, dy, grip)`,
//! each clipped to `[-1, 1]`. Articulated objects (doors, drawers, windows,
//! buttons, faucets) expose a handle whose position is a function of one
//! joint value; a ball can be pushed towards a goal. Every frame carries the
//! canonical events that hold at that moment, which is what the synthetic
//! encoder turns into video embeddings.

mod expert;
mod task;

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::embedding::FrameFeature;
use crate::reward::RewardTrace;

pub use expert::ScriptedExpert;
pub use task::TaskId;
pub(crate) use task::{Joint, TaskSpec};

/// Episode length limit.
pub const HORIZON: usize = 200;
/// Gripper displacement per unit action.
pub const MAX_STEP: f64 = 0.04;
/// Distance at which closing the gripper catches the handle.
pub const GRASP_RADIUS: f64 = 0.05;
/// Distance at which the gripper can push the object.
pub const CONTACT_RADIUS: f64 = 0.05;
/// Distance that counts as "at the handle".
pub const NEAR_RADIUS: f64 = 0.06;
/// Minimum change in distance that counts as moving towards or away.
pub const MOTION_EPS: f64 = 0.01;
/// Length of the observation vector.
pub const OBS_DIM: usize = 11;
pub const ACTION_DIM: usize = 3;

const JOINT_EPS: f64 = 1e-4;
const BALL_SUBSTEPS: usize = 4;

/// Full simulator state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvState {
    pub task: TaskId,
    pub gripper: [f64; 2],
    pub gripper_vel: [f64; 2],
    pub gripper_closed: bool,
    pub grasping: bool,
    /// Door / faucet angle in radians, drawer / window extension, or button
    /// depression, depending on the task. Unused for the ball.
    pub joint: f64,
    pub ball: [f64; 2],
    /// Hinge pivot, slide origin or ball goal, sampled per seed.
    pub fixture: [f64; 2],
    pub t: usize,
}

/// Result of one transition.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub state: EnvState,
    pub frame: FrameFeature,
    pub events: BTreeSet<String>,
    pub done: bool,
}

/// One rollout: `o_0 ..= o_T`, `a_0 .. a_{T-1}` and one frame per observation.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Trajectory {
    pub observations: Vec<EnvState>,
    /// Raw (unclipped) actions as sampled from the policy.
    pub actions: Vec<Vec<f64>>,
    pub frames: Vec<FrameFeature>,
    pub reward_trace: RewardTrace,
}

impl Trajectory {
    /// Number of transitions `T`.
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn terminal(&self) -> Option<&EnvState> {
        self.observations.last()
    }

    /// `|actions| = T`, `|observations| = |frames| = T + 1`.
    pub fn is_consistent(&self) -> bool {
        !self.observations.is_empty()
            && self.observations.len() == self.actions.len() + 1
            && self.frames.len() == self.observations.len()
    }
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

fn sub(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    let d = sub(a, b);
    libm::hypot(d[0], d[1])
}

fn clamp_world(p: [f64; 2]) -> [f64; 2] {
    [p[0].clamp(0.0, 1.0), p[1].clamp(0.0, 1.0)]
}

/// Deterministic initial state for `(task, seed)`.
pub fn reset(task: TaskId, seed: u64) -> EnvState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15u64.wrapping_mul(task as u64 + 1));
    let spec = task.spec();
    let fixture = match task {
        TaskId::DoorOpen | TaskId::DoorClose => [uniform(&mut rng, 0.25, 0.45), uniform(&mut rng, 0.55, 0.7)],
        TaskId::DrawerOpen | TaskId::DrawerClose => [uniform(&mut rng, 0.35, 0.65), uniform(&mut rng, 0.65, 0.8)],
        TaskId::WindowOpen | TaskId::WindowClose => [uniform(&mut rng, 0.25, 0.45), uniform(&mut rng, 0.6, 0.8)],
        TaskId::ButtonPress => [uniform(&mut rng, 0.3, 0.7), uniform(&mut rng, 0.5, 0.7)],
        TaskId::FaucetOpen => [uniform(&mut rng, 0.3, 0.6), uniform(&mut rng, 0.6, 0.75)],
        TaskId::PushBall => [uniform(&mut rng, 0.3, 0.7), uniform(&mut rng, 0.75, 0.85)],
    };
    let ball = if task == TaskId::PushBall {
        [uniform(&mut rng, 0.35, 0.65), uniform(&mut rng, 0.45, 0.55)]
    } else {
        [0.0, 0.0]
    };
    let gripper = [uniform(&mut rng, 0.2, 0.8), uniform(&mut rng, 0.1, 0.25)];
    EnvState {
        task,
        gripper,
        gripper_vel: [0.0, 0.0],
        gripper_closed: false,
        grasping: false,
        joint: spec.joint_start,
        ball,
        fixture,
        t: 0,
    }
}

/// Point the gripper interacts with: the handle, button top or ball.
pub fn handle_position(s: &EnvState) -> [f64; 2] {
    handle_at(&s.task.spec(), s, s.joint)
}

fn handle_at(spec: &TaskSpec, s: &EnvState, joint: f64) -> [f64; 2] {
    match spec.joint {
        Joint::Hinge { radius, phase } => {
            let a = phase + joint;
            [s.fixture[0] + radius * libm::cos(a), s.fixture[1] + radius * libm::sin(a)]
        }
        Joint::Slide { axis } => [s.fixture[0] + joint * axis[0], s.fixture[1] + joint * axis[1]],
        Joint::Ball => s.ball,
    }
}

/// `d handle / d joint`.
fn handle_tangent(spec: &TaskSpec, joint: f64) -> [f64; 2] {
    match spec.joint {
        Joint::Hinge { radius, phase } => {
            let a = phase + joint;
            [-radius * libm::sin(a), radius * libm::cos(a)]
        }
        Joint::Slide { axis } => axis,
        Joint::Ball => [0.0, 0.0],
    }
}

/// Unit direction in which the interaction point should move to make progress.
pub fn progress_direction(s: &EnvState) -> [f64; 2] {
    let spec = s.task.spec();
    let v = match spec.joint {
        Joint::Ball => sub(s.fixture, s.ball),
        _ => {
            let t = handle_tangent(&spec, s.joint);
            let sign = if spec.opens { 1.0 } else { -1.0 };
            [sign * t[0], sign * t[1]]
        }
    };
    let n = libm::hypot(v[0], v[1]);
    if n > 0.0 {
        [v[0] / n, v[1] / n]
    } else {
        [0.0, 0.0]
    }
}

/// Ground-truth success predicate.
pub fn success(s: &EnvState) -> bool {
    let spec = s.task.spec();
    match spec.joint {
        Joint::Ball => dist(s.ball, s.fixture) <= spec.threshold,
        _ if spec.opens => s.joint >= spec.threshold,
        _ => s.joint <= spec.threshold,
    }
}

/// Policy input: gripper position, grip state, grasp flag, offset to the
/// interaction point, normalized progress, progress direction and (for the
/// ball) the ball-to-goal offset.
pub fn observe(s: &EnvState) -> Vec<f64> {
    let spec = s.task.spec();
    let h = handle_position(s);
    let rel = sub(h, s.gripper);
    let progress = match spec.joint {
        Joint::Ball => dist(s.ball, s.fixture),
        _ => s.joint / spec.joint_max,
    };
    let dir = progress_direction(s);
    let goal_rel = if spec.joint == Joint::Ball { sub(s.fixture, s.ball) } else { [0.0, 0.0] };
    vec![
        s.gripper[0],
        s.gripper[1],
        if s.gripper_closed { 1.0 } else { -1.0 },
        if s.grasping { 1.0 } else { 0.0 },
        rel[0],
        rel[1],
        progress,
        dir[0],
        dir[1],
        goal_rel[0],
        goal_rel[1],
    ]
}

/// Canonical event names a task can emit.
pub fn event_vocabulary(task: TaskId) -> Vec<String> {
    let spec = task.spec();
    let o = spec.object;
    let mut v = vec![format!("{o}-approach"), format!("{o}-retreat")];
    match task {
        TaskId::ButtonPress => v.extend([format!("{o}-press"), format!("{o}-pressed")]),
        TaskId::FaucetOpen => v.extend([format!("{o}-turn"), format!("{o}-open")]),
        TaskId::PushBall => {
            v.extend([format!("{o}-push-toward-goal"), format!("{o}-push-away"), format!("{o}-in-goal")])
        }
        _ => {
            v.extend([format!("{o}-grasp"), format!("{o}-pull"), format!("{o}-push"), String::from("grip-miss")]);
            v.push(if spec.opens { format!("{o}-open") } else { format!("{o}-closed") });
        }
    }
    v
}

/// `cmd_dq` is the joint motion the action asked for before the joint limits
/// were applied; pulling or pushing against a stop still counts as such.
fn events(prev: &EnvState, next: &EnvState, cmd_dq: f64) -> BTreeSet<String> {
    let spec = next.task.spec();
    let o = spec.object;
    let mut ev = BTreeSet::new();
    let d0 = dist(prev.gripper, handle_position(prev));
    let d1 = dist(next.gripper, handle_position(next));
    if next.grasping || d1 < NEAR_RADIUS || d0 - d1 > MOTION_EPS {
        ev.insert(format!("{o}-approach"));
    }
    if !next.grasping && d1 > NEAR_RADIUS && d1 - d0 > MOTION_EPS {
        ev.insert(format!("{o}-retreat"));
    }
    let dq = next.joint - prev.joint;
    let succeeded = success(next);
    match next.task {
        TaskId::ButtonPress => {
            if dq > JOINT_EPS {
                ev.insert(format!("{o}-press"));
            }
            if succeeded {
                ev.insert(format!("{o}-pressed"));
            }
        }
        TaskId::FaucetOpen => {
            if dq > JOINT_EPS {
                ev.insert(format!("{o}-turn"));
            }
            if succeeded {
                ev.insert(format!("{o}-open"));
            }
        }
        TaskId::PushBall => {
            let moved = dist(prev.ball, next.ball) > 1e-9;
            let g0 = dist(prev.ball, prev.fixture);
            let g1 = dist(next.ball, next.fixture);
            if moved && g1 < g0 {
                ev.insert(format!("{o}-push-toward-goal"));
            }
            if moved && g1 > g0 {
                ev.insert(format!("{o}-push-away"));
            }
            if succeeded {
                ev.insert(format!("{o}-in-goal"));
            }
        }
        _ => {
            if next.grasping {
                ev.insert(format!("{o}-grasp"));
            }
            if next.gripper_closed && !next.grasping {
                ev.insert(String::from("grip-miss"));
            }
            if cmd_dq > JOINT_EPS {
                ev.insert(format!("{o}-pull"));
            }
            if cmd_dq < -JOINT_EPS {
                ev.insert(format!("{o}-push"));
            }
            if succeeded {
                ev.insert(if spec.opens { format!("{o}-open") } else { format!("{o}-closed") });
            }
        }
    }
    ev
}

/// Frame for the initial observation.
pub fn initial_frame(s: &EnvState) -> FrameFeature {
    FrameFeature { values: observe(s), event_tags: events(s, s, 0.0) }
}

/// Deterministic transition. Actions are clipped to `[-1, 1]`.
pub fn step(s: &EnvState, action: &[f64]) -> Step {
    let spec = s.task.spec();
    let a = |i: usize| action.get(i).copied().unwrap_or(0.0).clamp(-1.0, 1.0);
    let delta = [MAX_STEP * a(0), MAX_STEP * a(1)];
    let close_cmd = a(2) > 0.0;

    let mut next = s.clone();
    let mut cmd_dq = 0.0;
    next.t += 1;
    next.gripper_closed = close_cmd;
    let h0 = handle_position(s);
    let d0 = dist(s.gripper, h0);

    next.grasping = spec.graspable && close_cmd && (s.grasping || (!s.gripper_closed && d0 < GRASP_RADIUS));

    if next.grasping {
        // The gripper is attached to the handle and can only move it along its path.
        let t = handle_tangent(&spec, s.joint);
        let tt = t[0] * t[0] + t[1] * t[1];
        let dq = (delta[0] * t[0] + delta[1] * t[1]) / tt;
        cmd_dq = dq;
        next.joint = (s.joint + dq).clamp(0.0, spec.joint_max);
        next.gripper = handle_at(&spec, s, next.joint);
    } else {
        next.gripper = clamp_world([s.gripper[0] + delta[0], s.gripper[1] + delta[1]]);
        match spec.joint {
            Joint::Ball => {
                // Sub-steps keep the gripper from tunnelling through the ball.
                let mut g = s.gripper;
                for _ in 0..BALL_SUBSTEPS {
                    g = clamp_world([g[0] + delta[0] / BALL_SUBSTEPS as f64, g[1] + delta[1] / BALL_SUBSTEPS as f64]);
                    let off = sub(next.ball, g);
                    let d = libm::hypot(off[0], off[1]);
                    if d < CONTACT_RADIUS && d > 1e-12 {
                        next.ball =
                            clamp_world([g[0] + CONTACT_RADIUS * off[0] / d, g[1] + CONTACT_RADIUS * off[1] / d]);
                    }
                }
            }
            _ if d0 < CONTACT_RADIUS => {
                let t = handle_tangent(&spec, s.joint);
                let tt = t[0] * t[0] + t[1] * t[1];
                let along = spec.push_sign * (delta[0] * t[0] + delta[1] * t[1]) / tt;
                if along > 0.0 {
                    cmd_dq = spec.push_sign * along;
                    next.joint = (s.joint + spec.push_sign * along).clamp(0.0, spec.joint_max);
                }
            }
            _ => {}
        }
    }
    next.gripper_vel = sub(next.gripper, s.gripper);

    let ev = events(s, &next, cmd_dq);
    let done = success(&next) || next.t >= HORIZON;
    let frame = FrameFeature { values: observe(&next), event_tags: ev.clone() };
    Step { state: next, frame, events: ev, done }
}

/// Interface the learner uses to drive an environment.
///
/// Ground truth is only reachable through [`Environment::ground_truth_success`],
/// which the trainer calls for labeling and evaluation alone.
pub trait Environment {
    fn task(&self) -> TaskId;
    /// Starts an episode and returns its first frame.
    fn reset(&mut self, seed: u64) -> FrameFeature;
    fn state(&self) -> &EnvState;
    /// Advances one step and returns `(frame, done)`.
    fn step(&mut self, action: &[f64]) -> (FrameFeature, bool);
    fn ground_truth_success(&self) -> bool;
}

/// Owning wrapper around the pure transition functions.
#[derive(Debug, Clone)]
pub struct ToyEnv {
    state: EnvState,
}

impl ToyEnv {
    pub fn new(task: TaskId) -> Self {
        ToyEnv { state: reset(task, 0) }
    }
}

impl Environment for ToyEnv {
    fn task(&self) -> TaskId {
        self.state.task
    }

    fn reset(&mut self, seed: u64) -> FrameFeature {
        self.state = reset(self.state.task, seed);
        initial_frame(&self.state)
    }

    fn state(&self) -> &EnvState {
        &self.state
    }

    fn step(&mut self, action: &[f64]) -> (FrameFeature, bool) {
        let s = step(&self.state, action);
        self.state = s.state;
        (s.frame, s.done)
    }

    fn ground_truth_success(&self) -> bool {
        success(&self.state)
    }
}

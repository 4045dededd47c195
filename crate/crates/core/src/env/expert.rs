use alloc::vec;
use alloc::vec::Vec;

use super::{dist, handle_position, progress_direction, sub, EnvState, Joint, GRASP_RADIUS, MAX_STEP};

/// Hand-written controller that solves every task in the suite.
#[derive(Debug, Clone, Copy, Default)]
pub struct ScriptedExpert;

const OPEN: f64 = -1.0;
const CLOSE: f64 = 1.0;

/// Action moving the gripper towards `target`, capped at one full step.
fn move_to(from: [f64; 2], target: [f64; 2], grip: f64) -> Vec<f64> {
    let d = sub(target, from);
    let scale = libm::fmax(libm::fabs(d[0]), libm::fabs(d[1])) / MAX_STEP;
    if scale <= 1.0 {
        vec![d[0] / MAX_STEP, d[1] / MAX_STEP, grip]
    } else {
        vec![d[0] / MAX_STEP / scale, d[1] / MAX_STEP / scale, grip]
    }
}

fn push_along(dir: [f64; 2], grip: f64) -> Vec<f64> {
    let m = libm::fmax(libm::fabs(dir[0]), libm::fabs(dir[1]));
    if m == 0.0 {
        return vec![0.0, 0.0, grip];
    }
    vec![dir[0] / m, dir[1] / m, grip]
}

impl ScriptedExpert {
    pub fn act(&mut self, s: &EnvState) -> Vec<f64> {
        let spec = s.task.spec();
        let h = handle_position(s);
        let dir = progress_direction(s);
        match spec.joint {
            Joint::Ball => {
                let ball = s.ball;
                let to_ball = sub(ball, s.gripper);
                let ahead = to_ball[0] * dir[0] + to_ball[1] * dir[1];
                let lateral = libm::fabs(to_ball[0] * dir[1] - to_ball[1] * dir[0]);
                if ahead > 0.02 && lateral < 0.015 {
                    push_along(dir, OPEN)
                } else {
                    let behind = [ball[0] - 0.09 * dir[0], ball[1] - 0.09 * dir[1]];
                    move_to(s.gripper, behind, OPEN)
                }
            }
            _ if spec.graspable && spec.opens => {
                if s.grasping {
                    push_along(dir, CLOSE)
                } else if s.gripper_closed {
                    move_to(s.gripper, h, OPEN)
                } else if dist(s.gripper, h) < 0.4 * GRASP_RADIUS {
                    vec![0.0, 0.0, CLOSE]
                } else {
                    move_to(s.gripper, h, OPEN)
                }
            }
            _ => {
                let behind = [h[0] - 0.03 * dir[0], h[1] - 0.03 * dir[1]];
                if dist(s.gripper, behind) > 0.015 && dist(s.gripper, h) > 0.035 {
                    move_to(s.gripper, behind, OPEN)
                } else {
                    push_along(dir, OPEN)
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{reset, step, success, TaskId, HORIZON};
    use alloc::string::String;

    fn run(task: TaskId, seed: u64) -> (bool, usize, Vec<alloc::collections::BTreeSet<String>>) {
        let mut s = reset(task, seed);
        let mut ex = ScriptedExpert;
        let mut timeline = Vec::new();
        for _ in 0..HORIZON {
            let st = step(&s, &ex.act(&s));
            timeline.push(st.events.clone());
            s = st.state;
            if st.done {
                break;
            }
        }
        (success(&s), s.t, timeline)
    }

    #[test]
    fn expert_solves_every_task_for_many_seeds() {
        for task in TaskId::ALL {
            for seed in 0..50 {
                let (ok, t, _) = run(task, seed);
                assert!(ok, "{task} seed {seed} failed after {t} steps");
            }
        }
    }

    #[test]
    fn door_events_follow_subgoal_order() {
        let (_, _, tl) = run(TaskId::DoorOpen, 0);
        let first = |e: &str| tl.iter().position(|s| s.contains(e)).unwrap();
        let (a, g, p, o) = (first("door-approach"), first("door-grasp"), first("door-pull"), first("door-open"));
        assert!(a < g && g <= p && p <= o, "{a} {g} {p} {o}");
    }
}

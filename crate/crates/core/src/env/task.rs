use alloc::format;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Registered manipulation tasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TaskId {
    #[serde(rename = "door-open")]
    DoorOpen,
    #[serde(rename = "door-close")]
    DoorClose,
    #[serde(rename = "drawer-open")]
    DrawerOpen,
    #[serde(rename = "drawer-close")]
    DrawerClose,
    #[serde(rename = "window-open")]
    WindowOpen,
    #[serde(rename = "window-close")]
    WindowClose,
    #[serde(rename = "button-press")]
    ButtonPress,
    #[serde(rename = "faucet-open")]
    FaucetOpen,
    #[serde(rename = "push-ball")]
    PushBall,
}

/// How the task's object moves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Joint {
    /// Handle on a circle of `radius` around the fixture point, at angle
    /// `phase + joint` (radians).
    Hinge { radius: f64, phase: f64 },
    /// Handle at `fixture + joint * axis`.
    Slide { axis: [f64; 2] },
    /// A free ball pushed towards a goal at the fixture point.
    Ball,
}

/// Static description of a task.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct TaskSpec {
    pub object: &'static str,
    pub joint: Joint,
    /// Joint travel `[0, max]`.
    pub joint_max: f64,
    /// Initial joint value.
    pub joint_start: f64,
    /// `true` when success means a large joint value.
    pub opens: bool,
    /// Success threshold on the joint value.
    pub threshold: f64,
    /// The handle can be grasped and dragged both ways.
    pub graspable: bool,
    /// Sign of joint motion produced by pushing without a grasp.
    pub push_sign: f64,
}

impl TaskId {
    pub const ALL: [TaskId; 9] = [
        TaskId::DoorOpen,
        TaskId::DoorClose,
        TaskId::DrawerOpen,
        TaskId::DrawerClose,
        TaskId::WindowOpen,
        TaskId::WindowClose,
        TaskId::ButtonPress,
        TaskId::FaucetOpen,
        TaskId::PushBall,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskId::DoorOpen => "door-open",
            TaskId::DoorClose => "door-close",
            TaskId::DrawerOpen => "drawer-open",
            TaskId::DrawerClose => "drawer-close",
            TaskId::WindowOpen => "window-open",
            TaskId::WindowClose => "window-close",
            TaskId::ButtonPress => "button-press",
            TaskId::FaucetOpen => "faucet-open",
            TaskId::PushBall => "push-ball",
        }
    }

    /// The undecomposed instruction for the task.
    pub fn instruction(self) -> &'static str {
        match self {
            TaskId::DoorOpen => "open the door",
            TaskId::DoorClose => "close the door",
            TaskId::DrawerOpen => "open the drawer",
            TaskId::DrawerClose => "close the drawer",
            TaskId::WindowOpen => "open the window",
            TaskId::WindowClose => "close the window",
            TaskId::ButtonPress => "press the button",
            TaskId::FaucetOpen => "open the faucet",
            TaskId::PushBall => "push the ball into the goal",
        }
    }

    pub fn from_instruction(text: &str) -> Option<TaskId> {
        TaskId::ALL.into_iter().find(|t| t.instruction() == text)
    }

    pub(crate) fn spec(self) -> TaskSpec {
        use core::f64::consts::FRAC_PI_2;
        let door = Joint::Hinge { radius: 0.2, phase: 0.0 };
        let drawer = Joint::Slide { axis: [0.0, -1.0] };
        let window = Joint::Slide { axis: [1.0, 0.0] };
        match self {
            TaskId::DoorOpen => TaskSpec {
                object: "door",
                joint: door,
                joint_max: FRAC_PI_2,
                joint_start: 0.0,
                opens: true,
                threshold: 0.9,
                graspable: true,
                push_sign: -1.0,
            },
            TaskId::DoorClose => TaskSpec {
                object: "door",
                joint: door,
                joint_max: FRAC_PI_2,
                joint_start: FRAC_PI_2,
                opens: false,
                threshold: 0.15,
                graspable: true,
                push_sign: -1.0,
            },
            TaskId::DrawerOpen => TaskSpec {
                object: "drawer",
                joint: drawer,
                joint_max: 0.25,
                joint_start: 0.0,
                opens: true,
                threshold: 0.15,
                graspable: true,
                push_sign: -1.0,
            },
            TaskId::DrawerClose => TaskSpec {
                object: "drawer",
                joint: drawer,
                joint_max: 0.25,
                joint_start: 0.25,
                opens: false,
                threshold: 0.02,
                graspable: true,
                push_sign: -1.0,
            },
            TaskId::WindowOpen => TaskSpec {
                object: "window",
                joint: window,
                joint_max: 0.3,
                joint_start: 0.0,
                opens: true,
                threshold: 0.18,
                graspable: true,
                push_sign: -1.0,
            },
            TaskId::WindowClose => TaskSpec {
                object: "window",
                joint: window,
                joint_max: 0.3,
                joint_start: 0.3,
                opens: false,
                threshold: 0.02,
                graspable: true,
                push_sign: -1.0,
            },
            TaskId::ButtonPress => TaskSpec {
                object: "button",
                joint: Joint::Slide { axis: [0.0, -1.0] },
                joint_max: 0.06,
                joint_start: 0.0,
                opens: true,
                threshold: 0.05,
                graspable: false,
                push_sign: 1.0,
            },
            TaskId::FaucetOpen => TaskSpec {
                object: "faucet",
                joint: Joint::Hinge { radius: 0.12, phase: -FRAC_PI_2 },
                joint_max: FRAC_PI_2,
                joint_start: 0.0,
                opens: true,
                threshold: 1.0,
                graspable: false,
                push_sign: 1.0,
            },
            TaskId::PushBall => TaskSpec {
                object: "ball",
                joint: Joint::Ball,
                joint_max: 0.0,
                joint_start: 0.0,
                opens: false,
                threshold: 0.06,
                graspable: false,
                push_sign: 0.0,
            },
        }
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TaskId::ALL.into_iter().find(|t| t.as_str() == s).ok_or_else(|| Error::NotFound(format!("unknown task {s:?}")))
    }
}

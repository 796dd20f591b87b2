use serde::{Deserialize, Serialize};

use super::RewardError;
use crate::geometry::Quat;

/// One frame of robot and box state.
///
/// Every field is optional so partial traces load; a component that reads an
/// absent field fails with the field's name. Angles follow the reward-table
/// notation: `theta`, `phi`, `psi` are roll, pitch, yaw. Pairs are (left, right).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StateRecord {
    pub hand_pos: Option<[[f64; 3]; 2]>,
    pub hand_target: Option<[[f64; 3]; 2]>,
    pub elbow_pos: Option<[[f64; 3]; 2]>,
    pub elbow_target: Option<[[f64; 3]; 2]>,
    pub hand_phi: Option<[f64; 2]>,
    pub hand_contact: Option<[bool; 2]>,
    pub hand_contact_required: Option<[bool; 2]>,

    /// Base position relative to its target, in the robot frame (m).
    pub base_pos: Option<[f64; 3]>,
    pub base_height: Option<f64>,
    pub base_height_target: Option<f64>,
    pub base_theta: Option<f64>,
    pub base_phi: Option<f64>,
    pub base_psi: Option<f64>,
    pub base_acc: Option<[f64; 3]>,
    pub com: Option<[f64; 3]>,

    pub foot_pos: Option<[[f64; 3]; 2]>,
    pub foot_vel: Option<[[f64; 3]; 2]>,
    pub foot_quat: Option<[Quat; 2]>,
    pub foot_quat_target: Option<[Quat; 2]>,
    /// Contact force vectors (N).
    pub foot_force: Option<[[f64; 3]; 2]>,
    pub cop: Option<[f64; 2]>,
    pub foot_target: Option<[f64; 2]>,

    pub torque: Option<Vec<f64>>,
    pub torque_limit: Option<Vec<f64>>,
    pub joint_vel: Option<Vec<f64>>,
    pub motor_vel: Option<Vec<f64>>,
    pub upper_joints: Option<Vec<f64>>,
    pub upper_joints_ref: Option<Vec<f64>>,

    pub box_theta: Option<f64>,
    pub box_phi: Option<f64>,
    pub box_psi: Option<f64>,
    pub box_psi_target: Option<f64>,
    pub box_acc: Option<[f64; 3]>,
    pub box_xy: Option<[f64; 2]>,
    pub box_xy_target: Option<[f64; 2]>,
    pub box_quat: Option<Quat>,
    pub box_quat_initial: Option<Quat>,
    /// Box position in the base frame, now and at pickup.
    pub box_base_pos: Option<[f64; 3]>,
    pub box_base_pos_initial: Option<[f64; 3]>,
    pub box_mass: Option<f64>,
    pub box_contact: Option<bool>,
    pub table_force: Option<f64>,
    pub self_collision: Option<bool>,

    pub action: Option<Vec<f64>>,
    pub prev_action: Option<Vec<f64>>,
    pub llc_action: Option<Vec<f64>>,
    pub prev_llc_action: Option<Vec<f64>>,
    /// Height command channel of the skill action.
    pub a_z: Option<f64>,
    /// Locomotion command vector.
    pub command: Option<Vec<f64>>,
    pub constellation: Option<Vec<[f64; 3]>>,
    pub constellation_target: Option<Vec<[f64; 3]>>,
}

/// Read a field or fail with its name.
macro_rules! need {
    ($s:expr, $field:ident) => {
        $s.$field
            .as_ref()
            .ok_or($crate::rewards::RewardError::MissingField(stringify!(
                $field
            )))?
    };
}
pub(crate) use need;

impl StateRecord {
    /// Every present numeric field is finite.
    pub fn validate(&self) -> Result<(), RewardError> {
        let v = serde_json::to_value(self).expect("state serializes");
        fn finite(v: &serde_json::Value) -> bool {
            match v {
                serde_json::Value::Number(n) => n.as_f64().is_some_and(f64::is_finite),
                serde_json::Value::Array(a) => a.iter().all(finite),
                serde_json::Value::Object(o) => o.values().all(finite),
                _ => true,
            }
        }
        match v.as_object() {
            Some(o) => match o.iter().find(|(_, x)| !finite(x)) {
                Some((k, _)) => Err(RewardError::NonFinite(k.clone())),
                None => Ok(()),
            },
            None => Ok(()),
        }
    }

    /// A state in which every tracked quantity sits on its target.
    pub fn perfect() -> Self {
        let p = [[0.3, 0.2, 1.0], [0.3, -0.2, 1.0]];
        let feet = [[0.0, 0.165, 0.0], [0.0, -0.165, 0.0]];
        let q = Quat::identity();
        Self {
            hand_pos: Some(p),
            hand_target: Some(p),
            elbow_pos: Some(p),
            elbow_target: Some(p),
            hand_phi: Some([0.0, 0.0]),
            hand_contact: Some([true, true]),
            hand_contact_required: Some([true, true]),
            base_pos: Some([0.0; 3]),
            base_height: Some(0.85),
            base_height_target: Some(0.85),
            base_theta: Some(0.0),
            base_phi: Some(-0.15),
            base_psi: Some(0.0),
            base_acc: Some([0.0; 3]),
            com: Some([0.0, 0.0, 0.9]),
            foot_pos: Some(feet),
            foot_vel: Some([[0.0; 3]; 2]),
            foot_quat: Some([q, q]),
            foot_quat_target: Some([q, q]),
            foot_force: Some([[0.0, 0.0, 300.0], [0.0, 0.0, 300.0]]),
            cop: Some([0.0, 0.0]),
            foot_target: Some([0.0, 0.0]),
            torque: Some(vec![0.0; 4]),
            torque_limit: Some(vec![100.0; 4]),
            joint_vel: Some(vec![0.0; 4]),
            motor_vel: Some(vec![0.0; 4]),
            upper_joints: Some(vec![0.0; 4]),
            upper_joints_ref: Some(vec![0.0; 4]),
            box_theta: Some(0.0),
            box_phi: Some(0.0),
            box_psi: Some(0.3),
            box_psi_target: Some(0.3),
            box_acc: Some([0.0; 3]),
            box_xy: Some([1.0, 0.5]),
            box_xy_target: Some([1.0, 0.5]),
            box_quat: Some(q),
            box_quat_initial: Some(q),
            box_base_pos: Some([0.4, 0.0, 0.1]),
            box_base_pos_initial: Some([0.4, 0.0, 0.1]),
            box_mass: Some(1.5),
            box_contact: Some(true),
            table_force: Some(0.0),
            self_collision: Some(false),
            action: Some(vec![0.1; 4]),
            prev_action: Some(vec![0.1; 4]),
            llc_action: Some(vec![0.2; 4]),
            prev_llc_action: Some(vec![0.2; 4]),
            a_z: Some(0.5),
            command: Some(vec![0.0; 3]),
            constellation: Some(vec![[0.0; 3]; 9]),
            constellation_target: Some(vec![[0.0; 3]; 9]),
        }
    }
}

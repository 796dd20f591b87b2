//! Skill reward components and trace-level physical metrics.
//!
//! Kernel terms are `w * exp(-alpha * c)` with a non-negative cost `c`. Terms without
//! a scale are either indicators (`w * 1[condition]`) or, for the two distance-valued
//! rows without a scale, `w * c`.

mod state;
mod trace;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use state::StateRecord;
pub use trace::{trace_metrics, TraceMetrics};

use crate::geometry::quat_distance;
use crate::schema::{self, SchemaMismatch};
use state::need;

/// Standard gravity (m/s^2), for the table-force ratio.
pub const GRAVITY: f64 = 9.81;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RewardError {
    #[error("state is missing field `{0}`")]
    MissingField(&'static str),
    #[error("field `{0}` is not finite")]
    NonFinite(String),
    #[error("cost must be >= 0, got {0}")]
    NegativeCost(f64),
    #[error("kernel scale must be > 0, got {0}")]
    BadScale(f64),
    #[error("expected {expected} points, got {found}")]
    PointCount { expected: usize, found: usize },
    #[error("vector fields `{0}` and `{1}` differ in length")]
    LengthMismatch(&'static str, &'static str),
    #[error("zero mean foot force")]
    ZeroForce,
    #[error("empty trace")]
    EmptyTrace,
    #[error("{0} rewards are not defined; use pickup, place, goto or goto_with_box")]
    UnknownSkill(String),
    #[error("malformed registry: {0}")]
    Malformed(String),
    #[error(transparent)]
    Schema(#[from] SchemaMismatch),
}

/// `w * exp(-alpha * c)`.
pub fn kernel(w: f64, alpha: f64, c: f64) -> Result<f64, RewardError> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(RewardError::BadScale(alpha));
    }
    if !(c >= 0.0) {
        return Err(RewardError::NegativeCost(c));
    }
    Ok(w * (-alpha * c).exp())
}

fn dist<const N: usize>(a: &[f64; N], b: &[f64; N]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

fn norm<const N: usize>(a: &[f64; N]) -> f64 {
    dist(a, &[0.0; N])
}

/// Sum of distances between nine tracked points and their targets.
pub fn constellation_cost(current: &[[f64; 3]], target: &[[f64; 3]]) -> Result<f64, RewardError> {
    for n in [current.len(), target.len()] {
        if n != 9 {
            return Err(RewardError::PointCount {
                expected: 9,
                found: n,
            });
        }
    }
    Ok(current.iter().zip(target).map(|(a, b)| dist(a, b)).sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    Pickup,
    Place,
    Shared,
    GoTo,
    WithBox,
}

/// Skill whose reward is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardSkill {
    Pickup,
    Place,
    GoTo,
    GoToWithBox,
}

impl std::str::FromStr for RewardSkill {
    type Err = RewardError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "pickup" => Ok(Self::Pickup),
            "place" => Ok(Self::Place),
            "goto" => Ok(Self::GoTo),
            "goto_with_box" => Ok(Self::GoToWithBox),
            _ => Err(RewardError::UnknownSkill(s.to_string())),
        }
    }
}

impl RewardSkill {
    pub fn scopes(self) -> &'static [Scope] {
        match self {
            RewardSkill::Pickup => &[Scope::Pickup, Scope::Shared],
            RewardSkill::Place => &[Scope::Place, Scope::Shared],
            RewardSkill::GoTo => &[Scope::GoTo],
            RewardSkill::GoToWithBox => &[Scope::GoTo, Scope::WithBox],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Kernel,
    Penalty,
    Bonus,
}

/// A value that may differ between the Pickup and Place policies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerSkill {
    One(f64),
    /// (Pickup, Place).
    Split([f64; 2]),
}

impl PerSkill {
    pub fn for_skill(self, skill: RewardSkill) -> f64 {
        match self {
            PerSkill::One(v) => v,
            PerSkill::Split([up, down]) => match skill {
                RewardSkill::Place => down,
                _ => up,
            },
        }
    }
}

/// Cost expressions of the reward rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cost {
    HandToElbowTarget,
    BasePitchRoll,
    BoxTiltInGrasp,
    BoxAcceleration,
    TableForceInGrasp,
    MotorVelocity,
    TorqueRatio,
    FootVelocity,
    SelfCollision,
    BoxTargetXy,
    BoxYawError,
    HandContactMatch,
    ElbowError,
    BasePhi,
    BaseOutsideBound,
    TableContactHard,
    HandTracking,
    HandPhi,
    BaseHeightError,
    BaseThetaLimit,
    CopError,
    StanceWidth,
    StandParallel,
    FootOrientation,
    ActionSmoothness,
    LowLevelSmoothness,
    HeightCommandRange,
    Constellation,
    BasePosition,
    BaseYaw,
    Energy,
    BaseAcceleration,
    CommandNorm,
    BoxContact,
    BoxOrientation,
    BoxBaseDrift,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardComponent {
    pub name: String,
    pub scope: Scope,
    pub kind: Kind,
    pub weight: PerSkill,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub alpha: Option<PerSkill>,
    pub cost: Cost,
}

fn row(
    scope: Scope,
    name: &str,
    cost: Cost,
    w: PerSkill,
    alpha: Option<PerSkill>,
) -> RewardComponent {
    let kind = match (alpha, w) {
        (Some(_), _) => Kind::Kernel,
        (None, PerSkill::One(v)) if v < 0.0 => Kind::Penalty,
        _ => Kind::Bonus,
    };
    RewardComponent {
        name: name.to_string(),
        scope,
        kind,
        weight: w,
        alpha,
        cost,
    }
}

fn rows() -> Vec<RewardComponent> {
    use Cost::*;
    use PerSkill::{One, Split};
    use Scope::*;
    let k = |a: f64| Some(One(a));
    vec![
        row(
            Pickup,
            "hand contact position",
            HandToElbowTarget,
            One(0.5),
            None,
        ),
        row(Pickup, "base pitch roll", BasePitchRoll, One(0.2), k(15.0)),
        row(Pickup, "box rotation", BoxTiltInGrasp, One(0.1), k(10.0)),
        row(
            Pickup,
            "box acceleration",
            BoxAcceleration,
            One(0.05),
            k(0.02),
        ),
        row(Pickup, "table force", TableForceInGrasp, One(0.05), k(2.0)),
        row(Pickup, "motor vel", MotorVelocity, One(0.05), k(0.4)),
        row(Pickup, "torque penalty", TorqueRatio, One(0.05), k(0.05)),
        row(Pickup, "foot velocity", FootVelocity, One(0.05), k(2.0)),
        row(Pickup, "collision penalty", SelfCollision, One(-1.0), None),
        row(Place, "box target", BoxTargetXy, One(0.15), k(15.0)),
        row(Place, "box rotation", BoxYawError, One(0.15), k(15.0)),
        row(
            Place,
            "hand contact bonus",
            HandContactMatch,
            One(0.05),
            None,
        ),
        row(Place, "elbow position error", ElbowError, One(0.2), k(5.0)),
        row(Place, "base roll error", BasePhi, One(0.1), k(15.0)),
        row(
            Place,
            "base position error",
            BaseOutsideBound,
            One(-0.2),
            None,
        ),
        row(
            Place,
            "soft table contact",
            TableContactHard,
            One(-0.1),
            None,
        ),
        row(
            Shared,
            "hand traj tracking",
            HandTracking,
            Split([0.1, 0.12]),
            k(5.5),
        ),
        row(
            Shared,
            "hand roll",
            HandPhi,
            Split([0.05, 0.1]),
            Some(Split([1.0, 10.0])),
        ),
        row(
            Shared,
            "base height error",
            BaseHeightError,
            Split([0.5, 0.6]),
            Some(Split([8.0, 10.0])),
        ),
        row(Shared, "base pitch limit", BaseThetaLimit, One(-0.1), None),
        row(Shared, "CoP stability error", CopError, One(0.15), k(20.0)),
        row(
            Shared,
            "stance width error",
            StanceWidth,
            One(0.05),
            k(25.0),
        ),
        row(Shared, "stand parallel", StandParallel, One(0.05), k(10.0)),
        row(
            Shared,
            "foot orientation",
            FootOrientation,
            One(0.05),
            k(20.0),
        ),
        row(
            Shared,
            "action smoothness",
            ActionSmoothness,
            One(0.1),
            k(6.0),
        ),
        row(
            Shared,
            "low-level cmd",
            LowLevelSmoothness,
            One(0.05),
            k(5.0),
        ),
        row(
            Shared,
            "height cmd penalty",
            HeightCommandRange,
            One(-0.1),
            None,
        ),
        row(GoTo, "constellation", Constellation, One(1.0), k(0.5)),
        row(GoTo, "base position error", BasePosition, One(0.2), k(5.0)),
        row(GoTo, "base yaw error", BaseYaw, One(0.2), k(3.0)),
        row(GoTo, "foot orientation", FootOrientation, One(0.05), k(4.0)),
        row(GoTo, "stance width error", StanceWidth, One(0.2), k(1.0)),
        row(GoTo, "stand parallel", StandParallel, One(0.2), k(1.0)),
        row(
            GoTo,
            "action smoothness",
            ActionSmoothness,
            One(0.1),
            k(8.0),
        ),
        row(GoTo, "torque penalty", TorqueRatio, One(0.02), k(5.0)),
        row(GoTo, "energy penalty", Energy, One(0.1), k(0.1)),
        row(
            GoTo,
            "acceleration penalty",
            BaseAcceleration,
            One(0.05),
            k(0.01),
        ),
        row(GoTo, "command penalty", CommandNorm, One(-0.05), None),
        row(WithBox, "hand roll", HandPhi, One(0.05), k(10.0)),
        row(WithBox, "contact", BoxContact, One(0.05), None),
        row(WithBox, "box orientation", BoxOrientation, One(0.1), k(5.0)),
        row(
            WithBox,
            "box base position",
            BoxBaseDrift,
            One(0.05),
            k(5.0),
        ),
    ]
}

/// The full component table plus evaluation parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardRegistry {
    pub schema: String,
    pub components: Vec<RewardComponent>,
    /// Per-motor weights for the motor-velocity row; empty means all ones.
    #[serde(default)]
    pub motor_weights: Vec<f64>,
}

impl Default for RewardRegistry {
    fn default() -> Self {
        Self {
            schema: schema::REWARD_REGISTRY.to_string(),
            components: rows(),
            motor_weights: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreakdownEntry {
    pub scope: Scope,
    pub name: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub skill: RewardSkill,
    pub terms: Vec<BreakdownEntry>,
    pub total: f64,
}

fn mean_abs_diff(
    a: &[f64],
    b: &[f64],
    na: &'static str,
    nb: &'static str,
) -> Result<f64, RewardError> {
    if a.len() != b.len() {
        return Err(RewardError::LengthMismatch(na, nb));
    }
    if a.is_empty() {
        return Ok(0.0);
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64)
}

fn pair_dist(a: &[[f64; 3]; 2], b: &[[f64; 3]; 2]) -> f64 {
    dist(&a[0], &b[0]) + dist(&a[1], &b[1])
}

fn both_hands(s: &StateRecord) -> Result<bool, RewardError> {
    let c = need!(s, hand_contact);
    Ok(c[0] && c[1])
}

impl RewardRegistry {
    pub fn from_json(text: &str) -> Result<Self, RewardError> {
        let reg: RewardRegistry =
            serde_json::from_str(text).map_err(|e| RewardError::Malformed(e.to_string()))?;
        schema::check(schema::REWARD_REGISTRY, &reg.schema)?;
        for c in &reg.components {
            c.validate()?;
        }
        Ok(reg)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("registry serializes")
    }

    pub fn component(&self, scope: Scope, name: &str) -> Option<&RewardComponent> {
        self.components
            .iter()
            .find(|c| c.scope == scope && c.name == name)
    }

    /// Raw cost (kernel rows) or raw value (indicator and linear rows).
    pub fn cost(&self, cost: Cost, s: &StateRecord) -> Result<f64, RewardError> {
        use Cost::*;
        let ind = |b: bool| if b { 1.0 } else { 0.0 };
        Ok(match cost {
            HandToElbowTarget => pair_dist(need!(s, hand_pos), need!(s, elbow_target)),
            BasePitchRoll => need!(s, base_theta).abs() + (need!(s, base_phi) + 0.15).abs(),
            BoxTiltInGrasp => {
                let c = need!(s, box_theta).abs() + need!(s, box_phi).abs();
                if both_hands(s)? {
                    c
                } else {
                    0.0
                }
            }
            BoxAcceleration => norm(need!(s, box_acc)),
            TableForceInGrasp => {
                let f = need!(s, table_force) / (need!(s, box_mass) * GRAVITY);
                if both_hands(s)? {
                    f.abs()
                } else {
                    0.0
                }
            }
            MotorVelocity => {
                let v = need!(s, motor_vel);
                if v.is_empty() {
                    0.0
                } else {
                    let w = |i: usize| self.motor_weights.get(i).copied().unwrap_or(1.0);
                    v.iter()
                        .enumerate()
                        .map(|(i, x)| (x * w(i)).abs())
                        .sum::<f64>()
                        / v.len() as f64
                }
            }
            TorqueRatio => {
                let t = need!(s, torque);
                let m = need!(s, torque_limit);
                if t.len() != m.len() {
                    return Err(RewardError::LengthMismatch("torque", "torque_limit"));
                }
                if t.is_empty() {
                    0.0
                } else {
                    t.iter().zip(m).map(|(a, b)| (a / b).abs()).sum::<f64>() / t.len() as f64
                }
            }
            FootVelocity => {
                let v = need!(s, foot_vel);
                norm(&v[0]) + norm(&v[1])
            }
            SelfCollision => ind(*need!(s, self_collision)),
            BoxTargetXy => dist(need!(s, box_xy_target), need!(s, box_xy)),
            BoxYawError => (need!(s, box_psi) - need!(s, box_psi_target)).abs(),
            HandContactMatch => ind(need!(s, hand_contact) == need!(s, hand_contact_required)),
            ElbowError => pair_dist(need!(s, elbow_pos), need!(s, elbow_target)),
            BasePhi => need!(s, base_phi).abs(),
            BaseOutsideBound => ind(norm(need!(s, base_pos)) > 0.12),
            TableContactHard => ind(*need!(s, table_force) > 30.0),
            HandTracking => pair_dist(need!(s, hand_pos), need!(s, hand_target)),
            HandPhi => {
                let p = need!(s, hand_phi);
                p[0].abs() + p[1].abs()
            }
            BaseHeightError => (need!(s, base_height) - need!(s, base_height_target)).abs(),
            BaseThetaLimit => ind(need!(s, base_theta).abs() > 0.25),
            CopError => dist(need!(s, cop), need!(s, foot_target)),
            StanceWidth => {
                let f = need!(s, foot_pos);
                ((f[0][1] - f[1][1]).abs() - 0.33).abs()
            }
            StandParallel => {
                let f = need!(s, foot_pos);
                (f[0][0] - f[1][0]).abs()
            }
            FootOrientation => {
                let q = need!(s, foot_quat);
                let t = need!(s, foot_quat_target);
                let d =
                    |a, b| quat_distance(a, b).map_err(|e| RewardError::Malformed(e.to_string()));
                d(&q[0], &t[0])? + d(&q[1], &t[1])?
            }
            ActionSmoothness => mean_abs_diff(
                need!(s, action),
                need!(s, prev_action),
                "action",
                "prev_action",
            )?,
            LowLevelSmoothness => mean_abs_diff(
                need!(s, llc_action),
                need!(s, prev_llc_action),
                "llc_action",
                "prev_llc_action",
            )?,
            HeightCommandRange => {
                let a = *need!(s, a_z);
                ind(!(0.1..=0.9).contains(&a))
            }
            Constellation => {
                constellation_cost(need!(s, constellation), need!(s, constellation_target))?
            }
            BasePosition => norm(need!(s, base_pos)),
            BaseYaw => need!(s, base_psi).abs(),
            Energy => {
                let t = need!(s, torque);
                let v = need!(s, joint_vel);
                if t.len() != v.len() {
                    return Err(RewardError::LengthMismatch("torque", "joint_vel"));
                }
                if t.is_empty() {
                    0.0
                } else {
                    t.iter().zip(v).map(|(a, b)| (a * b).abs()).sum::<f64>() / t.len() as f64
                }
            }
            BaseAcceleration => norm(need!(s, base_acc)),
            CommandNorm => need!(s, command).iter().map(|x| x * x).sum::<f64>().sqrt(),
            BoxContact => ind(*need!(s, box_contact)),
            BoxOrientation => quat_distance(need!(s, box_quat), need!(s, box_quat_initial))
                .map_err(|e| RewardError::Malformed(e.to_string()))?,
            BoxBaseDrift => dist(need!(s, box_base_pos), need!(s, box_base_pos_initial)),
        })
    }

    pub fn eval_component(
        &self,
        comp: &RewardComponent,
        skill: RewardSkill,
        s: &StateRecord,
    ) -> Result<f64, RewardError> {
        let w = comp.weight.for_skill(skill);
        let c = self.cost(comp.cost, s)?;
        match comp.alpha {
            Some(a) => kernel(w, a.for_skill(skill), c),
            None => Ok(w * c),
        }
    }

    /// Every applicable component for `skill`, in table order.
    pub fn eval_skill_reward(
        &self,
        skill: RewardSkill,
        s: &StateRecord,
    ) -> Result<RewardBreakdown, RewardError> {
        let mut terms = Vec::new();
        for comp in self
            .components
            .iter()
            .filter(|c| skill.scopes().contains(&c.scope))
        {
            terms.push(BreakdownEntry {
                scope: comp.scope,
                name: comp.name.clone(),
                value: self.eval_component(comp, skill, s)?,
            });
        }
        let total = terms.iter().map(|t| t.value).sum();
        Ok(RewardBreakdown {
            skill,
            terms,
            total,
        })
    }
}

impl RewardComponent {
    pub fn validate(&self) -> Result<(), RewardError> {
        let vals = |p: PerSkill| match p {
            PerSkill::One(v) => vec![v],
            PerSkill::Split(v) => v.to_vec(),
        };
        let bad = |m: &str| Err(RewardError::Malformed(format!("{}: {m}", self.name)));
        match (self.kind, self.alpha) {
            (Kind::Kernel, Some(a)) => {
                if vals(a).iter().any(|v| !(*v > 0.0)) {
                    return bad("kernel scale must be > 0");
                }
                if vals(self.weight).iter().any(|v| !(*v > 0.0)) {
                    return bad("kernel weight must be > 0");
                }
            }
            (Kind::Kernel, None) => return bad("kernel row needs a scale"),
            (_, Some(_)) => return bad("only kernel rows take a scale"),
            (Kind::Penalty, None) => {
                if vals(self.weight).iter().any(|v| !(*v < 0.0)) {
                    return bad("penalty weight must be < 0");
                }
            }
            (Kind::Bonus, None) => {}
        }
        Ok(())
    }
}

/// Evaluate with the built-in registry.
pub fn eval_skill_reward(
    skill: RewardSkill,
    s: &StateRecord,
) -> Result<RewardBreakdown, RewardError> {
    RewardRegistry::default().eval_skill_reward(skill, s)
}

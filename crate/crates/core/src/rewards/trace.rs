use serde::{Deserialize, Serialize};

use super::state::need;
use super::{RewardError, StateRecord};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceMetrics {
    /// Mean horizontal distance from the CoM to the midpoint between the feet (cm).
    pub com_error_cm: f64,
    /// Coefficient of variation (population std / mean) of per-foot force
    /// magnitudes pooled over the trace.
    pub force_distribution: f64,
    pub upper_joint_mae_median: f64,
    pub upper_joint_mae_iqr: f64,
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn trace_metrics(trace: &[StateRecord]) -> Result<TraceMetrics, RewardError> {
    if trace.is_empty() {
        return Err(RewardError::EmptyTrace);
    }
    let mut com = 0.0;
    let mut forces = Vec::with_capacity(2 * trace.len());
    let mut mae = Vec::with_capacity(trace.len());
    for s in trace {
        let c = need!(s, com);
        let f = need!(s, foot_pos);
        let mid = [(f[0][0] + f[1][0]) / 2.0, (f[0][1] + f[1][1]) / 2.0];
        com += (c[0] - mid[0]).hypot(c[1] - mid[1]);
        for v in need!(s, foot_force) {
            forces.push(v.iter().map(|x| x * x).sum::<f64>().sqrt());
        }
        let q = need!(s, upper_joints);
        let r = need!(s, upper_joints_ref);
        if q.len() != r.len() {
            return Err(RewardError::LengthMismatch(
                "upper_joints",
                "upper_joints_ref",
            ));
        }
        mae.push(if q.is_empty() {
            0.0
        } else {
            q.iter().zip(r).map(|(a, b)| (a - b).abs()).sum::<f64>() / q.len() as f64
        });
    }
    let n = forces.len() as f64;
    let mean = forces.iter().sum::<f64>() / n;
    if mean <= 0.0 {
        return Err(RewardError::ZeroForce);
    }
    let var = forces.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / n;
    mae.sort_by(f64::total_cmp);
    Ok(TraceMetrics {
        com_error_cm: 100.0 * com / trace.len() as f64,
        force_distribution: var.sqrt() / mean,
        upper_joint_mae_median: quantile(&mae, 0.5),
        upper_joint_mae_iqr: quantile(&mae, 0.75) - quantile(&mae, 0.25),
    })
}

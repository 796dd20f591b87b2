//! Version tags carried by every JSON artifact.

use thiserror::Error;

pub const INSTANCE: &str = "hanoi-instance/1";
pub const PLAN: &str = "hanoi-plan/1";
pub const SKILL_CONFIG: &str = "hanoi-skillcfg/1";
pub const REPORT: &str = "hanoi-report/1";
pub const RECORDS: &str = "hanoi-records/1";
pub const REFERENCE_SET: &str = "hanoi-refset/1";
pub const TRAJECTORY: &str = "hanoi-trajectory/1";
pub const MANIFEST: &str = "hanoi-manifest/1";
pub const REWARD_REGISTRY: &str = "hanoi-rewards/1";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("schema mismatch: expected {expected:?}, found {found:?}")]
pub struct SchemaMismatch {
    pub expected: String,
    pub found: String,
}

pub fn check(expected: &str, found: &str) -> Result<(), SchemaMismatch> {
    if expected == found {
        Ok(())
    } else {
        Err(SchemaMismatch {
            expected: expected.to_string(),
            found: found.to_string(),
        })
    }
}

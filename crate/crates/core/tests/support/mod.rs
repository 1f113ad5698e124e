//! Seeded verification suites shared by the integration tests and the
//! acceptance target.
#![allow(dead_code)]

pub mod fixtures;
pub mod gradcheck;
pub mod oracles;
pub mod sampler;

/// One named comparison against an independent reference.
#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub error: f64,
    pub tolerance: f64,
}

impl Check {
    pub fn new(name: impl Into<String>, error: f64, tolerance: f64) -> Self {
        Check {
            name: name.into(),
            error,
            tolerance,
        }
    }

    pub fn passed(&self) -> bool {
        self.error <= self.tolerance
    }
}

/// Panic listing every failed check.
pub fn assert_all(checks: &[Check]) {
    let failed: Vec<String> = checks
        .iter()
        .filter(|c| !c.passed())
        .map(|c| format!("{}: {:.3e} > {:.1e}", c.name, c.error, c.tolerance))
        .collect();
    assert!(failed.is_empty(), "{} failed:\n{}", failed.len(), failed.join("\n"));
}

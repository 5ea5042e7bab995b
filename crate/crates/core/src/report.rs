use alloc::string::String;
use alloc::vec::Vec;

/// One named check with the observed quantity and the bound it was held to.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Check {
    pub name: String,
    pub observed: f64,
    pub bound: f64,
    pub passed: bool,
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub note: Option<String>,
}

/// Report-style outcome of a validation pass. Failures are recorded, never thrown.
#[derive(Debug, Clone, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ValidationReport {
    /// Seed of the sampler, when sampling was involved.
    pub seed: Option<u64>,
    pub samples: usize,
    pub checks: Vec<Check>,
    /// Global ellipticity constants `(min lower variance, max upper variance)`.
    pub ellipticity: Option<(f64, f64)>,
}

impl ValidationReport {
    pub fn push(&mut self, name: impl Into<String>, observed: f64, bound: f64, passed: bool) {
        self.checks.push(Check { name: name.into(), observed, bound, passed, note: None });
    }

    pub fn push_note(&mut self, name: impl Into<String>, passed: bool, note: impl Into<String>) {
        self.checks.push(Check { name: name.into(), observed: 0.0, bound: 0.0, passed, note: Some(note.into()) });
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn merge(&mut self, other: ValidationReport) {
        self.checks.extend(other.checks);
        if self.ellipticity.is_none() {
            self.ellipticity = other.ellipticity;
        }
        if self.seed.is_none() {
            self.seed = other.seed;
        }
        self.samples = self.samples.max(other.samples);
    }
}

//! Pluggable measurement backends.
//!
//! The search's measure step goes through this trait so a real hardware
//! runner can replace the trace simulator later. Backends are looked up
//! by name; `sim` is the only one shipped.

use crate::chain::HardwareSpec;
use crate::error::Infeasibility;
use crate::schedule::ScheduledCandidate;
use crate::sim;

pub trait Measurer: Sync {
    fn name(&self) -> &str;

    /// Measured execution time in seconds, or an infeasibility signal.
    fn measure(
        &self,
        sched: &ScheduledCandidate,
        hw: &HardwareSpec,
    ) -> Result<f64, Infeasibility>;
}

/// The exact trace simulator as measurement oracle.
pub struct SimMeasurer {
    pub budget: u64,
}

impl Default for SimMeasurer {
    fn default() -> Self {
        SimMeasurer { budget: sim::DEFAULT_BUDGET }
    }
}

impl Measurer for SimMeasurer {
    fn name(&self) -> &str {
        "sim"
    }

    fn measure(
        &self,
        sched: &ScheduledCandidate,
        hw: &HardwareSpec,
    ) -> Result<f64, Infeasibility> {
        let counts = sim::simulate(&sched.lower(), self.budget)?;
        sim::measure_cost(&counts, hw, sched.n_blocks())
    }
}

pub fn measurer_by_name(name: &str) -> Option<Box<dyn Measurer>> {
    match name {
        "sim" => Some(Box::<SimMeasurer>::default()),
        _ => None,
    }
}

pub fn available_measurers() -> &'static [&'static str] {
    &["sim"]
}

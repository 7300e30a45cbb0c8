//! Verification campaigns over the Ising and trajectory models.

mod campaigns;
mod report;
mod signalling;

pub use campaigns::{
    chsh_settings, run_chsh_scan, run_free_will_suite, run_locality_audit, run_no_signalling_suite, run_sampler_check,
    run_signalling_demo, LocalityTarget, SamplerRun, EXACT_TOL, SAMPLER_TV_TOL, TRIG_TOL,
};
pub use report::{CampaignReport, CheckRecord, Observation, Tolerance, CSV_HEADER};
pub use signalling::SignallingWeight;

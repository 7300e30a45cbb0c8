//! Experiment spec files.
//!
//! ```toml
//! extent = 8
//! source = [0, 0]          # lightcone coordinates (u, w)
//! detectors = [-2, 2]      # x positions of the left and right detector lines
//! a_meas = [0.0, 0.0, 1.0]
//! b_meas = [1.0, 0.0, 0.0]
//! epsilon = 0.001
//! weight_rule = "canonical" # or "signalling", which reads `lambda`
//! lambda = 0.5
//! pair_label = 0
//! link_budget = 1000        # optional override of N in the survival check
//! ```

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::SignallingWeight;

use super::lattice::Vertex;
use super::rule::SingletWeight;
use super::setting::Vec3;
use super::spec::ExperimentSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecFile {
    pub extent: u32,
    #[serde(default)]
    pub source: [i32; 2],
    pub detectors: [i32; 2],
    pub a_meas: [f64; 3],
    pub b_meas: [f64; 3],
    pub epsilon: f64,
    #[serde(default = "default_rule")]
    pub weight_rule: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default)]
    pub pair_label: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub link_budget: Option<u32>,
}

fn default_rule() -> String {
    "canonical".into()
}

impl SpecFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("spec files always serialize")
    }

    pub fn build(&self) -> Result<ExperimentSpec> {
        let [dl, dr] = self.detectors;
        let spec = ExperimentSpec::new(self.extent, dl, dr, Vec3(self.a_meas), Vec3(self.b_meas), self.epsilon)?
            .with_source(Vertex::new(self.source[0], self.source[1]), self.pair_label)?
            .with_link_budget(self.link_budget);
        let spec = match self.weight_rule.as_str() {
            "canonical" => spec.with_rule(Arc::new(SingletWeight)),
            "signalling" => {
                let lambda =
                    self.lambda.ok_or_else(|| Error::Spec("weight_rule 'signalling' needs a lambda".into()))?;
                spec.with_rule(Arc::new(SignallingWeight::new(lambda)?))
            }
            other => return Err(Error::Spec(format!("unknown weight_rule '{other}'"))),
        };
        Ok(spec)
    }

    pub fn from_spec(spec: &ExperimentSpec, lambda: Option<f64>) -> Self {
        let v = spec.source();
        let (dl, dr) = spec.detectors();
        let name = spec.rule().name();
        // rule names may carry parameters, e.g. `signalling(0.5)`
        let weight_rule = name.split('(').next().unwrap_or(&name).to_string();
        SpecFile {
            extent: spec.lattice().extent(),
            source: [v.u, v.w],
            detectors: [dl, dr],
            a_meas: spec.a_meas().0,
            b_meas: spec.b_meas().0,
            epsilon: spec.epsilon(),
            weight_rule,
            lambda,
            pair_label: spec.pair_label(),
            link_budget: spec.link_budget(),
        }
    }
}

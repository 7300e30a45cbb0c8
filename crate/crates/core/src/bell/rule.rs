use std::fmt;

use super::setting::{Sign, Vec3};

/// Everything an annihilation vertex weight may depend on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnihilationEvent {
    /// Pair label carried by the left-wing photon.
    pub pair_left: u32,
    /// Pair label carried by the right-wing photon.
    pub pair_right: u32,
    pub alpha: Sign,
    pub beta: Sign,
    pub a_meas: Vec3,
    pub b_meas: Vec3,
}

impl AnnihilationEvent {
    /// Signed result vector `α·a` of the left photon.
    pub fn result_left(&self) -> Vec3 {
        self.alpha.value() * self.a_meas
    }

    /// Signed result vector `β·b` of the right photon.
    pub fn result_right(&self) -> Vec3 {
        self.beta.value() * self.b_meas
    }

    pub fn same_pair(&self) -> bool {
        self.pair_left == self.pair_right
    }
}

/// Weight attached to the vertex where two photons annihilate.
pub trait AnnihilationWeight: Send + Sync + fmt::Debug {
    fn weight(&self, event: &AnnihilationEvent) -> f64;

    /// Name used in spec files and reports.
    fn name(&self) -> String;
}

/// `δ_ij (1 - a·b) / 2` on the signed result vectors.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SingletWeight;

impl AnnihilationWeight for SingletWeight {
    fn weight(&self, ev: &AnnihilationEvent) -> f64 {
        if !ev.same_pair() {
            return 0.0;
        }
        (1.0 - ev.result_left().dot(ev.result_right())) / 2.0
    }

    fn name(&self) -> String {
        "canonical".into()
    }
}

//! Lightlike trajectory model of a two-wing spin-correlation experiment.
//!
//! Photons travel along the edges of a 1+1 dimensional lightlike lattice.
//! A vertex where a photon keeps its direction weighs `1 - ε`, a vertex where
//! it switches weighs `ε`, and the vertex where the two photons of a pair
//! meet and annihilate carries a weight that depends on the measurement
//! results they picked up on the way. Nothing before the detectors depends
//! on the measurement settings.

mod factor;
mod file;
mod lattice;
mod outcome;
mod rule;
mod setting;
mod spec;
mod trajectory;

pub use factor::{decode_state, encode_state, Exit, PhotonState, TrajectoryFactorModel, LEFT, RIGHT};
pub use file::SpecFile;
pub use lattice::{DiamondLattice, Step, Vertex};
pub use outcome::{
    chsh, configuration_probabilities, correlation, factorization_defect, label_weight_sums, outcome_distribution,
    pre_measurement_distribution, JointDistribution,
};
pub use rule::{AnnihilationEvent, AnnihilationWeight, SingletWeight};
pub use setting::{Sign, Vec3};
pub use spec::{survival_probability, Emitter, ExperimentSpec, SpecWarning, SURVIVAL_THRESHOLD};
pub use trajectory::{
    annihilation_weight, count_pairings, enumerate_geometries, enumerate_geometries_with_cap, enumerate_pairings,
    enumerate_trajectories, enumerate_trajectories_with_cap, is_admissible, pre_measurement_view, trajectory_weight,
    Geometry, PhotonPath, PreMeasurementRecord, TrajectoryConfig, LABELINGS,
};

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

use super::lattice::{DiamondLattice, Step, Vertex};
use super::rule::{AnnihilationWeight, SingletWeight};
use super::setting::Vec3;

/// Survival probability the validation step asks for.
pub const SURVIVAL_THRESHOLD: f64 = 0.99;

/// `(1 - ε)^N`: probability that a photon goes `links` steps without switching.
pub fn survival_probability(epsilon: f64, links: u32) -> Result<f64> {
    check_epsilon(epsilon)?;
    Ok((1.0 - epsilon).powi(links as i32))
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon < 1.0 {
        Ok(())
    } else {
        Err(Error::Input(format!("epsilon {epsilon} must lie strictly between 0 and 1")))
    }
}

/// Where a photon starts, which way it first moves, where it is measured and
/// which pair it belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Emitter {
    pub start: Vertex,
    pub first_step: Step,
    pub detector_x: i32,
    pub pair: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SpecWarning {
    /// `(1 - ε)^N` is below [`SURVIVAL_THRESHOLD`].
    LowSurvival { epsilon: f64, links: u32, survival: f64 },
}

impl fmt::Display for SpecWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpecWarning::LowSurvival { epsilon, links, survival } => write!(
                f,
                "(1 - {epsilon})^{links} = {survival:.6} < {SURVIVAL_THRESHOLD}: photons switch direction before reaching the detectors too often"
            ),
        }
    }
}

/// A two-wing spin-correlation experiment on the trajectory lattice.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    lattice: DiamondLattice,
    source: Vertex,
    left_detector: i32,
    right_detector: i32,
    a_meas: Vec3,
    b_meas: Vec3,
    epsilon: f64,
    pair_label: u32,
    link_budget: Option<u32>,
    rule: Arc<dyn AnnihilationWeight>,
}

impl ExperimentSpec {
    /// Source at the origin, detectors on the lines `x = left_detector` and
    /// `x = right_detector`, singlet annihilation weight.
    pub fn new(
        extent: u32,
        left_detector: i32,
        right_detector: i32,
        a_meas: Vec3,
        b_meas: Vec3,
        epsilon: f64,
    ) -> Result<Self> {
        let spec = ExperimentSpec {
            lattice: DiamondLattice::new(extent),
            source: Vertex::ORIGIN,
            left_detector,
            right_detector,
            a_meas,
            b_meas,
            epsilon,
            pair_label: 0,
            link_budget: None,
            rule: Arc::new(SingletWeight),
        };
        spec.check()?;
        Ok(spec)
    }

    /// Smallest lattice with a single path geometry per wing: each photon
    /// takes one step to its detector and one step back.
    pub fn minimal(a_meas: Vec3, b_meas: Vec3, epsilon: f64) -> Result<Self> {
        Self::new(2, -1, 1, a_meas, b_meas, epsilon)
    }

    /// Extent-8 lattice with detectors two links from the source.
    pub fn extent8(a_meas: Vec3, b_meas: Vec3, epsilon: f64) -> Result<Self> {
        Self::new(8, -2, 2, a_meas, b_meas, epsilon)
    }

    fn check(&self) -> Result<()> {
        check_epsilon(self.epsilon)?;
        self.a_meas.unit()?;
        self.b_meas.unit()?;
        if !self.lattice.contains(self.source) {
            return Err(Error::Spec(format!("source {} lies outside the lattice", self.source)));
        }
        let x0 = self.source.position();
        if self.left_detector >= x0 || self.right_detector <= x0 {
            return Err(Error::Spec(format!(
                "detectors at x = {} and x = {} must lie left and right of the source at x = {x0}",
                self.left_detector, self.right_detector
            )));
        }
        let reach = self.lattice.extent() as i32 - self.source.time();
        for d in [self.left_detector, self.right_detector] {
            if (d - x0).abs() > reach {
                return Err(Error::Spec(format!(
                    "detector line x = {d} is outside the future cone of the source within the lattice"
                )));
            }
        }
        Ok(())
    }

    pub fn with_settings(&self, a_meas: Vec3, b_meas: Vec3) -> Result<Self> {
        let spec = ExperimentSpec { a_meas, b_meas, ..self.clone() };
        spec.check()?;
        Ok(spec)
    }

    pub fn with_rule(&self, rule: Arc<dyn AnnihilationWeight>) -> Self {
        ExperimentSpec { rule, ..self.clone() }
    }

    pub fn with_source(&self, source: Vertex, pair_label: u32) -> Result<Self> {
        let spec = ExperimentSpec { source, pair_label, ..self.clone() };
        spec.check()?;
        Ok(spec)
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        let spec = ExperimentSpec { epsilon, ..self.clone() };
        spec.check()?;
        Ok(spec)
    }

    /// Overrides the link count used by the survival check.
    pub fn with_link_budget(&self, links: Option<u32>) -> Self {
        ExperimentSpec { link_budget: links, ..self.clone() }
    }

    pub fn lattice(&self) -> DiamondLattice {
        self.lattice
    }

    pub fn source(&self) -> Vertex {
        self.source
    }

    pub fn detectors(&self) -> (i32, i32) {
        (self.left_detector, self.right_detector)
    }

    pub fn a_meas(&self) -> Vec3 {
        self.a_meas
    }

    pub fn b_meas(&self) -> Vec3 {
        self.b_meas
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn pair_label(&self) -> u32 {
        self.pair_label
    }

    pub fn link_budget(&self) -> Option<u32> {
        self.link_budget
    }

    pub fn rule(&self) -> &dyn AnnihilationWeight {
        self.rule.as_ref()
    }

    pub fn rule_arc(&self) -> Arc<dyn AnnihilationWeight> {
        self.rule.clone()
    }

    pub fn left_emitter(&self) -> Emitter {
        Emitter { start: self.source, first_step: Step::L, detector_x: self.left_detector, pair: self.pair_label }
    }

    pub fn right_emitter(&self) -> Emitter {
        Emitter { start: self.source, first_step: Step::R, detector_x: self.right_detector, pair: self.pair_label }
    }

    /// True when both specs describe the same lattice, source and detectors.
    pub fn same_geometry(&self, other: &ExperimentSpec) -> bool {
        self.lattice == other.lattice
            && self.source == other.source
            && self.detectors() == other.detectors()
            && self.epsilon == other.epsilon
            && self.pair_label == other.pair_label
    }

    /// Longest source-to-detector path (in links) over both wings, counting
    /// only paths that meet their detector line for the first time at the end.
    pub fn longest_detector_path(&self) -> u32 {
        [self.left_emitter(), self.right_emitter()]
            .iter()
            .map(|e| longest_first_hit(self.lattice, e))
            .max()
            .unwrap_or(0)
    }

    /// Link count the survival check uses: the override if set, otherwise
    /// [`longest_detector_path`](Self::longest_detector_path).
    pub fn survival_links(&self) -> u32 {
        self.link_budget.unwrap_or_else(|| self.longest_detector_path())
    }

    pub fn warnings(&self) -> Vec<SpecWarning> {
        let links = self.survival_links();
        let survival = (1.0 - self.epsilon).powi(links as i32);
        if survival < SURVIVAL_THRESHOLD {
            vec![SpecWarning::LowSurvival { epsilon: self.epsilon, links, survival }]
        } else {
            Vec::new()
        }
    }
}

fn longest_first_hit(lattice: DiamondLattice, e: &Emitter) -> u32 {
    let first = e.start.step(e.first_step);
    if !lattice.contains(first) {
        return 0;
    }
    // walk forward in time over vertices not yet on the detector line
    let mut best = 0;
    let mut frontier = vec![first];
    let mut seen = std::collections::HashSet::new();
    while let Some(v) = frontier.pop() {
        if !seen.insert(v) {
            continue;
        }
        if v.position() == e.detector_x {
            best = best.max((v.time() - e.start.time()) as u32);
            continue;
        }
        frontier.extend(lattice.successors(v).map(|(_, n)| n));
    }
    best
}

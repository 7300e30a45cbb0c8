//! The trajectory model as a [`FactorModel`] over vertex states.
//!
//! Every lattice vertex carries one site per photon. A site records whether
//! the photon passes through the vertex, which edge it leaves by (or that it
//! annihilates there), and the result label it carries on leaving. Each
//! factor reads one vertex and its two past neighbours, so probability
//! ratios between configurations that differ in a bounded region only need
//! factors near that region.

use std::collections::HashMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::weight::{Configuration, Factor, FactorModel};

use super::lattice::{DiamondLattice, Step, Vertex};
use super::rule::{AnnihilationEvent, AnnihilationWeight};
use super::setting::{Sign, Vec3};
use super::spec::ExperimentSpec;
use super::trajectory::{is_admissible, PhotonPath, TrajectoryConfig};

/// How a photon leaves a vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Step(Step),
    Annihilate,
}

/// State of one photon at one vertex it passes through.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PhotonState {
    pub exit: Exit,
    pub label: Option<Sign>,
}

const ABSENT: i32 = 0;

fn exit_index(e: Exit) -> i32 {
    match e {
        Exit::Step(Step::R) => 0,
        Exit::Step(Step::L) => 1,
        Exit::Annihilate => 2,
    }
}

fn label_index(l: Option<Sign>) -> i32 {
    match l {
        None => 0,
        Some(Sign::Plus) => 1,
        Some(Sign::Minus) => 2,
    }
}

pub fn encode_state(s: Option<PhotonState>) -> i32 {
    match s {
        None => ABSENT,
        Some(s) => 1 + 3 * exit_index(s.exit) + label_index(s.label),
    }
}

pub fn decode_state(v: i32) -> Option<PhotonState> {
    if v <= 0 || v > 9 {
        return None;
    }
    let k = v - 1;
    let exit = match k / 3 {
        0 => Exit::Step(Step::R),
        1 => Exit::Step(Step::L),
        _ => Exit::Annihilate,
    };
    let label = match k % 3 {
        0 => None,
        1 => Some(Sign::Plus),
        _ => Some(Sign::Minus),
    };
    Some(PhotonState { exit, label })
}

/// Left-wing photon.
pub const LEFT: usize = 0;
/// Right-wing photon.
pub const RIGHT: usize = 1;

/// Per-photon constants the factors need.
#[derive(Debug, Clone, Copy)]
struct Wing {
    first_step: Step,
    detector_x: i32,
}

/// Edge into `v` along which the photon arrived, given the states of the
/// past neighbours `(step into v, state)`. `None` when the number of
/// incoming edges is not exactly one.
fn single_incoming(preds: &[(Step, i32)]) -> (usize, Option<(Step, Option<Sign>)>) {
    let mut count = 0;
    let mut found = None;
    for &(s, raw) in preds {
        if let Some(st) = decode_state(raw) {
            if st.exit == Exit::Step(s) {
                count += 1;
                found = Some((s, st.label));
            }
        }
    }
    (count, if count == 1 { found } else { None })
}

/// The trajectory model of an [`ExperimentSpec`] expressed over vertex states.
#[derive(Debug, Clone)]
pub struct TrajectoryFactorModel {
    spec: ExperimentSpec,
    vertices: Vec<Vertex>,
    index: HashMap<Vertex, usize>,
    model: FactorModel,
}

impl TrajectoryFactorModel {
    pub fn new(spec: &ExperimentSpec) -> Self {
        let lattice = spec.lattice();
        let vertices = lattice.vertices();
        let index: HashMap<Vertex, usize> = vertices.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        let site = |v: Vertex, p: usize| 2 * index[&v] + p;
        let (dl, dr) = spec.detectors();
        let wings = [Wing { first_step: Step::L, detector_x: dl }, Wing { first_step: Step::R, detector_x: dr }];
        let source = spec.source();
        let eps = spec.epsilon();

        let reachable: [Vec<bool>; 2] =
            [0, 1].map(|p| reachable_from(lattice, &vertices, &index, source, wings[p].first_step));
        let full: Arc<[i32]> = (0..=9).collect::<Vec<i32>>().into();
        let absent: Arc<[i32]> = Arc::from(vec![ABSENT]);

        let mut domains = Vec::with_capacity(2 * vertices.len());
        let mut factors = Vec::new();
        for (vi, &v) in vertices.iter().enumerate() {
            for p in [LEFT, RIGHT] {
                let wing = wings[p];
                if v == source {
                    let start = encode_state(Some(PhotonState { exit: Exit::Step(wing.first_step), label: None }));
                    domains.push(Arc::from(vec![start]));
                    factors.push(Factor::new(vec![site(v, p)], move |x| (x[0] == start) as i32 as f64));
                    continue;
                }
                if !reachable[p][vi] {
                    domains.push(absent.clone());
                } else {
                    let dom: Vec<i32> = full
                        .iter()
                        .copied()
                        .filter(|&x| match decode_state(x).map(|s| s.exit) {
                            Some(Exit::Step(s)) => lattice.contains(v.step(s)),
                            _ => true,
                        })
                        .collect();
                    domains.push(if dom.len() == full.len() { full.clone() } else { Arc::from(dom) });
                }
                let preds: Vec<(Step, usize)> = Step::ALL
                    .iter()
                    .map(|&s| (s, v.back(s)))
                    .filter(|(_, u)| lattice.contains(*u))
                    .map(|(s, u)| (s, site(u, p)))
                    .collect();
                let pred_steps: Vec<Step> = preds.iter().map(|(s, _)| *s).collect();
                let mut support = vec![site(v, p)];
                support.extend(preds.iter().map(|(_, i)| *i));
                let on_detector = v.position() == wing.detector_x;
                let can_leave = [Step::R, Step::L].map(|s| lattice.contains(v.step(s)));
                factors.push(Factor::new(support, move |x| {
                    propagation_factor(x[0], &pred_steps, &x[1..], on_detector, can_leave, eps)
                }));
            }
        }
        let rule = spec.rule_arc();
        let (a_meas, b_meas, pair) = (spec.a_meas(), spec.b_meas(), spec.pair_label());
        for &v in &vertices {
            let pred_sites = |p: usize| -> Vec<(Step, usize)> {
                Step::ALL
                    .iter()
                    .map(|&s| (s, v.back(s)))
                    .filter(|(_, u)| lattice.contains(*u))
                    .map(|(s, u)| (s, site(u, p)))
                    .collect()
            };
            let (lp, rp) = (pred_sites(LEFT), pred_sites(RIGHT));
            let mut support = vec![site(v, LEFT), site(v, RIGHT)];
            support.extend(lp.iter().map(|(_, i)| *i));
            support.extend(rp.iter().map(|(_, i)| *i));
            let lsteps: Vec<Step> = lp.iter().map(|(s, _)| *s).collect();
            let rsteps: Vec<Step> = rp.iter().map(|(s, _)| *s).collect();
            let rule = rule.clone();
            factors.push(Factor::new(support, move |x| {
                let n = lsteps.len();
                annihilation_factor(
                    x[0],
                    x[1],
                    &lsteps,
                    &x[2..2 + n],
                    &rsteps,
                    &x[2 + n..],
                    rule.as_ref(),
                    pair,
                    a_meas,
                    b_meas,
                )
            }));
        }
        let model = FactorModel::new(domains, factors).expect("supports lie inside the lattice");
        TrajectoryFactorModel { spec: spec.clone(), vertices, index, model }
    }

    pub fn model(&self) -> &FactorModel {
        &self.model
    }

    pub fn spec(&self) -> &ExperimentSpec {
        &self.spec
    }

    pub fn site(&self, v: Vertex, photon: usize) -> Option<usize> {
        self.index.get(&v).map(|i| 2 * i + photon)
    }

    pub fn vertex_of_site(&self, site: usize) -> Vertex {
        self.vertices[site / 2]
    }

    /// Vertex-state configuration of an admissible trajectory configuration.
    pub fn encode(&self, config: &TrajectoryConfig) -> Result<Configuration> {
        let g = config.geometry();
        if !is_admissible(&g, &self.spec) || g.left.start != self.spec.source() {
            return Err(Error::Input(format!("configuration '{config}' is not admissible for this experiment")));
        }
        let (dl, dr) = self.spec.detectors();
        let mut values = vec![ABSENT; self.model.num_sites()];
        for (p, path, det, sign) in [(LEFT, &config.left, dl, config.alpha), (RIGHT, &config.right, dr, config.beta)] {
            let k_det = path.detector_index(det).expect("admissible paths cross their detector");
            for (k, v) in path.vertices().into_iter().enumerate() {
                let exit = path.moves.get(k).map_or(Exit::Annihilate, |&s| Exit::Step(s));
                let label = (k >= k_det).then_some(sign);
                values[self.site(v, p).expect("admissible paths stay in the lattice")] =
                    encode_state(Some(PhotonState { exit, label }));
            }
        }
        Ok(Configuration::new(values))
    }

    /// Traces both photons from the source. Returns `None` if either trace
    /// breaks off or the result labels are missing.
    pub fn decode(&self, config: &Configuration) -> Option<TrajectoryConfig> {
        let trace = |p: usize| -> Option<(PhotonPath, Sign)> {
            let mut v = self.spec.source();
            let mut moves = Vec::new();
            loop {
                let st = decode_state(config.values()[self.site(v, p)?])?;
                match st.exit {
                    Exit::Step(s) => {
                        moves.push(s);
                        v = v.step(s);
                    }
                    Exit::Annihilate => {
                        return Some((
                            PhotonPath { start: self.spec.source(), moves, pair: self.spec.pair_label() },
                            st.label?,
                        ))
                    }
                }
            }
        };
        let (left, alpha) = trace(LEFT)?;
        let (right, beta) = trace(RIGHT)?;
        Some(TrajectoryConfig { left, right, alpha, beta })
    }

    /// Vertices at which both photons annihilate.
    pub fn annihilation_vertices(&self, config: &Configuration) -> Vec<Vertex> {
        self.vertices
            .iter()
            .enumerate()
            .filter(|(i, _)| {
                [LEFT, RIGHT].iter().all(|&p| {
                    matches!(decode_state(config.values()[2 * i + p]), Some(PhotonState { exit: Exit::Annihilate, .. }))
                })
            })
            .map(|(_, &v)| v)
            .collect()
    }
}

fn reachable_from(
    lattice: DiamondLattice,
    vertices: &[Vertex],
    index: &HashMap<Vertex, usize>,
    source: Vertex,
    first: Step,
) -> Vec<bool> {
    let mut seen = vec![false; vertices.len()];
    let start = source.step(first);
    if !lattice.contains(start) {
        return seen;
    }
    let mut stack = vec![start];
    while let Some(v) = stack.pop() {
        let i = index[&v];
        if seen[i] {
            continue;
        }
        seen[i] = true;
        stack.extend(lattice.successors(v).map(|(_, n)| n));
    }
    seen
}

/// Continuity, labeling and free-propagation weight for one photon at one
/// (non-source) vertex.
fn propagation_factor(
    own: i32,
    pred_steps: &[Step],
    preds: &[i32],
    on_detector: bool,
    can_leave: [bool; 2],
    eps: f64,
) -> f64 {
    let pairs: Vec<(Step, i32)> = pred_steps.iter().copied().zip(preds.iter().copied()).collect();
    let (n_in, incoming) = single_incoming(&pairs);
    let Some(state) = decode_state(own) else {
        return (n_in == 0) as i32 as f64;
    };
    let Some((in_step, in_label)) = incoming else {
        return 0.0;
    };
    let label_ok = match in_label {
        Some(l) => state.label == Some(l),
        None if on_detector => state.label.is_some(),
        None => state.label.is_none(),
    };
    if !label_ok {
        return 0.0;
    }
    match state.exit {
        Exit::Annihilate => {
            if state.label.is_some() {
                1.0
            } else {
                0.0
            }
        }
        Exit::Step(s) => {
            let inside = match s {
                Step::R => can_leave[0],
                Step::L => can_leave[1],
            };
            if !inside {
                0.0
            } else if s == in_step {
                1.0 - eps
            } else {
                eps
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn annihilation_factor(
    left: i32,
    right: i32,
    lsteps: &[Step],
    lpreds: &[i32],
    rsteps: &[Step],
    rpreds: &[i32],
    rule: &dyn AnnihilationWeight,
    pair: u32,
    a_meas: Vec3,
    b_meas: Vec3,
) -> f64 {
    let ends = |raw: i32| decode_state(raw).filter(|s| s.exit == Exit::Annihilate);
    match (ends(left), ends(right)) {
        (None, None) => 1.0,
        (Some(l), Some(r)) => {
            let lin = single_incoming(&lsteps.iter().copied().zip(lpreds.iter().copied()).collect::<Vec<_>>()).1;
            let rin = single_incoming(&rsteps.iter().copied().zip(rpreds.iter().copied()).collect::<Vec<_>>()).1;
            match (lin, rin, l.label, r.label) {
                (Some((ls, _)), Some((rs, _)), Some(alpha), Some(beta)) if ls != rs => {
                    rule.weight(&AnnihilationEvent { pair_left: pair, pair_right: pair, alpha, beta, a_meas, b_meas })
                }
                _ => 0.0,
            }
        }
        _ => 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bell::trajectory::{enumerate_trajectories, trajectory_weight};

    #[test]
    fn state_codes_round_trip() {
        assert_eq!(decode_state(0), None);
        for v in 1..=9 {
            assert_eq!(encode_state(decode_state(v)), v);
        }
    }

    #[test]
    fn encoded_weights_match_trajectory_weights() {
        let spec = ExperimentSpec::extent8(Vec3::Z, Vec3::from_degrees(50.0), 0.07).unwrap();
        let tfm = TrajectoryFactorModel::new(&spec);
        for c in enumerate_trajectories(&spec).unwrap().iter().step_by(13) {
            let enc = tfm.encode(c).unwrap();
            let direct = trajectory_weight(c, &spec).unwrap();
            let via = tfm.model().config_weight(&enc).unwrap();
            assert!((direct - via).abs() <= 1e-13 * direct.abs().max(1e-300), "{c}: {direct} vs {via}");
            assert_eq!(tfm.decode(&enc).as_ref(), Some(c));
        }
    }

    #[test]
    fn minimal_lattice_partition_sums_agree() {
        // every vertex-state configuration with positive weight is a trajectory
        let spec = ExperimentSpec::minimal(Vec3::Z, Vec3::from_degrees(70.0), 0.2).unwrap();
        let tfm = TrajectoryFactorModel::new(&spec);
        let table = tfm.model().weight_table(1 << 24).unwrap();
        let direct: f64 =
            enumerate_trajectories(&spec).unwrap().iter().map(|c| trajectory_weight(c, &spec).unwrap()).sum();
        let via: f64 = table.iter().sum();
        assert!((direct - via).abs() < 1e-15, "{direct} vs {via}");
        let positive: Vec<u64> = (0..table.len() as u64).filter(|&i| table[i as usize] > 0.0).collect();
        assert_eq!(positive.len(), 4);
        for i in positive {
            let c = tfm.model().config_at(i);
            assert_eq!(tfm.annihilation_vertices(&c), vec![Vertex::new(1, 1)]);
            assert!(tfm.decode(&c).is_some());
        }
    }
}

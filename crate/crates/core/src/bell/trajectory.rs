use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::weight::DEFAULT_ENUMERATION_CAP;

use super::lattice::{DiamondLattice, Step, Vertex};
use super::rule::AnnihilationEvent;
use super::setting::Sign;
use super::spec::{Emitter, ExperimentSpec};

/// A future-directed lightlike path.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PhotonPath {
    pub start: Vertex,
    pub moves: Vec<Step>,
    pub pair: u32,
}

impl PhotonPath {
    /// Vertices visited, starting vertex first.
    pub fn vertices(&self) -> Vec<Vertex> {
        let mut v = self.start;
        let mut out = Vec::with_capacity(self.moves.len() + 1);
        out.push(v);
        for &s in &self.moves {
            v = v.step(s);
            out.push(v);
        }
        out
    }

    pub fn end(&self) -> Vertex {
        self.moves.iter().fold(self.start, |v, &s| v.step(s))
    }

    /// Index into [`vertices`](Self::vertices) of the first vertex on the line `x = detector_x`.
    pub fn detector_index(&self, detector_x: i32) -> Option<usize> {
        self.vertices().iter().position(|v| v.position() == detector_x)
    }

    /// `(straight, switch)` counts over interior vertices.
    pub fn vertex_counts(&self) -> (u32, u32) {
        let switches = self.moves.windows(2).filter(|w| w[0] != w[1]).count() as u32;
        let interior = self.moves.len().saturating_sub(1) as u32;
        (interior - switches, switches)
    }

    pub fn move_string(&self) -> String {
        self.moves.iter().map(|s| s.as_char()).collect()
    }

    fn propagation_weight(&self, epsilon: f64) -> f64 {
        let (straight, switches) = self.vertex_counts();
        (1.0 - epsilon).powi(straight as i32) * epsilon.powi(switches as i32)
    }
}

/// The two photon paths of one configuration, without result labels.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Geometry {
    pub left: PhotonPath,
    pub right: PhotonPath,
}

impl Geometry {
    pub fn annihilation_vertex(&self) -> Vertex {
        self.left.end()
    }

    /// Product of the free-propagation weights of both paths.
    pub fn propagation_weight(&self, epsilon: f64) -> f64 {
        self.left.propagation_weight(epsilon) * self.right.propagation_weight(epsilon)
    }

    pub fn with_labels(&self, alpha: Sign, beta: Sign) -> TrajectoryConfig {
        TrajectoryConfig { left: self.left.clone(), right: self.right.clone(), alpha, beta }
    }
}

/// Two photon paths meeting at a shared annihilation vertex, with the
/// outcome recorded by each detector.
///
/// Pair labels ride on every segment; the result label `α·a` (resp. `β·b`)
/// rides on the left (right) path from its detector crossing onward.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TrajectoryConfig {
    pub left: PhotonPath,
    pub right: PhotonPath,
    pub alpha: Sign,
    pub beta: Sign,
}

impl TrajectoryConfig {
    pub fn geometry(&self) -> Geometry {
        Geometry { left: self.left.clone(), right: self.right.clone() }
    }
}

/// `<left moves> <right moves> i=<pair> j=<pair> a=<±> b=<±>`, with paths
/// starting at the origin; `@u,w` prefixes a move string that starts elsewhere.
impl fmt::Display for TrajectoryConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let path = |p: &PhotonPath| {
            if p.start == Vertex::ORIGIN {
                p.move_string()
            } else {
                format!("@{},{}:{}", p.start.u, p.start.w, p.move_string())
            }
        };
        write!(
            f,
            "{} {} i={} j={} a={} b={}",
            path(&self.left),
            path(&self.right),
            self.left.pair,
            self.right.pair,
            self.alpha.as_char(),
            self.beta.as_char()
        )
    }
}

impl FromStr for TrajectoryConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("trajectory record '{s}'"));
        let fields: Vec<&str> = s.split_whitespace().collect();
        if fields.len() != 6 {
            return Err(bad());
        }
        let moves = |txt: &str| -> Result<(Vertex, Vec<Step>)> {
            let (start, body) = match txt.strip_prefix('@') {
                Some(rest) => {
                    let (coords, body) = rest.split_once(':').ok_or_else(bad)?;
                    let (u, w) = coords.split_once(',').ok_or_else(bad)?;
                    (Vertex::new(u.parse().map_err(|_| bad())?, w.parse().map_err(|_| bad())?), body)
                }
                None => (Vertex::ORIGIN, txt),
            };
            let steps = body.chars().map(|c| Step::from_char(c).ok_or_else(bad)).collect::<Result<_>>()?;
            Ok((start, steps))
        };
        let tagged = |txt: &str, tag: &str| txt.strip_prefix(tag).ok_or_else(bad).map(str::to_owned);
        let sign = |txt: String| -> Result<Sign> {
            let mut chars = txt.chars();
            match (chars.next().and_then(Sign::from_char), chars.next()) {
                (Some(s), None) => Ok(s),
                _ => Err(bad()),
            }
        };
        let (ls, lm) = moves(fields[0])?;
        let (rs, rm) = moves(fields[1])?;
        let i = tagged(fields[2], "i=")?.parse().map_err(|_| bad())?;
        let j = tagged(fields[3], "j=")?.parse().map_err(|_| bad())?;
        Ok(TrajectoryConfig {
            left: PhotonPath { start: ls, moves: lm, pair: i },
            right: PhotonPath { start: rs, moves: rm, pair: j },
            alpha: sign(tagged(fields[4], "a=")?)?,
            beta: sign(tagged(fields[5], "b=")?)?,
        })
    }
}

/// Counts paths from an emitter that cross its detector line, keyed by end
/// vertex and final step.
fn path_counts(lattice: DiamondLattice, e: &Emitter) -> HashMap<(Vertex, Step), u128> {
    let mut out = HashMap::new();
    let first = e.start.step(e.first_step);
    if !lattice.contains(first) {
        return out;
    }
    // (vertex, last step, crossed) -> count
    let mut layer: HashMap<(Vertex, Step, bool), u128> = HashMap::new();
    layer.insert((first, e.first_step, first.position() == e.detector_x), 1);
    while !layer.is_empty() {
        let mut next = HashMap::new();
        for (&(v, last, crossed), &n) in &layer {
            if crossed {
                *out.entry((v, last)).or_insert(0) += n;
            }
            for (s, nv) in lattice.successors(v) {
                let c = crossed || nv.position() == e.detector_x;
                *next.entry((nv, s, c)).or_insert(0u128) += n;
            }
        }
        layer = next;
    }
    out
}

/// Number of path pairs (geometries) from two emitters that end at a shared
/// vertex arriving along different edges.
pub fn count_pairings(lattice: DiamondLattice, left: &Emitter, right: &Emitter) -> u128 {
    let lc = path_counts(lattice, left);
    let rc = path_counts(lattice, right);
    lc.iter()
        .map(|(&(v, ls), &n)| {
            Step::ALL
                .iter()
                .filter(|&&rs| rs != ls)
                .map(|&rs| n.saturating_mul(*rc.get(&(v, rs)).unwrap_or(&0)))
                .sum::<u128>()
        })
        .sum()
}

/// Every path from an emitter that crosses its detector line, grouped by end
/// vertex. Paths within a group are in lexicographic move order.
fn paths_by_end(lattice: DiamondLattice, e: &Emitter) -> BTreeMap<Vertex, Vec<PhotonPath>> {
    fn walk(
        lattice: DiamondLattice,
        e: &Emitter,
        v: Vertex,
        crossed: bool,
        moves: &mut Vec<Step>,
        out: &mut BTreeMap<Vertex, Vec<PhotonPath>>,
    ) {
        if crossed {
            out.entry(v).or_default().push(PhotonPath { start: e.start, moves: moves.clone(), pair: e.pair });
        }
        for (s, nv) in lattice.successors(v).collect::<Vec<_>>() {
            moves.push(s);
            walk(lattice, e, nv, crossed || nv.position() == e.detector_x, moves, out);
            moves.pop();
        }
    }
    let mut out = BTreeMap::new();
    let first = e.start.step(e.first_step);
    if lattice.contains(first) {
        let mut moves = vec![e.first_step];
        walk(lattice, e, first, first.position() == e.detector_x, &mut moves, &mut out);
    }
    for paths in out.values_mut() {
        paths.sort();
    }
    out
}

/// All geometries pairing a path from `left` with a path from `right`, in
/// lexicographic order of (left moves, right moves).
pub fn enumerate_pairings(lattice: DiamondLattice, left: &Emitter, right: &Emitter, cap: u64) -> Result<Vec<Geometry>> {
    let count = count_pairings(lattice, left, right);
    if count > cap as u128 {
        return Err(Error::Capacity { count, cap });
    }
    let lp = paths_by_end(lattice, left);
    let rp = paths_by_end(lattice, right);
    let mut out = Vec::with_capacity(count as usize);
    for (v, lefts) in &lp {
        let Some(rights) = rp.get(v) else { continue };
        for l in lefts {
            for r in rights {
                if l.moves.last() != r.moves.last() {
                    out.push(Geometry { left: l.clone(), right: r.clone() });
                }
            }
        }
    }
    out.sort_by(|a, b| a.left.moves.cmp(&b.left.moves).then_with(|| a.right.moves.cmp(&b.right.moves)));
    Ok(out)
}

/// Geometries of the experiment (no labels), lexicographically ordered.
pub fn enumerate_geometries(spec: &ExperimentSpec) -> Result<Vec<Geometry>> {
    enumerate_geometries_with_cap(spec, DEFAULT_ENUMERATION_CAP / 4)
}

pub fn enumerate_geometries_with_cap(spec: &ExperimentSpec, cap: u64) -> Result<Vec<Geometry>> {
    enumerate_pairings(spec.lattice(), &spec.left_emitter(), &spec.right_emitter(), cap)
}

/// The four outcome labelings in canonical order.
pub const LABELINGS: [(Sign, Sign); 4] =
    [(Sign::Plus, Sign::Plus), (Sign::Plus, Sign::Minus), (Sign::Minus, Sign::Plus), (Sign::Minus, Sign::Minus)];

/// Every valid configuration: each geometry crossed with the four outcome
/// labelings.
pub fn enumerate_trajectories(spec: &ExperimentSpec) -> Result<Vec<TrajectoryConfig>> {
    enumerate_trajectories_with_cap(spec, DEFAULT_ENUMERATION_CAP)
}

pub fn enumerate_trajectories_with_cap(spec: &ExperimentSpec, cap: u64) -> Result<Vec<TrajectoryConfig>> {
    let geoms = enumerate_pairings(spec.lattice(), &spec.left_emitter(), &spec.right_emitter(), cap / 4).map_err(
        |e| match e {
            Error::Capacity { count, .. } => Error::Capacity { count: count.saturating_mul(4), cap },
            other => other,
        },
    )?;
    Ok(geoms.iter().flat_map(|g| LABELINGS.iter().map(move |&(a, b)| g.with_labels(a, b))).collect())
}

fn path_is_admissible(lattice: DiamondLattice, p: &PhotonPath, first: Step, detector_x: i32) -> bool {
    p.moves.first() == Some(&first)
        && p.vertices().iter().all(|&v| lattice.contains(v))
        && p.detector_index(detector_x).is_some()
}

/// True when the geometry is one the model admits: both paths stay in the
/// lattice, start in their wing's direction, cross their detector lines and
/// meet head-on at a common end vertex.
pub fn is_admissible(geom: &Geometry, spec: &ExperimentSpec) -> bool {
    let (dl, dr) = spec.detectors();
    let lat = spec.lattice();
    path_is_admissible(lat, &geom.left, Step::L, dl)
        && path_is_admissible(lat, &geom.right, Step::R, dr)
        && geom.left.end() == geom.right.end()
        && geom.left.moves.last() != geom.right.moves.last()
}

/// Annihilation factor for a labeled configuration.
pub fn annihilation_weight(config: &TrajectoryConfig, spec: &ExperimentSpec) -> f64 {
    spec.rule().weight(&AnnihilationEvent {
        pair_left: config.left.pair,
        pair_right: config.right.pair,
        alpha: config.alpha,
        beta: config.beta,
        a_meas: spec.a_meas(),
        b_meas: spec.b_meas(),
    })
}

/// `(1-ε)^straight · ε^switch` over both paths, times a factor of 1 per
/// detector event, times the annihilation weight. Inadmissible geometries
/// weigh 0.
pub fn trajectory_weight(config: &TrajectoryConfig, spec: &ExperimentSpec) -> Result<f64> {
    if config.left.moves.is_empty() || config.right.moves.is_empty() {
        return Err(Error::Input("photon paths must have at least one step".into()));
    }
    let geom = config.geometry();
    if !is_admissible(&geom, spec) {
        return Ok(0.0);
    }
    Ok(geom.propagation_weight(spec.epsilon()) * annihilation_weight(config, spec))
}

/// What a configuration says about the world before either measurement:
/// the path prefixes up to each detector crossing and the pair labels.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PreMeasurementRecord {
    pub left: PhotonPath,
    pub right: PhotonPath,
}

impl fmt::Display for PreMeasurementRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} i={} j={}", self.left.move_string(), self.right.move_string(), self.left.pair, self.right.pair)
    }
}

pub fn pre_measurement_view(config: &TrajectoryConfig, spec: &ExperimentSpec) -> Result<PreMeasurementRecord> {
    let (dl, dr) = spec.detectors();
    let prefix = |p: &PhotonPath, d: i32| -> Result<PhotonPath> {
        let k = p
            .detector_index(d)
            .ok_or_else(|| Error::Input(format!("path {} never reaches its detector at x = {d}", p.move_string())))?;
        Ok(PhotonPath { start: p.start, moves: p.moves[..k].to_vec(), pair: p.pair })
    };
    Ok(PreMeasurementRecord { left: prefix(&config.left, dl)?, right: prefix(&config.right, dr)? })
}

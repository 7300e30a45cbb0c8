use std::fmt;

use serde::{Deserialize, Serialize};

/// A unit lightlike step. `R` increases `u = x + t`, `L` increases `w = t - x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Step {
    L,
    R,
}

impl Step {
    pub const ALL: [Step; 2] = [Step::L, Step::R];

    pub fn as_char(self) -> char {
        match self {
            Step::L => 'L',
            Step::R => 'R',
        }
    }

    pub fn from_char(c: char) -> Option<Step> {
        match c {
            'L' => Some(Step::L),
            'R' => Some(Step::R),
            _ => None,
        }
    }
}

/// Lattice vertex in lightcone coordinates. Time is `u + w`, position `u - w`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Vertex {
    pub u: i32,
    pub w: i32,
}

impl Vertex {
    pub const ORIGIN: Vertex = Vertex { u: 0, w: 0 };

    pub fn new(u: i32, w: i32) -> Self {
        Vertex { u, w }
    }

    pub fn time(self) -> i32 {
        self.u + self.w
    }

    pub fn position(self) -> i32 {
        self.u - self.w
    }

    pub fn step(self, s: Step) -> Vertex {
        match s {
            Step::R => Vertex { u: self.u + 1, w: self.w },
            Step::L => Vertex { u: self.u, w: self.w + 1 },
        }
    }

    /// The vertex this one is reached from by taking step `s`.
    pub fn back(self, s: Step) -> Vertex {
        match s {
            Step::R => Vertex { u: self.u - 1, w: self.w },
            Step::L => Vertex { u: self.u, w: self.w - 1 },
        }
    }
}

impl fmt::Display for Vertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.u, self.w)
    }
}

/// Lightlike lattice truncated to `u, w >= 0` and `u + w <= extent`: the
/// future cone of the origin up to time `extent`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiamondLattice {
    extent: i32,
}

impl DiamondLattice {
    pub fn new(extent: u32) -> Self {
        DiamondLattice { extent: extent as i32 }
    }

    pub fn extent(&self) -> u32 {
        self.extent as u32
    }

    pub fn contains(&self, v: Vertex) -> bool {
        v.u >= 0 && v.w >= 0 && v.time() <= self.extent
    }

    /// Future neighbours inside the lattice (at most two).
    pub fn successors(&self, v: Vertex) -> impl Iterator<Item = (Step, Vertex)> + '_ {
        Step::ALL.into_iter().map(move |s| (s, v.step(s))).filter(|(_, n)| self.contains(*n))
    }

    /// Every vertex, ordered by time then `u`.
    pub fn vertices(&self) -> Vec<Vertex> {
        let mut out = Vec::new();
        for t in 0..=self.extent {
            for u in 0..=t {
                out.push(Vertex::new(u, t - u));
            }
        }
        out
    }
}

//! Implicit infinite host graphs.
//!
//! Each host is defined by a canonical vertex encoding plus a neighbor
//! enumeration; nothing global is ever materialized. Supported families:
//!
//! * `RootedBAryTree { b }` — root has `b` children, every other vertex
//!   `b` children and a parent (degree `b + 1`).
//! * `HomogeneousTree { d }` — every vertex has degree exactly `d`; the
//!   first letter of a word picks one of the root's `d` branches, later
//!   letters one of `d - 1` children.
//! * `Grid { d }` — the lattice of `d`-tuples of integers with unit steps.
//! * `HyperbolicTree` — the rooted binary tree with every depth-`n` level
//!   joined into a cycle in planar (lexicographic) order; the length-2
//!   level keeps a single edge instead of a doubled cycle.
//! * `LamplighterZ` — lamplighter over the integers with the switch-or-walk
//!   generating set: move left, move right, or toggle the lamp underfoot
//!   (3-regular).
//!
//! Encodings are canonical: two `Vertex` values are equal iff they denote
//! the same host vertex, and they round-trip bit-exactly through the text
//! serialization (`T:0.1.0`, `Z:(1,-1,0)`, `L:p=2;lamps=0,3`,
//! `H:lvl=3;idx=5`).

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::{Mutex, OnceLock};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HostKind {
    RootedBAryTree { b: u32 },
    HomogeneousTree { d: u32 },
    Grid { d: u32 },
    HyperbolicTree,
    LamplighterZ,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct HostSpec {
    kind: HostKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Vertex {
    /// Sequence of downward child indices from the root.
    Tree(Vec<u8>),
    /// Lattice point of `Grid { d }`, one coordinate per dimension.
    Lattice(Vec<i64>),
    /// Lit lamp positions (sorted, duplicate-free) and lamplighter position.
    Lamplighter { lamps: Vec<i64>, pos: i64 },
    /// Level (distance from root) and index within the level in planar order.
    Hyperbolic { level: u32, index: u64 },
}

/// Levels beyond this would overflow the planar index arithmetic long after
/// any realistic ball has blown the vertex cap.
const MAX_HYPERBOLIC_LEVEL: u32 = 62;

impl HostSpec {
    pub fn new(kind: HostKind) -> Result<Self> {
        match kind {
            HostKind::RootedBAryTree { b } if !(2..=255).contains(&b) => Err(
                Error::InvalidInput(format!("rooted b-ary tree needs 2 <= b <= 255, got {b}")),
            ),
            HostKind::HomogeneousTree { d } if !(3..=255).contains(&d) => Err(
                Error::InvalidInput(format!("homogeneous tree needs 3 <= d <= 255, got {d}")),
            ),
            HostKind::Grid { d } if !(1..=16).contains(&d) => Err(Error::InvalidInput(format!(
                "grid dimension must be in 1..=16, got {d}"
            ))),
            _ => Ok(Self { kind }),
        }
    }

    pub fn rooted_b_ary(b: u32) -> Result<Self> {
        Self::new(HostKind::RootedBAryTree { b })
    }

    pub fn homogeneous_tree(d: u32) -> Result<Self> {
        Self::new(HostKind::HomogeneousTree { d })
    }

    pub fn grid(d: u32) -> Result<Self> {
        Self::new(HostKind::Grid { d })
    }

    pub fn hyperbolic_tree() -> Self {
        Self { kind: HostKind::HyperbolicTree }
    }

    pub fn lamplighter_z() -> Self {
        Self { kind: HostKind::LamplighterZ }
    }

    pub fn kind(&self) -> HostKind {
        self.kind
    }

    pub fn is_tree(&self) -> bool {
        matches!(
            self.kind,
            HostKind::RootedBAryTree { .. } | HostKind::HomogeneousTree { .. }
        )
    }

    pub fn root(&self) -> Vertex {
        match self.kind {
            HostKind::RootedBAryTree { .. } | HostKind::HomogeneousTree { .. } => {
                Vertex::Tree(Vec::new())
            }
            HostKind::Grid { d } => Vertex::Lattice(vec![0; d as usize]),
            HostKind::HyperbolicTree => Vertex::Hyperbolic { level: 0, index: 0 },
            HostKind::LamplighterZ => Vertex::Lamplighter { lamps: Vec::new(), pos: 0 },
        }
    }

    /// Largest degree any vertex of this host can have.
    pub fn max_degree(&self) -> u32 {
        match self.kind {
            HostKind::RootedBAryTree { b } => b + 1,
            HostKind::HomogeneousTree { d } => d,
            HostKind::Grid { d } => 2 * d,
            HostKind::HyperbolicTree => 5,
            HostKind::LamplighterZ => 3,
        }
    }

    /// Checks that `v` is a well-formed vertex of this host.
    pub fn validate_vertex(&self, v: &Vertex) -> Result<()> {
        match (self.kind, v) {
            (HostKind::RootedBAryTree { b }, Vertex::Tree(word)) => {
                if word.iter().any(|&c| u32::from(c) >= b) {
                    return Err(Error::Encoding(format!(
                        "tree word letter out of range for b={b}: {v}"
                    )));
                }
                Ok(())
            }
            (HostKind::HomogeneousTree { d }, Vertex::Tree(word)) => {
                let ok = match word.split_first() {
                    None => true,
                    Some((first, rest)) => {
                        u32::from(*first) < d && rest.iter().all(|&c| u32::from(c) < d - 1)
                    }
                };
                if ok {
                    Ok(())
                } else {
                    Err(Error::Encoding(format!(
                        "tree word letter out of range for d={d}: {v}"
                    )))
                }
            }
            (HostKind::Grid { d }, Vertex::Lattice(coords)) => {
                if coords.len() == d as usize {
                    Ok(())
                } else {
                    Err(Error::Encoding(format!(
                        "lattice point has {} coordinates, host has {d}",
                        coords.len()
                    )))
                }
            }
            (HostKind::HyperbolicTree, Vertex::Hyperbolic { level, index }) => {
                if *level > MAX_HYPERBOLIC_LEVEL {
                    return Err(Error::Encoding(format!("level {level} too deep")));
                }
                if *index >= 1u64 << level {
                    return Err(Error::Encoding(format!(
                        "index {index} out of range at level {level}"
                    )));
                }
                Ok(())
            }
            (HostKind::LamplighterZ, Vertex::Lamplighter { lamps, .. }) => {
                if lamps.windows(2).all(|w| w[0] < w[1]) {
                    Ok(())
                } else {
                    Err(Error::Encoding(format!(
                        "lamp set must be sorted and duplicate-free: {v}"
                    )))
                }
            }
            _ => Err(Error::Encoding(format!(
                "vertex {v} does not belong to host {self}"
            ))),
        }
    }

    /// All host neighbors of `v`, duplicate-free, in a fixed order per encoding.
    pub fn neighbors(&self, v: &Vertex) -> Result<Vec<Vertex>> {
        self.validate_vertex(v)?;
        let mut out = Vec::with_capacity(self.max_degree() as usize);
        match (self.kind, v) {
            (HostKind::RootedBAryTree { b }, Vertex::Tree(word)) => {
                if !word.is_empty() {
                    out.push(Vertex::Tree(word[..word.len() - 1].to_vec()));
                }
                for c in 0..b {
                    let mut w = word.clone();
                    w.push(c as u8);
                    out.push(Vertex::Tree(w));
                }
            }
            (HostKind::HomogeneousTree { d }, Vertex::Tree(word)) => {
                let children = if word.is_empty() { d } else { d - 1 };
                if !word.is_empty() {
                    out.push(Vertex::Tree(word[..word.len() - 1].to_vec()));
                }
                for c in 0..children {
                    let mut w = word.clone();
                    w.push(c as u8);
                    out.push(Vertex::Tree(w));
                }
            }
            (HostKind::Grid { .. }, Vertex::Lattice(coords)) => {
                for i in 0..coords.len() {
                    for step in [1i64, -1] {
                        let mut c = coords.clone();
                        c[i] += step;
                        out.push(Vertex::Lattice(c));
                    }
                }
            }
            (HostKind::HyperbolicTree, Vertex::Hyperbolic { level, index }) => {
                let (level, index) = (*level, *index);
                if level > 0 {
                    out.push(Vertex::Hyperbolic { level: level - 1, index: index >> 1 });
                }
                out.push(Vertex::Hyperbolic { level: level + 1, index: index << 1 });
                out.push(Vertex::Hyperbolic { level: level + 1, index: (index << 1) | 1 });
                let len = 1u64 << level;
                if len == 2 {
                    // a 2-cycle would double the edge; keep a single one
                    out.push(Vertex::Hyperbolic { level, index: 1 - index });
                } else if len >= 3 {
                    out.push(Vertex::Hyperbolic { level, index: (index + len - 1) % len });
                    out.push(Vertex::Hyperbolic { level, index: (index + 1) % len });
                }
            }
            (HostKind::LamplighterZ, Vertex::Lamplighter { lamps, pos }) => {
                out.push(Vertex::Lamplighter { lamps: lamps.clone(), pos: pos - 1 });
                out.push(Vertex::Lamplighter { lamps: lamps.clone(), pos: pos + 1 });
                let mut toggled = lamps.clone();
                match toggled.binary_search(pos) {
                    Ok(i) => {
                        toggled.remove(i);
                    }
                    Err(i) => toggled.insert(i, *pos),
                }
                out.push(Vertex::Lamplighter { lamps: toggled, pos: *pos });
            }
            _ => unreachable!("validate_vertex admits only matching payloads"),
        }
        Ok(out)
    }

    pub fn degree(&self, v: &Vertex) -> Result<u32> {
        Ok(self.neighbors(v)?.len() as u32)
    }

    /// Graph distance from `v` to the root.
    pub fn dist_to_root(&self, v: &Vertex) -> Result<u32> {
        self.validate_vertex(v)?;
        match (self.kind, v) {
            (HostKind::RootedBAryTree { .. } | HostKind::HomogeneousTree { .. }, Vertex::Tree(w)) => {
                Ok(w.len() as u32)
            }
            (HostKind::Grid { .. }, Vertex::Lattice(coords)) => {
                Ok(coords.iter().map(|c| c.unsigned_abs()).sum::<u64>() as u32)
            }
            // Cycle edges preserve the level and tree edges change it by one,
            // so the tree distance is already the graph distance.
            (HostKind::HyperbolicTree, Vertex::Hyperbolic { level, .. }) => Ok(*level),
            (HostKind::LamplighterZ, _) => lamplighter_dist(self, v),
            _ => unreachable!(),
        }
    }
}

impl fmt::Display for HostSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            HostKind::RootedBAryTree { b } => write!(f, "btree{b}"),
            HostKind::HomogeneousTree { d } => write!(f, "tree-d{d}"),
            HostKind::Grid { d } => write!(f, "z{d}"),
            HostKind::HyperbolicTree => write!(f, "hyptree"),
            HostKind::LamplighterZ => write!(f, "lamplighter"),
        }
    }
}

impl FromStr for HostSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parse_num = |t: &str, what: &str| -> Result<u32> {
            t.parse::<u32>()
                .map_err(|_| Error::InvalidInput(format!("bad {what} in host name {s:?}")))
        };
        if let Some(b) = s.strip_prefix("btree") {
            return HostSpec::rooted_b_ary(parse_num(b, "branching factor")?);
        }
        if let Some(d) = s.strip_prefix("tree-d") {
            return HostSpec::homogeneous_tree(parse_num(d, "degree")?);
        }
        if let Some(d) = s.strip_prefix('z') {
            return HostSpec::grid(parse_num(d, "dimension")?);
        }
        match s {
            "hyptree" => Ok(HostSpec::hyperbolic_tree()),
            "lamplighter" => Ok(HostSpec::lamplighter_z()),
            _ => Err(Error::InvalidInput(format!(
                "unknown host {s:?}; expected btree<b>, tree-d<d>, z<d>, hyptree or lamplighter"
            ))),
        }
    }
}

impl fmt::Display for Vertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Vertex::Tree(word) => {
                write!(f, "T:")?;
                for (i, c) in word.iter().enumerate() {
                    if i > 0 {
                        write!(f, ".")?;
                    }
                    write!(f, "{c}")?;
                }
                Ok(())
            }
            Vertex::Lattice(coords) => {
                write!(f, "Z:(")?;
                for (i, c) in coords.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{c}")?;
                }
                write!(f, ")")
            }
            Vertex::Lamplighter { lamps, pos } => {
                write!(f, "L:p={pos};lamps=")?;
                for (i, l) in lamps.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{l}")?;
                }
                Ok(())
            }
            Vertex::Hyperbolic { level, index } => write!(f, "H:lvl={level};idx={index}"),
        }
    }
}

impl FromStr for Vertex {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Encoding(format!("cannot parse vertex {s:?}"));
        if let Some(rest) = s.strip_prefix("T:") {
            if rest.is_empty() {
                return Ok(Vertex::Tree(Vec::new()));
            }
            let word = rest
                .split('.')
                .map(|t| t.parse::<u8>().map_err(|_| bad()))
                .collect::<Result<Vec<u8>>>()?;
            return Ok(Vertex::Tree(word));
        }
        if let Some(rest) = s.strip_prefix("Z:") {
            let inner = rest.strip_prefix('(').and_then(|r| r.strip_suffix(')')).ok_or_else(bad)?;
            let coords = inner
                .split(',')
                .map(|t| t.trim().parse::<i64>().map_err(|_| bad()))
                .collect::<Result<Vec<i64>>>()?;
            if coords.is_empty() {
                return Err(bad());
            }
            return Ok(Vertex::Lattice(coords));
        }
        if let Some(rest) = s.strip_prefix("L:") {
            let (p_part, l_part) = rest.split_once(';').ok_or_else(bad)?;
            let pos = p_part.strip_prefix("p=").ok_or_else(bad)?.parse::<i64>().map_err(|_| bad())?;
            let lamps_str = l_part.strip_prefix("lamps=").ok_or_else(bad)?;
            let lamps = if lamps_str.is_empty() {
                Vec::new()
            } else {
                lamps_str
                    .split(',')
                    .map(|t| t.parse::<i64>().map_err(|_| bad()))
                    .collect::<Result<Vec<i64>>>()?
            };
            if !lamps.windows(2).all(|w| w[0] < w[1]) {
                return Err(Error::Encoding(format!("lamp set not sorted in {s:?}")));
            }
            return Ok(Vertex::Lamplighter { lamps, pos });
        }
        if let Some(rest) = s.strip_prefix("H:") {
            let (l_part, i_part) = rest.split_once(';').ok_or_else(bad)?;
            let level = l_part.strip_prefix("lvl=").ok_or_else(bad)?.parse::<u32>().map_err(|_| bad())?;
            let index = i_part.strip_prefix("idx=").ok_or_else(bad)?.parse::<u64>().map_err(|_| bad())?;
            return Ok(Vertex::Hyperbolic { level, index });
        }
        Err(bad())
    }
}

/// Lamplighter distances come from a breadth-first search rooted at the
/// identity, grown layer by layer on demand and cached for the process
/// lifetime. Balls used in experiments have small radii, so this stays cheap.
struct LampDistCache {
    dist: HashMap<Vertex, u32>,
    frontier: Vec<Vertex>,
    radius: u32,
}

static LAMP_DIST: OnceLock<Mutex<LampDistCache>> = OnceLock::new();

fn lamplighter_dist(spec: &HostSpec, v: &Vertex) -> Result<u32> {
    // Any valid state is reachable within this many steps: sweep to the
    // leftmost relevant site, then to the rightmost, toggling on the way.
    let bound = match v {
        Vertex::Lamplighter { lamps, pos } => {
            let m = lamps
                .iter()
                .chain(std::iter::once(pos))
                .map(|c| c.unsigned_abs())
                .max()
                .unwrap_or(0);
            4 * m as u32 + lamps.len() as u32 + 4
        }
        _ => unreachable!(),
    };
    let cache = LAMP_DIST.get_or_init(|| {
        let root = Vertex::Lamplighter { lamps: Vec::new(), pos: 0 };
        let mut dist = HashMap::new();
        dist.insert(root.clone(), 0);
        Mutex::new(LampDistCache { dist, frontier: vec![root], radius: 0 })
    });
    let mut cache = cache.lock().expect("lamplighter distance cache poisoned");
    loop {
        if let Some(&d) = cache.dist.get(v) {
            return Ok(d);
        }
        if cache.radius >= bound {
            return Err(Error::Encoding(format!("vertex {v} unreachable within {bound} steps")));
        }
        let next_radius = cache.radius + 1;
        let mut next = Vec::new();
        let frontier = std::mem::take(&mut cache.frontier);
        for u in &frontier {
            for w in spec.neighbors(u)? {
                if !cache.dist.contains_key(&w) {
                    cache.dist.insert(w.clone(), next_radius);
                    next.push(w);
                }
            }
        }
        cache.frontier = next;
        cache.radius = next_radius;
    }
}

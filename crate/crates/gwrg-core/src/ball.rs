//! Finite balls in a host graph.
//!
//! `Ball::new` materializes `G_n`, the subgraph induced on all host vertices
//! within distance `n` of the root, via breadth-first search. Vertices get
//! dense `u32` indices in discovery order (root first, then distance layer by
//! layer, ties in the host's neighbor order), so a ball is bit-identical
//! across rebuilds. Adjacency is stored in compressed sparse rows.
//!
//! The boundary `∂G_n` is the set of vertices at distance exactly `n`.
//! `host_degree` keeps each vertex's degree in the infinite host, which on
//! the boundary exceeds its ball degree.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::host::{HostSpec, Vertex};

/// Default limit on ball size; `Error::VertexCap` past this.
pub const DEFAULT_VERTEX_CAP: usize = 5_000_000;

#[derive(Debug, Clone)]
pub struct Ball {
    spec: HostSpec,
    radius: u32,
    vertices: Vec<Vertex>,
    index: HashMap<Vertex, u32>,
    /// CSR offsets into `adj`, length `len() + 1`.
    offsets: Vec<u32>,
    adj: Vec<u32>,
    dist: Vec<u32>,
    host_degree: Vec<u32>,
    boundary: Vec<u32>,
}

impl Ball {
    pub fn new(spec: HostSpec, radius: u32) -> Result<Self> {
        Self::with_cap(spec, radius, DEFAULT_VERTEX_CAP)
    }

    pub fn with_cap(spec: HostSpec, radius: u32, cap: usize) -> Result<Self> {
        if radius == 0 {
            return Err(Error::InvalidRadius);
        }
        let root = spec.root();
        let mut vertices = vec![root.clone()];
        let mut index = HashMap::new();
        index.insert(root, 0u32);
        let mut dist = vec![0u32];
        // neighbor lists in host order; trimmed to in-ball vertices afterwards
        let mut nbr_ids: Vec<Vec<u32>> = Vec::new();
        let mut host_degree = Vec::new();

        let mut head = 0usize;
        while head < vertices.len() {
            let v = vertices[head].clone();
            let d = dist[head];
            let nbrs = spec.neighbors(&v)?;
            host_degree.push(nbrs.len() as u32);
            let mut ids = Vec::with_capacity(nbrs.len());
            for w in nbrs {
                if let Some(&i) = index.get(&w) {
                    ids.push(i);
                } else if d < radius {
                    let i = vertices.len() as u32;
                    if vertices.len() >= cap {
                        return Err(Error::VertexCap { cap, reached: vertices.len() + 1 });
                    }
                    index.insert(w.clone(), i);
                    vertices.push(w);
                    dist.push(d + 1);
                    ids.push(i);
                } // else: outside the ball, dropped
            }
            nbr_ids.push(ids);
            head += 1;
        }

        // BFS layering guarantees every recorded neighbor is in the ball, but
        // a vertex at distance n may have listed an id before its own row was
        // scanned; rows were built per-vertex so the CSR assembly below is
        // straightforward.
        let mut offsets = Vec::with_capacity(vertices.len() + 1);
        let mut adj = Vec::new();
        offsets.push(0u32);
        for ids in &nbr_ids {
            adj.extend_from_slice(ids);
            offsets.push(adj.len() as u32);
        }

        let boundary = (0..vertices.len() as u32).filter(|&i| dist[i as usize] == radius).collect();

        Ok(Self { spec, radius, vertices, index, offsets, adj, dist, host_degree, boundary })
    }

    pub fn spec(&self) -> &HostSpec {
        &self.spec
    }

    pub fn radius(&self) -> u32 {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn vertex(&self, i: u32) -> &Vertex {
        &self.vertices[i as usize]
    }

    pub fn index_of(&self, v: &Vertex) -> Option<u32> {
        self.index.get(v).copied()
    }

    pub fn neighbors(&self, i: u32) -> &[u32] {
        let (a, b) = (self.offsets[i as usize] as usize, self.offsets[i as usize + 1] as usize);
        &self.adj[a..b]
    }

    pub fn degree(&self, i: u32) -> u32 {
        self.offsets[i as usize + 1] - self.offsets[i as usize]
    }

    /// Degree of vertex `i` in the infinite host.
    pub fn host_degree(&self, i: u32) -> u32 {
        self.host_degree[i as usize]
    }

    pub fn dist_to_root(&self, i: u32) -> u32 {
        self.dist[i as usize]
    }

    /// Indices at distance exactly `radius`, ascending.
    pub fn boundary(&self) -> &[u32] {
        &self.boundary
    }

    pub fn is_boundary(&self, i: u32) -> bool {
        self.dist[i as usize] == self.radius
    }

    /// Indices strictly inside the ball (distance < radius), ascending.
    pub fn interior(&self) -> Vec<u32> {
        (0..self.len() as u32).filter(|&i| !self.is_boundary(i)).collect()
    }

    /// Groups the boundary by the depth-1 ancestor of each vertex. Only
    /// meaningful on tree hosts, where the branch containing a vertex is the
    /// first letter of its word.
    pub fn boundary_partition_by_branch(&self) -> Result<Vec<(Vertex, Vec<u32>)>> {
        if !self.spec.is_tree() {
            return Err(Error::NotATree { op: "boundary_partition_by_branch", host: self.spec.to_string() });
        }
        let mut groups: Vec<(Vertex, Vec<u32>)> = Vec::new();
        for &b in &self.boundary {
            let first = match self.vertex(b) {
                Vertex::Tree(word) => Vertex::Tree(vec![word[0]]),
                _ => unreachable!("tree hosts carry Tree payloads"),
            };
            match groups.iter_mut().find(|(v, _)| *v == first) {
                Some((_, ids)) => ids.push(b),
                None => groups.push((first, vec![b])),
            }
        }
        groups.sort_by(|(a, _), (b, _)| a.cmp(b));
        Ok(groups)
    }

    /// One line per vertex: `<index> <vertex> : <sorted neighbor indices>`.
    pub fn dump(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        for i in 0..self.len() as u32 {
            let mut ids = self.neighbors(i).to_vec();
            ids.sort_unstable();
            let _ = write!(out, "{i} {}", self.vertex(i));
            let _ = write!(out, " :");
            for id in ids {
                let _ = write!(out, " {id}");
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn radius_zero_rejected() {
        assert!(matches!(
            Ball::new(HostSpec::grid(1).unwrap(), 0),
            Err(Error::InvalidRadius)
        ));
    }

    // Oracle: enumerate {-n..n}^d directly and keep points with |x|_1 <= n.
    #[test]
    fn grid_ball_sizes_match_enumeration() {
        for (d, n) in [(1u32, 2u32), (2, 2), (3, 2), (2, 4)] {
            let mut count = 0usize;
            let range = -(n as i64)..=n as i64;
            let mut points = vec![vec![]];
            for _ in 0..d {
                let mut next = Vec::new();
                for p in &points {
                    for c in range.clone() {
                        let mut q = p.clone();
                        q.push(c);
                        next.push(q);
                    }
                }
                points = next;
            }
            for p in &points {
                if p.iter().map(|c: &i64| c.unsigned_abs()).sum::<u64>() <= n as u64 {
                    count += 1;
                }
            }
            let ball = Ball::new(HostSpec::grid(d).unwrap(), n).unwrap();
            assert_eq!(ball.len(), count, "d={d} n={n}");
        }
        // |B_2| in Z^1 = 5, Z^2 = 13, Z^3 = 25
        assert_eq!(Ball::new(HostSpec::grid(1).unwrap(), 2).unwrap().len(), 5);
        assert_eq!(Ball::new(HostSpec::grid(3).unwrap(), 2).unwrap().len(), 25);
    }

    #[test]
    fn tree_boundary_sizes_match_closed_forms() {
        for n in 1..=6u32 {
            let b2 = Ball::new(HostSpec::rooted_b_ary(2).unwrap(), n).unwrap();
            assert_eq!(b2.boundary().len() as u64, 1u64 << n);
            let b3 = Ball::new(HostSpec::rooted_b_ary(3).unwrap(), n).unwrap();
            assert_eq!(b3.boundary().len() as u64, 3u64.pow(n));
            // homogeneous: d * (d-1)^(n-1)
            let h3 = Ball::new(HostSpec::homogeneous_tree(3).unwrap(), n).unwrap();
            assert_eq!(h3.boundary().len() as u64, 3 * 2u64.pow(n - 1));
        }
    }

    #[test]
    fn adjacency_is_symmetric_and_within_ball() {
        for spec in [
            HostSpec::rooted_b_ary(2).unwrap(),
            HostSpec::grid(2).unwrap(),
            HostSpec::hyperbolic_tree(),
            HostSpec::lamplighter_z(),
        ] {
            let ball = Ball::new(spec, 4).unwrap();
            for i in 0..ball.len() as u32 {
                for &j in ball.neighbors(i) {
                    assert!(ball.neighbors(j).contains(&i), "{spec}: {i} -> {j} not mirrored");
                    assert!((j as usize) < ball.len());
                }
                let set: HashSet<_> = ball.neighbors(i).iter().collect();
                assert_eq!(set.len(), ball.neighbors(i).len(), "{spec}: duplicate edge at {i}");
            }
        }
    }

    #[test]
    fn distances_and_boundary_agree_with_host() {
        for spec in [HostSpec::rooted_b_ary(2).unwrap(), HostSpec::grid(2).unwrap(), HostSpec::lamplighter_z()] {
            let ball = Ball::new(spec, 3).unwrap();
            for i in 0..ball.len() as u32 {
                let v = ball.vertex(i);
                assert_eq!(ball.dist_to_root(i), spec.dist_to_root(v).unwrap(), "{spec}: {v}");
                assert!(ball.dist_to_root(i) <= 3);
                assert_eq!(ball.is_boundary(i), ball.dist_to_root(i) == 3);
            }
            let b: Vec<u32> = ball.boundary().to_vec();
            let mut sorted = b.clone();
            sorted.sort_unstable();
            assert_eq!(b, sorted);
        }
    }

    // Interior vertices keep their host degree; boundary vertices lose the
    // neighbors outside the ball.
    #[test]
    fn degrees_split_at_the_boundary() {
        let ball = Ball::new(HostSpec::rooted_b_ary(2).unwrap(), 3).unwrap();
        for i in 0..ball.len() as u32 {
            if ball.is_boundary(i) {
                assert!(ball.degree(i) < ball.host_degree(i));
                assert_eq!(ball.degree(i), 1); // leaves of the tree ball
            } else {
                assert_eq!(ball.degree(i), ball.host_degree(i));
            }
        }
        let grid = Ball::new(HostSpec::grid(2).unwrap(), 2).unwrap();
        for i in 0..grid.len() as u32 {
            assert_eq!(grid.host_degree(i), 4);
            if !grid.is_boundary(i) {
                assert_eq!(grid.degree(i), 4);
            } else {
                assert!(grid.degree(i) < 4);
            }
        }
    }

    #[test]
    fn vertex_cap_is_enforced() {
        match Ball::with_cap(HostSpec::rooted_b_ary(3).unwrap(), 8, 100) {
            Err(Error::VertexCap { cap: 100, .. }) => {}
            other => panic!("expected VertexCap, got {other:?}"),
        }
    }

    #[test]
    fn boundary_partition_counts_on_trees() {
        // btree2, n=2: boundary 4, branches {0,1} of 2 each
        let b = Ball::new(HostSpec::rooted_b_ary(2).unwrap(), 2).unwrap();
        let parts = b.boundary_partition_by_branch().unwrap();
        assert_eq!(parts.len(), 2);
        assert!(parts.iter().all(|(_, ids)| ids.len() == 2));
        assert_eq!(parts[0].0, Vertex::Tree(vec![0]));
        // homogeneous d=3, n=2: boundary 6, 3 branches of 2
        let h = Ball::new(HostSpec::homogeneous_tree(3).unwrap(), 2).unwrap();
        let parts = h.boundary_partition_by_branch().unwrap();
        assert_eq!(parts.len(), 3);
        assert!(parts.iter().all(|(_, ids)| ids.len() == 2));
        // non-tree hosts refuse
        let g = Ball::new(HostSpec::grid(2).unwrap(), 2).unwrap();
        assert!(matches!(g.boundary_partition_by_branch(), Err(Error::NotATree { .. })));
    }

    #[test]
    fn rebuild_is_bit_identical() {
        let spec = HostSpec::hyperbolic_tree();
        let a = Ball::new(spec, 5).unwrap();
        let b = Ball::new(spec, 5).unwrap();
        assert_eq!(a.dump(), b.dump());
        assert_eq!(a.offsets, b.offsets);
        assert_eq!(a.adj, b.adj);
    }

    #[test]
    fn dump_format() {
        let ball = Ball::new(HostSpec::grid(1).unwrap(), 1).unwrap();
        let dump = ball.dump();
        let lines: Vec<&str> = dump.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], "0 Z:(0) : 1 2");
        assert_eq!(lines[1], "1 Z:(1) : 0");
        assert_eq!(lines[2], "2 Z:(-1) : 0");
    }

    #[test]
    fn index_round_trips() {
        let ball = Ball::new(HostSpec::lamplighter_z(), 3).unwrap();
        for i in 0..ball.len() as u32 {
            assert_eq!(ball.index_of(ball.vertex(i)), Some(i));
        }
        assert_eq!(ball.index_of(&Vertex::Lamplighter { lamps: vec![99], pos: 99 }), None);
    }
}

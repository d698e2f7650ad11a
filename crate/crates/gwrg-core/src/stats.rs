//! Observables on GWRG samples: isolated vertices, components, the exact
//! diameter of the largest component, first connectivity times, and ordinary
//! least squares for the scaling fits.
//!
//! Everything is evaluated on the simple graph (self-loops ignored), on the
//! vertex set ∂Gₙ.

use std::collections::HashMap;

use crate::ball::Ball;
use crate::error::{Error, Result};
use crate::rng::StreamKey;
use crate::sampler::GwrgState;
use crate::walk::ParticleScheme;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleStats {
    pub n: u32,
    pub i: u32,
    pub boundary_size: usize,
    pub isolated_count: usize,
    pub component_count: usize,
    pub largest_component_size: usize,
    pub largest_component_diameter: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConnectivityTimes {
    /// First round with Rⁱₙ connected; None when censored at the round cap.
    pub tau: Option<u32>,
    /// First round with no isolated vertex; None when censored.
    pub tau_star: Option<u32>,
}

struct UnionFind {
    parent: Vec<u32>,
    size: Vec<u32>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self { parent: (0..n as u32).collect(), size: vec![1; n] }
    }

    fn find(&mut self, x: u32) -> u32 {
        let mut root = x;
        while self.parent[root as usize] != root {
            root = self.parent[root as usize];
        }
        let mut at = x;
        while self.parent[at as usize] != root {
            at = std::mem::replace(&mut self.parent[at as usize], root);
        }
        root
    }

    fn union(&mut self, a: u32, b: u32) {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        if self.size[ra as usize] < self.size[rb as usize] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb as usize] = ra;
        self.size[ra as usize] += self.size[rb as usize];
    }
}

pub fn compute_stats(state: &GwrgState, ball: &Ball) -> SampleStats {
    let boundary = ball.boundary();
    let boundary_size = boundary.len();
    // Dense positions within the boundary for union-find and BFS.
    let mut pos: HashMap<u32, u32> = HashMap::with_capacity(boundary_size);
    for (bi, &b) in boundary.iter().enumerate() {
        pos.insert(b, bi as u32);
    }
    let mut uf = UnionFind::new(boundary_size);
    let mut adj: Vec<Vec<u32>> = vec![Vec::new(); boundary_size];
    for &(u, v) in &state.simple_edges {
        let (pu, pv) = (pos[&u], pos[&v]);
        uf.union(pu, pv);
        adj[pu as usize].push(pv);
        adj[pv as usize].push(pu);
    }
    let isolated_count = state.isolated_vertices(ball).len();
    let mut component_of = vec![0u32; boundary_size];
    let mut component_sizes: HashMap<u32, usize> = HashMap::new();
    for bi in 0..boundary_size as u32 {
        let root = uf.find(bi);
        component_of[bi as usize] = root;
        *component_sizes.entry(root).or_insert(0) += 1;
    }
    let component_count = component_sizes.len();
    // Largest component; ties go to the one containing the smallest vertex
    // index, which is the first root encountered in index order.
    let mut largest_root = 0u32;
    let mut largest_size = 0usize;
    for bi in 0..boundary_size as u32 {
        let root = component_of[bi as usize];
        let size = component_sizes[&root];
        if size > largest_size {
            largest_size = size;
            largest_root = root;
        }
    }
    let members: Vec<u32> = (0..boundary_size as u32)
        .filter(|&bi| component_of[bi as usize] == largest_root)
        .collect();
    let largest_component_diameter = diameter_all_pairs_bfs(&adj, &members);
    SampleStats {
        n: ball.radius(),
        i: state.rounds_done,
        boundary_size,
        isolated_count,
        component_count,
        largest_component_size: largest_size,
        largest_component_diameter,
    }
}

/// Exact diameter by a BFS from every member of the component.
fn diameter_all_pairs_bfs(adj: &[Vec<u32>], members: &[u32]) -> u32 {
    let mut diameter = 0u32;
    let mut dist: Vec<u32> = vec![u32::MAX; adj.len()];
    let mut queue = std::collections::VecDeque::new();
    for &s in members {
        for &m in members {
            dist[m as usize] = u32::MAX;
        }
        dist[s as usize] = 0;
        queue.push_back(s);
        while let Some(v) = queue.pop_front() {
            let d = dist[v as usize];
            diameter = diameter.max(d);
            for &w in &adj[v as usize] {
                if dist[w as usize] == u32::MAX {
                    dist[w as usize] = d + 1;
                    queue.push_back(w);
                }
            }
        }
    }
    diameter
}

/// Advances rounds until Rⁱₙ is connected, recording the first rounds at
/// which (a) no vertex is isolated and (b) the graph is connected. Rounds
/// stop at `i_cap`; times not reached by then come back `None`.
pub fn connectivity_times(
    ball: &Ball,
    scheme: ParticleScheme,
    trial_key: &StreamKey,
    i_cap: u32,
) -> Result<ConnectivityTimes> {
    if i_cap < 1 {
        return Err(Error::InvalidInput("round cap must be at least 1".into()));
    }
    let mut state = GwrgState::new();
    let mut tau = None;
    let mut tau_star = None;
    for i in 1..=i_cap {
        state.advance_round(ball, scheme, &trial_key.child(u64::from(i)))?;
        if tau_star.is_none() && state.isolated_vertices(ball).is_empty() {
            tau_star = Some(i);
        }
        if tau.is_none() {
            let stats = compute_stats(&state, ball);
            if stats.component_count == 1 {
                tau = Some(i);
            }
        }
        if tau.is_some() && tau_star.is_some() {
            break;
        }
    }
    Ok(ConnectivityTimes { tau, tau_star })
}

/// Ordinary least squares fit over ≥ 3 points: (slope, intercept,
/// adjusted R²), with adjusted R² = 1 − (1 − R²)(m − 1)/(m − 2).
pub fn linear_fit(points: &[(f64, f64)]) -> Result<(f64, f64, f64)> {
    let m = points.len();
    if m < 3 {
        return Err(Error::InvalidInput(format!("linear fit needs at least 3 points, got {m}")));
    }
    let mf = m as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / mf;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / mf;
    let sxx: f64 = points.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidInput("all x values coincide; fit is degenerate".into()));
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let ss_tot: f64 = points.iter().map(|p| (p.1 - mean_y).powi(2)).sum();
    let ss_res: f64 = points
        .iter()
        .map(|p| (p.1 - (slope * p.0 + intercept)).powi(2))
        .sum();
    let r2 = if ss_tot == 0.0 {
        1.0 // constant data fit exactly by the horizontal line
    } else {
        1.0 - ss_res / ss_tot
    };
    let adjusted = 1.0 - (1.0 - r2) * (mf - 1.0) / (mf - 2.0);
    Ok((slope, intercept, adjusted))
}

//! Exact linear-algebra ground truth on small finite networks.
//!
//! Everything here reduces to Dirichlet problems for the graph Laplacian
//! `L = D − W`: hitting distributions, killed Green functions, expected
//! visit counts, effective conductances, escape probabilities, first-return
//! distributions and crossing expectations. Conductances are edge weights;
//! parallel edges are integer weights, which is how the contracted graph
//! with the outer vertex `*` gets its multiplicities.
//!
//! Solves are direct dense LU below [`DENSE_LIMIT`] unknowns and
//! Jacobi-preconditioned conjugate gradients above, both to a relative
//! residual of [`SOLVE_TOL`]. Networks larger than [`ORACLE_VERTEX_CAP`]
//! are refused: the oracle validates, it does not scale.

use nalgebra::{DMatrix, DVector, Dyn};

use crate::ball::Ball;
use crate::error::{Error, Result};

pub const ORACLE_VERTEX_CAP: usize = 20_000;
pub const DENSE_LIMIT: usize = 2_000;
pub const SOLVE_TOL: f64 = 1e-10;
/// Solutions with a worse relative residual than this are rejected.
pub const RESIDUAL_LIMIT: f64 = 1e-9;

const CG_MAX_ITERS: usize = 200_000;

/// Undirected weighted network in compressed sparse rows.
#[derive(Debug, Clone)]
pub struct Network {
    offsets: Vec<u32>,
    nbrs: Vec<u32>,
    weights: Vec<f64>,
    /// c_x = total conductance at x.
    strength: Vec<f64>,
}

/// A solved Dirichlet problem: per-vertex values plus the relative residual
/// of the linear system that produced them.
#[derive(Debug, Clone)]
pub struct Solution {
    pub values: Vec<f64>,
    pub residual: f64,
}

impl Network {
    /// Unit-conductance network on the ball's adjacency, same index space.
    pub fn from_ball(ball: &Ball) -> Result<Self> {
        let n = ball.len();
        let mut edges = Vec::new();
        for u in 0..n as u32 {
            for &v in ball.neighbors(u) {
                if u < v {
                    edges.push((u, v, 1.0));
                }
            }
        }
        Self::from_weighted_edges(n, &edges)
    }

    /// The ball plus the contracted outer vertex `*` (index `ball.len()`),
    /// joined to each boundary vertex b with weight
    /// `host_degree(b) − ball_degree(b)`, the number of host edges from b
    /// that leave the ball.
    pub fn from_ball_contracted(ball: &Ball) -> Result<(Self, u32)> {
        let n = ball.len();
        let star = n as u32;
        let mut edges = Vec::new();
        for u in 0..n as u32 {
            for &v in ball.neighbors(u) {
                if u < v {
                    edges.push((u, v, 1.0));
                }
            }
        }
        for &b in ball.boundary() {
            let outside = ball.host_degree(b) - ball.degree(b);
            if outside > 0 {
                edges.push((b, star, f64::from(outside)));
            }
        }
        Ok((Self::from_weighted_edges(n + 1, &edges)?, star))
    }

    /// General constructor; parallel `(u, v)` entries accumulate.
    pub fn from_weighted_edges(n: usize, edges: &[(u32, u32, f64)]) -> Result<Self> {
        if n > ORACLE_VERTEX_CAP {
            return Err(Error::OracleTooLarge { size: n, cap: ORACLE_VERTEX_CAP });
        }
        let mut acc: std::collections::BTreeMap<(u32, u32), f64> = std::collections::BTreeMap::new();
        for &(u, v, w) in edges {
            if u as usize >= n || v as usize >= n {
                return Err(Error::InvalidInput(format!("edge ({u},{v}) out of range for n={n}")));
            }
            if u == v {
                return Err(Error::InvalidInput(format!("self-loop at {u} not supported")));
            }
            if !(w > 0.0) {
                return Err(Error::InvalidInput(format!("edge ({u},{v}) has nonpositive weight {w}")));
            }
            *acc.entry((u.min(v), u.max(v))).or_insert(0.0) += w;
        }
        let mut degree = vec![0u32; n];
        for (&(u, v), _) in &acc {
            degree[u as usize] += 1;
            degree[v as usize] += 1;
        }
        let mut offsets = vec![0u32; n + 1];
        for i in 0..n {
            offsets[i + 1] = offsets[i] + degree[i];
        }
        let mut cursor: Vec<u32> = offsets[..n].to_vec();
        let mut nbrs = vec![0u32; acc.len() * 2];
        let mut weights = vec![0.0f64; acc.len() * 2];
        for (&(u, v), &w) in &acc {
            for (a, b) in [(u, v), (v, u)] {
                let c = cursor[a as usize] as usize;
                nbrs[c] = b;
                weights[c] = w;
                cursor[a as usize] += 1;
            }
        }
        let mut strength = vec![0.0f64; n];
        for i in 0..n {
            let (a, b) = (offsets[i] as usize, offsets[i + 1] as usize);
            strength[i] = weights[a..b].iter().sum();
        }
        Ok(Self { offsets, nbrs, weights, strength })
    }

    pub fn len(&self) -> usize {
        self.strength.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strength.is_empty()
    }

    /// Total conductance at `x`.
    pub fn strength(&self, x: u32) -> f64 {
        self.strength[x as usize]
    }

    pub fn edges_at(&self, x: u32) -> impl Iterator<Item = (u32, f64)> + '_ {
        let (a, b) = (self.offsets[x as usize] as usize, self.offsets[x as usize + 1] as usize);
        self.nbrs[a..b].iter().copied().zip(self.weights[a..b].iter().copied())
    }

    /// Plain-text triplet dump, one `u v weight` line per undirected edge.
    pub fn dump_triplets(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        for u in 0..self.len() as u32 {
            for (v, w) in self.edges_at(u) {
                if u < v {
                    let _ = writeln!(out, "{u} {v} {w}");
                }
            }
        }
        out
    }

    fn absorbing_mask(&self, absorbing: &[u32]) -> Result<Vec<bool>> {
        if absorbing.is_empty() {
            return Err(Error::Singular("empty absorbing set".into()));
        }
        let mut mask = vec![false; self.len()];
        for &v in absorbing {
            if v as usize >= self.len() {
                return Err(Error::InvalidInput(format!("vertex {v} out of range")));
            }
            if std::mem::replace(&mut mask[v as usize], true) {
                return Err(Error::InvalidInput(format!("vertex {v} listed twice in absorbing set")));
            }
        }
        Ok(mask)
    }

    /// Solves the Dirichlet problem with the given absorbing vertices held at
    /// the given values and all other vertices harmonic.
    pub fn dirichlet(&self, boundary_data: &[(u32, f64)]) -> Result<Solution> {
        let absorbing: Vec<u32> = boundary_data.iter().map(|&(v, _)| v).collect();
        let mask = self.absorbing_mask(&absorbing)?;
        let sys = FreeSystem::new(self, &mask)?;
        let mut values = vec![0.0f64; self.len()];
        for &(v, h) in boundary_data {
            values[v as usize] = h;
        }
        // rhs_f = A_fb h_b
        let mut rhs = vec![0.0f64; sys.free.len()];
        for (fi, &u) in sys.free.iter().enumerate() {
            rhs[fi] = self
                .edges_at(u)
                .filter(|&(v, _)| mask[v as usize])
                .map(|(v, w)| w * values[v as usize])
                .sum();
        }
        let (h_free, residual) = sys.solve(&rhs)?;
        for (fi, &u) in sys.free.iter().enumerate() {
            values[u as usize] = h_free[fi];
        }
        Ok(Solution { values, residual })
    }

    /// P_start[walk absorbed at each target], in target order.
    pub fn hitting_distribution(&self, start: u32, targets: &[u32]) -> Result<Vec<f64>> {
        let mask = self.absorbing_mask(targets)?;
        if start as usize >= self.len() {
            return Err(Error::InvalidInput(format!("vertex {start} out of range")));
        }
        if mask[start as usize] {
            return Ok(targets.iter().map(|&t| if t == start { 1.0 } else { 0.0 }).collect());
        }
        let sys = FreeSystem::new(self, &mask)?;
        // One solve: L_ff g = e_start, then P[X_T = y] = Σ_u g(u) w(u, y).
        let mut rhs = vec![0.0f64; sys.free.len()];
        rhs[sys.pos[start as usize] as usize] = 1.0;
        let (g, _) = sys.solve(&rhs)?;
        let dist: Vec<f64> = targets
            .iter()
            .map(|&y| {
                self.edges_at(y)
                    .filter(|&(u, _)| !mask[u as usize])
                    .map(|(u, w)| g[sys.pos[u as usize] as usize] * w)
                    .sum()
            })
            .collect();
        Ok(dist)
    }

    /// Expected visits to `y` (counting occupancy per time step, time 0
    /// included) by the walk from `x` killed on arrival at the kill set.
    /// Zero whenever `x` or `y` is killed.
    pub fn killed_green_entry(&self, x: u32, y: u32, kill: &[u32]) -> Result<f64> {
        let mask = self.absorbing_mask(kill)?;
        for v in [x, y] {
            if v as usize >= self.len() {
                return Err(Error::InvalidInput(format!("vertex {v} out of range")));
            }
        }
        if mask[x as usize] || mask[y as usize] {
            return Ok(0.0);
        }
        let sys = FreeSystem::new(self, &mask)?;
        let mut rhs = vec![0.0f64; sys.free.len()];
        rhs[sys.pos[x as usize] as usize] = 1.0;
        let (g, _) = sys.solve(&rhs)?;
        // G = L_ff⁻¹ D_f, and L_ff⁻¹ is symmetric.
        Ok(g[sys.pos[y as usize] as usize] * self.strength(y))
    }

    /// Full killed Green matrix G(x, y); rows and columns on the kill set are
    /// zero. One solve per interior vertex.
    pub fn killed_green(&self, kill: &[u32]) -> Result<DMatrix<f64>> {
        let mask = self.absorbing_mask(kill)?;
        let sys = FreeSystem::new(self, &mask)?;
        let n = self.len();
        let mut green = DMatrix::zeros(n, n);
        let mut rhs = vec![0.0f64; sys.free.len()];
        for (fi, &x) in sys.free.iter().enumerate() {
            rhs[fi] = 1.0;
            let (g, _) = sys.solve(&rhs)?;
            rhs[fi] = 0.0;
            for (fj, &y) in sys.free.iter().enumerate() {
                green[(x as usize, y as usize)] = g[fj] * self.strength(y);
            }
        }
        Ok(green)
    }

    /// Expected total visits to each non-absorbing vertex when `c_b` walks
    /// start at every absorbing vertex b and run to their first return to the
    /// absorbing set. Table is full-length with zeros on the absorbing set.
    pub fn expected_visits_constant_boundary(&self, absorbing: &[u32]) -> Result<Vec<f64>> {
        let mask = self.absorbing_mask(absorbing)?;
        let sys = FreeSystem::new(self, &mask)?;
        // Visits from all launches aggregate to c_x · y(x) with L_ff y = r,
        // r(u) = total edge weight from u into the absorbing set.
        let mut rhs = vec![0.0f64; sys.free.len()];
        for (fi, &u) in sys.free.iter().enumerate() {
            rhs[fi] = self.edges_at(u).filter(|&(v, _)| mask[v as usize]).map(|(_, w)| w).sum();
        }
        let (y, _) = sys.solve(&rhs)?;
        let mut table = vec![0.0f64; self.len()];
        for (fi, &u) in sys.free.iter().enumerate() {
            table[u as usize] = y[fi] * self.strength(u);
        }
        Ok(table)
    }

    pub fn effective_conductance(&self, a: u32, b: u32) -> Result<f64> {
        if a == b {
            return Err(Error::InvalidInput("effective conductance needs two distinct vertices".into()));
        }
        self.effective_conductance_sets(&[a], &[b])
    }

    /// Effective conductance between disjoint vertex sets: potential 1 on
    /// `src`, 0 on `sink`, harmonic elsewhere; returns the dissipated energy,
    /// which equals the current out of `src`.
    pub fn effective_conductance_sets(&self, src: &[u32], sink: &[u32]) -> Result<f64> {
        let mut data: Vec<(u32, f64)> = src.iter().map(|&v| (v, 1.0)).collect();
        data.extend(sink.iter().map(|&v| (v, 0.0)));
        let sol = self.dirichlet(&data)?;
        let mut flow = 0.0;
        for &a in src {
            for (v, w) in self.edges_at(a) {
                flow += w * (1.0 - sol.values[v as usize]);
            }
        }
        Ok(flow)
    }

    /// P_x[absorbed in `outer` before returning to `k`], for x ∈ k.
    pub fn escape_probability(&self, x: u32, k: &[u32], outer: &[u32]) -> Result<f64> {
        if !k.contains(&x) {
            return Err(Error::InvalidInput(format!("escape vertex {x} must lie in the set it escapes")));
        }
        let mut data: Vec<(u32, f64)> = k.iter().map(|&v| (v, 0.0)).collect();
        data.extend(outer.iter().map(|&v| (v, 1.0)));
        let sol = self.dirichlet(&data)?;
        let hit: f64 = self.edges_at(x).map(|(v, w)| w * sol.values[v as usize]).sum();
        Ok(hit / self.strength(x))
    }

    /// Distribution of the first return to the absorbing set for a walk
    /// started at `v` inside that set, in absorbing-list order.
    pub fn first_return_distribution(&self, v: u32, absorbing: &[u32]) -> Result<Vec<f64>> {
        let mask = self.absorbing_mask(absorbing)?;
        if v as usize >= self.len() || !mask[v as usize] {
            return Err(Error::NotBoundary { index: v });
        }
        let sys = FreeSystem::new(self, &mask)?;
        // R(v,y) = (w(v,y) + a_vᵀ L_ff⁻¹ a_y) / c_v with a_x(u) = w(u,x).
        let z = if sys.free.is_empty() {
            Vec::new()
        } else {
            let mut rhs = vec![0.0f64; sys.free.len()];
            for (fi, &u) in sys.free.iter().enumerate() {
                rhs[fi] = self.edges_at(u).filter(|&(t, _)| t == v).map(|(_, w)| w).sum();
            }
            sys.solve(&rhs)?.0
        };
        let c_v = self.strength(v);
        let dist = absorbing
            .iter()
            .map(|&y| {
                let direct: f64 = self.edges_at(v).filter(|&(t, _)| t == y).map(|(_, w)| w).sum();
                let through: f64 = self
                    .edges_at(y)
                    .filter(|&(u, _)| !mask[u as usize])
                    .map(|(u, w)| z[sys.pos[u as usize] as usize] * w)
                    .sum();
                (direct + through) / c_v
            })
            .collect();
        Ok(dist)
    }

    /// P_v[first return lands in `targets`] for every vertex of the absorbing
    /// set at once, via one aggregated Dirichlet solve.
    pub fn return_hit_probabilities(&self, absorbing: &[u32], targets: &[u32]) -> Result<Vec<f64>> {
        let mask = self.absorbing_mask(absorbing)?;
        let mut target_mask = vec![false; self.len()];
        for &t in targets {
            if (t as usize) >= self.len() || !mask[t as usize] {
                return Err(Error::NotBoundary { index: t });
            }
            target_mask[t as usize] = true;
        }
        let data: Vec<(u32, f64)> =
            absorbing.iter().map(|&v| (v, if target_mask[v as usize] { 1.0 } else { 0.0 })).collect();
        let sol = self.dirichlet(&data)?;
        Ok(absorbing
            .iter()
            .map(|&v| {
                let hit: f64 = self
                    .edges_at(v)
                    .map(|(u, w)| {
                        if mask[u as usize] {
                            if target_mask[u as usize] {
                                w
                            } else {
                                0.0
                            }
                        } else {
                            w * sol.values[u as usize]
                        }
                    })
                    .sum();
                hit / self.strength(v)
            })
            .collect())
    }

    /// Expected multiset crossing count between boundary subsets X and Y for
    /// one round that launches `c_v` walks from every absorbing vertex v: an
    /// edge {v, v†} crosses when one endpoint is in X and the other in Y.
    pub fn expected_crossings(&self, absorbing: &[u32], x_set: &[u32], y_set: &[u32]) -> Result<f64> {
        let mask = self.absorbing_mask(absorbing)?;
        let member = |set: &[u32]| -> Result<Vec<bool>> {
            let mut m = vec![false; self.len()];
            for &v in set {
                if (v as usize) >= self.len() || !mask[v as usize] {
                    return Err(Error::NotBoundary { index: v });
                }
                m[v as usize] = true;
            }
            Ok(m)
        };
        let in_x = member(x_set)?;
        let in_y = member(y_set)?;
        let union: Vec<u32> = absorbing
            .iter()
            .copied()
            .filter(|&v| in_x[v as usize] || in_y[v as usize])
            .collect();
        if union.is_empty() {
            return Ok(0.0);
        }
        let p_hit_y = self.return_hit_probabilities(absorbing, y_set)?;
        let p_hit_x = self.return_hit_probabilities(absorbing, x_set)?;
        let p_hit_union = self.return_hit_probabilities(absorbing, &union)?;
        let mut total = 0.0;
        for (bi, &v) in absorbing.iter().enumerate() {
            let (x, y) = (in_x[v as usize], in_y[v as usize]);
            let p = match (x, y) {
                (true, true) => p_hit_union[bi],
                (true, false) => p_hit_y[bi],
                (false, true) => p_hit_x[bi],
                (false, false) => continue,
            };
            total += self.strength(v) * p;
        }
        Ok(total)
    }
}

/// The grounded system L_ff over the non-absorbing vertices, with a
/// factorization or iterative context sized to the problem.
struct FreeSystem<'a> {
    net: &'a Network,
    mask: &'a [bool],
    free: Vec<u32>,
    /// vertex -> position in `free`; u32::MAX for absorbing vertices.
    pos: Vec<u32>,
    diag: Vec<f64>,
    dense: Option<nalgebra::linalg::LU<f64, Dyn, Dyn>>,
}

impl<'a> FreeSystem<'a> {
    fn new(net: &'a Network, mask: &'a [bool]) -> Result<Self> {
        let free: Vec<u32> = (0..net.len() as u32).filter(|&v| !mask[v as usize]).collect();
        let mut pos = vec![u32::MAX; net.len()];
        for (fi, &v) in free.iter().enumerate() {
            pos[v as usize] = fi as u32;
        }
        // Every free vertex must drain to the absorbing set or L_ff is singular.
        let mut reach = vec![false; net.len()];
        let mut queue: std::collections::VecDeque<u32> =
            (0..net.len() as u32).filter(|&v| mask[v as usize]).collect();
        for &v in &queue {
            reach[v as usize] = true;
        }
        while let Some(v) = queue.pop_front() {
            for (u, _) in net.edges_at(v) {
                if !reach[u as usize] {
                    reach[u as usize] = true;
                    if !mask[u as usize] {
                        queue.push_back(u);
                    }
                }
            }
        }
        if let Some(&v) = free.iter().find(|&&v| !reach[v as usize]) {
            return Err(Error::Singular(format!(
                "vertex {v} has no path to the absorbing set"
            )));
        }
        let diag: Vec<f64> = free.iter().map(|&v| net.strength(v)).collect();
        let dense = if free.len() <= DENSE_LIMIT {
            let mut m = DMatrix::zeros(free.len(), free.len());
            for (fi, &u) in free.iter().enumerate() {
                m[(fi, fi)] = net.strength(u);
                for (v, w) in net.edges_at(u) {
                    if !mask[v as usize] {
                        m[(fi, pos[v as usize] as usize)] = -w;
                    }
                }
            }
            Some(nalgebra::linalg::LU::new(m))
        } else {
            None
        };
        Ok(Self { net, mask, free, pos, diag, dense })
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (fi, &u) in self.free.iter().enumerate() {
            let mut acc = self.diag[fi] * x[fi];
            for (v, w) in self.net.edges_at(u) {
                if !self.mask[v as usize] {
                    acc -= w * x[self.pos[v as usize] as usize];
                }
            }
            out[fi] = acc;
        }
    }

    /// Solves L_ff x = rhs, returning the solution and its relative residual.
    fn solve(&self, rhs: &[f64]) -> Result<(Vec<f64>, f64)> {
        if self.free.is_empty() {
            return Ok((Vec::new(), 0.0));
        }
        let x = match &self.dense {
            Some(lu) => {
                let b = DVector::from_column_slice(rhs);
                let sol = lu
                    .solve(&b)
                    .ok_or_else(|| Error::Singular("dense factorization failed".into()))?;
                sol.as_slice().to_vec()
            }
            None => self.cg(rhs)?,
        };
        let mut ax = vec![0.0; x.len()];
        self.apply(&x, &mut ax);
        let norm_b: f64 = rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
        let norm_r: f64 = ax.iter().zip(rhs).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let residual = if norm_b == 0.0 { norm_r } else { norm_r / norm_b };
        if !residual.is_finite() || residual > RESIDUAL_LIMIT {
            return Err(Error::Singular(format!("solve residual {residual:.3e} too large")));
        }
        Ok((x, residual))
    }

    fn cg(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = rhs.len();
        let norm_b: f64 = rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm_b == 0.0 {
            return Ok(vec![0.0; n]);
        }
        let mut x = vec![0.0f64; n];
        let mut r = rhs.to_vec();
        let mut z: Vec<f64> = r.iter().zip(&self.diag).map(|(ri, di)| ri / di).collect();
        let mut p = z.clone();
        let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let mut ap = vec![0.0f64; n];
        for _ in 0..CG_MAX_ITERS {
            self.apply(&p, &mut ap);
            let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
            if pap <= 0.0 {
                return Err(Error::Singular("conjugate gradients lost positive-definiteness".into()));
            }
            let alpha = rz / pap;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            let norm_r: f64 = r.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm_r <= SOLVE_TOL * norm_b {
                return Ok(x);
            }
            for i in 0..n {
                z[i] = r[i] / self.diag[i];
            }
            let rz_next: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
            let beta = rz_next / rz;
            rz = rz_next;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        Err(Error::Singular(format!("conjugate gradients stalled after {CG_MAX_ITERS} iterations")))
    }
}

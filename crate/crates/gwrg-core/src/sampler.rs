//! Assembly of the random graphs R¹ₙ and their union evolution Rⁱₙ.
//!
//! The vertex set is always the deterministic boundary ∂Gₙ. Each walk trace
//! contributes the unordered pair {start, end} — possibly a self-loop — to
//! the edge multiset; the simple-graph view is the loop-free support of that
//! multiset. Rⁱₙ is the union of i independent one-round samples, so the
//! state just keeps absorbing rounds.

use std::collections::{BTreeMap, BTreeSet};

use crate::ball::Ball;
use crate::error::{Error, Result};
use crate::rng::StreamKey;
use crate::walk::{run_round, ParticleScheme, WalkTrace};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GwrgState {
    pub rounds_done: u32,
    /// Unordered pair (min, max) → multiplicity; loops keyed as (v, v).
    pub edge_multiset: BTreeMap<(u32, u32), u64>,
    /// Loop-free support of the multiset.
    pub simple_edges: BTreeSet<(u32, u32)>,
}

impl GwrgState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_trace_edge(&mut self, trace: &WalkTrace) {
        let key = (trace.start.min(trace.end), trace.start.max(trace.end));
        *self.edge_multiset.entry(key).or_insert(0) += 1;
        if key.0 != key.1 {
            self.simple_edges.insert(key);
        }
    }

    /// Runs one more round of walks and folds its edges in.
    pub fn advance_round(
        &mut self,
        ball: &Ball,
        scheme: ParticleScheme,
        round_key: &StreamKey,
    ) -> Result<()> {
        let traces = run_round(ball, scheme, round_key, false)?;
        for trace in &traces {
            self.add_trace_edge(trace);
        }
        self.rounds_done += 1;
        Ok(())
    }

    pub fn multiset_total(&self) -> u64 {
        self.edge_multiset.values().sum()
    }

    /// Multiset edges with one endpoint in X and the other in Y; an edge
    /// inside X∩Y (including a self-loop there) counts once.
    pub fn crossing_count(&self, ball: &Ball, x_set: &[u32], y_set: &[u32]) -> Result<u64> {
        let (in_x, in_y) = (boundary_mask(ball, x_set)?, boundary_mask(ball, y_set)?);
        Ok(self
            .edge_multiset
            .iter()
            .filter(|((u, v), _)| crosses(&in_x, &in_y, *u, *v))
            .map(|(_, m)| *m)
            .sum())
    }

    /// Same crossing rule evaluated on the simple graph.
    pub fn crossing_count_simple(&self, ball: &Ball, x_set: &[u32], y_set: &[u32]) -> Result<u64> {
        let (in_x, in_y) = (boundary_mask(ball, x_set)?, boundary_mask(ball, y_set)?);
        Ok(self.simple_edges.iter().filter(|(u, v)| crosses(&in_x, &in_y, *u, *v)).count() as u64)
    }

    /// Boundary vertices with no incident non-loop edge.
    pub fn isolated_vertices(&self, ball: &Ball) -> Vec<u32> {
        let mut touched = vec![false; ball.len()];
        for &(u, v) in &self.simple_edges {
            touched[u as usize] = true;
            touched[v as usize] = true;
        }
        ball.boundary().iter().copied().filter(|&b| !touched[b as usize]).collect()
    }

    /// Edge-list dump: a `# host=… n=… i=… seed=…` header, then one
    /// `u v multiplicity` line per multiset edge.
    pub fn edge_dump(&self, ball: &Ball, seed: u64) -> String {
        use std::fmt::Write;
        let mut out = format!(
            "# host={} n={} i={} seed={}\n",
            ball.spec(),
            ball.radius(),
            self.rounds_done,
            seed
        );
        for (&(u, v), &m) in &self.edge_multiset {
            let _ = writeln!(out, "{u} {v} {m}");
        }
        out
    }
}

fn boundary_mask(ball: &Ball, set: &[u32]) -> Result<Vec<bool>> {
    let mut mask = vec![false; ball.len()];
    for &v in set {
        if v as usize >= ball.len() || !ball.is_boundary(v) {
            return Err(Error::NotBoundary { index: v });
        }
        mask[v as usize] = true;
    }
    Ok(mask)
}

fn crosses(in_x: &[bool], in_y: &[bool], u: u32, v: u32) -> bool {
    (in_x[u as usize] && in_y[v as usize]) || (in_y[u as usize] && in_x[v as usize])
}

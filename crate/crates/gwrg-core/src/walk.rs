//! Stopped random walks from the ball boundary.
//!
//! A walk starts at a boundary vertex, steps uniformly among in-ball
//! neighbors, and stops at the first time t ≥ 1 it occupies a boundary
//! vertex again — the start itself does not stop it at time 0. One round
//! launches a scheme-determined particle count from every boundary vertex.
//!
//! Randomness is fully determined by the [`StreamKey`] handed in: each
//! (boundary vertex, particle) pair derives its own stream, so a round is
//! reproducible no matter how the particles are scheduled across threads.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;

use crate::ball::Ball;
use crate::error::{Error, Result};
use crate::rng::StreamKey;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WalkTrace {
    pub start: u32,
    pub end: u32,
    /// First-return time; at least 1.
    pub steps: u32,
    /// Full vertex sequence (start through end) when recording is on.
    pub path: Option<Vec<u32>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParticleScheme {
    /// Exactly d_{Gₙ}(v) particles at each boundary vertex per round.
    DegreeCount,
    /// Poisson(d_{Gₙ}(v)) particles, re-randomized every round.
    PoissonDegree,
}

impl ParticleScheme {
    pub fn name(&self) -> &'static str {
        match self {
            ParticleScheme::DegreeCount => "degree",
            ParticleScheme::PoissonDegree => "poisson",
        }
    }
}

impl std::str::FromStr for ParticleScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "degree" => Ok(ParticleScheme::DegreeCount),
            "poisson" => Ok(ParticleScheme::PoissonDegree),
            _ => Err(Error::InvalidInput(format!("unknown particle scheme {s:?}"))),
        }
    }
}

pub fn run_walk(ball: &Ball, start: u32, key: &StreamKey, record: bool) -> Result<WalkTrace> {
    if !ball.is_boundary(start) {
        return Err(Error::NotBoundary { index: start });
    }
    let mut rng = key.rng();
    let mut path = if record { Some(vec![start]) } else { None };
    let mut at = start;
    let mut steps = 0u32;
    loop {
        let nbrs = ball.neighbors(at);
        assert!(!nbrs.is_empty(), "vertex {at} is isolated in the ball");
        at = nbrs[rng.random_range(0..nbrs.len())];
        steps += 1;
        if let Some(p) = path.as_mut() {
            p.push(at);
        }
        if ball.is_boundary(at) {
            return Ok(WalkTrace { start, end: at, steps, path });
        }
    }
}

/// Launches one round of walks: for each boundary vertex, the scheme's
/// particle count of independent walks. Traces come back sorted by
/// (boundary index, particle index) regardless of thread schedule.
pub fn run_round(
    ball: &Ball,
    scheme: ParticleScheme,
    key: &StreamKey,
    record: bool,
) -> Result<Vec<WalkTrace>> {
    let per_vertex: Vec<Vec<WalkTrace>> = ball
        .boundary()
        .par_iter()
        .map(|&b| {
            let vertex_key = key.child(u64::from(b));
            let count = match scheme {
                ParticleScheme::DegreeCount => u64::from(ball.degree(b)),
                ParticleScheme::PoissonDegree => {
                    let mut rng = vertex_key.child_tag("count").rng();
                    let poisson = Poisson::new(f64::from(ball.degree(b)))
                        .expect("ball degrees are positive");
                    poisson.sample(&mut rng) as u64
                }
            };
            (0..count)
                .map(|p| run_walk(ball, b, &vertex_key.child(p), record))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_vertex.into_iter().flatten().collect())
}

/// Total occupancy count per ball vertex across all traces, counting every
/// time step of every path, endpoints included.
pub fn visit_counts(traces: &[WalkTrace], ball: &Ball) -> Result<Vec<u64>> {
    let mut counts = vec![0u64; ball.len()];
    for trace in traces {
        let path = trace.path.as_ref().ok_or(Error::MissingPath)?;
        for &v in path {
            counts[v as usize] += 1;
        }
    }
    Ok(counts)
}

/// Debug dump: one `start end steps [path…]` line per trace.
pub fn dump_traces(traces: &[WalkTrace]) -> String {
    use std::fmt::Write;
    let mut out = String::new();
    for t in traces {
        let _ = write!(out, "{} {} {}", t.start, t.end, t.steps);
        if let Some(path) = &t.path {
            for v in path {
                let _ = write!(out, " {v}");
            }
        }
        out.push('\n');
    }
    out
}

//! Oracle-equivalence suite: every Monte Carlo estimator against its exact
//! counterpart on a fixed set of small balls (each ≤ 200 vertices). A check
//! passes when the observed discrepancy is within three standard errors;
//! one line per check, exit is nonzero if any check fails.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use gwrg_core::ball::Ball;
use gwrg_core::estimators::{
    self, mean_stderr, CylinderWalk,
};
use gwrg_core::oracle::Network;
use gwrg_core::sampler::GwrgState;
use gwrg_core::walk::{run_round, visit_counts};
use gwrg_core::{Error, HostSpec, Result, StreamKey};

use crate::config::Resolved;
use crate::output::EstimateRow;

const MAX_FIXTURE_VERTICES: usize = 200;

fn fixtures() -> Vec<(&'static str, HostSpec, u32)> {
    vec![
        ("z1", HostSpec::grid(1).unwrap(), 3),
        ("z2", HostSpec::grid(2).unwrap(), 3),
        ("z2", HostSpec::grid(2).unwrap(), 5),
        ("btree2", HostSpec::rooted_b_ary(2).unwrap(), 4),
        ("btree2", HostSpec::rooted_b_ary(2).unwrap(), 6),
        ("tree-d3", HostSpec::homogeneous_tree(3).unwrap(), 3),
        ("tree-d3", HostSpec::homogeneous_tree(3).unwrap(), 5),
        ("hyptree", HostSpec::hyperbolic_tree(), 4),
        ("lamplighter", HostSpec::lamplighter_z(), 3),
    ]
}

struct CheckOutcome {
    name: &'static str,
    delta: f64,
    sigma: f64,
    trials: u64,
    detail: String,
}

impl CheckOutcome {
    fn pass(&self) -> bool {
        self.delta <= 3.0 * self.sigma
    }
}

fn walk_to_boundary(ball: &Ball, start: u32, rng: &mut ChaCha8Rng) -> u32 {
    let mut at = start;
    while !ball.is_boundary(at) {
        let nbrs = ball.neighbors(at);
        at = nbrs[rng.random_range(0..nbrs.len())];
    }
    at
}

/// Hitting distribution from the root: the targets with the largest exact
/// probabilities are each compared at 3σ.
fn check_hitting(ball: &Ball, net: &Network, key: &StreamKey, trials: u64) -> Result<CheckOutcome> {
    let root = ball.index_of(&ball.spec().root()).expect("root in ball");
    let exact = net.hitting_distribution(root, ball.boundary())?;
    let mut slot = vec![usize::MAX; ball.len()];
    for (j, &b) in ball.boundary().iter().enumerate() {
        slot[b as usize] = j;
    }
    let counts = (0..trials)
        .into_par_iter()
        .fold(
            || vec![0u64; ball.boundary().len()],
            |mut acc, t| {
                let mut rng = key.child(t).rng();
                let end = walk_to_boundary(ball, root, &mut rng);
                acc[slot[end as usize]] += 1;
                acc
            },
        )
        .reduce(
            || vec![0u64; ball.boundary().len()],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(&b) {
                    *x += y;
                }
                a
            },
        );
    let mut order: Vec<usize> = (0..exact.len()).collect();
    order.sort_by(|&a, &b| exact[b].partial_cmp(&exact[a]).unwrap().then(a.cmp(&b)));
    let mut worst: Option<(f64, f64, usize)> = None; // (delta, sigma, slot)
    let tested = order.len().min(5);
    for &j in order.iter().take(tested) {
        let p = exact[j];
        let sigma = (p * (1.0 - p) / trials as f64).sqrt();
        if sigma == 0.0 {
            continue;
        }
        let delta = (counts[j] as f64 / trials as f64 - p).abs();
        if worst.map_or(true, |(d, s, _)| delta / sigma > d / s) {
            worst = Some((delta, sigma, j));
        }
    }
    let (delta, sigma, j) = worst.expect("at least one testable target");
    Ok(CheckOutcome {
        name: "hitting",
        delta,
        sigma,
        trials,
        detail: format!("targets={tested};worst={}", ball.vertex(ball.boundary()[j])),
    })
}

fn check_green(ball: &Ball, key: &StreamKey, trials: u64, seed: u64) -> Result<CheckOutcome> {
    let root = ball.index_of(&ball.spec().root()).expect("root in ball");
    let child = ball.neighbors(root)[0];
    let mut worst: Option<(f64, f64, String)> = None;
    for (tag, x, y) in [("oo", root, root), ("oc", root, child)] {
        let exact = estimators::green_function_exact(ball, x, y)?;
        let rec = estimators::green_function_mc(ball, x, y, trials, &key.child_tag(tag), seed)?;
        let delta = (rec.estimate - exact).abs();
        let sigma = rec.std_error;
        if worst.as_ref().map_or(true, |(d, s, _)| delta * s > *d * sigma) {
            worst = Some((delta, sigma, format!("pair={tag}")));
        }
    }
    let (delta, sigma, detail) = worst.expect("two pairs tested");
    Ok(CheckOutcome { name: "green", delta, sigma, trials, detail })
}

/// Doyle–Snell visit counts: with every boundary vertex emitting its degree
/// in particles, each interior vertex sees d(x) expected visits per round.
fn check_visits(
    ball: &Ball,
    cfg: &Resolved,
    key: &StreamKey,
    rounds: u64,
) -> Result<CheckOutcome> {
    let interior = ball.interior();
    let mut sel = vec![
        interior[0],
        interior[interior.len() / 3],
        interior[2 * interior.len() / 3],
        interior[interior.len() - 1],
    ];
    sel.dedup();
    let m = sel.len();
    let (sum, sumsq) = (0..rounds)
        .into_par_iter()
        .map(|r| {
            let traces = run_round(ball, cfg.scheme, &key.child(r), true)?;
            let counts = visit_counts(&traces, ball)?;
            Ok(sel.iter().map(|&v| counts[v as usize] as f64).collect::<Vec<f64>>())
        })
        .try_fold(
            || (vec![0.0; m], vec![0.0; m]),
            |(mut s, mut q), row: Result<Vec<f64>>| -> Result<(Vec<f64>, Vec<f64>)> {
                let row = row?;
                for j in 0..m {
                    s[j] += row[j];
                    q[j] += row[j] * row[j];
                }
                Ok((s, q))
            },
        )
        .try_reduce(
            || (vec![0.0; m], vec![0.0; m]),
            |(mut s1, mut q1), (s2, q2)| {
                for j in 0..m {
                    s1[j] += s2[j];
                    q1[j] += q2[j];
                }
                Ok((s1, q1))
            },
        )?;
    let r = rounds as f64;
    let mut worst: Option<(f64, f64, u32)> = None;
    for j in 0..m {
        let mean = sum[j] / r;
        let var = ((sumsq[j] - r * mean * mean) / (r - 1.0)).max(0.0);
        let sigma = (var / r).sqrt();
        let delta = (mean - f64::from(ball.degree(sel[j]))).abs();
        if worst.map_or(true, |(d, s, _)| delta * s > d * sigma) {
            worst = Some((delta, sigma, sel[j]));
        }
    }
    let (delta, sigma, v) = worst.expect("selection nonempty");
    Ok(CheckOutcome {
        name: "visits",
        delta,
        sigma,
        trials: rounds,
        detail: format!("vertices={m};worst={}", ball.vertex(v)),
    })
}

fn check_crossings(
    ball: &Ball,
    net: &Network,
    cfg: &Resolved,
    key: &StreamKey,
    trials: u64,
) -> Result<CheckOutcome> {
    let boundary = ball.boundary();
    let half = boundary.len() / 2;
    let (x_set, y_set) = (boundary[..half].to_vec(), boundary[half..].to_vec());
    let exact = net.expected_crossings(boundary, &x_set, &y_set)?;
    let samples = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut state = GwrgState::new();
            state.advance_round(ball, cfg.scheme, &key.child(t))?;
            Ok(state.crossing_count(ball, &x_set, &y_set)? as f64)
        })
        .collect::<Result<Vec<f64>>>()?;
    let (mean, sigma) = mean_stderr(&samples);
    Ok(CheckOutcome {
        name: "crossings",
        delta: (mean - exact).abs(),
        sigma,
        trials,
        detail: format!("split=index-halves;exact={exact:.4}"),
    })
}

fn check_escape(ball: &Ball, key: &StreamKey, trials: u64) -> Result<CheckOutcome> {
    let root = ball.index_of(&ball.spec().root()).expect("root in ball");
    let exact = estimators::equilibrium_measure_exact(ball, &[root])?[0].1;
    let mc = estimators::equilibrium_measure_mc(ball, &[root], trials, key)?[0];
    Ok(CheckOutcome {
        name: "escape",
        delta: (mc.1 - exact).abs(),
        sigma: mc.2,
        trials,
        detail: format!("k=root;exact={exact:.4}"),
    })
}

fn check_mu(
    spec: HostSpec,
    ball: &Ball,
    cfg: &Resolved,
    key: &StreamKey,
    trials: u64,
) -> Result<CheckOutcome> {
    let root = ball.index_of(&spec.root()).expect("root in ball");
    let exact = estimators::equilibrium_measure_exact(ball, &[root])?[0].1;
    let z = CylinderWalk::new(&spec, vec![spec.root()])?;
    let curve = estimators::interlacement_intensity(
        spec,
        &z,
        &[ball.radius()],
        trials,
        cfg.scheme,
        key,
        cfg.vertex_cap,
    )?;
    let (_, est, sigma) = curve[0];
    Ok(CheckOutcome {
        name: "mu",
        delta: (est - exact).abs(),
        sigma,
        trials,
        detail: format!("cylinder=root;exact={exact:.4}"),
    })
}

pub fn oracle_suite(cfg: &Resolved) -> Result<(Vec<EstimateRow>, bool)> {
    let trials = cfg.trials;
    let suite_key = StreamKey::root(cfg.seed, "oracle-suite");
    let mut rows = Vec::new();
    let mut failures = 0usize;
    let mut total = 0usize;
    for (name, spec, n) in fixtures() {
        let ball = Ball::with_cap(spec, n, cfg.vertex_cap)?;
        if ball.len() > MAX_FIXTURE_VERTICES {
            return Err(Error::InvalidInput(format!(
                "suite fixture {name} n={n} has {} vertices (limit {MAX_FIXTURE_VERTICES})",
                ball.len()
            )));
        }
        let net = Network::from_ball(&ball)?;
        let fixture_key = suite_key.child_tag(name).child(u64::from(n));
        let checks = [
            check_hitting(&ball, &net, &fixture_key.child_tag("hitting"), trials)?,
            check_green(&ball, &fixture_key.child_tag("green"), trials, cfg.seed)?,
            check_visits(&ball, cfg, &fixture_key.child_tag("visits"), trials)?,
            check_crossings(&ball, &net, cfg, &fixture_key.child_tag("crossings"), trials)?,
            check_escape(&ball, &fixture_key.child_tag("escape"), trials)?,
            check_mu(spec, &ball, cfg, &fixture_key.child_tag("mu"), trials)?,
        ];
        for c in checks {
            total += 1;
            let ok = c.pass();
            failures += usize::from(!ok);
            println!(
                "{} suite_{:<10} {:<11} n={:<2} delta={:.3e} tol={:.3e} {}",
                if ok { "ok  " } else { "FAIL" },
                c.name,
                name,
                n,
                c.delta,
                3.0 * c.sigma,
                c.detail
            );
            rows.push(EstimateRow {
                quantity: format!("suite_{}", c.name),
                host: name.to_string(),
                n,
                params: c.detail,
                estimate: c.delta,
                stderr: c.sigma,
                trials: c.trials,
                seed: cfg.seed,
            });
        }
    }
    let ok = failures == 0;
    if ok {
        println!("oracle-suite: {total} checks, all ok");
    } else {
        println!("oracle-suite: {failures} of {total} checks FAILED");
    }
    Ok((rows, ok))
}

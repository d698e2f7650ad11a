//! Cross-module invariants: the exact oracle against direct simulation and
//! against itself along independent solution routes.

use gwrg_core::estimators::{capacity, equilibrium_measure_exact};
use gwrg_core::oracle::Network;
use gwrg_core::{Ball, HostSpec, StreamKey};
use rand::Rng;
use rayon::prelude::*;

fn make_ball(host: &str, n: u32) -> Ball {
    let spec: HostSpec = host.parse().unwrap();
    Ball::new(spec, n).unwrap()
}

#[test]
fn hitting_distribution_matches_direct_simulation() {
    const WALKS: u64 = 100_000;
    for (fi, (host, n)) in [("z2", 3), ("btree2", 4), ("lamplighter", 3)].iter().enumerate() {
        let ball = make_ball(host, *n);
        let net = Network::from_ball(&ball).unwrap();
        let exact = net.hitting_distribution(0, ball.boundary()).unwrap();

        let key = StreamKey::root(2_065, "hitting-sim").child(fi as u64);
        let counts = (0..WALKS)
            .into_par_iter()
            .fold(
                || vec![0u64; ball.boundary().len()],
                |mut acc, w| {
                    let mut rng = key.child(w).rng();
                    let mut at = 0u32;
                    while !ball.is_boundary(at) {
                        let nb = ball.neighbors(at);
                        at = nb[rng.random_range(0..nb.len())];
                    }
                    let slot = ball.boundary().iter().position(|&b| b == at).unwrap();
                    acc[slot] += 1;
                    acc
                },
            )
            .reduce(
                || vec![0u64; ball.boundary().len()],
                |mut a, b| {
                    for (x, y) in a.iter_mut().zip(b) {
                        *x += y;
                    }
                    a
                },
            );

        for (j, &p) in exact.iter().enumerate() {
            let est = counts[j] as f64 / WALKS as f64;
            let sigma = (p * (1.0 - p) / WALKS as f64).sqrt();
            assert!(
                (est - p).abs() <= 3.0 * sigma.max(1e-6),
                "{host} n={n} target {j}: est={est} exact={p}"
            );
        }
        assert_eq!(counts.iter().sum::<u64>(), WALKS);
    }
}

#[test]
fn killed_green_is_symmetric_after_conductance_scaling() {
    for (host, n) in [("z2", 3), ("btree2", 4), ("tree-d3", 3)] {
        let ball = make_ball(host, n);
        let net = Network::from_ball(&ball).unwrap();
        let green = net.killed_green(ball.boundary()).unwrap();
        for x in 0..net.len() as u32 {
            for y in 0..net.len() as u32 {
                let lhs = net.strength(x) * green[(x as usize, y as usize)];
                let rhs = net.strength(y) * green[(y as usize, x as usize)];
                assert!((lhs - rhs).abs() <= 1e-9, "{host} n={n} ({x},{y}): {lhs} vs {rhs}");
            }
        }
    }
}

#[test]
fn single_vertex_capacity_equals_conductance_to_boundary() {
    for (host, n) in [("z2", 4), ("btree2", 5), ("hyptree", 4), ("lamplighter", 3)] {
        let ball = make_ball(host, n);
        let mass = capacity(&equilibrium_measure_exact(&ball, &[0]).unwrap());
        let net = Network::from_ball(&ball).unwrap();
        let cond = net.effective_conductance_sets(&[0], ball.boundary()).unwrap();
        assert!((mass - cond).abs() <= 1e-9, "{host} n={n}: mass={mass} cond={cond}");
    }
}

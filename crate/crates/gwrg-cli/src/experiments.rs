//! One runner per experiment, all funneling into the shared row writers.
//! Trials are dispatched in parallel but collected in trial order, so the
//! result files never depend on the worker count.

use rayon::prelude::*;

use gwrg_core::ball::Ball;
use gwrg_core::estimators::{
    self, CylinderWalk, SetRule,
};
use gwrg_core::oracle::Network;
use gwrg_core::sampler::GwrgState;
use gwrg_core::stats::{compute_stats, connectivity_times, linear_fit};
use gwrg_core::{Error, Result, StreamKey, Vertex};

use crate::config::{Experiment, Resolved, RunMode};
use crate::output::{ConnectivityRow, EstimateRow, StatsRow};
use crate::suite;

/// Benchmark constants the connectivity fit is reported against.
pub const REF_SLOPE: f64 = 0.26;
pub const REF_INTERCEPT: f64 = 0.90;
pub const REF_ADJ_R2: f64 = 0.9993;

#[derive(Debug, Clone)]
pub enum Rows {
    Stats(Vec<StatsRow>),
    Connectivity(Vec<ConnectivityRow>),
    Estimates(Vec<EstimateRow>),
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub rows: Rows,
    /// Extra manifest entries produced by the run (fit results, suite verdict).
    pub manifest_extra: Vec<(String, String)>,
    /// False only when the oracle suite found a disagreement.
    pub suite_ok: bool,
}

impl RunOutput {
    fn of(rows: Rows) -> Self {
        Self { rows, manifest_extra: Vec::new(), suite_ok: true }
    }
}

pub fn run(cfg: &Resolved) -> Result<RunOutput> {
    match cfg.experiment {
        Experiment::Stats => run_stats(cfg),
        Experiment::Connectivity => run_connectivity(cfg),
        Experiment::Crossings => run_crossings(cfg),
        Experiment::Naim => run_naim(cfg),
        Experiment::Green => run_green(cfg),
        Experiment::Equilibrium => run_equilibrium(cfg),
        Experiment::Interlacement => run_interlacement(cfg),
        Experiment::GraphonSample => run_graphon_sample(cfg),
        Experiment::OracleSuite => {
            let (rows, ok) = suite::oracle_suite(cfg)?;
            Ok(RunOutput {
                rows: Rows::Estimates(rows),
                manifest_extra: vec![("suite_ok".into(), u8::from(ok).to_string())],
                suite_ok: ok,
            })
        }
    }
}

fn require_n(cfg: &Resolved) -> Result<&[u32]> {
    if cfg.n_values.is_empty() {
        return Err(Error::InvalidInput("this experiment needs --n".into()));
    }
    Ok(&cfg.n_values)
}

fn single_n(cfg: &Resolved) -> Result<u32> {
    match require_n(cfg)? {
        [n] => Ok(*n),
        _ => Err(Error::InvalidInput("this experiment needs a single --n".into())),
    }
}

fn vertex_index(ball: &Ball, raw: &str) -> Result<u32> {
    let v: Vertex = raw.parse()?;
    ball.index_of(&v)
        .ok_or_else(|| Error::InvalidInput(format!("vertex {raw} is outside the radius-{} ball", ball.radius())))
}

fn required_str<'a>(field: &'a Option<String>, flag: &str) -> Result<&'a str> {
    field
        .as_deref()
        .ok_or_else(|| Error::InvalidInput(format!("this experiment needs {flag}")))
}

// ---------------------------------------------------------------------------

fn run_stats(cfg: &Resolved) -> Result<RunOutput> {
    let spec = cfg.host()?;
    let rounds = cfg.rounds();
    let key = StreamKey::root(cfg.seed, "stats");
    let mut rows = Vec::new();
    for &n in require_n(cfg)? {
        let ball = Ball::with_cap(spec, n, cfg.vertex_cap)?;
        let n_key = key.child(u64::from(n));
        let samples = (0..cfg.trials)
            .into_par_iter()
            .map(|t| {
                let trial_key = n_key.child(t);
                let mut state = GwrgState::new();
                for r in 0..rounds {
                    state.advance_round(&ball, cfg.scheme, &trial_key.child(u64::from(r)))?;
                }
                Ok(compute_stats(&state, &ball))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.extend(samples.into_iter().map(|s| StatsRow {
            host: cfg.host_name.clone(),
            n,
            i: rounds,
            seed: cfg.seed,
            boundary_size: s.boundary_size as u64,
            isolated: s.isolated_count as u64,
            components: s.component_count as u64,
            largest_size: s.largest_component_size as u64,
            diameter: s.largest_component_diameter,
        }));
    }
    Ok(RunOutput::of(Rows::Stats(rows)))
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitReport {
    pub slope: f64,
    pub intercept: f64,
    pub adjusted_r2: f64,
    pub points: usize,
}

impl FitReport {
    pub fn render(&self) -> String {
        format!(
            "fit: slope={:.4} intercept={:.4} adj_r2={:.4} points={}\nreference: slope={REF_SLOPE} intercept={REF_INTERCEPT} adj_r2={REF_ADJ_R2}",
            self.slope, self.intercept, self.adjusted_r2, self.points
        )
    }
}

/// OLS of mean uncensored τ against n, reported beside the benchmark
/// constants. Needs ≥ 3 radii that produced uncensored trials.
pub fn fit_report(rows: &[ConnectivityRow]) -> Result<FitReport> {
    let mut by_n: Vec<(u32, f64, u64)> = Vec::new();
    for row in rows {
        let Some(tau) = row.tau else { continue };
        match by_n.iter_mut().find(|(n, _, _)| *n == row.n) {
            Some((_, sum, count)) => {
                *sum += f64::from(tau);
                *count += 1;
            }
            None => by_n.push((row.n, f64::from(tau), 1)),
        }
    }
    let points: Vec<(f64, f64)> = by_n
        .iter()
        .map(|&(n, sum, count)| (f64::from(n), sum / count as f64))
        .collect();
    let (slope, intercept, adjusted_r2) = linear_fit(&points)?;
    Ok(FitReport { slope, intercept, adjusted_r2, points: points.len() })
}

fn run_connectivity(cfg: &Resolved) -> Result<RunOutput> {
    let spec = cfg.host()?;
    let cap = cfg.round_cap();
    let key = StreamKey::root(cfg.seed, "connectivity");
    let mut rows = Vec::new();
    for &n in require_n(cfg)? {
        let ball = Ball::with_cap(spec, n, cfg.vertex_cap)?;
        let n_key = key.child(u64::from(n));
        let times = (0..cfg.trials)
            .into_par_iter()
            .map(|t| connectivity_times(&ball, cfg.scheme, &n_key.child(t), cap))
            .collect::<Result<Vec<_>>>()?;
        rows.extend(times.into_iter().map(|t| ConnectivityRow {
            host: cfg.host_name.clone(),
            n,
            seed: cfg.seed,
            tau: t.tau,
            tau_star: t.tau_star,
            censored: u8::from(t.tau.is_none() || t.tau_star.is_none()),
        }));
    }
    let mut extra = Vec::new();
    match fit_report(&rows) {
        Ok(report) => {
            println!("{}", report.render());
            extra.push(("fit_slope".into(), format!("{:.6}", report.slope)));
            extra.push(("fit_intercept".into(), format!("{:.6}", report.intercept)));
            extra.push(("fit_adj_r2".into(), format!("{:.6}", report.adjusted_r2)));
        }
        Err(e) => println!("fit: skipped ({e})"),
    }
    Ok(RunOutput { rows: Rows::Connectivity(rows), manifest_extra: extra, suite_ok: true })
}

// ---------------------------------------------------------------------------

fn run_crossings(cfg: &Resolved) -> Result<RunOutput> {
    let spec = cfg.host()?;
    let x_rule: SetRule = required_str(&cfg.x_set, "--x-set")?.parse()?;
    let y_rule: SetRule = required_str(&cfg.y_set, "--y-set")?.parse()?;
    let rounds = cfg.rounds();
    let n_values = require_n(cfg)?;
    let params = |n: u32| {
        format!(
            "x={x_rule};y={y_rule};i={rounds};scheme={};mode={};n={n}",
            cfg.scheme.name(),
            cfg.mode.name()
        )
    };
    let rows = match cfg.mode {
        RunMode::MonteCarlo => {
            let curve = estimators::crossing_curve(
                spec,
                &x_rule,
                &y_rule,
                n_values,
                rounds,
                cfg.trials,
                cfg.scheme,
                &StreamKey::root(cfg.seed, "crossings"),
                cfg.vertex_cap,
            )?;
            curve
                .points
                .iter()
                .map(|p| EstimateRow {
                    quantity: "crossings".into(),
                    host: cfg.host_name.clone(),
                    n: p.n,
                    params: params(p.n),
                    estimate: p.estimate,
                    stderr: p.std_error,
                    trials: p.trials,
                    seed: cfg.seed,
                })
                .collect()
        }
        RunMode::Exact => {
            let mut rows = Vec::new();
            for &n in n_values {
                let ball = Ball::with_cap(spec, n, cfg.vertex_cap)?;
                let exact = estimators::crossing_expected_exact(&ball, &x_rule, &y_rule, rounds)?;
                rows.push(EstimateRow {
                    quantity: "crossings".into(),
                    host: cfg.host_name.clone(),
                    n,
                    params: params(n),
                    estimate: exact,
                    stderr: 0.0,
                    trials: 0,
                    seed: cfg.seed,
                });
            }
            rows
        }
    };
    Ok(RunOutput::of(Rows::Estimates(rows)))
}

// ---------------------------------------------------------------------------

fn run_green(cfg: &Resolved) -> Result<RunOutput> {
    let spec = cfg.host()?;
    let raw_x = required_str(&cfg.x, "--x")?;
    let raw_y = required_str(&cfg.y, "--y")?;
    let key = StreamKey::root(cfg.seed, "green");
    let mut rows = Vec::new();
    for &n in require_n(cfg)? {
        let ball = Ball::with_cap(spec, n, cfg.vertex_cap)?;
        let x = vertex_index(&ball, raw_x)?;
        let y = vertex_index(&ball, raw_y)?;
        let degenerate = ball.is_boundary(x) || ball.is_boundary(y);
        let mut params = format!("x={raw_x};y={raw_y};mode={}", cfg.mode.name());
        if degenerate {
            params.push_str(";degenerate=1");
        }
        let (estimate, stderr, trials) = match cfg.mode {
            RunMode::Exact => (estimators::green_function_exact(&ball, x, y)?, 0.0, 0),
            RunMode::MonteCarlo => {
                let rec = estimators::green_function_mc(
                    &ball,
                    x,
                    y,
                    cfg.trials,
                    &key.child(u64::from(n)),
                    cfg.seed,
                )?;
                (rec.estimate, rec.std_error, rec.trials)
            }
        };
        rows.push(EstimateRow {
            quantity: "green".into(),
            host: cfg.host_name.clone(),
            n,
            params,
            estimate,
            stderr,
            trials,
            seed: cfg.seed,
        });
    }
    Ok(RunOutput::of(Rows::Estimates(rows)))
}

// ---------------------------------------------------------------------------

fn run_naim(cfg: &Resolved) -> Result<RunOutput> {
    let spec = cfg.host()?;
    if let Some(samples) = cfg.series {
        let n = single_n(cfg)?;
        let series = estimators::naim_convergence_experiment(
            spec,
            n,
            cfg.pairs,
            samples,
            &StreamKey::root(cfg.seed, "naim"),
            cfg.vertex_cap,
        )?;
        let mut rows = Vec::new();
        for s in &series {
            for (t, theta) in s.theta.iter().enumerate() {
                rows.push(EstimateRow {
                    quantity: "naim_series".into(),
                    host: cfg.host_name.clone(),
                    n,
                    params: format!("pair={};t={t};truncated={}", s.pair, u8::from(s.truncated)),
                    estimate: *theta,
                    stderr: 0.0,
                    trials: 0,
                    seed: cfg.seed,
                });
            }
            rows.push(EstimateRow {
                quantity: "naim_oscillation".into(),
                host: cfg.host_name.clone(),
                n,
                params: format!("pair={};truncated={}", s.pair, u8::from(s.truncated)),
                estimate: s.oscillation,
                stderr: 0.0,
                trials: 0,
                seed: cfg.seed,
            });
        }
        return Ok(RunOutput::of(Rows::Estimates(rows)));
    }

    let n = single_n(cfg)?;
    let raw_x = required_str(&cfg.x, "--x")?;
    let raw_y = required_str(&cfg.y, "--y")?;
    let raw_o = cfg.o.clone().unwrap_or_else(|| spec.root().to_string());
    let ball = Ball::with_cap(spec, n, cfg.vertex_cap)?;
    let (o, x, y) = (
        vertex_index(&ball, &raw_o)?,
        vertex_index(&ball, raw_x)?,
        vertex_index(&ball, raw_y)?,
    );
    let params = format!(
        "o={raw_o};x={raw_x};y={raw_y};mode={};printed={}",
        cfg.mode.name(),
        u8::from(cfg.printed_denominator)
    );
    let (estimate, stderr, trials) = match cfg.mode {
        RunMode::Exact => {
            let net = Network::from_ball(&ball)?;
            let theta = estimators::naim_kernel_exact(
                &net,
                ball.boundary(),
                o,
                x,
                y,
                cfg.printed_denominator,
            )?;
            (theta, 0.0, 0)
        }
        RunMode::MonteCarlo => {
            let rec = estimators::naim_kernel_mc(
                &ball,
                o,
                x,
                y,
                cfg.trials,
                &StreamKey::root(cfg.seed, "naim"),
                cfg.seed,
                cfg.printed_denominator,
            )?;
            (rec.estimate, rec.std_error, rec.trials)
        }
    };
    Ok(RunOutput::of(Rows::Estimates(vec![EstimateRow {
        quantity: "naim".into(),
        host: cfg.host_name.clone(),
        n,
        params,
        estimate,
        stderr,
        trials,
        seed: cfg.seed,
    }])))
}

// ---------------------------------------------------------------------------

fn run_equilibrium(cfg: &Resolved) -> Result<RunOutput> {
    let spec = cfg.host()?;
    let raw_k = required_str(&cfg.k, "--k")?;
    let key = StreamKey::root(cfg.seed, "equilibrium");
    let mut rows = Vec::new();
    for &n in require_n(cfg)? {
        let ball = Ball::with_cap(spec, n, cfg.vertex_cap)?;
        let k: Vec<u32> = raw_k
            .split(';')
            .map(|t| vertex_index(&ball, t.trim()))
            .collect::<Result<Vec<_>>>()?;
        let mut push = |x: Option<u32>, estimate: f64, stderr: f64, trials: u64| {
            let params = match x {
                Some(x) => format!("x={};k={raw_k};mode={}", ball.vertex(x), cfg.mode.name()),
                None => format!("k={raw_k};mode={}", cfg.mode.name()),
            };
            rows.push(EstimateRow {
                quantity: if x.is_some() { "equilibrium".into() } else { "capacity".into() },
                host: cfg.host_name.clone(),
                n,
                params,
                estimate,
                stderr,
                trials,
                seed: cfg.seed,
            });
        };
        match cfg.mode {
            RunMode::Exact => {
                let table = estimators::equilibrium_measure_exact(&ball, &k)?;
                for &(x, e) in &table {
                    push(Some(x), e, 0.0, 0);
                }
                push(None, estimators::capacity(&table), 0.0, 0);
            }
            RunMode::MonteCarlo => {
                let table = estimators::equilibrium_measure_mc(
                    &ball,
                    &k,
                    cfg.trials,
                    &key.child(u64::from(n)),
                )?;
                for &(x, e, s) in &table {
                    push(Some(x), e, s, cfg.trials);
                }
                let cap_est: f64 = table.iter().map(|(_, e, _)| e).sum();
                let cap_err = table.iter().map(|(_, _, s)| s * s).sum::<f64>().sqrt();
                push(None, cap_est, cap_err, cfg.trials);
            }
        }
    }
    Ok(RunOutput::of(Rows::Estimates(rows)))
}

// ---------------------------------------------------------------------------

fn run_interlacement(cfg: &Resolved) -> Result<RunOutput> {
    let spec = cfg.host()?;
    let raw_z = required_str(&cfg.z, "--z")?;
    let z = CylinderWalk::parse(&spec, raw_z)?;
    let curve = estimators::interlacement_intensity(
        spec,
        &z,
        require_n(cfg)?,
        cfg.trials,
        cfg.scheme,
        &StreamKey::root(cfg.seed, "interlacement"),
        cfg.vertex_cap,
    )?;
    let rows = curve
        .iter()
        .map(|&(n, estimate, stderr)| EstimateRow {
            quantity: "interlacement".into(),
            host: cfg.host_name.clone(),
            n,
            params: format!("z={raw_z};scheme={}", cfg.scheme.name()),
            estimate,
            stderr,
            trials: cfg.trials,
            seed: cfg.seed,
        })
        .collect();
    Ok(RunOutput::of(Rows::Estimates(rows)))
}

// ---------------------------------------------------------------------------

fn run_graphon_sample(cfg: &Resolved) -> Result<RunOutput> {
    let spec = cfg.host()?;
    let n = single_n(cfg)?;
    let rounds = cfg.rounds();
    let ball = Ball::with_cap(spec, n, cfg.vertex_cap)?;
    let partition = ball.boundary_partition_by_branch()?;
    let cells: Vec<Vec<u32>> = partition.iter().map(|(_, members)| members.clone()).collect();
    let net = Network::from_ball(&ball)?;
    let m = cells.len();
    let mut lambda = vec![vec![0.0; m]; m];
    for a in 0..m {
        for b in a + 1..m {
            let e = net.expected_crossings(ball.boundary(), &cells[a], &cells[b])?
                * f64::from(rounds);
            lambda[a][b] = e;
            lambda[b][a] = e;
        }
    }
    let (reps, edges) =
        estimators::sample_from_crossing_matrix(&cells, &lambda, &StreamKey::root(cfg.seed, "graphon-sample"))?;
    let mut rows = Vec::new();
    for (a, (branch, members)) in partition.iter().enumerate() {
        rows.push(EstimateRow {
            quantity: "graphon_rep".into(),
            host: cfg.host_name.clone(),
            n,
            params: format!("cell={a};branch={branch};rep={}", ball.vertex(reps[a])),
            estimate: members.len() as f64,
            stderr: 0.0,
            trials: 0,
            seed: cfg.seed,
        });
    }
    for a in 0..m {
        for b in a + 1..m {
            rows.push(EstimateRow {
                quantity: "graphon_edge".into(),
                host: cfg.host_name.clone(),
                n,
                params: format!("a={a};b={b};present={}", u8::from(edges.contains(&(a, b)))),
                estimate: lambda[a][b],
                stderr: 0.0,
                trials: 0,
                seed: cfg.seed,
            });
        }
    }
    Ok(RunOutput::of(Rows::Estimates(rows)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn conn_row(n: u32, tau: Option<u32>) -> ConnectivityRow {
        ConnectivityRow { host: "btree2".into(), n, seed: 0, tau, tau_star: tau, censored: u8::from(tau.is_none()) }
    }

    #[test]
    fn fit_report_recovers_exact_line() {
        // mean τ = 2n + 1 exactly
        let rows: Vec<ConnectivityRow> =
            (2..=6).map(|n| conn_row(n, Some(2 * n + 1))).collect();
        let report = fit_report(&rows).unwrap();
        assert!((report.slope - 2.0).abs() < 1e-9);
        assert!((report.intercept - 1.0).abs() < 1e-9);
        assert!((report.adjusted_r2 - 1.0).abs() < 1e-9);
        assert_eq!(report.points, 5);
        let text = report.render();
        assert!(text.contains("0.26") && text.contains("0.9") && text.contains("0.9993"));
    }

    #[test]
    fn fit_report_ignores_censored_rows_and_needs_three_radii() {
        let mut rows: Vec<ConnectivityRow> = vec![
            conn_row(2, Some(1)),
            conn_row(2, None),
            conn_row(3, Some(2)),
            conn_row(4, Some(3)),
        ];
        let report = fit_report(&rows).unwrap();
        assert_eq!(report.points, 3);
        assert!((report.slope - 1.0).abs() < 1e-9);
        rows.retain(|r| r.n != 4);
        assert!(fit_report(&rows).is_err());
        assert!(fit_report(&[]).is_err());
    }

    #[test]
    fn averaging_groups_by_radius() {
        let rows = vec![
            conn_row(2, Some(1)),
            conn_row(2, Some(3)),
            conn_row(3, Some(4)),
            conn_row(4, Some(6)),
        ];
        // means: (2,2), (3,4), (4,6) — slope 2, intercept -2
        let report = fit_report(&rows).unwrap();
        assert!((report.slope - 2.0).abs() < 1e-9);
        assert!((report.intercept + 2.0).abs() < 1e-9);
    }
}

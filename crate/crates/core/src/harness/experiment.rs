use std::fmt::Write as _;
use std::str::FromStr;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::{BipartiteKind, ExperimentConfig, ScheduleKind};
use super::report::{RunReport, SeriesSummary};
use crate::engine::{run_with_observer, DsmdSetup, RoundObserver, StepSchedule, SystemState, TopologyBundle};
use crate::error::{invalid, Error, Result};
use crate::games::{MatrixGame, MatrixGameSpec, Side};
use crate::geometry::Norm;
use crate::linalg::{norm_l2, sub, Matrix};
use crate::metrics::{
    consensus_envelope_series, ergodic_gap_bound_series, mean_pair_gap, mean_squared_error_of, ne_reference,
    regret_bound_cc_series, regret_bound_sc, BoundParams, RegretTracker,
};
use crate::stats::RunningStats;
use crate::topology::{
    build_graph, decay_constants, dump_matrix, identity_bipartite, metropolis_weights, uniform_bipartite, Graph,
    GraphSpec, MixingSchedule,
};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Worker threads for the path loop; `None` uses all cores.
    pub workers: Option<usize>,
}

/// The two graphs plus the weights built from them.
pub fn build_topology(cfg: &ExperimentConfig) -> Result<(Graph, Graph, TopologyBundle)> {
    let t = &cfg.topology;
    let (n1, n2) = (cfg.game.n1, cfg.game.n2);
    let graph = |kind, n, seed| build_graph(&GraphSpec { kind, node_count: n, edge_probability: t.edge_probability, seed });
    let g1 = graph(t.network1, n1, t.seed)?;
    let g2 = graph(t.network2, n2, t.seed.wrapping_add(1))?;
    let schedule = |g: &Graph, period: usize| {
        if period == 1 {
            Ok(MixingSchedule::fixed(metropolis_weights(g)))
        } else {
            MixingSchedule::switching(g, period)
        }
    };
    let (to1, to2) = match t.bipartite {
        BipartiteKind::Uniform => (uniform_bipartite(n2, n1)?, uniform_bipartite(n1, n2)?),
        BipartiteKind::Identity => (identity_bipartite(n1)?, identity_bipartite(n2)?),
    };
    let bundle =
        TopologyBundle::new(schedule(&g1, t.switching_period1)?, schedule(&g2, t.switching_period2)?, to1, to2)?;
    Ok((g1, g2, bundle))
}

pub fn build_setup(cfg: &ExperimentConfig) -> Result<DsmdSetup> {
    cfg.validate()?;
    let g = &cfg.game;
    let game = match &g.matrices {
        Some(rows) => {
            let base = rows.iter().map(|m| Matrix::from_rows(m)).collect::<Result<Vec<_>>>()?;
            MatrixGame::from_matrices(base, g.n2, g.noise_half_width, g.regularization)?
        }
        None => MatrixGame::generate(&MatrixGameSpec {
            actions1: g.actions,
            actions2: g.actions2(),
            n1: g.n1,
            n2: g.n2,
            noise_half_width: g.noise_half_width,
            regularization: g.regularization,
            seed: g.seed,
        })?,
    };
    let (_, _, topology) = build_topology(cfg)?;
    let setup = DsmdSetup {
        game,
        topology,
        schedule: cfg.run.step_schedule(),
        regularizer: cfg.run.regularizer,
        init: cfg.run.init,
    };
    setup.validate()?;
    Ok(setup)
}

/// Network-1 agents whose regret is recorded: all of them, or agent 0 and
/// the first agent of maximum eccentricity in `graph`.
pub fn tracked_agents(graph: &Graph, all: bool) -> Vec<usize> {
    let n = graph.node_count();
    if all {
        return (0..n).collect();
    }
    let ecc = graph.eccentricities();
    let top = ecc.iter().copied().max().unwrap_or(0);
    match (1..n).find(|&i| ecc[i] == top) {
        Some(i) => vec![0, i],
        None => vec![0],
    }
}

/// `t = 1`, every multiple of `thin`, and `horizon`.
pub fn recording_grid(horizon: usize, thin: usize) -> Vec<usize> {
    let thin = thin.max(1);
    (1..=horizon).filter(|&t| t == 1 || t % thin == 0 || t == horizon).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct SeriesKey {
    metric: &'static str,
    series_id: String,
}

fn agent_id(side: Side, i: usize) -> String {
    format!("net{}/agent{i}", side.index() + 1)
}

/// Layout of the per-path measurements.
struct Layout {
    keys: Vec<SeriesKey>,
    tracked: Vec<usize>,
    with_ne: bool,
}

impl Layout {
    fn new(tracked: Vec<usize>, agents: [usize; 2], with_ne: bool) -> Self {
        let mut keys = vec![SeriesKey { metric: "gap", series_id: "all".into() }];
        for &i in &tracked {
            keys.push(SeriesKey { metric: "regret", series_id: agent_id(Side::Network1, i) });
            keys.push(SeriesKey { metric: "avg_regret", series_id: agent_id(Side::Network1, i) });
        }
        for side in [Side::Network1, Side::Network2] {
            for i in 0..agents[side.index()] {
                keys.push(SeriesKey { metric: "consensus_error", series_id: agent_id(side, i) });
            }
        }
        if with_ne {
            keys.push(SeriesKey { metric: "abs_error", series_id: "all".into() });
            keys.push(SeriesKey { metric: "mse", series_id: "all".into() });
        }
        Layout { keys, tracked, with_ne }
    }
}

/// Streams one path's measurements on the recording grid.
struct PathRecorder<'a> {
    game: &'a MatrixGame,
    layout: &'a Layout,
    grid: &'a [usize],
    norms: [Norm; 2],
    ne: Option<&'a (Vec<f64>, Vec<f64>)>,
    trackers: Vec<RegretTracker>,
    next: usize,
    /// `values[series][grid index]`.
    values: Vec<Vec<f64>>,
}

impl<'a> PathRecorder<'a> {
    fn new(
        game: &'a MatrixGame,
        layout: &'a Layout,
        grid: &'a [usize],
        norms: [Norm; 2],
        ne: Option<&'a (Vec<f64>, Vec<f64>)>,
    ) -> Self {
        let k2 = game.actions().1;
        PathRecorder {
            game,
            layout,
            grid,
            norms,
            ne,
            trackers: layout.tracked.iter().map(|_| RegretTracker::new(k2)).collect(),
            next: 0,
            values: vec![Vec::with_capacity(grid.len()); layout.keys.len()],
        }
    }
}

impl RoundObserver for PathRecorder<'_> {
    fn observe(&mut self, state: &SystemState, _schedule: &StepSchedule) -> Result<()> {
        let t = state.round;
        if t == 0 {
            return Ok(());
        }
        let net1 = state.network(Side::Network1);
        for (tracker, &i) in self.trackers.iter_mut().zip(&self.layout.tracked) {
            tracker.push(self.game, &net1[i].iterate, &net1[i].opponent_estimate)?;
        }
        if self.grid.get(self.next) != Some(&t) {
            return Ok(());
        }
        self.next += 1;
        let averages = |side: Side| -> Vec<Vec<f64>> {
            state.network(side).iter().map(|a| a.time_average().unwrap_or_else(|| a.iterate.clone())).collect()
        };
        let (avg1, avg2) = (averages(Side::Network1), averages(Side::Network2));
        let mut row = Vec::with_capacity(self.layout.keys.len());
        row.push(mean_pair_gap(self.game, &avg1, &avg2)?);
        for tracker in &self.trackers {
            let r = tracker.value(self.game)?;
            row.push(r);
            row.push(r / t as f64);
        }
        for side in [Side::Network1, Side::Network2] {
            let agents = state.network(side);
            let points: Vec<Vec<f64>> = agents.iter().map(|a| a.iterate.clone()).collect();
            let mean = crate::engine::mean_point(&points);
            let norm = self.norms[side.index()];
            row.extend(points.iter().map(|x| norm.eval(&sub(x, &mean))));
        }
        if let (true, Some((x1, x2))) = (self.layout.with_ne, self.ne) {
            let dist = |side: Side, star: &[f64]| {
                let agents = state.network(side);
                agents.iter().map(|a| norm_l2(&sub(&a.iterate, star))).sum::<f64>() / agents.len() as f64
            };
            row.push(dist(Side::Network1, x1) + dist(Side::Network2, x2));
            row.push(mean_squared_error_of([&avg1, &avg2], (x1, x2), self.norms[0]));
        }
        for (series, v) in self.values.iter_mut().zip(row) {
            series.push(v);
        }
        Ok(())
    }
}

fn initial_points(setup: &DsmdSetup, seeds: &[u64]) -> [Vec<Vec<f64>>; 2] {
    let mut out: [Vec<Vec<f64>>; 2] = [Vec::new(), Vec::new()];
    let draws: &[u64] = match setup.init {
        crate::engine::InitRule::Uniform => &seeds[..1],
        crate::engine::InitRule::RandomInterior => seeds,
    };
    for &seed in draws {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        let state = SystemState::initial(&setup.game, setup.init, &mut rng);
        for side in [Side::Network1, Side::Network2] {
            out[side.index()].extend(state.network(side).iter().map(|a| a.iterate.clone()));
        }
    }
    out
}

fn bound_series(params: &BoundParams, setup: &DsmdSetup, grid: &[usize]) -> Result<Vec<SeriesSummary>> {
    let horizon = *grid.last().unwrap_or(&0);
    let pick = |full: Vec<f64>| -> Vec<f64> { grid.iter().map(|&t| full[t - 1]).collect() };
    let mut out = vec![SeriesSummary::exact("regret_bound", "cc", pick(regret_bound_cc_series(params, horizon)))];
    let regularized = setup.game.is_regularized();
    if params.schedule.is_strongly_convex() && regularized {
        let sc = grid.iter().map(|&t| regret_bound_sc(params, t)).collect::<Result<Vec<_>>>()?;
        out.push(SeriesSummary::exact("regret_bound", "sc", sc));
    }
    let gap = pick(ergodic_gap_bound_series(params, horizon));
    if regularized {
        let mu = setup.game.strong_convexity_modulus();
        out.push(SeriesSummary::exact("mse_bound", "all", gap.iter().map(|g| 2.0 / mu * g).collect()));
    }
    out.push(SeriesSummary::exact("gap_bound", "all", gap));
    for side in [Side::Network1, Side::Network2] {
        let id = format!("net{}", side.index() + 1);
        out.push(SeriesSummary::exact("consensus_envelope", &id, pick(consensus_envelope_series(params, side, horizon))));
    }
    Ok(out)
}

/// Runs every path of the configured experiment and aggregates the series.
///
/// Paths run in parallel; their results are merged in path order so the
/// report does not depend on the worker count. A reference equilibrium that
/// cannot be computed disables the error metrics and is noted in
/// `warnings`.
pub fn run_experiment(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunReport> {
    let started = Instant::now();
    let setup = build_setup(cfg)?;
    let (g1, _, _) = build_topology(cfg)?;
    let seeds = cfg.run.path_seeds();
    let grid = recording_grid(cfg.run.horizon, cfg.output.thin);

    let mut warnings = Vec::new();
    let mut ne_failed = false;
    let ne = if setup.game.is_regularized() {
        match ne_reference(&setup.game, cfg.run.ne_tolerance) {
            Ok(pair) => Some(pair),
            Err(Error::NonConvergence { iterations, residual }) => {
                ne_failed = true;
                warnings.push(format!(
                    "reference equilibrium did not converge ({iterations} iterations, residual {residual:e}); \
                     error metrics disabled"
                ));
                None
            }
            Err(e) => return Err(e),
        }
    } else {
        None
    };

    let mut params = BoundParams::from_setup(&setup, &initial_points(&setup, &seeds), cfg.run.interior_floor)?;
    params.lipschitz *= cfg.bounds.lipschitz_scale;

    let tracked = tracked_agents(&g1, cfg.run.track_all_agents);
    let layout = Layout::new(tracked.clone(), [cfg.game.n1, cfg.game.n2], ne.is_some());
    let regs = setup.regularizers();
    let norms = [regs[0].primal_norm(), regs[1].primal_norm()];

    let run_path = |seed: u64| -> Result<Vec<Vec<f64>>> {
        let mut rec = PathRecorder::new(&setup.game, &layout, &grid, norms, ne.as_ref());
        run_with_observer(&setup, cfg.run.horizon, seed, &mut rec)?;
        Ok(rec.values)
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = opts.workers {
        builder = builder.num_threads(w.max(1));
    }
    let pool = builder.build().map_err(|e| invalid(format!("cannot start worker pool: {e}")))?;
    let paths: Vec<Vec<Vec<f64>>> = pool.install(|| seeds.par_iter().map(|&s| run_path(s)).collect::<Result<_>>())?;

    let mut series = Vec::with_capacity(layout.keys.len());
    for (k, key) in layout.keys.iter().enumerate() {
        let mut stats = vec![RunningStats::default(); grid.len()];
        for path in &paths {
            for (s, v) in stats.iter_mut().zip(&path[k]) {
                s.push(*v);
            }
        }
        series.push(SeriesSummary {
            metric: key.metric.to_string(),
            series_id: key.series_id.clone(),
            mean: stats.iter().map(RunningStats::mean).collect(),
            stderr: stats.iter().map(RunningStats::stderr).collect(),
        });
    }
    series.extend(bound_series(&params, &setup, &grid)?);

    Ok(RunReport {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: cfg.config_hash(),
        config: cfg.clone(),
        grid,
        series,
        path_seeds: seeds,
        tracked_agents: tracked,
        bound_params: params,
        ne,
        ne_failed,
        warnings,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    /// Power-schedule exponents from `[sweep] exponents`.
    Schedule,
    /// Network-1 graph kinds from `[sweep] topologies`.
    Topology,
}

impl FromStr for SweepAxis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "schedule" => Ok(SweepAxis::Schedule),
            "topology" => Ok(SweepAxis::Topology),
            other => Err(Error::Config(vec![format!("sweep axis `{other}`: expected schedule or topology")])),
        }
    }
}

#[derive(Debug)]
pub struct SweepCell {
    pub label: String,
    pub config: ExperimentConfig,
    pub result: Result<RunReport>,
}

/// One run per axis value, all with the template's seeds. Failing cells are
/// kept in the output rather than aborting the sweep.
pub fn sweep(template: &ExperimentConfig, axis: SweepAxis, opts: &RunOptions) -> Result<Vec<SweepCell>> {
    template.validate()?;
    let cells: Vec<(String, ExperimentConfig)> = match axis {
        SweepAxis::Schedule => {
            if template.sweep.exponents.is_empty() {
                return Err(Error::Config(vec!["sweep.exponents: empty axis".to_string()]));
            }
            template
                .sweep
                .exponents
                .iter()
                .map(|&e| {
                    let mut c = template.clone();
                    c.run.schedule = ScheduleKind::Power;
                    c.run.exponent = e;
                    (format!("exponent={e}"), c)
                })
                .collect()
        }
        SweepAxis::Topology => {
            if template.sweep.topologies.is_empty() {
                return Err(Error::Config(vec!["sweep.topologies: empty axis".to_string()]));
            }
            template
                .sweep
                .topologies
                .iter()
                .map(|&k| {
                    let mut c = template.clone();
                    c.topology.network1 = k;
                    (format!("network1={}", k.name()), c)
                })
                .collect()
        }
    };
    Ok(cells
        .into_iter()
        .map(|(label, config)| {
            let result = run_experiment(&config, opts);
            SweepCell { label, config, result }
        })
        .collect())
}

/// Human-readable dump of graphs, weights and decay constants.
pub fn dump_topology(cfg: &ExperimentConfig) -> Result<String> {
    cfg.validate()?;
    let (g1, g2, bundle) = build_topology(cfg)?;
    let mut out = String::new();
    for (side, graph) in [(Side::Network1, &g1), (Side::Network2, &g2)] {
        let l = side.index() + 1;
        let sched = bundle.schedule(side);
        let _ = writeln!(out, "# network {l}");
        out.push_str(&graph.dump());
        for (k, w) in sched.matrices().iter().enumerate() {
            out.push_str(&dump_matrix(&format!("W{l}[{k}]"), w.entries()));
        }
        let d = decay_constants(sched.size(), sched.eta_floor(), sched.period())?;
        let _ = writeln!(out, "eta {:e}\ngamma {:e}\ntheta {:e}", sched.eta_floor(), d.gamma, d.theta);
    }
    out.push_str(&dump_matrix("to_network1", bundle.to_network1.entries()));
    out.push_str(&dump_matrix("to_network2", bundle.to_network2.entries()));
    Ok(out)
}

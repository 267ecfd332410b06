//! The D-SMD iteration.
//!
//! Round `t` (synchronous over both networks):
//!
//! 1. every agent mixes its own network, `v_{l,i}(t) = Σ_j w_{l,ij}(t) x_{l,j}(t)`,
//!    and reads the other network through the bipartite weights,
//!    `u_{3−l,i}(t) = Σ_j w_{12,ij} x_{3−l,j}(t)`;
//! 2. it draws a subgradient `ĝ` of its own cost at `(v, u)`;
//! 3. it moves to `x_{l,i}(t+1) = P_{v_{l,i}(t)}(−α(t) ĝ)`.
//!
//! Time averages `x̂_{l,i}(t) = Σ_{s<t} α(s) x_{l,i}(s) / Σ_{s<t} α(s)` are
//! accumulated on the fly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::games::{MatrixGame, Side};
use crate::geometry::{Regularizer, RegularizerKind, SimplexPoint};
use crate::topology::{BipartiteWeights, MixingSchedule};

/// Horizon and action count up to which [`run_dsmd`] keeps every snapshot.
pub const FULL_STORAGE_MAX_HORIZON: usize = 10_000;
pub const FULL_STORAGE_MAX_ACTIONS: usize = 64;

/// Non-increasing nonnegative step sizes `α(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepSchedule {
    /// `α(t) = t^(−exponent)` for `t ≥ 1`, and `α(0) = α(1) = 1`.
    Power { exponent: f64 },
    /// `α(t) = 1 / (modulus · (t + 1))`.
    StronglyConvex { modulus: f64 },
    Constant { step: f64 },
}

impl StepSchedule {
    pub fn power(exponent: f64) -> Result<Self> {
        let s = StepSchedule::Power { exponent };
        s.validate()?;
        Ok(s)
    }

    pub fn strongly_convex(modulus: f64) -> Result<Self> {
        let s = StepSchedule::StronglyConvex { modulus };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            StepSchedule::Power { exponent } if !(0.5..=1.0).contains(&exponent) => {
                Err(invalid(format!("power exponent {exponent} outside [0.5, 1]")))
            }
            StepSchedule::StronglyConvex { modulus } if !(modulus > 0.0 && modulus.is_finite()) => {
                Err(invalid(format!("strong-convexity modulus {modulus} must be positive")))
            }
            StepSchedule::Constant { step } if !(step >= 0.0 && step.is_finite()) => {
                Err(invalid(format!("constant step {step} must be finite and >= 0")))
            }
            _ => Ok(()),
        }
    }

    pub fn alpha(&self, t: usize) -> f64 {
        match *self {
            StepSchedule::Power { exponent } => (t.max(1) as f64).powf(-exponent),
            StepSchedule::StronglyConvex { modulus } => 1.0 / (modulus * (t + 1) as f64),
            StepSchedule::Constant { step } => step,
        }
    }

    pub fn is_strongly_convex(&self) -> bool {
        matches!(self, StepSchedule::StronglyConvex { .. })
    }
}

/// Mixing weights for both networks and both bipartite directions.
#[derive(Debug, Clone, PartialEq)]
pub struct TopologyBundle {
    pub network1: MixingSchedule,
    pub network2: MixingSchedule,
    /// `n1 × n2`: how network-1 agents read network 2.
    pub to_network1: BipartiteWeights,
    /// `n2 × n1`: how network-2 agents read network 1.
    pub to_network2: BipartiteWeights,
}

impl TopologyBundle {
    pub fn new(
        network1: MixingSchedule,
        network2: MixingSchedule,
        to_network1: BipartiteWeights,
        to_network2: BipartiteWeights,
    ) -> Result<Self> {
        let (n1, n2) = (network1.size(), network2.size());
        if to_network1.receivers() != n1 || to_network1.senders() != n2 {
            return Err(invalid("bipartite weights into network 1 must be n1 × n2"));
        }
        if to_network2.receivers() != n2 || to_network2.senders() != n1 {
            return Err(invalid("bipartite weights into network 2 must be n2 × n1"));
        }
        Ok(TopologyBundle { network1, network2, to_network1, to_network2 })
    }

    pub fn schedule(&self, side: Side) -> &MixingSchedule {
        match side {
            Side::Network1 => &self.network1,
            Side::Network2 => &self.network2,
        }
    }

    pub fn bipartite_into(&self, side: Side) -> &BipartiteWeights {
        match side {
            Side::Network1 => &self.to_network1,
            Side::Network2 => &self.to_network2,
        }
    }

    pub fn size(&self, side: Side) -> usize {
        self.schedule(side).size()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitRule {
    /// Every agent starts at the barycenter of its simplex.
    Uniform,
    /// Seeded random interior points (coordinates bounded away from zero).
    RandomInterior,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    pub iterate: Vec<f64>,
    pub consensus: Vec<f64>,
    pub opponent_estimate: Vec<f64>,
    pub weighted_sum: Vec<f64>,
    pub weight_total: f64,
}

impl AgentState {
    fn new(iterate: Vec<f64>, opponent_dim: usize) -> Self {
        let k = iterate.len();
        AgentState {
            consensus: iterate.clone(),
            iterate,
            opponent_estimate: vec![0.0; opponent_dim],
            weighted_sum: vec![0.0; k],
            weight_total: 0.0,
        }
    }

    /// `x̂(t)` for the current round `t ≥ 1`.
    pub fn time_average(&self) -> Option<Vec<f64>> {
        (self.weight_total > 0.0).then(|| self.weighted_sum.iter().map(|s| s / self.weight_total).collect())
    }
}

/// All agents at round `round`. Between rounds, `iterate` holds `x(round)`;
/// `consensus` and `opponent_estimate` are refreshed at the start of a round.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemState {
    pub round: usize,
    pub networks: [Vec<AgentState>; 2],
}

impl SystemState {
    pub fn initial<R: Rng>(game: &MatrixGame, rule: InitRule, rng: &mut R) -> Self {
        let (k1, k2) = game.actions();
        let mut make = |n: usize, k: usize, other: usize| -> Vec<AgentState> {
            (0..n)
                .map(|_| {
                    let x = match rule {
                        InitRule::Uniform => SimplexPoint::uniform(k).into_inner(),
                        InitRule::RandomInterior => {
                            let raw: Vec<f64> = (0..k).map(|_| 0.1 + rng.gen::<f64>()).collect();
                            let s: f64 = raw.iter().sum();
                            raw.into_iter().map(|a| a / s).collect()
                        }
                    };
                    AgentState::new(x, other)
                })
                .collect()
        };
        let net1 = make(game.agents(Side::Network1), k1, k2);
        let net2 = make(game.agents(Side::Network2), k2, k1);
        SystemState { round: 0, networks: [net1, net2] }
    }

    pub fn network(&self, side: Side) -> &[AgentState] {
        &self.networks[side.index()]
    }
}

/// Everything a run needs besides the horizon and seed.
#[derive(Debug, Clone)]
pub struct DsmdSetup {
    pub game: MatrixGame,
    pub topology: TopologyBundle,
    pub schedule: StepSchedule,
    pub regularizer: RegularizerKind,
    pub init: InitRule,
}

impl DsmdSetup {
    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        for side in [Side::Network1, Side::Network2] {
            if self.topology.size(side) != self.game.agents(side) {
                return Err(invalid(format!("{side:?}: topology and game disagree on the agent count")));
            }
        }
        if self.game.is_regularized() && self.regularizer == RegularizerKind::Euclidean {
            return Err(invalid("the entropic game needs interior iterates; use the entropic regularizer"));
        }
        Ok(())
    }

    pub fn regularizers(&self) -> [Regularizer; 2] {
        let (k1, k2) = self.game.actions();
        [Regularizer::new(self.regularizer, k1), Regularizer::new(self.regularizer, k2)]
    }
}

/// Step 1 of a round: refresh `consensus` and `opponent_estimate` from the
/// current iterates with the round-`t` weights.
pub fn refresh_consensus(state: &mut SystemState, topology: &TopologyBundle) {
    let t = state.round;
    for side in [Side::Network1, Side::Network2] {
        let l = side.index();
        let o = side.other().index();
        let w = topology.schedule(side).at(t).entries();
        let b = topology.bipartite_into(side).entries();
        let mixed: Vec<Vec<f64>> = (0..w.rows()).map(|i| weighted_sum(w.row(i), &state.networks[l])).collect();
        let heard: Vec<Vec<f64>> = (0..b.rows()).map(|i| weighted_sum(b.row(i), &state.networks[o])).collect();
        for ((agent, v), u) in state.networks[l].iter_mut().zip(mixed).zip(heard) {
            agent.consensus = v;
            agent.opponent_estimate = u;
        }
    }
}

fn weighted_sum(weights: &[f64], agents: &[AgentState]) -> Vec<f64> {
    let mut out = vec![0.0; agents[0].iterate.len()];
    for (w, a) in weights.iter().zip(agents) {
        if *w == 0.0 {
            continue;
        }
        for (o, x) in out.iter_mut().zip(&a.iterate) {
            *o += w * x;
        }
    }
    out
}

/// Steps 2–3 of a round, using the consensus values already in `state`.
/// Network 1 draws its noise before network 2, agents in index order.
pub fn advance<R: Rng + ?Sized>(
    state: &mut SystemState,
    game: &MatrixGame,
    regularizers: &[Regularizer; 2],
    schedule: &StepSchedule,
    rng: &mut R,
) -> Result<()> {
    let t = state.round;
    let alpha = schedule.alpha(t);
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(invalid(format!("step size α({t}) = {alpha} is not finite and nonnegative")));
    }
    for side in [Side::Network1, Side::Network2] {
        let reg = &regularizers[side.index()];
        for (i, agent) in state.networks[side.index()].iter_mut().enumerate() {
            let g = game.subgradient_oracle(side, i, &agent.consensus, &agent.opponent_estimate, rng)?;
            let next = reg.prox_map(&agent.consensus, &g.vector.descent_payload(alpha))?;
            for (s, x) in agent.weighted_sum.iter_mut().zip(&agent.iterate) {
                *s += alpha * x;
            }
            agent.weight_total += alpha;
            agent.iterate = next;
        }
    }
    state.round += 1;
    Ok(())
}

/// One full round `t = state.round`: consensus, sampled subgradients, prox step.
pub fn dsmd_round<R: Rng + ?Sized>(
    state: &mut SystemState,
    setup: &DsmdSetup,
    regularizers: &[Regularizer; 2],
    rng: &mut R,
) -> Result<()> {
    refresh_consensus(state, &setup.topology);
    advance(state, &setup.game, regularizers, &setup.schedule, rng)
}

/// Receives every round's state after the consensus refresh, i.e. with
/// `x(t)`, `v(t)`, `u(t)` and the accumulators for `x̂(t)` in place.
pub trait RoundObserver {
    fn observe(&mut self, state: &SystemState, schedule: &StepSchedule) -> Result<()>;
}

/// Runs rounds `0..horizon` and shows the observer every `t` in `0..=horizon`.
///
/// The oracle noise uses stream 0 of a ChaCha8 generator seeded with `seed`;
/// random initial points use stream 1.
pub fn run_with_observer<O: RoundObserver + ?Sized>(
    setup: &DsmdSetup,
    horizon: usize,
    seed: u64,
    observer: &mut O,
) -> Result<SystemState> {
    setup.validate()?;
    if horizon == 0 {
        return Err(invalid("horizon must be at least 1"));
    }
    let regs = setup.regularizers();
    let mut init_rng = ChaCha8Rng::seed_from_u64(seed);
    init_rng.set_stream(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = SystemState::initial(&setup.game, setup.init, &mut init_rng);
    loop {
        refresh_consensus(&mut state, &setup.topology);
        observer.observe(&state, &setup.schedule)?;
        if state.round == horizon {
            return Ok(state);
        }
        advance(&mut state, &setup.game, &regs, &setup.schedule, &mut rng)?;
    }
}

/// Positions of one network's agents at one round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSnapshot {
    pub iterates: Vec<Vec<f64>>,
    pub consensus: Vec<Vec<f64>>,
    pub opponent_estimates: Vec<Vec<f64>>,
    /// `x̂(t)`; empty at `t = 0`.
    pub time_averages: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub round: usize,
    pub networks: [NetworkSnapshot; 2],
}

/// Recorded run. With stride 1 every round `0..=T` is kept; otherwise only
/// rounds divisible by the stride plus the final one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    stride: usize,
    /// `α(0), …, α(T−1)`.
    steps: Vec<f64>,
    snapshots: Vec<Snapshot>,
    horizon: usize,
}

impl Trajectory {
    pub fn new(stride: usize) -> Self {
        Trajectory { stride: stride.max(1), steps: Vec::new(), snapshots: Vec::new(), horizon: 0 }
    }

    /// A fully stored trajectory assembled by hand; `snapshots[t]` is round `t`.
    pub fn from_parts(steps: Vec<f64>, snapshots: Vec<Snapshot>) -> Result<Self> {
        if snapshots.len() != steps.len() + 1 {
            return Err(invalid("need one more snapshot than steps"));
        }
        if snapshots.iter().enumerate().any(|(t, s)| s.round != t) {
            return Err(invalid("snapshot rounds must be 0, 1, 2, …"));
        }
        let horizon = steps.len();
        Ok(Trajectory { stride: 1, steps, snapshots, horizon })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn steps(&self) -> &[f64] {
        &self.steps
    }

    pub fn snapshots(&self) -> &[Snapshot] {
        &self.snapshots
    }

    pub fn is_full(&self) -> bool {
        self.stride == 1
    }

    pub fn snapshot(&self, t: usize) -> Result<&Snapshot> {
        let found = if self.is_full() {
            self.snapshots.get(t)
        } else {
            self.snapshots.binary_search_by_key(&t, |s| s.round).ok().map(|k| &self.snapshots[k])
        };
        found.filter(|s| s.round == t).ok_or_else(|| invalid(format!("round {t} was not recorded")))
    }

    pub fn iterate(&self, side: Side, agent: usize, t: usize) -> Result<&[f64]> {
        let snap = self.snapshot(t)?;
        snap.networks[side.index()]
            .iterates
            .get(agent)
            .map(Vec::as_slice)
            .ok_or_else(|| invalid(format!("agent {agent} out of range")))
    }
}

impl RoundObserver for Trajectory {
    fn observe(&mut self, state: &SystemState, schedule: &StepSchedule) -> Result<()> {
        let t = state.round;
        if t > 0 {
            self.steps.push(schedule.alpha(t - 1));
        }
        self.horizon = t;
        let take = |net: &[AgentState]| NetworkSnapshot {
            iterates: net.iter().map(|a| a.iterate.clone()).collect(),
            consensus: net.iter().map(|a| a.consensus.clone()).collect(),
            opponent_estimates: net.iter().map(|a| a.opponent_estimate.clone()).collect(),
            time_averages: net.iter().filter_map(AgentState::time_average).collect(),
        };
        let snap = Snapshot { round: t, networks: [take(&state.networks[0]), take(&state.networks[1])] };
        // Thinned mode keeps multiples of the stride plus the latest round.
        if let Some(last) = self.snapshots.last() {
            if last.round % self.stride != 0 {
                self.snapshots.pop();
            }
        }
        self.snapshots.push(snap);
        Ok(())
    }
}

/// Runs D-SMD for `horizon` rounds and records the trajectory. Storage is
/// full for `T ≤ 10⁴` and `K ≤ 64`, otherwise thinned with `thin_stride`.
pub fn run_dsmd(setup: &DsmdSetup, horizon: usize, seed: u64, thin_stride: usize) -> Result<Trajectory> {
    let (k1, k2) = setup.game.actions();
    let full = horizon <= FULL_STORAGE_MAX_HORIZON && k1.max(k2) <= FULL_STORAGE_MAX_ACTIONS;
    let mut traj = Trajectory::new(if full { 1 } else { thin_stride.max(2) });
    run_with_observer(setup, horizon, seed, &mut traj)?;
    Ok(traj)
}

/// `x̂_{l,i}(t) = Σ_{s<t} α(s) x_{l,i}(s) / Σ_{s<t} α(s)`, `t ≥ 1`.
pub fn time_averaged_iterate(traj: &Trajectory, side: Side, agent: usize, t: usize) -> Result<SimplexPoint> {
    if t == 0 {
        return Err(invalid("time average is defined for t >= 1"));
    }
    if t > traj.horizon() {
        return Err(invalid(format!("round {t} beyond horizon {}", traj.horizon())));
    }
    if !traj.is_full() {
        let snap = traj.snapshot(t)?;
        let v = snap.networks[side.index()]
            .time_averages
            .get(agent)
            .ok_or_else(|| invalid(format!("agent {agent} out of range")))?;
        return renormalized(v.clone());
    }
    let mut total = 0.0;
    let mut acc: Option<Vec<f64>> = None;
    for s in 0..t {
        let a = traj.steps()[s];
        let x = traj.iterate(side, agent, s)?;
        let acc = acc.get_or_insert_with(|| vec![0.0; x.len()]);
        for (o, xi) in acc.iter_mut().zip(x) {
            *o += a * xi;
        }
        total += a;
    }
    if !(total > 0.0) {
        return Err(invalid("step sizes before t sum to zero"));
    }
    renormalized(acc.unwrap_or_default().into_iter().map(|v| v / total).collect())
}

/// Guards against last-ulp drift in sums of convex combinations.
fn renormalized(v: Vec<f64>) -> Result<SimplexPoint> {
    let s: f64 = v.iter().sum();
    if (s - 1.0).abs() <= crate::geometry::SIMPLEX_TOL {
        SimplexPoint::new(v)
    } else {
        SimplexPoint::new(v.into_iter().map(|a| a / s).collect())
    }
}

/// `x̄_l(t)`: mean iterate of network `l` at round `t`.
pub fn network_average(traj: &Trajectory, side: Side, t: usize) -> Result<Vec<f64>> {
    let snap = traj.snapshot(t)?;
    Ok(mean_point(&snap.networks[side.index()].iterates))
}

pub fn mean_point(points: &[Vec<f64>]) -> Vec<f64> {
    let mut out = vec![0.0; points.first().map_or(0, Vec::len)];
    for p in points {
        for (o, v) in out.iter_mut().zip(p) {
            *o += v;
        }
    }
    let n = points.len() as f64;
    out.iter_mut().for_each(|o| *o /= n);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::games::{MatrixGameSpec, Regularization};
    use crate::topology::{build_graph, metropolis_weights, uniform_bipartite, GraphKind, GraphSpec};
    use approx::assert_abs_diff_eq;

    fn network(kind: GraphKind, n: usize) -> MixingSchedule {
        MixingSchedule::fixed(metropolis_weights(&build_graph(&GraphSpec::new(kind, n, 3)).unwrap()))
    }

    fn setup(n: usize, k: usize, noise: f64, reg: Regularization, kind: GraphKind) -> DsmdSetup {
        let spec = MatrixGameSpec {
            actions1: k,
            actions2: k,
            n1: n,
            n2: n,
            noise_half_width: noise,
            regularization: reg,
            seed: 11,
        };
        let topology = TopologyBundle::new(
            network(kind, n),
            network(GraphKind::Complete, n),
            uniform_bipartite(n, n).unwrap(),
            uniform_bipartite(n, n).unwrap(),
        )
        .unwrap();
        DsmdSetup {
            game: MatrixGame::generate(&spec).unwrap(),
            topology,
            schedule: StepSchedule::power(0.5).unwrap(),
            regularizer: RegularizerKind::Entropic,
            init: InitRule::Uniform,
        }
    }

    fn vertex(k: usize, i: usize) -> Vec<f64> {
        SimplexPoint::vertex(k, i).into_inner()
    }

    #[test]
    fn schedules() {
        let p = StepSchedule::power(0.5).unwrap();
        assert_eq!(p.alpha(0), 1.0);
        assert_eq!(p.alpha(1), 1.0);
        assert_abs_diff_eq!(p.alpha(4), 0.5, epsilon = 1e-15);
        let sc = StepSchedule::strongly_convex(2.0).unwrap();
        assert_eq!(sc.alpha(0), 0.5);
        assert_eq!(sc.alpha(3), 0.125);
        assert!(StepSchedule::power(0.4).is_err());
        assert!(StepSchedule::power(1.1).is_err());
        assert!(StepSchedule::strongly_convex(0.0).is_err());
        assert!(StepSchedule::Constant { step: f64::NAN }.validate().is_err());
        for s in [p, sc, StepSchedule::power(0.75).unwrap(), StepSchedule::power(1.0).unwrap()] {
            assert!((0..1000).all(|t| s.alpha(t + 1) <= s.alpha(t) && s.alpha(t) >= 0.0));
        }
    }

    #[test]
    fn cycle_consensus_matches_weights() {
        let mut s = setup(4, 4, 0.0, Regularization::None, GraphKind::Cycle);
        s.regularizer = RegularizerKind::Euclidean;
        let mut state = SystemState::initial(&s.game, InitRule::Uniform, &mut ChaCha8Rng::seed_from_u64(0));
        for (i, agent) in state.networks[0].iter_mut().enumerate() {
            agent.iterate = vertex(4, i);
        }
        refresh_consensus(&mut state, &s.topology);
        let w = s.topology.network1.at(0).entries();
        for i in 0..4 {
            let oracle: Vec<f64> = (0..4).map(|p| (0..4).map(|j| w[(i, j)] * vertex(4, j)[p]).sum()).collect();
            assert_eq!(state.networks[0][i].consensus, oracle);
        }
        let third = 1.0 / 3.0;
        let v = &state.networks[0][0].consensus;
        assert_abs_diff_eq!(v.as_slice(), [third, third, 0.0, third].as_slice(), epsilon = 1e-15);
        // Network 2 reads the uniform mean of network 1.
        for agent in &state.networks[1] {
            assert_abs_diff_eq!(agent.opponent_estimate.as_slice(), [0.25; 4].as_slice(), epsilon = 1e-15);
        }
    }

    #[test]
    fn identical_starts_give_identical_consensus() {
        let s = setup(5, 3, 0.1, Regularization::None, GraphKind::Complete);
        let mut state = SystemState::initial(&s.game, InitRule::Uniform, &mut ChaCha8Rng::seed_from_u64(0));
        refresh_consensus(&mut state, &s.topology);
        let first = state.networks[0][0].consensus.clone();
        for a in &state.networks[0] {
            assert_abs_diff_eq!(a.consensus.as_slice(), first.as_slice(), epsilon = 1e-15);
            assert_abs_diff_eq!(a.consensus.as_slice(), a.iterate.as_slice(), epsilon = 1e-15);
        }
    }

    #[test]
    fn single_round_run_is_one_step() {
        let s = setup(3, 4, 0.3, Regularization::Entropic, GraphKind::Cycle);
        let traj = run_dsmd(&s, 1, 9, 10).unwrap();
        assert_eq!(traj.snapshots().len(), 2);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut state = SystemState::initial(&s.game, s.init, &mut rng.clone());
        dsmd_round(&mut state, &s, &s.regularizers(), &mut rng).unwrap();
        for side in [Side::Network1, Side::Network2] {
            for (i, agent) in state.network(side).iter().enumerate() {
                assert_eq!(traj.iterate(side, i, 1).unwrap(), agent.iterate.as_slice());
            }
        }
        assert_eq!(traj.steps(), &[1.0]);
    }

    #[test]
    fn runs_are_deterministic() {
        let mut s = setup(4, 5, 0.5, Regularization::None, GraphKind::Random);
        s.init = InitRule::RandomInterior;
        let a = run_dsmd(&s, 40, 5, 10).unwrap();
        let b = run_dsmd(&s, 40, 5, 10).unwrap();
        assert_eq!(a, b);
        let c = run_dsmd(&s, 40, 6, 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn default_sized_run_stays_feasible() {
        let s = setup(12, 20, 0.5, Regularization::None, GraphKind::Random);
        let traj = run_dsmd(&s, 500, 1, 10).unwrap();
        assert_eq!(traj.snapshots().len(), 501);
        for snap in traj.snapshots() {
            for net in &snap.networks {
                for x in net.iterates.iter().chain(&net.consensus).chain(&net.opponent_estimates) {
                    assert!(x.iter().all(|v| v.is_finite() && *v >= 0.0));
                    assert!((x.iter().sum::<f64>() - 1.0).abs() <= 1e-10);
                }
            }
        }
    }

    #[test]
    fn euclidean_run_stays_feasible() {
        let mut s = setup(4, 6, 0.5, Regularization::None, GraphKind::Cycle);
        s.regularizer = RegularizerKind::Euclidean;
        let traj = run_dsmd(&s, 200, 2, 10).unwrap();
        for snap in traj.snapshots() {
            for x in snap.networks.iter().flat_map(|n| &n.iterates) {
                assert!(x.iter().all(|v| *v >= 0.0) && (x.iter().sum::<f64>() - 1.0).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn thinned_trajectory_agrees_with_full() {
        let s = setup(3, 4, 0.2, Regularization::Entropic, GraphKind::Cycle);
        let full = run_dsmd(&s, 23, 3, 1).unwrap();
        let mut thin = Trajectory::new(5);
        run_with_observer(&s, 23, 3, &mut thin).unwrap();
        let rounds: Vec<usize> = thin.snapshots().iter().map(|s| s.round).collect();
        assert_eq!(rounds, vec![0, 5, 10, 15, 20, 23]);
        assert!(thin.snapshot(7).is_err());
        for t in [5, 20, 23] {
            let a = time_averaged_iterate(&full, Side::Network2, 1, t).unwrap();
            let b = time_averaged_iterate(&thin, Side::Network2, 1, t).unwrap();
            assert_abs_diff_eq!(a.as_slice(), b.as_slice(), epsilon = 1e-14);
        }
    }

    #[test]
    fn time_average_examples() {
        let snap = |round: usize, x: Vec<f64>| Snapshot {
            round,
            networks: [
                NetworkSnapshot {
                    iterates: vec![x],
                    consensus: vec![],
                    opponent_estimates: vec![],
                    time_averages: vec![],
                },
                NetworkSnapshot {
                    iterates: vec![vec![1.0]],
                    consensus: vec![],
                    opponent_estimates: vec![],
                    time_averages: vec![],
                },
            ],
        };
        let traj = Trajectory::from_parts(
            vec![1.0, 0.5],
            vec![snap(0, vertex(2, 0)), snap(1, vertex(2, 1)), snap(2, vec![0.3, 0.7])],
        )
        .unwrap();
        assert_eq!(time_averaged_iterate(&traj, Side::Network1, 0, 1).unwrap().as_slice(), &[1.0, 0.0]);
        let two = time_averaged_iterate(&traj, Side::Network1, 0, 2).unwrap();
        assert_abs_diff_eq!(two.as_slice(), [2.0 / 3.0, 1.0 / 3.0].as_slice(), epsilon = 1e-15);
        assert!(time_averaged_iterate(&traj, Side::Network1, 0, 0).is_err());
        assert!(time_averaged_iterate(&traj, Side::Network1, 0, 3).is_err());
        let constant = Trajectory::from_parts(
            vec![1.0, 0.7, 0.2],
            (0..4).map(|t| snap(t, vec![0.3, 0.7])).collect(),
        )
        .unwrap();
        let c = time_averaged_iterate(&constant, Side::Network1, 0, 3).unwrap();
        assert_abs_diff_eq!(c.as_slice(), [0.3, 0.7].as_slice(), epsilon = 1e-15);
    }

    #[test]
    fn network_average_examples() {
        assert_abs_diff_eq!(mean_point(&vec![vec![0.2, 0.8]; 3]).as_slice(), [0.2, 0.8].as_slice(), epsilon = 1e-15);
        assert_eq!(mean_point(&[vertex(2, 0), vertex(2, 1)]), vec![0.5, 0.5]);
        assert_eq!(mean_point(&[vec![1.0, 0.0], vec![0.5, 0.5], vec![0.0, 1.0]]), vec![0.5, 0.5]);
        let s = setup(3, 2, 0.0, Regularization::None, GraphKind::Complete);
        let traj = run_dsmd(&s, 2, 0, 1).unwrap();
        assert_eq!(network_average(&traj, Side::Network1, 0).unwrap(), vec![0.5, 0.5]);
    }

    #[test]
    fn rejects_bad_setups() {
        let mut s = setup(3, 2, 0.0, Regularization::Entropic, GraphKind::Complete);
        assert!(run_dsmd(&s, 0, 0, 1).is_err());
        s.regularizer = RegularizerKind::Euclidean;
        assert!(run_dsmd(&s, 5, 0, 1).is_err());
        let bad = TopologyBundle::new(
            network(GraphKind::Complete, 3),
            network(GraphKind::Complete, 3),
            uniform_bipartite(2, 3).unwrap(),
            uniform_bipartite(3, 3).unwrap(),
        );
        assert!(bad.is_err());
    }
}

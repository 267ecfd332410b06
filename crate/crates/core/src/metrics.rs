//! Measured quantities (gap, pseudo regret, consensus and NE errors) and the
//! theoretical envelopes they are checked against.
//!
//! Best responses over the simplex have closed forms. For the bilinear game a
//! linear function is optimized at a vertex. For the entropic game
//!
//! ```text
//! max_{x2 ∈ Δ} aᵀx2 − Σ x2 log x2 =  log Σ_j exp(a_j)
//! min_{x1 ∈ Δ} bᵀx1 + Σ x1 log x1 = −log Σ_j exp(−b_j)
//! ```

use serde::{Deserialize, Serialize};

use crate::engine::{DsmdSetup, StepSchedule, Trajectory};
use crate::error::{invalid, Error, Result};
use crate::games::{LipschitzProfile, MatrixGame, Side};
use crate::geometry::{project_simplex, RegularizerKind};
use crate::linalg::{dot, log_sum_exp, neg_entropy, norm_l1, norm_l2, softmax, sub, Matrix};
use crate::topology::{decay_constants, DecayConstants};

/// Interior clamp used for the entropic diameter and Lipschitz constant.
pub const DEFAULT_INTERIOR_FLOOR: f64 = 1e-9;
pub const NE_MAX_ITERATIONS: usize = 1_000_000;

/// Constants entering every theoretical envelope. Index 0 is network 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    pub lipschitz: f64,
    pub nu: [f64; 2],
    /// Bregman diameters `R_l²`.
    pub r_sq: [f64; 2],
    pub decay: [DecayConstants; 2],
    /// `Λ_l = max_i ‖x_{l,i}(0)‖` in the primal norm.
    pub lambda: [f64; 2],
    pub agents: [usize; 2],
    pub schedule: StepSchedule,
}

impl BoundParams {
    /// Derives the constants from a run setup and its initial iterates.
    pub fn from_setup(setup: &DsmdSetup, initial: &[Vec<Vec<f64>>; 2], interior_floor: f64) -> Result<Self> {
        let profile = setup.game.lipschitz_profile(setup.regularizer, interior_floor);
        let regs = setup.regularizers();
        let mut decay = [DecayConstants { gamma: 0.0, theta: 0.0 }; 2];
        let mut r_sq = [0.0; 2];
        let mut lambda = [0.0; 2];
        let mut agents = [0; 2];
        for side in [Side::Network1, Side::Network2] {
            let l = side.index();
            let sched = setup.topology.schedule(side);
            decay[l] = decay_constants(sched.size(), sched.eta_floor(), sched.period())?;
            r_sq[l] = bregman_diameter(setup.regularizer, regs[l].dimension(), interior_floor);
            let norm = regs[l].primal_norm();
            lambda[l] = initial[l].iter().map(|x| norm.eval(x)).fold(0.0, f64::max);
            agents[l] = sched.size();
        }
        Ok(BoundParams::new(profile, r_sq, decay, lambda, agents, setup.schedule))
    }

    pub fn new(
        profile: LipschitzProfile,
        r_sq: [f64; 2],
        decay: [DecayConstants; 2],
        lambda: [f64; 2],
        agents: [usize; 2],
        schedule: StepSchedule,
    ) -> Self {
        BoundParams { lipschitz: profile.lipschitz, nu: [profile.nu1, profile.nu2], r_sq, decay, lambda, agents, schedule }
    }

    fn alpha(&self, t: usize) -> f64 {
        self.schedule.alpha(t)
    }

    fn network_scale(&self, l: usize) -> f64 {
        self.agents[l] as f64 * self.decay[l].gamma
    }
}

/// Upper bound on `D_ψ(x, x')` over the simplex. Euclidean: `½‖e_i − e_j‖² = 1`.
/// Entropic: `log K + log(1/ε)` over points with coordinates at least `ε`.
pub fn bregman_diameter(kind: RegularizerKind, k: usize, interior_floor: f64) -> f64 {
    match kind {
        RegularizerKind::Euclidean => 1.0,
        RegularizerKind::Entropic => (k as f64).ln() + (1.0 / interior_floor).ln(),
    }
}

/// Best-response value against a fixed strategy.
///
/// `side` is the side of `fixed_point`: for network 1 this is
/// `max_{x2} U(x̂1, x2)`, for network 2 it is `min_{x1} U(x1, x̂2)`.
pub fn best_response_value(game: &MatrixGame, side: Side, fixed_point: &[f64]) -> Result<f64> {
    let (k1, k2) = game.actions();
    let a = game.mean_matrix();
    match side {
        Side::Network1 => {
            crate::error::check_dim(k1, fixed_point.len())?;
            let payoff = a.mul_vec_transposed(fixed_point);
            Ok(if game.is_regularized() {
                neg_entropy(fixed_point) + log_sum_exp(&payoff)
            } else {
                payoff.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            })
        }
        Side::Network2 => {
            crate::error::check_dim(k2, fixed_point.len())?;
            let cost = a.mul_vec(fixed_point);
            Ok(if game.is_regularized() {
                let neg: Vec<f64> = cost.iter().map(|c| -c).collect();
                -log_sum_exp(&neg) - neg_entropy(fixed_point)
            } else {
                cost.iter().cloned().fold(f64::INFINITY, f64::min)
            })
        }
    }
}

/// `δ(x̂1, x̂2) = max_{x2} U(x̂1, x2) − min_{x1} U(x1, x̂2)`.
pub fn gap(game: &MatrixGame, xhat1: &[f64], xhat2: &[f64]) -> Result<f64> {
    Ok(best_response_value(game, Side::Network1, xhat1)? - best_response_value(game, Side::Network2, xhat2)?)
}

/// Mean of `δ(x̂_{1,i}, x̂_{2,j})` over all agent pairs. The gap separates
/// into a term per agent, so this costs one best response per agent.
pub fn mean_pair_gap(game: &MatrixGame, xhat1: &[Vec<f64>], xhat2: &[Vec<f64>]) -> Result<f64> {
    let max_side = xhat1.iter().map(|x| best_response_value(game, Side::Network1, x)).sum::<Result<f64>>()?;
    let min_side = xhat2.iter().map(|x| best_response_value(game, Side::Network2, x)).sum::<Result<f64>>()?;
    Ok(max_side / xhat1.len() as f64 - min_side / xhat2.len() as f64)
}

/// `δ̄(t)` averaged over agent pairs and then over sample paths.
pub fn mean_gap(trajectories: &[Trajectory], game: &MatrixGame, t: usize) -> Result<f64> {
    if trajectories.is_empty() {
        return Err(invalid("need at least one trajectory"));
    }
    let mut total = 0.0;
    for traj in trajectories {
        let avg = |side: Side| -> Result<Vec<Vec<f64>>> {
            (0..game.agents(side))
                .map(|i| crate::engine::time_averaged_iterate(traj, side, i, t).map(|p| p.into_inner()))
                .collect()
        };
        total += mean_pair_gap(game, &avg(Side::Network1)?, &avg(Side::Network2)?)?;
    }
    Ok(total / trajectories.len() as f64)
}

/// Streaming pseudo regret of one network-1 agent against its own opponent
/// estimates, with the expected cost `U`.
///
/// The x2-only entropy terms of the entropic game appear identically in the
/// played and the comparator sums and are left out of both.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretTracker {
    rounds: usize,
    played_cost: f64,
    opponent_sum: Vec<f64>,
}

impl RegretTracker {
    pub fn new(opponent_dim: usize) -> Self {
        RegretTracker { rounds: 0, played_cost: 0.0, opponent_sum: vec![0.0; opponent_dim] }
    }

    pub fn push(&mut self, game: &MatrixGame, played: &[f64], opponent: &[f64]) -> Result<()> {
        let (k1, k2) = game.actions();
        crate::error::check_dim(k1, played.len())?;
        crate::error::check_dim(k2, opponent.len())?;
        let mut cost = dot(played, &game.mean_matrix().mul_vec(opponent));
        if game.is_regularized() {
            cost += neg_entropy(played);
        }
        self.played_cost += cost;
        for (s, u) in self.opponent_sum.iter_mut().zip(opponent) {
            *s += u;
        }
        self.rounds += 1;
        Ok(())
    }

    pub fn rounds(&self) -> usize {
        self.rounds
    }

    /// `Σ_t U(x(t), u(t)) − min_{x1} Σ_t U(x1, u(t))`.
    pub fn value(&self, game: &MatrixGame) -> Result<f64> {
        if self.rounds == 0 {
            return Err(invalid("regret needs at least one round"));
        }
        let c = game.mean_matrix().mul_vec(&self.opponent_sum);
        let best = if game.is_regularized() {
            let t = self.rounds as f64;
            let neg: Vec<f64> = c.iter().map(|v| -v / t).collect();
            -t * log_sum_exp(&neg)
        } else {
            c.iter().cloned().fold(f64::INFINITY, f64::min)
        };
        Ok(self.played_cost - best)
    }
}

/// Pseudo regret over `t = 1..=T` of the given sequences.
pub fn pseudo_regret(game: &MatrixGame, played: &[Vec<f64>], opponent: &[Vec<f64>]) -> Result<f64> {
    if played.is_empty() {
        return Err(invalid("regret needs T >= 1"));
    }
    if played.len() != opponent.len() {
        return Err(Error::Dimension { expected: played.len(), got: opponent.len() });
    }
    let mut tracker = RegretTracker::new(opponent[0].len());
    for (x, u) in played.iter().zip(opponent) {
        tracker.push(game, x, u)?;
    }
    tracker.value(game)
}

/// Values of `H_l(t)` for `t = 1..=horizon` (index `t − 1`):
///
/// `H_l(t) = n Γ θ^{t−1} Λ + 2(L+ν) α(t−1) + n Γ (L+ν) Σ_{s=1}^{t−1} θ^{t−1−s} α(s−1)`.
pub fn consensus_envelope_series(params: &BoundParams, side: Side, horizon: usize) -> Vec<f64> {
    let l = side.index();
    let DecayConstants { theta, .. } = params.decay[l];
    let scale = params.network_scale(l);
    let lv = params.lipschitz + params.nu[l];
    let mut out = Vec::with_capacity(horizon);
    let mut tail = 0.0; // Σ_{s=1}^{t−1} θ^{t−1−s} α(s−1)
    let mut geometric = 1.0; // θ^{t−1}
    for t in 1..=horizon {
        if t > 1 {
            tail = theta * tail + params.alpha(t - 2);
            geometric *= theta;
        }
        out.push(scale * geometric * params.lambda[l] + 2.0 * lv * params.alpha(t - 1) + scale * lv * tail);
    }
    out
}

/// `H_l(t)`, the bound on the expected distance of an agent to its network mean.
pub fn consensus_envelope(params: &BoundParams, side: Side, t: usize) -> Result<f64> {
    if t < 1 {
        return Err(invalid("consensus envelope is defined for t >= 1"));
    }
    Ok(consensus_envelope_series(params, side, t)[t - 1])
}

/// Convex-concave regret bound for `T = 1..=horizon` (index `T − 1`).
pub fn regret_bound_cc_series(params: &BoundParams, horizon: usize) -> Vec<f64> {
    let l_const = params.lipschitz;
    let mut out = Vec::with_capacity(horizon);
    let mut noise_terms = 0.0;
    let mut network_terms = 0.0;
    let mut initial_terms = 0.0;
    let mut tail = [0.0; 2];
    let mut geometric = [1.0; 2];
    for t in 1..=horizon {
        for l in 0..2 {
            let lv = l_const + params.nu[l];
            if t > 1 {
                tail[l] = params.decay[l].theta * tail[l] + params.alpha(t - 2);
                geometric[l] *= params.decay[l].theta;
            }
            noise_terms += lv * (9.0 * l_const + params.nu[l]) * params.alpha(t - 1);
            network_terms += params.network_scale(l) * lv * tail[l];
            initial_terms += params.network_scale(l) * geometric[l] * params.lambda[l];
        }
        out.push(
            noise_terms + 4.0 * l_const * network_terms + 4.0 * l_const * initial_terms
                + params.r_sq[0] / params.alpha(t),
        );
    }
    out
}

pub fn regret_bound_cc(params: &BoundParams, horizon: usize) -> Result<f64> {
    if horizon < 1 {
        return Err(invalid("regret bound needs T >= 1"));
    }
    Ok(regret_bound_cc_series(params, horizon)[horizon - 1])
}

/// Slope of the strongly convex regret bound in `1 + log T`.
pub fn regret_bound_sc_coefficient(params: &BoundParams) -> f64 {
    let l_const = params.lipschitz;
    (0..2)
        .map(|l| {
            let lv = l_const + params.nu[l];
            lv * (9.0 * l_const + params.nu[l] + 4.0 * l_const * params.network_scale(l) / (1.0 - params.decay[l].theta))
        })
        .sum()
}

/// Strongly convex regret bound; requires the `1/(η(t+1))` schedule.
pub fn regret_bound_sc(params: &BoundParams, horizon: usize) -> Result<f64> {
    if !params.schedule.is_strongly_convex() {
        return Err(invalid("the strongly convex regret bound needs the strongly_convex schedule"));
    }
    if horizon < 1 {
        return Err(invalid("regret bound needs T >= 1"));
    }
    let l_const = params.lipschitz;
    let constant: f64 = (0..2)
        .map(|l| params.network_scale(l) * params.lambda[l] * params.alpha(0) / (1.0 - params.decay[l].theta))
        .sum();
    Ok(regret_bound_sc_coefficient(params) * (1.0 + (horizon as f64).ln()) + 4.0 * l_const * constant)
}

/// `M1 = Σ_l (4 L n Γ Λ α(0) / (1 − θ) + 2 R²)`.
pub fn gap_bound_m1(params: &BoundParams) -> f64 {
    (0..2)
        .map(|l| {
            4.0 * params.lipschitz * params.network_scale(l) * params.lambda[l] * params.alpha(0)
                / (1.0 - params.decay[l].theta)
                + 2.0 * params.r_sq[l]
        })
        .sum()
}

/// `M2 = Σ_l (4 L (L+ν)(n Γ / (1 − θ) + 2) + (L+ν)² + ν²/2)`.
pub fn gap_bound_m2(params: &BoundParams) -> f64 {
    let l_const = params.lipschitz;
    (0..2)
        .map(|l| {
            let lv = l_const + params.nu[l];
            4.0 * l_const * lv * (params.network_scale(l) / (1.0 - params.decay[l].theta) + 2.0)
                + lv * lv
                + params.nu[l] * params.nu[l] / 2.0
        })
        .sum()
}

/// `(M1 + M2 Σ_{s<t} α²(s)) / Σ_{s<t} α(s)` for `t = 1..=horizon`.
pub fn ergodic_gap_bound_series(params: &BoundParams, horizon: usize) -> Vec<f64> {
    let (m1, m2) = (gap_bound_m1(params), gap_bound_m2(params));
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    (1..=horizon)
        .map(|t| {
            let a = params.alpha(t - 1);
            sum += a;
            sum_sq += a * a;
            (m1 + m2 * sum_sq) / sum
        })
        .collect()
}

pub fn ergodic_gap_bound(params: &BoundParams, t: usize) -> Result<f64> {
    if t < 1 {
        return Err(invalid("gap bound is defined for t >= 1"));
    }
    Ok(ergodic_gap_bound_series(params, t)[t - 1])
}

/// Mean-square bound on the time averages for a `μ`-strongly
/// convex-strongly concave game: `(2/μ) ·` the ergodic gap bound.
pub fn mse_bound_sc(params: &BoundParams, mu: f64, t: usize) -> Result<f64> {
    if !(mu > 0.0) {
        return Err(invalid("mu must be positive"));
    }
    Ok(2.0 / mu * ergodic_gap_bound(params, t)?)
}

/// Reference Nash equilibrium.
///
/// Entropic game: damped fixed point `x1 ← softmax(−Ā x2)`,
/// `x2 ← softmax(Āᵀ x1)` with damping ½, until the l1 change of an iteration
/// drops below `tolerance`. Bilinear game: projected extragradient, stopping
/// as soon as the last or the averaged iterate has gap at most `tolerance`.
pub fn ne_reference(game: &MatrixGame, tolerance: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(tolerance > 0.0) {
        return Err(invalid("tolerance must be positive"));
    }
    if game.is_regularized() {
        softmax_fixed_point(game.mean_matrix(), tolerance)
    } else {
        extragradient(game, tolerance)
    }
}

fn softmax_fixed_point(a: &Matrix, tolerance: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let (k1, k2) = (a.rows(), a.cols());
    let mut x1 = vec![1.0 / k1 as f64; k1];
    let mut x2 = vec![1.0 / k2 as f64; k2];
    let mut change = f64::INFINITY;
    for _ in 0..NE_MAX_ITERATIONS {
        let cost: Vec<f64> = a.mul_vec(&x2).into_iter().map(|c| -c).collect();
        let br1 = softmax(&cost);
        let br2 = softmax(&a.mul_vec_transposed(&x1));
        let next1: Vec<f64> = x1.iter().zip(&br1).map(|(x, b)| 0.5 * x + 0.5 * b).collect();
        let next2: Vec<f64> = x2.iter().zip(&br2).map(|(x, b)| 0.5 * x + 0.5 * b).collect();
        change = norm_l1(&sub(&next1, &x1)) + norm_l1(&sub(&next2, &x2));
        x1 = next1;
        x2 = next2;
        if change < tolerance {
            return Ok((x1, x2));
        }
    }
    Err(Error::NonConvergence { iterations: NE_MAX_ITERATIONS, residual: change })
}

fn extragradient(game: &MatrixGame, tolerance: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let a = game.mean_matrix();
    let (k1, k2) = (a.rows(), a.cols());
    let row_sum = (0..k1).map(|i| norm_l1(a.row(i))).fold(0.0, f64::max);
    let col_sum = a.transpose();
    let col_sum = (0..k2).map(|j| norm_l1(col_sum.row(j))).fold(0.0, f64::max);
    let spectral = (row_sum * col_sum).sqrt();
    if spectral == 0.0 {
        // Constant game: everything is an equilibrium.
        return Ok((vec![1.0 / k1 as f64; k1], vec![1.0 / k2 as f64; k2]));
    }
    let step = 0.5 / spectral;
    let proj = |v: Vec<f64>| project_simplex(&v).map(|p| p.into_inner());
    let mut x1 = vec![1.0 / k1 as f64; k1];
    let mut x2 = vec![1.0 / k2 as f64; k2];
    let mut avg1 = vec![0.0; k1];
    let mut avg2 = vec![0.0; k2];
    let mut best = f64::INFINITY;
    for it in 1..=NE_MAX_ITERATIONS {
        let g1 = a.mul_vec(&x2);
        let g2 = a.mul_vec_transposed(&x1);
        let y1 = proj(x1.iter().zip(&g1).map(|(x, g)| x - step * g).collect())?;
        let y2 = proj(x2.iter().zip(&g2).map(|(x, g)| x + step * g).collect())?;
        let h1 = a.mul_vec(&y2);
        let h2 = a.mul_vec_transposed(&y1);
        x1 = proj(x1.iter().zip(&h1).map(|(x, g)| x - step * g).collect())?;
        x2 = proj(x2.iter().zip(&h2).map(|(x, g)| x + step * g).collect())?;
        let w = 1.0 / it as f64;
        for (m, y) in avg1.iter_mut().zip(&y1) {
            *m += w * (y - *m);
        }
        for (m, y) in avg2.iter_mut().zip(&y2) {
            *m += w * (y - *m);
        }
        if it % 50 == 0 {
            let last = gap(game, &x1, &x2)?;
            if last <= tolerance {
                return Ok((x1, x2));
            }
            let averaged = gap(game, &avg1, &avg2)?;
            if averaged <= tolerance {
                return Ok((avg1, avg2));
            }
            best = best.min(last).min(averaged);
        }
    }
    Err(Error::NonConvergence { iterations: NE_MAX_ITERATIONS, residual: best })
}

/// `(1/n1) Σ_i ‖x_{1,i} − x1*‖₂ + (1/n2) Σ_j ‖x_{2,j} − x2*‖₂`.
pub fn absolute_error_of(iterates: [&[Vec<f64>]; 2], ne: (&[f64], &[f64])) -> f64 {
    let side = |xs: &[Vec<f64>], star: &[f64]| xs.iter().map(|x| norm_l2(&sub(x, star))).sum::<f64>() / xs.len() as f64;
    side(iterates[0], ne.0) + side(iterates[1], ne.1)
}

/// Agent-averaged distance of the actual iterates at round `t` to the NE.
pub fn absolute_error(traj: &Trajectory, ne: (&[f64], &[f64]), t: usize) -> Result<f64> {
    let snap = traj.snapshot(t)?;
    Ok(absolute_error_of([&snap.networks[0].iterates, &snap.networks[1].iterates], ne))
}

/// `‖x̂_1 − x1*‖² + ‖x̂_2 − x2*‖²` averaged over agent pairs, in `norm`.
pub fn mean_squared_error_of(
    averages: [&[Vec<f64>]; 2],
    ne: (&[f64], &[f64]),
    norm: crate::geometry::Norm,
) -> f64 {
    let side = |xs: &[Vec<f64>], star: &[f64]| {
        xs.iter().map(|x| norm.eval(&sub(x, star)).powi(2)).sum::<f64>() / xs.len() as f64
    };
    side(averages[0], ne.0) + side(averages[1], ne.1)
}

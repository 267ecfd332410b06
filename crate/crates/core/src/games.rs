//! Two-network stochastic matrix games.
//!
//! Network 1 (the minimizer) has `n1` agents, agent `i` holding an expected
//! cost matrix `Ā^i`; network 2 (the maximizer) has `n2` agents with matrices
//! `B^j`. The game cost is
//!
//! ```text
//! U(x1, x2) = (1/n1) Σ_i x1ᵀ Ā^i x2                       (bilinear)
//! U(x1, x2) = Σ x1 log x1 + (1/n1) Σ_i x1ᵀ Ā^i x2 − Σ x2 log x2   (entropic)
//! ```
//!
//! Agent costs are `f_{1,i} = x1ᵀĀ^i x2 [+ ent(x1) − ent(x2)]` and
//! `f_{2,j} = −x1ᵀB^j x2 [+ ent(x2) − ent(x1)]`, so both networks descend on
//! their own cost and `(1/n1) Σ f_{1,i} = −(1/n2) Σ f_{2,j} = U` whenever the
//! network-2 matrices average to the same mean as the network-1 matrices.
//!
//! Observed matrices are `Ā^i + E` with `E` i.i.d. uniform on `[−σ, σ]`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Result};
use crate::geometry::{DualVector, RegularizerKind};
use crate::linalg::{dot, neg_entropy, Matrix};

pub const DEFAULT_NOISE_HALF_WIDTH: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regularization {
    None,
    Entropic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Network1,
    Network2,
}

impl Side {
    pub fn index(self) -> usize {
        match self {
            Side::Network1 => 0,
            Side::Network2 => 1,
        }
    }

    pub fn other(self) -> Side {
        match self {
            Side::Network1 => Side::Network2,
            Side::Network2 => Side::Network1,
        }
    }
}

/// Parameters from which a game instance is generated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixGameSpec {
    pub actions1: usize,
    pub actions2: usize,
    pub n1: usize,
    pub n2: usize,
    pub noise_half_width: f64,
    pub regularization: Regularization,
    pub seed: u64,
}

/// Dual-norm Lipschitz constant of every agent cost and the noise levels of
/// the two networks' oracles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LipschitzProfile {
    pub lipschitz: f64,
    pub nu1: f64,
    pub nu2: f64,
}

impl LipschitzProfile {
    pub fn nu(&self, side: Side) -> f64 {
        match side {
            Side::Network1 => self.nu1,
            Side::Network2 => self.nu2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubgradientSample {
    pub vector: DualVector,
    pub side: Side,
    pub agent: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixGame {
    base: Vec<Matrix>,
    network2: Vec<Matrix>,
    mean: Matrix,
    noise_half_width: f64,
    regularization: Regularization,
}

impl MatrixGame {
    /// Draws `n1` base matrices with entries uniform on `[0, 1]` from the seed.
    pub fn generate(spec: &MatrixGameSpec) -> Result<Self> {
        if spec.actions1 == 0 || spec.actions2 == 0 || spec.n1 == 0 || spec.n2 == 0 {
            return Err(invalid("action counts and network sizes must be positive"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let base = (0..spec.n1)
            .map(|_| {
                let data = (0..spec.actions1 * spec.actions2).map(|_| rng.gen::<f64>()).collect();
                Matrix::from_row_major(spec.actions1, spec.actions2, data)
            })
            .collect::<Result<Vec<_>>>()?;
        MatrixGame::from_matrices(base, spec.n2, spec.noise_half_width, spec.regularization)
    }

    pub fn from_matrices(
        base: Vec<Matrix>,
        n2: usize,
        noise_half_width: f64,
        regularization: Regularization,
    ) -> Result<Self> {
        let first = base.first().ok_or_else(|| invalid("need at least one base matrix"))?;
        let (k1, k2) = (first.rows(), first.cols());
        for m in &base {
            check_dim(k1 * k2, m.rows() * m.cols())?;
            check_dim(k1, m.rows())?;
            if !m.is_finite() {
                return Err(invalid("base matrix has non-finite entries"));
            }
        }
        if n2 == 0 {
            return Err(invalid("network 2 needs at least one agent"));
        }
        if !(noise_half_width >= 0.0 && noise_half_width.is_finite()) {
            return Err(invalid(format!("noise half-width {noise_half_width} must be finite and >= 0")));
        }
        let network2 = assign_network2_costs(&base, n2)?;
        let mean = Matrix::mean_of(&base)?;
        Ok(MatrixGame { base, network2, mean, noise_half_width, regularization })
    }

    pub fn actions(&self) -> (usize, usize) {
        (self.mean.rows(), self.mean.cols())
    }

    pub fn agents(&self, side: Side) -> usize {
        match side {
            Side::Network1 => self.base.len(),
            Side::Network2 => self.network2.len(),
        }
    }

    pub fn base_matrices(&self) -> &[Matrix] {
        &self.base
    }

    pub fn network2_matrices(&self) -> &[Matrix] {
        &self.network2
    }

    /// `(1/n1) Σ_i Ā^i`.
    pub fn mean_matrix(&self) -> &Matrix {
        &self.mean
    }

    pub fn noise_half_width(&self) -> f64 {
        self.noise_half_width
    }

    pub fn regularization(&self) -> Regularization {
        self.regularization
    }

    pub fn is_regularized(&self) -> bool {
        self.regularization == Regularization::Entropic
    }

    /// Strong convexity of the cost in the own strategy with respect to the
    /// entropic regularizer.
    pub fn strong_convexity_modulus(&self) -> f64 {
        match self.regularization {
            Regularization::None => 0.0,
            Regularization::Entropic => 1.0,
        }
    }

    /// `U(x1, x2)` with expected matrices.
    pub fn expected_cost(&self, x1: &[f64], x2: &[f64]) -> Result<f64> {
        let (k1, k2) = self.actions();
        check_dim(k1, x1.len())?;
        check_dim(k2, x2.len())?;
        let mut u = dot(x1, &self.mean.mul_vec(x2));
        if self.is_regularized() {
            u += neg_entropy(x1) - neg_entropy(x2);
        }
        Ok(u)
    }

    /// Agent cost `f_{l,i}(x1, x2)` with its expected matrix.
    pub fn agent_cost(&self, side: Side, agent: usize, x1: &[f64], x2: &[f64]) -> Result<f64> {
        let m = self.matrix(side, agent)?;
        let bilinear = dot(x1, &m.mul_vec(x2));
        let reg = if self.is_regularized() { neg_entropy(x1) - neg_entropy(x2) } else { 0.0 };
        Ok(match side {
            Side::Network1 => bilinear + reg,
            Side::Network2 => -bilinear - reg,
        })
    }

    fn matrix(&self, side: Side, agent: usize) -> Result<&Matrix> {
        let list = match side {
            Side::Network1 => &self.base,
            Side::Network2 => &self.network2,
        };
        list.get(agent).ok_or_else(|| invalid(format!("agent {agent} out of range for {side:?}")))
    }

    /// One noisy realization of the agent's cost matrix.
    pub fn sample_cost_matrix<R: Rng + ?Sized>(&self, side: Side, agent: usize, rng: &mut R) -> Result<Matrix> {
        let mut m = self.matrix(side, agent)?.clone();
        let s = self.noise_half_width;
        if s > 0.0 {
            for a in m.data_mut() {
                *a += rng.gen_range(-s..=s);
            }
        }
        Ok(m)
    }

    /// Sampled subgradient of the agent's own cost in its own strategy,
    /// evaluated at its consensus point and opponent estimate.
    ///
    /// Network 1: `A_ξ u [+ 1 + log v]`. Network 2: `−A_ξᵀ u [+ 1 + log v]`.
    /// The noise matrix is drawn row-major from `rng`; nothing is drawn when
    /// the noise half-width is zero.
    pub fn subgradient_oracle<R: Rng + ?Sized>(
        &self,
        side: Side,
        agent: usize,
        own_consensus: &[f64],
        opponent_estimate: &[f64],
        rng: &mut R,
    ) -> Result<SubgradientSample> {
        let m = self.matrix(side, agent)?;
        let (own_dim, opp_dim) = match side {
            Side::Network1 => (m.rows(), m.cols()),
            Side::Network2 => (m.cols(), m.rows()),
        };
        check_dim(own_dim, own_consensus.len())?;
        check_dim(opp_dim, opponent_estimate.len())?;
        if self.is_regularized() && own_consensus.iter().any(|&a| !(a > 0.0)) {
            return Err(invalid("entropic cost needs a strictly positive own strategy"));
        }

        let mut g = match side {
            Side::Network1 => m.mul_vec(opponent_estimate),
            Side::Network2 => m.mul_vec_transposed(opponent_estimate),
        };
        let s = self.noise_half_width;
        if s > 0.0 {
            let mut noise = vec![0.0; own_dim];
            for r in 0..m.rows() {
                for c in 0..m.cols() {
                    let e = rng.gen_range(-s..=s);
                    match side {
                        Side::Network1 => noise[r] += e * opponent_estimate[c],
                        Side::Network2 => noise[c] += e * opponent_estimate[r],
                    }
                }
            }
            for (gi, ni) in g.iter_mut().zip(&noise) {
                *gi += ni;
            }
        }
        if side == Side::Network2 {
            for gi in &mut g {
                *gi = -*gi;
            }
        }
        if self.is_regularized() {
            for (gi, v) in g.iter_mut().zip(own_consensus) {
                *gi += 1.0 + v.ln();
            }
        }
        Ok(SubgradientSample { vector: DualVector::new(g)?, side, agent })
    }

    /// Noise-free subgradient at the same arguments.
    pub fn expected_subgradient(&self, side: Side, agent: usize, own: &[f64], opponent: &[f64]) -> Result<Vec<f64>> {
        let m = self.matrix(side, agent)?;
        let mut g = match side {
            Side::Network1 => m.mul_vec(opponent),
            Side::Network2 => m.mul_vec_transposed(opponent).into_iter().map(|a| -a).collect(),
        };
        if self.is_regularized() {
            for (gi, v) in g.iter_mut().zip(own) {
                *gi += 1.0 + v.ln();
            }
        }
        Ok(g)
    }

    /// Lipschitz constant and noise levels in the dual norm of `kind`.
    ///
    /// The entropy term has an unbounded gradient at the simplex boundary, so
    /// for the regularized game the constant holds on the clamped interior
    /// `{x : x_p ≥ interior_floor}`.
    pub fn lipschitz_profile(&self, kind: RegularizerKind, interior_floor: f64) -> LipschitzProfile {
        let (k1, k2) = self.actions();
        let all = self.base.iter().chain(&self.network2);
        let entropy_grad = 1.0 + (1.0 / interior_floor).ln();
        let s = self.noise_half_width;
        match kind {
            RegularizerKind::Entropic => {
                let mut l = all.map(Matrix::max_abs).fold(0.0, f64::max);
                if self.is_regularized() {
                    l += entropy_grad;
                }
                LipschitzProfile { lipschitz: l, nu1: s, nu2: s }
            }
            RegularizerKind::Euclidean => {
                let mut l = all.map(|m| m.max_col_norm().max(m.max_row_norm())).fold(0.0, f64::max);
                if self.is_regularized() {
                    l += (k1.max(k2) as f64).sqrt() * entropy_grad;
                }
                LipschitzProfile {
                    lipschitz: l,
                    nu1: (k1 as f64 * s * s / 3.0).sqrt(),
                    nu2: (k2 as f64 * s * s / 3.0).sqrt(),
                }
            }
        }
    }
}

/// Network-2 matrices: `B^j = Ā^j` when the networks have equal size,
/// otherwise every `B^j` is the mean of the `Ā^i`.
pub fn assign_network2_costs(base: &[Matrix], n2: usize) -> Result<Vec<Matrix>> {
    if base.len() == n2 {
        Ok(base.to_vec())
    } else {
        let mean = Matrix::mean_of(base)?;
        Ok(vec![mean; n2])
    }
}

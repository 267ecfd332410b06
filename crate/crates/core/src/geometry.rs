//! Distance-generating functions, Bregman divergences and prox-mappings.
//!
//! Two regularizers ship:
//!
//! | kind | ψ(x) | primal / dual norm | prox-mapping |
//! |------|------|--------------------|--------------|
//! | euclidean | ½‖x‖₂² | l2 / l2 | projection of `x + y` onto the feasible set |
//! | entropic | Σ x_p log x_p | l1 / l∞ | multiplicative weights on the simplex |
//!
//! Both are 1-strongly convex with respect to their primal norm. The
//! prox-mapping of payload `y` at `x` is `argmin_{x'} ⟨y, x − x'⟩ + D(x', x)`,
//! so a descent step with gradient `g` and step `α` passes `y = −α g`.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Error, Result};
use crate::linalg::{dot, norm_l1, norm_l2, norm_linf};

/// Absolute tolerance on the coordinate sum of a simplex point.
pub const SIMPLEX_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegularizerKind {
    Euclidean,
    Entropic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Norm {
    L1,
    L2,
    LInf,
}

impl Norm {
    pub fn eval(self, v: &[f64]) -> f64 {
        match self {
            Norm::L1 => norm_l1(v),
            Norm::L2 => norm_l2(v),
            Norm::LInf => norm_linf(v),
        }
    }
}

/// Compact convex feasible set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Simplex,
    /// Coordinatewise box `[lo, hi]^K`.
    Box { lo: f64, hi: f64 },
    /// Euclidean ball of the given radius around the origin.
    Ball { radius: f64 },
}

/// A 1-strongly convex distance-generating function over a feasible set,
/// together with the norm pair it is strongly convex against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Regularizer {
    kind: RegularizerKind,
    dimension: usize,
    domain: Domain,
}

impl Regularizer {
    pub fn euclidean(dimension: usize) -> Self {
        Regularizer { kind: RegularizerKind::Euclidean, dimension, domain: Domain::Simplex }
    }

    pub fn entropic(dimension: usize) -> Self {
        Regularizer { kind: RegularizerKind::Entropic, dimension, domain: Domain::Simplex }
    }

    pub fn new(kind: RegularizerKind, dimension: usize) -> Self {
        Regularizer { kind, dimension, domain: Domain::Simplex }
    }

    /// Euclidean regularizer over a box or ball instead of the simplex.
    pub fn euclidean_on(dimension: usize, domain: Domain) -> Result<Self> {
        match domain {
            Domain::Box { lo, hi } if !(lo.is_finite() && hi.is_finite() && lo <= hi) => {
                Err(invalid(format!("box bounds [{lo}, {hi}] are not a valid interval")))
            }
            Domain::Ball { radius } if !(radius.is_finite() && radius > 0.0) => {
                Err(invalid(format!("ball radius {radius} must be positive")))
            }
            _ => Ok(Regularizer { kind: RegularizerKind::Euclidean, dimension, domain }),
        }
    }

    pub fn kind(&self) -> RegularizerKind {
        self.kind
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn strong_convexity_modulus(&self) -> f64 {
        1.0
    }

    pub fn primal_norm(&self) -> Norm {
        match self.kind {
            RegularizerKind::Euclidean => Norm::L2,
            RegularizerKind::Entropic => Norm::L1,
        }
    }

    pub fn dual_norm(&self) -> Norm {
        match self.kind {
            RegularizerKind::Euclidean => Norm::L2,
            RegularizerKind::Entropic => Norm::LInf,
        }
    }

    /// ψ(x).
    pub fn value(&self, x: &[f64]) -> Result<f64> {
        self.check_point(x, false)?;
        Ok(match self.kind {
            RegularizerKind::Euclidean => 0.5 * dot(x, x),
            RegularizerKind::Entropic => crate::linalg::neg_entropy(x),
        })
    }

    /// ∇ψ(p). The entropic gradient `1 + log p` needs `p > 0`.
    pub fn gradient(&self, p: &[f64]) -> Result<Vec<f64>> {
        self.check_point(p, true)?;
        Ok(match self.kind {
            RegularizerKind::Euclidean => p.to_vec(),
            RegularizerKind::Entropic => p.iter().map(|v| 1.0 + v.ln()).collect(),
        })
    }

    /// `D(x, p) = ψ(x) − ψ(p) − ⟨∇ψ(p), x − p⟩`.
    pub fn bregman_divergence(&self, x: &[f64], p: &[f64]) -> Result<f64> {
        self.check_point(x, false)?;
        self.check_point(p, true)?;
        Ok(match self.kind {
            RegularizerKind::Euclidean => {
                let mut acc = 0.0;
                for (a, b) in x.iter().zip(p) {
                    acc += (a - b) * (a - b);
                }
                0.5 * acc
            }
            // Generalized KL; equals KL(x‖p) when both sum to one.
            RegularizerKind::Entropic => {
                let mut acc = 0.0;
                for (&a, &b) in x.iter().zip(p) {
                    if a > 0.0 {
                        acc += a * (a / b).ln();
                    }
                    acc += b - a;
                }
                acc.max(0.0)
            }
        })
    }

    /// `argmin_{x'} ⟨y, x − x'⟩ + D(x', x)` over the feasible set.
    ///
    /// A zero payload returns `x` unchanged.
    pub fn prox_map(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        self.check_point(x, self.kind == RegularizerKind::Entropic)?;
        check_dim(self.dimension, y.len())?;
        if y.iter().any(|v| !v.is_finite()) {
            return Err(invalid("prox payload has non-finite entries"));
        }
        if y.iter().all(|&v| v == 0.0) {
            return Ok(x.to_vec());
        }
        match self.kind {
            RegularizerKind::Euclidean => {
                let shifted: Vec<f64> = x.iter().zip(y).map(|(a, b)| a + b).collect();
                self.project(&shifted)
            }
            RegularizerKind::Entropic => Ok(multiplicative_weights(x, y)),
        }
    }

    /// Euclidean projection onto the feasible set.
    pub fn project(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dimension, v.len())?;
        match self.domain {
            Domain::Simplex => Ok(project_simplex(v)?.into_inner()),
            Domain::Box { lo, hi } => {
                finite(v)?;
                Ok(v.iter().map(|a| a.clamp(lo, hi)).collect())
            }
            Domain::Ball { radius } => {
                finite(v)?;
                let n = norm_l2(v);
                if n <= radius {
                    Ok(v.to_vec())
                } else {
                    Ok(v.iter().map(|a| a * radius / n).collect())
                }
            }
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.check_point(x, false).is_ok()
    }

    fn check_point(&self, x: &[f64], strictly_positive: bool) -> Result<()> {
        check_dim(self.dimension, x.len())?;
        finite(x)?;
        match self.domain {
            Domain::Simplex => {
                if x.iter().any(|&a| a < 0.0) {
                    return Err(invalid("simplex point has a negative coordinate"));
                }
                let s: f64 = x.iter().sum();
                if (s - 1.0).abs() > 1e-9 {
                    return Err(invalid(format!("simplex point sums to {s}")));
                }
            }
            Domain::Box { lo, hi } => {
                if x.iter().any(|&a| a < lo - 1e-12 || a > hi + 1e-12) {
                    return Err(invalid("point lies outside the box"));
                }
            }
            Domain::Ball { radius } => {
                if norm_l2(x) > radius * (1.0 + 1e-12) {
                    return Err(invalid("point lies outside the ball"));
                }
            }
        }
        if strictly_positive && self.kind == RegularizerKind::Entropic && x.iter().any(|&a| a <= 0.0) {
            return Err(invalid("entropic regularizer needs strictly positive coordinates"));
        }
        Ok(())
    }
}

fn finite(v: &[f64]) -> Result<()> {
    if v.iter().all(|a| a.is_finite()) {
        Ok(())
    } else {
        Err(invalid("vector has non-finite entries"))
    }
}

/// `x_p exp(y_p) / Σ_q x_q exp(y_q)`, evaluated in the log domain.
fn multiplicative_weights(x: &[f64], y: &[f64]) -> Vec<f64> {
    let logits: Vec<f64> = x.iter().zip(y).map(|(a, b)| a.ln() + b).collect();
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
    let s: f64 = out.iter().sum();
    for o in &mut out {
        *o /= s;
    }
    out
}

/// A point of the probability simplex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SimplexPoint(Vec<f64>);

impl SimplexPoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(invalid("simplex point must be non-empty"));
        }
        finite(&coords)?;
        if coords.iter().any(|&a| a < 0.0) {
            return Err(invalid("simplex point has a negative coordinate"));
        }
        let s: f64 = coords.iter().sum();
        if (s - 1.0).abs() > SIMPLEX_TOL {
            return Err(invalid(format!("simplex point sums to {s}")));
        }
        Ok(SimplexPoint(coords))
    }

    pub fn uniform(k: usize) -> Self {
        SimplexPoint(vec![1.0 / k as f64; k])
    }

    /// The `i`-th vertex `e_i` of the `k`-simplex.
    pub fn vertex(k: usize, i: usize) -> Self {
        let mut v = vec![0.0; k];
        v[i] = 1.0;
        SimplexPoint(v)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl TryFrom<Vec<f64>> for SimplexPoint {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        SimplexPoint::new(v)
    }
}

impl From<SimplexPoint> for Vec<f64> {
    fn from(p: SimplexPoint) -> Vec<f64> {
        p.0
    }
}

impl AsRef<[f64]> for SimplexPoint {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// A finite dual-space vector (a subgradient or prox payload).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualVector(Vec<f64>);

impl DualVector {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        finite(&coords)?;
        Ok(DualVector(coords))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// `−α · self`, the payload of a descent step.
    pub fn descent_payload(&self, step: f64) -> Vec<f64> {
        self.0.iter().map(|g| -step * g).collect()
    }
}

/// Euclidean projection onto the probability simplex by sort and threshold.
pub fn project_simplex(v: &[f64]) -> Result<SimplexPoint> {
    if v.is_empty() {
        return Err(invalid("cannot project an empty vector"));
    }
    finite(v)?;
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut tau = 0.0;
    for (j, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let candidate = (cumsum - 1.0) / (j + 1) as f64;
        if u - candidate > 0.0 {
            tau = candidate;
        }
    }
    let mut out: Vec<f64> = v.iter().map(|a| (a - tau).max(0.0)).collect();
    // Rounding in the cumulative sum can leave the total a few ulps off.
    let s: f64 = out.iter().sum();
    if (s - 1.0).abs() > SIMPLEX_TOL {
        for o in &mut out {
            *o /= s;
        }
    }
    SimplexPoint::new(out)
}

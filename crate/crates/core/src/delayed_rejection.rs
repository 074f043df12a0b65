//! Delayed-rejection Metropolis-Hastings for tractable targets.
//!
//! Upon rejection a further candidate is proposed from a stage-specific
//! proposal that may depend on the current point and every candidate rejected
//! so far in the sweep. The stage-`i` acceptance probability is
//! `1 ∧ N_i / D_i`, where the numerator evaluates the reversed path and the
//! denominator obeys `D_i = h_i(θ_i | θ, …)(D_{i-1} - N_{i-1})`.
//!
//! This engine is the reference the exchange-algorithm samplers are checked
//! against; it works for any point type, including finite state spaces.

use nalgebra::DVector;
use rand::{Rng, RngCore};

use crate::error::{Error, Result};
use crate::gaussian::{log1m_exp, Gaussian};

/// Proposal used at one delayed-rejection stage.
///
/// `path` is `[current, rejected_1, …, rejected_{i-1}]`.
pub trait StageProposal<P> {
    fn sample(&self, path: &[P], rng: &mut dyn RngCore) -> P;

    /// `log h_i(candidate | path)`.
    fn log_density(&self, candidate: &P, path: &[P]) -> f64;

    fn is_symmetric(&self) -> bool {
        false
    }
}

/// Log of one side of the stage-`i` ratio evaluated along `path`:
/// `log π(path_0) + Σ_k log h_k(path_k | path_<k) + Σ_{k<i} log(1 - α_k(path_≤k))`.
fn log_side<P: Clone>(target: &dyn Fn(&P) -> f64, proposals: &[&dyn StageProposal<P>], path: &[P]) -> f64 {
    let i = path.len() - 1;
    let mut total = target(&path[0]);
    if total == f64::NEG_INFINITY {
        return total;
    }
    for k in 1..=i {
        total += proposals[k - 1].log_density(&path[k], &path[..k]);
    }
    for k in 1..i {
        total += log1m_exp(log_alpha_path(target, proposals, &path[..=k]));
    }
    total
}

/// Log stage acceptance computed directly from the full ratio, recursing on
/// the reversed sub-paths for the `1 - α` factors.
fn log_alpha_path<P: Clone>(target: &dyn Fn(&P) -> f64, proposals: &[&dyn StageProposal<P>], path: &[P]) -> f64 {
    let reversed: Vec<P> = path.iter().rev().cloned().collect();
    let num = log_side(target, proposals, &reversed);
    let den = log_side(target, proposals, path);
    if num == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    (num - den).min(0.0)
}

/// First-stage acceptance `1 ∧ π(θ₁)h₁(θ|θ₁) / π(θ)h₁(θ₁|θ)`.
pub fn alpha1<P: Clone>(target: &dyn Fn(&P) -> f64, h1: &dyn StageProposal<P>, theta: &P, theta1: &P) -> Result<f64> {
    alpha(target, &[h1], &[theta.clone(), theta1.clone()])
}

/// Stage-`i` acceptance for `path = [θ, θ₁, …, θ_i]`, assuming the earlier
/// stages along the path were rejected.
pub fn alpha<P: Clone>(target: &dyn Fn(&P) -> f64, proposals: &[&dyn StageProposal<P>], path: &[P]) -> Result<f64> {
    if path.len() < 2 || path.len() - 1 > proposals.len() {
        return Err(Error::config("path length must be between 2 and stages + 1"));
    }
    if target(&path[0]) == f64::NEG_INFINITY {
        return Err(Error::config("target density is zero at the current point"));
    }
    Ok(log_alpha_path(target, proposals, path).exp())
}

/// Bookkeeping of one delayed-rejection sweep.
///
/// `N_i`, `D_i` are held linearly relative to `exp(log_scale)`; the scale is
/// rebased to `D` after every stage so the subtraction `D - N` stays exact.
#[derive(Debug, Clone)]
pub struct DrState<P> {
    pub current: P,
    pub stage_candidates: Vec<P>,
    pub log_numerators: Vec<f64>,
    pub log_denominators: Vec<f64>,
    log_scale: f64,
    n_rel: f64,
}

impl<P: Clone> DrState<P> {
    fn new(current: P) -> Self {
        DrState {
            current,
            stage_candidates: vec![],
            log_numerators: vec![],
            log_denominators: vec![],
            log_scale: 0.0,
            n_rel: 0.0,
        }
    }

    fn path(&self) -> Vec<P> {
        std::iter::once(self.current.clone())
            .chain(self.stage_candidates.iter().cloned())
            .collect()
    }
}

/// Result of one delayed-rejection sweep.
#[derive(Debug, Clone)]
pub struct DrOutcome<P> {
    pub next: P,
    /// Accepting stage, or 0 when every stage rejected.
    pub accepted_stage: usize,
    /// Stages attempted.
    pub stages_tried: usize,
    /// Stages abandoned because `D_i` underflowed to a nonpositive value.
    pub underflows: usize,
    pub state: DrState<P>,
}

/// One sweep with up to `max_stages` stages.
pub fn dr_step<P: Clone>(
    target: &dyn Fn(&P) -> f64,
    proposals: &[&dyn StageProposal<P>],
    max_stages: usize,
    current: &P,
    rng: &mut dyn RngCore,
) -> Result<DrOutcome<P>> {
    if max_stages == 0 || max_stages > proposals.len() {
        return Err(Error::config(
            "max_stages must be between 1 and the number of proposals",
        ));
    }
    let log_pi = target(current);
    if log_pi == f64::NEG_INFINITY {
        return Err(Error::config("target density is zero at the current point"));
    }
    let mut state = DrState::new(current.clone());
    let mut underflows = 0;
    for stage in 1..=max_stages {
        let path = state.path();
        let candidate = proposals[stage - 1].sample(&path, rng);
        let log_h = proposals[stage - 1].log_density(&candidate, &path);

        // D_1 = π(θ) h_1(θ_1 | θ); D_i = h_i(…)(D_{i-1} - N_{i-1})
        let log_d = if stage == 1 {
            log_pi + log_h
        } else {
            let remaining = 1.0 - state.n_rel;
            if remaining <= 0.0 || !remaining.is_finite() {
                underflows += 1;
                break;
            }
            state.log_scale + remaining.ln() + log_h
        };
        let mut full = path.clone();
        full.push(candidate.clone());
        let reversed: Vec<P> = full.iter().rev().cloned().collect();
        let log_n = log_side(target, proposals, &reversed);

        state.log_scale = log_d;
        state.n_rel = (log_n - log_d).exp();
        state.log_numerators.push(log_n);
        state.log_denominators.push(log_d);
        state.stage_candidates.push(candidate.clone());

        let log_a = if log_n == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            (log_n - log_d).min(0.0)
        };
        let u: f64 = rng.random();
        if u < log_a.exp() {
            return Ok(DrOutcome {
                next: candidate,
                accepted_stage: stage,
                stages_tried: stage,
                underflows,
                state,
            });
        }
    }
    let stages_tried = state.stage_candidates.len();
    Ok(DrOutcome {
        next: current.clone(),
        accepted_stage: 0,
        stages_tried,
        underflows,
        state,
    })
}

/// Plain Metropolis-Hastings step, consuming random numbers in the same
/// order as a one-stage [`dr_step`].
pub fn mh_step<P: Clone>(
    target: &dyn Fn(&P) -> f64,
    proposal: &dyn StageProposal<P>,
    current: &P,
    rng: &mut dyn RngCore,
) -> (P, bool) {
    let path = [current.clone()];
    let candidate = proposal.sample(&path, rng);
    let log_r = target(&candidate) + proposal.log_density(current, std::slice::from_ref(&candidate))
        - target(current)
        - proposal.log_density(&candidate, &path);
    let u: f64 = rng.random();
    if u < log_r.min(0.0).exp() {
        (candidate, true)
    } else {
        (current.clone(), false)
    }
}

/// Exact transition matrix of a `stages`-stage sweep on `{0, …, states-1}`,
/// by enumerating every proposal path.
#[allow(clippy::needless_range_loop)]
pub fn transition_matrix(
    target: &dyn Fn(&usize) -> f64,
    proposals: &[&dyn StageProposal<usize>],
    stages: usize,
    states: usize,
) -> Result<Vec<Vec<f64>>> {
    if stages == 0 || stages > proposals.len() {
        return Err(Error::config("stages must be between 1 and the number of proposals"));
    }
    let mut p = vec![vec![0.0; states]; states];
    for x in 0..states {
        if target(&x) == f64::NEG_INFINITY {
            return Err(Error::config("target density is zero at a state"));
        }
        // (path, probability that every stage along it proposed and rejected)
        let mut frontier = vec![(vec![x], 1.0)];
        for stage in 1..=stages {
            let mut next = Vec::new();
            for (path, weight) in frontier {
                for y in 0..states {
                    let q = proposals[stage - 1].log_density(&y, &path).exp();
                    if q == 0.0 {
                        continue;
                    }
                    let mut full = path.clone();
                    full.push(y);
                    let a = alpha(target, proposals, &full)?;
                    p[x][y] += weight * q * a;
                    next.push((full, weight * q * (1.0 - a)));
                }
            }
            frontier = next;
        }
        let moved: f64 = p[x].iter().sum();
        p[x][x] += 1.0 - moved;
    }
    Ok(p)
}

/// Gaussian random walk around the current point, ignoring rejected candidates.
#[derive(Debug, Clone)]
pub struct GaussianWalk {
    pub step: Gaussian,
}

impl StageProposal<DVector<f64>> for GaussianWalk {
    fn sample(&self, path: &[DVector<f64>], rng: &mut dyn RngCore) -> DVector<f64> {
        &path[0] + self.step.sample(rng)
    }

    fn log_density(&self, candidate: &DVector<f64>, path: &[DVector<f64>]) -> f64 {
        self.step.log_density(&(candidate - &path[0]))
    }

    fn is_symmetric(&self) -> bool {
        true
    }
}

/// Proposal on `{0, …, k-1}` given by explicit stage tables.
///
/// Stage 1 reads `table[current][candidate]`; stage 2 reads
/// `table[current * k + rejected][candidate]`.
#[derive(Debug, Clone)]
pub struct DiscreteTable {
    pub states: usize,
    pub table: Vec<Vec<f64>>,
}

impl DiscreteTable {
    fn row(&self, path: &[usize]) -> &[f64] {
        let idx = path.iter().fold(0, |acc, &s| acc * self.states + s);
        &self.table[idx]
    }
}

impl StageProposal<usize> for DiscreteTable {
    fn sample(&self, path: &[usize], rng: &mut dyn RngCore) -> usize {
        let row = self.row(path);
        let mut u: f64 = rng.random::<f64>() * row.iter().sum::<f64>();
        for (s, p) in row.iter().enumerate() {
            if u < *p {
                return s;
            }
            u -= p;
        }
        row.len() - 1
    }

    fn log_density(&self, candidate: &usize, path: &[usize]) -> f64 {
        self.row(path)[*candidate].ln()
    }
}

/// Test targets with known moments.
pub mod targets {
    use nalgebra::{DMatrix, DVector};

    /// Log density of the standard normal, up to a constant.
    pub fn standard_normal(x: &DVector<f64>) -> f64 {
        -0.5 * x.norm_squared()
    }

    /// Bivariate normal with unit variances and correlation `rho`.
    pub fn correlated_normal(rho: f64) -> impl Fn(&DVector<f64>) -> f64 {
        let prec = DMatrix::from_row_slice(2, 2, &[1.0, rho, rho, 1.0])
            .try_inverse()
            .expect("|rho| < 1");
        move |x: &DVector<f64>| -0.5 * (x.transpose() * &prec * x)[(0, 0)]
    }

    /// Discrete target given by unnormalised probabilities.
    pub fn discrete(weights: Vec<f64>) -> impl Fn(&usize) -> f64 {
        move |s: &usize| weights[*s].ln()
    }
}

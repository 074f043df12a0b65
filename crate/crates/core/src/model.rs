//! ERGM likelihood pieces: model specification, Gaussian prior, the tie-flip
//! auxiliary network simulator and exhaustive small-graph enumeration.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::Gaussian;
use crate::graph::Graph;
use crate::statistics::{BoundStatistic, Statistic};

/// Largest dyad count accepted by exhaustive enumeration.
pub const MAX_ENUMERATION_DYADS: usize = 20;

/// Ordered list of statistics defining `s(y)`; its length is the parameter dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Statistic>", into = "Vec<Statistic>")]
pub struct ModelSpec {
    statistics: Vec<Statistic>,
}

impl ModelSpec {
    pub fn new(statistics: Vec<Statistic>) -> Result<Self> {
        if statistics.is_empty() {
            return Err(Error::config("model needs at least one statistic"));
        }
        for (k, s) in statistics.iter().enumerate() {
            if statistics[..k].contains(s) {
                return Err(Error::config(format!("statistic `{s}` listed twice")));
            }
        }
        Ok(ModelSpec { statistics })
    }

    pub fn dim(&self) -> usize {
        self.statistics.len()
    }

    pub fn statistics(&self) -> &[Statistic] {
        &self.statistics
    }

    pub fn names(&self) -> Vec<String> {
        self.statistics.iter().map(ToString::to_string).collect()
    }

    pub fn is_edges_only(&self) -> bool {
        self.statistics == [Statistic::Edges]
    }

    pub fn bind(&self, g: &Graph) -> Result<BoundModel> {
        Ok(BoundModel {
            stats: self.statistics.iter().map(|s| s.bind(g)).collect::<Result<_>>()?,
        })
    }

    pub fn stat_vector(&self, g: &Graph) -> Result<DVector<f64>> {
        Ok(self.bind(g)?.evaluate(g))
    }

    /// `s(g)ᵀθ`, the log of the unnormalised likelihood.
    pub fn log_unnorm_likelihood(&self, theta: &DVector<f64>, g: &Graph) -> Result<f64> {
        check_dim(self.dim(), theta.len())?;
        Ok(self.stat_vector(g)?.dot(theta))
    }
}

impl TryFrom<Vec<Statistic>> for ModelSpec {
    type Error = Error;
    fn try_from(v: Vec<Statistic>) -> Result<Self> {
        ModelSpec::new(v)
    }
}

impl From<ModelSpec> for Vec<Statistic> {
    fn from(m: ModelSpec) -> Self {
        m.statistics
    }
}

impl FromStr for ModelSpec {
    type Err = Error;

    /// Comma separated descriptors; commas inside parentheses belong to the descriptor.
    fn from_str(s: &str) -> Result<Self> {
        let mut parts = vec![];
        let mut depth = 0i32;
        let mut start = 0;
        for (k, c) in s.char_indices() {
            match c {
                '(' => depth += 1,
                ')' => depth -= 1,
                ',' if depth == 0 => {
                    parts.push(&s[start..k]);
                    start = k + 1;
                }
                _ => {}
            }
        }
        parts.push(&s[start..]);
        ModelSpec::new(
            parts
                .into_iter()
                .filter(|p| !p.trim().is_empty())
                .map(str::parse)
                .collect::<Result<_>>()?,
        )
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.names().join(", "))
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension { expected, got })
    }
}

/// A model resolved against a node set.
#[derive(Debug, Clone)]
pub struct BoundModel {
    stats: Vec<BoundStatistic>,
}

impl BoundModel {
    pub fn dim(&self) -> usize {
        self.stats.len()
    }

    pub fn evaluate(&self, g: &Graph) -> DVector<f64> {
        DVector::from_iterator(self.stats.len(), self.stats.iter().map(|s| s.evaluate(g)))
    }

    /// Add-edge change scores of every statistic for dyad `(i, j)`.
    #[inline]
    pub fn change_scores(&self, g: &Graph, i: usize, j: usize, out: &mut DVector<f64>) {
        for (o, s) in out.iter_mut().zip(&self.stats) {
            *o = s.change_score(g, i, j);
        }
    }
}

/// Multivariate normal prior on θ.
#[derive(Debug, Clone)]
pub struct GaussianPrior {
    mean: DVector<f64>,
    dist: Gaussian,
}

impl GaussianPrior {
    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        check_dim(mean.len(), covariance.nrows())?;
        Ok(GaussianPrior {
            mean,
            dist: Gaussian::new(covariance)?,
        })
    }

    /// `N(0, variance · I_d)`.
    pub fn isotropic(d: usize, variance: f64) -> Result<Self> {
        GaussianPrior::new(DVector::zeros(d), DMatrix::identity(d, d) * variance)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        self.dist.covariance()
    }

    pub fn log_density(&self, theta: &DVector<f64>) -> Result<f64> {
        check_dim(self.dim(), theta.len())?;
        Ok(self.log_density_unchecked(theta))
    }

    pub(crate) fn log_density_unchecked(&self, theta: &DVector<f64>) -> f64 {
        self.dist.log_density(&(theta - &self.mean))
    }
}

/// Which dyad a tie-flip step proposes to toggle.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlipProposal {
    /// Uniform over all dyads.
    #[default]
    Uniform,
    /// Tie/no-tie: with probability 1/2 an existing tie, otherwise a uniform
    /// dyad. Mixes faster on sparse graphs.
    Tnt,
}

/// Single-dyad Metropolis-Hastings simulator for `p(y | θ) ∝ exp{s(y)ᵀθ}`.
#[derive(Debug, Clone)]
pub struct TieFlip {
    model: BoundModel,
    proposal: FlipProposal,
}

impl TieFlip {
    pub fn new(model: &ModelSpec, nodes: &Graph) -> Result<Self> {
        Ok(TieFlip::from_bound(model.bind(nodes)?))
    }

    pub fn from_bound(model: BoundModel) -> Self {
        TieFlip {
            model,
            proposal: FlipProposal::Uniform,
        }
    }

    pub fn with_proposal(mut self, proposal: FlipProposal) -> Self {
        self.proposal = proposal;
        self
    }

    pub fn model(&self) -> &BoundModel {
        &self.model
    }

    pub fn proposal(&self) -> FlipProposal {
        self.proposal
    }

    /// Runs `iters` flip proposals in place, keeping `stats == s(graph)` up to
    /// rounding. Returns the number of accepted flips.
    pub fn run<R: Rng + ?Sized>(
        &self,
        theta: &DVector<f64>,
        graph: &mut Graph,
        stats: &mut DVector<f64>,
        iters: usize,
        rng: &mut R,
    ) -> usize {
        let n = graph.node_count();
        if n < 2 {
            return 0;
        }
        let dyads = graph.dyad_count() as f64;
        // TNT proposal probabilities of removing a given tie / adding a given
        // non-tie when the graph has `e` ties
        let q_remove = |e: usize| 0.5 / dyads + 0.5 / e as f64;
        let q_add = |e: usize| if e == 0 { 1.0 / dyads } else { 0.5 / dyads };
        let mut delta = DVector::zeros(self.model.dim());
        let mut accepted = 0;
        for _ in 0..iters {
            let e = graph.edge_count();
            let (i, j) = if self.proposal == FlipProposal::Tnt && e > 0 && rng.random::<f64>() < 0.5 {
                graph.incidence(rng.random_range(0..2 * e))
            } else {
                let i = rng.random_range(0..n);
                let mut j = rng.random_range(0..n - 1);
                if j >= i {
                    j += 1;
                }
                (i, j)
            };
            self.model.change_scores(graph, i, j, &mut delta);
            let present = graph.has_edge(i, j);
            let mut log_ratio = if present { -delta.dot(theta) } else { delta.dot(theta) };
            if self.proposal == FlipProposal::Tnt {
                log_ratio += if present {
                    (q_add(e - 1) / q_remove(e)).ln()
                } else {
                    (q_remove(e + 1) / q_add(e)).ln()
                };
            }
            if log_ratio >= 0.0 || rng.random::<f64>() < log_ratio.exp() {
                graph.flip(i, j);
                if present {
                    *stats -= &delta;
                } else {
                    *stats += &delta;
                }
                accepted += 1;
            }
        }
        accepted
    }
}

/// Approximate draw from `p(· | θ)`: `iters` tie-flip updates starting at `start`.
pub fn simulate_auxiliary<R: Rng + ?Sized>(
    model: &ModelSpec,
    theta: &DVector<f64>,
    start: &Graph,
    iters: usize,
    rng: &mut R,
) -> Result<Graph> {
    check_dim(model.dim(), theta.len())?;
    simulate_with(&TieFlip::new(model, start)?, theta, start, iters, rng)
}

/// [`simulate_auxiliary`] with a prepared simulator.
pub fn simulate_with<R: Rng + ?Sized>(
    sampler: &TieFlip,
    theta: &DVector<f64>,
    start: &Graph,
    iters: usize,
    rng: &mut R,
) -> Result<Graph> {
    check_dim(sampler.model.dim(), theta.len())?;
    let mut g = start.clone();
    let mut stats = sampler.model.evaluate(&g);
    sampler.run(theta, &mut g, &mut stats, iters, rng);
    Ok(g)
}

/// Every graph on a small node set together with its statistic vector.
/// Graph `k` has dyad `d` present iff bit `d` of `k` is set.
#[derive(Debug, Clone)]
pub struct GraphEnumeration {
    template: Graph,
    stats: Vec<DVector<f64>>,
}

impl GraphEnumeration {
    pub fn new(model: &ModelSpec, nodes: &Graph) -> Result<Self> {
        let dyads = nodes.dyad_count();
        if dyads > MAX_ENUMERATION_DYADS {
            return Err(Error::EnumerationTooLarge(dyads));
        }
        let template = nodes.cleared();
        let bound = model.bind(&template)?;
        // Gray-code walk: consecutive indices differ in one dyad
        let mut g = template.clone();
        let mut stats = vec![DVector::zeros(0); 1 << dyads];
        stats[0] = bound.evaluate(&g);
        let mut code = 0usize;
        for step in 1..(1usize << dyads) {
            let bit = step.trailing_zeros() as usize;
            let (i, j) = g.dyad(bit);
            g.flip(i, j);
            code ^= 1 << bit;
            stats[code] = bound.evaluate(&g);
        }
        Ok(GraphEnumeration { template, stats })
    }

    pub fn len(&self) -> usize {
        self.stats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stats.is_empty()
    }

    pub fn stats(&self, index: usize) -> &DVector<f64> {
        &self.stats[index]
    }

    pub fn graph(&self, index: usize) -> Graph {
        let mut g = self.template.clone();
        for d in 0..g.dyad_count() {
            if index >> d & 1 == 1 {
                let (i, j) = g.dyad(d);
                g.flip(i, j);
            }
        }
        g
    }

    /// Index of `g` in the enumeration.
    pub fn index_of(&self, g: &Graph) -> usize {
        (0..g.dyad_count())
            .filter(|&d| {
                let (i, j) = g.dyad(d);
                g.has_edge(i, j)
            })
            .map(|d| 1usize << d)
            .sum()
    }

    pub fn log_z(&self, theta: &DVector<f64>) -> f64 {
        let logs: Vec<f64> = self.stats.iter().map(|s| s.dot(theta)).collect();
        let m = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        m + logs.iter().map(|l| (l - m).exp()).sum::<f64>().ln()
    }

    pub fn probabilities(&self, theta: &DVector<f64>) -> Vec<f64> {
        let log_z = self.log_z(theta);
        self.stats.iter().map(|s| (s.dot(theta) - log_z).exp()).collect()
    }

    /// Exact draw of a graph index from `p(· | θ)` by inversion.
    pub fn sample_index<R: Rng + ?Sized>(&self, theta: &DVector<f64>, rng: &mut R) -> usize {
        let logs: Vec<f64> = self.stats.iter().map(|s| s.dot(theta)).collect();
        let m = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = logs.iter().map(|l| (l - m).exp()).collect();
        let total: f64 = weights.iter().sum();
        let mut u = rng.random::<f64>() * total;
        for (k, w) in weights.iter().enumerate() {
            if u < *w {
                return k;
            }
            u -= w;
        }
        weights.len() - 1
    }
}

/// Exact draw from `p(· | θ)` on `n` unattributed nodes.
pub fn exact_sample<R: Rng + ?Sized>(model: &ModelSpec, theta: &DVector<f64>, n: usize, rng: &mut R) -> Result<Graph> {
    check_dim(model.dim(), theta.len())?;
    let e = GraphEnumeration::new(model, &Graph::empty(n))?;
    Ok(e.graph(e.sample_index(theta, rng)))
}

/// `log z(θ)` on `n` unattributed nodes: closed form for the edges-only
/// model, exhaustive enumeration otherwise.
pub fn exact_log_z(model: &ModelSpec, theta: &DVector<f64>, n: usize) -> Result<f64> {
    check_dim(model.dim(), theta.len())?;
    if model.is_edges_only() {
        let dyads = (n * n.saturating_sub(1) / 2) as f64;
        let t = theta[0];
        let softplus = if t > 0.0 {
            t + (-t).exp().ln_1p()
        } else {
            t.exp().ln_1p()
        };
        return Ok(dyads * softplus);
    }
    Ok(GraphEnumeration::new(model, &Graph::empty(n))?.log_z(theta))
}

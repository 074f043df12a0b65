//! Population approximate exchange samplers: ADS-AEA, the three adaptive
//! variants and their delayed-rejection versions.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adapt::{batch_covariance, is_usable, scale_proposal, RunningCovariance, DEFAULT_JITTER};
use crate::diagnostics::{AcceptanceCounts, SampleStore};
use crate::error::{Error, Result};
use crate::gaussian::{is_symmetric, log1m_exp, log_add_exp, Gaussian};
use crate::graph::Graph;
use crate::model::{check_dim, FlipProposal, GaussianPrior, GraphEnumeration, ModelSpec, TieFlip};

/// Source of the proposal covariance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Adaptive direction sampling from two other chains.
    Ads,
    /// Chain `h`'s own past states.
    Vertical,
    /// Current states of all chains.
    Horizontal,
    /// Past states of all chains.
    Rectangular,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::Ads,
        Variant::Vertical,
        Variant::Horizontal,
        Variant::Rectangular,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Variant::Ads => "ADS-AEA",
            Variant::Vertical => "AAEA-1",
            Variant::Horizontal => "AAEA-2",
            Variant::Rectangular => "AAEA-3",
        }
    }
}

/// A variant together with the delayed-rejection switch, named like
/// `ads-aea`, `aaea-2+dr`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Algorithm {
    pub variant: Variant,
    pub dr: bool,
}

impl Algorithm {
    pub fn all() -> Vec<Algorithm> {
        Variant::ALL
            .iter()
            .flat_map(|&variant| [false, true].map(|dr| Algorithm { variant, dr }))
            .collect()
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.variant.label(), if self.dr { "+DR" } else { "" })
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        let (base, dr) = match lower.strip_suffix("+dr") {
            Some(b) => (b, true),
            None => (lower.as_str(), false),
        };
        let variant = match base {
            "ads-aea" | "ads" => Variant::Ads,
            "aaea-1" | "vertical" => Variant::Vertical,
            "aaea-2" | "horizontal" => Variant::Horizontal,
            "aaea-3" | "rectangular" => Variant::Rectangular,
            _ => return Err(Error::config(format!("unknown algorithm `{s}`"))),
        };
        Ok(Algorithm { variant, dr })
    }
}

impl Serialize for Algorithm {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Algorithm {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Covariance given either as `c` (meaning `c·I`) or as a full matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CovarianceSpec {
    Scalar(f64),
    Matrix(Vec<Vec<f64>>),
}

impl CovarianceSpec {
    pub fn to_matrix(&self, d: usize) -> Result<DMatrix<f64>> {
        match self {
            CovarianceSpec::Scalar(c) => Ok(DMatrix::identity(d, d) * *c),
            CovarianceSpec::Matrix(rows) => {
                if rows.len() != d || rows.iter().any(|r| r.len() != d) {
                    return Err(Error::Dimension {
                        expected: d,
                        got: rows.len(),
                    });
                }
                Ok(DMatrix::from_fn(d, d, |i, j| rows[i][j]))
            }
        }
    }

    pub fn to_gaussian(&self, d: usize) -> Result<Gaussian> {
        let m = self.to_matrix(d)?;
        if !is_symmetric(&m, 1e-12) {
            return Err(Error::NotPositiveDefinite);
        }
        Gaussian::new(m)
    }
}

/// Initial graph of every auxiliary tie-flip run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AuxStart {
    Observed,
    Empty,
    /// The chain's previous auxiliary graph.
    Previous,
}

/// How chains see each other within a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepMode {
    /// Every chain reads the population as it was at the start of the sweep;
    /// chains update in parallel.
    Synchronous,
    /// Chains update one after another, each seeing the states already
    /// updated in this sweep.
    Sequential,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    pub variant: Variant,
    pub dr: bool,
    pub chains: usize,
    /// ADS move factor.
    pub gamma: f64,
    pub eps_cov: CovarianceSpec,
    /// Probability of the static safety proposal in the adaptive variants.
    pub beta: f64,
    pub static_cov: CovarianceSpec,
    /// Tie-flip proposals per auxiliary draw.
    pub aux_iters: usize,
    /// Interpret `aux_iters` as sweeps over all dyads.
    pub aux_sweeps: bool,
    pub aux_start: AuxStart,
    pub aux_proposal: FlipProposal,
    /// Recorded sweeps per chain.
    pub main_iters: usize,
    /// Unrecorded sweeps before `main_iters`; `None` means 20% of `main_iters`.
    pub burn_in: Option<usize>,
    /// Use the adaptive proposal during burn-in instead of ADS.
    pub adapt_during_burnin: bool,
    /// Second-stage covariance factor of the adaptive variants.
    pub dr_scale: f64,
    pub jitter: f64,
    /// Chains start at `N(0, init_sd²·I)`.
    pub init_sd: f64,
    pub seed: u64,
    pub sweep: SweepMode,
    /// Worker threads; results do not depend on it.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            variant: Variant::Ads,
            dr: false,
            chains: 6,
            gamma: 0.8,
            eps_cov: CovarianceSpec::Scalar(0.0025),
            beta: 0.01,
            static_cov: CovarianceSpec::Scalar(0.0025),
            aux_iters: 100,
            aux_sweeps: false,
            aux_start: AuxStart::Observed,
            aux_proposal: FlipProposal::Uniform,
            main_iters: 4000,
            burn_in: None,
            adapt_during_burnin: false,
            dr_scale: 0.5,
            jitter: DEFAULT_JITTER,
            init_sd: 0.1,
            seed: 0,
            sweep: SweepMode::Synchronous,
            threads: None,
        }
    }
}

impl SamplerConfig {
    pub fn algorithm(&self) -> Algorithm {
        Algorithm {
            variant: self.variant,
            dr: self.dr,
        }
    }

    pub fn set_algorithm(&mut self, a: Algorithm) {
        self.variant = a.variant;
        self.dr = a.dr;
    }

    pub fn burn_in_sweeps(&self) -> usize {
        self.burn_in.unwrap_or(self.main_iters / 5)
    }

    fn uses_ads(&self) -> bool {
        self.variant == Variant::Ads || (self.burn_in_sweeps() > 0 && !self.adapt_during_burnin)
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        if self.chains == 0 {
            return Err(Error::config("chains must be positive"));
        }
        if self.uses_ads() && self.chains < 3 {
            return Err(Error::config("ADS proposals need at least 3 chains"));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::config("gamma must be positive"));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::config("beta must lie in [0, 1]"));
        }
        if !(self.dr_scale > 0.0 && self.dr_scale <= 1.0) {
            return Err(Error::config("dr_scale must lie in (0, 1]"));
        }
        if !(self.jitter >= 0.0 && self.jitter.is_finite()) {
            return Err(Error::config("jitter must be nonnegative"));
        }
        if !(self.init_sd >= 0.0 && self.init_sd.is_finite()) {
            return Err(Error::config("init_sd must be nonnegative"));
        }
        if self.threads == Some(0) {
            return Err(Error::config("threads must be positive"));
        }
        self.eps_cov
            .to_gaussian(d)
            .map_err(|e| Error::config(format!("eps_cov: {e}")))?;
        self.static_cov
            .to_gaussian(d)
            .map_err(|e| Error::config(format!("static_cov: {e}")))?;
        Ok(())
    }
}

/// Chain states plus the accumulators the adaptive proposals read.
#[derive(Debug, Clone)]
pub struct PopulationState {
    states: Vec<DVector<f64>>,
    vertical: Vec<RunningCovariance>,
    global: RunningCovariance,
    sweep: usize,
}

impl PopulationState {
    pub fn new(states: Vec<DVector<f64>>) -> Result<Self> {
        let d = states
            .first()
            .map(|s| s.len())
            .ok_or_else(|| Error::config("empty population"))?;
        for s in &states {
            check_dim(d, s.len())?;
        }
        Ok(PopulationState {
            vertical: vec![RunningCovariance::new(d); states.len()],
            global: RunningCovariance::new(d),
            states,
            sweep: 0,
        })
    }

    pub fn chains(&self) -> usize {
        self.states.len()
    }

    pub fn dim(&self) -> usize {
        self.global.dim()
    }

    pub fn states(&self) -> &[DVector<f64>] {
        &self.states
    }

    pub fn state(&self, h: usize) -> &DVector<f64> {
        &self.states[h]
    }

    /// Completed sweeps.
    pub fn sweep(&self) -> usize {
        self.sweep
    }

    pub fn set_state(&mut self, h: usize, theta: DVector<f64>) -> Result<()> {
        check_dim(self.dim(), theta.len())?;
        self.states[h] = theta;
        Ok(())
    }

    /// Closes a sweep, adding the states it started from to the histories.
    pub fn absorb(&mut self, snapshot: &[DVector<f64>]) -> Result<()> {
        for (h, s) in snapshot.iter().enumerate() {
            self.vertical[h].update(s)?;
            self.global.update(s)?;
        }
        self.sweep += 1;
        Ok(())
    }

    /// Empirical covariance and particle count for chain `h`, with chain
    /// `h` placed at `at` where the particle set includes current states.
    pub fn particle_covariance(&self, variant: Variant, h: usize, at: &DVector<f64>) -> Option<(DMatrix<f64>, usize)> {
        match variant {
            Variant::Ads => None,
            Variant::Vertical => Some((self.vertical[h].covariance(), self.vertical[h].count())),
            Variant::Rectangular => Some((self.global.covariance(), self.global.count())),
            Variant::Horizontal => {
                let mut pts = self.states.clone();
                pts[h] = at.clone();
                batch_covariance(&pts).ok().map(|c| (c, pts.len()))
            }
        }
    }

    /// Two distinct chains other than `h`, uniformly at random.
    fn pick_pair<R: Rng + ?Sized>(&self, h: usize, rng: &mut R) -> Result<(usize, usize)> {
        let n = self.chains();
        if n < 3 {
            return Err(Error::config("ADS proposals need at least 3 chains"));
        }
        let skip = |k: usize| if k >= h { k + 1 } else { k };
        let a = rng.random_range(0..n - 1);
        let mut b = rng.random_range(0..n - 2);
        if b >= a {
            b += 1;
        }
        Ok((skip(a), skip(b)))
    }
}

/// `θ₁ = θ^h + γ(θ^{h₁} - θ^{h₂}) + ε`, returning the chain pair.
pub fn ads_propose<R: Rng + ?Sized>(
    pop: &PopulationState,
    h: usize,
    gamma: f64,
    eps: &Gaussian,
    rng: &mut R,
) -> Result<(DVector<f64>, (usize, usize))> {
    check_dim(pop.dim(), eps.dim())?;
    let pair = pop.pick_pair(h, rng)?;
    let shift = (pop.state(pair.0) - pop.state(pair.1)) * gamma;
    Ok((pop.state(h) + shift + eps.sample(rng), pair))
}

/// Draw from the adaptive proposal of chain `h`, with its counters.
pub fn adaptive_propose<R: Rng + ?Sized>(
    variant: Variant,
    pop: &PopulationState,
    h: usize,
    beta: f64,
    static_cov: &Gaussian,
    jitter: f64,
    rng: &mut R,
) -> (DVector<f64>, AcceptanceCounts) {
    let walk = WalkMixture::build(variant, pop, h, pop.state(h), beta, static_cov, jitter);
    let mut counts = AcceptanceCounts::default();
    let step = walk.sample(rng, &mut counts);
    (pop.state(h) + step, counts)
}

/// `2θ - θ₁`, the centre of the antithetic ADS second stage.
pub fn antithetic_second(theta: &DVector<f64>, theta1: &DVector<f64>) -> DVector<f64> {
    theta * 2.0 - theta1
}

/// Log first-stage exchange acceptance. `s_obs`, `s_aux` are the statistics
/// of the observed graph and of the auxiliary draw at `θ₁`;
/// `log_h_fwd = log h(θ₁|θ)`, `log_h_rev = log h(θ|θ₁)`.
pub fn aea_accept_stage1(
    prior: &GaussianPrior,
    theta: &DVector<f64>,
    theta1: &DVector<f64>,
    s_obs: &DVector<f64>,
    s_aux: &DVector<f64>,
    log_h_fwd: f64,
    log_h_rev: f64,
) -> Result<f64> {
    let d = prior.dim();
    for v in [theta, theta1, s_obs, s_aux] {
        check_dim(d, v.len())?;
    }
    let num = s_obs.dot(theta1) + prior.log_density_unchecked(theta1) + log_h_rev + s_aux.dot(theta);
    let den = s_obs.dot(theta) + prior.log_density_unchecked(theta) + log_h_fwd + s_aux.dot(theta1);
    Ok(clamp_log_ratio(num - den))
}

fn clamp_log_ratio(x: f64) -> f64 {
    if x.is_nan() {
        f64::NEG_INFINITY
    } else {
        x.min(0.0)
    }
}

/// Inputs of the second-stage exchange acceptance after a first-stage
/// rejection of `θ₁`.
#[derive(Debug, Clone, Copy)]
pub struct Stage2Terms<'a> {
    pub theta: &'a DVector<f64>,
    pub theta1: &'a DVector<f64>,
    pub theta2: &'a DVector<f64>,
    pub s_obs: &'a DVector<f64>,
    /// Statistics of the auxiliary draw at `θ₂`.
    pub s_aux2: &'a DVector<f64>,
    /// `log h₁(θ₁|θ)`
    pub log_h1_fwd: f64,
    /// `log h₁(θ₁|θ₂)`
    pub log_h1_rev: f64,
    /// `log h₂(θ₂|θ,θ₁)`
    pub log_h2_fwd: f64,
    /// `log h₂(θ|θ₂,θ₁)`
    pub log_h2_rev: f64,
    /// `log α₁(θ,θ₁)`
    pub log_alpha1_fwd: f64,
    /// `log α₁(θ₂,θ₁)`, with the same auxiliary draw as the forward value.
    pub log_alpha1_rev: f64,
}

/// Log second-stage exchange acceptance; `-∞` when `α₁(θ₂,θ₁) = 1`.
pub fn aea_accept_stage2(prior: &GaussianPrior, t: &Stage2Terms<'_>) -> Result<f64> {
    let d = prior.dim();
    for v in [t.theta, t.theta1, t.theta2, t.s_obs, t.s_aux2] {
        check_dim(d, v.len())?;
    }
    if t.log_alpha1_rev >= 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    let num = t.s_obs.dot(t.theta2)
        + prior.log_density_unchecked(t.theta2)
        + t.log_h1_rev
        + t.log_h2_rev
        + t.s_aux2.dot(t.theta)
        + log1m_exp(t.log_alpha1_rev);
    let den = t.s_obs.dot(t.theta)
        + prior.log_density_unchecked(t.theta)
        + t.log_h1_fwd
        + t.log_h2_fwd
        + t.s_aux2.dot(t.theta2)
        + log1m_exp(t.log_alpha1_fwd);
    Ok(clamp_log_ratio(num - den))
}

/// Mixture `β·N(0, static) + (1-β)·N(0, adaptive)`, or the static part
/// alone when no usable adaptive covariance exists.
#[derive(Debug, Clone)]
struct WalkMixture {
    beta: f64,
    fallback: Gaussian,
    adaptive: Option<Gaussian>,
}

impl WalkMixture {
    fn build(
        variant: Variant,
        pop: &PopulationState,
        h: usize,
        at: &DVector<f64>,
        beta: f64,
        static_cov: &Gaussian,
        jitter: f64,
    ) -> Self {
        let adaptive = pop
            .particle_covariance(variant, h, at)
            .filter(|(cov, count)| is_usable(cov, *count))
            .and_then(|(cov, _)| scale_proposal(&cov, pop.dim(), jitter).ok());
        WalkMixture {
            beta,
            fallback: static_cov.clone(),
            adaptive,
        }
    }

    fn scaled(&self, factor: f64) -> Self {
        WalkMixture {
            beta: self.beta,
            fallback: self.fallback.scaled(factor),
            adaptive: self.adaptive.as_ref().map(|g| g.scaled(factor)),
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R, counts: &mut AcceptanceCounts) -> DVector<f64> {
        let u: f64 = rng.random();
        if u < self.beta {
            counts.safety_draws += 1;
            return self.fallback.sample(rng);
        }
        match &self.adaptive {
            Some(g) => g.sample(rng),
            None => {
                counts.safety_draws += 1;
                counts.degenerate_fallbacks += 1;
                self.fallback.sample(rng)
            }
        }
    }

    fn log_density(&self, offset: &DVector<f64>) -> f64 {
        match &self.adaptive {
            None => self.fallback.log_density(offset),
            Some(g) => log_add_exp(
                self.beta.ln() + self.fallback.log_density(offset),
                (1.0 - self.beta).ln() + g.log_density(offset),
            ),
        }
    }
}

/// Stage-1 proposal of one chain within one sweep.
enum Proposal {
    /// `±shift` with equal probability, plus `N(0, eps)`; conditioned on the
    /// unordered chain pair, so symmetric.
    Ads {
        shift: DVector<f64>,
    },
    Walk,
}

/// Auxiliary statistic draws `s(y₁)`, `y₁ ~ p(·|θ)`.
#[derive(Debug, Clone)]
pub enum Auxiliary {
    TieFlip {
        sampler: TieFlip,
        start: Graph,
        start_stats: DVector<f64>,
        iters: usize,
        /// Continue from the chain's previous auxiliary graph.
        carry: bool,
    },
    /// Exact draws by enumerating every graph; small node sets only.
    Exact(GraphEnumeration),
}

impl Auxiliary {
    pub fn tie_flip(
        model: &ModelSpec,
        observed: &Graph,
        start: AuxStart,
        proposal: FlipProposal,
        iters: usize,
    ) -> Result<Self> {
        let sampler = TieFlip::new(model, observed)?.with_proposal(proposal);
        let first = match start {
            AuxStart::Observed | AuxStart::Previous => observed.clone(),
            AuxStart::Empty => observed.cleared(),
        };
        let start_stats = sampler.model().evaluate(&first);
        Ok(Auxiliary::TieFlip {
            sampler,
            start: first,
            start_stats,
            iters,
            carry: start == AuxStart::Previous,
        })
    }

    pub fn exact(model: &ModelSpec, observed: &Graph) -> Result<Self> {
        Ok(Auxiliary::Exact(GraphEnumeration::new(model, observed)?))
    }

    /// Statistics of one draw at `theta`. `slot` holds the chain's previous
    /// auxiliary graph when draws continue from it.
    pub fn draw<R: Rng + ?Sized>(
        &self,
        theta: &DVector<f64>,
        slot: &mut Option<(Graph, DVector<f64>)>,
        rng: &mut R,
    ) -> DVector<f64> {
        match self {
            Auxiliary::TieFlip {
                sampler,
                start,
                start_stats,
                iters,
                carry,
            } => {
                let (mut g, mut stats) = match slot.take() {
                    Some(prev) if *carry => prev,
                    _ => (start.clone(), start_stats.clone()),
                };
                sampler.run(theta, &mut g, &mut stats, *iters, rng);
                if *carry {
                    *slot = Some((g, stats.clone()));
                }
                stats
            }
            Auxiliary::Exact(e) => e.stats(e.sample_index(theta, rng)).clone(),
        }
    }
}

/// Stream-separated generator for chain `h`; stream 0 seeds initial states.
fn chain_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Mutable per-chain state that is not part of the population.
#[derive(Debug, Clone)]
struct ChainWorker {
    rng: ChaCha8Rng,
    slot: Option<(Graph, DVector<f64>)>,
}

/// Everything fixed during a run.
#[derive(Debug, Clone)]
pub struct PopulationSampler {
    config: SamplerConfig,
    prior: GaussianPrior,
    names: Vec<String>,
    s_obs: DVector<f64>,
    aux: Auxiliary,
    eps: Gaussian,
    fallback: Gaussian,
}

impl PopulationSampler {
    /// Sampler with tie-flip auxiliary draws.
    pub fn new(config: SamplerConfig, model: &ModelSpec, prior: GaussianPrior, observed: &Graph) -> Result<Self> {
        let iters = if config.aux_sweeps {
            config.aux_iters * observed.dyad_count()
        } else {
            config.aux_iters
        };
        let aux = Auxiliary::tie_flip(model, observed, config.aux_start, config.aux_proposal, iters)?;
        Self::with_auxiliary(config, model, prior, observed, aux)
    }

    /// Sampler with exact auxiliary draws from full enumeration.
    pub fn exact(config: SamplerConfig, model: &ModelSpec, prior: GaussianPrior, observed: &Graph) -> Result<Self> {
        let aux = Auxiliary::exact(model, observed)?;
        Self::with_auxiliary(config, model, prior, observed, aux)
    }

    pub fn with_auxiliary(
        config: SamplerConfig,
        model: &ModelSpec,
        prior: GaussianPrior,
        observed: &Graph,
        aux: Auxiliary,
    ) -> Result<Self> {
        let d = model.dim();
        check_dim(d, prior.dim())?;
        config.validate(d)?;
        Ok(PopulationSampler {
            eps: config.eps_cov.to_gaussian(d)?,
            fallback: config.static_cov.to_gaussian(d)?,
            s_obs: model.stat_vector(observed)?,
            names: model.names(),
            config,
            prior,
            aux,
        })
    }

    pub fn config(&self) -> &SamplerConfig {
        &self.config
    }

    pub fn observed_stats(&self) -> &DVector<f64> {
        &self.s_obs
    }

    pub fn initial_population(&self) -> Result<PopulationState> {
        let d = self.names.len();
        let mut rng = chain_rng(self.config.seed, 0);
        let init = Gaussian::isotropic(d, 1.0)?;
        let states = (0..self.config.chains)
            .map(|_| init.sample(&mut rng) * self.config.init_sd)
            .collect();
        PopulationState::new(states)
    }

    pub fn run(&self) -> Result<SampleStore> {
        match self.config.threads {
            Some(n) => rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::config(format!("thread pool: {e}")))?
                .install(|| self.run_inner()),
            None => self.run_inner(),
        }
    }

    fn run_inner(&self) -> Result<SampleStore> {
        let cfg = &self.config;
        let mut pop = self.initial_population()?;
        let mut workers: Vec<ChainWorker> = (0..cfg.chains)
            .map(|h| ChainWorker {
                rng: chain_rng(cfg.seed, h as u64 + 1),
                slot: None,
            })
            .collect();
        let mut store = SampleStore::new(self.names.clone(), cfg.chains);
        let burn_in = cfg.burn_in_sweeps();
        let total = if cfg.main_iters == 0 {
            0
        } else {
            burn_in + cfg.main_iters
        };

        let start = Instant::now();
        for t in 0..total {
            let variant = if t >= burn_in || cfg.adapt_during_burnin {
                cfg.variant
            } else {
                Variant::Ads
            };
            let snapshot = pop.states().to_vec();
            let mut counts = AcceptanceCounts::default();
            match cfg.sweep {
                SweepMode::Synchronous => {
                    let pop_ref = &pop;
                    let results: Vec<Result<(DVector<f64>, AcceptanceCounts)>> = workers
                        .par_iter_mut()
                        .enumerate()
                        .map(|(h, w)| self.update_chain(pop_ref, h, variant, w))
                        .collect();
                    for (h, r) in results.into_iter().enumerate() {
                        let (theta, c) = r?;
                        counts.merge(&c);
                        pop.set_state(h, theta)?;
                    }
                }
                SweepMode::Sequential => {
                    for (h, w) in workers.iter_mut().enumerate() {
                        let (theta, c) = self.update_chain(&pop, h, variant, w)?;
                        counts.merge(&c);
                        pop.set_state(h, theta)?;
                    }
                }
            }
            pop.absorb(&snapshot)?;
            if t >= burn_in {
                store.counts.merge(&counts);
                for (h, s) in pop.states().iter().enumerate() {
                    store.push(h, s.clone());
                }
            } else {
                store.burn_in_counts.merge(&counts);
            }
        }
        store.wall_time = start.elapsed().as_secs_f64();
        Ok(store)
    }

    /// One (possibly two-stage) exchange update of chain `h`.
    fn update_chain(
        &self,
        pop: &PopulationState,
        h: usize,
        variant: Variant,
        worker: &mut ChainWorker,
    ) -> Result<(DVector<f64>, AcceptanceCounts)> {
        let cfg = &self.config;
        let ChainWorker { rng, slot } = worker;
        let theta = pop.state(h);
        let mut counts = AcceptanceCounts::default();
        let walk_at = |x: &DVector<f64>| WalkMixture::build(variant, pop, h, x, cfg.beta, &self.fallback, cfg.jitter);

        let (proposal, theta1) = match variant {
            Variant::Ads => {
                let (a, b) = pop.pick_pair(h, rng)?;
                let shift = (pop.state(a) - pop.state(b)) * cfg.gamma;
                let theta1 = theta + &shift + self.eps.sample(rng);
                (Proposal::Ads { shift }, theta1)
            }
            _ => {
                let step = walk_at(theta).sample(rng, &mut counts);
                (Proposal::Walk, theta + step)
            }
        };
        let h1 = |to: &DVector<f64>, from: &DVector<f64>| -> f64 {
            match &proposal {
                Proposal::Ads { shift } => {
                    let off = to - from;
                    log_add_exp(
                        self.eps.log_density(&(&off - shift)),
                        self.eps.log_density(&(&off + shift)),
                    ) - std::f64::consts::LN_2
                }
                Proposal::Walk => walk_at(from).log_density(&(to - from)),
            }
        };

        counts.stage1_attempts += 1;
        let s1 = self.aux.draw(&theta1, slot, rng);
        let log_a1 = aea_accept_stage1(
            &self.prior,
            theta,
            &theta1,
            &self.s_obs,
            &s1,
            h1(&theta1, theta),
            h1(theta, &theta1),
        )?;
        if rng.random::<f64>() < log_a1.exp() {
            counts.stage1_accepts += 1;
            return Ok((theta1, counts));
        }
        if !cfg.dr {
            return Ok((theta.clone(), counts));
        }

        counts.stage2_attempts += 1;
        let (theta2, log_h2_fwd, log_h2_rev) = match &proposal {
            Proposal::Ads { .. } => {
                let centre = antithetic_second(theta, &theta1);
                let theta2 = &centre + self.eps.sample(rng);
                let fwd = self.eps.log_density(&(&theta2 - &centre));
                let rev = self.eps.log_density(&(theta - antithetic_second(&theta2, &theta1)));
                (theta2, fwd, rev)
            }
            Proposal::Walk => {
                let here = walk_at(theta).scaled(cfg.dr_scale);
                let theta2 = theta + here.sample(rng, &mut counts);
                let fwd = here.log_density(&(&theta2 - theta));
                let rev = walk_at(&theta2).scaled(cfg.dr_scale).log_density(&(theta - &theta2));
                (theta2, fwd, rev)
            }
        };
        let log_h1_rev = h1(&theta1, &theta2);
        let log_a1_rev = aea_accept_stage1(
            &self.prior,
            &theta2,
            &theta1,
            &self.s_obs,
            &s1,
            log_h1_rev,
            h1(&theta2, &theta1),
        )?;
        if log_a1_rev >= 0.0 {
            counts.stage2_auto_rejects += 1;
            return Ok((theta.clone(), counts));
        }
        let s2 = self.aux.draw(&theta2, slot, rng);
        let terms = Stage2Terms {
            theta,
            theta1: &theta1,
            theta2: &theta2,
            s_obs: &self.s_obs,
            s_aux2: &s2,
            log_h1_fwd: h1(&theta1, theta),
            log_h1_rev,
            log_h2_fwd,
            log_h2_rev,
            log_alpha1_fwd: log_a1,
            log_alpha1_rev: log_a1_rev,
        };
        let log_a2 = aea_accept_stage2(&self.prior, &terms)?;
        if rng.random::<f64>() < log_a2.exp() {
            counts.stage2_accepts += 1;
            return Ok((theta2, counts));
        }
        Ok((theta.clone(), counts))
    }
}

/// Runs the population sampler with tie-flip auxiliary draws.
pub fn run(config: &SamplerConfig, model: &ModelSpec, prior: &GaussianPrior, observed: &Graph) -> Result<SampleStore> {
    PopulationSampler::new(config.clone(), model, prior.clone(), observed)?.run()
}

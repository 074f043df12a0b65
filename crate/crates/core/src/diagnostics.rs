//! Autocorrelation, effective sample size and posterior summaries.

use std::fmt::Write as _;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Autocorrelation truncation threshold for the ESS sum.
pub const ESS_CUTOFF: f64 = 0.05;

/// Per-stage proposal and acceptance counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AcceptanceCounts {
    pub stage1_attempts: u64,
    pub stage1_accepts: u64,
    pub stage2_attempts: u64,
    pub stage2_accepts: u64,
    /// Second-stage moves rejected outright because the reverse first-stage
    /// acceptance was 1.
    pub stage2_auto_rejects: u64,
    /// Draws from the static safety proposal (β mixture or degeneracy).
    pub safety_draws: u64,
    /// Safety draws forced by an unusable adaptive covariance.
    pub degenerate_fallbacks: u64,
}

impl AcceptanceCounts {
    pub fn merge(&mut self, other: &AcceptanceCounts) {
        self.stage1_attempts += other.stage1_attempts;
        self.stage1_accepts += other.stage1_accepts;
        self.stage2_attempts += other.stage2_attempts;
        self.stage2_accepts += other.stage2_accepts;
        self.stage2_auto_rejects += other.stage2_auto_rejects;
        self.safety_draws += other.safety_draws;
        self.degenerate_fallbacks += other.degenerate_fallbacks;
    }

    pub fn rates(&self) -> AcceptanceRates {
        let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        AcceptanceRates {
            stage1: ratio(self.stage1_accepts, self.stage1_attempts),
            stage2: ratio(self.stage2_accepts, self.stage2_attempts),
            overall: ratio(self.stage1_accepts + self.stage2_accepts, self.stage1_attempts),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceRates {
    pub stage1: f64,
    /// Fraction of second-stage attempts accepted.
    pub stage2: f64,
    /// Fraction of sweeps that moved, either stage.
    pub overall: f64,
}

/// Post-burn-in draws for every chain.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleStore {
    names: Vec<String>,
    chains: Vec<Vec<DVector<f64>>>,
    pub counts: AcceptanceCounts,
    pub burn_in_counts: AcceptanceCounts,
    /// Seconds spent in the sampling loop.
    pub wall_time: f64,
}

impl SampleStore {
    pub fn new(names: Vec<String>, chains: usize) -> Self {
        SampleStore {
            names,
            chains: vec![Vec::new(); chains],
            counts: AcceptanceCounts::default(),
            burn_in_counts: AcceptanceCounts::default(),
            wall_time: 0.0,
        }
    }

    pub fn push(&mut self, chain: usize, theta: DVector<f64>) {
        self.chains[chain].push(theta);
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn chain_count(&self) -> usize {
        self.chains.len()
    }

    /// Total number of pooled samples `S`.
    pub fn len(&self) -> usize {
        self.chains.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn chain(&self, c: usize) -> &[DVector<f64>] {
        &self.chains[c]
    }

    /// Chain-concatenated draws.
    pub fn pooled(&self) -> impl Iterator<Item = &DVector<f64>> {
        self.chains.iter().flatten()
    }

    /// Parameter `p` over the chain-concatenated draws.
    pub fn column(&self, p: usize) -> Vec<f64> {
        self.pooled().map(|t| t[p]).collect()
    }

    pub fn chain_column(&self, c: usize, p: usize) -> Vec<f64> {
        self.chains[c].iter().map(|t| t[p]).collect()
    }
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// `ρ_0..=ρ_max_lag`, each normalised by the overall sample variance.
pub fn autocorrelation(chain: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let acf = Autocorrelation::new(chain)?;
    Ok((0..=max_lag.min(chain.len() - 1)).map(|k| acf.at(k)).collect())
}

struct Autocorrelation {
    centered: Vec<f64>,
    denom: f64,
}

impl Autocorrelation {
    fn new(chain: &[f64]) -> Result<Self> {
        if chain.len() < 2 {
            return Err(Error::TooFewSamples {
                needed: 2,
                got: chain.len(),
            });
        }
        let m = mean(chain);
        let centered: Vec<f64> = chain.iter().map(|x| x - m).collect();
        let denom: f64 = centered.iter().map(|x| x * x).sum();
        let scale = chain.iter().fold(0.0f64, |a, x| a.max(x.abs())).max(1.0);
        if denom <= (f64::EPSILON * scale).powi(2) * chain.len() as f64 {
            return Err(Error::ZeroVariance);
        }
        Ok(Autocorrelation { centered, denom })
    }

    fn at(&self, k: usize) -> f64 {
        let x = &self.centered;
        x[..x.len() - k].iter().zip(&x[k..]).map(|(a, b)| a * b).sum::<f64>() / self.denom
    }
}

/// Default autocorrelation horizon `min(S - 1, 10·√S)`.
pub fn default_max_lag(len: usize) -> usize {
    (len.saturating_sub(1)).min((10.0 * (len as f64).sqrt()) as usize)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EssEstimate {
    pub value: f64,
    /// Lag at which the autocorrelation sum was truncated.
    pub truncation_lag: usize,
    /// True when the estimate was capped at `S`.
    pub capped: bool,
}

/// `S / (1 + 2 Σ ρ_k)`, summing lags until the first `ρ_k < 0.05`.
pub fn ess_estimate(chain: &[f64]) -> Result<EssEstimate> {
    let acf = Autocorrelation::new(chain)?;
    let len = chain.len();
    let max_lag = default_max_lag(len);
    let mut sum = 0.0;
    let mut k = 1;
    while k <= max_lag {
        let rho = acf.at(k);
        if rho < ESS_CUTOFF {
            break;
        }
        sum += rho;
        k += 1;
    }
    let tau = 1.0 + 2.0 * sum;
    let raw = len as f64 / tau;
    let capped = raw > len as f64 || !raw.is_finite() || tau <= 0.0;
    Ok(EssEstimate {
        value: if capped { len as f64 } else { raw },
        truncation_lag: k,
        capped,
    })
}

pub fn ess(chain: &[f64]) -> Result<f64> {
    Ok(ess_estimate(chain)?.value)
}

/// ESS per second of sampling time.
pub fn performance(ess_value: f64, wall_time: f64) -> Result<f64> {
    if wall_time <= 0.0 || wall_time.is_nan() {
        return Err(Error::NonPositiveTime(wall_time));
    }
    Ok(ess_value / wall_time)
}

/// Posterior summary of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub parameters: Vec<String>,
    pub samples: usize,
    pub chains: usize,
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
    /// Pearson correlations; `None` when some parameter has zero variance.
    pub correlation: Option<Vec<Vec<f64>>>,
    pub degenerate: bool,
    /// ESS of the chain-concatenated sequence, per parameter.
    pub ess: Vec<Option<f64>>,
    /// Sum of per-chain ESS values, per parameter.
    pub ess_chain_sum: Vec<Option<f64>>,
    pub ess_capped: Vec<bool>,
    pub mean_ess: Option<f64>,
    /// `ess / wall_time` per parameter.
    pub performance: Vec<Option<f64>>,
    pub mean_performance: Option<f64>,
    pub acceptance: AcceptanceRates,
    pub counts: AcceptanceCounts,
    pub wall_time: f64,
}

pub fn summarize(store: &SampleStore) -> Result<RunReport> {
    let s = store.len();
    if s < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: s });
    }
    let d = store.dim();
    let columns: Vec<Vec<f64>> = (0..d).map(|p| store.column(p)).collect();
    let means: Vec<f64> = columns.iter().map(|c| mean(c)).collect();
    let sds: Vec<f64> = columns
        .iter()
        .zip(&means)
        .map(|(c, m)| (c.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (s - 1) as f64).sqrt())
        .collect();
    let degenerate = sds.iter().any(|&v| v == 0.0 || !v.is_finite());
    let correlation = (!degenerate).then(|| {
        (0..d)
            .map(|a| {
                (0..d)
                    .map(|b| {
                        if a == b {
                            return 1.0;
                        }
                        let cov = columns[a]
                            .iter()
                            .zip(&columns[b])
                            .map(|(x, y)| (x - means[a]) * (y - means[b]))
                            .sum::<f64>()
                            / (s - 1) as f64;
                        (cov / (sds[a] * sds[b])).clamp(-1.0, 1.0)
                    })
                    .collect()
            })
            .collect()
    });

    let mut ess_pooled = Vec::with_capacity(d);
    let mut ess_sum = Vec::with_capacity(d);
    let mut capped = Vec::with_capacity(d);
    for (p, col) in columns.iter().enumerate() {
        match ess_estimate(col) {
            Ok(e) => {
                ess_pooled.push(Some(e.value));
                capped.push(e.capped);
            }
            Err(_) => {
                ess_pooled.push(None);
                capped.push(false);
            }
        }
        let per_chain: Option<f64> = (0..store.chain_count())
            .filter(|&c| !store.chain(c).is_empty())
            .map(|c| ess(&store.chain_column(c, p)).ok())
            .sum();
        ess_sum.push(per_chain);
    }
    let mean_ess = ess_pooled.iter().copied().sum::<Option<f64>>().map(|t| t / d as f64);
    let perf = |e: Option<f64>| e.and_then(|v| performance(v, store.wall_time).ok());
    Ok(RunReport {
        parameters: store.names().to_vec(),
        samples: s,
        chains: store.chain_count(),
        mean: means,
        sd: sds,
        correlation,
        degenerate,
        performance: ess_pooled.iter().map(|&e| perf(e)).collect(),
        mean_performance: perf(mean_ess),
        ess: ess_pooled,
        ess_chain_sum: ess_sum,
        ess_capped: capped,
        mean_ess,
        acceptance: store.counts.rates(),
        counts: store.counts,
        wall_time: store.wall_time,
    })
}

impl RunReport {
    /// Aligned-column text rendering.
    pub fn to_text(&self) -> String {
        let fmt_opt = |v: Option<f64>, prec: usize| v.map_or("-".to_string(), |x| format!("{x:.prec$}"));
        let width = self.parameters.iter().map(String::len).max().unwrap_or(0).max(9);
        let mut out = String::new();
        writeln!(
            out,
            "samples {}  chains {}  wall time {:.3}s",
            self.samples, self.chains, self.wall_time
        )
        .unwrap();
        writeln!(
            out,
            "acceptance: stage1 {:.3}  stage2 {:.3}  overall {:.3}",
            self.acceptance.stage1, self.acceptance.stage2, self.acceptance.overall
        )
        .unwrap();
        writeln!(out).unwrap();
        writeln!(
            out,
            "{:<width$} {:>10} {:>10} {:>10} {:>10} {:>12}",
            "parameter", "mean", "sd", "ess", "ess(chain)", "ess/sec"
        )
        .unwrap();
        for p in 0..self.parameters.len() {
            writeln!(
                out,
                "{:<width$} {:>10.4} {:>10.4} {:>10} {:>10} {:>12}",
                self.parameters[p],
                self.mean[p],
                self.sd[p],
                fmt_opt(self.ess[p], 1),
                fmt_opt(self.ess_chain_sum[p], 1),
                fmt_opt(self.performance[p], 2),
            )
            .unwrap();
        }
        writeln!(out).unwrap();
        match &self.correlation {
            Some(c) => {
                writeln!(out, "posterior correlation").unwrap();
                for (p, row) in c.iter().enumerate() {
                    let cells: Vec<String> = row.iter().map(|v| format!("{v:>7.3}")).collect();
                    writeln!(out, "{:<width$} {}", self.parameters[p], cells.join(" ")).unwrap();
                }
            }
            None => writeln!(out, "posterior correlation: degenerate (zero-variance parameter)").unwrap(),
        }
        out
    }
}

/// Gaussian kernel density estimate on an even grid, Silverman bandwidth.
pub fn density(chain: &[f64], points: usize) -> Result<Vec<(f64, f64)>> {
    if chain.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: chain.len(),
        });
    }
    let n = chain.len() as f64;
    let m = mean(chain);
    let sd = (chain.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    if sd == 0.0 {
        return Err(Error::ZeroVariance);
    }
    let bw = 1.06 * sd * n.powf(-0.2);
    let lo = chain.iter().cloned().fold(f64::INFINITY, f64::min) - 3.0 * bw;
    let hi = chain.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 3.0 * bw;
    let norm = 1.0 / (n * bw * (2.0 * std::f64::consts::PI).sqrt());
    Ok((0..points)
        .map(|k| {
            let x = lo + (hi - lo) * k as f64 / (points - 1).max(1) as f64;
            let f = chain.iter().map(|c| (-0.5 * ((x - c) / bw).powi(2)).exp()).sum::<f64>() * norm;
            (x, f)
        })
        .collect())
}

//! ERGM sufficient statistics and their single-dyad change scores.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::graph::Graph;

/// One network statistic. Decay parameters are fixed at construction.
#[derive(Debug, Clone, PartialEq)]
pub enum Statistic {
    Edges,
    KStar(u32),
    Gwesp(f64),
    Gwd(f64),
    NodeFactor { attribute: String, level: String },
}

impl Statistic {
    /// Decay used when `gwesp` or `gwd` is given without an argument.
    pub const DEFAULT_DECAY: f64 = std::f64::consts::LN_2;

    /// Filesystem- and column-friendly name, e.g. `kstar2`, `nodefactor.grade.8`.
    pub fn slug(&self) -> String {
        match self {
            Statistic::Edges => "edges".into(),
            Statistic::KStar(k) => format!("kstar{k}"),
            Statistic::Gwesp(phi) => format!("gwesp.{phi}"),
            Statistic::Gwd(phi) => format!("gwd.{phi}"),
            Statistic::NodeFactor { attribute, level } => format!("nodefactor.{attribute}.{level}"),
        }
    }

    pub fn bind(&self, g: &Graph) -> Result<BoundStatistic> {
        Ok(match self {
            Statistic::Edges => BoundStatistic::Edges,
            Statistic::KStar(k) => BoundStatistic::KStar(*k as usize),
            Statistic::Gwesp(phi) => BoundStatistic::Gwesp(decay_weights(*phi, g.node_count())),
            Statistic::Gwd(phi) => BoundStatistic::Gwd(decay_weights(*phi, g.node_count())),
            Statistic::NodeFactor { attribute, level } => {
                let values = g
                    .attribute(attribute)
                    .ok_or_else(|| Error::UnknownAttribute(attribute.clone()))?;
                BoundStatistic::NodeFactor(values.iter().map(|v| v == level).collect())
            }
        })
    }

    pub fn evaluate(&self, g: &Graph) -> Result<f64> {
        Ok(self.bind(g)?.evaluate(g))
    }

    /// `s(g with y_ij = 1) - s(g with y_ij = 0)`, whatever the current tie state.
    pub fn change_score(&self, g: &Graph, i: usize, j: usize) -> Result<f64> {
        g.check_dyad(i, j)?;
        Ok(self.bind(g)?.change_score(g, i, j))
    }
}

impl fmt::Display for Statistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Statistic::Edges => write!(f, "edges"),
            Statistic::KStar(k) => write!(f, "kstar({k})"),
            Statistic::Gwesp(phi) => write!(f, "gwesp({phi})"),
            Statistic::Gwd(phi) => write!(f, "gwd({phi})"),
            Statistic::NodeFactor { attribute, level } => write!(f, "nodefactor({attribute},{level})"),
        }
    }
}

impl FromStr for Statistic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::BadStatistic(s.to_string());
        let s_trim = s.trim();
        let (name, args) = match s_trim.find('(') {
            Some(open) => {
                let close = s_trim.strip_suffix(')').ok_or_else(bad)?;
                (&s_trim[..open], Some(&close[open + 1..]))
            }
            None => (s_trim, None),
        };
        let args: Vec<&str> = args
            .map(|a| a.split(',').map(str::trim).filter(|x| !x.is_empty()).collect())
            .unwrap_or_default();
        let decay = |args: &[&str]| -> Result<f64> {
            let phi = match args {
                [] => Statistic::DEFAULT_DECAY,
                [v] => v.parse::<f64>().map_err(|_| bad())?,
                _ => return Err(bad()),
            };
            if phi.is_finite() && phi > 0.0 {
                Ok(phi)
            } else {
                Err(bad())
            }
        };
        match name.trim().to_ascii_lowercase().as_str() {
            "edges" if args.is_empty() => Ok(Statistic::Edges),
            "kstar" => match args.as_slice() {
                [k] => {
                    let k: u32 = k.parse().map_err(|_| bad())?;
                    if k >= 2 {
                        Ok(Statistic::KStar(k))
                    } else {
                        Err(bad())
                    }
                }
                _ => Err(bad()),
            },
            "gwesp" => Ok(Statistic::Gwesp(decay(&args)?)),
            "gwd" | "gwdegree" => Ok(Statistic::Gwd(decay(&args)?)),
            "nodefactor" => match args.as_slice() {
                [attribute, level] => Ok(Statistic::NodeFactor {
                    attribute: attribute.to_string(),
                    level: level.to_string(),
                }),
                _ => Err(bad()),
            },
            _ => Err(bad()),
        }
    }
}

impl Serialize for Statistic {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Statistic {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// `w[k] = e^phi (1 - (1 - e^-phi)^k)` for `k = 0..=n`; `w[0] = 0`.
fn decay_weights(phi: f64, n: usize) -> Vec<f64> {
    let r = 1.0 - (-phi).exp();
    let scale = phi.exp();
    let mut out = Vec::with_capacity(n + 2);
    let mut pow = 1.0;
    for _ in 0..n + 2 {
        out.push(scale * (1.0 - pow));
        pow *= r;
    }
    out
}

/// Exact binomial coefficient as a float. Exact for every value that fits in u128.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        match acc.checked_mul((n - i) as u128) {
            Some(v) => acc = v / (i as u128 + 1),
            None => {
                let mut f = acc as f64;
                for m in i..k {
                    f = f * (n - m) as f64 / (m + 1) as f64;
                }
                return f;
            }
        }
    }
    acc as f64
}

/// A statistic resolved against a node set: attribute levels are looked up
/// and decay weights precomputed, so evaluation needs no further lookups.
#[derive(Debug, Clone)]
pub enum BoundStatistic {
    Edges,
    KStar(usize),
    Gwesp(Vec<f64>),
    Gwd(Vec<f64>),
    NodeFactor(Vec<bool>),
}

impl BoundStatistic {
    pub fn evaluate(&self, g: &Graph) -> f64 {
        let n = g.node_count();
        match self {
            BoundStatistic::Edges => g.edge_count() as f64,
            BoundStatistic::KStar(k) => (0..n).map(|i| binomial(g.degree_unchecked(i), *k)).sum(),
            BoundStatistic::Gwesp(w) => g.edges().map(|(i, j)| w[g.shared_partners_unchecked(i, j)]).sum(),
            BoundStatistic::Gwd(w) => (0..n).map(|i| w[g.degree_unchecked(i)]).sum(),
            BoundStatistic::NodeFactor(ind) => g.edges().map(|(i, j)| (ind[i] as u32 + ind[j] as u32) as f64).sum(),
        }
    }

    /// Add-edge change score. Caller guarantees `i != j`, both in range.
    #[inline]
    pub fn change_score(&self, g: &Graph, i: usize, j: usize) -> f64 {
        let present = g.has_edge(i, j) as usize;
        match self {
            BoundStatistic::Edges => 1.0,
            BoundStatistic::KStar(k) => {
                let di = g.degree_unchecked(i) - present;
                let dj = g.degree_unchecked(j) - present;
                binomial(di, k - 1) + binomial(dj, k - 1)
            }
            BoundStatistic::Gwesp(w) => {
                // the new tie itself, plus one extra partner on every tie
                // (i,k) and (j,k) closed into a triangle by it
                let mut delta = w[g.shared_partners_unchecked(i, j)];
                g.for_each_common_neighbor(i, j, |k| {
                    let sik = g.shared_partners_unchecked(i, k) - present;
                    let sjk = g.shared_partners_unchecked(j, k) - present;
                    delta += w[sik + 1] - w[sik] + w[sjk + 1] - w[sjk];
                });
                delta
            }
            BoundStatistic::Gwd(w) => {
                let di = g.degree_unchecked(i) - present;
                let dj = g.degree_unchecked(j) - present;
                w[di + 1] - w[di] + w[dj + 1] - w[dj]
            }
            BoundStatistic::NodeFactor(ind) => (ind[i] as u32 + ind[j] as u32) as f64,
        }
    }
}

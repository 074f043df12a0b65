//! The batch commands behind the command-line tool: a single fit, a
//! replicated comparison of algorithms and forward simulation from the model.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::data::write_edge_list;
use crate::diagnostics::{autocorrelation, default_max_lag, summarize, RunReport, SampleStore};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::model::TieFlip;
use crate::samplers::{run, Algorithm, AuxStart, Variant};
use crate::statistics::binomial;

/// Outcome of one fit.
#[derive(Debug, Clone)]
pub struct FitOutput {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub store: SampleStore,
    pub report: RunReport,
}

/// Contents of `report.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitReport {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub dataset: String,
    pub nodes: usize,
    pub edges: usize,
    pub observed_statistics: Vec<f64>,
    pub config: RunConfig,
    pub summary: RunReport,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn file_slug(name: &str) -> String {
    let mut out = String::new();
    for c in name.chars() {
        if c.is_ascii_alphanumeric() || c == '.' || c == '-' {
            out.push(c);
        } else if !out.ends_with('_') {
            out.push('_');
        }
    }
    out.trim_end_matches('_').to_string()
}

/// Runs `alg` (default: the configured one) with `seed` (default: the
/// configured one).
pub fn fit(cfg: &RunConfig, alg: Option<Algorithm>, seed: Option<u64>) -> Result<FitOutput> {
    let g = cfg.load_graph()?;
    cfg.validate(&g)?;
    let algorithm = alg.unwrap_or_else(|| cfg.sampler.algorithm());
    let mut sampler = cfg.sampler_for(algorithm);
    if let Some(s) = seed {
        sampler.seed = s;
    }
    sampler.validate(cfg.model.dim())?;
    let store = run(&sampler, &cfg.model, &cfg.prior()?, &g)?;
    let report = summarize(&store)?;
    Ok(FitOutput {
        algorithm,
        seed: sampler.seed,
        store,
        report,
    })
}

/// Writes `report.json`, `summary.txt`, `samples.csv` and per-parameter
/// `trace_*.csv` / `acf_*.csv` into `dir`.
pub fn write_fit(dir: &Path, cfg: &RunConfig, out: &FitOutput) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let g = cfg.load_graph()?;
    let mut effective = cfg.clone();
    effective.sampler = cfg.sampler_for(out.algorithm);
    effective.sampler.seed = out.seed;
    let report = FitReport {
        algorithm: out.algorithm,
        seed: out.seed,
        dataset: cfg.dataset.describe(),
        nodes: g.node_count(),
        edges: g.edge_count(),
        observed_statistics: cfg.model.stat_vector(&g)?.iter().copied().collect(),
        config: effective,
        summary: out.report.clone(),
    };
    write_file(&dir.join("report.json"), &serde_json::to_string_pretty(&report)?)?;

    let mut summary = format!(
        "{} on {} (seed {})\nmodel: {}\n",
        out.algorithm, report.dataset, out.seed, cfg.model
    );
    summary.push_str(&out.report.to_text());
    write_file(&dir.join("summary.txt"), &summary)?;

    let store = &out.store;
    let names = store.names();
    let path = dir.join("samples.csv");
    let mut w = create(&path)?;
    let io = |e| Error::io(&path, e);
    writeln!(w, "chain,iteration,{}", names.join(",")).map_err(io)?;
    for c in 0..store.chain_count() {
        for (t, theta) in store.chain(c).iter().enumerate() {
            let cells: Vec<String> = theta.iter().map(|v| v.to_string()).collect();
            writeln!(w, "{},{},{}", c + 1, t + 1, cells.join(",")).map_err(io)?;
        }
    }
    w.flush().map_err(io)?;

    for (p, name) in names.iter().enumerate() {
        let slug = file_slug(name);
        let mut trace = String::from("iteration");
        for c in 0..store.chain_count() {
            write!(trace, ",chain_{}", c + 1).unwrap();
        }
        trace.push('\n');
        let len = (0..store.chain_count())
            .map(|c| store.chain(c).len())
            .max()
            .unwrap_or(0);
        for t in 0..len {
            write!(trace, "{}", t + 1).unwrap();
            for c in 0..store.chain_count() {
                match store.chain(c).get(t) {
                    Some(theta) => write!(trace, ",{}", theta[p]).unwrap(),
                    None => trace.push(','),
                }
            }
            trace.push('\n');
        }
        write_file(&dir.join(format!("trace_{slug}.csv")), &trace)?;

        let column = store.column(p);
        let mut acf = String::from("lag,acf\n");
        if let Ok(rho) = autocorrelation(&column, default_max_lag(column.len())) {
            for (k, r) in rho.iter().enumerate() {
                writeln!(acf, "{k},{r}").unwrap();
            }
        }
        write_file(&dir.join(format!("acf_{slug}.csv")), &acf)?;
    }
    Ok(())
}

/// One replicate of one algorithm.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReplicateResult {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub ess: Vec<Option<f64>>,
    pub mean_ess: f64,
    pub mean_performance: f64,
    pub acceptance: f64,
    pub wall_time: f64,
    pub mean: Vec<f64>,
}

/// Per-algorithm averages over replicates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompareRow {
    pub algorithm: Algorithm,
    pub replicates: usize,
    pub mean_ess: f64,
    pub sd_ess: f64,
    pub mean_performance: f64,
    pub acceptance: f64,
    pub wall_time: f64,
}

/// Paired comparison of a delayed-rejection algorithm with its base.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SignTest {
    pub variant: Variant,
    /// Replicates where the `+DR` run had the larger mean ESS.
    pub wins: usize,
    pub pairs: usize,
    /// One-sided `P(X ≥ wins)` for `X ~ Bin(pairs, 1/2)`.
    pub p_value: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Comparison {
    pub parameters: Vec<String>,
    pub rows: Vec<CompareRow>,
    pub sign_tests: Vec<SignTest>,
    pub replicates: Vec<ReplicateResult>,
}

/// One-sided sign-test p-value `P(X ≥ wins)`, `X ~ Bin(n, 1/2)`.
pub fn sign_test_p(wins: usize, n: usize) -> f64 {
    (wins..=n).map(|k| binomial(n, k)).sum::<f64>() / 2f64.powi(n as i32)
}

/// Runs every configured algorithm `replicates` times on seeds
/// `seed, seed + 1, …`. Replicates run concurrently on `jobs` threads, each
/// sampler on its own thread.
pub fn compare(cfg: &RunConfig, replicates: usize, jobs: Option<usize>) -> Result<Comparison> {
    if replicates == 0 {
        return Err(Error::config("replicates must be at least 1"));
    }
    let g = cfg.load_graph()?;
    cfg.validate(&g)?;
    let prior = cfg.prior()?;
    let algorithms = cfg.algorithms();
    let tasks: Vec<(Algorithm, u64)> = algorithms
        .iter()
        .flat_map(|&a| (0..replicates as u64).map(move |r| (a, r)))
        .collect();
    let work = || -> Result<Vec<ReplicateResult>> {
        tasks
            .par_iter()
            .map(|&(alg, r)| {
                let mut s = cfg.sampler_for(alg);
                s.seed = cfg.sampler.seed.wrapping_add(r);
                s.threads.get_or_insert(1);
                let store = run(&s, &cfg.model, &prior, &g)?;
                let rep = summarize(&store)?;
                Ok(ReplicateResult {
                    algorithm: alg,
                    seed: s.seed,
                    ess: rep.ess.clone(),
                    mean_ess: rep.mean_ess.unwrap_or(0.0),
                    mean_performance: rep.mean_performance.unwrap_or(0.0),
                    acceptance: rep.acceptance.overall,
                    wall_time: rep.wall_time,
                    mean: rep.mean,
                })
            })
            .collect()
    };
    let results = match jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::config(format!("thread pool: {e}")))?
            .install(work)?,
        None => work()?,
    };

    let rows = algorithms
        .iter()
        .map(|&alg| {
            let reps: Vec<&ReplicateResult> = results.iter().filter(|r| r.algorithm == alg).collect();
            let n = reps.len() as f64;
            let avg = |f: &dyn Fn(&ReplicateResult) -> f64| reps.iter().map(|r| f(r)).sum::<f64>() / n;
            let mean_ess = avg(&|r| r.mean_ess);
            let sd_ess = if reps.len() > 1 {
                (reps.iter().map(|r| (r.mean_ess - mean_ess).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            CompareRow {
                algorithm: alg,
                replicates: reps.len(),
                mean_ess,
                sd_ess,
                mean_performance: avg(&|r| r.mean_performance),
                acceptance: avg(&|r| r.acceptance),
                wall_time: avg(&|r| r.wall_time),
            }
        })
        .collect();

    let mut sign_tests = Vec::new();
    for &alg in algorithms.iter().filter(|a| !a.dr) {
        let dr = Algorithm { dr: true, ..alg };
        if !algorithms.contains(&dr) {
            continue;
        }
        let ess_of = |a: Algorithm| -> Vec<f64> {
            results
                .iter()
                .filter(|r| r.algorithm == a)
                .map(|r| r.mean_ess)
                .collect()
        };
        let (base, with) = (ess_of(alg), ess_of(dr));
        let wins = base.iter().zip(&with).filter(|(b, d)| d > b).count();
        sign_tests.push(SignTest {
            variant: alg.variant,
            wins,
            pairs: base.len(),
            p_value: sign_test_p(wins, base.len()),
        });
    }

    Ok(Comparison {
        parameters: cfg.model.names(),
        rows,
        sign_tests,
        replicates: results,
    })
}

impl Comparison {
    pub fn row(&self, alg: Algorithm) -> Option<&CompareRow> {
        self.rows.iter().find(|r| r.algorithm == alg)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("algorithm,replicates,mean_ess,sd_ess,mean_performance,acceptance,wall_time\n");
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.algorithm, r.replicates, r.mean_ess, r.sd_ess, r.mean_performance, r.acceptance, r.wall_time
            )
            .unwrap();
        }
        out
    }

    pub fn replicates_csv(&self) -> String {
        let ess_cols: Vec<String> = self
            .parameters
            .iter()
            .map(|p| format!("ess_{}", file_slug(p)))
            .collect();
        let mut out = format!(
            "algorithm,seed,mean_ess,mean_performance,acceptance,wall_time,{}\n",
            ess_cols.join(",")
        );
        for r in &self.replicates {
            let ess: Vec<String> = r
                .ess
                .iter()
                .map(|e| e.map_or(String::new(), |v| v.to_string()))
                .collect();
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.algorithm,
                r.seed,
                r.mean_ess,
                r.mean_performance,
                r.acceptance,
                r.wall_time,
                ess.join(",")
            )
            .unwrap();
        }
        out
    }

    /// Blocks of at most four algorithms with ESS and performance rows.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for block in self.rows.chunks(4) {
            write!(out, "{:<22}", "").unwrap();
            for r in block {
                write!(out, "{:>12}", r.algorithm.to_string()).unwrap();
            }
            out.push('\n');
            let line = |out: &mut String, label: &str, f: &dyn Fn(&CompareRow) -> String| {
                write!(out, "{label:<22}").unwrap();
                for r in block {
                    write!(out, "{:>12}", f(r)).unwrap();
                }
                out.push('\n');
            };
            line(&mut out, "ESS", &|r| format!("{:.0}", r.mean_ess));
            line(&mut out, "ESS sd", &|r| format!("{:.0}", r.sd_ess));
            line(&mut out, "Performance (per sec)", &|r| {
                format!("{:.0}", r.mean_performance)
            });
            line(&mut out, "Acceptance", &|r| format!("{:.3}", r.acceptance));
            out.push('\n');
        }
        for t in &self.sign_tests {
            writeln!(
                out,
                "{} vs {}: DR larger in {}/{} replicates, sign test p = {:.4}",
                Algorithm {
                    variant: t.variant,
                    dr: true
                },
                Algorithm {
                    variant: t.variant,
                    dr: false
                },
                t.wins,
                t.pairs,
                t.p_value
            )
            .unwrap();
        }
        out
    }
}

/// Writes `comparison.csv`, `replicates.csv`, `comparison.txt` and
/// `comparison.json` into `dir`.
pub fn write_compare(dir: &Path, cmp: &Comparison) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_file(&dir.join("comparison.csv"), &cmp.to_csv())?;
    write_file(&dir.join("replicates.csv"), &cmp.replicates_csv())?;
    write_file(&dir.join("comparison.txt"), &cmp.to_text())?;
    write_file(&dir.join("comparison.json"), &serde_json::to_string_pretty(cmp)?)
}

/// Draws from `p(· | θ)` along one tie-flip chain.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub names: Vec<String>,
    pub graphs: Vec<Graph>,
    pub stats: Vec<DVector<f64>>,
}

impl Simulation {
    pub fn mean(&self) -> Vec<f64> {
        let n = self.stats.len().max(1) as f64;
        (0..self.names.len())
            .map(|p| self.stats.iter().map(|s| s[p]).sum::<f64>() / n)
            .collect()
    }

    pub fn stats_csv(&self) -> String {
        let mut out = format!("draw,{}\n", self.names.join(","));
        for (k, s) in self.stats.iter().enumerate() {
            let cells: Vec<String> = s.iter().map(|v| v.to_string()).collect();
            writeln!(out, "{},{}", k + 1, cells.join(",")).unwrap();
        }
        out
    }
}

/// `draws` graphs separated by `iters` tie-flip proposals (default: the
/// configured auxiliary length), after an initial run of the same length.
pub fn simulate(
    cfg: &RunConfig,
    theta: &[f64],
    draws: usize,
    iters: Option<usize>,
    seed: Option<u64>,
) -> Result<Simulation> {
    let observed = cfg.load_graph()?;
    cfg.model.bind(&observed)?;
    if theta.len() != cfg.model.dim() {
        return Err(Error::Dimension {
            expected: cfg.model.dim(),
            got: theta.len(),
        });
    }
    let theta = DVector::from_column_slice(theta);
    let sampler = TieFlip::new(&cfg.model, &observed)?.with_proposal(cfg.sampler.aux_proposal);
    let iters = iters.unwrap_or(if cfg.sampler.aux_sweeps {
        cfg.sampler.aux_iters * observed.dyad_count()
    } else {
        cfg.sampler.aux_iters
    });
    let mut g = match cfg.sampler.aux_start {
        AuxStart::Empty => observed.cleared(),
        AuxStart::Observed | AuxStart::Previous => observed.clone(),
    };
    let mut stats = sampler.model().evaluate(&g);
    let mut rng = ChaCha8Rng::seed_from_u64(seed.unwrap_or(cfg.sampler.seed));
    sampler.run(&theta, &mut g, &mut stats, iters, &mut rng);
    let mut out = Simulation {
        names: cfg.model.names(),
        graphs: Vec::with_capacity(draws),
        stats: Vec::with_capacity(draws),
    };
    for _ in 0..draws {
        sampler.run(&theta, &mut g, &mut stats, iters, &mut rng);
        out.graphs.push(g.clone());
        out.stats.push(stats.clone());
    }
    Ok(out)
}

/// Writes `stats.csv` and one `draw_<k>.tsv` edge list per draw into `dir`.
pub fn write_simulation(dir: &Path, sim: &Simulation) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_file(&dir.join("stats.csv"), &sim.stats_csv())?;
    let width = sim.graphs.len().to_string().len();
    for (k, g) in sim.graphs.iter().enumerate() {
        let path = dir.join(format!("draw_{:0width$}.tsv", k + 1));
        let mut w = create(&path)?;
        write_edge_list(g, &mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::GraphEnumeration;

    fn small(model: &str, main_iters: usize) -> RunConfig {
        RunConfig::from_json(&format!(
            r#"{{"dataset": "florentine", "model": [{model}],
                "sampler": {{"main_iters": {main_iters}, "aux_iters": 20, "seed": 3, "eps_cov": 0.025}}}}"#
        ))
        .unwrap()
    }

    #[test]
    fn slugs() {
        assert_eq!(file_slug("kstar(2)"), "kstar_2");
        assert_eq!(file_slug("nodefactor(grade,8)"), "nodefactor_grade_8");
        assert_eq!(file_slug("gwesp(0.69)"), "gwesp_0.69");
    }

    #[test]
    fn sign_test_values() {
        assert!((sign_test_p(10, 10) - 1.0 / 1024.0).abs() < 1e-15);
        assert!((sign_test_p(0, 10) - 1.0).abs() < 1e-15);
        assert!((sign_test_p(8, 10) - 56.0 / 1024.0).abs() < 1e-15);
    }

    #[test]
    fn fit_writes_every_file() {
        let cfg = small(r#""edges", "kstar(2)""#, 200);
        let out = fit(&cfg, None, None).unwrap();
        assert_eq!(out.report.parameters.len(), 2);
        let dir = tempfile::tempdir().unwrap();
        write_fit(dir.path(), &cfg, &out).unwrap();
        for f in [
            "report.json",
            "summary.txt",
            "samples.csv",
            "trace_edges.csv",
            "trace_kstar_2.csv",
            "acf_edges.csv",
        ] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        let samples = std::fs::read_to_string(dir.path().join("samples.csv")).unwrap();
        assert_eq!(samples.lines().count(), 1 + 6 * 200);
        assert!(samples.starts_with("chain,iteration,edges,kstar(2)\n"));
        let report: FitReport =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
        assert_eq!(report.summary.mean, out.report.mean);
        assert_eq!(report.observed_statistics[0], 20.0);
        let trace = std::fs::read_to_string(dir.path().join("trace_edges.csv")).unwrap();
        assert_eq!(
            trace.lines().next().unwrap(),
            "iteration,chain_1,chain_2,chain_3,chain_4,chain_5,chain_6"
        );
    }

    #[test]
    fn compare_two_variants() {
        let mut cfg = small(r#""edges""#, 150);
        cfg.variants = vec!["ads-aea".parse().unwrap(), "ads-aea+dr".parse().unwrap()];
        let cmp = compare(&cfg, 2, Some(2)).unwrap();
        assert_eq!(cmp.rows.len(), 2);
        assert_eq!(cmp.replicates.len(), 4);
        assert_eq!(cmp.sign_tests.len(), 1);
        assert_eq!(cmp.to_csv().lines().count(), 3);
        assert!(cmp.to_text().contains("ADS-AEA+DR"));
        // replicate results do not depend on the job count
        let again = compare(&cfg, 2, Some(1)).unwrap();
        for (a, b) in cmp.replicates.iter().zip(&again.replicates) {
            assert_eq!((a.algorithm, a.seed, &a.mean), (b.algorithm, b.seed, &b.mean));
        }
        assert!(compare(&cfg, 0, None).is_err());
    }

    #[test]
    fn simulate_edges_only_at_zero() {
        let cfg = small(r#""edges""#, 10);
        let sim = simulate(&cfg, &[0.0], 400, Some(200), Some(1)).unwrap();
        let dyads = 120.0;
        let density = sim.mean()[0] / dyads;
        // each draw is Binomial(120, 1/2) up to correlation between draws
        assert!((density - 0.5).abs() < 0.02, "{density}");
        let again = simulate(&cfg, &[0.0], 400, Some(200), Some(1)).unwrap();
        assert_eq!(sim.stats, again.stats);
        assert!(simulate(&cfg, &[0.0, 1.0], 1, None, None).is_err());
    }

    #[test]
    fn simulate_matches_enumeration_on_four_nodes() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("n.csv"), "node\na\nb\nc\nd\n").unwrap();
        std::fs::write(dir.path().join("e.tsv"), "a\tb\n").unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(
            &path,
            r#"{"dataset": {"nodes": "n.csv", "edges": "e.tsv"}, "model": ["edges", "kstar(2)"]}"#,
        )
        .unwrap();
        let cfg = RunConfig::from_file(&path).unwrap();
        let theta = [-0.4, 0.3];
        let sim = simulate(&cfg, &theta, 20_000, Some(30), Some(5)).unwrap();
        let g = cfg.load_graph().unwrap();
        let en = GraphEnumeration::new(&cfg.model, &g).unwrap();
        let p = en.probabilities(&DVector::from_column_slice(&theta));
        for k in 0..2 {
            let exact: f64 = (0..en.len()).map(|i| p[i] * en.stats(i)[k]).sum();
            let got = sim.mean()[k];
            assert!(
                (got - exact).abs() < 0.05 * exact.max(1.0),
                "stat {k}: {got} vs {exact}"
            );
        }
        write_simulation(dir.path(), &sim).unwrap();
        assert!(dir.path().join("draw_00001.tsv").exists());
        assert_eq!(
            std::fs::read_to_string(dir.path().join("stats.csv"))
                .unwrap()
                .lines()
                .count(),
            20_001
        );
    }
}

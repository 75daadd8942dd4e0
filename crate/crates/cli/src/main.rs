use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use psrlab::config::{EnvSpec, ExperimentConfig};
use psrlab::numeric::median;
use psrlab::offline::run_offline;
use psrlab::online::{evaluate_output, logs_to_csv, run_psr_ucb, OnlineConfig};
use psrlab::params::{EnvSummary, OfflineParams, OnlineParams};
use psrlab::verify::{verify, Suite, VerifyOptions};
use psrlab::{Policy, TabularPomdp};

#[derive(Parser)]
#[command(name = "psrlab", version, about = "Optimistic and pessimistic PSR learning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the configured environment as a POMDP document.
    GenEnv {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// PSR-UCB for every seed of the config.
    RunOnline {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Use seeds `0..N` instead of the config's list.
        #[arg(long)]
        seeds: Option<u64>,
        #[arg(long)]
        c_theory: Option<f64>,
    },
    /// PSR-LCB for every seed of the config.
    RunOffline {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seeds: Option<u64>,
        #[arg(long)]
        c_theory: Option<f64>,
    },
    /// PSR-LCB over a grid of episode counts and seeds.
    SweepOffline {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_delimiter = ',')]
        k_list: Option<Vec<usize>>,
        #[arg(long)]
        seeds: Option<u64>,
        #[arg(long)]
        c_theory: Option<f64>,
    },
    /// Run property suites; exits nonzero when any check fails.
    Verify {
        #[arg(long, default_value = "all")]
        suite: Suite,
        /// Seeds per check instead of each suite's default.
        #[arg(long)]
        seeds: Option<usize>,
        #[arg(long)]
        c_theory: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Aggregate the tables in an output directory.
    Report {
        #[arg(long)]
        out: PathBuf,
    },
}

/// One row of `runs.csv`; every resolved parameter is echoed.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct OnlineRecord {
    seed: u64,
    terminated: bool,
    iterations: usize,
    gap: Option<f64>,
    max_tv: Option<f64>,
    p_min: f64,
    beta: f64,
    lambda: f64,
    alpha: f64,
    c_theory: f64,
}

#[derive(Serialize)]
struct OnlineSummary<'a> {
    seed: u64,
    terminated: bool,
    iterations: usize,
    gap: Option<f64>,
    max_tv: Option<f64>,
    candidate: Option<&'a str>,
    params: &'a OnlineParams,
    environment: &'a EnvSummary,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct OfflineRecord {
    #[serde(rename = "K")]
    k: usize,
    seed: u64,
    gap: f64,
    lcb_value: f64,
    iota: f64,
    c_infinity: f64,
    max_tv: f64,
    p_min: f64,
    beta: f64,
    lambda: f64,
    alpha: f64,
    c_theory: f64,
    c_target: f64,
}

#[derive(Serialize)]
struct OfflineSummary<'a> {
    #[serde(flatten)]
    record: &'a OfflineRecord,
    candidate: &'a str,
    environment: &'a EnvSummary,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::GenEnv { config, out } => {
            let env = match &config {
                Some(path) => load(path)?.1,
                None => EnvSpec::Reference.build(None)?,
            };
            fs::create_dir_all(&out)?;
            write_json(&out.join("env.json"), &env)?;
        }
        Command::RunOnline {
            config,
            out,
            seeds,
            c_theory,
        } => {
            let (cfg, env) = load(&config)?;
            run_online_cmd(&cfg, &env, &out, seed_list(&cfg, seeds), c_theory)?;
        }
        Command::RunOffline {
            config,
            out,
            seeds,
            c_theory,
        } => {
            let (cfg, env) = load(&config)?;
            let rows = offline_rows(&cfg, &env, &out, &seed_list(&cfg, seeds), &[None], c_theory)?;
            write_csv(&out.join("offline.csv"), &rows)?;
        }
        Command::SweepOffline {
            config,
            out,
            k_list,
            seeds,
            c_theory,
        } => {
            let (cfg, env) = load(&config)?;
            let ks = k_list.unwrap_or_else(|| cfg.k_list.clone());
            if ks.is_empty() {
                bail!("no episode counts: pass --k-list or set k_list in the config");
            }
            let ks: Vec<_> = ks.into_iter().map(Some).collect();
            let rows = offline_rows(&cfg, &env, &out, &seed_list(&cfg, seeds), &ks, c_theory)?;
            write_csv(&out.join("sweep.csv"), &rows)?;
            for k in ks.iter().flatten() {
                let gaps: Vec<f64> = rows.iter().filter(|r| r.k == *k).map(|r| r.gap).collect();
                println!("K={k}: median gap {:.6} over {} seeds", median(&gaps), gaps.len());
            }
        }
        Command::Verify {
            suite,
            seeds,
            c_theory,
            out,
        } => {
            let mut options = VerifyOptions {
                seeds,
                ..VerifyOptions::default()
            };
            if let Some(c) = c_theory {
                options.c_theory = c;
            }
            let report = verify(suite, &options)?;
            for check in &report.checks {
                println!("{check}");
            }
            if let Some(dir) = out {
                fs::create_dir_all(&dir)?;
                write_json(&dir.join("verify.json"), &report)?;
            }
            if !report.passed() {
                eprintln!("{} of {} checks failed", report.failures(), report.checks.len());
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Report { out } => report(&out)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn load(path: &Path) -> Result<(ExperimentConfig, TabularPomdp)> {
    let cfg = ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display()))?;
    let env = cfg.environment.build(path.parent())?;
    Ok((cfg, env))
}

fn seed_list(cfg: &ExperimentConfig, n: Option<u64>) -> Vec<u64> {
    match n {
        Some(n) => (0..n).collect(),
        None => cfg.seeds.clone(),
    }
}

fn online_config(cfg: &ExperimentConfig, seed: u64, c_theory: Option<f64>) -> Result<OnlineConfig> {
    let mut c = cfg.online_for(seed).context("config has no online section")?;
    if let Some(v) = c_theory {
        c.c_theory = v;
    }
    Ok(c)
}

fn run_online_cmd(
    cfg: &ExperimentConfig,
    env: &TabularPomdp,
    out: &Path,
    seeds: Vec<u64>,
    c_theory: Option<f64>,
) -> Result<()> {
    let configs = seeds
        .iter()
        .map(|&s| online_config(cfg, s, c_theory))
        .collect::<Result<Vec<_>>>()?;
    let records = configs
        .par_iter()
        .map(|c| -> Result<OnlineRecord> {
            let outcome = run_psr_ucb(env, c)?;
            let dir = out.join(format!("seed-{}", c.seed));
            fs::create_dir_all(&dir)?;
            fs::write(dir.join("logs.csv"), logs_to_csv(&outcome.logs))?;
            let (gap, max_tv) = match (&outcome.model, &outcome.policy) {
                (Some(model), Some(policy)) => {
                    write_json(&dir.join("model.json"), model)?;
                    write_json(&dir.join("policy.json"), policy)?;
                    let (g, t) = evaluate_output(env, model, &Policy::DeterministicTree(policy.clone()))?;
                    (Some(g), Some(t))
                }
                _ => (None, None),
            };
            let summary = OnlineSummary {
                seed: c.seed,
                terminated: outcome.terminated,
                iterations: outcome.logs.len(),
                gap,
                max_tv,
                candidate: outcome.candidate_label.as_deref(),
                params: &outcome.params,
                environment: &outcome.summary,
            };
            write_json(&dir.join("summary.json"), &summary)?;
            let p = outcome.params;
            Ok(OnlineRecord {
                seed: c.seed,
                terminated: outcome.terminated,
                iterations: outcome.logs.len(),
                gap,
                max_tv,
                p_min: p.p_min,
                beta: p.beta,
                lambda: p.lambda,
                alpha: p.alpha,
                c_theory: p.c_theory,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    write_csv(&out.join("runs.csv"), &records)?;
    let done = records.iter().filter(|r| r.terminated).count();
    println!("{done}/{} seeds terminated", records.len());
    Ok(())
}

fn offline_rows(
    cfg: &ExperimentConfig,
    env: &TabularPomdp,
    out: &Path,
    seeds: &[u64],
    ks: &[Option<usize>],
    c_theory: Option<f64>,
) -> Result<Vec<OfflineRecord>> {
    let mut jobs = Vec::new();
    for &k in ks {
        for &seed in seeds {
            let mut c = cfg.offline_for(seed, k).context("config has no offline section")?;
            if let Some(v) = c_theory {
                c.c_theory = v;
            }
            jobs.push(c);
        }
    }
    jobs.par_iter()
        .map(|c| -> Result<OfflineRecord> {
            let run = run_offline(env, c)?;
            let dir = out.join(format!("K{}", c.episodes)).join(format!("seed-{}", c.seed));
            fs::create_dir_all(&dir)?;
            write_json(&dir.join("model.json"), &run.outcome.model)?;
            write_json(&dir.join("policy.json"), &run.outcome.policy)?;
            let p: OfflineParams = run.outcome.params;
            let record = OfflineRecord {
                k: run.report.k,
                seed: run.report.seed,
                gap: run.report.gap,
                lcb_value: run.report.lcb_value,
                iota: run.report.iota,
                c_infinity: run.report.c_infinity,
                max_tv: run.max_tv,
                p_min: p.p_min,
                beta: p.beta,
                lambda: p.lambda,
                alpha: p.alpha,
                c_theory: p.c_theory,
                c_target: p.c_target,
            };
            let summary = OfflineSummary {
                record: &record,
                candidate: &run.outcome.candidate_label,
                environment: &run.outcome.summary,
            };
            write_json(&dir.join("summary.json"), &summary)?;
            Ok(record)
        })
        .collect()
}

#[derive(Serialize)]
struct Aggregate {
    table: String,
    group: String,
    runs: usize,
    median_gap: f64,
    terminated: Option<usize>,
}

fn report(dir: &Path) -> Result<()> {
    let mut rows = Vec::new();
    let runs = dir.join("runs.csv");
    if runs.exists() {
        let records: Vec<OnlineRecord> = read_csv(&runs)?;
        let gaps: Vec<f64> = records.iter().filter_map(|r| r.gap).collect();
        rows.push(Aggregate {
            table: "runs".into(),
            group: "all".into(),
            runs: records.len(),
            median_gap: median(&gaps),
            terminated: Some(records.iter().filter(|r| r.terminated).count()),
        });
    }
    for name in ["offline", "sweep"] {
        let path = dir.join(format!("{name}.csv"));
        if !path.exists() {
            continue;
        }
        let records: Vec<OfflineRecord> = read_csv(&path)?;
        let mut ks: Vec<usize> = records.iter().map(|r| r.k).collect();
        ks.sort_unstable();
        ks.dedup();
        for k in ks {
            let gaps: Vec<f64> = records.iter().filter(|r| r.k == k).map(|r| r.gap).collect();
            rows.push(Aggregate {
                table: name.into(),
                group: format!("K={k}"),
                runs: gaps.len(),
                median_gap: median(&gaps),
                terminated: None,
            });
        }
    }
    if rows.is_empty() {
        bail!("no runs.csv, offline.csv or sweep.csv in {}", dir.display());
    }
    for r in &rows {
        match r.terminated {
            Some(t) => println!("{} {}: {} runs, {t} terminated, median gap {:.6}", r.table, r.group, r.runs, r.median_gap),
            None => println!("{} {}: {} runs, median gap {:.6}", r.table, r.group, r.runs, r.median_gap),
        }
    }
    write_json(&dir.join("report.json"), &rows)
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    r.deserialize().map(|row| row.map_err(Into::into)).collect()
}

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use reform_core::analytics::{
    check_assumptions, expected_reward_random, expected_reward_reform_k, expected_reward_reform_k2,
    expected_reward_rptsc, gamma_reform, gamma_rptsc, optimal_reward, pre_eval_expected_random,
    pre_eval_expected_reform, pre_eval_expected_reform_k, pre_eval_expected_rptsc, self_predictor,
    self_predictor_shifted,
};
use reform_core::config::{validate_config, Mechanism, SimConfig};
use reform_core::io::{
    figure1_csv, fmt_num, load_beliefs, load_config, round_sig, rounds_csv, to_json_pretty, write_file,
};
use reform_core::metrics::{
    budget_comparison, empirical_gamma, empirical_r, implied_beliefs, normalized_rewards,
    qualitative_fairness_test, reference_optimal_reward, tail_mean, GammaEstimate, FAIRNESS_BINS, TAIL_ROUNDS,
    WARM_UP_ROUNDS,
};
use reform_core::model::StrategyKind;
use reform_core::reward::DecayFactor;
use reform_core::simulator::{run_experiment_with_threads, threads_from_env, ExperimentRecord};

#[derive(Parser)]
#[command(name = "reform-sim", version, about = "Reputation-aware peer-prediction reward simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write rounds.csv, summary.json and meta.json.
    Simulate {
        #[command(flatten)]
        overrides: Overrides,
        /// α of the plain RPTSC run used for the budget comparison.
        #[arg(long, default_value_t = 10.0)]
        baseline_alpha: f64,
        /// Skip the plain RPTSC comparison run.
        #[arg(long)]
        no_baseline: bool,
    },
    /// Run the RPTSC baseline and the k-chance mechanism at k = 2, 4, 8.
    Figure1 {
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long, default_value_t = 10.0)]
        baseline_alpha: f64,
    },
    /// Print closed-form rewards, fairness constants and incentive conditions.
    Analyze {
        /// Beliefs file (TOML, or JSON by extension).
        beliefs: PathBuf,
        /// Print JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Print the reference configuration as TOML.
    DefaultConfig,
}

#[derive(Args, Clone)]
struct Overrides {
    /// Configuration file (TOML, or JSON by extension); the reference setup when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    k: Option<u32>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    mechanism: Option<Mechanism>,
    #[arg(long)]
    rounds: Option<u32>,
    /// `constant`, `exp:RATE` or `linear:SLOPE`.
    #[arg(long)]
    decay: Option<DecayFactor>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

impl Overrides {
    fn resolve(&self) -> Result<SimConfig> {
        let mut cfg = match &self.config {
            Some(p) => load_config(p)?,
            None => SimConfig::reference(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(k) = self.k {
            cfg.mechanism.k = k;
        }
        if let Some(a) = self.alpha {
            cfg.mechanism.alpha = a;
        }
        if let Some(m) = self.mechanism {
            cfg.mechanism.name = m;
        }
        if let Some(r) = self.rounds {
            cfg.rounds = r;
        }
        if let Some(d) = self.decay {
            cfg.mechanism.decay = d;
        }
        Ok(validate_config(&cfg)?)
    }
}

fn run(cfg: &SimConfig) -> Result<ExperimentRecord> {
    Ok(run_experiment_with_threads(cfg, threads_from_env())?)
}

fn gamma_json(g: &GammaEstimate) -> Value {
    json!({
        "gamma": num(g.gamma),
        "ci_low": num(g.ci_low),
        "ci_high": num(g.ci_high),
        "gamma_uniform_over_answers": num(g.gamma_uniform),
        "gamma_after_warm_up": num(g.gamma_after_warm_up),
        "mean_gap": num(g.mean_gap),
    })
}

/// Finite numbers rounded to 9 significant digits; others as strings.
fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(round_sig(x))
    } else {
        json!(fmt_num(x))
    }
}

fn strategy_means(record: &ExperimentRecord, optimal: f64) -> Result<Value> {
    let rows = normalized_rewards(record, optimal)?;
    let mut out = serde_json::Map::new();
    for kind in StrategyKind::ALL {
        let Some(all) = tail_mean(&rows, kind, u32::MAX) else { continue };
        let late: Vec<_> = rows.iter().filter(|r| r.round >= WARM_UP_ROUNDS).cloned().collect();
        out.insert(
            kind.as_str().into(),
            json!({
                "normalized_all_rounds": num(all),
                "normalized_after_warm_up": tail_mean(&late, kind, u32::MAX).map(num),
                "normalized_last_50": num(tail_mean(&rows, kind, TAIL_ROUNDS).unwrap_or(f64::NAN)),
            }),
        );
    }
    Ok(Value::Object(out))
}

fn record_summary(record: &ExperimentRecord) -> Result<Value> {
    let optimal = reference_optimal_reward(&record.config)?;
    let mut s = json!({
        "mechanism": record.config.mechanism.name.as_str(),
        "k": record.config.chances(),
        "alpha": num(record.config.mechanism.alpha),
        "optimal_reward": num(optimal),
        "normalized_rewards": strategy_means(record, optimal)?,
    });
    if let Ok(g) = empirical_gamma(record) {
        s["gamma"] = gamma_json(&g);
    }
    if let Some(r) = empirical_r(record, StrategyKind::Trustworthy, WARM_UP_ROUNDS) {
        s["trustworthy_outrank_rate"] = json!({ "r": num(r.r), "r_on_mismatch": num(r.r_on_mismatch) });
        if let Some(b) = implied_beliefs(&record.config, r.r_on_mismatch) {
            let k = record.config.chances();
            let q = b.prior[0];
            let qp = b.posterior[0][0];
            let e = expected_reward_reform_k(q, qp, b.r, b.n, b.alpha, 1.0, k).unwrap_or(f64::NAN);
            s["closed_form_at_measured_r"] = json!({
                "peer_agreement": num(qp),
                "gamma_rptsc": num(gamma_rptsc(&b)),
                "gamma_reform": num(gamma_reform(&b)),
                "trustworthy_normalized_reward": num(e / optimal),
            });
        }
    }
    if let Ok(f) = qualitative_fairness_test(record, FAIRNESS_BINS, WARM_UP_ROUNDS) {
        s["qualitative_fairness"] = json!({ "verdict": f.verdict, "distinguishable": f.distinguishable });
    }
    Ok(s)
}

fn simulate(o: &Overrides, baseline_alpha: f64, no_baseline: bool) -> Result<()> {
    let cfg = o.resolve()?;
    let record = run(&cfg)?;
    let optimal = reference_optimal_reward(&cfg)?;
    let dir = &o.out_dir;
    write_file(&dir.join("rounds.csv"), &rounds_csv(&record, optimal)?)?;
    let mut summary = json!({ "seed": cfg.seed, "rounds": cfg.rounds, "result": record_summary(&record)? });
    if cfg.mechanism.name.uses_chances() && !no_baseline {
        let base = run(&validate_config(&cfg.baseline(baseline_alpha))?)?;
        let b = budget_comparison(&record, &base);
        summary["baseline"] = record_summary(&base)?;
        summary["budget"] = json!({
            "per_agent": num(b.reform_per_agent),
            "baseline_per_agent": num(b.rptsc_per_agent),
            "raw_overhead": num(b.raw_overhead),
            "alpha_normalized_overhead": num(b.normalized_overhead),
        });
    }
    summary["config"] = serde_json::to_value(&cfg)?;
    write_file(&dir.join("summary.json"), &to_json_pretty(&summary)?)?;
    write_file(&dir.join("meta.json"), &to_json_pretty(&cfg)?)?;
    println!("wrote {}", dir.display());
    Ok(())
}

fn figure1(o: &Overrides, baseline_alpha: f64) -> Result<()> {
    let cfg = o.resolve()?;
    let base = run(&validate_config(&cfg.baseline(baseline_alpha))?)?;
    let base_rows = normalized_rewards(&base, reference_optimal_reward(&base.config)?)?;
    let mut curves = Vec::new();
    let mut tails = serde_json::Map::new();
    for k in [2u32, 4, 8] {
        let mut c = cfg.clone();
        c.mechanism.name = Mechanism::ReformRptsc;
        c.mechanism.k = k;
        let rec = run(&c)?;
        let rows = normalized_rewards(&rec, reference_optimal_reward(&c)?)?;
        let mut t = serde_json::Map::new();
        for kind in [StrategyKind::Trustworthy, StrategyKind::Random] {
            if let Some(v) = tail_mean(&rows, kind, TAIL_ROUNDS) {
                t.insert(kind.as_str().into(), num(v));
            }
        }
        tails.insert(format!("k{k}"), Value::Object(t));
        curves.push((k, rows));
    }
    let mut bt = serde_json::Map::new();
    for kind in [StrategyKind::Trustworthy, StrategyKind::Random] {
        if let Some(v) = tail_mean(&base_rows, kind, TAIL_ROUNDS) {
            bt.insert(kind.as_str().into(), num(v));
        }
    }
    tails.insert("rptsc".into(), Value::Object(bt));
    let dir = &o.out_dir;
    write_file(&dir.join("figure1.csv"), &figure1_csv(&curves, &base_rows))?;
    let summary = json!({ "last_50_round_means": tails, "config": cfg, "baseline_alpha": num(baseline_alpha) });
    write_file(&dir.join("figure1_summary.json"), &to_json_pretty(&summary)?)?;
    println!("wrote {}", dir.display());
    Ok(())
}

fn analyze(path: &Path, as_json: bool) -> Result<()> {
    let file = load_beliefs(path)?;
    let b = &file.beliefs;
    if file.max_k < 1 {
        bail!("max_k ≥ 1 required");
    }
    let mut per_answer = Vec::new();
    for (x, (q, qp)) in b.pairs().enumerate() {
        let series: Vec<Value> = (1..=file.max_k)
            .map(|k| num(expected_reward_reform_k(q, qp, b.r, b.n, b.alpha, b.beta, k).unwrap_or(f64::NAN)))
            .collect();
        per_answer.push(json!({
            "answer": x,
            "expected_single": num(expected_reward_rptsc(q, qp, b.n, b.alpha)),
            "optimal": num(optimal_reward(q, b.n, b.alpha).unwrap_or(f64::NAN)),
            "expected_two_chances": num(expected_reward_reform_k2(q, qp, b.r, b.n, b.alpha, b.beta)),
            "expected_by_k": series,
            "expected_random": num(expected_reward_random(q, b.r, b.n, b.alpha, b.beta)),
        }));
    }
    let mut out = json!({
        "per_answer": per_answer,
        "pre_evaluation": {
            "single": num(pre_eval_expected_rptsc(b)),
            "two_chances": num(pre_eval_expected_reform(b)),
            "max_k": num(pre_eval_expected_reform_k(b, file.max_k)?),
            "random": num(pre_eval_expected_random(b)),
        },
        "gamma_rptsc": num(gamma_rptsc(b)),
        "gamma_reform": num(gamma_reform(b)),
    });
    match self_predictor(b) {
        Ok(sp) => {
            let a = check_assumptions(b, file.cost_high, file.cost_low, 2)?;
            out["delta"] = json!(sp.delta.iter().map(|d| num(*d)).collect::<Vec<_>>());
            out["delta_shifted"] =
                json!(self_predictor_shifted(b)?.delta.iter().map(|d| num(*d)).collect::<Vec<_>>());
            out["assumptions"] = json!({ "A": a.a, "A1": a.a1, "B1": a.b1, "B2": a.b2, "cost_gap": num(a.cost_gap) });
        }
        Err(e) => out["self_predicting"] = json!(e.to_string()),
    }
    if as_json {
        print!("{}", to_json_pretty(&out)?);
    } else {
        print_table("", &out);
    }
    Ok(())
}

fn print_table(prefix: &str, v: &Value) {
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                let p = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                print_table(&p, x);
            }
        }
        Value::Array(a) => {
            for (i, x) in a.iter().enumerate() {
                print_table(&format!("{prefix}[{i}]"), x);
            }
        }
        other => println!("{prefix:<40} {other}"),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.command {
        Command::Simulate { overrides, baseline_alpha, no_baseline } => {
            simulate(overrides, *baseline_alpha, *no_baseline)
        }
        Command::Figure1 { overrides, baseline_alpha } => figure1(overrides, *baseline_alpha),
        Command::Analyze { beliefs, json } => analyze(beliefs, *json),
        Command::DefaultConfig => reform_core::io::config_to_toml(&SimConfig::reference())
            .map(|s| print!("{s}"))
            .context("serializing the reference configuration"),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

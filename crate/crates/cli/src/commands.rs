//! Subcommand implementations.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;
use thermoctl_core::data::{write_series, Window};
use thermoctl_core::evaluation::{pick_validation_windows, HeatingTrainingEnv};
use thermoctl_core::ppo::{train, TrainOutcome};
use thermoctl_core::trace::read_trace;

use crate::config::Config;
use crate::controllers::ControllerSpec;
use crate::dataset::{load_split, synthetic_series};
use crate::error::UsageError;
use crate::plot::render_svg;
use crate::report::{summaries_csv, write_file, write_traces, ComparisonReport, ControllerSummary};
use crate::{Cli, Command};

pub fn execute(cli: &Cli) -> anyhow::Result<()> {
    let cfg = Config::load(cli.config.as_deref(), &cli.overrides())?;
    let out = cli.out.clone().unwrap_or_else(|| cfg.output.dir.clone());
    match &cli.command {
        Command::Simulate { controller, window } => evaluate_one(&cfg, &out, controller, window.as_deref()),
        Command::Train => train_agents(&cfg, &out),
        Command::Evaluate { policy, window } => {
            evaluate_one(&cfg, &out, &ControllerSpec::Policy(policy.clone()), window.as_deref())
        }
        Command::Mpc { window } => evaluate_one(&cfg, &out, &ControllerSpec::Mpc, window.as_deref()),
        Command::Compare { controllers, window } => compare(&cfg, &out, controllers, window.as_deref()),
        Command::SynthData => synth_data(&cfg, &out),
        Command::ShowConfig => {
            print!("{}", cfg.to_toml()?);
            Ok(())
        }
        Command::Plot { trace, output } => plot(&cfg, trace, output.as_deref()),
    }
}

fn create_dir(dir: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn test_windows(cfg: &Config, only: Option<&str>) -> anyhow::Result<Vec<Window>> {
    let test = load_split(cfg)?.test;
    match only {
        None => Ok(test),
        Some(label) => {
            let picked: Vec<Window> = test.into_iter().filter(|w| w.label == label).collect();
            if picked.is_empty() {
                return Err(UsageError(format!("no test window labelled `{label}`")).into());
            }
            Ok(picked)
        }
    }
}

fn evaluate_one(cfg: &Config, out: &Path, spec: &ControllerSpec, only: Option<&str>) -> anyhow::Result<()> {
    let windows = test_windows(cfg, only)?;
    let eval = spec.evaluate(cfg, &windows)?;
    create_dir(out)?;
    write_traces(out, &eval)?;
    let summary = ControllerSummary::new(cfg, &eval);
    let path = out.join(format!("metrics_{}.csv", eval.controller));
    write_file(&path, &summaries_csv(std::slice::from_ref(&summary), None)?)?;
    let m = &summary.metrics;
    println!(
        "{}: {} steps over {} windows, electricity {:.2} Wh/step, deviation mean {:.4} / max {:.4} °C{}, decision time {:.3} s",
        eval.controller,
        m.steps,
        windows.len(),
        m.electricity_mean,
        m.deviation_mean,
        m.deviation_max,
        m.cost_mean.map(|c| format!(", cost {c:.4} cent/step")).unwrap_or_default(),
        m.exec_time_s
    );
    println!("wrote {}", path.display());
    Ok(())
}

pub fn learning_curve_csv(outcome: &TrainOutcome) -> anyhow::Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["seed", "step", "mean_eval_reward", "elec_mean", "dev_mean"])?;
    for run in &outcome.runs {
        for p in &run.curve {
            w.write_record([
                p.seed.to_string(),
                p.step.to_string(),
                p.score.reward_mean.to_string(),
                p.score.electricity_mean.to_string(),
                p.score.deviation_mean.to_string(),
            ])?;
        }
    }
    Ok(String::from_utf8(w.into_inner().context("flushing csv")?)?)
}

fn train_agents(cfg: &Config, out: &Path) -> anyhow::Result<()> {
    let split = load_split(cfg)?;
    let validation = pick_validation_windows(&split.train, cfg.data.validation_windows);
    let env_cfg = cfg.episode_config();
    log::info!(
        "training {} on {} windows ({} for validation), {} seeds x {} steps",
        cfg.scenario_name(),
        split.train.len(),
        validation.len(),
        cfg.trainer.seeds,
        cfg.trainer.total_steps
    );
    let started = Instant::now();
    let outcome = train(
        |_| HeatingTrainingEnv::new(env_cfg.clone(), split.train.clone(), validation.clone()),
        &cfg.trainer,
    )?;
    let elapsed = started.elapsed().as_secs_f64();

    create_dir(out)?;
    let policy = out.join("policy.json");
    outcome.best.save(&policy)?;
    write_file(&out.join("learning_curve.csv"), &learning_curve_csv(&outcome)?)?;
    let summary = serde_json::json!({
        "scenario": cfg.scenario_name(),
        "fingerprint": outcome.best.fingerprint,
        "best_seed": outcome.best.seed,
        "best_step": outcome.best.step,
        "best_score": outcome.best.score,
        "seeds": outcome.runs.iter().map(|r| serde_json::json!({
            "seed": r.seed,
            "best_step": r.best_step,
            "best_score": r.best_score,
        })).collect::<Vec<_>>(),
        "train_time_s": elapsed,
    });
    write_file(&out.join("train_summary.json"), &serde_json::to_string_pretty(&summary)?)?;
    for r in &outcome.runs {
        println!(
            "seed {}: best validation reward {:.5} at step {} (electricity {:.2} Wh, deviation {:.4} °C)",
            r.seed, r.best_score.reward_mean, r.best_step, r.best_score.electricity_mean, r.best_score.deviation_mean
        );
    }
    println!(
        "kept seed {} step {}; wrote {} ({elapsed:.1} s)",
        outcome.best.seed,
        outcome.best.step,
        policy.display()
    );
    Ok(())
}

fn compare(cfg: &Config, out: &Path, specs: &[ControllerSpec], only: Option<&str>) -> anyhow::Result<()> {
    if specs.len() < 2 {
        return Err(UsageError("compare needs at least two controllers, e.g. a trained policy and `mpc`".into()).into());
    }
    let labels: Vec<String> = specs.iter().map(ControllerSpec::label).collect();
    if let Some((i, l)) = labels.iter().enumerate().find(|(i, l)| labels[..*i].contains(l)) {
        return Err(UsageError(format!("controller `{l}` given twice (position {})", i + 1)).into());
    }
    let has_policy = specs.iter().any(|s| matches!(s, ControllerSpec::Policy(_)));
    let has_baseline = specs.iter().any(|s| matches!(s, ControllerSpec::Baseline(_)));
    if cfg.scenario.dr && has_policy && !has_baseline {
        return Err(UsageError(
            "demand-response comparisons include the price-agnostic agent: add --controller baseline:<policy.json>".into(),
        )
        .into());
    }
    let windows = test_windows(cfg, only)?;
    let mut evals = Vec::with_capacity(specs.len());
    for spec in specs {
        log::info!("evaluating {}", spec.label());
        evals.push(spec.evaluate(cfg, &windows)?);
    }
    let report = ComparisonReport::build(cfg, &evals)?;
    create_dir(out)?;
    for e in &evals {
        write_traces(out, e)?;
    }
    let text = report.to_text();
    write_file(&out.join("compare.txt"), &text)?;
    write_file(&out.join("compare.csv"), &report.to_csv()?)?;
    write_file(&out.join("compare.json"), &report.to_json()?)?;
    print!("{text}");
    Ok(())
}

fn plot(cfg: &Config, trace: &Path, output: Option<&Path>) -> anyhow::Result<()> {
    let file = std::fs::File::open(trace).with_context(|| format!("opening {}", trace.display()))?;
    let rows = read_trace(std::io::BufReader::new(file))?;
    if rows.is_empty() {
        return Err(thermoctl_core::Error::Data(format!("{} has no rows", trace.display())).into());
    }
    let title = trace.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let svg = render_svg(&rows, &title, cfg.environment.comfort_low, cfg.environment.comfort_high);
    let path: PathBuf = output.map(Path::to_path_buf).unwrap_or_else(|| trace.with_extension("svg"));
    write_file(&path, &svg)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn synth_data(cfg: &Config, out: &Path) -> anyhow::Result<()> {
    let (weather, prices) = synthetic_series(cfg)?;
    create_dir(out)?;
    for (name, series) in [("weather.csv", &weather), ("prices.csv", &prices)] {
        let path = out.join(name);
        let file = std::fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        write_series(series, std::io::BufWriter::new(file))?;
        println!("wrote {} ({} hourly rows)", path.display(), series.len());
    }
    Ok(())
}

use std::path::Path;

use jkge::benchmark::{self, BenchmarkMethod};
use jkge::calibrate::{multi_seed_calibrate, AdamConfig};
use jkge::evaluate::{self, BootstrapOptions};
use jkge::experiment::{self, ExperimentConfig, Target};
use jkge::gradients::{fd_check, GradMetric};
use jkge::hydromodel::ForcingSeries;
use jkge::metrics::{self, full_report, Guards, MetricName};
use jkge::series::{self, ColumnSpec, PairedSeries, TimeSeries, Unit};
use jkge::synth::{generate_catchment, SynthConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::args::*;
use crate::output::{out_path, write_atomic, write_text};
use crate::seeds::{derive, Purpose};
use crate::{CliError, CliResult};

pub fn dispatch(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Convert(a) => convert(a),
        Command::Benchmark(a) => benchmark_cmd(a),
        Command::Evaluate(a) => evaluate_cmd(a),
        Command::Calibrate(a) => calibrate_cmd(a),
        Command::GradCheck(a) => grad_check(a),
        Command::Synth(a) => synth(a),
        Command::Experiment(a) => experiment_cmd(a),
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn positive(name: &str, v: f64) -> CliResult<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(usage(format!("--{name} must be positive, got {v}")))
    }
}

fn load_series(path: &Path, date: &str, value: &str, unit: Unit) -> CliResult<TimeSeries> {
    let spec = ColumnSpec {
        date: date.into(),
        value: value.into(),
        unit,
    };
    Ok(series::load_daily_csv(path, &spec)?)
}

fn write_series(path: &Path, s: &TimeSeries) -> CliResult<()> {
    write_atomic(path, |w| series::write_daily_csv(w, s))
}

fn convert(a: ConvertArgs) -> CliResult<()> {
    positive("area-km2", a.area_km2)?;
    positive("log-floor", a.log_floor)?;
    let q = load_series(&a.input, &a.columns.date_column, &a.columns.value_column, Unit::Cfs)?;
    let mut depth = series::convert_discharge_to_depth(&q, a.area_km2)?;
    if a.log {
        depth = series::log_transform(&depth, a.log_floor)?;
    }
    write_series(&a.output, &depth)
}

fn benchmark_cmd(a: BenchmarkArgs) -> CliResult<()> {
    let s = load_series(&a.input, &a.columns.date_column, &a.columns.value_column, Unit::MmPerDay)?;
    let b = benchmark::benchmark(&s, a.method)?;
    write_atomic(&a.output, |w| benchmark::write_benchmark_csv(w, &s, &b))
}

fn guards(g: GuardArgs) -> CliResult<Guards> {
    positive("eps-b", g.eps_b)?;
    positive("eps-sigma", g.eps_sigma)?;
    Ok(Guards {
        eps_b: g.eps_b,
        eps_sigma: g.eps_sigma,
    })
}

fn evaluate_cmd(a: EvaluateArgs) -> CliResult<()> {
    let guards = guards(a.guards)?;
    positive("log-floor", a.log_floor)?;
    let obs = load_series(&a.obs, &a.date_column, &a.obs_column, Unit::MmPerDay)?;
    let sim = load_series(&a.sim, &a.date_column, &a.sim_column, Unit::MmPerDay)?;
    let pair = PairedSeries::new(obs, sim)?;

    let report = full_report(&pair, a.method, guards, a.log_space, a.log_floor)?.flat();
    let bootstrap = if a.bootstrap > 0 {
        let opts = BootstrapOptions {
            guards,
            log_space: a.log_space,
            floor: a.log_floor,
            ..BootstrapOptions::new(a.method)
        };
        let seed = derive(a.seed, Purpose::Bootstrap);
        Some(evaluate::bootstrap_metrics(&pair, a.bootstrap, seed, &opts)?)
    } else {
        None
    };
    let fdc_obs = evaluate::flow_duration_curve(pair.obs())?;
    let fdc_sim = evaluate::flow_duration_curve(pair.sim())?;
    let groups = evaluate::flow_group_anomalies(&pair, a.log_floor)?;
    let months = evaluate::monthly_percent_bias(&pair);
    let qq = evaluate::qq_data(&pair);

    let dir = &a.out_dir;
    let json = serde_json::to_string_pretty(&report).map_err(jkge::Error::from)?;
    write_text(&out_path(dir, "report.json"), &json)?;
    write_atomic(&out_path(dir, "fdc.csv"), |w| {
        evaluate::write_fdc_csv(w, &[("obs", &fdc_obs), ("sim", &fdc_sim)])
    })?;
    write_atomic(&out_path(dir, "flowgroups.csv"), |w| evaluate::write_flow_groups_csv(w, &groups))?;
    write_atomic(&out_path(dir, "monthly_bias.csv"), |w| evaluate::write_monthly_bias_csv(w, &months))?;
    write_atomic(&out_path(dir, "qq.csv"), |w| evaluate::write_qq_csv(w, &qq))?;
    if let Some(b) = &bootstrap {
        write_atomic(&out_path(dir, "bootstrap.csv"), |w| evaluate::write_bootstrap_csv(w, b))?;
    }

    for (key, value) in report.entries() {
        match value {
            Some(v) => println!("{key:>14}  {v:.6}"),
            None => println!("{key:>14}  -"),
        }
    }
    for (key, why) in &report.reasons {
        eprintln!("{key}: {why}");
    }
    Ok(())
}

fn adam_config(t: &TrainingArgs) -> CliResult<AdamConfig> {
    positive("lr", t.lr)?;
    if t.epochs == 0 {
        return Err(usage("--epochs must be at least 1"));
    }
    if t.seeds == 0 {
        return Err(usage("--seeds must be at least 1"));
    }
    if !(t.train_fraction > 0.0 && t.train_fraction < 1.0) {
        return Err(usage(format!("--train-fraction must lie in (0, 1), got {}", t.train_fraction)));
    }
    Ok(AdamConfig {
        lr: t.lr,
        epochs: t.epochs,
        seed: derive(t.seed, Purpose::Calibrate),
        ..AdamConfig::default()
    })
}

fn load_forcings_obs(forcings: &Path, obs: &Path) -> CliResult<(ForcingSeries, TimeSeries)> {
    let f = ForcingSeries::load(forcings)?;
    let o = load_series(obs, "date", "value", Unit::MmPerDay)?;
    Ok((f, o))
}

fn calibrate_cmd(a: CalibrateArgs) -> CliResult<()> {
    let adam = adam_config(&a.training)?;
    let (forcings, obs) = load_forcings_obs(&a.forcings, &a.obs)?;
    let t = &a.training;
    let prepared = experiment::prepare(&forcings, &obs, t.train_fraction, t.spinup_years)?;
    let setup = prepared.setup(Target {
        metric: a.metric,
        method: a.method,
    })?;
    let result = multi_seed_calibrate(&setup, t.seeds, &adam)?;
    let sim = setup.simulate(&result.params)?;

    let dir = &a.out_dir;
    write_text(&out_path(dir, "calibration.json"), &result.to_json()?)?;
    write_text(&out_path(dir, "params.json"), &result.params.to_json()?)?;
    write_series(&out_path(dir, "sim.csv"), &sim)?;
    println!(
        "{} seed {}: train {} {:.6}, eval {:.6}",
        a.metric, result.seed, a.metric, result.train_metric, result.eval_metric
    );
    Ok(())
}

fn random_pair(rng: &mut ChaCha8Rng, n: usize) -> jkge::Result<PairedSeries> {
    let phase = rng.random_range(0.0..std::f64::consts::TAU);
    let obs: Vec<f64> = (0..n)
        .map(|t| 2.0 + (t as f64 / 20.0 + phase).sin() + rng.random_range(0.0..1.5))
        .collect();
    let gain = rng.random_range(0.6..1.3);
    let sim: Vec<f64> = obs.iter().map(|o| gain * o + rng.random_range(0.0..1.0)).collect();
    PairedSeries::from_values(&obs, &sim)
}

fn grad_check(a: GradCheckArgs) -> CliResult<()> {
    positive("h", a.h)?;
    positive("tol", a.tol)?;
    if a.cases == 0 {
        return Err(usage("--cases must be at least 1"));
    }
    let seed = derive(a.seed, Purpose::GradCheck);
    println!("{:<10} {:<10} {:>6} {:>8} {:>12}  result", "method", "metric", "cases", "skipped", "max_rel_err");
    let mut failures = 0;
    for (mi, &method) in a.methods.iter().enumerate() {
        for metric in GradMetric::ALL {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(mi as u64);
            let mut worst: f64 = 0.0;
            let mut skipped = 0;
            for _ in 0..a.cases {
                let n = rng.random_range(30..=200);
                let pair = random_pair(&mut rng, n)?;
                match fd_check(metric, &pair, method, a.h) {
                    Ok(err) => worst = worst.max(err),
                    Err(jkge::Error::GradientUndefined(_) | jkge::Error::Degenerate(_)) => skipped += 1,
                    Err(e) => return Err(e.into()),
                }
            }
            let pass = worst <= a.tol && skipped < a.cases;
            if !pass {
                failures += 1;
            }
            println!(
                "{:<10} {:<10} {:>6} {:>8} {:>12.3e}  {}",
                method.to_string(),
                metric.to_string(),
                a.cases,
                skipped,
                worst,
                if pass { "PASS" } else { "FAIL" }
            );
        }
    }
    if failures > 0 {
        return Err(CliError::Failed(format!("{failures} gradient checks failed")));
    }
    Ok(())
}

fn synth_config(path: Option<&Path>, seed: Option<u64>) -> CliResult<SynthConfig> {
    let mut cfg = match path {
        Some(p) => SynthConfig::load(p)?,
        None => SynthConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = derive(s, Purpose::Synth);
    }
    Ok(cfg)
}

fn synth(a: SynthArgs) -> CliResult<()> {
    let cfg = synth_config(a.config.as_deref(), a.seed)?;
    let c = generate_catchment(&cfg)?;
    write_atomic(&out_path(&a.out_dir, "forcings.csv"), |w| c.forcings.write(w))?;
    write_series(&out_path(&a.out_dir, "obs.csv"), &c.obs)?;
    println!("{} days from {}", c.obs.len(), c.obs.start());
    Ok(())
}

fn file_label(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '-' })
        .collect()
}

fn experiment_cmd(a: ExperimentArgs) -> CliResult<()> {
    let adam = adam_config(&a.training)?;
    if a.methods.is_empty() {
        return Err(usage("--methods must name at least one benchmark"));
    }
    let (forcings, obs) = match (&a.forcings, &a.obs) {
        (Some(f), Some(o)) => load_forcings_obs(f, o)?,
        _ => {
            let cfg = synth_config(a.synth_config.as_deref(), Some(a.training.seed))?;
            let c = generate_catchment(&cfg)?;
            (c.forcings, c.obs)
        }
    };
    let mut targets: Vec<Target> = a
        .methods
        .iter()
        .map(|&method| Target {
            metric: a.metric,
            method,
        })
        .collect();
    if !a.no_baseline {
        targets.push(Target {
            metric: MetricName::KgeSs,
            method: BenchmarkMethod::Ltm,
        });
    }
    let mut cfg = ExperimentConfig::new(Vec::new(), a.report_method);
    cfg.adam = adam;
    cfg.n_seeds = a.training.seeds;
    cfg.train_fraction = a.training.train_fraction;
    cfg.spinup_years = a.training.spinup_years;

    let prepared = experiment::prepare(&forcings, &obs, cfg.train_fraction, cfg.spinup_years)?;
    let mut rows = Vec::new();
    let mut eval_rows = Vec::new();
    for target in targets {
        let setup = prepared.setup(target)?;
        let calibration = multi_seed_calibrate(&setup, cfg.n_seeds, &cfg.adam)?;
        let run = experiment::score(&prepared, target, calibration, cfg.report_method)?;
        let label = target.label();
        eprintln!(
            "{label}: jkge_ss {} kge_ss {}",
            fmt_opt(run.report.jkge_ss),
            fmt_opt(run.report.kge_ss)
        );
        let json = serde_json::to_string_pretty(&run).map_err(jkge::Error::from)?;
        write_text(&out_path(&a.out_dir, &format!("run_{}.json", file_label(&label))), &json)?;
        if let Some(sim) = &run.sim {
            write_series(&out_path(&a.out_dir, &format!("sim_{}.csv", file_label(&label))), sim)?;
        }
        rows.push((label.clone(), run.report.clone()));
        eval_rows.push((label, run.eval_report.clone()));
    }
    write_atomic(&out_path(&a.out_dir, "summary.csv"), |w| metrics::write_reports_csv(w, &rows))?;
    write_atomic(&out_path(&a.out_dir, "summary_eval.csv"), |w| {
        metrics::write_reports_csv(w, &eval_rows)
    })?;
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into())
}

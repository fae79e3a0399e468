use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, Context};
use cotagree_core::selfplay::{run_training, IterationRecord, SelfPlayError, LEVELS};
use cotagree_core::{aggregate_profiles, Config, DisagreementProfile, Heatmap};
use cotagree_service::{ApiError, DiagnoseResponse, ErrorBody, ScoreRequest, ScoreResponse, Scorer};
use serde::{Deserialize, Serialize};

use crate::batches::read_groups;
use crate::plot;
use crate::{Cli, CliError, Command};

type Result<T> = std::result::Result<T, CliError>;

fn input(e: impl Into<anyhow::Error>) -> CliError {
    CliError::Input(e.into())
}

fn internal(e: impl Into<anyhow::Error>) -> CliError {
    CliError::Internal(e.into())
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Score { input, config, step, output } => score(&input, config.as_deref(), step, output.as_deref()),
        Command::Simulate { config, seed, steps, metrics, plots } => {
            simulate(config.as_deref(), seed, steps, &metrics, plots.as_deref())
        }
        Command::Diagnose { input, config, output } => diagnose(&input, config.as_deref(), output.as_deref()),
        Command::Serve { addr, config } => serve(&addr, config.as_deref()),
        Command::Plot { metrics, diagnostics, out } => plot_files(metrics.as_deref(), diagnostics.as_deref(), &out),
    }
}

fn load_config(path: Option<&Path>) -> Result<Config> {
    match path {
        Some(p) => Config::load(p).map_err(input),
        None => Ok(Config::default()),
    }
}

fn scorer(path: Option<&Path>) -> Result<Scorer> {
    Scorer::new(load_config(path)?).map_err(input)
}

fn write_output(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, bytes).with_context(|| format!("cannot write {}", p.display())).map_err(input),
        None => std::io::stdout().write_all(bytes).map_err(input),
    }
}

/// One line of `cotagree score` output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreLine {
    pub id: String,
    pub question: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<ScoreResponse>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorBody>,
}

/// One entry of `cotagree diagnose` output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnoseEntry {
    pub id: String,
    pub question: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnosis: Option<DiagnoseResponse>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heatmap: Option<Heatmap>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorBody>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnoseReport {
    pub groups: Vec<DiagnoseEntry>,
    /// Mean disagreement per step over the groups that could be diagnosed.
    pub aggregate: DisagreementProfile<f64>,
}

/// Per-group failures that are properties of the data (nothing parsed, no
/// comparable steps) are reported inline; anything else aborts.
fn recoverable(e: ApiError) -> Result<ErrorBody> {
    match e {
        ApiError::NoParsedRollouts(_) | ApiError::GroupTooSmall => Ok(e.body()),
        ApiError::Internal(_) => Err(internal(e)),
        other => Err(input(other)),
    }
}

fn score(path: &Path, config: Option<&Path>, step: Option<u64>, output: Option<&Path>) -> Result<()> {
    let scorer = scorer(config)?;
    let groups = read_groups(path).map_err(input)?;
    let mut out = Vec::new();
    let mut failed = 0;
    for g in groups.iter() {
        let req = ScoreRequest { question: g.question.clone(), rollouts: g.texts.clone(), step, config_overrides: None };
        let (score, error) = match scorer.score(&req) {
            Ok(s) => (Some(s), None),
            Err(e) => {
                failed += 1;
                (None, Some(recoverable(e)?))
            }
        };
        let line = ScoreLine { id: g.id.clone(), question: g.question.clone(), score, error };
        serde_json::to_writer(&mut out, &line).map_err(internal)?;
        out.push(b'\n');
    }
    write_output(output, &out)?;
    eprintln!("scored {} groups ({failed} without a parsed rollout)", groups.len());
    Ok(())
}

fn diagnose(path: &Path, config: Option<&Path>, output: Option<&Path>) -> Result<()> {
    let scorer = scorer(config)?;
    let groups = read_groups(path).map_err(input)?;
    let mut entries = Vec::new();
    let mut profiles = Vec::new();
    for g in &groups {
        let req = ScoreRequest { question: g.question.clone(), rollouts: g.texts.clone(), step: None, config_overrides: None };
        let mut entry = DiagnoseEntry { id: g.id.clone(), question: g.question.clone(), diagnosis: None, heatmap: None, error: None };
        match scorer.diagnose(&req) {
            Ok(d) => {
                profiles.push(d.profile.clone());
                entry.heatmap = Some(Heatmap::from(&d.loo));
                entry.diagnosis = Some(d);
            }
            Err(e) => entry.error = Some(recoverable(e)?),
        }
        entries.push(entry);
    }
    let report = DiagnoseReport { groups: entries, aggregate: aggregate_profiles(&profiles) };
    let mut bytes = serde_json::to_vec_pretty(&report).map_err(internal)?;
    bytes.push(b'\n');
    write_output(output, &bytes)?;
    let peak = report.aggregate.argmax().map_or("none".to_string(), |j| j.to_string());
    eprintln!("diagnosed {} of {} groups; peak disagreement at step {peak}", profiles.len(), groups.len());
    Ok(())
}

/// Guarantees every record must satisfy; a violation means a bug, not bad input.
fn check_records(records: &[IterationRecord]) -> anyhow::Result<()> {
    for r in records {
        let mass = r.p_grounded + r.p_shortcut + r.p_offmode;
        if (mass - 1.0).abs() > 1e-9 {
            return Err(anyhow!("t={}: solver probabilities sum to {mass}", r.t));
        }
        let bounded = [r.majority_density, r.lambda, r.mean_r_ans];
        if bounded.iter().any(|v| !(0.0..=1.0).contains(v)) || !(r.answer_entropy >= 0.0) {
            return Err(anyhow!("t={}: metric out of range", r.t));
        }
        if !(1..=LEVELS as u8).contains(&r.difficulty) {
            return Err(anyhow!("t={}: difficulty {} out of range", r.t, r.difficulty));
        }
    }
    Ok(())
}

fn simulate(config: Option<&Path>, seed: u64, steps: Option<u64>, metrics: &Path, plots: Option<&Path>) -> Result<()> {
    let mut cfg = load_config(config)?;
    if let Some(n) = steps {
        cfg.simulator.steps = n;
    }
    let log = run_training(&cfg, seed).map_err(|e| match e {
        SelfPlayError::Config(_) | SelfPlayError::Scene(_) | SelfPlayError::SceneBank(_) => input(e),
        SelfPlayError::Score(_) | SelfPlayError::Optim(_) => internal(e),
    })?;
    check_records(&log.records).map_err(internal)?;
    let file = std::fs::File::create(metrics).with_context(|| format!("cannot write {}", metrics.display())).map_err(input)?;
    let mut w = std::io::BufWriter::new(file);
    log.write_jsonl(&mut w).and_then(|_| w.flush()).map_err(input)?;
    if let Some(dir) = plots {
        write_charts(dir, plot::training_charts(&log.records))?;
    }
    let s = log.summary(cfg.schedule.warmup_steps);
    eprintln!("{} steps, seed {seed}, config {}", s.steps, log.config_hash);
    eprintln!("  majority density     {:.3} -> {:.3}", s.density_first, s.density_last);
    eprintln!("  mean step similarity {:.3} -> {:.3}", s.similarity_first, s.similarity_last);
    eprintln!(
        "  final P(grounded) {:.3}  P(shortcut) {:.3}  P(offmode) {:.3}",
        s.final_p_grounded, s.final_p_shortcut, s.final_p_offmode
    );
    eprintln!(
        "  running-mean entropy in [0.3, 1.4]: {:.1}%  in [0.6, 1.1]: {:.1}%",
        100.0 * s.entropy_in_wide_band,
        100.0 * s.entropy_in_narrow_band
    );
    Ok(())
}

fn write_charts(dir: &Path, charts: Vec<(String, String)>) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display())).map_err(input)?;
    for (name, svg) in charts {
        let path: PathBuf = dir.join(name);
        std::fs::write(&path, svg).with_context(|| format!("cannot write {}", path.display())).map_err(input)?;
    }
    Ok(())
}

fn read_metrics(path: &Path) -> Result<Vec<IterationRecord>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display())).map_err(input)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(k, l)| serde_json::from_str(l).map_err(|e| input(anyhow!("{}:{}: {e}", path.display(), k + 1))))
        .collect()
}

fn plot_files(metrics: Option<&Path>, diagnostics: Option<&Path>, out: &Path) -> Result<()> {
    let mut charts = Vec::new();
    if let Some(m) = metrics {
        charts.extend(plot::training_charts(&read_metrics(m)?));
    }
    if let Some(d) = diagnostics {
        let text = std::fs::read_to_string(d).with_context(|| format!("cannot read {}", d.display())).map_err(input)?;
        let report: DiagnoseReport =
            serde_json::from_str(&text).with_context(|| format!("{} is not a diagnose report", d.display())).map_err(input)?;
        charts.extend(plot::diagnostic_charts(&report));
    }
    let n = charts.len();
    write_charts(out, charts)?;
    eprintln!("wrote {n} charts to {}", out.display());
    Ok(())
}

fn serve(addr: &str, config: Option<&Path>) -> Result<()> {
    let scorer = Arc::new(scorer(config)?);
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build().map_err(internal)?;
    rt.block_on(async move {
        let listener = cotagree_service::bind(addr).await.with_context(|| format!("cannot bind {addr}")).map_err(input)?;
        let local = listener.local_addr().map_err(internal)?;
        println!("listening on http://{local}");
        std::io::stdout().flush().map_err(internal)?;
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
        };
        cotagree_service::serve(listener, scorer, shutdown).await.map_err(internal)?;
        eprintln!("shut down");
        Ok(())
    })
}

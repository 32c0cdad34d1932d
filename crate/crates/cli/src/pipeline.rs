//! The five pipeline stages and the layout of the output tree.
//!
//! ```text
//! <out>/config.toml                         resolved configuration
//! <out>/data/manifest.csv                   split,household_id,microgrid_id,day,seed,path
//! <out>/data/<split>/h<id>/day<k>.csv       one realized day
//! <out>/train/<mode>/round_log.csv
//! <out>/train/<mode>/checkpoints/round_<r>.params
//! <out>/train/isolated/clients/h<id>.params
//! <out>/train/<mode>/rollback/h<id>.params  only after an aborted round
//! <out>/baseline/solutions/h<id>_day<k>.csv
//! <out>/baseline/reports.csv
//! <out>/eval/reports.csv
//! <out>/report/{table.txt,table.csv,deltas.csv}
//! ```
//!
//! Every stage computes in memory (in parallel where it helps) and then
//! writes its files one at a time, so the tree depends only on the
//! configuration.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use microgrid_fl::agent::{self, AgentParams, MeanAction};
use microgrid_fl::datagen::{generate_day, DayData};
use microgrid_fl::env::{HouseholdEnv, HouseholdScenario, Idle, Policy};
use microgrid_fl::federation::{
    round_log_csv, run_federated_training, run_isolated_training, TrainingResult, TrainingSetup,
};
use microgrid_fl::metrics::{
    aggregate, comparison_table, pair_deltas, ArmScores, ComparisonTable, DeltaReport, EpisodeReport, Level,
    ScoreSummary,
};
use microgrid_fl::oracle::{replay, solve_lp, DispatchProblem};
use microgrid_fl::par::{self, Exec};
use microgrid_fl::seed::{self, stream};

use crate::config::{Role, RunConfig};
use crate::reports::{self, ReportRow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum TrainMode {
    Federated,
    Isolated,
}

impl TrainMode {
    pub fn name(self) -> &'static str {
        match self {
            TrainMode::Federated => "federated",
            TrainMode::Isolated => "isolated",
        }
    }
}

pub const ARM_BASE: &str = "base";
pub const ARM_ORACLE: &str = "oracle";

/// Paths inside an output directory.
#[derive(Debug, Clone)]
pub struct OutDir(pub PathBuf);

impl OutDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self(root.into())
    }
    pub fn root(&self) -> &Path {
        &self.0
    }
    pub fn config(&self) -> PathBuf {
        self.0.join("config.toml")
    }
    pub fn data(&self) -> PathBuf {
        self.0.join("data")
    }
    pub fn manifest(&self) -> PathBuf {
        self.data().join("manifest.csv")
    }
    pub fn day_csv_rel(role: Role, household: u32, day: usize) -> String {
        format!("{}/h{household}/day{day}.csv", role.name())
    }
    pub fn train(&self, mode: TrainMode) -> PathBuf {
        self.0.join("train").join(mode.name())
    }
    pub fn round_log(&self, mode: TrainMode) -> PathBuf {
        self.train(mode).join("round_log.csv")
    }
    pub fn checkpoints(&self, mode: TrainMode) -> PathBuf {
        self.train(mode).join("checkpoints")
    }
    pub fn checkpoint(&self, mode: TrainMode, round: usize) -> PathBuf {
        self.checkpoints(mode).join(format!("round_{round:04}.params"))
    }
    pub fn client_params(&self, household: u32) -> PathBuf {
        self.train(TrainMode::Isolated).join("clients").join(format!("h{household}.params"))
    }
    pub fn rollback(&self, mode: TrainMode, household: u32) -> PathBuf {
        self.train(mode).join("rollback").join(format!("h{household}.params"))
    }
    pub fn baseline(&self) -> PathBuf {
        self.0.join("baseline")
    }
    pub fn baseline_reports(&self) -> PathBuf {
        self.baseline().join("reports.csv")
    }
    pub fn solution(&self, household: u32, day: usize) -> PathBuf {
        self.baseline().join("solutions").join(format!("h{household}_day{day}.csv"))
    }
    pub fn eval(&self) -> PathBuf {
        self.0.join("eval")
    }
    pub fn eval_reports(&self) -> PathBuf {
        self.eval().join("reports.csv")
    }
    pub fn report(&self) -> PathBuf {
        self.0.join("report")
    }
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

/// Removes a stage directory left by an earlier run so stale files cannot
/// survive into the new tree.
fn reset_dir(path: &Path) -> Result<()> {
    match fs::remove_dir_all(path) {
        Ok(()) => Ok(()),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(()),
        Err(e) => Err(e).with_context(|| format!("clearing {}", path.display())),
    }
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn require(paths: &[PathBuf]) -> Result<()> {
    let missing: Vec<String> = paths.iter().filter(|p| !p.exists()).map(|p| p.display().to_string()).collect();
    if !missing.is_empty() {
        bail!("missing artifacts (run the earlier stages first):\n  {}", missing.join("\n  "));
    }
    Ok(())
}

fn write_config(cfg: &RunConfig, out: &OutDir) -> Result<()> {
    write_file(&out.config(), cfg.to_toml()?)
}

/// Seed of day `day` for a household; used by every stage that needs fixed
/// days (export, validation, evaluation, oracle).
pub fn day_seed(cfg: &RunConfig, household: u32, day: usize) -> u64 {
    seed::derive(cfg.seed, &[stream::DATA, u64::from(household), day as u64])
}

#[derive(Debug, Clone)]
pub struct Episode {
    pub role: Role,
    pub scenario: HouseholdScenario,
    pub day_index: usize,
    pub day: DayData,
}

/// The fixed evaluation days of every household in `roles`, household-major.
pub fn episodes(cfg: &RunConfig, roles: &[Role], days: usize) -> Result<Vec<Episode>> {
    let mut out = Vec::new();
    for &role in roles {
        for scenario in cfg.households_in(role) {
            for d in 0..days {
                let day = generate_day(&scenario, &cfg.grid, cfg.horizon, day_seed(cfg, scenario.household_id, d))?;
                out.push(Episode { role, scenario: scenario.clone(), day_index: d, day });
            }
        }
    }
    Ok(out)
}

pub fn training_setup(cfg: &RunConfig) -> Result<TrainingSetup> {
    let validation =
        episodes(cfg, &[Role::Validation], cfg.eval_days)?.into_iter().map(|e| (e.scenario, e.day)).collect();
    Ok(TrainingSetup {
        layout: cfg.network.clone(),
        train: cfg.train.clone(),
        grid: cfg.grid.clone(),
        reward: cfg.reward,
        horizon: cfg.horizon,
        validation,
    })
}

pub fn train(cfg: &RunConfig, mode: TrainMode, exec: Exec) -> Result<TrainingResult> {
    let setup = training_setup(cfg)?;
    let clients = cfg.households_in(Role::Train);
    Ok(match mode {
        TrainMode::Federated => run_federated_training(&clients, &setup, &cfg.federation, cfg.seed, exec),
        TrainMode::Isolated => run_isolated_training(&clients, &setup, &cfg.federation, cfg.seed, exec),
    })
}

fn row(arm: &str, role: Role, day: usize, report: &EpisodeReport, cfg: &RunConfig) -> ReportRow {
    ReportRow {
        arm: arm.to_string(),
        split: role,
        day,
        summary: report.summary(&cfg.reward),
        imported_energy: report.imported_energy(),
    }
}

/// Writes the realized days of every assigned household plus a manifest.
pub fn cmd_generate(cfg: &RunConfig, out: &OutDir, days: usize) -> Result<()> {
    cfg.validate()?;
    let eps = episodes(cfg, &[Role::Train, Role::Validation, Role::Test], days)?;
    reset_dir(&out.data())?;
    write_config(cfg, out)?;
    let mut manifest = String::from("split,household_id,microgrid_id,day,seed,path\n");
    for e in &eps {
        let id = e.scenario.household_id;
        let rel = OutDir::day_csv_rel(e.role, id, e.day_index);
        write_file(&out.data().join(&rel), e.day.to_csv())?;
        let _ = writeln!(
            manifest,
            "{},{id},{},{},{},{rel}",
            e.role.name(),
            e.scenario.microgrid_id,
            e.day_index,
            day_seed(cfg, id, e.day_index)
        );
    }
    write_file(&out.manifest(), manifest)
}

/// Trains and writes the round log and checkpoints. On a numerical failure
/// the parameters from the last barrier are written under `rollback/` and
/// the error is returned.
pub fn cmd_train(cfg: &RunConfig, out: &OutDir, mode: TrainMode, exec: Exec) -> Result<()> {
    cfg.validate()?;
    let result = train(cfg, mode, exec)?;
    reset_dir(&out.train(mode))?;
    write_config(cfg, out)?;
    match result {
        Ok(outcome) => {
            write_file(&out.round_log(mode), round_log_csv(&outcome.logs))?;
            write_file(&out.checkpoint(mode, 0), agent::write_text(&outcome.initial))?;
            for (i, p) in outcome.checkpoints.iter().enumerate() {
                write_file(&out.checkpoint(mode, i + 1), agent::write_text(p))?;
            }
            if mode == TrainMode::Isolated && cfg.federation.rounds > 0 {
                for c in &outcome.clients {
                    write_file(&out.client_params(c.client_id), agent::write_text(&c.params))?;
                }
            }
            Ok(())
        }
        Err(aborted) => {
            write_file(&out.round_log(mode), round_log_csv(&aborted.logs))?;
            for (scenario, p) in cfg.households_in(Role::Train).iter().zip(&aborted.rollback) {
                write_file(&out.rollback(mode, scenario.household_id), agent::write_text(p))?;
            }
            Err(anyhow::Error::new(*aborted)
                .context(format!("{} training aborted; rolled-back parameters written", mode.name())))
        }
    }
}

/// Perfect-foresight dispatch for every train and test household-day,
/// replayed through the environment.
pub fn cmd_baseline(cfg: &RunConfig, out: &OutDir, exec: Exec) -> Result<()> {
    cfg.validate()?;
    let eps = episodes(cfg, &[Role::Train, Role::Test], cfg.eval_days)?;
    let solved = par::try_map(exec, &eps, |e| -> Result<(String, ReportRow)> {
        let id = e.scenario.household_id;
        let problem = DispatchProblem::new(e.day.clone(), e.scenario.battery.clone(), cfg.reward)?;
        let solution = solve_lp(&problem).with_context(|| format!("household {id} day {}", e.day_index))?;
        let report = replay(&solution, &e.scenario, &e.day, &cfg.reward)
            .with_context(|| format!("replaying household {id} day {}", e.day_index))?;
        Ok((solution.to_csv(&problem), row(ARM_ORACLE, e.role, e.day_index, &report, cfg)))
    })?;
    reset_dir(&out.baseline())?;
    write_config(cfg, out)?;
    let mut rows = Vec::with_capacity(solved.len());
    for (e, (csv, r)) in eps.iter().zip(solved) {
        write_file(&out.solution(e.scenario.household_id, e.day_index), csv)?;
        rows.push(r);
    }
    write_file(&out.baseline_reports(), reports::to_csv(&rows))
}

fn latest_checkpoint(out: &OutDir, mode: TrainMode) -> Result<PathBuf> {
    let dir = out.checkpoints(mode);
    let mut best: Option<(usize, PathBuf)> = None;
    for entry in fs::read_dir(&dir).with_context(|| format!("listing {}", dir.display()))? {
        let path = entry?.path();
        let round = path
            .file_name()
            .and_then(|n| n.to_str())
            .and_then(|n| n.strip_prefix("round_"))
            .and_then(|n| n.strip_suffix(".params"))
            .and_then(|n| n.parse::<usize>().ok());
        if let Some(r) = round {
            if best.as_ref().is_none_or(|(b, _)| r > *b) {
                best = Some((r, path));
            }
        }
    }
    best.map(|(_, p)| p).with_context(|| format!("no checkpoints in {}", dir.display()))
}

fn load_params(path: &Path) -> Result<AgentParams> {
    agent::read_text(&read_file(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn run_with(e: &Episode, policy: &mut dyn Policy, cfg: &RunConfig) -> Result<EpisodeReport> {
    Ok(HouseholdEnv::new(&e.scenario, &e.day)?.run_episode(policy, &cfg.reward)?)
}

fn mean_row(arm: &str, e: &Episode, rows: &[ReportRow]) -> ReportRow {
    let n = rows.len() as f64;
    let avg = |f: &dyn Fn(&ReportRow) -> f64| rows.iter().map(f).sum::<f64>() / n;
    ReportRow {
        arm: arm.to_string(),
        split: e.role,
        day: e.day_index,
        summary: ScoreSummary {
            price_score: avg(&|r| r.summary.price_score),
            emission_score: avg(&|r| r.summary.emission_score),
            reward: avg(&|r| r.summary.reward),
            ..rows[0].summary
        },
        imported_energy: avg(&|r| r.imported_energy),
    }
}

/// Scores the no-battery base, the isolated agents and the federated agent
/// with deterministic mean actions. A training household is scored with its
/// own isolated agent; a test household with the mean over all isolated
/// agents' scores.
pub fn cmd_evaluate(cfg: &RunConfig, out: &OutDir, exec: Exec) -> Result<()> {
    cfg.validate()?;
    require(&[out.round_log(TrainMode::Federated), out.round_log(TrainMode::Isolated)])?;
    let federated = load_params(&latest_checkpoint(out, TrainMode::Federated)?)?;
    let isolated_initial = out.checkpoint(TrainMode::Isolated, 0);
    let mut isolated: BTreeMap<u32, AgentParams> = BTreeMap::new();
    for h in cfg.households_in(Role::Train) {
        let path = out.client_params(h.household_id);
        let path = if cfg.federation.rounds == 0 { isolated_initial.clone() } else { path };
        isolated.insert(h.household_id, load_params(&path)?);
    }

    let eps = episodes(cfg, &[Role::Train, Role::Test], cfg.eval_days)?;
    let scored = par::try_map(exec, &eps, |e| -> Result<[ReportRow; 3]> {
        let base = run_with(e, &mut Idle, cfg)?;
        let fed = run_with(e, &mut MeanAction(&federated), cfg)?;
        let iso = match isolated.get(&e.scenario.household_id) {
            Some(own) => row("isolated", e.role, e.day_index, &run_with(e, &mut MeanAction(own), cfg)?, cfg),
            None => {
                let each = isolated
                    .values()
                    .map(|p| Ok(row("isolated", e.role, e.day_index, &run_with(e, &mut MeanAction(p), cfg)?, cfg)))
                    .collect::<Result<Vec<_>>>()?;
                mean_row("isolated", e, &each)
            }
        };
        Ok([row(ARM_BASE, e.role, e.day_index, &base, cfg), iso, row("federated", e.role, e.day_index, &fed, cfg)])
    })?;
    let mut rows = Vec::with_capacity(3 * scored.len());
    for arm in 0..3 {
        rows.extend(scored.iter().map(|r| r[arm].clone()));
    }
    reset_dir(&out.eval())?;
    write_config(cfg, out)?;
    write_file(&out.eval_reports(), reports::to_csv(&rows))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeltaRow {
    pub arm: String,
    pub split: Role,
    pub report: DeltaReport,
}

pub const DELTAS_CSV_HEADER: &str = "arm,split,level,id,microgrid_id,p_delta,c_delta,weight";

pub fn deltas_csv(rows: &[DeltaRow]) -> String {
    let mut out = String::from(DELTAS_CSV_HEADER);
    out.push('\n');
    for r in rows {
        let d = &r.report;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.arm,
            r.split.name(),
            d.level.name(),
            d.id,
            d.microgrid_id,
            d.p_delta,
            d.c_delta,
            d.weight
        );
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportOutcome {
    pub table: ComparisonTable,
    pub deltas: Vec<DeltaRow>,
}

impl ReportOutcome {
    pub fn delta(&self, arm: &str, split: Role, level: Level, id: u32) -> Option<&DeltaReport> {
        self.deltas
            .iter()
            .find(|r| r.arm == arm && r.split == split && r.report.level == level && r.report.id == id)
            .map(|r| &r.report)
    }
}

/// Comparison table and deltas from in-memory report rows.
pub fn build_report(cfg: &RunConfig, baseline: &[ReportRow], evaluation: &[ReportRow]) -> Result<ReportOutcome> {
    let all: Vec<ReportRow> = baseline.iter().chain(evaluation).cloned().collect();
    let arm = |name: &str| ArmScores {
        train: reports::select(&all, name, Role::Train),
        test: reports::select(&all, name, Role::Test),
    };
    let table = comparison_table(&arm(ARM_ORACLE), &arm("isolated"), &arm("federated"))?;

    let mut deltas = Vec::new();
    for name in [ARM_ORACLE, "isolated", "federated"] {
        for split in [Role::Train, Role::Test] {
            let base = reports::select(&all, ARM_BASE, split);
            let treated = reports::select(&all, name, split);
            if treated.is_empty() {
                continue;
            }
            let energy: BTreeMap<(u32, u64), f64> = all
                .iter()
                .filter(|r| r.arm == ARM_BASE && r.split == split)
                .map(|r| ((r.summary.household_id, r.summary.day_fingerprint), r.imported_energy))
                .collect();
            let mut household =
                pair_deltas(&base, &treated).with_context(|| format!("{name} vs base on {}", split.name()))?;
            for (d, t) in household.iter_mut().zip(&treated) {
                d.weight = energy[&(t.household_id, t.day_fingerprint)];
            }
            for level in [Level::Household, Level::Microgrid, Level::Distributor] {
                for report in aggregate(&household, level, cfg.weighting)? {
                    deltas.push(DeltaRow { arm: name.to_string(), split, report });
                }
            }
        }
    }
    Ok(ReportOutcome { table, deltas })
}

pub fn cmd_report(cfg: &RunConfig, out: &OutDir) -> Result<ReportOutcome> {
    cfg.validate()?;
    require(&[
        out.baseline_reports(),
        out.eval_reports(),
        out.round_log(TrainMode::Federated),
        out.round_log(TrainMode::Isolated),
    ])?;
    let baseline = reports::from_csv(&read_file(&out.baseline_reports())?).context("baseline reports")?;
    let evaluation = reports::from_csv(&read_file(&out.eval_reports())?).context("evaluation reports")?;
    let outcome = build_report(cfg, &baseline, &evaluation)?;
    reset_dir(&out.report())?;
    write_config(cfg, out)?;
    write_file(&out.report().join("table.txt"), outcome.table.to_text())?;
    write_file(&out.report().join("table.csv"), outcome.table.to_csv())?;
    write_file(&out.report().join("deltas.csv"), deltas_csv(&outcome.deltas))?;
    Ok(outcome)
}

/// Every stage in order.
pub fn run_all(cfg: &RunConfig, out: &OutDir, exec: Exec) -> Result<ReportOutcome> {
    cmd_generate(cfg, out, cfg.eval_days)?;
    cmd_train(cfg, out, TrainMode::Federated, exec)?;
    cmd_train(cfg, out, TrainMode::Isolated, exec)?;
    cmd_baseline(cfg, out, exec)?;
    cmd_evaluate(cfg, out, exec)?;
    cmd_report(cfg, out)
}

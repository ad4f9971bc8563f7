//! Command-line surface: bank building, retrieval, skill maintenance, search
//! runs, evaluation and credit numerics.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use crate::credit::{gae, ppo_clip_term, CreditError};
use crate::data::write_atomic;
use crate::env::{read_trajectories, write_trajectories, Memories, Trajectory, TrajectoryError};
use crate::exembank::{
    build_bank, load_bank, parse_corpus, render_exemplar_block, retrieve_exemplars, save_bank, BankError,
    BankIoError, RecallMode, RetrievalConfig,
};
use crate::harness::{metrics, run_leads, term_signs, EvalReport, HarnessError, LeadOutcome, PolicySpec, SearchConfig};
use crate::molgraph::{parse, MolError, Molecule};
use crate::oracles::{check_success, BudgetLedger, Objective, ObjectiveConfig, Oracle, OracleError, PropertyMap};
use crate::skillbank::{
    harvest, render_skill_block, retrieve_skills, ExternalSummarizer, SkillBank, SkillIoError, SkillQuery,
    Summarizer, TemplateSummarizer, DEFAULT_CAPACITY, DEFAULT_HARVEST_DELTA, DEFAULT_TIME_CAP,
};

#[derive(Debug, Parser)]
#[command(name = "molforge", version, about = "Budgeted multi-turn molecular optimization with exemplar and skill memories")]
pub struct Cli {
    /// Log filter (error, warn, info, debug, trace).
    #[arg(long, global = true, default_value = "warn")]
    pub log: String,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build an exemplar bank from a SMILES corpus.
    BuildBank(BuildBankArgs),
    /// Print the exemplar reference block for a molecule.
    Retrieve(RetrieveArgs),
    /// Maintain a skill bank.
    Skills {
        #[command(subcommand)]
        command: SkillsCommand,
    },
    /// Optimize every lead and write trajectories and a report.
    Run(RunArgs),
    /// Recompute SR / Sim / RI from a report or a trajectory log.
    Eval(EvalArgs),
    /// Credit-assignment numerics.
    Credit {
        #[command(subcommand)]
        command: CreditCommand,
    },
}

#[derive(Debug, Args)]
pub struct BuildBankArgs {
    /// Corpus: `smiles[<TAB>name=value;...]` or JSON lines.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Builtin oracle filling properties missing from a row (repeatable).
    #[arg(long = "oracle")]
    pub oracles: Vec<String>,
    /// Objective whose oracles fill missing properties.
    #[arg(long)]
    pub objective: Option<PathBuf>,
    /// Output prefix; writes `<out>.bank.jsonl` and `<out>.fp.bin`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RetrieveArgs {
    /// Bank prefix written by build-bank.
    #[arg(long)]
    pub bank: PathBuf,
    #[arg(long)]
    pub objective: PathBuf,
    /// Lead molecule.
    #[arg(long)]
    pub lead: String,
    /// Recall centre; the lead when omitted.
    #[arg(long)]
    pub query: Option<String>,
    /// Exemplars returned.
    #[arg(short = 'k', long, default_value_t = 3)]
    pub k: usize,
    /// Minimum similarity of an exemplar to the lead.
    #[arg(long, default_value_t = 0.4)]
    pub gamma_ex: f64,
    /// Recall pool size.
    #[arg(long, default_value_t = 200)]
    pub pool: usize,
    /// Inverted-index recall probing this many query bits instead of a full scan.
    #[arg(long)]
    pub probe_bits: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum SkillsCommand {
    /// Distil improving transitions of a trajectory log into skills.
    Harvest(HarvestArgs),
    /// List stored skills.
    List(SkillBankArgs),
    /// Insert skill records from another JSONL file.
    Insert(InsertArgs),
    /// Ids a smaller capacity would evict.
    EvictReport(EvictArgs),
    /// Print the strategy block retrieved for a molecule.
    Retrieve(SkillRetrieveArgs),
}

#[derive(Debug, Args)]
pub struct SkillBankArgs {
    /// Skill bank JSONL.
    #[arg(long)]
    pub bank: PathBuf,
    /// Restrict to one task.
    #[arg(long)]
    pub task: Option<String>,
}

#[derive(Debug, Args)]
pub struct HarvestArgs {
    /// Trajectory JSONL written by `run`.
    pub trajectories: PathBuf,
    /// Skill bank JSONL, created when missing.
    #[arg(long)]
    pub bank: PathBuf,
    /// Task key the skills are stored under.
    #[arg(long)]
    pub task: String,
    /// Minimum score improvement of a harvested transition.
    #[arg(long, default_value_t = DEFAULT_HARVEST_DELTA)]
    pub delta: f64,
    /// Endpoint of an external summarizer; template sentences otherwise.
    #[arg(long)]
    pub summarizer: Option<String>,
    #[arg(long, default_value_t = 30_000)]
    pub timeout_ms: u64,
    #[arg(long, default_value_t = DEFAULT_CAPACITY)]
    pub skill_capacity: usize,
}

#[derive(Debug, Args)]
pub struct InsertArgs {
    /// Skill bank JSONL, created when missing.
    #[arg(long)]
    pub bank: PathBuf,
    /// Skill records to insert (same JSONL format).
    #[arg(long)]
    pub from: PathBuf,
    #[arg(long, default_value_t = DEFAULT_CAPACITY)]
    pub skill_capacity: usize,
}

#[derive(Debug, Args)]
pub struct EvictArgs {
    #[arg(long)]
    pub bank: PathBuf,
    #[arg(long, default_value_t = DEFAULT_CAPACITY)]
    pub skill_capacity: usize,
}

#[derive(Debug, Args)]
pub struct SkillRetrieveArgs {
    #[arg(long)]
    pub bank: PathBuf,
    #[arg(long)]
    pub task: String,
    /// Current molecule.
    #[arg(long)]
    pub smiles: String,
    #[arg(long, default_value_t = 3)]
    pub k_fp: usize,
    #[arg(long, default_value_t = 3)]
    pub k_fg: usize,
    #[arg(long, default_value_t = 0.4)]
    pub gamma_fp: f64,
    #[arg(long, default_value_t = 0.5)]
    pub gamma_fg: f64,
}

/// Search parameters. Unset flags fall back to the run config file, then to
/// the objective file's budget settings, then to the defaults shown.
#[derive(Debug, Args, Default)]
pub struct SearchFlags {
    /// Oracle-call budget per lead [default: 500]
    #[arg(long)]
    pub budget: Option<u64>,
    /// Similarity threshold to the lead [default: 0.4]
    #[arg(long)]
    pub gamma_sim: Option<f64>,
    /// Turns per rollout [default: 5]
    #[arg(long)]
    pub turns: Option<usize>,
    /// Generations [default: 20]
    #[arg(long)]
    pub generations: Option<usize>,
    /// Rollouts per generation [default: 32]
    #[arg(long)]
    pub rollouts: Option<usize>,
    /// Initial temperature [default: 0.9]
    #[arg(long)]
    pub temp0: Option<f64>,
    /// Temperature increment per generation [default: 0.1]
    #[arg(long)]
    pub temp_step: Option<f64>,
    /// Temperature cap [default: 2.0]
    #[arg(long)]
    pub temp_max: Option<f64>,
    /// Non-improving turns before memory is injected [default: 2]
    #[arg(long)]
    pub plateau: Option<usize>,
    /// Reward for copying an injected exemplar [default: -0.3]
    #[arg(long, allow_hyphen_values = true)]
    pub copy_penalty: Option<f64>,
    /// Probability of choosing exemplars when both memories apply [default: 0.5]
    #[arg(long)]
    pub memory_p: Option<f64>,
    /// Master seed [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Start rollouts from the incumbent instead of the lead
    #[arg(long)]
    pub warm_start_incumbent: bool,
    /// Harvest skills between generations
    #[arg(long)]
    pub harvest_online: bool,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Run config (TOML); flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Leads file, one SMILES per line.
    #[arg(long)]
    pub leads: Option<PathBuf>,
    /// Objective (TOML).
    #[arg(long)]
    pub objective: Option<PathBuf>,
    /// Exemplar bank prefix.
    #[arg(long)]
    pub bank: Option<PathBuf>,
    /// Skill bank JSONL.
    #[arg(long)]
    pub skills: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// random | greedy | wire:<endpoint> [default: random]
    #[arg(long)]
    pub policy: Option<String>,
    /// Wire timeout in milliseconds [default: 30000]
    #[arg(long)]
    pub timeout_ms: Option<u64>,
    /// Skill bank capacity [default: 1000]
    #[arg(long)]
    pub skill_capacity: Option<usize>,
    #[command(flatten)]
    pub search: SearchFlags,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// `report.json`, or a trajectory JSONL (needs --objective).
    pub input: PathBuf,
    #[arg(long)]
    pub objective: Option<PathBuf>,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Print the one-row TSV summary instead of JSON.
    #[arg(long)]
    pub tsv: bool,
}

#[derive(Debug, Subcommand)]
pub enum CreditCommand {
    /// Advantages as CSV: `t,advantage,return`.
    Gae(GaeArgs),
    /// One clipped surrogate term.
    Clip(ClipArgs),
}

#[derive(Debug, Args)]
pub struct GaeArgs {
    /// Rewards, comma- or whitespace-separated.
    #[arg(long)]
    pub rewards: PathBuf,
    /// Values, one more than rewards (terminal value last).
    #[arg(long)]
    pub values: PathBuf,
    #[arg(long, default_value_t = 0.99)]
    pub gamma: f64,
    #[arg(long, default_value_t = 0.95)]
    pub lambda: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ClipArgs {
    #[arg(long)]
    pub ratio: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub advantage: f64,
    #[arg(long, default_value_t = 0.2)]
    pub epsilon: f64,
}

/// Run config file. Paths resolve against the file's directory.
#[derive(Debug, Default, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub leads: Option<PathBuf>,
    pub objective: Option<PathBuf>,
    pub bank: Option<PathBuf>,
    pub skills: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub policy: Option<String>,
    pub timeout_ms: Option<u64>,
    pub skill_capacity: Option<usize>,
    pub gamma_sim: Option<f64>,
    pub search: Option<toml::Table>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}: {msg}")]
    Input { path: PathBuf, line: usize, msg: String },
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    BankIo(#[from] BankIoError),
    #[error(transparent)]
    Bank(#[from] BankError),
    #[error(transparent)]
    Skills(#[from] SkillIoError),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error(transparent)]
    Credit(#[from] CreditError),
    #[error("{smiles}: {source}")]
    Molecule { smiles: String, source: MolError },
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Io { .. } => "io",
            CliError::Input { .. } => "input",
            CliError::Oracle(_) => "oracle",
            CliError::BankIo(_) | CliError::Bank(_) => "bank",
            CliError::Skills(_) => "skills",
            CliError::Trajectory(_) => "trajectory",
            CliError::Harness(_) => "harness",
            CliError::Credit(_) => "credit",
            CliError::Molecule { .. } => "molecule",
        }
    }

    /// `{"error": <message>, "kind": <kind>}` on one line.
    pub fn to_json(&self) -> String {
        serde_json::json!({ "error": self.to_string(), "kind": self.kind() }).to_string()
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(io_err(path))
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    write_atomic(path, text.as_bytes()).map_err(io_err(path))
}

fn molecule(smiles: &str) -> Result<Molecule, CliError> {
    parse(smiles).map_err(|source| CliError::Molecule {
        smiles: smiles.to_string(),
        source,
    })
}

/// Loads an objective, optionally overriding its similarity threshold.
pub fn load_objective(path: &Path, gamma_sim: Option<f64>) -> Result<(Objective, ObjectiveConfig), CliError> {
    let (obj, mut cfg) = Objective::load(path)?;
    match gamma_sim {
        None => Ok((obj, cfg)),
        Some(g) => {
            cfg.similarity_threshold = g;
            let obj = cfg.build(path.parent().unwrap_or(Path::new(".")))?;
            Ok((obj, cfg))
        }
    }
}

/// One SMILES per line; blank lines and `#` comments skipped.
pub fn read_leads(path: &Path) -> Result<Vec<Molecule>, CliError> {
    let mut out = Vec::new();
    for (i, l) in read(path)?.lines().enumerate() {
        let s = l.split_whitespace().next().unwrap_or("");
        if s.is_empty() || s.starts_with('#') {
            continue;
        }
        out.push(parse(s).map_err(|e| CliError::Input {
            path: path.to_path_buf(),
            line: i + 1,
            msg: format!("{s}: {e}"),
        })?);
    }
    Ok(out)
}

fn read_numbers(path: &Path) -> Result<Vec<f64>, CliError> {
    let text = read(path)?;
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>().map_err(|e| CliError::Input {
                path: path.to_path_buf(),
                line: 0,
                msg: format!("{t:?}: {e}"),
            })
        })
        .collect()
}

fn load_skills(path: &Path, capacity: usize) -> Result<SkillBank, CliError> {
    if capacity == 0 {
        return Err(CliError::Usage("--skill-capacity must be at least 1".into()));
    }
    if path.exists() {
        Ok(SkillBank::load(path, capacity)?)
    } else {
        Ok(SkillBank::new(capacity))
    }
}

fn deep_merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => deep_merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Resolved inputs of a `run`.
#[derive(Debug)]
pub struct RunPlan {
    pub leads: PathBuf,
    pub objective: PathBuf,
    pub bank: Option<PathBuf>,
    pub skills: Option<PathBuf>,
    pub out: PathBuf,
    pub policy: PolicySpec,
    pub timeout: Duration,
    pub skill_capacity: usize,
    pub gamma_sim: Option<f64>,
    pub search: SearchConfig,
}

/// Merges defaults, the objective's budget settings, the config file and
/// flags, in rising precedence.
pub fn plan_run(args: &RunArgs) -> Result<RunPlan, CliError> {
    let (file, base) = match &args.config {
        Some(p) => {
            let cfg: RunConfig =
                toml::from_str(&read(p)?).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
            (cfg, p.parent().map(Path::to_path_buf).unwrap_or_default())
        }
        None => (RunConfig::default(), PathBuf::new()),
    };
    let rel = |p: Option<PathBuf>| p.map(|p| base.join(p));
    let need = |flag: &Option<PathBuf>, file: Option<PathBuf>, name: &str| {
        flag.clone()
            .or(file)
            .ok_or_else(|| CliError::Usage(format!("--{name} is required (flag or run config)")))
    };
    let leads = need(&args.leads, rel(file.leads), "leads")?;
    let objective = need(&args.objective, rel(file.objective), "objective")?;
    let out = need(&args.out, rel(file.out), "out")?;
    let (_, obj_cfg) = Objective::load(&objective)?;

    let mut search = SearchConfig {
        budget: obj_cfg.budget,
        budget_unit: obj_cfg.budget_unit,
        cache: obj_cfg.cache,
        ..SearchConfig::default()
    };
    if let Some(over) = file.search {
        let mut table = toml::Table::try_from(&search).map_err(|e| CliError::Usage(e.to_string()))?;
        deep_merge(&mut table, over);
        search = table.try_into().map_err(|e| CliError::Usage(format!("run config [search]: {e}")))?;
    }
    let f = &args.search;
    macro_rules! set {
        ($field:expr, $flag:expr) => {
            if let Some(v) = $flag {
                $field = v;
            }
        };
    }
    set!(search.budget, f.budget);
    set!(search.generations, f.generations);
    set!(search.rollouts, f.rollouts);
    set!(search.temp0, f.temp0);
    set!(search.temp_step, f.temp_step);
    set!(search.temp_max, f.temp_max);
    set!(search.seed, f.seed);
    set!(search.env.max_turns, f.turns);
    set!(search.env.plateau_patience, f.plateau);
    set!(search.env.copy_penalty, f.copy_penalty);
    set!(search.env.memory_select_p, f.memory_p);
    search.warm_start_incumbent |= f.warm_start_incumbent;
    search.harvest_online |= f.harvest_online;
    search.validate()?;

    let policy_text = args.policy.clone().or(file.policy).unwrap_or_else(|| "random".into());
    let policy = policy_text.parse::<PolicySpec>().map_err(CliError::Usage)?;
    Ok(RunPlan {
        leads,
        objective,
        bank: args.bank.clone().or(rel(file.bank)),
        skills: args.skills.clone().or(rel(file.skills)),
        out,
        policy,
        timeout: Duration::from_millis(args.timeout_ms.or(file.timeout_ms).unwrap_or(30_000)),
        skill_capacity: args.skill_capacity.or(file.skill_capacity).unwrap_or(DEFAULT_CAPACITY),
        gamma_sim: f.gamma_sim.or(file.gamma_sim),
        search,
    })
}

/// Executes a plan; returns the report.
pub fn execute_run(plan: &RunPlan) -> Result<EvalReport, CliError> {
    let (obj, _) = load_objective(&plan.objective, plan.gamma_sim)?;
    let obj = Arc::new(obj);
    let leads = read_leads(&plan.leads)?;
    let mut memories = Memories::none();
    if let Some(p) = &plan.bank {
        memories.exemplars = Some(Arc::new(load_bank(p)?));
    }
    if let Some(p) = &plan.skills {
        memories.skills = Some(Arc::new(load_skills(p, plan.skill_capacity)?));
    }
    let policy = plan.policy.build(plan.timeout);
    let out = run_leads(&leads, &plan.search, policy.as_ref(), &mut memories, &obj)?;
    std::fs::create_dir_all(&plan.out).map_err(io_err(&plan.out))?;
    let trajectories: Vec<Trajectory> = out.searches.iter().flat_map(|s| s.trajectories.iter().cloned()).collect();
    write_trajectories(&trajectories, &plan.out.join("trajectories.jsonl"))?;
    write(&plan.out.join("report.json"), &out.report.to_json())?;
    write(&plan.out.join("report.tsv"), &out.report.to_tsv())?;
    if plan.search.harvest_online {
        if let Some(bank) = &memories.skills {
            bank.save(&plan.out.join("skills.jsonl"))?;
        }
    }
    Ok(out.report)
}

/// Rebuilds per-lead outcomes from trajectories by re-evaluating the lead
/// and every valid molecule (no budget involved). Trajectories sharing a lead
/// are pooled.
pub fn outcomes_from_trajectories(
    trajectories: &[Trajectory],
    obj: &Objective,
) -> Result<Vec<LeadOutcome>, CliError> {
    let ledger = BudgetLedger::new(u64::MAX);
    let props_of = |m: &Molecule| -> Result<PropertyMap, CliError> { Ok(ledger.evaluate_uncounted(m, obj)?.props) };
    let mut order: Vec<String> = Vec::new();
    let mut groups: BTreeMap<String, Vec<&Trajectory>> = BTreeMap::new();
    for t in trajectories {
        if !groups.contains_key(&t.lead) {
            order.push(t.lead.clone());
        }
        groups.entry(t.lead.clone()).or_default().push(t);
    }
    let mut out = Vec::with_capacity(order.len());
    for lead in order {
        let lead_mol = molecule(&lead)?;
        let lead_props = props_of(&lead_mol)?;
        let mut calls = 1u64;
        let mut best: Option<(f64, String, PropertyMap)> = None;
        let mut consider = |m: &Molecule, props: PropertyMap| {
            if !check_success(&lead_mol, m, obj, &props, &lead_props) {
                return;
            }
            let score = obj.score(&props).unwrap_or(f64::NEG_INFINITY);
            if best.as_ref().is_none_or(|(s, _, _)| score > *s) {
                best = Some((score, m.canonical().to_string(), props));
            }
        };
        consider(&lead_mol, lead_props.clone());
        for t in &groups[&lead] {
            for s in &t.steps {
                calls += s.cost;
                let Some(c) = s.canonical.as_deref().filter(|_| s.valid) else {
                    continue;
                };
                let m = molecule(c)?;
                let props = props_of(&m)?;
                consider(&m, props);
            }
        }
        out.push(LeadOutcome {
            lead,
            lead_props,
            success: best.map(|(_, s, p)| (s, p)),
            calls_used: calls,
        });
    }
    Ok(out)
}

fn eval(args: &EvalArgs) -> Result<String, CliError> {
    let is_report = args.input.extension().is_some_and(|e| e == "json");
    let report = if is_report {
        let stored: EvalReport = serde_json::from_str(&read(&args.input)?).map_err(|e| CliError::Input {
            path: args.input.clone(),
            line: e.line(),
            msg: e.to_string(),
        })?;
        stored.recompute()?
    } else {
        let path = args
            .objective
            .as_ref()
            .ok_or_else(|| CliError::Usage("--objective is required for trajectory input".into()))?;
        let (obj, _) = load_objective(path, None)?;
        let trajectories = read_trajectories(&args.input)?;
        let outcomes = outcomes_from_trajectories(&trajectories, &obj)?;
        metrics(obj.name(), &term_signs(&obj), &outcomes)?
    };
    let text = if args.tsv { report.to_tsv() } else { report.to_json() };
    match &args.out {
        Some(p) => {
            write(p, &text)?;
            Ok(String::new())
        }
        None => Ok(text),
    }
}

fn build_bank_cmd(args: &BuildBankArgs) -> Result<String, CliError> {
    let (rows, errors) = parse_corpus(&read(&args.corpus)?);
    for (line, msg) in &errors {
        log::warn!("{}:{line}: {msg}", args.corpus.display());
    }
    let mut oracles: Vec<Arc<Oracle>> = Vec::new();
    for name in &args.oracles {
        oracles.push(Arc::new(Oracle::builtin(name)?));
    }
    if let Some(p) = &args.objective {
        let (obj, _) = load_objective(p, None)?;
        oracles.extend(obj.terms().iter().map(|t| t.oracle.clone()));
    }
    let (bank, report) = build_bank(rows, &oracles);
    let (jsonl, bin) = save_bank(&bank, &args.out)?;
    Ok(serde_json::json!({
        "records": bank.len(),
        "duplicates": report.duplicates,
        "skipped": report.skipped.len() + errors.len(),
        "jsonl": jsonl,
        "fingerprints": bin,
    })
    .to_string()
        + "\n")
}

fn retrieve_cmd(args: &RetrieveArgs) -> Result<String, CliError> {
    let bank = load_bank(&args.bank)?;
    let (obj, _) = load_objective(&args.objective, None)?;
    let lead = molecule(&args.lead)?;
    let query = match &args.query {
        Some(q) => molecule(q)?,
        None => lead.clone(),
    };
    let cfg = RetrievalConfig {
        k: args.k,
        lead_threshold: args.gamma_ex,
        pool_size: args.pool,
        mode: match args.probe_bits {
            Some(probe_bits) => RecallMode::Approximate { probe_bits },
            None => RecallMode::Exact,
        },
    };
    let hits = retrieve_exemplars(&bank, &query, &lead, &obj, &cfg)?;
    Ok(render_exemplar_block(&hits))
}

fn skills_cmd(cmd: &SkillsCommand) -> Result<String, CliError> {
    match cmd {
        SkillsCommand::Harvest(a) => {
            let trajectories = read_trajectories(&a.trajectories)?;
            let transitions: Vec<_> = trajectories.iter().flat_map(Trajectory::transitions).collect();
            let cards = harvest(&transitions, a.delta, DEFAULT_TIME_CAP);
            let mut bank = load_skills(&a.bank, a.skill_capacity)?;
            let summarizer: Box<dyn Summarizer> = match &a.summarizer {
                Some(ep) => Box::new(
                    ExternalSummarizer::new(ep, Duration::from_millis(a.timeout_ms))
                        .map_err(|e| CliError::Usage(format!("--summarizer: {e}")))?,
                ),
                None => Box::new(TemplateSummarizer),
            };
            let report = bank.absorb(&a.task, &cards, summarizer.as_ref());
            bank.save(&a.bank)?;
            Ok(serde_json::to_string(&report).expect("plain data serializes") + "\n")
        }
        SkillsCommand::List(a) => {
            let bank = SkillBank::load(&a.bank, usize::MAX)?;
            let mut s = String::from("id\ttask\tdelta\ttext\n");
            let tasks: Vec<&str> = bank.tasks().filter(|t| a.task.as_deref().is_none_or(|w| w == *t)).collect();
            for t in tasks {
                for c in bank.cards(t) {
                    writeln!(s, "{}\t{}\t{}\t{}", c.id, t, c.delta, c.text).expect("string write");
                }
            }
            Ok(s)
        }
        SkillsCommand::Insert(a) => {
            let mut bank = load_skills(&a.bank, a.skill_capacity)?;
            let incoming = SkillBank::load(&a.from, usize::MAX)?;
            let mut reports = BTreeMap::new();
            let tasks: Vec<String> = incoming.tasks().map(str::to_string).collect();
            for t in tasks {
                reports.insert(t.clone(), bank.insert(&t, incoming.cards(&t).to_vec()));
            }
            bank.save(&a.bank)?;
            Ok(serde_json::to_string(&reports).expect("plain data serializes") + "\n")
        }
        SkillsCommand::EvictReport(a) => {
            if a.skill_capacity == 0 {
                return Err(CliError::Usage("--skill-capacity must be at least 1".into()));
            }
            let bank = SkillBank::load(&a.bank, usize::MAX)?;
            let plan: BTreeMap<&str, Vec<u64>> =
                bank.tasks().map(|t| (t, bank.eviction_plan(t, a.skill_capacity))).collect();
            Ok(serde_json::to_string(&plan).expect("plain data serializes") + "\n")
        }
        SkillsCommand::Retrieve(a) => {
            let bank = SkillBank::load(&a.bank, usize::MAX)?;
            let q = SkillQuery {
                k_fp: a.k_fp,
                k_fg: a.k_fg,
                gamma_fp: a.gamma_fp,
                gamma_fg: a.gamma_fg,
            };
            let m = molecule(&a.smiles)?;
            Ok(render_skill_block(&retrieve_skills(&bank, &m, &a.task, &q), &a.task))
        }
    }
}

fn credit_cmd(cmd: &CreditCommand) -> Result<String, CliError> {
    match cmd {
        CreditCommand::Gae(a) => {
            let rewards = read_numbers(&a.rewards)?;
            let values = read_numbers(&a.values)?;
            let adv = gae(&rewards, &values, a.gamma, a.lambda)?;
            let mut s = String::from("t,advantage,return\n");
            for (t, x) in adv.iter().enumerate() {
                writeln!(s, "{t},{x},{}", x + values[t]).expect("string write");
            }
            match &a.out {
                Some(p) => {
                    write(p, &s)?;
                    Ok(String::new())
                }
                None => Ok(s),
            }
        }
        CreditCommand::Clip(a) => {
            if !(a.ratio > 0.0 && a.epsilon > 0.0) {
                return Err(CliError::Usage("--ratio and --epsilon must be positive".into()));
            }
            Ok(format!("{}\n", ppo_clip_term(a.ratio, a.advantage, a.epsilon)))
        }
    }
}

/// Runs a parsed command; the returned text goes to stdout.
pub fn dispatch(command: &Command) -> Result<String, CliError> {
    match command {
        Command::BuildBank(a) => build_bank_cmd(a),
        Command::Retrieve(a) => retrieve_cmd(a),
        Command::Skills { command } => skills_cmd(command),
        Command::Run(a) => {
            let plan = plan_run(a)?;
            let report = execute_run(&plan)?;
            Ok(report.to_tsv())
        }
        Command::Eval(a) => eval(a),
        Command::Credit { command } => credit_cmd(command),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn help_lists_defaults() {
        let mut cmd = Cli::command();
        let run = cmd.find_subcommand_mut("run").unwrap();
        let help = run.render_long_help().to_string();
        for needle in [
            "--budget",
            "[default: 500]",
            "--gamma-sim",
            "[default: 0.4]",
            "--turns",
            "[default: 5]",
            "--generations",
            "[default: 20]",
            "--rollouts",
            "[default: 32]",
            "--temp0",
            "[default: 0.9]",
            "--temp-step",
            "[default: 0.1]",
            "--temp-max",
            "[default: 2.0]",
            "--plateau",
            "[default: 2]",
            "--seed",
            "--policy",
            "--skill-capacity",
            "[default: 1000]",
            "--warm-start-incumbent",
        ] {
            assert!(help.contains(needle), "missing {needle}");
        }
    }

    #[test]
    fn error_json_shape() {
        let e = CliError::Harness(HarnessError::NoLeads);
        let v: serde_json::Value = serde_json::from_str(&e.to_json()).unwrap();
        assert_eq!(v["error"], "no leads");
        assert_eq!(v["kind"], "harness");
    }

    #[test]
    fn deep_merge_overrides_leaves() {
        let mut base: toml::Table = toml::from_str("a = 1\n[env]\nmax_turns = 5\nseed = 0\n").unwrap();
        deep_merge(&mut base, toml::from_str("[env]\nseed = 9\n").unwrap());
        assert_eq!(base["a"].as_integer(), Some(1));
        assert_eq!(base["env"]["max_turns"].as_integer(), Some(5));
        assert_eq!(base["env"]["seed"].as_integer(), Some(9));
    }
}

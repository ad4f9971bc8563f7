//! Multi-turn editing environment: step rewards, plateau-triggered memory
//! injection and the text observation handed to a policy.

mod trajectory;

use std::collections::HashMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::chemfeat::{ecfp4, tanimoto, Fingerprint};
use crate::data;
use crate::exembank::{render_exemplar_block, retrieve_exemplars, ExemplarBank, RetrievalConfig};
use crate::molgraph::{parse, Molecule};
use crate::oracles::{check_success_with_similarity, BudgetLedger, Objective, OracleError, PropertyMap};
use crate::skillbank::{render_skill_block, retrieve_skills, SkillBank, SkillQuery};
use crate::template::{render, round_half_up, Value};

pub use trajectory::{
    parse_trajectories, read_trajectories, trajectories_to_jsonl, write_trajectories, StepRecord, Trajectory,
    TrajectoryError,
};

pub const INVALID_REWARD: f64 = -0.5;
pub const NO_OP_REWARD: f64 = -0.3;
pub const IMPROVEMENT_SCALE: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub max_turns: usize,
    pub plateau_patience: usize,
    pub copy_penalty: f64,
    pub memory_select_p: f64,
    pub seed: u64,
    /// Similarity quoted in the task prompt; the objective's threshold when unset.
    pub prompt_threshold: Option<f64>,
    pub retrieval: RetrievalConfig,
    pub skills: SkillQuery,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            max_turns: 5,
            plateau_patience: 2,
            copy_penalty: -0.3,
            memory_select_p: 0.5,
            seed: 0,
            prompt_threshold: None,
            retrieval: RetrievalConfig::default(),
            skills: SkillQuery::default(),
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<(), EnvError> {
        let bad = |m: &str| Err(EnvError::Config(m.to_string()));
        if self.max_turns == 0 {
            return bad("max_turns must be at least 1");
        }
        if self.plateau_patience == 0 {
            return bad("plateau_patience must be at least 1");
        }
        if !(self.copy_penalty <= 0.0) {
            return bad("copy_penalty must be non-positive");
        }
        if !(0.0..=1.0).contains(&self.memory_select_p) {
            return bad("memory_select_p must lie in [0, 1]");
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EnvError {
    #[error("invalid environment config: {0}")]
    Config(String),
    #[error("rollout already finished")]
    Finished,
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

/// Long-term memories available to a rollout. Shared read-only.
#[derive(Debug, Clone, Default)]
pub struct Memories {
    pub exemplars: Option<Arc<ExemplarBank>>,
    pub skills: Option<Arc<SkillBank>>,
}

impl Memories {
    pub fn none() -> Memories {
        Memories::default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MemorySource {
    Exemplar,
    Skill,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Injection {
    pub source: MemorySource,
    pub block: String,
    /// Canonical SMILES of injected exemplars, in block order.
    pub exemplars: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DoneReason {
    Success,
    MaxTurns,
    /// Not finished, or stopped without success (budget exhausted).
    None,
}

/// Which reward rule fired.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Invalid,
    NoOp,
    Copy,
    Dissimilar,
    Improved,
    Degraded,
    /// Evaluation failed on the oracle side; treated like an invalid proposal.
    OracleFailure,
    BudgetExhausted,
}

impl Branch {
    /// Whether the proposal was evaluated and became the current molecule.
    pub fn evaluated(self) -> bool {
        matches!(self, Branch::Improved | Branch::Degraded)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RewardOutcome {
    pub reward: f64,
    pub branch: Branch,
    pub molecule: Option<Molecule>,
    pub similarity: Option<f64>,
    pub props: Option<PropertyMap>,
    pub score: Option<f64>,
    pub cost: u64,
    pub error: Option<String>,
}

impl RewardOutcome {
    fn early(reward: f64, branch: Branch) -> RewardOutcome {
        RewardOutcome {
            reward,
            branch,
            molecule: None,
            similarity: None,
            props: None,
            score: None,
            cost: 0,
            error: None,
        }
    }
}

/// Everything the reward rule reads besides the proposal.
#[derive(Debug, Clone, Copy)]
pub struct RewardContext<'a> {
    pub current: &'a Molecule,
    pub current_score: f64,
    pub lead_fp: &'a Fingerprint,
    pub objective: &'a Objective,
    pub injected: &'a [String],
    pub copy_penalty: f64,
}

/// Step reward, first matching rule wins: unparsable, no-op, copy of an
/// injected exemplar, too dissimilar from the lead, then the scaled change in
/// objective score. Only the last rule touches the ledger.
pub fn compute_reward(ctx: &RewardContext, proposal: &str, ledger: &BudgetLedger) -> RewardOutcome {
    let m = match parse(proposal.trim()) {
        Ok(m) if !m.is_empty() => m,
        Ok(_) => {
            let mut o = RewardOutcome::early(INVALID_REWARD, Branch::Invalid);
            o.error = Some("empty molecule".into());
            return o;
        }
        Err(e) => {
            let mut o = RewardOutcome::early(INVALID_REWARD, Branch::Invalid);
            o.error = Some(e.to_string());
            return o;
        }
    };
    let parsed = |reward: f64, branch: Branch, sim: Option<f64>| RewardOutcome {
        molecule: Some(m.clone()),
        similarity: sim,
        ..RewardOutcome::early(reward, branch)
    };
    if m.canonical() == ctx.current.canonical() {
        return parsed(NO_OP_REWARD, Branch::NoOp, None);
    }
    if ctx.injected.iter().any(|c| c == m.canonical()) {
        return parsed(ctx.copy_penalty, Branch::Copy, None);
    }
    let gamma = ctx.objective.similarity_threshold();
    let sim = tanimoto(ctx.lead_fp, &ecfp4(&m)).unwrap_or(0.0);
    if sim < gamma {
        return parsed(-2.0 * (gamma - sim), Branch::Dissimilar, Some(sim));
    }
    let eval = match ledger.evaluate(&m, ctx.objective) {
        Ok(e) => e,
        Err(e) => {
            let (reward, branch) = match e {
                OracleError::BudgetExhausted { .. } => (0.0, Branch::BudgetExhausted),
                _ => (INVALID_REWARD, Branch::OracleFailure),
            };
            return RewardOutcome {
                error: Some(e.to_string()),
                ..parsed(reward, branch, Some(sim))
            };
        }
    };
    let score = ctx.objective.score(&eval.props).expect("every term evaluated");
    let delta = score - ctx.current_score;
    let (reward, branch) = if delta > 0.0 {
        (IMPROVEMENT_SCALE * delta, Branch::Improved)
    } else {
        (0.0 - delta.abs(), Branch::Degraded)
    };
    RewardOutcome {
        reward,
        branch,
        molecule: Some(m),
        similarity: Some(sim),
        props: Some(eval.props),
        score: Some(score),
        cost: eval.cost,
        error: None,
    }
}

/// One proposal as seen by the policy in later turns.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryEntry {
    pub action: String,
    /// Canonical form when the proposal parsed.
    pub canonical: Option<String>,
    pub reward: f64,
    pub score: Option<f64>,
    pub valid: bool,
    pub branch: Branch,
    pub cost: u64,
    pub injected_source: Option<MemorySource>,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct StepResult {
    pub reward: f64,
    pub done: bool,
    pub done_reason: DoneReason,
    pub feedback: String,
    pub budget_consumed: u64,
    pub branch: Branch,
}

/// An evaluated molecule inside the similarity constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct Feasible {
    pub molecule: Molecule,
    pub props: PropertyMap,
    pub score: f64,
    pub similarity: f64,
}

#[derive(Debug, Clone)]
pub struct EnvState {
    config: EnvConfig,
    objective: Arc<Objective>,
    memories: Memories,
    lead: Feasible,
    lead_fp: Fingerprint,
    current: Feasible,
    history: Vec<HistoryEntry>,
    best_score: f64,
    best: Feasible,
    success: Option<Feasible>,
    stall_count: usize,
    injected: Option<Injection>,
    done: Option<DoneReason>,
    rng: ChaCha8Rng,
}

impl EnvState {
    /// Starts a rollout from `lead`, evaluating it through the ledger (a
    /// cache hit after the first rollout on the same lead).
    pub fn reset(
        config: &EnvConfig,
        objective: Arc<Objective>,
        lead: Molecule,
        memories: Memories,
        ledger: &BudgetLedger,
    ) -> Result<EnvState, EnvError> {
        Self::reset_at(config, objective, lead, None, memories, ledger)
    }

    /// Like `reset`, but the first current molecule is `start` (which must
    /// already be feasible) instead of the lead.
    pub fn reset_at(
        config: &EnvConfig,
        objective: Arc<Objective>,
        lead: Molecule,
        start: Option<Molecule>,
        memories: Memories,
        ledger: &BudgetLedger,
    ) -> Result<EnvState, EnvError> {
        config.validate()?;
        let lead_props = ledger.evaluate(&lead, &objective)?.props;
        let lead_score = objective.score(&lead_props).expect("every term evaluated");
        let lead_fp = ecfp4(&lead);
        let lead = Feasible {
            molecule: lead,
            props: lead_props,
            score: lead_score,
            similarity: 1.0,
        };
        let current = match start {
            Some(m) if m.canonical() != lead.molecule.canonical() => {
                let props = ledger.evaluate(&m, &objective)?.props;
                Feasible {
                    score: objective.score(&props).expect("every term evaluated"),
                    similarity: tanimoto(&lead_fp, &ecfp4(&m)).unwrap_or(0.0),
                    molecule: m,
                    props,
                }
            }
            _ => lead.clone(),
        };
        let success = check_success_with_similarity(current.similarity, &objective, &current.props, &lead.props)
            .then(|| current.clone());
        Ok(EnvState {
            config: config.clone(),
            objective,
            memories,
            lead_fp,
            best_score: current.score.max(lead.score),
            best: if current.score > lead.score { current.clone() } else { lead.clone() },
            lead,
            current,
            history: Vec::new(),
            success,
            stall_count: 0,
            injected: None,
            done: None,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn objective(&self) -> &Objective {
        &self.objective
    }

    pub fn memories(&self) -> &Memories {
        &self.memories
    }

    pub fn lead(&self) -> &Feasible {
        &self.lead
    }

    pub fn current(&self) -> &Feasible {
        &self.current
    }

    pub fn history(&self) -> &[HistoryEntry] {
        &self.history
    }

    pub fn turn(&self) -> usize {
        self.history.len()
    }

    pub fn best_score(&self) -> f64 {
        self.best_score
    }

    /// Highest-scoring feasible molecule seen, the lead included.
    pub fn best(&self) -> &Feasible {
        &self.best
    }

    /// Feasible molecule meeting every success criterion, if one was reached.
    pub fn success(&self) -> Option<&Feasible> {
        self.success.as_ref()
    }

    pub fn stall_count(&self) -> usize {
        self.stall_count
    }

    pub fn injected(&self) -> Option<&Injection> {
        self.injected.as_ref()
    }

    pub fn done(&self) -> Option<DoneReason> {
        self.done
    }

    pub fn is_done(&self) -> bool {
        self.done.is_some()
    }

    fn exemplar_block(&self) -> Option<Injection> {
        let bank = self.memories.exemplars.as_ref().filter(|b| !b.is_empty())?;
        let found = retrieve_exemplars(
            bank,
            &self.current.molecule,
            &self.lead.molecule,
            &self.objective,
            &self.config.retrieval,
        )
        .map_err(|e| log::warn!("exemplar retrieval failed: {e}"))
        .ok()?;
        if found.is_empty() {
            return None;
        }
        Some(Injection {
            source: MemorySource::Exemplar,
            block: render_exemplar_block(&found),
            exemplars: found.iter().map(|e| e.record.canonical.clone()).collect(),
        })
    }

    fn skill_block(&self) -> Option<Injection> {
        let bank = self.memories.skills.as_ref()?;
        let task = self.objective.name();
        let found = retrieve_skills(bank, &self.current.molecule, task, &self.config.skills);
        if found.is_empty() {
            return None;
        }
        Some(Injection {
            source: MemorySource::Skill,
            block: render_skill_block(&found, task),
            exemplars: Vec::new(),
        })
    }

    /// Call at the start of each turn. After `plateau_patience` turns without
    /// a new best score, injects one memory block (a seeded coin picks the
    /// source when both have something to offer); otherwise clears it.
    pub fn maybe_inject_memory(&mut self) -> Option<MemorySource> {
        if self.stall_count < self.config.plateau_patience {
            self.injected = None;
            return None;
        }
        let ex = self.exemplar_block();
        let sk = self.skill_block();
        self.injected = match (ex, sk) {
            (Some(e), Some(s)) => {
                if self.rng.random::<f64>() < self.config.memory_select_p {
                    Some(e)
                } else {
                    Some(s)
                }
            }
            (e, s) => e.or(s),
        };
        self.injected.as_ref().map(|i| i.source)
    }

    /// Task prompt, one line per past proposal, then any injected block.
    pub fn observation(&self) -> String {
        let threshold = self
            .config
            .prompt_threshold
            .unwrap_or(self.objective.similarity_threshold());
        let values: HashMap<&str, Value> = HashMap::from([
            ("input_smiles", Value::from(self.lead.molecule.canonical())),
            ("property_description", Value::from(self.objective.description())),
            ("similarity_threshold", Value::Text(format!("{threshold}"))),
        ]);
        let mut out = render(data::TASK_PROMPT, &values).expect("shipped prompt renders");
        if !out.ends_with('\n') {
            out.push('\n');
        }
        if !self.history.is_empty() {
            out.push('\n');
        }
        for (i, h) in self.history.iter().enumerate() {
            let smiles = h.canonical.as_deref().unwrap_or(h.action.as_str());
            let score = h.score.map_or_else(|| "none".to_string(), |s| round_half_up(s, 3));
            out.push_str(&format!(
                "turn {}: SMILES={} reward={} score={}\n",
                i + 1,
                smiles,
                round_half_up(h.reward, 3),
                score
            ));
        }
        if let Some(inj) = &self.injected {
            out.push('\n');
            out.push_str(&inj.block);
        }
        out
    }

    /// Applies one proposal. History grows by one entry per call.
    pub fn step(&mut self, action: &str, ledger: &BudgetLedger) -> Result<StepResult, EnvError> {
        if self.done.is_some() {
            return Err(EnvError::Finished);
        }
        let injected: &[String] = self.injected.as_ref().map_or(&[], |i| i.exemplars.as_slice());
        let ctx = RewardContext {
            current: &self.current.molecule,
            current_score: self.current.score,
            lead_fp: &self.lead_fp,
            objective: &self.objective,
            injected,
            copy_penalty: self.config.copy_penalty,
        };
        let out = compute_reward(&ctx, action, ledger);
        let feedback = self.feedback(&out);
        let before_best = self.best_score;
        let mut done = None;
        if let (true, Some(m), Some(props), Some(score), Some(sim)) =
            (out.branch.evaluated(), &out.molecule, &out.props, out.score, out.similarity)
        {
            let f = Feasible {
                molecule: m.clone(),
                props: props.clone(),
                score,
                similarity: sim,
            };
            if score > self.best_score {
                self.best_score = score;
                self.best = f.clone();
            }
            if check_success_with_similarity(sim, &self.objective, props, &self.lead.props) {
                let better = self.success.as_ref().is_none_or(|s| score > s.score);
                if better {
                    self.success = Some(f.clone());
                }
                done = Some(DoneReason::Success);
            }
            self.current = f;
        }
        if out.branch == Branch::BudgetExhausted {
            done = Some(DoneReason::None);
        }
        self.history.push(HistoryEntry {
            action: action.to_string(),
            canonical: out.molecule.as_ref().map(|m| m.canonical().to_string()),
            reward: out.reward,
            score: out.score,
            valid: out.branch.evaluated(),
            branch: out.branch,
            cost: out.cost,
            injected_source: self.injected.as_ref().map(|i| i.source),
        });
        if self.best_score > before_best {
            self.stall_count = 0;
        } else {
            self.stall_count += 1;
        }
        if done.is_none() && self.history.len() >= self.config.max_turns {
            done = Some(DoneReason::MaxTurns);
        }
        self.done = done;
        Ok(StepResult {
            reward: out.reward,
            done: done.is_some(),
            done_reason: done.unwrap_or(DoneReason::None),
            feedback,
            budget_consumed: out.cost,
            branch: out.branch,
        })
    }

    fn feedback(&self, out: &RewardOutcome) -> String {
        let gamma = self.objective.similarity_threshold();
        match out.branch {
            Branch::Invalid => format!(
                "Invalid SMILES: {}.",
                out.error.as_deref().unwrap_or("could not parse")
            ),
            Branch::NoOp => "The proposal is identical to the current molecule.".into(),
            Branch::Copy => "The proposal copies a reference molecule; edit it instead.".into(),
            Branch::Dissimilar => format!(
                "Similarity to the lead is {}, below the required {gamma}.",
                round_half_up(out.similarity.unwrap_or(0.0), 3)
            ),
            Branch::OracleFailure => format!(
                "The property oracle could not score the proposal: {}.",
                out.error.as_deref().unwrap_or("unknown error")
            ),
            Branch::BudgetExhausted => "The oracle budget is exhausted; no further evaluations.".into(),
            Branch::Improved | Branch::Degraded => {
                let props = out
                    .props
                    .as_ref()
                    .map(|p| {
                        p.iter()
                            .map(|(k, v)| format!("{k}={}", round_half_up(*v, 3)))
                            .collect::<Vec<_>>()
                            .join(", ")
                    })
                    .unwrap_or_default();
                format!(
                    "{props}; similarity to the lead {}; objective {} ({}).",
                    round_half_up(out.similarity.unwrap_or(0.0), 3),
                    round_half_up(out.score.unwrap_or(0.0), 3),
                    if out.branch == Branch::Improved { "improved" } else { "not improved" }
                )
            }
        }
    }

    /// The rollout so far as a serializable record.
    pub fn trajectory(&self, rollout: u64) -> Trajectory {
        Trajectory {
            rollout,
            lead: self.lead.molecule.canonical().to_string(),
            lead_score: self.lead.score,
            steps: self
                .history
                .iter()
                .enumerate()
                .map(|(i, h)| StepRecord {
                    turn: i + 1,
                    action: h.action.clone(),
                    canonical: h.canonical.clone(),
                    reward: h.reward,
                    score: h.score,
                    valid: h.valid,
                    branch: h.branch,
                    cost: h.cost,
                    injected_source: h.injected_source,
                })
                .collect(),
            terminal_reason: self.done.unwrap_or(DoneReason::None),
        }
    }
}

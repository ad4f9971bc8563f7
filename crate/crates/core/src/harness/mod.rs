//! Budgeted inference-time search over leads, pluggable policies and the
//! SR / Sim / RI evaluation.

mod metrics;
mod policy;

use std::sync::Arc;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::env::{EnvConfig, EnvError, EnvState, Feasible, Memories, Trajectory};
use crate::molgraph::Molecule;
use crate::oracles::{BudgetLedger, BudgetUnit, Objective, OracleError, PropertyMap};
use crate::skillbank::{harvest, SkillBank, TemplateSummarizer, DEFAULT_HARVEST_DELTA, DEFAULT_TIME_CAP};

pub use metrics::{metrics, relative_improvement, term_signs, EvalReport, LeadOutcome, LeadRecord, TermSign};
pub use policy::{edit_count, Policy, PolicyInput, PolicySpec, RandomEdit, RetrievalGreedy, WirePolicy};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("no leads")]
    NoLeads,
    #[error("invalid search config: {0}")]
    Config(String),
    #[error("lead {lead}: {source}")]
    Lead { lead: String, source: OracleError },
    #[error(transparent)]
    Env(#[from] EnvError),
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    pub generations: usize,
    pub rollouts: usize,
    pub temp0: f64,
    pub temp_step: f64,
    pub temp_max: f64,
    pub budget: u64,
    pub budget_unit: BudgetUnit,
    pub cache: bool,
    pub seed: u64,
    /// Start each rollout from the incumbent instead of the lead.
    pub warm_start_incumbent: bool,
    /// Harvest skills from each generation's rollouts before the next.
    pub harvest_online: bool,
    pub harvest_delta: f64,
    pub env: EnvConfig,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            generations: 20,
            rollouts: 32,
            temp0: 0.9,
            temp_step: 0.1,
            temp_max: 2.0,
            budget: 500,
            budget_unit: BudgetUnit::PerCandidate,
            cache: true,
            seed: 0,
            warm_start_incumbent: false,
            harvest_online: false,
            harvest_delta: DEFAULT_HARVEST_DELTA,
            env: EnvConfig::default(),
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::Config(m.to_string()));
        if self.generations == 0 || self.rollouts == 0 {
            return bad("generations and rollouts must be at least 1");
        }
        if self.budget == 0 {
            return bad("budget must be at least 1");
        }
        if !(self.temp0 <= self.temp_max) {
            return bad("temp0 must not exceed temp_max");
        }
        self.env.validate()?;
        Ok(())
    }
}

/// `min(τ0 + g·Δτ, τ_max)`.
pub fn temperature(g: usize, cfg: &SearchConfig) -> f64 {
    (cfg.temp0 + g as f64 * cfg.temp_step).min(cfg.temp_max)
}

/// Result of searching from one lead.
#[derive(Debug, Clone)]
pub struct LeadSearch {
    pub lead: Feasible,
    /// Highest-scoring feasible molecule seen; starts as the lead.
    pub incumbent: Feasible,
    /// Highest-scoring feasible molecule meeting every criterion.
    pub success: Option<Feasible>,
    pub calls_used: u64,
    pub trajectories: Vec<Trajectory>,
}

impl LeadSearch {
    pub fn outcome(&self) -> LeadOutcome {
        LeadOutcome {
            lead: self.lead.molecule.canonical().to_string(),
            lead_props: self.lead.props.clone(),
            success: self
                .success
                .as_ref()
                .map(|s| (s.molecule.canonical().to_string(), s.props.clone())),
            calls_used: self.calls_used,
        }
    }
}

fn keep_better(slot: &mut Feasible, cand: &Feasible) {
    if cand.score > slot.score {
        *slot = cand.clone();
    }
}

/// Generations of rollouts from `lead` at a rising temperature until the
/// budget runs out. `memories.skills` is replaced in place when online
/// harvesting is on. `rollout_base` offsets rollout ids.
pub fn optimize_lead(
    lead: &Molecule,
    cfg: &SearchConfig,
    policy: &dyn Policy,
    memories: &mut Memories,
    objective: &Arc<Objective>,
    rollout_base: u64,
) -> Result<LeadSearch, HarnessError> {
    cfg.validate()?;
    let ledger = BudgetLedger::new(cfg.budget)
        .with_unit(cfg.budget_unit)
        .with_cache(cfg.cache);
    let mut master = ChaCha8Rng::seed_from_u64(cfg.seed);
    let first = EnvState::reset(&cfg.env, objective.clone(), lead.clone(), memories.clone(), &ledger).map_err(
        |e| match e {
            EnvError::Oracle(source) => HarnessError::Lead {
                lead: lead.canonical().to_string(),
                source,
            },
            e => e.into(),
        },
    )?;
    let mut search = LeadSearch {
        lead: first.lead().clone(),
        incumbent: first.lead().clone(),
        success: first.success().cloned(),
        calls_used: 0,
        trajectories: Vec::new(),
    };
    let mut rollout = rollout_base;
    'gens: for g in 0..cfg.generations {
        let tau = temperature(g, cfg);
        let gen_start = search.trajectories.len();
        for _ in 0..cfg.rollouts {
            if ledger.is_exhausted_for(objective) {
                break 'gens;
            }
            let env_cfg = EnvConfig {
                seed: master.next_u64(),
                ..cfg.env.clone()
            };
            let start = (cfg.warm_start_incumbent
                && search.incumbent.molecule.canonical() != lead.canonical())
            .then(|| search.incumbent.molecule.clone());
            let mut state =
                EnvState::reset_at(&env_cfg, objective.clone(), lead.clone(), start, memories.clone(), &ledger)?;
            let mut step_rng = ChaCha8Rng::seed_from_u64(env_cfg.seed ^ 0x9e37_79b9_7f4a_7c15);
            while !state.is_done() {
                state.maybe_inject_memory();
                let obs = state.observation();
                let action = policy.act(&PolicyInput {
                    observation: &obs,
                    state: &state,
                    temperature: tau,
                    seed: step_rng.next_u64(),
                });
                state.step(&action, &ledger)?;
            }
            keep_better(&mut search.incumbent, state.best());
            if let Some(s) = state.success() {
                match &mut search.success {
                    Some(cur) => keep_better(cur, s),
                    None => search.success = Some(s.clone()),
                }
            }
            search.trajectories.push(state.trajectory(rollout));
            rollout += 1;
        }
        if cfg.harvest_online {
            let transitions: Vec<_> = search.trajectories[gen_start..]
                .iter()
                .flat_map(Trajectory::transitions)
                .collect();
            let cards = harvest(&transitions, cfg.harvest_delta, DEFAULT_TIME_CAP);
            if !cards.is_empty() {
                let bank = memories.skills.get_or_insert_with(|| Arc::new(SkillBank::default()));
                let report = Arc::make_mut(bank).absorb(objective.name(), &cards, &TemplateSummarizer);
                log::debug!(
                    "generation {g}: {} skills inserted, {} merged, {} evicted",
                    report.inserted.len(),
                    report.merged.len(),
                    report.evicted.len()
                );
            }
        }
    }
    search.calls_used = ledger.consumed();
    Ok(search)
}

/// Everything a multi-lead run produces.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub searches: Vec<LeadSearch>,
    pub report: EvalReport,
}

/// Searches every lead in order; lead `i` uses seed stream `i` of `cfg.seed`.
pub fn run_leads(
    leads: &[Molecule],
    cfg: &SearchConfig,
    policy: &dyn Policy,
    memories: &mut Memories,
    objective: &Arc<Objective>,
) -> Result<RunOutput, HarnessError> {
    if leads.is_empty() {
        return Err(HarnessError::NoLeads);
    }
    let mut searches = Vec::with_capacity(leads.len());
    let mut rollout_base = 0;
    for (i, lead) in leads.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(i as u64);
        let lead_cfg = SearchConfig {
            seed: rng.next_u64(),
            ..cfg.clone()
        };
        let s = optimize_lead(lead, &lead_cfg, policy, memories, objective, rollout_base)?;
        rollout_base += s.trajectories.len() as u64;
        searches.push(s);
    }
    let outcomes: Vec<LeadOutcome> = searches.iter().map(LeadSearch::outcome).collect();
    let report = metrics(objective.name(), &term_signs(objective), &outcomes)?;
    Ok(RunOutput { searches, report })
}

/// Properties of the lead and best molecule per lead, for quick inspection.
pub fn summary_props(s: &LeadSearch) -> (PropertyMap, PropertyMap) {
    (s.lead.props.clone(), s.incumbent.props.clone())
}

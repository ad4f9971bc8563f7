use std::path::{Path, PathBuf};

use crate::data::write_atomic;
use crate::molgraph::parse;
use crate::skillbank::Transition;

use super::{Branch, DoneReason, MemorySource};

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct StepRecord {
    pub turn: usize,
    pub action: String,
    pub canonical: Option<String>,
    pub reward: f64,
    pub score: Option<f64>,
    pub valid: bool,
    pub branch: Branch,
    pub cost: u64,
    pub injected_source: Option<MemorySource>,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Trajectory {
    pub rollout: u64,
    pub lead: String,
    pub lead_score: f64,
    pub steps: Vec<StepRecord>,
    pub terminal_reason: DoneReason,
}

/// One JSONL line. Turn 0 carries the lead; the last step carries the
/// terminal reason.
#[derive(serde::Serialize, serde::Deserialize)]
struct Line {
    rollout: u64,
    turn: usize,
    action: String,
    canonical: Option<String>,
    reward: f64,
    score: Option<f64>,
    valid: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    branch: Option<Branch>,
    #[serde(default)]
    cost: u64,
    injected_source: Option<MemorySource>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    done_reason: Option<DoneReason>,
}

#[derive(Debug, thiserror::Error)]
pub enum TrajectoryError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("line {line}: {msg}")]
    Record { line: usize, msg: String },
}

impl Trajectory {
    fn lines(&self) -> Vec<Line> {
        let mut out = vec![Line {
            rollout: self.rollout,
            turn: 0,
            action: self.lead.clone(),
            canonical: Some(self.lead.clone()),
            reward: 0.0,
            score: Some(self.lead_score),
            valid: true,
            branch: None,
            cost: 0,
            injected_source: None,
            done_reason: self.steps.is_empty().then_some(self.terminal_reason),
        }];
        let last = self.steps.len();
        for s in &self.steps {
            out.push(Line {
                rollout: self.rollout,
                turn: s.turn,
                action: s.action.clone(),
                canonical: s.canonical.clone(),
                reward: s.reward,
                score: s.score,
                valid: s.valid,
                branch: Some(s.branch),
                cost: s.cost,
                injected_source: s.injected_source,
                done_reason: (s.turn == last).then_some(self.terminal_reason),
            });
        }
        out
    }

    /// Consecutive evaluated molecules as (before, after) pairs, starting
    /// from the lead.
    pub fn transitions(&self) -> Vec<Transition> {
        let Ok(mut before) = parse(&self.lead) else {
            return Vec::new();
        };
        let mut before_score = self.lead_score;
        let mut out = Vec::new();
        for s in self.steps.iter().filter(|s| s.valid) {
            let (Some(c), Some(score)) = (&s.canonical, s.score) else {
                continue;
            };
            let Ok(after) = parse(c) else {
                continue;
            };
            out.push(Transition {
                before: before.clone(),
                after: after.clone(),
                score_before: before_score,
                score_after: score,
            });
            before = after;
            before_score = score;
        }
        out
    }
}

pub fn trajectories_to_jsonl(trajectories: &[Trajectory]) -> String {
    let mut text = String::new();
    for t in trajectories {
        for l in t.lines() {
            text.push_str(&serde_json::to_string(&l).expect("plain data serializes"));
            text.push('\n');
        }
    }
    text
}

pub fn write_trajectories(trajectories: &[Trajectory], path: &Path) -> Result<(), TrajectoryError> {
    write_atomic(path, trajectories_to_jsonl(trajectories).as_bytes()).map_err(|source| TrajectoryError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Groups lines back into trajectories; a turn-0 line opens each one.
pub fn parse_trajectories(text: &str) -> Result<Vec<Trajectory>, TrajectoryError> {
    let mut out: Vec<Trajectory> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        let err = |msg: String| TrajectoryError::Record { line: i + 1, msg };
        let l: Line = serde_json::from_str(raw).map_err(|e| err(e.to_string()))?;
        if l.turn == 0 {
            out.push(Trajectory {
                rollout: l.rollout,
                lead: l.canonical.unwrap_or(l.action),
                lead_score: l.score.ok_or_else(|| err("lead line without score".into()))?,
                steps: Vec::new(),
                terminal_reason: l.done_reason.unwrap_or(DoneReason::None),
            });
            continue;
        }
        let t = out
            .last_mut()
            .filter(|t| t.rollout == l.rollout)
            .ok_or_else(|| err(format!("step of rollout {} before its lead line", l.rollout)))?;
        if l.turn != t.steps.len() + 1 {
            return Err(err(format!("expected turn {}, found {}", t.steps.len() + 1, l.turn)));
        }
        let branch = l.branch.unwrap_or(if l.valid { Branch::Degraded } else { Branch::Invalid });
        if let Some(r) = l.done_reason {
            t.terminal_reason = r;
        }
        t.steps.push(StepRecord {
            turn: l.turn,
            action: l.action,
            canonical: l.canonical,
            reward: l.reward,
            score: l.score,
            valid: l.valid,
            branch,
            cost: l.cost,
            injected_source: l.injected_source,
        });
    }
    Ok(out)
}

pub fn read_trajectories(path: &Path) -> Result<Vec<Trajectory>, TrajectoryError> {
    let text = std::fs::read_to_string(path).map_err(|source| TrajectoryError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_trajectories(&text)
}

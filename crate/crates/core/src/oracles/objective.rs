use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use crate::chemfeat::similarity;
use crate::molgraph::Molecule;

use super::{BudgetUnit, Direction, Oracle, OracleError, PropertyMap, TableOracle};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CriterionMode {
    Absolute,
    Delta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Comparator {
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "<=")]
    Le,
}

impl Comparator {
    pub fn holds(self, x: f64, threshold: f64) -> bool {
        match self {
            Comparator::Ge => x >= threshold,
            Comparator::Le => x <= threshold,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Comparator::Ge => ">=",
            Comparator::Le => "<=",
        }
    }

    fn agrees_with(self, d: Direction) -> bool {
        matches!(
            (self, d),
            (Comparator::Ge, Direction::Maximize) | (Comparator::Le, Direction::Minimize)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SuccessCriterion {
    pub mode: CriterionMode,
    pub comparator: Comparator,
    pub threshold: f64,
}

impl SuccessCriterion {
    pub fn absolute(comparator: Comparator, threshold: f64) -> Self {
        SuccessCriterion {
            mode: CriterionMode::Absolute,
            comparator,
            threshold,
        }
    }

    pub fn delta(comparator: Comparator, threshold: f64) -> Self {
        SuccessCriterion {
            mode: CriterionMode::Delta,
            comparator,
            threshold,
        }
    }

    pub fn holds(&self, value: f64, lead_value: f64) -> bool {
        let x = match self.mode {
            CriterionMode::Absolute => value,
            CriterionMode::Delta => value - lead_value,
        };
        self.comparator.holds(x, self.threshold)
    }
}

/// Benchmark success thresholds for the named properties: absolute for
/// single-property tasks, relative to the lead for multi-property tasks.
pub fn preset_criterion(property: &str, multi: bool) -> Option<SuccessCriterion> {
    let (single, delta) = match property {
        "qed" | "qed_lite" => (0.9, 0.1),
        "plogp" | "logp_lite" => (2.0, 1.0),
        "jnk3" => (0.1, 0.1),
        "drd2" => (0.8, 0.5),
        "sa" | "sa_lite" => {
            return Some(if multi {
                SuccessCriterion::delta(Comparator::Le, -0.5)
            } else {
                SuccessCriterion::absolute(Comparator::Le, -2.5)
            })
        }
        _ => return None,
    };
    Some(if multi {
        SuccessCriterion::delta(Comparator::Ge, delta)
    } else {
        SuccessCriterion::absolute(Comparator::Ge, single)
    })
}

#[derive(Debug, Clone)]
pub struct Term {
    pub oracle: Arc<Oracle>,
    /// Normalized: all term weights of an objective sum to 1.
    pub weight: f64,
    pub success: SuccessCriterion,
}

/// Weighted, direction-signed combination of oracles under a similarity
/// constraint.
#[derive(Debug, Clone)]
pub struct Objective {
    name: String,
    description: String,
    terms: Vec<Term>,
    similarity_threshold: f64,
}

impl Objective {
    /// `terms` are (oracle, positive weight, criterion); weights are normalized.
    pub fn new(
        name: &str,
        terms: Vec<(Arc<Oracle>, f64, SuccessCriterion)>,
        similarity_threshold: f64,
    ) -> Result<Objective, OracleError> {
        let cfg = |m: String| Err(OracleError::Config(m));
        if terms.is_empty() {
            return cfg("objective has no terms".into());
        }
        if !(0.0..=1.0).contains(&similarity_threshold) {
            return cfg(format!("similarity threshold {similarity_threshold} outside [0, 1]"));
        }
        let total: f64 = terms.iter().map(|t| t.1).sum();
        let mut out = Vec::with_capacity(terms.len());
        for (oracle, weight, success) in terms {
            if !(weight > 0.0 && weight.is_finite()) {
                return cfg(format!("weight of {} must be positive", oracle.name()));
            }
            if !success.comparator.agrees_with(oracle.direction()) {
                return cfg(format!(
                    "criterion {} disagrees with direction {:?} of {}",
                    success.comparator.symbol(),
                    oracle.direction(),
                    oracle.name()
                ));
            }
            if out.iter().any(|t: &Term| t.oracle.name() == oracle.name()) {
                return cfg(format!("duplicate term {}", oracle.name()));
            }
            out.push(Term {
                oracle,
                weight: weight / total,
                success,
            });
        }
        let description = out
            .iter()
            .map(|t| match t.oracle.direction() {
                Direction::Maximize => format!("increase {}", t.oracle.name()),
                Direction::Minimize => format!("decrease {}", t.oracle.name()),
            })
            .collect::<Vec<_>>()
            .join(" and ");
        Ok(Objective {
            name: name.to_string(),
            description,
            terms: out,
            similarity_threshold,
        })
    }

    pub fn single(
        oracle: Oracle,
        success: SuccessCriterion,
        similarity_threshold: f64,
    ) -> Result<Objective, OracleError> {
        let name = oracle.name().to_string();
        Self::new(&name, vec![(Arc::new(oracle), 1.0, success)], similarity_threshold)
    }

    pub fn with_description(mut self, description: &str) -> Objective {
        self.description = description.to_string();
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Natural-language property goal used in prompts.
    pub fn description(&self) -> &str {
        &self.description
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn similarity_threshold(&self) -> f64 {
        self.similarity_threshold
    }

    pub fn oracle_names(&self) -> impl Iterator<Item = &str> {
        self.terms.iter().map(|t| t.oracle.name())
    }

    /// Σ w_i · sgn_i · F_i, or `None` when a term is missing.
    pub fn score(&self, props: &PropertyMap) -> Option<f64> {
        self.terms.iter().try_fold(0.0, |acc, t| {
            props
                .get(t.oracle.name())
                .map(|v| acc + t.weight * t.oracle.direction().sign() * v)
        })
    }

    /// Whether every term's criterion holds (similarity not checked).
    pub fn criteria_hold(&self, values: &PropertyMap, lead_values: &PropertyMap) -> bool {
        self.terms.iter().all(|t| {
            let name = t.oracle.name();
            match (values.get(name), lead_values.get(name)) {
                (Some(&v), Some(&l)) => t.success.holds(v, l),
                _ => false,
            }
        })
    }

    pub fn load(path: &Path) -> Result<(Objective, ObjectiveConfig), OracleError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| OracleError::Config(format!("{}: {e}", path.display())))?;
        let cfg: ObjectiveConfig =
            toml::from_str(&text).map_err(|e| OracleError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let obj = cfg.build(base)?;
        Ok((obj, cfg))
    }
}

/// Success check for a candidate against its lead.
pub fn check_success(
    lead: &Molecule,
    cand: &Molecule,
    obj: &Objective,
    values: &PropertyMap,
    lead_values: &PropertyMap,
) -> bool {
    check_success_with_similarity(similarity(lead, cand), obj, values, lead_values)
}

pub fn check_success_with_similarity(
    sim: f64,
    obj: &Objective,
    values: &PropertyMap,
    lead_values: &PropertyMap,
) -> bool {
    sim >= obj.similarity_threshold && obj.criteria_hold(values, lead_values)
}

fn default_gamma() -> f64 {
    0.4
}

fn default_budget() -> u64 {
    500
}

fn default_true() -> bool {
    true
}

fn default_weight() -> f64 {
    1.0
}

fn default_timeout_ms() -> u64 {
    5000
}

/// On-disk objective description (TOML).
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveConfig {
    pub name: String,
    #[serde(default)]
    pub description: Option<String>,
    #[serde(default = "default_gamma")]
    pub similarity_threshold: f64,
    #[serde(default = "default_budget")]
    pub budget: u64,
    #[serde(default)]
    pub budget_unit: BudgetUnit,
    #[serde(default = "default_true")]
    pub cache: bool,
    pub terms: Vec<TermConfig>,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermConfig {
    pub oracle: String,
    /// `builtin`, `table` or `external`.
    #[serde(default = "TermConfig::default_source")]
    pub source: String,
    #[serde(default = "default_weight")]
    pub weight: f64,
    #[serde(default)]
    pub direction: Option<Direction>,
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub default: Option<f64>,
    #[serde(default)]
    pub endpoint: Option<String>,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    pub success: SuccessCriterion,
}

impl TermConfig {
    fn default_source() -> String {
        "builtin".into()
    }

    fn oracle(&self, base: &Path) -> Result<Oracle, OracleError> {
        let need_direction = || {
            self.direction.ok_or_else(|| {
                OracleError::Config(format!("term {} needs a direction", self.oracle))
            })
        };
        let oracle = match self.source.as_str() {
            "builtin" => Oracle::builtin(&self.oracle)?,
            "table" => {
                let path = self.path.as_ref().ok_or_else(|| {
                    OracleError::Config(format!("table term {} needs a path", self.oracle))
                })?;
                let table = TableOracle::from_path(&base.join(path))?.with_default(self.default);
                Oracle::table(&self.oracle, table, need_direction()?)
            }
            "external" => {
                let ep = self.endpoint.as_deref().ok_or_else(|| {
                    OracleError::Config(format!("external term {} needs an endpoint", self.oracle))
                })?;
                Oracle::external_oracle(
                    &self.oracle,
                    ep,
                    Duration::from_millis(self.timeout_ms),
                    need_direction()?,
                )?
            }
            other => return Err(OracleError::Config(format!("unknown oracle source {other:?}"))),
        };
        Ok(match self.direction {
            Some(d) => oracle.with_direction(d),
            None => oracle,
        })
    }
}

impl ObjectiveConfig {
    /// Relative table paths resolve against `base`.
    pub fn build(&self, base: &Path) -> Result<Objective, OracleError> {
        let mut terms = Vec::with_capacity(self.terms.len());
        for t in &self.terms {
            terms.push((Arc::new(t.oracle(base)?), t.weight, t.success));
        }
        let obj = Objective::new(&self.name, terms, self.similarity_threshold)?;
        if self.budget == 0 {
            return Err(OracleError::Config("budget must be positive".into()));
        }
        Ok(match &self.description {
            Some(d) => obj.with_description(d),
            None => obj,
        })
    }
}

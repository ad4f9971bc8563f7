use std::collections::HashMap;
use std::sync::Mutex;

use crate::molgraph::Molecule;

use super::{Objective, OracleError, PropertyMap};

/// What one budget unit pays for.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BudgetUnit {
    #[default]
    PerCandidate,
    PerTerm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub props: PropertyMap,
    /// Units charged for this call; 0 on a cache hit.
    pub cost: u64,
    pub cached: bool,
}

#[derive(Debug, Default)]
struct Inner {
    consumed: u64,
    cache: HashMap<String, PropertyMap>,
}

/// Oracle-call budget with a canonical-SMILES result cache.
///
/// Lookup, budget check, oracle calls and recording happen under one lock,
/// so concurrent callers can never overdraw the budget.
#[derive(Debug)]
pub struct BudgetLedger {
    budget: u64,
    unit: BudgetUnit,
    cache_enabled: bool,
    inner: Mutex<Inner>,
}

impl BudgetLedger {
    pub fn new(budget: u64) -> BudgetLedger {
        BudgetLedger {
            budget,
            unit: BudgetUnit::PerCandidate,
            cache_enabled: true,
            inner: Mutex::new(Inner::default()),
        }
    }

    pub fn with_unit(mut self, unit: BudgetUnit) -> BudgetLedger {
        self.unit = unit;
        self
    }

    pub fn with_cache(mut self, enabled: bool) -> BudgetLedger {
        self.cache_enabled = enabled;
        self
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(|p| p.into_inner())
    }

    pub fn budget(&self) -> u64 {
        self.budget
    }

    pub fn unit(&self) -> BudgetUnit {
        self.unit
    }

    pub fn consumed(&self) -> u64 {
        self.lock().consumed
    }

    pub fn remaining(&self) -> u64 {
        self.budget - self.consumed()
    }

    /// Units one uncached evaluation of `obj` costs.
    pub fn cost_of(&self, obj: &Objective) -> u64 {
        match self.unit {
            BudgetUnit::PerCandidate => 1,
            BudgetUnit::PerTerm => obj.terms().len() as u64,
        }
    }

    /// True when an uncached evaluation of `obj` would be refused.
    pub fn is_exhausted_for(&self, obj: &Objective) -> bool {
        self.remaining() < self.cost_of(obj)
    }

    pub fn cached(&self, canonical: &str) -> Option<PropertyMap> {
        self.lock().cache.get(canonical).cloned()
    }

    pub fn cache_len(&self) -> usize {
        self.lock().cache.len()
    }

    pub fn evaluate(&self, m: &Molecule, obj: &Objective) -> Result<Evaluation, OracleError> {
        self.evaluate_inner(m, obj, true)
    }

    /// Evaluates without charging the budget (e.g. the lead itself, which is
    /// not a candidate). The result is still cached.
    pub fn evaluate_uncounted(&self, m: &Molecule, obj: &Objective) -> Result<Evaluation, OracleError> {
        self.evaluate_inner(m, obj, false)
    }

    fn evaluate_inner(&self, m: &Molecule, obj: &Objective, charge: bool) -> Result<Evaluation, OracleError> {
        let key = m.canonical();
        let mut inner = self.lock();
        if self.cache_enabled {
            if let Some(hit) = inner.cache.get(key) {
                if obj.oracle_names().all(|n| hit.contains_key(n)) {
                    let props = obj
                        .oracle_names()
                        .map(|n| (n.to_string(), hit[n]))
                        .collect();
                    return Ok(Evaluation {
                        props,
                        cost: 0,
                        cached: true,
                    });
                }
            }
        }
        let cost = if charge { self.cost_of(obj) } else { 0 };
        if inner.consumed + cost > self.budget {
            return Err(OracleError::BudgetExhausted {
                budget: self.budget,
            });
        }
        let mut props = PropertyMap::new();
        for t in obj.terms() {
            props.insert(t.oracle.name().to_string(), t.oracle.evaluate(m)?);
        }
        inner.consumed += cost;
        if self.cache_enabled {
            inner
                .cache
                .entry(key.to_string())
                .or_default()
                .extend(props.iter().map(|(k, v)| (k.clone(), *v)));
        }
        log::trace!("oracle evaluation of {key}: cost {cost}, consumed {}", inner.consumed);
        Ok(Evaluation {
            props,
            cost,
            cached: false,
        })
    }
}

/// Evaluates every term of `obj` on `m` through the ledger.
pub fn evaluate(m: &Molecule, obj: &Objective, ledger: &BudgetLedger) -> Result<PropertyMap, OracleError> {
    ledger.evaluate(m, obj).map(|e| e.props)
}

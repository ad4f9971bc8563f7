//! Property oracles, task objectives, success criteria and the budget ledger.

mod builtin;
mod ledger;
mod objective;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;
use std::sync::Mutex;
use std::time::Duration;

pub use builtin::{
    builtin_hba, builtin_hbd, builtin_mw, builtin_ring, fused_ring_atoms, logp_class, logp_lite,
    logp_lite_with, qed_lite, qed_lite_from, sa_lite, Builtin, Desirability, LogpTable, QedParams,
};
pub use ledger::{evaluate, BudgetLedger, BudgetUnit, Evaluation};
pub use objective::{
    check_success, check_success_with_similarity, preset_criterion, Comparator, CriterionMode,
    Objective, ObjectiveConfig, SuccessCriterion, Term, TermConfig,
};

use crate::data::{self, TableError};
use crate::molgraph::{parse, Molecule};
use crate::wire::{Endpoint, LineClient, Reply, WireError};

/// Oracle name → value.
pub type PropertyMap = BTreeMap<String, f64>;

#[derive(Debug, thiserror::Error)]
pub enum OracleError {
    #[error("unknown builtin oracle {0:?}")]
    UnknownBuiltin(String),
    #[error("oracle {oracle} has no entry for {smiles}")]
    MissingEntry { oracle: String, smiles: String },
    #[error("oracle protocol error: {0}")]
    Protocol(String),
    #[error("oracle did not answer within {0:?}")]
    Timeout(Duration),
    #[error("oracle transport: {0}")]
    Transport(String),
    #[error("oracle {oracle} returned non-finite value {value}")]
    NonFinite { oracle: String, value: f64 },
    #[error("oracle budget of {budget} exhausted")]
    BudgetExhausted { budget: u64 },
    #[error("oracle table: {0}")]
    Table(#[from] TableError),
    #[error("objective config: {0}")]
    Config(String),
}

impl From<WireError> for OracleError {
    fn from(e: WireError) -> Self {
        match e {
            WireError::Timeout(d) => OracleError::Timeout(d),
            WireError::Protocol(m) => OracleError::Protocol(m),
            other => OracleError::Transport(other.to_string()),
        }
    }
}

/// Whether larger values of a property are better.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Maximize,
    Minimize,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::Maximize => 1.0,
            Direction::Minimize => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OracleKind {
    Builtin,
    Table,
    External,
}

/// Exact lookup by canonical SMILES, with an optional fallback value.
#[derive(Debug, Clone, Default)]
pub struct TableOracle {
    values: HashMap<String, f64>,
    default: Option<f64>,
}

impl TableOracle {
    /// Parses `smiles<TAB>value` rows; keys are canonicalized on load.
    pub fn parse(text: &str) -> Result<TableOracle, TableError> {
        let mut values = HashMap::new();
        for (line, cols) in data::tsv_rows(text) {
            let bad = |msg: String| TableError::Malformed { line, msg };
            if cols.len() < 2 {
                return Err(bad("expected smiles<TAB>value".into()));
            }
            let mol = parse(cols[0].trim()).map_err(|e| bad(format!("{:?}: {e}", cols[0])))?;
            let value: f64 = cols[1]
                .trim()
                .parse()
                .map_err(|_| bad(format!("bad number {:?}", cols[1])))?;
            if let Some(prev) = values.insert(mol.canonical().to_string(), value) {
                if prev != value {
                    return Err(bad(format!("conflicting values for {}", mol.canonical())));
                }
            }
        }
        Ok(TableOracle {
            values,
            default: None,
        })
    }

    pub fn from_path(path: &Path) -> Result<TableOracle, TableError> {
        Self::parse(&data::read_text(path)?)
    }

    pub fn with_default(mut self, default: Option<f64>) -> TableOracle {
        self.default = default;
        self
    }

    pub fn insert(&mut self, m: &Molecule, value: f64) {
        self.values.insert(m.canonical().to_string(), value);
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn lookup(&self, canonical: &str) -> Option<f64> {
        self.values.get(canonical).copied().or(self.default)
    }
}

enum Backend {
    Builtin(Builtin),
    Table(TableOracle),
    External(Mutex<LineClient>),
}

/// A named property function with an optimization direction.
pub struct Oracle {
    name: String,
    direction: Direction,
    backend: Backend,
}

impl fmt::Debug for Oracle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Oracle")
            .field("name", &self.name)
            .field("direction", &self.direction)
            .field("kind", &self.kind())
            .finish()
    }
}

impl Oracle {
    pub fn builtin(name: &str) -> Result<Oracle, OracleError> {
        let b = Builtin::from_name(name).ok_or_else(|| OracleError::UnknownBuiltin(name.into()))?;
        Ok(Oracle {
            name: b.name().to_string(),
            direction: b.default_direction(),
            backend: Backend::Builtin(b),
        })
    }

    pub fn table(name: &str, table: TableOracle, direction: Direction) -> Oracle {
        Oracle {
            name: name.to_string(),
            direction,
            backend: Backend::Table(table),
        }
    }

    pub fn table_oracle(name: &str, path: &Path, direction: Direction) -> Result<Oracle, OracleError> {
        Ok(Self::table(name, TableOracle::from_path(path)?, direction))
    }

    pub fn external_oracle(
        name: &str,
        endpoint: &str,
        timeout: Duration,
        direction: Direction,
    ) -> Result<Oracle, OracleError> {
        let endpoint: Endpoint = endpoint.parse()?;
        if name.chars().any(char::is_whitespace) {
            return Err(OracleError::Config(format!("oracle name {name:?} contains whitespace")));
        }
        Ok(Oracle {
            name: name.to_string(),
            direction,
            backend: Backend::External(Mutex::new(LineClient::new(endpoint, timeout))),
        })
    }

    pub fn with_direction(mut self, direction: Direction) -> Oracle {
        self.direction = direction;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn kind(&self) -> OracleKind {
        match self.backend {
            Backend::Builtin(_) => OracleKind::Builtin,
            Backend::Table(_) => OracleKind::Table,
            Backend::External(_) => OracleKind::External,
        }
    }

    /// Raw property value; does not touch any budget.
    pub fn evaluate(&self, m: &Molecule) -> Result<f64, OracleError> {
        let value = match &self.backend {
            Backend::Builtin(b) => b.evaluate(m),
            Backend::Table(t) => t.lookup(m.canonical()).ok_or_else(|| OracleError::MissingEntry {
                oracle: self.name.clone(),
                smiles: m.canonical().to_string(),
            })?,
            Backend::External(client) => {
                let mut client = client.lock().unwrap_or_else(|p| p.into_inner());
                match client.call(&format!("EVAL {} {}", self.name, m.canonical()))? {
                    Reply::Ok(v) => v.trim().parse::<f64>().map_err(|_| {
                        OracleError::Protocol(format!("expected a number, got {v:?}"))
                    })?,
                    Reply::Err(msg) => return Err(OracleError::Protocol(format!("ERR {msg}"))),
                }
            }
        };
        if !value.is_finite() {
            return Err(OracleError::NonFinite {
                oracle: self.name.clone(),
                value,
            });
        }
        Ok(value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wire::testing::serve;

    #[test]
    fn table_lookup() {
        let t = TableOracle::parse("OCC\t0.42\n# c\nc1ccccc1\t1.5\n").unwrap();
        let o = Oracle::table("t", t, Direction::Maximize);
        assert_eq!(o.evaluate(&parse("CCO").unwrap()).unwrap(), 0.42);
        assert_eq!(o.evaluate(&parse("c1ccccc1").unwrap()).unwrap(), 1.5);
        assert!(matches!(
            o.evaluate(&parse("CCN").unwrap()),
            Err(OracleError::MissingEntry { .. })
        ));
        assert_eq!(o.kind(), OracleKind::Table);
    }

    #[test]
    fn table_default() {
        let t = TableOracle::parse("CCO\t0.42\n").unwrap().with_default(Some(0.0));
        assert_eq!(t.lookup("CCN"), Some(0.0));
    }

    #[test]
    fn table_rejects_bad_rows() {
        assert!(TableOracle::parse("CCO\n").is_err());
        assert!(TableOracle::parse("C(\t1\n").is_err());
        assert!(TableOracle::parse("CCO\tx\n").is_err());
        assert!(TableOracle::parse("CCO\t1\nOCC\t2\n").is_err());
    }

    #[test]
    fn external_echo_stub() {
        let ep = serve(|l| {
            let mut parts = l.split(' ');
            match (parts.next(), parts.next(), parts.next()) {
                (Some("EVAL"), Some("stub"), Some(_)) => Some("OK 0.0".into()),
                _ => Some("ERR bad request".into()),
            }
        });
        let o = Oracle::external_oracle("stub", &ep, Duration::from_secs(5), Direction::Maximize)
            .unwrap();
        assert_eq!(o.evaluate(&parse("CCO").unwrap()).unwrap(), 0.0);
        let other =
            Oracle::external_oracle("nope", &ep, Duration::from_secs(5), Direction::Maximize)
                .unwrap();
        assert!(matches!(
            other.evaluate(&parse("C").unwrap()),
            Err(OracleError::Protocol(_))
        ));
    }

    #[test]
    fn external_timeout_and_garbage() {
        let silent = serve(|_| None);
        let o = Oracle::external_oracle("x", &silent, Duration::from_millis(50), Direction::Maximize)
            .unwrap();
        assert!(matches!(o.evaluate(&parse("C").unwrap()), Err(OracleError::Timeout(_))));
        let garbage = serve(|_| Some("OK banana".into()));
        let o = Oracle::external_oracle("x", &garbage, Duration::from_secs(5), Direction::Maximize)
            .unwrap();
        assert!(matches!(o.evaluate(&parse("C").unwrap()), Err(OracleError::Protocol(_))));
    }

    #[test]
    fn builtin_lookup() {
        assert_eq!(Oracle::builtin("qed_lite").unwrap().direction(), Direction::Maximize);
        assert_eq!(Oracle::builtin("sa_lite").unwrap().direction(), Direction::Minimize);
        assert!(matches!(Oracle::builtin("qed"), Err(OracleError::UnknownBuiltin(_))));
    }
}

use std::str::FromStr;
use std::sync::Mutex;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::chemfeat::{ecfp4, tanimoto};
use crate::env::{EnvState, MemorySource};
use crate::molgraph::{mutate, neighbors, parse, EditOp, Molecule};
use crate::wire::{Endpoint, LineClient, Reply, WireError};

/// What a policy sees on each turn.
#[derive(Debug, Clone, Copy)]
pub struct PolicyInput<'a> {
    pub observation: &'a str,
    pub state: &'a EnvState,
    pub temperature: f64,
    pub seed: u64,
}

/// Proposes the next molecule as SMILES text.
pub trait Policy: Send + Sync {
    fn name(&self) -> &str;
    fn act(&self, input: &PolicyInput) -> String;
}

/// Number of random edits applied per proposal: `ceil(temperature)`, at least 1.
pub fn edit_count(temperature: f64) -> usize {
    (temperature.ceil() as usize).max(1)
}

fn random_edits(m: &Molecule, count: usize, rng: &mut ChaCha8Rng) -> Molecule {
    let mut cur = m.clone();
    let mut done = 0;
    for _ in 0..count * 8 {
        if done == count {
            break;
        }
        let op = EditOp::KINDS[rng.random_range(0..EditOp::KINDS.len())];
        if let Ok(next) = mutate(&cur, op, rng.random()) {
            cur = next;
            done += 1;
        }
    }
    cur
}

/// Random local edits of the current molecule.
#[derive(Debug, Clone, Copy, Default)]
pub struct RandomEdit;

impl Policy for RandomEdit {
    fn name(&self) -> &str {
        "random_edit"
    }

    fn act(&self, input: &PolicyInput) -> String {
        let mut rng = ChaCha8Rng::seed_from_u64(input.seed);
        let m = random_edits(&input.state.current().molecule, edit_count(input.temperature), &mut rng);
        m.canonical().to_string()
    }
}

/// Edits the top injected exemplar by one step, choosing the neighbor most
/// similar to the lead; random edits when no exemplar is injected. Never
/// proposes an injected exemplar itself.
#[derive(Debug, Clone, Copy, Default)]
pub struct RetrievalGreedy;

impl RetrievalGreedy {
    fn from_exemplar(state: &EnvState) -> Option<Molecule> {
        let inj = state.injected().filter(|i| i.source == MemorySource::Exemplar)?;
        let top = parse(inj.exemplars.first()?).ok()?;
        let lead_fp = ecfp4(&state.lead().molecule);
        let current = state.current().molecule.canonical();
        neighbors(&top)
            .into_iter()
            .filter(|n| n.canonical() != current && !inj.exemplars.iter().any(|e| e == n.canonical()))
            .map(|n| (tanimoto(&lead_fp, &ecfp4(&n)).unwrap_or(0.0), n))
            .fold(None, |best: Option<(f64, Molecule)>, (s, n)| match best {
                Some((bs, _)) if bs >= s => best,
                _ => Some((s, n)),
            })
            .map(|(_, n)| n)
    }
}

impl Policy for RetrievalGreedy {
    fn name(&self) -> &str {
        "retrieval_greedy"
    }

    fn act(&self, input: &PolicyInput) -> String {
        if let Some(m) = Self::from_exemplar(input.state) {
            return m.canonical().to_string();
        }
        RandomEdit.act(input)
    }
}

/// Delegates to an external process: `ACT <json>` answered by `OK <smiles>`.
/// Transport errors and malformed replies become an unparsable proposal.
#[derive(Debug)]
pub struct WirePolicy {
    client: Mutex<LineClient>,
}

impl WirePolicy {
    pub fn new(endpoint: Endpoint, timeout: Duration) -> WirePolicy {
        WirePolicy {
            client: Mutex::new(LineClient::new(endpoint, timeout)),
        }
    }
}

impl Policy for WirePolicy {
    fn name(&self) -> &str {
        "wire"
    }

    fn act(&self, input: &PolicyInput) -> String {
        let payload = serde_json::json!({
            "observation": input.observation,
            "temperature": input.temperature,
            "seed": input.seed,
        });
        let mut client = self.client.lock().unwrap_or_else(|p| p.into_inner());
        match client.call(&format!("ACT {payload}")) {
            Ok(Reply::Ok(smiles)) => smiles.trim().to_string(),
            Ok(Reply::Err(msg)) => {
                log::warn!("policy error: {msg}");
                String::new()
            }
            Err(e) => {
                log::warn!("policy transport: {e}");
                String::new()
            }
        }
    }
}

/// `random`, `greedy` or `wire:<endpoint>`; a bare `host:port` endpoint
/// means TCP.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PolicySpec {
    Random,
    Greedy,
    Wire(Endpoint),
}

impl FromStr for PolicySpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "random" | "random_edit" => Ok(PolicySpec::Random),
            "greedy" | "retrieval_greedy" => Ok(PolicySpec::Greedy),
            _ => {
                let addr = s
                    .strip_prefix("wire:")
                    .ok_or_else(|| format!("unknown policy {s:?}; expected random, greedy or wire:<endpoint>"))?;
                let ep: Result<Endpoint, WireError> = if addr.starts_with("tcp://") || addr.starts_with("exec:") {
                    addr.parse()
                } else {
                    format!("tcp://{addr}").parse()
                };
                ep.map(PolicySpec::Wire).map_err(|e| e.to_string())
            }
        }
    }
}

impl PolicySpec {
    pub fn build(&self, timeout: Duration) -> Box<dyn Policy> {
        match self {
            PolicySpec::Random => Box::new(RandomEdit),
            PolicySpec::Greedy => Box::new(RetrievalGreedy),
            PolicySpec::Wire(ep) => Box::new(WirePolicy::new(ep.clone(), timeout)),
        }
    }
}

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};
use std::time::Duration;

use crate::chemfeat::{FunctionalGroupCatalog, FunctionalGroupSet};
use crate::data::{self, TableError};
use crate::molgraph::parse;
use crate::template::{render, TemplateError, Value};
use crate::wire::{Endpoint, LineClient, Reply, WireError};

use super::card::{EditCard, ModificationType};

/// Display names for common fragments, keyed by canonical SMILES.
#[derive(Debug, Clone, Default)]
pub struct FragmentNames(HashMap<String, String>);

impl FragmentNames {
    pub fn shipped() -> &'static FragmentNames {
        static T: OnceLock<FragmentNames> = OnceLock::new();
        T.get_or_init(|| FragmentNames::parse(data::FRAGMENT_NAMES_TSV).expect("shipped fragment names"))
    }

    pub fn parse(text: &str) -> Result<FragmentNames, TableError> {
        let mut map = HashMap::new();
        for (line, cols) in data::tsv_rows(text) {
            if cols.len() != 2 {
                return Err(TableError::Malformed {
                    line,
                    msg: "expected smiles<TAB>name".into(),
                });
            }
            let m = parse(cols[0].trim()).map_err(|e| TableError::Malformed {
                line,
                msg: format!("{:?}: {e}", cols[0]),
            })?;
            map.insert(m.canonical().to_string(), cols[1].trim().to_string());
        }
        Ok(FragmentNames(map))
    }

    pub fn get(&self, canonical: &str) -> Option<&str> {
        self.0.get(canonical).map(String::as_str)
    }
}

fn first_tag(set: &FunctionalGroupSet) -> Option<String> {
    FunctionalGroupCatalog::shipped()
        .tags()
        .iter()
        .find(|t| set.contains(t))
        .map(|t| t.replace('_', " "))
}

/// Human-readable name of a fragment: table name per component, else the
/// first changed functional group, else the SMILES itself.
fn describe(fragment: &str, fg_change: &FunctionalGroupSet) -> String {
    let names = FragmentNames::shipped();
    let parts: Vec<&str> = fragment.split('.').collect();
    if parts.iter().all(|p| names.get(p).is_some()) {
        return parts
            .iter()
            .map(|p| names.get(p).expect("checked"))
            .collect::<Vec<_>>()
            .join(" and ");
    }
    if let Some(tag) = first_tag(fg_change) {
        return tag;
    }
    parts.join(" and ")
}

fn scaffold_name(scaffold: &str) -> String {
    if scaffold.is_empty() {
        return "acyclic chain".into();
    }
    FragmentNames::shipped()
        .get(scaffold)
        .map(str::to_string)
        .unwrap_or_else(|| scaffold.to_string())
}

const EFFECT: &str = "to improve the target score.";

/// Deterministic `[Action] [What] [Where] to [Effect]` sentence.
pub fn summarize_template(card: &EditCard, _task: &str) -> String {
    let arom = card.on_aromatic_ring;
    match card.modification_type {
        ModificationType::ScaffoldHop => format!(
            "Replace {} core with {} {EFFECT}",
            scaffold_name(&card.scaffold_before),
            scaffold_name(&card.scaffold_after)
        ),
        ModificationType::Addition => format!(
            "Add {}{} {EFFECT}",
            describe(&card.added_fragment, &card.fg_added),
            if arom { " to the aromatic ring" } else { "" }
        ),
        ModificationType::Removal => format!(
            "Remove {}{} {EFFECT}",
            describe(&card.removed_fragment, &card.fg_removed),
            if arom { " from the aromatic ring" } else { "" }
        ),
        ModificationType::Replacement => {
            if card.removed_fragment.is_empty() && card.added_fragment.is_empty() {
                return format!("Keep the current structure {EFFECT}");
            }
            format!(
                "Replace {} with {}{} {EFFECT}",
                describe(&card.removed_fragment, &card.fg_removed),
                describe(&card.added_fragment, &card.fg_added),
                if arom { " on the aromatic ring" } else { "" }
            )
        }
    }
}

fn or_none(s: &str) -> String {
    if s.is_empty() {
        "None".into()
    } else {
        s.to_string()
    }
}

fn tags(set: &FunctionalGroupSet) -> String {
    if set.is_empty() {
        "None".into()
    } else {
        set.iter().collect::<Vec<_>>().join(", ")
    }
}

/// The summarizer prompt with every placeholder filled from `card`.
pub fn render_summarizer_prompt(card: &EditCard, task: &str) -> Result<String, TemplateError> {
    render_summarizer_prompt_with(data::SUMMARIZER_PROMPT, card, task)
}

pub fn render_summarizer_prompt_with(template: &str, card: &EditCard, task: &str) -> Result<String, TemplateError> {
    let delta = card.delta();
    let result = if delta > 0.0 {
        "improved"
    } else if delta < 0.0 {
        "worsened"
    } else {
        "unchanged"
    };
    let d = &card.deltas;
    let values: HashMap<&str, Value> = HashMap::from([
        ("task", task.into()),
        ("before_smiles", card.before.clone().into()),
        ("after_smiles", card.after.clone().into()),
        ("score_before", card.score_before.into()),
        ("score_after", card.score_after.into()),
        ("score_delta", delta.into()),
        ("modification_type", card.modification_type.as_str().into()),
        ("removed_fragment", or_none(&card.removed_fragment).into()),
        ("added_fragment", or_none(&card.added_fragment).into()),
        ("before_scaffold", or_none(&card.scaffold_before).into()),
        ("after_scaffold", or_none(&card.scaffold_after).into()),
        ("scaffold_type", card.scaffold_type.as_str().into()),
        ("fg_removed", tags(&card.fg_removed).into()),
        ("fg_added", tags(&card.fg_added).into()),
        ("mw_change", d.mw.into()),
        ("ring_changes", d.ring_count.into()),
        ("psa_change", d.psa_lite.into()),
        ("hbd_change", d.hbd.into()),
        ("hba_change", d.hba.into()),
        ("result", result.into()),
    ]);
    render(template, &values)
}

/// Text up to the first sentence-ending period, quotes stripped, always
/// ending with a period. `None` when nothing usable remains.
pub fn first_sentence(text: &str) -> Option<String> {
    let t = text.trim().trim_matches(|c| c == '"' || c == '\'').trim();
    let bytes = t.as_bytes();
    let end = (0..bytes.len())
        .find(|&i| bytes[i] == b'.' && bytes.get(i + 1).is_none_or(|c| c.is_ascii_whitespace()))
        .unwrap_or(t.len());
    let s = t[..end].trim();
    if s.is_empty() {
        None
    } else {
        Some(format!("{s}."))
    }
}

pub trait Summarizer: Send + Sync {
    fn summarize(&self, card: &EditCard, task: &str) -> String;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct TemplateSummarizer;

impl Summarizer for TemplateSummarizer {
    fn summarize(&self, card: &EditCard, task: &str) -> String {
        summarize_template(card, task)
    }
}

/// Sends `SUMMARIZE <json>` with the rendered prompt and the card; expects
/// `OK <sentence>`. Any failure falls back to the template sentence.
#[derive(Debug)]
pub struct ExternalSummarizer {
    client: Mutex<LineClient>,
}

impl ExternalSummarizer {
    pub fn new(endpoint: &str, timeout: Duration) -> Result<ExternalSummarizer, WireError> {
        let ep: Endpoint = endpoint.parse()?;
        Ok(ExternalSummarizer {
            client: Mutex::new(LineClient::new(ep, timeout)),
        })
    }

    fn ask(&self, card: &EditCard, task: &str) -> Result<String, String> {
        let prompt = render_summarizer_prompt(card, task).map_err(|e| e.to_string())?;
        let payload = serde_json::json!({ "task": task, "prompt": prompt, "card": card });
        let mut client = self.client.lock().unwrap_or_else(|p| p.into_inner());
        match client.call(&format!("SUMMARIZE {payload}")) {
            Ok(Reply::Ok(text)) => first_sentence(&text).ok_or_else(|| "empty reply".to_string()),
            Ok(Reply::Err(msg)) => Err(format!("summarizer error: {msg}")),
            Err(e) => Err(e.to_string()),
        }
    }
}

impl Summarizer for ExternalSummarizer {
    fn summarize(&self, card: &EditCard, task: &str) -> String {
        match self.ask(card, task) {
            Ok(s) => s,
            Err(e) => {
                log::warn!("external summarizer failed ({e}); using template sentence");
                summarize_template(card, task)
            }
        }
    }
}

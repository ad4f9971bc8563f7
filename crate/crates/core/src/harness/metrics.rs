use std::fmt::Write as _;

use crate::chemfeat::similarity;
use crate::molgraph::parse;
use crate::oracles::{Objective, PropertyMap};

use super::HarnessError;

/// A term's property name and direction sign (+1 maximize, −1 minimize).
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TermSign {
    pub name: String,
    pub sign: f64,
}

pub fn term_signs(obj: &Objective) -> Vec<TermSign> {
    obj.terms()
        .iter()
        .map(|t| TermSign {
            name: t.oracle.name().to_string(),
            sign: t.oracle.direction().sign(),
        })
        .collect()
}

/// What one lead's search produced.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LeadOutcome {
    pub lead: String,
    pub lead_props: PropertyMap,
    /// The best molecule meeting every criterion inside the similarity bound.
    pub success: Option<(String, PropertyMap)>,
    pub calls_used: u64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LeadRecord {
    pub lead: String,
    /// The successful molecule, or the lead itself on failure.
    pub best: String,
    pub success: bool,
    pub sim: f64,
    pub ri: f64,
    pub calls_used: u64,
    pub lead_props: PropertyMap,
    pub best_props: PropertyMap,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EvalReport {
    pub objective: String,
    pub terms: Vec<TermSign>,
    pub leads: Vec<LeadRecord>,
    /// Percentage of leads with a success.
    pub sr: f64,
    pub sim: f64,
    pub ri: f64,
}

/// Mean over terms of `sgn·(F(m') − F(m))/|F(m)|`; terms whose lead value
/// is zero are skipped with a warning.
pub fn relative_improvement(terms: &[TermSign], lead: &PropertyMap, best: &PropertyMap) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    for t in terms {
        let (Some(&f0), Some(&f1)) = (lead.get(&t.name), best.get(&t.name)) else {
            log::warn!("relative improvement: {} missing; term skipped", t.name);
            continue;
        };
        if f0 == 0.0 {
            log::warn!("relative improvement: {} is zero on the lead; term skipped", t.name);
            continue;
        }
        sum += t.sign * (f1 - f0) / f0.abs();
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

fn tanimoto_smiles(a: &str, b: &str) -> f64 {
    match (parse(a), parse(b)) {
        (Ok(x), Ok(y)) => similarity(&x, &y),
        _ => 0.0,
    }
}

/// SR, Sim and RI over leads. A failed lead counts as returning itself:
/// similarity 1 and improvement 0.
pub fn metrics(objective: &str, terms: &[TermSign], outcomes: &[LeadOutcome]) -> Result<EvalReport, HarnessError> {
    if outcomes.is_empty() {
        return Err(HarnessError::NoLeads);
    }
    let leads: Vec<LeadRecord> = outcomes
        .iter()
        .map(|o| match &o.success {
            Some((best, props)) => LeadRecord {
                lead: o.lead.clone(),
                best: best.clone(),
                success: true,
                sim: tanimoto_smiles(&o.lead, best),
                ri: relative_improvement(terms, &o.lead_props, props),
                calls_used: o.calls_used,
                lead_props: o.lead_props.clone(),
                best_props: props.clone(),
            },
            None => LeadRecord {
                lead: o.lead.clone(),
                best: o.lead.clone(),
                success: false,
                sim: 1.0,
                ri: 0.0,
                calls_used: o.calls_used,
                lead_props: o.lead_props.clone(),
                best_props: o.lead_props.clone(),
            },
        })
        .collect();
    Ok(aggregate(objective, terms, leads))
}

fn aggregate(objective: &str, terms: &[TermSign], leads: Vec<LeadRecord>) -> EvalReport {
    let n = leads.len() as f64;
    let wins = leads.iter().filter(|l| l.success).count() as f64;
    EvalReport {
        objective: objective.to_string(),
        terms: terms.to_vec(),
        sr: 100.0 * wins / n,
        sim: leads.iter().map(|l| l.sim).sum::<f64>() / n,
        ri: leads.iter().map(|l| l.ri).sum::<f64>() / n,
        leads,
    }
}

impl EvalReport {
    /// Recomputes every per-lead and aggregate number from the stored
    /// molecules and properties.
    pub fn recompute(&self) -> Result<EvalReport, HarnessError> {
        let outcomes: Vec<LeadOutcome> = self
            .leads
            .iter()
            .map(|l| LeadOutcome {
                lead: l.lead.clone(),
                lead_props: l.lead_props.clone(),
                success: l.success.then(|| (l.best.clone(), l.best_props.clone())),
                calls_used: l.calls_used,
            })
            .collect();
        metrics(&self.objective, &self.terms, &outcomes)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("plain data serializes");
        s.push('\n');
        s
    }

    /// One-row summary: task, SR (%), Sim, RI.
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("task\tleads\tSR (%)\tSim\tRI\n");
        writeln!(
            s,
            "{}\t{}\t{:.1}\t{:.2}\t{:.2}",
            self.objective,
            self.leads.len(),
            self.sr,
            self.sim,
            self.ri
        )
        .expect("string write");
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn props(pairs: &[(&str, f64)]) -> PropertyMap {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    fn max(name: &str) -> TermSign {
        TermSign {
            name: name.into(),
            sign: 1.0,
        }
    }

    #[test]
    fn ri_terms() {
        let ri = relative_improvement(&[max("qed")], &props(&[("qed", 0.5)]), &props(&[("qed", 0.6)]));
        assert!((ri - 0.2).abs() < 1e-12);
        let sa = TermSign {
            name: "sa".into(),
            sign: -1.0,
        };
        let ri = relative_improvement(&[sa], &props(&[("sa", -3.0)]), &props(&[("sa", -4.0)]));
        assert!((ri - 1.0 / 3.0).abs() < 1e-12);
        let ri = relative_improvement(
            &[max("a"), max("b")],
            &props(&[("a", 0.0), ("b", 1.0)]),
            &props(&[("a", 5.0), ("b", 1.5)]),
        );
        assert_eq!(ri, 0.5);
    }

    #[test]
    fn failure_conventions() {
        let lead = "CCOc1ccccc1";
        let outcomes = vec![
            LeadOutcome {
                lead: lead.into(),
                lead_props: props(&[("qed", 0.5)]),
                success: Some(("CCOc1ccccc1F".into(), props(&[("qed", 0.6)]))),
                calls_used: 3,
            },
            LeadOutcome {
                lead: "CCN".into(),
                lead_props: props(&[("qed", 0.4)]),
                success: None,
                calls_used: 500,
            },
        ];
        let r = metrics("qed", &[max("qed")], &outcomes).unwrap();
        assert_eq!(r.sr, 50.0);
        let s = similarity(&parse(lead).unwrap(), &parse("CCOc1ccccc1F").unwrap());
        assert_eq!(r.sim, (s + 1.0) / 2.0);
        assert!((r.ri - 0.1).abs() < 1e-12);
        assert_eq!(r.recompute().unwrap(), r);
        assert!(matches!(metrics("qed", &[], &[]), Err(HarnessError::NoLeads)));
        assert!(r.to_tsv().starts_with("task\tleads\tSR (%)\tSim\tRI\nqed\t2\t50.0\t"));
    }
}

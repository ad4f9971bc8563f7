//! Renders `{name}` / `{name:spec}` placeholders with Python-style format
//! specs (`.3f`, `+.3f`, `+.1f`, `d`, `+d`).

use std::collections::HashMap;

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Text(String),
    Real(f64),
    Int(i64),
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Text(s.to_string())
    }
}

impl From<String> for Value {
    fn from(s: String) -> Self {
        Value::Text(s)
    }
}

impl From<f64> for Value {
    fn from(x: f64) -> Self {
        Value::Real(x)
    }
}

impl From<i64> for Value {
    fn from(x: i64) -> Self {
        Value::Int(x)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TemplateError {
    #[error("no value for placeholder {0:?}")]
    Missing(String),
    #[error("unsupported format spec {spec:?} for {name:?}")]
    BadSpec { name: String, spec: String },
    #[error("unterminated placeholder at byte {0}")]
    Unterminated(usize),
}

pub fn render(template: &str, values: &HashMap<&str, Value>) -> Result<String, TemplateError> {
    let mut out = String::with_capacity(template.len() + 64);
    let mut rest = template;
    let mut offset = 0;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let close = rest[open..]
            .find('}')
            .ok_or(TemplateError::Unterminated(offset + open))?
            + open;
        let inner = &rest[open + 1..close];
        let (name, spec) = match inner.split_once(':') {
            Some((n, s)) => (n, s),
            None => (inner, ""),
        };
        let value = values
            .get(name)
            .ok_or_else(|| TemplateError::Missing(name.to_string()))?;
        out.push_str(&format_value(name, value, spec)?);
        offset += close + 1;
        rest = &rest[close + 1..];
    }
    out.push_str(rest);
    Ok(out)
}

fn format_value(name: &str, value: &Value, spec: &str) -> Result<String, TemplateError> {
    let bad = || TemplateError::BadSpec {
        name: name.to_string(),
        spec: spec.to_string(),
    };
    let (plus, body) = match spec.strip_prefix('+') {
        Some(b) => (true, b),
        None => (false, spec),
    };
    match (value, body) {
        (Value::Text(s), "") if !plus => Ok(s.clone()),
        (Value::Int(i), "" | "d") => Ok(if plus { format!("{i:+}") } else { i.to_string() }),
        (Value::Real(x), "") => Ok(if plus { format!("{x:+}") } else { x.to_string() }),
        (Value::Real(x), b) if b.starts_with('.') && b.ends_with('f') => {
            let digits: usize = b[1..b.len() - 1].parse().map_err(|_| bad())?;
            Ok(if plus {
                format!("{x:+.digits$}")
            } else {
                format!("{x:.digits$}")
            })
        }
        (Value::Int(i), b) if b.starts_with('.') && b.ends_with('f') => {
            format_value(name, &Value::Real(*i as f64), spec)
        }
        _ => Err(bad()),
    }
}

/// Rounds half away from zero on the shortest decimal representation of
/// `x`, so 0.8915 renders as "0.892" even though its binary value sits
/// just below the midpoint.
pub fn round_half_up(x: f64, digits: usize) -> String {
    let repr = format!("{}", x.abs());
    let negative = x < 0.0;
    let (int_part, frac_part) = match repr.split_once('.') {
        Some((i, f)) => (i.to_string(), f.to_string()),
        None => (repr.clone(), String::new()),
    };
    let mut frac: Vec<u8> = frac_part.bytes().map(|b| b - b'0').collect();
    let round_up = frac.len() > digits && frac[digits] >= 5;
    frac.resize(digits, 0);
    let mut all: Vec<u8> = int_part.bytes().map(|b| b - b'0').chain(frac).collect();
    if round_up {
        let mut i = all.len();
        loop {
            if i == 0 {
                all.insert(0, 1);
                break;
            }
            i -= 1;
            if all[i] == 9 {
                all[i] = 0;
            } else {
                all[i] += 1;
                break;
            }
        }
    }
    let split = all.len() - digits;
    let int_digits: String = all[..split].iter().map(|d| char::from(b'0' + d)).collect();
    let frac_digits: String = all[split..].iter().map(|d| char::from(b'0' + d)).collect();
    let is_zero = all.iter().all(|&d| d == 0);
    let sign = if negative && !is_zero { "-" } else { "" };
    if digits == 0 {
        format!("{sign}{int_digits}")
    } else {
        format!("{sign}{int_digits}.{frac_digits}")
    }
}

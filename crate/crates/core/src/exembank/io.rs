use std::io::Read;
use std::path::{Path, PathBuf};

use crate::chemfeat::{FeatError, Fingerprint};
use crate::data::write_atomic;
use crate::oracles::PropertyMap;

use super::{ExemplarBank, ExemplarRecord};

pub const FP_MAGIC: &[u8; 8] = b"MFPBANK1";

#[derive(Debug, thiserror::Error)]
pub enum BankIoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{line}: {msg}")]
    Record { path: PathBuf, line: usize, msg: String },
    #[error("{path}: {msg}")]
    Sidecar { path: PathBuf, msg: String },
    #[error("fingerprint: {0}")]
    Fingerprint(#[from] FeatError),
}

/// One corpus row: a SMILES string and any properties it carries.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusRow {
    pub line: usize,
    pub smiles: String,
    pub props: PropertyMap,
}

#[derive(serde::Serialize, serde::Deserialize)]
struct JsonRow {
    smiles: String,
    #[serde(default)]
    props: PropertyMap,
}

/// Reads corpus text. Lines starting with `{` are JSON objects
/// `{"smiles":..., "props":{...}}`; other lines are
/// `smiles[<TAB>name=value;name=value]`. Blank lines and `#` comments are
/// ignored. Malformed property fields are returned as errors per line.
pub fn parse_corpus(text: &str) -> (Vec<CorpusRow>, Vec<(usize, String)>) {
    let mut rows = Vec::new();
    let mut errors = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let l = raw.trim();
        if l.is_empty() || l.starts_with('#') {
            continue;
        }
        if l.starts_with('{') {
            match serde_json::from_str::<JsonRow>(l) {
                Ok(r) => rows.push(CorpusRow {
                    line,
                    smiles: r.smiles,
                    props: r.props,
                }),
                Err(e) => errors.push((line, e.to_string())),
            }
            continue;
        }
        let mut cols = l.split('\t');
        let smiles = cols.next().unwrap_or("").split_whitespace().next().unwrap_or("");
        let mut props = PropertyMap::new();
        let mut bad = None;
        if let Some(field) = cols.next() {
            for kv in field.split(';').map(str::trim).filter(|s| !s.is_empty()) {
                match kv.split_once('=').map(|(k, v)| (k.trim(), v.trim().parse::<f64>())) {
                    Some((k, Ok(v))) if !k.is_empty() => {
                        props.insert(k.to_string(), v);
                    }
                    _ => bad = Some(format!("bad property field {kv:?}")),
                }
            }
        }
        match bad {
            Some(msg) => errors.push((line, msg)),
            None => rows.push(CorpusRow {
                line,
                smiles: smiles.to_string(),
                props,
            }),
        }
    }
    (rows, errors)
}

fn paths(prefix: &Path) -> (PathBuf, PathBuf) {
    let s = prefix.as_os_str().to_string_lossy();
    (
        PathBuf::from(format!("{s}.bank.jsonl")),
        PathBuf::from(format!("{s}.fp.bin")),
    )
}

/// Writes `<prefix>.bank.jsonl` and `<prefix>.fp.bin`.
pub fn save_bank(bank: &ExemplarBank, prefix: &Path) -> Result<(PathBuf, PathBuf), BankIoError> {
    let (jsonl, bin) = paths(prefix);
    let mut text = String::new();
    for r in bank.records() {
        let row = JsonRow {
            smiles: r.canonical.clone(),
            props: r.props.clone(),
        };
        text.push_str(&serde_json::to_string(&row).expect("plain data serializes"));
        text.push('\n');
    }
    let words_per = bank.width().div_ceil(64);
    let mut bytes = Vec::with_capacity(24 + bank.len() * words_per * 8);
    bytes.extend_from_slice(FP_MAGIC);
    bytes.extend_from_slice(&(bank.width() as u32).to_le_bytes());
    bytes.extend_from_slice(&bank.radius().to_le_bytes());
    bytes.extend_from_slice(&(bank.len() as u64).to_le_bytes());
    for r in bank.records() {
        for w in r.fp.words() {
            bytes.extend_from_slice(&w.to_le_bytes());
        }
    }
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| BankIoError::Io { path, source }
    };
    write_atomic(&bin, &bytes).map_err(io(&bin))?;
    write_atomic(&jsonl, text.as_bytes()).map_err(io(&jsonl))?;
    Ok((jsonl, bin))
}

pub fn load_bank(prefix: &Path) -> Result<ExemplarBank, BankIoError> {
    let (jsonl, bin) = paths(prefix);
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| BankIoError::Io { path, source }
    };
    let text = std::fs::read_to_string(&jsonl).map_err(io(&jsonl))?;
    let mut raw = Vec::new();
    std::fs::File::open(&bin)
        .and_then(|mut f| f.read_to_end(&mut raw))
        .map_err(io(&bin))?;
    let side = |msg: &str| BankIoError::Sidecar {
        path: bin.clone(),
        msg: msg.to_string(),
    };
    if raw.len() < 24 || &raw[..8] != FP_MAGIC {
        return Err(side("missing fingerprint header"));
    }
    let width = u32::from_le_bytes(raw[8..12].try_into().unwrap()) as usize;
    let radius = u32::from_le_bytes(raw[12..16].try_into().unwrap());
    let count = u64::from_le_bytes(raw[16..24].try_into().unwrap()) as usize;
    if width == 0 || !width.is_power_of_two() {
        return Err(side("fingerprint width must be a power of two"));
    }
    let words_per = width.div_ceil(64);
    if raw.len() != 24 + count * words_per * 8 {
        return Err(side("size does not match header"));
    }
    let mut records = Vec::with_capacity(count);
    let mut rows = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    for i in 0..count {
        let (line, l) = rows.next().ok_or_else(|| side("more fingerprints than records"))?;
        let row: JsonRow = serde_json::from_str(l).map_err(|e| BankIoError::Record {
            path: jsonl.clone(),
            line: line + 1,
            msg: e.to_string(),
        })?;
        let start = 24 + i * words_per * 8;
        let words = raw[start..start + words_per * 8]
            .chunks_exact(8)
            .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        records.push(ExemplarRecord {
            canonical: row.smiles,
            fp: Fingerprint::from_words(width, radius, words)?,
            props: row.props,
        });
    }
    if rows.next().is_some() {
        return Err(side("fewer fingerprints than records"));
    }
    let bank = ExemplarBank::from_records(width, radius, records);
    if bank.len() != count {
        return Err(BankIoError::Record {
            path: jsonl,
            line: 0,
            msg: "duplicate canonical strings".into(),
        });
    }
    Ok(bank)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exembank::build_bank;

    #[test]
    fn corpus_formats() {
        let text = "# header\nCCO\tqed_lite=0.4;mw=46.07\n{\"smiles\":\"CCN\",\"props\":{\"x\":1.5}}\nc1ccccc1 benzene\nCC\tbroken\n\n";
        let (rows, errors) = parse_corpus(text);
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[0].props["mw"], 46.07);
        assert_eq!(rows[1].smiles, "CCN");
        assert_eq!(rows[1].props["x"], 1.5);
        assert_eq!(rows[2].smiles, "c1ccccc1");
        assert_eq!(errors.len(), 1);
        assert_eq!(errors[0].0, 5);
    }

    #[test]
    fn round_trip() {
        let (rows, _) = parse_corpus("CCO\tq=1\nc1ccccc1O\tq=2\nCC(=O)Nc1ccccc1\tq=3\n");
        let (bank, _) = build_bank(rows, &[]);
        let dir = tempfile::tempdir().unwrap();
        let prefix = dir.path().join("demo");
        let (j, b) = save_bank(&bank, &prefix).unwrap();
        assert!(j.ends_with("demo.bank.jsonl") && b.ends_with("demo.fp.bin"));
        let back = load_bank(&prefix).unwrap();
        assert_eq!(back.records(), bank.records());
        assert_eq!((back.width(), back.radius()), (bank.width(), bank.radius()));
    }

    #[test]
    fn corrupt_sidecar() {
        let (rows, _) = parse_corpus("CCO\n");
        let (bank, _) = build_bank(rows, &[]);
        let dir = tempfile::tempdir().unwrap();
        let prefix = dir.path().join("x");
        let (_, bin) = save_bank(&bank, &prefix).unwrap();
        let mut raw = std::fs::read(&bin).unwrap();
        raw.truncate(raw.len() - 1);
        std::fs::write(&bin, raw).unwrap();
        assert!(matches!(load_bank(&prefix), Err(BankIoError::Sidecar { .. })));
    }
}

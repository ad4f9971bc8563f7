//! Shipped data tables and the small tab-separated format they share.

use std::collections::BTreeMap;
use std::path::Path;

pub const VALENCE_TSV: &str = include_str!("../data/valence.tsv");
pub const MASSES_TSV: &str = include_str!("../data/masses.tsv");
pub const PSA_TSV: &str = include_str!("../data/psa.tsv");
pub const LOGP_TSV: &str = include_str!("../data/logp.tsv");
pub const QED_PARAMS_TSV: &str = include_str!("../data/qed_params.tsv");
pub const FG_CATALOG_TSV: &str = include_str!("../data/fg_catalog.tsv");
pub const FRAGMENT_NAMES_TSV: &str = include_str!("../data/fragment_names.tsv");
pub const TASK_PROMPT: &str = include_str!("../data/task_prompt.txt");
pub const SUMMARIZER_PROMPT: &str = include_str!("../data/summarizer_prompt.txt");

#[derive(Debug, thiserror::Error)]
pub enum TableError {
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Splits a tab-separated table into rows, skipping blank lines and `#` comments.
/// Returned line numbers are 1-based.
pub fn tsv_rows(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, line)| {
        let trimmed = line.trim_end_matches('\r');
        if trimmed.trim().is_empty() || trimmed.trim_start().starts_with('#') {
            None
        } else {
            Some((i + 1, trimmed.split('\t').collect()))
        }
    })
}

/// Parses a `key<TAB>value` table of reals.
pub fn parse_real_table(text: &str) -> Result<BTreeMap<String, f64>, TableError> {
    let mut out = BTreeMap::new();
    for (line, cols) in tsv_rows(text) {
        if cols.len() < 2 {
            return Err(TableError::Malformed {
                line,
                msg: "expected key<TAB>value".into(),
            });
        }
        let value: f64 = cols[1].trim().parse().map_err(|_| TableError::Malformed {
            line,
            msg: format!("bad number {:?}", cols[1]),
        })?;
        out.insert(cols[0].trim().to_string(), value);
    }
    Ok(out)
}

pub fn read_text(path: &Path) -> Result<String, TableError> {
    Ok(std::fs::read_to_string(path)?)
}

/// Writes via a sibling temporary file and a rename, so readers never see
/// a partially written file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    use std::io::Write;
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| std::io::Error::new(std::io::ErrorKind::InvalidInput, "path has no file name"))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let mut f = std::fs::File::create(&tmp)?;
    f.write_all(bytes)?;
    f.sync_all()?;
    drop(f);
    std::fs::rename(&tmp, path).inspect_err(|_| {
        let _ = std::fs::remove_file(&tmp);
    })
}

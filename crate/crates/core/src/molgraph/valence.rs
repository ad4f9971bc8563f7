use std::collections::BTreeMap;
use std::path::Path;
use std::sync::OnceLock;

use super::Element;
use crate::data::{self, TableError};

/// Per-element maximum valence, loaded from `element<TAB>max_valence` lines.
#[derive(Debug, Clone, PartialEq)]
pub struct ValenceTable {
    max: BTreeMap<Element, u32>,
}

impl ValenceTable {
    pub fn shipped() -> &'static ValenceTable {
        static TABLE: OnceLock<ValenceTable> = OnceLock::new();
        TABLE.get_or_init(|| ValenceTable::parse(data::VALENCE_TSV).expect("shipped valence table"))
    }

    pub fn parse(text: &str) -> Result<ValenceTable, TableError> {
        let mut max = BTreeMap::new();
        for (line, cols) in data::tsv_rows(text) {
            let element = Element::from_symbol(cols[0].trim()).ok_or_else(|| TableError::Malformed {
                line,
                msg: format!("unknown element {:?}", cols[0]),
            })?;
            let value = cols
                .get(1)
                .and_then(|v| v.trim().parse::<u32>().ok())
                .ok_or_else(|| TableError::Malformed {
                    line,
                    msg: "expected element<TAB>max_valence".into(),
                })?;
            max.insert(element, value);
        }
        for e in Element::ALL {
            if !max.contains_key(&e) {
                return Err(TableError::Malformed {
                    line: 0,
                    msg: format!("missing element {e}"),
                });
            }
        }
        Ok(ValenceTable { max })
    }

    pub fn from_path(path: &Path) -> Result<ValenceTable, TableError> {
        ValenceTable::parse(&data::read_text(path)?)
    }

    pub fn max_valence(&self, element: Element) -> u32 {
        self.max[&element]
    }

    pub fn with_max(mut self, element: Element, value: u32) -> Self {
        self.max.insert(element, value);
        self
    }
}

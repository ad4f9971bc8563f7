//! Molecular features: circular fingerprints, functional-group tags and
//! cheap descriptors.

mod descriptors;
mod fingerprint;
mod groups;

pub use descriptors::{descriptors, descriptors_with, polar_class, DescriptorDelta, DescriptorTables, DescriptorVector};
pub use fingerprint::{ecfp4, morgan_fp, similarity, tanimoto, Fingerprint, DEFAULT_RADIUS, DEFAULT_WIDTH};
pub use groups::{
    detect_functional_groups, jaccard, substructure_matches, CatalogEntry, FunctionalGroupCatalog,
    FunctionalGroupSet,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FeatError {
    #[error("fingerprint widths differ: {left} vs {right}")]
    WidthMismatch { left: usize, right: usize },
    #[error("fingerprint radii differ: {left} vs {right}")]
    RadiusMismatch { left: u32, right: u32 },
    #[error("fingerprint width {0} is not a power of two")]
    BadWidth(usize),
}

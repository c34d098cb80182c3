//! Squat generators, rule-based detectors and labelled dataset construction.

mod brands;
mod dataset;
mod detect;
mod generate;
mod tables;

pub use brands::{read_ranked_list, sample_reference, Brand, BrandError, BrandSet, RankedDomain};
pub use dataset::{build_ground_truth, hybrid_fixture, unambiguous_pool, Dataset, DatasetError, DatasetSpec, LabeledDomain, Quotas};
pub use detect::{detect_combo, detect_level, precedence, Detection, Detector, VariantHit, VariantIndex, MIN_COMBO_LABEL};
pub use generate::{gen_bit, gen_combo, gen_homo, gen_hybrid, gen_level, gen_sound, gen_tld, gen_typo, gen_typo_all, HybridShape};
pub use tables::{parse_word_list, ConfusableTable, GeneratorTables, HomophoneTable, Keyboard, TableError};

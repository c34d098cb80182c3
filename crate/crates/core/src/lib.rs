//! Domain-squatting detection.
//!
//! Newly observed names are read from certificate-transparency, passive-DNS
//! and zone feeds ([`ingest`]), paired with their most similar reference
//! domain by embedding search ([`dnx`]), and reviewed in chunks by a chat
//! model whose answers are checked by a four-stage validator with bounded
//! re-runs ([`trv`], [`llm`]). Rule-based generators and detectors for the
//! eight squatting types ([`squat`]) serve as baseline, ground-truth builder
//! and deterministic stand-in for the model.

pub mod dnx;
pub mod domain;
pub mod http;
pub mod ingest;
pub mod llm;
pub mod psl;
pub mod report;
pub mod squat;
pub mod trv;

pub use domain::{Fqdn, NameError, SquattingType, StructuredName, TypoSubtype, Verdict, VerdictSource};
pub use psl::SuffixRules;

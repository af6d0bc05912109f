//! Decoy artefact fabrication toolkit.
//!
//! Builds realistic fake IT content for deception deployments: software
//! repository skeletons with extension-consistent file content, linked
//! Markdown wiki sites, simulated enterprise messaging traces, and
//! relational database schemas populated with conforming rows. A scoring
//! side measures how enticing a decoy document is relative to the real
//! repository it protects, and screens generated text for memorised
//! spans and sensitive terms.
//!
//! The crates are organised around a few immutable model types: fit once
//! from real data, then sample as often as needed. Every sampler takes an
//! explicit seed and is a pure function of its inputs, so any artefact can
//! be regenerated byte-for-byte.

pub mod chargen;
pub mod comms;
pub mod corpus;
pub mod dist;
pub mod embed;
pub mod enticement;
pub mod graphgen;
pub mod rng;
pub mod schema;
pub mod structgen;
pub mod textgen;
pub mod topics;
pub mod wikigen;

pub use comms::{CommsModel, Event, EventTrace, LogNormMix};
pub use corpus::{Corpus, DocCategory, IngestOptions, TokenDoc};
pub use embed::{SifParams, VectorStore};
pub use enticement::{FlagReason, ScreenReport, TsmConfig};
pub use graphgen::{GraphStats, LinkGraph};
pub use schema::{DataType, SchemaGraph, SchemaStats};
pub use structgen::{NodeKind, TreeSpec, TreeStats};
pub use textgen::{ArticleSpec, NgramModel};
pub use topics::TopicModel;
pub use wikigen::WikiSite;

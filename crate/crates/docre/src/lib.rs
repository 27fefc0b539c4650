//! Document-level relation extraction over anaphor-bridged document graphs.
//!
//! The crate is a self-contained research stack: a reverse-mode autodiff
//! tape over `f64` tensors, a small trainable transformer encoder, a
//! document graph whose mention/anaphor nodes are connected by three edge
//! types, a dynamically weighted graph convolution, adaptive-threshold
//! relation classification with an evidence objective, and fused inference
//! over per-pair pseudo documents.
//!
//! The primary interface is the `examples/` directory (one runnable example
//! per capability) plus a thin `docre` binary exposing the same operations
//! as subcommands. Everything is deterministic under a single root seed:
//! reruns produce byte-identical predictions and metrics.
//!
//! Layout:
//!
//! ```text
//! autodiff/   tape, operators, finite-difference gradient checks
//! corpus      document model, JSON corpus + parse sidecar loading
//! marking     entity-marker insertion and offset maps
//! vocab       token/relation vocabularies and content hashes
//! stats       corpus statistics table
//! anaphora    rule-based anaphor extraction
//! graph       document graph (mention-anaphor / coreference / inter-entity)
//! params      named parameter bank, initialization, tape binding
//! encoder     transformer encoder producing token states and attention
//! model       pooling, dynamic adjacency, GCN stack, pair scoring heads
//! loss        adaptive-threshold and evidence objectives
//! optim       AdamW, warmup/decay schedule, gradient clipping
//! train       training loop, logging, divergence guard
//! checkpoint  versioned binary parameter snapshots
//! infer       prediction, evidence selection, pseudo documents, fusion
//! eval        micro F1 and partitioned variants
//! synthetic   deterministic synthetic corpora for experiments and tests
//! config      layered run configuration (file + flag overrides)
//! cli         subcommand implementations behind the `docre` binary
//! ```

pub mod anaphora;
pub mod autodiff;
pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod corpus;
pub mod encoder;
pub mod eval;
pub mod graph;
pub mod gradsuite;
pub mod infer;
pub mod loss;
pub mod marking;
pub mod model;
pub mod optim;
pub mod params;
pub mod seeding;
pub mod stats;
pub mod synthetic;
pub mod train;
pub mod vocab;

//! Guided-embedding toolkit for leaf instance segmentation.
//!
//! The central object is a bank of trainable 2-D sinusoids ("guides"): each
//! guide maps a pixel to `sin(freq_x * x / W + freq_y * y / H + phase)`, and
//! averaging a guide over an instance's pixels turns the instance into one
//! embedding coordinate. Training pushes the embeddings of instances that
//! share an image at least a margin apart in L1 distance, which gives small
//! indistinct objects (like young leaves in a rosette) well-separated codes
//! that downstream attention layers can key on.
//!
//! The crate covers the full loop around that idea:
//!
//! - [`guide`]: guide banks, instance embeddings, the hinge separation loss
//!   with its analytic gradient, and a full-batch training loop on [`optim`].
//! - [`encoding`]: fixed sinusoidal positional encodings, phase expansion of
//!   a guide bank to arbitrary depth, and the guided positional encoding that
//!   sums both.
//! - [`query`]: guided dynamic positional queries (mask stack to embedding to
//!   MLP) plus a cross-attention block and an attention-pooled baseline.
//! - [`fusion`]: projection of backbone features to guided features,
//!   edge-weighted L1 supervision targets, and the combined training loss.
//! - [`metrics`]: Best Dice, Symmetric Best Dice and instance-count error,
//!   with optional size stratification.
//! - [`synth`]: a procedural rosette-plant generator and a mask perturber for
//!   exercising the metrics.
//! - [`pgm`], [`manifest`]: the on-disk formats (plain PGM label maps, JSON
//!   dataset manifests).
//! - [`cli`]: the `glk` binary's subcommands.
//!
//! Everything is deterministic: random draws come from [`rng`] under caller
//! seeds, f64 arithmetic has fixed evaluation order, and parallel reductions
//! preserve sequential ordering, so equal inputs give byte-equal artifacts
//! regardless of thread count.

pub mod cli;
pub mod encoding;
pub mod error;
pub mod fusion;
pub mod guide;
pub mod label;
pub mod manifest;
pub mod metrics;
pub mod optim;
pub mod pgm;
pub mod query;
pub mod rng;
pub mod synth;

pub use error::{Error, Result};
pub use guide::{
    guided_embedding, init_guides, separation_loss, separation_loss_grad, train_guides, GuideBank,
    GuideParams, GuidedEmbedding, GuideTrainConfig,
};
pub use label::{InstancePixelSet, LabelMap, SoftMaskStack};
pub use metrics::{best_dice, dic, evaluate_dataset, sbd, EvalCase, MetricsReport, SizeThresholds};
pub use synth::{generate_dataset, generate_plant, perturb, PerturbSpec, RosetteConfig};

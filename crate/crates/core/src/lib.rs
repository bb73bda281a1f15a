//! Offline evaluation of recommender-system rankings.
//!
//! The central metric is *commonality*: the probability that every user of a
//! population becomes familiar with an editorially selected category under a
//! system's rankings, with familiarity given by a rank-biased browsing model.
//! Utility (NDCG, RR), diversity (alpha-NDCG, ERR-IA) and fairness (RSP, REO)
//! baselines, leaderboard correlation and synthetic run generators round out
//! the toolkit.

pub mod analysis;
pub mod baselines;
pub mod browsing;
pub mod commonality;
pub mod error;
pub mod evaluate;
pub mod ingest;
pub mod logspace;
pub mod model;
pub mod synth;

pub use error::{Error, Result};

//! Gesture-aware speech recognition toolkit.
//!
//! * [`chat`]: reading and writing CHAT transcripts with gesture annotations
//! * [`stats`]: per-label gesture statistics over a corpus
//! * [`asr_eval`]: normalization, alignment and word error rate
//! * [`filter`]: confidence-based pruning of ASR tokens
//! * [`clients`]: speech, gesture and rewriting backends (HTTP and mock)
//! * [`fusion`]: gesture assignment and the enrichment pipeline
//!
//! Numeric results are generic over [`Scalar`]; the aliases below fix the
//! common choices.

pub mod asr_eval;
pub mod chat;
pub mod clients;
pub mod event;
pub mod filter;
pub mod fusion;
pub mod label;
pub mod scalar;
pub mod span;
pub mod stats;

pub use num_rational::{BigRational, Rational64};
pub use scalar::Scalar;

pub type WerReport64 = asr_eval::WerReport<f64>;
pub type WerReport32 = asr_eval::WerReport<f32>;
/// WER report with exact rational rates.
pub type ExactWerReport = asr_eval::WerReport<BigRational>;

pub type StatsReport64 = stats::StatsReport<f64>;
pub type StatsReport32 = stats::StatsReport<f32>;
pub type ExactStatsReport = stats::StatsReport<BigRational>;

pub type ScoredTranscript64 = filter::ScoredTranscript<f64>;
pub type ScoredTranscript32 = filter::ScoredTranscript<f32>;
pub type ExactScoredTranscript = filter::ScoredTranscript<Rational64>;

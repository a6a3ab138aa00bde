//! Food processing classification toolkit.
//!
//! Batch building blocks for scoring branded food products by degree of
//! processing:
//!
//! * [`ingest`] loads delimiter-separated product dumps (Open Food Facts style)
//!   into canonical [`ingest::ProductRecord`]s with a data-quality report.
//! * [`ingredients`] parses ingredient lists into nested trees and counts
//!   ingredients and additives.
//! * [`scoring`] implements the Nutri-Score points/label computation and the
//!   seven-class SIGA rule engine.
//! * [`profiler`] fits log10 location/scale statistics per nutrient and
//!   computes z-score profiles.
//! * [`forest`] is a deterministic multi-class random forest producing NOVA
//!   class probabilities.
//! * [`fpro`] turns NOVA probabilities into the continuous FPro score and
//!   projects probability vectors onto their principal components.
//! * [`features`] assembles model-ready feature matrices and LLM input
//!   sentences, and ingests externally computed embeddings.
//! * [`eval`] runs the stratified tuning-holdout + five-fold protocol with
//!   exact ROC-AUC and average precision.
//! * [`report`] renders comparison tables and per-category FPro summaries.
//! * [`cli`] binds everything into reproducible batch commands.

pub mod cli;
pub mod eval;
pub mod features;
pub mod forest;
pub mod fpro;
pub mod ingest;
pub mod ingredients;
pub mod nova;
pub mod nutrient;
pub mod profiler;
pub mod report;
pub mod scoring;

pub use forest::{ForestModel, ForestParams};
pub use nova::{NovaClass, NovaProbabilities};
pub use ingest::{NutrientPanel, ProductKind, ProductRecord};
pub use nutrient::Nutrient;

//! Probabilistic similarity logic.
//!
//! Weighted rules over typed relational data are parsed into a [`Program`],
//! grounded lazily against a [`FactSet`], and compiled into a convex program
//! whose optimum is the MAP interpretation of the query atoms. Rule weights
//! can be learned from a labeled interpretation.
//!
//! The modules mirror that pipeline:
//!
//! - [`truth`]: Lukasiewicz operators and distance from satisfaction.
//! - [`program`]: the `.psl` rule language (parser, printer, validation).
//! - [`store`]: the indexed fact store and interpretations.
//! - [`similarity`]: attribute and set similarity functions.
//! - [`grounding`]: rule instantiation and the lazily grown active set.
//! - [`inference`]: convex compilation, the solver and the MAP driver.
//! - [`learning`]: MAP-approximated gradient weight learning.

pub mod grounding;
pub mod inference;
pub mod learning;
pub mod program;
pub mod similarity;
pub mod store;
pub mod truth;

pub use grounding::{ActiveSet, GroundRule, GroundingContext, GroundingError};
pub use inference::{
    map_inference, objective_value, DistanceMetric, InferenceConfig, InferenceError, MapResult,
};
pub use learning::{learn_weights, LearningConfig, WeightVector};
pub use program::{parse_program, Program, ProgramError};
pub use similarity::SimilarityRegistry;
pub use store::{EntityId, FactSet, GroundAtom, Interpretation, PredicateId, StoreError};
pub use truth::TruthValue;

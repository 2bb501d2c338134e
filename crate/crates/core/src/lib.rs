//! Logic-based alignment of two taxonomies under RCC-5 articulations.
//!
//! The pipeline: [`parser`] reads an [`model::Alignment`], [`engine`] decides
//! consistency and enumerates possible worlds over a finite region grid,
//! [`analysis`] derives MIR tables, diagnoses and ambiguity-reduction
//! questions, and [`viz`] renders containment graphs as DOT.

pub mod analysis;
mod bitset;

pub mod engine;
pub mod model;
pub mod parser;
pub mod relations;
pub mod synth;
pub mod viz;

pub use engine::{Budget, EngineError};
pub use model::{Alignment, ConceptRef, Side, World};
pub use parser::{parse_alignment, serialize_alignment};
pub use relations::{BaseRelation, RelationMask};

/// The bundled running example, before and after its repair.
pub mod data {
    pub const RUNNING_EXAMPLE: &str = include_str!("../data/running_example.txt");
    pub const RUNNING_EXAMPLE_REPAIRED: &str = include_str!("../data/running_example_repaired.txt");
}

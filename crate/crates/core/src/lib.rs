//! Mass-action chemical reaction networks as dynamics on the graph of
//! complexes.

pub mod analysis;
pub mod balance;
pub mod config;
pub mod consensus;
pub mod detailed;
pub mod dynamics;
pub mod error;
pub mod exact;
pub mod graph;
pub mod kron;
pub mod linalg;
pub mod lp;
pub mod network;
pub mod open;
pub mod parser;
pub mod report;

pub use config::Tolerances;
pub use error::{CrnError, ParseError, Result};
pub use network::{Complex, Flow, Model, OpenSpec, Reaction, ReactionNetwork, SpeciesTable};
pub use parser::{parse_network, to_dsl};

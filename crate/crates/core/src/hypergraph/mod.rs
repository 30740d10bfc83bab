//! Hypergraph construction (confidence, incidence, mask) and the
//! attention blocks that move information between nodes and hyperedges.

mod blocks;
mod structure;

pub use blocks::{hga_aggregate, EdgeToNode, HgaBlock, InterHga, IntraHga};
pub use structure::{build_structure, HyperGraphStructure};

//! Samples an intra-series hypergraph from random hyperedge queries and
//! patch tokens and prints its incidence matrix.

use hgts::hypergraph::build_structure;
use hgts::TopkAxis;
use hgts_tensor::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> hgts::Result<()> {
    let (edges, nodes, d) = (6, 10, 8);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut draw = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.random_range(-1.0..1.0)).collect() };
    let queries = Tensor::new([edges, d], draw(edges * d))?;
    let tokens = Tensor::new([1, nodes, d], draw(nodes * d))?;

    let s = build_structure(&queries, &tokens, -1e9, edges / 3, TopkAxis::PerNode)?;
    s.check()?;
    println!("k = {} hyperedges per node", s.k);
    println!("incidence (rows are hyperedges, columns are patch tokens):");
    for row in s.matrix("incidence", 0)? {
        let cells: String = row.iter().map(|&v| if v > 0.5 { " #" } else { " ." }).collect();
        println!("  {cells}");
    }
    println!("column sums {:?}", s.column_sums(0));
    println!("row sums    {:?}", s.row_sums(0));
    for e in 0..edges {
        println!("hyperedge {e}: members {:?}", s.members(0, e));
    }
    Ok(())
}

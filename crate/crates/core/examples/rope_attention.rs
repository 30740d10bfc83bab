//! Rotary position embedding: rotations keep norms and make the query/key
//! score depend on the offset between positions only.

use hgts::nn::RopeCache;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn main() -> hgts::Result<()> {
    let rope = RopeCache::<f64>::new(64, 8, 10000.0)?;
    let q = [0.3, -1.2, 0.7, 0.1, 2.0, -0.4, 0.9, 0.5];
    let k = [1.1, 0.2, -0.6, 0.8, -0.3, 1.5, 0.4, -0.9];

    let norm = |v: &[f64]| dot(v, v).sqrt();
    println!("|q| = {:.6}, |R(17) q| = {:.6}", norm(&q), norm(&rope.rotate_vec(&q, 17)));

    println!("offset  score(m, m+offset) for m = 0, 10, 40");
    for offset in [0, 1, 5, 12] {
        let scores: Vec<String> = [0, 10, 40]
            .iter()
            .map(|&m| format!("{:+.6}", dot(&rope.rotate_vec(&q, m), &rope.rotate_vec(&k, m + offset))))
            .collect();
        println!("{offset:6}  {}", scores.join("  "));
    }
    Ok(())
}

//! Analytic gradients of every differentiable op against central differences.

use hgts_tensor::gradcheck::check_inputs;
use hgts_tensor::{Graph, Result, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const H: f64 = 1e-5;
const TOL: f64 = 1e-4;

fn rand_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.random_range(-1.5..1.5)).collect()).unwrap()
}

/// Reduces an arbitrary-shape output to a scalar through fixed random
/// weights so every output element contributes a distinct gradient.
fn weighted_sum(g: &Graph<f64>, y: Var, seed: u64) -> Result<Var> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = g.constant(rand_tensor(&mut rng, &g.shape(y)));
    let p = g.mul(y, w)?;
    Ok(g.sum_all(p))
}

fn check<F>(name: &str, shapes: &[&[usize]], f: F)
where
    F: Fn(&Graph<f64>, &[Var]) -> Result<Var>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let inputs: Vec<_> = shapes.iter().map(|s| rand_tensor(&mut rng, s)).collect();
    let report = check_inputs(&inputs, H, |g, v| {
        let y = f(g, v)?;
        weighted_sum(g, y, 99)
    })
    .unwrap();
    assert!(report.checked > 0);
    assert!(
        report.max_rel_error < TOL,
        "{name}: max rel err {} at {:?}",
        report.max_rel_error,
        report.worst
    );
}

#[test]
fn matmul_square() {
    check("matmul 3x3", &[&[3, 3], &[3, 3]], |g, v| g.matmul(v[0], v[1]));
}

#[test]
fn matmul_batched_broadcast() {
    check("matmul bcast", &[&[2, 1, 3, 4], &[3, 4, 2]], |g, v| g.matmul(v[0], v[1]));
    check("matmul_t bcast", &[&[1, 2, 3, 4], &[2, 2, 5, 4]], |g, v| g.matmul_t(v[0], v[1]));
}

#[test]
fn linear_with_bias() {
    check("linear", &[&[2, 3, 4], &[5, 4], &[5]], |g, v| g.linear(v[0], v[1], Some(v[2])));
}

#[test]
fn elementwise_broadcast() {
    check("add", &[&[2, 3, 4], &[3, 1]], |g, v| g.add(v[0], v[1]));
    check("sub", &[&[4], &[2, 3, 4]], |g, v| g.sub(v[0], v[1]));
    check("mul", &[&[2, 1, 4], &[1, 3, 1]], |g, v| g.mul(v[0], v[1]));
    check("scale", &[&[3, 2]], |g, v| Ok(g.scale(v[0], -0.7)));
    check("square", &[&[3, 2]], |g, v| Ok(g.square(v[0])));
}

#[test]
fn activations() {
    check("sigmoid", &[&[2, 3, 2, 2]], |g, v| Ok(g.sigmoid(v[0])));
    check("gelu", &[&[2, 3, 4]], |g, v| Ok(g.gelu(v[0])));
}

#[test]
fn softmax_with_bias() {
    check("softmax", &[&[2, 3, 5]], |g, v| g.softmax_lastdim(v[0], None));
    check("softmax bias", &[&[2, 2, 3, 4], &[2, 1, 3, 4]], |g, v| g.softmax_lastdim(v[0], Some(v[1])));
}

#[test]
fn layer_norm_all_inputs() {
    check("layer_norm", &[&[2, 3, 6], &[6], &[6]], |g, v| g.layer_norm(v[0], v[1], v[2], 1e-5));
}

#[test]
fn shape_ops() {
    check("reshape", &[&[2, 6]], |g, v| g.reshape(v[0], &[3, 4]));
    check("permute", &[&[2, 3, 4, 2]], |g, v| g.permute(v[0], &[3, 1, 0, 2]));
    check("gather", &[&[3, 4, 2]], |g, v| g.gather(v[0], 1, &[3, 0, 3]));
    check("concat", &[&[2, 1, 3], &[2, 2, 3]], |g, v| g.concat(&[v[0], v[1]], 1));
}

#[test]
fn reductions() {
    check("sum_axis", &[&[2, 3, 4]], |g, v| g.sum_axis(v[0], 1, false));
    check("mean_axis", &[&[2, 3, 4]], |g, v| g.mean_axis(v[0], 2, true));
    check("mean_all", &[&[2, 3]], |g, v| Ok(g.mean_all(v[0])));
}

#[test]
fn composed_attention_like_chain() {
    check("attention", &[&[2, 3, 4], &[2, 5, 4], &[2, 5, 4]], |g, v| {
        let s = g.matmul_t(v[0], v[1])?;
        let s = g.scale(s, 0.5);
        let p = g.softmax_lastdim(s, None)?;
        g.matmul(p, v[2])
    });
}

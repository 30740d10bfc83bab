//! Fits `y = 3x - 1` with a one-unit linear layer using the tape and Adam.

use hgts_tensor::{Adam, AdamConfig, Graph, ParamStore, Tensor};

fn main() -> hgts_tensor::Result<()> {
    let xs: Vec<f64> = (0..32).map(|i| i as f64 / 16.0 - 1.0).collect();
    let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x - 1.0).collect();
    let x = Tensor::new([32, 1], xs)?;
    let y = Tensor::new([32, 1], ys)?;

    let mut store = ParamStore::new();
    let w = store.insert("w", Tensor::zeros([1, 1]))?;
    let b = store.insert("b", Tensor::zeros([1]))?;
    let mut opt = Adam::new(AdamConfig::with_lr(0.05), &store);

    for step in 0..400 {
        let g = Graph::new();
        let pred = g.linear(g.constant(x.clone()), g.param(&store, w), Some(g.param(&store, b)))?;
        let diff = g.sub(pred, g.constant(y.clone()))?;
        let loss = g.mean_all(g.square(diff));
        store.zero_grad();
        g.backward(loss)?.accumulate_into(&mut store)?;
        opt.step(&mut store)?;
        if step % 100 == 0 {
            println!("step {step:3} loss {:.6}", g.value(loss).item()?);
        }
    }
    println!("w = {:.4}, b = {:.4}", store.value(w).data()[0], store.value(b).data()[0]);
    Ok(())
}

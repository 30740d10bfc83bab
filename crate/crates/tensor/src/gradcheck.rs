//! Central finite-difference gradient checking (f64 only).

use crate::error::Result;
use crate::graph::{Graph, Var};
use crate::param::ParamStore;
use crate::tensor::Tensor;

/// Denominator floor for relative errors of near-zero gradients.
pub const REL_FLOOR: f64 = 1e-5;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

#[derive(Debug, Clone, Default)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_error: f64,
    /// (input or parameter index, flat element index) of the worst entry.
    pub worst: Option<(usize, usize)>,
}

impl GradCheckReport {
    fn observe(&mut self, slot: usize, elem: usize, analytic: f64, numeric: f64) {
        let e = relative_error(analytic, numeric);
        self.checked += 1;
        if e > self.max_rel_error || self.worst.is_none() {
            self.max_rel_error = self.max_rel_error.max(e);
            self.worst = Some((slot, elem));
        }
    }
}

fn scalar_of(g: &Graph<f64>, v: Var) -> Result<f64> {
    g.value(v).item()
}

/// Compares the tape gradient of `f(inputs)` with central differences.
pub fn check_inputs<F>(inputs: &[Tensor<f64>], h: f64, f: F) -> Result<GradCheckReport>
where
    F: Fn(&Graph<f64>, &[Var]) -> Result<Var>,
{
    let g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.leaf(t.clone())).collect();
    let loss = f(&g, &vars)?;
    let grads = g.backward(loss)?;
    let eval = |xs: &[Tensor<f64>]| -> Result<f64> {
        let g = Graph::inference();
        let vars: Vec<Var> = xs.iter().map(|t| g.constant(t.clone())).collect();
        let l = f(&g, &vars)?;
        scalar_of(&g, l)
    };
    let mut report = GradCheckReport::default();
    let mut work: Vec<Tensor<f64>> = inputs.to_vec();
    for (slot, v) in vars.iter().enumerate() {
        let analytic = grads.get(*v).cloned().unwrap_or_else(|| Tensor::zeros(inputs[slot].shape()));
        for e in 0..inputs[slot].numel() {
            let orig = inputs[slot].data()[e];
            work[slot].data_mut()[e] = orig + h;
            let up = eval(&work)?;
            work[slot].data_mut()[e] = orig - h;
            let down = eval(&work)?;
            work[slot].data_mut()[e] = orig;
            report.observe(slot, e, analytic.data()[e], (up - down) / (2.0 * h));
        }
    }
    Ok(report)
}

/// Same check against every element of every parameter in `store`.
pub fn check_params<F>(store: &mut ParamStore<f64>, h: f64, f: F) -> Result<GradCheckReport>
where
    F: Fn(&Graph<f64>, &ParamStore<f64>) -> Result<Var>,
{
    store.zero_grad();
    let g = Graph::new();
    let loss = f(&g, store)?;
    g.backward(loss)?.accumulate_into(store)?;
    let analytic: Vec<Tensor<f64>> = store.iter().map(|(_, p)| p.grad().clone()).collect();
    let eval = |s: &ParamStore<f64>| -> Result<f64> {
        let g = Graph::inference();
        let l = f(&g, s)?;
        scalar_of(&g, l)
    };
    let mut report = GradCheckReport::default();
    let ids: Vec<_> = store.ids().collect();
    for (slot, id) in ids.into_iter().enumerate() {
        for e in 0..store.value(id).numel() {
            let orig = store.value(id).data()[e];
            store.value_mut(id)[e] = orig + h;
            let up = eval(store)?;
            store.value_mut(id)[e] = orig - h;
            let down = eval(store)?;
            store.value_mut(id)[e] = orig;
            report.observe(slot, e, analytic[slot].data()[e], (up - down) / (2.0 * h));
        }
    }
    store.zero_grad();
    Ok(report)
}

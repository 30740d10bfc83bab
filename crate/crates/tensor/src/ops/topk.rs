use std::cmp::Ordering;

use crate::element::Element;
use crate::error::{Result, TensorError};
use crate::tensor::Tensor;

/// Indices of the `k` largest entries of every last-axis slice.
///
/// Ties go to the smaller index; each slice's indices come back sorted
/// ascending. Output shape is the input shape with the last extent set to `k`.
pub fn topk_lastdim<T: Element>(x: &Tensor<T>, k: usize) -> Result<Tensor<usize>> {
    let n = *x.shape().last().ok_or_else(|| TensorError::arg("topk on rank 0"))?;
    if k == 0 || k > n {
        return Err(TensorError::arg(format!("topk k={k} outside 1..={n}")));
    }
    let mut out = Vec::with_capacity(x.numel() / n * k);
    let mut order: Vec<usize> = Vec::with_capacity(n);
    for row in x.data().chunks(n) {
        order.clear();
        order.extend(0..n);
        order.sort_by(|&a, &b| {
            row[b]
                .partial_cmp(&row[a])
                .unwrap_or(Ordering::Equal)
                .then(a.cmp(&b))
        });
        let start = out.len();
        out.extend_from_slice(&order[..k]);
        out[start..].sort_unstable();
    }
    let mut shape = x.shape().to_vec();
    *shape.last_mut().expect("rank >= 1") = k;
    Tensor::new(shape, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn picks_largest_sorted() {
        let x = Tensor::new([3], vec![0.1f32, 0.9, 0.5]).unwrap();
        assert_eq!(topk_lastdim(&x, 2).unwrap().data(), &[1, 2]);
    }

    #[test]
    fn ties_prefer_lower_index() {
        let x = Tensor::new([3], vec![0.5f64, 0.5, 0.1]).unwrap();
        assert_eq!(topk_lastdim(&x, 1).unwrap().data(), &[0]);
    }

    #[test]
    fn k_out_of_range() {
        let x = Tensor::new([3], vec![0.5f64, 0.5, 0.1]).unwrap();
        assert!(topk_lastdim(&x, 0).is_err());
        assert!(topk_lastdim(&x, 4).is_err());
    }
}

use crate::element::Element;
use crate::graph::{Graph, Var};
use crate::tensor::Tensor;

pub(crate) fn sigmoid_scalar<T: Element>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

const GELU_C: f64 = 0.044_715;

fn gelu_parts<T: Element>(x: T) -> (T, T) {
    let k = T::of((2.0 / std::f64::consts::PI).sqrt());
    let c = T::of(GELU_C);
    let half = T::of(0.5);
    let inner = k * (x + c * x * x * x);
    let t = inner.tanh();
    let y = half * x * (T::one() + t);
    let dy = half * (T::one() + t) + half * x * (T::one() - t * t) * k * (T::one() + T::of(3.0) * c * x * x);
    (y, dy)
}

impl<T: Element> Graph<T> {
    pub fn sigmoid(&self, a: Var) -> Var {
        let out = self.value(a).map(|&v| sigmoid_scalar(v));
        self.record(out, &[a], |_: &[&Tensor<T>], y: &Tensor<T>, g: &Tensor<T>| {
            let d = y.data().iter().zip(g.data()).map(|(&s, &gv)| gv * s * (T::one() - s)).collect();
            Ok(vec![Some(Tensor::new(g.shape(), d)?)])
        })
    }

    /// GELU, tanh approximation.
    pub fn gelu(&self, a: Var) -> Var {
        let out = self.value(a).map(|&v| gelu_parts(v).0);
        self.record(out, &[a], |inp: &[&Tensor<T>], _: &Tensor<T>, g: &Tensor<T>| {
            let d = inp[0].data().iter().zip(g.data()).map(|(&x, &gv)| gv * gelu_parts(x).1).collect();
            Ok(vec![Some(Tensor::new(g.shape(), d)?)])
        })
    }

    pub fn relu(&self, a: Var) -> Var {
        let out = self.value(a).map(|&v| v.max(T::zero()));
        self.record(out, &[a], |inp: &[&Tensor<T>], _: &Tensor<T>, g: &Tensor<T>| {
            let d = inp[0]
                .data()
                .iter()
                .zip(g.data())
                .map(|(&x, &gv)| if x > T::zero() { gv } else { T::zero() })
                .collect();
            Ok(vec![Some(Tensor::new(g.shape(), d)?)])
        })
    }
}

/// Elementwise logistic function on a plain tensor.
pub fn sigmoid<T: Element>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|&v| sigmoid_scalar(v))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_reference_values() {
        let t = Tensor::new([3], vec![0.0f64, 50.0, 1.0]).unwrap();
        let s = sigmoid(&t);
        assert_eq!(s.data()[0], 0.5);
        assert!((s.data()[1] - 1.0).abs() < 1e-6);
        assert!((s.data()[2] - 0.73106).abs() < 1e-5);
        assert!(sigmoid(&Tensor::scalar(-800.0f64)).item().unwrap() >= 0.0);
    }

    #[test]
    fn gelu_known_points() {
        let g = Graph::<f64>::new();
        let x = g.constant(Tensor::new([3], vec![0.0, 1.0, -1.0]).unwrap());
        let y = g.value(g.gelu(x));
        assert_eq!(y.data()[0], 0.0);
        // tanh-approximate GELU(1) = 0.841192
        assert!((y.data()[1] - 0.841_192).abs() < 1e-6);
        assert!((y.data()[2] + 0.158_808).abs() < 1e-6);
    }
}

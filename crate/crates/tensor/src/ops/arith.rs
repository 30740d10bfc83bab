use crate::element::Element;
use crate::error::Result;
use crate::graph::{Graph, Var};
use crate::kernels::{broadcast_binary, reduce_to_shape};
use crate::tensor::Tensor;

impl<T: Element> Graph<T> {
    /// Elementwise sum with broadcasting.
    pub fn add(&self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        let out = broadcast_binary(&av, &bv, |x, y| x + y, "add")?;
        Ok(self.record(out, &[a, b], |inp: &[&Tensor<T>], _: &Tensor<T>, g: &Tensor<T>| {
            Ok(vec![
                Some(reduce_to_shape(g, inp[0].shape())?),
                Some(reduce_to_shape(g, inp[1].shape())?),
            ])
        }))
    }

    pub fn sub(&self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        let out = broadcast_binary(&av, &bv, |x, y| x - y, "sub")?;
        Ok(self.record(out, &[a, b], |inp: &[&Tensor<T>], _: &Tensor<T>, g: &Tensor<T>| {
            let neg = g.map(|&v| -v);
            Ok(vec![
                Some(reduce_to_shape(g, inp[0].shape())?),
                Some(reduce_to_shape(&neg, inp[1].shape())?),
            ])
        }))
    }

    /// Elementwise product with broadcasting.
    pub fn mul(&self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        let out = broadcast_binary(&av, &bv, |x, y| x * y, "mul")?;
        Ok(self.record(out, &[a, b], |inp: &[&Tensor<T>], _: &Tensor<T>, g: &Tensor<T>| {
            let ga = broadcast_binary(g, inp[1], |x, y| x * y, "mul")?;
            let gb = broadcast_binary(g, inp[0], |x, y| x * y, "mul")?;
            Ok(vec![
                Some(reduce_to_shape(&ga, inp[0].shape())?),
                Some(reduce_to_shape(&gb, inp[1].shape())?),
            ])
        }))
    }

    pub fn scale(&self, a: Var, s: T) -> Var {
        let out = self.value(a).map(|&v| v * s);
        self.record(out, &[a], move |_: &[&Tensor<T>], _: &Tensor<T>, g: &Tensor<T>| {
            Ok(vec![Some(g.map(|&v| v * s))])
        })
    }

    pub fn add_scalar(&self, a: Var, s: T) -> Var {
        let out = self.value(a).map(|&v| v + s);
        self.record(out, &[a], |_: &[&Tensor<T>], _: &Tensor<T>, g: &Tensor<T>| Ok(vec![Some(g.clone())]))
    }

    pub fn neg(&self, a: Var) -> Var {
        self.scale(a, -T::one())
    }

    pub fn square(&self, a: Var) -> Var {
        let out = self.value(a).map(|&v| v * v);
        self.record(out, &[a], |inp: &[&Tensor<T>], _: &Tensor<T>, g: &Tensor<T>| {
            let two = T::of(2.0);
            let d = inp[0].data().iter().zip(g.data()).map(|(&x, &gv)| two * x * gv).collect();
            Ok(vec![Some(Tensor::new(g.shape(), d)?)])
        })
    }

    pub fn abs(&self, a: Var) -> Var {
        let out = self.value(a).map(|&v| v.abs());
        self.record(out, &[a], |inp: &[&Tensor<T>], _: &Tensor<T>, g: &Tensor<T>| {
            let d = inp[0].data().iter().zip(g.data()).map(|(&x, &gv)| x.signum() * gv).collect();
            Ok(vec![Some(Tensor::new(g.shape(), d)?)])
        })
    }
}

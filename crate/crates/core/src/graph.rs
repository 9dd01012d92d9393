//! Adaptive graph learned from node embeddings, and Chebyshev graph convolution.

use crate::error::{Error, Result};
use crate::tensor::{Tensor, Var};

/// Row-stochastic adjacency `softmax(relu(E·Eᵀ))`, normalized per row.
pub fn adjacency<'t>(embeddings: Var<'t>) -> Result<Var<'t>> {
    let shape = embeddings.shape();
    if shape.len() != 2 {
        return Err(Error::shape("adjacency", format!("embeddings {shape:?}")));
    }
    if !embeddings.with_value(Tensor::is_finite) {
        return Err(Error::InvalidArgument("non-finite node embeddings".into()));
    }
    embeddings
        .matmul(embeddings.transpose()?)?
        .relu()?
        .softmax()
}

/// `C_0 = I`, `C_1 = A`, `C_k = 2A·C_{k−1} − C_{k−2}`.
#[derive(Clone, Debug)]
pub struct ChebyshevStack<'t> {
    terms: Vec<Var<'t>>,
}

impl<'t> ChebyshevStack<'t> {
    pub fn order(&self) -> usize {
        self.terms.len() - 1
    }

    pub fn nodes(&self) -> usize {
        self.terms[0].shape()[0]
    }

    pub fn terms(&self) -> &[Var<'t>] {
        &self.terms
    }
}

pub fn chebyshev_stack<'t>(a: Var<'t>, order: usize) -> Result<ChebyshevStack<'t>> {
    let shape = a.shape();
    if shape.len() != 2 || shape[0] != shape[1] {
        return Err(Error::shape("chebyshev_stack", format!("non-square {shape:?}")));
    }
    let tape = a.tape();
    let mut terms = vec![tape.constant(Tensor::eye(shape[0]))];
    if order >= 1 {
        terms.push(a);
    }
    for k in 2..=order {
        let next = a.matmul(terms[k - 1])?.scale(2.0)?.sub(terms[k - 2])?;
        terms.push(next);
    }
    Ok(ChebyshevStack { terms })
}

/// `Σ_k C_k · X · W_k` for node features `X` of shape `[n, h]` or `[B, n, h]`
/// and weights `[K + 1, h, h']`.
pub fn graph_conv<'t>(stack: &ChebyshevStack<'t>, features: Var<'t>, weights: Var<'t>) -> Result<Var<'t>> {
    let fs = features.shape();
    let ws = weights.shape();
    let n = stack.nodes();
    let terms = stack.terms.len();
    let batched = fs.len() == 3;
    let ok = (fs.len() == 2 || batched)
        && fs[fs.len() - 2] == n
        && ws.len() == 3
        && ws[0] == terms
        && ws[1] == fs[fs.len() - 1];
    if !ok {
        return Err(Error::shape(
            "graph_conv",
            format!("features {fs:?}, weights {ws:?}, {terms} terms over {n} nodes"),
        ));
    }
    let mut mixed = Vec::with_capacity(terms);
    // C_0 is the identity
    mixed.push(features);
    for c in &stack.terms[1..] {
        mixed.push(if batched { c.bmm(features)? } else { c.matmul(features)? });
    }
    let stacked = features.tape().concat(&mixed, fs.len() - 1)?;
    stacked.matmul(weights.reshape(&[ws[0] * ws[1], ws[2]])?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tape;

    #[test]
    fn zero_embeddings_give_uniform_adjacency() {
        let tape = Tape::new();
        let a = adjacency(tape.constant(Tensor::zeros(&[4, 3]))).unwrap().value();
        assert!(a.data().iter().all(|&v| (v - 0.25).abs() < 1e-15));
    }

    #[test]
    fn single_node_adjacency_is_one() {
        let tape = Tape::new();
        let a = adjacency(tape.constant(Tensor::full(&[1, 8], 0.3))).unwrap().value();
        assert_eq!(a.data(), &[1.0]);
    }

    #[test]
    fn order_one_stack_is_identity_then_adjacency() {
        let tape = Tape::new();
        let a_val = Tensor::new(vec![2, 2], vec![0.2, 0.8, 0.6, 0.4]).unwrap();
        let stack = chebyshev_stack(tape.constant(a_val.clone()), 1).unwrap();
        assert_eq!(stack.terms()[0].value(), Tensor::eye(2));
        assert_eq!(stack.terms()[1].value(), a_val);
    }

    #[test]
    fn identity_adjacency_keeps_identity() {
        let tape = Tape::new();
        let stack = chebyshev_stack(tape.constant(Tensor::eye(3)), 2).unwrap();
        assert_eq!(stack.terms()[2].value(), Tensor::eye(3));
    }

    #[test]
    fn rejects_non_square_and_non_finite() {
        let tape = Tape::new();
        assert!(chebyshev_stack(tape.constant(Tensor::zeros(&[2, 3])), 2).is_err());
        let bad = Tensor::new(vec![1, 2], vec![f64::NAN, 0.0]).unwrap();
        assert!(adjacency(tape.constant(bad)).is_err());
    }

    #[test]
    fn order_zero_identity_weights_pass_features_through() {
        let tape = Tape::new();
        let stack = chebyshev_stack(tape.constant(Tensor::eye(3)), 0).unwrap();
        let x = Tensor::from_fn(&[2, 3, 4], |i| i as f64 * 0.1);
        let w = Tensor::eye(4).reshape(&[1, 4, 4]).unwrap();
        let out = graph_conv(&stack, tape.constant(x.clone()), tape.constant(w)).unwrap();
        assert_eq!(out.value(), x);
        let zero = graph_conv(&stack, tape.constant(x), tape.constant(Tensor::zeros(&[1, 4, 2]))).unwrap();
        assert!(zero.value().data().iter().all(|&v| v == 0.0));
    }
}

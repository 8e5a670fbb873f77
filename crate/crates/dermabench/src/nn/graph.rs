//! Static computation graph over (B, C, H, W) feature maps.
//!
//! Nodes are appended in topological order; node id 0 is the graph input.
//! `forward` records every node output on a tape, `backward` walks the tape
//! in reverse accumulating gradients (weight gradients are accumulated
//! inside each op, activation gradients flow along the edges).

use ndarray::Array4;

use crate::nn::layers::Param;
use crate::nn::Trainable;
use crate::scalar::Real;

pub type NodeId = usize;

/// Node id of the graph input.
pub const INPUT: NodeId = 0;

pub trait GraphOp<S: Real>: Send {
    fn forward(&mut self, inputs: &[&Array4<S>], train: bool) -> Array4<S>;

    /// Gradients with respect to each input, given the upstream gradient.
    /// Parameter gradients are accumulated internally.
    fn backward(
        &mut self,
        inputs: &[&Array4<S>],
        output: &Array4<S>,
        grad_out: &Array4<S>,
    ) -> Vec<Array4<S>>;

    fn visit_params(&mut self, _f: &mut dyn FnMut(&mut Param<S>)) {}

    /// Non-trainable state tensors (e.g. batch-norm running statistics),
    /// visited in a stable order for serialization.
    fn visit_buffers(&mut self, _f: &mut dyn FnMut(&mut [S])) {}

    fn name(&self) -> &'static str;
}

struct Node<S: Real> {
    op: Box<dyn GraphOp<S>>,
    inputs: Vec<NodeId>,
}

/// Activations recorded during one forward pass.
pub struct Tape<S: Real> {
    outs: Vec<Array4<S>>,
}

impl<S: Real> Tape<S> {
    pub fn output(&self) -> &Array4<S> {
        self.outs.last().expect("tape is never empty")
    }
}

#[derive(Default)]
pub struct Graph<S: Real> {
    nodes: Vec<Node<S>>,
}

impl<S: Real> Graph<S> {
    pub fn new() -> Self {
        Graph { nodes: Vec::new() }
    }

    /// Append a node; all of `inputs` must already exist. Returns the new id.
    pub fn add(&mut self, op: impl GraphOp<S> + 'static, inputs: Vec<NodeId>) -> NodeId {
        let id = self.nodes.len() + 1;
        for &i in &inputs {
            assert!(i < id, "node input {i} does not precede node {id}");
        }
        self.nodes.push(Node {
            op: Box::new(op),
            inputs,
        });
        id
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn forward(&mut self, input: Array4<S>, train: bool) -> Tape<S> {
        let mut outs: Vec<Array4<S>> = Vec::with_capacity(self.nodes.len() + 1);
        outs.push(input);
        for node in self.nodes.iter_mut() {
            let output = {
                let refs: Vec<&Array4<S>> = node.inputs.iter().map(|&i| &outs[i]).collect();
                node.op.forward(&refs, train)
            };
            outs.push(output);
        }
        Tape { outs }
    }

    /// Backpropagate `grad_out` (gradient at the final node) through the
    /// recorded tape; returns the gradient at the graph input.
    pub fn backward(&mut self, tape: &Tape<S>, grad_out: Array4<S>) -> Array4<S> {
        let n = self.nodes.len();
        assert_eq!(tape.outs.len(), n + 1, "tape does not match graph");
        let mut grads: Vec<Option<Array4<S>>> = vec![None; n + 1];
        grads[n] = Some(grad_out);
        for id in (1..=n).rev() {
            let g = match grads[id].take() {
                Some(g) => g,
                None => continue, // node feeds nothing that received gradient
            };
            let node = &mut self.nodes[id - 1];
            let input_grads = {
                let refs: Vec<&Array4<S>> =
                    node.inputs.iter().map(|&i| &tape.outs[i]).collect();
                node.op.backward(&refs, &tape.outs[id], &g)
            };
            assert_eq!(input_grads.len(), node.inputs.len());
            for (&src, ig) in node.inputs.iter().zip(input_grads) {
                match &mut grads[src] {
                    Some(existing) => *existing += &ig,
                    slot @ None => *slot = Some(ig),
                }
            }
        }
        grads[0]
            .take()
            .expect("graph input received no gradient")
    }
}

impl<S: Real> Graph<S> {
    pub fn visit_buffers(&mut self, f: &mut dyn FnMut(&mut [S])) {
        for node in self.nodes.iter_mut() {
            node.op.visit_buffers(f);
        }
    }
}

impl<S: Real> Trainable<S> for Graph<S> {
    fn visit_params(&mut self, f: &mut dyn FnMut(&mut Param<S>)) {
        for node in self.nodes.iter_mut() {
            node.op.visit_params(f);
        }
    }
}

//! Minimal CPU neural-network core: explicit forward/backward layers over
//! `ndarray`, a small static-graph executor, categorical cross-entropy and
//! Adam. Feature maps are (B, C, H, W); the classifier head works on (B, C).

mod adam;
mod gradcheck;
mod graph;
mod init;
mod layers;
mod loss;

pub use adam::Adam;
pub use graph::{Graph, GraphOp, NodeId, Tape, INPUT};
pub use init::Initializer;
pub use layers::{
    Activation, ActKind, AvgPool2d, BatchNorm2d, ConcatChannels, Conv2d, ElementAdd,
    GlobalAvgPool, Linear, MaxPool2d, MulBroadcast, Param,
};
pub use loss::{cross_entropy_with_softmax, softmax};

/// Mutable parameter visitor in a stable, construction-determined order.
pub trait Trainable<S: crate::scalar::Real> {
    fn visit_params(&mut self, f: &mut dyn FnMut(&mut Param<S>));

    fn zero_grads(&mut self) {
        self.visit_params(&mut |p| p.grad.fill(S::zero()));
    }

    fn param_count(&mut self) -> usize {
        let mut n = 0;
        self.visit_params(&mut |p| n += p.value.len());
        n
    }
}

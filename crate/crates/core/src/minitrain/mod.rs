//! A small dense-network trainer with a softmax head and pluggable
//! cross-entropy or continuous-categorical losses.

mod gradcheck;
mod loss;
mod network;
mod optim;
mod train;

pub use gradcheck::{gradcheck, GradcheckReport};
pub use loss::{batch_loss, batch_loss_value, sample_loss, BatchLoss, LossKind, SampleLoss};
pub use network::{
    Activation, BatchNorm, ForwardCache, Gradients, Layer, LayerSpec, Mode, Network, NetworkSpec,
};
pub use optim::{Optimizer, OptimizerKind};
pub use train::{
    accuracy, evaluate, loss_and_grad, train, Dataset, EpochMetrics, Evaluation, LabelMode,
    LossAndGrad, Split, TrainConfig, TrainOutcome,
};

#[cfg(test)]
mod tests;

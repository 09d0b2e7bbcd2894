//! Contrastive representation learning at toy scale: the instance-level and
//! cluster-level losses with the entropy regularizer, a small MLP encoder
//! with hand-written backpropagation, and an unsupervised training loop.

mod encoder;
mod loss;
mod train;

pub use encoder::{Activation, Dense, EncoderShape, Forward, ToyEncoder};
pub use loss::{
    cluster_loss, contrastive_with_grad, cosine_similarity, entropy_regularizer, instance_loss,
    total_loss, total_loss_with_grad, ContrastiveOutput, LossBreakdown, LossConfig, LossTerms,
    OutputGrads, ProjectedBatch,
};
pub use train::{
    feature_std, loss_and_gradient, loss_gradient, loss_value, train_toy, Augmenter, TrainConfig,
    TrainOutcome,
};

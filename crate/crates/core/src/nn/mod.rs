//! Dense matrices and small feed-forward networks with hand-written
//! reverse-mode gradients.

mod adam;
mod mat;
mod mlp;

pub use adam::{AdamState, LrSchedule};
pub use mat::Mat;
pub use mlp::{Activation, ForwardTrace, Layer, Mlp, MlpGrads};

pub(crate) use mat::dot;

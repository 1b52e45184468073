//! Minimal dense numerics: matrices, layers with hand-written gradients,
//! MSE, Adam and a gradient checker.

pub mod gradcheck;
pub mod layers;
pub mod loss;
pub mod lstm;
pub mod optim;
pub mod rng;
pub mod tensor;

pub use gradcheck::{grad_check, Differentiable, GradCheckOptions, GradCheckReport};
pub use layers::{linear_backward, linear_forward, relu, relu_backward, Linear, Mlp};
pub use loss::{mse_loss, mse_loss_masked};
pub use lstm::{LstmLayer, LstmNet};
pub use optim::{adam_step, AdamConfig, Param};
pub use rng::{prng, Prng};
pub use tensor::{gemm, matmul, Tensor2, Trans};

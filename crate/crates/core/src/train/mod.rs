pub mod loss;
pub mod optim;
pub mod trainer;

pub use loss::{combined_loss, psnr, LossWeights};
pub use optim::{AdamW, AdamWConfig};
pub use trainer::{metrics_csv, StepMetrics, TrainConfig, Trainer};

pub mod attention;
pub mod fda;
pub mod streaming;

pub use attention::{full_height_window, line_attention_linear, line_attention_naive, AttentionImpl};
pub use fda::{fda_forward, LineAttentionParams};
pub use streaming::{line_attention_streaming, LineBufferState, StreamStats};

pub mod bench;
pub mod flops;

pub use bench::{bench_scaling, loglog_slope, pixel_slope, rows_csv, BenchRow, Window};
pub use flops::{count_flops, BlockFlops, FlopsReport};

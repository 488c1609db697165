pub mod bayer;
pub mod dataset;
pub mod io;
pub mod isp;
pub mod noise;
pub mod scene;

pub use bayer::{amplify, bayer_pack, bayer_unpack, BayerFrame, CfaPattern};
pub use dataset::{load_dataset, read_manifest, write_dataset, Manifest, SamplePair, SynthConfig};
pub use io::{write_ppm, RawFile};
pub use isp::simple_isp;
pub use noise::{add_low_light_noise, NoiseModel};
pub use scene::synth_scene;

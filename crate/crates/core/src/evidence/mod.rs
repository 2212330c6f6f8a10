//! Part evidence: response stacks, the synthetic scene and detector oracle,
//! and merging of detector activations into pre-detections.

mod merge;
mod responses;
mod stack;
mod synth;

pub use merge::{merge_activations, Activation, ConfigOffset, MergeGate};
pub use responses::{bump_value, render_response_stack, synth_predetections, Detection, DetectionNoise, NoiseParams};
pub use stack::{
    LevelInfo, PyramidSpec, ResponseStack, ScaleLevel, OUTSIDE_LOG_RATIO, STACK_FORMAT_VERSION, STACK_MAGIC,
};
pub use synth::{
    apparent_azimuth, bearing, bin_center, synth_scene, viewpoint_bin, GroundTruthScene, GtObject, OccluderBox,
    SynthConfig, VIEWPOINT_BINS,
};

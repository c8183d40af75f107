//! Corpus ingestion, window slicing, and the synthetic scene generator.

pub mod annotations;
pub mod camera;
pub mod synthetic;
pub mod windows;

pub use annotations::{
    parse_annotations, parse_annotations_at, serialize_annotations, write_annotations_file,
    FrameRecord, RawTrack,
};
pub use camera::{project_to_image, Camera, CameraPoint};
pub use synthetic::{
    generate_synthetic_corpus, simulate_script, simulate_scripts, AgentScript, EgoProfile,
    SampleTruth, SceneScript, ScriptSampler,
};
pub use windows::{slice_windows, WindowSpec};

use std::path::Path;

use crate::error::Result;
use crate::trajectory::{measure_visible_aspect_ratio, Corpus, Split};

/// Loads an annotation file and slices it into windows.
pub fn load_corpus(path: &Path, spec: &WindowSpec, split: Split) -> Result<Corpus> {
    let tracks = parse_annotations(path)?;
    synthetic::corpus_from_tracks(&tracks, spec, split)
}

/// Sets the corpus aspect ratio from its own fully visible boxes.
pub fn calibrate_aspect_ratio(corpus: &mut Corpus) -> Result<f64> {
    let ratio = measure_visible_aspect_ratio(corpus)?;
    corpus.set_aspect_ratio(ratio)?;
    Ok(ratio)
}

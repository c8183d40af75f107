//! Simulates a handful of driving scenes, writes them as an annotation
//! file and slices the result into observation/prediction windows.
//!
//! cargo run --example generate_corpus -- [scenes] [seed]

use encore::dataset::{load_corpus, simulate_scripts, write_annotations_file, ScriptSampler, WindowSpec};
use encore::trajectory::Split;

fn main() -> encore::Result<()> {
    let mut args = std::env::args().skip(1);
    let scenes: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(6);
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(7);

    let scripts = ScriptSampler::default().sample_many(seed, scenes, "scene_");
    let tracks = simulate_scripts(&scripts)?;
    let dir = std::env::temp_dir().join("encore-example");
    std::fs::create_dir_all(&dir).map_err(|e| encore::Error::io(&dir, e))?;
    let path = dir.join("corpus.jsonl");
    write_annotations_file(&tracks, &path)?;

    let spec = WindowSpec::from_seconds(30.0)?;
    let corpus = load_corpus(&path, &spec, Split::Test)?;
    let frames: usize = tracks.iter().map(|t| t.len()).sum();
    println!("{} tracks, {frames} annotated frames -> {}", tracks.len(), path.display());
    println!(
        "{} windows of {}+{} frames (stride {})",
        corpus.len(),
        spec.obs_len,
        spec.pred_len,
        spec.stride
    );
    if let Some(s) = corpus.samples.first() {
        let last = s.obs_boxes.last().unwrap();
        println!(
            "first window: {} / {} from frame {}, last observed box [{:.1}, {:.1}, {:.1}, {:.1}]",
            s.video_id, s.ped_id, s.start_frame, last.x1, last.y1, last.x2, last.y2
        );
    }
    Ok(())
}

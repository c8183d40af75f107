//! JSON-Lines annotation files, one object per frame-observation.
//!
//! ```text
//! {"video_id":"v0","ped_id":"p1","frame":12,"box":[x1,y1,x2,y2],"state":"walking",
//!  "ego":{"speed_kmh":..,"accel_ms2":..,"yaw_deg":..,"yaw_rate_dps":..,"lat":..,"lon":..},
//!  "image":{"w":1920,"h":1080},"_truth":{..}}
//! ```
//!
//! Files whose name ends in `.gz` are read and written gzip-compressed.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::dataset::synthetic::FrameTruth;
use crate::error::{Error, Result};
use crate::trajectory::{BoundingBox, EgoState, ImageGeometry, PedestrianState, DEFAULT_FPS};

/// Reserved key carrying generator ground truth.
pub const TRUTH_KEY: &str = "_truth";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub frame: i64,
    pub bbox: BoundingBox,
    pub state: PedestrianState,
    pub ego: EgoState,
    pub truth: Option<FrameTruth>,
}

/// All annotated frames of one pedestrian in one video.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawTrack {
    pub video_id: String,
    pub ped_id: String,
    pub frames: Vec<FrameRecord>,
    pub geometry: ImageGeometry,
    pub fps: f64,
}

impl RawTrack {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

#[derive(Serialize)]
struct LineOut<'a> {
    video_id: &'a str,
    ped_id: &'a str,
    frame: i64,
    #[serde(rename = "box")]
    bbox: &'a BoundingBox,
    state: PedestrianState,
    ego: &'a EgoState,
    image: &'a ImageGeometry,
    #[serde(rename = "_truth", skip_serializing_if = "Option::is_none")]
    truth: Option<&'a FrameTruth>,
}

fn field<T: DeserializeOwned>(obj: &Map<String, Value>, key: &str, line: usize) -> Result<T> {
    let value = obj.get(key).ok_or_else(|| Error::Schema {
        line,
        field: key.to_string(),
    })?;
    serde_json::from_value(value.clone()).map_err(|_| Error::Schema {
        line,
        field: key.to_string(),
    })
}

/// Parses annotation text. Tracks are returned in order of first appearance.
pub fn parse_annotations_reader<R: BufRead>(reader: R, fps: f64) -> Result<Vec<RawTrack>> {
    let mut tracks: Vec<RawTrack> = Vec::new();
    let mut index: std::collections::HashMap<(String, String), usize> = Default::default();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        let obj = value.as_object().ok_or_else(|| Error::Parse {
            line: line_no,
            message: "expected a JSON object".into(),
        })?;
        let video_id: String = field(obj, "video_id", line_no)?;
        let ped_id: String = field(obj, "ped_id", line_no)?;
        let frame: i64 = field(obj, "frame", line_no)?;
        let bbox: BoundingBox = field(obj, "box", line_no)?;
        let state: PedestrianState = field(obj, "state", line_no)?;
        let ego: EgoState = field(obj, "ego", line_no)?;
        if !ego.is_valid() {
            return Err(Error::Schema {
                line: line_no,
                field: "ego".into(),
            });
        }
        let geometry: ImageGeometry = field(obj, "image", line_no)?;
        if geometry.w == 0 || geometry.h == 0 {
            return Err(Error::Schema {
                line: line_no,
                field: "image".into(),
            });
        }
        let truth: Option<FrameTruth> = match obj.get(TRUTH_KEY) {
            Some(_) => Some(field(obj, TRUTH_KEY, line_no)?),
            None => None,
        };

        let key = (video_id, ped_id);
        let slot = match index.get(&key) {
            Some(&slot) => slot,
            None => {
                tracks.push(RawTrack {
                    video_id: key.0.clone(),
                    ped_id: key.1.clone(),
                    frames: Vec::new(),
                    geometry,
                    fps,
                });
                index.insert(key, tracks.len() - 1);
                tracks.len() - 1
            }
        };
        let track = &mut tracks[slot];
        if let Some(last) = track.frames.last() {
            if frame <= last.frame {
                return Err(Error::Gap {
                    line: line_no,
                    previous: last.frame,
                    current: frame,
                });
            }
        }
        track.frames.push(FrameRecord {
            frame,
            bbox,
            state,
            ego,
            truth,
        });
    }
    Ok(tracks)
}

fn open_reader(path: &Path) -> Result<Box<dyn BufRead>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let inner: Box<dyn Read> = if is_gz(path) {
        Box::new(GzDecoder::new(file))
    } else {
        Box::new(file)
    };
    Ok(Box::new(BufReader::new(inner)))
}

fn is_gz(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "gz")
}

/// Reads an annotation file recorded at the default 30 fps.
pub fn parse_annotations(path: &Path) -> Result<Vec<RawTrack>> {
    parse_annotations_at(path, DEFAULT_FPS)
}

pub fn parse_annotations_at(path: &Path, fps: f64) -> Result<Vec<RawTrack>> {
    parse_annotations_reader(open_reader(path)?, fps)
}

pub fn write_annotations<W: Write>(tracks: &[RawTrack], mut out: W) -> Result<()> {
    for track in tracks {
        for rec in &track.frames {
            let line = LineOut {
                video_id: &track.video_id,
                ped_id: &track.ped_id,
                frame: rec.frame,
                bbox: &rec.bbox,
                state: rec.state,
                ego: &rec.ego,
                image: &track.geometry,
                truth: rec.truth.as_ref(),
            };
            serde_json::to_writer(&mut out, &line)?;
            out.write_all(b"\n").map_err(|e| Error::io("<annotations>", e))?;
        }
    }
    Ok(())
}

pub fn serialize_annotations(tracks: &[RawTrack]) -> Result<String> {
    let mut buf = Vec::new();
    write_annotations(tracks, &mut buf)?;
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

pub fn write_annotations_file(tracks: &[RawTrack], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    if is_gz(path) {
        // Fixed header (no mtime) keeps compressed output byte-stable.
        let mut enc = GzEncoder::new(BufWriter::new(file), Compression::default());
        write_annotations(tracks, &mut enc)?;
        enc.finish()
            .and_then(|mut w| w.flush())
            .map_err(|e| Error::io(path, e))?;
    } else {
        let mut w = BufWriter::new(file);
        write_annotations(tracks, &mut w)?;
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

//! Line-delimited JSON bridge to an out-of-process detector.
//!
//! Each request is one JSON object on one line:
//!
//! ```text
//! {"scene_id":"...","luminosity":3000.0,"boxes":[{"cx":..,"cy":..,"rot_deg":..,"w":..,"h":..}]}
//! ```
//!
//! and the peer answers with exactly one line:
//!
//! ```text
//! {"scene_id":"...","detections":[{"cx":..,"cy":..,"rot_deg":..,"w":..,"h":..,"confidence":..}]}
//! ```
//!
//! Responses must arrive in request order and echo the `scene_id`.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::process::{Child, Command, Stdio};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Detection, Perception, PerceptionError, PerceptionRequest, SyntheticPerceptionParams};
use crate::geometry::ObbPose;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireBox {
    pub cx: f64,
    pub cy: f64,
    pub rot_deg: f64,
    pub w: f64,
    pub h: f64,
}

impl From<&ObbPose> for WireBox {
    fn from(p: &ObbPose) -> Self {
        Self {
            cx: p.cx,
            cy: p.cy,
            rot_deg: p.rot_deg,
            w: p.width,
            h: p.height,
        }
    }
}

impl WireBox {
    fn to_pose(&self) -> ObbPose {
        ObbPose::new(self.cx, self.cy, self.rot_deg, self.w, self.h)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerceptionRequestWire {
    pub scene_id: String,
    pub luminosity: f64,
    pub boxes: Vec<WireBox>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionWire {
    pub cx: f64,
    pub cy: f64,
    pub rot_deg: f64,
    pub w: f64,
    pub h: f64,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerceptionResponseWire {
    pub scene_id: String,
    pub detections: Vec<DetectionWire>,
}

impl PerceptionResponseWire {
    fn into_detections(self) -> Result<Vec<Detection>, PerceptionError> {
        self.detections
            .into_iter()
            .map(|d| {
                let obb = ObbPose::new(d.cx, d.cy, d.rot_deg, d.w, d.h);
                if !obb.is_valid() {
                    return Err(PerceptionError::Protocol(format!(
                        "invalid detection box {d:?}"
                    )));
                }
                if !(0.0..=1.0).contains(&d.confidence) {
                    return Err(PerceptionError::Protocol(format!(
                        "confidence {} outside [0, 1]",
                        d.confidence
                    )));
                }
                Ok(Detection {
                    obb,
                    confidence: d.confidence,
                })
            })
            .collect()
    }
}

/// Client side of the protocol.
pub struct ExternalPerception {
    reader: Box<dyn BufRead + Send>,
    writer: Box<dyn Write + Send>,
    child: Option<Child>,
}

impl ExternalPerception {
    pub fn from_streams(
        reader: impl BufRead + Send + 'static,
        writer: impl Write + Send + 'static,
    ) -> Self {
        Self {
            reader: Box::new(reader),
            writer: Box::new(writer),
            child: None,
        }
    }

    pub fn connect(addr: impl ToSocketAddrs) -> std::io::Result<Self> {
        let stream = TcpStream::connect(addr)?;
        let reader = BufReader::new(stream.try_clone()?);
        Ok(Self::from_streams(reader, BufWriter::new(stream)))
    }

    /// Spawns `command` and talks to it over its standard input and output.
    pub fn spawn(mut command: Command) -> std::io::Result<Self> {
        let mut child = command
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        Ok(Self {
            reader: Box::new(BufReader::new(stdout)),
            writer: Box::new(BufWriter::new(stdin)),
            child: Some(child),
        })
    }
}

impl Drop for ExternalPerception {
    fn drop(&mut self) {
        if let Some(child) = self.child.as_mut() {
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

impl Perception for ExternalPerception {
    fn detect(&mut self, request: &PerceptionRequest<'_>) -> Result<Vec<Detection>, PerceptionError> {
        let wire = PerceptionRequestWire {
            scene_id: request.scene_id.clone(),
            luminosity: request.luminosity,
            boxes: request.boxes.iter().map(WireBox::from).collect(),
        };
        let line = serde_json::to_string(&wire).expect("request serializes");
        writeln!(self.writer, "{line}")?;
        self.writer.flush()?;
        let mut reply = String::new();
        if self.reader.read_line(&mut reply)? == 0 {
            return Err(PerceptionError::Protocol("peer closed the stream".into()));
        }
        let response: PerceptionResponseWire = serde_json::from_str(reply.trim_end())
            .map_err(|e| PerceptionError::Protocol(format!("malformed response: {e}")))?;
        if response.scene_id != request.scene_id {
            return Err(PerceptionError::Protocol(format!(
                "response for scene {:?} while waiting for {:?}",
                response.scene_id, request.scene_id
            )));
        }
        response.into_detections()
    }
}

/// Noise seed a server derives from a scene id.
pub fn seed_for_scene_id(scene_id: &str) -> u64 {
    let digest = Sha256::digest(scene_id.as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

/// Server side: answers requests with a synthetic detector until EOF.
pub fn serve_synthetic(
    params: &SyntheticPerceptionParams,
    reader: impl BufRead,
    mut writer: impl Write,
) -> std::io::Result<usize> {
    let mut served = 0;
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let req: PerceptionRequestWire = serde_json::from_str(&line)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
        let boxes: Vec<ObbPose> = req.boxes.iter().map(WireBox::to_pose).collect();
        let scene = crate::scene::Scene {
            boxes,
            luminosity: req.luminosity,
        };
        let detections = params
            .predict(&scene, seed_for_scene_id(&req.scene_id))
            .into_iter()
            .map(|d| DetectionWire {
                cx: d.obb.cx,
                cy: d.obb.cy,
                rot_deg: d.obb.rot_deg,
                w: d.obb.width,
                h: d.obb.height,
                confidence: d.confidence,
            })
            .collect();
        let resp = PerceptionResponseWire {
            scene_id: req.scene_id,
            detections,
        };
        writeln!(writer, "{}", serde_json::to_string(&resp).expect("response serializes"))?;
        writer.flush()?;
        served += 1;
    }
    Ok(served)
}

//! Line-delimited JSON protocol spoken with external segmenter processes.
//!
//! ```text
//! -> {"id":1,"op":"init","config":{}}         <- {"id":1,"ok":true,"capabilities":["segment","auto"]}
//! -> {"id":2,"op":"segment","image":{...},"prompt":{"point":[r,c],"box":[r,c,h,w]|null}}
//! <- {"id":2,"mask":{"rows":R,"cols":C,"rle":[...]},"prob":0.93}
//! -> {"id":3,"op":"auto","image":{...}}       <- {"id":3,"masks":[{"mask":{...},"prob":0.9}]}
//! -> {"id":4,"op":"shutdown"}                 <- {"id":4,"ok":true}
//! ```
//!
//! Images travel as base64 of `rows * cols` raw `u8`. Failures are answered
//! with `{"id":n,"error":"..."}`. Request ids strictly increase.

use std::io::{BufRead, Write};

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine as _;
use serde::{Deserialize, Serialize};

use super::{rle, BoxPrompt, Capabilities, Prompt, SegmentResult2D, Segmenter};
use crate::error::{Error, Result};
use crate::volume::{component_at, Connectivity2, Image2D, Mask2D};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WireImage {
    pub rows: usize,
    pub cols: usize,
    pub b64: String,
}

impl WireImage {
    /// `u8` images pass through unchanged; wider images are scaled linearly
    /// so their maximum maps to 255.
    pub fn encode(image: &Image2D) -> Self {
        let max = image.data().iter().copied().max().unwrap_or(0);
        let bytes: Vec<u8> = if max <= u8::MAX as u16 {
            image.data().iter().map(|&v| v as u8).collect()
        } else {
            let scale = 255.0 / max as f64;
            image.data().iter().map(|&v| (v as f64 * scale).round() as u8).collect()
        };
        Self {
            rows: image.rows(),
            cols: image.cols(),
            b64: B64.encode(bytes),
        }
    }

    pub fn decode(&self) -> Result<Image2D> {
        let bytes = B64
            .decode(&self.b64)
            .map_err(|e| Error::Protocol(format!("bad base64 image: {e}")))?;
        if bytes.len() != self.rows * self.cols {
            return Err(Error::Protocol(format!(
                "image payload has {} bytes, expected {}",
                bytes.len(),
                self.rows * self.cols
            )));
        }
        Image2D::new(self.rows, self.cols, bytes.into_iter().map(u16::from).collect())
            .map_err(|e| Error::Protocol(e.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WirePrompt {
    pub point: [usize; 2],
    #[serde(rename = "box")]
    pub bbox: Option<[f64; 4]>,
}

impl From<&Prompt> for WirePrompt {
    fn from(p: &Prompt) -> Self {
        Self {
            point: [p.point.0, p.point.1],
            bbox: p.bbox.map(|b| [b.row, b.col, b.height, b.width]),
        }
    }
}

impl From<&WirePrompt> for Prompt {
    fn from(p: &WirePrompt) -> Self {
        Prompt {
            point: (p.point[0], p.point[1]),
            bbox: p.bbox.map(|[row, col, height, width]| BoxPrompt {
                row,
                col,
                height,
                width,
            }),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WireMask {
    pub rows: usize,
    pub cols: usize,
    pub rle: Vec<u32>,
}

impl WireMask {
    pub fn encode(mask: &Mask2D) -> Self {
        Self {
            rows: mask.rows(),
            cols: mask.cols(),
            rle: rle::encode(mask),
        }
    }

    pub fn decode(&self) -> Result<Mask2D> {
        rle::decode(self.rows, self.cols, &self.rle)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WireMaskProb {
    pub mask: WireMask,
    pub prob: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum Op {
    Init {
        #[serde(default)]
        config: serde_json::Value,
    },
    Segment {
        image: WireImage,
        prompt: WirePrompt,
    },
    Auto {
        image: WireImage,
    },
    Shutdown,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Request {
    pub id: u64,
    #[serde(flatten)]
    pub op: Op,
}

/// Any response line. Exactly which fields are present depends on the op.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Response {
    pub id: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ok: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capabilities: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<WireMask>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prob: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub masks: Option<Vec<WireMaskProb>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Response {
    fn error(id: i64, msg: impl Into<String>) -> Self {
        Self {
            id,
            error: Some(msg.into()),
            ..Default::default()
        }
    }
}

pub fn capability_names(c: Capabilities) -> Vec<String> {
    let mut out = Vec::new();
    if c.prompted_segmentation {
        out.push("segment".to_owned());
    }
    if c.auto_masks {
        out.push("auto".to_owned());
    }
    out
}

pub fn parse_capabilities(names: &[String]) -> Capabilities {
    Capabilities {
        prompted_segmentation: names.iter().any(|n| n == "segment"),
        auto_masks: names.iter().any(|n| n == "auto"),
    }
}

fn answer<S: Segmenter + ?Sized>(backend: &mut S, req: &Request) -> Result<Response> {
    let id = req.id as i64;
    Ok(match &req.op {
        Op::Init { .. } => Response {
            id,
            ok: Some(true),
            capabilities: Some(capability_names(backend.capabilities())),
            ..Default::default()
        },
        Op::Segment { image, prompt } => {
            let image = image.decode()?;
            let prompt = Prompt::from(prompt);
            prompt.validate(&image)?;
            let r = backend.segment_raw(&image, &prompt)?;
            Response {
                id,
                mask: Some(WireMask::encode(&r.mask)),
                prob: Some(r.probability),
                ..Default::default()
            }
        }
        Op::Auto { image } => {
            if !backend.capabilities().auto_masks {
                return Err(Error::CapabilityMissing("auto_masks"));
            }
            let image = image.decode()?;
            let masks = backend
                .auto_masks_raw(&image)?
                .iter()
                .map(|r| WireMaskProb {
                    mask: WireMask::encode(&r.mask),
                    prob: r.probability,
                })
                .collect();
            Response {
                id,
                masks: Some(masks),
                ..Default::default()
            }
        }
        Op::Shutdown => Response {
            id,
            ok: Some(true),
            ..Default::default()
        },
    })
}

/// Serves `backend` over the protocol until `shutdown` or end of input.
/// Malformed lines are answered with error objects and never end the loop.
pub fn serve<S, R, W>(backend: &mut S, input: R, mut output: W) -> std::io::Result<()>
where
    S: Segmenter + ?Sized,
    R: BufRead,
    W: Write,
{
    let mut last_id: Option<u64> = None;
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let (resp, stop) = match serde_json::from_str::<Request>(&line) {
            Err(e) => {
                let id = serde_json::from_str::<serde_json::Value>(&line)
                    .ok()
                    .and_then(|v| v.get("id").and_then(|i| i.as_i64()))
                    .unwrap_or(-1);
                (Response::error(id, format!("malformed request: {e}")), false)
            }
            Ok(req) if last_id.is_some_and(|l| req.id <= l) => (
                Response::error(req.id as i64, "request ids must strictly increase"),
                false,
            ),
            Ok(req) => {
                last_id = Some(req.id);
                let stop = matches!(req.op, Op::Shutdown);
                let resp = answer(backend, &req).unwrap_or_else(|e| Response::error(req.id as i64, e.to_string()));
                (resp, stop)
            }
        };
        serde_json::to_writer(&mut output, &resp)?;
        output.write_all(b"\n")?;
        output.flush()?;
        if stop {
            break;
        }
    }
    Ok(())
}

/// Test double: fills the prompt box (or just the prompt pixel) with
/// probability 0.9.
#[derive(Clone, Copy, Debug, Default)]
pub struct EchoSegmenter;

impl Segmenter for EchoSegmenter {
    fn capabilities(&self) -> Capabilities {
        Capabilities {
            prompted_segmentation: true,
            auto_masks: false,
        }
    }

    fn segment_raw(&mut self, image: &Image2D, prompt: &Prompt) -> Result<SegmentResult2D> {
        let mask = match &prompt.bbox {
            Some(b) => {
                let (rr, cr) = b.pixel_ranges(image.rows(), image.cols());
                Mask2D::from_fn(image.rows(), image.cols(), |r, c| rr.contains(&r) && cr.contains(&c))
            }
            None => Mask2D::from_fn(image.rows(), image.cols(), |r, c| (r, c) == prompt.point),
        };
        Ok(SegmentResult2D { mask, probability: 0.9 })
    }
}

/// Oracle that reads ground truth from the image itself: nonzero pixels are
/// foreground. Sending ground-truth slices as images makes it reproduce
/// [`super::oracle_segment`] across a process boundary.
#[derive(Clone, Copy, Debug, Default)]
pub struct ImageOracleSegmenter;

impl Segmenter for ImageOracleSegmenter {
    fn capabilities(&self) -> Capabilities {
        Capabilities {
            prompted_segmentation: true,
            auto_masks: true,
        }
    }

    fn segment_raw(&mut self, image: &Image2D, prompt: &Prompt) -> Result<SegmentResult2D> {
        let fg = Mask2D::from_fn(image.rows(), image.cols(), |r, c| image.get(r, c) != 0);
        let mask = component_at(&fg, prompt.point, Connectivity2::C8);
        let probability = if mask.is_empty() { 0.0 } else { 1.0 };
        Ok(SegmentResult2D { mask, probability })
    }

    fn auto_masks_raw(&mut self, image: &Image2D) -> Result<Vec<SegmentResult2D>> {
        let fg = Mask2D::from_fn(image.rows(), image.cols(), |r, c| image.get(r, c) != 0);
        let cc = crate::volume::connected_components_2d(&fg, Connectivity2::C8);
        Ok((1..=cc.len() as u32)
            .map(|l| SegmentResult2D {
                mask: cc.mask_of(l),
                probability: 1.0,
            })
            .collect())
    }
}

//! YOLO label text: `<class> <cx> <cy> <w> <h>` per line, with an optional
//! trailing `<confidence>` for detector output.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write as _;

use crate::bbox::BBox;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GroundTruthAnnotation {
    pub class_id: u32,
    pub bbox: BBox,
}

impl GroundTruthAnnotation {
    pub fn new(class_id: u32, bbox: BBox) -> Self {
        Self { class_id, bbox }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Detection {
    pub class_id: u32,
    pub bbox: BBox,
    confidence: f64,
}

impl Detection {
    pub fn new(class_id: u32, bbox: BBox, confidence: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&confidence) {
            return Err(Error::InvalidThreshold(confidence));
        }
        Ok(Self {
            class_id,
            bbox,
            confidence,
        })
    }

    #[inline]
    pub fn confidence(&self) -> f64 {
        self.confidence
    }
}

fn push_box(out: &mut String, class_id: u32, b: &BBox) {
    // writing into a String cannot fail
    let _ = write!(out, "{} {:.6} {:.6} {:.6} {:.6}", class_id, b.cx(), b.cy(), b.w(), b.h());
}

/// Formats ground truth, one `\n`-terminated line per annotation.
pub fn write_label_file(annotations: &[GroundTruthAnnotation]) -> String {
    let mut out = String::with_capacity(annotations.len() * 40);
    for a in annotations {
        push_box(&mut out, a.class_id, &a.bbox);
        out.push('\n');
    }
    out
}

/// Formats detections with a sixth confidence column.
pub fn write_detection_file(detections: &[Detection]) -> String {
    let mut out = String::with_capacity(detections.len() * 48);
    for d in detections {
        push_box(&mut out, d.class_id, &d.bbox);
        let _ = write!(out, " {:.6}", d.confidence);
        out.push('\n');
    }
    out
}

/// Parses a ground-truth label file. Blank lines are skipped; fields may be
/// separated by any run of whitespace.
pub fn parse_label_file(text: &str) -> Result<Vec<GroundTruthAnnotation>> {
    parse_lines(text, 5, |line, fields| {
        let (class_id, bbox) = parse_box(line, fields)?;
        Ok(GroundTruthAnnotation { class_id, bbox })
    })
}

/// Parses detector output with six fields per line.
pub fn parse_detection_file(text: &str) -> Result<Vec<Detection>> {
    parse_lines(text, 6, |line, fields| {
        let (class_id, bbox) = parse_box(line, fields)?;
        let confidence = parse_real(line, fields[5], "confidence")?;
        Detection::new(class_id, bbox, confidence).map_err(|_| Error::Validation {
            line,
            message: format!("confidence {confidence} outside [0, 1]"),
        })
    })
}

fn parse_lines<T>(
    text: &str,
    n_fields: usize,
    mut parse: impl FnMut(usize, &[&str]) -> Result<T>,
) -> Result<Vec<T>> {
    let mut out = Vec::new();
    let mut fields: Vec<&str> = Vec::with_capacity(n_fields);
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        fields.clear();
        fields.extend(raw.split_whitespace());
        if fields.is_empty() {
            continue;
        }
        if fields.len() != n_fields {
            return Err(Error::Parse {
                line,
                message: format!("expected {n_fields} fields, found {}", fields.len()),
            });
        }
        out.push(parse(line, &fields)?);
    }
    Ok(out)
}

fn parse_box(line: usize, fields: &[&str]) -> Result<(u32, BBox)> {
    let class_id = fields[0].parse::<u32>().map_err(|_| Error::Parse {
        line,
        message: format!("invalid class id `{}`", fields[0]),
    })?;
    let cx = parse_real(line, fields[1], "cx")?;
    let cy = parse_real(line, fields[2], "cy")?;
    let w = parse_real(line, fields[3], "w")?;
    let h = parse_real(line, fields[4], "h")?;
    let bbox = BBox::new(cx, cy, w, h).map_err(|e| Error::Validation {
        line,
        message: format!("{e}"),
    })?;
    Ok((class_id, bbox))
}

fn parse_real(line: usize, s: &str, name: &str) -> Result<f64> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::Parse {
            line,
            message: format!("invalid {name} `{s}`"),
        }),
    }
}

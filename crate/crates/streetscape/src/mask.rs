//! Label masks: per-pixel class-id grids loaded from 8-bit single-channel
//! PNG files named `<point_id>_<heading>.png`.

use std::path::Path;

use crate::schema::CategorySchema;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LabelMask {
    pub width: u32,
    pub height: u32,
    /// Row-major class ids, length = width * height.
    pub data: Vec<u8>,
    /// Camera heading in degrees, one of 0/90/180/270.
    pub view_heading: u16,
    pub point_id: String,
}

pub const VALID_HEADINGS: [u16; 4] = [0, 90, 180, 270];

impl LabelMask {
    pub fn new(
        width: u32,
        height: u32,
        data: Vec<u8>,
        view_heading: u16,
        point_id: impl Into<String>,
        schema: &CategorySchema,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Mask(format!("empty mask {width}x{height}")));
        }
        if data.len() != (width as usize) * (height as usize) {
            return Err(Error::Mask(format!(
                "data length {} does not match {width}x{height}",
                data.len()
            )));
        }
        if !VALID_HEADINGS.contains(&view_heading) {
            return Err(Error::Mask(format!("invalid heading {view_heading}")));
        }
        for (i, &id) in data.iter().enumerate() {
            if !schema.is_valid_id(id) {
                let x = (i % width as usize) as u32;
                let y = (i / width as usize) as u32;
                return Err(Error::UnknownClass { class: id, x, y });
            }
        }
        Ok(LabelMask {
            width,
            height,
            data,
            view_heading,
            point_id: point_id.into(),
        })
    }

    #[inline]
    pub fn class_at(&self, x: u32, y: u32) -> u8 {
        self.data[(y as usize) * (self.width as usize) + (x as usize)]
    }

    pub fn total_pixels(&self) -> usize {
        self.data.len()
    }

    /// Pixel count per class id, indexed by id.
    pub fn class_counts(&self, num_classes: usize) -> Vec<usize> {
        let mut counts = vec![0usize; num_classes];
        for &id in &self.data {
            counts[usize::from(id)] += 1;
        }
        counts
    }
}

/// Parse `<point_id>_<heading>` from a mask file stem. The point id itself
/// may contain underscores; the heading is the last component.
pub fn parse_mask_filename(stem: &str) -> Option<(String, u16)> {
    let (point_id, heading) = stem.rsplit_once('_')?;
    let heading: u16 = heading.parse().ok()?;
    if !VALID_HEADINGS.contains(&heading) || point_id.is_empty() {
        return None;
    }
    Some((point_id.to_string(), heading))
}

pub fn load_mask(path: &Path, schema: &CategorySchema) -> Result<LabelMask> {
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| Error::Mask(format!("unreadable file name {}", path.display())))?;
    let (point_id, heading) = parse_mask_filename(stem).ok_or_else(|| {
        Error::Mask(format!(
            "file name {stem:?} does not match <point_id>_<heading>"
        ))
    })?;
    let img = image::open(path).map_err(|e| Error::Image {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let gray = img.into_luma8();
    let (width, height) = gray.dimensions();
    LabelMask::new(width, height, gray.into_raw(), heading, point_id, schema)
}

pub fn save_mask(mask: &LabelMask, path: &Path) -> Result<()> {
    let img = image::GrayImage::from_raw(mask.width, mask.height, mask.data.clone())
        .expect("dimensions validated at construction");
    img.save(path).map_err(|e| Error::Image {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

//! Bell-map rendering: numeric tables and 8-bit grayscale images.
//!
//! Images put `theta_c` on the horizontal axis and `theta_d` increasing
//! upward. Gray level 0 marks a masked bin; a population `p` maps to
//! `1 + round(254 p)`.

use std::io::Write;

use image::{GrayImage, Luma};
use serde_json::json;

use hom_core::AzimuthalBinning;

/// Value written to tables for bins without a reconstruction.
pub const MASKED_SENTINEL: f64 = -1.0;

pub fn gray_level(p: Option<f64>) -> u8 {
    match p {
        Some(p) => 1 + (254.0 * p.clamp(0.0, 1.0)).round() as u8,
        None => 0,
    }
}

/// `pop` is row-major over `(bin_c, bin_d)`.
pub fn gray_image(pop: &[Option<f64>], bins: usize) -> GrayImage {
    GrayImage::from_fn(bins as u32, bins as u32, |x, y| {
        let (bc, bd) = (x as usize, bins - 1 - y as usize);
        Luma([gray_level(pop[bc * bins + bd])])
    })
}

/// One row per `bin_c`, one column per `bin_d`.
pub fn write_map_csv(w: &mut impl Write, pop: &[Option<f64>], bins: usize) -> std::io::Result<()> {
    for row in pop.chunks(bins) {
        let cells: Vec<String> = row
            .iter()
            .map(|p| p.unwrap_or(MASKED_SENTINEL).to_string())
            .collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    Ok(())
}

pub fn scale_description(binning: &AzimuthalBinning, images: Vec<serde_json::Value>) -> serde_json::Value {
    let centers: Vec<f64> = (0..binning.bins()).map(|i| binning.center(i)).collect();
    json!({
        "value_range": [0.0, 1.0],
        "gray_masked": 0,
        "gray_formula": "1 + round(254 * p)",
        "csv_masked": MASKED_SENTINEL,
        "csv_layout": "row = bin_c, column = bin_d",
        "image_layout": "x = bin_c, y = bin_d with theta_d increasing upward",
        "bin_centers_rad": centers,
        "maps": images,
    })
}

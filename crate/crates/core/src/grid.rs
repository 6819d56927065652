//! Pixel grid of the two camera regions and its polar mapping.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Output port of the beamsplitter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Port {
    C,
    D,
}

impl Port {
    pub fn label(self) -> char {
        match self {
            Port::C => 'c',
            Port::D => 'd',
        }
    }
}

/// Square pixel grid shared by both camera regions.
///
/// `pitch` is in beam-waist units per pixel; `center_*` are the pixel
/// coordinates of the beam axis in each region. Pixel `(x, y)` maps to
/// `r = pitch * hypot(x - cx, y - cy)` and `theta = atan2(y - cy, x - cx)`
/// wrapped into `[-pi, pi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoordGrid {
    side: usize,
    pitch: f64,
    center_c: (f64, f64),
    center_d: (f64, f64),
}

impl Default for CoordGrid {
    /// 32 x 32 pixels at 1/6 waist per pixel; a waist-1 vortex spans ~30 pixels.
    fn default() -> Self {
        Self::centered(32, 1.0 / 6.0).expect("default grid is valid")
    }
}

impl CoordGrid {
    pub fn new(side: usize, pitch: f64, center_c: (f64, f64), center_d: (f64, f64)) -> Result<Self> {
        if side < 2 {
            return Err(invalid(format!("grid side must be at least 2 (got {side})")));
        }
        if !(pitch > 0.0 && pitch.is_finite()) {
            return Err(invalid(format!("grid pitch must be positive (got {pitch})")));
        }
        let finite = |p: (f64, f64)| p.0.is_finite() && p.1.is_finite();
        if !finite(center_c) || !finite(center_d) {
            return Err(invalid("grid centers must be finite"));
        }
        Ok(Self {
            side,
            pitch,
            center_c,
            center_d,
        })
    }

    /// Grid with the beam axis at the geometric center of both regions.
    pub fn centered(side: usize, pitch: f64) -> Result<Self> {
        let mid = (side as f64 - 1.0) / 2.0;
        Self::new(side, pitch, (mid, mid), (mid, mid))
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn pitch(&self) -> f64 {
        self.pitch
    }

    pub fn center(&self, port: Port) -> (f64, f64) {
        match port {
            Port::C => self.center_c,
            Port::D => self.center_d,
        }
    }

    /// Pixels per region.
    pub fn pixels(&self) -> usize {
        self.side * self.side
    }

    /// Cells of the joint `(pixel_c, pixel_d)` space.
    pub fn cells(&self) -> usize {
        self.pixels() * self.pixels()
    }

    /// Transverse area of one pixel in waist units.
    pub fn pixel_area(&self) -> f64 {
        self.pitch * self.pitch
    }

    #[inline]
    pub fn pixel_index(&self, x: usize, y: usize) -> usize {
        y * self.side + x
    }

    #[inline]
    pub fn pixel_xy(&self, index: usize) -> (usize, usize) {
        (index % self.side, index / self.side)
    }

    pub fn polar(&self, port: Port, x: usize, y: usize) -> (f64, f64) {
        let (cx, cy) = self.center(port);
        let dx = (x as f64 - cx) * self.pitch;
        let dy = (y as f64 - cy) * self.pitch;
        (dx.hypot(dy), wrap_angle(dy.atan2(dx)))
    }

    /// `(r, theta)` of every pixel of a region, indexed by [`pixel_index`](Self::pixel_index).
    pub fn polar_coords(&self, port: Port) -> Vec<(f64, f64)> {
        (0..self.pixels())
            .map(|i| {
                let (x, y) = self.pixel_xy(i);
                self.polar(port, x, y)
            })
            .collect()
    }

    /// Pixel containing the point `(r, theta)`, if it falls on the grid.
    pub fn pixel_at(&self, port: Port, r: f64, theta: f64) -> Option<(usize, usize)> {
        let (cx, cy) = self.center(port);
        let x = (cx + r * theta.cos() / self.pitch).round();
        let y = (cy + r * theta.sin() / self.pitch).round();
        let n = self.side as f64;
        if x < 0.0 || y < 0.0 || x >= n || y >= n {
            return None;
        }
        Some((x as usize, y as usize))
    }
}

/// Wraps an angle into `[-pi, pi)`.
pub fn wrap_angle(theta: f64) -> f64 {
    let t = (theta + PI).rem_euclid(2.0 * PI) - PI;
    if t >= PI {
        -PI
    } else {
        t
    }
}

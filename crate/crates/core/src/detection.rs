//! Camera-level simulation: per-pixel coincidence probabilities, shot noise,
//! time-tagged event streams and coincidence matching.

use std::ops::AddAssign;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, precondition, Result};
use crate::grid::{CoordGrid, Port};
use crate::hom::coincidence_amplitude;
use crate::modes::{vector_mode_field, QPlateParams};
use crate::polarization::{JonesVector, ProjectionSetting, C64};

/// Cells per independently seeded random stream in [`poisson_sample`].
const SAMPLE_CHUNK: usize = 4096;

/// The two photons entering the beamsplitter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Source {
    pub plate_a: QPlateParams,
    pub plate_b: QPlateParams,
    pub pol_a: JonesVector,
    pub pol_b: JonesVector,
}

/// Fields of both photons sampled in both camera regions.
#[derive(Debug, Clone)]
pub struct SampledFields {
    grid: CoordGrid,
    a_c: Vec<JonesVector>,
    b_c: Vec<JonesVector>,
    a_d: Vec<JonesVector>,
    b_d: Vec<JonesVector>,
}

impl SampledFields {
    pub fn new(source: &Source, grid: &CoordGrid) -> Result<Self> {
        Ok(Self {
            grid: *grid,
            a_c: vector_mode_field(&source.plate_a, &source.pol_a, grid, Port::C)?,
            b_c: vector_mode_field(&source.plate_b, &source.pol_b, grid, Port::C)?,
            a_d: vector_mode_field(&source.plate_a, &source.pol_a, grid, Port::D)?,
            b_d: vector_mode_field(&source.plate_b, &source.pol_b, grid, Port::D)?,
        })
    }

    pub fn grid(&self) -> &CoordGrid {
        &self.grid
    }

    /// Joint probability of a coincidence in every `(pixel_c, pixel_d)` cell
    /// after the polarization analyzers, indexed `pixel_c * pixels + pixel_d`.
    pub fn probability_map(&self, setting: &ProjectionSetting) -> Vec<f64> {
        let (pc, pd) = setting.projectors();
        let project = |p: &JonesVector, f: &[JonesVector]| -> Vec<C64> { f.iter().map(|e| p.inner(e)).collect() };
        let (ac, bc) = (project(&pc, &self.a_c), project(&pc, &self.b_c));
        let (ad, bd) = (project(&pd, &self.a_d), project(&pd, &self.b_d));
        let n = self.grid.pixels();
        let area2 = self.grid.pixel_area().powi(2);
        let mut out = vec![0.0; n * n];
        out.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
            for (j, cell) in row.iter_mut().enumerate() {
                let amp = (bc[i] * ad[j] - ac[i] * bd[j]) * 0.5;
                *cell = amp.norm_sqr() * area2;
            }
        });
        out
    }

    /// Total probability of one photon in each port, summed over the grid
    /// and all polarizations.
    pub fn coincidence_probability(&self) -> f64 {
        let n = self.grid.pixels();
        let area2 = self.grid.pixel_area().powi(2);
        (0..n)
            .into_par_iter()
            .map(|i| {
                (0..n)
                    .map(|j| {
                        coincidence_amplitude(&self.a_c[i], &self.b_c[i], &self.a_d[j], &self.b_d[j])
                            .iter()
                            .map(|z| z.norm_sqr())
                            .sum::<f64>()
                    })
                    .sum::<f64>()
            })
            .sum::<f64>()
            * area2
    }
}

/// Coincidence probability map for one analyzer setting; see
/// [`SampledFields::probability_map`].
pub fn probability_map(source: &Source, setting: &ProjectionSetting, grid: &CoordGrid) -> Result<Vec<f64>> {
    Ok(SampledFields::new(source, grid)?.probability_map(setting))
}

/// Draws Poisson counts with means `pairs * map / norm`.
///
/// `norm` is the probability mass that `pairs` refers to; pass the total
/// coincidence probability to make `pairs` the expected number of detected
/// pairs summed over a complete analyzer basis. Streams are seeded per chunk
/// of cells so the result does not depend on thread scheduling.
pub fn poisson_sample(map: &[f64], pairs: f64, norm: f64, seed: u64) -> Result<Vec<u32>> {
    if !(pairs >= 0.0 && pairs.is_finite()) {
        return Err(invalid(format!("pair budget must be non-negative (got {pairs})")));
    }
    if !(norm >= 0.0 && norm.is_finite()) {
        return Err(invalid(format!("normalization must be non-negative (got {norm})")));
    }
    if let Some(p) = map.iter().find(|p| !(**p >= 0.0 && p.is_finite())) {
        return Err(precondition(format!("probabilities must be non-negative and finite (got {p})")));
    }
    let mut out = vec![0u32; map.len()];
    if norm == 0.0 || pairs == 0.0 {
        return Ok(out);
    }
    let scale = pairs / norm;
    out.par_chunks_mut(SAMPLE_CHUNK)
        .zip(map.par_chunks(SAMPLE_CHUNK))
        .enumerate()
        .for_each(|(k, (dst, src))| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            for (d, &p) in dst.iter_mut().zip(src) {
                let mean = p * scale;
                if mean > 0.0 {
                    let draw: f64 = Poisson::new(mean).expect("positive finite mean").sample(&mut rng);
                    *d = draw.min(u32::MAX as f64) as u32;
                }
            }
        });
    Ok(out)
}

/// Derives an independent seed for a labeled sub-stream (splitmix64).
pub fn derive_seed(master: u64, tag: u64) -> u64 {
    let mut z = master ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One time-tagged detection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EventRecord {
    pub port: Port,
    pub x: u16,
    pub y: u16,
    pub t: u64,
}

/// Timing model of the event camera.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EventTiming {
    /// Timestamp resolution.
    pub tick_ns: f64,
    /// Maximum delay between the two detections of a pair.
    pub pair_jitter_ns: f64,
    pub exposure_s: f64,
    /// Smallest separation between the epochs of consecutive pairs.
    pub min_pair_spacing_ns: f64,
    /// Uncorrelated detections per second and port.
    pub accidental_rate_hz: f64,
}

impl Default for EventTiming {
    fn default() -> Self {
        Self {
            tick_ns: 1.5625,
            pair_jitter_ns: 6.0,
            exposure_s: 60.0,
            min_pair_spacing_ns: 100.0,
            accidental_rate_hz: 0.0,
        }
    }
}

impl EventTiming {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.tick_ns) {
            return Err(invalid("tick length must be positive"));
        }
        if !(self.pair_jitter_ns >= 0.0 && self.pair_jitter_ns.is_finite()) {
            return Err(invalid("pair jitter must be non-negative"));
        }
        if !positive(self.exposure_s) {
            return Err(invalid("exposure must be positive"));
        }
        if !(self.min_pair_spacing_ns >= 0.0 && self.min_pair_spacing_ns.is_finite()) {
            return Err(invalid("pair spacing must be non-negative"));
        }
        if !(self.accidental_rate_hz >= 0.0 && self.accidental_rate_hz.is_finite()) {
            return Err(invalid("accidental rate must be non-negative"));
        }
        Ok(())
    }

    /// Pair jitter in whole ticks.
    pub fn jitter_ticks(&self) -> u64 {
        (self.pair_jitter_ns / self.tick_ns).floor() as u64
    }

    pub fn exposure_ticks(&self) -> u64 {
        (self.exposure_s * 1e9 / self.tick_ns).floor() as u64
    }

    /// Pair spacing in ticks, never below `2 * jitter + 1`.
    pub fn spacing_ticks(&self) -> u64 {
        ((self.min_pair_spacing_ns / self.tick_ns).floor() as u64).max(2 * self.jitter_ticks() + 1)
    }

    /// Smallest coincidence window that captures every pair.
    pub fn min_window_ticks(&self) -> u64 {
        self.jitter_ticks()
    }

    /// Largest window that cannot join detections of neighbouring pairs.
    pub fn max_window_ticks(&self) -> u64 {
        self.spacing_ticks() - self.jitter_ticks() - 1
    }
}

/// Turns a count map into two time-sorted event streams.
///
/// Pair epochs are uniform over the exposure with a minimum spacing of
/// [`EventTiming::spacing_ticks`], and the port-d time of a pair is offset
/// from port c by a uniform jitter of at most `jitter` ticks. Without
/// accidentals, matching with any window in
/// `[min_window_ticks, max_window_ticks]` recovers the input counts
/// exactly.
pub fn synthesize_events(
    counts: &[u32],
    grid: &CoordGrid,
    timing: &EventTiming,
    seed: u64,
) -> Result<(Vec<EventRecord>, Vec<EventRecord>)> {
    timing.validate()?;
    if counts.len() != grid.cells() {
        return Err(precondition(format!(
            "count map has {} cells, grid has {}",
            counts.len(),
            grid.cells()
        )));
    }
    if grid.side() > u16::MAX as usize + 1 {
        return Err(invalid("grid too large for 16-bit pixel coordinates"));
    }
    let n_pixels = grid.pixels();
    let mut pairs: Vec<(usize, usize)> = Vec::with_capacity(counts.iter().map(|&c| c as usize).sum());
    for (cell, &c) in counts.iter().enumerate() {
        for _ in 0..c {
            pairs.push((cell / n_pixels, cell % n_pixels));
        }
    }
    let n = pairs.len() as u64;
    let jitter = timing.jitter_ticks();
    let gap = timing.spacing_ticks();
    let total = timing.exposure_ticks();
    let needed = n.saturating_sub(1).saturating_mul(gap);
    if n > 0 && needed >= total {
        return Err(invalid(format!(
            "exposure of {total} ticks cannot hold {n} pairs spaced {gap} ticks apart"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let span = total - needed;
    let mut epochs: Vec<u64> = (0..n).map(|_| rng.random_range(0..span)).collect();
    epochs.sort_unstable();
    pairs.shuffle(&mut rng);

    let mut stream_c = Vec::with_capacity(pairs.len());
    let mut stream_d = Vec::with_capacity(pairs.len());
    let event = |port, pixel: usize, t| {
        let (x, y) = grid.pixel_xy(pixel);
        EventRecord {
            port,
            x: x as u16,
            y: y as u16,
            t,
        }
    };
    for (i, ((pc, pd), e)) in pairs.iter().zip(&epochs).enumerate() {
        let base = e + i as u64 * gap + jitter;
        let offset = rng.random_range(0..=2 * jitter) as i64 - jitter as i64;
        stream_c.push(event(Port::C, *pc, base));
        stream_d.push(event(Port::D, *pd, (base as i64 + offset) as u64));
    }

    if timing.accidental_rate_hz > 0.0 {
        let mean = timing.accidental_rate_hz * timing.exposure_s;
        let horizon = total + 2 * jitter;
        for (port, stream) in [(Port::C, &mut stream_c), (Port::D, &mut stream_d)] {
            let k: f64 = Poisson::new(mean).expect("positive mean").sample(&mut rng);
            for _ in 0..k as u64 {
                let pixel = rng.random_range(0..n_pixels);
                let t = rng.random_range(0..horizon);
                stream.push(event(port, pixel, t));
            }
        }
    }

    sort_events(&mut stream_c);
    sort_events(&mut stream_d);
    Ok((stream_c, stream_d))
}

/// Sorts by timestamp, breaking ties by pixel.
pub fn sort_events(events: &mut [EventRecord]) {
    events.sort_unstable_by_key(|e| (e.t, e.y, e.x));
}

/// Greedy earliest-first pairing of two sorted streams: events closer than
/// `window` ticks form a pair and each event is used at most once.
/// Returns index pairs into the two streams.
pub fn match_coincidences(
    stream_c: &[EventRecord],
    stream_d: &[EventRecord],
    window: u64,
) -> Result<Vec<(usize, usize)>> {
    for (name, s) in [("c", stream_c), ("d", stream_d)] {
        if s.windows(2).any(|w| w[1].t < w[0].t) {
            return Err(precondition(format!("port {name} stream is not sorted by time")));
        }
    }
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::new();
    while i < stream_c.len() && j < stream_d.len() {
        let (tc, td) = (stream_c[i].t, stream_d[j].t);
        if tc.abs_diff(td) <= window {
            out.push((i, j));
            i += 1;
            j += 1;
        } else if tc < td {
            i += 1;
        } else {
            j += 1;
        }
    }
    Ok(out)
}

/// Matches two sorted streams and accumulates the pairs into a count map
/// indexed `pixel_c * pixels + pixel_d`.
pub fn extract_coincidences(
    stream_c: &[EventRecord],
    stream_d: &[EventRecord],
    window: u64,
    grid: &CoordGrid,
) -> Result<Vec<u32>> {
    let side = grid.side();
    let bad = |e: &EventRecord| e.x as usize >= side || e.y as usize >= side;
    if let Some(e) = stream_c.iter().chain(stream_d).find(|e| bad(e)) {
        return Err(precondition(format!("event at ({}, {}) lies outside the {side}x{side} grid", e.x, e.y)));
    }
    let mut counts = vec![0u32; grid.cells()];
    for (i, j) in match_coincidences(stream_c, stream_d, window)? {
        let (c, d) = (&stream_c[i], &stream_d[j]);
        let pc = grid.pixel_index(c.x as usize, c.y as usize);
        let pd = grid.pixel_index(d.x as usize, d.y as usize);
        counts[pc * grid.pixels() + pd] += 1;
    }
    Ok(counts)
}

/// Equal-width azimuthal bins over `[-π, π)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AzimuthalBinning {
    bins: usize,
}

impl Default for AzimuthalBinning {
    fn default() -> Self {
        Self { bins: 24 }
    }
}

impl AzimuthalBinning {
    pub fn new(bins: usize) -> Result<Self> {
        if bins == 0 {
            return Err(invalid("need at least one azimuthal bin"));
        }
        Ok(Self { bins })
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn width(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.bins as f64
    }

    pub fn bin_of(&self, theta: f64) -> usize {
        let t = crate::grid::wrap_angle(theta) + std::f64::consts::PI;
        ((t / self.width()).floor() as usize).min(self.bins - 1)
    }

    pub fn center(&self, bin: usize) -> f64 {
        -std::f64::consts::PI + (bin as f64 + 0.5) * self.width()
    }
}

/// Sums a `(pixel_c, pixel_d)` map over radius into `(bin_c, bin_d)` cells,
/// indexed `bin_c * bins + bin_d`.
pub fn marginalize_radial<T, A>(map: &[T], grid: &CoordGrid, binning: &AzimuthalBinning) -> Result<Vec<A>>
where
    T: Copy,
    A: Copy + Default + AddAssign + From<T>,
{
    if map.len() != grid.cells() {
        return Err(precondition(format!("map has {} cells, grid has {}", map.len(), grid.cells())));
    }
    let bins_of = |port| -> Vec<usize> {
        grid.polar_coords(port)
            .into_iter()
            .map(|(_, t)| binning.bin_of(t))
            .collect()
    };
    let (bc, bd) = (bins_of(Port::C), bins_of(Port::D));
    let n = grid.pixels();
    let b = binning.bins();
    let mut out = vec![A::default(); b * b];
    for (pc, row) in map.chunks(n).enumerate() {
        let base = bc[pc] * b;
        for (pd, &v) in row.iter().enumerate() {
            out[base + bd[pd]] += A::from(v);
        }
    }
    Ok(out)
}

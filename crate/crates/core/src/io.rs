//! On-disk formats.
//!
//! **Count files** hold one analyzer setting of a count tensor:
//!
//! ```text
//! 8 bytes   magic "HOMCOUNT"
//! u32 LE    format version (1)
//! u32 LE    header length L
//! L bytes   JSON header (CountHeader)
//! payload   dense:  cells × u32 LE, index pixel_c * pixels + pixel_d
//!           sparse: nonzero × (u32 LE index, u32 LE count), ascending index
//! ```
//!
//! **Event files** are line-based text: a `# hom-events 1` banner, a
//! `# tick_ns <value>` line, a `port,x,y,t` column line, then one
//! detection per line. Readers accept events in any order.
//!
//! **Reconstruction files** (binary) use magic `HOMRECON`, the same
//! version/header layout, then per cell a `u8` flag (0 masked, 1 present)
//! followed, when present, by 32 f64 LE (row-major re/im of ρ) and the
//! intensity.

use std::io::{BufRead, Read, Write};

use nalgebra::Matrix4;
use serde::{Deserialize, Serialize};

use crate::detection::{sort_events, EventRecord};
use crate::error::{Error, Result};
use crate::grid::{CoordGrid, Port};
use crate::polarization::{ProjectionSetting, C64};
use crate::tomography::BellMap;

pub const COUNT_MAGIC: &[u8; 8] = b"HOMCOUNT";
pub const RECON_MAGIC: &[u8; 8] = b"HOMRECON";
pub const FORMAT_VERSION: u32 = 1;
const EVENT_BANNER: &str = "# hom-events 1";

fn format_err(msg: impl Into<String>) -> Error {
    Error::Format(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Encoding {
    Dense,
    Sparse,
}

/// Metadata stored ahead of the counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountHeader {
    pub label: String,
    /// Position of the setting in its analyzer set.
    pub index: usize,
    pub setting: ProjectionSetting,
    pub grid: CoordGrid,
    /// Mean number of pairs reaching the analyzers during this setting.
    pub pairs: f64,
    pub seed: u64,
    pub encoding: Encoding,
    pub nonzero: usize,
    pub total: u64,
}

/// Counts of one analyzer setting over all `(pixel_c, pixel_d)` cells.
#[derive(Debug, Clone, PartialEq)]
pub struct CountSlice {
    pub label: String,
    pub index: usize,
    pub setting: ProjectionSetting,
    pub grid: CoordGrid,
    pub pairs: f64,
    pub seed: u64,
    pub counts: Vec<u32>,
}

impl CountSlice {
    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| c as u64).sum()
    }
}

fn write_framed(w: &mut impl Write, magic: &[u8; 8], header: &[u8]) -> Result<()> {
    w.write_all(magic)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    let len = u32::try_from(header.len()).map_err(|_| format_err("header too large"))?;
    w.write_all(&len.to_le_bytes())?;
    w.write_all(header)?;
    Ok(())
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64(r: &mut impl Read) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn read_framed<T: for<'de> Deserialize<'de>>(r: &mut impl Read, magic: &[u8; 8]) -> Result<T> {
    let mut m = [0u8; 8];
    r.read_exact(&mut m).map_err(|_| format_err("file too short for magic"))?;
    if &m != magic {
        return Err(format_err(format!(
            "bad magic: expected {:?}",
            String::from_utf8_lossy(magic)
        )));
    }
    let version = read_u32(r)?;
    if version != FORMAT_VERSION {
        return Err(format_err(format!("unsupported format version {version}")));
    }
    let len = read_u32(r)? as usize;
    let mut header = vec![0u8; len];
    r.read_exact(&mut header)?;
    Ok(serde_json::from_slice(&header)?)
}

/// Writes a count file, choosing the sparse encoding when it is smaller.
pub fn write_counts(w: &mut impl Write, slice: &CountSlice) -> Result<()> {
    if slice.counts.len() != slice.grid.cells() {
        return Err(format_err("count vector does not match the grid"));
    }
    let nonzero = slice.counts.iter().filter(|&&c| c > 0).count();
    let encoding = if 2 * nonzero < slice.counts.len() {
        Encoding::Sparse
    } else {
        Encoding::Dense
    };
    let header = CountHeader {
        label: slice.label.clone(),
        index: slice.index,
        setting: slice.setting,
        grid: slice.grid,
        pairs: slice.pairs,
        seed: slice.seed,
        encoding,
        nonzero,
        total: slice.total(),
    };
    write_framed(w, COUNT_MAGIC, &serde_json::to_vec(&header)?)?;
    let mut buf = Vec::with_capacity(8 * nonzero.max(1));
    match encoding {
        Encoding::Dense => {
            for c in &slice.counts {
                buf.extend_from_slice(&c.to_le_bytes());
            }
        }
        Encoding::Sparse => {
            for (i, &c) in slice.counts.iter().enumerate().filter(|(_, &c)| c > 0) {
                buf.extend_from_slice(&(i as u32).to_le_bytes());
                buf.extend_from_slice(&c.to_le_bytes());
            }
        }
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_counts(r: &mut impl Read) -> Result<CountSlice> {
    let h: CountHeader = read_framed(r, COUNT_MAGIC)?;
    let cells = h.grid.cells();
    let mut counts = vec![0u32; cells];
    match h.encoding {
        Encoding::Dense => {
            let mut buf = vec![0u8; 4 * cells];
            r.read_exact(&mut buf).map_err(|_| format_err("truncated dense payload"))?;
            for (c, b) in counts.iter_mut().zip(buf.chunks_exact(4)) {
                *c = u32::from_le_bytes(b.try_into().expect("4-byte chunk"));
            }
        }
        Encoding::Sparse => {
            let mut buf = vec![0u8; 8 * h.nonzero];
            r.read_exact(&mut buf).map_err(|_| format_err("truncated sparse payload"))?;
            for rec in buf.chunks_exact(8) {
                let i = u32::from_le_bytes(rec[..4].try_into().expect("4 bytes")) as usize;
                let c = u32::from_le_bytes(rec[4..].try_into().expect("4 bytes"));
                *counts.get_mut(i).ok_or_else(|| format_err(format!("cell index {i} out of range")))? = c;
            }
        }
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(format_err("trailing bytes after payload"));
    }
    let slice = CountSlice {
        label: h.label,
        index: h.index,
        setting: h.setting,
        grid: h.grid,
        pairs: h.pairs,
        seed: h.seed,
        counts,
    };
    if slice.total() != h.total {
        return Err(format_err("count total does not match header"));
    }
    Ok(slice)
}

/// Writes both streams merged in time order.
pub fn write_events(w: &mut impl Write, tick_ns: f64, stream_c: &[EventRecord], stream_d: &[EventRecord]) -> Result<()> {
    let mut all: Vec<&EventRecord> = stream_c.iter().chain(stream_d).collect();
    all.sort_by_key(|e| (e.t, e.port == Port::D, e.y, e.x));
    writeln!(w, "{EVENT_BANNER}")?;
    writeln!(w, "# tick_ns {tick_ns}")?;
    writeln!(w, "port,x,y,t")?;
    for e in all {
        writeln!(w, "{},{},{},{}", e.port.label(), e.x, e.y, e.t)?;
    }
    Ok(())
}

/// Reads an event file into per-port streams sorted by time.
pub fn read_events(r: impl BufRead) -> Result<(f64, Vec<EventRecord>, Vec<EventRecord>)> {
    let mut lines = r.lines();
    let mut next = |what: &str| -> Result<String> {
        lines
            .next()
            .ok_or_else(|| format_err(format!("missing {what}")))?
            .map_err(Error::from)
    };
    if next("banner")?.trim() != EVENT_BANNER {
        return Err(format_err("not an event file (bad banner)"));
    }
    let tick = next("tick line")?;
    let tick_ns: f64 = tick
        .trim()
        .strip_prefix("# tick_ns ")
        .and_then(|v| v.trim().parse().ok())
        .ok_or_else(|| format_err(format!("bad tick line: {tick}")))?;
    if next("column line")?.trim() != "port,x,y,t" {
        return Err(format_err("unexpected column line"));
    }
    let (mut c, mut d) = (Vec::new(), Vec::new());
    for (n, line) in lines.enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = || format_err(format!("bad event on data line {}: {line}", n + 1));
        let mut f = line.split(',');
        let port = match f.next().ok_or_else(bad)? {
            "c" => Port::C,
            "d" => Port::D,
            _ => return Err(bad()),
        };
        let x = f.next().and_then(|v| v.parse().ok()).ok_or_else(bad)?;
        let y = f.next().and_then(|v| v.parse().ok()).ok_or_else(bad)?;
        let t = f.next().and_then(|v| v.parse().ok()).ok_or_else(bad)?;
        if f.next().is_some() {
            return Err(bad());
        }
        let e = EventRecord { port, x, y, t };
        match port {
            Port::C => c.push(e),
            Port::D => d.push(e),
        }
    }
    sort_events(&mut c);
    sort_events(&mut d);
    Ok((tick_ns, c, d))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ReconHeader {
    bins: usize,
    cells: usize,
}

/// Per-cell density matrix and intensity, `None` where masked.
pub type ReconCell = Option<(Matrix4<C64>, f64)>;

pub fn write_reconstruction_binary(w: &mut impl Write, map: &BellMap) -> Result<()> {
    let header = ReconHeader {
        bins: map.bins,
        cells: map.cells.len(),
    };
    write_framed(w, RECON_MAGIC, &serde_json::to_vec(&header)?)?;
    let mut buf = Vec::new();
    for cell in &map.cells {
        match &cell.result {
            None => buf.push(0u8),
            Some(r) => {
                buf.push(1u8);
                for i in 0..4 {
                    for j in 0..4 {
                        let z = r.rho.matrix()[(i, j)];
                        buf.extend_from_slice(&z.re.to_le_bytes());
                        buf.extend_from_slice(&z.im.to_le_bytes());
                    }
                }
                buf.extend_from_slice(&r.intensity.to_le_bytes());
            }
        }
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_reconstruction_binary(r: &mut impl Read) -> Result<(usize, Vec<ReconCell>)> {
    let h: ReconHeader = read_framed(r, RECON_MAGIC)?;
    if h.cells != h.bins * h.bins {
        return Err(format_err("cell count does not match bins"));
    }
    let mut out = Vec::with_capacity(h.cells);
    for _ in 0..h.cells {
        let mut flag = [0u8; 1];
        r.read_exact(&mut flag)?;
        match flag[0] {
            0 => out.push(None),
            1 => {
                let mut m = Matrix4::zeros();
                for i in 0..4 {
                    for j in 0..4 {
                        m[(i, j)] = C64::new(read_f64(r)?, read_f64(r)?);
                    }
                }
                out.push(Some((m, read_f64(r)?)));
            }
            f => return Err(format_err(format!("bad cell flag {f}"))),
        }
    }
    Ok((h.bins, out))
}

/// Tabular reconstruction: one row per cell with Bell populations,
/// purity, intensity and optimizer diagnostics. Masked cells carry `-1`
/// in every numeric column after the counts.
pub fn write_reconstruction_csv(w: &mut impl Write, map: &BellMap) -> Result<()> {
    writeln!(
        w,
        "bin_c,bin_d,total_counts,p_phi_plus,p_phi_minus,p_psi_plus,p_psi_minus,purity,intensity,converged,iterations,gradient_norm"
    )?;
    for cell in &map.cells {
        write!(w, "{},{},{}", cell.bin_c, cell.bin_d, cell.total_counts)?;
        match (&cell.result, cell.bell_probabilities()) {
            (Some(r), Some(p)) => writeln!(
                w,
                ",{},{},{},{},{},{},{},{},{:e}",
                p[0],
                p[1],
                p[2],
                p[3],
                r.rho.purity(),
                r.intensity,
                r.diagnostics.converged as u8,
                r.diagnostics.iterations,
                r.diagnostics.gradient_norm
            )?,
            _ => writeln!(w, ",-1,-1,-1,-1,-1,-1,-1,-1,-1")?,
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tomography::{bell_map, BellMapOptions, TomoSet};

    fn slice(counts: Vec<u32>, grid: CoordGrid) -> CountSlice {
        CountSlice {
            label: "HV".into(),
            index: 1,
            setting: ProjectionSetting::new(0.0, 0.0, 0.0, std::f64::consts::FRAC_PI_4),
            grid,
            pairs: 1234.5,
            seed: 99,
            counts,
        }
    }

    #[test]
    fn count_files_round_trip_both_encodings() {
        let grid = CoordGrid::centered(3, 0.5).unwrap();
        let sparse: Vec<u32> = (0..81).map(|i| if i % 9 == 0 { i } else { 0 }).collect();
        let dense: Vec<u32> = (0..81).map(|i| i * 7 + 1).collect();
        for counts in [sparse, dense, vec![0; 81], vec![u32::MAX; 81]] {
            let s = slice(counts, grid);
            let mut buf = Vec::new();
            write_counts(&mut buf, &s).unwrap();
            assert_eq!(&buf[..8], COUNT_MAGIC);
            assert_eq!(read_counts(&mut buf.as_slice()).unwrap(), s);
        }
    }

    #[test]
    fn corrupt_count_files_are_rejected() {
        let grid = CoordGrid::centered(2, 0.5).unwrap();
        let mut buf = Vec::new();
        write_counts(&mut buf, &slice(vec![1; 16], grid)).unwrap();
        assert!(read_counts(&mut &buf[..buf.len() - 1]).is_err());
        let mut extra = buf.clone();
        extra.push(0);
        assert!(read_counts(&mut extra.as_slice()).is_err());
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_counts(&mut bad.as_slice()).is_err());
    }

    #[test]
    fn event_files_round_trip_and_tolerate_disorder() {
        let e = |port, x, y, t| EventRecord { port, x, y, t };
        let c = vec![e(Port::C, 1, 2, 5), e(Port::C, 0, 0, 9)];
        let d = vec![e(Port::D, 3, 1, 6), e(Port::D, 2, 2, 8)];
        let mut buf = Vec::new();
        write_events(&mut buf, 1.5625, &c, &d).unwrap();
        let (tick, c2, d2) = read_events(buf.as_slice()).unwrap();
        assert_eq!((tick, &c2, &d2), (1.5625, &c, &d));
        let shuffled = "# hom-events 1\n# tick_ns 2\nport,x,y,t\nd,2,2,8\nc,0,0,9\nd,3,1,6\nc,1,2,5\n";
        let (_, c3, d3) = read_events(shuffled.as_bytes()).unwrap();
        assert_eq!((c3, d3), (c, d));
        assert!(read_events("# hom-events 1\n# tick_ns 2\nport,x,y,t\nq,1,1,1\n".as_bytes()).is_err());
        assert!(read_events("hello\n".as_bytes()).is_err());
    }

    #[test]
    fn reconstruction_round_trip() {
        let set = TomoSet::standard();
        let marginals: Vec<Vec<f64>> = (0..16).map(|k| vec![100.0 + k as f64, 0.0, 3.0, 80.0]).collect();
        let map = bell_map(&marginals, &[1.0; 16], &set, 2, &BellMapOptions::default()).unwrap();
        let mut buf = Vec::new();
        write_reconstruction_binary(&mut buf, &map).unwrap();
        let (bins, cells) = read_reconstruction_binary(&mut buf.as_slice()).unwrap();
        assert_eq!(bins, 2);
        for (a, b) in map.cells.iter().zip(&cells) {
            match (&a.result, b) {
                (None, None) => {}
                (Some(r), Some((m, i))) => {
                    assert_eq!(r.rho.matrix(), m);
                    assert_eq!(r.intensity, *i);
                }
                _ => panic!("mask mismatch"),
            }
        }
        let mut csv = Vec::new();
        write_reconstruction_csv(&mut csv, &map).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert_eq!(text.lines().count(), 5);
        assert!(text.lines().nth(2).unwrap().ends_with(",-1,-1,-1,-1,-1,-1,-1,-1,-1"));
    }
}

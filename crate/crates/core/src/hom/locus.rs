//! Where on the equal-radius slice each Bell state appears alone.
//!
//! Writing `S = theta_c + theta_d`, `D = theta_c - theta_d`, `Σ = qa + qb`
//! and `Δ = qa - qb`, the azimuthal amplitudes are
//!
//! ```text
//! phi+ =  2 sin(ΔS) sin(ΣD)      phi- = 2 sin(ΣS) sin(ΔD)
//! psi+ = -2 sin(ΔD) cos(ΣS)      psi- = 2 sin(ΔS) cos(ΣD)
//! ```
//!
//! A state is isolated exactly when the factor it shares with the others
//! vanishes while its own factor does not, which pins one of `S`, `D` to a
//! set of values and leaves the other free:
//!
//! | state | locus axis | conditions                          |
//! |-------|------------|-------------------------------------|
//! | phi+  | D          | `ΣD = (2n+1)π/2`, `ΔD = mπ`          |
//! | phi-  | S          | `ΣS = (2n+1)π/2`, `ΔS = mπ`          |
//! | psi+  | S          | `ΣS = nπ`, `ΔS = mπ`                 |
//! | psi-  | D          | `ΣD = nπ`, `ΔD = mπ`                 |
//!
//! The free coordinate only has to avoid the zeros of the remaining factor.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bell_coefficients_azimuthal;
use crate::error::{Error, Result};
use crate::grid::wrap_angle;
use crate::modes::half_integer_twice;
use crate::polarization::BellState;

/// Default search bound on the integers `n`, `m`.
pub const DEFAULT_N_MAX: i64 = 16;

const ANALYTIC_TOL: f64 = 1e-9;

/// Which angle combination a locus fixes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocusAxis {
    /// `theta_c + theta_d`
    Sum,
    /// `theta_c - theta_d`
    Difference,
}

impl LocusAxis {
    pub fn symbol(self) -> &'static str {
        match self {
            LocusAxis::Sum => "theta_c + theta_d",
            LocusAxis::Difference => "theta_c - theta_d",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    /// `Σx = (2n+1)π/2`
    OddHalf,
    /// `Σx = nπ`
    Whole,
}

fn conditions(state: BellState) -> (LocusAxis, Kind) {
    match state {
        BellState::PhiPlus => (LocusAxis::Difference, Kind::OddHalf),
        BellState::PhiMinus => (LocusAxis::Sum, Kind::OddHalf),
        BellState::PsiPlus => (LocusAxis::Sum, Kind::Whole),
        BellState::PsiMinus => (LocusAxis::Difference, Kind::Whole),
    }
}

/// One point where a Bell state is the only non-zero amplitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocusWitness {
    pub axis: LocusAxis,
    /// Locus value of the fixed combination, in `[0, 2π)`.
    pub value: f64,
    pub n: i64,
    pub m: i64,
    pub theta_c: f64,
    pub theta_d: f64,
    /// Azimuthal amplitude of the isolated state at the witness.
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BellLocus {
    pub state: BellState,
    pub attainable: bool,
    pub axis: LocusAxis,
    pub constraint: String,
    /// One witness per distinct locus value mod 2π.
    pub witnesses: Vec<LocusWitness>,
}

impl BellLocus {
    /// Human-readable loci, e.g. `theta_c + theta_d ≡ 0 (mod 2π)`.
    pub fn describe(&self) -> Vec<String> {
        self.witnesses
            .iter()
            .map(|w| format!("{} ≡ {:.6} (mod 2π)", w.axis.symbol(), w.value))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocusReport {
    pub qa: f64,
    pub qb: f64,
    pub n_max: i64,
    pub states: Vec<BellLocus>,
}

impl LocusReport {
    pub fn attainable(&self) -> [bool; 4] {
        let mut out = [false; 4];
        for l in &self.states {
            out[l.state.index()] = l.attainable;
        }
        out
    }

    pub fn all_four(&self) -> bool {
        self.attainable().iter().all(|&a| a)
    }

    pub fn get(&self, state: BellState) -> &BellLocus {
        &self.states[state.index()]
    }
}

/// Solves the locus conditions for every Bell state, searching
/// `|n|, |m| <= n_max`, and attaches a verified witness to each locus.
pub fn unique_locus_analysis(qa: f64, qb: f64, n_max: i64) -> Result<LocusReport> {
    let a = half_integer_twice(qa)?;
    let b = half_integer_twice(qb)?;
    if a.abs() == b.abs() {
        return Err(Error::EqualCharges { qa, qb });
    }
    if n_max < 0 {
        return Err(crate::error::invalid("n_max must be non-negative"));
    }
    let states = BellState::ALL
        .iter()
        .map(|&s| locus_for(s, qa, qb, a as i64, b as i64, n_max))
        .collect();
    Ok(LocusReport { qa, qb, n_max, states })
}

fn locus_for(state: BellState, qa: f64, qb: f64, a: i64, b: i64, n_max: i64) -> BellLocus {
    let (axis, kind) = conditions(state);
    let (sum2, diff2) = (a + b, a - b); // 2Σ and 2Δ
    let mut values: Vec<f64> = Vec::new();
    // x = locus value; with Σ = sum2/2:
    //   OddHalf: x = (2n+1)π/sum2, needs diff2 (2n+1) = 2m sum2
    //   Whole:   x = 2nπ/sum2,     needs diff2 n = m sum2
    if sum2 != 0 {
        for n in -n_max..=n_max {
            for m in -n_max..=n_max {
                let ok = match kind {
                    Kind::OddHalf => diff2 * (2 * n + 1) == 2 * m * sum2,
                    Kind::Whole => diff2 * n == m * sum2,
                };
                if !ok {
                    continue;
                }
                let num = match kind {
                    Kind::OddHalf => (2 * n + 1) as f64,
                    Kind::Whole => (2 * n) as f64,
                };
                let x = (num * PI / sum2 as f64).rem_euclid(2.0 * PI);
                let x = if x < ANALYTIC_TOL || 2.0 * PI - x < ANALYTIC_TOL { 0.0 } else { x };
                if !values.iter().any(|v| (v - x).abs() < ANALYTIC_TOL) {
                    values.push(x);
                }
            }
        }
    }
    values.sort_by(f64::total_cmp);

    let witnesses: Vec<LocusWitness> = values
        .into_iter()
        .filter_map(|x| witness(state, axis, kind, qa, qb, x))
        .collect();
    let constraint = match kind {
        Kind::OddHalf => format!(
            "(qa + qb)({0}) = (2n+1)π/2 and (qa - qb)({0}) = mπ",
            axis.symbol()
        ),
        Kind::Whole => format!("(qa + qb)({0}) = nπ and (qa - qb)({0}) = mπ", axis.symbol()),
    };
    BellLocus {
        state,
        attainable: !witnesses.is_empty(),
        axis,
        constraint,
        witnesses,
    }
}

/// Picks the free coordinate that maximizes the isolated amplitude and
/// checks the result against the closed-form amplitudes.
fn witness(state: BellState, axis: LocusAxis, kind: Kind, qa: f64, qb: f64, x: f64) -> Option<LocusWitness> {
    let (qs, qd) = (qa + qb, qa - qb);
    let n = match kind {
        Kind::OddHalf => ((qs * x / PI) - 0.5).round(),
        Kind::Whole => (qs * x / PI).round(),
    };
    let m = (qd * x / PI).round();
    let target = match kind {
        Kind::OddHalf => (n + 0.5) * PI,
        Kind::Whole => n * PI,
    };
    if (qs * x - target).abs() > ANALYTIC_TOL || (qd * x - m * PI).abs() > ANALYTIC_TOL {
        return None;
    }

    const SAMPLES: usize = 720;
    let mut best: Option<(f64, f64, f64, [f64; 4])> = None;
    for k in 0..SAMPLES {
        let y = 2.0 * PI * (k as f64 + 0.5) / SAMPLES as f64;
        let (sum, diff) = match axis {
            LocusAxis::Sum => (x, y),
            LocusAxis::Difference => (y, x),
        };
        let tc = wrap_angle(0.5 * (sum + diff));
        let td = wrap_angle(0.5 * (sum - diff));
        let s = bell_coefficients_azimuthal(qa, qb, tc, td).as_array();
        let own = s[state.index()].abs();
        if best.map_or(true, |b| own > b.2) {
            best = Some((tc, td, own, s));
        }
    }
    let (tc, td, own, s) = best?;
    let others_vanish = s
        .iter()
        .enumerate()
        .all(|(i, v)| i == state.index() || v.abs() <= ANALYTIC_TOL);
    if own <= ANALYTIC_TOL || !others_vanish {
        return None;
    }
    Some(LocusWitness {
        axis,
        value: x,
        n: n as i64,
        m: m as i64,
        theta_c: tc,
        theta_d: td,
        amplitude: s[state.index()],
    })
}

/// Result of a brute-force scan of the azimuthal amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct GridScan {
    pub samples: usize,
    /// Whether some grid point isolates each Bell state.
    pub attainable: [bool; 4],
    /// Number of isolating grid points per state.
    pub hits: [usize; 4],
    /// First isolating point found per state.
    pub example: [Option<(f64, f64)>; 4],
}

/// Evaluates the amplitudes on a `samples x samples` grid over
/// `[-π, π]²` and reports where each Bell state is the only amplitude
/// above `1e-6` of the grid maximum.
pub fn scan_unique_loci(qa: f64, qb: f64, samples: usize) -> Result<GridScan> {
    if samples < 2 {
        return Err(crate::error::invalid("grid scan needs at least 2 samples per axis"));
    }
    let angle = |i: usize| -PI + 2.0 * PI * i as f64 / (samples - 1) as f64;
    let rows: Vec<Vec<[f64; 4]>> = (0..samples)
        .into_par_iter()
        .map(|i| {
            (0..samples)
                .map(|j| bell_coefficients_azimuthal(qa, qb, angle(i), angle(j)).as_array())
                .collect()
        })
        .collect();
    let peak = rows
        .iter()
        .flatten()
        .flat_map(|s| s.iter())
        .fold(0.0f64, |acc, v| acc.max(v.abs()));
    let eps = 1e-6 * peak;
    let mut scan = GridScan {
        samples,
        attainable: [false; 4],
        hits: [0; 4],
        example: [None; 4],
    };
    for (i, row) in rows.iter().enumerate() {
        for (j, s) in row.iter().enumerate() {
            let alive: Vec<usize> = (0..4).filter(|&k| s[k].abs() > eps).collect();
            if let [k] = alive[..] {
                scan.attainable[k] = true;
                scan.hits[k] += 1;
                scan.example[k].get_or_insert((angle(i), angle(j)));
            }
        }
    }
    Ok(scan)
}

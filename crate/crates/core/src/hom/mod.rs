//! Two-photon interference of q-plate vector modes at a 50:50 beamsplitter.
//!
//! Photon `a` (field `E_a`) and photon `b` (field `E_b`) enter the two input
//! ports. The beamsplitter sends `a -> (c + d)/sqrt2` and `b -> (c - d)/sqrt2`;
//! keeping only one photon per output port leaves the amplitude
//!
//! ```text
//! A_ij(x_c, x_d) = (E_b,i(x_c) E_a,j(x_d) - E_a,i(x_c) E_b,j(x_d)) / 2
//! ```
//!
//! over polarizations `i` (port c) and `j` (port d).

mod dip;
mod locus;

pub use dip::{dip_visibility, hom_dip_curve, interference_visibility, visibility, HomDipModel};
pub use locus::{
    scan_unique_loci, unique_locus_analysis, BellLocus, GridScan, LocusAxis, LocusReport, LocusWitness,
    DEFAULT_N_MAX,
};

use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{precondition, Result};
use crate::modes::{lg_radial_unchecked, qplate_components, QPlateParams};
use crate::polarization::{BellState, JonesVector, TwoPhotonPolState, C64};

/// Transverse coordinates of the detected photons in both output ports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PortCoordinates {
    pub r_c: f64,
    pub theta_c: f64,
    pub r_d: f64,
    pub theta_d: f64,
}

impl PortCoordinates {
    pub fn new(r_c: f64, theta_c: f64, r_d: f64, theta_d: f64) -> Result<Self> {
        if !(r_c >= 0.0 && r_d >= 0.0) {
            return Err(precondition("radii must be non-negative"));
        }
        if !(theta_c.is_finite() && theta_d.is_finite()) {
            return Err(precondition("angles must be finite"));
        }
        Ok(Self {
            r_c,
            theta_c,
            r_d,
            theta_d,
        })
    }
}

/// Real Bell-state amplitudes `s_X`, unnormalized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BellCoefficients {
    pub s_phi_plus: f64,
    pub s_phi_minus: f64,
    pub s_psi_plus: f64,
    pub s_psi_minus: f64,
}

impl BellCoefficients {
    pub fn as_array(&self) -> [f64; 4] {
        [self.s_phi_plus, self.s_phi_minus, self.s_psi_plus, self.s_psi_minus]
    }

    pub fn get(&self, state: BellState) -> f64 {
        self.as_array()[state.index()]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.as_array().iter().map(|s| s * s).sum()
    }

    /// Polarization state `sum_X s_X |X>` (unnormalized).
    pub fn to_state(&self) -> TwoPhotonPolState {
        TwoPhotonPolState::from_bell(self.as_array().map(|s| C64::new(s, 0.0)))
    }
}

/// Single-photon beamsplitter action on mode amplitudes:
/// returns `((a + b)/sqrt2, (a - b)/sqrt2)` for ports `(c, d)`.
pub fn beamsplitter_transform(mode_a: &[C64], mode_b: &[C64]) -> Result<(Vec<C64>, Vec<C64>)> {
    if mode_a.len() != mode_b.len() {
        return Err(precondition("input modes must share one mode basis"));
    }
    let c = mode_a
        .iter()
        .zip(mode_b)
        .map(|(a, b)| (a + b) * FRAC_1_SQRT_2)
        .collect();
    let d = mode_a
        .iter()
        .zip(mode_b)
        .map(|(a, b)| (a - b) * FRAC_1_SQRT_2)
        .collect();
    Ok((c, d))
}

/// Output of the beamsplitter for one photon in each input port.
#[derive(Debug, Clone)]
pub struct TwoPhotonSplit {
    /// `n x n` amplitudes, row = mode in port c, column = mode in port d.
    pub coincidence: Vec<C64>,
    /// Norm² of the component with both photons in port c.
    pub bunched_c: f64,
    /// Norm² of the component with both photons in port d.
    pub bunched_d: f64,
}

impl TwoPhotonSplit {
    pub fn coincidence_norm_sqr(&self) -> f64 {
        self.coincidence.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn total_norm_sqr(&self) -> f64 {
        self.coincidence_norm_sqr() + self.bunched_c + self.bunched_d
    }
}

/// Applies the beamsplitter to `a†[mode_a] b†[mode_b]|0>` over an arbitrary
/// discrete mode basis.
pub fn two_photon_beamsplitter(mode_a: &[C64], mode_b: &[C64]) -> Result<TwoPhotonSplit> {
    if mode_a.len() != mode_b.len() {
        return Err(precondition("input modes must share one mode basis"));
    }
    let n = mode_a.len();
    let mut coincidence = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            coincidence.push((mode_b[i] * mode_a[j] - mode_a[i] * mode_b[j]) * 0.5);
        }
    }
    // (1/2) c†[a] c†[b]|0> has norm² (|a|²|b|² + |<a|b>|²) / 4.
    let na: f64 = mode_a.iter().map(|z| z.norm_sqr()).sum();
    let nb: f64 = mode_b.iter().map(|z| z.norm_sqr()).sum();
    let ov: C64 = mode_a.iter().zip(mode_b).map(|(a, b)| a.conj() * b).sum();
    let bunched = 0.25 * (na * nb + ov.norm_sqr());
    Ok(TwoPhotonSplit {
        coincidence,
        bunched_c: bunched,
        bunched_d: bunched,
    })
}

#[inline]
pub(crate) fn coincidence_amplitude(
    ea_c: &JonesVector,
    eb_c: &JonesVector,
    ea_d: &JonesVector,
    eb_d: &JonesVector,
) -> [C64; 4] {
    let a_c = [ea_c.h, ea_c.v];
    let b_c = [eb_c.h, eb_c.v];
    let a_d = [ea_d.h, ea_d.v];
    let b_d = [eb_d.h, eb_d.v];
    let mut out = [C64::new(0.0, 0.0); 4];
    for i in 0..2 {
        for j in 0..2 {
            out[2 * i + j] = (b_c[i] * a_d[j] - a_c[i] * b_d[j]) * 0.5;
        }
    }
    out
}

/// Post-selected (one photon per port) polarization state at `coords`,
/// unnormalized. Valid for any retardation and input polarization.
pub fn coincidence_state(
    qa: &QPlateParams,
    qb: &QPlateParams,
    pol_a: &JonesVector,
    pol_b: &JonesVector,
    coords: &PortCoordinates,
) -> Result<TwoPhotonPolState> {
    if !pol_a.is_unit() || !pol_b.is_unit() {
        return Err(precondition("input polarizations must be unit-norm"));
    }
    let field = |p: &QPlateParams, pol: &JonesVector, r: f64, t: f64| qplate_components(p, pol, t).at(r);
    let ea_c = field(qa, pol_a, coords.r_c, coords.theta_c);
    let eb_c = field(qb, pol_b, coords.r_c, coords.theta_c);
    let ea_d = field(qa, pol_a, coords.r_d, coords.theta_d);
    let eb_d = field(qb, pol_b, coords.r_d, coords.theta_d);
    Ok(TwoPhotonPolState::new(coincidence_amplitude(&ea_c, &eb_c, &ea_d, &eb_d)))
}

/// Closed-form Bell amplitudes for two `|H>` photons through tuned plates
/// of charges `qa` and `qb`.
///
/// With `coincidence_state` built from tuned plates, `<X|state> = -s_X / (2 sqrt2)`
/// (see [`bell_projection_factor`]).
pub fn bell_coefficients(qa: f64, qb: f64, coords: &PortCoordinates) -> BellCoefficients {
    let la = (2.0 * qa).round() as i32;
    let lb = (2.0 * qb).round() as i32;
    let cross = lg_radial_unchecked(la, coords.r_d) * lg_radial_unchecked(lb, coords.r_c);
    let direct = lg_radial_unchecked(la, coords.r_c) * lg_radial_unchecked(lb, coords.r_d);
    let (tc, td) = (coords.theta_c, coords.theta_d);
    let (a, b) = (2.0 * qa, 2.0 * qb);
    BellCoefficients {
        s_phi_plus: cross * (a * td - b * tc).cos() - direct * (a * tc - b * td).cos(),
        s_phi_minus: cross * (a * td + b * tc).cos() - direct * (a * tc + b * td).cos(),
        s_psi_plus: cross * (a * td + b * tc).sin() - direct * (a * tc + b * td).sin(),
        s_psi_minus: cross * (a * td - b * tc).sin() + direct * (a * tc - b * td).sin(),
    }
}

/// Sum-to-product form of the Bell amplitudes on the equal-radius slice.
/// Equals `bell_coefficients` divided by `F_qa(r) F_qb(r)` at `r_c = r_d = r`.
pub fn bell_coefficients_azimuthal(qa: f64, qb: f64, theta_c: f64, theta_d: f64) -> BellCoefficients {
    let sum = theta_c + theta_d;
    let diff = theta_c - theta_d;
    let (qs, qd) = (qa + qb, qa - qb);
    BellCoefficients {
        s_phi_plus: 2.0 * (qd * sum).sin() * (qs * diff).sin(),
        s_phi_minus: 2.0 * (qs * sum).sin() * (qd * diff).sin(),
        s_psi_plus: -2.0 * (qd * diff).sin() * (qs * sum).cos(),
        s_psi_minus: 2.0 * (qd * sum).sin() * (qs * diff).cos(),
    }
}

/// Global phase a plate imprints when it acts as a pure rotation:
/// tuned plates give `i` with charge `q`, switched-off plates `-1` with
/// charge 0, and `delta = 0` gives `1` with charge 0.
pub fn pure_plate_action(p: &QPlateParams) -> Option<(f64, C64)> {
    let (co, s) = p.half_retardance();
    if co == 0.0 {
        Some((p.q(), C64::new(0.0, s)))
    } else if s == 0.0 {
        Some((0.0, C64::new(co, 0.0)))
    } else {
        None
    }
}

/// Factor `k` with `<X|coincidence_state> = k * s_X` for `|H>|H>` inputs,
/// where `s_X` comes from [`bell_coefficients`] at the effective charges
/// returned alongside. `None` when a plate is partially tuned.
pub fn bell_projection_factor(qa: &QPlateParams, qb: &QPlateParams) -> Option<(f64, f64, C64)> {
    let (ka, pa) = pure_plate_action(qa)?;
    let (kb, pb) = pure_plate_action(qb)?;
    Some((ka, kb, pa * pb / (2.0 * SQRT_2)))
}

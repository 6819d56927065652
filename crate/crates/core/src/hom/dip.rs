//! Coincidence rate against path-length difference.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::coincidence_amplitude;
use crate::error::{invalid, Result};
use crate::grid::{CoordGrid, Port};
use crate::modes::{vector_mode_field, QPlateParams};
use crate::polarization::JonesVector;

/// Gaussian dip: `counts(Δl) = base · (1 - V exp(-(Δl / L_c)²))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomDipModel {
    pub coherence_length: f64,
    pub base_pairs: f64,
    pub visibility: f64,
}

impl HomDipModel {
    pub fn new(coherence_length: f64, base_pairs: f64, visibility: f64) -> Result<Self> {
        if !(coherence_length > 0.0 && coherence_length.is_finite()) {
            return Err(invalid("coherence length must be positive"));
        }
        if !(base_pairs >= 0.0 && base_pairs.is_finite()) {
            return Err(invalid("base pair count must be non-negative"));
        }
        if !(0.0..=1.0).contains(&visibility) {
            return Err(invalid("visibility must lie in [0, 1]"));
        }
        Ok(Self {
            coherence_length,
            base_pairs,
            visibility,
        })
    }

    pub fn counts(&self, path_difference: f64) -> f64 {
        let x = path_difference / self.coherence_length;
        self.base_pairs * (1.0 - self.visibility * (-x * x).exp())
    }

    pub fn curve(&self, samples: &[f64]) -> Vec<f64> {
        samples.iter().map(|&x| self.counts(x)).collect()
    }
}

/// Expected coincidences at each path difference.
pub fn hom_dip_curve(samples: &[f64], coherence_length: f64, base_pairs: f64, visibility: f64) -> Result<Vec<f64>> {
    Ok(HomDipModel::new(coherence_length, base_pairs, visibility)?.curve(samples))
}

/// Visibility `(C - C_min) / C` from the far-from-dip level and the minimum.
pub fn dip_visibility(out_of_dip: f64, in_dip: f64) -> Result<f64> {
    if !(out_of_dip > 0.0) {
        return Err(invalid("out-of-dip counts must be positive"));
    }
    Ok((out_of_dip - in_dip) / out_of_dip)
}

/// Visibility of a measured curve. The reference level is the mean over
/// samples with `|Δl| > 3 L_c`, or the curve maximum if there are none.
pub fn visibility(path_difference: &[f64], counts: &[f64], coherence_length: f64) -> Result<f64> {
    if path_difference.len() != counts.len() || counts.is_empty() {
        return Err(invalid("dip curve needs matching, non-empty sample and count arrays"));
    }
    let far: Vec<f64> = path_difference
        .iter()
        .zip(counts)
        .filter(|(x, _)| x.abs() > 3.0 * coherence_length)
        .map(|(_, &c)| c)
        .collect();
    let reference = if far.is_empty() {
        counts.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    } else {
        far.iter().sum::<f64>() / far.len() as f64
    };
    let min = counts.iter().copied().fold(f64::INFINITY, f64::min);
    dip_visibility(reference, min)
}

/// Zero-delay dip depth for the given plates and inputs:
/// `1 - P_overlap / P_distinguishable`, both integrated over the grid.
///
/// `P_distinguishable` is the coincidence probability of two photons that
/// cannot interfere, `N_a N_b / 2`.
pub fn interference_visibility(
    qa: &QPlateParams,
    qb: &QPlateParams,
    pol_a: &JonesVector,
    pol_b: &JonesVector,
    grid: &CoordGrid,
) -> Result<f64> {
    let ea_c = vector_mode_field(qa, pol_a, grid, Port::C)?;
    let eb_c = vector_mode_field(qb, pol_b, grid, Port::C)?;
    let ea_d = vector_mode_field(qa, pol_a, grid, Port::D)?;
    let eb_d = vector_mode_field(qb, pol_b, grid, Port::D)?;
    let overlap: f64 = (0..grid.pixels())
        .into_par_iter()
        .map(|pc| {
            let mut acc = 0.0;
            for pd in 0..grid.pixels() {
                let amp = coincidence_amplitude(&ea_c[pc], &eb_c[pc], &ea_d[pd], &eb_d[pd]);
                acc += amp.iter().map(|z| z.norm_sqr()).sum::<f64>();
            }
            acc
        })
        .sum();
    let power = |f: &[JonesVector]| f.iter().map(|e| e.norm_sqr()).sum::<f64>();
    let distinguishable = 0.25 * (power(&ea_c) * power(&eb_d) + power(&eb_c) * power(&ea_d));
    if distinguishable <= 0.0 {
        return Err(invalid("fields carry no power on the grid"));
    }
    Ok(1.0 - overlap / distinguishable)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn visibility_from_counts() {
        assert_abs_diff_eq!(dip_visibility(1000.0, 20.0).unwrap(), 0.98, epsilon = 1e-15);
        assert!(dip_visibility(0.0, 0.0).is_err());
    }

    #[test]
    fn curve_shape() {
        let m = HomDipModel::new(2.0, 100.0, 0.9).unwrap();
        assert_abs_diff_eq!(m.counts(0.0), 10.0, epsilon = 1e-12);
        assert!(m.counts(20.0) > 99.999);
        assert_abs_diff_eq!(m.counts(1.3), m.counts(-1.3));
        assert!(HomDipModel::new(0.0, 1.0, 0.5).is_err());
        assert!(HomDipModel::new(1.0, 1.0, 1.5).is_err());
    }

    #[test]
    fn identical_and_orthogonal_inputs() {
        let grid = CoordGrid::centered(12, 0.3).unwrap();
        let off_a = QPlateParams::off(1.0).unwrap();
        let off_b = QPlateParams::off(0.5).unwrap();
        let h = JonesVector::horizontal();
        let v = JonesVector::vertical();
        assert_eq!(interference_visibility(&off_a, &off_b, &h, &h, &grid).unwrap(), 1.0);
        assert_abs_diff_eq!(
            interference_visibility(&off_a, &off_b, &v, &h, &grid).unwrap(),
            0.0,
            epsilon = 1e-12
        );
        let tuned_a = QPlateParams::tuned(1.0).unwrap();
        let tuned_b = QPlateParams::tuned(0.5).unwrap();
        // different OAM charges leave the photons spatially distinguishable
        let v = interference_visibility(&tuned_a, &tuned_b, &h, &h, &grid).unwrap();
        assert_abs_diff_eq!(v, 0.0, epsilon = 1e-10);
    }
}

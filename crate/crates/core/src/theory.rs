//! Closed-form azimuthal distributions with both radii integrated out.
//!
//! Each field is `F_0(r) u(θ) + F_ℓ(r) w(θ)`, so the coincidence amplitude
//! is a short sum of terms `F_{ℓc}(r_c) F_{ℓd}(r_d) h(θc, θd)`. Integrating
//! `r_c dr_c r_d dr_d` leaves radial overlaps:
//!
//! ```text
//! ρ(θc, θd) = Σ_{t,t'} O(ℓc_t, ℓc_t') O(ℓd_t, ℓd_t') h_t h_t'†
//! ```

use nalgebra::Matrix4;
use rayon::prelude::*;

use crate::detection::{AzimuthalBinning, Source};
use crate::error::{precondition, Result};
use crate::modes::{lg_radial_overlap, qplate_components};
use crate::polarization::{BellState, JonesVector, C64};
use crate::tomography::TomoSet;

struct Term {
    ell_c: i32,
    ell_d: i32,
    h: [C64; 4],
}

fn pieces(c: &crate::modes::ModeComponents) -> [(i32, JonesVector); 2] {
    [(0, c.unconverted), (c.ell, c.converted)]
}

fn amplitude_terms(source: &Source, theta_c: f64, theta_d: f64) -> Vec<Term> {
    let a_c = qplate_components(&source.plate_a, &source.pol_a, theta_c);
    let b_c = qplate_components(&source.plate_b, &source.pol_b, theta_c);
    let a_d = qplate_components(&source.plate_a, &source.pol_a, theta_d);
    let b_d = qplate_components(&source.plate_b, &source.pol_b, theta_d);
    let mut terms = Vec::with_capacity(8);
    for (sign, first, second) in [(0.5, &b_c, &a_d), (-0.5, &a_c, &b_d)] {
        for (lc, u) in pieces(first) {
            for (ld, w) in pieces(second) {
                let h = u.tensor(&w).amplitudes().map(|z| z * sign);
                if h.iter().any(|z| z.norm_sqr() > 0.0) {
                    terms.push(Term { ell_c: lc, ell_d: ld, h });
                }
            }
        }
    }
    terms
}

/// Unnormalized polarization density per unit `dθc dθd`, radii integrated.
pub fn marginal_density(source: &Source, theta_c: f64, theta_d: f64) -> Matrix4<C64> {
    let terms = amplitude_terms(source, theta_c, theta_d);
    let mut rho = Matrix4::zeros();
    for s in &terms {
        for t in &terms {
            let k = lg_radial_overlap(s.ell_c, t.ell_c) * lg_radial_overlap(s.ell_d, t.ell_d);
            for i in 0..4 {
                for j in 0..4 {
                    rho[(i, j)] += s.h[i] * t.h[j].conj() * k;
                }
            }
        }
    }
    rho
}

/// Density integrated over every `(bin_c, bin_d)` cell by the midpoint rule
/// with `subsamples²` points per cell; row-major over the bins.
pub fn binned_marginal_density(
    source: &Source,
    binning: &AzimuthalBinning,
    subsamples: usize,
) -> Result<Vec<Matrix4<C64>>> {
    if subsamples == 0 {
        return Err(precondition("need at least one subsample per bin"));
    }
    let n = binning.bins();
    let w = binning.width();
    let step = w / subsamples as f64;
    let weight = step * step;
    Ok((0..n * n)
        .into_par_iter()
        .map(|cell| {
            let (bc, bd) = (cell / n, cell % n);
            let c0 = binning.center(bc) - 0.5 * w;
            let d0 = binning.center(bd) - 0.5 * w;
            let mut acc = Matrix4::zeros();
            for i in 0..subsamples {
                for j in 0..subsamples {
                    let tc = c0 + (i as f64 + 0.5) * step;
                    let td = d0 + (j as f64 + 0.5) * step;
                    acc += marginal_density(source, tc, td);
                }
            }
            acc * C64::new(weight, 0.0)
        })
        .collect())
}

fn expectation(rho: &Matrix4<C64>, p: &[C64; 4]) -> f64 {
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..4 {
        for j in 0..4 {
            acc += p[i].conj() * rho[(i, j)] * p[j];
        }
    }
    acc.re
}

/// Coincidence probability of every analyzer setting per bin:
/// `out[k][cell]`.
pub fn projection_marginals(densities: &[Matrix4<C64>], set: &TomoSet) -> Vec<Vec<f64>> {
    set.projectors()
        .iter()
        .map(|p| densities.iter().map(|rho| expectation(rho, p)).collect())
        .collect()
}

/// Bell-state populations per bin, `None` where the bin carries no
/// coincidences.
pub fn bell_populations(densities: &[Matrix4<C64>]) -> Vec<Option<[f64; 4]>> {
    densities
        .iter()
        .map(|rho| {
            let tr = rho.trace().re;
            if tr <= 1e-300 {
                return None;
            }
            Some(BellState::ALL.map(|b| expectation(rho, b.ket().amplitudes()) / tr))
        })
        .collect()
}

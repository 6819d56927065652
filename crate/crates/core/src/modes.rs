//! Laguerre-Gauss radial profiles and the q-plate operator.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, precondition, Result};
use crate::grid::{CoordGrid, Port};
use crate::polarization::{c, JonesVector, C64};

/// q-plate topological charge and retardation.
///
/// The charge is stored as `2q` so half-integer charges stay exact.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QPlateParams {
    twice_q: i32,
    delta: f64,
}

impl QPlateParams {
    pub fn new(q: f64, delta: f64) -> Result<Self> {
        let twice_q = half_integer_twice(q)?;
        let eps = 1e-12;
        if !(delta >= -eps && delta <= 2.0 * PI + eps) {
            return Err(invalid(format!("retardation must lie in [0, 2pi] (got {delta})")));
        }
        Ok(Self {
            twice_q,
            delta: delta.clamp(0.0, 2.0 * PI),
        })
    }

    /// Fully tuned plate (`delta = pi`).
    pub fn tuned(q: f64) -> Result<Self> {
        Self::new(q, PI)
    }

    /// Plate switched off (`delta = 2pi`), acting as `-1` on polarization.
    pub fn off(q: f64) -> Result<Self> {
        Self::new(q, 2.0 * PI)
    }

    pub fn q(&self) -> f64 {
        self.twice_q as f64 / 2.0
    }

    /// OAM index `l = 2q` carried by the converted component.
    pub fn ell(&self) -> i32 {
        self.twice_q
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// `(cos(delta/2), sin(delta/2))`, exact at multiples of `pi/2`.
    pub fn half_retardance(&self) -> (f64, f64) {
        exact_sin_cos(self.delta / 2.0)
    }
}

/// Validates a half-integer charge and returns `2q`.
pub fn half_integer_twice(q: f64) -> Result<i32> {
    let t = 2.0 * q;
    if !t.is_finite() || (t - t.round()).abs() > 1e-9 || t.abs() > 1e6 {
        return Err(invalid(format!("charge must be a half-integer (got {q})")));
    }
    Ok(t.round() as i32)
}

fn exact_sin_cos(x: f64) -> (f64, f64) {
    let k = x / FRAC_PI_2;
    if (k - k.round()).abs() < 1e-12 {
        match (k.round() as i64).rem_euclid(4) {
            0 => (1.0, 0.0),
            1 => (0.0, 1.0),
            2 => (-1.0, 0.0),
            _ => (0.0, -1.0),
        }
    } else {
        let (s, co) = x.sin_cos();
        (co, s)
    }
}

/// `sqrt(2 / (pi |l|!))`.
fn lg_norm(ell: i32) -> f64 {
    let fact: f64 = (1..=ell.unsigned_abs()).map(f64::from).product();
    (2.0 / (PI * fact)).sqrt()
}

/// Radial amplitude of `LG_{l,0}` at `r` (waist units):
/// `F(r) = sqrt(2/(pi |l|!)) (r sqrt2)^|l| exp(-r²)`, so that
/// `∫ F² r dr = 1/(2pi)`.
pub fn lg_radial(ell: i32, r: f64) -> Result<f64> {
    if !(r >= 0.0) {
        return Err(precondition(format!("radius must be non-negative (got {r})")));
    }
    Ok(lg_radial_unchecked(ell, r))
}

#[inline]
pub(crate) fn lg_radial_unchecked(ell: i32, r: f64) -> f64 {
    let l = ell.unsigned_abs() as i32;
    let base = if l == 0 { 1.0 } else { (r * std::f64::consts::SQRT_2).powi(l) };
    lg_norm(l) * base * (-r * r).exp()
}

/// Closed-form radial overlap `∫ F_l1 F_l2 r dr`.
pub fn lg_radial_overlap(ell1: i32, ell2: i32) -> f64 {
    let a = ell1.unsigned_abs() as f64;
    let b = ell2.unsigned_abs() as f64;
    let fact = |n: f64| -> f64 { (1..=n as u32).map(f64::from).product() };
    gamma_half_step((a + b) / 2.0 + 1.0) / (2.0 * PI * (fact(a) * fact(b)).sqrt())
}

/// Gamma function at positive integers and half-integers.
fn gamma_half_step(x: f64) -> f64 {
    if (x - x.round()).abs() < 1e-12 {
        (1..x.round() as u32).map(f64::from).product()
    } else {
        let mut g = PI.sqrt();
        let mut k = 0.5;
        while k < x - 0.5 {
            g *= k;
            k += 1.0;
        }
        g
    }
}

/// Radial decomposition of a q-plate output at one azimuth.
///
/// The field at `(r, theta)` equals `F_0(r) unconverted + F_q(r) converted`.
#[derive(Debug, Clone, Copy)]
pub struct ModeComponents {
    pub ell: i32,
    pub unconverted: JonesVector,
    pub converted: JonesVector,
}

impl ModeComponents {
    pub fn at(&self, r: f64) -> JonesVector {
        let f0 = lg_radial_unchecked(0, r);
        let fq = lg_radial_unchecked(self.ell, r);
        JonesVector::new(
            self.unconverted.h * f0 + self.converted.h * fq,
            self.unconverted.v * f0 + self.converted.v * fq,
        )
    }
}

/// Angular part of the q-plate output for an arbitrary input polarization.
pub fn qplate_components(params: &QPlateParams, input: &JonesVector, theta: f64) -> ModeComponents {
    let (cos_half, sin_half) = params.half_retardance();
    let unconverted = input.scale(c(cos_half, 0.0));
    let converted = if sin_half == 0.0 {
        JonesVector::new(c(0.0, 0.0), c(0.0, 0.0))
    } else {
        let a_l = JonesVector::left().inner(input);
        let a_r = JonesVector::right().inner(input);
        let phase = 2.0 * params.q() * theta;
        let (s, co) = phase.sin_cos();
        let to_r = a_l * C64::new(co, -s);
        let to_l = a_r * C64::new(co, s);
        let l = JonesVector::left();
        let r = JonesVector::right();
        let k = C64::new(0.0, sin_half);
        JonesVector::new((to_r * r.h + to_l * l.h) * k, (to_r * r.v + to_l * l.v) * k)
    };
    ModeComponents {
        ell: params.ell(),
        unconverted,
        converted,
    }
}

/// Field of a Gaussian photon with polarization `input` after the q-plate,
/// evaluated at `(r, theta)`.
pub fn qplate_apply(params: &QPlateParams, input: &JonesVector, r: f64, theta: f64) -> Result<JonesVector> {
    if !input.is_unit() {
        return Err(precondition("q-plate input polarization must be unit-norm"));
    }
    if !(r >= 0.0) {
        return Err(precondition(format!("radius must be non-negative (got {r})")));
    }
    Ok(qplate_components(params, input, theta).at(r))
}

/// Per-pixel q-plate output over one camera region.
pub fn vector_mode_field(
    params: &QPlateParams,
    input: &JonesVector,
    grid: &CoordGrid,
    port: Port,
) -> Result<Vec<JonesVector>> {
    if !input.is_unit() {
        return Err(precondition("q-plate input polarization must be unit-norm"));
    }
    Ok(grid
        .polar_coords(port)
        .into_iter()
        .map(|(r, t)| qplate_components(params, input, t).at(r))
        .collect())
}

/// `Σ |E|² dA` over a sampled field.
pub fn field_power(field: &[JonesVector], grid: &CoordGrid) -> f64 {
    field.iter().map(JonesVector::norm_sqr).sum::<f64>() * grid.pixel_area()
}

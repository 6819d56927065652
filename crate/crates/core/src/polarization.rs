//! Polarization algebra for one and two photons.
//!
//! Basis ordering is `(HH, HV, VH, VV)` everywhere, with the first slot
//! belonging to output port `c` and the second to port `d`. Circular states
//! follow `|L> = (|H> - i|V>)/sqrt(2)` and `|R> = (|H> + i|V>)/sqrt(2)`, the
//! handedness for which the q-plate conversion `|L> -> e^{-2iq theta}|R>`
//! reproduces the linear-basis form `cos(2q theta)|H> + sin(2q theta)|V>`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix2, Matrix4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, precondition, Error, Result};

pub type C64 = Complex64;

const KET_TOL: f64 = 1e-12;
const DENSITY_TOL: f64 = 1e-10;

#[inline]
pub(crate) fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Single-photon polarization amplitudes `(h, v)`.
///
/// Field values produced by the spatial-mode layer reuse this type and are
/// not unit-norm; prepared kets are.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JonesVector {
    pub h: C64,
    pub v: C64,
}

impl JonesVector {
    pub const fn new(h: C64, v: C64) -> Self {
        Self { h, v }
    }

    pub const fn horizontal() -> Self {
        Self::new(C64::new(1.0, 0.0), C64::new(0.0, 0.0))
    }

    pub const fn vertical() -> Self {
        Self::new(C64::new(0.0, 0.0), C64::new(1.0, 0.0))
    }

    pub const fn diagonal() -> Self {
        Self::new(C64::new(FRAC_1_SQRT_2, 0.0), C64::new(FRAC_1_SQRT_2, 0.0))
    }

    pub const fn antidiagonal() -> Self {
        Self::new(C64::new(FRAC_1_SQRT_2, 0.0), C64::new(-FRAC_1_SQRT_2, 0.0))
    }

    pub const fn left() -> Self {
        Self::new(C64::new(FRAC_1_SQRT_2, 0.0), C64::new(0.0, -FRAC_1_SQRT_2))
    }

    pub const fn right() -> Self {
        Self::new(C64::new(FRAC_1_SQRT_2, 0.0), C64::new(0.0, FRAC_1_SQRT_2))
    }

    /// Linear polarization at `angle` from horizontal.
    pub fn linear(angle: f64) -> Self {
        let (s, co) = angle.sin_cos();
        Self::new(c(co, 0.0), c(s, 0.0))
    }

    pub fn norm_sqr(&self) -> f64 {
        self.h.norm_sqr() + self.v.norm_sqr()
    }

    pub fn is_unit(&self) -> bool {
        (self.norm_sqr() - 1.0).abs() <= KET_TOL
    }

    pub fn normalized(self) -> Result<Self> {
        let n = self.norm_sqr().sqrt();
        if !(n > 0.0) || !n.is_finite() {
            return Err(invalid("cannot normalize a zero Jones vector"));
        }
        Ok(self.scale(c(1.0 / n, 0.0)))
    }

    pub fn scale(self, k: C64) -> Self {
        Self::new(self.h * k, self.v * k)
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &Self) -> C64 {
        self.h.conj() * other.h + self.v.conj() * other.v
    }

    /// The orthogonal complement `(-v*, h*)`.
    pub fn orthogonal(&self) -> Self {
        Self::new(-self.v.conj(), self.h.conj())
    }

    pub fn apply(&self, m: &Matrix2<C64>) -> Self {
        Self::new(
            m[(0, 0)] * self.h + m[(0, 1)] * self.v,
            m[(1, 0)] * self.h + m[(1, 1)] * self.v,
        )
    }

    /// Stokes vector `(S0, S1, S2, S3)` with `S1 = |H|²-|V|²`,
    /// `S2 = |D|²-|A|²` and `S3 = |R|²-|L|²`.
    pub fn stokes(&self) -> [f64; 4] {
        let hv = self.h.conj() * self.v;
        [
            self.norm_sqr(),
            self.h.norm_sqr() - self.v.norm_sqr(),
            2.0 * hv.re,
            2.0 * hv.im,
        ]
    }

    /// Product state `|self>_c |other>_d`.
    pub fn tensor(&self, other: &Self) -> TwoPhotonPolState {
        TwoPhotonPolState::new([
            self.h * other.h,
            self.h * other.v,
            self.v * other.h,
            self.v * other.v,
        ])
    }

    /// True when both states agree up to a global phase.
    pub fn equals_up_to_phase(&self, other: &Self, tol: f64) -> bool {
        let overlap = self.inner(other).norm();
        (overlap * overlap - self.norm_sqr() * other.norm_sqr()).abs() <= tol
    }
}

/// Named single-photon polarizations accepted in configuration files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Polarization {
    H,
    V,
    D,
    A,
    L,
    R,
}

impl Polarization {
    pub fn ket(self) -> JonesVector {
        match self {
            Polarization::H => JonesVector::horizontal(),
            Polarization::V => JonesVector::vertical(),
            Polarization::D => JonesVector::diagonal(),
            Polarization::A => JonesVector::antidiagonal(),
            Polarization::L => JonesVector::left(),
            Polarization::R => JonesVector::right(),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Polarization::H => "H",
            Polarization::V => "V",
            Polarization::D => "D",
            Polarization::A => "A",
            Polarization::L => "L",
            Polarization::R => "R",
        }
    }
}

impl FromStr for Polarization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "H" | "h" => Ok(Polarization::H),
            "V" | "v" => Ok(Polarization::V),
            "D" | "d" => Ok(Polarization::D),
            "A" | "a" => Ok(Polarization::A),
            "L" | "l" => Ok(Polarization::L),
            "R" | "r" => Ok(Polarization::R),
            other => Err(invalid(format!("unknown polarization {other:?}"))),
        }
    }
}

impl fmt::Display for Polarization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// The four polarization Bell states, in the order used by every
/// four-element Bell array in this crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BellState {
    PhiPlus,
    PhiMinus,
    PsiPlus,
    PsiMinus,
}

impl BellState {
    pub const ALL: [BellState; 4] = [
        BellState::PhiPlus,
        BellState::PhiMinus,
        BellState::PsiPlus,
        BellState::PsiMinus,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            BellState::PhiPlus => "phi+",
            BellState::PhiMinus => "phi-",
            BellState::PsiPlus => "psi+",
            BellState::PsiMinus => "psi-",
        }
    }

    /// Filesystem-friendly name.
    pub fn slug(self) -> &'static str {
        match self {
            BellState::PhiPlus => "phi_plus",
            BellState::PhiMinus => "phi_minus",
            BellState::PsiPlus => "psi_plus",
            BellState::PsiMinus => "psi_minus",
        }
    }

    pub fn ket(self) -> TwoPhotonPolState {
        let a = FRAC_1_SQRT_2;
        let z = 0.0;
        let amp = match self {
            BellState::PhiPlus => [a, z, z, a],
            BellState::PhiMinus => [a, z, z, -a],
            BellState::PsiPlus => [z, a, a, z],
            BellState::PsiMinus => [z, a, -a, z],
        };
        TwoPhotonPolState {
            amp: amp.map(|x| c(x, 0.0)),
            normalized: true,
        }
    }
}

impl FromStr for BellState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "phi+" | "phi_plus" => Ok(BellState::PhiPlus),
            "phi-" | "phi_minus" => Ok(BellState::PhiMinus),
            "psi+" | "psi_plus" => Ok(BellState::PsiPlus),
            "psi-" | "psi_minus" => Ok(BellState::PsiMinus),
            other => Err(invalid(format!("unknown Bell state label {other:?}"))),
        }
    }
}

impl fmt::Display for BellState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Normalized Bell ket for a textual label (`phi+`, `phi-`, `psi+`, `psi-`).
pub fn bell_state(label: &str) -> Result<TwoPhotonPolState> {
    Ok(label.parse::<BellState>()?.ket())
}

/// Two-photon polarization amplitudes over `(HH, HV, VH, VV)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoPhotonPolState {
    amp: [C64; 4],
    normalized: bool,
}

impl TwoPhotonPolState {
    /// Wraps raw amplitudes; the state is marked unnormalized.
    pub fn new(amp: [C64; 4]) -> Self {
        Self {
            amp,
            normalized: false,
        }
    }

    pub fn zero() -> Self {
        Self::new([C64::new(0.0, 0.0); 4])
    }

    pub fn amplitudes(&self) -> &[C64; 4] {
        &self.amp
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amp.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized && (self.norm_sqr() - 1.0).abs() <= KET_TOL
    }

    pub fn normalized(self) -> Result<Self> {
        let n = self.norm_sqr().sqrt();
        if !(n > 0.0) || !n.is_finite() {
            return Err(precondition("cannot normalize a state with zero amplitude"));
        }
        Ok(Self {
            amp: self.amp.map(|a| a / n),
            normalized: true,
        })
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &Self) -> C64 {
        self.amp
            .iter()
            .zip(other.amp.iter())
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// Coefficients `<X|self>` for `X` in [`BellState::ALL`] order.
    pub fn to_bell(&self) -> [C64; 4] {
        let [hh, hv, vh, vv] = self.amp;
        let k = FRAC_1_SQRT_2;
        [(hh + vv) * k, (hh - vv) * k, (hv + vh) * k, (hv - vh) * k]
    }

    /// Inverse of [`to_bell`](Self::to_bell).
    pub fn from_bell(coeffs: [C64; 4]) -> Self {
        let [pp, pm, sp, sm] = coeffs;
        let k = FRAC_1_SQRT_2;
        Self::new([(pp + pm) * k, (sp + sm) * k, (sp - sm) * k, (pp - pm) * k])
    }

    /// `|<proj_c ⊗ proj_d|self>|`² for a unit-norm state.
    pub fn projection_probability(&self, proj_c: &JonesVector, proj_d: &JonesVector) -> Result<f64> {
        if (self.norm_sqr() - 1.0).abs() > KET_TOL {
            return Err(precondition(format!(
                "projection requires a normalized state (norm² = {})",
                self.norm_sqr()
            )));
        }
        Ok(self.projected_weight(proj_c, proj_d).min(1.0))
    }

    /// `|<proj_c ⊗ proj_d|self>|`² without any normalization check.
    pub fn projected_weight(&self, proj_c: &JonesVector, proj_d: &JonesVector) -> f64 {
        proj_c.tensor(proj_d).inner(self).norm_sqr()
    }

    pub fn density(&self) -> Result<DensityMatrix4> {
        let s = self.normalized()?;
        let m = Matrix4::from_fn(|i, j| s.amp[i] * s.amp[j].conj());
        DensityMatrix4::new(m)
    }
}

/// Born-rule probability for a normalized state and product projector.
pub fn projection_probability(
    state: &TwoPhotonPolState,
    proj_c: &JonesVector,
    proj_d: &JonesVector,
) -> Result<f64> {
    state.projection_probability(proj_c, proj_d)
}

/// Validated two-qubit density matrix: Hermitian, unit trace, PSD.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix4 {
    m: Matrix4<C64>,
}

impl DensityMatrix4 {
    pub fn new(m: Matrix4<C64>) -> Result<Self> {
        let herm = (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if !(herm <= DENSITY_TOL) {
            return Err(precondition(format!("matrix is not Hermitian (deviation {herm:e})")));
        }
        let tr = m.trace();
        if !((tr.re - 1.0).abs() <= DENSITY_TOL && tr.im.abs() <= DENSITY_TOL) {
            return Err(precondition(format!("trace is not 1 (got {tr})")));
        }
        let min_eig = hermitian_eigenvalues(&m).into_iter().fold(f64::INFINITY, f64::min);
        if !(min_eig >= -DENSITY_TOL) {
            return Err(precondition(format!(
                "matrix is not positive semidefinite (min eigenvalue {min_eig:e})"
            )));
        }
        Ok(Self { m })
    }

    pub fn maximally_mixed() -> Self {
        Self {
            m: Matrix4::identity().map(|z: C64| z * 0.25),
        }
    }

    pub fn from_pure(state: &TwoPhotonPolState) -> Result<Self> {
        state.density()
    }

    pub fn matrix(&self) -> &Matrix4<C64> {
        &self.m
    }

    pub fn eigenvalues(&self) -> [f64; 4] {
        hermitian_eigenvalues(&self.m)
    }

    /// `<X|rho|X>` for the four Bell states.
    pub fn bell_probabilities(&self) -> [f64; 4] {
        BellState::ALL.map(|b| self.expectation(&b.ket()).clamp(0.0, 1.0))
    }

    /// `<psi|rho|psi>` for a (not necessarily normalized) ket.
    pub fn expectation(&self, psi: &TwoPhotonPolState) -> f64 {
        let a = psi.amplitudes();
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..4 {
            for j in 0..4 {
                acc += a[i].conj() * self.m[(i, j)] * a[j];
            }
        }
        acc.re
    }

    /// `Tr(rho²)`.
    pub fn purity(&self) -> f64 {
        self.m.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Uhlmann fidelity `(Tr sqrt(sqrt(rho) sigma sqrt(rho)))²`.
    pub fn fidelity(&self, other: &DensityMatrix4) -> f64 {
        let root = hermitian_sqrt(&self.m);
        let inner = root * other.m * root;
        let inner = (inner + inner.adjoint()).map(|z| z * 0.5);
        let tr: f64 = hermitian_eigenvalues(&inner)
            .iter()
            .map(|&l| l.max(0.0).sqrt())
            .sum();
        (tr * tr).clamp(0.0, 1.0)
    }
}

/// Bell-state probabilities of a valid density matrix.
pub fn bell_probabilities(rho: &DensityMatrix4) -> [f64; 4] {
    rho.bell_probabilities()
}

pub fn fidelity(rho: &DensityMatrix4, sigma: &DensityMatrix4) -> f64 {
    rho.fidelity(sigma)
}

pub fn purity(rho: &DensityMatrix4) -> f64 {
    rho.purity()
}

pub(crate) fn hermitian_eigenvalues(m: &Matrix4<C64>) -> [f64; 4] {
    let eig = m.symmetric_eigen();
    let mut out = [0.0; 4];
    for (o, l) in out.iter_mut().zip(eig.eigenvalues.iter()) {
        *o = *l;
    }
    out
}

fn hermitian_sqrt(m: &Matrix4<C64>) -> Matrix4<C64> {
    let eig = m.symmetric_eigen();
    let u = eig.eigenvectors;
    let d = Matrix4::from_diagonal(&eig.eigenvalues.map(|l| c(l.max(0.0).sqrt(), 0.0)));
    u * d * u.adjoint()
}

fn rotation(angle: f64) -> Matrix2<C64> {
    let (s, co) = angle.sin_cos();
    Matrix2::new(c(co, 0.0), c(-s, 0.0), c(s, 0.0), c(co, 0.0))
}

/// Half-wave plate with its fast axis at `angle` (global phase dropped).
pub fn half_wave_plate(angle: f64) -> Matrix2<C64> {
    let (s, co) = (2.0 * angle).sin_cos();
    Matrix2::new(c(co, 0.0), c(s, 0.0), c(s, 0.0), c(-co, 0.0))
}

/// Quarter-wave plate with its fast axis at `angle` (global phase dropped).
pub fn quarter_wave_plate(angle: f64) -> Matrix2<C64> {
    let core = Matrix2::new(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 1.0));
    rotation(angle) * core * rotation(-angle)
}

/// Polarization transmitted to the horizontal PBS port by an analysis stage
/// whose plates are met in the order HWP, QWP, PBS.
///
/// The returned ket is `HWP(hwp)† QWP(qwp)† |H>`, so the detection
/// probability of an input `|in>` is `|<ket|in>|²`.
pub fn waveplate_projection(qwp_angle: f64, hwp_angle: f64) -> JonesVector {
    let q = quarter_wave_plate(qwp_angle).adjoint();
    let h = half_wave_plate(hwp_angle).adjoint();
    JonesVector::horizontal().apply(&q).apply(&h)
}

/// Wraps an angle into `[0, pi)`; waveplates are invariant under a half turn.
pub fn wrap_half_turn(angle: f64) -> f64 {
    let a = angle.rem_euclid(PI);
    if a >= PI {
        0.0
    } else {
        a
    }
}

/// Waveplate angles of the two analysis stages, in radians within `[0, pi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectionSetting {
    pub qwp_angle_c: f64,
    pub hwp_angle_c: f64,
    pub qwp_angle_d: f64,
    pub hwp_angle_d: f64,
}

impl ProjectionSetting {
    pub fn new(qwp_angle_c: f64, hwp_angle_c: f64, qwp_angle_d: f64, hwp_angle_d: f64) -> Self {
        Self {
            qwp_angle_c: wrap_half_turn(qwp_angle_c),
            hwp_angle_c: wrap_half_turn(hwp_angle_c),
            qwp_angle_d: wrap_half_turn(qwp_angle_d),
            hwp_angle_d: wrap_half_turn(hwp_angle_d),
        }
    }

    pub fn projector_c(&self) -> JonesVector {
        waveplate_projection(self.qwp_angle_c, self.hwp_angle_c)
    }

    pub fn projector_d(&self) -> JonesVector {
        waveplate_projection(self.qwp_angle_d, self.hwp_angle_d)
    }

    pub fn projectors(&self) -> (JonesVector, JonesVector) {
        (self.projector_c(), self.projector_d())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_4, FRAC_PI_8};

    /// Brute-force oracle: multiply the plate matrices in propagation order
    /// and read off the row that the PBS transmits.
    fn chain_projection(qwp: f64, hwp: f64) -> JonesVector {
        let chain = quarter_wave_plate(qwp) * half_wave_plate(hwp);
        // <H|M|in> = sum_j M[0][j] in_j, so the projector is conj(row 0).
        JonesVector::new(chain[(0, 0)].conj(), chain[(0, 1)].conj())
    }

    fn random_state(seed: &[f64; 8]) -> TwoPhotonPolState {
        TwoPhotonPolState::new([
            c(seed[0], seed[1]),
            c(seed[2], seed[3]),
            c(seed[4], seed[5]),
            c(seed[6], seed[7]),
        ])
        .normalized()
        .unwrap()
    }

    #[test]
    fn bell_kets_follow_sign_convention() {
        let a = FRAC_1_SQRT_2;
        let psi_m = bell_state("psi-").unwrap();
        let expected = [0.0, a, -a, 0.0];
        for (z, e) in psi_m.amplitudes().iter().zip(expected) {
            assert_abs_diff_eq!(z.re, e, epsilon = 1e-15);
            assert_abs_diff_eq!(z.im, 0.0);
        }
        let phi_p = bell_state("phi+").unwrap();
        assert_abs_diff_eq!(phi_p.amplitudes()[0].re, a);
        assert_abs_diff_eq!(phi_p.amplitudes()[3].re, a);
        assert!(bell_state("chi+").is_err());
    }

    #[test]
    fn bell_basis_is_orthonormal() {
        for x in BellState::ALL {
            for y in BellState::ALL {
                let ip = x.ket().inner(&y.ket());
                let expected = if x == y { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(ip.re, expected, epsilon = 1e-15);
                assert_abs_diff_eq!(ip.im, 0.0, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn identity_setting_projects_on_horizontal() {
        let p = waveplate_projection(0.0, 0.0);
        assert!(p.equals_up_to_phase(&JonesVector::horizontal(), 1e-14));
    }

    #[test]
    fn half_wave_at_eighth_turn_projects_on_diagonal() {
        let p = waveplate_projection(0.0, FRAC_PI_8);
        assert!(p.equals_up_to_phase(&JonesVector::diagonal(), 1e-14));
        assert!(p.equals_up_to_phase(&chain_projection(0.0, FRAC_PI_8), 1e-14));
    }

    #[test]
    fn quarter_wave_at_45_degrees_gives_circular_analysis() {
        let p = waveplate_projection(FRAC_PI_4, 0.0);
        let s = p.stokes();
        assert_abs_diff_eq!(s[1], 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(s[2], 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(s[3].abs(), 1.0, epsilon = 1e-14);
        assert!(p.equals_up_to_phase(&JonesVector::left(), 1e-14));
        let r = waveplate_projection(3.0 * FRAC_PI_4, 0.0);
        assert!(r.equals_up_to_phase(&JonesVector::right(), 1e-14));
        assert_abs_diff_eq!(JonesVector::right().stokes()[3], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn singlet_projections() {
        let psi_m = BellState::PsiMinus.ket();
        let h = JonesVector::horizontal();
        let v = JonesVector::vertical();
        let d = JonesVector::diagonal();
        assert_abs_diff_eq!(projection_probability(&psi_m, &h, &v).unwrap(), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(projection_probability(&psi_m, &h, &h).unwrap(), 0.0, epsilon = 1e-15);
        // direct inner product: <DD|psi-> = (1/2)(1/sqrt2)(1 - 1) = 0
        assert_abs_diff_eq!(projection_probability(&psi_m, &d, &d).unwrap(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn projection_rejects_unnormalized_state() {
        let s = TwoPhotonPolState::new([c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        let h = JonesVector::horizontal();
        assert!(matches!(
            projection_probability(&s, &h, &h),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn bell_probabilities_examples() {
        let rho = BellState::PsiMinus.ket().density().unwrap();
        let p = rho.bell_probabilities();
        for (got, want) in p.iter().zip([0.0, 0.0, 0.0, 1.0]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-14);
        }
        let p = DensityMatrix4::maximally_mixed().bell_probabilities();
        for got in p {
            assert_abs_diff_eq!(got, 0.25, epsilon = 1e-15);
        }
        // |HH> = (phi+ + phi-)/sqrt2
        let hh = JonesVector::horizontal().tensor(&JonesVector::horizontal());
        let p = hh.density().unwrap().bell_probabilities();
        for (got, want) in p.iter().zip([0.5, 0.5, 0.0, 0.0]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-15);
        }
    }

    #[test]
    fn fidelity_and_purity_examples() {
        let psi = BellState::PsiMinus.ket().density().unwrap();
        let mixed = DensityMatrix4::maximally_mixed();
        assert_abs_diff_eq!(psi.fidelity(&psi), 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(mixed.purity(), 0.25, epsilon = 1e-15);
        // pure vs mixed: F = <psi|sigma|psi> = 1/4
        assert_abs_diff_eq!(psi.fidelity(&mixed), 0.25, epsilon = 1e-10);
        assert_abs_diff_eq!(mixed.fidelity(&psi), 0.25, epsilon = 1e-10);
        assert_abs_diff_eq!(mixed.fidelity(&mixed), 1.0, epsilon = 1e-10);
    }

    #[test]
    fn density_validation_rejects_bad_matrices() {
        let mut m = *DensityMatrix4::maximally_mixed().matrix();
        m[(0, 1)] = c(0.1, 0.0);
        assert!(DensityMatrix4::new(m).is_err());
        let m = Matrix4::<C64>::identity();
        assert!(DensityMatrix4::new(m).is_err());
        let mut m = Matrix4::<C64>::zeros();
        m[(0, 0)] = c(1.5, 0.0);
        m[(1, 1)] = c(-0.5, 0.0);
        assert!(matches!(DensityMatrix4::new(m), Err(Error::Precondition(_))));
    }

    #[test]
    fn angles_wrap_into_half_turn() {
        let s = ProjectionSetting::new(-FRAC_PI_4, PI, 1.5 * PI, 0.1);
        assert_abs_diff_eq!(s.qwp_angle_c, 3.0 * FRAC_PI_4, epsilon = 1e-15);
        assert_abs_diff_eq!(s.hwp_angle_c, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.qwp_angle_d, 0.5 * PI, epsilon = 1e-15);
        for a in [s.qwp_angle_c, s.hwp_angle_c, s.qwp_angle_d, s.hwp_angle_d] {
            assert!((0.0..PI).contains(&a));
        }
    }

    proptest! {
        #[test]
        fn bell_change_of_basis_is_involutive(x in proptest::array::uniform8(-1.0f64..1.0)) {
            let coeffs = [c(x[0], x[1]), c(x[2], x[3]), c(x[4], x[5]), c(x[6], x[7])];
            let back = TwoPhotonPolState::from_bell(coeffs).to_bell();
            for (a, b) in back.iter().zip(coeffs.iter()) {
                prop_assert!((a - b).norm() <= 1e-12);
            }
        }

        #[test]
        fn bell_probabilities_sum_to_one(x in proptest::array::uniform8(-1.0f64..1.0)) {
            prop_assume!(x.iter().map(|v| v * v).sum::<f64>() > 1e-3);
            let rho = random_state(&x).density().unwrap();
            let total: f64 = rho.bell_probabilities().iter().sum();
            prop_assert!((total - 1.0).abs() <= 1e-10);
        }

        #[test]
        fn waveplate_projection_matches_chain_and_is_unit(q in 0.0f64..PI, h in 0.0f64..PI) {
            let p = waveplate_projection(q, h);
            prop_assert!(p.is_unit());
            prop_assert!(p.equals_up_to_phase(&chain_projection(q, h), 1e-13));
        }

        #[test]
        fn complementary_projections_are_complete(
            q in 0.0f64..PI, h in 0.0f64..PI,
            x in proptest::array::uniform8(-1.0f64..1.0),
        ) {
            prop_assume!(x.iter().map(|v| v * v).sum::<f64>() > 1e-3);
            let state = random_state(&x);
            let p = waveplate_projection(q, h);
            let pp = p.orthogonal();
            let total: f64 = [(p, p), (p, pp), (pp, p), (pp, pp)]
                .iter()
                .map(|(a, b)| state.projection_probability(a, b).unwrap())
                .sum();
            prop_assert!((total - 1.0).abs() <= 1e-12);
        }
    }
}

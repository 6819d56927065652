//! Two-qubit polarization tomography: analyzer sets, linear inversion and
//! maximum-likelihood reconstruction over a Cholesky parametrization.

use nalgebra::{DMatrix, DVector, Matrix4, SMatrix, SVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, precondition, Error, Result};
use crate::polarization::{DensityMatrix4, JonesVector, ProjectionSetting, C64};

const N_PARAMS: usize = 16;
const OFF_DIAGONAL: [(usize, usize); 6] = [(1, 0), (2, 0), (2, 1), (3, 0), (3, 1), (3, 2)];
/// Keeps `ln(lambda)` finite for projections the model predicts as dark.
const RATE_FLOOR: f64 = 1e-12;

type Vec16 = SVector<f64, N_PARAMS>;
type Mat16 = SMatrix<f64, N_PARAMS, N_PARAMS>;

/// Single-photon analyzer settings `(label, qwp, hwp)` of the standard set.
const LOCAL_ANALYZERS: [(&str, f64, f64); 4] = [
    ("H", 0.0, 0.0),
    ("V", 0.0, std::f64::consts::FRAC_PI_4),
    ("D", 0.0, std::f64::consts::FRAC_PI_8),
    ("R", 3.0 * std::f64::consts::FRAC_PI_4, 0.0),
];

/// One two-photon analyzer setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TomoSetting {
    pub label: String,
    pub setting: ProjectionSetting,
}

/// Ordered, informationally complete list of analyzer settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TomoSet {
    entries: Vec<TomoSetting>,
}

impl TomoSet {
    pub fn new(entries: Vec<TomoSetting>) -> Result<Self> {
        let set = Self { entries };
        let rank = set.rank();
        if rank < N_PARAMS {
            return Err(invalid(format!(
                "analyzer set is not informationally complete (rank {rank} of {N_PARAMS})"
            )));
        }
        Ok(set)
    }

    /// `{H, V, D, R} ⊗ {H, V, D, R}`, port c outer: index `4 c + d`.
    pub fn standard() -> Self {
        let mut entries = Vec::with_capacity(16);
        for (lc, qc, hc) in LOCAL_ANALYZERS {
            for (ld, qd, hd) in LOCAL_ANALYZERS {
                entries.push(TomoSetting {
                    label: format!("{lc}{ld}"),
                    setting: ProjectionSetting::new(qc, hc, qd, hd),
                });
            }
        }
        Self { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[TomoSetting] {
        &self.entries
    }

    pub fn labels(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.label.as_str()).collect()
    }

    pub fn position(&self, label: &str) -> Option<usize> {
        self.entries.iter().position(|e| e.label.eq_ignore_ascii_case(label))
    }

    /// Two-photon analyzer kets `p_c ⊗ p_d`.
    pub fn projectors(&self) -> Vec<[C64; 4]> {
        self.entries
            .iter()
            .map(|e| {
                let (pc, pd) = e.setting.projectors();
                *pc.tensor(&pd).amplitudes()
            })
            .collect()
    }

    /// Rows `Tr(P_k σ_i ⊗ σ_j)` of the linear map from density matrix to
    /// detection probabilities.
    pub fn design_matrix(&self) -> DMatrix<f64> {
        let paulis = two_qubit_paulis();
        let proj = self.projectors();
        DMatrix::from_fn(self.len(), N_PARAMS, |k, b| quadratic_form(&paulis[b], &proj[k]))
    }

    pub fn rank(&self) -> usize {
        if self.is_empty() {
            return 0;
        }
        self.design_matrix().rank(1e-9)
    }
}

/// The standard 16-setting analyzer set.
pub fn standard_tomo_set() -> TomoSet {
    TomoSet::standard()
}

fn pauli(i: usize) -> [[C64; 2]; 2] {
    let z = C64::new(0.0, 0.0);
    let one = C64::new(1.0, 0.0);
    let im = C64::new(0.0, 1.0);
    match i {
        0 => [[one, z], [z, one]],
        1 => [[z, one], [one, z]],
        2 => [[z, -im], [im, z]],
        _ => [[one, z], [z, -one]],
    }
}

fn two_qubit_paulis() -> Vec<Matrix4<C64>> {
    let mut out = Vec::with_capacity(16);
    for i in 0..4 {
        for j in 0..4 {
            let (a, b) = (pauli(i), pauli(j));
            out.push(Matrix4::from_fn(|r, c| a[r / 2][c / 2] * b[r % 2][c % 2]));
        }
    }
    out
}

fn quadratic_form(m: &Matrix4<C64>, p: &[C64; 4]) -> f64 {
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..4 {
        for j in 0..4 {
            acc += p[i].conj() * m[(i, j)] * p[j];
        }
    }
    acc.re
}

/// Lower-triangular `T` with real diagonal, flattened as four diagonal
/// entries followed by `(re, im)` of `T10, T20, T21, T30, T31, T32`.
/// The unnormalized state is `T† T`; its trace carries the intensity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CholeskyParams(pub [f64; N_PARAMS]);

impl CholeskyParams {
    pub fn to_matrix(&self) -> Matrix4<C64> {
        let x = &self.0;
        let mut t = Matrix4::zeros();
        for i in 0..4 {
            t[(i, i)] = C64::new(x[i], 0.0);
        }
        for (k, &(i, j)) in OFF_DIAGONAL.iter().enumerate() {
            t[(i, j)] = C64::new(x[4 + 2 * k], x[5 + 2 * k]);
        }
        t
    }

    /// Unnormalized state `T† T`.
    pub fn unnormalized_state(&self) -> Matrix4<C64> {
        let t = self.to_matrix();
        t.adjoint() * t
    }

    /// Factor of any positive-semidefinite Hermitian matrix, `m = T† T`,
    /// via a QL decomposition of `sqrt(Λ) V†`.
    pub fn from_psd(m: &Matrix4<C64>) -> Self {
        let h = (m + m.adjoint()) * C64::new(0.5, 0.0);
        let eig = h.symmetric_eigen();
        let root = Matrix4::from_diagonal(&eig.eigenvalues.map(|l| C64::new(l.max(0.0).sqrt(), 0.0)));
        let b = root * eig.eigenvectors.adjoint();
        let flip = |a: &Matrix4<C64>| Matrix4::from_fn(|i, j| a[(3 - i, 3 - j)]);
        let r = flip(&b).qr().r();
        let mut t = flip(&r);
        for i in 0..4 {
            let d = t[(i, i)];
            if d.norm() > 0.0 {
                let phase = d.conj() / d.norm();
                for j in 0..4 {
                    t[(i, j)] *= phase;
                }
            }
        }
        let mut x = [0.0; N_PARAMS];
        for i in 0..4 {
            x[i] = t[(i, i)].re;
        }
        for (k, &(i, j)) in OFF_DIAGONAL.iter().enumerate() {
            x[4 + 2 * k] = t[(i, j)].re;
            x[5 + 2 * k] = t[(i, j)].im;
        }
        Self(x)
    }

    /// Factor of a positive-definite Hermitian matrix, `m = T† T`.
    pub fn from_state(m: &Matrix4<C64>) -> Result<Self> {
        // Reversing the index order turns the usual L L† factor into T† T.
        let flip = |a: &Matrix4<C64>| Matrix4::from_fn(|i, j| a[(3 - i, 3 - j)]);
        let chol = nalgebra::Cholesky::new(flip(m))
            .ok_or_else(|| precondition("matrix is not positive definite"))?;
        let u = flip(&chol.l());
        let t = u.adjoint();
        let mut x = [0.0; N_PARAMS];
        for i in 0..4 {
            x[i] = t[(i, i)].re;
        }
        for (k, &(i, j)) in OFF_DIAGONAL.iter().enumerate() {
            x[4 + 2 * k] = t[(i, j)].re;
            x[5 + 2 * k] = t[(i, j)].im;
        }
        Ok(Self(x))
    }
}

/// Value and gradient of the Poisson negative log-likelihood.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LikelihoodEval {
    pub nll: f64,
    pub gradient: [f64; N_PARAMS],
    /// All counts are zero, so the data carry no information.
    pub degenerate: bool,
}

/// Precomputed analyzer kets, counts and exposures.
struct Problem {
    proj: Vec<[C64; 4]>,
    counts: Vec<f64>,
    exposures: Vec<f64>,
}

impl Problem {
    fn new(set: &TomoSet, counts: &[f64], exposures: &[f64]) -> Result<Self> {
        if counts.len() != set.len() || exposures.len() != set.len() {
            return Err(precondition(format!(
                "expected {} counts and exposures, got {} and {}",
                set.len(),
                counts.len(),
                exposures.len()
            )));
        }
        if counts.iter().any(|n| !(*n >= 0.0 && n.is_finite())) {
            return Err(precondition("counts must be non-negative and finite"));
        }
        if exposures.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
            return Err(precondition("exposures must be positive and finite"));
        }
        Ok(Self {
            proj: set.projectors(),
            counts: counts.to_vec(),
            exposures: exposures.to_vec(),
        })
    }

    fn total_rate(&self, x: &[f64; N_PARAMS]) -> f64 {
        let t = CholeskyParams(*x).to_matrix();
        self.proj
            .iter()
            .zip(&self.exposures)
            .map(|(p, e)| e * (t * nalgebra::Vector4::from_column_slice(p)).norm_squared())
            .sum()
    }

    /// `f(xn) - f(x)` without the cancellation of subtracting two values
    /// of `f`. Near a boundary optimum the decrease per step falls below
    /// the rounding of `f` itself, which would stall the line search.
    fn change(&self, x: &[f64; N_PARAMS], xn: &[f64; N_PARAMS]) -> f64 {
        let t = CholeskyParams(*x).to_matrix();
        let tn = CholeskyParams(*xn).to_matrix();
        let mut step = [0.0; N_PARAMS];
        for (s, (a, b)) in step.iter_mut().zip(xn.iter().zip(x)) {
            *s = a - b;
        }
        let dt = CholeskyParams(step).to_matrix();
        let mut df = 0.0;
        for ((p, &n), &e) in self.proj.iter().zip(&self.counts).zip(&self.exposures) {
            let p = nalgebra::Vector4::from_column_slice(p);
            let (u, un, du) = (t * p, tn * p, dt * p);
            let lambda = e * u.norm_squared();
            let dl = e * du.dotc(&(un + u)).re;
            df += dl;
            if n > 0.0 {
                df -= n * (dl / (lambda + RATE_FLOOR)).ln_1p();
            }
        }
        df
    }

    /// `sum_k lambda_k - n_k ln(lambda_k)`, `lambda_k = E_k |T p_k|²`.
    fn eval(&self, x: &[f64; N_PARAMS], want_grad: bool) -> (f64, [f64; N_PARAMS]) {
        let t = CholeskyParams(*x).to_matrix();
        let mut f = 0.0;
        let mut g = [0.0; N_PARAMS];
        for ((p, &n), &e) in self.proj.iter().zip(&self.counts).zip(&self.exposures) {
            let mut u = [C64::new(0.0, 0.0); 4];
            for i in 0..4 {
                for j in 0..=i {
                    u[i] += t[(i, j)] * p[j];
                }
            }
            let lambda = e * u.iter().map(|z| z.norm_sqr()).sum::<f64>();
            f += lambda;
            if n > 0.0 {
                f -= n * (lambda + RATE_FLOOR).ln();
            }
            if want_grad {
                let w = 2.0 * e * (1.0 - n / (lambda + RATE_FLOOR));
                for i in 0..4 {
                    g[i] += w * (u[i] * p[i].conj()).re;
                }
                for (k, &(i, j)) in OFF_DIAGONAL.iter().enumerate() {
                    let z = u[i] * p[j].conj();
                    g[4 + 2 * k] += w * z.re;
                    g[5 + 2 * k] += w * z.im;
                }
            }
        }
        (f, g)
    }
}

/// Negative log-likelihood (up to count-only constants) and its gradient.
pub fn negative_log_likelihood(
    params: &CholeskyParams,
    set: &TomoSet,
    counts: &[f64],
    exposures: &[f64],
) -> Result<LikelihoodEval> {
    let problem = Problem::new(set, counts, exposures)?;
    let (nll, gradient) = problem.eval(&params.0, true);
    Ok(LikelihoodEval {
        nll,
        gradient,
        degenerate: counts.iter().all(|&n| n == 0.0),
    })
}

/// Linear-inversion estimate of the unnormalized state, `sum_k n_k / E_k`
/// matched in the least-squares sense. May have negative eigenvalues.
pub fn linear_inversion(set: &TomoSet, counts: &[f64], exposures: &[f64]) -> Result<Matrix4<C64>> {
    let _ = Problem::new(set, counts, exposures)?;
    let a = set.design_matrix();
    let y = DVector::from_iterator(set.len(), counts.iter().zip(exposures).map(|(n, e)| n / e));
    let coeffs = a
        .svd(true, true)
        .solve(&y, 1e-12)
        .map_err(|e| precondition(format!("linear inversion failed: {e}")))?;
    let paulis = two_qubit_paulis();
    let mut m = Matrix4::zeros();
    for (c, p) in coeffs.iter().zip(&paulis) {
        m += p * C64::new(*c, 0.0);
    }
    Ok(m)
}

/// Nearest positive-semidefinite matrix (negative eigenvalues set to zero).
pub fn project_psd(m: &Matrix4<C64>) -> Matrix4<C64> {
    let h = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let eig = h.symmetric_eigen();
    let d = Matrix4::from_diagonal(&eig.eigenvalues.map(|l| C64::new(l.max(0.0), 0.0)));
    eig.eigenvectors * d * eig.eigenvectors.adjoint()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MleOptions {
    pub max_iterations: usize,
    /// Convergence threshold on the largest gradient component of the
    /// count-normalized objective.
    pub gradient_tolerance: f64,
}

impl Default for MleOptions {
    fn default() -> Self {
        Self {
            max_iterations: 2000,
            gradient_tolerance: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartPoint {
    MaximallyMixed,
    LinearInversion,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MleDiagnostics {
    pub iterations: usize,
    pub gradient_norm: f64,
    /// Objective per detected pair at the optimum.
    pub objective: f64,
    pub converged: bool,
    pub start: StartPoint,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MleResult {
    pub rho: DensityMatrix4,
    /// Trace of the unnormalized state: pairs per unit exposure over a
    /// complete basis.
    pub intensity: f64,
    pub params: CholeskyParams,
    pub diagnostics: MleDiagnostics,
}

/// Maximum-likelihood state from counts of each analyzer setting.
///
/// The objective is the Poisson likelihood with rates
/// `lambda_k = E_k Tr(P_k T† T)`, minimized by BFGS from a maximally mixed
/// start and from the PSD-projected linear inversion; the better optimum wins.
pub fn mle_reconstruct(counts: &[f64], exposures: &[f64], set: &TomoSet, opts: &MleOptions) -> Result<MleResult> {
    let _ = Problem::new(set, counts, exposures)?;
    let total: f64 = counts.iter().sum();
    if total <= 0.0 {
        return Err(Error::DegeneratePixel);
    }
    // Work with counts per detected pair and exposures summing to 4, which
    // keeps T of order one; T = scale * T_work.
    let e_sum: f64 = exposures.iter().sum();
    let work_counts: Vec<f64> = counts.iter().map(|n| n / total).collect();
    let work_exp: Vec<f64> = exposures.iter().map(|e| 4.0 * e / e_sum).collect();
    let scale = (4.0 * total / e_sum).sqrt();
    let problem = Problem::new(set, &work_counts, &work_exp)?;

    let mut starts = vec![(StartPoint::MaximallyMixed, mixed_start())];
    if let Some(x) = inversion_start(&problem, set) {
        starts.push((StartPoint::LinearInversion, x));
    }
    let (start, mut run) = starts
        .into_iter()
        .map(|(kind, x0)| (kind, bfgs(&problem, x0, opts)))
        .min_by(|a, b| a.1.f.total_cmp(&b.1.f))
        .expect("at least one start");
    if let Some(x) = truncated_rank(&CholeskyParams(run.x).unnormalized_state()) {
        let refined = bfgs(&problem, x, opts);
        if problem.change(&run.x, &refined.x) <= 0.0 {
            run = Run {
                iterations: run.iterations + refined.iterations,
                ..refined
            };
        }
    }

    let params = CholeskyParams(run.x.map(|v| v * scale));
    let m = params.unnormalized_state();
    let intensity = m.trace().re;
    if !(intensity > 0.0) {
        return Err(precondition("reconstruction collapsed to zero intensity"));
    }
    let rho = m.map(|z| z / intensity);
    let rho = (rho + rho.adjoint()) * C64::new(0.5, 0.0);
    Ok(MleResult {
        rho: DensityMatrix4::new(rho)?,
        intensity,
        params,
        diagnostics: MleDiagnostics {
            iterations: run.iterations,
            gradient_norm: run.grad_norm,
            objective: run.f,
            converged: run.converged,
            start,
        },
    })
}

/// Near a rank-deficient optimum the objective is quartic in the
/// parameters that carry the vanishing eigenvalues, so BFGS stops with
/// residual eigenvalues well above the gradient tolerance. Restarting
/// from the state with those eigenvalues removed lets the optimizer
/// settle on the boundary; the caller keeps whichever run is better.
fn truncated_rank(m: &Matrix4<C64>) -> Option<[f64; N_PARAMS]> {
    let h = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let eig = h.symmetric_eigen();
    let top = eig.eigenvalues.max();
    if !(top > 0.0) {
        return None;
    }
    let kept = eig.eigenvalues.map(|l| if l < 1e-3 * top { 0.0 } else { l });
    if kept == eig.eigenvalues {
        return None;
    }
    let d = Matrix4::from_diagonal(&kept.map(|l| C64::new(l, 0.0)));
    let snapped = eig.eigenvectors * d * eig.eigenvectors.adjoint();
    Some(CholeskyParams::from_psd(&snapped).0)
}

fn mixed_start() -> [f64; N_PARAMS] {
    let mut x = [0.0; N_PARAMS];
    x[..4].fill(0.5);
    x
}

fn inversion_start(problem: &Problem, set: &TomoSet) -> Option<[f64; N_PARAMS]> {
    let m = project_psd(&linear_inversion(set, &problem.counts, &problem.exposures).ok()?);
    let tr = m.trace().re;
    if !(tr > 0.0) {
        return None;
    }
    let x = CholeskyParams::from_psd(&m).0;
    // Rescale so that predicted and observed totals agree.
    let predicted = problem.total_rate(&x);
    if !(predicted > 0.0) {
        return None;
    }
    let k = (1.0 / predicted).sqrt();
    Some(x.map(|v| v * k))
}

struct Run {
    x: [f64; N_PARAMS],
    f: f64,
    grad_norm: f64,
    iterations: usize,
    converged: bool,
}

fn bfgs(problem: &Problem, x0: [f64; N_PARAMS], opts: &MleOptions) -> Run {
    let eval = |x: &Vec16| {
        let (f, g) = problem.eval(&(*x).into(), true);
        (f, Vec16::from(g))
    };
    let mut x = Vec16::from(x0);
    let (mut f, mut g) = eval(&x);
    let mut h = Mat16::identity();
    let mut fresh = true;
    let mut iterations = 0;
    let inf_norm = |g: &Vec16| g.amax();

    while iterations < opts.max_iterations && inf_norm(&g) > opts.gradient_tolerance {
        iterations += 1;
        let mut d = -(h * g);
        let mut slope = g.dot(&d);
        if !(slope < 0.0) {
            h = Mat16::identity();
            fresh = true;
            d = -g;
            slope = g.dot(&d);
        }
        let mut alpha = 1.0;
        let mut accepted = None;
        while alpha > 1e-20 {
            let xn = x + d * alpha;
            let df = problem.change(&x.into(), &xn.into());
            if df.is_finite() && df <= 1e-4 * alpha * slope {
                let (fnew, gnew) = eval(&xn);
                accepted = Some((xn, fnew, gnew));
                break;
            }
            alpha *= 0.5;
        }
        let Some((xn, fnew, gnew)) = accepted else {
            if fresh {
                break;
            }
            h = Mat16::identity();
            fresh = true;
            continue;
        };
        let s = xn - x;
        let y = gnew - g;
        let sy = s.dot(&y);
        if sy > 1e-300 && sy > 1e-12 * s.norm() * y.norm() {
            if fresh {
                h = Mat16::identity() * (sy / y.dot(&y));
            }
            let rho = 1.0 / sy;
            let i = Mat16::identity();
            h = (i - s * y.transpose() * rho) * h * (i - y * s.transpose() * rho) + s * s.transpose() * rho;
            fresh = false;
        }
        x = xn;
        f = fnew;
        g = gnew;
    }
    let grad_norm = inf_norm(&g);
    Run {
        x: x.into(),
        f,
        grad_norm,
        iterations,
        converged: grad_norm <= opts.gradient_tolerance,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BellMapOptions {
    /// Bins with fewer total counts than this are masked.
    pub mask_threshold: f64,
    pub mle: MleOptions,
}

impl Default for BellMapOptions {
    fn default() -> Self {
        Self {
            mask_threshold: 50.0,
            mle: MleOptions::default(),
        }
    }
}

/// Reconstruction of one `(bin_c, bin_d)` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct BinReconstruction {
    pub bin_c: usize,
    pub bin_d: usize,
    pub total_counts: f64,
    /// `None` for masked bins.
    pub result: Option<MleResult>,
}

impl BinReconstruction {
    pub fn bell_probabilities(&self) -> Option<[f64; 4]> {
        self.result.as_ref().map(|r| {
            let p = r.rho.bell_probabilities();
            let s: f64 = p.iter().sum();
            p.map(|v| v / s)
        })
    }
}

/// Per-bin Bell-state populations over the azimuthal grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BellMap {
    pub bins: usize,
    /// Row-major over `(bin_c, bin_d)`.
    pub cells: Vec<BinReconstruction>,
}

impl BellMap {
    pub fn cell(&self, bin_c: usize, bin_d: usize) -> &BinReconstruction {
        &self.cells[bin_c * self.bins + bin_d]
    }

    /// Population of Bell state `index` per cell, `None` where masked.
    pub fn population(&self, index: usize) -> Vec<Option<f64>> {
        self.cells
            .iter()
            .map(|c| c.bell_probabilities().map(|p| p[index]))
            .collect()
    }

    pub fn masked(&self) -> usize {
        self.cells.iter().filter(|c| c.result.is_none()).count()
    }

    pub fn unconverged(&self) -> usize {
        self.cells
            .iter()
            .filter(|c| c.result.as_ref().is_some_and(|r| !r.diagnostics.converged))
            .count()
    }
}

/// Runs the MLE independently in every azimuthal bin.
///
/// `marginals[k]` holds the counts of analyzer setting `k` per bin,
/// row-major over `(bin_c, bin_d)`.
pub fn bell_map(
    marginals: &[Vec<f64>],
    exposures: &[f64],
    set: &TomoSet,
    bins: usize,
    opts: &BellMapOptions,
) -> Result<BellMap> {
    if marginals.len() != set.len() {
        return Err(precondition(format!(
            "expected {} projections, got {}",
            set.len(),
            marginals.len()
        )));
    }
    if let Some(m) = marginals.iter().find(|m| m.len() != bins * bins) {
        return Err(precondition(format!("marginal has {} cells, expected {}", m.len(), bins * bins)));
    }
    let cells = (0..bins * bins)
        .into_par_iter()
        .map(|cell| {
            let counts: Vec<f64> = marginals.iter().map(|m| m[cell]).collect();
            let total: f64 = counts.iter().sum();
            let result = if total < opts.mask_threshold || total <= 0.0 {
                None
            } else {
                Some(mle_reconstruct(&counts, exposures, set, &opts.mle)?)
            };
            Ok(BinReconstruction {
                bin_c: cell / bins,
                bin_d: cell % bins,
                total_counts: total,
                result,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BellMap { bins, cells })
}

/// Analyzer kets of the standard local settings, in `H, V, D, R` order.
pub fn standard_local_analyzers() -> [(String, JonesVector); 4] {
    LOCAL_ANALYZERS.map(|(l, q, h)| (l.to_string(), crate::polarization::waveplate_projection(q, h)))
}

//! Acceptance criteria 1-8, one PASS/FAIL line each.
//!
//! Runs without the libtest harness so the report is printed even when
//! output capture is on; exits non-zero if any criterion fails.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use hom_core::detection::{extract_coincidences, synthesize_events, EventTiming};
use hom_core::hom::{bell_projection_factor, dip_visibility, LocusAxis};
use hom_core::modes::lg_radial;
use hom_core::pipeline::{analytic_maps, bell_map_options, pearson, reconstruct, run_dip, RunConfig, Simulator};
use hom_core::polarization::Polarization;
use hom_core::tomography::{bell_map, BellMapOptions};
use hom_core::{
    bell_coefficients, bell_coefficients_azimuthal, coincidence_state, marginalize_radial, mle_reconstruct,
    negative_log_likelihood, scan_unique_loci, unique_locus_analysis, BellState, CholeskyParams, CoordGrid,
    DensityMatrix4, JonesVector, LocusReport, MleOptions, Port, PortCoordinates, QPlateParams, TomoSet, C64,
};

struct Report {
    passed: bool,
    detail: String,
}

impl Report {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Self {
            passed,
            detail: detail.into(),
        }
    }
}

fn within(elapsed: Duration, limit_s: f64) -> bool {
    elapsed.as_secs_f64() <= limit_s
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn plates_off() -> RunConfig {
    RunConfig {
        delta_a: 2.0 * PI,
        delta_b: 2.0 * PI,
        ..RunConfig::default()
    }
}

fn pure(state: BellState) -> DensityMatrix4 {
    DensityMatrix4::from_pure(&state.ket()).unwrap()
}

fn criterion_1() -> Report {
    let start = Instant::now();
    let pairs = [
        ("(1, 1/2)", QPlateParams::tuned(1.0), QPlateParams::tuned(0.5)),
        ("(3/2, -1/2)", QPlateParams::tuned(1.5), QPlateParams::tuned(-0.5)),
        ("(1/2, 1)", QPlateParams::tuned(0.5), QPlateParams::tuned(1.0)),
        ("(1, off)", QPlateParams::tuned(1.0), QPlateParams::off(0.5)),
    ];
    let h = JonesVector::horizontal();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst_closed: f64 = 0.0;
    let mut worst_spread: f64 = 0.0;
    for (_, a, b) in &pairs {
        let (a, b) = (a.as_ref().unwrap(), b.as_ref().unwrap());
        let (qa, qb, k) = bell_projection_factor(a, b).expect("pure plate actions");
        let (la, lb) = ((2.0 * qa).round() as i32, (2.0 * qb).round() as i32);
        let mut ratios: Vec<C64> = Vec::new();
        for _ in 0..1000 {
            let (rc, rd) = (rng.random_range(0.05..3.0), rng.random_range(0.05..3.0));
            let (tc, td) = (rng.random_range(-PI..PI), rng.random_range(-PI..PI));
            let coords = PortCoordinates::new(rc, tc, rd, td).unwrap();
            let proj = coincidence_state(a, b, &h, &h, &coords).unwrap().to_bell();
            let s = bell_coefficients(qa, qb, &coords).as_array();
            for x in 0..4 {
                worst_closed = worst_closed.max((proj[x] - k * s[x]).norm());
            }

            // Equal-radius slice against the sum-to-product form; the
            // radial profiles are divided out so one constant covers
            // every tuple.
            let r = rng.random_range(0.2..2.5);
            let coords = PortCoordinates::new(r, tc, r, td).unwrap();
            let proj = coincidence_state(a, b, &h, &h, &coords).unwrap().to_bell();
            let radial = lg_radial(la, r).unwrap() * lg_radial(lb, r).unwrap();
            let s7 = bell_coefficients_azimuthal(qa, qb, tc, td).as_array();
            for x in 0..4 {
                if s7[x].abs() > 1e-3 {
                    ratios.push(proj[x] / (radial * s7[x]));
                } else {
                    worst_closed = worst_closed.max(proj[x].norm() - 1e-3 * radial);
                }
            }
        }
        let reference = ratios[0];
        let spread = ratios
            .iter()
            .map(|z| (z - reference).norm() / reference.norm())
            .fold(0.0, f64::max);
        worst_spread = worst_spread.max(spread);
    }
    let elapsed = start.elapsed();
    Report::new(
        worst_closed <= 1e-10 && worst_spread <= 1e-9 && within(elapsed, 10.0),
        format!(
            "closed-form max error {worst_closed:.2e} (<= 1e-10), sum-to-product constant spread {worst_spread:.2e} (<= 1e-9), {:.2}s (<= 10s)",
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_2() -> Report {
    // Bunching: identical photons through switched-off plates never
    // leave by different ports, pixel by pixel.
    let off = QPlateParams::off(1.0).unwrap();
    let h = JonesVector::horizontal();
    let grid = CoordGrid::centered(32, 1.0 / 6.0).unwrap();
    let (pc, pd) = (grid.polar_coords(Port::C), grid.polar_coords(Port::D));
    let mut nonzero = 0usize;
    for &(rc, tc) in &pc {
        for &(rd, td) in &pd {
            let coords = PortCoordinates::new(rc, tc, rd, td).unwrap();
            if coincidence_state(&off, &off, &h, &h, &coords).unwrap().norm_sqr() != 0.0 {
                nonzero += 1;
            }
        }
    }

    // Antibunching: V,H gives the singlet in every bin.
    let set = TomoSet::standard();
    let cfg = RunConfig {
        pol_a: Polarization::V,
        pol_b: Polarization::H,
        ..plates_off()
    };
    let singlet = pure(BellState::PsiMinus);
    let sim = Simulator::new(&cfg, set.clone()).unwrap();
    let binning = cfg.binning().unwrap();
    let marginals: Vec<Vec<f64>> = (0..set.len())
        .map(|k| marginalize_radial(&sim.expected_counts(k), sim.fields().grid(), &binning).unwrap())
        .collect();
    let exposures = vec![cfg.pairs_per_projection; set.len()];
    // No masking: without noise every bin with signal is informative.
    let opts = BellMapOptions {
        mask_threshold: 0.0,
        ..bell_map_options(&cfg)
    };
    let map = bell_map(&marginals, &exposures, &set, cfg.bins, &opts).unwrap();
    let noiseless: Vec<f64> = map
        .cells
        .iter()
        .filter_map(|c| c.result.as_ref())
        .map(|r| r.rho.fidelity(&singlet))
        .collect();
    let min_fid = noiseless.iter().copied().fold(1.0, f64::min);

    // Poisson pairs through the event path at 1e4 pairs per bin.
    let bins = cfg.bins as f64;
    let noisy_cfg = RunConfig {
        pairs_per_projection: 1e4 * bins * bins,
        seed: 2,
        ..cfg.clone()
    };
    let slices: Vec<_> = Simulator::new(&noisy_cfg, set.clone())
        .unwrap()
        .run_all()
        .unwrap()
        .into_iter()
        .map(|r| r.slice)
        .collect();
    let noisy = reconstruct(&slices, &set, &binning, &bell_map_options(&noisy_cfg)).unwrap();
    let purities: Vec<f64> = noisy.cells.iter().filter_map(|c| c.result.as_ref()).map(|r| r.rho.purity()).collect();
    let med = median(purities.clone());

    let passed = nonzero == 0
        && sim.fields().grid().cells() > 0
        && noiseless.len() == map.cells.len()
        && min_fid >= 1.0 - 1e-6
        && purities.len() == noisy.cells.len()
        && med >= 0.97;
    Report::new(
        passed,
        format!(
            "H,H plates off: {nonzero} of {} pixel pairs with coincidences (== 0); V,H noiseless min fidelity with psi- {min_fid:.9} over {} bins (>= 1-1e-6); Poisson 1e4 pairs/bin median purity {med:.4} over {} bins (>= 0.97)",
            pc.len() * pd.len(),
            noiseless.len(),
            purities.len()
        ),
    )
}

fn locus_cli(qa: f64, qb: f64) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_hom"))
        .args(["locus", &format!("--qa={qa}"), &format!("--qb={qb}"), "--json"])
        .output()
        .expect("run hom")
}

fn criterion_3() -> Report {
    let start = Instant::now();
    let mut notes = Vec::new();

    let out = locus_cli(1.0, 0.5);
    let report: LocusReport = serde_json::from_slice(&out.stdout).expect("locus JSON");
    let only_at = |state: BellState, axis: LocusAxis| {
        let l = report.get(state);
        l.attainable
            && !l.witnesses.is_empty()
            && l.witnesses.iter().all(|w| w.axis == axis && w.value == 0.0 && w.amplitude.abs() > 1e-9)
    };
    let first = out.status.success()
        && only_at(BellState::PsiPlus, LocusAxis::Sum)
        && only_at(BellState::PsiMinus, LocusAxis::Difference)
        && !report.get(BellState::PhiPlus).attainable
        && !report.get(BellState::PhiMinus).attainable;
    notes.push(format!("(1, 1/2) psi+ on theta_c=-theta_d, psi- on theta_c=theta_d, phi unattainable: {first}"));

    let out = locus_cli(1.5, -0.5);
    let second = out.status.success() && serde_json::from_slice::<LocusReport>(&out.stdout).unwrap().all_four();
    notes.push(format!("(3/2, -1/2) all four: {second}"));

    let out = locus_cli(1.0, 1.0);
    let rejected = out.status.code() == Some(2) && String::from_utf8_lossy(&out.stderr).contains("|qa| != |qb|");
    notes.push(format!("(1, 1) rejected: {rejected}"));

    let charges = [-1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5];
    let mut all_four = BTreeSet::new();
    let mut compared = 0;
    let mut disagreements = Vec::new();
    for &qa in &charges {
        for &qb in &charges {
            if f64::abs(qa) == f64::abs(qb) {
                continue;
            }
            let r = unique_locus_analysis(qa, qb, hom_core::hom::DEFAULT_N_MAX).unwrap();
            let scan = scan_unique_loci(qa, qb, 721).unwrap();
            compared += 1;
            if scan.attainable != r.attainable() {
                disagreements.push(format!("({qa}, {qb})"));
            }
            if r.all_four() {
                all_four.insert(((2.0 * qa) as i32, (2.0 * qb) as i32));
            }
        }
    }
    let expected: BTreeSet<(i32, i32)> = [(3, -1), (-3, 1), (1, -3), (-1, 3)].into_iter().collect();
    let smallest = all_four == expected;
    notes.push(format!(
        "all-four pairs with |q| <= 3/2 are exactly (+-3/2, -+1/2) and swaps: {smallest}; 721x721 grid agrees on {}/{compared} pairs",
        compared - disagreements.len()
    ));
    let elapsed = start.elapsed();
    notes.push(format!("{:.2}s (<= 60s)", elapsed.as_secs_f64()));
    Report::new(
        first && second && rejected && smallest && disagreements.is_empty() && within(elapsed, 60.0),
        notes.join("; "),
    )
}

fn criterion_4() -> Report {
    let start = Instant::now();
    // 12 azimuthal bins: at 24 the pixel-centre sampling near the beam
    // axis, not noise, limits the agreement with the exact integrals.
    let cfg = RunConfig {
        bins: 12,
        pairs_per_projection: 2e4,
        ..RunConfig::default()
    };
    let set = TomoSet::standard();
    let sim = Simulator::new(&cfg, set.clone()).unwrap();
    let binning = cfg.binning().unwrap();
    let analytic = analytic_maps(&cfg, &set, 8).unwrap();
    let runs = sim.run_all().unwrap();
    let mut worst_noisy: f64 = 1.0;
    let mut worst_clean: f64 = 1.0;
    for (k, run) in runs.iter().enumerate() {
        let clean: Vec<f64> = marginalize_radial(&sim.expected_counts(k), sim.fields().grid(), &binning).unwrap();
        worst_clean = worst_clean.min(pearson(&clean, &analytic.projections[k]).unwrap());
        let noisy: Vec<u64> = marginalize_radial(&run.slice.counts, &run.slice.grid, &binning).unwrap();
        let noisy: Vec<f64> = noisy.into_iter().map(|c| c as f64).collect();
        worst_noisy = worst_noisy.min(pearson(&noisy, &analytic.projections[k]).unwrap());
    }
    let elapsed = start.elapsed();
    Report::new(
        runs.len() == 16 && worst_noisy >= 0.95 && worst_clean >= 0.999 && within(elapsed, 300.0),
        format!(
            "16 panels, {} bins: min Pearson at 2e4 pairs/projection {worst_noisy:.4} (>= 0.95), noiseless {worst_clean:.5} (>= 0.999), {:.2}s (<= 300s)",
            cfg.bins,
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_5() -> Report {
    let set = TomoSet::standard();
    let base = RunConfig::default();
    let bins = base.bins as f64;
    let cfg = RunConfig {
        pairs_per_projection: 1e4 * bins * bins,
        seed: 5,
        ..base
    };
    assert!(cfg.events, "criterion 5 exercises the event path");
    let binning = cfg.binning().unwrap();
    let slices: Vec<_> = Simulator::new(&cfg, set.clone())
        .unwrap()
        .run_all()
        .unwrap()
        .into_iter()
        .map(|r| r.slice)
        .collect();
    let map = reconstruct(&slices, &set, &binning, &bell_map_options(&cfg)).unwrap();
    let analytic = analytic_maps(&cfg, &set, 8).unwrap();

    let mut worst_corr: f64 = 1.0;
    let mut per_state = Vec::new();
    for state in BellState::ALL {
        let pop = map.population(state.index());
        let (mut sim, mut th) = (Vec::new(), Vec::new());
        for (p, a) in pop.iter().zip(&analytic.bell) {
            if let (Some(p), Some(a)) = (p, a) {
                sim.push(*p);
                th.push(a[state.index()]);
            }
        }
        let r = pearson(&sim, &th).unwrap();
        worst_corr = worst_corr.min(r);
        per_state.push(format!("{} {r:.4}", state.label()));
    }

    // Band structure: psi- concentrates on theta_c = theta_d, psi+ on
    // theta_c = -theta_d (bin centres are symmetric about zero).
    let n = map.bins;
    let mean_over = |state: BellState, pick: &dyn Fn(usize, usize) -> bool| {
        let v: Vec<f64> = (0..n * n)
            .filter(|&i| pick(i / n, i % n))
            .filter_map(|i| map.cells[i].bell_probabilities().map(|p| p[state.index()]))
            .collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    let everywhere = |_: usize, _: usize| true;
    let diagonal = |c: usize, d: usize| c == d;
    let antidiagonal = |c: usize, d: usize| c + d == n - 1;
    let psi_minus_band = mean_over(BellState::PsiMinus, &diagonal) / mean_over(BellState::PsiMinus, &everywhere);
    let psi_plus_band = mean_over(BellState::PsiPlus, &antidiagonal) / mean_over(BellState::PsiPlus, &everywhere);

    let sum_error = map
        .cells
        .iter()
        .filter_map(|c| c.bell_probabilities())
        .map(|p| (p.iter().sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max);
    let reconstructed = map.cells.len() - map.masked();
    Report::new(
        worst_corr >= 0.9 && sum_error <= 1e-12 && psi_minus_band > 1.5 && psi_plus_band > 1.5 && reconstructed > 0,
        format!(
            "{n}x{n} bins at 1e4 pairs/bin via events: correlation {} (>= 0.9); band contrast psi- {psi_minus_band:.2}, psi+ {psi_plus_band:.2} (> 1.5); max |sum - 1| {sum_error:.1e} over {reconstructed} bins",
            per_state.join(", ")
        ),
    )
}

fn expected_rates(rho: &DensityMatrix4, set: &TomoSet) -> Vec<f64> {
    set.projectors()
        .iter()
        .map(|p| {
            let mut acc = C64::new(0.0, 0.0);
            for i in 0..4 {
                for j in 0..4 {
                    acc += p[i].conj() * rho.matrix()[(i, j)] * p[j];
                }
            }
            acc.re.max(0.0)
        })
        .collect()
}

fn criterion_6() -> Report {
    let set = TomoSet::standard();
    let mut rng = ChaCha8Rng::seed_from_u64(6);

    // Central differences of the likelihood at random parameters.
    let mut worst_grad: f64 = 0.0;
    for _ in 0..20 {
        let x: [f64; 16] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let counts: Vec<f64> = (0..16).map(|_| rng.random_range(0..40) as f64).collect();
        let exposures: Vec<f64> = (0..16).map(|_| rng.random_range(0.5..2.0)).collect();
        let eval = negative_log_likelihood(&CholeskyParams(x), &set, &counts, &exposures).unwrap();
        let h = 1e-6;
        for i in 0..16 {
            let (mut up, mut down) = (x, x);
            up[i] += h;
            down[i] -= h;
            let fu = negative_log_likelihood(&CholeskyParams(up), &set, &counts, &exposures).unwrap().nll;
            let fd = negative_log_likelihood(&CholeskyParams(down), &set, &counts, &exposures).unwrap().nll;
            let numeric = (fu - fd) / (2.0 * h);
            worst_grad = worst_grad.max((numeric - eval.gradient[i]).abs() / eval.gradient[i].abs().max(1.0));
        }
    }

    let exposures = vec![1.0; set.len()];
    let opts = MleOptions::default();
    let mut worst_clean: f64 = 1.0;
    let mut medians = Vec::new();
    let mut worst_median: f64 = 1.0;
    for state in BellState::ALL {
        let truth = pure(state);
        let rates = expected_rates(&truth, &set);
        let total: f64 = rates.iter().sum();
        let clean: Vec<f64> = rates.iter().map(|r| 1e4 * r / total).collect();
        let fit = mle_reconstruct(&clean, &exposures, &set, &opts).unwrap();
        worst_clean = worst_clean.min(fit.rho.fidelity(&truth));

        let fids: Vec<f64> = (0..50)
            .map(|seed| {
                let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
                let counts: Vec<f64> = clean
                    .iter()
                    .map(|&m| if m > 0.0 { Poisson::new(m).unwrap().sample(&mut rng) } else { 0.0 })
                    .collect();
                mle_reconstruct(&counts, &exposures, &set, &opts).unwrap().rho.fidelity(&truth)
            })
            .collect();
        let m = median(fids);
        worst_median = worst_median.min(m);
        medians.push(format!("{} {m:.4}", state.label()));
    }
    Report::new(
        worst_grad <= 1e-6 && worst_clean >= 1.0 - 1e-6 && worst_median >= 0.99,
        format!(
            "gradient vs finite differences {worst_grad:.1e} at 20 points (<= 1e-6); noiseless min fidelity {worst_clean:.9} (>= 1-1e-6); N=1e4 median fidelity over 50 seeds {} (>= 0.99)",
            medians.join(", ")
        ),
    )
}

fn criterion_7() -> Report {
    let mut cfg = plates_off();
    cfg.dip.noise = false;
    let dip = run_dip(&cfg).unwrap();
    let formula = dip_visibility(1000.0, 20.0).unwrap();
    Report::new(
        (dip.visibility - 1.0).abs() <= 1e-6 && (dip.raw_visibility - 1.0).abs() <= 1e-6 && formula == 0.98,
        format!(
            "ideal sweep v = {:.9} (fit) and {:.9} (plateau/minimum), 1 +- 1e-6; (C=1000, C_min=20) gives {formula}",
            dip.visibility, dip.raw_visibility
        ),
    )
}

fn criterion_8() -> Report {
    let start = Instant::now();
    let grid = CoordGrid::centered(32, 1.0 / 6.0).unwrap();
    let timing = EventTiming::default();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut counts = vec![0u32; grid.cells()];
    for _ in 0..100_000 {
        counts[rng.random_range(0..grid.cells())] += 1;
    }
    let (c, d) = synthesize_events(&counts, &grid, &timing, 88).unwrap();
    let jitter = timing.jitter_ticks();
    let windows = [jitter, RunConfig::default().window_ticks, timing.max_window_ticks()];
    let mut exact = true;
    for window in windows {
        exact &= extract_coincidences(&c, &d, window, &grid).unwrap() == counts;
    }
    let elapsed = start.elapsed();
    Report::new(
        exact && c.len() == 100_000 && within(elapsed, 10.0),
        format!(
            "1e5 pairs, jitter {jitter} ticks, windows {windows:?}: counts recovered exactly: {exact}, {:.2}s (<= 10s)",
            elapsed.as_secs_f64()
        ),
    )
}

fn main() {
    // `cargo test -- --list` and filters are harness conventions; honour
    // the listing so tooling that enumerates tests still works.
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    let criteria: [(&str, fn() -> Report); 8] = [
        ("derivation oracle equivalence", criterion_1),
        ("bunching and antibunching", criterion_2),
        ("locus theorem", criterion_3),
        ("projection maps", criterion_4),
        ("Bell maps end to end", criterion_5),
        ("MLE quality", criterion_6),
        ("HOM-dip visibility", criterion_7),
        ("event round trip", criterion_8),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let r = run();
        if !r.passed {
            failed += 1;
        }
        println!(
            "criterion {} {} [{name}]: {} ({:.1}s)",
            i + 1,
            if r.passed { "PASS" } else { "FAIL" },
            r.detail,
            start.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}

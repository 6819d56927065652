//! Run configuration and the end-to-end simulation and reconstruction steps
//! shared by the command-line tool and the test suites.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detection::{
    derive_seed, extract_coincidences, marginalize_radial, poisson_sample, synthesize_events, AzimuthalBinning,
    EventRecord, EventTiming, SampledFields, Source,
};
use crate::error::{invalid, Error, Result};
use crate::grid::CoordGrid;
use crate::hom::{interference_visibility, HomDipModel};
use crate::io::CountSlice;
use crate::modes::QPlateParams;
use crate::polarization::Polarization;
use crate::theory;
use crate::tomography::{bell_map, BellMap, BellMapOptions, MleOptions, TomoSet};

/// Seed tags separating the random streams of one run.
const TAG_COUNTS: u64 = 0x100;
const TAG_EVENTS: u64 = 0x200;
const TAG_DIP: u64 = 0x300;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub side: usize,
    /// Beam waists per pixel.
    pub pitch: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            side: 32,
            pitch: 1.0 / 6.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DipConfig {
    /// Path-difference scale of the dip, in the same unit as the sweep.
    pub coherence_length: f64,
    /// Sweep covers `[-span, span]`.
    pub span: f64,
    pub samples: usize,
    /// Mean coincidences per delay far from the dip.
    pub pairs_per_sample: f64,
    /// Draw Poisson counts instead of reporting expected values.
    pub noise: bool,
}

impl Default for DipConfig {
    fn default() -> Self {
        Self {
            coherence_length: 1.0,
            span: 5.0,
            samples: 41,
            pairs_per_sample: 1e4,
            noise: true,
        }
    }
}

/// Everything that determines a run. Unset fields take the defaults below.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub qa: f64,
    pub qb: f64,
    /// Retardations in radians; π is tuned, 2π switches a plate off.
    pub delta_a: f64,
    pub delta_b: f64,
    pub pol_a: Polarization,
    pub pol_b: Polarization,
    pub grid: GridConfig,
    /// Mean pairs reaching the analyzers during each setting.
    pub pairs_per_projection: f64,
    pub seed: u64,
    pub bins: usize,
    /// Route counts through time-tagged events and coincidence matching.
    pub events: bool,
    /// Coincidence window in camera ticks.
    pub window_ticks: u64,
    pub timing: EventTiming,
    pub mask_threshold: f64,
    /// Subset of analyzer labels to simulate; all when unset.
    pub projections: Option<Vec<String>>,
    pub dip: DipConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            qa: 1.0,
            qb: 0.5,
            delta_a: std::f64::consts::PI,
            delta_b: std::f64::consts::PI,
            pol_a: Polarization::H,
            pol_b: Polarization::H,
            grid: GridConfig::default(),
            pairs_per_projection: 2e4,
            seed: 1,
            bins: 24,
            events: true,
            window_ticks: 10,
            timing: EventTiming::default(),
            mask_threshold: 50.0,
            projections: None,
            dip: DipConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.source()?;
        self.coord_grid()?;
        self.binning()?;
        self.timing.validate()?;
        if !(self.pairs_per_projection > 0.0 && self.pairs_per_projection.is_finite()) {
            return Err(invalid(format!(
                "pairs_per_projection must be positive (got {})",
                self.pairs_per_projection
            )));
        }
        if !(self.mask_threshold >= 0.0 && self.mask_threshold.is_finite()) {
            return Err(invalid("mask_threshold must be non-negative"));
        }
        if self.window_ticks == 0 {
            return Err(invalid("window_ticks must be positive"));
        }
        self.selected(&TomoSet::standard())?;
        let d = &self.dip;
        if !(d.coherence_length > 0.0 && d.coherence_length.is_finite()) {
            return Err(invalid("dip.coherence_length must be positive"));
        }
        if !(d.span > 0.0 && d.span.is_finite()) {
            return Err(invalid("dip.span must be positive"));
        }
        if d.samples < 3 {
            return Err(invalid(format!("dip.samples must be at least 3 (got {})", d.samples)));
        }
        if !(d.pairs_per_sample > 0.0 && d.pairs_per_sample.is_finite()) {
            return Err(invalid("dip.pairs_per_sample must be positive"));
        }
        Ok(())
    }

    pub fn source(&self) -> Result<Source> {
        Ok(Source {
            plate_a: QPlateParams::new(self.qa, self.delta_a)?,
            plate_b: QPlateParams::new(self.qb, self.delta_b)?,
            pol_a: self.pol_a.ket(),
            pol_b: self.pol_b.ket(),
        })
    }

    pub fn coord_grid(&self) -> Result<CoordGrid> {
        CoordGrid::centered(self.grid.side, self.grid.pitch)
    }

    pub fn binning(&self) -> Result<AzimuthalBinning> {
        AzimuthalBinning::new(self.bins)
    }

    pub fn window(&self) -> u64 {
        self.window_ticks
    }

    /// Indices into `set` of the settings to simulate.
    pub fn selected(&self, set: &TomoSet) -> Result<Vec<usize>> {
        match &self.projections {
            None => Ok((0..set.len()).collect()),
            Some(labels) => {
                if labels.is_empty() {
                    return Err(invalid("projection subset is empty"));
                }
                let mut out = Vec::with_capacity(labels.len());
                for l in labels {
                    let k = set
                        .position(l)
                        .ok_or_else(|| invalid(format!("unknown projection label {l:?}")))?;
                    if !out.contains(&k) {
                        out.push(k);
                    }
                }
                out.sort_unstable();
                Ok(out)
            }
        }
    }
}

/// Simulated data of one analyzer setting.
#[derive(Debug, Clone)]
pub struct ProjectionRun {
    pub slice: CountSlice,
    /// Port c and port d streams when the event path is enabled.
    pub events: Option<(Vec<EventRecord>, Vec<EventRecord>)>,
    /// Counts drawn before the event path, for round-trip checks.
    pub sampled_total: u64,
}

/// Sampled fields and normalization for one configuration.
pub struct Simulator {
    config: RunConfig,
    set: TomoSet,
    fields: SampledFields,
    norm: f64,
}

impl Simulator {
    pub fn new(config: &RunConfig, set: TomoSet) -> Result<Self> {
        config.validate()?;
        let fields = SampledFields::new(&config.source()?, &config.coord_grid()?)?;
        let norm = fields.coincidence_probability();
        Ok(Self {
            config: config.clone(),
            set,
            fields,
            norm,
        })
    }

    pub fn set(&self) -> &TomoSet {
        &self.set
    }

    /// Probability of a coincidence anywhere on the grid, summed over a
    /// complete analyzer basis.
    pub fn coincidence_probability(&self) -> f64 {
        self.norm
    }

    pub fn fields(&self) -> &SampledFields {
        &self.fields
    }

    /// Expected counts of setting `k` per cell.
    pub fn expected_counts(&self, k: usize) -> Vec<f64> {
        let map = self.fields.probability_map(&self.set.entries()[k].setting);
        if self.norm == 0.0 {
            return vec![0.0; map.len()];
        }
        let scale = self.config.pairs_per_projection / self.norm;
        map.into_iter().map(|p| p * scale).collect()
    }

    pub fn run(&self, k: usize) -> Result<ProjectionRun> {
        let cfg = &self.config;
        let entry = &self.set.entries()[k];
        let grid = *self.fields.grid();
        let map = self.fields.probability_map(&entry.setting);
        let seed = derive_seed(cfg.seed, TAG_COUNTS + k as u64);
        let sampled = poisson_sample(&map, cfg.pairs_per_projection, self.norm, seed)?;
        let sampled_total = sampled.iter().map(|&c| c as u64).sum();
        let (counts, events) = if cfg.events {
            let ev_seed = derive_seed(cfg.seed, TAG_EVENTS + k as u64);
            let (c, d) = synthesize_events(&sampled, &grid, &cfg.timing, ev_seed)?;
            let counts = extract_coincidences(&c, &d, cfg.window(), &grid)?;
            (counts, Some((c, d)))
        } else {
            (sampled, None)
        };
        Ok(ProjectionRun {
            slice: CountSlice {
                label: entry.label.clone(),
                index: k,
                setting: entry.setting,
                grid,
                pairs: cfg.pairs_per_projection,
                seed: cfg.seed,
                counts,
            },
            events,
            sampled_total,
        })
    }

    /// Runs the selected settings in parallel, in set order.
    pub fn run_all(&self) -> Result<Vec<ProjectionRun>> {
        self.config
            .selected(&self.set)?
            .into_par_iter()
            .map(|k| self.run(k))
            .collect()
    }
}

/// Checks that `slices` hold every setting of `set` on one grid and
/// returns them in set order.
pub fn order_slices<'a>(slices: &'a [CountSlice], set: &TomoSet) -> Result<Vec<&'a CountSlice>> {
    if slices.is_empty() {
        return Err(invalid("no count data supplied"));
    }
    let grid = slices[0].grid;
    if let Some(s) = slices.iter().find(|s| s.grid != grid) {
        return Err(invalid(format!("projection {} uses a different grid", s.label)));
    }
    set.entries()
        .iter()
        .map(|e| {
            let mut found = slices.iter().filter(|s| s.label.eq_ignore_ascii_case(&e.label));
            let s = found.next().ok_or_else(|| Error::MissingProjection(e.label.clone()))?;
            if found.next().is_some() {
                return Err(invalid(format!("projection {} supplied twice", e.label)));
            }
            if s.setting != e.setting {
                return Err(invalid(format!("projection {} has unexpected waveplate angles", e.label)));
            }
            Ok(s)
        })
        .collect()
}

/// Radially marginalized counts of each setting, in set order.
pub fn marginal_counts(slices: &[&CountSlice], binning: &AzimuthalBinning) -> Result<Vec<Vec<f64>>> {
    slices
        .par_iter()
        .map(|s| {
            let m: Vec<u64> = marginalize_radial(&s.counts, &s.grid, binning)?;
            Ok(m.into_iter().map(|c| c as f64).collect())
        })
        .collect()
}

/// Marginalizes and reconstructs every bin of a complete data set.
pub fn reconstruct(
    slices: &[CountSlice],
    set: &TomoSet,
    binning: &AzimuthalBinning,
    opts: &BellMapOptions,
) -> Result<BellMap> {
    let ordered = order_slices(slices, set)?;
    let marginals = marginal_counts(&ordered, binning)?;
    let exposures: Vec<f64> = ordered.iter().map(|s| s.pairs).collect();
    bell_map(&marginals, &exposures, set, binning.bins(), opts)
}

/// Analytic per-bin projection probabilities and Bell populations.
pub struct AnalyticMaps {
    pub projections: Vec<Vec<f64>>,
    pub bell: Vec<Option<[f64; 4]>>,
}

pub fn analytic_maps(config: &RunConfig, set: &TomoSet, subsamples: usize) -> Result<AnalyticMaps> {
    let dens = theory::binned_marginal_density(&config.source()?, &config.binning()?, subsamples)?;
    Ok(AnalyticMaps {
        projections: theory::projection_marginals(&dens, set),
        bell: theory::bell_populations(&dens),
    })
}

pub fn bell_map_options(config: &RunConfig) -> BellMapOptions {
    BellMapOptions {
        mask_threshold: config.mask_threshold,
        mle: MleOptions::default(),
    }
}

/// Pearson correlation of two equally long samples.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(invalid("correlation needs two equally long samples of length >= 2"));
    }
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(invalid("correlation undefined for a constant sample"));
    }
    Ok(sab / (saa * sbb).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DipResult {
    pub delays: Vec<f64>,
    pub expected: Vec<f64>,
    pub counts: Vec<f64>,
    /// Depth predicted from the mode overlap.
    pub model_visibility: f64,
    /// `(C - C_min) / C` from a least-squares fit of the dip lineshape.
    pub visibility: f64,
    /// `(C - C_min) / C` from the plateau mean and the lowest sample.
    pub raw_visibility: f64,
}

/// Sweeps the path difference and reports the dip and its visibility.
pub fn run_dip(config: &RunConfig) -> Result<DipResult> {
    config.validate()?;
    let d = &config.dip;
    let src = config.source()?;
    let model_v = interference_visibility(&src.plate_a, &src.plate_b, &src.pol_a, &src.pol_b, &config.coord_grid()?)?
    .clamp(0.0, 1.0);
    let model = HomDipModel::new(d.coherence_length, d.pairs_per_sample, model_v)?;
    let delays: Vec<f64> = (0..d.samples)
        .map(|i| -d.span + 2.0 * d.span * i as f64 / (d.samples - 1) as f64)
        .collect();
    let expected = model.curve(&delays);
    let counts = if d.noise {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, TAG_DIP));
        expected
            .iter()
            .map(|&m| if m > 0.0 { Poisson::new(m).expect("positive mean").sample(&mut rng) } else { 0.0 })
            .collect()
    } else {
        expected.clone()
    };
    let raw = crate::hom::visibility(&delays, &counts, d.coherence_length)?;
    let (_, v) = fit_dip(&delays, &counts, d.coherence_length)?;
    Ok(DipResult {
        delays,
        expected,
        counts,
        model_visibility: model_v,
        visibility: v,
        raw_visibility: raw,
    })
}

/// Linear least-squares fit of `base (1 - V g(x))`, `g = exp(-(x/L)²)`;
/// returns `(base, V)`.
pub fn fit_dip(delays: &[f64], counts: &[f64], coherence_length: f64) -> Result<(f64, f64)> {
    if delays.len() != counts.len() || delays.len() < 3 {
        return Err(invalid("dip fit needs at least 3 matching samples"));
    }
    // counts = p0 + p1 g with p0 = base, p1 = -base V
    let g: Vec<f64> = delays
        .iter()
        .map(|x| (-(x / coherence_length).powi(2)).exp())
        .collect();
    let n = g.len() as f64;
    let (sg, sgg) = (g.iter().sum::<f64>(), g.iter().map(|v| v * v).sum::<f64>());
    let (sy, sgy) = (counts.iter().sum::<f64>(), g.iter().zip(counts).map(|(a, b)| a * b).sum::<f64>());
    let det = n * sgg - sg * sg;
    if det.abs() < 1e-12 {
        return Err(invalid("delay sweep does not resolve the dip"));
    }
    let p0 = (sgg * sy - sg * sgy) / det;
    let p1 = (n * sgy - sg * sy) / det;
    if !(p0 > 0.0) {
        return Err(invalid("fitted baseline is not positive"));
    }
    Ok((p0, -p1 / p0))
}

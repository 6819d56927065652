use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::json;

use hom_core::io::{read_counts, write_counts, write_events, write_reconstruction_binary, write_reconstruction_csv};
use hom_core::pipeline::{bell_map_options, reconstruct, run_dip, RunConfig, Simulator};
use hom_core::{scan_unique_loci, unique_locus_analysis, BellState, CountSlice, TomoSet};

use crate::args::{LocusArgs, RunArgs, TomoArgs};
use crate::render;

/// Marks an argument or configuration problem (exit status 2).
#[derive(Debug)]
pub struct Invalid(pub String);

impl std::fmt::Display for Invalid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Invalid {}

/// Marks absent input data (exit status 3).
#[derive(Debug)]
pub struct Missing(pub String);

impl std::fmt::Display for Missing {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Missing {}

pub enum Outcome {
    Clean,
    /// Outputs were written but this many fits stopped early.
    Unconverged(usize),
}

const MANIFEST: &str = "manifest.json";

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    let Some(path) = path else {
        return Ok(RunConfig::default());
    };
    let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let cfg: RunConfig = toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
    Ok(cfg)
}

fn apply_overrides(mut cfg: RunConfig, args: &RunArgs) -> RunConfig {
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(b) = args.bins {
        cfg.bins = b;
    }
    if let Some(w) = args.window_ticks {
        cfg.window_ticks = w;
    }
    if let Some(p) = &args.projections {
        cfg.projections = Some(p.clone());
    }
    cfg
}

fn effective_config(args: &RunArgs) -> Result<RunConfig> {
    let cfg = apply_overrides(load_config(args.config.as_deref())?, args);
    cfg.validate()?;
    Ok(cfg)
}

fn create_file(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut w = create_file(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))
}

fn versions() -> serde_json::Value {
    json!({ "hom-cli": env!("CARGO_PKG_VERSION"), "hom-core": hom_core::VERSION, "format": hom_core::io::FORMAT_VERSION })
}

pub fn config(args: &RunArgs) -> Result<Outcome> {
    let cfg = effective_config(args)?;
    print!("{}", toml::to_string(&cfg)?);
    Ok(Outcome::Clean)
}

pub fn simulate(args: &RunArgs) -> Result<Outcome> {
    let cfg = effective_config(args)?;
    let set = TomoSet::standard();
    let sim = Simulator::new(&cfg, set.clone())?;
    let runs = sim.run_all()?;

    let counts_dir = args.out.join("counts");
    ensure_dir(&counts_dir)?;
    let events_dir = args.out.join("events");
    if cfg.events {
        ensure_dir(&events_dir)?;
    }
    let mut settings = Vec::with_capacity(runs.len());
    for run in &runs {
        let s = &run.slice;
        let count_file = format!("counts/{}.homc", s.label);
        let mut w = create_file(&args.out.join(&count_file))?;
        write_counts(&mut w, s)?;
        w.flush()?;
        let event_file = match &run.events {
            Some((c, d)) => {
                let name = format!("events/{}.evt", s.label);
                let mut w = create_file(&args.out.join(&name))?;
                write_events(&mut w, cfg.timing.tick_ns, c, d)?;
                w.flush()?;
                Some(name)
            }
            None => None,
        };
        settings.push(json!({
            "index": s.index,
            "label": s.label,
            "setting": s.setting,
            "counts_file": count_file,
            "events_file": event_file,
            "total_counts": s.total(),
            "sampled_pairs": run.sampled_total,
        }));
    }
    let manifest = json!({
        "command": "simulate",
        "versions": versions(),
        "seed": cfg.seed,
        "config": cfg,
        "coincidence_probability": sim.coincidence_probability(),
        "window_ticks": cfg.window(),
        "settings": settings,
    });
    write_json(&args.out.join(MANIFEST), &manifest)?;
    println!(
        "wrote {} projection(s) to {} (coincidence probability {:.6})",
        runs.len(),
        args.out.display(),
        sim.coincidence_probability()
    );
    Ok(Outcome::Clean)
}

fn manifest_config(input: &Path) -> Result<Option<RunConfig>> {
    let path = input.join(MANIFEST);
    if !path.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    let cfg = value
        .get("config")
        .ok_or_else(|| Invalid(format!("{} has no config section", path.display())))?;
    Ok(Some(serde_json::from_value(cfg.clone())?))
}

fn read_slices(input: &Path) -> Result<Vec<CountSlice>> {
    if !input.is_dir() {
        return Err(Missing(format!("input directory {} does not exist", input.display())).into());
    }
    let dir = if input.join("counts").is_dir() { input.join("counts") } else { input.to_path_buf() };
    let mut paths: Vec<PathBuf> = fs::read_dir(&dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "homc"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Missing(format!("no .homc count files in {}", dir.display())).into());
    }
    paths
        .iter()
        .map(|p| {
            let mut r = BufReader::new(File::open(p).with_context(|| format!("opening {}", p.display()))?);
            read_counts(&mut r).with_context(|| format!("reading {}", p.display()))
        })
        .collect()
}

pub fn tomo(args: &TomoArgs) -> Result<Outcome> {
    let base = match &args.run.config {
        Some(p) => load_config(Some(p))?,
        None => manifest_config(&args.input)?.unwrap_or_default(),
    };
    let cfg = apply_overrides(base, &args.run);
    cfg.validate()?;
    let set = TomoSet::standard();
    let binning = cfg.binning()?;
    let slices = read_slices(&args.input)?;
    let map = reconstruct(&slices, &set, &binning, &bell_map_options(&cfg))?;

    let out = &args.run.out;
    ensure_dir(out)?;
    let mut w = create_file(&out.join("reconstruction.csv"))?;
    write_reconstruction_csv(&mut w, &map)?;
    w.flush()?;
    let mut w = create_file(&out.join("reconstruction.bin"))?;
    write_reconstruction_binary(&mut w, &map)?;
    w.flush()?;
    let mut images = Vec::new();
    for state in BellState::ALL {
        let pop = map.population(state.index());
        let stem = format!("bell_{}", state.slug());
        let mut w = create_file(&out.join(format!("{stem}.csv")))?;
        render::write_map_csv(&mut w, &pop, map.bins)?;
        w.flush()?;
        render::gray_image(&pop, map.bins)
            .save(out.join(format!("{stem}.png")))
            .with_context(|| format!("writing {stem}.png"))?;
        images.push(json!({ "state": state.label(), "png": format!("{stem}.png"), "csv": format!("{stem}.csv") }));
    }
    write_json(&out.join("bell_maps_scale.json"), &render::scale_description(&binning, images))?;

    let unconverged = map.unconverged();
    let manifest = json!({
        "command": "tomo",
        "versions": versions(),
        "input": args.input,
        "seed": cfg.seed,
        "config": cfg,
        "settings": set.labels(),
        "bins": map.bins,
        "masked_bins": map.masked(),
        "unconverged_bins": unconverged,
    });
    write_json(&out.join(MANIFEST), &manifest)?;
    println!(
        "reconstructed {}x{} bins ({} masked, {} unconverged) into {}",
        map.bins,
        map.bins,
        map.masked(),
        unconverged,
        out.display()
    );
    Ok(if unconverged > 0 { Outcome::Unconverged(unconverged) } else { Outcome::Clean })
}

pub fn locus(args: &LocusArgs) -> Result<Outcome> {
    let report = unique_locus_analysis(args.qa, args.qb, args.n_max)?;
    let scan = match args.verify {
        Some(n) => Some(scan_unique_loci(args.qa, args.qb, n)?),
        None => None,
    };
    let agrees = scan.as_ref().map(|s| s.attainable == report.attainable());
    if args.json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        println!("charges qa = {}, qb = {}", args.qa, args.qb);
        println!("{:<6} {:<11} {}", "state", "attainable", "unique loci");
        for l in &report.states {
            let loci = if l.attainable { l.describe().join("; ") } else { format!("none ({})", l.constraint) };
            println!("{:<6} {:<11} {}", l.state.label(), if l.attainable { "yes" } else { "no" }, loci);
        }
        println!("all four attainable: {}", if report.all_four() { "yes" } else { "no" });
        if let (Some(s), Some(ok)) = (&scan, agrees) {
            println!(
                "grid check ({0}x{0}): {1}",
                s.samples,
                if ok { "agrees" } else { "DISAGREES" }
            );
        }
    }
    if let Some(out) = &args.out {
        ensure_dir(out)?;
        write_json(&out.join("locus.json"), &report)?;
        let manifest = json!({
            "command": "locus",
            "versions": versions(),
            "qa": args.qa,
            "qb": args.qb,
            "n_max": args.n_max,
            "grid_check": scan.as_ref().map(|s| json!({ "samples": s.samples, "attainable": s.attainable, "agrees": agrees })),
        });
        write_json(&out.join(MANIFEST), &manifest)?;
    }
    if agrees == Some(false) {
        anyhow::bail!("congruence solver and grid scan disagree");
    }
    Ok(Outcome::Clean)
}

pub fn dip(args: &RunArgs) -> Result<Outcome> {
    let cfg = effective_config(args)?;
    let result = run_dip(&cfg)?;
    let out = &args.out;
    ensure_dir(out)?;
    let mut w = create_file(&out.join("dip.csv"))?;
    writeln!(w, "delta_l,expected,counts")?;
    for ((x, e), c) in result.delays.iter().zip(&result.expected).zip(&result.counts) {
        writeln!(w, "{x},{e},{c}")?;
    }
    w.flush()?;
    let summary = json!({
        "visibility": result.visibility,
        "raw_visibility": result.raw_visibility,
        "model_visibility": result.model_visibility,
    });
    write_json(&out.join("visibility.json"), &summary)?;
    let manifest = json!({
        "command": "dip",
        "versions": versions(),
        "seed": cfg.seed,
        "config": cfg,
    });
    write_json(&out.join(MANIFEST), &manifest)?;
    println!(
        "v = {:.6} (raw {:.6}, model {:.6})",
        result.visibility, result.raw_visibility, result.model_visibility
    );
    Ok(Outcome::Clean)
}

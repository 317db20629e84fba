//! The `align` command line.

use std::path::{Path, PathBuf};

use brainalign_core::datamodel::{read_accuracy_map, read_rois};
use brainalign_core::featprep::NormMode;
use brainalign_core::ridge::LambdaGrid;
use brainalign_core::stats::{
    fdp_threshold, pair_probe_rows, paired_test_bh, read_probe_csv, region_summary, shared_accuracy, Selection,
};
use brainalign_core::{Error, Result};
use clap::{Args, Parser, Subcommand};

use crate::config::{parse_delays, RunConfig};
use crate::report::{
    compare_context_vs_word, read_significance_mask, sweep_report, write_comparison, write_region_summary,
    write_shared, write_significance, SweepSpec,
};
use crate::run::run_pipeline;
use crate::synth::{synth_generate, synth_meg, write_synth, GraphKind, SynthParams};

#[derive(Debug, Parser)]
#[command(name = "align", version, about = "Align language-model features with brain recordings")]
pub struct Cli {
    /// Worker threads for parallel stages (default: all cores). Results do
    /// not depend on this.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset with planted signal.
    Synth(SynthArgs),
    /// Fit, classify and threshold one feature set against one recording.
    Run(RunArgs),
    /// Recompute the FDP threshold of an accuracy map.
    Significance(SignificanceArgs),
    /// Shared accuracy of two feature sets given their union.
    Shared(SharedArgs),
    /// Per-ROI fractions across subjects.
    Report(ReportArgs),
    /// Layer × context sweep curves.
    Sweep(SweepArgs),
    /// Partition voxels by long-context vs word-level significance.
    Compare(CompareArgs),
    /// Paired per-task comparison of probe outcomes with BH correction.
    Paired(PairedArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SynthModality {
    Fmri,
    Meg,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "fmri")]
    pub modality: SynthModality,
    #[arg(long, default_value_t = 1200)]
    pub n_trs: usize,
    #[arg(long, default_value_t = 2000)]
    pub n_voxels: usize,
    /// Word feature dimension.
    #[arg(long, default_value_t = 50)]
    pub d: usize,
    #[arg(long, default_value_t = 0.3)]
    pub frac_signal: f64,
    /// Signal-to-noise variance ratio; `inf` for noise-free signal.
    #[arg(long, default_value_t = 1.0)]
    pub snr: f64,
    #[arg(long, value_enum, default_value = "lattice")]
    pub graph: GraphKind,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// MEG: number of words.
    #[arg(long, default_value_t = 400)]
    pub n_words: usize,
    /// MEG: sensor locations (3 sensors each).
    #[arg(long, default_value_t = 102)]
    pub n_locations: usize,
    /// MEG: time bins per word.
    #[arg(long, default_value_t = 20)]
    pub n_bins: usize,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// JSON run configuration; flags below override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub features: Option<PathBuf>,
    #[arg(long)]
    pub brain: Option<PathBuf>,
    #[arg(long)]
    pub adjacency: Option<PathBuf>,
    #[arg(long)]
    pub rois: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Comma-separated TR delays.
    #[arg(long)]
    pub delays: Option<String>,
    /// Outer cross-validation folds.
    #[arg(long = "folds", alias = "outer-folds")]
    pub outer_folds: Option<usize>,
    #[arg(long)]
    pub nested_folds: Option<usize>,
    /// `lo:hi:Nlog`, `lo:hi:Nlin` or a comma-separated list.
    #[arg(long)]
    pub lambda_grid: Option<String>,
    #[arg(long)]
    pub chunk_len: Option<usize>,
    #[arg(long)]
    pub repeats: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Allow distractor chunks to overlap the true chunk.
    #[arg(long)]
    pub overlapping_distractors: bool,
    /// `independent` or `train-stats`.
    #[arg(long)]
    pub norm: Option<String>,
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub save_weights: bool,
}

impl RunArgs {
    pub fn to_config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => {
                let need = |v: &Option<PathBuf>, name: &str| {
                    v.clone()
                        .ok_or_else(|| Error::Config(format!("--{name} is required without --config")))
                };
                RunConfig::with_paths(need(&self.features, "features")?, need(&self.brain, "brain")?, need(&self.out, "out")?)
            }
        };
        if let Some(v) = &self.features {
            cfg.features = v.clone();
        }
        if let Some(v) = &self.brain {
            cfg.brain = v.clone();
        }
        if let Some(v) = &self.out {
            cfg.out = v.clone();
        }
        if self.adjacency.is_some() {
            cfg.adjacency = self.adjacency.clone();
        }
        if self.rois.is_some() {
            cfg.rois = self.rois.clone();
        }
        if let Some(v) = &self.delays {
            cfg.delays = parse_delays(v)?;
        }
        if let Some(v) = self.outer_folds {
            cfg.folds.n_outer = v;
        }
        if let Some(v) = self.nested_folds {
            cfg.folds.n_nested = v;
        }
        if let Some(v) = &self.lambda_grid {
            cfg.lambda_grid = LambdaGrid::parse(v)?;
        }
        if let Some(v) = self.chunk_len {
            cfg.classifier.chunk_len = v;
        }
        if let Some(v) = self.repeats {
            cfg.classifier.n_repeats = v;
        }
        if let Some(v) = self.seed {
            cfg.classifier.seed = v;
        }
        if self.overlapping_distractors {
            cfg.classifier.disjoint_distractors = false;
        }
        if let Some(v) = &self.norm {
            cfg.norm = v.parse::<NormMode>()?;
        }
        if let Some(v) = self.q {
            cfg.q = v;
        }
        if let Some(v) = self.threshold {
            cfg.threshold = v;
        }
        if self.save_weights {
            cfg.save_weights = true;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct SignificanceArgs {
    #[arg(long)]
    pub accuracy: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    pub q: f64,
    /// Directory receiving `significance.json` and `fdp_trace.csv`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SharedArgs {
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
    #[arg(long)]
    pub union: PathBuf,
    /// Output CSV.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// `ACCURACY,ROIS` or `ACCURACY,ROIS,SIGNIFICANCE_JSON`, once per subject.
    #[arg(long = "subject", required = true)]
    pub subjects: Vec<String>,
    /// Count significant voxels instead of voxels above `--threshold`;
    /// every subject then needs a significance file.
    #[arg(long)]
    pub significant: bool,
    #[arg(long, default_value_t = 0.7)]
    pub threshold: f64,
    /// Output CSV.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// JSON sweep specification.
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// `significance.json` of the long-context run.
    #[arg(long)]
    pub long: PathBuf,
    /// `significance.json` of the word-level run.
    #[arg(long)]
    pub word: PathBuf,
    #[arg(long)]
    pub rois: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PairedArgs {
    /// Probe outcomes of the variant model.
    #[arg(long)]
    pub variant: PathBuf,
    /// Probe outcomes of the base model.
    #[arg(long)]
    pub base: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.05)]
    pub q: f64,
    /// Output CSV.
    #[arg(long)]
    pub out: PathBuf,
}

/// Runs `cli`, inside a pool of `--workers` threads when given.
pub fn execute(cli: Cli) -> Result<()> {
    match cli.workers {
        Some(0) => Err(Error::Config("--workers must be positive".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("cannot start {n} workers: {e}")))?
            .install(|| dispatch(cli.command)),
        None => dispatch(cli.command),
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Synth(a) => synth(&a),
        Command::Run(a) => {
            let s = run_pipeline(&a.to_config()?)?;
            println!(
                "{}: {} outputs, {} significant (config {})",
                s.out.display(),
                s.accuracy.len(),
                s.significance.n_rejected(),
                s.config_hash
            );
            Ok(())
        }
        Command::Significance(a) => {
            let acc = read_accuracy_map(&a.accuracy)?;
            let r = fdp_threshold(&acc, a.q)?;
            mkdir(&a.out)?;
            write_significance(&a.out, None, &r)?;
            println!("{} of {} significant", r.n_rejected(), r.rejected.len());
            Ok(())
        }
        Command::Shared(a) => {
            let (ma, mb, mu) = (read_accuracy_map(&a.a)?, read_accuracy_map(&a.b)?, read_accuracy_map(&a.union)?);
            let shared = shared_accuracy(&ma, &mb, &mu)?;
            write_shared(&a.out, ma.as_slice(), mb.as_slice(), mu.as_slice(), &shared)
        }
        Command::Report(a) => report(&a),
        Command::Sweep(a) => {
            let text = std::fs::read_to_string(&a.spec).map_err(|e| Error::io(&a.spec, e))?;
            let spec: SweepSpec =
                serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", a.spec.display())))?;
            let curves = sweep_report(&spec, &a.out)?;
            println!("{} sweep points written to {}", curves.len(), a.out.display());
            Ok(())
        }
        Command::Compare(a) => {
            let long = read_significance_mask(&a.long)?;
            let word = read_significance_mask(&a.word)?;
            let rois = a.rois.as_deref().map(read_rois).transpose()?;
            let c = compare_context_vs_word(&long, &word, rois.as_ref())?;
            write_comparison(&a.out, &c)
        }
        Command::Paired(a) => {
            let tasks = pair_probe_rows(&read_probe_csv(&a.variant)?, &read_probe_csv(&a.base)?)?;
            let rows = paired_test_bh(&tasks, a.alpha, a.q)?;
            let mut w = csv::Writer::from_path(&a.out).map_err(|e| Error::Data(format!("{}: {e}", a.out.display())))?;
            for r in &rows {
                w.serialize(r).map_err(|e| Error::Data(format!("{}: {e}", a.out.display())))?;
            }
            w.flush().map_err(|e| Error::io(&a.out, e))
        }
    }
}

fn mkdir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn synth(a: &SynthArgs) -> Result<()> {
    let paths = match a.modality {
        SynthModality::Fmri => {
            let mut p = SynthParams::new(a.n_trs, a.n_voxels, a.d, a.frac_signal, a.snr, a.seed);
            p.graph = a.graph;
            let d = synth_generate(&p)?;
            write_synth(&a.out, &d.features, &d.brain, Some(&d.graph), &d.planted)?
        }
        SynthModality::Meg => {
            let (f, b, planted) = synth_meg(a.n_words, a.n_locations, a.n_bins, a.d, a.frac_signal, a.snr, a.seed)?;
            write_synth(&a.out, &f, &b, None, &planted)?
        }
    };
    println!("wrote {} and {}", paths.features.display(), paths.brain.display());
    Ok(())
}

fn report(a: &ReportArgs) -> Result<()> {
    let mut loaded = Vec::with_capacity(a.subjects.len());
    for s in &a.subjects {
        let parts: Vec<&str> = s.split(',').collect();
        let (acc, rois, sig) = match parts.as_slice() {
            [acc, rois] => (acc, rois, None),
            [acc, rois, sig] => (acc, rois, Some(*sig)),
            _ => return Err(Error::Config(format!("bad --subject {s:?}"))),
        };
        let acc = read_accuracy_map(Path::new(acc))?.as_slice().to_vec();
        let rois = read_rois(Path::new(rois))?;
        let mask = match (a.significant, sig) {
            (true, Some(p)) => Some(read_significance_mask(Path::new(p))?),
            (true, None) => return Err(Error::Config(format!("--subject {s:?} lacks a significance file"))),
            (false, _) => None,
        };
        loaded.push((acc, rois, mask));
    }
    let subjects: Vec<(Selection<'_>, _)> = loaded
        .iter()
        .map(|(acc, rois, mask)| {
            let sel = match mask {
                Some(m) => Selection::Mask(m),
                None => Selection::Accuracy(acc),
            };
            (sel, rois)
        })
        .collect();
    let rows = region_summary(&subjects, a.threshold)?;
    write_region_summary(&a.out, &rows)
}

/// Parses the process arguments, runs, and returns the exit code.
pub fn main_exit_code() -> i32 {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            let mut msg = format!("error: {e}");
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                msg.push_str(&format!("\n  caused by: {s}"));
                src = s.source();
            }
            eprintln!("{msg}");
            e.exit_code()
        }
    }
}

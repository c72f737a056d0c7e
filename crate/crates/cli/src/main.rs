//! `xtal`: structure matching, benchmark metrics and dataset curation.

mod input;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use xtal_core::dedup::{deduplicate, uniqueness_curve, BoundaryParam, DedupConfig, DedupError, DedupThresholds};
use xtal_core::io::report::{
    curves_csv, read_boundaries_csv, sweep_csv, write_report, write_split_files, BoundaryCsvWriter, ClustersReport,
    ReportFormat,
};
use xtal_core::io::write_records;
use xtal_core::metrics::{k_match_rate, metre, standard_match_rate, tolerance_sweep, MetreReport, ToleranceGrid};
use xtal_core::splits::{split, Direction, SplitManifest, SplitMode, SplitSpec};
use xtal_core::{match_structures, synth_equivalent_cell, MatchOptions, MatchTolerances, SynthOptions};

use input::{grid, load_one, load_structures, non_negative, positive, ratios, Grid};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_INTERNAL: u8 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "xtal",
    version,
    about = "Periodic crystal-structure matching and benchmark tools"
)]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct TolArgs {
    #[arg(long, default_value_t = MatchTolerances::LOOSE.ltol, value_parser = positive)]
    ltol: f64,
    #[arg(long, default_value_t = MatchTolerances::LOOSE.stol, value_parser = positive)]
    stol: f64,
    #[arg(long = "angle-tol", default_value_t = MatchTolerances::LOOSE.angle_tol, value_parser = positive)]
    angle_tol: f64,
}

impl TolArgs {
    fn tolerances(&self) -> MatchTolerances {
        MatchTolerances {
            ltol: self.ltol,
            stol: self.stol,
            angle_tol: self.angle_tol,
        }
    }
}

#[derive(Args, Debug, Clone)]
struct MatchArgs {
    /// Disallow improper lattice maps (mirror images do not match).
    #[arg(long)]
    proper_only: bool,
    /// Tolerance of the primitive-cell search, fractional units.
    #[arg(long, default_value_t = xtal_core::primitive::DEFAULT_SYMPREC, value_parser = positive)]
    symprec: f64,
}

impl MatchArgs {
    fn options(&self) -> MatchOptions {
        MatchOptions {
            allow_improper: !self.proper_only,
            symprec: self.symprec,
            ..MatchOptions::default()
        }
    }
}

#[derive(Args, Debug, Clone)]
struct MetricArgs {
    #[arg(long = "gen")]
    gen: PathBuf,
    #[arg(long = "ref")]
    reference: PathBuf,
    /// Report file (.json or .csv). Without it the JSON report goes to stdout.
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[command(flatten)]
    tol: TolArgs,
    #[command(flatten)]
    matching: MatchArgs,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Random,
    Polymorph,
    PolymorphStratified,
    NOrdered,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum DirectionArg {
    LowToHigh,
    HighToLow,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ParamArg {
    Stol,
    Ltol,
    AngleTol,
    All,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compare two structures; prints one JSON line.
    Match {
        a: PathBuf,
        b: PathBuf,
        #[command(flatten)]
        tol: TolArgs,
        #[command(flatten)]
        matching: MatchArgs,
    },
    /// Match everyone to reference.
    Metre(MetricArgs),
    /// One-to-one match rate between gen[i] and ref[i].
    MatchRate(MetricArgs),
    /// k candidates per reference; gen holds k consecutive records per reference.
    KMatch {
        #[command(flatten)]
        metric: MetricArgs,
        #[arg(long)]
        k: usize,
    },
    /// Remove duplicates using per-tolerance match boundaries.
    Dedup {
        data: PathBuf,
        #[arg(long, default_value_t = DedupThresholds::default().t_stol, value_parser = non_negative)]
        stol_thresh: f64,
        #[arg(long, default_value_t = DedupThresholds::default().t_ltol, value_parser = non_negative)]
        ltol_thresh: f64,
        #[arg(long, default_value_t = DedupThresholds::default().t_angle, value_parser = non_negative)]
        angle_thresh: f64,
        /// Bracket width of the boundary search.
        #[arg(long, default_value_t = xtal_core::dedup::DEFAULT_THRESH, value_parser = positive)]
        thresh: f64,
        /// Keep enantiomorph pairs apart.
        #[arg(long)]
        enantiomorphs: bool,
        /// Write every pair boundary to this CSV.
        #[arg(long)]
        boundaries: Option<PathBuf>,
        /// Deduplicated dataset (JSONL).
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Cluster report (JSON).
        #[arg(long)]
        clusters: Option<PathBuf>,
        #[command(flatten)]
        matching: MatchArgs,
    },
    /// Fraction of unique structures vs tolerance from a boundary CSV.
    #[command(group = clap::ArgGroup::new("count").required(true).args(["n_structures", "data"]))]
    Curves {
        #[arg(long)]
        boundaries: PathBuf,
        /// start:stop:step, a comma list or a single value.
        #[arg(long, value_parser = grid)]
        grid: Grid,
        #[arg(long, value_enum, default_value = "all")]
        param: ParamArg,
        #[arg(long)]
        n_structures: Option<usize>,
        /// Dataset whose size is used as the structure count.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Train/val/test split.
    Split {
        data: PathBuf,
        #[arg(long, value_enum, default_value = "random")]
        mode: ModeArg,
        #[arg(long, value_enum, default_value = "low-to-high")]
        direction: DirectionArg,
        #[arg(long, default_value = "60,20,20", value_parser = ratios)]
        ratios: [f64; 3],
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output prefix: writes <prefix>.{train,val,test}.jsonl and <prefix>.manifest.json.
        #[arg(short, long)]
        output: PathBuf,
    },
    /// METRe over a grid of tolerances (CSV).
    Sweep {
        #[arg(long = "gen")]
        gen: PathBuf,
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long, value_parser = grid, default_value = "0.5")]
        stol: Grid,
        #[arg(long, value_parser = grid, default_value = "0.3")]
        ltol: Grid,
        #[arg(long, value_parser = grid, default_value = "10")]
        angle: Grid,
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        matching: MatchArgs,
    },
    /// Random equivalent cells of a structure (JSONL).
    Synth {
        base: PathBuf,
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        proper_only: bool,
        /// Gaussian displacement per Cartesian component, Å.
        #[arg(long, default_value_t = 0.0, value_parser = non_negative)]
        noise: f64,
        #[arg(long, default_value_t = 1)]
        supercell_max: usize,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn write_text(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn emit_report(report: &MetreReport, output: Option<&Path>) -> Result<()> {
    match output {
        Some(p) => {
            write_text(Some(p), &write_report(report, ReportFormat::from_path(p)))?;
            println!("{}", report.summary_line());
        }
        None => {
            print!("{}", write_report(report, ReportFormat::Json));
            eprintln!("{}", report.summary_line());
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct MatchLine {
    matched: bool,
    rmse: Option<f64>,
    max_dist: Option<f64>,
    proper: Option<bool>,
}

#[derive(Serialize)]
struct DedupSummary {
    n_structures: usize,
    n_unique: usize,
    n_clusters: usize,
    n_duplicate_pairs: usize,
    n_pairs_evaluated: usize,
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Match { a, b, tol, matching } => {
            let (s1, s2) = (load_one(&a)?, load_one(&b)?);
            let r = match_structures(&s1, &s2, &tol.tolerances(), &matching.options());
            let line = MatchLine {
                matched: r.is_some(),
                rmse: r.as_ref().map(|m| m.rmse),
                max_dist: r.as_ref().map(|m| m.max_dist),
                proper: r.as_ref().map(|m| m.proper),
            };
            println!("{}", serde_json::to_string(&line)?);
        }
        Command::Metre(m) => {
            let (gen, reference) = (load_structures(&m.gen)?, load_structures(&m.reference)?);
            let r = metre(&gen, &reference, &m.tol.tolerances(), &m.matching.options())?;
            emit_report(&r, m.output.as_deref())?;
        }
        Command::MatchRate(m) => {
            let (gen, reference) = (load_structures(&m.gen)?, load_structures(&m.reference)?);
            let r = standard_match_rate(&gen, &reference, &m.tol.tolerances(), &m.matching.options())?;
            emit_report(&r, m.output.as_deref())?;
        }
        Command::KMatch { metric: m, k } => {
            if k == 0 {
                bail!("--k must be at least 1");
            }
            let (gen, reference) = (load_structures(&m.gen)?, load_structures(&m.reference)?);
            if gen.len() != k * reference.len() {
                bail!(
                    "expected {} generated records ({} references x k={}), found {}",
                    k * reference.len(),
                    reference.len(),
                    k,
                    gen.len()
                );
            }
            let groups: Vec<Vec<_>> = gen.chunks(k).map(|c| c.to_vec()).collect();
            let r = k_match_rate(&groups, &reference, k, &m.tol.tolerances(), &m.matching.options())?;
            emit_report(&r, m.output.as_deref())?;
        }
        Command::Dedup {
            data,
            stol_thresh,
            ltol_thresh,
            angle_thresh,
            thresh,
            enantiomorphs,
            boundaries,
            output,
            clusters,
            matching,
        } => {
            let dataset = load_structures(&data)?;
            let thresholds = DedupThresholds {
                t_stol: stol_thresh,
                t_ltol: ltol_thresh,
                t_angle: angle_thresh,
            };
            let cfg = DedupConfig {
                thresholds,
                thresh,
                enantiomorphs,
                opts: matching.options(),
            };
            let mut csv = boundaries
                .as_deref()
                .map(|p| create(p).and_then(|w| Ok(BoundaryCsvWriter::new(w)?)))
                .transpose()?;
            let outcome = deduplicate(&dataset, &cfg, |r| match csv.as_mut() {
                Some(w) => w.write(r).map_err(|e| DedupError::Sink(e.to_string())),
                None => Ok(()),
            })?;
            if let Some(w) = csv {
                w.finish()?;
            }
            if let Some(p) = output.as_deref() {
                write_records(create(p)?, &outcome.unique)?;
            }
            if let Some(p) = clusters.as_deref() {
                let report = ClustersReport {
                    clusters: outcome.clusters.clone(),
                    thresholds,
                    enantiomorph_pairs: enantiomorphs.then(|| outcome.enantiomorph_checks.clone()),
                };
                write_text(Some(p), &(serde_json::to_string_pretty(&report)? + "\n"))?;
            }
            let summary = DedupSummary {
                n_structures: dataset.len(),
                n_unique: outcome.unique.len(),
                n_clusters: outcome.clusters.len(),
                n_duplicate_pairs: outcome.pairs.len(),
                n_pairs_evaluated: outcome.n_records,
            };
            println!("{}", serde_json::to_string(&summary)?);
        }
        Command::Curves {
            boundaries,
            grid,
            param,
            n_structures,
            data,
            output,
        } => {
            let file = File::open(&boundaries).with_context(|| format!("opening {}", boundaries.display()))?;
            let records = read_boundaries_csv(file).with_context(|| format!("reading {}", boundaries.display()))?;
            let n = match (n_structures, data) {
                (Some(n), _) => n,
                (None, Some(d)) => load_structures(&d)?.len(),
                (None, None) => unreachable!("clap requires one of the two"),
            };
            let params: Vec<BoundaryParam> = match param {
                ParamArg::Stol => vec![BoundaryParam::Stol],
                ParamArg::Ltol => vec![BoundaryParam::Ltol],
                ParamArg::AngleTol => vec![BoundaryParam::AngleTol],
                ParamArg::All => BoundaryParam::ALL.to_vec(),
            };
            let grid = grid.0;
            let rows: Vec<_> = params
                .into_iter()
                .flat_map(|p| uniqueness_curve(&records, n, p, &grid))
                .collect();
            write_text(output.as_deref(), &curves_csv(&rows))?;
        }
        Command::Split {
            data,
            mode,
            direction,
            ratios,
            seed,
            output,
        } => {
            let dataset = load_structures(&data)?;
            let spec = SplitSpec {
                ratios,
                seed,
                mode: match mode {
                    ModeArg::Random => SplitMode::Random,
                    ModeArg::Polymorph => SplitMode::Polymorph,
                    ModeArg::PolymorphStratified => SplitMode::PolymorphStratified,
                    ModeArg::NOrdered => SplitMode::NOrdered,
                },
                direction: match direction {
                    DirectionArg::LowToHigh => Direction::LowToHigh,
                    DirectionArg::HighToLow => Direction::HighToLow,
                },
            };
            let assignment = split(&dataset, &spec)?;
            for w in &assignment.warnings {
                log::warn!("{w}");
            }
            let manifest = SplitManifest::new(&dataset, &spec, &assignment);
            write_split_files(&output, &dataset, &assignment, &manifest)?;
            let [tr, va, te] = assignment.sizes();
            println!("train={tr} val={va} test={te}");
        }
        Command::Sweep {
            gen,
            reference,
            stol,
            ltol,
            angle,
            output,
            matching,
        } => {
            let (g, r) = (load_structures(&gen)?, load_structures(&reference)?);
            let grid = ToleranceGrid {
                ltol: ltol.0,
                stol: stol.0,
                angle_tol: angle.0,
            };
            let rows = tolerance_sweep(&g, &r, &grid, &matching.options())?;
            write_text(output.as_deref(), &sweep_csv(&rows))?;
        }
        Command::Synth {
            base,
            count,
            seed,
            proper_only,
            noise,
            supercell_max,
            output,
        } => {
            let s = load_one(&base)?;
            let opts = SynthOptions {
                proper_only,
                noise_std: noise,
                supercell_max: supercell_max.max(1),
                ..SynthOptions::default()
            };
            let out: Vec<_> = (0..count)
                .map(|i| {
                    let mut t = synth_equivalent_cell(&s, seed.wrapping_add(i as u64), &opts);
                    t.id = format!("{}-synth-{i}", s.id);
                    t
                })
                .collect();
            match output.as_deref() {
                Some(p) => write_records(create(p)?, &out)?,
                None => write_records(std::io::stdout().lock(), &out)?,
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("XTAL_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if let Some(n) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_INTERNAL);
        }
    }
    match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_DATA)
        }
        Err(_) => ExitCode::from(EXIT_INTERNAL),
    }
}

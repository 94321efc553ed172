use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use htk_cli::error::CliError;
use htk_cli::matrix_io::{self, MatrixFormat};
use htk_cli::pipeline;
use htk_cli::records_io;
use htk_cli::report::render_report;
use htk_cli::samples;
use htk_cli::taxonomy_file::{load_taxonomy, LoadedTaxonomy};

use htk_core::cluster::build_cluster_map;
use htk_core::decode::rank_labels;
use htk_core::embed::{embed_taxonomy, verify_identities};
use htk_core::grammar::{parse_label, HorizonLabel};
use htk_core::simgen::{generate, stratified_split, split_label_deviation};

/// Seed override honored by `generate`, `split` and `baseline` (used by CI).
const SEED_ENV: &str = "HTK_SEED";

#[derive(Parser)]
#[command(
    name = "htk",
    version,
    about = "Soil-horizon label toolkit: grammar, taxonomy embeddings, clustering, decoding, metrics and synthetic data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse label strings against a taxonomy's alphabet and rules.
    Parse {
        #[arg(long)]
        taxonomy: PathBuf,
        /// Label strings, e.g. "Ah-Bv".
        #[arg(required = true)]
        labels: Vec<String>,
    },
    /// Build the embedding matrix of a taxonomy and export it.
    Embed {
        #[arg(long)]
        taxonomy: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// csv or json; default follows the output extension.
        #[arg(long)]
        format: Option<MatrixFormat>,
        /// Fail (exit 3) when any identity deviates beyond the tolerance.
        #[arg(long)]
        verify: bool,
        #[arg(long, default_value_t = 1e-9)]
        tolerance: f64,
    },
    /// Map rare labels onto retained ones by edit distance.
    Cluster {
        /// CSV with header `label,count`.
        #[arg(long)]
        counts: PathBuf,
        /// Retention threshold: keep labels with count > threshold.
        #[arg(long, default_value_t = 10)]
        threshold: u64,
        /// Optional CSV with header `rare,target`.
        #[arg(long)]
        overrides: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute the evaluation report over a samples file.
    Evaluate {
        /// JSON-lines samples; see docs/formats.md.
        #[arg(long)]
        samples: PathBuf,
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        taxonomy: PathBuf,
        /// @k variants to report (repeatable).
        #[arg(long = "k", default_values_t = [3usize, 5usize])]
        ks: Vec<usize>,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads for sample validation and decoding.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Generate synthetic profile records.
    Generate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        taxonomy: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Stratified train/val/test split of a records file.
    Split {
        #[arg(long)]
        records: PathBuf,
        /// Three comma-separated fractions summing to 1.
        #[arg(long, default_value = "0.6,0.2,0.2")]
        fractions: String,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rank labels for raw embedding vectors (JSON lines).
    Decode {
        #[arg(long)]
        embeddings: PathBuf,
        /// JSON lines: either a bare vector or {"id": ..., "vector": [...]}.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Keep only the best-ranked labels.
        #[arg(long)]
        top: Option<usize>,
    },
    /// Build baseline evaluation samples for the test part of a split.
    Baseline {
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        split: PathBuf,
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        taxonomy: PathBuf,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli.command) {
        eprintln!("error: {e}");
        std::process::exit(e.code);
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Parse { taxonomy, labels } => cmd_parse(&taxonomy, &labels),
        Command::Embed {
            taxonomy,
            out,
            format,
            verify,
            tolerance,
        } => cmd_embed(&taxonomy, &out, format, verify, tolerance),
        Command::Cluster {
            counts,
            threshold,
            overrides,
            out,
        } => cmd_cluster(&counts, threshold, overrides.as_deref(), &out),
        Command::Evaluate {
            samples,
            embeddings,
            taxonomy,
            ks,
            out,
            jobs,
        } => cmd_evaluate(&samples, &embeddings, &taxonomy, &ks, &out, jobs),
        Command::Generate {
            config,
            taxonomy,
            out,
        } => cmd_generate(&config, &taxonomy, &out),
        Command::Split {
            records,
            fractions,
            seed,
            out,
        } => cmd_split(&records, &fractions, seed, &out),
        Command::Decode {
            embeddings,
            input,
            out,
            top,
        } => cmd_decode(&embeddings, &input, &out, top),
        Command::Baseline {
            records,
            split,
            embeddings,
            taxonomy,
            seed,
            out,
        } => cmd_baseline(&records, &split, &embeddings, &taxonomy, seed, &out),
    }
}

fn env_seed() -> Result<Option<u64>, CliError> {
    match std::env::var(SEED_ENV) {
        Ok(value) => value
            .parse()
            .map(Some)
            .map_err(|e| CliError::io(format!("{SEED_ENV}={value}: {e}"))),
        Err(_) => Ok(None),
    }
}

fn open_reader(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::io(format!("{}: {e}", path.display())))
}

fn create_writer(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::io(format!("{}: {e}", path.display())))
}

fn cmd_parse(taxonomy: &Path, labels: &[String]) -> Result<(), CliError> {
    let loaded = load_taxonomy(taxonomy)?;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let mut failures = 0usize;
    for raw in labels {
        match parse_label(raw, &loaded.alphabet)
            .map_err(CliError::from)
            .and_then(|label| {
                loaded.rules.check(&label)?;
                Ok(label)
            }) {
            Ok(label) => {
                let value = label_json(raw, &label);
                serde_json::to_writer(&mut out, &value)?;
                writeln!(out)?;
            }
            Err(e) => {
                eprintln!("{raw}: {e}");
                failures += 1;
            }
        }
    }
    if failures > 0 {
        return Err(CliError::domain(format!("{failures} label(s) failed to parse")));
    }
    Ok(())
}

fn label_json(input: &str, label: &HorizonLabel) -> serde_json::Value {
    match label {
        HorizonLabel::Simple(s) => serde_json::json!({
            "input": input,
            "kind": "simple",
            "prefix": s.prefix(),
            "main": s.main().to_string(),
            "suffix": s.suffix(),
            "rendered": label.render(),
        }),
        HorizonLabel::Mixture(first, second) => serde_json::json!({
            "input": input,
            "kind": "mixture",
            "first": first.to_string(),
            "second": second.to_string(),
            "main": label.main_symbol().to_string(),
            "rendered": label.render(),
        }),
    }
}

fn cmd_embed(
    taxonomy: &Path,
    out: &Path,
    format: Option<MatrixFormat>,
    verify: bool,
    tolerance: f64,
) -> Result<(), CliError> {
    let loaded = load_taxonomy(taxonomy)?;
    let matrix = embed_taxonomy(&loaded.graph)?;
    let format = format.unwrap_or_else(|| matrix_io::format_for_path(out));
    let mut writer = create_writer(out)?;
    matrix_io::write_matrix(&matrix, format, &mut writer)?;
    writer.flush()?;

    let report = verify_identities(&matrix, &loaded.graph, tolerance);
    let (dim, n) = matrix.shape();
    println!("shape: {dim} x {n}");
    println!("max gram deviation: {:.3e}", report.max_deviation);
    println!("max norm deviation: {:.3e}", report.max_norm_deviation);
    if verify {
        for (relation, stats) in &report.cases {
            println!(
                "  {:<22} {:>5} pairs, max deviation {:.3e}",
                relation.id(),
                stats.pairs,
                stats.max_deviation
            );
        }
    }
    if verify && !report.passed() {
        let pair = report
            .worst_pair
            .map(|(a, b)| format!("{a} / {b}"))
            .unwrap_or_else(|| "unknown".to_string());
        return Err(CliError::math(format!(
            "{} identity violation(s) above {tolerance:e}; worst pair {pair}",
            report.violations
        )));
    }
    Ok(())
}

fn cmd_cluster(
    counts: &Path,
    threshold: u64,
    overrides: Option<&Path>,
    out: &Path,
) -> Result<(), CliError> {
    let rows = records_io::read_counts(&mut open_reader(counts)?)?;
    let override_rows = match overrides {
        Some(path) => records_io::read_overrides(&mut open_reader(path)?)?,
        None => Vec::new(),
    };
    let map = build_cluster_map(&rows, threshold, &override_rows)?;
    let mut writer = create_writer(out)?;
    records_io::write_cluster_map(&map, &mut writer)?;
    writer.flush()?;
    println!(
        "retained {} of {} labels (threshold > {threshold})",
        map.retained_count(),
        map.mapping().len()
    );
    Ok(())
}

fn cmd_evaluate(
    samples_path: &Path,
    embeddings: &Path,
    taxonomy: &Path,
    ks: &[usize],
    out: &Path,
    jobs: usize,
) -> Result<(), CliError> {
    if jobs == 0 {
        return Err(CliError::io("--jobs must be at least 1"));
    }
    let loaded = load_taxonomy(taxonomy)?;
    let matrix = matrix_io::read_matrix(
        matrix_io::format_for_path(embeddings),
        &mut open_reader(embeddings)?,
    )?;
    let lines = samples::read_sample_lines(&mut open_reader(samples_path)?)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::io(e.to_string()))?;
    let resolved: Vec<Result<samples::EvalInput, CliError>> = pool.install(|| {
        use rayon::prelude::*;
        lines
            .par_iter()
            .map(|line| samples::resolve_sample(line, &loaded.graph, &matrix))
            .collect()
    });
    // Surface the first offending record in input order.
    let mut inputs = Vec::with_capacity(resolved.len());
    for result in resolved {
        inputs.push(result?);
    }

    let report = samples::evaluate_samples(&inputs, &loaded.graph, ks)?;
    let bytes = render_report(&report)?;
    std::fs::write(out, &bytes).map_err(|e| CliError::io(format!("{}: {e}", out.display())))?;
    println!(
        "evaluated {} samples ({} stripes); report written to {}",
        report.samples,
        report.stripes,
        out.display()
    );
    Ok(())
}

fn cmd_generate(config: &Path, taxonomy: &Path, out: &Path) -> Result<(), CliError> {
    let file = records_io::read_generator_config(&mut open_reader(config)?)?;
    let config = file.into_config(env_seed()?);
    let loaded = load_taxonomy(taxonomy)?;
    let records = generate(&config, &loaded.graph)?;
    let mut writer = create_writer(out)?;
    records_io::write_records(&records, &mut writer)?;
    writer.flush()?;
    println!("generated {} records (seed {})", records.len(), config.seed);
    Ok(())
}

fn cmd_split(records_path: &Path, fractions: &str, seed: u64, out: &Path) -> Result<(), CliError> {
    let records = records_io::read_records(&mut open_reader(records_path)?)?;
    let parts: Vec<f64> = fractions
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::io(format!("fractions \"{fractions}\": {e}")))?;
    let [train, val, test] = parts.as_slice() else {
        return Err(CliError::io(format!(
            "fractions \"{fractions}\": expected three comma-separated values"
        )));
    };
    let seed = env_seed()?.unwrap_or(seed);
    let split = stratified_split(&records, (*train, *val, *test), seed)?;
    let deviation = split_label_deviation(&records, &split);
    let manifest =
        records_io::SplitManifest::from_indices(&records, &split, seed, [*train, *val, *test]);
    let mut writer = create_writer(out)?;
    records_io::write_split(&manifest, &mut writer)?;
    writer.flush()?;
    println!(
        "split {} records into {}/{}/{}; max per-label frequency deviation {:.4}",
        records.len(),
        manifest.train.len(),
        manifest.val.len(),
        manifest.test.len(),
        deviation
    );
    Ok(())
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum DecodeLine {
    Bare(Vec<f64>),
    Tagged { id: Option<u64>, vector: Vec<f64> },
}

#[derive(Debug, Serialize)]
struct DecodedLine {
    #[serde(skip_serializing_if = "Option::is_none")]
    id: Option<u64>,
    ranked: Vec<RankedEntry>,
}

#[derive(Debug, Serialize)]
struct RankedEntry {
    label: String,
    score: f64,
}

fn cmd_decode(
    embeddings: &Path,
    input: &Path,
    out: &Path,
    top: Option<usize>,
) -> Result<(), CliError> {
    use std::io::BufRead;
    let matrix = matrix_io::read_matrix(
        matrix_io::format_for_path(embeddings),
        &mut open_reader(embeddings)?,
    )?;
    let reader = open_reader(input)?;
    let mut writer = create_writer(out)?;
    let mut decoded = 0usize;
    for (number, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: DecodeLine = serde_json::from_str(&line)
            .map_err(|e| CliError::io(format!("input line {}: {e}", number + 1)))?;
        let (id, vector) = match parsed {
            DecodeLine::Bare(vector) => (None, vector),
            DecodeLine::Tagged { id, vector } => (id, vector),
        };
        let prediction = rank_labels(&matrix, &vector)
            .map_err(|e| CliError::domain(format!("input line {}: {e}", number + 1)))?;
        let keep = top.unwrap_or(prediction.ranked.len()).min(prediction.ranked.len());
        let ranked = prediction.ranked[..keep]
            .iter()
            .map(|r| RankedEntry {
                label: r.label.clone(),
                score: r.score,
            })
            .collect();
        serde_json::to_writer(&mut writer, &DecodedLine { id, ranked })?;
        writeln!(writer)?;
        decoded += 1;
    }
    writer.flush()?;
    println!("decoded {decoded} vectors");
    Ok(())
}

fn cmd_baseline(
    records_path: &Path,
    split_path: &Path,
    embeddings: &Path,
    taxonomy: &Path,
    seed: u64,
    out: &Path,
) -> Result<(), CliError> {
    let records = records_io::read_records(&mut open_reader(records_path)?)?;
    let manifest = records_io::read_split(&mut open_reader(split_path)?)?;
    let split = manifest.to_indices(&records)?;
    let matrix = matrix_io::read_matrix(
        matrix_io::format_for_path(embeddings),
        &mut open_reader(embeddings)?,
    )?;
    let loaded: LoadedTaxonomy = load_taxonomy(taxonomy)?;
    let seed = env_seed()?.unwrap_or(seed);
    let samples = pipeline::build_baseline_samples(&records, &split, &matrix, &loaded.graph, seed)?;
    let mut writer = create_writer(out)?;
    pipeline::write_samples(&samples, &mut writer)?;
    writer.flush()?;
    println!(
        "wrote {} baseline samples for the test part (seed {seed})",
        samples.len()
    );
    Ok(())
}

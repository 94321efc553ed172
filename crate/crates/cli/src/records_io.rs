//! Serialization of generator configs, profile records (JSON lines), split
//! manifests, count/override tables (CSV) and cluster maps (JSON).

use std::collections::BTreeMap;
use std::io::{BufRead, Read, Write};

use serde::{Deserialize, Serialize};

use htk_core::cluster::ClusterMap;
use htk_core::grammar::{parse_label, Alphabet, HorizonLabel};
use htk_core::metrics::DepthSequence;
use htk_core::simgen::{GeneratorConfig, LabelSkew, ProfileRecord, SplitIndices};

use crate::error::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeneratorConfigFile {
    pub seed: u64,
    pub count: usize,
    #[serde(default = "default_horizon_weights")]
    pub horizon_weights: Vec<f64>,
    #[serde(default = "default_skew")]
    pub skew: SkewField,
    #[serde(default = "default_feature_classes")]
    pub feature_classes: Vec<usize>,
}

fn default_horizon_weights() -> Vec<f64> {
    vec![1.0; 7]
}

fn default_skew() -> SkewField {
    SkewField::Geometric { ratio: 0.9 }
}

fn default_feature_classes() -> Vec<usize> {
    vec![17, 74, 7, 8, 7]
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SkewField {
    Uniform,
    Geometric { ratio: f64 },
    Zipf { exponent: f64 },
}

impl From<SkewField> for LabelSkew {
    fn from(value: SkewField) -> Self {
        match value {
            SkewField::Uniform => LabelSkew::Uniform,
            SkewField::Geometric { ratio } => LabelSkew::Geometric { ratio },
            SkewField::Zipf { exponent } => LabelSkew::Zipf { exponent },
        }
    }
}

impl GeneratorConfigFile {
    pub fn into_config(self, seed_override: Option<u64>) -> GeneratorConfig {
        GeneratorConfig {
            seed: seed_override.unwrap_or(self.seed),
            count: self.count,
            horizon_weights: self.horizon_weights,
            skew: self.skew.into(),
            feature_classes: self.feature_classes,
        }
    }
}

pub fn read_generator_config(reader: &mut dyn Read) -> Result<GeneratorConfigFile, CliError> {
    let mut text = String::new();
    reader.read_to_string(&mut text)?;
    Ok(serde_json::from_str(&text)?)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RecordLine {
    id: u64,
    depths: Vec<f64>,
    horizons: Vec<String>,
    stones: Vec<u32>,
    categorical: Vec<Vec<u16>>,
}

pub fn write_records(records: &[ProfileRecord], writer: &mut dyn Write) -> Result<(), CliError> {
    for record in records {
        let line = RecordLine {
            id: record.id,
            depths: record.depths.markers().to_vec(),
            horizons: record.horizons.iter().map(|h| h.render()).collect(),
            stones: record.stones.clone(),
            categorical: record.categorical.clone(),
        };
        serde_json::to_writer(&mut *writer, &line)?;
        writeln!(writer)?;
    }
    Ok(())
}

pub fn read_records(reader: &mut dyn BufRead) -> Result<Vec<ProfileRecord>, CliError> {
    let alphabet = Alphabet::universal();
    let mut records = Vec::new();
    for (number, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: RecordLine = serde_json::from_str(&line)
            .map_err(|e| CliError::io(format!("records line {}: {e}", number + 1)))?;
        let depths = DepthSequence::new(parsed.depths)
            .map_err(|e| CliError::domain(format!("record {}: {e}", parsed.id)))?;
        let horizons: Vec<HorizonLabel> = parsed
            .horizons
            .iter()
            .map(|h| parse_label(h, &alphabet))
            .collect::<Result<_, _>>()
            .map_err(|e| CliError::domain(format!("record {}: {e}", parsed.id)))?;
        let d = depths.horizon_count();
        if horizons.len() != d || parsed.stones.len() != d || parsed.categorical.len() != d {
            return Err(CliError::domain(format!(
                "record {}: per-stripe arrays must have length {d}",
                parsed.id
            )));
        }
        records.push(ProfileRecord {
            id: parsed.id,
            depths,
            horizons,
            stones: parsed.stones,
            categorical: parsed.categorical,
        });
    }
    Ok(records)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitManifest {
    pub seed: u64,
    pub fractions: [f64; 3],
    pub train: Vec<u64>,
    pub val: Vec<u64>,
    pub test: Vec<u64>,
}

impl SplitManifest {
    pub fn from_indices(
        records: &[ProfileRecord],
        split: &SplitIndices,
        seed: u64,
        fractions: [f64; 3],
    ) -> Self {
        let ids = |part: &[usize]| part.iter().map(|idx| records[*idx].id).collect();
        SplitManifest {
            seed,
            fractions,
            train: ids(&split.train),
            val: ids(&split.val),
            test: ids(&split.test),
        }
    }

    /// Back to record indices against a record list (ids must resolve).
    pub fn to_indices(&self, records: &[ProfileRecord]) -> Result<SplitIndices, CliError> {
        let by_id: BTreeMap<u64, usize> = records
            .iter()
            .enumerate()
            .map(|(idx, r)| (r.id, idx))
            .collect();
        let resolve = |ids: &[u64]| -> Result<Vec<usize>, CliError> {
            ids.iter()
                .map(|id| {
                    by_id
                        .get(id)
                        .copied()
                        .ok_or_else(|| CliError::domain(format!("split references unknown record id {id}")))
                })
                .collect()
        };
        Ok(SplitIndices {
            train: resolve(&self.train)?,
            val: resolve(&self.val)?,
            test: resolve(&self.test)?,
        })
    }
}

pub fn write_split(manifest: &SplitManifest, writer: &mut dyn Write) -> Result<(), CliError> {
    serde_json::to_writer_pretty(&mut *writer, manifest)?;
    writeln!(writer)?;
    Ok(())
}

pub fn read_split(reader: &mut dyn Read) -> Result<SplitManifest, CliError> {
    let mut text = String::new();
    reader.read_to_string(&mut text)?;
    Ok(serde_json::from_str(&text)?)
}

/// Reads a `label,count` CSV (with header).
pub fn read_counts(reader: &mut dyn Read) -> Result<Vec<(HorizonLabel, u64)>, CliError> {
    let alphabet = Alphabet::universal();
    let mut csv_reader = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let mut counts = Vec::new();
    for record in csv_reader.records() {
        let record = record?;
        if record.len() != 2 {
            return Err(CliError::io(format!(
                "counts row has {} columns, expected label,count",
                record.len()
            )));
        }
        let label = parse_label(record[0].trim(), &alphabet)?;
        let count: u64 = record[1]
            .trim()
            .parse()
            .map_err(|e| CliError::io(format!("count \"{}\": {e}", &record[1])))?;
        counts.push((label, count));
    }
    Ok(counts)
}

/// Reads a `rare,target` CSV (with header).
pub fn read_overrides(reader: &mut dyn Read) -> Result<Vec<(HorizonLabel, HorizonLabel)>, CliError> {
    let alphabet = Alphabet::universal();
    let mut csv_reader = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let mut overrides = Vec::new();
    for record in csv_reader.records() {
        let record = record?;
        if record.len() != 2 {
            return Err(CliError::io(format!(
                "overrides row has {} columns, expected rare,target",
                record.len()
            )));
        }
        overrides.push((
            parse_label(record[0].trim(), &alphabet)?,
            parse_label(record[1].trim(), &alphabet)?,
        ));
    }
    Ok(overrides)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClusterMapFile {
    pub threshold: u64,
    pub retained: Vec<String>,
    pub mapping: BTreeMap<String, String>,
    pub overrides: BTreeMap<String, String>,
}

impl From<&ClusterMap> for ClusterMapFile {
    fn from(map: &ClusterMap) -> Self {
        ClusterMapFile {
            threshold: map.threshold(),
            retained: map.retained().map(str::to_string).collect(),
            mapping: map.mapping().clone(),
            overrides: map.overrides().clone(),
        }
    }
}

pub fn write_cluster_map(map: &ClusterMap, writer: &mut dyn Write) -> Result<(), CliError> {
    serde_json::to_writer_pretty(&mut *writer, &ClusterMapFile::from(map))?;
    writeln!(writer)?;
    Ok(())
}

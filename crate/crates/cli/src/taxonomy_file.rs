//! Taxonomy configuration file (JSON): main-symbol alphabet, leaf labels,
//! optional mixture list, optional modifier-rule table, leaf ordering.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use htk_core::grammar::{
    parse_label, Alphabet, HorizonLabel, ModifierKind, ModifierRule, ModifierRules,
};
use htk_core::taxonomy::{LeafOrder, TaxonomyGraph};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TaxonomyFile {
    pub version: u32,
    pub main_symbols: Vec<String>,
    pub labels: Vec<String>,
    /// Mixture labels may also be listed inline in `labels`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub mixtures: Vec<String>,
    #[serde(default)]
    pub leaf_order: LeafOrderField,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modifier_rules: Option<ModifierRulesField>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LeafOrderField {
    #[default]
    Sorted,
    Listed,
}

impl From<LeafOrderField> for LeafOrder {
    fn from(value: LeafOrderField) -> Self {
        match value {
            LeafOrderField::Sorted => LeafOrder::Sorted,
            LeafOrderField::Listed => LeafOrder::Listed,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ModifierRulesField {
    #[serde(default)]
    pub forbidden: Vec<ForbiddenModifier>,
}

/// One forbidden modifier/main combination; exactly one of `prefix` and
/// `suffix` must be set, each a single lowercase letter.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForbiddenModifier {
    pub main: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prefix: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suffix: Option<String>,
}

/// A parsed and validated taxonomy configuration.
#[derive(Debug)]
pub struct LoadedTaxonomy {
    pub alphabet: Alphabet,
    pub rules: ModifierRules,
    pub labels: Vec<HorizonLabel>,
    pub graph: TaxonomyGraph,
}

pub fn load_taxonomy(path: &Path) -> Result<LoadedTaxonomy, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
    let file: TaxonomyFile =
        serde_json::from_str(&text).map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
    build_taxonomy_config(&file)
}

pub fn build_taxonomy_config(file: &TaxonomyFile) -> Result<LoadedTaxonomy, CliError> {
    if file.version != SCHEMA_VERSION {
        return Err(CliError::io(format!(
            "unsupported taxonomy schema version {}, expected {SCHEMA_VERSION}",
            file.version
        )));
    }
    let mut symbols = Vec::with_capacity(file.main_symbols.len());
    for s in &file.main_symbols {
        symbols.push(single_char(s, "main symbol")?);
    }
    let alphabet = Alphabet::new(symbols)?;
    let rules = parse_rules(file.modifier_rules.as_ref(), &alphabet)?;

    let mut labels = Vec::with_capacity(file.labels.len() + file.mixtures.len());
    for raw in file.labels.iter().chain(&file.mixtures) {
        let label = parse_label(raw, &alphabet)?;
        rules.check(&label)?;
        labels.push(label);
    }
    let graph = TaxonomyGraph::build_with_order(&labels, file.leaf_order.into())?;
    Ok(LoadedTaxonomy {
        alphabet,
        rules,
        labels,
        graph,
    })
}

fn parse_rules(field: Option<&ModifierRulesField>, alphabet: &Alphabet) -> Result<ModifierRules, CliError> {
    let Some(field) = field else {
        return Ok(ModifierRules::default());
    };
    let mut rules = Vec::with_capacity(field.forbidden.len());
    for rule in &field.forbidden {
        let main = htk_core::grammar::MainSymbol::new(single_char(&rule.main, "rule main symbol")?)?;
        if !alphabet.contains(main) {
            return Err(CliError::io(format!(
                "modifier rule references main symbol '{main}' outside the alphabet"
            )));
        }
        let (kind, letter) = match (&rule.prefix, &rule.suffix) {
            (Some(p), None) => (ModifierKind::Prefix, single_char(p, "rule prefix")?),
            (None, Some(s)) => (ModifierKind::Suffix, single_char(s, "rule suffix")?),
            _ => {
                return Err(CliError::io(
                    "modifier rule needs exactly one of prefix/suffix".to_string(),
                ))
            }
        };
        if !letter.is_ascii_lowercase() {
            return Err(CliError::io(format!(
                "modifier rule letter '{letter}' must be lowercase"
            )));
        }
        rules.push(ModifierRule { main, kind, letter });
    }
    Ok(ModifierRules::new(rules))
}

fn single_char(s: &str, what: &str) -> Result<char, CliError> {
    let mut chars = s.chars();
    match (chars.next(), chars.next()) {
        (Some(c), None) => Ok(c),
        _ => Err(CliError::io(format!("{what} \"{s}\" must be a single character"))),
    }
}

//! Tiered attribution of addresses to university, industry and government.
//!
//! Tiers are scanned in order and the first tier with a matching identifier
//! wins, so an address naming both `UNIV` and `LTD` is a university address.

use std::collections::HashMap;
use std::fmt;
use std::io::Read;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{Address, Document};
use crate::error::{Error, Result};
use crate::num::round1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SectorLabel {
    University,
    Industry,
    Government,
    Unidentified,
}

impl SectorLabel {
    pub const ALL: [SectorLabel; 4] = [
        Self::University,
        Self::Industry,
        Self::Government,
        Self::Unidentified,
    ];

    fn slot(self) -> usize {
        self as usize
    }
}

impl fmt::Display for SectorLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::University => "University",
            Self::Industry => "Industry",
            Self::Government => "Government",
            Self::Unidentified => "Unidentified",
        })
    }
}

impl FromStr for SectorLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "u" | "university" => Ok(Self::University),
            "i" | "industry" => Ok(Self::Industry),
            "g" | "government" => Ok(Self::Government),
            "unidentified" | "none" => Ok(Self::Unidentified),
            other => Err(Error::InvalidRules(format!("unknown label `{other}`"))),
        }
    }
}

/// How identifiers are matched against an address.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MatchMode {
    /// An identifier must equal one of the address tokens.
    #[default]
    Token,
    /// An identifier may appear anywhere in the uppercased raw address.
    Substring,
}

impl FromStr for MatchMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "token" => Ok(Self::Token),
            "substring" => Ok(Self::Substring),
            other => Err(format!("unknown match mode `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tier {
    pub label: SectorLabel,
    pub identifiers: Vec<String>,
}

/// Ordered identifier tiers.
#[derive(Debug, Clone)]
pub struct RuleSet {
    tiers: Vec<Tier>,
    mode: MatchMode,
    // identifier -> index of the first tier listing it
    first_tier: HashMap<String, usize>,
}

const UNIVERSITY: &[&str] = &["UNIV", "COLL"];
const INDUSTRY: &[&str] = &["CORP", "INC", "LTD", "SA", "AG"];
const GOVERNMENT: &[&str] = &[
    "NATL", "NACL", "NAZL", "GOVT", "MINIST", "ACAD", "INST", "NIH", "HOSP", "HOP", "EUROPEAN",
    "US", "CNRS", "CERN", "INRA", "BUNDES",
];

impl Default for RuleSet {
    fn default() -> Self {
        let tier = |label, ids: &[&str]| Tier {
            label,
            identifiers: ids.iter().map(|s| s.to_string()).collect(),
        };
        Self::new(vec![
            tier(SectorLabel::University, UNIVERSITY),
            tier(SectorLabel::Industry, INDUSTRY),
            tier(SectorLabel::Government, GOVERNMENT),
        ])
        .expect("built-in tiers are well-formed")
    }
}

#[derive(Deserialize)]
struct RuleRow {
    tier_index: usize,
    label: String,
    identifier: String,
}

impl RuleSet {
    pub fn new(tiers: Vec<Tier>) -> Result<Self> {
        let mut first_tier = HashMap::new();
        for (index, tier) in tiers.iter().enumerate() {
            if tier.label == SectorLabel::Unidentified {
                return Err(Error::InvalidRules(format!(
                    "tier {index} is labelled Unidentified"
                )));
            }
            for id in &tier.identifiers {
                let valid = !id.is_empty()
                    && id.chars().all(char::is_alphanumeric)
                    && id.to_uppercase() == *id;
                if !valid {
                    return Err(Error::InvalidRules(format!(
                        "identifier `{id}` is not an uppercase alphanumeric token"
                    )));
                }
                first_tier.entry(id.clone()).or_insert(index);
            }
        }
        Ok(Self {
            tiers,
            mode: MatchMode::Token,
            first_tier,
        })
    }

    /// Reads a `tier_index,label,identifier` CSV. Rows sharing a tier index
    /// form one tier; tiers are ordered by index.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut grouped: Vec<(usize, Tier)> = Vec::new();
        for (row_no, row) in csv::Reader::from_reader(reader).deserialize().enumerate() {
            let row: RuleRow = row?;
            let label: SectorLabel = row.label.parse()?;
            let identifier = row.identifier.trim().to_uppercase();
            match grouped.iter_mut().find(|(i, _)| *i == row.tier_index) {
                Some((_, tier)) if tier.label != label => {
                    return Err(Error::InvalidRules(format!(
                        "row {}: tier {} mixes labels {} and {}",
                        row_no + 2,
                        row.tier_index,
                        tier.label,
                        label
                    )));
                }
                Some((_, tier)) => tier.identifiers.push(identifier),
                None => grouped.push((
                    row.tier_index,
                    Tier {
                        label,
                        identifiers: vec![identifier],
                    },
                )),
            }
        }
        if grouped.is_empty() {
            return Err(Error::InvalidRules("rule file has no rows".into()));
        }
        grouped.sort_by_key(|(i, _)| *i);
        Self::new(grouped.into_iter().map(|(_, t)| t).collect())
    }

    pub fn with_mode(mut self, mode: MatchMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn mode(&self) -> MatchMode {
        self.mode
    }

    pub fn tiers(&self) -> &[Tier] {
        &self.tiers
    }

    pub fn is_identifier(&self, token: &str) -> bool {
        self.first_tier.contains_key(token)
    }
}

/// Label of the first tier with an identifier matching the address.
pub fn classify_address(address: &Address, rules: &RuleSet) -> SectorLabel {
    let tier = match rules.mode {
        MatchMode::Token => address
            .tokens()
            .iter()
            .filter_map(|t| rules.first_tier.get(t))
            .min()
            .copied(),
        MatchMode::Substring => {
            let upper = address.raw().to_uppercase();
            rules
                .tiers
                .iter()
                .position(|tier| tier.identifiers.iter().any(|id| upper.contains(id.as_str())))
        }
    };
    tier.map_or(SectorLabel::Unidentified, |t| rules.tiers[t].label)
}

/// Sector presence over a document's addresses.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct SectorProfile {
    pub has_u: bool,
    pub has_i: bool,
    pub has_g: bool,
}

impl SectorProfile {
    pub fn new(has_u: bool, has_i: bool, has_g: bool) -> Self {
        Self { has_u, has_i, has_g }
    }

    pub fn identified(&self) -> bool {
        self.has_u || self.has_i || self.has_g
    }

    pub fn record(&mut self, label: SectorLabel) {
        match label {
            SectorLabel::University => self.has_u = true,
            SectorLabel::Industry => self.has_i = true,
            SectorLabel::Government => self.has_g = true,
            SectorLabel::Unidentified => {}
        }
    }
}

pub fn profile_document(document: &Document, rules: &RuleSet) -> SectorProfile {
    let mut profile = SectorProfile::default();
    for address in &document.addresses {
        profile.record(classify_address(address, rules));
    }
    profile
}

/// Address counts per label.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ClassificationTable {
    counts: [u64; 4],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableRow {
    pub label: SectorLabel,
    pub count: u64,
    /// Percent of all addresses, one decimal; 0.0 when there are none.
    pub percent: f64,
}

impl ClassificationTable {
    pub fn from_counts(university: u64, industry: u64, government: u64, unidentified: u64) -> Self {
        Self {
            counts: [university, industry, government, unidentified],
        }
    }

    pub fn add(&mut self, label: SectorLabel, count: u64) {
        self.counts[label.slot()] += count;
    }

    pub fn count(&self, label: SectorLabel) -> u64 {
        self.counts[label.slot()]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn identified(&self) -> u64 {
        self.total() - self.count(SectorLabel::Unidentified)
    }

    /// False for an empty table, whose percentages are reported as 0.0.
    pub fn percentages_defined(&self) -> bool {
        self.total() > 0
    }

    pub fn percent(&self, label: SectorLabel) -> f64 {
        match self.total() {
            0 => 0.0,
            total => round1(100.0 * self.count(label) as f64 / total as f64),
        }
    }

    pub fn rows(&self) -> Vec<TableRow> {
        SectorLabel::ALL
            .iter()
            .map(|&label| TableRow {
                label,
                count: self.count(label),
                percent: self.percent(label),
            })
            .collect()
    }
}

pub fn classification_table<'a, I>(documents: I, rules: &RuleSet) -> ClassificationTable
where
    I: IntoIterator<Item = &'a Document>,
{
    let mut table = ClassificationTable::default();
    for doc in documents {
        for address in &doc.addresses {
            table.add(classify_address(address, rules), 1);
        }
    }
    table
}

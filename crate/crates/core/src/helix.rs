//! Triple Helix cubes and indicator rows.
//!
//! Documents are profiled by sector presence and counted into the seven
//! exclusive Venn cells (`U`, `I`, `G`, `UI`, `UG`, `IG`, `UIG`, where `UI`
//! means university and industry but not government). Web hit counts arrive
//! as inclusive counts and are converted to the same cells by
//! inclusion–exclusion.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::classifier::{profile_document, RuleSet, SectorProfile};
use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::infotheory::{transmission3, ContingencyCube};
use crate::num::{compensated_sum, round1, Scalar};

/// The seven mutually exclusive regions of the three-set Venn diagram.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VennCells {
    pub u_only: u64,
    pub i_only: u64,
    pub g_only: u64,
    pub ui: u64,
    pub ug: u64,
    pub ig: u64,
    pub uig: u64,
}

impl VennCells {
    pub fn union(&self) -> u64 {
        self.u_only + self.i_only + self.g_only + self.ui + self.ug + self.ig + self.uig
    }

    pub fn univ_total(&self) -> u64 {
        self.u_only + self.ui + self.ug + self.uig
    }

    pub fn ind_total(&self) -> u64 {
        self.i_only + self.ui + self.ig + self.uig
    }

    pub fn gov_total(&self) -> u64 {
        self.g_only + self.ug + self.ig + self.uig
    }

    pub fn add_profile(&mut self, p: SectorProfile) {
        match (p.has_u, p.has_i, p.has_g) {
            (true, false, false) => self.u_only += 1,
            (false, true, false) => self.i_only += 1,
            (false, false, true) => self.g_only += 1,
            (true, true, false) => self.ui += 1,
            (true, false, true) => self.ug += 1,
            (false, true, true) => self.ig += 1,
            (true, true, true) => self.uig += 1,
            (false, false, false) => {}
        }
    }

    /// Cube over the seven cells, with `outside` placed in cell (0,0,0).
    pub fn to_cube(&self, outside: u64) -> ContingencyCube {
        ContingencyCube::from_cells([
            outside,
            self.g_only,
            self.i_only,
            self.ig,
            self.u_only,
            self.ug,
            self.ui,
            self.uig,
        ])
    }

    /// Drops cell (0,0,0).
    pub fn from_cube(cube: &ContingencyCube) -> Self {
        let c = cube.cells();
        Self {
            g_only: c[1],
            i_only: c[2],
            ig: c[3],
            u_only: c[4],
            ug: c[5],
            ui: c[6],
            uig: c[7],
        }
    }

    pub fn to_inclusive(&self, year: i32) -> YearlyHits {
        YearlyHits {
            year,
            u: self.univ_total(),
            i: self.ind_total(),
            g: self.gov_total(),
            ui: self.ui + self.uig,
            ug: self.ug + self.uig,
            ig: self.ig + self.uig,
            uig: self.uig,
        }
    }

    /// Cells from an indicator row whose pair columns are already exclusive
    /// and whose sector columns are inclusive totals.
    pub fn from_sector_totals(
        ui: u64,
        ug: u64,
        ig: u64,
        uig: u64,
        univ: u64,
        industry: u64,
        govern: u64,
    ) -> Result<Self> {
        let single = |cell: &'static str, total: u64, parts: [u64; 3]| {
            total.checked_sub(parts.iter().sum()).ok_or_else(|| Error::InconsistentCounts {
                year: None,
                cell,
                detail: format!("would be negative ({total} − {parts:?})"),
            })
        };
        Ok(Self {
            u_only: single("u_only", univ, [ui, ug, uig])?,
            i_only: single("i_only", industry, [ui, ig, uig])?,
            g_only: single("g_only", govern, [ug, ig, uig])?,
            ui,
            ug,
            ig,
            uig,
        })
    }
}

/// Inclusive hit counts for one year: `ui` counts every item in both U and I.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct YearlyHits {
    pub year: i32,
    pub u: u64,
    pub i: u64,
    pub g: u64,
    pub ui: u64,
    pub ug: u64,
    pub ig: u64,
    pub uig: u64,
}

pub fn read_yearly_hits<R: Read>(reader: R) -> Result<Vec<YearlyHits>> {
    let mut rows = Vec::new();
    for row in csv::Reader::from_reader(reader).deserialize() {
        rows.push(row?);
    }
    Ok(rows)
}

pub fn write_yearly_hits<W: Write>(writer: W, rows: &[YearlyHits]) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    for row in rows {
        out.serialize(row)?;
    }
    out.flush()?;
    Ok(())
}

/// Exclusive cells from inclusive counts by inclusion–exclusion.
pub fn venn_from_inclusive(h: &YearlyHits) -> Result<VennCells> {
    let fail = |cell: &'static str, detail: String| Error::InconsistentCounts {
        year: Some(h.year),
        cell,
        detail,
    };
    for (cell, pair, a, b) in [("ui", h.ui, h.u, h.i), ("ug", h.ug, h.u, h.g), ("ig", h.ig, h.i, h.g)] {
        if pair > a.min(b) {
            return Err(fail(cell, format!("{pair} exceeds min of its sets ({a}, {b})")));
        }
    }
    if h.uig > h.ui.min(h.ug).min(h.ig) {
        return Err(fail(
            "uig",
            format!("{} exceeds a pairwise count ({}, {}, {})", h.uig, h.ui, h.ug, h.ig),
        ));
    }

    let (u, i, g) = (i128::from(h.u), i128::from(h.i), i128::from(h.g));
    let (ui, ug, ig, uig) = (
        i128::from(h.ui),
        i128::from(h.ug),
        i128::from(h.ig),
        i128::from(h.uig),
    );
    let cells = [
        ("u_only", u - ui - ug + uig),
        ("i_only", i - ui - ig + uig),
        ("g_only", g - ug - ig + uig),
        ("ui", ui - uig),
        ("ug", ug - uig),
        ("ig", ig - uig),
        ("uig", uig),
    ];
    let mut out = [0u64; 7];
    for (slot, (cell, value)) in out.iter_mut().zip(cells) {
        *slot = u64::try_from(value).map_err(|_| fail(cell, format!("derives to {value}")))?;
    }
    Ok(VennCells {
        u_only: out[0],
        i_only: out[1],
        g_only: out[2],
        ui: out[3],
        ug: out[4],
        ig: out[5],
        uig: out[6],
    })
}

/// Cube over identified profiles, plus how many unidentified ones were left out.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ProfileCube {
    pub cube: ContingencyCube,
    pub excluded: u64,
}

pub fn cube_from_profiles<'a, I>(profiles: I) -> ProfileCube
where
    I: IntoIterator<Item = &'a SectorProfile>,
{
    let mut out = ProfileCube::default();
    for p in profiles {
        if p.identified() {
            out.cube.add(p.has_u, p.has_i, p.has_g, 1);
        } else {
            out.excluded += 1;
        }
    }
    out
}

/// Which records make up the sample space of `T(uig)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum SampleSpace {
    /// Identified records only; cell (0,0,0) is empty.
    #[default]
    IdentifiedOnly,
    /// Also counts records that have addresses but no identified sector,
    /// in cell (0,0,0).
    IncludeUnidentified,
}

impl FromStr for SampleSpace {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "union" | "identified" => Ok(Self::IdentifiedOnly),
            "with-unidentified" | "all" => Ok(Self::IncludeUnidentified),
            other => Err(format!("unknown sample space `{other}`")),
        }
    }
}

pub const INTERNATIONAL: &str = "internationally coauthored";

/// A subset of a corpus for which one indicator row is computed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Slice {
    All,
    Country(String),
    Aggregate {
        name: String,
        members: BTreeSet<String>,
    },
    /// Documents whose addresses span at least two countries.
    InternationallyCoauthored,
}

impl Slice {
    pub fn name(&self) -> &str {
        match self {
            Slice::All => "all",
            Slice::Country(c) => c,
            Slice::Aggregate { name, .. } => name,
            Slice::InternationallyCoauthored => INTERNATIONAL,
        }
    }

    pub fn contains(&self, doc: &Document) -> bool {
        match self {
            Slice::All => true,
            Slice::Country(c) => doc.addresses.iter().any(|a| a.country() == Some(c)),
            Slice::Aggregate { members, .. } => doc
                .addresses
                .iter()
                .any(|a| a.country().is_some_and(|c| members.contains(c))),
            Slice::InternationallyCoauthored => doc.countries().len() >= 2,
        }
    }
}

/// Named country groups usable as slices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Aggregates {
    groups: BTreeMap<String, BTreeSet<String>>,
}

const EU15: &[&str] = &[
    "AUSTRIA", "BELGIUM", "DENMARK", "FINLAND", "FRANCE", "GERMANY", "GREECE", "IRELAND", "ITALY",
    "LUXEMBOURG", "NETHERLANDS", "PORTUGAL", "SPAIN", "SWEDEN", "UK",
];
const SCAND: &[&str] = &["DENMARK", "FINLAND", "NORWAY", "SWEDEN", "ICELAND"];

impl Default for Aggregates {
    /// EU-15 membership as of 2000, and the Nordic countries as `SCAND`.
    fn default() -> Self {
        let set = |members: &[&str]| members.iter().map(|s| s.to_string()).collect();
        Self {
            groups: BTreeMap::from([("EU".to_string(), set(EU15)), ("SCAND".to_string(), set(SCAND))]),
        }
    }
}

#[derive(Deserialize)]
struct AggregateRow {
    aggregate: String,
    country: String,
}

impl Aggregates {
    pub fn empty() -> Self {
        Self {
            groups: BTreeMap::new(),
        }
    }

    /// Reads an `aggregate,country` CSV. Groups it names replace the defaults.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut loaded: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for row in csv::Reader::from_reader(reader).deserialize() {
            let row: AggregateRow = row?;
            loaded
                .entry(row.aggregate.trim().to_uppercase())
                .or_default()
                .insert(row.country.trim().to_uppercase());
        }
        let mut out = Self::default();
        out.groups.extend(loaded);
        Ok(out)
    }

    pub fn members(&self, name: &str) -> Option<&BTreeSet<String>> {
        self.groups.get(&name.to_uppercase())
    }

    /// Resolves a slice name against these groups and the countries that
    /// occur in a corpus.
    pub fn resolve(&self, name: &str, countries: &BTreeSet<String>) -> Result<Slice> {
        let key = name.trim();
        let lower = key.to_lowercase();
        if lower == "all" {
            return Ok(Slice::All);
        }
        if matches!(lower.as_str(), "internationally coauthored" | "international" | "intl" | "internat. coauthored") {
            return Ok(Slice::InternationallyCoauthored);
        }
        let upper = key.to_uppercase();
        if let Some(members) = self.groups.get(&upper) {
            return Ok(Slice::Aggregate {
                name: upper,
                members: members.clone(),
            });
        }
        if countries.contains(&upper) {
            return Ok(Slice::Country(upper));
        }
        let mut known = vec!["all".to_string(), INTERNATIONAL.to_string()];
        known.extend(self.groups.keys().cloned());
        known.extend(countries.iter().cloned());
        Err(Error::UnknownSlice {
            name: key.to_string(),
            known,
        })
    }
}

/// Every country designator occurring in a corpus.
pub fn corpus_countries<'a, I: IntoIterator<Item = &'a Document>>(documents: I) -> BTreeSet<String> {
    documents
        .into_iter()
        .flat_map(|d| d.addresses.iter().filter_map(|a| a.country().map(str::to_string)))
        .collect()
}

/// One indicator row over a slice of a corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct HelixRow {
    pub slice_name: String,
    /// Records in the slice.
    pub records: u64,
    /// Records in the slice with at least one address.
    pub with_address: u64,
    /// Identified records: the union of the seven cells.
    pub number: u64,
    /// `number / with_address × 100`, one decimal; `None` for an empty slice.
    pub pct_identified: Option<f64>,
    /// `None` when the sample space is empty.
    pub t_uig_mbits: Option<f64>,
    pub cells: VennCells,
}

impl HelixRow {
    pub fn from_cells(slice_name: impl Into<String>, cells: VennCells, with_address: u64, sample_space: SampleSpace) -> Result<Self> {
        let number = cells.union();
        let outside = match sample_space {
            SampleSpace::IdentifiedOnly => 0,
            SampleSpace::IncludeUnidentified => with_address.saturating_sub(number),
        };
        let cube = cells.to_cube(outside);
        let t_uig_mbits = if cube.n() == 0 {
            None
        } else {
            Some(transmission3::<f64>(&cube)?.t_uig_mbits)
        };
        Ok(Self {
            slice_name: slice_name.into(),
            records: with_address,
            with_address,
            number,
            pct_identified: (with_address > 0).then(|| round1(100.0 * number as f64 / with_address as f64)),
            t_uig_mbits,
            cells,
        })
    }

    pub fn univ_total(&self) -> u64 {
        self.cells.univ_total()
    }

    pub fn ind_total(&self) -> u64 {
        self.cells.ind_total()
    }

    pub fn gov_total(&self) -> u64 {
        self.cells.gov_total()
    }
}

pub fn helix_report(documents: &[Document], rules: &RuleSet, slice: &Slice, sample_space: SampleSpace) -> Result<HelixRow> {
    let mut cells = VennCells::default();
    let (mut records, mut with_address) = (0, 0);
    for doc in documents.iter().filter(|d| slice.contains(d)) {
        records += 1;
        if !doc.addresses.is_empty() {
            with_address += 1;
        }
        cells.add_profile(profile_document(doc, rules));
    }
    let mut row = HelixRow::from_cells(slice.name(), cells, with_address, sample_space)?;
    row.records = records;
    Ok(row)
}

/// Writes rows with columns mirroring the published indicator table.
pub fn write_helix_rows<W: Write>(writer: W, rows: &[HelixRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record([
        "slice", "number", "pct_identified", "t_uig_mbits", "ui", "ug", "ig", "uig", "univ", "industry", "govern",
    ])?;
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.1}")).unwrap_or_default();
    for r in rows {
        out.write_record([
            r.slice_name.clone(),
            r.number.to_string(),
            opt(r.pct_identified),
            opt(r.t_uig_mbits),
            r.cells.ui.to_string(),
            r.cells.ug.to_string(),
            r.cells.ig.to_string(),
            r.cells.uig.to_string(),
            r.univ_total().to_string(),
            r.ind_total().to_string(),
            r.gov_total().to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum CountingMode {
    /// Each distinct country on a document gets one full count.
    #[default]
    Integer,
    /// Each document is shared out pro rata by address.
    Fractional,
}

impl FromStr for CountingMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "integer" => Ok(Self::Integer),
            "fractional" => Ok(Self::Fractional),
            other => Err(format!("unknown counting mode `{other}`")),
        }
    }
}

/// Documents per country. In fractional mode a document's weight of one is
/// split over the countries of its country-bearing addresses.
pub fn country_counts<'a, I>(documents: I, mode: CountingMode) -> BTreeMap<String, f64>
where
    I: IntoIterator<Item = &'a Document>,
{
    let mut totals: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for doc in documents {
        match mode {
            CountingMode::Integer => {
                for c in doc.countries() {
                    totals.entry(c.to_string()).or_default().push(1.0);
                }
            }
            CountingMode::Fractional => {
                let mut per: BTreeMap<&str, usize> = BTreeMap::new();
                for c in doc.addresses.iter().filter_map(|a| a.country()) {
                    *per.entry(c).or_default() += 1;
                }
                let n: usize = per.values().sum();
                for (c, k) in per {
                    totals.entry(c.to_string()).or_default().push(k as f64 / n as f64);
                }
            }
        }
    }
    totals
        .into_iter()
        .map(|(c, parts)| (c, compensated_sum(parts)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub year: i32,
    pub t_mbits: f64,
}

/// `T(uig)` per year over the union of the three sets.
pub fn t_trajectory(series: &[YearlyHits]) -> Result<Vec<TrajectoryPoint>> {
    for w in series.windows(2) {
        if w[1].year <= w[0].year {
            return Err(Error::YearOrder {
                previous: w[0].year,
                next: w[1].year,
            });
        }
    }
    series
        .iter()
        .map(|h| {
            let cube = venn_from_inclusive(h)?.to_cube(0);
            if cube.n() == 0 {
                return Err(Error::InconsistentCounts {
                    year: Some(h.year),
                    cell: "union",
                    detail: "is empty".into(),
                });
            }
            Ok(TrajectoryPoint {
                year: h.year,
                t_mbits: transmission3::<f64>(&cube)?.t_uig_mbits,
            })
        })
        .collect()
}

pub fn write_trajectory<W: Write>(writer: W, points: &[TrajectoryPoint]) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(["year", "t_mbits"])?;
    for p in points {
        out.write_record([p.year.to_string(), format!("{:.1}", p.t_mbits)])?;
    }
    out.flush()?;
    Ok(())
}

/// Ordinary least-squares line `t = intercept + slope · year`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearTrend<F> {
    pub slope: F,
    pub intercept: F,
    pub r_squared: F,
}

/// Fits the points at or after `from_year`.
pub fn linear_trend<F: Scalar>(points: &[(i32, F)], from_year: i32) -> Result<LinearTrend<F>> {
    let used: Vec<(F, F)> = points
        .iter()
        .filter(|(year, _)| *year >= from_year)
        .map(|&(year, t)| (F::of(f64::from(year)), t))
        .collect();
    if used.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: used.len(),
        });
    }
    let n = F::of(used.len() as f64);
    let mean_x = compensated_sum(used.iter().map(|p| p.0)) / n;
    let mean_y = compensated_sum(used.iter().map(|p| p.1)) / n;
    let sxx = compensated_sum(used.iter().map(|p| (p.0 - mean_x) * (p.0 - mean_x)));
    let sxy = compensated_sum(used.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)));
    let syy = compensated_sum(used.iter().map(|p| (p.1 - mean_y) * (p.1 - mean_y)));
    if sxx == F::zero() {
        return Err(Error::InvalidSeries("all points share one year".into()));
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let r_squared = if syy == F::zero() {
        F::one()
    } else {
        (sxy * sxy / (sxx * syy)).min(F::one()).max(F::zero())
    };
    Ok(LinearTrend {
        slope,
        intercept,
        r_squared,
    })
}

pub fn write_trend<W: Write>(writer: W, trend: &LinearTrend<f64>) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(["slope", "intercept", "r2"])?;
    out.write_record([
        format!("{:.3}", trend.slope),
        format!("{:.3}", trend.intercept),
        format!("{:.4}", trend.r_squared),
    ])?;
    out.flush()?;
    Ok(())
}

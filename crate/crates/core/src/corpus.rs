//! Field-tagged bibliographic records.
//!
//! A record is a block of `TAG value` lines closed by a line reading `ER`.
//! `UT` (id) and `PY` (year) are required, `C1` carries one address per line
//! and may be repeated, `AU` carries one author per line. A line that starts
//! with whitespace continues the previous tag, so
//!
//! ```text
//! UT A1
//! PY 2000
//! C1 UNIV AMSTERDAM, NETHERLANDS
//!    PHILIPS RES LABS, EINDHOVEN, NETHERLANDS
//! ER
//! ```
//!
//! holds two addresses. Any other tag is kept verbatim on the document so the
//! record can be written back out unchanged.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::io::{BufRead, Read, Write};
use std::str::FromStr;
use std::sync::OnceLock;

use serde::Deserialize;

use crate::error::{Error, Result};

pub const MIN_YEAR: i32 = 1900;
pub const MAX_YEAR: i32 = 2100;

/// Uppercases and splits on every non-alphanumeric character.
pub fn tokenize(raw: &str) -> Vec<String> {
    raw.to_uppercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Address {
    raw: String,
    tokens: Vec<String>,
    country: Option<String>,
}

impl Address {
    /// Tokenizes `raw` and resolves its country with the default alias table.
    pub fn new(raw: impl Into<String>) -> Self {
        static DEFAULT: OnceLock<CountryAliases> = OnceLock::new();
        Self::with_aliases(raw, DEFAULT.get_or_init(CountryAliases::default))
    }

    pub fn with_aliases(raw: impl Into<String>, aliases: &CountryAliases) -> Self {
        let raw = raw.into();
        let tokens = tokenize(&raw);
        let mut address = Self {
            raw,
            tokens,
            country: None,
        };
        address.country = extract_country(&address, aliases).unwrap_or(None);
        address
    }

    pub fn raw(&self) -> &str {
        &self.raw
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn country(&self) -> Option<&str> {
        self.country.as_deref()
    }
}

/// Maps trailing address segments onto canonical country designators.
///
/// In permissive mode (the default) a segment without an alias passes
/// through unchanged; in strict mode it is rejected and the address gets no
/// country.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountryAliases {
    aliases: HashMap<String, String>,
    strict: bool,
}

const DEFAULT_ALIASES: &[(&str, &str)] = &[
    ("ENGLAND", "UK"),
    ("SCOTLAND", "UK"),
    ("WALES", "UK"),
    ("NORTH IRELAND", "UK"),
    ("NORTHERN IRELAND", "UK"),
    ("FED REP GER", "GERMANY"),
    ("W GERMANY", "GERMANY"),
    ("CHINA", "PEOPLES R CHINA"),
    ("RUSSIAN FEDERATION", "RUSSIA"),
    ("THE NETHERLANDS", "NETHERLANDS"),
    ("NETHERL", "NETHERLANDS"),
];

impl Default for CountryAliases {
    fn default() -> Self {
        let mut table = Self::empty();
        for (alias, canonical) in DEFAULT_ALIASES {
            table.insert(alias, canonical);
        }
        table
    }
}

#[derive(Deserialize)]
struct AliasRow {
    alias: String,
    canonical: String,
}

impl CountryAliases {
    pub fn empty() -> Self {
        Self {
            aliases: HashMap::new(),
            strict: false,
        }
    }

    pub fn strict(mut self, strict: bool) -> Self {
        self.strict = strict;
        self
    }

    pub fn insert(&mut self, alias: &str, canonical: &str) {
        self.aliases
            .insert(normalize_segment(alias), normalize_segment(canonical));
    }

    /// Reads an `alias,canonical` CSV on top of the built-in defaults.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut table = Self::default();
        for row in csv::Reader::from_reader(reader).deserialize() {
            let row: AliasRow = row?;
            table.insert(&row.alias, &row.canonical);
        }
        Ok(table)
    }

    pub fn resolve(&self, segment: &str) -> Option<String> {
        let key = normalize_segment(segment);
        if key.is_empty() {
            return None;
        }
        if let Some(canonical) = self.aliases.get(&key) {
            return Some(canonical.clone());
        }
        // US addresses end in "STATE ZIP USA" when the zip is not its own segment
        if key.ends_with(" USA") && key.split(' ').any(|t| t.chars().all(|c| c.is_ascii_digit())) {
            return Some("USA".into());
        }
        (!self.strict).then_some(key)
    }
}

fn normalize_segment(segment: &str) -> String {
    segment
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_uppercase()
}

/// Country designator of an address: its last comma-separated segment,
/// mapped through `aliases`.
pub fn extract_country(address: &Address, aliases: &CountryAliases) -> Result<Option<String>> {
    if address.tokens.is_empty() {
        return Err(Error::EmptyAddress);
    }
    let segment = address.raw.rsplit(',').next().unwrap_or_default();
    Ok(aliases.resolve(segment))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub id: String,
    pub year: i32,
    pub addresses: Vec<Address>,
    pub authors: Vec<String>,
    /// Tags this crate does not interpret, in input order.
    pub extra: Vec<(String, String)>,
}

impl Document {
    pub fn new(id: impl Into<String>, year: i32) -> Self {
        Self {
            id: id.into(),
            year,
            addresses: Vec::new(),
            authors: Vec::new(),
            extra: Vec::new(),
        }
    }

    pub fn with_addresses<S: AsRef<str>>(mut self, raw: &[S]) -> Self {
        self.addresses
            .extend(raw.iter().map(|r| Address::new(r.as_ref())));
        self
    }

    pub fn author_count(&self) -> usize {
        self.authors.len()
    }

    /// Distinct countries across the document's addresses.
    pub fn countries(&self) -> BTreeSet<&str> {
        self.addresses.iter().filter_map(Address::country).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RecordFormat {
    #[default]
    FieldTagged,
}

impl FromStr for RecordFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "fieldtagged" | "field-tagged" | "isi" | "wos" => Ok(Self::FieldTagged),
            other => Err(format!("unknown record format `{other}`")),
        }
    }
}

/// Streaming reader yielding one [`Document`] per record block.
///
/// Memory use is one record plus the set of ids seen so far, which is needed
/// to reject duplicates.
pub struct RecordReader<R> {
    lines: std::io::Lines<R>,
    line_no: usize,
    seen: HashSet<String>,
    aliases: CountryAliases,
    done: bool,
}

impl<R: BufRead> RecordReader<R> {
    pub fn new(input: R) -> Self {
        Self::with_aliases(input, CountryAliases::default())
    }

    pub fn with_aliases(input: R, aliases: CountryAliases) -> Self {
        Self {
            lines: input.lines(),
            line_no: 0,
            seen: HashSet::new(),
            aliases,
            done: false,
        }
    }

    fn parse_error(&self, line: usize, message: impl Into<String>) -> Error {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    fn next_record(&mut self) -> Result<Option<Document>> {
        let mut id: Option<(usize, String)> = None;
        let mut year: Option<i32> = None;
        let mut addresses = Vec::new();
        let mut authors = Vec::new();
        let mut extra = Vec::new();
        let mut last_tag: Option<String> = None;
        let mut start = None;

        loop {
            let Some(line) = self.lines.next() else {
                return match start {
                    None => Ok(None),
                    Some(start) => Err(self.parse_error(
                        self.line_no,
                        format!("record starting at line {start} has no ER terminator"),
                    )),
                };
            };
            let line = line?;
            self.line_no += 1;
            let line_no = self.line_no;
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            start.get_or_insert(line_no);

            let (tag, value) = if line.starts_with(char::is_whitespace) {
                let Some(tag) = last_tag.clone() else {
                    return Err(self.parse_error(line_no, "continuation line without a tag"));
                };
                (tag, line.trim().to_string())
            } else {
                let mut parts = line.splitn(2, char::is_whitespace);
                let tag = parts.next().unwrap_or_default().to_string();
                let value = parts.next().unwrap_or_default().trim().to_string();
                (tag, value)
            };

            match tag.as_str() {
                "ER" => {
                    let Some((id_line, id)) = id else {
                        return Err(self.parse_error(line_no, "record has no UT field"));
                    };
                    let Some(year) = year else {
                        return Err(self.parse_error(line_no, format!("record `{id}` has no PY field")));
                    };
                    if !self.seen.insert(id.clone()) {
                        return Err(Error::DuplicateId { line: id_line, id });
                    }
                    return Ok(Some(Document {
                        id,
                        year,
                        addresses,
                        authors,
                        extra,
                    }));
                }
                "UT" => {
                    if id.is_some() {
                        return Err(self.parse_error(
                            line_no,
                            "second UT inside a record (missing ER terminator?)",
                        ));
                    }
                    if value.is_empty() {
                        return Err(self.parse_error(line_no, "empty UT"));
                    }
                    id = Some((line_no, value));
                }
                "PY" => {
                    let parsed: i32 = value
                        .parse()
                        .map_err(|_| self.parse_error(line_no, format!("non-numeric year `{value}`")))?;
                    if !(MIN_YEAR..=MAX_YEAR).contains(&parsed) {
                        return Err(self.parse_error(
                            line_no,
                            format!("year {parsed} outside [{MIN_YEAR}, {MAX_YEAR}]"),
                        ));
                    }
                    year = Some(parsed);
                }
                "C1" => {
                    if !value.is_empty() {
                        addresses.push(Address::with_aliases(value, &self.aliases));
                    }
                }
                "AU" => {
                    if !value.is_empty() {
                        authors.push(value);
                    }
                }
                _ => extra.push((tag.clone(), value)),
            }
            last_tag = Some(tag);
        }
    }
}

impl<R: BufRead> Iterator for RecordReader<R> {
    type Item = Result<Document>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let item = self.next_record().transpose();
        if !matches!(item, Some(Ok(_))) {
            self.done = true;
        }
        item
    }
}

/// Parses a whole record stream.
pub fn parse_records<R: BufRead>(input: R, format: RecordFormat) -> Result<Vec<Document>> {
    match format {
        RecordFormat::FieldTagged => RecordReader::new(input).collect(),
    }
}

/// Writes documents in the field-tagged format, one block per document.
pub fn write_records<W: Write>(mut out: W, documents: &[Document]) -> Result<()> {
    for doc in documents {
        write_record(&mut out, doc)?;
    }
    Ok(())
}

pub fn write_record<W: Write>(out: &mut W, doc: &Document) -> Result<()> {
    writeln!(out, "UT {}", doc.id)?;
    writeln!(out, "PY {}", doc.year)?;
    for (i, author) in doc.authors.iter().enumerate() {
        let tag = if i == 0 { "AU" } else { "  " };
        writeln!(out, "{tag} {author}")?;
    }
    for (i, address) in doc.addresses.iter().enumerate() {
        let tag = if i == 0 { "C1" } else { "  " };
        writeln!(out, "{tag} {}", address.raw)?;
    }
    for (tag, value) in &doc.extra {
        writeln!(out, "{tag} {value}")?;
    }
    writeln!(out, "ER")?;
    writeln!(out)?;
    Ok(())
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CorpusStats {
    pub total_records: u64,
    pub total_addresses: u64,
    pub records_without_address: u64,
    pub records_by_country: BTreeMap<String, u64>,
}

impl CorpusStats {
    pub fn add(&mut self, doc: &Document) {
        self.total_records += 1;
        self.total_addresses += doc.addresses.len() as u64;
        if doc.addresses.is_empty() {
            self.records_without_address += 1;
        }
        for country in doc.countries() {
            *self.records_by_country.entry(country.to_string()).or_default() += 1;
        }
    }

    pub fn records_with_address(&self) -> u64 {
        self.total_records - self.records_without_address
    }

    /// Share of records lacking any address, in percent.
    pub fn pct_without_address(&self) -> Option<f64> {
        (self.total_records > 0)
            .then(|| 100.0 * self.records_without_address as f64 / self.total_records as f64)
    }
}

pub fn corpus_stats<'a, I: IntoIterator<Item = &'a Document>>(documents: I) -> CorpusStats {
    let mut stats = CorpusStats::default();
    for doc in documents {
        stats.add(doc);
    }
    stats
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_RECORDS: &str = "UT A1\nPY 2000\nC1 UNIV AMSTERDAM, NETHERLANDS\nER\n\nUT A2\nPY 2000\nER\n";

    fn parse(text: &str) -> Result<Vec<Document>> {
        parse_records(text.as_bytes(), RecordFormat::FieldTagged)
    }

    #[test]
    fn minimal_file() {
        let docs = parse(TWO_RECORDS).unwrap();
        assert_eq!(docs.len(), 2);
        assert_eq!(docs[0].id, "A1");
        assert_eq!(docs[0].addresses[0].raw(), "UNIV AMSTERDAM, NETHERLANDS");
        assert_eq!(docs[0].addresses[0].tokens(), ["UNIV", "AMSTERDAM", "NETHERLANDS"]);
        assert!(docs[1].addresses.is_empty());
    }

    #[test]
    fn bad_year_names_its_line() {
        let err = parse("UT A1\nPY 20X0\nER\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        assert!(parse("UT A1\nPY 1850\nER\n").is_err());
    }

    #[test]
    fn structural_errors() {
        assert!(matches!(parse("UT A1\nPY 2000\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(
            parse("UT A1\nPY 2000\nUT A2\nPY 2000\nER\n"),
            Err(Error::Parse { line: 3, .. })
        ));
        assert!(matches!(parse("PY 2000\nER\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse("UT A1\nER\n"), Err(Error::Parse { .. })));
        assert!(matches!(
            parse("UT A1\nPY 2000\nER\nUT A1\nPY 2001\nER\n"),
            Err(Error::DuplicateId { line: 4, .. })
        ));
        assert!(matches!(parse("  orphan\nER\n"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn continuation_lines_and_unknown_tags() {
        let text = "UT X\nPY 1999\nAU SMITH J\n   DOE A\nC1 UNIV LEIDEN, NETHERLANDS\n   IBM CORP, YORKTOWN HTS, NY 10598, USA\nSO NATURE\nER\n";
        let docs = parse(text).unwrap();
        let doc = &docs[0];
        assert_eq!(doc.author_count(), 2);
        assert_eq!(doc.addresses.len(), 2);
        assert_eq!(doc.extra, vec![("SO".to_string(), "NATURE".to_string())]);
        assert_eq!(doc.countries().into_iter().collect::<Vec<_>>(), ["NETHERLANDS", "USA"]);
    }

    #[test]
    fn country_extraction() {
        let aliases = CountryAliases::default();
        let country = |raw: &str| extract_country(&Address::new(raw), &aliases).unwrap();
        assert_eq!(country("UNIV AMSTERDAM, NETHERLANDS").as_deref(), Some("NETHERLANDS"));
        assert_eq!(country("IBM CORP, YORKTOWN HTS, NY 10598, USA").as_deref(), Some("USA"));
        assert_eq!(country("BELL LABS, MURRAY HILL, NJ 07974 USA").as_deref(), Some("USA"));
        assert_eq!(country("TSING HUA UNIV, BEIJING, PEOPLES R CHINA").as_deref(), Some("PEOPLES R CHINA"));
        assert_eq!(country("UNIV OXFORD, OXFORD, ENGLAND").as_deref(), Some("UK"));
        assert!(matches!(
            extract_country(&Address::new(""), &aliases),
            Err(Error::EmptyAddress)
        ));
        assert!(matches!(
            extract_country(&Address::new(" , ;"), &aliases),
            Err(Error::EmptyAddress)
        ));

        let strict = CountryAliases::default().strict(true);
        assert_eq!(extract_country(&Address::new("UNIV X, ATLANTIS"), &strict).unwrap(), None);
        assert_eq!(
            extract_country(&Address::new("UNIV X, SCOTLAND"), &strict).unwrap().as_deref(),
            Some("UK")
        );
    }

    #[test]
    fn alias_csv_extends_defaults() {
        let table = CountryAliases::from_csv("alias,canonical\nUSSR,RUSSIA\n".as_bytes()).unwrap();
        assert_eq!(table.resolve(" ussr ").as_deref(), Some("RUSSIA"));
        assert_eq!(table.resolve("WALES").as_deref(), Some("UK"));
    }

    #[test]
    fn stats() {
        assert_eq!(corpus_stats(&[]), CorpusStats::default());
        let doc = Document::new("D", 2000).with_addresses(&["UNIV LONDON, ENGLAND", "MIT, CAMBRIDGE, MA 02139, USA", "UCL, ENGLAND"]);
        let stats = corpus_stats([&doc]);
        assert_eq!(stats.total_addresses, 3);
        assert_eq!(stats.records_by_country.get("UK"), Some(&1));
        assert_eq!(stats.records_by_country.get("USA"), Some(&1));
        assert_eq!(stats.pct_without_address(), Some(0.0));
    }

    #[test]
    fn write_then_parse_is_identity() {
        let docs = parse("UT X\nPY 1999\nAU SMITH J\n   DOE A\nC1 UNIV LEIDEN, NETHERLANDS\n   IBM CORP, USA\nSO NATURE\nER\n")
            .unwrap();
        let mut buf = Vec::new();
        write_records(&mut buf, &docs).unwrap();
        assert_eq!(parse(std::str::from_utf8(&buf).unwrap()).unwrap(), docs);
    }
}

//! Seeded generators with known ground truth.
//!
//! All randomness comes from `ChaCha8Rng` seeded with a `u64`, so a spec and
//! seed produce the same bytes on every platform. Exact-allocation mode
//! replaces sampling by largest-remainder rounding of `n × p` so published
//! tables can be embedded without sampling noise.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use rand::distr::weighted::WeightedIndex;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Normal, Poisson};

use crate::classifier::{RuleSet, SectorProfile};
use crate::corpus::{tokenize, MAX_YEAR, MIN_YEAR};
use crate::error::{Error, Result};
use crate::helix::{VennCells, YearlyHits};
use crate::infotheory::{trilateral_bits, ContingencyCube, MILLIBITS_PER_BIT};
use crate::systemness::CategorySeries;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidSpec(msg.into())
}

/// Splits `n` over `weights` in proportion, rounding by largest remainder.
/// Ties go to the earlier weight.
pub fn largest_remainder(n: u64, weights: &[f64]) -> Result<Vec<u64>> {
    let total: f64 = weights.iter().sum();
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) || total <= 0.0 || total.is_nan() {
        return Err(invalid("weights must be non-negative and not all zero"));
    }
    let quotas: Vec<f64> = weights.iter().map(|w| n as f64 * w / total).collect();
    let mut counts: Vec<u64> = quotas.iter().map(|q| q.floor() as u64).collect();
    let assigned: u64 = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().cycle().take(n.saturating_sub(assigned) as usize) {
        counts[i] += 1;
    }
    Ok(counts)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Allocation {
    #[default]
    Sampled,
    Exact,
}

/// How sector presence is coupled across the three sectors.
#[derive(Debug, Clone, PartialEq)]
pub enum Coupling {
    Independent,
    /// With probability ρ all three indicators are driven by one shared
    /// uniform draw (comonotone), otherwise independently. Marginals are kept.
    Coordinated(f64),
    /// Equal mass on (0,0,0), (0,1,1), (1,0,1), (1,1,0); marginals are ½.
    BilateralXor,
    /// Cell weights indexed as in [`ContingencyCube`].
    ExplicitCube([f64; 8]),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSpec {
    pub n_documents: u64,
    pub years: (i32, i32),
    pub p_u: f64,
    pub p_i: f64,
    pub p_g: f64,
    pub coupling: Coupling,
    pub countries: Vec<(String, f64)>,
    pub seed: u64,
    pub allocation: Allocation,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            n_documents: 1000,
            years: (2000, 2000),
            p_u: 0.5,
            p_i: 0.1,
            p_g: 0.3,
            coupling: Coupling::Independent,
            countries: vec![("USA".into(), 1.0)],
            seed: 0,
            allocation: Allocation::Sampled,
        }
    }
}

fn indicator_joint(p: [f64; 3], draw_cell: impl Fn(f64) -> usize) -> [f64; 8] {
    // comonotone joint: integrate the cell pattern of U over [0, 1]
    let mut cuts = [0.0, 1.0, p[0], p[1], p[2]];
    cuts.sort_by(f64::total_cmp);
    let mut joint = [0.0; 8];
    for w in cuts.windows(2) {
        if w[1] > w[0] {
            joint[draw_cell(0.5 * (w[0] + w[1]))] += w[1] - w[0];
        }
    }
    joint
}

impl CorpusSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("p_u", self.p_u), ("p_i", self.p_i), ("p_g", self.p_g)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(invalid(format!("{name} = {p} outside [0, 1]")));
            }
        }
        if self.years.0 > self.years.1 || self.years.0 < MIN_YEAR || self.years.1 > MAX_YEAR {
            return Err(invalid(format!("bad year range {:?}", self.years)));
        }
        match &self.coupling {
            Coupling::Coordinated(rho) if !(0.0..=1.0).contains(rho) => {
                return Err(invalid(format!("coordination {rho} outside [0, 1]")))
            }
            Coupling::ExplicitCube(w) if w.iter().any(|x| !x.is_finite() || *x < 0.0) || w.iter().sum::<f64>() <= 0.0 => {
                return Err(invalid("cube weights must be non-negative and not all zero"))
            }
            _ => {}
        }
        if self.countries.is_empty() {
            return Err(invalid("country mix is empty"));
        }
        let weights: Vec<f64> = self.countries.iter().map(|c| c.1).collect();
        largest_remainder(1, &weights)?;
        let rules = RuleSet::default();
        for (country, _) in &self.countries {
            let tokens = tokenize(country);
            if tokens.is_empty() || country.contains(',') {
                return Err(invalid(format!("bad country name `{country}`")));
            }
            if let Some(t) = tokens.iter().find(|t| rules.is_identifier(t)) {
                return Err(invalid(format!("country `{country}` contains sector identifier `{t}`")));
            }
        }
        Ok(())
    }

    /// The eight-cell joint the profiles are drawn from.
    pub fn joint(&self) -> [f64; 8] {
        let p = [self.p_u, self.p_i, self.p_g];
        let product = {
            let mut j = [0.0; 8];
            for (cell, slot) in j.iter_mut().enumerate() {
                *slot = (0..3)
                    .map(|axis| {
                        let on = cell & (0b100 >> axis) != 0;
                        if on { p[axis] } else { 1.0 - p[axis] }
                    })
                    .product();
            }
            j
        };
        match &self.coupling {
            Coupling::Independent => product,
            Coupling::Coordinated(rho) => {
                let comonotone = indicator_joint(p, |x| {
                    ContingencyCube::index(x < p[0], x < p[1], x < p[2])
                });
                let mut j = [0.0; 8];
                for c in 0..8 {
                    j[c] = (1.0 - rho) * product[c] + rho * comonotone[c];
                }
                j
            }
            Coupling::BilateralXor => [0.25, 0.0, 0.0, 0.25, 0.0, 0.25, 0.25, 0.0],
            Coupling::ExplicitCube(w) => {
                let total: f64 = w.iter().sum();
                w.map(|x| x / total)
            }
        }
    }
}

fn profile_of(cell: usize) -> SectorProfile {
    SectorProfile::new(cell & 0b100 != 0, cell & 0b010 != 0, cell & 0b001 != 0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedProfiles {
    pub profiles: Vec<SectorProfile>,
    /// Realized counts, including cell (0,0,0).
    pub realized: ContingencyCube,
}

pub fn gen_profiles(spec: &CorpusSpec) -> Result<GeneratedProfiles> {
    spec.validate()?;
    let joint = spec.joint();
    let mut rng = rng(spec.seed);
    let mut realized = ContingencyCube::new();
    let profiles = match spec.allocation {
        Allocation::Sampled => {
            let index = WeightedIndex::new(joint).map_err(|e| invalid(e.to_string()))?;
            (0..spec.n_documents)
                .map(|_| {
                    let cell = index.sample(&mut rng);
                    let p = profile_of(cell);
                    realized.add(p.has_u, p.has_i, p.has_g, 1);
                    p
                })
                .collect()
        }
        Allocation::Exact => {
            let counts = largest_remainder(spec.n_documents, &joint)?;
            realized = ContingencyCube::from_cells(counts.clone().try_into().expect("eight cells"));
            let mut profiles: Vec<SectorProfile> = counts
                .iter()
                .enumerate()
                .flat_map(|(cell, &k)| std::iter::repeat_n(profile_of(cell), k as usize))
                .collect();
            profiles.shuffle(&mut rng);
            profiles
        }
    };
    Ok(GeneratedProfiles { profiles, realized })
}

fn sector_addresses(p: SectorProfile, serial: u64, country: &str) -> Vec<String> {
    let mut out = Vec::new();
    if p.has_u {
        out.push(format!("UNIV CITY{serial}, DEPT CHEM, {country}"));
    }
    if p.has_i {
        out.push(format!("FIRM{serial} CORP, RES LABS, {country}"));
    }
    if p.has_g {
        out.push(format!("NATL LAB{serial}, {country}"));
    }
    if out.is_empty() {
        out.push(format!("RES CTR{serial}, {country}"));
    }
    out
}

fn push_record(out: &mut String, id: &str, year: i32, addresses: &[String]) {
    let _ = writeln!(out, "UT {id}\nPY {year}");
    for (i, a) in addresses.iter().enumerate() {
        let _ = writeln!(out, "{} {a}", if i == 0 { "C1" } else { "  " });
    }
    out.push_str("ER\n\n");
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedCorpus {
    /// Field-tagged record text.
    pub records: String,
    pub profiles: Vec<SectorProfile>,
    pub realized: ContingencyCube,
}

/// A record file whose addresses carry one identifier per present sector.
/// Documents with no sector get a single unidentifiable address.
pub fn gen_corpus(spec: &CorpusSpec) -> Result<GeneratedCorpus> {
    let GeneratedProfiles { profiles, realized } = gen_profiles(spec)?;
    // a second stream keeps profile draws independent of year/country draws
    let mut rng = rng(spec.seed ^ 0x9e37_79b9_7f4a_7c15);
    let span = (spec.years.1 - spec.years.0 + 1) as u64;
    let weights: Vec<f64> = spec.countries.iter().map(|c| c.1).collect();
    let countries: Vec<usize> = match spec.allocation {
        Allocation::Sampled => {
            let index = WeightedIndex::new(&weights).map_err(|e| invalid(e.to_string()))?;
            (0..profiles.len()).map(|_| index.sample(&mut rng)).collect()
        }
        Allocation::Exact => largest_remainder(profiles.len() as u64, &weights)?
            .iter()
            .enumerate()
            .flat_map(|(c, &k)| std::iter::repeat_n(c, k as usize))
            .collect(),
    };

    let mut records = String::new();
    for (k, (profile, &country)) in profiles.iter().zip(&countries).enumerate() {
        let k = k as u64;
        let year = spec.years.0
            + match spec.allocation {
                Allocation::Sampled => rng.random_range(0..span),
                Allocation::Exact => k % span,
            } as i32;
        let addresses = sector_addresses(*profile, k, &spec.countries[country].0);
        push_record(&mut records, &format!("SYN{k:07}"), year, &addresses);
    }
    Ok(GeneratedCorpus {
        records,
        profiles,
        realized,
    })
}

/// Record-level and address-level mix of a whole corpus, realized exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct AddressMixSpec {
    pub year: i32,
    pub records: u64,
    pub records_without_address: u64,
    /// Identified records by sector combination.
    pub cells: VennCells,
    /// Address counts labelled university, industry, government, none.
    pub address_labels: [u64; 4],
    pub countries: Vec<(String, f64)>,
    pub seed: u64,
}

impl AddressMixSpec {
    /// Size and mix of the Science Citation Index 2000 as published, down to
    /// the address labels and the identified-record cells.
    pub fn sci_2000() -> Self {
        Self {
            year: 2000,
            records: 778_446,
            records_without_address: 53_092,
            cells: VennCells {
                u_only: 412_733,
                i_only: 15_412,
                g_only: 113_617,
                ui: 16_270,
                ug: 108_919,
                ig: 4_359,
                uig: 5_201,
            },
            address_labels: [878_427, 46_952, 314_469, 192_553],
            countries: vec![("USA".into(), 1.0)],
            seed: 2000,
        }
    }

    pub fn total_addresses(&self) -> u64 {
        self.address_labels.iter().sum()
    }
}

/// Deterministic spread of `extra` items over `slots`, earlier slots first.
fn spread(extra: u64, slots: u64, position: u64) -> u64 {
    match extra.checked_div(slots) {
        None => 0,
        Some(q) => q + u64::from(position < extra % slots),
    }
}

pub fn gen_address_mix(spec: &AddressMixSpec) -> Result<String> {
    let with_address = spec
        .records
        .checked_sub(spec.records_without_address)
        .ok_or_else(|| invalid("more records without address than records"))?;
    let identified = spec.cells.union();
    let unidentified_docs = with_address
        .checked_sub(identified)
        .ok_or_else(|| invalid("more identified records than records with addresses"))?;
    let required = [
        spec.cells.univ_total(),
        spec.cells.ind_total(),
        spec.cells.gov_total(),
        unidentified_docs,
    ];
    let mut extra = [0u64; 4];
    for (k, (&have, &need)) in spec.address_labels.iter().zip(&required).enumerate() {
        extra[k] = have.checked_sub(need).ok_or_else(|| {
            invalid(format!("address label {k} has {have} addresses but {need} records need one"))
        })?;
    }
    if extra[3] > 0 && with_address == 0 {
        return Err(invalid("unidentified addresses but no record to hold them"));
    }
    let weights: Vec<f64> = spec.countries.iter().map(|c| c.1).collect();
    let country_counts = largest_remainder(with_address, &weights)?;

    // one entry per record: Some(profile) for records with addresses
    let c = &spec.cells;
    let mut docs: Vec<Option<SectorProfile>> = Vec::with_capacity(spec.records as usize);
    for (count, p) in [
        (c.u_only, (true, false, false)),
        (c.i_only, (false, true, false)),
        (c.g_only, (false, false, true)),
        (c.ui, (true, true, false)),
        (c.ug, (true, false, true)),
        (c.ig, (false, true, true)),
        (c.uig, (true, true, true)),
        (unidentified_docs, (false, false, false)),
    ] {
        docs.extend(std::iter::repeat_n(Some(SectorProfile::new(p.0, p.1, p.2)), count as usize));
    }
    docs.extend(std::iter::repeat_n(None, spec.records_without_address as usize));
    docs.shuffle(&mut rng(spec.seed));

    let mut countries = country_counts
        .iter()
        .enumerate()
        .flat_map(|(c, &k)| std::iter::repeat_n(c, k as usize));
    let slots = required[..3].iter().copied().chain([with_address]).collect::<Vec<_>>();
    let mut position = [0u64; 4];
    let mut records = String::with_capacity(spec.records as usize * 100);
    let mut addresses = Vec::new();
    for (k, doc) in docs.iter().enumerate() {
        addresses.clear();
        if let Some(p) = doc {
            let country = &spec.countries[countries.next().expect("one country per record")].0;
            let present = [p.has_u, p.has_i, p.has_g];
            for sector in (0..3).filter(|&s| present[s]) {
                let n = 1 + spread(extra[sector], slots[sector], position[sector]);
                position[sector] += 1;
                for j in 0..n {
                    addresses.push(match sector {
                        0 => format!("UNIV CITY{k}X{j}, {country}"),
                        1 => format!("FIRM{k}X{j} CORP, {country}"),
                        _ => format!("NATL LAB{k}X{j}, {country}"),
                    });
                }
            }
            let mut none = spread(extra[3], slots[3], position[3]);
            position[3] += 1;
            if !p.identified() {
                none += 1;
            }
            for j in 0..none {
                addresses.push(format!("RES CTR{k}Y{j}, {country}"));
            }
        }
        push_record(&mut records, &format!("SCI{k:07}"), spec.year, &addresses);
    }
    Ok(records)
}

/// Generative regimes for category and web-count series.
#[derive(Debug, Clone, PartialEq)]
pub enum SeriesSpec {
    /// Constant category shares, growing total. Unsampled counts are integer
    /// multiples of the first year's, so shares are reproduced exactly.
    MarkovStationary {
        categories: usize,
        start_year: i32,
        years: usize,
        base_total: f64,
        growth: f64,
        sampled: bool,
    },
    /// Each category grows geometrically at its own rate drawn from
    /// `[rate_low, rate_high]`.
    IndependentTrends {
        categories: usize,
        start_year: i32,
        years: usize,
        base_total: f64,
        rate_low: f64,
        rate_high: f64,
        sampled: bool,
    },
    /// Inclusive hit counts whose `T(uig)` follows a line plus Gaussian noise.
    LinearTDecline {
        start_year: i32,
        years: usize,
        t_start_mbits: f64,
        slope_mbits: f64,
        noise_mbits: f64,
        base_population: u64,
        growth: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    MarkovStationary,
    IndependentTrends,
    LinearTDecline,
}

impl FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "markov_stationary" => Ok(Self::MarkovStationary),
            "independent_trends" => Ok(Self::IndependentTrends),
            "linear_t_decline" => Ok(Self::LinearTDecline),
            other => Err(invalid(format!("unknown regime `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GeneratedSeries {
    Categories {
        regime: Regime,
        series: CategorySeries<f64>,
    },
    Hits {
        regime: Regime,
        hits: Vec<YearlyHits>,
    },
}

impl GeneratedSeries {
    pub fn regime(&self) -> Regime {
        match self {
            Self::Categories { regime, .. } | Self::Hits { regime, .. } => *regime,
        }
    }
}

fn category_labels(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("C{i}")).collect()
}

fn poisson(rng: &mut ChaCha8Rng, mean: f64) -> Result<f64> {
    if mean <= 0.0 {
        return Ok(0.0);
    }
    Ok(Poisson::new(mean).map_err(|e| invalid(e.to_string()))?.sample(rng))
}

/// Bilateral-only cells (UI, UG, IG) mixed with a uniform spread over all
/// seven cells; `T` falls monotonically as `w` goes from 0.3 to 1.
fn bilateral_mixture(w: f64) -> [f64; 8] {
    let mut p = [(1.0 - w) / 7.0; 8];
    p[0] = 0.0;
    for cell in [0b110, 0b101, 0b011] {
        p[cell] += w / 3.0;
    }
    p
}

const MIX_LOW: f64 = 0.3;

fn mixture_for_t(target_mbits: f64) -> Result<f64> {
    let t = |w: f64| trilateral_bits(&bilateral_mixture(w)) * MILLIBITS_PER_BIT;
    let (hi_t, lo_t) = (t(MIX_LOW), t(1.0));
    if !(lo_t..=hi_t).contains(&target_mbits) {
        return Err(invalid(format!(
            "T = {target_mbits:.1} mbits outside reachable range [{lo_t:.1}, {hi_t:.1}]"
        )));
    }
    let (mut a, mut b) = (MIX_LOW, 1.0);
    for _ in 0..100 {
        let mid = 0.5 * (a + b);
        if t(mid) > target_mbits {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}

pub fn gen_series(spec: &SeriesSpec, seed: u64) -> Result<GeneratedSeries> {
    let mut rng = rng(seed);
    match *spec {
        SeriesSpec::MarkovStationary {
            categories,
            start_year,
            years,
            base_total,
            growth,
            sampled,
        } => {
            check_shape(categories, years, base_total)?;
            if growth.is_nan() || growth <= 0.0 {
                return Err(invalid("growth must be positive"));
            }
            let shares: Vec<f64> = (0..categories).map(|_| rng.random_range(1.0..10.0)).collect();
            let share_total: f64 = shares.iter().sum();
            let base: Vec<f64> = shares
                .iter()
                .map(|s| (base_total * s / share_total).round().max(1.0))
                .collect();
            let mut counts = Vec::with_capacity(years);
            for t in 0..years {
                let scale = growth.powi(t as i32);
                let row = if sampled {
                    base.iter().map(|b| poisson(&mut rng, b * scale)).collect::<Result<Vec<_>>>()?
                } else {
                    let m = scale.round().max(1.0);
                    base.iter().map(|b| b * m).collect()
                };
                counts.push(row);
            }
            Ok(GeneratedSeries::Categories {
                regime: Regime::MarkovStationary,
                series: CategorySeries::new(category_labels(categories), year_list(start_year, years)?, counts)?,
            })
        }
        SeriesSpec::IndependentTrends {
            categories,
            start_year,
            years,
            base_total,
            rate_low,
            rate_high,
            sampled,
        } => {
            check_shape(categories, years, base_total)?;
            if !(rate_low > 0.0 && rate_low <= rate_high) {
                return Err(invalid("need 0 < rate_low <= rate_high"));
            }
            let start: Vec<f64> = (0..categories)
                .map(|_| base_total / categories as f64 * rng.random_range(0.5..1.5))
                .collect();
            let rates: Vec<f64> = (0..categories)
                .map(|_| {
                    if rate_low == rate_high {
                        rate_low
                    } else {
                        rng.random_range(rate_low..rate_high)
                    }
                })
                .collect();
            let mut counts = Vec::with_capacity(years);
            for t in 0..years {
                let mean: Vec<f64> = start.iter().zip(&rates).map(|(s, r)| s * r.powi(t as i32)).collect();
                counts.push(if sampled {
                    mean.iter().map(|&m| poisson(&mut rng, m)).collect::<Result<Vec<_>>>()?
                } else {
                    mean
                });
            }
            Ok(GeneratedSeries::Categories {
                regime: Regime::IndependentTrends,
                series: CategorySeries::new(category_labels(categories), year_list(start_year, years)?, counts)?,
            })
        }
        SeriesSpec::LinearTDecline {
            start_year,
            years,
            t_start_mbits,
            slope_mbits,
            noise_mbits,
            base_population,
            growth,
        } => {
            if years == 0 || base_population == 0 || growth.is_nan() || growth <= 0.0 || noise_mbits.is_nan() || noise_mbits < 0.0 {
                return Err(invalid("need years > 0, population > 0, growth > 0, noise >= 0"));
            }
            let noise = Normal::new(0.0, noise_mbits).map_err(|e| invalid(e.to_string()))?;
            let mut hits = Vec::with_capacity(years);
            for (t, year) in year_list(start_year, years)?.into_iter().enumerate() {
                let target = t_start_mbits + slope_mbits * t as f64 + noise.sample(&mut rng);
                let w = mixture_for_t(target)?;
                let population = (base_population as f64 * growth.powi(t as i32)).round() as u64;
                let cells = largest_remainder(population, &bilateral_mixture(w))?;
                let cube = ContingencyCube::from_cells(cells.try_into().expect("eight cells"));
                hits.push(VennCells::from_cube(&cube).to_inclusive(year));
            }
            Ok(GeneratedSeries::Hits {
                regime: Regime::LinearTDecline,
                hits,
            })
        }
    }
}

fn check_shape(categories: usize, years: usize, base_total: f64) -> Result<()> {
    if categories == 0 || years == 0 || base_total.is_nan() || base_total <= 0.0 {
        return Err(invalid("need categories > 0, years > 0, base_total > 0"));
    }
    Ok(())
}

fn year_list(start: i32, n: usize) -> Result<Vec<i32>> {
    let end = start as i64 + n as i64 - 1;
    if start < MIN_YEAR || end > MAX_YEAR as i64 {
        return Err(invalid(format!("years {start}..={end} outside [{MIN_YEAR}, {MAX_YEAR}]")));
    }
    Ok((start..=end as i32).collect())
}

/// A generation request read from a flat `key = value` file.
#[derive(Debug, Clone, PartialEq)]
pub enum SynthJob {
    Corpus(CorpusSpec),
    AddressMix(AddressMixSpec),
    Series { spec: SeriesSpec, seed: u64 },
}

impl SynthJob {
    pub fn set_seed(&mut self, seed: u64) {
        match self {
            SynthJob::Corpus(s) => s.seed = seed,
            SynthJob::AddressMix(s) => s.seed = seed,
            SynthJob::Series { seed: s, .. } => *s = seed,
        }
    }
}

struct KeyValues(BTreeMap<String, String>);

impl KeyValues {
    fn get<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.0.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| invalid(format!("bad value `{v}` for `{key}`"))),
        }
    }

    fn str(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }
}

fn parse_countries(text: &str) -> Result<Vec<(String, f64)>> {
    text.split(';')
        .filter(|s| !s.trim().is_empty())
        .map(|part| {
            let (name, weight) = part.rsplit_once(':').unwrap_or((part, "1"));
            let weight: f64 = weight.trim().parse().map_err(|_| invalid(format!("bad country weight in `{part}`")))?;
            Ok((name.trim().to_uppercase(), weight))
        })
        .collect()
}

fn parse_coupling(text: &str) -> Result<Coupling> {
    let (kind, arg) = text.split_once(':').unwrap_or((text, ""));
    match kind.trim() {
        "independent" => Ok(Coupling::Independent),
        "xor" | "bilateral_xor" => Ok(Coupling::BilateralXor),
        "coordinated" => Ok(Coupling::Coordinated(
            arg.trim().parse().map_err(|_| invalid(format!("bad coordination `{arg}`")))?,
        )),
        "explicit" | "explicit_cube" => {
            let w: Vec<f64> = arg
                .split(',')
                .map(|x| x.trim().parse().map_err(|_| invalid(format!("bad cube weight `{x}`"))))
                .collect::<Result<_>>()?;
            Ok(Coupling::ExplicitCube(
                w.try_into().map_err(|_| invalid("explicit cube needs eight weights"))?,
            ))
        }
        other => Err(invalid(format!("unknown coupling `{other}`"))),
    }
}

/// Parses a generator spec file. Blank lines and `#` comments are ignored;
/// `kind` is one of `corpus`, `sci2000`, `series`.
pub fn parse_spec_file(text: &str) -> Result<SynthJob> {
    let mut map = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or_default().trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: i + 1,
            message: format!("expected key = value, got `{line}`"),
        })?;
        map.insert(k.trim().to_lowercase(), v.trim().to_string());
    }
    let kv = KeyValues(map);
    let seed = kv.get("seed", 0u64)?;
    match kv.str("kind").unwrap_or("corpus") {
        "corpus" => {
            let d = CorpusSpec::default();
            let year_start = kv.get("year_start", d.years.0)?;
            Ok(SynthJob::Corpus(CorpusSpec {
                n_documents: kv.get("n_documents", d.n_documents)?,
                years: (year_start, kv.get("year_end", year_start.max(d.years.1))?),
                p_u: kv.get("p_u", d.p_u)?,
                p_i: kv.get("p_i", d.p_i)?,
                p_g: kv.get("p_g", d.p_g)?,
                coupling: kv.str("coupling").map(parse_coupling).transpose()?.unwrap_or(d.coupling),
                countries: kv.str("countries").map(parse_countries).transpose()?.unwrap_or(d.countries),
                seed,
                allocation: match kv.str("allocation").unwrap_or("sampled") {
                    "sampled" => Allocation::Sampled,
                    "exact" => Allocation::Exact,
                    other => return Err(invalid(format!("unknown allocation `{other}`"))),
                },
            }))
        }
        "sci2000" => {
            let mut spec = AddressMixSpec::sci_2000();
            spec.seed = seed;
            if let Some(c) = kv.str("countries") {
                spec.countries = parse_countries(c)?;
            }
            Ok(SynthJob::AddressMix(spec))
        }
        "series" => {
            let regime: Regime = kv.str("regime").unwrap_or("markov_stationary").parse()?;
            let start_year = kv.get("start_year", 1993)?;
            let years = kv.get("years", 8usize)?;
            let spec = match regime {
                Regime::MarkovStationary => SeriesSpec::MarkovStationary {
                    categories: kv.get("categories", 7)?,
                    start_year,
                    years,
                    base_total: kv.get("base_total", 10_000.0)?,
                    growth: kv.get("growth", 1.5)?,
                    sampled: kv.get("sampled", true)?,
                },
                Regime::IndependentTrends => SeriesSpec::IndependentTrends {
                    categories: kv.get("categories", 7)?,
                    start_year,
                    years,
                    base_total: kv.get("base_total", 10_000.0)?,
                    rate_low: kv.get("rate_low", 1.1)?,
                    rate_high: kv.get("rate_high", 2.0)?,
                    sampled: kv.get("sampled", true)?,
                },
                Regime::LinearTDecline => SeriesSpec::LinearTDecline {
                    start_year,
                    years,
                    t_start_mbits: kv.get("t_start_mbits", -60.0)?,
                    slope_mbits: kv.get("slope_mbits", -15.0)?,
                    noise_mbits: kv.get("noise_mbits", 1.0)?,
                    base_population: kv.get("base_population", 100_000)?,
                    growth: kv.get("growth", 1.5)?,
                },
            };
            Ok(SynthJob::Series { spec, seed })
        }
        other => Err(invalid(format!("unknown kind `{other}`"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::profile_document;
    use crate::corpus::{parse_records, RecordFormat};

    #[test]
    fn largest_remainder_is_exact() {
        assert_eq!(largest_remainder(10, &[1.0, 1.0, 1.0]).unwrap(), [4, 3, 3]);
        assert_eq!(largest_remainder(7, &[0.5, 0.25, 0.25]).unwrap(), [3, 2, 2]);
        assert_eq!(largest_remainder(0, &[1.0]).unwrap(), [0]);
        assert!(largest_remainder(3, &[0.0, 0.0]).is_err());
        assert!(largest_remainder(3, &[1.0, -1.0]).is_err());
    }

    #[test]
    fn coordinated_keeps_marginals() {
        let spec = CorpusSpec { p_u: 0.6, p_i: 0.2, p_g: 0.45, coupling: Coupling::Coordinated(0.7), ..Default::default() };
        let j = spec.joint();
        let marginal = |bit: usize| -> f64 { (0..8).filter(|c| c & bit != 0).map(|c| j[c]).sum() };
        assert!((marginal(0b100) - 0.6).abs() < 1e-12);
        assert!((marginal(0b010) - 0.2).abs() < 1e-12);
        assert!((marginal(0b001) - 0.45).abs() < 1e-12);
        assert!((j.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_specs() {
        let bad = |spec: CorpusSpec| assert!(gen_profiles(&spec).is_err());
        bad(CorpusSpec { p_u: 1.5, ..Default::default() });
        bad(CorpusSpec { coupling: Coupling::Coordinated(2.0), ..Default::default() });
        bad(CorpusSpec { coupling: Coupling::ExplicitCube([0.0; 8]), ..Default::default() });
        bad(CorpusSpec { countries: vec![], ..Default::default() });
        bad(CorpusSpec { countries: vec![("US".into(), 1.0)], ..Default::default() });
        bad(CorpusSpec { years: (2001, 2000), ..Default::default() });
    }

    #[test]
    fn tiny_exact_corpus_round_trips() {
        let spec = CorpusSpec {
            n_documents: 3,
            coupling: Coupling::ExplicitCube([0.0, 1.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0]),
            allocation: Allocation::Exact,
            ..Default::default()
        };
        let corpus = gen_corpus(&spec).unwrap();
        let docs = parse_records(corpus.records.as_bytes(), RecordFormat::FieldTagged).unwrap();
        assert_eq!(docs.len(), 3);
        let rules = RuleSet::default();
        let parsed: Vec<SectorProfile> = docs.iter().map(|d| profile_document(d, &rules)).collect();
        assert_eq!(parsed, corpus.profiles);
        let mut sorted: Vec<_> = parsed.iter().map(|p| (p.has_u, p.has_i, p.has_g)).collect();
        sorted.sort();
        assert_eq!(sorted, [(false, false, true), (false, true, false), (true, false, false)]);
    }

    #[test]
    fn seeded_output_is_stable() {
        let spec = CorpusSpec { n_documents: 200, years: (1995, 2000), seed: 42, ..Default::default() };
        let a = gen_corpus(&spec).unwrap();
        let b = gen_corpus(&spec).unwrap();
        assert_eq!(a.records, b.records);
        let c = gen_corpus(&CorpusSpec { seed: 43, ..spec }).unwrap();
        assert_ne!(a.records, c.records);
    }

    #[test]
    fn bisection_hits_target() {
        for target in [-60.0, -100.0, -300.0] {
            let w = mixture_for_t(target).unwrap();
            let t = trilateral_bits(&bilateral_mixture(w)) * 1000.0;
            assert!((t - target).abs() < 1e-6);
        }
        assert!(mixture_for_t(-10.0).is_err());
        assert!(mixture_for_t(-500.0).is_err());
    }

    #[test]
    fn spec_file() {
        let job = parse_spec_file("kind = corpus\nn_documents = 12 # docs\ncoupling = coordinated:0.5\ncountries = USA:2;UK:1\nallocation = exact\nseed = 9\n").unwrap();
        match job {
            SynthJob::Corpus(spec) => {
                assert_eq!(spec.n_documents, 12);
                assert_eq!(spec.coupling, Coupling::Coordinated(0.5));
                assert_eq!(spec.countries, vec![("USA".into(), 2.0), ("UK".into(), 1.0)]);
                assert_eq!(spec.allocation, Allocation::Exact);
                assert_eq!(spec.seed, 9);
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_spec_file("kind = series\nregime = linear_t_decline\n").unwrap(),
            SynthJob::Series { spec: SeriesSpec::LinearTDecline { .. }, .. }
        ));
        assert!(parse_spec_file("nonsense").is_err());
        assert!(parse_spec_file("kind = corpus\ncoupling = explicit:1,2\n").is_err());
        assert!(parse_spec_file("kind = spreadsheet\n").is_err());
    }
}

//! Triple Helix indicators for document corpora and web hit-count series.
//!
//! The crate classifies bibliographic addresses into university, industry and
//! government sectors, builds 2×2×2 contingency cubes over sector presence,
//! computes the signed three-dimensional transmission `T(uig)` in millibits,
//! and scores whether a category×year matrix develops as a system by comparing
//! a current-state (Markov) prediction with per-category extrapolation.
//!
//! The numerical core ([`infotheory`], [`systemness`] and the trend fit in
//! [`helix`]) is generic over the floating-point scalar through [`Scalar`];
//! the aliases below fix it to `f64`, which is what the rest of the crate and
//! the command-line tool use.

pub mod classifier;
pub mod corpus;
pub mod error;
pub mod helix;
pub mod infotheory;
pub mod num;
pub mod synth;
pub mod systemness;

pub use classifier::{
    classification_table, classify_address, profile_document, ClassificationTable, MatchMode,
    RuleSet, SectorLabel, SectorProfile,
};
pub use corpus::{
    corpus_stats, extract_country, parse_records, write_records, Address, CorpusStats,
    CountryAliases, Document, RecordFormat, RecordReader,
};
pub use error::{Error, Result};
pub use helix::{
    country_counts, cube_from_profiles, helix_report, t_trajectory, venn_from_inclusive,
    Aggregates, CountingMode, HelixRow, SampleSpace, Slice, VennCells, YearlyHits,
};
pub use infotheory::{
    conditional_entropy, entropy, expected_info, transmission2, transmission3, ContingencyCube,
    MILLIBITS_PER_BIT,
};
pub use num::Scalar;
pub use systemness::{
    predict_markov, predict_trend, row_column_forecast, systemness_test, TrendConfig, TrendModel,
    Verdict,
};

/// Probability vector over a category list, in double precision.
pub type Distribution = infotheory::Distribution<f64>;
/// Two-dimensional joint distribution, in double precision.
pub type Joint2 = infotheory::Joint2<f64>;
/// Entropies and transmissions of a contingency cube, in double precision.
pub type TransmissionReport = infotheory::TransmissionReport<f64>;
/// Category × year count matrix, in double precision.
pub type CategorySeries = systemness::CategorySeries<f64>;
/// Systemness scores per category subset, in double precision.
pub type SystemnessReport = systemness::SystemnessReport<f64>;
/// One subset's systemness score, in double precision.
pub type SubsetScore = systemness::SubsetScore<f64>;
/// Least-squares line through a `T(uig)` trajectory, in double precision.
pub type LinearTrend = helix::LinearTrend<f64>;

/// Single-precision variants, for memory-bound bulk scoring.
pub type DistributionF32 = infotheory::Distribution<f32>;
pub type TransmissionReportF32 = infotheory::TransmissionReport<f32>;
pub type CategorySeriesF32 = systemness::CategorySeries<f32>;

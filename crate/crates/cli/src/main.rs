//! `helix`: command-line front end for the triple-helix indicators.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use triple_helix::helix::{self, corpus_countries, write_helix_rows};
use triple_helix::synth::{self, GeneratedSeries, SynthJob};
use triple_helix::systemness::{write_report, SystemnessConfig};
use triple_helix::{
    classification_table, country_counts, helix_report, parse_records, systemness_test, transmission3,
    Aggregates, CategorySeries, ContingencyCube, CountingMode, Document, MatchMode, RecordFormat, RuleSet,
    SampleSpace, TransmissionReport, TrendConfig, TrendModel, VennCells,
};

#[derive(Debug, Parser)]
#[command(name = "helix", version, about = "Triple Helix indicators for bibliographic corpora and web hit counts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Input file.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Output path; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// `key = value` file supplying defaults for the flags below.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CorpusFlags {
    /// Record format of the input corpus.
    #[arg(long)]
    format: Option<String>,
    /// Classification rule file (tier_index,label,identifier).
    #[arg(long, env = "HELIX_RULES")]
    rules: Option<PathBuf>,
    /// Identifier matching: `token` or `substring`.
    #[arg(long = "match")]
    match_mode: Option<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sector label counts and percentages over all addresses.
    Classify {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        corpus: CorpusFlags,
    },
    /// One indicator row per slice.
    Report {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        corpus: CorpusFlags,
        /// Slice name: `all`, a country, an aggregate, or `internationally coauthored`.
        #[arg(long)]
        slice: Vec<String>,
        /// Aggregate membership file (aggregate,country).
        #[arg(long)]
        aggregates: Option<PathBuf>,
        /// `union` or `with-unidentified`.
        #[arg(long)]
        sample_space: Option<String>,
    },
    /// Documents per country.
    Countries {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        corpus: CorpusFlags,
        /// `integer` or `fractional`.
        #[arg(long)]
        counting: Option<String>,
    },
    /// Entropies and transmissions of a cube (u,i,g,count) or cell file.
    Transmission {
        #[command(flatten)]
        common: Common,
    },
    /// Markov versus trend prediction over a category-by-year matrix.
    Systemness {
        #[command(flatten)]
        common: Common,
        /// `loglinear` or `linear`.
        #[arg(long)]
        trend_model: Option<String>,
        /// Years before the target used for the trend fit.
        #[arg(long)]
        window: Option<usize>,
        /// Additive smoothing of predicted counts.
        #[arg(long)]
        alpha: Option<f64>,
        /// Year to predict; defaults to the last year in the input.
        #[arg(long)]
        target_year: Option<i32>,
        /// Comma-joined category list; repeat for several subsets.
        #[arg(long)]
        subset: Vec<String>,
    },
    /// `T(uig)` per year and its linear trend from inclusive hit counts.
    Webtrend {
        #[command(flatten)]
        common: Common,
        /// First year used for the trend fit.
        #[arg(long)]
        from_year: Option<i32>,
    },
    /// Generate a fixture from a `key = value` spec file.
    Synth {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: Option<u64>,
    },
}

/// Flag values resolved against a config file and defaults.
struct Settings {
    file: BTreeMap<String, String>,
}

impl Settings {
    fn load(path: Option<&Path>) -> Result<Self> {
        let mut file = BTreeMap::new();
        if let Some(path) = path {
            let text = fs::read_to_string(path).with_context(|| format!("{}", path.display()))?;
            for (i, line) in text.lines().enumerate() {
                let line = line.split('#').next().unwrap_or_default().trim();
                if line.is_empty() {
                    continue;
                }
                let (k, v) = line
                    .split_once('=')
                    .ok_or_else(|| anyhow!("{}: line {}: expected key = value", path.display(), i + 1))?;
                file.insert(k.trim().replace('_', "-").to_lowercase(), v.trim().to_string());
            }
        }
        Ok(Self { file })
    }

    fn string(&self, flag: Option<String>, key: &str) -> Option<String> {
        flag.or_else(|| self.file.get(key).cloned())
    }

    fn parse<T>(&self, flag: Option<T>, key: &str) -> Result<Option<T>>
    where
        T: std::str::FromStr,
        T::Err: std::fmt::Display,
    {
        match flag {
            Some(v) => Ok(Some(v)),
            None => self
                .file
                .get(key)
                .map(|v| v.parse::<T>().map_err(|e| anyhow!("config `{key}`: {e}")))
                .transpose(),
        }
    }

    fn path(&self, flag: Option<PathBuf>, key: &str) -> Option<PathBuf> {
        flag.or_else(|| self.file.get(key).map(PathBuf::from))
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).with_context(|| format!("{}", path.display()))?))
}

fn required(common: &Common) -> Result<&Path> {
    common.input.as_deref().ok_or_else(|| anyhow!("--input is required"))
}

/// Writes `body` to `out`, or to standard output.
fn emit(out: Option<&Path>, body: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match out {
        Some(path) => {
            let file = File::create(path).with_context(|| format!("{}", path.display()))?;
            let mut w = BufWriter::new(file);
            body(&mut w)?;
            w.flush().with_context(|| format!("{}", path.display()))?;
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            body(&mut w)?;
            w.flush()?;
        }
    }
    Ok(())
}

fn load_corpus(path: &Path, settings: &Settings, flags: &CorpusFlags) -> Result<Vec<Document>> {
    let format: RecordFormat = settings
        .parse(flags.format.clone(), "format")?
        .map(|s: String| s.parse().map_err(|e: String| anyhow!(e)))
        .transpose()?
        .unwrap_or_default();
    parse_records(open(path)?, format).with_context(|| format!("{}", path.display()))
}

fn load_rules(settings: &Settings, flags: &CorpusFlags) -> Result<RuleSet> {
    let rules = match settings.path(flags.rules.clone(), "rules") {
        Some(path) => RuleSet::from_csv(open(&path)?).with_context(|| format!("{}", path.display()))?,
        None => RuleSet::default(),
    };
    let mode = match settings.string(flags.match_mode.clone(), "match").as_deref() {
        None | Some("token") => MatchMode::Token,
        Some("substring") => MatchMode::Substring,
        Some(other) => bail!("unknown match mode `{other}`"),
    };
    Ok(rules.with_mode(mode))
}

fn classify(common: Common, flags: CorpusFlags) -> Result<()> {
    let settings = Settings::load(common.config.as_deref())?;
    let docs = load_corpus(required(&common)?, &settings, &flags)?;
    let rules = load_rules(&settings, &flags)?;
    let table = classification_table(&docs, &rules);
    emit(common.out.as_deref(), |w| {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["label", "count", "percent"])?;
        for row in table.rows() {
            out.write_record([row.label.to_string(), row.count.to_string(), format!("{:.1}", row.percent)])?;
        }
        out.write_record(["total".to_string(), table.total().to_string(), String::new()])?;
        out.flush()?;
        Ok(())
    })
}

fn report(common: Common, flags: CorpusFlags, slices: Vec<String>, aggregates: Option<PathBuf>, sample_space: Option<String>) -> Result<()> {
    let settings = Settings::load(common.config.as_deref())?;
    let input = required(&common)?;
    let docs = load_corpus(input, &settings, &flags)?;
    let rules = load_rules(&settings, &flags)?;
    let aggregates = match settings.path(aggregates, "aggregates") {
        Some(path) => Aggregates::from_csv(open(&path)?).with_context(|| format!("{}", path.display()))?,
        None => Aggregates::default(),
    };
    let sample_space: SampleSpace = settings
        .string(sample_space, "sample-space")
        .map(|s| s.parse().map_err(|e: String| anyhow!(e)))
        .transpose()?
        .unwrap_or_default();
    let mut names = if slices.is_empty() {
        settings
            .file
            .get("slice")
            .map(|s| s.split(',').map(|x| x.trim().to_string()).collect())
            .unwrap_or_else(|| vec!["all".to_string()])
    } else {
        slices
    };
    names.sort_by_key(|n| (n.to_lowercase(), n.clone()));
    names.dedup();
    let countries = corpus_countries(&docs);
    let mut rows = names
        .iter()
        .map(|name| {
            let slice = aggregates.resolve(name, &countries).with_context(|| format!("slice `{name}`"))?;
            helix_report(&docs, &rules, &slice, sample_space).with_context(|| format!("slice `{name}`"))
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by_key(|r| (r.slice_name.to_lowercase(), r.slice_name.clone()));
    emit(common.out.as_deref(), |w| Ok(write_helix_rows(w, &rows)?))
}

fn countries(common: Common, flags: CorpusFlags, counting: Option<String>) -> Result<()> {
    let settings = Settings::load(common.config.as_deref())?;
    let docs = load_corpus(required(&common)?, &settings, &flags)?;
    let mode: CountingMode = settings
        .string(counting, "counting")
        .map(|s| s.parse().map_err(|e: String| anyhow!(e)))
        .transpose()?
        .unwrap_or_default();
    let counts = country_counts(&docs, mode);
    emit(common.out.as_deref(), |w| {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["country", "count"])?;
        for (country, n) in &counts {
            let n = match mode {
                CountingMode::Integer => format!("{n:.0}"),
                CountingMode::Fractional => format!("{n:.3}"),
            };
            out.write_record([country.as_str(), &n])?;
        }
        out.flush()?;
        Ok(())
    })
}

/// Reads either `u,i,g,count` rows (one cube) or seven-cell rows, one cube
/// per row with an optional leading `name` column.
fn read_cubes(path: &Path) -> Result<Vec<(String, ContingencyCube)>> {
    let mut text = String::new();
    open(path)?.read_to_string(&mut text)?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_lowercase).collect();
    let at = |line: usize| format!("{}: line {line}", path.display());
    let number = |v: &str, line: usize| -> Result<u64> { v.parse().map_err(|_| anyhow!("{}: bad count `{v}`", at(line))) };
    if headers == ["u", "i", "g", "count"] {
        let mut cube = ContingencyCube::new();
        for (k, record) in rdr.records().enumerate() {
            let line = k + 2;
            let record = record.with_context(|| at(line))?;
            let flag = |v: &str| match v {
                "0" => Ok(false),
                "1" => Ok(true),
                _ => Err(anyhow!("{}: expected 0 or 1, got `{v}`", at(line))),
            };
            cube.add(flag(&record[0])?, flag(&record[1])?, flag(&record[2])?, number(&record[3], line)?);
        }
        let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        return Ok(vec![(name, cube)]);
    }
    const CELLS: [&str; 7] = ["u_only", "i_only", "g_only", "ui", "ug", "ig", "uig"];
    let col = |name: &str| headers.iter().position(|h| h == name);
    let idx = CELLS
        .iter()
        .map(|c| col(c).ok_or_else(|| anyhow!("{}: missing column `{c}`; expected u,i,g,count or the seven cells", path.display())))
        .collect::<Result<Vec<_>>>()?;
    let name_col = col("name");
    let mut cubes = Vec::new();
    for (k, record) in rdr.records().enumerate() {
        let line = k + 2;
        let record = record.with_context(|| at(line))?;
        let v = |j: usize| number(&record[idx[j]], line);
        let cells = VennCells {
            u_only: v(0)?,
            i_only: v(1)?,
            g_only: v(2)?,
            ui: v(3)?,
            ug: v(4)?,
            ig: v(5)?,
            uig: v(6)?,
        };
        let name = name_col.map(|c| record[c].to_string()).unwrap_or_else(|| format!("row{}", k + 1));
        cubes.push((name, cells.to_cube(0)));
    }
    Ok(cubes)
}

fn transmission(common: Common) -> Result<()> {
    let input = required(&common)?;
    let reports = read_cubes(input)?
        .into_iter()
        .map(|(name, cube)| {
            let r: TransmissionReport = transmission3(&cube).with_context(|| format!("{}: `{name}`", input.display()))?;
            Ok((name, r))
        })
        .collect::<Result<Vec<_>>>()?;
    emit(common.out.as_deref(), |w| {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "name", "n", "h_u", "h_i", "h_g", "h_ui", "h_ug", "h_ig", "h_uig", "t_ui_mbits", "t_ug_mbits", "t_ig_mbits",
            "t_uig_mbits",
        ])?;
        for (name, r) in &reports {
            let mut record = vec![name.clone(), r.n.to_string()];
            record.extend([r.h_u, r.h_i, r.h_g, r.h_ui, r.h_ug, r.h_ig, r.h_uig].map(|h| format!("{h:.6}")));
            record.extend([r.t_ui * 1000.0, r.t_ug * 1000.0, r.t_ig * 1000.0, r.t_uig_mbits].map(|t| format!("{t:.1}")));
            out.write_record(&record)?;
        }
        out.flush()?;
        Ok(())
    })
}

#[allow(clippy::too_many_arguments)]
fn systemness(
    common: Common,
    trend_model: Option<String>,
    window: Option<usize>,
    alpha: Option<f64>,
    target_year: Option<i32>,
    subset: Vec<String>,
) -> Result<()> {
    let settings = Settings::load(common.config.as_deref())?;
    let input = required(&common)?;
    let series = CategorySeries::from_csv(open(input)?).with_context(|| format!("{}", input.display()))?;
    let model: TrendModel = settings
        .string(trend_model, "trend-model")
        .map(|s| s.parse().map_err(|e: String| anyhow!(e)))
        .transpose()?
        .unwrap_or_default();
    let window = settings.parse(window, "window")?.unwrap_or(TrendConfig::default().window);
    let config = SystemnessConfig {
        trend: TrendConfig { model, window },
        smoothing_alpha: settings.parse(alpha, "alpha")?,
    };
    let target_year = match settings.parse(target_year, "target-year")? {
        Some(y) => y,
        None => *series.years().last().ok_or_else(|| anyhow!("{}: no years", input.display()))?,
    };
    let subset = if subset.is_empty() {
        settings.file.get("subset").map(|s| s.split(';').map(str::to_string).collect()).unwrap_or_default()
    } else {
        subset
    };
    let subsets: Vec<Vec<String>> = subset
        .iter()
        .map(|s| s.split(',').map(|c| c.trim().to_string()).filter(|c| !c.is_empty()).collect())
        .collect();
    let report = systemness_test(&series, target_year, &subsets, &config).with_context(|| format!("{}", input.display()))?;
    emit(common.out.as_deref(), |w| Ok(write_report(w, &report)?))
}

fn webtrend(common: Common, from_year: Option<i32>) -> Result<()> {
    let settings = Settings::load(common.config.as_deref())?;
    let input = required(&common)?;
    let hits = helix::read_yearly_hits(open(input)?).with_context(|| format!("{}", input.display()))?;
    let points = helix::t_trajectory(&hits).with_context(|| format!("{}", input.display()))?;
    let from_year = settings.parse(from_year, "from-year")?.unwrap_or(i32::MIN);
    let pairs: Vec<(i32, f64)> = points.iter().map(|p| (p.year, p.t_mbits)).collect();
    let trend = helix::linear_trend(&pairs, from_year).with_context(|| format!("{}", input.display()))?;
    match common.out.as_deref() {
        Some(dir) => {
            fs::create_dir_all(dir).with_context(|| format!("{}", dir.display()))?;
            emit(Some(&dir.join("trajectory.csv")), |w| Ok(helix::write_trajectory(w, &points)?))?;
            emit(Some(&dir.join("trend.csv")), |w| Ok(helix::write_trend(w, &trend)?))
        }
        None => emit(None, |w| {
            helix::write_trajectory(&mut *w, &points)?;
            writeln!(w)?;
            helix::write_trend(w, &trend)?;
            Ok(())
        }),
    }
}

fn synth(common: Common, seed: Option<u64>) -> Result<()> {
    let settings = Settings::load(common.config.as_deref())?;
    let mut job = match common.input.as_deref() {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("{}", path.display()))?;
            synth::parse_spec_file(&text).with_context(|| format!("{}", path.display()))?
        }
        None => SynthJob::Corpus(Default::default()),
    };
    if let Some(seed) = settings.parse(seed, "seed")? {
        job.set_seed(seed);
    }
    emit(common.out.as_deref(), |w| {
        match &job {
            SynthJob::Corpus(spec) => w.write_all(synth::gen_corpus(spec)?.records.as_bytes())?,
            SynthJob::AddressMix(spec) => w.write_all(synth::gen_address_mix(spec)?.as_bytes())?,
            SynthJob::Series { spec, seed } => match synth::gen_series(spec, *seed)? {
                GeneratedSeries::Categories { series, .. } => series.write_csv(w)?,
                GeneratedSeries::Hits { hits, .. } => helix::write_yearly_hits(w, &hits)?,
            },
        }
        Ok(())
    })
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Classify { common, corpus } => classify(common, corpus),
        Command::Report {
            common,
            corpus,
            slice,
            aggregates,
            sample_space,
        } => report(common, corpus, slice, aggregates, sample_space),
        Command::Countries { common, corpus, counting } => countries(common, corpus, counting),
        Command::Transmission { common } => transmission(common),
        Command::Systemness {
            common,
            trend_model,
            window,
            alpha,
            target_year,
            subset,
        } => systemness(common, trend_model, window, alpha, target_year, subset),
        Command::Webtrend { common, from_year } => webtrend(common, from_year),
        Command::Synth { common, seed } => synth(common, seed),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("helix: {e:#}");
            ExitCode::FAILURE
        }
    }
}

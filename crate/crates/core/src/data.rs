//! Domain records and plain-text loaders for the article dataset.
//!
//! All input files are UTF-8, tab-delimited, with `#` starting a comment line.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Number of stages in the grammaticalisation cycle.
pub const STAGES: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Article {
    Definite,
    Indefinite,
}

impl Article {
    pub const ALL: [Article; 2] = [Article::Definite, Article::Indefinite];

    pub fn as_str(self) -> &'static str {
        match self {
            Article::Definite => "definite",
            Article::Indefinite => "indefinite",
        }
    }
}

impl fmt::Display for Article {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Article {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "definite" | "def" => Ok(Article::Definite),
            "indefinite" | "indef" => Ok(Article::Indefinite),
            other => Err(Error::Validation(format!("unknown article `{other}`"))),
        }
    }
}

/// Position in the cycle: 0 no article, 1 same as source word, 2 distinct
/// word, 3 affix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct CycleStage(u8);

impl CycleStage {
    pub fn new(index: u8) -> Result<Self> {
        if (index as usize) < STAGES {
            Ok(CycleStage(index))
        } else {
            Err(Error::Validation(format!("stage {index} is outside 0..{}", STAGES - 1)))
        }
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn successor(self) -> CycleStage {
        CycleStage((self.0 + 1) % STAGES as u8)
    }

    /// Number of forward steps around the cycle from `self` to `other`.
    pub fn advances_to(self, other: CycleStage) -> usize {
        (other.index() + STAGES - self.index()) % STAGES
    }
}

impl TryFrom<u8> for CycleStage {
    type Error = Error;
    fn try_from(v: u8) -> Result<Self> {
        CycleStage::new(v)
    }
}

impl From<CycleStage> for u8 {
    fn from(s: CycleStage) -> u8 {
        s.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservationWindow {
    /// Calendar year, negative for BCE.
    pub start: f64,
    pub end: f64,
}

impl ObservationWindow {
    pub fn new(start: f64, end: f64) -> Result<Self> {
        if !(end > start) {
            return Err(Error::Validation(format!(
                "window {start}..{end} does not have end > start"
            )));
        }
        Ok(Self { start, end })
    }

    pub fn duration(&self) -> f64 {
        self.end - self.start
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArticleRecord {
    pub article: Article,
    pub stages: Vec<CycleStage>,
}

impl ArticleRecord {
    pub fn new(article: Article, stages: Vec<CycleStage>) -> Result<Self> {
        if stages.is_empty() {
            return Err(Error::Validation(format!("{article} stage sequence is empty")));
        }
        if stages.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Validation(format!("{article} stage sequence repeats a stage")));
        }
        Ok(Self { article, stages })
    }

    pub fn first_stage(&self) -> CycleStage {
        self.stages[0]
    }

    /// True when some recorded step jumps over an intermediate stage.
    pub fn has_skipped_stage(&self) -> bool {
        self.stages.windows(2).any(|w| w[0].advances_to(w[1]) > 1)
    }
}

/// Number of completed stage changes. A step that skips stages counts every
/// stage advance it implies.
pub fn changes_count(record: &ArticleRecord) -> usize {
    record.stages.windows(2).map(|w| w[0].advances_to(w[1])).sum()
}

/// Crude rate estimate `(m + 1) / t`.
pub fn rate_estimate(m: usize, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::domain(format!("observation time must be positive, got {t}")));
    }
    Ok((m as f64 + 1.0) / t)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LanguageHistory {
    pub name: String,
    pub windows: Vec<ObservationWindow>,
    pub definite: ArticleRecord,
    pub indefinite: ArticleRecord,
    pub weight: f64,
    /// Region name and the fraction of that region's population.
    #[serde(default)]
    pub composition: Vec<(String, f64)>,
}

impl LanguageHistory {
    pub fn record(&self, article: Article) -> &ArticleRecord {
        match article {
            Article::Definite => &self.definite,
            Article::Indefinite => &self.indefinite,
        }
    }

    /// Total observed time. Gaps between windows are periods in which the
    /// language is treated as frozen.
    pub fn observation_time(&self) -> f64 {
        self.windows.iter().map(ObservationWindow::duration).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleDistribution {
    pub counts: [u64; STAGES],
    pub fractions: [f64; STAGES],
}

impl CycleDistribution {
    pub fn fraction(&self, stage: CycleStage) -> f64 {
        self.fractions[stage.index()]
    }
}

pub fn stationary_fractions(counts: [u64; STAGES]) -> Result<CycleDistribution> {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(Error::domain("stage counts are all zero"));
    }
    let mut fractions = [0.0; STAGES];
    for (f, &c) in fractions.iter_mut().zip(&counts) {
        *f = c as f64 / total as f64;
    }
    // absorb rounding into the last element so the sum is exactly one
    let head: f64 = fractions[..STAGES - 1].iter().sum();
    fractions[STAGES - 1] = 1.0 - head;
    Ok(CycleDistribution { counts, fractions })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionPopulationRecord {
    pub region: String,
    pub year: f64,
    pub size: f64,
}

/// Per-article stage distributions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalsCounts {
    pub definite: CycleDistribution,
    pub indefinite: CycleDistribution,
}

impl WalsCounts {
    pub fn get(&self, article: Article) -> &CycleDistribution {
        match article {
            Article::Definite => &self.definite,
            Article::Indefinite => &self.indefinite,
        }
    }
}

struct Rows<'a> {
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Iterator for Rows<'a> {
    type Item = (usize, Vec<&'a str>);

    fn next(&mut self) -> Option<Self::Item> {
        for (i, line) in self.lines.by_ref() {
            let trimmed = line.trim_end_matches('\r');
            if trimmed.trim().is_empty() || trimmed.trim_start().starts_with('#') {
                continue;
            }
            return Some((i + 1, trimmed.split('\t').map(str::trim).collect()));
        }
        None
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn rows(text: &str) -> Rows<'_> {
    Rows {
        lines: text.lines().enumerate(),
    }
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn expect_columns(path: &Path, line: usize, cols: &[&str], n: usize) -> Result<()> {
    if cols.len() != n {
        return Err(parse_err(
            path,
            line,
            format!("expected {n} columns, found {}", cols.len()),
        ));
    }
    Ok(())
}

fn parse_num<T: FromStr>(path: &Path, line: usize, field: &str, what: &str) -> Result<T> {
    field
        .parse()
        .map_err(|_| parse_err(path, line, format!("cannot parse {what} `{field}`")))
}

fn parse_windows(path: &Path, line: usize, field: &str) -> Result<Vec<ObservationWindow>> {
    field
        .split(';')
        .map(|w| {
            let (a, b) = w
                .split_once("..")
                .ok_or_else(|| parse_err(path, line, format!("window `{w}` is not start..end")))?;
            let start = parse_num(path, line, a.trim(), "window start")?;
            let end = parse_num(path, line, b.trim(), "window end")?;
            ObservationWindow::new(start, end)
        })
        .collect()
}

fn parse_stages(path: &Path, line: usize, article: Article, field: &str) -> Result<ArticleRecord> {
    let stages = field
        .split(',')
        .map(|s| {
            let s = s.trim();
            let idx: u8 = s
                .parse()
                .map_err(|_| Error::Validation(format!("{}:{line}: unknown stage symbol `{s}`", path.display())))?;
            CycleStage::new(idx).map_err(|e| Error::Validation(format!("{}:{line}: {e}", path.display())))
        })
        .collect::<Result<Vec<_>>>()?;
    ArticleRecord::new(article, stages).map_err(|e| Error::Validation(format!("{}:{line}: {e}", path.display())))
}

pub fn parse_histories(path: &Path, text: &str) -> Result<Vec<LanguageHistory>> {
    let mut out = Vec::new();
    for (line, cols) in rows(text) {
        expect_columns(path, line, &cols, 5)?;
        let weight: f64 = parse_num(path, line, cols[4], "weight")?;
        if !(weight > 0.0) {
            return Err(Error::Validation(format!(
                "{}:{line}: weight must be positive",
                path.display()
            )));
        }
        out.push(LanguageHistory {
            name: cols[0].to_string(),
            windows: parse_windows(path, line, cols[1])?,
            definite: parse_stages(path, line, Article::Definite, cols[2])?,
            indefinite: parse_stages(path, line, Article::Indefinite, cols[3])?,
            weight,
            composition: Vec::new(),
        });
    }
    Ok(out)
}

pub fn load_histories(path: &Path) -> Result<Vec<LanguageHistory>> {
    parse_histories(path, &read(path)?)
}

pub fn load_wals(path: &Path) -> Result<WalsCounts> {
    let text = read(path)?;
    let mut found: BTreeMap<Article, CycleDistribution> = BTreeMap::new();
    for (line, cols) in rows(&text) {
        expect_columns(path, line, &cols, 1 + STAGES)?;
        let article: Article = cols[0]
            .parse()
            .map_err(|e: Error| parse_err(path, line, e.to_string()))?;
        let mut counts = [0u64; STAGES];
        for (c, f) in counts.iter_mut().zip(&cols[1..]) {
            *c = parse_num(path, line, f, "count")?;
        }
        found.insert(article, stationary_fractions(counts)?);
    }
    let mut take = |a: Article| {
        found
            .remove(&a)
            .ok_or_else(|| Error::Validation(format!("{}: no row for the {a} article", path.display())))
    };
    Ok(WalsCounts {
        definite: take(Article::Definite)?,
        indefinite: take(Article::Indefinite)?,
    })
}

pub fn load_regions(path: &Path) -> Result<Vec<RegionPopulationRecord>> {
    let text = read(path)?;
    let mut out = Vec::new();
    for (line, cols) in rows(&text) {
        expect_columns(path, line, &cols, 3)?;
        let size: f64 = parse_num(path, line, cols[2], "size")?;
        if !(size > 0.0) {
            return Err(Error::Validation(format!(
                "{}:{line}: population size must be positive",
                path.display()
            )));
        }
        out.push(RegionPopulationRecord {
            region: cols[0].to_string(),
            year: parse_num(path, line, cols[1], "year")?,
            size,
        });
    }
    Ok(out)
}

/// Language name → list of (region, fraction), in file order.
pub fn load_composition(path: &Path) -> Result<BTreeMap<String, Vec<(String, f64)>>> {
    let text = read(path)?;
    let mut out: BTreeMap<String, Vec<(String, f64)>> = BTreeMap::new();
    for (line, cols) in rows(&text) {
        expect_columns(path, line, &cols, 3)?;
        let fraction: f64 = parse_num(path, line, cols[2], "fraction")?;
        if !(fraction > 0.0) {
            return Err(Error::Validation(format!(
                "{}:{line}: fraction must be positive",
                path.display()
            )));
        }
        out.entry(cols[0].to_string())
            .or_default()
            .push((cols[1].to_string(), fraction));
    }
    Ok(out)
}

/// Fill in each history's composition. Languages missing from the table keep
/// an empty composition.
pub fn attach_composition(histories: &mut [LanguageHistory], composition: &BTreeMap<String, Vec<(String, f64)>>) {
    for h in histories {
        if let Some(c) = composition.get(&h.name) {
            h.composition = c.clone();
        }
    }
}

/// Format to three significant figures the way the history table does:
/// plain decimals between 0.01 and 1000, otherwise `d.dde±k`.
pub fn format_sig3(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.2e}");
    let rounded: f64 = sci.parse().unwrap_or(x);
    let exp = rounded.abs().log10().floor() as i32;
    if !(-2..3).contains(&exp) {
        return sci;
    }
    let decimals = (2 - exp).max(0) as usize;
    format!("{rounded:.decimals$}")
}

fn format_stages(r: &ArticleRecord) -> String {
    r.stages
        .iter()
        .map(|s| s.index().to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn format_year(y: f64) -> String {
    if y.fract() == 0.0 {
        format!("{}", y as i64)
    } else {
        y.to_string()
    }
}

/// Serialise histories back to the tab-delimited layout read by
/// [`load_histories`].
pub fn write_histories(histories: &[LanguageHistory]) -> String {
    let mut out = String::from("# language\twindows\tdefinite\tindefinite\tweight\n");
    for h in histories {
        let windows = h
            .windows
            .iter()
            .map(|w| format!("{}..{}", format_year(w.start), format_year(w.end)))
            .collect::<Vec<_>>()
            .join(";");
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\n",
            h.name,
            windows,
            format_stages(&h.definite),
            format_stages(&h.indefinite),
            format_sig3(h.weight)
        ));
    }
    out
}

/// Everything needed for fits, loaded from one data directory.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub histories: Vec<LanguageHistory>,
    pub wals: WalsCounts,
}

impl Dataset {
    /// Load `histories.tsv`, `wals.tsv` and, when present, `composition.tsv`.
    pub fn load_dir(dir: &Path) -> Result<Self> {
        let mut histories = load_histories(&dir.join("histories.tsv"))?;
        let comp = dir.join("composition.tsv");
        if comp.exists() {
            attach_composition(&mut histories, &load_composition(&comp)?);
        }
        Ok(Self {
            histories,
            wals: load_wals(&dir.join("wals.tsv"))?,
        })
    }
}

/// Data directory shipped with the repository.
pub fn default_data_dir() -> PathBuf {
    if let Ok(dir) = std::env::var(DATA_DIR_ENV) {
        return PathBuf::from(dir);
    }
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

/// Environment variable overriding the default data directory.
pub const DATA_DIR_ENV: &str = "LANGCHANGE_DATA";

#[cfg(test)]
mod tests {
    use super::*;

    fn stages(v: &[u8]) -> ArticleRecord {
        ArticleRecord::new(
            Article::Definite,
            v.iter().map(|&i| CycleStage::new(i).unwrap()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn change_counts() {
        assert_eq!(changes_count(&stages(&[0, 1, 2, 3])), 3);
        assert_eq!(changes_count(&stages(&[0])), 0);
        assert_eq!(changes_count(&stages(&[1, 2, 3, 0])), 3);
        let skipped = stages(&[0, 2]);
        assert_eq!(changes_count(&skipped), 2);
        assert!(skipped.has_skipped_stage());
    }

    #[test]
    fn rates() {
        assert!((rate_estimate(0, 1000.0).unwrap() - 1e-3).abs() < 1e-18);
        assert!((rate_estimate(3, 1200.0).unwrap() - 0.003_333_333).abs() < 1e-9);
        assert!(rate_estimate(1, 0.0).is_err());
    }

    #[test]
    fn fractions() {
        let d = stationary_fractions([243, 69, 216, 92]).unwrap();
        let want = [0.3919, 0.1113, 0.3484, 0.1484];
        for (f, w) in d.fractions.iter().zip(want) {
            assert!((f - w).abs() < 5e-5);
        }
        assert_eq!(d.fractions.iter().sum::<f64>(), 1.0);
        assert_eq!(stationary_fractions([1, 1, 1, 1]).unwrap().fractions, [0.25; 4]);
        assert!(stationary_fractions([0; 4]).is_err());
    }

    #[test]
    fn parse_errors_name_line() {
        let p = Path::new("h.tsv");
        let err = parse_histories(p, "# c\nA\t0..1\t0\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        let err = parse_histories(p, "A\t0..10\t0,x\t0\t1\n").unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
        let err = parse_histories(p, "A\t0..10\t0,7\t0\t1\n").unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
        assert!(parse_histories(p, "").unwrap().is_empty());
    }

    #[test]
    fn sig3_formatting() {
        for (x, s) in [
            (90.9, "90.9"),
            (1.0, "1.00"),
            (2510.0, "2.51e3"),
            (0.00553, "5.53e-3"),
            (0.0399, "0.0399"),
            (286.0, "286"),
            (0.111, "0.111"),
        ] {
            assert_eq!(format_sig3(x), s);
        }
    }
}

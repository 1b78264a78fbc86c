//! CSV and JSON persistence. All tables are UTF-8, comma separated, with a header row.

use std::collections::HashMap;
use std::fs::File;
use std::path::{Path, PathBuf};

use granular_core::inference::PosteriorDraws;
use granular_core::{FuzzyObservation, MembershipVector, PossibilityAssignment};
use serde::Serialize;

use crate::error::{CliError, Result};

fn reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file))
}

pub(crate) fn writer(path: &Path) -> Result<csv::Writer<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> CliError + '_ {
    move |source| CliError::Csv { path: path.to_path_buf(), source }
}

/// Header and records of a CSV file, with positions for error messages.
struct Table {
    path: PathBuf,
    header: Vec<String>,
    rows: Vec<csv::StringRecord>,
}

impl Table {
    fn read(path: &Path) -> Result<Self> {
        let mut rdr = reader(path)?;
        let header = rdr.headers().map_err(csv_err(path))?.iter().map(str::to_string).collect();
        let rows = rdr.records().collect::<std::result::Result<Vec<_>, _>>().map_err(csv_err(path))?;
        Ok(Self { path: path.to_path_buf(), header, rows })
    }

    fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    fn require(&self, name: &str) -> Result<usize> {
        self.column(name)
            .ok_or_else(|| CliError::Validation(format!("{}: missing column `{name}`", self.path.display())))
    }

    fn line(&self, row: &csv::StringRecord) -> u64 {
        row.position().map_or(0, |p| p.line())
    }

    fn cell_error(&self, row: &csv::StringRecord, col: usize, message: impl Into<String>) -> CliError {
        CliError::Cell {
            path: self.path.clone(),
            line: self.line(row),
            column: self.header.get(col).cloned().unwrap_or_default(),
            message: message.into(),
        }
    }

    fn parse<T: std::str::FromStr>(&self, row: &csv::StringRecord, col: usize) -> Result<T> {
        let raw = row.get(col).unwrap_or("");
        raw.parse().map_err(|_| self.cell_error(row, col, format!("cannot parse `{raw}`")))
    }

    fn text(&self, row: &csv::StringRecord, col: usize) -> String {
        row.get(col).unwrap_or("").to_string()
    }
}

/// Possibility degrees of every observation, grouped by sample in order of first appearance.
#[derive(Debug, Clone, PartialEq)]
pub struct PossibilityTable {
    pub referents: Vec<String>,
    pub samples: Vec<(String, PossibilityAssignment)>,
}

/// Reads `sample_id,obs_id,<referent>...`; every degree must lie in `[0, 1]`.
pub fn read_possibility(path: &Path) -> Result<PossibilityTable> {
    let t = Table::read(path)?;
    if t.header.len() < 3 || t.header[0] != "sample_id" || t.header[1] != "obs_id" {
        return Err(CliError::Validation(format!(
            "{}: header must be `sample_id,obs_id,<referent>...`",
            path.display()
        )));
    }
    let referents = t.header[2..].to_vec();
    let mut order: Vec<String> = Vec::new();
    let mut rows: HashMap<String, Vec<Vec<f64>>> = HashMap::new();
    for row in &t.rows {
        let mut degrees = Vec::with_capacity(referents.len());
        for col in 2..t.header.len() {
            let d: f64 = t.parse(row, col)?;
            if !(0.0..=1.0).contains(&d) {
                return Err(t.cell_error(row, col, format!("degree {d} outside [0, 1]")));
            }
            degrees.push(d);
        }
        let id = t.text(row, 0);
        rows.entry(id.clone())
            .or_insert_with(|| {
                order.push(id);
                Vec::new()
            })
            .push(degrees);
    }
    if order.is_empty() {
        return Err(CliError::Validation(format!("{}: no observations", path.display())));
    }
    let samples = order
        .into_iter()
        .map(|id| {
            let assign = PossibilityAssignment::from_rows(&rows[&id])?;
            Ok((id, assign))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PossibilityTable { referents, samples })
}

pub fn write_possibility(path: &Path, table: &PossibilityTable) -> Result<()> {
    let mut w = writer(path)?;
    let mut header = vec!["sample_id".to_string(), "obs_id".to_string()];
    header.extend(table.referents.iter().cloned());
    w.write_record(&header).map_err(csv_err(path))?;
    for (id, assign) in &table.samples {
        for o in 0..assign.n_obs() {
            let mut rec = vec![id.clone(), o.to_string()];
            rec.extend(assign.row(o).iter().map(f64::to_string));
            w.write_record(&rec).map_err(csv_err(path))?;
        }
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// One granular count: the membership of every count `0..=K` for one sample and referent.
#[derive(Debug, Clone, PartialEq)]
pub struct CountRow {
    pub sample_id: String,
    pub referent: String,
    pub xi: MembershipVector,
}

/// Long format `sample_id,referent,y,xi`, one line per count value.
pub fn write_counts(path: &Path, rows: &[CountRow]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["sample_id", "referent", "y", "xi"]).map_err(csv_err(path))?;
    for r in rows {
        for (y, v) in r.xi.values().iter().enumerate() {
            w.write_record([r.sample_id.as_str(), r.referent.as_str(), &y.to_string(), &v.to_string()])
                .map_err(csv_err(path))?;
        }
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Reads the long format; the lines of one count must be contiguous with `y = 0, 1, …`.
pub fn read_counts(path: &Path) -> Result<Vec<CountRow>> {
    let t = Table::read(path)?;
    let (cs, cr, cy, cx) = (t.require("sample_id")?, t.require("referent")?, t.require("y")?, t.require("xi")?);
    let mut out: Vec<(String, String, Vec<f64>)> = Vec::new();
    for row in &t.rows {
        let (sample, referent) = (t.text(row, cs), t.text(row, cr));
        let y: usize = t.parse(row, cy)?;
        let v: f64 = t.parse(row, cx)?;
        if !(0.0..=1.0).contains(&v) {
            return Err(t.cell_error(row, cx, format!("membership {v} outside [0, 1]")));
        }
        match out.last_mut() {
            Some((s, r, xi)) if *s == sample && *r == referent => {
                if y != xi.len() {
                    return Err(t.cell_error(row, cy, format!("expected y = {}, found {y}", xi.len())));
                }
                xi.push(v);
            }
            _ => {
                if y != 0 {
                    return Err(t.cell_error(row, cy, "a new count must start at y = 0"));
                }
                out.push((sample, referent, vec![v]));
            }
        }
    }
    if out.is_empty() {
        return Err(CliError::Validation(format!("{}: no counts", path.display())));
    }
    out.into_iter()
        .map(|(sample_id, referent, xi)| Ok(CountRow { sample_id, referent, xi: MembershipVector::new(xi)? }))
        .collect()
}

/// Fitted statistics of one granular count.
#[derive(Debug, Clone, PartialEq)]
pub struct StatRow {
    pub sample_id: String,
    pub referent: Option<String>,
    pub obs: FuzzyObservation,
}

/// Extra columns written by `fit`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitQuality {
    pub sse: f64,
    pub converged: bool,
    pub crisp: bool,
}

pub fn write_stats(path: &Path, rows: &[(StatRow, FitQuality)]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["sample_id", "referent", "c", "h", "K", "sse", "converged", "crisp"]).map_err(csv_err(path))?;
    for (r, q) in rows {
        w.write_record([
            r.sample_id.clone(),
            r.referent.clone().unwrap_or_default(),
            r.obs.c.to_string(),
            r.obs.h.to_string(),
            r.obs.k.to_string(),
            q.sse.to_string(),
            q.converged.to_string(),
            q.crisp.to_string(),
        ])
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Reads any table with `sample_id,c,h,K` columns (`referent` optional, other columns ignored).
pub fn read_stats(path: &Path) -> Result<Vec<StatRow>> {
    let t = Table::read(path)?;
    let (cs, cc, ch, ck) = (t.require("sample_id")?, t.require("c")?, t.require("h")?, t.require("K")?);
    let cr = t.column("referent");
    let rows = t
        .rows
        .iter()
        .map(|row| {
            let (c, h, k) = (t.parse(row, cc)?, t.parse(row, ch)?, t.parse(row, ck)?);
            let obs = FuzzyObservation::new(c, h, k).map_err(|e| t.cell_error(row, cc, e.to_string()))?;
            let referent = cr.map(|j| t.text(row, j)).filter(|r| !r.is_empty());
            Ok(StatRow { sample_id: t.text(row, cs), referent, obs })
        })
        .collect::<Result<Vec<_>>>()?;
    if rows.is_empty() {
        return Err(CliError::Validation(format!("{}: no statistics", path.display())));
    }
    Ok(rows)
}

/// Keeps the rows of `referent`; an empty name is accepted when the table holds one referent.
pub fn select_referent(rows: Vec<StatRow>, referent: &str) -> Result<Vec<StatRow>> {
    let mut names: Vec<&str> = rows.iter().filter_map(|r| r.referent.as_deref()).collect();
    names.sort_unstable();
    names.dedup();
    if referent.is_empty() {
        if names.len() > 1 {
            return Err(CliError::Validation(format!(
                "statistics hold several referents ({}); set model.referent",
                names.join(", ")
            )));
        }
        return Ok(rows);
    }
    if !names.contains(&referent) {
        return Err(CliError::Validation(format!("referent `{referent}` not found in statistics")));
    }
    Ok(rows.into_iter().filter(|r| r.referent.as_deref() == Some(referent)).collect())
}

/// Covariates and offsets keyed by sample id.
#[derive(Debug, Clone, PartialEq)]
pub struct Covariates {
    pub names: Vec<String>,
    pub rows: Vec<(String, f64, Vec<f64>)>,
}

/// Reads `sample_id[,offset],<covariate>...`; offsets default to 1.
pub fn read_covariates(path: &Path) -> Result<Covariates> {
    let t = Table::read(path)?;
    let cs = t.require("sample_id")?;
    let co = t.column("offset");
    let cols: Vec<usize> = (0..t.header.len()).filter(|&j| j != cs && Some(j) != co).collect();
    let names = cols.iter().map(|&j| t.header[j].clone()).collect();
    let mut seen = std::collections::HashSet::new();
    let rows = t
        .rows
        .iter()
        .map(|row| {
            let id = t.text(row, cs);
            if !seen.insert(id.clone()) {
                return Err(t.cell_error(row, cs, format!("duplicate sample id `{id}`")));
            }
            let offset = match co {
                Some(j) => {
                    let u: f64 = t.parse(row, j)?;
                    if !(u > 0.0 && u.is_finite()) {
                        return Err(t.cell_error(row, j, "offset must be positive"));
                    }
                    u
                }
                None => 1.0,
            };
            let values = cols
                .iter()
                .map(|&j| {
                    let v: f64 = t.parse(row, j)?;
                    if v.is_finite() {
                        Ok(v)
                    } else {
                        Err(t.cell_error(row, j, "covariate must be finite"))
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((id, offset, values))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Covariates { names, rows })
}

pub fn write_covariates(path: &Path, cov: &Covariates) -> Result<()> {
    let mut w = writer(path)?;
    let mut header = vec!["sample_id".to_string(), "offset".to_string()];
    header.extend(cov.names.iter().cloned());
    w.write_record(&header).map_err(csv_err(path))?;
    for (id, u, v) in &cov.rows {
        let mut rec = vec![id.clone(), u.to_string()];
        rec.extend(v.iter().map(f64::to_string));
        w.write_record(&rec).map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// `chain,iter,<params>...,energy,divergent`, chain-major.
pub fn write_draws(path: &Path, draws: &PosteriorDraws) -> Result<()> {
    let mut w = writer(path)?;
    let mut header = vec!["chain".to_string(), "iter".to_string()];
    header.extend(draws.names.iter().cloned());
    header.extend(["energy".to_string(), "divergent".to_string()]);
    w.write_record(&header).map_err(csv_err(path))?;
    for (row, values) in draws.values.iter().enumerate() {
        let mut rec = vec![draws.chain_of(row).to_string(), (row % draws.n_draws).to_string()];
        rec.extend(values.iter().map(f64::to_string));
        rec.push(draws.energy[row].to_string());
        rec.push(u8::from(draws.divergent[row]).to_string());
        w.write_record(&rec).map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Reads draws written by [`write_draws`] and recomputes the diagnostics.
pub fn read_draws(path: &Path) -> Result<PosteriorDraws> {
    let t = Table::read(path)?;
    let (cc, ci, ce, cd) = (t.require("chain")?, t.require("iter")?, t.require("energy")?, t.require("divergent")?);
    let params: Vec<usize> = (0..t.header.len()).filter(|j| ![cc, ci, ce, cd].contains(j)).collect();
    let names = params.iter().map(|&j| t.header[j].clone()).collect();
    let (mut values, mut energy, mut divergent) = (Vec::new(), Vec::new(), Vec::new());
    let mut n_chains = 0;
    for row in &t.rows {
        let chain: usize = t.parse(row, cc)?;
        if chain + 1 < n_chains || chain > n_chains {
            return Err(t.cell_error(row, cc, "draws must be grouped by chain in increasing order"));
        }
        if chain == n_chains {
            n_chains += 1;
        }
        values.push(params.iter().map(|&j| t.parse(row, j)).collect::<Result<Vec<f64>>>()?);
        energy.push(t.parse(row, ce)?);
        let d: u8 = t.parse(row, cd)?;
        divergent.push(d != 0);
    }
    if values.is_empty() {
        return Err(CliError::Validation(format!("{}: no draws", path.display())));
    }
    let nan = vec![f64::NAN; n_chains];
    Ok(PosteriorDraws::from_rows(names, n_chains, values, energy, divergent, nan.clone(), nan)?)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Json { path: path.to_path_buf(), message: e.to_string() })?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Json { path: path.to_path_buf(), message: e.to_string() })
}

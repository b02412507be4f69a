//! Rendering of results as JSON, CSV or text.

use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::ValueEnum;
use serde::Serialize;

use boss_core::batch::BatchReport;
use boss_core::bench::BenchReport;
use boss_core::engine::{BossResult, PairResult, Sidedness};
use boss_core::permutation::PermutationResult;
use boss_core::simulate::{ExperimentReport, MethodSummary, Series};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    schema_version: u32,
    command: &'a str,
    result: &'a T,
}

/// Six significant digits, trailing zeros dropped.
pub fn sig6(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return "0".into();
    }
    let magnitude = x.abs().log10().floor() as i32;
    if !(-5..=9).contains(&magnitude) {
        return format!("{x:.5e}");
    }
    let decimals = (5 - magnitude).max(0) as usize;
    let s = format!("{x:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn lower(v: impl std::fmt::Debug) -> String {
    format!("{v:?}").to_lowercase()
}

fn opt(x: Option<f64>) -> String {
    x.map(sig6).unwrap_or_else(|| "NA".into())
}

pub struct Sink {
    format: Format,
    path: Option<PathBuf>,
}

impl Sink {
    pub fn new(format: Format, path: Option<PathBuf>) -> Self {
        Sink { format, path }
    }

    fn writer(&self) -> Result<Box<dyn Write>> {
        Ok(match &self.path {
            Some(p) => Box::new(File::create(p).with_context(|| format!("creating {}", p.display()))?),
            None => Box::new(io::stdout().lock()),
        })
    }

    fn json<T: Serialize>(&self, command: &str, result: &T) -> Result<()> {
        let mut w = self.writer()?;
        let env = Envelope {
            schema_version: SCHEMA_VERSION,
            command,
            result,
        };
        serde_json::to_writer_pretty(&mut w, &env)?;
        writeln!(w)?;
        Ok(())
    }

    fn csv<T: Serialize>(&self, rows: impl IntoIterator<Item = T>) -> Result<()> {
        let mut w = csv::Writer::from_writer(self.writer()?);
        for row in rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    fn text(&self, body: String) -> Result<()> {
        let mut w = self.writer()?;
        w.write_all(body.as_bytes())?;
        Ok(())
    }

    pub fn test(&self, r: &BossResult) -> Result<()> {
        match self.format {
            Format::Json => self.json("test", r),
            Format::Csv => self.csv(cutoff_rows(r, None)),
            Format::Text => self.text(test_text(r, None)),
        }
    }

    pub fn pair(&self, r: &PairResult) -> Result<()> {
        match self.format {
            Format::Json => self.json("pair", r),
            Format::Csv => self.csv(cutoff_rows(&r.result, Some(&r.cutoff_pairs))),
            Format::Text => self.text(test_text(&r.result, Some(r))),
        }
    }

    pub fn permute(&self, r: &PermutationResult) -> Result<()> {
        match self.format {
            Format::Json => self.json("permute", r),
            Format::Csv => self.csv([r]),
            Format::Text => self.text(format!(
                "permutation FWER = {} (se {})\nobserved max |z| = {}\npermutations = {}, exceeding = {}, with failed fits = {}\ncutoffs used = {}\n",
                sig6(r.fwer),
                sig6(r.se),
                sig6(r.t_obs),
                r.n_perm,
                r.exceedances,
                r.degenerate,
                r.k_used
            )),
        }
    }

    pub fn batch(&self, r: &BatchReport) -> Result<()> {
        match self.format {
            Format::Json => self.json("batch", r),
            Format::Csv => self.csv(&r.genes),
            Format::Text => {
                let m = &r.metadata;
                let mut s = format!(
                    "{} biomarkers, {} samples joined ({} clinical / {} expression unmatched)\nmodel {}, k = {}, min group {}, covariates [{}]\n{} significant at FDR {}, {} failed\n\n",
                    m.genes,
                    m.samples_joined,
                    m.unmatched_clinical,
                    m.unmatched_expression,
                    lower(m.model),
                    m.k,
                    m.min_group,
                    m.covariates.join(", "),
                    m.significant,
                    sig6(m.alpha_fdr),
                    m.genes_failed
                );
                s.push_str("gene\tcutoff\tn_high\tn_low\tbeta\tz\tfwer\tq\tsignificant\terror\n");
                for g in &r.genes {
                    s.push_str(&format!(
                        "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                        g.gene,
                        opt(g.optimal_cutoff),
                        g.n_high.map_or("NA".into(), |v| v.to_string()),
                        g.n_low.map_or("NA".into(), |v| v.to_string()),
                        opt(g.beta),
                        opt(g.z),
                        opt(g.fwer),
                        opt(g.q),
                        g.significant,
                        g.error_code.as_deref().unwrap_or("")
                    ));
                }
                self.text(s)
            }
        }
    }

    pub fn simulate(&self, r: &ExperimentReport) -> Result<()> {
        let methods: Vec<&MethodSummary> = std::iter::once(&r.boss).chain(r.permutation.as_ref()).collect();
        match self.format {
            Format::Json => self.json("simulate", r),
            Format::Csv => self.csv(methods.iter().map(|m| SimulateRow::new(r, m))),
            Format::Text => {
                let sc = &r.scenario;
                let mut s = format!(
                    "model {}, k = {}, effect {}, n_scale {}, {} genes x {} replicates\n",
                    lower(sc.model),
                    sc.k,
                    lower(sc.effect),
                    sig6(sc.n_scale),
                    r.genes.len(),
                    r.replicates
                );
                s.push_str("method\trate\tmedian\tq1\tq3\tmean_ms\tse_ms\n");
                for m in &methods {
                    s.push_str(&format!(
                        "{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                        m.method,
                        sig6(m.pooled_rate),
                        sig6(m.median_rate),
                        sig6(m.q1_rate),
                        sig6(m.q3_rate),
                        sig6(m.mean_ms),
                        sig6(m.se_ms)
                    ));
                }
                if let Some(p) = r.sign_test_p {
                    s.push_str(&format!("paired sign test p = {}\n", sig6(p)));
                }
                if r.failed_replicates > 0 {
                    s.push_str(&format!("{} replicates failed\n", r.failed_replicates));
                }
                self.text(s)
            }
        }
    }

    pub fn bench(&self, r: &BenchReport) -> Result<()> {
        match self.format {
            Format::Json => self.json("bench", r),
            Format::Csv => self.csv(r.rows.iter().map(BenchCsv::from)),
            Format::Text => {
                let mut s = format!("n = {}, {} permutations, {} datasets per model\n", r.n, r.n_perm, r.datasets);
                s.push_str("k\tboss_ms\tboss_se\tperm_ms\tperm_se\tratio\n");
                for row in &r.rows {
                    s.push_str(&format!(
                        "{}\t{}\t{}\t{}\t{}\t{}\n",
                        row.k,
                        sig6(row.boss_mean_ms),
                        sig6(row.boss_se_ms),
                        sig6(row.perm_mean_ms),
                        sig6(row.perm_se_ms),
                        sig6(row.ratio)
                    ));
                }
                self.text(s)
            }
        }
    }
}

#[derive(Serialize)]
struct CutoffRow {
    cutoff_index: usize,
    cutoff: f64,
    cutoff2: Option<f64>,
    beta_hat: f64,
    se: f64,
    z: f64,
    n_high: usize,
    n_low: usize,
    optimal: bool,
    fwer: f64,
}

fn cutoff_rows<'a>(r: &'a BossResult, pairs: Option<&'a Vec<(f64, f64)>>) -> impl Iterator<Item = CutoffRow> + 'a {
    r.per_cutoff.iter().enumerate().map(move |(i, t)| CutoffRow {
        cutoff_index: t.cutoff_index,
        cutoff: t.cutoff,
        cutoff2: pairs.map(|p| p[i].1),
        beta_hat: t.beta_hat,
        se: t.se,
        z: t.z,
        n_high: t.n_high,
        n_low: t.n_low,
        optimal: t.cutoff_index == r.optimal_index,
        fwer: r.fwer,
    })
}

fn test_text(r: &BossResult, pair: Option<&PairResult>) -> String {
    let sided = match r.sidedness {
        Sidedness::TwoSided => "two-sided",
        Sidedness::OneSided => "one-sided",
    };
    let mut s = format!(
        "model {}, n = {}, k requested = {}, k' = {}\n",
        lower(r.model),
        r.n,
        r.k_requested,
        r.k_used
    );
    match pair {
        Some(p) => s.push_str(&format!(
            "optimal cutoffs = ({}, {}) (test {})\n",
            sig6(p.optimal_pair.0),
            sig6(p.optimal_pair.1),
            r.optimal_index
        )),
        None => s.push_str(&format!(
            "optimal cutoff = {} (cutoff {})\n",
            sig6(r.optimal_cutoff),
            r.optimal_index
        )),
    }
    let best = r.optimal();
    s.push_str(&format!(
        "beta = {}, se = {}, z* = {}, n_high = {}, n_low = {}\n",
        sig6(best.beta_hat),
        sig6(best.se),
        sig6(r.z_star),
        best.n_high,
        best.n_low
    ));
    s.push_str(&format!(
        "FWER = {} ({sided}, error {}), unadjusted p = {}\n",
        sig6(r.fwer),
        sig6(r.fwer_mc_error),
        sig6(r.unadjusted_p())
    ));
    if r.k_used == 1 {
        s.push_str(&format!("k'=1, FWER = {sided} p\n"));
    }
    s.push_str(&format!(
        "{} at alpha = {}\n",
        if r.reject { "reject" } else { "do not reject" },
        sig6(r.alpha)
    ));
    if r.argmax_ties > 1 {
        s.push_str(&format!("{} cutoffs tie for the largest |z|; the first is reported\n", r.argmax_ties));
    }
    s.push('\n');
    if pair.is_some() {
        s.push_str("#\tcutoff1\tcutoff2\tbeta\tse\tz\tn_high\tn_low\n");
    } else {
        s.push_str("#\tcutoff\tbeta\tse\tz\tn_high\tn_low\n");
    }
    for (i, t) in r.per_cutoff.iter().enumerate() {
        let cut = match pair {
            Some(p) => format!("{}\t{}", sig6(p.cutoff_pairs[i].0), sig6(p.cutoff_pairs[i].1)),
            None => sig6(t.cutoff),
        };
        s.push_str(&format!(
            "{}{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            t.cutoff_index,
            if t.cutoff_index == r.optimal_index { "*" } else { "" },
            cut,
            sig6(t.beta_hat),
            sig6(t.se),
            sig6(t.z),
            t.n_high,
            t.n_low
        ));
    }
    if let Some(p) = pair {
        s.push_str(&format!("\ncorrelations: {}\n", p.covariance_method));
    }
    for w in &r.warnings {
        s.push_str(&format!("warning: {w}\n"));
    }
    s
}

#[derive(Serialize)]
struct SimulateRow<'a> {
    method: &'a str,
    model: String,
    k: usize,
    effect: String,
    n_scale: f64,
    genes: usize,
    replicates: usize,
    rate: f64,
    median_rate: f64,
    q1_rate: f64,
    q3_rate: f64,
    mean_ms: f64,
    se_ms: f64,
    sign_test_p: Option<f64>,
}

impl<'a> SimulateRow<'a> {
    fn new(r: &'a ExperimentReport, m: &'a MethodSummary) -> Self {
        SimulateRow {
            method: &m.method,
            model: lower(r.scenario.model),
            k: r.scenario.k,
            effect: lower(r.scenario.effect),
            n_scale: r.scenario.n_scale,
            genes: r.genes.len(),
            replicates: r.replicates,
            rate: m.pooled_rate,
            median_rate: m.median_rate,
            q1_rate: m.q1_rate,
            q3_rate: m.q3_rate,
            mean_ms: m.mean_ms,
            se_ms: m.se_ms,
            sign_test_p: r.sign_test_p,
        }
    }
}

#[derive(Serialize)]
struct BenchCsv {
    k: usize,
    runs: usize,
    boss_mean_ms: f64,
    boss_se_ms: f64,
    perm_mean_ms: f64,
    perm_se_ms: f64,
    ratio: f64,
}

impl From<&boss_core::bench::BenchRow> for BenchCsv {
    fn from(r: &boss_core::bench::BenchRow) -> Self {
        BenchCsv {
            k: r.k,
            runs: r.runs,
            boss_mean_ms: r.boss_mean_ms,
            boss_se_ms: r.boss_se_ms,
            perm_mean_ms: r.perm_mean_ms,
            perm_se_ms: r.perm_se_ms,
            ratio: r.ratio,
        }
    }
}

pub fn write_plot_data(path: &Path, series: &[Series]) -> Result<()> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    serde_json::to_writer_pretty(
        f,
        &Envelope {
            schema_version: SCHEMA_VERSION,
            command: "plot-data",
            result: &series,
        },
    )?;
    Ok(())
}

//! Long-format result tables and their writers.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use densemu_core::density::{Quantity, RelativeErrors};
use serde::Serialize;

use crate::config::Kind;
use crate::error::{Error, Result};

/// One relative error.
///
/// `item` is a test point (KR sweeps) or a held-out sample (LOO); `None`
/// when the value is already a mean over samples. Flagged values are NaN.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Record {
    pub method: String,
    pub n: usize,
    pub q: Option<usize>,
    pub repetition: usize,
    pub item: Option<usize>,
    #[serde(serialize_with = "quantity_name")]
    pub quantity: Quantity,
    pub value: f64,
    pub flagged: bool,
}

impl Record {
    fn key(&self) -> (&str, usize, Option<usize>, usize, Option<usize>, Quantity) {
        (&self.method, self.n, self.q, self.repetition, self.item, self.quantity)
    }
}

fn quantity_name<S: serde::Serializer>(q: &Quantity, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(q.name())
}

/// Nine records, one per quantity, from a set of relative errors.
pub fn records_from(
    method: &str,
    n: usize,
    q: Option<usize>,
    repetition: usize,
    item: Option<usize>,
    errors: &RelativeErrors,
) -> Vec<Record> {
    errors
        .iter()
        .map(|(quantity, value)| Record {
            method: method.to_string(),
            n,
            q,
            repetition,
            item,
            quantity,
            value,
            flagged: errors.is_flagged(quantity),
        })
        .collect()
}

/// Records averaged over items, per quantity; flagged entries are skipped
/// and the mean is flagged only when every entry is.
pub fn mean_records(
    method: &str,
    n: usize,
    q: Option<usize>,
    repetition: usize,
    errors: &[RelativeErrors],
) -> Vec<Record> {
    Quantity::ALL
        .iter()
        .map(|&quantity| {
            let kept: Vec<f64> = errors.iter().filter(|e| !e.is_flagged(quantity)).map(|e| e.get(quantity)).collect();
            let flagged = kept.is_empty();
            Record {
                method: method.to_string(),
                n,
                q,
                repetition,
                item: None,
                quantity,
                value: if flagged { f64::NAN } else { kept.iter().sum::<f64>() / kept.len() as f64 },
                flagged,
            }
        })
        .collect()
}

/// Distribution summary of one (method, N, q, quantity) cell over
/// repetitions and items. Statistics ignore flagged records.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregate {
    pub method: String,
    pub n: usize,
    pub q: Option<usize>,
    #[serde(serialize_with = "quantity_name")]
    pub quantity: Quantity,
    pub count: usize,
    pub flagged: usize,
    pub mean: f64,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

/// Linear-interpolation quantile of sorted data (the common "type 7" rule).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Fitted bandwidth, kept for the summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandwidthRecord {
    pub method: String,
    pub n: usize,
    pub repetition: usize,
    pub fold: Option<usize>,
    pub h: Vec<f64>,
    pub objective: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub kind: Kind,
    records: Vec<Record>,
    pub report: Vec<String>,
    pub bandwidths: Vec<BandwidthRecord>,
}

impl ResultTable {
    /// Sorts records by key, so the table does not depend on the order in
    /// which work items finished.
    pub fn new(kind: Kind, mut records: Vec<Record>, report: Vec<String>, mut bandwidths: Vec<BandwidthRecord>) -> Self {
        records.sort_by(|a, b| a.key().cmp(&b.key()));
        bandwidths.sort_by(|a, b| (&a.method, a.n, a.repetition, a.fold).cmp(&(&b.method, b.n, b.repetition, b.fold)));
        ResultTable { kind, records, report, bandwidths }
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    /// Method names in sorted order.
    pub fn methods(&self) -> Vec<&str> {
        let mut m: Vec<&str> = self.records.iter().map(|r| r.method.as_str()).collect();
        m.dedup();
        m.sort_unstable();
        m.dedup();
        m
    }

    pub fn aggregates(&self) -> Vec<Aggregate> {
        let mut cells: BTreeMap<(&str, usize, Option<usize>, Quantity), Vec<&Record>> = BTreeMap::new();
        for r in &self.records {
            cells.entry((&r.method, r.n, r.q, r.quantity)).or_default().push(r);
        }
        cells
            .into_iter()
            .map(|((method, n, q, quantity), rs)| {
                let mut v: Vec<f64> = rs.iter().filter(|r| !r.flagged).map(|r| r.value).collect();
                v.sort_by(f64::total_cmp);
                let mean = if v.is_empty() { f64::NAN } else { v.iter().sum::<f64>() / v.len() as f64 };
                Aggregate {
                    method: method.to_string(),
                    n,
                    q,
                    quantity,
                    count: rs.len(),
                    flagged: rs.len() - v.len(),
                    mean,
                    min: v.first().copied().unwrap_or(f64::NAN),
                    q1: quantile_sorted(&v, 0.25),
                    median: quantile_sorted(&v, 0.5),
                    q3: quantile_sorted(&v, 0.75),
                    max: v.last().copied().unwrap_or(f64::NAN),
                }
            })
            .collect()
    }

    /// Aggregate for one cell.
    pub fn cell(&self, method: &str, n: usize, q: Option<usize>, quantity: Quantity) -> Option<Aggregate> {
        self.aggregates().into_iter().find(|a| a.method == method && a.n == n && a.q == q && a.quantity == quantity)
    }

    pub fn write_records_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("method,n,q,repetition,item,quantity,value,flagged\n");
        let opt = |v: Option<usize>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.method,
                r.n,
                opt(r.q),
                r.repetition,
                opt(r.item),
                r.quantity.name(),
                r.value,
                u8::from(r.flagged)
            );
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    pub fn write_summary_json(&self, path: &Path) -> Result<()> {
        #[derive(Serialize)]
        struct Summary<'a> {
            kind: &'static str,
            report: &'a [String],
            aggregates: Vec<Aggregate>,
            bandwidths: &'a [BandwidthRecord],
        }
        let summary = Summary {
            kind: self.kind.name(),
            report: &self.report,
            aggregates: self.aggregates(),
            bandwidths: &self.bandwidths,
        };
        let mut text = serde_json::to_string_pretty(&summary).map_err(|e| Error::data(path, e.to_string()))?;
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// gnuplot data: one block per (method, quantity), blocks separated by
    /// two blank lines so `index` selects them. The abscissa is q when the
    /// table has basis sizes, N otherwise.
    pub fn write_plot_dat(&self, path: &Path) -> Result<()> {
        let mut blocks: BTreeMap<(&str, Quantity), Vec<Aggregate>> = BTreeMap::new();
        let aggs = self.aggregates();
        for a in &aggs {
            blocks.entry((a.method.as_str(), a.quantity)).or_default().push(a.clone());
        }
        let mut out = String::new();
        for (k, ((method, quantity), rows)) in blocks.into_iter().enumerate() {
            if k > 0 {
                out.push_str("\n\n");
            }
            let _ = writeln!(out, "# {method} {}", quantity.name());
            let _ = writeln!(out, "# n q mean min q1 median q3 max");
            for a in rows {
                let _ = writeln!(
                    out,
                    "{} {} {} {} {} {} {} {}",
                    a.n,
                    a.q.map(|q| q.to_string()).unwrap_or_else(|| "-".into()),
                    a.mean,
                    a.min,
                    a.q1,
                    a.median,
                    a.q3,
                    a.max
                );
            }
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    /// Mean relative error per quantity (rows) and method (columns), rows in
    /// the order L1, L2, Hellinger, mean, variance, 1%, 99%, 25%, 75%.
    pub fn loo_table(&self) -> Vec<(Quantity, Vec<f64>)> {
        let aggs = self.aggregates();
        let methods = self.methods();
        LOO_ROWS
            .iter()
            .map(|&quantity| {
                let row = methods
                    .iter()
                    .map(|m| {
                        let cells: Vec<&Aggregate> =
                            aggs.iter().filter(|a| a.method == *m && a.quantity == quantity).collect();
                        let total: usize = cells.iter().map(|a| a.count - a.flagged).sum();
                        if total == 0 {
                            return f64::NAN;
                        }
                        cells.iter().map(|a| a.mean * (a.count - a.flagged) as f64).sum::<f64>() / total as f64
                    })
                    .collect();
                (quantity, row)
            })
            .collect()
    }

    pub fn write_loo_table(&self, path: &Path) -> Result<()> {
        let mut out = String::from("quantity");
        for m in self.methods() {
            out.push(',');
            out.push_str(m);
        }
        out.push('\n');
        for (quantity, row) in self.loo_table() {
            out.push_str(loo_label(quantity));
            for v in row {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    /// Writes `records.csv`, `summary.json`, `plot.dat` and, for LOO
    /// campaigns, `loo_table.csv` into `dir`.
    pub fn write_all(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.write_records_csv(&dir.join("records.csv"))?;
        self.write_summary_json(&dir.join("summary.json"))?;
        self.write_plot_dat(&dir.join("plot.dat"))?;
        if self.kind == Kind::LooValidate {
            self.write_loo_table(&dir.join("loo_table.csv"))?;
        }
        Ok(())
    }
}

/// Row order of the leave-one-out table.
pub const LOO_ROWS: [Quantity; 9] = [
    Quantity::L1,
    Quantity::L2,
    Quantity::Hellinger,
    Quantity::Mean,
    Quantity::Variance,
    Quantity::Q01,
    Quantity::Q99,
    Quantity::Q25,
    Quantity::Q75,
];

pub fn loo_label(q: Quantity) -> &'static str {
    match q {
        Quantity::L1 => "L1",
        Quantity::L2 => "L2",
        Quantity::Hellinger => "Hellinger",
        Quantity::Mean => "Mean",
        Quantity::Variance => "Variance",
        Quantity::Q01 => "1% quantile",
        Quantity::Q99 => "99% quantile",
        Quantity::Q25 => "25% quantile",
        Quantity::Q75 => "75% quantile",
    }
}

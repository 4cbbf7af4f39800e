//! The four experiment campaigns.
//!
//! Work items (repetitions, fits, folds) run on a bounded rayon pool. Each
//! item derives its seeds from the campaign seed and its own indices, and
//! records are sorted before writing, so the output does not depend on
//! the number of workers.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use densemu_core::decomposition::{
    aqm_fit_traced, cpca_fit, mmp_fit, random_basis_fit, reconstruction_errors, AqmQpEvent, DecompositionModel, Method,
};
use densemu_core::density::{kde, relative_errors, silverman_bandwidth, Density, Grid, Quantity, RelativeErrors};
use densemu_core::kernel_regression::{
    median_seed_bandwidth, optimize_bandwidth, predict, Bandwidth, Metric, TrainingSet,
};
use densemu_core::qp::QpStep;
use densemu_core::toy_models::{build_training, draw_replicates, gauss_family, make_design, Model, Scheme};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{metric_name, CampaignConfig, Kind, Source};
use crate::error::{Error, Result};
use crate::io::{ingest_dataset, write_design};
use crate::table::{mean_records, records_from, BandwidthRecord, Record, ResultTable};

/// Seed streams, one per purpose.
const STREAM_DESIGN: u64 = 1;
const STREAM_REPLICATES: u64 = 2;
const STREAM_TEST: u64 = 3;
const STREAM_TRUTH: u64 = 4;
const STREAM_RANDOM: u64 = 5;

/// Truth densities use this many times the training replicate count.
pub const TRUTH_REPLICATE_FACTOR: usize = 10;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for work item `index` of `stream`.
pub fn derive_seed(seed: u64, stream: u64, index: u64) -> u64 {
    splitmix(splitmix(splitmix(seed) ^ stream) ^ index)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub jobs: usize,
    /// 1 prints progress to stderr, 2 also collects AQM QP traces.
    pub verbose: u8,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { jobs: 1, verbose: 0 }
    }
}

/// A campaign's table plus the files that go next to it.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub table: ResultTable,
    /// Persisted designs as (file stem, points).
    pub designs: Vec<(String, Vec<Vec<f64>>)>,
    /// JSON lines, one per active-set change of an AQM basis-row QP.
    pub qp_trace: Vec<String>,
}

impl Outcome {
    pub fn write(&self, dir: &Path) -> Result<()> {
        self.table.write_all(dir)?;
        for (stem, points) in &self.designs {
            write_design(&dir.join("designs").join(format!("{stem}.csv")), points)?;
        }
        if !self.qp_trace.is_empty() {
            let path = dir.join("qp_trace.jsonl");
            let mut text = self.qp_trace.join("\n");
            text.push('\n');
            fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}

pub fn run(cfg: &CampaignConfig, opts: &RunOptions) -> Result<Outcome> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    pool.install(|| match cfg.kind {
        Kind::KrSweep => kr_sweep(cfg, opts),
        Kind::DecompSweep => decomp_sweep(cfg, opts),
        Kind::MmpVsRandom => mmp_vs_random(cfg, opts),
        Kind::LooValidate => loo_validate(cfg, opts),
    })
}

fn progress(opts: &RunOptions, msg: impl FnOnce() -> String) {
    if opts.verbose >= 1 {
        eprintln!("{}", msg());
    }
}

/// One learning sample: a prefix of repetition `rep`'s design.
struct Sample {
    rep: usize,
    train: TrainingSet,
}

impl Sample {
    fn n(&self) -> usize {
        self.train.len()
    }
}

/// Learning samples for every (repetition, size), ordered by repetition then
/// size, plus the full design of each repetition.
fn learning_samples(cfg: &CampaignConfig) -> Result<(Vec<Sample>, Vec<(String, Vec<Vec<f64>>)>)> {
    match &cfg.source {
        Source::Dataset { design, outputs } => {
            let full = ingest_dataset(design, outputs, &cfg.grid)?;
            let sizes = if cfg.sizes.is_empty() { vec![full.len()] } else { cfg.sizes.clone() };
            if let Some(&n) = sizes.iter().find(|&&n| n > full.len()) {
                return Err(Error::Config(format!("size {n} exceeds the {} dataset rows", full.len())));
            }
            let samples = sizes
                .iter()
                .map(|&n| Ok(Sample { rep: 0, train: full.subset(&(0..n).collect::<Vec<_>>())? }))
                .collect::<Result<Vec<_>>>()?;
            Ok((samples, Vec::new()))
        }
        Source::Model(model) => {
            let grid = cfg.fixed_grid()?;
            let max_n = *cfg.sizes.last().expect("validated sizes");
            let per_rep = (0..cfg.repetitions)
                .into_par_iter()
                .map(|rep| {
                    let design = make_design(
                        cfg.scheme,
                        max_n,
                        &model.input_box(),
                        derive_seed(cfg.seed, STREAM_DESIGN, rep as u64),
                    )?;
                    let full = build_training(
                        *model,
                        &design,
                        cfg.replicates,
                        grid,
                        derive_seed(cfg.seed, STREAM_REPLICATES, rep as u64),
                    )?;
                    let samples = cfg
                        .sizes
                        .iter()
                        .map(|&n| Ok(Sample { rep, train: full.subset(&(0..n).collect::<Vec<_>>())? }))
                        .collect::<Result<Vec<_>>>()?;
                    Ok((samples, (format!("design_r{rep}"), design.points)))
                })
                .collect::<Result<Vec<_>>>()?;
            let mut samples = Vec::new();
            let mut designs = Vec::new();
            for (s, d) in per_rep {
                samples.extend(s);
                designs.push(d);
            }
            Ok((samples, designs))
        }
    }
}

pub fn kr_method_name(metric: Metric, isotropic: bool) -> String {
    format!("KR_{}_{}", metric_name(metric), if isotropic { "ISO" } else { "ANISO" })
}

fn bandwidth_record(method: &str, n: usize, rep: usize, fold: Option<usize>, h: &Bandwidth, objective: Option<f64>) -> BandwidthRecord {
    BandwidthRecord { method: method.to_string(), n, repetition: rep, fold, h: h.diag().to_vec(), objective }
}

/// Ground-truth densities at the test points: exact for the Gaussian family,
/// otherwise a KDE of `TRUTH_REPLICATE_FACTOR` times the training replicates.
pub fn truth_densities(model: Model, points: &[Vec<f64>], replicates: usize, grid: &Grid, seed: u64) -> Result<Vec<Density>> {
    points
        .par_iter()
        .enumerate()
        .map(|(k, x)| {
            if model.is_analytic() {
                return Ok(gauss_family(x, grid)?);
            }
            let y = draw_replicates(model, x, k, TRUTH_REPLICATE_FACTOR * replicates, seed)?;
            Ok(kde(&y, silverman_bandwidth(&y)?, grid)?)
        })
        .collect()
}

fn kr_sweep(cfg: &CampaignConfig, opts: &RunOptions) -> Result<Outcome> {
    let Source::Model(model) = cfg.source else {
        return Err(Error::Config("KR_SWEEP needs a generative model".into()));
    };
    let grid = cfg.fixed_grid()?.expect("toy campaigns use a fixed grid");
    let test = make_design(Scheme::Uniform, cfg.test_points, &model.input_box(), derive_seed(cfg.seed, STREAM_TEST, 0))?;
    progress(opts, || format!("computing {} truth densities", test.len()));
    let truths = truth_densities(model, &test.points, cfg.replicates, &grid, derive_seed(cfg.seed, STREAM_TRUTH, 0))?;
    progress(opts, || "building training sets".into());
    let (samples, mut designs) = learning_samples(cfg)?;
    designs.push(("test_points".into(), test.points.clone()));

    let mut items = Vec::new();
    for s in 0..samples.len() {
        for &metric in &cfg.estimators {
            for &iso in cfg.bandwidth_mode.variants() {
                items.push((s, metric, iso));
            }
        }
    }
    let results = items
        .par_iter()
        .map(|&(s, metric, iso)| {
            let sample = &samples[s];
            let name = kr_method_name(metric, iso);
            let fit = optimize_bandwidth(&sample.train, iso, metric)?;
            let mut records = Vec::with_capacity(9 * test.len());
            for (k, (x, truth)) in test.points.iter().zip(&truths).enumerate() {
                let p = predict(&sample.train, x, &fit.bandwidth, metric)?;
                records.extend(records_from(&name, sample.n(), None, sample.rep, Some(k), &relative_errors(truth, &p)?));
            }
            progress(opts, || format!("{name} N={} rep {}: h = {:?}", sample.n(), sample.rep, fit.bandwidth.diag()));
            let bw = bandwidth_record(&name, sample.n(), sample.rep, None, &fit.bandwidth, Some(fit.objective));
            Ok((records, bw))
        })
        .collect::<Result<Vec<_>>>()?;

    let (records, bandwidths): (Vec<Vec<Record>>, Vec<BandwidthRecord>) = results.into_iter().unzip();
    let mut table = ResultTable::new(Kind::KrSweep, records.concat(), Vec::new(), bandwidths);
    table.report = kr_trend_report(&table, &cfg.sizes);
    Ok(Outcome { table, designs, qp_trace: Vec::new() })
}

/// Whether the median L1, L2 and Hellinger errors strictly decrease from
/// each size to the next, per method.
pub fn kr_trend_report(table: &ResultTable, sizes: &[usize]) -> Vec<String> {
    let mut lines = Vec::new();
    if sizes.len() < 2 {
        return lines;
    }
    for method in table.methods() {
        for quantity in [Quantity::L1, Quantity::L2, Quantity::Hellinger] {
            let medians: Vec<f64> = sizes
                .iter()
                .map(|&n| table.cell(method, n, None, quantity).map_or(f64::NAN, |a| a.median))
                .collect();
            let ok = medians.windows(2).all(|w| w[1] < w[0]);
            let trail = sizes
                .iter()
                .zip(&medians)
                .map(|(n, m)| format!("N={n}: {m:.4}"))
                .collect::<Vec<_>>()
                .join(", ");
            lines.push(format!(
                "{}: {method} median {} error decreases with N ({trail})",
                if ok { "PASS" } else { "WARN" },
                quantity.name()
            ));
        }
    }
    lines
}

/// Decomposition of `f` by `method` with `q` basis functions.
pub fn fit_method(
    method: Method,
    f: &[Density],
    q: usize,
    aqm_iter_max: usize,
    seed: u64,
    trace: &mut dyn FnMut(&AqmQpEvent),
) -> Result<DecompositionModel> {
    Ok(match method {
        Method::Cpca => cpca_fit(f, q)?,
        Method::MmpL2 => mmp_fit(f, q, Metric::L2, 0.0)?,
        Method::MmpHellinger => mmp_fit(f, q, Metric::Hellinger, 0.0)?,
        Method::Aqm => aqm_fit_traced(f, q, aqm_iter_max, trace)?,
        Method::Random => random_basis_fit(f, q, seed)?,
    })
}

#[derive(Serialize)]
struct TraceLine<'a> {
    repetition: usize,
    n: usize,
    q: usize,
    sweep: usize,
    row: usize,
    iteration: usize,
    step: &'a str,
    constraint: usize,
    active: usize,
    objective: f64,
}

struct DecompItem {
    records: Vec<Record>,
    history: Vec<f64>,
    trace: Vec<String>,
}

fn nonincreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] <= w[0])
}

fn decomp_sweep(cfg: &CampaignConfig, opts: &RunOptions) -> Result<Outcome> {
    let (samples, designs) = learning_samples(cfg)?;
    let mut report = Vec::new();
    let mut items = Vec::new();
    for (s, sample) in samples.iter().enumerate() {
        let n = sample.n();
        if cfg.q_range.1 > n {
            return Err(Error::Config(format!("q_range upper bound {} exceeds N = {n}", cfg.q_range.1)));
        }
        for &method in &cfg.methods {
            for q in cfg.q_values() {
                if method == Method::Cpca && q >= n {
                    if sample.rep == 0 {
                        report.push(format!("SKIP: CPCA needs q < N, skipped q = {q} at N = {n}"));
                    }
                    continue;
                }
                items.push((s, method, q));
            }
        }
    }
    let trace_on = opts.verbose >= 2;
    let results = items
        .par_iter()
        .map(|&(s, method, q)| {
            let sample = &samples[s];
            let f = sample.train.densities();
            let mut trace = Vec::new();
            let mut sink = |e: &AqmQpEvent| {
                if trace_on {
                    let line = TraceLine {
                        repetition: sample.rep,
                        n: f.len(),
                        q,
                        sweep: e.sweep,
                        row: e.row,
                        iteration: e.event.iteration,
                        step: match e.event.step {
                            QpStep::Add => "add",
                            QpStep::Drop => "drop",
                        },
                        constraint: e.event.constraint,
                        active: e.event.active,
                        objective: e.event.objective,
                    };
                    trace.push(serde_json::to_string(&line).expect("plain struct serializes"));
                }
            };
            let model = fit_method(method, f, q, cfg.aqm_iter_max, 0, &mut sink)?;
            let errors = reconstruction_errors(&model, f)?;
            progress(opts, || format!("{} N={} q={q} rep {}", method.name(), f.len(), sample.rep));
            Ok(DecompItem {
                records: mean_records(method.name(), f.len(), Some(q), sample.rep, &errors),
                history: model.history().to_vec(),
                trace,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut records = Vec::new();
    let mut qp_trace = Vec::new();
    let mut aqm_ok = true;
    let mut mmp_sup_ok = [true, true];
    for ((_, method, _), item) in items.iter().zip(results) {
        match method {
            Method::Aqm => aqm_ok &= nonincreasing(&item.history),
            Method::MmpL2 => mmp_sup_ok[0] &= nonincreasing(&item.history),
            Method::MmpHellinger => mmp_sup_ok[1] &= nonincreasing(&item.history),
            _ => {}
        }
        records.extend(item.records);
        qp_trace.extend(item.trace);
    }
    let mut table = ResultTable::new(Kind::DecompSweep, records, Vec::new(), Vec::new());

    let sizes: Vec<usize> = {
        let mut v: Vec<usize> = samples.iter().map(Sample::n).collect();
        v.sort_unstable();
        v.dedup();
        v
    };
    let verdict = |ok: bool| if ok { "PASS" } else { "WARN" };
    if cfg.methods.contains(&Method::Aqm) {
        report.push(format!("{}: AQM objective nonincreasing at every half-sweep", verdict(aqm_ok)));
    }
    for (k, method) in [Method::MmpL2, Method::MmpHellinger].into_iter().enumerate() {
        if !cfg.methods.contains(&method) {
            continue;
        }
        report.push(format!("{}: {} sup-error nonincreasing in q", verdict(mmp_sup_ok[k]), method.name()));
        for &n in &sizes {
            let means: Vec<f64> = cfg
                .q_values()
                .filter_map(|q| table.cell(method.name(), n, Some(q), Quantity::L2).map(|a| a.mean))
                .collect();
            report.push(format!("{}: {} mean l2 error nonincreasing in q at N = {n}", verdict(nonincreasing(&means)), method.name()));
        }
    }
    if cfg.methods.contains(&Method::Cpca) && cfg.methods.contains(&Method::MmpL2) {
        for &n in &sizes {
            let q = 10;
            if let (Some(c), Some(m)) = (
                table.cell(Method::Cpca.name(), n, Some(q), Quantity::L2),
                table.cell(Method::MmpL2.name(), n, Some(q), Quantity::L2),
            ) {
                report.push(format!(
                    "{}: CPCA mean l2 error {:.4e} <= MMP_L2 {:.4e} at N = {n}, q = {q}",
                    verdict(c.mean <= m.mean),
                    c.mean,
                    m.mean
                ));
            }
        }
    }
    table.report = report;
    Ok(Outcome { table, designs, qp_trace })
}

pub fn random_method_name(b: usize) -> String {
    format!("RANDOM_{:02}", b + 1)
}

fn mmp_vs_random(cfg: &CampaignConfig, opts: &RunOptions) -> Result<Outcome> {
    let (samples, designs) = learning_samples(cfg)?;
    let mmp = match cfg.metric {
        Metric::L2 => Method::MmpL2,
        Metric::Hellinger => Method::MmpHellinger,
    };
    let mut items = Vec::new();
    for (s, sample) in samples.iter().enumerate() {
        if cfg.q_range.1 > sample.n() {
            return Err(Error::Config(format!("q_range upper bound {} exceeds N = {}", cfg.q_range.1, sample.n())));
        }
        for q in cfg.q_values() {
            items.push((s, None, q));
            for b in 0..cfg.baselines {
                items.push((s, Some(b), q));
            }
        }
    }
    let records = items
        .par_iter()
        .map(|&(s, baseline, q)| {
            let sample = &samples[s];
            let f = sample.train.densities();
            let (name, model) = match baseline {
                None => (mmp.name().to_string(), fit_method(mmp, f, q, 0, 0, &mut |_| {})?),
                Some(b) => {
                    let seed = derive_seed(cfg.seed, STREAM_RANDOM, (sample.rep * cfg.baselines + b) as u64);
                    (random_method_name(b), random_basis_fit(f, q, seed)?)
                }
            };
            let errors = reconstruction_errors(&model, f)?;
            if baseline.is_none() {
                progress(opts, || format!("{name} N={} q={q} rep {}", f.len(), sample.rep));
            }
            Ok(mean_records(&name, f.len(), Some(q), sample.rep, &errors))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut table = ResultTable::new(Kind::MmpVsRandom, records.concat(), Vec::new(), Vec::new());

    let mut sizes: Vec<usize> = samples.iter().map(Sample::n).collect();
    sizes.sort_unstable();
    sizes.dedup();
    let mut report = Vec::new();
    for n in sizes {
        for q in cfg.q_values() {
            let (mmp_mean, ensemble) = mmp_and_ensemble(&table, mmp, n, q, cfg.baselines);
            report.push(format!(
                "{}: {} mean l2 error {mmp_mean:.4e} <= random ensemble mean {ensemble:.4e} at N = {n}, q = {q}",
                if mmp_mean <= ensemble { "PASS" } else { "WARN" },
                mmp.name()
            ));
        }
    }
    table.report = report;
    Ok(Outcome { table, designs, qp_trace: Vec::new() })
}

/// Mean L2 relative error of MMP and the average over the random baselines.
pub fn mmp_and_ensemble(table: &ResultTable, mmp: Method, n: usize, q: usize, baselines: usize) -> (f64, f64) {
    let mean = |name: &str| table.cell(name, n, Some(q), Quantity::L2).map_or(f64::NAN, |a| a.mean);
    let ensemble = (0..baselines).map(|b| mean(&random_method_name(b))).sum::<f64>() / baselines as f64;
    (mean(mmp.name()), ensemble)
}

/// Leave-one-out prediction of sample `i`: bandwidth refit on the other
/// pairs, or the middle search seed when only two remain.
pub fn loo_fold(train: &TrainingSet, i: usize, metric: Metric, isotropic: bool) -> Result<(Bandwidth, Option<f64>, RelativeErrors)> {
    let sub = train.without(i)?;
    let (h, objective) = if sub.len() >= 3 {
        let fit = optimize_bandwidth(&sub, isotropic, metric)?;
        (fit.bandwidth, Some(fit.objective))
    } else {
        (median_seed_bandwidth(&sub, isotropic)?, None)
    };
    let p = predict(&sub, &train.inputs()[i], &h, metric)?;
    let errors = relative_errors(&train.densities()[i], &p)?;
    Ok((h, objective, errors))
}

fn loo_validate(cfg: &CampaignConfig, opts: &RunOptions) -> Result<Outcome> {
    let (samples, designs) = learning_samples(cfg)?;
    let mut items = Vec::new();
    for (s, sample) in samples.iter().enumerate() {
        if sample.n() < 3 {
            return Err(Error::Config(format!("leave-one-out needs N >= 3, got {}", sample.n())));
        }
        for &metric in &cfg.estimators {
            for &iso in cfg.bandwidth_mode.variants() {
                for i in 0..sample.n() {
                    items.push((s, metric, iso, i));
                }
            }
        }
    }
    let results = items
        .par_iter()
        .map(|&(s, metric, iso, i)| {
            let sample = &samples[s];
            let name = kr_method_name(metric, iso);
            let (h, objective, errors) = loo_fold(&sample.train, i, metric, iso)?;
            progress(opts, || format!("{name} N={} rep {} fold {i}", sample.n(), sample.rep));
            Ok((
                records_from(&name, sample.n(), None, sample.rep, Some(i), &errors),
                bandwidth_record(&name, sample.n(), sample.rep, Some(i), &h, objective),
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let (records, bandwidths): (Vec<Vec<Record>>, Vec<BandwidthRecord>) = results.into_iter().unzip();
    let mut table = ResultTable::new(Kind::LooValidate, records.concat(), Vec::new(), bandwidths);

    let mut report = Vec::new();
    if samples.iter().any(|s| s.n() == 3) {
        report.push("NOTE: N = 3 folds keep two pairs and use the middle search seed as bandwidth".to_string());
    }
    let methods: Vec<String> = table.methods().into_iter().map(str::to_string).collect();
    for (quantity, row) in table.loo_table() {
        let mut line = format!("{:<13}", crate::table::loo_label(quantity));
        for (m, v) in methods.iter().zip(row) {
            let _ = write!(line, " {m}={v:.4e}");
        }
        report.push(line);
    }
    table.report = report;
    Ok(Outcome { table, designs, qp_trace: Vec::new() })
}

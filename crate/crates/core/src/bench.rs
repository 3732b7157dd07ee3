//! Benchmark harness: gamma selection by ARI, Kernel IMM, refinements and
//! baselines, reported as line-delimited metrics records.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datasets::{gen_chi2_mixture, load_csv, Dataset, LabelColumn};
use crate::error::{Error, Result};
use crate::eval::{adjusted_rand_index, price_of_explainability, Price};
use crate::features::{FeatureMode, DEFAULT_TAYLOR_ORDER};
use crate::imm::CandidateMode;
use crate::kernel_imm::{explain_reference, Explanation, KernelImmConfig};
use crate::kernels::{gram_matrix, GramMatrix, KernelFamily, KernelSpec};
use crate::kmeans::{kernel_kmeans, ClusteringResult, InitConfig};
use crate::refine::{refine, CutMode, Objective, RefineConfig};
use crate::tree::{induced_partition, per_leaf_cost, tree_cost, InterpretableTree};

/// `count` values `2^e` with `e` evenly spaced over `[lo_exp, hi_exp]`.
pub fn gamma_grid(count: usize, lo_exp: f64, hi_exp: f64) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo_exp.exp2()],
        _ => (0..count).map(|i| (lo_exp + (hi_exp - lo_exp) * i as f64 / (count - 1) as f64).exp2()).collect(),
    }
}

pub fn default_gamma_grid() -> Vec<f64> {
    gamma_grid(16, -6.0, 6.0)
}

#[derive(Debug, Clone)]
pub struct GammaSearch {
    pub gamma: f64,
    pub ari: f64,
    pub reference: ClusteringResult,
    pub gram: GramMatrix,
    /// `(gamma, ari, cost)` for every grid value, in grid order.
    pub trials: Vec<(f64, f64, f64)>,
}

/// Clusters at every gamma in `grid` and keeps the best ARI against the
/// ground truth; smaller gamma wins ties. Other parameters come from `base`.
pub fn select_gamma(data: &Dataset, base: KernelSpec, grid: &[f64], k: usize, init: &InitConfig) -> Result<GammaSearch> {
    let truth =
        data.labels().ok_or_else(|| Error::InvalidParameter(format!("dataset {} has no labels for gamma selection", data.name())))?;
    let runs: Vec<Result<GammaSearch>> = grid
        .par_iter()
        .map(|&gamma| {
            let spec = KernelSpec { gamma, ..base };
            spec.validate()?;
            let gram = gram_matrix(&spec, data)?;
            let reference = kernel_kmeans(&gram, k, init)?;
            let ari = adjusted_rand_index(&reference.labels, truth)?;
            log::debug!("{} gamma={gamma:.5} ari={ari:.4} cost={:.6}", data.name(), reference.cost);
            Ok(GammaSearch { gamma, ari, reference, gram, trials: Vec::new() })
        })
        .collect();
    let mut best: Option<GammaSearch> = None;
    let mut trials = Vec::with_capacity(grid.len());
    for run in runs {
        let run = run?;
        trials.push((run.gamma, run.ari, run.reference.cost));
        if best.as_ref().is_none_or(|b| run.ari > b.ari) {
            best = Some(run);
        }
    }
    let mut best = best.ok_or_else(|| Error::InvalidParameter("empty gamma grid".into()))?;
    best.trials = trials;
    Ok(best)
}

/// One line of the metrics output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub dataset: String,
    pub kernel: String,
    pub gamma: Option<f64>,
    pub method: String,
    pub leaves: usize,
    pub cost: f64,
    /// `None` when the baseline cost is zero and the tree cost is not.
    pub price: Option<f64>,
    pub price_unbounded: bool,
    pub ari: Option<f64>,
    pub seed: u64,
    pub runtime_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_leaf_cost: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature_mode: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
}

impl MetricsRecord {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("metrics record serializes")
    }
}

pub fn set_price(record: &mut MetricsRecord, price: Price) {
    record.price = price.finite();
    record.price_unbounded = price.is_unbounded();
}

/// A dataset of the standard suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteEntry {
    pub name: String,
    pub file: String,
    pub kernel: KernelFamily,
    pub k: usize,
    /// Leaf target for the refinements.
    pub leaves: usize,
    /// Published price for the Kernel IMM tree, used as a reproduction target.
    pub target_price: f64,
}

pub fn standard_suite() -> Vec<SuiteEntry> {
    let entry = |name: &str, kernel, k, leaves, target_price| SuiteEntry {
        name: name.to_string(),
        file: format!("{name}.csv"),
        kernel,
        k,
        leaves,
        target_price,
    };
    vec![
        entry("pathbased", KernelFamily::Gaussian, 3, 6, 1.06645),
        entry("aggregation", KernelFamily::Laplace, 7, 10, 1.00125),
        entry("flame", KernelFamily::Gaussian, 2, 4, 1.02256),
        entry("iris", KernelFamily::Laplace, 3, 6, 1.00502),
        entry("cancer", KernelFamily::Gaussian, 2, 4, 1.00179),
    ]
}

/// Loads a suite dataset from `dir`, labels in the `label` column.
pub fn load_suite_dataset(dir: &Path, entry: &SuiteEntry, normalize: bool) -> Result<Dataset> {
    let path: PathBuf = dir.join(&entry.file);
    if !path.exists() {
        return Err(Error::Io(std::io::Error::new(std::io::ErrorKind::NotFound, format!("dataset file {} not found", path.display()))));
    }
    let data = load_csv(&path, Some(&LabelColumn::Name("label".into())))?.with_name(&entry.name);
    Ok(if normalize { data.normalized() } else { data })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub seed: u64,
    pub restarts: usize,
    pub normalize: bool,
    pub order: usize,
    pub anchors: Option<usize>,
    pub cut_mode: CutMode,
    pub feature_mode: FeatureMode,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            restarts: 5,
            normalize: true,
            order: DEFAULT_TAYLOR_ORDER,
            anchors: None,
            cut_mode: CutMode::Interval,
            feature_mode: FeatureMode::Auto,
        }
    }
}

impl BenchmarkConfig {
    pub fn init(&self) -> InitConfig {
        InitConfig::default().with_seed(self.seed).with_restarts(self.restarts)
    }
}

/// Everything produced for one dataset.
#[derive(Debug, Clone)]
pub struct DatasetReport {
    pub records: Vec<MetricsRecord>,
    /// Reference clustering at every grid value (`kernel_kmeans_grid`).
    pub grid_records: Vec<MetricsRecord>,
    pub gamma: f64,
    pub reference: ClusteringResult,
    pub explanation: Explanation,
    pub refined: Vec<(Objective, InterpretableTree)>,
    pub linear_imm: InterpretableTree,
}

impl DatasetReport {
    pub fn record(&self, method: &str) -> Option<&MetricsRecord> {
        self.records.iter().find(|r| r.method == method)
    }
}

fn millis(start: Instant) -> u64 {
    start.elapsed().as_millis() as u64
}

pub struct RecordBase<'a> {
    pub data: &'a Dataset,
    pub kernel: &'a str,
    pub gamma: Option<f64>,
    pub seed: u64,
}

impl RecordBase<'_> {
    /// Record for a tree: merged cost, price against `baseline`, ARI.
    pub fn tree_record(
        &self,
        method: &str,
        tree: &InterpretableTree,
        gram: &GramMatrix,
        baseline: f64,
        start: Instant,
    ) -> Result<MetricsRecord> {
        let cost = tree_cost(tree, self.data, gram)?;
        let mut r = self.record(method, tree.k_leaves(), cost, &induced_partition(tree, self.data), start)?;
        set_price(&mut r, price_of_explainability(cost, baseline)?);
        r.per_leaf_cost = Some(per_leaf_cost(tree, self.data, gram)?);
        Ok(r)
    }

    /// Record with price 1 (a baseline clustering).
    pub fn record(&self, method: &str, leaves: usize, cost: f64, labels: &[usize], start: Instant) -> Result<MetricsRecord> {
        let ari = match self.data.labels() {
            Some(truth) => Some(adjusted_rand_index(labels, truth)?),
            None => None,
        };
        Ok(MetricsRecord {
            dataset: self.data.name().to_string(),
            kernel: self.kernel.to_string(),
            gamma: self.gamma,
            method: method.to_string(),
            leaves,
            cost,
            price: Some(1.0),
            price_unbounded: false,
            ari,
            seed: self.seed,
            runtime_ms: millis(start),
            per_leaf_cost: None,
            feature_mode: None,
            iterations: None,
        })
    }
}

/// Gamma search (gaussian and laplace only), Kernel IMM, both refinements
/// to `leaves`, and linear k-means / IMM baselines on the raw coordinates.
pub fn run_dataset(
    data: &Dataset,
    base: KernelSpec,
    k: usize,
    leaves: usize,
    grid: &[f64],
    config: &BenchmarkConfig,
) -> Result<DatasetReport> {
    let init = config.init();
    let start = Instant::now();
    let family = base.family;
    let search = if family.is_product() {
        select_gamma(data, base, grid, k, &init)?
    } else {
        let gram = gram_matrix(&base, data)?;
        let reference = kernel_kmeans(&gram, k, &init)?;
        let ari = data.labels().map(|t| adjusted_rand_index(&reference.labels, t)).transpose()?.unwrap_or(f64::NAN);
        GammaSearch { gamma: f64::NAN, ari, reference, gram, trials: Vec::new() }
    };
    let gamma = search.gamma.is_finite().then_some(search.gamma);
    let spec = KernelSpec { gamma: gamma.unwrap_or(base.gamma), ..base };
    let base = RecordBase { data, kernel: family.name(), gamma, seed: config.seed };
    let reference = search.reference;
    let gram = search.gram;
    let mut records = vec![base.record("kernel_kmeans", k, reference.cost, &reference.labels, start)?];

    let start = Instant::now();
    let imm_config = KernelImmConfig {
        k,
        mode: config.feature_mode,
        order: config.order,
        anchors: config.anchors,
        candidates: CandidateMode::CenterMidpoints,
        init,
    };
    let explanation = explain_reference(data, &spec, &gram, &reference.labels, &imm_config)?;
    let mut r = base.tree_record("kernel_imm", &explanation.tree, &gram, reference.cost, start)?;
    r.feature_mode = Some(explanation.mode.name().to_string());
    records.push(r);

    let mut refined = Vec::new();
    for objective in [Objective::Exkmc, Objective::Expand] {
        let start = Instant::now();
        let cfg = RefineConfig::new(leaves.max(k), objective, config.cut_mode);
        let out = refine(Some(&explanation.tree), data, &gram, &reference.labels, &cfg)?;
        records.push(base.tree_record(&format!("kernel_{objective}"), &out.tree, &gram, reference.cost, start)?);
        refined.push((objective, out.tree));
    }

    let start = Instant::now();
    let linear = KernelSpec::linear();
    let lgram = gram_matrix(&linear, data)?;
    let lref = kernel_kmeans(&lgram, k, &init)?;
    let lbase = RecordBase { data, kernel: "linear", gamma: None, seed: config.seed };
    records.push(lbase.record("kmeans", k, lref.cost, &lref.labels, start)?);
    let start = Instant::now();
    let lconfig = KernelImmConfig { mode: FeatureMode::Raw, ..imm_config };
    let lexp = explain_reference(data, &linear, &lgram, &lref.labels, &lconfig)?;
    records.push(lbase.tree_record("imm", &lexp.tree, &lgram, lref.cost, start)?);

    let grid_records = search
        .trials
        .iter()
        .map(|&(g, ari, cost)| MetricsRecord {
            gamma: Some(g),
            method: "kernel_kmeans_grid".into(),
            cost,
            ari: Some(ari),
            runtime_ms: 0,
            ..records[0].clone()
        })
        .collect();
    Ok(DatasetReport { records, grid_records, gamma: search.gamma, reference, explanation, refined, linear_imm: lexp.tree })
}

/// Human-readable table of records.
pub fn format_table(records: &[MetricsRecord]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<14} {:<10} {:>9} {:<14} {:>6} {:>14} {:>10} {:>8}",
        "dataset", "kernel", "gamma", "method", "leaves", "cost", "price", "ari"
    );
    for r in records {
        let gamma = r.gamma.map_or("-".to_string(), |g| format!("{g:.4}"));
        let price = match (r.price, r.price_unbounded) {
            (_, true) => "inf".to_string(),
            (Some(p), _) => format!("{p:.5}"),
            (None, _) => "-".to_string(),
        };
        let ari = r.ari.map_or("-".to_string(), |a| format!("{a:.4}"));
        let _ = writeln!(
            out,
            "{:<14} {:<10} {:>9} {:<14} {:>6} {:>14.6} {:>10} {:>8}",
            r.dataset, r.kernel, gamma, r.method, r.leaves, r.cost, price, ari
        );
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chi2Summary {
    pub chi2_ari: Vec<f64>,
    pub linear_ari: Vec<f64>,
    pub median_chi2: f64,
    pub median_linear: f64,
    /// Two records per draw, chi-square first.
    pub records: Vec<MetricsRecord>,
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    match v.len() {
        0 => f64::NAN,
        n if n % 2 == 1 => v[n / 2],
        n => 0.5 * (v[n / 2 - 1] + v[n / 2]),
    }
}

/// Clusters `draws` histogram mixtures (seeds `seed..seed+draws`) with the
/// additive chi-square kernel and with linear k-means.
pub fn chi2_experiment(draws: usize, seed: u64, restarts: usize) -> Result<Chi2Summary> {
    let per_draw: Vec<Result<[MetricsRecord; 2]>> = (0..draws as u64)
        .into_par_iter()
        .map(|i| {
            let data = gen_chi2_mixture(seed + i)?;
            let init = InitConfig::default().with_seed(seed + i).with_restarts(restarts);
            let run = |spec: KernelSpec| -> Result<MetricsRecord> {
                let start = Instant::now();
                let r = kernel_kmeans(&gram_matrix(&spec, &data)?, 4, &init)?;
                let base = RecordBase { data: &data, kernel: spec.family.name(), gamma: None, seed: seed + i };
                let mut rec = base.record("kernel_kmeans", 4, r.cost, &r.labels, start)?;
                rec.iterations = Some(r.iterations);
                Ok(rec)
            };
            Ok([run(KernelSpec::additive_chi2())?, run(KernelSpec::linear())?])
        })
        .collect();
    let mut records = Vec::with_capacity(2 * draws);
    for pair in per_draw {
        records.extend(pair?);
    }
    let ari =
        |kernel: &str| -> Vec<f64> { records.iter().filter(|r| r.kernel == kernel).map(|r| r.ari.expect("mixture has labels")).collect() };
    let chi2_ari = ari(KernelFamily::AdditiveChi2.name());
    let linear_ari = ari(KernelFamily::Linear.name());
    Ok(Chi2Summary { median_chi2: median(&chi2_ari), median_linear: median(&linear_ari), chi2_ari, linear_ari, records })
}

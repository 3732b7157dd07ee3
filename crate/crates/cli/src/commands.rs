use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use kernel_tree::bench::{
    chi2_experiment, format_table, gamma_grid, load_suite_dataset, run_dataset, set_price, standard_suite, BenchmarkConfig, MetricsRecord,
    RecordBase,
};
use kernel_tree::datasets::{
    gen_chi2_mixture, gen_epsilon_counterexample, gen_exkmc_counterexample, gen_featuremap_witnesses, gen_halfmoons,
    gen_quadratic_counterexample, load_csv, read_labels, write_csv, write_labels, Dataset, LabelColumn,
};
use kernel_tree::eval::price_of_explainability;
use kernel_tree::features::{FeatureMode, DEFAULT_TAYLOR_ORDER};
use kernel_tree::imm::CandidateMode;
use kernel_tree::kernel_imm::{kernel_imm, KernelImmConfig};
use kernel_tree::kernels::{gram_matrix, KernelFamily, KernelSpec};
use kernel_tree::kmeans::{kernel_kmeans, partition_cost, InitConfig, InitMethod};
use kernel_tree::refine::{refine as refine_tree, CutMode, Objective, RefineConfig};
use kernel_tree::tree::{export_tree, import_tree, per_leaf_cost, tree_cost, ExportFormat, InterpretableTree};

use crate::config::Settings;
use crate::{
    BenchmarkArgs, ClusterArgs, ClusterOpts, DataArgs, EvaluateArgs, ExplainArgs, FeatureArgs, GenerateArgs, KernelArgs, OutputArgs,
    RefineArgs, TreeOutputArgs,
};

fn load_data(s: &Settings, a: &DataArgs, default_normalize: bool) -> Result<Dataset> {
    let path: PathBuf = s.require("data", a.data.clone())?;
    let label: Option<String> = s.get("label_column", a.label_column.clone())?;
    let label = label.map(|l| l.parse::<LabelColumn>().expect("infallible"));
    let data = load_csv(&path, label.as_ref()).with_context(|| format!("loading {}", path.display()))?;
    let name = path.file_stem().map_or("data".into(), |n| n.to_string_lossy().into_owned());
    let data = data.with_name(name);
    Ok(if s.get_or("normalize", a.normalize, default_normalize)? { data.normalized() } else { data })
}

fn kernel_spec(s: &Settings, a: &KernelArgs) -> Result<KernelSpec> {
    let family: KernelFamily = s.require::<String>("kernel", a.kernel.clone())?.parse()?;
    let spec = KernelSpec::from_family(
        family,
        s.get_or("gamma", a.gamma, 1.0)?,
        s.get_or("epsilon", a.epsilon, 1.0)?,
        s.get_or("beta", a.beta, 1.0)?,
    );
    spec.validate()?;
    Ok(spec)
}

fn init_config(s: &Settings, a: &ClusterOpts) -> Result<InitConfig> {
    let mut init = InitConfig::default().with_seed(s.get_or("seed", a.seed, 0)?).with_restarts(s.get_or("restarts", a.restarts, 1)?);
    if let Some(method) = s.get::<String>("init", a.init.clone())? {
        init.method = method.parse::<InitMethod>()?;
    }
    init.max_iterations = s.get_or("max_iter", a.max_iter, init.max_iterations)?;
    init.validate()?;
    Ok(init)
}

fn cluster_count(s: &Settings, a: &ClusterOpts) -> Result<usize> {
    let k: u64 = s.require("k", a.k)?;
    if k == 0 {
        bail!("k must be at least 1");
    }
    Ok(k as usize)
}

fn out_path(s: &Settings, out: &OutputArgs, key: &str, flag: Option<PathBuf>, default_name: &str) -> Result<PathBuf> {
    if let Some(p) = s.get(key, flag)? {
        return Ok(p);
    }
    let dir: PathBuf = s.get_or("out_dir", out.out_dir.clone(), PathBuf::from("."))?;
    Ok(dir.join(default_name))
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    ensure_parent(path)?;
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_metrics(path: &Path, records: &[MetricsRecord]) -> Result<()> {
    let mut text = String::new();
    for r in records {
        text.push_str(&r.to_json_line());
        text.push('\n');
    }
    write_text(path, &text)
}

fn print_records(records: &[MetricsRecord]) -> Result<()> {
    let mut out = std::io::stdout().lock();
    for r in records {
        writeln!(out, "{}", r.to_json_line())?;
    }
    Ok(())
}

fn write_trees(s: &Settings, out: &OutputArgs, trees: &TreeOutputArgs, tree: &InterpretableTree) -> Result<()> {
    let json = out_path(s, out, "tree_out", trees.tree_out.clone(), "tree.json")?;
    let dot = out_path(s, out, "dot_out", trees.dot_out.clone(), "tree.dot")?;
    write_text(&json, &export_tree(tree, ExportFormat::Json))?;
    write_text(&dot, &export_tree(tree, ExportFormat::Dot))?;
    log::info!("wrote {} and {}", json.display(), dot.display());
    Ok(())
}

fn gamma_of(spec: &KernelSpec) -> Option<f64> {
    spec.family.is_product().then_some(spec.gamma)
}

fn imm_config(s: &Settings, a: &FeatureArgs, k: usize, init: InitConfig) -> Result<KernelImmConfig> {
    let mut cfg = KernelImmConfig::new(k);
    cfg.init = init;
    cfg.mode = s.get_or("feature_mode", a.feature_mode.clone(), "auto".into())?.parse::<FeatureMode>()?;
    cfg.order = s.get_or("order", a.order, DEFAULT_TAYLOR_ORDER)?;
    cfg.anchors = s.get("anchors", a.anchors)?;
    cfg.candidates = s.get_or("candidates", a.candidates.clone(), "centers".into())?.parse::<CandidateMode>()?;
    Ok(cfg)
}

pub fn cluster(s: &Settings, a: ClusterArgs) -> Result<()> {
    let data = load_data(s, &a.data, false)?;
    let spec = kernel_spec(s, &a.kernel)?;
    let k = cluster_count(s, &a.cluster)?;
    let init = init_config(s, &a.cluster)?;
    let start = Instant::now();
    let gram = gram_matrix(&spec, &data)?;
    let result = kernel_kmeans(&gram, k, &init)?;
    let base = RecordBase { data: &data, kernel: spec.family.name(), gamma: gamma_of(&spec), seed: init.seed };
    let mut record = base.record("kernel_kmeans", k, result.cost, &result.labels, start)?;
    record.iterations = Some(result.iterations);
    let labels_path = out_path(s, &a.output, "labels_out", a.labels_out, "labels.csv")?;
    ensure_parent(&labels_path)?;
    write_labels(&result.labels, &labels_path)?;
    let records = [record];
    write_metrics(&out_path(s, &a.output, "metrics", a.output.metrics.clone(), "metrics.jsonl")?, &records)?;
    print_records(&records)
}

pub fn explain(s: &Settings, a: ExplainArgs) -> Result<()> {
    let data = load_data(s, &a.data, false)?;
    let spec = kernel_spec(s, &a.kernel)?;
    let k = cluster_count(s, &a.cluster)?;
    let init = init_config(s, &a.cluster)?;
    let cfg = imm_config(s, &a.features, k, init)?;
    let start = Instant::now();
    let gram = gram_matrix(&spec, &data)?;
    let result = kernel_imm(&data, &spec, &cfg)?;
    let base = RecordBase { data: &data, kernel: spec.family.name(), gamma: gamma_of(&spec), seed: init.seed };
    let reference = &result.reference;
    let mut ref_record = base.record("kernel_kmeans", k, reference.cost, &reference.labels, start)?;
    ref_record.iterations = Some(reference.iterations);
    let tree = &result.explanation.tree;
    let mut tree_record = base.tree_record("kernel_imm", tree, &gram, reference.cost, start)?;
    tree_record.feature_mode = Some(result.explanation.mode.name().to_string());
    if let Some(err) = result.explanation.taylor_error {
        log::info!("Taylor kernel error bound on data: {err:.3e}");
    }
    write_trees(s, &a.output, &a.trees, tree)?;
    let labels_path = out_path(s, &a.output, "labels_out", a.labels_out, "reference_labels.csv")?;
    ensure_parent(&labels_path)?;
    write_labels(&reference.labels, &labels_path)?;
    let records = [ref_record, tree_record];
    write_metrics(&out_path(s, &a.output, "metrics", a.output.metrics.clone(), "metrics.jsonl")?, &records)?;
    print!("{}", export_tree(tree, ExportFormat::Text));
    print_records(&records)
}

pub fn refine(s: &Settings, a: RefineArgs) -> Result<()> {
    let data = load_data(s, &a.data, false)?;
    let spec = kernel_spec(s, &a.kernel)?;
    let leaves: usize = s.require("leaves", a.leaves)?;
    let objective: Objective = s.get_or("objective", a.objective.clone(), "exkmc".into())?.parse()?;
    let cut_mode: CutMode = s.get_or("cuts", a.cuts.clone(), "interval".into())?.parse()?;
    let tree_path: Option<PathBuf> = s.get("tree", a.tree.clone())?;
    let start_tree = match (&tree_path, a.empty) {
        (Some(_), true) => bail!("--tree and --empty are mutually exclusive"),
        (None, false) => bail!("give --tree <file> or --empty"),
        (Some(p), false) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            let tree = import_tree(&text)?;
            tree.check_dimension(data.d())?;
            Some(tree)
        }
        (None, true) => None,
    };
    let start = Instant::now();
    let gram = gram_matrix(&spec, &data)?;
    let seed = s.get_or("seed", a.cluster.seed, 0)?;
    let ref_labels = match s.get::<PathBuf>("reference", a.reference.clone())? {
        Some(p) => {
            let labels = read_labels(&p).with_context(|| format!("reading {}", p.display()))?;
            if labels.len() != data.n() {
                bail!("reference has {} labels for {} points", labels.len(), data.n());
            }
            labels
        }
        None => {
            let k = cluster_count(s, &a.cluster)?;
            kernel_kmeans(&gram, k, &init_config(s, &a.cluster)?)?.labels
        }
    };
    let baseline = partition_cost(&gram, &ref_labels)?;
    let cfg = RefineConfig::new(leaves, objective, cut_mode);
    let outcome = refine_tree(start_tree.as_ref(), &data, &gram, &ref_labels, &cfg)?;
    if !outcome.reached_target {
        log::warn!("stopped at {} leaves: no further split separates points", outcome.tree.k_leaves());
    }
    let base = RecordBase { data: &data, kernel: spec.family.name(), gamma: gamma_of(&spec), seed };
    let record = base.tree_record(&format!("kernel_{objective}"), &outcome.tree, &gram, baseline, start)?;
    write_trees(s, &a.output, &a.trees, &outcome.tree)?;
    let records = [record];
    write_metrics(&out_path(s, &a.output, "metrics", a.output.metrics.clone(), "metrics.jsonl")?, &records)?;
    print_records(&records)
}

pub fn evaluate(s: &Settings, a: EvaluateArgs) -> Result<()> {
    let data = load_data(s, &a.data, false)?;
    let spec = kernel_spec(s, &a.kernel)?;
    let path: PathBuf = s.require("tree", a.tree.clone())?;
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let tree = import_tree(&text)?;
    tree.check_dimension(data.d())?;
    let start = Instant::now();
    let gram = gram_matrix(&spec, &data)?;
    let base = RecordBase { data: &data, kernel: spec.family.name(), gamma: gamma_of(&spec), seed: s.get_or("seed", a.seed, 0)? };
    let cost = tree_cost(&tree, &data, &gram)?;
    let labels = kernel_tree::tree::induced_partition(&tree, &data);
    let mut record = base.record("evaluate", tree.k_leaves(), cost, &labels, start)?;
    record.per_leaf_cost = Some(per_leaf_cost(&tree, &data, &gram)?);
    match s.get::<PathBuf>("reference", a.reference.clone())? {
        Some(p) => {
            let reference = read_labels(&p).with_context(|| format!("reading {}", p.display()))?;
            if reference.len() != data.n() {
                bail!("reference has {} labels for {} points", reference.len(), data.n());
            }
            set_price(&mut record, price_of_explainability(cost, partition_cost(&gram, &reference)?)?);
        }
        None => record.price = None,
    }
    let records = [record];
    if let Some(p) = s.get::<PathBuf>("metrics", a.output.metrics.clone())? {
        write_metrics(&p, &records)?;
    }
    print_records(&records)
}

pub fn benchmark(s: &Settings, a: BenchmarkArgs) -> Result<()> {
    let dir: PathBuf = s.get_or("data_dir", a.data_dir.clone(), PathBuf::from("data"))?;
    let suite = standard_suite();
    let wanted: Vec<String> = match s.get::<String>("datasets", a.datasets.clone())? {
        Some(list) => list.split(',').map(|x| x.trim().to_ascii_lowercase()).filter(|x| !x.is_empty()).collect(),
        None => suite.iter().map(|e| e.name.clone()).collect(),
    };
    for name in &wanted {
        if !suite.iter().any(|e| &e.name == name) {
            bail!("unknown dataset {name:?}");
        }
    }
    let skip_missing = a.skip_missing || s.get_or("skip_missing", None, false)?;
    let mut cfg = BenchmarkConfig {
        seed: s.get_or("seed", a.seed, 0)?,
        restarts: s.get_or("restarts", a.restarts, 5)?,
        normalize: s.get_or("normalize", a.normalize, true)?,
        cut_mode: s.get_or("cuts", a.cuts.clone(), "interval".into())?.parse()?,
        ..BenchmarkConfig::default()
    };
    let imm = imm_config(s, &a.features, 1, cfg.init())?;
    cfg.feature_mode = imm.mode;
    cfg.order = imm.order;
    cfg.anchors = imm.anchors;
    let grid = gamma_grid(
        s.get_or("gamma_count", a.gamma_count, 16)?,
        s.get_or("gamma_min_exp", a.gamma_min_exp, -6.0)?,
        s.get_or("gamma_max_exp", a.gamma_max_exp, 6.0)?,
    );
    let mut records = Vec::new();
    let mut jsonl = Vec::new();
    let mut notes = String::new();
    for entry in suite.iter().filter(|e| wanted.contains(&e.name)) {
        let data = match load_suite_dataset(&dir, entry, cfg.normalize) {
            Ok(d) => d,
            Err(e) if skip_missing => {
                log::warn!("skipping {}: {e}", entry.name);
                notes.push_str(&format!("skipped {}: {e}\n", entry.name));
                continue;
            }
            Err(e) => return Err(e).context(format!("dataset {}", entry.name)),
        };
        log::info!("{}: n={} d={} k={}", entry.name, data.n(), data.d(), entry.k);
        let base = KernelSpec::from_family(entry.kernel, 1.0, 1.0, 1.0);
        let report = run_dataset(&data, base, entry.k, entry.leaves, &grid, &cfg)?;
        jsonl.extend(report.grid_records.iter().cloned());
        jsonl.extend(report.records.iter().cloned());
        if let Some(p) = report.record("kernel_imm").and_then(|r| r.price) {
            notes.push_str(&format!("{}: kernel_imm price {p:.5} (reference value {:.5})\n", entry.name, entry.target_price));
        }
        records.extend(report.records);
    }
    let draws: usize = s.get_or("chi2_draws", a.chi2_draws, 100)?;
    if draws > 0 {
        let summary = chi2_experiment(draws, cfg.seed, cfg.restarts)?;
        notes.push_str(&format!(
            "chi2 mixture over {draws} draws: median ARI additive_chi2 {:.4}, linear {:.4}\n",
            summary.median_chi2, summary.median_linear
        ));
        jsonl.extend(summary.records);
    }
    let table = format!("{}\n{notes}", format_table(&records));
    let metrics = out_path(s, &a.output, "metrics", a.output.metrics.clone(), "benchmark.jsonl")?;
    write_metrics(&metrics, &jsonl)?;
    let table_path = out_path(s, &a.output, "table", a.table.clone(), "benchmark.txt")?;
    write_text(&table_path, &table)?;
    print!("{table}");
    Ok(())
}

pub fn generate(s: &Settings, a: GenerateArgs) -> Result<()> {
    let kind: String = s.require("kind", a.kind.clone())?;
    let out: PathBuf = s.require("out", a.out.clone())?;
    let seed = s.get_or("seed", a.seed, 0)?;
    let data = match kind.as_str() {
        "halfmoons" => gen_halfmoons(s.get_or("n", a.n, 200)?, s.get_or("noise", a.noise, 0.05)?, seed)?,
        "exkmc" => gen_exkmc_counterexample(s.get_or("eps", a.eps, 0.01)?, s.get_or("per_side", a.per_side, 10)?)?,
        "quadratic" => gen_quadratic_counterexample()?,
        "epsilon" => gen_epsilon_counterexample()?,
        "chi2" => gen_chi2_mixture(seed)?,
        "witnesses" => {
            let w = gen_featuremap_witnesses()?;
            for (suffix, d) in [("separable", &w.separable), ("monotone", &w.monotone)] {
                let path = with_suffix(&out, suffix);
                ensure_parent(&path)?;
                write_csv(d, &path)?;
                println!("{}", path.display());
            }
            return Ok(());
        }
        other => bail!("unknown generator {other:?}"),
    };
    ensure_parent(&out)?;
    write_csv(&data, &out)?;
    println!("{}", out.display());
    Ok(())
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map_or("witness".into(), |s| s.to_string_lossy().into_owned());
    let ext = path.extension().map_or("csv".into(), |e| e.to_string_lossy().into_owned());
    path.with_file_name(format!("{stem}_{suffix}.{ext}"))
}

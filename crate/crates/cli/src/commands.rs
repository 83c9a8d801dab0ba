use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use lsdist_core::baselines::{hotelling_t2, kl_knn, mmd, StatisticSpec};
use lsdist_core::data::{read_csv, write_csv_string};
use lsdist_core::inference::{
    group_test, homogeneity_experiment, permutation_test, threshold_search, GroupTestReport, Metric,
    PermutationReport, ShiftMode, ThresholdProtocol, ThresholdSearchReport,
};
use lsdist_core::lsdistance::{ls_distance_with, DistanceOptions, WeightScheme};
use lsdist_core::numfmt::fmt_g17;
use lsdist_core::shapes::{classical_mds, image_to_cloud, read_pgm, EmbeddingResult};
use lsdist_core::{LevelGrid, PointCloud, RngSpec};

use crate::config::{self, required, BenchConfig, DistConfig, Experiment, GroupConfig, KSetting, PermConfig, Scale, ShapesConfig};
use crate::output::{envelope, write};
use crate::{BenchArgs, CliError, DistArgs, GroupArgs, Globals, PermArgs, ShapesArgs};

macro_rules! apply {
    ($cfg:ident, $args:ident: $($field:ident),+) => {
        $( if let Some(v) = $args.$field { $cfg.$field = v; } )+
    };
}

/// Stable 64-bit tag for RNG stream derivation from a name.
fn name_tag(name: &str) -> u64 {
    name.bytes()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3))
}

fn grid(bands: usize) -> Result<LevelGrid, CliError> {
    if bands == 0 {
        return Err(CliError::validation("--bands must be at least 1"));
    }
    Ok(LevelGrid::with_bands(bands)?)
}

fn options(scheme: WeightScheme, bands: usize, k: KSetting) -> Result<DistanceOptions, CliError> {
    let mut opts = DistanceOptions::new(grid(bands)?, scheme);
    opts.k = k.as_option();
    Ok(opts)
}

/// Level-set names use the configured grid and k; others use defaults.
fn metric(name: &str, bands: usize, k: KSetting) -> Result<Metric, CliError> {
    match name.parse::<WeightScheme>() {
        Ok(scheme) => Ok(Metric::LevelSet(options(scheme, bands, k)?)),
        Err(_) => Ok(name.parse::<Metric>()?),
    }
}

/// Degeneracies flagged when evaluating `metric` on the observed samples.
fn metric_warnings(metric: &Metric, p: &PointCloud, q: &PointCloud) -> Result<Vec<String>, CliError> {
    let mut w = Vec::new();
    match metric {
        Metric::LevelSet(opts) => w.extend(ls_distance_with(p, q, opts)?.warnings),
        Metric::Baseline(StatisticSpec::Kl { k }) => {
            if kl_knn(p, q, *k)?.floored {
                w.push("KL: zero neighbor distance floored".into());
            }
        }
        Metric::Baseline(StatisticSpec::T) => {
            if let Some(r) = hotelling_t2(p, q)?.ridge {
                w.push(format!("T: singular covariance, ridge {} added", fmt_g17(r)));
            }
        }
        Metric::Baseline(StatisticSpec::Mmd { bandwidth }) => {
            if mmd(p, q, *bandwidth)?.floored {
                w.push("MMD: zero bandwidth floored".into());
            }
        }
        Metric::Baseline(_) => {}
    }
    Ok(w)
}

pub fn dist(args: DistArgs, g: &Globals) -> Result<(), CliError> {
    let mut cfg: DistConfig = config::load(g.config.as_deref())?;
    apply!(cfg, args: bands, k, scheme);
    if args.p.is_some() {
        cfg.p = args.p;
    }
    if args.q.is_some() {
        cfg.q = args.q;
    }
    if args.out.is_some() {
        cfg.out = args.out;
    }
    let p = read_csv(required(&cfg.p, "--p")?)?;
    let q = read_csv(required(&cfg.q, "--q")?)?;
    let opts = options(cfg.scheme, cfg.bands, cfg.k)?;
    let report = ls_distance_with(&p, &q, &opts)?;
    // Echo the resolved k.
    cfg.k = KSetting::Fixed(report.k);
    if let Some(out) = &cfg.out {
        write(out, &envelope("dist", &cfg, &report, &report.warnings)?)?;
    }
    println!("{}", fmt_g17(report.total));
    g.check(&report.warnings)
}

pub fn permtest(args: PermArgs, g: &Globals) -> Result<(), CliError> {
    let mut cfg: PermConfig = config::load(g.config.as_deref())?;
    apply!(cfg, args: stat, n_perms, seed, bands, k);
    if args.p.is_some() {
        cfg.p = args.p;
    }
    if args.q.is_some() {
        cfg.q = args.q;
    }
    if args.out.is_some() {
        cfg.out = args.out;
    }
    let p = read_csv(required(&cfg.p, "--p")?)?;
    let q = read_csv(required(&cfg.q, "--q")?)?;
    let m = metric(&cfg.stat, cfg.bands, cfg.k)?;
    if let (Metric::LevelSet(opts), KSetting::Auto) = (&m, cfg.k) {
        cfg.k = KSetting::Fixed(opts.resolve_k(p.len(), q.len()));
    }
    let warnings = metric_warnings(&m, &p, &q)?;
    let report = permutation_test(|a, b| m.evaluate(a, b), &p, &q, cfg.n_perms, RngSpec::new(cfg.seed))?;
    let doc = envelope("permtest", &cfg, &report, &warnings)?;
    match &cfg.out {
        Some(out) => {
            write(out, &doc)?;
            println!("{}", fmt_g17(report.p_value));
        }
        None => print!("{doc}"),
    }
    g.check(&warnings)
}

const THRESHOLD_METRICS: [&str; 6] = ["kl", "t", "energy", "mmd", "ls0", "ls1"];
const HOMOGENEITY_METRICS: [&str; 9] = ["ks", "chi2", "wilcoxon", "kl", "t", "energy", "mmd", "ls0", "ls1"];
/// Rejection level used for the homogeneity table's last column.
const HOMOGENEITY_ALPHA: f64 = 0.10;

#[derive(Serialize)]
struct BenchIndex {
    experiment: &'static str,
    files: Vec<String>,
}

pub fn bench(args: BenchArgs, g: &Globals) -> Result<(), CliError> {
    let mut cfg: BenchConfig = config::load(g.config.as_deref())?;
    apply!(cfg, args: dims, scale, seed, n, runs, bands, k);
    if args.experiment.is_some() {
        cfg.experiment = args.experiment;
    }
    for (slot, v) in [(&mut cfg.reps, args.reps), (&mut cfg.n_perms, args.n_perms)] {
        if v.is_some() {
            *slot = v;
        }
    }
    if args.metrics.is_some() {
        cfg.metrics = args.metrics;
    }
    if args.out_dir.is_some() {
        cfg.out_dir = args.out_dir;
    }
    let experiment = cfg
        .experiment
        .ok_or_else(|| CliError::validation("missing experiment: mean-shift, variance or homogeneity"))?;
    let out_dir = required(&cfg.out_dir, "--out-dir")?.to_path_buf();
    if cfg.dims.is_empty() || cfg.dims.contains(&0) {
        return Err(CliError::validation("--dims must list positive dimensions"));
    }
    let defaults: &[&str] = match experiment {
        Experiment::Homogeneity => &HOMOGENEITY_METRICS,
        _ => &THRESHOLD_METRICS,
    };
    let names = cfg
        .metrics
        .clone()
        .unwrap_or_else(|| defaults.iter().map(|s| s.to_string()).collect());
    let metrics = names
        .iter()
        .map(|n| metric(n, cfg.bands, cfg.k))
        .collect::<Result<Vec<_>, _>>()?;
    cfg.metrics = Some(metrics.iter().map(|m| m.name().to_string()).collect());
    match experiment {
        Experiment::Homogeneity => bench_homogeneity(cfg, &metrics, &out_dir),
        Experiment::MeanShift => bench_threshold(cfg, &metrics, ShiftMode::MeanShift, &out_dir),
        Experiment::Variance => bench_threshold(cfg, &metrics, ShiftMode::Variance, &out_dir),
    }
}

fn bench_threshold(mut cfg: BenchConfig, metrics: &[Metric], mode: ShiftMode, out_dir: &Path) -> Result<(), CliError> {
    let mut protocol = match cfg.scale {
        Scale::Desk => ThresholdProtocol::desk(),
        Scale::Full => ThresholdProtocol::full(),
    };
    if let Some(r) = cfg.reps {
        if r == 0 {
            return Err(CliError::validation("--reps must be positive"));
        }
        protocol.reference_reps = r;
        protocol.power_reps = r;
    }
    cfg.reps = Some(protocol.power_reps);
    let root = RngSpec::new(cfg.seed);
    let mut files = Vec::new();
    let mut table = String::from("metric");
    for d in &cfg.dims {
        table.push_str(&format!(",d={d}"));
    }
    table.push('\n');
    for m in metrics {
        table.push_str(m.name());
        for &d in &cfg.dims {
            if d > 1 && m.one_dimensional_only() {
                table.push_str(",n/a");
                continue;
            }
            let rng = root.child(d as u64).child(name_tag(m.name()));
            let report: ThresholdSearchReport = threshold_search(m, d, mode, &protocol, rng)?;
            table.push(',');
            table.push_str(&report.threshold_found.map_or("none".to_string(), |t| format!("{t:.3}")));
            let stem = format!("{}_{}_d{d}", mode.name(), m.name());
            write(&out_dir.join(format!("{stem}.json")), &envelope("bench", &cfg, &report, &[])?)?;
            write(&out_dir.join(format!("{stem}_power.csv")), &report.power_csv())?;
            files.push(format!("{stem}.json"));
            files.push(format!("{stem}_power.csv"));
        }
        table.push('\n');
    }
    let table_name = format!("{}.csv", mode.name());
    write(&out_dir.join(&table_name), &table)?;
    files.insert(0, table_name);
    let index = BenchIndex {
        experiment: cfg.experiment.map_or("", Experiment::name),
        files,
    };
    write(&out_dir.join("bench.json"), &envelope("bench", &cfg, &index, &[])?)?;
    print!("{table}");
    Ok(())
}

#[derive(Serialize)]
struct HomogeneityRow {
    metric: String,
    parameters: String,
    p_values: Vec<f64>,
    median_p: f64,
    reject: bool,
}

fn parameters(m: &Metric) -> String {
    match m {
        Metric::Baseline(StatisticSpec::Kl { k }) => format!("k = {k}"),
        Metric::Baseline(StatisticSpec::Chi2 { bins }) => format!("bins = {bins}"),
        Metric::LevelSet(o) => format!("m = {}", o.grid.band_count()),
        Metric::Baseline(_) => String::new(),
    }
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

fn bench_homogeneity(mut cfg: BenchConfig, metrics: &[Metric], out_dir: &Path) -> Result<(), CliError> {
    let n_perms = cfg.n_perms.unwrap_or(match cfg.scale {
        Scale::Desk => 200,
        Scale::Full => 1000,
    });
    if n_perms == 0 || cfg.runs == 0 || cfg.n < 2 {
        return Err(CliError::validation("homogeneity needs n >= 2, runs >= 1 and n-perms >= 1"));
    }
    cfg.n_perms = Some(n_perms);
    cfg.dims = vec![1];
    let root = RngSpec::new(cfg.seed);
    let mut p_values = vec![Vec::new(); metrics.len()];
    let mut files = Vec::new();
    for run in 0..cfg.runs {
        let results: Vec<(Metric, PermutationReport)> = homogeneity_experiment(metrics, cfg.n, n_perms, root.child(run as u64))?;
        let reports: BTreeMap<&str, &PermutationReport> = results.iter().map(|(m, r)| (m.name(), r)).collect();
        for (i, (_, r)) in results.iter().enumerate() {
            p_values[i].push(r.p_value);
        }
        let name = format!("homogeneity_run{run}.json");
        write(&out_dir.join(&name), &envelope("bench", &cfg, &reports, &[])?)?;
        files.push(name);
    }
    let rows: Vec<HomogeneityRow> = metrics
        .iter()
        .zip(p_values)
        .map(|(m, p)| {
            let median_p = median(&p);
            HomogeneityRow {
                metric: m.name().to_string(),
                parameters: parameters(m),
                p_values: p,
                median_p,
                reject: median_p <= HOMOGENEITY_ALPHA,
            }
        })
        .collect();
    let mut table = String::from("metric,parameters,p_value,reject\n");
    for r in &rows {
        table.push_str(&format!(
            "{},{},{:.3},{}\n",
            r.metric,
            r.parameters,
            r.median_p,
            if r.reject { "yes" } else { "no" }
        ));
    }
    write(&out_dir.join("homogeneity.csv"), &table)?;
    files.insert(0, "homogeneity.csv".into());
    write(&out_dir.join("bench.json"), &envelope("bench", &cfg, &rows, &[])?)?;
    print!("{table}");
    Ok(())
}

/// `id,group` rows; exactly two distinct group values, sorted, map to 0 and 1.
fn read_labels(path: &Path) -> Result<(BTreeMap<String, String>, [String; 2]), CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let header = lines.next().map(|(_, l)| l.trim().to_ascii_lowercase());
    if header.as_deref() != Some("id,group") {
        return Err(CliError::validation(format!("{}: expected header `id,group`", path.display())));
    }
    let mut labels = BTreeMap::new();
    for (i, line) in lines {
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != 2 || cells.iter().any(|c| c.is_empty()) {
            return Err(CliError::validation(format!("{}: line {}: expected `id,group`", path.display(), i + 1)));
        }
        if labels.insert(cells[0].to_string(), cells[1].to_string()).is_some() {
            return Err(CliError::validation(format!("{}: line {}: duplicate id {}", path.display(), i + 1, cells[0])));
        }
    }
    let groups: BTreeSet<String> = labels.values().cloned().collect();
    if groups.len() != 2 {
        return Err(CliError::validation(format!(
            "{}: need exactly two groups, found {}",
            path.display(),
            groups.len()
        )));
    }
    let mut it = groups.into_iter();
    let names = [it.next().unwrap(), it.next().unwrap()];
    Ok((labels, names))
}

fn csv_files(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let entries = std::fs::read_dir(dir).map_err(|e| CliError::validation(format!("{}: {e}", dir.display())))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    Ok(files)
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

#[derive(Serialize)]
struct GroupResult {
    subjects: Vec<String>,
    groups: Vec<usize>,
    group_names: [String; 2],
    report: GroupTestReport,
    distance_matrix: Vec<Vec<f64>>,
}

pub fn grouptest(args: GroupArgs, g: &Globals) -> Result<(), CliError> {
    let mut cfg: GroupConfig = config::load(g.config.as_deref())?;
    apply!(cfg, args: n_perms, seed, bands, k, scheme);
    if args.clouds.is_some() {
        cfg.clouds = args.clouds;
    }
    if args.labels.is_some() {
        cfg.labels = args.labels;
    }
    if args.out.is_some() {
        cfg.out = args.out;
    }
    let dir = required(&cfg.clouds, "--clouds")?;
    let labels_path = required(&cfg.labels, "--labels")?;
    let (labels, group_names) = read_labels(labels_path)?;
    let files = csv_files(dir)?;
    if files.is_empty() {
        return Err(CliError::validation(format!("{}: no .csv clouds found", dir.display())));
    }
    let mut clouds = Vec::new();
    let mut groups = Vec::new();
    let mut subjects = Vec::new();
    for f in &files {
        let id = stem(f);
        let group = labels
            .get(&id)
            .ok_or_else(|| CliError::validation(format!("{}: subject {id} has no label", labels_path.display())))?;
        groups.push(usize::from(*group == group_names[1]));
        clouds.push(read_csv(f)?);
        subjects.push(id);
    }
    if let Some(extra) = labels.keys().find(|id| !subjects.contains(id)) {
        return Err(CliError::validation(format!("{}: no cloud for labelled subject {extra}", labels_path.display())));
    }
    let opts = options(cfg.scheme, cfg.bands, cfg.k)?;
    let (report, matrix) = group_test(&clouds, &groups, &opts, cfg.n_perms, RngSpec::new(cfg.seed))?;
    let result = GroupResult {
        subjects,
        groups,
        group_names,
        distance_matrix: matrix.values.chunks(matrix.size).map(<[f64]>::to_vec).collect(),
        report,
    };
    let doc = envelope("grouptest", &cfg, &result, &[])?;
    match &cfg.out {
        Some(out) => {
            write(out, &doc)?;
            println!("{}", fmt_g17(result.report.permutation.p_value));
        }
        None => print!("{doc}"),
    }
    Ok(())
}

#[derive(Serialize)]
struct ShapesResult<'a> {
    objects: &'a [String],
    point_counts: Vec<usize>,
    embedding: &'a EmbeddingResult,
}

/// Stress above this counts as clipped negative eigenvalues.
const STRESS_TOL: f64 = 1e-9;

pub fn shapes(args: ShapesArgs, g: &Globals) -> Result<(), CliError> {
    let mut cfg: ShapesConfig = config::load(g.config.as_deref())?;
    apply!(cfg, args: images, scheme, mds, threshold, seed, bands, k);
    if args.out_dir.is_some() {
        cfg.out_dir = args.out_dir;
    }
    let out_dir = required(&cfg.out_dir, "--out-dir")?.to_path_buf();
    if cfg.images.len() < 2 {
        return Err(CliError::validation("--images needs at least 2 PGM files"));
    }
    let names: Vec<String> = cfg.images.iter().map(|p| stem(p)).collect();
    if names.iter().collect::<BTreeSet<_>>().len() != names.len() {
        return Err(CliError::validation("image file stems must be unique"));
    }
    let root = RngSpec::new(cfg.seed);
    let clouds = cfg
        .images
        .par_iter()
        .enumerate()
        .map(|(i, path)| {
            let img = read_pgm(path)?;
            let cloud = image_to_cloud(&img, cfg.threshold, root.child(i as u64))
                .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
            Ok(cloud.with_label(names[i].clone()))
        })
        .collect::<Result<Vec<PointCloud>, CliError>>()?;
    let opts = options(cfg.scheme, cfg.bands, cfg.k)?;
    let matrix = lsdist_core::lsdistance::distance_matrix(&clouds, &opts)?;
    let embedding = classical_mds(&matrix.values, matrix.size, cfg.mds)?;

    for (name, cloud) in names.iter().zip(&clouds) {
        write(&out_dir.join("clouds").join(format!("{name}.csv")), &write_csv_string(cloud))?;
    }
    write(&out_dir.join("distance_matrix.csv"), &matrix.to_csv())?;
    let axes: Vec<String> = if cfg.mds == 2 {
        vec!["x".into(), "y".into()]
    } else {
        (1..=cfg.mds).map(|i| format!("x{i}")).collect()
    };
    let mut emb = format!("id,{}\n", axes.join(","));
    for (name, row) in names.iter().zip(&embedding.coordinates) {
        let cells: Vec<String> = row.iter().map(|&v| fmt_g17(v)).collect();
        emb.push_str(&format!("{name},{}\n", cells.join(",")));
    }
    write(&out_dir.join("embedding.csv"), &emb)?;
    let mut eig = String::from("index,eigenvalue\n");
    for (i, l) in embedding.eigenvalues.iter().enumerate() {
        eig.push_str(&format!("{},{}\n", i + 1, fmt_g17(*l)));
    }
    write(&out_dir.join("eigenvalues.csv"), &eig)?;

    let mut warnings = Vec::new();
    if embedding.stress > STRESS_TOL {
        warnings.push(format!("MDS: negative eigenvalues clipped, stress {}", fmt_g17(embedding.stress)));
    }
    let result = ShapesResult {
        objects: &names,
        point_counts: clouds.iter().map(PointCloud::len).collect(),
        embedding: &embedding,
    };
    write(&out_dir.join("shapes.json"), &envelope("shapes", &cfg, &result, &warnings)?)?;
    print!("{emb}");
    g.check(&warnings)
}

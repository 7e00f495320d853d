use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use adaptp::dataio::{
    default_type_counts, generate_corpus, read_trajectories, split_by_day, write_trajectories, CorpusJitter, DatasetSplit, Trajectory,
    TypeCounts,
};
use adaptp::diag::{kf_diagnostics, lwpf_diagnostics, write_jsonl};
use adaptp::eval::{
    bench_cases, bench_speedup, evaluate_method, sweep_kf, sweep_particles, trajectory_seed, write_aggregates, write_bench,
    write_errorbar_data, write_kf_sweep, write_method_table, write_particle_sweep, write_scatter_data, write_stream, EvalContext, Method,
    MethodResult,
};
use adaptp::kalman::{KfConfig, KfGrid};
use adaptp::lssm::ScalingMatrix;
use adaptp::lwpf::{FilterConfig, LiuWestFilter};
use adaptp::optimizer::{build_prior, write_fit_log, PriorSet, SimplexConfig};
use adaptp::perfmodel::{synth_fleet, AircraftConfig};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::{overlay, ConfigFile};
use crate::fail::{input, CliError, CliResult};
use crate::manifest::{beside, RunManifest};
use crate::{AssimilateArgs, BenchArgs, EvaluateArgs, FitArgs, FleetExportArgs, GenArgs, SweepArgs};

const SPLIT_FILE: &str = "split.json";
const MANIFEST_FILE: &str = "manifest.json";
/// Per-day count for a fleet type absent from the stock counts.
const FALLBACK_COUNT: usize = 2;

/// Fleet file layout: `[[aircraft]]` tables and optional per-day `[counts]`.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FleetFile {
    aircraft: Vec<AircraftConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    counts: Option<TypeCounts>,
}

fn load_fleet(path: Option<&Path>) -> CliResult<(Vec<AircraftConfig>, TypeCounts)> {
    let Some(path) = path else { return Ok((synth_fleet(), default_type_counts())) };
    let text = fs::read_to_string(path).map_err(input("fleet file", path))?;
    let file: FleetFile = toml::from_str(&text).map_err(input("fleet file", path))?;
    if file.aircraft.is_empty() {
        return Err(CliError::Usage(format!("fleet file {} lists no aircraft", path.display())));
    }
    for c in &file.aircraft {
        c.validate().map_err(|e| CliError::Usage(format!("fleet file {}: {e}", path.display())))?;
    }
    let counts = file.counts.unwrap_or_else(|| {
        let stock = default_type_counts();
        file.aircraft.iter().map(|c| (c.type_code.clone(), stock.get(&c.type_code).copied().unwrap_or(FALLBACK_COUNT))).collect()
    });
    Ok((file.aircraft, counts))
}

fn load_corpus(path: &Path) -> CliResult<Vec<Trajectory>> {
    read_trajectories(path).map_err(input("corpus", path))
}

fn split_path(corpus: &Path) -> PathBuf {
    corpus.with_file_name(SPLIT_FILE)
}

/// The split written by `gen` beside the corpus.
fn load_split(corpus: &Path) -> CliResult<DatasetSplit> {
    let path = split_path(corpus);
    let text = fs::read_to_string(&path).map_err(input("split file", &path))?;
    serde_json::from_str(&text).map_err(input("split file", &path))
}

fn select(corpus: &[Trajectory], corpus_path: &Path, which: &str) -> CliResult<Vec<Trajectory>> {
    let split = load_split(corpus_path)?;
    let sel = split.select(corpus, which).map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(sel.into_iter().cloned().collect())
}

fn load_prior(path: Option<&Path>, why: &str) -> CliResult<PriorSet> {
    let path = path.ok_or_else(|| CliError::Usage(format!("--prior is required {why}")))?;
    PriorSet::load(path).map_err(input("prior", path))
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn filter_config(cfg: &ConfigFile) -> CliResult<FilterConfig> {
    let f = overlay(FilterConfig::default(), cfg.filter.as_ref(), "filter")?;
    f.validate()?;
    Ok(f)
}

fn kf_config(cfg: &ConfigFile) -> CliResult<KfConfig> {
    let k = overlay(KfConfig::default(), cfg.kalman.as_ref(), "kalman")?;
    k.validate()?;
    Ok(k)
}

fn simplex_config(cfg: &ConfigFile, seed: u64) -> CliResult<SimplexConfig> {
    let s = overlay(SimplexConfig { seed, ..Default::default() }, cfg.simplex.as_ref(), "simplex")?;
    s.validate()?;
    Ok(s)
}

pub fn gen(args: GenArgs, cfg: &ConfigFile, cfg_path: Option<&Path>) -> CliResult<()> {
    let args = overlay(args, cfg.gen.as_ref(), "gen")?;
    let (fleet, counts) = load_fleet(args.fleet.as_deref())?;
    let jitter = overlay(CorpusJitter::profile(&args.jitter_profile)?, cfg.jitter.as_ref(), "jitter")?;
    let ratio = match args.split_ratio[..] {
        [a, b, c] => (a, b, c),
        _ => return Err(CliError::Usage("--split-ratio takes three fractions".into())),
    };
    let corpus = generate_corpus(&fleet, args.days, &counts, &jitter, args.seed)?;
    let split = split_by_day(&corpus, ratio, args.seed)?;

    fs::create_dir_all(&args.out)?;
    let corpus_path = args.out.join("corpus.csv");
    write_trajectories(&corpus, &corpus_path)?;
    let split_file = args.out.join(SPLIT_FILE);
    fs::write(&split_file, serde_json::to_string_pretty(&split).map_err(std::io::Error::other)? + "\n")?;

    let mut m = RunManifest::new("gen", cfg_path, Some(args.seed), json!({ "args": &args, "jitter": jitter, "counts": counts }));
    if let Some(f) = &args.fleet {
        m = m.input(f);
    }
    m.output(&corpus_path).output(&split_file).write(&args.out.join(MANIFEST_FILE))?;
    log::info!("wrote {} trajectories to {}", corpus.len(), corpus_path.display());
    Ok(())
}

pub fn fit(args: FitArgs, cfg: &ConfigFile, cfg_path: Option<&Path>) -> CliResult<()> {
    let args = overlay(args, cfg.fit.as_ref(), "fit")?;
    let (fleet, _) = load_fleet(args.fleet.as_deref())?;
    let simplex = simplex_config(cfg, args.seed)?;
    let corpus = load_corpus(&args.corpus)?;
    let train = select(&corpus, &args.corpus, &args.split)?;
    if train.is_empty() {
        return Err(CliError::Runtime(format!("split '{}' has no trajectories", args.split)));
    }
    let (prior, log) = build_prior(&train, &fleet, &ScalingMatrix::default(), &simplex)?;

    prior.save(&args.out).map_err(|e| CliError::Runtime(format!("writing {}: {e}", args.out.display())))?;
    let log_path = args.out.with_extension("fits.csv");
    write_fit_log(&log, create(&log_path)?)?;
    RunManifest::new("fit", cfg_path, Some(args.seed), json!({ "args": &args, "simplex": simplex, "counts": prior.counts() }))
        .input(&args.corpus)
        .output(&args.out)
        .output(&log_path)
        .write(&beside(&args.out))?;
    log::info!("{} models from {} fits", prior.len(), log.len());
    Ok(())
}

pub fn assimilate(args: AssimilateArgs, cfg: &ConfigFile, cfg_path: Option<&Path>) -> CliResult<()> {
    let args = overlay(args, cfg.assimilate.as_ref(), "assimilate")?;
    let corpus = load_corpus(&args.corpus)?;
    let traj = corpus
        .iter()
        .find(|t| t.id == args.trajectory_id)
        .ok_or_else(|| CliError::Usage(format!("no trajectory '{}' in {}", args.trajectory_id, args.corpus.display())))?;
    let mut m = RunManifest::new("assimilate", cfg_path, Some(args.seed), json!({})).input(&args.corpus);
    let (records, effective) = match args.method.as_str() {
        "lwpf" => {
            let prior = load_prior(args.prior.as_deref(), "for lwpf")?;
            m = m.input(args.prior.as_deref().expect("loaded above"));
            let filter = FilterConfig { seed: trajectory_seed(args.seed, traj), ..filter_config(cfg)? };
            let f = LiuWestFilter::from_prior(&prior, &traj.aircraft_type, traj.phase, filter)?;
            (lwpf_diagnostics(traj, f, !args.no_fan)?, json!({ "args": &args, "filter": filter }))
        }
        "kf-tp" | "kf_tp" => {
            let kf = kf_config(cfg)?;
            (kf_diagnostics(traj, kf)?, json!({ "args": &args, "kalman": kf }))
        }
        other => return Err(CliError::Usage(format!("unknown method '{other}', expected lwpf or kf-tp"))),
    };
    write_jsonl(&records, create(&args.out)?)?;
    m.effective_config = effective;
    m.output(&args.out).write(&beside(&args.out))
}

fn parse_methods(s: &str) -> CliResult<Vec<Method>> {
    if s.trim() == "all" {
        return Ok(Method::ALL.to_vec());
    }
    let mut out: Vec<Method> = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let m: Method = part.parse().map_err(|e: adaptp::Error| CliError::Usage(e.to_string()))?;
        if !out.contains(&m) {
            out.push(m);
        }
    }
    if out.is_empty() {
        return Err(CliError::Usage("no methods selected".into()));
    }
    Ok(out)
}

pub fn evaluate(args: EvaluateArgs, cfg: &ConfigFile, cfg_path: Option<&Path>) -> CliResult<()> {
    let args = overlay(args, cfg.evaluate.as_ref(), "evaluate")?;
    let methods = parse_methods(&args.methods)?;
    let (fleet, _) = load_fleet(args.fleet.as_deref())?;
    let prior = if methods.contains(&Method::Lwpf) { Some(load_prior(args.prior.as_deref(), "for lwpf")?) } else { None };
    let corpus = load_corpus(&args.corpus)?;
    let test = select(&corpus, &args.corpus, &args.split)?;
    let ctx = EvalContext { filter: filter_config(cfg)?, kf: kf_config(cfg)?, ..EvalContext::new(&fleet, prior.as_ref()) };

    let mut results: Vec<MethodResult> = Vec::new();
    for &m in &methods {
        let r = evaluate_method(m, &test, &ctx, args.seed).map_err(|e| CliError::Runtime(format!("method {m} aborted: {e}")))?;
        results.push(r);
    }

    fs::create_dir_all(&args.out)?;
    let mut outputs = Vec::new();
    let mut emit = |name: &str, f: &dyn Fn(BufWriter<File>) -> adaptp::Result<()>| -> CliResult<()> {
        let p = args.out.join(name);
        f(create(&p)?)?;
        outputs.push(p);
        Ok(())
    };
    emit("stream.csv", &|w| write_stream(&results, w))?;
    emit("aggregates.csv", &|w| write_aggregates(&results, w))?;
    emit("methods.csv", &|w| write_method_table(&results, w))?;
    emit("errorbars.csv", &|w| write_errorbar_data(&results, w))?;
    if let Some(lw) = results.iter().find(|r| r.method == Method::Lwpf) {
        for other in results.iter().filter(|r| r.method != Method::Lwpf) {
            emit(&format!("scatter_lwpf_vs_{}.csv", other.method), &|w| write_scatter_data(lw, other, w))?;
        }
    }
    let excluded: BTreeMap<&str, &Vec<String>> = results.iter().map(|r| (r.method.as_str(), &r.excluded)).collect();
    let mut m = RunManifest::new(
        "evaluate",
        cfg_path,
        Some(args.seed),
        json!({ "args": &args, "filter": ctx.filter, "kalman": ctx.kf, "excluded": excluded }),
    )
    .input(&args.corpus);
    if let Some(p) = &args.prior {
        m = m.input(p);
    }
    m.outputs = outputs;
    m.write(&args.out.join(MANIFEST_FILE))
}

pub fn sweep(args: SweepArgs, cfg: &ConfigFile, cfg_path: Option<&Path>) -> CliResult<()> {
    let args = overlay(args, cfg.sweep.as_ref(), "sweep")?;
    let corpus = load_corpus(&args.corpus)?;
    let val = select(&corpus, &args.corpus, &args.split)?;
    fs::create_dir_all(&args.out)?;
    let mut m = RunManifest::new("sweep", cfg_path, Some(args.seed), json!({})).input(&args.corpus);
    match args.what.as_str() {
        "kf" => {
            let grid = overlay(KfGrid::default(), cfg.kf_grid.as_ref(), "kf_grid")?;
            let base = kf_config(cfg)?;
            let rows = sweep_kf(&val, &grid, &base)?;
            let p = args.out.join("kf_sweep.csv");
            write_kf_sweep(&rows, create(&p)?)?;
            m.effective_config = json!({ "args": &args, "kf_grid": grid, "kalman": base });
            m = m.output(&p);
        }
        "particles" => {
            let prior = load_prior(args.prior.as_deref(), "for the particle sweep")?;
            m = m.input(args.prior.as_deref().expect("loaded above"));
            let ctx = EvalContext { filter: filter_config(cfg)?, ..EvalContext::new(&[], Some(&prior)) };
            let rows = sweep_particles(&val, &args.counts, &ctx, args.seed)?;
            let p = args.out.join("particle_sweep.csv");
            write_particle_sweep(&rows, create(&p)?)?;
            m.effective_config = json!({ "args": &args, "filter": ctx.filter });
            m = m.output(&p);
        }
        other => return Err(CliError::Usage(format!("unknown sweep '{other}', expected kf or particles"))),
    }
    m.write(&args.out.join(MANIFEST_FILE))
}

pub fn bench(args: BenchArgs, cfg: &ConfigFile, cfg_path: Option<&Path>) -> CliResult<()> {
    let args = overlay(args, cfg.bench.as_ref(), "bench")?;
    if args.reps == 0 {
        return Err(CliError::Usage("--reps must be at least 1".into()));
    }
    let (fleet, _) = load_fleet(args.fleet.as_deref())?;
    let simplex = simplex_config(cfg, args.seed)?;
    let cases = bench_cases(&fleet, &simplex)?;
    let table = bench_speedup(&cases, args.reps)?;
    fs::create_dir_all(&args.out)?;
    let p = args.out.join("bench.csv");
    write_bench(&table, create(&p)?)?;
    let mut m = RunManifest::new("bench", cfg_path, Some(args.seed), json!({ "args": &args, "simplex": simplex }));
    if let Some(f) = &args.fleet {
        m = m.input(f);
    }
    m.output(&p).write(&args.out.join(MANIFEST_FILE))?;
    println!("mean speedup {:.2}", table.mean_ratio);
    Ok(())
}

pub fn fleet_export(args: FleetExportArgs) -> CliResult<()> {
    let file = FleetFile { aircraft: synth_fleet(), counts: Some(default_type_counts()) };
    let text = toml::to_string(&file).map_err(|e| CliError::Runtime(e.to_string()))?;
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(&args.out, text)?;
    Ok(())
}

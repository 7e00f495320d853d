use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use adaptp::dataio::read_trajectories;
use adaptp::eval::{read_stream, write_aggregates, Method, MethodResult};
use adaptp::optimizer::PriorSet;

fn run(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_adaptp")).args(args).output().unwrap();
    (out.status.code().unwrap_or(-1), String::from_utf8_lossy(&out.stderr).into_owned())
}

fn ok(args: &[&str]) {
    let (code, err) = run(args);
    assert_eq!(code, 0, "{args:?}: {err}");
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// One-type fleet file with one flight per day and phase.
fn small_fleet(dir: &Path) -> PathBuf {
    let full = dir.join("full.toml");
    ok(&["fleet", "export", "--out", s(&full)]);
    let mut t: toml::Table = toml::from_str(&fs::read_to_string(&full).unwrap()).unwrap();
    let aircraft = t["aircraft"].as_array().unwrap().iter().filter(|a| a["type_code"].as_str() == Some("JB73")).cloned().collect();
    t.insert("aircraft".into(), toml::Value::Array(aircraft));
    t.insert("counts".into(), toml::Value::Table(toml::from_str("JB73 = 1").unwrap()));
    let p = dir.join("small.toml");
    fs::write(&p, toml::to_string(&t).unwrap()).unwrap();
    p
}

#[test]
fn gen_days_determinism_and_missing_fleet() {
    let d = tempfile::tempdir().unwrap();
    let (a, b) = (d.path().join("a"), d.path().join("b"));
    ok(&["gen", "--days", "29", "--out", s(&a), "--seed", "5"]);
    ok(&["gen", "--days", "29", "--out", s(&b), "--seed", "5"]);
    let corpus = read_trajectories(a.join("corpus.csv")).unwrap();
    let days: BTreeSet<_> = corpus.iter().map(|t| t.day.clone()).collect();
    assert_eq!(days.len(), 29);
    for f in ["corpus.csv", "split.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    assert!(a.join("manifest.json").exists());

    let (code, err) = run(&["gen", "--fleet", s(&d.path().join("missing.toml")), "--out", s(&a)]);
    assert_eq!(code, 2);
    assert!(err.contains("fleet"), "{err}");
    assert_eq!(run(&["gen"]).0, 2);
}

#[test]
fn config_overrides_flags_and_rejects_unknown_keys() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("run.toml");
    fs::write(&cfg, "[gen]\ndays = 4\n[jitter]\nnoise_h_ft = 0.0\n").unwrap();
    let out = d.path().join("c");
    ok(&["--config", s(&cfg), "gen", "--days", "29", "--out", s(&out)]);
    let corpus = read_trajectories(out.join("corpus.csv")).unwrap();
    assert_eq!(corpus.iter().map(|t| t.day.clone()).collect::<BTreeSet<_>>().len(), 4);
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["effective_config"]["args"]["days"], 4);
    assert_eq!(m["effective_config"]["jitter"]["noise_h_ft"], 0.0);
    assert_eq!(m["command"], "gen");

    fs::write(&cfg, "[gen]\ndayz = 4\n").unwrap();
    assert_eq!(run(&["--config", s(&cfg), "gen", "--out", s(&out)]).0, 2);
    fs::write(&cfg, "[filtr]\nb = 0.1\n").unwrap();
    assert_eq!(run(&["--config", s(&cfg), "gen", "--out", s(&out)]).0, 2);
}

#[test]
fn fit_small_corpus_is_reproducible_and_logged() {
    let d = tempfile::tempdir().unwrap();
    let fleet = small_fleet(d.path());
    let data = d.path().join("data");
    ok(&["gen", "--fleet", s(&fleet), "--days", "5", "--out", s(&data), "--split-ratio", "1,0,0"]);
    let corpus = data.join("corpus.csv");
    assert_eq!(read_trajectories(&corpus).unwrap().len(), 10);

    let (p1, p2) = (d.path().join("p1.lssm"), d.path().join("p2.lssm"));
    ok(&["fit", "--corpus", s(&corpus), "--fleet", s(&fleet), "--out", s(&p1), "--seed", "3"]);
    ok(&["fit", "--corpus", s(&corpus), "--fleet", s(&fleet), "--out", s(&p2), "--seed", "3"]);
    assert_eq!(fs::read(&p1).unwrap(), fs::read(&p2).unwrap());
    let prior = PriorSet::load(&p1).unwrap();
    assert!(!prior.is_empty() && prior.len() <= 10 * 2);

    let mut log = csv::Reader::from_path(d.path().join("p1.fits.csv")).unwrap();
    let rows = log.records().count();
    assert!(rows >= prior.len(), "{rows} log rows for {} models", prior.len());
    assert!(d.path().join("p1.manifest.json").exists());
}

#[test]
fn fit_on_empty_split_is_a_runtime_failure() {
    let d = tempfile::tempdir().unwrap();
    let data = d.path().join("data");
    ok(&["gen", "--days", "3", "--out", s(&data), "--split-ratio", "0,0,1"]);
    let (code, err) = run(&["fit", "--corpus", s(&data.join("corpus.csv")), "--out", s(&d.path().join("p.lssm"))]);
    assert_eq!(code, 1, "{err}");
}

#[test]
fn assimilate_replays_one_trajectory() {
    let d = tempfile::tempdir().unwrap();
    let data = d.path().join("data");
    ok(&["gen", "--days", "5", "--out", s(&data), "--jitter-profile", "zero", "--split-ratio", "0.6,0,0.4"]);
    let corpus = data.join("corpus.csv");
    let prior = d.path().join("prior.lssm");
    ok(&["fit", "--corpus", s(&corpus), "--out", s(&prior)]);
    let split: adaptp::dataio::DatasetSplit = serde_json::from_str(&fs::read_to_string(data.join("split.json")).unwrap()).unwrap();
    let trajs = read_trajectories(&corpus).unwrap();
    let traj = trajs.iter().find(|t| split.test.contains(&t.day) && t.aircraft_type == "JB73").unwrap();

    let out = d.path().join("lw.jsonl");
    ok(&["assimilate", "--prior", s(&prior), "--corpus", s(&corpus), "--trajectory-id", &traj.id, "--out", s(&out)]);
    let recs = adaptp::diag::read_jsonl(fs::read(&out).unwrap().as_slice()).unwrap();
    assert_eq!(recs.len(), traj.blips.len());
    let last = recs.last().unwrap();
    assert!((last.estimate.tas_kt - last.observation.tas_kt).abs() < 2.5, "{last:?}");
    assert!(recs.iter().all(|r| r.method == "lwpf"));

    let out = d.path().join("kf.jsonl");
    ok(&["assimilate", "--corpus", s(&corpus), "--trajectory-id", &traj.id, "--method", "kf-tp", "--out", s(&out)]);
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), traj.blips.len());
    assert!(text.lines().all(|l| l.contains("\"method\":\"kf-tp\"")));

    let (code, _) = run(&["assimilate", "--corpus", s(&corpus), "--trajectory-id", "nope", "--method", "kf-tp", "--out", s(&out)]);
    assert_eq!(code, 2);
    let (code, _) = run(&["assimilate", "--corpus", s(&corpus), "--trajectory-id", &traj.id, "--out", s(&out)]);
    assert_eq!(code, 2, "lwpf without a prior");
}

#[test]
fn evaluate_default_corpus() {
    let d = tempfile::tempdir().unwrap();
    let data = d.path().join("data");
    ok(&["gen", "--out", s(&data)]);
    let corpus = data.join("corpus.csv");
    let prior = d.path().join("prior.lssm");
    ok(&["fit", "--corpus", s(&corpus), "--out", s(&prior)]);
    let report = d.path().join("report");
    ok(&["evaluate", "--corpus", s(&corpus), "--prior", s(&prior), "--out", s(&report)]);

    let mut rdr = csv::Reader::from_path(report.join("methods.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 4);
    let climb = |m: &str| -> f64 { rows.iter().find(|r| &r[0] == m).unwrap()[1].parse().unwrap() };
    assert!(climb("lwpf") < climb("kf_tp"), "lwpf {} kf_tp {}", climb("lwpf"), climb("kf_tp"));

    let stream = read_stream(fs::File::open(report.join("stream.csv")).unwrap()).unwrap();
    let results: Vec<MethodResult> = Method::ALL
        .iter()
        .map(|&m| MethodResult::from_stream(m, stream.iter().filter(|e| e.method == m).cloned().collect(), Vec::new()))
        .collect();
    let mut buf = Vec::new();
    write_aggregates(&results, &mut buf).unwrap();
    assert_eq!(buf, fs::read(report.join("aggregates.csv")).unwrap());
    for f in ["errorbars.csv", "scatter_lwpf_vs_kf_tp.csv", "manifest.json"] {
        assert!(report.join(f).exists(), "{f}");
    }

    let (code, _) = run(&["evaluate", "--corpus", s(&corpus), "--out", s(&report)]);
    assert_eq!(code, 2, "lwpf without a prior");
    let (code, _) = run(&["evaluate", "--corpus", s(&corpus), "--methods", "kf_tp,nope", "--out", s(&report)]);
    assert_eq!(code, 2);
}

#[test]
fn sweeps_and_bench() {
    let d = tempfile::tempdir().unwrap();
    let data = d.path().join("data");
    ok(&["gen", "--days", "10", "--out", s(&data)]);
    let corpus = data.join("corpus.csv");
    let prior = d.path().join("prior.lssm");
    ok(&["fit", "--corpus", s(&corpus), "--out", s(&prior)]);

    let sp = d.path().join("sp");
    ok(&["sweep", "--what", "particles", "--corpus", s(&corpus), "--prior", s(&prior), "--out", s(&sp)]);
    let mut rdr = csv::Reader::from_path(sp.join("particle_sweep.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    let types: BTreeSet<String> = rows.iter().map(|r| r[1].to_string()).collect();
    for ty in &types {
        let counts: Vec<&str> = rows.iter().filter(|r| &r[1] == ty).map(|r| r.get(0).unwrap()).collect();
        assert_eq!(counts, ["50", "100", "200", "400", "800", "1600"], "{ty}");
    }

    let cfg = d.path().join("grid.toml");
    fs::write(&cfg, "[kf_grid]\nalpha_p = [1e5]\nalpha_q = [1.0]\nalpha_b = [500.0, 1500.0]\n").unwrap();
    let kf = d.path().join("kf");
    ok(&["--config", s(&cfg), "sweep", "--what", "kf", "--corpus", s(&corpus), "--out", s(&kf)]);
    let text = fs::read_to_string(kf.join("kf_sweep.csv")).unwrap();
    assert!(text.starts_with("alpha_p,alpha_q,alpha_b,aircraft_type,climb_mae_time_s"));
    assert_eq!(text.lines().count(), 1 + 2 * (types.len()));

    assert_eq!(run(&["sweep", "--what", "nothing", "--corpus", s(&corpus), "--out", s(&kf)]).0, 2);

    let bn = d.path().join("bn");
    ok(&["bench", "--reps", "1", "--out", s(&bn)]);
    let text = fs::read_to_string(bn.join("bench.csv")).unwrap();
    assert_eq!(text.lines().count(), 1 + 14 + 1);
    assert!(text.lines().last().unwrap().starts_with("MEAN"));
    assert_eq!(run(&["bench", "--reps", "0", "--out", s(&bn)]).0, 2);
}

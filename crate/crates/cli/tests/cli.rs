//! End-to-end tests of the `denseblock` binary: subcommand behavior, file
//! formats, exit codes, manifests, and reproducibility.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use denseblock::manifest::{Manifest, StageStatus, MANIFEST_FILE};
use denseblock::stages;
use denseblock_core::graph::BinaryAttributedGraph;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_denseblock"))
}

fn run_ok(args: &[&str]) -> Output {
    let output = bin().args(args).output().expect("binary runs");
    assert!(
        output.status.success(),
        "command {:?} failed:\nstdout: {}\nstderr: {}",
        args,
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
    output
}

fn exit_code(output: &Output) -> i32 {
    output.status.code().expect("exit code")
}

struct Fixture {
    dir: tempfile::TempDir,
    edges: PathBuf,
    attributes: PathBuf,
}

/// Two 6-cliques with distinct hashtags plus a handful of loose nodes.
fn fixture() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let mut edges = String::from("# follower edges\n");
    for block in 0..2 {
        for i in 0..6 {
            for j in 0..6 {
                if i != j {
                    edges.push_str(&format!("u{}\tu{}\n", block * 6 + i, block * 6 + j));
                }
            }
        }
    }
    edges.push_str("u12\tu13\nu13\tu14\nu14\tu0\n");
    let mut attributes = String::new();
    for i in 0..6 {
        attributes.push_str(&format!("u{i}\t#alpha\nu{i}\t#beta\n"));
    }
    for i in 6..12 {
        attributes.push_str(&format!("u{i}\t#gamma\nu{i}\t#delta\n"));
    }
    attributes.push_str("u12\t#alpha\nu14\t#misc\n");
    let edges_path = dir.path().join("edges.tsv");
    let attrs_path = dir.path().join("attrs.tsv");
    fs::write(&edges_path, edges).unwrap();
    fs::write(&attrs_path, attributes).unwrap();
    Fixture {
        dir,
        edges: edges_path,
        attributes: attrs_path,
    }
}

fn small_run_args<'a>(out: &'a str, fx: &'a Fixture) -> Vec<String> {
    vec![
        "run".into(),
        "--edges".into(),
        fx.edges.display().to_string(),
        "--attributes".into(),
        fx.attributes.display().to_string(),
        "--epochs".into(),
        "50".into(),
        "--batch-size".into(),
        "6".into(),
        "--learning-rate".into(),
        "0.002".into(),
        "--latent-dim".into(),
        "4".into(),
        "--hidden-a".into(),
        "8".into(),
        "--hidden-x".into(),
        "6".into(),
        "--eps".into(),
        "0.8".into(),
        "--min-pts".into(),
        "3".into(),
        "--threshold".into(),
        "0.5".into(),
        "--top-k".into(),
        "10".into(),
        "--seed".into(),
        "21".into(),
        "-o".into(),
        out.into(),
    ]
}

#[test]
fn ingest_writes_snapshot_with_expected_shape() {
    let fx = fixture();
    let out = fx.dir.path().join("ingested");
    run_ok(&[
        "ingest",
        "--edges",
        fx.edges.to_str().unwrap(),
        "--attributes",
        fx.attributes.to_str().unwrap(),
        "-o",
        out.to_str().unwrap(),
    ]);
    let graph = BinaryAttributedGraph::load_snapshot(&out.join(stages::GRAPH_FILE)).unwrap();
    assert_eq!(graph.node_count(), 15);
    assert_eq!(graph.attribute_count(), 5);
    assert_eq!(graph.edge_count(), 63);
}

#[test]
fn ingest_round_trips_through_snapshot() {
    let fx = fixture();
    let out = fx.dir.path().join("ingested");
    run_ok(&[
        "ingest",
        "--edges",
        fx.edges.to_str().unwrap(),
        "--attributes",
        fx.attributes.to_str().unwrap(),
        "-o",
        out.to_str().unwrap(),
    ]);
    let direct = denseblock_core::graph::load_graph(&fx.edges, &fx.attributes)
        .unwrap()
        .graph;
    let snapshot = BinaryAttributedGraph::load_snapshot(&out.join(stages::GRAPH_FILE)).unwrap();
    assert_eq!(direct, snapshot);
}

#[test]
fn ingest_missing_file_is_a_data_error_naming_the_path() {
    let fx = fixture();
    let output = bin()
        .args([
            "ingest",
            "--edges",
            "/definitely/not/here.tsv",
            "--attributes",
            fx.attributes.to_str().unwrap(),
            "-o",
            fx.dir.path().join("x").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(exit_code(&output), 2);
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("/definitely/not/here.tsv"), "{stderr}");
}

#[test]
fn ingest_reports_self_loop_warnings() {
    let dir = tempfile::tempdir().unwrap();
    let edges = dir.path().join("edges.tsv");
    let attrs = dir.path().join("attrs.tsv");
    fs::write(&edges, "a\ta\na\tb\n").unwrap();
    fs::write(&attrs, "a\t#x\n").unwrap();
    let output = run_ok(&[
        "ingest",
        "--edges",
        edges.to_str().unwrap(),
        "--attributes",
        attrs.to_str().unwrap(),
        "-o",
        dir.path().join("out").to_str().unwrap(),
    ]);
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("1 self-loop"), "{stderr}");
}

#[test]
fn malformed_line_is_a_data_error_with_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let edges = dir.path().join("edges.tsv");
    let attrs = dir.path().join("attrs.tsv");
    fs::write(&edges, "a\tb\nnot-a-pair\n").unwrap();
    fs::write(&attrs, "a\t#x\n").unwrap();
    let output = bin()
        .args([
            "ingest",
            "--edges",
            edges.to_str().unwrap(),
            "--attributes",
            attrs.to_str().unwrap(),
            "-o",
            dir.path().join("out").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(exit_code(&output), 2);
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains(":2"), "{stderr}");
}

#[test]
fn usage_errors_exit_with_code_one() {
    // unknown flag
    let output = bin().args(["run", "--no-such-flag"]).output().unwrap();
    assert_eq!(exit_code(&output), 1);
    // missing required input
    let output = bin().args(["train"]).output().unwrap();
    assert_eq!(exit_code(&output), 1);
    // help exits zero
    let output = bin().args(["--help"]).output().unwrap();
    assert_eq!(exit_code(&output), 0);
}

#[test]
fn divergence_exits_with_code_three() {
    let fx = fixture();
    let out = fx.dir.path().join("diverged");
    let mut args = small_run_args(out.to_str().unwrap(), &fx);
    let lr_index = args.iter().position(|a| a == "--learning-rate").unwrap();
    args[lr_index + 1] = "1e9".into();
    let output = bin().args(&args).output().unwrap();
    assert_eq!(exit_code(&output), 3);
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("train"), "{stderr}");
    // the manifest records the failed stage and the completed ingest
    let manifest = Manifest::load(&out).unwrap();
    assert!(!manifest.complete);
    assert_eq!(manifest.stages[0].name, "ingest");
    assert_eq!(manifest.stages[0].status, StageStatus::Complete);
    let train = manifest.stages.iter().find(|s| s.name == "train").unwrap();
    assert_eq!(train.status, StageStatus::Failed);
}

#[test]
fn invalid_configuration_exits_with_code_one() {
    let fx = fixture();
    let out = fx.dir.path().join("badcfg");
    let mut args = small_run_args(out.to_str().unwrap(), &fx);
    args.extend(["--out-dims".into(), "9".into()]); // exceeds latent_dim 4
    let output = bin().args(&args).output().unwrap();
    assert_eq!(exit_code(&output), 1);
}

#[test]
fn run_produces_all_artifacts_and_a_complete_manifest() {
    let fx = fixture();
    let out = fx.dir.path().join("full");
    run_ok(
        &small_run_args(out.to_str().unwrap(), &fx)
            .iter()
            .map(String::as_str)
            .collect::<Vec<_>>(),
    );
    for file in [
        stages::GRAPH_FILE,
        stages::CHECKPOINT_FILE,
        stages::LATENT_FILE,
        stages::LOSS_FILE,
        stages::LABELS_FILE,
        stages::RANKING_FILE,
        stages::CLUSTER_RESULT_FILE,
        stages::REPORT_FILE,
        stages::REPORT_HASHTAGS_CSV,
        stages::REPORT_CLUSTERING_CSV,
        stages::REPORT_AUTHORITY_CSV,
        stages::RESOLVED_CONFIG_FILE,
        MANIFEST_FILE,
    ] {
        assert!(out.join(file).exists(), "missing {file}");
    }
    let manifest = Manifest::load(&out).unwrap();
    assert!(manifest.complete);
    assert_eq!(manifest.seed, 21);
    assert_eq!(manifest.config_hash.len(), 64);
    let stage_names: Vec<&str> = manifest.stages.iter().map(|s| s.name.as_str()).collect();
    assert_eq!(stage_names, ["ingest", "train", "cluster", "fingerprint"]);

    // latent header matches the declared format
    let latent = fs::read_to_string(out.join(stages::LATENT_FILE)).unwrap();
    assert!(latent.starts_with("node_id,h_0,h_1,h_2,h_3\n"));
    // labels csv covers every node
    let labels = fs::read_to_string(out.join(stages::LABELS_FILE)).unwrap();
    assert_eq!(labels.lines().count(), 16); // header + 15 nodes
}

#[test]
fn run_is_byte_identical_across_executions() {
    let fx = fixture();
    let out1 = fx.dir.path().join("r1");
    let out2 = fx.dir.path().join("r2");
    run_ok(
        &small_run_args(out1.to_str().unwrap(), &fx)
            .iter()
            .map(String::as_str)
            .collect::<Vec<_>>(),
    );
    run_ok(
        &small_run_args(out2.to_str().unwrap(), &fx)
            .iter()
            .map(String::as_str)
            .collect::<Vec<_>>(),
    );
    for file in [
        stages::LATENT_FILE,
        stages::LABELS_FILE,
        stages::RANKING_FILE,
        stages::CHECKPOINT_FILE,
        stages::REPORT_FILE,
    ] {
        assert_eq!(
            fs::read(out1.join(file)).unwrap(),
            fs::read(out2.join(file)).unwrap(),
            "{file} differs between identical runs"
        );
    }
    // manifests agree too (same hashes, same config)
    assert_eq!(
        fs::read(out1.join(MANIFEST_FILE)).unwrap(),
        fs::read(out2.join(MANIFEST_FILE)).unwrap()
    );
}

#[test]
fn ranking_respects_top_k_limit() {
    let fx = fixture();
    let out = fx.dir.path().join("topk");
    run_ok(
        &small_run_args(out.to_str().unwrap(), &fx)
            .iter()
            .map(String::as_str)
            .collect::<Vec<_>>(),
    );
    let ranking: Vec<serde_json::Value> =
        serde_json::from_str(&fs::read_to_string(out.join(stages::RANKING_FILE)).unwrap()).unwrap();
    assert!(ranking.len() <= 10);
    for entry in &ranking {
        assert!(entry.get("cluster_id").is_some());
        assert!(entry.get("size").is_some());
        assert!(entry.get("induced_density").is_some());
        assert!(entry.get("above_threshold").is_some());
    }
}

fn generate_and_inject(dir: &Path) -> (PathBuf, PathBuf) {
    let bg = dir.join("bg");
    run_ok(&[
        "generate",
        "--nodes",
        "60",
        "--attributes",
        "16",
        "--edge-probability",
        "0.03",
        "--attribute-probability",
        "0.05",
        "--seed",
        "5",
        "-o",
        bg.to_str().unwrap(),
    ]);
    let injected = dir.join("injected");
    run_ok(&[
        "inject",
        "--graph",
        bg.join(stages::GRAPH_FILE).to_str().unwrap(),
        "--num-blocks",
        "1",
        "--block-size",
        "10",
        "--adj-density",
        "0.9",
        "--attr-density",
        "0.9",
        "--hashtags-per-block",
        "4",
        "--inject-seed",
        "9",
        "-o",
        injected.to_str().unwrap(),
    ]);
    (
        injected.join(stages::GRAPH_FILE),
        injected.join(stages::GROUND_TRUTH_FILE),
    )
}

#[test]
fn inject_writes_ground_truth_aligned_with_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    let (graph_path, truth_path) = generate_and_inject(dir.path());
    let graph = BinaryAttributedGraph::load_snapshot(&graph_path).unwrap();
    let truth = fs::read_to_string(&truth_path).unwrap();
    assert_eq!(truth.lines().count(), graph.node_count() + 1);
    let positives = truth
        .lines()
        .skip(1)
        .filter(|line| line.ends_with(",1"))
        .count();
    assert_eq!(positives, 10);
}

#[test]
fn eval_scores_run_and_baseline() {
    let dir = tempfile::tempdir().unwrap();
    let (graph_path, truth_path) = generate_and_inject(dir.path());
    let run_dir = dir.path().join("run");
    run_ok(&[
        "run",
        "--graph",
        graph_path.to_str().unwrap(),
        "--epochs",
        "60",
        "--batch-size",
        "8",
        "--learning-rate",
        "0.002",
        "--latent-dim",
        "4",
        "--hidden-a",
        "8",
        "--hidden-x",
        "8",
        "--eps",
        "0.8",
        "--min-pts",
        "3",
        "--threshold",
        "0.3",
        "--top-k",
        "5",
        "--seed",
        "2",
        "-o",
        run_dir.to_str().unwrap(),
    ]);
    let output = run_ok(&[
        "eval",
        "--run-dir",
        run_dir.to_str().unwrap(),
        "--ground-truth",
        truth_path.to_str().unwrap(),
    ]);
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("pipeline f1"), "{stdout}");
    assert!(stdout.contains("baseline f1"), "{stdout}");
    let eval: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(run_dir.join(stages::EVAL_FILE)).unwrap())
            .unwrap();
    assert!(eval["pipeline"]["f1"].as_f64().is_some());
    assert!(eval["baseline"]["f1"].as_f64().is_some());
    let baseline: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(run_dir.join(stages::BASELINE_FILE)).unwrap())
            .unwrap();
    assert!(baseline["selected_node_ids"].as_array().is_some());
    assert!(baseline["best_score"].as_f64().unwrap() > 0.0);
}

#[test]
fn eval_missing_ground_truth_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let (graph_path, _) = generate_and_inject(dir.path());
    let run_dir = dir.path().join("run");
    run_ok(&[
        "run",
        "--graph",
        graph_path.to_str().unwrap(),
        "--epochs",
        "20",
        "--batch-size",
        "6",
        "--latent-dim",
        "3",
        "--hidden-a",
        "6",
        "--hidden-x",
        "6",
        "-o",
        run_dir.to_str().unwrap(),
    ]);
    let output = bin()
        .args([
            "eval",
            "--run-dir",
            run_dir.to_str().unwrap(),
            "--ground-truth",
            dir.path().join("nope.csv").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(exit_code(&output), 2);
}

#[test]
fn eval_of_perfect_prediction_reports_f1_one() {
    // a hand-built run directory whose clustering flags exactly the truth
    let dir = tempfile::tempdir().unwrap();
    let (graph_path, truth_path) = generate_and_inject(dir.path());
    let graph = BinaryAttributedGraph::load_snapshot(&graph_path).unwrap();
    let truth = fs::read_to_string(&truth_path).unwrap();
    let mut labels = vec![-1i64; graph.node_count()];
    for line in truth.lines().skip(1) {
        let (id, label) = line.rsplit_once(',').unwrap();
        if label == "1" {
            labels[graph.index_of(id).unwrap()] = 0;
        }
    }
    let result = denseblock_core::cluster::rank_clusters(&graph, &labels, 5, 0.3).unwrap();
    assert!(result.above_threshold[0], "planted block should pass t");

    let run_dir = dir.path().join("perfect");
    fs::create_dir_all(&run_dir).unwrap();
    graph.save_snapshot(&run_dir.join(stages::GRAPH_FILE)).unwrap();
    fs::write(
        run_dir.join(stages::CLUSTER_RESULT_FILE),
        serde_json::to_string(&result).unwrap(),
    )
    .unwrap();

    let eval_out = run_ok(&[
        "eval",
        "--run-dir",
        run_dir.to_str().unwrap(),
        "--ground-truth",
        truth_path.to_str().unwrap(),
    ]);
    let stdout = String::from_utf8_lossy(&eval_out.stdout);
    let eval: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(run_dir.join(stages::EVAL_FILE)).unwrap())
            .unwrap();
    assert_eq!(eval["pipeline"]["f1"].as_f64().unwrap(), 1.0, "{stdout}");
    assert_eq!(eval["pipeline"]["precision"].as_f64().unwrap(), 1.0);
    assert_eq!(eval["pipeline"]["recall"].as_f64().unwrap(), 1.0);
}

#[test]
fn search_log_is_reproducible_modulo_runtime() {
    let dir = tempfile::tempdir().unwrap();
    let (graph_path, _) = generate_and_inject(dir.path());
    let mut logs = Vec::new();
    for name in ["s1", "s2"] {
        let out = dir.path().join(name);
        run_ok(&[
            "search",
            "--graph",
            graph_path.to_str().unwrap(),
            "--num-blocks",
            "1",
            "--block-size",
            "8",
            "--adj-density",
            "0.8",
            "--attr-density",
            "0.8",
            "--hashtags-per-block",
            "3",
            "--trials",
            "2",
            "--search-seed",
            "17",
            "-o",
            out.to_str().unwrap(),
        ]);
        let mut reader = csv::Reader::from_path(out.join(stages::TRIAL_LOG_FILE)).unwrap();
        let rows: Vec<Vec<String>> = reader
            .records()
            .map(|r| {
                let record = r.unwrap();
                // drop the runtime_s column, the only nondeterministic field
                record.iter().take(3).map(str::to_string).collect()
            })
            .collect();
        assert_eq!(rows.len(), 2);
        logs.push(rows);
    }
    assert_eq!(logs[0], logs[1]);
}

#[test]
fn config_file_values_are_overridden_by_flags() {
    let fx = fixture();
    let config_path = fx.dir.path().join("config.json");
    fs::write(
        &config_path,
        format!(
            r#"{{
  "edge_file": {:?},
  "attribute_file": {:?},
  "pipeline": {{
    "train": {{ "epochs": 30, "batch_size": 6, "latent_dim": 3, "hidden_a": 6, "hidden_x": 6, "seed": 7 }},
    "eps": 0.7, "min_pts": 3, "top_k": 4
  }}
}}"#,
            fx.edges.display().to_string(),
            fx.attributes.display().to_string(),
        ),
    )
    .unwrap();
    let out = fx.dir.path().join("cfgrun");
    run_ok(&[
        "--config",
        config_path.to_str().unwrap(),
        "run",
        "--epochs",
        "40",
        "-o",
        out.to_str().unwrap(),
    ]);
    let resolved: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(out.join(stages::RESOLVED_CONFIG_FILE)).unwrap(),
    )
    .unwrap();
    // flag wins over file
    assert_eq!(resolved["pipeline"]["train"]["epochs"], 40);
    // file value survives where no flag was passed
    assert_eq!(resolved["pipeline"]["train"]["batch_size"], 6);
    assert_eq!(resolved["pipeline"]["top_k"], 4);
    // loss history length matches the overridden epoch count
    let loss = fs::read_to_string(out.join(stages::LOSS_FILE)).unwrap();
    assert_eq!(loss.lines().count(), 41);
}

#[test]
fn invalid_config_file_exits_with_code_one() {
    let fx = fixture();
    let config_path = fx.dir.path().join("bad.json");
    fs::write(&config_path, "{ not json").unwrap();
    let output = bin()
        .args([
            "--config",
            config_path.to_str().unwrap(),
            "run",
            "-o",
            fx.dir.path().join("x").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(exit_code(&output), 1);
}

#[test]
fn output_root_env_var_is_used_when_no_dir_given() {
    let fx = fixture();
    let root = fx.dir.path().join("envroot");
    let output = bin()
        .env("DENSEBLOCK_OUTPUT_ROOT", root.to_str().unwrap())
        .args([
            "ingest",
            "--edges",
            fx.edges.to_str().unwrap(),
            "--attributes",
            fx.attributes.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(output.status.success());
    let entries: Vec<_> = fs::read_dir(&root).unwrap().collect();
    assert_eq!(entries.len(), 1);
    let run_dir = entries[0].as_ref().unwrap().path();
    assert!(run_dir
        .file_name()
        .unwrap()
        .to_string_lossy()
        .starts_with("run-"));
    assert!(run_dir.join(stages::GRAPH_FILE).exists());
}

#[test]
fn stages_can_be_rerun_in_isolation() {
    // train and cluster as separate invocations over the same directory
    let dir = tempfile::tempdir().unwrap();
    let (graph_path, _) = generate_and_inject(dir.path());
    let out = dir.path().join("staged");
    run_ok(&[
        "train",
        "--graph",
        graph_path.to_str().unwrap(),
        "--epochs",
        "40",
        "--batch-size",
        "8",
        "--latent-dim",
        "4",
        "--hidden-a",
        "8",
        "--hidden-x",
        "8",
        "--seed",
        "3",
        "-o",
        out.to_str().unwrap(),
    ]);
    assert!(out.join(stages::LATENT_FILE).exists());
    run_ok(&[
        "cluster",
        "--graph",
        graph_path.to_str().unwrap(),
        "--latent",
        out.join(stages::LATENT_FILE).to_str().unwrap(),
        "--eps",
        "0.8",
        "--min-pts",
        "3",
        "--latent-dim",
        "4",
        "-o",
        out.to_str().unwrap(),
    ]);
    assert!(out.join(stages::LABELS_FILE).exists());
    run_ok(&[
        "fingerprint",
        "--graph",
        graph_path.to_str().unwrap(),
        "--clusters",
        out.join(stages::CLUSTER_RESULT_FILE).to_str().unwrap(),
        "--fingerprint-m",
        "5",
        "--fingerprint-bins",
        "8",
        "-o",
        out.to_str().unwrap(),
    ]);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join(stages::REPORT_FILE)).unwrap()).unwrap();
    assert_eq!(report["run_metadata"]["histogram_bins"], 8);
}

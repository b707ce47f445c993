use curvmix::config::{Experiment, ExperimentConfig, ModelKind};
use curvmix::runs::run_experiment;

fn coalesce(replicas: usize) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(Experiment::Coalesce, ModelKind::Sos, 8, 42);
    cfg.sizes = vec![8, 16];
    cfg.replicas = replicas;
    cfg
}

fn csv_with_workers(cfg: &ExperimentConfig, workers: usize) -> String {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build().unwrap();
    pool.install(|| run_experiment(cfg).unwrap().table.to_csv())
}

#[test]
fn output_is_a_function_of_config_and_seed() {
    let cfg = coalesce(6);
    let a = csv_with_workers(&cfg, 1);
    assert_eq!(a, csv_with_workers(&cfg, 3));
    assert_eq!(a, csv_with_workers(&cfg, 1));
    let mut other = cfg.clone();
    other.seed = 43;
    assert_ne!(a, csv_with_workers(&other, 1));
}

#[test]
fn one_row_per_size_and_replica() {
    let rep = run_experiment(&coalesce(3)).unwrap();
    assert_eq!(rep.table.rows.len(), 6);
    let col = rep.table.column("replica").unwrap();
    let ids: Vec<&str> = rep.table.rows.iter().map(|r| r[col].as_str()).collect();
    assert_eq!(ids, ["0", "1", "2", "0", "1", "2"]);
}

#[test]
fn zero_replicas_give_a_header_only_table() {
    let rep = run_experiment(&coalesce(0)).unwrap();
    assert!(rep.table.rows.is_empty());
    assert_eq!(rep.table.to_csv().lines().count(), 1);
}

#[test]
fn report_files_carry_the_config_hash() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = coalesce(2);
    let (csv, json) = run_experiment(&cfg).unwrap().write(dir.path()).unwrap();
    assert!(csv.ends_with("coalesce.csv"));
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(json).unwrap()).unwrap();
    assert_eq!(summary["config_hash"], cfg.hash());
    assert_eq!(summary["seed"], 42);
    let text = std::fs::read_to_string(csv).unwrap();
    assert!(text.starts_with("model,L,h,seed,replica,coalescence_time,events,censored\n"));
}

#[test]
fn schedule_table_ends_at_the_stop_height() {
    let cfg = ExperimentConfig::new(Experiment::Schedule, ModelKind::Surface, 64, 1);
    let rep = run_experiment(&cfg).unwrap();
    let u = rep.table.column("u_n").unwrap();
    let heights: Vec<f64> = rep.table.rows.iter().map(|r| r[u].parse().unwrap()).collect();
    assert_eq!(heights[0], 128.0);
    assert!(heights.windows(2).all(|w| w[1] == w[0] - 1.0));
}

#[test]
fn exact_gap_experiment_reproduces_the_oracle() {
    let mut cfg = ExperimentConfig::new(Experiment::GapExact, ModelKind::Sos, 1, 1);
    cfg.window = Some(1);
    let rep = run_experiment(&cfg).unwrap();
    let g: f64 = rep.table.rows[0][rep.table.column("gap").unwrap()].parse().unwrap();
    assert!((g - 1.0 / (1.0 + (-2.0f64).exp())).abs() < 1e-12);
}

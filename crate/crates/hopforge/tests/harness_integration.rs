//! Harness-level behavior: sweep semantics, trace accounting, seed
//! resolution, and CSV round trips.

use hopforge::harness::{
    coverage_range, read_sweep_csv, resolve_seed, run_distance_sweep, run_reward_trace,
    write_sweep_csv, ExperimentConfig, SEED_ENV_VAR,
};

const BASE_CONFIG: &str = r#"
[topology]
num_bs_antennas = 4
num_users = 2
ris_sizes = [6]
bs_position = [0.0, 0.0, 0.0]
ris_positions = [[1.0, 0.5, 0.0]]
user_positions = [[5.0, 0.0, 0.0], [5.0, 0.5, 0.0]]
direct_blockage_db = 0.0

[phys]
carrier_freq_hz = 1.2e11
bandwidth_hz = 1.2e10
absorption_coeff = 0.01
noise_psd_w_hz = 4.0e-19
reflection_loss_db = 3.0
num_nlos_rays = 0

[experiment]
scheme = "no-ris-zf"
drl_hops = 1
transmit_power_w = 10.0
distance_grid_m = [2.0, 8.0]
num_channel_draws = 12
seed = 5
output_dir = "unused"
random_phase_draws = 8
pt_grid_w = [10.0]

[hyper]
episodes = 2
steps_per_episode = 25
minibatch = 8
buffer_capacity = 500

[train]
hidden_width = 16
convergence_window = 0
"#;

fn config(overrides: &[&str]) -> ExperimentConfig {
    let ovs: Vec<String> = overrides.iter().map(|s| s.to_string()).collect();
    ExperimentConfig::from_toml(BASE_CONFIG, &ovs).unwrap().0
}

#[test]
fn zf_throughput_decreases_with_distance() {
    let cfg = config(&[]);
    let cells = run_distance_sweep(&cfg, 5).unwrap();
    let mean = |d: f64| {
        let sel: Vec<f64> = cells
            .iter()
            .filter(|c| c.distance_m == d)
            .map(|c| c.throughput_bps)
            .collect();
        sel.iter().sum::<f64>() / sel.len() as f64
    };
    assert!(mean(2.0) > mean(8.0), "near {} vs far {}", mean(2.0), mean(8.0));
}

#[test]
fn throughput_column_is_rate_times_bandwidth() {
    let cfg = config(&["experiment.scheme=\"random-phase\""]);
    let cells = run_distance_sweep(&cfg, 5).unwrap();
    for c in &cells {
        assert_eq!(c.throughput_bps, c.sum_rate_bps_hz * cfg.phys.bandwidth_hz);
    }
}

#[test]
fn sweep_rerun_is_identical_and_csv_round_trips() {
    let cfg = config(&["experiment.scheme=\"random-phase\""]);
    let a = run_distance_sweep(&cfg, 42).unwrap();
    let b = run_distance_sweep(&cfg, 42).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let pa = dir.path().join("a.csv");
    let pb = dir.path().join("b.csv");
    write_sweep_csv(&pa, &a, "deadbeef", 42).unwrap();
    write_sweep_csv(&pb, &b, "deadbeef", 42).unwrap();
    assert_eq!(std::fs::read(&pa).unwrap(), std::fs::read(&pb).unwrap());

    let header = std::fs::read_to_string(&pa).unwrap();
    assert!(header.starts_with("# config_sha256=deadbeef seed=42\n"));
    assert!(header.lines().nth(1).unwrap().starts_with(
        "distance_m,scheme,draw,seed,sum_rate_bps_hz,throughput_bps,wall_time_s"
    ));

    let cells = read_sweep_csv(&pa).unwrap();
    assert_eq!(cells.len(), a.len());
    assert_eq!(cells[0].scheme, a[0].scheme);
    assert_eq!(cells[0].sum_rate_bps_hz, a[0].sum_rate_bps_hz);
}

#[test]
fn trace_row_count_and_running_average() {
    let cfg = config(&["experiment.scheme=\"drl\""]);
    let rows = run_reward_trace(&cfg, 9).unwrap();
    // No early stop configured: exactly Z x T rows per configured P_t.
    assert_eq!(rows.len(), 2 * 25);
    let mut sum = 0.0;
    for (i, row) in rows.iter().enumerate() {
        sum += row.reward;
        let expected = sum / (i + 1) as f64;
        assert!(
            (row.avg_reward - expected).abs() <= 1e-12 * expected.abs().max(1.0),
            "running average mismatch at row {i}"
        );
    }
    assert_eq!(rows[0].pt_watt, 10.0);
}

#[test]
fn trace_rejects_non_drl_scheme() {
    let cfg = config(&[]);
    assert!(run_reward_trace(&cfg, 1).is_err());
}

#[test]
fn coverage_from_sweep_cells() {
    let cfg = config(&[]);
    let cells = run_distance_sweep(&cfg, 5).unwrap();
    // Pick a threshold between the two distances' mean throughputs so the
    // report interpolates between them.
    let mean = |d: f64| {
        let sel: Vec<f64> =
            cells.iter().filter(|c| c.distance_m == d).map(|c| c.throughput_bps).collect();
        sel.iter().sum::<f64>() / sel.len() as f64
    };
    let threshold = 0.5 * (mean(2.0) + mean(8.0));
    let reports = coverage_range(&cells, threshold);
    assert_eq!(reports.len(), 1);
    assert!(reports[0].threshold_met);
    assert_eq!(reports[0].max_distance_m, 2.0);
    assert!(reports[0].interpolated_distance_m > 2.0);
    assert!(reports[0].interpolated_distance_m < 8.0);
}

#[test]
fn seed_env_var_is_the_fallback() {
    // Process-global state: this is the only test touching the variable.
    std::env::set_var(SEED_ENV_VAR, "12345");
    assert_eq!(resolve_seed(None, None).unwrap(), 12345);
    assert_eq!(resolve_seed(None, Some(2)).unwrap(), 2);
    assert_eq!(resolve_seed(Some(1), None).unwrap(), 1);
    std::env::set_var(SEED_ENV_VAR, "not-a-number");
    assert!(resolve_seed(None, None).is_err());
    std::env::remove_var(SEED_ENV_VAR);
    assert!(resolve_seed(None, None).is_err());
}

#[test]
fn altopt_scheme_runs_in_sweep() {
    let cfg = config(&[
        "experiment.scheme=\"single-hop-altopt\"",
        "experiment.num_channel_draws=2",
        "altopt.max_iters=5",
        "altopt.phase_grid=4",
        "altopt.random_starts=2",
    ]);
    let cells = run_distance_sweep(&cfg, 3).unwrap();
    assert_eq!(cells.len(), 4);
    assert!(cells.iter().all(|c| c.sum_rate_bps_hz > 0.0));
    assert!(cells.iter().all(|c| c.scheme == "single-hop-altopt"));
}

#[test]
fn drl_scheme_runs_in_sweep() {
    let cfg = config(&[
        "experiment.scheme=\"drl\"",
        "experiment.num_channel_draws=1",
        "experiment.distance_grid_m=[4.0]",
    ]);
    let cells = run_distance_sweep(&cfg, 3).unwrap();
    assert_eq!(cells.len(), 1);
    assert_eq!(cells[0].scheme, "drl-i1");
    assert!(cells[0].sum_rate_bps_hz > 0.0);
    assert_eq!(cells[0].wall_time_s, 0.0);
}

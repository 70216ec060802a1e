//! End-to-end tests driving the `cem` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cem"))
}

fn tmp(name: &str) -> PathBuf {
    Path::new(env!("CARGO_TARGET_TMPDIR")).join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn cem")
}

fn assert_success(output: &Output) {
    assert!(
        output.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );
}

fn exit_code(output: &Output) -> i32 {
    output.status.code().expect("exit code")
}

#[test]
fn model_writes_deterministic_prior() {
    let out_a = tmp("model_a.cem");
    let out_b = tmp("model_b.cem");
    for out in [&out_a, &out_b] {
        let output = run(&[
            "model",
            "--samples",
            "8",
            "--steps",
            "12",
            "--dim",
            "8",
            "--intervals",
            "1..4",
            "--seed",
            "3",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_success(&output);
    }
    let a = std::fs::read(&out_a).unwrap();
    let b = std::fs::read(&out_b).unwrap();
    assert_eq!(a, b, "same seed must produce byte-identical files");

    let matrix = cem_core::store::read_error_matrix(&out_a).unwrap();
    assert_eq!(matrix.total_steps(), 12);
    assert_eq!(matrix.intervals(), &[1, 2, 3, 4]);
    assert_eq!(matrix.num_samples(), 8);
}

#[test]
fn model_single_sample_has_zero_variance() {
    let out = tmp("model_single.cem");
    let output = run(&[
        "model",
        "--samples",
        "1",
        "--steps",
        "10",
        "--dim",
        "8",
        "--intervals",
        "1,2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_success(&output);
    let matrix = cem_core::store::read_error_matrix(&out).unwrap();
    for t in 1..=10 {
        for n in [1, 2] {
            if let Some(v) = matrix.variance(t, n) {
                assert_eq!(v, 0.0);
            }
        }
    }
}

#[test]
fn model_requires_out() {
    let output = run(&["model", "--samples", "2"]);
    assert_eq!(exit_code(&output), 1);
}

fn write_prior(name: &str, steps: &str) -> PathBuf {
    let out = tmp(name);
    let output = run(&[
        "model",
        "--samples",
        "6",
        "--steps",
        steps,
        "--dim",
        "8",
        "--intervals",
        "1..9",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_success(&output);
    out
}

#[test]
fn plan_budget_shapes_schedule() {
    let prior = write_prior("plan_prior.cem", "50");
    let out = tmp("plan_budget.json");
    let output = run(&[
        "plan",
        "--matrix",
        prior.to_str().unwrap(),
        "--budget",
        "25",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_success(&output);
    let schedule = cem_core::store::read_schedule(&out).unwrap();
    assert_eq!(schedule.num_caching(), 25);
    assert_eq!(schedule.intervals().iter().sum::<usize>(), 49);
    assert_eq!(schedule.compute_steps().len(), 26);
}

#[test]
fn plan_oracle_agreement_on_small_instance() {
    let prior = write_prior("plan_small.cem", "20");
    let out = tmp("plan_small.json");
    let output = run(&[
        "plan",
        "--matrix",
        prior.to_str().unwrap(),
        "--budget",
        "6",
        "--oracle",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_success(&output);
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("oracle agreement"), "stderr: {stderr}");
}

#[test]
fn plan_forced_all_ones() {
    let prior = write_prior("plan_ones.cem", "50");
    let out = tmp("plan_ones.json");
    let output = run(&[
        "plan",
        "--matrix",
        prior.to_str().unwrap(),
        "--budget",
        "49",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_success(&output);
    let schedule = cem_core::store::read_schedule(&out).unwrap();
    assert_eq!(schedule.intervals(), vec![1; 49].as_slice());
}

#[test]
fn plan_infeasible_budget_exits_one() {
    let prior = write_prior("plan_infeasible.cem", "20");
    let out = tmp("plan_infeasible.json");
    let output = run(&[
        "plan",
        "--matrix",
        prior.to_str().unwrap(),
        "--budget",
        "1", // a single hop cannot span 19 steps with intervals <= 9
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&output), 1);
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("infeasible"), "stderr: {stderr}");
}

#[test]
fn plan_speedup_maps_to_budget() {
    let prior = write_prior("plan_speedup.cem", "50");
    let out = tmp("plan_speedup.json");
    let output = run(&[
        "plan",
        "--matrix",
        prior.to_str().unwrap(),
        "--speedup",
        "2.0",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_success(&output);
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("N_c = 24"), "stderr: {stderr}");
    let schedule = cem_core::store::read_schedule(&out).unwrap();
    assert_eq!(schedule.num_caching(), 24);
}

#[test]
fn eval_all_ones_schedule_reports_zero_distance() {
    let prior = write_prior("eval_prior.cem", "20");
    let plan = tmp("eval_ones.json");
    assert_success(&run(&[
        "plan",
        "--matrix",
        prior.to_str().unwrap(),
        "--budget",
        "19",
        "--out",
        plan.to_str().unwrap(),
    ]));
    let output = run(&[
        "eval",
        "--schedule",
        plan.to_str().unwrap(),
        "--baseline",
        "uniform:2",
        "--dim",
        "8",
    ]);
    assert_success(&output);
    let stdout = String::from_utf8_lossy(&output.stdout);
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(
        lines[0],
        "schedule,mode,num_caching,total_cost,terminal_cosine_distance,terminal_relative_l2"
    );
    let plan_row: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(plan_row[0], "plan");
    assert_eq!(plan_row[4], "0"); // all-ones schedule reuses nothing
    assert_eq!(plan_row[5], "0");
    assert!(lines[2].starts_with("uniform:2,"));
}

#[test]
fn eval_rejects_step_mismatch_with_matrix() {
    let prior_20 = write_prior("eval_mismatch_prior.cem", "20");
    let prior_12 = write_prior("eval_mismatch_prior12.cem", "12");
    let plan = tmp("eval_mismatch.json");
    assert_success(&run(&[
        "plan",
        "--matrix",
        prior_20.to_str().unwrap(),
        "--budget",
        "10",
        "--out",
        plan.to_str().unwrap(),
    ]));
    let output = run(&[
        "eval",
        "--schedule",
        plan.to_str().unwrap(),
        "--matrix",
        prior_12.to_str().unwrap(),
        "--dim",
        "8",
    ]);
    assert_eq!(exit_code(&output), 1);
}

#[test]
fn eval_predict_mode_runs() {
    let prior = write_prior("eval_predict_prior.cem", "20");
    let plan = tmp("eval_predict.json");
    assert_success(&run(&[
        "plan",
        "--matrix",
        prior.to_str().unwrap(),
        "--budget",
        "10",
        "--out",
        plan.to_str().unwrap(),
    ]));
    let output = run(&[
        "eval",
        "--schedule",
        plan.to_str().unwrap(),
        "--mode",
        "predict1",
        "--dim",
        "8",
    ]);
    assert_success(&output);
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.lines().nth(1).unwrap().contains(",predict1,"));
}

#[test]
fn sweep_is_byte_deterministic() {
    let prior = write_prior("sweep_prior.cem", "12");
    let mut outputs = Vec::new();
    for _ in 0..2 {
        let output = run(&[
            "sweep",
            "--matrix",
            prior.to_str().unwrap(),
            "--budget",
            "5",
            "--count",
            "8",
            "--dim",
            "8",
            "--seed",
            "9",
        ]);
        assert_success(&output);
        outputs.push(output.stdout);
    }
    assert_eq!(outputs[0], outputs[1]);
    let text = String::from_utf8_lossy(&outputs[0]);
    assert_eq!(text.lines().count(), 1 + 8 + 1); // header, records, summary
    assert!(text.lines().last().unwrap().starts_with("# spearman="));
}

#[test]
fn sweep_degenerate_costs_warn_but_succeed() {
    // hand-written all-zero prior: costs degenerate to zero
    let path = tmp("sweep_zero.cem");
    let mut text = String::from("#cem-error-matrix v1\nT=8 intervals=1,2 samples=1\n");
    for t in (1..=8u32).rev() {
        let mean1 = if t < 8 { "0" } else { "NA" };
        let mean2 = if t + 2 <= 8 { "0" } else { "NA" };
        text.push_str(&format!("{t},{mean1},{mean2},{mean1},{mean2}\n"));
    }
    std::fs::write(&path, text).unwrap();

    let output = run(&[
        "sweep",
        "--matrix",
        path.to_str().unwrap(),
        "--budget",
        "4",
        "--count",
        "4",
        "--dim",
        "8",
    ]);
    assert_success(&output);
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.ends_with("# spearman=NA\n"), "stdout: {stdout}");
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("undefined"), "stderr: {stderr}");
}

#[test]
fn bound_prints_five_significant_digits() {
    let output = run(&["bound", "--delta", "0.05", "--samples", "100"]);
    assert_success(&output);
    assert_eq!(String::from_utf8_lossy(&output.stdout).trim(), "0.13581");
}

#[test]
fn bound_rejects_bad_delta() {
    let output = run(&["bound", "--delta", "1.5", "--samples", "100"]);
    assert_eq!(exit_code(&output), 1);
}

#[test]
fn malformed_matrix_exits_two() {
    let path = tmp("garbage.cem");
    std::fs::write(&path, "not a matrix\n").unwrap();
    let output = run(&[
        "plan",
        "--matrix",
        path.to_str().unwrap(),
        "--budget",
        "2",
        "--out",
        tmp("garbage_plan.json").to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&output), 2);
}

#[test]
fn missing_matrix_file_exits_two() {
    let output = run(&[
        "plan",
        "--matrix",
        tmp("does_not_exist.cem").to_str().unwrap(),
        "--budget",
        "2",
        "--out",
        tmp("nope.json").to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&output), 2);
}

#[test]
fn unknown_flag_is_rejected() {
    let output = run(&["bound", "--delta", "0.5", "--samples", "10", "--bogus"]);
    assert_eq!(exit_code(&output), 2);
}

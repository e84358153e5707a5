//! One line per acceptance criterion. Each criterion runs its corpus case and
//! then checks that every required check is present, passed, and was judged
//! against the pinned bound below (so a loosened tolerance also fails).

use std::process::Command;
use std::time::Instant;

use borelforge::verify::VerificationReport;
use borelforge_cli::corpus;
use serde_json::{json, Value};

struct Pin {
    check: &'static str,
    bound: Value,
}

fn pin(check: &'static str, bound: Value) -> Pin {
    Pin { check, bound }
}

fn pins(case: usize) -> Vec<Pin> {
    match case {
        1 => vec![
            pin("derivatives_rel_error", json!(1e-9)),
            pin("tail_bound_ratio", json!(1.0)),
            pin("fd_term_ratio", json!(1.0)),
            pin("runtime_s", json!(10.0)),
        ],
        2 => vec![pin("derivatives_rel_error", json!(1e-10)), pin("zero_outside_supports", json!(0))],
        3 => vec![
            pin("point_rel_error", json!(1e-9)),
            pin("transverse_rel_error", json!(1e-9)),
            pin("endpoint_flatness", json!(">= 8 or infinite")),
        ],
        4 => vec![
            pin("fitted_constant", json!(10.0)),
            pin("norm_to_bound_ratio", json!(1.0)),
            pin("grid_doubling_change", json!(0.01)),
        ],
        5 => vec![
            pin("remainder_order_1", json!(0.9)),
            pin("remainder_order_2", json!(1.9)),
            pin("remainder_order_3", json!(2.9)),
            pin("remainder_order_4", json!(3.9)),
            pin("remainder_order_5", json!(4.9)),
            pin("remainder_order_6", json!(5.9)),
        ],
        6 => vec![
            pin("slope_at_0", json!(0.5)),
            pin("slope_at_1", json!(0.5)),
            pin("sign_change_inside", json!(true)),
            pin("positive_slope_change", json!(1e-12)),
        ],
        7 => vec![
            pin("harmonic_is_form_fail", json!("FORM-FAIL")),
            pin("witness_value_is_factorial", json!(true)),
            pin("witness_partial_sum_at_least_factorial", json!(true)),
            pin("powers_form_ok_with_k_d_equal_j", json!(true)),
            pin("runtime_s", json!(1.0)),
        ],
        8 => vec![
            pin("positive_off_zero_set", json!(0)),
            pin("order_at_chain_points", json!("min(depth, cap) - 0.1")),
            pin("infinite_order_at_0", json!(true)),
            pin("every_chain_point_measured", json!(true)),
        ],
        9 => vec![
            pin("max_residual", json!(1e-8)),
            pin("jet_change_on_zero_set", json!(0.0)),
            pin("jet_order", json!(20)),
            pin("contradictory_duplicates_singular", json!(true)),
        ],
        10 => vec![
            pin("ratio_bounded_left_0", json!("max before the last rung")),
            pin("ratio_bounded_left_1", json!("max before the last rung")),
            pin("ratio_bounded_left_2", json!("max before the last rung")),
            pin("ratio_bounded_left_3", json!("max before the last rung")),
            pin("ratio_bounded_right_0", json!("max before the last rung")),
            pin("ratio_bounded_right_1", json!("max before the last rung")),
            pin("ratio_bounded_right_2", json!("max before the last rung")),
            pin("ratio_bounded_right_3", json!("max before the last rung")),
        ],
        11 => vec![pin("round_trip_bit_identical", json!(0)), pin("deterministic_output", json!(true))],
        _ => vec![],
    }
}

/// Failing or missing pinned checks, described.
fn audit(case: usize, rep: &VerificationReport) -> Vec<String> {
    let mut problems = Vec::new();
    for p in pins(case) {
        match rep.checks.iter().find(|c| c.name == p.check) {
            None => problems.push(format!("{} missing", p.check)),
            Some(c) => {
                if c.claimed != p.bound {
                    problems.push(format!("{} judged against {} instead of {}", p.check, c.claimed, p.bound));
                }
                if !c.pass {
                    problems.push(format!("{} failed: measured {}", p.check, c.measured));
                }
            }
        }
    }
    for c in rep.checks.iter().filter(|c| !c.pass) {
        if !problems.iter().any(|p| p.starts_with(&c.name)) {
            problems.push(format!("{} failed: measured {}", c.name, c.measured));
        }
    }
    problems
}

fn corpus_binary() -> Result<f64, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let t = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_borelforge"))
        .args(["corpus", "--paper-examples", "--out"])
        .arg(dir.path())
        .output()
        .map_err(|e| e.to_string())?;
    let secs = t.elapsed().as_secs_f64();
    if !out.status.success() {
        return Err(format!("exit {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stdout)));
    }
    if secs >= 60.0 {
        return Err(format!("took {secs:.1} s"));
    }
    Ok(secs)
}

fn main() {
    let mut failed = 0;
    for case in corpus::cases() {
        let t = Instant::now();
        let (ok, detail) = match (case.run)() {
            Ok(rep) => {
                let mut problems = audit(case.id, &rep);
                if case.id == 11 {
                    match corpus_binary() {
                        Ok(secs) => {
                            let line = format!("corpus binary {secs:.1} s");
                            if problems.is_empty() {
                                return_line(case.id, case.name, true, &line, t);
                                continue;
                            }
                            problems.push(line);
                        }
                        Err(e) => problems.push(format!("corpus binary: {e}")),
                    }
                }
                (problems.is_empty(), problems.join("; "))
            }
            Err(e) => (false, format!("error: {e}")),
        };
        if !ok {
            failed += 1;
        }
        return_line(case.id, case.name, ok, &detail, t);
    }
    println!("acceptance: {} of 11 criteria pass", 11 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

fn return_line(id: usize, name: &str, ok: bool, detail: &str, t: Instant) {
    let tag = if ok { "PASS" } else { "FAIL" };
    let secs = t.elapsed().as_secs_f64();
    if detail.is_empty() {
        println!("criterion {id:2} {name:<26} {tag} ({secs:.2} s)");
    } else {
        println!("criterion {id:2} {name:<26} {tag} ({secs:.2} s) {detail}");
    }
}

//! End-to-end acceptance gate: runs the full verification suite plus a
//! cross-thread-count determinism check of the binary, printing one
//! pass/fail line per criterion.

use std::process::Command;

use kdisc::config::ExperimentConfig;
use kdisc::report;

fn run_binary_report(threads: &str) -> (Vec<u8>, bool) {
    let out = Command::new(env!("CARGO_BIN_EXE_kdisc"))
        .args(["report", "--threads", threads])
        .env_remove("KDISC_THREADS")
        .output()
        .expect("spawn kdisc report");
    (out.stdout, out.status.success())
}

#[test]
fn acceptance() {
    let cfg = ExperimentConfig::default();
    let run = report::run_all(&cfg).expect("verification suite runs");

    let mut all_pass = true;
    for c in &run.criteria {
        // criterion 10 is superseded by the external binary check below
        if c.id == 10 {
            continue;
        }
        let verdict = if c.pass { "pass" } else { "FAIL" };
        println!("criterion {:2} [{}]: {} ({})", c.id, verdict, c.name, c.detail);
        all_pass &= c.pass;
    }

    // 10: the binary's report output must be byte-identical across thread
    // counts 1 and 8 and across repeated runs
    let (one_a, ok_a) = run_binary_report("1");
    let (one_b, ok_b) = run_binary_report("1");
    let (eight, ok_c) = run_binary_report("8");
    let deterministic = ok_a && ok_b && ok_c && one_a == one_b && one_a == eight;
    let verdict = if deterministic { "pass" } else { "FAIL" };
    println!(
        "criterion 10 [{verdict}]: report determinism across threads 1/8 and repeats (bytes={})",
        one_a.len()
    );
    all_pass &= deterministic;

    assert!(all_pass, "acceptance criteria failed; see lines above");
}

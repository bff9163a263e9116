//! Compiles and runs a small C program against the generated header and
//! the cdylib, proving the surface is consumable from plain C.

use std::path::PathBuf;
use std::process::Command;

const C_PROGRAM: &str = r#"
#include <stdio.h>
#include <math.h>
#include "fixedpoint.h"

int main(void) {
    const char *combo =
        "{\"type\":\"convex_combo\",\"weights\":[0.5,0.5],\"ops\":["
        "{\"type\":\"project\",\"set\":{\"type\":\"halfspace\",\"a\":[1.0,0.0],\"b\":0.0}},"
        "{\"type\":\"project\",\"set\":{\"type\":\"halfspace\",\"a\":[0.0,1.0],\"b\":0.0}}]}";
    FpOperator *op = NULL;
    if (fp_operator_from_json(combo, 2, &op) != FP_STATUS_OK) return 1;

    FpSequence *seq = NULL;
    if (fp_sequence_constant(op, &seq) != FP_STATUS_OK) return 2;

    FpSchedule *alpha = NULL;
    if (fp_schedule_from_json("{\"family\":\"power\",\"c\":1.0,\"p\":1.0,\"offset\":0.0}", &alpha)
        != FP_STATUS_OK) return 3;

    double u[2] = {1.0, 1.0};
    double x1[2] = {2.0, -1.0};
    double ref[2] = {0.0, 0.0};
    double target = 1e-2;
    FpTrace *trace = NULL;
    if (fp_halpern(seq, u, x1, 2, alpha, 1000000, 1e-12, &target, ref, &trace) != FP_STATUS_OK) {
        char msg[256];
        fp_last_error_message(msg, sizeof msg);
        fprintf(stderr, "run failed: %s\n", msg);
        return 4;
    }
    if (fp_trace_stop_reason(trace) != 1) return 5;

    double q[2];
    if (fp_trace_final(trace, q, 2) != FP_STATUS_OK) return 6;
    if (sqrt(q[0]*q[0] + q[1]*q[1]) > 1e-2) return 7;

    printf("steps=%zu final=(%g, %g)\n", fp_trace_steps(trace), q[0], q[1]);

    fp_trace_free(trace);
    fp_schedule_free(alpha);
    fp_sequence_free(seq);
    fp_operator_free(op);
    return 0;
}
"#;

#[test]
fn c_program_links_and_runs() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let include_dir = manifest.join("include");
    // target/debug, two levels up from the test executable in target/debug/deps
    let lib_dir = std::env::current_exe()
        .unwrap()
        .parent()
        .unwrap()
        .parent()
        .unwrap()
        .to_path_buf();
    assert!(
        lib_dir.join("libfixedpoint_ffi.so").exists(),
        "cdylib not found in {lib_dir:?}"
    );

    let work = tempfile::tempdir().unwrap();
    let src = work.path().join("smoke.c");
    std::fs::write(&src, C_PROGRAM).unwrap();
    let exe = work.path().join("smoke");

    let compile = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(&include_dir)
        .arg("-L")
        .arg(&lib_dir)
        .args(["-lfixedpoint_ffi", "-lm", "-o"])
        .arg(&exe)
        .output()
        .expect("cc not available");
    assert!(
        compile.status.success(),
        "compilation failed:\n{}",
        String::from_utf8_lossy(&compile.stderr)
    );

    let run = Command::new(&exe)
        .env("LD_LIBRARY_PATH", &lib_dir)
        .output()
        .unwrap();
    assert!(
        run.status.success(),
        "smoke program exited with {:?}:\n{}",
        run.status.code(),
        String::from_utf8_lossy(&run.stderr)
    );
    let stdout = String::from_utf8_lossy(&run.stdout);
    assert!(stdout.contains("steps="), "unexpected output: {stdout}");
}

//! Compiles and links a small C program against the generated header and
//! the shared library. Skipped when no C compiler is on PATH.

use std::path::PathBuf;
use std::process::Command;

const PROGRAM: &str = r#"
#include <stdio.h>
#include <math.h>
#include "cascade_iv.h"

int main(void) {
    double pi[4] = {1.0, -0.5, -0.4, 1.0};
    double rf[2] = {0.3, 0.2};
    double t[2], d[2];
    if (civ_cascade_solve(2, pi, rf, t, d) != CIV_STATUS_OK) return 1;
    if (fabs(t[0] - 0.475) > 1e-12) return 2;
    double b;
    if (civ_three_program_beta2(0.0, 0.0, 1.0, 0.3, 0.4, &b) != CIV_STATUS_NUMERICAL) return 3;
    printf("%s\n", civ_last_error_code());
    return 0;
}
"#;

#[test]
fn c_program_links_and_runs() {
    if Command::new("cc").arg("--version").output().is_err() {
        eprintln!("no C compiler, skipping");
        return;
    }
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    // tests run from target/<profile>/deps
    let profile_dir = std::env::current_exe().unwrap().parent().unwrap().parent().unwrap().to_path_buf();
    let tmp = PathBuf::from(env!("CARGO_TARGET_TMPDIR"));
    let src = tmp.join("abi_smoke.c");
    let bin = tmp.join("abi_smoke");
    std::fs::write(&src, PROGRAM).unwrap();
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(manifest.join("include"))
        .arg("-L")
        .arg(&profile_dir)
        .arg("-lcascade_iv_ffi")
        .arg("-lm")
        .arg(format!("-Wl,-rpath,{}", profile_dir.display()))
        .arg("-o")
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success(), "C compile/link failed");
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "C program exit {:?}", out.status.code());
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "cascade.zero_complier_mass");
}

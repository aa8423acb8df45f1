//! Compiles a small C program against the generated header and links it to
//! the static library.

use std::path::{Path, PathBuf};
use std::process::Command;

const PROGRAM: &str = r#"
#include <math.h>
#include <stdio.h>
#include "seqdepth.h"

int main(void) {
    const double a_rows[] = {1.0, 0.0, 0.0};
    const double b_rows[] = {0.0, 0.5, 0.5};
    SdDistribution *a = NULL, *b = NULL;
    if (sd_distribution_from_dense(a_rows, 1, 3, NULL, &a) != SD_STATUS_OK) return 1;
    if (sd_distribution_from_dense(b_rows, 1, 3, NULL, &b) != SD_STATUS_OK) return 2;
    double w = 0.0;
    if (sd_wasserstein(a, b, 1.0, 1.0, &w) != SD_STATUS_OK || fabs(w - 2.0) > 1e-12) return 3;
    if (sd_wasserstein(a, NULL, 1.0, 1.0, &w) != SD_STATUS_NULL_POINTER) return 4;
    if (sd_last_error_message() == NULL) return 5;
    SdAllocationParams params;
    sd_allocation_params_default(&params);
    params.mean_l0 = 175.0;
    params.k = 83.0;
    SdAllocation alloc;
    if (sd_allocate(3500000.0, &params, &alloc) != SD_STATUS_OK || alloc.n_cells != 8052) return 6;
    sd_distribution_free(a);
    sd_distribution_free(b);
    printf("ok %s\n", sd_version());
    return 0;
}
"#;

fn target_dir() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    exe.parent().and_then(Path::parent).unwrap().to_path_buf()
}

fn compiler() -> Option<String> {
    ["cc", "clang", "gcc"]
        .into_iter()
        .find(|c| Command::new(c).arg("--version").output().is_ok_and(|o| o.status.success()))
        .map(str::to_owned)
}

#[test]
fn c_program_links_and_runs() {
    let Some(cc) = compiler() else {
        eprintln!("no C compiler found; skipping");
        return;
    };
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let lib = target_dir().join("libseqdepth_ffi.a");
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(&src, PROGRAM).unwrap();

    let syntax = Command::new(&cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(&include)
        .arg(&src)
        .output()
        .unwrap();
    assert!(syntax.status.success(), "{}", String::from_utf8_lossy(&syntax.stderr));

    if !lib.exists() {
        eprintln!("{} not built; only the header was checked", lib.display());
        return;
    }
    let exe = dir.path().join("main");
    let build = Command::new(&cc)
        .args(["-std=c99", "-I"])
        .arg(&include)
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .output()
        .unwrap();
    assert!(build.status.success(), "{}", String::from_utf8_lossy(&build.stderr));
    let run = Command::new(&exe).output().unwrap();
    assert!(run.status.success(), "exit {:?}", run.status.code());
    assert!(String::from_utf8_lossy(&run.stdout).starts_with("ok "));
}

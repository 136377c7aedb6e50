//! Compiles and runs a small C program against the generated header and the
//! cdylib, proving the header is valid C and the ABI links.

use std::path::PathBuf;
use std::process::Command;

const C_SOURCE: &str = r#"
#include <stdio.h>
#include <stdlib.h>
#include "mandate_auction.h"

int main(void) {
    MaMarketParams *params = NULL;
    if (ma_market_params_new(0.08, 0.034, 10, 0.04, 0.0, 0.06, 0.1, &params) != MA_STATUS_OK) {
        return 1;
    }

    double xi = 0.0;
    bool satisfied = false;
    if (ma_xi(params, &xi, &satisfied) != MA_STATUS_OK || !satisfied) {
        return 2;
    }

    double quantities[10], yields[10], allocations[10];
    for (int i = 0; i < 10; i++) {
        quantities[i] = 0.1;
        yields[i] = 0.046;
    }
    double stop_out = 0.0, demand = 0.0;
    bool issued = false;
    if (ma_clear(params, quantities, yields, 10, allocations, &stop_out, &issued, &demand) != MA_STATUS_OK) {
        return 3;
    }
    if (!issued) {
        return 4;
    }

    printf("xi=%.6f stop_out=%.6f alloc0=%.6f version=%s\n",
           xi, stop_out, allocations[0], ma_version());
    ma_market_params_free(params);
    return 0;
}
"#;

#[test]
fn c_program_compiles_links_and_runs() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let include_dir = manifest.join("include");
    let lib_dir = manifest.join("../../target/debug");

    // `cargo test` links the rlib flavor; make sure the cdylib exists too.
    if !lib_dir.join("libmandate_auction_ffi.so").exists() {
        let cargo = std::env::var("CARGO").unwrap_or_else(|_| "cargo".to_string());
        let build = Command::new(cargo)
            .args(["build", "-p", "mandate-auction-ffi"])
            .current_dir(&manifest)
            .output()
            .unwrap();
        assert!(
            build.status.success(),
            "cdylib build failed:\n{}",
            String::from_utf8_lossy(&build.stderr)
        );
    }
    assert!(
        lib_dir.join("libmandate_auction_ffi.so").exists(),
        "cdylib not built at {}",
        lib_dir.display()
    );

    let compiler = std::env::var("CC").unwrap_or_else(|_| "cc".to_string());
    if Command::new(&compiler).arg("--version").output().is_err() {
        eprintln!("skipping: no C compiler available");
        return;
    }

    let dir = tempfile::tempdir().unwrap();
    let source = dir.path().join("smoke.c");
    let binary = dir.path().join("smoke");
    std::fs::write(&source, C_SOURCE).unwrap();

    let compile = Command::new(&compiler)
        .arg(&source)
        .arg("-I")
        .arg(&include_dir)
        .arg("-L")
        .arg(&lib_dir)
        .arg("-lmandate_auction_ffi")
        .arg("-o")
        .arg(&binary)
        .output()
        .unwrap();
    assert!(
        compile.status.success(),
        "compile failed:\n{}",
        String::from_utf8_lossy(&compile.stderr)
    );

    let run = Command::new(&binary)
        .env("LD_LIBRARY_PATH", &lib_dir)
        .output()
        .unwrap();
    assert!(
        run.status.success(),
        "run failed ({:?}):\n{}",
        run.status.code(),
        String::from_utf8_lossy(&run.stderr)
    );
    let stdout = String::from_utf8_lossy(&run.stdout);
    assert!(stdout.contains("stop_out=0.046000"), "{stdout}");
    assert!(stdout.contains("alloc0=0.100000"), "{stdout}");
}

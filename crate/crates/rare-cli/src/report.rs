//! Reproducible CSV artifacts: provenance headers, canonical float
//! formatting, content fingerprints, and the optional plotting stub.
//!
//! Every artifact starts with a `#`-prefixed header block naming the tool
//! version, the scenario and config fingerprints, the master seed, and the
//! run mode. Nothing time- or host-dependent is ever written, so re-running
//! an experiment with identical inputs reproduces every output file
//! byte for byte — the fingerprints make silent input drift visible when
//! two files claim the same provenance.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use crate::config::RunMode;

/// Version string stamped into every artifact header.
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

// ---------------------------------------------------------------------------
// Fingerprinting
// ---------------------------------------------------------------------------

/// 64-bit FNV-1a content fingerprint.
///
/// This is provenance bookkeeping (detecting that two CSV files were made
/// from different inputs), not a security boundary; collision resistance
/// beyond accident is not required.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    const OFFSET_BASIS: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut hash = OFFSET_BASIS;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(PRIME);
    }
    hash
}

// ---------------------------------------------------------------------------
// Cell formatting
// ---------------------------------------------------------------------------

/// Canonical CSV cell for a float: shortest round-trip scientific notation
/// (`1.25e2`), with `inf`/`-inf`/`NaN` for the non-finite sentinels. The
/// output re-parses via `str::parse::<f64>` to the identical bit pattern.
pub fn fmt_float(x: f64) -> String {
    format!("{x:e}")
}

// ---------------------------------------------------------------------------
// CSV assembly
// ---------------------------------------------------------------------------

/// Provenance stamped into an artifact's header block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReportMeta {
    /// FNV-1a fingerprint of the canonical scenario text.
    pub scenario_hash: u64,
    /// FNV-1a fingerprint of the canonical experiment-config text.
    pub config_hash: u64,
    /// Root seed of every random stream in the run.
    pub master_seed: u64,
    /// Which result columns were requested.
    pub mode: RunMode,
}

/// Assembles a complete CSV body: header block, column names, rows.
///
/// Panics if any row's width disagrees with the column list — a malformed
/// table is a programming error, not an input error.
pub fn csv_body(meta: &ReportMeta, columns: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = String::new();
    out.push_str(&format!("# tool = rare {TOOL_VERSION}\n"));
    out.push_str(&format!("# scenario_hash = {:016x}\n", meta.scenario_hash));
    out.push_str(&format!("# config_hash = {:016x}\n", meta.config_hash));
    out.push_str(&format!("# master_seed = {}\n", meta.master_seed));
    out.push_str(&format!("# mode = {}\n", meta.mode.as_str()));
    out.push_str(&columns.join(","));
    out.push('\n');
    for (i, row) in rows.iter().enumerate() {
        assert!(
            row.len() == columns.len(),
            "row {i} has {} cells for {} columns",
            row.len(),
            columns.len()
        );
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Writes `contents` to `dir/name`, creating the directory first.
pub fn write_artifact(dir: &Path, name: &str, contents: &str) -> std::io::Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let mut file = std::fs::File::create(&path)?;
    file.write_all(contents.as_bytes())?;
    Ok(path)
}

// ---------------------------------------------------------------------------
// Plotting stub
// ---------------------------------------------------------------------------

/// A generic, dependency-light plotting script: reads any artifact CSV,
/// skips `#` header lines, and plots every numeric column against the
/// first. Emitted as data-plus-stub so the artifact set stays language
/// agnostic at the boundary.
pub const PLOT_STUB: &str = r##"#!/usr/bin/env python3
"""Generic plotter for rare CSV artifacts.

Usage: python3 plot.py FILE.csv [FILE2.csv ...]

Each file is drawn as every numeric column against the first column and
saved next to the input as FILE.png. Header lines starting with `#` are
provenance metadata and are skipped.
"""
import csv
import math
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def load(path):
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    header, body = rows[0], rows[1:]
    cols = {name: [] for name in header}
    for row in body:
        for name, cell in zip(header, row):
            try:
                cols[name].append(float(cell))
            except ValueError:
                cols[name].append(math.nan)
    return header, cols


def main():
    if len(sys.argv) < 2:
        sys.exit(__doc__)
    for path in sys.argv[1:]:
        header, cols = load(path)
        x = cols[header[0]]
        fig, ax = plt.subplots(figsize=(7, 4.5))
        for name in header[1:]:
            y = cols[name]
            if any(math.isfinite(v) for v in y):
                ax.plot(x, y, label=name)
        ax.set_xlabel(header[0])
        ax.legend(fontsize=7)
        ax.grid(True, alpha=0.3)
        out = path.rsplit(".", 1)[0] + ".png"
        fig.savefig(out, dpi=150, bbox_inches="tight")
        print(f"wrote {out}")


if __name__ == "__main__":
    main()
"##;

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

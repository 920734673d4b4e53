//! Shared fixtures for the integration tests.
//!
//! Compiled once per test binary, and not every binary uses every helper.
#![allow(dead_code)]

use std::path::{Path, PathBuf};

/// Two noisy recordings of the same on/off heating process.
pub const HEATING_S1_CSV: &str = "t,x1
0.00,68.91
0.76,72.41
1.59,75.00
2.32,70.44
3.15,66.90
3.79,65.00
5.00,71.81
";

pub const HEATING_S2_CSV: &str = "t,x1
0.0,68.16
0.75,71.85
1.61,74.70
2.33,70.22
3.16,66.75
3.76,65.00
5.00,71.92
";

pub fn write_heating(dir: &Path) -> (PathBuf, PathBuf) {
    let s1 = dir.join("s1.csv");
    let s2 = dir.join("s2.csv");
    std::fs::write(&s1, HEATING_S1_CSV).unwrap();
    std::fs::write(&s2, HEATING_S2_CSV).unwrap();
    (s1, s2)
}

#![allow(dead_code)]

use std::path::Path;

use rdem::cli::{simulate_series, Overrides, RawConfig, RunConfig};
use rdem::series::ObservationSeries;

/// Resolves a configuration given as TOML text.
pub fn config(text: &str) -> RunConfig {
    let raw: RawConfig = toml::from_str(text).expect("test config parses");
    RunConfig::resolve(raw, Path::new("."), &Overrides::default()).expect("test config resolves")
}

/// Simulated data set for `model` with its default truth.
pub fn simulated(model: &str, seed: u64) -> (RunConfig, ObservationSeries) {
    let cfg = config(&format!("model = \"{model}\"\nseed = {seed}\n"));
    let series = simulate_series(&cfg).expect("simulation succeeds");
    (cfg, series)
}

/// Prints one verdict line and returns whether it passed.
pub fn report(criterion: &str, pass: bool, detail: &str) -> bool {
    println!("{} {criterion}: {detail}", if pass { "PASS" } else { "FAIL" });
    pass
}

/// Composite Simpson rule on `[lo, hi]` with `2k` intervals.
pub fn simpson(f: impl Fn(f64) -> f64, lo: f64, hi: f64, k: usize) -> f64 {
    let n = 2 * k;
    let h = (hi - lo) / n as f64;
    let mut s = f(lo) + f(hi);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(lo + i as f64 * h);
    }
    s * h / 3.0
}

/// Minimiser of a convex function by golden-section search.
pub fn golden_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = hi - r * (hi - lo);
    let mut d = lo + r * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - r * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + r * (hi - lo);
            fd = f(d);
        }
    }
    0.5 * (lo + hi)
}

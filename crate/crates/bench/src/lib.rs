//! Shared fixtures for the criterion benches.

use congest_ftp_core::gen;
use congest_ftp_core::graph::Graph;

/// A connected G(n, 2 ln n / n) instance, fixed seed per size.
pub fn bench_graph(n: usize) -> Graph {
    let p = 2.0 * (n as f64).ln() / n as f64;
    gen::connected(|salt| gen::erdos_renyi(n, p, 71 * n as u64 + salt), 100)
        .expect("connected instance")
}

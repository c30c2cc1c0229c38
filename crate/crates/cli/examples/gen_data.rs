//! Regenerates the sample inputs in `crates/cli/data`.
//!
//! `linearizable.json` is `H₂` pulled back through the time-1 flow of a
//! fixed generator, so it is linearizable by construction.

use std::path::Path;

use kamlin::ingest::{from_action_angle, CartesianTerm, FourierCoeff, HamiltonianSpec};
use kamlin::lie::lie_series_transform;
use kamlin::series::{Complex, DegreeWindow, FourierTaylorSeries, MonomialIndex};

const GOLDEN: f64 = 0.618_033_988_749_894_9;

/// Real generator: each listed `(n, k, m, c)` also contributes `(n, −k, −m, c)`.
const GENERATOR: [(u32, i32, i32, f64); 4] = [(3, 1, -1, 0.01), (5, 1, 2, 0.01), (6, 2, -1, 0.01), (6, 4, 1, 0.005)];

fn generator() -> FourierTaylorSeries {
    FourierTaylorSeries::from_terms(
        GENERATOR.iter().flat_map(|&(n, k, m, c)| [(MonomialIndex::new(n, k, m), Complex::new(c, 0.0)), (MonomialIndex::new(n, -k, -m), Complex::new(c, 0.0))]),
    )
}

fn write(path: &Path, spec: &HamiltonianSpec, pretty: bool) {
    let text = if pretty { serde_json::to_string_pretty(spec) } else { serde_json::to_string(spec) }.expect("spec serializes");
    std::fs::write(path, text + "\n").expect("data directory is writable");
    println!("wrote {} ({} terms)", path.display(), spec.terms.len());
}

fn main() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    std::fs::create_dir_all(&dir).expect("data directory");

    let cubic = HamiltonianSpec {
        omega: GOLDEN,
        tau: 2.0,
        alpha: None,
        terms: vec![CartesianTerm { mu: 3, nu: 0, fourier: vec![FourierCoeff { m: 0, re: 1.0, im: 0.0 }] }],
    };
    write(&dir.join("cubic.json"), &cubic, true);

    let h = lie_series_transform(&FourierTaylorSeries::h2(GOLDEN), &generator(), DegreeWindow::new(2, 24)).expect("pull-back");
    let spec = from_action_angle(&h, 2.0, None).expect("pull-back is polynomial");
    write(&dir.join("linearizable.json"), &spec, false);
}

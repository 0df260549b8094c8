#![allow(dead_code)]

use misclass_core::*;

/// Central differences with step `h`.
pub fn finite_diff(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut y = x.to_vec();
    (0..x.len())
        .map(|i| {
            y[i] = x[i] + h;
            let up = f(&y);
            y[i] = x[i] - h;
            let down = f(&y);
            y[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Largest violation of `|g - fd| <= rel * |fd| + abs`, as a ratio; a value
/// at most 1 passes.
pub fn grad_violation(g: &[f64], fd: &[f64], rel: f64, abs: f64) -> f64 {
    g.iter()
        .zip(fd)
        .map(|(a, b)| (a - b).abs() / (rel * b.abs() + abs))
        .fold(0.0, f64::max)
}

/// A small data set over `s` countries and `c` causes with some empty rows.
pub fn toy_spec(variant: Variant, c: usize, s: usize, seed: u64) -> ModelSpec {
    let causes = CauseSet::numbered(c).unwrap();
    let mut r = rng::stream(seed, 0);
    let data: Vec<CountMatrix> = (0..s)
        .map(|_| {
            let counts = (0..c * c)
                .map(|_| {
                    let u = rng::uniform(&mut r);
                    if u < 0.3 {
                        0
                    } else {
                        (u * 12.0) as u64
                    }
                })
                .collect();
            CountMatrix::new(causes.clone(), counts).unwrap()
        })
        .collect();
    ModelSpec::new_any_countries(
        variant,
        Hyperparams::default(),
        (1..=s).map(|k| format!("c{k}")).collect(),
        data,
    )
    .unwrap()
}

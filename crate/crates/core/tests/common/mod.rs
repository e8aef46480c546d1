#![allow(dead_code)]

use esme_core::{SampledPath, VectorField};
use proptest::prelude::*;

pub mod props;

/// Monomial exponents of total degree `≤ q` in `m` variables.
pub fn exponents(m: usize, q: u32) -> Vec<Vec<u32>> {
    let mut out = vec![vec![]];
    for _ in 0..m {
        out = out
            .into_iter()
            .flat_map(|e: Vec<u32>| {
                let used: u32 = e.iter().sum();
                (0..=q - used).map(move |k| {
                    let mut e = e.clone();
                    e.push(k);
                    e
                })
            })
            .collect();
    }
    out
}

#[derive(Clone, Debug)]
pub struct FieldSpec {
    pub m: usize,
    pub n: usize,
    pub q: u32,
    /// `[j][i]` → (coefficient, multiplied by the parameter) per monomial.
    pub entries: Vec<Vec<Vec<(i32, bool)>>>,
}

impl FieldSpec {
    pub fn state_names(&self) -> Vec<String> {
        (1..=self.m).map(|j| format!("y{j}")).collect()
    }

    pub fn field(&self) -> VectorField {
        let names = self.state_names();
        let monos = exponents(self.m, self.q);
        let rows: Vec<Vec<String>> = self
            .entries
            .iter()
            .map(|row| {
                row.iter()
                    .map(|coeffs| {
                        let terms: Vec<String> = coeffs
                            .iter()
                            .zip(&monos)
                            .filter(|((c, _), _)| *c != 0)
                            .map(|((c, p), e)| {
                                let mut t = format!("{c}");
                                if *p {
                                    t.push_str("*p");
                                }
                                for (k, &x) in e.iter().enumerate() {
                                    if x > 0 {
                                        t.push_str(&format!("*{}^{x}", names[k]));
                                    }
                                }
                                t
                            })
                            .collect();
                        if terms.is_empty() {
                            "0".to_string()
                        } else {
                            format!("({})/4", terms.join(" + "))
                        }
                    })
                    .collect()
            })
            .collect();
        VectorField::parse(&["p".to_string()], &names, &rows).expect("generated field parses")
    }
}

pub fn field_spec() -> impl Strategy<Value = FieldSpec> {
    (1usize..=2, 1usize..=2, 0u32..=2).prop_flat_map(|(m, n, q)| {
        let k = exponents(m, q).len();
        let entry = prop::collection::vec((-2i32..=2, any::<bool>()), k);
        let row = prop::collection::vec(entry, n);
        prop::collection::vec(row, m).prop_map(move |entries| FieldSpec { m, n, q, entries })
    })
}

/// Polyline through `points`, one unit of time per segment.
pub fn polyline(points: &[Vec<f64>]) -> SampledPath {
    let times = (0..points.len()).map(|k| k as f64).collect();
    SampledPath::new(times, points.to_vec()).unwrap()
}

/// The same polyline with every segment split into `k` equal pieces.
pub fn refine(path: &SampledPath, k: usize) -> SampledPath {
    let (t, v) = (path.times(), path.values());
    let mut times = vec![t[0]];
    let mut values = vec![v[0].clone()];
    for s in 1..t.len() {
        for j in 1..=k {
            let w = j as f64 / k as f64;
            times.push(t[s - 1] + w * (t[s] - t[s - 1]));
            values.push(v[s - 1].iter().zip(&v[s]).map(|(a, b)| a + w * (b - a)).collect());
        }
    }
    SampledPath::new(times, values).unwrap()
}

pub fn points(dim: usize, len: std::ops::RangeInclusive<usize>, scale: f64) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-scale..scale, dim), len).prop_map(|incs| {
        let mut acc = vec![0.0; incs[0].len()];
        let mut out = vec![acc.clone()];
        for inc in incs {
            for (a, d) in acc.iter_mut().zip(inc) {
                *a += d;
            }
            out.push(acc.clone());
        }
        out
    })
}

#![allow(dead_code)]

use stprune::oracle;
use stprune::{Dims, TokenRows, TokenTensor};

pub fn tensor(v: usize, t: usize, p: usize, c: usize, seed: u64) -> TokenTensor {
    stprune::bench::random_tensor(Dims::new(v, t, p, c), seed).unwrap()
}

pub fn rows_of(x: &TokenTensor) -> Vec<TokenRows<'_>> {
    (0..x.dims().views).map(|v| x.view(v)).collect()
}

/// Plain two-stage max-min with the norm-only seed, built from the naive reference.
pub fn norm_seeded_two_stage(x: &TokenTensor, k1: usize, k2: usize) -> Vec<Vec<usize>> {
    let d = x.dims();
    let flat = vec![0.0; d.tokens_per_view()];
    (0..d.views)
        .map(|v| {
            let s1 = oracle::naive_seed_expand(x.view(v), k1, 0.0, &flat).unwrap().indices;
            let mut buf = Vec::new();
            for &i in &s1 {
                buf.extend_from_slice(x.view(v).row(i));
            }
            let rows = TokenRows::new(&buf, d.channels).unwrap();
            let s2 = oracle::naive_seed_expand(rows, k2, 0.0, &flat[..k1]).unwrap().indices;
            s2.iter().map(|&i| s1[i]).collect()
        })
        .collect()
}

/// Copy of `x` with the view axis rotated left by `r`.
pub fn rotate_views(x: &TokenTensor, r: usize) -> TokenTensor {
    let d = x.dims();
    let mut data = Vec::with_capacity(x.data().len());
    for v in 0..d.views {
        data.extend_from_slice(x.view((v + r) % d.views).as_slice());
    }
    TokenTensor::new(d, data).unwrap()
}

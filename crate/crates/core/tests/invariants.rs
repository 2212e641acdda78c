mod common;

use common::{norm_seeded_two_stage, rotate_views, rows_of, tensor};
use proptest::prelude::*;
use stprune::mtp::{self, TemporalScoreParams};
use stprune::oracle;
use stprune::rsp::{self, SpatialOptions, ViewRing};
use stprune::select::{self, greedy_expand, weighted_seed, WeightedSelectParams};
use stprune::{st_prune, Dims, Method, Order, PruneConfig, SplitPolicy, TokenRows, TokenTensor};

fn config(views: usize, retention: f64, order: Order) -> PruneConfig {
    let mut cfg = PruneConfig::with_retention(retention, SplitPolicy::Balanced).unwrap();
    cfg.ring = ViewRing::numbered(views).unwrap();
    cfg.order = order;
    cfg
}

fn scores_for(n: usize, seed: u64) -> Vec<f64> {
    let raw = tensor(1, 1, n, 1, seed ^ 0x5eed);
    stprune::minmax_normalize(&raw.data().iter().map(|&v| v as f64).collect::<Vec<_>>()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 128, ..ProptestConfig::default() })]

    #[test]
    fn greedy_trace_is_prefix_of_larger_budget(n in 3usize..40, c in 2usize..16, seed in any::<u64>(), lambda in 0.0f64..2.0) {
        let x = tensor(1, 1, n, c, seed);
        let rows = x.view(0);
        let s = scores_for(n, seed);
        for k in 1..n {
            let a = select::select_weighted(rows, k, lambda, Some(&s)).unwrap();
            let b = select::select_weighted(rows, k + 1, lambda, Some(&s)).unwrap();
            prop_assert_eq!(&b.selection_trace[..k], &a.selection_trace[..]);
            let va = select::select_vanilla(rows, k).unwrap();
            let vb = select::select_vanilla(rows, k + 1).unwrap();
            prop_assert_eq!(&vb.selection_trace[..k], &va.selection_trace[..]);
        }
    }

    #[test]
    fn selection_is_deterministic_and_well_formed(n in 1usize..48, c in 1usize..16, seed in any::<u64>(), k_frac in 0.0f64..1.0) {
        let x = tensor(1, 1, n, c, seed);
        let k = 1 + ((n - 1) as f64 * k_frac) as usize;
        let s = scores_for(n, seed);
        let a = select::select_weighted(x.view(0), k, 0.7, Some(&s)).unwrap();
        prop_assert_eq!(&a, &select::select_weighted(x.view(0), k, 0.7, Some(&s)).unwrap());
        prop_assert_eq!(a.indices.len(), k);
        prop_assert!(a.indices.windows(2).all(|w| w[0] < w[1]));
        let mut trace = a.selection_trace.clone();
        trace.sort_unstable();
        prop_assert_eq!(trace, a.indices);
    }

    #[test]
    fn permutation_equivariance(n in 2usize..32, c in 2usize..12, seed in any::<u64>(), lambda in 0.0f64..1.5, shuffle in any::<u64>()) {
        let x = tensor(1, 1, n, c, seed);
        let s = scores_for(n, seed);
        // new[i] = old[perm[i]]
        let mut perm: Vec<usize> = (0..n).collect();
        let mut state = shuffle | 1;
        for i in (1..n).rev() {
            state ^= state << 13; state ^= state >> 7; state ^= state << 17;
            perm.swap(i, (state % (i as u64 + 1)) as usize);
        }
        let mut data = Vec::new();
        for &p in &perm {
            data.extend_from_slice(x.view(0).row(p));
        }
        let y = TokenTensor::new(x.dims(), data).unwrap();
        let ps: Vec<f64> = perm.iter().map(|&p| s[p]).collect();
        let k = 1 + n / 2;
        let map_back = |idx: &[usize]| { let mut v: Vec<usize> = idx.iter().map(|&i| perm[i]).collect(); v.sort_unstable(); v };
        let a = select::select_weighted(x.view(0), k, lambda, Some(&s)).unwrap();
        let b = select::select_weighted(y.view(0), k, lambda, Some(&ps)).unwrap();
        prop_assert_eq!(map_back(&b.indices), a.indices);
        let va = select::select_vanilla(x.view(0), k).unwrap();
        let vb = select::select_vanilla(y.view(0), k).unwrap();
        prop_assert_eq!(map_back(&vb.indices), va.indices);
    }

    #[test]
    fn zero_lambda_ignores_scores(n in 1usize..40, c in 1usize..10, seed in any::<u64>()) {
        let x = tensor(1, 1, n, c, seed);
        let s = scores_for(n, seed);
        let k = n.div_ceil(2);
        let plain = select::select_weighted(x.view(0), k, 0.0, None).unwrap();
        prop_assert_eq!(select::select_weighted(x.view(0), k, 0.0, Some(&s)).unwrap(), plain);
    }

    #[test]
    fn temporal_scores_in_unit_range_and_flattening(t in 1usize..6, p in 1usize..20, c in 1usize..12, seed in any::<u64>(), alpha in -4.0f64..4.0) {
        let x = tensor(1, t, p, c, seed);
        let params = TemporalScoreParams { alpha, lambda1: 0.6 };
        let m = mtp::temporal_score(x.view(0), t, &params).unwrap();
        for v in m.values.iter().chain(&m.motion_term).chain(&m.recency_term) {
            prop_assert!((0.0..=1.0).contains(v));
        }
        let sel = mtp::mtp_prune(x.view(0), t, (t * p).div_ceil(3), &params).unwrap();
        for &i in &sel.indices {
            prop_assert_eq!(x.token(0, i / p, i % p), x.view(0).row(i));
        }
    }

    #[test]
    fn jitter_never_lowers_motion_term(t in 2usize..6, p in 2usize..12, half in 1usize..6, seed in any::<u64>(), target in any::<prop::sample::Index>()) {
        // The patch trajectory lives in the first `half` channels and the jitter in
        // the rest, so the jitter cannot cancel existing motion.
        let c = 2 * half;
        let mut x = tensor(1, t, p, c, seed).into_data();
        let target = target.index(p);
        for f in 0..t {
            let base = (f * p + target) * c;
            for ch in half..c {
                x[base + ch] = 0.0;
            }
        }
        let before = TokenTensor::new(Dims::new(1, t, p, c), x.clone()).unwrap();
        let noise = tensor(1, t, 1, c, seed.wrapping_add(1));
        for f in 0..t {
            let base = (f * p + target) * c;
            for ch in half..c {
                x[base + ch] = noise.token(0, f, 0)[ch];
            }
        }
        let after = TokenTensor::new(Dims::new(1, t, p, c), x).unwrap();
        let raw_before = mtp::motion_raw(before.view(0), t).unwrap();
        let raw_after = mtp::motion_raw(after.view(0), t).unwrap();
        for f in 0..t {
            prop_assert!(raw_after[f * p + target] >= raw_before[f * p + target]);
        }
    }

    #[test]
    fn single_frame_mtp_equals_norm_seeded_expansion(p in 1usize..40, c in 1usize..16, seed in any::<u64>(), lambda1 in 0.0f64..2.0) {
        let x = tensor(1, 1, p, c, seed);
        let k = p.div_ceil(2);
        let params = TemporalScoreParams { alpha: 2.0, lambda1 };
        let got = mtp::mtp_prune(x.view(0), 1, k, &params).unwrap();
        let seed_idx = weighted_seed(x.view(0), None, 0.0).unwrap();
        let want = greedy_expand(x.view(0), seed_idx, &WeightedSelectParams::vanilla(k)).unwrap();
        prop_assert_eq!(got.indices, want.indices);
    }

    #[test]
    fn ring_rotation_is_equivariant(v in 2usize..7, m in 1usize..16, c in 1usize..10, seed in any::<u64>(), r in 1usize..6) {
        let x = tensor(v, 1, m, c, seed);
        let y = rotate_views(&x, r % v);
        let ring = ViewRing::numbered(v).unwrap();
        let sx = rsp::spatial_score(&rows_of(&x), &ring, SpatialOptions::default()).unwrap();
        let sy = rsp::spatial_score(&rows_of(&y), &ring, SpatialOptions::default()).unwrap();
        let k2 = m.div_ceil(2);
        let px = rsp::rsp_prune(&rows_of(&x), k2, 0.8, &ring, SpatialOptions::default()).unwrap();
        let py = rsp::rsp_prune(&rows_of(&y), k2, 0.8, &ring, SpatialOptions::default()).unwrap();
        for view in 0..v {
            let src = (view + r) % v;
            prop_assert_eq!(sy.view_raw(view), sx.view_raw(src));
            prop_assert_eq!(&py[view], &px[src]);
        }
    }

    #[test]
    fn ring_reflection_keeps_raw_scores(v in 2usize..7, m in 1usize..16, c in 1usize..10, seed in any::<u64>()) {
        let x = tensor(v, 1, m, c, seed);
        let mut data = Vec::new();
        for view in (0..v).rev() {
            data.extend_from_slice(x.view(view).as_slice());
        }
        let y = TokenTensor::new(x.dims(), data).unwrap();
        let ring = ViewRing::numbered(v).unwrap();
        let sx = rsp::spatial_score(&rows_of(&x), &ring, SpatialOptions::default()).unwrap();
        let sy = rsp::spatial_score(&rows_of(&y), &ring, SpatialOptions::default()).unwrap();
        for view in 0..v {
            prop_assert_eq!(sy.view_raw(v - 1 - view), sx.view_raw(view));
        }
    }

    #[test]
    fn duplicating_into_a_neighbour_never_raises_raw_score(v in 2usize..7, m in 1usize..12, c in 2usize..10, seed in any::<u64>(), pick in any::<(prop::sample::Index, prop::sample::Index, prop::sample::Index)>()) {
        let x = tensor(v, 1, m, c, seed);
        let (src_view, i, j) = (pick.0.index(v), pick.1.index(m), pick.2.index(m));
        let ring = ViewRing::numbered(v).unwrap();
        let mut data = x.data().to_vec();
        let dst = (ring.next(src_view) * m + j) * c;
        data[dst..dst + c].copy_from_slice(x.view(src_view).row(i));
        let y = TokenTensor::new(x.dims(), data).unwrap();
        let before = rsp::spatial_score(&rows_of(&x), &ring, SpatialOptions::default()).unwrap();
        let after = rsp::spatial_score(&rows_of(&y), &ring, SpatialOptions::default()).unwrap();
        prop_assert!(after.view_raw(src_view)[i] <= before.view_raw(src_view)[i]);
    }

    #[test]
    fn spatial_ranges_and_precompute_match_direct(v in 2usize..7, m in 1usize..20, c in 1usize..12, seed in any::<u64>()) {
        let x = tensor(v, 1, m, c, seed);
        let ring = ViewRing::numbered(v).unwrap();
        let s = rsp::spatial_score(&rows_of(&x), &ring, SpatialOptions::default()).unwrap();
        prop_assert!(s.values.iter().all(|v| (0.0..=1.0).contains(v)));
        prop_assert!(s.raw.iter().all(|v| (0.0..=2.0).contains(v)));
        let direct = oracle::naive_spatial_raw(&rows_of(&x), &ring).unwrap();
        for view in 0..v {
            for (a, b) in s.view_raw(view).iter().zip(&direct[view]) {
                prop_assert!((a - b).abs() <= 1e-6);
            }
        }
    }

    #[test]
    fn pipeline_structural_contract(v in 2usize..6, t in 1usize..5, p in 2usize..16, c in 1usize..12, seed in any::<u64>(), retention in 0.05f64..1.0, spatial_first in any::<bool>(), vanilla in any::<bool>()) {
        let x = tensor(v, t, p, c, seed);
        let order = if spatial_first { Order::SpatialFirst } else { Order::TemporalFirst };
        let mut cfg = config(v, retention, order);
        cfg.keep_diagnostics = true;
        if vanilla {
            cfg.method = Method::Vanilla;
        }
        let out = st_prune(&x, &cfg).unwrap();
        let k2 = out.budget.k2;
        prop_assert_eq!(out.tokens.dims(), Dims::new(v, 1, k2, c));
        prop_assert_eq!(out.token_count(), v * k2);
        for (view, row) in out.refs.iter().enumerate() {
            prop_assert!(row.windows(2).all(|w| w[0].flat < w[1].flat));
            for (m, r) in row.iter().enumerate() {
                prop_assert_eq!(r.view, view);
                prop_assert_eq!(r.flat, r.frame * p + r.patch);
                prop_assert_eq!(out.tokens.token(view, 0, m), x.token(view, r.frame, r.patch));
            }
        }
        if let Some(diag) = &out.diagnostics {
            for (view, inter) in diag.intermediate.iter().enumerate() {
                prop_assert!(inter.windows(2).all(|w| w[0] < w[1]));
                let inter_set: std::collections::HashSet<_> = inter.iter().collect();
                prop_assert!(out.refs[view].iter().all(|r| inter_set.contains(&r.flat)));
            }
        }
        prop_assert_eq!(&out, &st_prune(&x, &cfg).unwrap());
    }

    #[test]
    fn pipeline_rotation_equivariance(v in 2usize..6, t in 1usize..4, p in 2usize..12, c in 1usize..8, seed in any::<u64>(), r in 1usize..6) {
        let x = tensor(v, t, p, c, seed);
        let y = rotate_views(&x, r % v);
        let cfg = config(v, 0.25, Order::TemporalFirst);
        let a = st_prune(&x, &cfg).unwrap();
        let b = st_prune(&y, &cfg).unwrap();
        for view in 0..v {
            let src = (view + r) % v;
            let fa: Vec<usize> = a.refs[src].iter().map(|r| r.flat).collect();
            let fb: Vec<usize> = b.refs[view].iter().map(|r| r.flat).collect();
            prop_assert_eq!(fa, fb);
        }
    }

    #[test]
    fn zero_lambdas_reduce_to_norm_seeded_max_min(v in 2usize..6, t in 1usize..5, p in 2usize..16, c in 1usize..12, seed in any::<u64>(), retention in 0.05f64..1.0) {
        let x = tensor(v, t, p, c, seed);
        let mut cfg = config(v, retention, Order::TemporalFirst);
        cfg.lambda1 = 0.0;
        cfg.lambda2 = 0.0;
        let out = st_prune(&x, &cfg).unwrap();
        let want = norm_seeded_two_stage(&x, out.budget.k1, out.budget.k2);
        let got: Vec<Vec<usize>> = out.refs.iter().map(|r| r.iter().map(|t| t.flat).collect()).collect();
        prop_assert_eq!(got, want);
    }
}

/// The normalized motion term is coupled across tokens by min-max scaling: raising
/// a patch's peak widens the range and can pull its other frames down.
#[test]
fn normalized_motion_term_can_drop_when_raw_motion_rises() {
    // Patch 0 drifts along channel 0; jitter on channel 1 lands mostly on its last frame.
    let before = vec![0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0];
    let mut after = before.clone();
    after[9] = 1.0;
    let before = TokenTensor::new(Dims::new(1, 3, 2, 2), before).unwrap();
    let after = TokenTensor::new(Dims::new(1, 3, 2, 2), after).unwrap();
    let params = TemporalScoreParams::default();
    let rb = mtp::motion_raw(before.view(0), 3).unwrap();
    let ra = mtp::motion_raw(after.view(0), 3).unwrap();
    for f in 0..3 {
        assert!(ra[f * 2] >= rb[f * 2]);
    }
    let mean = |x: &TokenTensor| {
        let m = mtp::temporal_score(x.view(0), 3, &params).unwrap();
        (0..3).map(|f| m.motion_term[f * 2]).sum::<f64>() / 3.0
    };
    assert!(mean(&after) < mean(&before));
}

#[test]
fn full_retention_is_identity() {
    for order in [Order::TemporalFirst, Order::SpatialFirst] {
        let x = tensor(3, 4, 5, 6, 9);
        let out = st_prune(&x, &config(3, 1.0, order)).unwrap();
        assert_eq!(out.tokens.data(), x.data());
        for row in &out.refs {
            assert_eq!(row.iter().map(|r| r.flat).collect::<Vec<_>>(), (0..20).collect::<Vec<_>>());
        }
    }
}

#[test]
fn both_orders_give_identical_dims() {
    let x = tensor(6, 5, 64, 16, 3);
    let a = st_prune(&x, &config(6, 0.25, Order::TemporalFirst)).unwrap();
    let b = st_prune(&x, &config(6, 0.25, Order::SpatialFirst)).unwrap();
    assert_eq!(a.tokens.dims(), Dims::new(6, 1, 80, 16));
    assert_eq!(a.tokens.dims(), b.tokens.dims());
}

#[test]
fn single_view_needs_the_flag() {
    let x = tensor(1, 3, 8, 4, 1);
    let mut cfg = config(1, 0.25, Order::TemporalFirst);
    assert!(st_prune(&x, &cfg).is_err());
    cfg.allow_single_view = true;
    let out = st_prune(&x, &cfg).unwrap();
    assert_eq!(out.token_count(), out.budget.k2);
}

#[test]
fn ring_size_must_match_views() {
    let x = tensor(4, 2, 4, 3, 1);
    assert!(st_prune(&x, &config(5, 0.25, Order::TemporalFirst)).is_err());
    let rows: Vec<TokenRows> = rows_of(&x);
    assert!(rsp::spatial_score(&rows, &ViewRing::numbered(3).unwrap(), SpatialOptions::default()).is_err());
}

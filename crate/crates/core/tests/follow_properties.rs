use std::collections::BTreeSet;

use kbfollow::{
    build_kb, follow_naive_global, partition_reified, partition_with_ranges, reify, shard::follow_sharded_metered,
    FollowEngine, LateKb, Meter, Parallelism, RelationDecl, TripleDecl, TypeDecl, TypedKb,
};
use ndarray::Array2;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_kb(rng: &mut ChaCha8Rng, n_e: usize, n_r: usize, density: f64) -> TypedKb {
    let names: Vec<String> = (0..n_e).map(|i| format!("e{i}")).collect();
    let rels: Vec<RelationDecl> = (0..n_r).map(|k| RelationDecl::new(format!("r{k}"), "e", "e")).collect();
    let mut triples = Vec::new();
    for k in 0..n_r {
        for i in 0..n_e {
            for j in 0..n_e {
                if rng.gen_bool(density) {
                    let w = if rng.gen_bool(0.5) { 1.0 } else { rng.gen_range(0.1..2.0) };
                    triples.push(TripleDecl::new(&names[i], format!("r{k}"), &names[j], w));
                }
            }
        }
    }
    build_kb(&[TypeDecl::named("e", names)], &rels, &triples).unwrap()
}

fn random_nonneg(rng: &mut ChaCha8Rng, rows: usize, cols: usize, sparsity: f64) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| if rng.gen_bool(sparsity) { 0.0 } else { rng.gen_range(0.0..2.0) })
}

fn naive_rows(x: &Array2<f64>, r: &Array2<f64>, kb: &TypedKb) -> Array2<f64> {
    let mut out = Array2::zeros((x.nrows(), kb.n_entities()));
    for b in 0..x.nrows() {
        let y = follow_naive_global(
            x.row(b).insert_axis(ndarray::Axis(0)),
            r.row(b).insert_axis(ndarray::Axis(0)),
            kb,
            &mut Meter::new(),
        )
        .unwrap();
        out.row_mut(b).assign(&y.row(0));
    }
    out
}

fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    assert_eq!(a.dim(), b.dim());
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Brute-force R-neighbors(X) by walking every stored edge.
fn r_neighbors(kb: &TypedKb, xs: &BTreeSet<usize>, rs: &BTreeSet<usize>) -> BTreeSet<usize> {
    kb.triples()
        .iter()
        .filter(|t| rs.contains(&t.rel.idx()) && xs.contains(&kb.global_index(t.subj)))
        .map(|t| kb.global_index(t.obj))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn strategies_agree(seed in any::<u64>(), n_e in 1usize..=50, n_r in 1usize..=10, b in 1usize..=8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let density = rng.gen_range(0.0..0.15);
        let kb = random_kb(&mut rng, n_e, n_r, density);
        let x = random_nonneg(&mut rng, b, n_e, 0.5);
        let r = random_nonneg(&mut rng, b, n_r, 0.3);
        let naive = naive_rows(&x, &r, &kb);
        let late = LateKb::global(&kb).follow(x.view(), r.view()).unwrap();
        let rkb = reify(&kb);
        let reified = rkb.follow(x.view(), r.view()).unwrap();
        prop_assert!(max_abs_diff(&naive, &late) < 1e-9);
        prop_assert!(max_abs_diff(&naive, &reified) < 1e-9);
        for m in 1..=3.min(kb.n_triples().max(1)) {
            if kb.n_triples() == 0 { break; }
            let skb = partition_reified(&rkb, m).unwrap();
            let sharded = skb.follow(x.view(), r.view(), Parallelism::Sequential).unwrap();
            prop_assert!(max_abs_diff(&reified, &sharded) < 1e-9);
        }
    }

    #[test]
    fn support_is_r_neighbors(seed in any::<u64>(), n_e in 1usize..=30, n_r in 1usize..=6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let kb = random_kb(&mut rng, n_e, n_r, 0.08);
        let xs: BTreeSet<usize> = (0..n_e).filter(|_| rng.gen_bool(0.2)).collect();
        let rs: BTreeSet<usize> = (0..n_r).filter(|_| rng.gen_bool(0.5)).collect();
        let mut x = Array2::zeros((1, n_e));
        xs.iter().for_each(|&i| x[[0, i]] = 1.0);
        let mut r = Array2::zeros((1, n_r));
        rs.iter().for_each(|&k| r[[0, k]] = 1.0);
        let y = reify(&kb).follow(x.view(), r.view()).unwrap();
        let support: BTreeSet<usize> = (0..n_e).filter(|&j| y[[0, j]] != 0.0).collect();
        prop_assert_eq!(support, r_neighbors(&kb, &xs, &rs));
    }

    #[test]
    fn bilinear_and_absorbing(seed in any::<u64>(), alpha in 0.0f64..5.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let kb = random_kb(&mut rng, 12, 3, 0.2);
        let rkb = reify(&kb);
        let f = |x: &Array2<f64>, r: &Array2<f64>| rkb.follow(x.view(), r.view()).unwrap();
        let x1 = random_nonneg(&mut rng, 2, 12, 0.3);
        let x2 = random_nonneg(&mut rng, 2, 12, 0.3);
        let r1 = random_nonneg(&mut rng, 2, 3, 0.2);
        let r2 = random_nonneg(&mut rng, 2, 3, 0.2);
        prop_assert!(max_abs_diff(&f(&(&x1 * alpha), &r1), &(f(&x1, &r1) * alpha)) < 1e-9);
        prop_assert!(max_abs_diff(&f(&(&x1 + &x2), &r1), &(f(&x1, &r1) + f(&x2, &r1))) < 1e-9);
        prop_assert!(max_abs_diff(&f(&x1, &(&r1 * alpha)), &(f(&x1, &r1) * alpha)) < 1e-9);
        prop_assert!(max_abs_diff(&f(&x1, &(&r1 + &r2)), &(f(&x1, &r1) + f(&x1, &r2))) < 1e-9);
        let zx = Array2::zeros((2, 12));
        let zr = Array2::zeros((2, 3));
        prop_assert!(f(&zx, &r1).iter().all(|&v| v == 0.0));
        prop_assert!(f(&x1, &zr).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn monotone_in_both_arguments(seed in any::<u64>(), bump in 0.0f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let kb = random_kb(&mut rng, 10, 3, 0.25);
        let late = LateKb::global(&kb);
        let x = random_nonneg(&mut rng, 1, 10, 0.3);
        let r = random_nonneg(&mut rng, 1, 3, 0.2);
        let base = late.follow(x.view(), r.view()).unwrap();
        let mut x2 = x.clone();
        x2[[0, rng.gen_range(0..10)]] += bump;
        let mut r2 = r.clone();
        r2[[0, rng.gen_range(0..3)]] += bump;
        for y in [late.follow(x2.view(), r.view()).unwrap(), late.follow(x.view(), r2.view()).unwrap()] {
            prop_assert!(y.iter().zip(base.iter()).all(|(a, b)| *a >= *b - 1e-12));
        }
    }
}

fn grid(n: usize) -> TypedKb {
    let names: Vec<String> = (0..n * n).map(|i| format!("c{}_{}", i / n, i % n)).collect();
    let mut triples = Vec::new();
    for r in 0..n {
        for c in 0..n {
            let here = format!("c{r}_{c}");
            if r > 0 {
                triples.push(TripleDecl::new(&here, "north", format!("c{}_{c}", r - 1), 1.0));
            }
            if r + 1 < n {
                triples.push(TripleDecl::new(&here, "south", format!("c{}_{c}", r + 1), 1.0));
            }
            if c + 1 < n {
                triples.push(TripleDecl::new(&here, "east", format!("c{r}_{}", c + 1), 1.0));
            }
            if c > 0 {
                triples.push(TripleDecl::new(&here, "west", format!("c{r}_{}", c - 1), 1.0));
            }
        }
    }
    let rels: Vec<_> = ["north", "south", "east", "west"]
        .iter()
        .map(|d| RelationDecl::new(*d, "cell", "cell"))
        .collect();
    build_kb(&[TypeDecl::named("cell", names)], &rels, &triples).unwrap()
}

#[test]
fn late_batch_equals_looped_naive_on_large_grid() {
    let kb = grid(64);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let b = 128;
    let mut x = Array2::zeros((b, kb.n_entities()));
    for row in 0..b {
        x[[row, rng.gen_range(0..kb.n_entities())]] = 1.0;
    }
    let r = random_nonneg(&mut rng, b, 4, 0.2);
    let late = LateKb::global(&kb).follow(x.view(), r.view()).unwrap();
    assert!(max_abs_diff(&late, &naive_rows(&x, &r, &kb)) < 1e-9);
}

#[test]
fn reified_matches_late_on_grid() {
    let kb = grid(5);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = random_nonneg(&mut rng, 4, 25, 0.0);
    let r = random_nonneg(&mut rng, 4, 4, 0.0);
    let late = LateKb::global(&kb).follow(x.view(), r.view()).unwrap();
    let reified = reify(&kb).follow(x.view(), r.view()).unwrap();
    assert!(max_abs_diff(&late, &reified) < 1e-9);
}

#[test]
fn reified_grid_has_360_rows_per_matrix() {
    let rkb = reify(&grid(10));
    assert_eq!(rkb.m_subj.nnz(), 360);
    assert_eq!(rkb.m_obj.nnz(), 360);
    assert_eq!(rkb.m_rel.nnz(), 360);
    let skb = partition_reified(&rkb, 4).unwrap();
    assert!(skb.ranges().iter().all(|r| r.len() == 90));
}

#[test]
fn east_relation_on_3_grid() {
    let kb = grid(3);
    let m = kb.relation_matrix(kb.relation("east").unwrap()).unwrap();
    assert_eq!(m.nnz(), 6);
    for (i, j, w) in m.iter() {
        let (r, c) = (i / 3, i % 3);
        assert!(c < 2);
        assert_eq!(j, r * 3 + c + 1);
        assert_eq!(w, 1.0);
    }
}

#[test]
fn sharding_is_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let kb = random_kb(&mut rng, 30, 5, 0.1);
    let rkb = reify(&kb);
    let x = random_nonneg(&mut rng, 6, 30, 0.4);
    let r = random_nonneg(&mut rng, 6, 5, 0.2);
    let unsharded = rkb.follow(x.view(), r.view()).unwrap();

    let one = partition_reified(&rkb, 1).unwrap();
    assert_eq!(one.follow(x.view(), r.view(), Parallelism::Parallel).unwrap(), unsharded);

    let three = partition_reified(&rkb, 3).unwrap();
    for par in [Parallelism::Sequential, Parallelism::Parallel] {
        let y = three.follow(x.view(), r.view(), par).unwrap();
        assert!(max_abs_diff(&y, &unsharded) < 1e-9);
    }
    // all of relation 2's triples in a single shard
    let span = kb.triple_span(kb.relation("r2").unwrap());
    let ranges = vec![0..span.start, span.clone(), span.end..kb.n_triples()];
    let adversarial = partition_with_ranges(&rkb, ranges).unwrap();
    let y = adversarial.follow(x.view(), r.view(), Parallelism::Parallel).unwrap();
    assert!(max_abs_diff(&y, &unsharded) < 1e-9);

    // scheduling does not change bits
    let seq = three.follow(x.view(), r.view(), Parallelism::Sequential).unwrap();
    let par = three.follow(x.view(), r.view(), Parallelism::Parallel).unwrap();
    assert_eq!(seq, par);
}

#[test]
fn per_shard_intermediates_shrink_with_shard_count() {
    let kb = grid(10);
    let rkb = reify(&kb);
    let b = 8;
    let x = Array2::ones((b, kb.n_entities()));
    let r = Array2::ones((b, kb.n_relations()));
    for m in [1, 2, 4, 8] {
        let skb = partition_reified(&rkb, m).unwrap();
        let (_, meters) = follow_sharded_metered(x.view(), r.view(), &skb, Parallelism::Sequential).unwrap();
        let max_shard_triples = skb.ranges().iter().map(|r| r.len()).max().unwrap();
        for meter in meters {
            assert!(meter.peak() <= 2 * b * max_shard_triples + b * kb.n_entities());
        }
    }
    let e = FollowEngine::Sharded(&partition_reified(&rkb, 4).unwrap(), Parallelism::Sequential);
    let mut meter = Meter::new();
    e.follow_metered(x.view(), r.view(), &mut meter).unwrap();
    // the last shard runs while the three earlier partials are held
    assert_eq!(meter.peak(), 3 * b * 100 + 2 * b * 90 + b * 100);
    assert_eq!(meter.live(), b * 100);
}

use kbfollow::{build_kb, partition_reified, reify, FollowEngine, LateKb, Parallelism, RelationDecl, TripleDecl, TypeDecl, TypedKb};
use kbfollow_grad::{
    load_checkpoint, save_checkpoint, Gradients, LstmCell, LstmState, ModelParams, Tape, Var,
};
use ndarray::{array, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn grid(n: usize) -> TypedKb {
    let names: Vec<String> = (0..n * n).map(|i| format!("c{}_{}", i / n, i % n)).collect();
    let dirs: [(&str, isize, isize); 4] = [("north", -1, 0), ("south", 1, 0), ("east", 0, 1), ("west", 0, -1)];
    let mut triples = Vec::new();
    for (rel, dr, dc) in dirs {
        for r in 0..n as isize {
            for c in 0..n as isize {
                let (r2, c2) = (r + dr, c + dc);
                if (0..n as isize).contains(&r2) && (0..n as isize).contains(&c2) {
                    triples.push(TripleDecl::new(
                        format!("c{r}_{c}"),
                        rel,
                        format!("c{r2}_{c2}"),
                        1.0,
                    ));
                }
            }
        }
    }
    let rels: Vec<_> = dirs.iter().map(|d| RelationDecl::new(d.0, "cell", "cell")).collect();
    build_kb(&[TypeDecl::named("cell", names)], &rels, &triples).unwrap()
}

fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-8)
}

fn random(rng: &mut ChaCha8Rng, shape: (usize, usize), lo: f64, hi: f64) -> Array2<f64> {
    Array2::from_shape_fn(shape, |_| rng.gen_range(lo..hi))
}

/// Central-difference check of every input of a scalar function built on a
/// tape. Returns the worst relative error.
fn check<'a, F>(inputs: &[Array2<f64>], h: f64, build: F) -> f64
where
    F: Fn(&mut Tape<'a>, &[Var]) -> Var,
{
    let eval = |xs: &[Array2<f64>]| -> (f64, Vec<Option<Array2<f64>>>) {
        let mut tape = Tape::new();
        let vars: Vec<Var> = xs.iter().map(|x| tape.constant(x.clone())).collect();
        let loss = build(&mut tape, &vars);
        let grads: Gradients = tape.backward(loss).unwrap();
        let gs = vars.iter().map(|&v| grads.get(v).cloned()).collect();
        (tape.scalar(loss), gs)
    };
    let (_, analytic) = eval(inputs);
    let mut worst = 0.0f64;
    for (k, x) in inputs.iter().enumerate() {
        for idx in 0..x.len() {
            let mut plus = inputs.to_vec();
            let mut minus = inputs.to_vec();
            plus[k].as_slice_mut().unwrap()[idx] += h;
            minus[k].as_slice_mut().unwrap()[idx] -= h;
            let numeric = (eval(&plus).0 - eval(&minus).0) / (2.0 * h);
            let a = analytic[k].as_ref().map_or(0.0, |g| g.as_slice().unwrap()[idx]);
            worst = worst.max(rel_err(a, numeric));
        }
    }
    worst
}

#[test]
fn follow_backward_matches_finite_differences() {
    let kb = grid(4);
    let rkb = reify(&kb);
    let late = LateKb::global(&kb);
    let skb = partition_reified(&rkb, 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let engines = [
        FollowEngine::Reified(&rkb),
        FollowEngine::Late(&late),
        FollowEngine::Sharded(&skb, Parallelism::Sequential),
    ];
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let x = random(&mut rng, (2, 16), 0.0, 1.0);
        let r = random(&mut rng, (2, 4), 0.0, 1.0);
        let dy = random(&mut rng, (2, 16), -1.0, 1.0);
        for engine in engines {
            // loss = <dY, follow(X, R)>, so the tape adjoints are follow_backward(dY)
            let e = check(&[x.clone(), r.clone()], 1e-4, |tape, v| {
                let y = tape.follow(engine, v[0], v[1]).unwrap();
                let w = tape.constant(dy.clone());
                let p = tape.mul(y, w).unwrap();
                tape.sum(p)
            });
            worst = worst.max(e);
        }
    }
    assert!(worst < 1e-4, "worst relative error {worst}");
}

#[test]
fn elementwise_ops_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let a = random(&mut rng, (3, 4), -1.0, 1.0);
    let b = random(&mut rng, (3, 4), -1.0, 1.0);
    let row = random(&mut rng, (1, 4), -1.0, 1.0);
    let col = random(&mut rng, (3, 1), -1.0, 1.0);
    let m = random(&mut rng, (4, 2), -1.0, 1.0);
    let weights = random(&mut rng, (3, 4), -1.0, 1.0);
    let target = array![[0.5, 0.5, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0], [0.25, 0.25, 0.25, 0.25]];
    let e = check(&[a, b, row, col, m], 1e-5, |t, v| {
        let s = t.add(v[0], v[1]).unwrap();
        let d = t.sub(s, v[1]).unwrap();
        let d = t.mul(d, v[1]).unwrap();
        let d = t.add_row(d, v[2]).unwrap();
        let d = t.scale_rows(d, v[3]).unwrap();
        let sg = t.sigmoid(d);
        let th = t.tanh(v[0]);
        let om = t.one_minus(sg);
        let x = t.mul(om, th).unwrap();
        let x = t.scale(x, 1.7);
        let sm = t.softmax(x);
        let w = t.constant(weights.clone());
        let sm = t.mul(sm, w).unwrap();
        let proj = t.matmul(sm, v[4]).unwrap();
        let cat = t.concat_cols(&[proj, v[0]]).unwrap();
        let sl = t.slice_cols(cat, 1..5).unwrap();
        let (xent, _) = t.softmax_xent(sl, target.clone()).unwrap();
        let tot = t.sum(proj);
        t.add(xent, tot).unwrap()
    });
    assert!(e < 1e-6, "worst relative error {e}");
}

#[test]
fn structural_ops_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let table = random(&mut rng, (5, 3), -1.0, 1.0);
    let other = random(&mut rng, (2, 3), -1.0, 1.0);
    let weights = random(&mut rng, (2, 3), -1.0, 1.0);
    let e = check(&[table, other], 1e-5, |t, v| {
        let emb = t.embed(v[0], &[4, 1, 1, 0, 2]).unwrap();
        let pooled = t.mean_pool(emb, &[0..3, 3..5]).unwrap();
        let sel = t.select_rows(&[true, false], pooled, v[1]).unwrap();
        let sq = t.mul(sel, sel).unwrap();
        let w = t.constant(weights.clone());
        let p = t.mul(sq, w).unwrap();
        t.sum(p)
    });
    assert!(e < 1e-6, "worst relative error {e}");
}

#[test]
fn lstm_cell_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut params = ModelParams::new();
    let cell = LstmCell::new(&mut params, "l", 2, 3, &mut rng).unwrap();
    let w = params.value(cell.weight).mapv(f64::from) * 5.0;
    let x = random(&mut rng, (2, 2), -1.0, 1.0);
    let h = random(&mut rng, (2, 3), -1.0, 1.0);
    let c = random(&mut rng, (2, 3), -1.0, 1.0);
    let e = check(&[x, h, c, w], 1e-5, |t, v| {
        // mirror LstmCell::forward with the weight as a tape input
        let xh = t.concat_cols(&[v[0], v[1]]).unwrap();
        let pre = t.matmul(xh, v[3]).unwrap();
        let gates: Vec<Var> = (0..4).map(|k| t.slice_cols(pre, 3 * k..3 * k + 3).unwrap()).collect();
        let i = t.sigmoid(gates[0]);
        let f = t.sigmoid(gates[1]);
        let g = t.tanh(gates[2]);
        let o = t.sigmoid(gates[3]);
        let fc = t.mul(f, v[2]).unwrap();
        let ig = t.mul(i, g).unwrap();
        let c2 = t.add(fc, ig).unwrap();
        let tc = t.tanh(c2);
        let h2 = t.mul(o, tc).unwrap();
        let s = t.add(h2, c2).unwrap();
        let s = t.mul(s, s).unwrap();
        t.sum(s)
    });
    assert!(e < 1e-6, "worst relative error {e}");
}

#[test]
fn consumed_twice_receives_both_adjoints() {
    let x0 = array![[0.3, -0.7], [1.1, 0.2]];
    let single = |t: &mut Tape<'static>, x: Var| {
        let s = t.tanh(x);
        t.sum(s)
    };
    let mut t1 = Tape::new();
    let x1 = t1.constant(x0.clone());
    let l1 = single(&mut t1, x1);
    let g1 = t1.backward(l1).unwrap().get(x1).unwrap().clone();

    let mut t2 = Tape::new();
    let x2 = t2.constant(x0);
    let a = single(&mut t2, x2);
    let b = single(&mut t2, x2);
    let l2 = t2.add(a, b).unwrap();
    let g2 = t2.backward(l2).unwrap().get(x2).unwrap().clone();
    assert_eq!(g2, g1 * 2.0);
}

#[test]
fn sum_of_params_has_unit_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut params = ModelParams::new();
    let a = params.add_uniform("a", (2, 3), 0.1, &mut rng).unwrap();
    let b = params.add_uniform("b", (1, 4), 0.1, &mut rng).unwrap();
    let mut tape = Tape::new();
    let va = tape.param(&params, a);
    let vb = tape.param(&params, b);
    let sa = tape.sum(va);
    let sb = tape.sum(vb);
    let loss = tape.add(sa, sb).unwrap();
    let grads = tape.backward(loss).unwrap();
    tape.accumulate_param_grads(&grads, &mut params);
    for (_, p) in params.iter() {
        assert!(p.grad.iter().all(|&g| g == 1.0));
    }
}

#[test]
fn uniform_softmax_xent_is_ln_n() {
    for n in [2usize, 7, 100] {
        let mut tape = Tape::new();
        let logits = tape.constant(Array2::from_elem((1, n), 0.37));
        let mut target = Array2::zeros((1, n));
        target[[0, n - 1]] = 1.0;
        let (loss, probs) = tape.softmax_xent(logits, target).unwrap();
        assert!(probs.iter().all(|&p| (p - 1.0 / n as f64).abs() < 1e-15));
        assert!((tape.scalar(loss) - (n as f64).ln()).abs() < 1e-12);
    }
}

#[test]
fn non_scalar_loss_rejected() {
    let mut tape = Tape::new();
    let v = tape.constant(Array2::zeros((2, 1)));
    assert!(matches!(tape.backward(v), Err(kbfollow_grad::GradError::NonScalarLoss(2, 1))));
}

#[test]
fn seeded_runs_are_bit_identical() {
    let run = || {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut params = ModelParams::new();
        let cell = LstmCell::new(&mut params, "l", 3, 4, &mut rng).unwrap();
        let mut tape = Tape::new();
        let x = tape.constant(random(&mut rng, (2, 3), -1.0, 1.0));
        let st = cell.zero_state(&mut tape, 2);
        let LstmState { h, .. } = cell.forward(&mut tape, &params, x, st).unwrap();
        let loss = tape.sum(h);
        let grads = tape.backward(loss).unwrap();
        tape.accumulate_param_grads(&grads, &mut params);
        (tape.value(h).clone(), params)
    };
    let (h1, p1) = run();
    let (h2, p2) = run();
    assert_eq!(h1, h2);
    assert_eq!(p1, p2);
}

#[test]
fn checkpoint_round_trip_is_bit_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut params = ModelParams::new();
    params.add_uniform("emb.table", (7, 5), 0.1, &mut rng).unwrap();
    params.add_uniform("proj.w", (5, 2), 1.0, &mut rng).unwrap();
    params.add("odd", array![[f32::MIN_POSITIVE, -0.0, f32::MAX]]).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.ckpt");
    save_checkpoint(&params, &path).unwrap();
    let loaded = load_checkpoint(&path).unwrap();
    assert_eq!(loaded.len(), params.len());
    for ((_, a), (_, b)) in params.iter().zip(loaded.iter()) {
        assert_eq!(a.name, b.name);
        let bits = |p: &kbfollow_grad::Param| p.value.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(a), bits(b));
    }
    save_checkpoint(&loaded, &dir.path().join("q.ckpt")).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(dir.path().join("q.ckpt")).unwrap());
}

mod properties {
    use kbfollow_grad::{decode_checkpoint, encode_checkpoint, softmax_rows, ModelParams};
    use ndarray::Array2;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn checkpoint_round_trip_is_bit_exact(
            shapes in proptest::collection::vec((1usize..5, 1usize..5), 1..4),
            bits in proptest::collection::vec(any::<u32>(), 64),
        ) {
            let mut params = ModelParams::new();
            let mut k = 0;
            for (i, &(r, c)) in shapes.iter().enumerate() {
                let v = Array2::from_shape_fn((r, c), |_| {
                    k += 1;
                    f32::from_bits(bits[k % bits.len()])
                });
                params.add(format!("p{i}"), v).unwrap();
            }
            let back = decode_checkpoint(&encode_checkpoint(&params)).unwrap();
            for ((_, a), (_, b)) in params.iter().zip(back.iter()) {
                prop_assert_eq!(&a.name, &b.name);
                let same = a.value.iter().zip(b.value.iter()).all(|(x, y)| x.to_bits() == y.to_bits());
                prop_assert!(same && a.value.dim() == b.value.dim());
            }
        }

        #[test]
        fn softmax_rows_are_distributions(v in proptest::collection::vec(-50.0f64..50.0, 1..30)) {
            let n = v.len();
            let p = softmax_rows(&Array2::from_shape_vec((1, n), v).unwrap());
            prop_assert!(p.iter().all(|&x| x >= 0.0));
            prop_assert!((p.sum() - 1.0).abs() < 1e-12);
        }
    }
}

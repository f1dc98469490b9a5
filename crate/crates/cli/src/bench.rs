//! Throughput of the two-hop probe `follow(follow(X, R), R)` on the
//! benchmark grid, per strategy and relation count.

use std::io::Write;
use std::time::Instant;

use kbfollow::{
    partition_reified, reify, FollowEngine, LateKb, Meter, Parallelism, ReifiedKb, ShardedReifiedKb, Strategy,
    TypedKb,
};
use kbfollow_tasks::{gen_grid, GridSpec};
use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    /// Grid side.
    pub n: usize,
    /// Relation counts m to sweep.
    pub relations: Vec<usize>,
    pub strategies: Vec<String>,
    /// Batch size b.
    pub batch: usize,
    pub repetitions: usize,
    pub warmup: usize,
    /// Shard count for `reified-sharded`; set from the top-level `shards`.
    #[serde(skip)]
    pub shards: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            n: 64,
            relations: vec![4, 20, 100, 1000],
            strategies: Strategy::ALL.iter().map(|s| s.name().to_string()).collect(),
            batch: 128,
            repetitions: 3,
            warmup: 3,
            shards: 4,
        }
    }
}

impl BenchConfig {
    pub fn parsed_strategies(&self) -> Result<Vec<Strategy>> {
        self.strategies
            .iter()
            .map(|s| s.parse().map_err(|_| CliError::Invalid(format!("unknown strategy `{s}`"))))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(CliError::Invalid(format!("grid side must be at least 2, got {}", self.n)));
        }
        if self.relations.is_empty() || self.relations.contains(&0) {
            return Err(CliError::Invalid("relation counts must be non-empty and >= 1".into()));
        }
        if self.strategies.is_empty() {
            return Err(CliError::Invalid("no strategies".into()));
        }
        if self.batch == 0 || self.repetitions == 0 || self.shards == 0 {
            return Err(CliError::Invalid("batch, repetitions and shards must be >= 1".into()));
        }
        self.parsed_strategies().map(|_| ())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub strategy: String,
    pub n: usize,
    pub m: usize,
    pub b: usize,
    pub qps: f64,
    /// Peak bytes of metered intermediates during one probe.
    pub peak_bytes: usize,
    pub seconds: f64,
}

/// Everything prepared for one relation count.
struct Prepared {
    kb: TypedKb,
    late: LateKb,
    rkb: ReifiedKb,
    sharded: ShardedReifiedKb,
}

impl Prepared {
    fn new(n: usize, m: usize, shards: usize) -> Result<Self> {
        let kb = gen_grid(&GridSpec::bench(n, m))?;
        let late = LateKb::global(&kb);
        let rkb = reify(&kb);
        let sharded = partition_reified(&rkb, shards.min(rkb.n_triples()))?;
        Ok(Prepared { kb, late, rkb, sharded })
    }

    fn engine(&self, s: Strategy) -> FollowEngine<'_> {
        match s {
            Strategy::Naive => FollowEngine::Naive(&self.kb),
            Strategy::Late => FollowEngine::Late(&self.late),
            Strategy::Reified => FollowEngine::Reified(&self.rkb),
            Strategy::ReifiedSharded => FollowEngine::Sharded(&self.sharded, Parallelism::Parallel),
        }
    }
}

/// Two hops; the naive strategy has no batch form and runs row by row.
fn two_hop(engine: &FollowEngine<'_>, x: ArrayView2<'_, f64>, r: ArrayView2<'_, f64>, meter: &mut Meter) -> Result<Array2<f64>> {
    if engine.strategy().batched() {
        let y = engine.follow_metered(x, r, meter)?;
        return Ok(engine.follow_metered(y.view(), r, meter)?);
    }
    let mut out = Array2::zeros((x.nrows(), engine.n_entities()));
    for i in 0..x.nrows() {
        let (xi, ri) = (x.slice(ndarray::s![i..i + 1, ..]), r.slice(ndarray::s![i..i + 1, ..]));
        let mut m = Meter::new();
        let y = engine.follow_metered(xi, ri, &mut m)?;
        let z = engine.follow_metered(y.view(), ri, &mut m)?;
        out.row_mut(i).assign(&z.row(0));
        meter.alloc(m.peak());
        meter.free(m.peak());
    }
    Ok(out)
}

/// `b` random one-hot rows over the global entity space.
pub fn random_one_hot(b: usize, n_entities: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let mut x = Array2::zeros((b, n_entities));
    for mut row in x.rows_mut() {
        row[rng.gen_range(0..n_entities)] = 1.0;
    }
    x
}

/// Every strategy must reproduce the row-looped naive result on a probe
/// before it is timed.
fn guard(prep: &Prepared, strategies: &[Strategy], x: &Array2<f64>, r: &Array2<f64>) -> Result<()> {
    let probe = x.slice(ndarray::s![..x.nrows().min(4), ..]);
    let rp = r.slice(ndarray::s![..probe.nrows(), ..]);
    let reference = two_hop(&prep.engine(Strategy::Naive), probe, rp, &mut Meter::new())?;
    for &s in strategies {
        let y = two_hop(&prep.engine(s), probe, rp, &mut Meter::new())?;
        let diff = (&y - &reference).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if diff > 1e-9 {
            return Err(CliError::Guard(format!("{s} differs from naive by {diff:e}")));
        }
    }
    Ok(())
}

/// Runs the sweep; one result per (m, strategy) in config order.
pub fn run_bench(cfg: &BenchConfig, seed: u64) -> Result<Vec<BenchResult>> {
    cfg.validate()?;
    let strategies = cfg.parsed_strategies()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut results = Vec::new();
    for &m in &cfg.relations {
        let prep = Prepared::new(cfg.n, m, cfg.shards)?;
        let x = random_one_hot(cfg.batch, prep.kb.n_entities(), &mut rng);
        let r = Array2::from_elem((cfg.batch, m), 1.0 / m as f64);
        guard(&prep, &strategies, &x, &r)?;
        for &s in &strategies {
            let engine = prep.engine(s);
            for _ in 0..cfg.warmup {
                two_hop(&engine, x.view(), r.view(), &mut Meter::new())?;
            }
            let mut meter = Meter::new();
            two_hop(&engine, x.view(), r.view(), &mut meter)?;
            let start = Instant::now();
            for _ in 0..cfg.repetitions {
                std::hint::black_box(two_hop(&engine, x.view(), r.view(), &mut Meter::new())?);
            }
            let seconds = start.elapsed().as_secs_f64();
            results.push(BenchResult {
                strategy: s.name().to_string(),
                n: cfg.n,
                m,
                b: cfg.batch,
                qps: (cfg.repetitions * cfg.batch) as f64 / seconds.max(f64::MIN_POSITIVE),
                peak_bytes: meter.peak() * std::mem::size_of::<f64>(),
                seconds,
            });
        }
    }
    Ok(results)
}

pub fn write_csv<W: Write>(results: &[BenchResult], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in results {
        w.serialize(r).map_err(|e| CliError::Config(e.to_string()))?;
    }
    w.flush().map_err(|e| CliError::Io {
        path: "<csv>".into(),
        source: e,
    })
}

/// Smallest measured m at which reified beats late mixing.
pub fn crossover(results: &[BenchResult]) -> Option<usize> {
    let qps = |s: &str, m: usize| results.iter().find(|r| r.strategy == s && r.m == m).map(|r| r.qps);
    let mut ms: Vec<usize> = results.iter().map(|r| r.m).collect();
    ms.sort_unstable();
    ms.dedup();
    ms.into_iter()
        .find(|&m| matches!((qps("reified", m), qps("late", m)), (Some(a), Some(b)) if a > b))
}

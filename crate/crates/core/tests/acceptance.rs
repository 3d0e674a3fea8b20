mod common;

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use onng::bench::{brute_force_knn, scaling_study, sweep, EvalCurve, GroundTruth, ScalingConfig};
use onng::construction::{adjust_path, adjust_from_aknng, constrained_phase};
use onng::index::{read_index, write_index};
use onng::optimizer::{
    hill_climb, integrate_log_computations, loss, DegreeOptimizer, MeasurePoint, OptimizerConfig,
    TargetRange,
};
use onng::search::{DynamicDegree, EdgeLimit, SearchConfig, Seeding};
use onng::vecs::{read_bvecs, read_fvecs, read_ivecs};
use onng::{
    construct_adjusted_graph, construct_adjusted_graph_with_constraint, construct_anng,
    effective_edge_limit, hash_size, knn_search, ConstructionParams, Dataset, Graph, NodeId,
    SearchParams, VisitedSet, VpTree,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

/// Runs one criterion, prints its pass/fail line and fails the test on error.
fn criterion(id: &str, name: &str, limit: Option<Duration>, f: impl FnOnce() -> Check) {
    let start = Instant::now();
    let outcome = match catch_unwind(AssertUnwindSafe(f)) {
        Ok(r) => r,
        Err(p) => Err(p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panic".into())),
    };
    let elapsed = start.elapsed();
    let outcome = match (outcome, limit) {
        (Ok(_), Some(l)) if elapsed > l => Err(format!("took {elapsed:.2?}, limit {l:?}")),
        (o, _) => o,
    };
    match &outcome {
        Ok(detail) => println!("[acceptance] {id} {name} ... PASS ({detail}; {elapsed:.2?})"),
        Err(why) => println!("[acceptance] {id} {name} ... FAIL ({why}; {elapsed:.2?})"),
    }
    if let Err(why) = outcome {
        panic!("{id} failed: {why}");
    }
}

#[test]
fn c01_oracle_correctness() {
    criterion("C01", "exhaustive search equals brute force", Some(Duration::from_secs(10)), || {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut checked = 0;
        for trial in 0..20u64 {
            // k = 10 must not exceed n
            let n = rng.gen_range(10..=50);
            let dim = rng.gen_range(1..=8);
            let ds = common::uniform(n, dim, 1000 + trial);
            let g = common::random_graph(&ds, rng.gen_range(0..8), 2000 + trial);
            let seeds: Vec<NodeId> = (0..n as NodeId).collect();
            let queries = common::uniform(5, dim, 3000 + trial);
            for q in queries.iter() {
                for k in [1, 5, 10] {
                    let params = SearchParams::new(k, f64::INFINITY);
                    let got = knn_search(&g, &ds, &seeds, q, &params).map_err(|e| e.to_string())?;
                    let want = brute_force_knn(&ds, q, k).map_err(|e| e.to_string())?;
                    ensure!(got.hits == want, "trial {trial} k {k}: {:?} vs {:?}", got.hits, want);
                    checked += 1;
                }
            }
        }
        Ok(format!("{checked} queries"))
    });
}

#[test]
fn c02_visited_set() {
    criterion("C02", "visited set matches a set oracle", Some(Duration::from_secs(5)), || {
        let range = 10_000_000u32;
        let mut set = VisitedSet::for_nodes(range as usize);
        let s = set.table_size() as u32;
        let mut oracle = BTreeSet::new();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut collisions = 0;
        for step in 0..1_000_000 {
            let id = if rng.gen_ratio(1, 4) {
                collisions += 1;
                rng.gen_range(0..4) + s * rng.gen_range(0..range / s)
            } else {
                rng.gen_range(0..range)
            };
            if rng.gen_bool(0.5) {
                set.mark(id);
                oracle.insert(id);
            } else {
                ensure!(set.is_marked(id) == oracle.contains(&id), "step {step}, id {id}");
            }
        }
        Ok(format!("table {s}, {collisions} chained ids"))
    });
}

#[test]
fn c03_transpose_identity() {
    criterion("C03", "adjusted(g, 0, k) is the transposed truncation", None, || {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for trial in 0..50u64 {
            let ds = common::uniform(rng.gen_range(1..60), 4, trial);
            let g = common::random_graph(&ds, 12, trial + 50);
            let k = rng.gen_range(0..10);
            ensure!(
                construct_adjusted_graph(&g, 0, k) == g.truncated(k).transpose(),
                "trial {trial}, k {k}"
            );
        }
        Ok("50 graphs".into())
    });
}

#[test]
fn c04_formulas() {
    criterion("C04", "hash size and edge limit formulas", None, || {
        for (n, want) in [(1, 32), (2048, 2048), (1_000_000, 32768)] {
            ensure!(hash_size(n, 11) == want, "hash_size({n}) = {}", hash_size(n, 11));
        }
        for (eps, want) in [(0.0, 31.0), (0.1, 130.0), (0.05, 40.0)] {
            let got = effective_edge_limit(eps, 30, 20.0);
            ensure!(got == want, "e_p({eps}) = {got}");
        }
        Ok("6 values".into())
    });
}

#[test]
fn c05_loss_integration() {
    criterion("C05", "loss integration", None, || {
        let range = TargetRange::default();
        let samples = |c: &dyn Fn(f64) -> f64| -> Vec<MeasurePoint> {
            (0..10)
                .map(|i| {
                    let p = 0.90 + 0.08 * i as f64 / 9.0;
                    MeasurePoint {
                        epsilon: i as f64,
                        precision: p,
                        mean_computations: c(p),
                    }
                })
                .collect()
        };
        let constant = integrate_log_computations(&samples(&|_| 100.0), range);
        ensure!(constant == 2.0, "constant C gave {constant}");
        // log10 C = 1 + 2p, mean over [0.90, 0.98] = 1 + 2 * 0.94
        let linear = integrate_log_computations(&samples(&|p| 10f64.powf(1.0 + 2.0 * p)), range);
        ensure!((linear - 2.88).abs() < 1e-6, "log-linear C gave {linear}");
        let eval = |eps: f64| {
            let p = eps.min(1.0);
            Ok(MeasurePoint {
                epsilon: eps,
                precision: p,
                mean_computations: 10f64.powf(p),
            })
        };
        let measured = loss(&eval, range, &OptimizerConfig::default()).map_err(|e| e.to_string())?.loss;
        ensure!((measured - 0.94).abs() < 1e-6, "searched loss {measured}");
        Ok(format!("constant {constant}, log-linear {linear:.9}, searched {measured:.9}"))
    });
}

#[test]
fn c06_hill_climbing() {
    criterion("C06", "hill climbing reaches the grid minimum", None, || {
        let tables: [fn(f64, f64) -> f64; 3] = [
            |x, y| (x - 3.0).powi(2) + (y - 6.0).powi(2),
            |x, y| 2.0 * (x - 8.0).powi(2) + 0.5 * (y - 1.0).powi(2) + 0.3 * (x - 8.0) * (y - 1.0),
            |x, y| (x - 9.0).abs() + (y - 9.0).abs(),
        ];
        for (t, f) in tables.iter().enumerate() {
            let at = |(x, y): (usize, usize)| f(x as f64, y as f64);
            let grid = (0..10).flat_map(|x| (0..10).map(move |y| (x, y)));
            let min = grid.min_by(|a, b| at(*a).total_cmp(&at(*b))).unwrap();
            for corner in [(0, 0), (0, 9), (9, 0), (9, 9)] {
                let out = hill_climb(corner, 1, 0, 9, |p| Ok((at(p), ()))).map_err(|e| e.to_string())?;
                ensure!(out.best.point == min, "table {t} from {corner:?}: {:?} vs {min:?}", out.best.point);
            }
        }
        Ok("3 tables x 4 corners".into())
    });
}

const DESK_N: usize = 10_000;
const DESK_DIM: usize = 32;
const DESK_KC: usize = 50;
const DESK_K: usize = 20;
const DESK_EPSILONS: [f64; 14] = [
    0.0, 0.01, 0.02, 0.03, 0.04, 0.05, 0.06, 0.08, 0.1, 0.15, 0.2, 0.3, 0.5, 1.0,
];

struct Desk {
    dataset: Dataset,
    adjusted: Graph,
    graph: Graph,
    eo: usize,
    ei: usize,
    anng_curve: EvalCurve,
    da_curve: EvalCurve,
    unbounded_curve: EvalCurve,
    built_in: Duration,
}

fn desk() -> &'static Desk {
    static DESK: OnceLock<Desk> = OnceLock::new();
    DESK.get_or_init(|| {
        let start = Instant::now();
        let dataset = common::uniform(DESK_N, DESK_DIM, 7);
        let training = common::uniform(100, DESK_DIM, 8);
        let queries = common::uniform(200, DESK_DIM, 9);
        let tree = VpTree::build(&dataset, 7).unwrap();
        let anng = construct_anng(&dataset, DESK_KC, 0.1, 7).unwrap();
        let aknng = construct_adjusted_graph(&anng, DESK_KC, 0);
        let dynamic = SearchConfig {
            k: DESK_K,
            edge_limit: EdgeLimit::Dynamic(DynamicDegree::default()),
            seeding: Seeding::Tree(&tree),
        };

        let training_truth = GroundTruth::compute(&dataset, &training, DESK_K).unwrap();
        let best = DegreeOptimizer {
            aknng: &aknng,
            kc: DESK_KC,
            dataset: &dataset,
            queries: &training,
            truth: &training_truth,
            search: dynamic,
            range: TargetRange::default(),
            config: OptimizerConfig::default(),
            constrained: false,
        }
        .run()
        .unwrap();
        let params = ConstructionParams {
            kc: DESK_KC,
            eo: best.eo,
            ei: best.ei,
            ..Default::default()
        };
        let (adjusted, graph) = adjust_from_aknng(&aknng, &params).unwrap();

        let truth = GroundTruth::compute(&dataset, &queries, DESK_K).unwrap();
        let run = |g: &Graph, limit: EdgeLimit, label: &str| {
            let config = SearchConfig {
                edge_limit: limit,
                ..dynamic
            };
            sweep(g, &dataset, &queries, &truth, &DESK_EPSILONS, &config, label).unwrap()
        };
        let anng_curve = run(&anng, EdgeLimit::Unbounded, "anng");
        let da_curve = run(&graph, EdgeLimit::Dynamic(DynamicDegree::default()), "da");
        let unbounded_curve = run(&graph, EdgeLimit::Unbounded, "da-unbounded");
        Desk {
            dataset,
            adjusted,
            graph,
            eo: best.eo,
            ei: best.ei,
            anng_curve,
            da_curve,
            unbounded_curve,
            built_in: start.elapsed(),
        }
    })
}

fn curve_summary(c: &EvalCurve) -> String {
    c.points
        .iter()
        .map(|p| format!("{}:{:.3}/{:.0}", p.epsilon, p.precision, p.mean_computations))
        .collect::<Vec<_>>()
        .join(" ")
}

#[test]
fn c07_desk_recall() {
    criterion("C07", "desk-scale recall and cost", Some(Duration::from_secs(600)), || {
        let d = desk();
        println!("[acceptance] C07 anng  {}", curve_summary(&d.anng_curve));
        println!("[acceptance] C07 da    {}", curve_summary(&d.da_curve));
        let reached = d
            .da_curve
            .points
            .iter()
            .find(|p| p.epsilon <= 1.0 && p.precision >= 0.95)
            .ok_or("recall 0.95 not reached for epsilon <= 1")?;
        let da = d.da_curve.computations_at(0.9).ok_or("da curve does not bracket 0.9")?;
        let anng = d.anng_curve.computations_reaching(0.9).ok_or("anng never reaches 0.9")?;
        ensure!(da < anng, "da {da:.1} vs anng {anng:.1} computations at recall 0.9");
        Ok(format!(
            "eo={} ei={}, recall {:.3} at eps {}, C(0.9) da {da:.0} vs anng {anng:.0}, built in {:.1?}",
            d.eo, d.ei, reached.precision, reached.epsilon, d.built_in
        ))
    });
}

#[test]
fn c08_path_adjustment() {
    criterion("C08", "path adjustment reduces outdegree", None, || {
        let d = desk();
        let before = d.adjusted.mean_outdegree();
        let after = d.graph.mean_outdegree();
        ensure!(d.graph == adjust_path(&d.adjusted), "graph is not the path-adjusted graph");
        for v in 0..d.dataset.len() as NodeId {
            ensure!(
                d.adjusted.neighbors(v).first() == d.graph.neighbors(v).first(),
                "node {v} lost its shortest edge"
            );
        }
        let reduction = 1.0 - after / before;
        ensure!(
            reduction >= 0.30,
            "mean outdegree {before:.2} -> {after:.2}, reduction {:.1}%",
            100.0 * reduction
        );
        Ok(format!("{before:.2} -> {after:.2} ({:.1}%)", 100.0 * reduction))
    });
}

#[test]
fn c09_dynamic_degree() {
    criterion("C09", "dynamic edge limit saves computations", None, || {
        let d = desk();
        println!("[acceptance] C09 unbounded {}", curve_summary(&d.unbounded_curve));
        let da = d.da_curve.computations_at(0.9).ok_or("da curve does not bracket 0.9")?;
        let unbounded = d
            .unbounded_curve
            .computations_at(0.9)
            .ok_or("unbounded curve does not bracket 0.9")?;
        ensure!(da < unbounded, "dynamic {da:.1} vs unbounded {unbounded:.1}");
        Ok(format!("C(0.9) dynamic {da:.0} vs unbounded {unbounded:.0}"))
    });
}

#[test]
fn c10_scaling() {
    criterion("C10", "sub-linear cost growth", Some(Duration::from_secs(900)), || {
        let base = common::uniform(16_000, DESK_DIM, 10);
        let queries = common::uniform(200, DESK_DIM, 11);
        let config = ScalingConfig {
            construction: ConstructionParams::default(),
            k: DESK_K,
            edge_limit: EdgeLimit::Dynamic(DynamicDegree::default()),
            target_recall: 0.9,
            tolerance: 0.005,
            rng_seed: 10,
        };
        let rows = scaling_study(&base, &queries, &[1000, 4000, 16_000], &config).map_err(|e| e.to_string())?;
        let detail: Vec<String> = rows
            .iter()
            .map(|r| format!("n={} eps={:.4} recall={:.3} C={:.0}", r.n, r.epsilon, r.precision, r.mean_computations))
            .collect();
        let ratio = rows[2].mean_computations / rows[0].mean_computations;
        ensure!(ratio < 8.0, "C(16k)/C(1k) = {ratio:.2}: {}", detail.join(", "));
        Ok(format!("ratio {ratio:.2}: {}", detail.join(", ")))
    });
}

#[test]
fn c11_constrained_adjustment() {
    criterion("C11", "constrained adjustment bounds", None, || {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..50u64 {
            let ds = common::uniform(rng.gen_range(1..80), 5, trial);
            let g = common::random_graph(&ds, 15, trial + 500);
            let eo = rng.gen_range(1..8);
            let ei = rng.gen_range(1..8);
            let phase = constrained_phase(&g, eo, ei);
            let indeg = phase.graph.indegrees();
            for v in 0..g.len() {
                ensure!(indeg[v] <= ei.max(1), "trial {trial}: indegree {} > {ei}", indeg[v]);
                let own = phase.graph.outdegree(v as NodeId) - phase.rescued[v];
                ensure!(own <= eo, "trial {trial}: outdegree {own} > {eo} without rescues");
            }
            let done = construct_adjusted_graph_with_constraint(&g, eo, ei).map_err(|e| e.to_string())?;
            for v in 0..g.len() as NodeId {
                ensure!(
                    done.outdegree(v) >= eo.min(g.outdegree(v)),
                    "trial {trial}: node {v} has {} edges",
                    done.outdegree(v)
                );
            }
        }
        Ok("50 inputs".into())
    });
}

#[test]
fn c12_persistence() {
    criterion("C12", "canonical persistence and corruption exit code", None, || {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let mut codes = Vec::new();
        for seed in 0..10u64 {
            let ds = common::uniform(50 + 20 * seed as usize, 4, seed);
            let g = construct_anng(&ds, 6, 0.1, seed).map_err(|e| e.to_string())?;
            let tree = VpTree::build(&ds, seed).map_err(|e| e.to_string())?;
            let mut first = Vec::new();
            write_index(&mut first, &g, &ds, Some(&tree)).map_err(|e| e.to_string())?;
            let idx = read_index(&first[..]).map_err(|e| e.to_string())?;
            ensure!(idx.graph == g && idx.dataset == ds, "seed {seed}: contents differ");
            let mut second = Vec::new();
            write_index(&mut second, &idx.graph, &idx.dataset, idx.tree.as_ref()).map_err(|e| e.to_string())?;
            ensure!(first == second, "seed {seed}: bytes differ");

            let mut bad = first.clone();
            let adjacency = 20 + ds.len() * 4 * 4;
            bad[adjacency + 4 + seed as usize] ^= 0x5a;
            let path = dir.path().join(format!("{seed}.onng"));
            std::fs::write(&path, &bad).map_err(|e| e.to_string())?;
            let out = Command::new(env!("CARGO_BIN_EXE_onng"))
                .args(["stats", "--index"])
                .arg(&path)
                .output()
                .map_err(|e| e.to_string())?;
            codes.push(out.status.code());
            ensure!(out.status.code() == Some(2), "seed {seed}: exit {:?}", out.status.code());
        }
        Ok(format!("10 indexes, exit codes {:?}", codes.iter().flatten().collect::<BTreeSet<_>>()))
    });
}

#[test]
fn c13_format_fixtures() {
    criterion("C13", "vector file fixtures", None, || {
        let f = read_fvecs(&[2, 0, 0, 0, 0x00, 0x00, 0x80, 0x3F, 0x00, 0x00, 0x00, 0x40][..]).map_err(|e| e.to_string())?;
        ensure!(f.dim == 2 && f.data == [1.0, 2.0], "fvecs {f:?}");
        let empty = read_fvecs(&[][..]).map_err(|e| e.to_string())?;
        ensure!(empty.is_empty(), "empty fvecs");
        ensure!(empty.into_dataset(onng::Metric::Euclidean).is_err(), "empty fvecs must not yield a dataset");
        let b = read_bvecs(&[2, 0, 0, 0, 3, 250, 2, 0, 0, 0, 255, 0][..]).map_err(|e| e.to_string())?;
        ensure!(b.data == [3.0, 250.0, 255.0, 0.0], "bvecs {b:?}");
        let i = read_ivecs(&[3, 0, 0, 0, 7, 0, 0, 0, 1, 0, 0, 0, 9, 0, 0, 0][..]).map_err(|e| e.to_string())?;
        ensure!(i == vec![vec![7, 1, 9]], "ivecs {i:?}");
        ensure!(read_ivecs(&[][..]).map_err(|e| e.to_string())?.is_empty(), "empty ivecs");
        Ok("fvecs, bvecs, ivecs".into())
    });
}

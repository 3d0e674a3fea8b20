use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use onng::bench::{self, GroundTruth, ScalingConfig};
use onng::construction::{self, ConstructionParams};
use onng::index::{self, Index};
use onng::optimizer::{self, DegreeOptimizer, OptimizerConfig, TargetRange};
use onng::search::{DynamicDegree, EdgeLimit, SearchConfig, Searcher, Seeding};
use onng::vecs;
use onng::{Dataset, Error, Metric, Result, VpTree};

#[derive(Parser)]
#[command(name = "onng", version, about = "Graph-based approximate k-nearest-neighbor search")]
struct Cli {
    /// Seed for every random choice (vp-tree pivots, search seeds, synthetic data).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build an ANNG index from a vector file.
    Build(BuildArgs),
    /// Degree and path adjustment of an ANNG index.
    Adjust(AdjustArgs),
    /// Search for the expected degrees minimizing the loss.
    Optimize(OptimizeArgs),
    /// Query an index.
    Search(SearchArgs),
    /// Exact ground truth by brute force.
    Gt(GtArgs),
    /// Precision and cost over a list of epsilons, as CSV.
    Bench(BenchArgs),
    /// Degree statistics of an index.
    Stats(StatsArgs),
    /// Cost at fixed recall over growing prefixes of a dataset.
    Scaling(ScalingArgs),
    /// Uniform random vectors in [0, 1).
    Synth(SynthArgs),
}

#[derive(Args)]
struct BuildArgs {
    /// Input vectors (.fvecs, .bvecs or .csv).
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "euclidean")]
    metric: Metric,
    /// Neighbors found per insertion.
    #[arg(long, default_value_t = 50)]
    kc: usize,
    #[arg(long, default_value_t = 0.1)]
    epsilon_c: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AdjustArgs {
    /// ANNG index produced by `build`.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 50)]
    kc: usize,
    #[arg(long, default_value_t = 10)]
    eo: usize,
    #[arg(long, default_value_t = 40)]
    ei: usize,
    #[arg(long)]
    constrained: bool,
    #[arg(long)]
    no_path_adjust: bool,
}

#[derive(Args)]
struct SearchFlags {
    #[arg(long, default_value_t = 20)]
    k: usize,
    /// Limit explored edges per node by e0 + 10^(we * epsilon).
    #[arg(long)]
    dynamic: bool,
    #[arg(long, default_value_t = 30)]
    e0: u32,
    #[arg(long, default_value_t = 20.0)]
    we: f64,
}

impl SearchFlags {
    fn edge_limit(&self) -> EdgeLimit {
        if self.dynamic {
            EdgeLimit::Dynamic(DynamicDegree {
                e0: self.e0,
                we: self.we,
            })
        } else {
            EdgeLimit::Unbounded
        }
    }

    fn config<'a>(&self, tree: &'a VpTree) -> SearchConfig<'a> {
        SearchConfig {
            k: self.k,
            edge_limit: self.edge_limit(),
            seeding: Seeding::Tree(tree),
        }
    }
}

#[derive(Args)]
struct OptimizeArgs {
    /// ANNG index produced by `build`.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    queries: PathBuf,
    /// Ground truth (.ivecs); computed by brute force when omitted.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long, default_value_t = 50)]
    kc: usize,
    #[arg(long, default_value_t = 0.90)]
    pl: f64,
    #[arg(long, default_value_t = 0.98)]
    pu: f64,
    #[arg(long, default_value_t = 5)]
    step: usize,
    #[arg(long)]
    constrained: bool,
    /// Write every evaluated (eo, ei) as CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Save the index adjusted with the chosen degrees.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    search: SearchFlags,
}

#[derive(Args)]
struct SearchArgs {
    #[arg(long)]
    index: PathBuf,
    #[arg(long)]
    queries: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    /// Write result ids as .ivecs instead of printing them.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    search: SearchFlags,
}

#[derive(Args)]
struct GtArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    queries: PathBuf,
    #[arg(long, default_value = "euclidean")]
    metric: Metric,
    #[arg(long, default_value_t = 100)]
    k: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    index: PathBuf,
    #[arg(long)]
    queries: PathBuf,
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Comma-separated epsilons.
    #[arg(long, value_delimiter = ',', default_value = "0,0.02,0.05,0.1,0.2,0.4")]
    epsilons: Vec<f64>,
    #[arg(long, default_value = "graph")]
    label: String,
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    search: SearchFlags,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long)]
    index: PathBuf,
}

#[derive(Args)]
struct ScalingArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    queries: PathBuf,
    #[arg(long, default_value = "euclidean")]
    metric: Metric,
    /// Comma-separated ascending prefix sizes.
    #[arg(long, value_delimiter = ',', required = true)]
    sizes: Vec<usize>,
    #[arg(long, default_value_t = 50)]
    kc: usize,
    #[arg(long, default_value_t = 10)]
    eo: usize,
    #[arg(long, default_value_t = 40)]
    ei: usize,
    #[arg(long)]
    constrained: bool,
    #[arg(long, default_value_t = 0.9)]
    recall: f64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    search: SearchFlags,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    dim: usize,
    #[arg(long)]
    out: PathBuf,
}

fn load_vectors(path: &Path, metric: Metric) -> Result<Dataset> {
    vecs::read_vectors_file(path)?.into_dataset(metric)
}

fn load_truth(path: Option<&Path>, dataset: &Dataset, queries: &Dataset, k: usize) -> Result<GroundTruth> {
    match path {
        Some(p) => GroundTruth::from_ids(dataset, queries, &vecs::read_ivecs_file(p)?),
        None => GroundTruth::compute(dataset, queries, k),
    }
}

fn require_tree(idx: &Index) -> Result<&VpTree> {
    idx.tree
        .as_ref()
        .ok_or_else(|| Error::Format("index has no vp-tree block".into()))
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn run(cli: Cli) -> Result<()> {
    let seed = cli.seed;
    match cli.command {
        Command::Build(a) => {
            let dataset = load_vectors(&a.data, a.metric)?;
            let anng = construction::construct_anng(&dataset, a.kc, a.epsilon_c, seed)?;
            let tree = VpTree::build(&dataset, seed)?;
            index::save_index(&a.out, &anng, &dataset, Some(&tree))?;
            println!(
                "built {} nodes, {} edges, mean outdegree {:.2}",
                anng.len(),
                anng.edge_count(),
                anng.mean_outdegree()
            );
        }
        Command::Adjust(a) => {
            let idx = index::load_index(&a.input)?;
            let params = ConstructionParams {
                kc: a.kc,
                eo: a.eo,
                ei: a.ei,
                constrained: a.constrained,
                path_adjustment: !a.no_path_adjust,
                ..Default::default()
            };
            let pipeline = construction::construct_graph(&idx.graph, &params)?;
            let tree = match idx.tree {
                Some(t) => t,
                None => VpTree::build(&idx.dataset, seed)?,
            };
            index::save_index(&a.out, &pipeline.graph, &idx.dataset, Some(&tree))?;
            println!(
                "mean outdegree: aknng {:.2}, adjusted {:.2}, final {:.2}",
                pipeline.aknng.mean_outdegree(),
                pipeline.adjusted.mean_outdegree(),
                pipeline.graph.mean_outdegree()
            );
        }
        Command::Optimize(a) => {
            let idx = index::load_index(&a.input)?;
            let tree = require_tree(&idx)?;
            let queries = load_vectors(&a.queries, idx.dataset.metric())?;
            let truth = load_truth(a.truth.as_deref(), &idx.dataset, &queries, a.search.k)?;
            let aknng = construction::construct_adjusted_graph(&idx.graph, a.kc, 0);
            let opt = DegreeOptimizer {
                aknng: &aknng,
                kc: a.kc,
                dataset: &idx.dataset,
                queries: &queries,
                truth: &truth,
                search: a.search.config(tree),
                range: TargetRange::new(a.pl, a.pu)?,
                config: OptimizerConfig {
                    step: a.step,
                    ..Default::default()
                },
                constrained: a.constrained,
            };
            let best = opt.run()?;
            if let Some(p) = &a.trace {
                let mut w = BufWriter::new(File::create(p)?);
                optimizer::write_trace_csv(&mut w, &best.trace)?;
                w.flush()?;
            }
            println!("eo={} ei={} loss={:.6}", best.eo, best.ei, best.loss);
            if let Some(p) = &a.out {
                let params = ConstructionParams {
                    kc: a.kc,
                    eo: best.eo,
                    ei: best.ei,
                    constrained: a.constrained,
                    ..Default::default()
                };
                let pipeline = construction::construct_graph(&idx.graph, &params)?;
                index::save_index(p, &pipeline.graph, &idx.dataset, Some(tree))?;
            }
        }
        Command::Search(a) => {
            let idx = index::load_index(&a.index)?;
            let tree = require_tree(&idx)?;
            let queries = load_vectors(&a.queries, idx.dataset.metric())?;
            let config = a.search.config(tree);
            let mut searcher = Searcher::new(idx.graph.len());
            let mut lists = Vec::with_capacity(queries.len());
            let mut out = output(None)?;
            for (i, q) in queries.iter().enumerate() {
                let res = searcher.query(&idx.graph, &idx.dataset, q, i as u64, a.epsilon, &config)?;
                if a.out.is_none() {
                    let hits: Vec<String> = res.hits.iter().map(|h| format!("{}:{:.6}", h.id, h.distance)).collect();
                    writeln!(out, "{i}\t{}\t{}", res.distance_computations, hits.join(" "))?;
                }
                lists.push(res.hits.iter().map(|h| h.id).collect::<Vec<_>>());
            }
            out.flush()?;
            if let Some(p) = &a.out {
                vecs::write_ivecs_file(p, &lists)?;
            }
        }
        Command::Gt(a) => {
            let dataset = load_vectors(&a.data, a.metric)?;
            let queries = load_vectors(&a.queries, a.metric)?;
            let truth = GroundTruth::compute(&dataset, &queries, a.k)?;
            vecs::write_ivecs_file(&a.out, &truth.ids())?;
        }
        Command::Bench(a) => {
            let idx = index::load_index(&a.index)?;
            let tree = require_tree(&idx)?;
            let queries = load_vectors(&a.queries, idx.dataset.metric())?;
            let truth = load_truth(a.truth.as_deref(), &idx.dataset, &queries, a.search.k)?;
            let curve = bench::sweep(
                &idx.graph,
                &idx.dataset,
                &queries,
                &truth,
                &a.epsilons,
                &a.search.config(tree),
                &a.label,
            )?;
            let mut out = output(a.out.as_deref())?;
            bench::write_curves_csv(&mut out, &[curve])?;
            out.flush()?;
        }
        Command::Stats(a) => {
            let idx = index::load_index(&a.index)?;
            let s = idx.graph.stats()?;
            println!("nodes                      {}", idx.graph.len());
            println!("edges                      {}", idx.graph.edge_count());
            println!("mean outdegree             {:.3}", s.mean_outdegree);
            println!("mean top-5% outdegree      {:.3}", s.mean_top5_outdegree);
            println!("mean bottom-5% indegree    {:.3}", s.mean_bottom5_indegree);
            println!("mean indegree distance     {:.6}", s.mean_indegree_distance);
            println!(
                "estimated memory bytes     {}",
                bench::estimate_memory_bytes(&idx.graph, &idx.dataset)
            );
        }
        Command::Scaling(a) => {
            let base = load_vectors(&a.data, a.metric)?;
            let queries = load_vectors(&a.queries, a.metric)?;
            let config = ScalingConfig {
                construction: ConstructionParams {
                    kc: a.kc,
                    eo: a.eo,
                    ei: a.ei,
                    constrained: a.constrained,
                    ..Default::default()
                },
                k: a.search.k,
                edge_limit: a.search.edge_limit(),
                target_recall: a.recall,
                tolerance: OptimizerConfig::default().binary_search_tol,
                rng_seed: seed,
            };
            let rows = bench::scaling_study(&base, &queries, &a.sizes, &config)?;
            let mut out = output(a.out.as_deref())?;
            bench::write_scaling_csv(&mut out, &rows)?;
            out.flush()?;
        }
        Command::Synth(a) => {
            if a.dim == 0 {
                return Err(Error::ZeroDimension);
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let data: Vec<f32> = (0..a.n * a.dim).map(|_| rng.gen::<f32>()).collect();
            vecs::write_fvecs_file(&a.out, a.dim, &data)?;
        }
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::PrecisionUnreachable { .. } => 3,
        e if e.is_input_error() => 2,
        _ => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

//! Expected-degree optimization.
//!
//! The loss of a graph is the mean of `log10` of the distance-computation
//! count over a target precision range `[pl, pu]`. It is estimated from real
//! searches: epsilons reaching `pl` and `pu` are located by bisection, the
//! epsilon interval between them is sampled at evenly spaced points, and the
//! measured `(precision, log10 computations)` pairs are integrated with the
//! trapezoidal rule. Hill climbing over `(eo, ei)` minimizes the loss.

use std::collections::HashMap;
use std::io::Write;

use rayon::prelude::*;

use crate::bench::{recall, GroundTruth};
use crate::construction::{adjust_from_aknng, ConstructionParams};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::search::{SearchConfig, Searcher};

/// Largest epsilon tried before a target precision is declared unreachable.
pub const MAX_EPSILON: f64 = 10.0;
const INITIAL_EPSILON: f64 = 0.1;
const MAX_BISECTIONS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetRange {
    pub lower: f64,
    pub upper: f64,
}

impl Default for TargetRange {
    fn default() -> Self {
        TargetRange {
            lower: 0.90,
            upper: 0.98,
        }
    }
}

impl TargetRange {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        let r = TargetRange { lower, upper };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        if 0.0 < self.lower && self.lower < self.upper && self.upper < 1.0 {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "precision range [{}, {}] must satisfy 0 < pl < pu < 1",
                self.lower, self.upper
            )))
        }
    }
}

/// Precision and mean distance computations measured at one epsilon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurePoint {
    pub epsilon: f64,
    pub precision: f64,
    pub mean_computations: f64,
}

/// Anything that can run a query batch at a given epsilon.
pub trait Evaluator: Sync {
    fn measure(&self, epsilon: f64) -> Result<MeasurePoint>;
}

impl<F> Evaluator for F
where
    F: Fn(f64) -> Result<MeasurePoint> + Sync,
{
    fn measure(&self, epsilon: f64) -> Result<MeasurePoint> {
        self(epsilon)
    }
}

/// Runs a query batch against a graph.
pub struct GraphEvaluator<'a> {
    pub graph: &'a Graph,
    pub dataset: &'a Dataset,
    pub queries: &'a Dataset,
    pub truth: &'a GroundTruth,
    pub search: SearchConfig<'a>,
}

impl Evaluator for GraphEvaluator<'_> {
    fn measure(&self, epsilon: f64) -> Result<MeasurePoint> {
        measure(
            self.graph,
            self.dataset,
            self.queries,
            self.truth,
            epsilon,
            &self.search,
        )
    }
}

/// Mean precision and mean distance computations over a query batch.
/// Queries run in parallel; results are reduced in query order.
pub fn measure(
    graph: &Graph,
    dataset: &Dataset,
    queries: &Dataset,
    truth: &GroundTruth,
    epsilon: f64,
    search: &SearchConfig<'_>,
) -> Result<MeasurePoint> {
    if queries.is_empty() {
        return Err(Error::EmptyQueries);
    }
    if truth.len() != queries.len() {
        return Err(Error::InvalidParameter(format!(
            "{} queries but {} ground-truth lists",
            queries.len(),
            truth.len()
        )));
    }
    let per_query: Vec<(f64, usize)> = (0..queries.len())
        .into_par_iter()
        .map_init(
            || Searcher::new(graph.len()),
            |searcher, i| {
                let q = queries.vector(i as u32);
                let res = searcher.query(graph, dataset, q, i as u64, epsilon, search)?;
                Ok((
                    recall(&res.hits, truth.list(i), search.k),
                    res.distance_computations,
                ))
            },
        )
        .collect::<Result<_>>()?;
    let n = per_query.len() as f64;
    Ok(MeasurePoint {
        epsilon,
        precision: per_query.iter().map(|p| p.0).sum::<f64>() / n,
        mean_computations: per_query.iter().map(|p| p.1 as f64).sum::<f64>() / n,
    })
}

/// Which side of the target the located precision must fall on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Endpoint {
    /// `target - tol < p <= target`
    Lower,
    /// `target <= p < target + tol`
    Upper,
}

impl Endpoint {
    fn accepts(self, p: f64, target: f64, tol: f64) -> bool {
        match self {
            Endpoint::Lower => target - tol < p && p <= target,
            Endpoint::Upper => target <= p && p < target + tol,
        }
    }
}

/// Finds an epsilon whose measured precision lands within `tol` of `target`
/// on the requested side, by doubling an upper bracket from 0.1 and then
/// bisecting. Returns epsilon 0 when precision at 0 already reaches the
/// target.
pub fn epsilon_for_precision<E: Evaluator + ?Sized>(
    eval: &E,
    target: f64,
    tol: f64,
    side: Endpoint,
) -> Result<MeasurePoint> {
    let mut lo = eval.measure(0.0)?;
    if lo.precision >= target {
        return Ok(lo);
    }
    if side.accepts(lo.precision, target, tol) {
        return Ok(lo);
    }
    let mut hi_eps = INITIAL_EPSILON;
    let mut hi = eval.measure(hi_eps)?;
    let mut best = hi;
    while hi.precision < target {
        lo = hi;
        hi_eps *= 2.0;
        if hi_eps > MAX_EPSILON {
            return Err(Error::PrecisionUnreachable {
                target,
                best: best.precision,
                epsilon: best.epsilon,
            });
        }
        hi = eval.measure(hi_eps)?;
        if hi.precision > best.precision {
            best = hi;
        }
    }
    for candidate in [hi, lo] {
        if side.accepts(candidate.precision, target, tol) {
            return Ok(candidate);
        }
    }
    for _ in 0..MAX_BISECTIONS {
        if hi.epsilon - lo.epsilon <= 1e-12 * hi.epsilon.max(1.0) {
            break;
        }
        let mid = eval.measure(0.5 * (lo.epsilon + hi.epsilon))?;
        if side.accepts(mid.precision, target, tol) {
            return Ok(mid);
        }
        if mid.precision < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(match side {
        Endpoint::Lower => lo,
        Endpoint::Upper => hi,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    /// Hill-climbing step on both degree axes.
    pub step: usize,
    pub binary_search_tol: f64,
    /// Number of epsilon samples between the two endpoints, inclusive.
    pub n_samples: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            step: 5,
            binary_search_tol: 0.005,
            n_samples: 10,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.step == 0 || self.n_samples < 2 || !(self.binary_search_tol > 0.0) {
            return Err(Error::InvalidParameter(
                "optimizer needs step >= 1, n_samples >= 2 and a positive tolerance".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossReport {
    pub loss: f64,
    pub epsilon_lower: f64,
    pub epsilon_upper: f64,
    pub points: Vec<MeasurePoint>,
}

/// Mean of `log10` distance computations over the target precision range.
pub fn loss<E: Evaluator + ?Sized>(eval: &E, range: TargetRange, cfg: &OptimizerConfig) -> Result<LossReport> {
    range.validate()?;
    cfg.validate()?;
    let tol = cfg.binary_search_tol;
    let lower = epsilon_for_precision(eval, range.lower, tol, Endpoint::Lower)?;
    let upper = epsilon_for_precision(eval, range.upper, tol, Endpoint::Upper)?;
    let (a, b) = if lower.epsilon <= upper.epsilon {
        (lower, upper)
    } else {
        (upper, lower)
    };
    let n = cfg.n_samples;
    let mut points = Vec::with_capacity(n);
    points.push(a);
    for i in 1..n - 1 {
        let eps = a.epsilon + (b.epsilon - a.epsilon) * i as f64 / (n - 1) as f64;
        points.push(eval.measure(eps)?);
    }
    points.push(b);
    Ok(LossReport {
        loss: integrate_log_computations(&points, range),
        epsilon_lower: a.epsilon,
        epsilon_upper: b.epsilon,
        points,
    })
}

/// Trapezoidal mean of `log10(mean_computations)` against precision.
///
/// Samples are sorted by precision and samples sharing a precision are
/// merged by averaging. The piecewise-linear interpolant is integrated over
/// the part of `[range.lower, range.upper]` the samples cover, and divided by
/// the covered width, which equals `pu - pl` whenever the samples bracket the
/// range. Without any covered width the plain mean of the samples is used.
pub fn integrate_log_computations(points: &[MeasurePoint], range: TargetRange) -> f64 {
    let mut samples: Vec<(f64, f64)> = points
        .iter()
        .map(|p| (p.precision, p.mean_computations.max(1.0).log10()))
        .collect();
    samples.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut merged: Vec<(f64, f64, usize)> = Vec::with_capacity(samples.len());
    for (p, y) in samples {
        match merged.last_mut() {
            Some(last) if last.0 == p => {
                last.1 += y;
                last.2 += 1;
            }
            _ => merged.push((p, y, 1)),
        }
    }
    let merged: Vec<(f64, f64)> = merged.into_iter().map(|(p, s, c)| (p, s / c as f64)).collect();
    if merged.is_empty() {
        return f64::NAN;
    }

    let mut area = 0.0;
    let mut width = 0.0;
    for w in merged.windows(2) {
        let (x0, y0) = w[0];
        let (x1, y1) = w[1];
        let lo = x0.max(range.lower);
        let hi = x1.min(range.upper);
        if hi <= lo {
            continue;
        }
        let at = |x: f64| y0 + (y1 - y0) * (x - x0) / (x1 - x0);
        area += (hi - lo) * (at(lo) + at(hi)) / 2.0;
        width += hi - lo;
    }
    if width > 0.0 {
        area / width
    } else {
        merged.iter().map(|m| m.1).sum::<f64>() / merged.len() as f64
    }
}

/// One evaluated grid point of a hill climb.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluated<T> {
    pub point: (usize, usize),
    pub loss: f64,
    pub detail: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClimbOutcome<T> {
    pub best: Evaluated<T>,
    /// Every evaluated point, in evaluation order.
    pub trace: Vec<Evaluated<T>>,
}

/// Axis-aligned hill climbing on the grid `{lo, lo+step, ...} ∩ [lo, hi]` in
/// both coordinates. Each point is evaluated at most once; the four
/// neighbors of the current point are evaluated in parallel. Moves go to the
/// best strictly improving neighbor. Infinite loss marks an infeasible point.
pub fn hill_climb<T, F>(
    start: (usize, usize),
    step: usize,
    lo: usize,
    hi: usize,
    evaluate: F,
) -> Result<ClimbOutcome<T>>
where
    T: Clone + Send,
    F: Fn((usize, usize)) -> Result<(f64, T)> + Sync,
{
    if step == 0 || lo > hi {
        return Err(Error::InvalidParameter("empty hill-climbing grid".into()));
    }
    let snap = |v: usize| {
        let v = v.clamp(lo, hi);
        lo + (v - lo) / step * step
    };
    let mut current = (snap(start.0), snap(start.1));
    let mut cache: HashMap<(usize, usize), usize> = HashMap::new();
    let mut trace: Vec<Evaluated<T>> = Vec::new();

    let (loss, detail) = evaluate(current)?;
    cache.insert(current, 0);
    trace.push(Evaluated {
        point: current,
        loss,
        detail,
    });

    loop {
        let (x, y) = current;
        let mut neighbors = Vec::with_capacity(4);
        if x >= lo + step {
            neighbors.push((x - step, y));
        }
        if x + step <= hi {
            neighbors.push((x + step, y));
        }
        if y >= lo + step {
            neighbors.push((x, y - step));
        }
        if y + step <= hi {
            neighbors.push((x, y + step));
        }
        let fresh: Vec<(usize, usize)> = neighbors
            .iter()
            .copied()
            .filter(|p| !cache.contains_key(p))
            .collect();
        let results: Vec<(f64, T)> = fresh.par_iter().map(|&p| evaluate(p)).collect::<Result<_>>()?;
        for (p, (loss, detail)) in fresh.into_iter().zip(results) {
            cache.insert(p, trace.len());
            trace.push(Evaluated {
                point: p,
                loss,
                detail,
            });
        }

        let here = trace[cache[&current]].loss;
        let best = neighbors
            .iter()
            .map(|p| (*p, trace[cache[p]].loss))
            .fold(None::<((usize, usize), f64)>, |acc, c| match acc {
                Some(a) if a.1 <= c.1 => Some(a),
                _ => Some(c),
            });
        match best {
            Some((p, l)) if l < here => current = p,
            _ => break,
        }
    }

    let best = trace[cache[&current]].clone();
    if best.loss.is_infinite() {
        return Err(Error::PrecisionUnreachable {
            target: f64::NAN,
            best: f64::NAN,
            epsilon: f64::NAN,
        });
    }
    Ok(ClimbOutcome { best, trace })
}

/// Inputs for choosing `(eo, ei)` on a fixed approximate k-NN graph.
pub struct DegreeOptimizer<'a> {
    pub aknng: &'a Graph,
    pub kc: usize,
    pub dataset: &'a Dataset,
    pub queries: &'a Dataset,
    pub truth: &'a GroundTruth,
    pub search: SearchConfig<'a>,
    pub range: TargetRange,
    pub config: OptimizerConfig,
    pub constrained: bool,
}

/// Row of the optimization trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub eo: usize,
    pub ei: usize,
    pub loss: f64,
    pub epsilon_lower: f64,
    pub epsilon_upper: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Optimum {
    pub eo: usize,
    pub ei: usize,
    pub loss: f64,
    pub trace: Vec<TraceRecord>,
}

impl DegreeOptimizer<'_> {
    /// Loss of the graph built with `(eo, ei)`; `None` when the target range
    /// is unreachable.
    pub fn evaluate(&self, eo: usize, ei: usize) -> Result<Option<LossReport>> {
        let params = ConstructionParams {
            kc: self.kc,
            eo,
            ei,
            constrained: self.constrained,
            path_adjustment: true,
            ..Default::default()
        };
        params.validate()?;
        let (_, graph) = adjust_from_aknng(self.aknng, &params)?;
        let eval = GraphEvaluator {
            graph: &graph,
            dataset: self.dataset,
            queries: self.queries,
            truth: self.truth,
            search: self.search,
        };
        match loss(&eval, self.range, &self.config) {
            Ok(report) => Ok(Some(report)),
            Err(Error::PrecisionUnreachable { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    }

    pub fn run(&self) -> Result<Optimum> {
        self.config.validate()?;
        self.range.validate()?;
        let step = self.config.step;
        if self.kc < 2 * step {
            return Err(Error::InvalidParameter(format!(
                "kc ({}) leaves no grid for step {step}",
                self.kc
            )));
        }
        let outcome = hill_climb((2 * step, 2 * step), step, step, self.kc - step, |(eo, ei)| {
            Ok(match self.evaluate(eo, ei)? {
                Some(r) => (r.loss, Some((r.epsilon_lower, r.epsilon_upper))),
                None => (f64::INFINITY, None),
            })
        })?;
        let trace = outcome
            .trace
            .iter()
            .map(|e| TraceRecord {
                eo: e.point.0,
                ei: e.point.1,
                loss: e.loss,
                epsilon_lower: e.detail.map_or(f64::NAN, |d| d.0),
                epsilon_upper: e.detail.map_or(f64::NAN, |d| d.1),
            })
            .collect();
        Ok(Optimum {
            eo: outcome.best.point.0,
            ei: outcome.best.point.1,
            loss: outcome.best.loss,
            trace,
        })
    }
}

/// Writes `eo,ei,loss,epsilon_lower,epsilon_upper` rows with a header.
pub fn write_trace_csv<W: Write>(mut w: W, trace: &[TraceRecord]) -> Result<()> {
    writeln!(w, "eo,ei,loss,epsilon_lower,epsilon_upper")?;
    for r in trace {
        writeln!(
            w,
            "{},{},{},{},{}",
            r.eo, r.ei, r.loss, r.epsilon_lower, r.epsilon_upper
        )?;
    }
    Ok(())
}

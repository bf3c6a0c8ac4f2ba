//! Per-feature relevance of a classifier's decision.
//!
//! A query fixes every feature of a pattern except one, inverts the chosen
//! output's target interval over that feature's range with [`sivia`], and
//! splits the range into active (A), inactive (I) and undefined (U)
//! segments. The relevance score is `1 - μ_A / μ_k` when some values are
//! active, and otherwise the Heaviside step of the undefined length: 1 when
//! undecided slivers remain (rule R1), 0 when the whole range is inactive
//! (rule R2).

use std::fmt::{self, Write as _};

use rayon::prelude::*;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::interval::{Interval, IvBox};
use crate::mlp::MlpModel;
use crate::sivia::{fmt_real, sivia, BoxLabel, SiviaStats};

/// How the target interval of an output is formed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputMode {
    /// `[center - radius, center + radius]`, clipped to the activation range.
    AsPredicted,
    /// `[1 - radius, 1]`, the interval a correct decision should reach.
    Desired,
    /// `[center, 1]`: at least the observed activation.
    AtLeast,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OutputSpec {
    pub node: usize,
    pub center: f64,
    pub radius: f64,
    pub mode: OutputMode,
}

impl OutputSpec {
    pub fn as_predicted(node: usize, center: f64, radius: f64) -> Self {
        OutputSpec {
            node,
            center,
            radius,
            mode: OutputMode::AsPredicted,
        }
    }

    pub fn desired(node: usize, radius: f64) -> Self {
        OutputSpec {
            node,
            center: 1.0,
            radius,
            mode: OutputMode::Desired,
        }
    }

    /// Target `[0, radius]` for an output that should stay inactive.
    pub fn inactive(node: usize, radius: f64) -> Self {
        Self::as_predicted(node, 0.0, radius)
    }

    pub fn at_least(node: usize, value: f64) -> Self {
        OutputSpec {
            node,
            center: value,
            radius: 0.0,
            mode: OutputMode::AtLeast,
        }
    }

    /// Target interval given the output activation's range.
    pub fn target(&self, range: Option<Interval>) -> Result<Interval> {
        if !(self.radius >= 0.0 && self.radius.is_finite() && self.center.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "output interval needs a finite center and radius >= 0 (got {}, {})",
                self.center, self.radius
            )));
        }
        let raw = match self.mode {
            OutputMode::AsPredicted => {
                Interval::new(self.center - self.radius, self.center + self.radius)?
            }
            OutputMode::Desired => Interval::new(1.0 - self.radius, 1.0)?,
            OutputMode::AtLeast => Interval::new(self.center.min(1.0), 1.0)?,
        };
        match range {
            Some(r) => raw.intersection(&r).ok_or_else(|| {
                Error::InvalidConfig(format!("output interval {raw} lies outside the range {r}"))
            }),
            None => Ok(raw),
        }
    }
}

/// One relevance query: feature `feature` of `pattern` ranges over
/// `feature_range`, all other features stay fixed.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureQuery {
    pub pattern: Vec<f64>,
    pub feature: usize,
    pub spec: OutputSpec,
    pub eps: f64,
    pub feature_range: Interval,
}

impl FeatureQuery {
    /// The input box: degenerate everywhere except the queried feature.
    pub fn input_box(&self) -> IvBox {
        let mut comps: Vec<Interval> = self
            .pattern
            .iter()
            .map(|&v| Interval::point(v).expect("validated pattern"))
            .collect();
        comps[self.feature] = self.feature_range;
        IvBox::new(comps).expect("non-empty pattern")
    }
}

/// Validate and assemble a query over the default feature range `[-1, 1]`.
pub fn build_query(
    model: &MlpModel,
    pattern: &[f64],
    feature: usize,
    spec: OutputSpec,
    eps: f64,
) -> Result<FeatureQuery> {
    build_query_in(model, pattern, feature, spec, eps, Interval::SYMMETRIC_UNIT)
}

pub fn build_query_in(
    model: &MlpModel,
    pattern: &[f64],
    feature: usize,
    spec: OutputSpec,
    eps: f64,
    feature_range: Interval,
) -> Result<FeatureQuery> {
    if pattern.len() != model.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: model.input_dim(),
            found: pattern.len(),
        });
    }
    if feature >= pattern.len() {
        return Err(Error::IndexOutOfRange {
            what: "feature",
            index: feature,
            limit: pattern.len(),
        });
    }
    if spec.node >= model.output_dim() {
        return Err(Error::IndexOutOfRange {
            what: "output node",
            index: spec.node,
            limit: model.output_dim(),
        });
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidConfig(format!("eps must be positive, got {eps}")));
    }
    if let Some(v) = pattern.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidConfig(format!("non-finite feature value {v}")));
    }
    spec.target(model.output_activation().range())?;
    Ok(FeatureQuery {
        pattern: pattern.to_vec(),
        feature,
        spec,
        eps,
        feature_range,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Family {
    Active,
    Inactive,
    Undefined,
}

impl Family {
    pub fn letter(self) -> char {
        match self {
            Family::Active => 'A',
            Family::Inactive => 'I',
            Family::Undefined => 'U',
        }
    }

    fn from_label(label: BoxLabel) -> Self {
        match label {
            BoxLabel::Feasible => Family::Active,
            BoxLabel::Infeasible => Family::Inactive,
            BoxLabel::Undefined => Family::Undefined,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Segment {
    pub interval: Interval,
    pub family: Family,
}

/// Sorted, disjoint segments tiling the queried feature range.
#[derive(Clone, Debug, PartialEq)]
pub struct FeaturePartition {
    pub segments: Vec<Segment>,
    pub query: FeatureQuery,
    pub target: Interval,
    pub stats: SiviaStats,
}

impl FeaturePartition {
    fn measure_of(&self, family: Family) -> f64 {
        self.segments
            .iter()
            .filter(|s| s.family == family)
            .map(|s| s.interval.width())
            .sum()
    }

    pub fn mu_active(&self) -> f64 {
        self.measure_of(Family::Active)
    }

    pub fn mu_inactive(&self) -> f64 {
        self.measure_of(Family::Inactive)
    }

    pub fn mu_undefined(&self) -> f64 {
        self.measure_of(Family::Undefined)
    }

    pub fn mu_range(&self) -> f64 {
        self.query.feature_range.width()
    }

    /// Family of the segment containing `t` (the left segment at shared
    /// endpoints).
    pub fn family_at(&self, t: f64) -> Option<Family> {
        self.segments
            .iter()
            .find(|s| s.interval.contains(t))
            .map(|s| s.family)
    }
}

/// Sort, drop zero-width pieces and merge touching pieces of one family.
fn merge_segments(mut pieces: Vec<Segment>) -> Vec<Segment> {
    pieces.retain(|s| s.interval.width() > 0.0);
    pieces.sort_by(|a, b| a.interval.lo().total_cmp(&b.interval.lo()));
    let mut merged: Vec<Segment> = Vec::with_capacity(pieces.len());
    for s in pieces {
        match merged.last_mut() {
            Some(last) if last.family == s.family && last.interval.hi() == s.interval.lo() => {
                last.interval = last.interval.hull(&s.interval);
            }
            _ => merged.push(s),
        }
    }
    merged
}

/// Run set inversion on the one-dimensional slice of a query.
pub fn query_feature(model: &MlpModel, query: &FeatureQuery) -> Result<FeaturePartition> {
    let target = query.spec.target(model.output_activation().range())?;
    let slice = model.slice(&query.pattern, query.feature)?;
    let node = query.spec.node;
    let inclusion = |bx: &IvBox| -> Result<IvBox> {
        IvBox::new(vec![slice.eval(bx[0], node)])
    };
    let x0 = IvBox::new(vec![query.feature_range])?;
    let (paving, stats) = sivia(&inclusion, &IvBox::new(vec![target])?, query.eps, &x0)?;
    let pieces = paving
        .labeled()
        .map(|(label, bx)| Segment {
            interval: bx[0],
            family: Family::from_label(label),
        })
        .collect();
    Ok(FeaturePartition {
        segments: merge_segments(pieces),
        query: query.clone(),
        target,
        stats,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Rule {
    /// `1 - μ_A / μ_k`
    Formula,
    /// No active values but undefined slivers: relevance 1.
    R1,
    /// Entirely inactive: relevance 0.
    R2,
}

impl Rule {
    pub fn name(self) -> &'static str {
        match self {
            Rule::Formula => "formula",
            Rule::R1 => "R1",
            Rule::R2 => "R2",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RelevanceScore {
    pub value: f64,
    pub mu_active: f64,
    pub mu_undefined: f64,
    pub mu_range: f64,
    pub rule: Rule,
}

impl RelevanceScore {
    pub fn from_measures(mu_active: f64, mu_undefined: f64, mu_range: f64) -> Self {
        let (value, rule) = if mu_active > 0.0 {
            ((1.0 - mu_active / mu_range).clamp(0.0, 1.0), Rule::Formula)
        } else if heaviside(mu_undefined) == 1.0 {
            (1.0, Rule::R1)
        } else {
            (0.0, Rule::R2)
        };
        RelevanceScore {
            value,
            mu_active,
            mu_undefined,
            mu_range,
            rule,
        }
    }
}

fn heaviside(z: f64) -> f64 {
    if z > 0.0 {
        1.0
    } else {
        0.0
    }
}

pub fn relevance_score(partition: &FeaturePartition) -> RelevanceScore {
    RelevanceScore::from_measures(
        partition.mu_active(),
        partition.mu_undefined(),
        partition.mu_range(),
    )
}

/// Partition and score for one feature of one pattern.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureRelevance {
    pub partition: FeaturePartition,
    pub score: RelevanceScore,
}

/// Query every feature of a pattern.
pub fn pattern_relevance(
    model: &MlpModel,
    pattern: &[f64],
    spec: OutputSpec,
    eps: f64,
) -> Result<Vec<FeatureRelevance>> {
    (0..pattern.len())
        .into_par_iter()
        .map(|k| feature_relevance(model, pattern, k, spec, eps))
        .collect()
}

pub fn feature_relevance(
    model: &MlpModel,
    pattern: &[f64],
    feature: usize,
    spec: OutputSpec,
    eps: f64,
) -> Result<FeatureRelevance> {
    let query = build_query(model, pattern, feature, spec, eps)?;
    let partition = query_feature(model, &query)?;
    let score = relevance_score(&partition);
    Ok(FeatureRelevance { partition, score })
}

#[derive(Clone, Debug, PartialEq)]
pub struct RelevanceRow {
    /// Zero-based row of the pattern in its dataset.
    pub pattern_index: usize,
    pub features: Vec<FeatureRelevance>,
}

/// Relevance of every feature for every pattern of one class, in dataset
/// order.
#[derive(Clone, Debug, PartialEq)]
pub struct RelevanceMap {
    pub class: usize,
    pub spec: OutputSpec,
    pub eps: f64,
    pub rows: Vec<RelevanceRow>,
}

impl RelevanceMap {
    pub fn feature_count(&self) -> usize {
        self.rows.first().map_or(0, |r| r.features.len())
    }

    /// Mean score of feature `k` over the rows accepted by `keep`.
    pub fn mean_score(&self, k: usize, keep: impl Fn(&RelevanceRow) -> bool) -> Option<f64> {
        let scores: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| keep(r))
            .map(|r| r.features[k].score.value)
            .collect();
        (!scores.is_empty()).then(|| scores.iter().sum::<f64>() / scores.len() as f64)
    }

    /// `pattern_id,feature,mu_A,mu_U,mu_k,R,rule`, pattern ids one-based.
    pub fn scores_csv(&self) -> String {
        let mut out = String::from(SCORES_HEADER);
        for row in &self.rows {
            for (k, f) in row.features.iter().enumerate() {
                write_score_row(&mut out, row.pattern_index + 1, k, &f.score);
            }
        }
        out
    }

    /// `pattern_id,feature,lo,hi,family`, pattern ids one-based.
    pub fn segments_csv(&self) -> String {
        let mut out = String::from(SEGMENTS_HEADER);
        for row in &self.rows {
            for (k, f) in row.features.iter().enumerate() {
                write_segment_rows(&mut out, row.pattern_index + 1, k, &f.partition);
            }
        }
        out
    }
}

pub const SCORES_HEADER: &str = "pattern_id,feature,mu_A,mu_U,mu_k,R,rule\n";
pub const SEGMENTS_HEADER: &str = "pattern_id,feature,lo,hi,family\n";

pub fn write_score_row(out: &mut String, pattern_id: usize, feature: usize, s: &RelevanceScore) {
    let _ = writeln!(
        out,
        "{pattern_id},{feature},{},{},{},{},{}",
        fmt_real(s.mu_active),
        fmt_real(s.mu_undefined),
        fmt_real(s.mu_range),
        fmt_real(s.value),
        s.rule.name()
    );
}

pub fn write_segment_rows(out: &mut String, pattern_id: usize, feature: usize, p: &FeaturePartition) {
    for s in &p.segments {
        let _ = writeln!(
            out,
            "{pattern_id},{feature},{},{},{}",
            fmt_real(s.interval.lo()),
            fmt_real(s.interval.hi()),
            s.family
        );
    }
}

/// Thread pool with `workers` threads, or rayon's default when `None`.
pub fn worker_pool(workers: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        if n == 0 {
            return Err(Error::InvalidConfig("worker count must be at least 1".into()));
        }
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot start worker pool: {e}")))
}

/// Relevance map over the patterns at `indices`, which must all carry the
/// label `class`. Queries run concurrently on the current rayon pool; rows
/// keep the order of `indices`.
pub fn relevance_map(
    model: &MlpModel,
    dataset: &Dataset,
    indices: &[usize],
    class: usize,
    spec: OutputSpec,
    eps: f64,
) -> Result<RelevanceMap> {
    for &i in indices {
        let label = *dataset.labels.get(i).ok_or(Error::IndexOutOfRange {
            what: "pattern",
            index: i,
            limit: dataset.len(),
        })?;
        if label != class {
            return Err(Error::InvalidConfig(format!(
                "pattern {} has class {label}, not {class}",
                i + 1
            )));
        }
    }
    let n = dataset.feature_count();
    let jobs: Vec<(usize, usize)> = indices
        .iter()
        .flat_map(|&i| (0..n).map(move |k| (i, k)))
        .collect();
    let results = jobs
        .par_iter()
        .map(|&(i, k)| feature_relevance(model, &dataset.patterns[i], k, spec, eps))
        .collect::<Result<Vec<_>>>()?;
    let mut results = results.into_iter();
    let rows = indices
        .iter()
        .map(|&i| RelevanceRow {
            pattern_index: i,
            features: results.by_ref().take(n).collect(),
        })
        .collect();
    Ok(RelevanceMap {
        class,
        spec,
        eps,
        rows,
    })
}

/// [`relevance_map`] over every pattern labelled `class`.
pub fn class_relevance_map(
    model: &MlpModel,
    dataset: &Dataset,
    class: usize,
    spec: OutputSpec,
    eps: f64,
) -> Result<RelevanceMap> {
    relevance_map(model, dataset, &dataset.indices_of_class(class), class, spec, eps)
}

/// Partitions of every feature for each output other than `class`, with
/// target `[0, radius]`.
pub fn inactive_output_analysis(
    model: &MlpModel,
    pattern: &[f64],
    class: usize,
    radius: f64,
    eps: f64,
) -> Result<Vec<(usize, Vec<FeatureRelevance>)>> {
    if class >= model.output_dim() {
        return Err(Error::IndexOutOfRange {
            what: "class",
            index: class,
            limit: model.output_dim(),
        });
    }
    (0..model.output_dim())
        .filter(|&i| i != class)
        .map(|i| {
            pattern_relevance(model, pattern, OutputSpec::inactive(i, radius), eps)
                .map(|f| (i, f))
        })
        .collect()
}

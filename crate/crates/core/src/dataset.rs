//! Problem instances, split filtering, balancing, hard labeling, and
//! line-delimited export.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use anyhow::Context;
use serde::{Deserialize, Serialize};

use crate::encode::{encode_graph, EncodedGraph};
use crate::engine::{solve, EntailmentResult, DEFAULT_REFINEMENT_CAP};
use crate::error::ProofError;
use crate::metrics::{instance_metrics, MetricBundle, Ratio};
use crate::parser::parse_program;
use crate::proofs::{minimal_proofs, ProofGoal, SearchLimits};
use crate::story::{GroundAtom, Story};
use crate::syntax::Program;

/// Generator provenance carried by every instance.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: Option<u64>,
    pub person_percent: Option<f64>,
    pub no_gender_assign: Option<f64>,
}

/// One benchmark instance: a story plus a query pair with labels & metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemInstance {
    pub id: String,
    pub story: Story,
    pub source: String,
    pub target: String,
    /// All relations holding between source and target in every answer set.
    pub labels: BTreeSet<String>,
    pub metrics: MetricBundle,
    pub hard_ambiguous: bool,
    pub provenance: Provenance,
    /// Stitching lineage: serialized plans, outermost last; empty for
    /// natively generated instances.
    pub lineage: Vec<String>,
}

/// Stable 64-bit FNV-1a hash, used for deterministic instance ids.
fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

pub fn instance_id(story: &Story, source: &str, target: &str) -> String {
    format!("{:016x}", fnv1a(format!("{}\n{source}\n{target}", story.serialize()).as_bytes()))
}

/// Solves, labels, and measures one query on a story, producing a complete
/// instance.  The story must have at least one answer set.
pub fn build_instance(
    world: &Program,
    story: &Story,
    source: &str,
    target: &str,
    provenance: Provenance,
    lineage: Vec<String>,
    limits: &SearchLimits,
) -> anyhow::Result<ProblemInstance> {
    let result = solve(world, story, DEFAULT_REFINEMENT_CAP)?;
    let labels = result.relations_between(source, target)?;
    let metrics = instance_metrics(story, &result, source, target, &labels, limits)?;
    let hard_ambiguous = label_hard_ambiguous(story, &result, source, target, &labels, limits)?;
    Ok(ProblemInstance {
        id: instance_id(story, source, target),
        story: story.clone(),
        source: source.to_string(),
        target: target.to_string(),
        labels,
        metrics,
        hard_ambiguous,
        provenance,
        lineage,
    })
}

// ---------------------------------------------------------------------------
// Split specifications
// ---------------------------------------------------------------------------

/// Comparison bound on an integer metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bound {
    Le(u64),
    Lt(u64),
    Gt(u64),
    Ge(u64),
    Eq(u64),
}

impl Bound {
    pub fn admits(&self, v: u64) -> bool {
        match *self {
            Bound::Le(t) => v <= t,
            Bound::Lt(t) => v < t,
            Bound::Gt(t) => v > t,
            Bound::Ge(t) => v >= t,
            Bound::Eq(t) => v == t,
        }
    }
}

/// Comparison bound on the rational BL metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlBound {
    Le(Ratio),
    Lt(Ratio),
    Gt(Ratio),
    Ge(Ratio),
}

impl BlBound {
    pub fn admits(&self, v: Ratio) -> bool {
        match *self {
            BlBound::Le(t) => v <= t,
            BlBound::Lt(t) => v < t,
            BlBound::Gt(t) => v > t,
            BlBound::Ge(t) => v >= t,
        }
    }
}

/// Bounds defining one named dataset split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub name: String,
    pub depth: Option<Bound>,
    pub width: Option<Bound>,
    pub bl: Option<BlBound>,
    pub opec: Option<Bound>,
    /// When set, the depth bound is evaluated on the positive-refinement
    /// depth and the instance must carry a nonempty label set: the answer
    /// must be hard via an actual derivation, not merely via contradiction
    /// branches.
    pub require_positive: bool,
}

fn spec(
    name: &str,
    depth: Option<Bound>,
    width: Option<Bound>,
    bl: Option<BlBound>,
    opec: Option<Bound>,
    require_positive: bool,
) -> SplitSpec {
    SplitSpec { name: name.to_string(), depth, width, bl, opec, require_positive }
}

/// Named split presets.  `-na` variants fix width to 1 (no ambiguity);
/// `-v1.1` presets are the ambiguity-free revision with a wider OPEC
/// training range and strict BL boundaries.
pub fn preset(name: &str) -> Option<SplitSpec> {
    let half3 = Ratio::new(3, 2);
    let s = match name {
        "train-a" | "in-dist" => spec(
            name,
            Some(Bound::Le(6)),
            Some(Bound::Le(5)),
            Some(BlBound::Le(half3)),
            Some(Bound::Le(2)),
            false,
        ),
        "train-na" | "in-dist-na" => spec(
            name,
            Some(Bound::Le(6)),
            Some(Bound::Eq(1)),
            Some(BlBound::Le(half3)),
            Some(Bound::Le(2)),
            false,
        ),
        "test-d" => spec(
            name,
            Some(Bound::Gt(6)),
            Some(Bound::Le(5)),
            Some(BlBound::Le(half3)),
            Some(Bound::Le(2)),
            true,
        ),
        "test-w" => spec(
            name,
            Some(Bound::Le(6)),
            Some(Bound::Gt(5)),
            Some(BlBound::Le(half3)),
            Some(Bound::Le(2)),
            false,
        ),
        "test-bl" => spec(
            name,
            Some(Bound::Le(6)),
            Some(Bound::Le(5)),
            Some(BlBound::Gt(half3)),
            None,
            true,
        ),
        "test-opec" => spec(name, None, None, None, Some(Bound::Ge(3)), true),
        "test-d-na" => spec(
            name,
            Some(Bound::Gt(6)),
            Some(Bound::Eq(1)),
            Some(BlBound::Le(half3)),
            Some(Bound::Le(2)),
            true,
        ),
        "test-bl-na" => spec(
            name,
            Some(Bound::Le(6)),
            Some(Bound::Eq(1)),
            Some(BlBound::Gt(half3)),
            None,
            true,
        ),
        "test-opec-na" => spec(name, None, Some(Bound::Eq(1)), None, Some(Bound::Ge(3)), true),
        "train-na-v1.1" => spec(
            name,
            Some(Bound::Le(6)),
            Some(Bound::Eq(1)),
            Some(BlBound::Lt(half3)),
            Some(Bound::Le(3)),
            false,
        ),
        "test-d-na-v1.1" => spec(
            name,
            Some(Bound::Gt(6)),
            Some(Bound::Eq(1)),
            Some(BlBound::Lt(half3)),
            Some(Bound::Le(3)),
            true,
        ),
        "test-bl-na-v1.1" => spec(
            name,
            Some(Bound::Le(6)),
            Some(Bound::Eq(1)),
            Some(BlBound::Ge(half3)),
            Some(Bound::Le(3)),
            true,
        ),
        "test-opec-na-v1.1" => {
            spec(name, None, Some(Bound::Eq(1)), None, Some(Bound::Ge(3)), true)
        }
        _ => return None,
    };
    Some(s)
}

pub const PRESET_NAMES: &[&str] = &[
    "train-a",
    "train-na",
    "in-dist",
    "in-dist-na",
    "test-d",
    "test-w",
    "test-bl",
    "test-opec",
    "test-d-na",
    "test-bl-na",
    "test-opec-na",
    "train-na-v1.1",
    "test-d-na-v1.1",
    "test-bl-na-v1.1",
    "test-opec-na-v1.1",
];

/// Whether an instance satisfies every bound of the split.
pub fn matches_spec(inst: &ProblemInstance, spec: &SplitSpec) -> bool {
    let depth = if spec.require_positive { inst.metrics.depth_positive } else { inst.metrics.depth };
    if spec.require_positive && inst.labels.is_empty() {
        return false;
    }
    spec.depth.map_or(true, |b| b.admits(depth))
        && spec.width.map_or(true, |b| b.admits(inst.metrics.width))
        && spec.bl.map_or(true, |b| b.admits(inst.metrics.bl))
        && spec.opec.map_or(true, |b| b.admits(inst.metrics.opec))
}

pub fn filter_split(pool: &[ProblemInstance], spec: &SplitSpec) -> Vec<ProblemInstance> {
    pool.iter().filter(|i| matches_spec(i, spec)).cloned().collect()
}

// ---------------------------------------------------------------------------
// Balancing
// ---------------------------------------------------------------------------

/// Bin layout for metric-wise balancing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinSpec {
    pub depth_bins: usize,
    pub width_bins: usize,
    pub bl_bins: usize,
    // OPEC always uses the fixed bins {0} and {>= 1}.
}

impl Default for BinSpec {
    fn default() -> Self {
        BinSpec { depth_bins: 3, width_bins: 3, bl_bins: 2 }
    }
}

/// Assigns quantile bins over `values` (ties to the lower bin); returns the
/// bin index per input position.
fn quantile_bins<V: Ord + Copy>(values: &[V], nbins: usize) -> Vec<usize> {
    let n = values.len();
    let mut sorted: Vec<V> = values.to_vec();
    sorted.sort();
    let thresholds: Vec<V> = (1..nbins)
        .map(|j| sorted[(j * n).div_ceil(nbins).saturating_sub(1).min(n - 1)])
        .collect();
    values
        .iter()
        .map(|v| thresholds.iter().filter(|t| v > t).count())
        .collect()
}

fn bin_assignments(pool: &[&ProblemInstance], bins: &BinSpec) -> Vec<(Vec<usize>, usize)> {
    let depth: Vec<u64> = pool.iter().map(|i| i.metrics.depth).collect();
    let width: Vec<u64> = pool.iter().map(|i| i.metrics.width).collect();
    let bl: Vec<Ratio> = pool.iter().map(|i| i.metrics.bl).collect();
    let opec: Vec<usize> = pool.iter().map(|i| usize::from(i.metrics.opec >= 1)).collect();
    vec![
        (quantile_bins(&depth, bins.depth_bins), bins.depth_bins),
        (quantile_bins(&width, bins.width_bins), bins.width_bins),
        (quantile_bins(&bl, bins.bl_bins), bins.bl_bins),
        (opec, 2),
    ]
}

fn metric_balanced(assignment: &[usize], nbins: usize, tolerance: f64) -> bool {
    let mut counts = vec![0usize; nbins];
    for &b in assignment {
        counts[b] += 1;
    }
    let nonempty: Vec<usize> = counts.into_iter().filter(|&c| c > 0).collect();
    if nonempty.len() <= 1 {
        return true; // a single populated bin cannot be rebalanced by removal
    }
    let hi = *nonempty.iter().max().expect("nonempty") as f64;
    let lo = *nonempty.iter().min().expect("nonempty") as f64;
    hi <= tolerance * lo
}

/// True iff every metric's bin marginal over `pool` is within `tolerance`
/// (largest vs. smallest populated bin).
pub fn is_balanced(pool: &[ProblemInstance], bins: &BinSpec, tolerance: f64) -> bool {
    if pool.is_empty() {
        return true;
    }
    let current: Vec<&ProblemInstance> = pool.iter().collect();
    bin_assignments(&current, bins).iter().all(|(a, n)| metric_balanced(a, *n, tolerance))
}

/// Iteratively removes over-represented instances until every metric's bin
/// marginal is within `tolerance` (largest/smallest populated bin) or
/// `max_p` passes elapse.  Never adds instances; order is preserved.
pub fn balance_by_rejection(
    pool: &[ProblemInstance],
    bins: &BinSpec,
    max_p: usize,
    tolerance: f64,
) -> Vec<ProblemInstance> {
    let mut alive: Vec<usize> = (0..pool.len()).collect();
    for _pass in 0..max_p {
        if alive.len() <= 1 {
            break;
        }
        let current: Vec<&ProblemInstance> = alive.iter().map(|&i| &pool[i]).collect();
        let assignments = bin_assignments(&current, bins);
        if assignments.iter().all(|(a, n)| metric_balanced(a, *n, tolerance)) {
            break;
        }
        // Score: one point per metric whose bin is over-represented.
        let n = current.len() as f64;
        let mut scores = vec![0usize; current.len()];
        for (assignment, nbins) in &assignments {
            let mut counts = vec![0usize; *nbins];
            for &b in assignment {
                counts[b] += 1;
            }
            let target = n / *nbins as f64;
            for (i, &b) in assignment.iter().enumerate() {
                if counts[b] as f64 > target {
                    scores[i] += 1;
                }
            }
        }
        let max_score = *scores.iter().max().expect("nonempty");
        if max_score == 0 {
            break;
        }
        // Remove up to 5% (at least one) of the highest-scored instances,
        // deterministically by id.
        let mut candidates: Vec<usize> = (0..current.len()).filter(|&i| scores[i] == max_score).collect();
        candidates.sort_by_key(|&i| current[i].id.clone());
        let k = (alive.len() / 20).max(1).min(candidates.len());
        let doomed: BTreeSet<usize> = candidates.into_iter().take(k).map(|i| alive[i]).collect();
        alive.retain(|i| !doomed.contains(i));
    }
    alive.into_iter().map(|i| pool[i].clone()).collect()
}

// ---------------------------------------------------------------------------
// Hard-ambiguity labeling
// ---------------------------------------------------------------------------

/// Labels a query hard-ambiguous iff (i) some minimal proof of one of its
/// label relations uses a leaf premise originating from an ambiguous fact,
/// and (ii) that relation is absent from some refinement's constraint-free
/// closure — so the ambiguity cannot simply be ignored.
pub fn label_hard_ambiguous(
    story: &Story,
    result: &EntailmentResult,
    x: &str,
    y: &str,
    labels: &BTreeSet<String>,
    limits: &SearchLimits,
) -> Result<bool, ProofError> {
    if story.ambiguity_count() == 0 {
        return Ok(false);
    }
    let alternatives: BTreeSet<GroundAtom> = story
        .ambiguous
        .iter()
        .flat_map(|c| c.choices.iter().filter_map(GroundAtom::from_atom))
        .collect();
    for rel in labels {
        let goal = GroundAtom::new(rel.clone(), &[x, y]);
        // (ii): some resolution's closure (constraints ignored) lacks the goal.
        let escapable = result.outcomes.iter().any(|o| !o.closure.contains(&goal));
        if !escapable {
            continue;
        }
        // (i): some minimal proof leans on an ambiguous alternative.
        for outcome in result.ref_plus() {
            let proofs = minimal_proofs(&outcome.closure, &ProofGoal::Atom(goal.clone()), limits)?;
            if proofs
                .iter()
                .any(|p| p.leaf_premises().iter().any(|l| alternatives.contains(l)))
            {
                return Ok(true);
            }
        }
    }
    Ok(false)
}

// ---------------------------------------------------------------------------
// Export / import / validation
// ---------------------------------------------------------------------------

pub const SCHEMA_VERSION: u32 = 1;

/// On-disk record: one JSON object per line.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Record {
    pub schema: u32,
    pub id: String,
    /// Story as parseable source text.
    pub story: String,
    pub source: String,
    pub target: String,
    pub labels: BTreeSet<String>,
    pub metrics: MetricBundle,
    pub hard_ambiguous: bool,
    pub graph: EncodedGraph,
    pub provenance: Provenance,
    pub lineage: Vec<String>,
}

impl Record {
    pub fn from_instance(inst: &ProblemInstance) -> Record {
        Record {
            schema: SCHEMA_VERSION,
            id: inst.id.clone(),
            story: inst.story.serialize(),
            source: inst.source.clone(),
            target: inst.target.clone(),
            labels: inst.labels.clone(),
            metrics: inst.metrics.clone(),
            hard_ambiguous: inst.hard_ambiguous,
            graph: encode_graph(&inst.story, &inst.source, &inst.target, &inst.labels),
            provenance: inst.provenance.clone(),
            lineage: inst.lineage.clone(),
        }
    }

    pub fn into_instance(self, world: &Program) -> anyhow::Result<ProblemInstance> {
        anyhow::ensure!(self.schema == SCHEMA_VERSION, "unsupported schema version {}", self.schema);
        let parsed = parse_program(&self.story).context("parsing story text")?;
        let story = Story::from_program(&parsed, world).context("loading story")?;
        Ok(ProblemInstance {
            id: self.id,
            story,
            source: self.source,
            target: self.target,
            labels: self.labels,
            metrics: self.metrics,
            hard_ambiguous: self.hard_ambiguous,
            provenance: self.provenance,
            lineage: self.lineage,
        })
    }
}

pub fn export_jsonl(pool: &[ProblemInstance], path: &Path) -> anyhow::Result<()> {
    let mut out = String::new();
    for inst in pool {
        let record = Record::from_instance(inst);
        let _ = writeln!(out, "{}", serde_json::to_string(&record)?);
    }
    std::fs::write(path, out).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn import_jsonl(path: &Path, world: &Program) -> anyhow::Result<Vec<ProblemInstance>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut pool = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: Record = serde_json::from_str(line)
            .with_context(|| format!("{}:{}", path.display(), lineno + 1))?;
        pool.push(record.into_instance(world)?);
    }
    Ok(pool)
}

/// Recomputes labels, metrics, and the hard flag of every instance from
/// scratch and checks them (and, when given, the split bounds) against the
/// stored values.  Returns human-readable violation messages.
pub fn validate_pool(
    world: &Program,
    pool: &[ProblemInstance],
    spec: Option<&SplitSpec>,
    limits: &SearchLimits,
) -> Vec<String> {
    let mut violations = Vec::new();
    for inst in pool {
        match build_instance(
            world,
            &inst.story,
            &inst.source,
            &inst.target,
            inst.provenance.clone(),
            inst.lineage.clone(),
            limits,
        ) {
            Ok(fresh) => {
                if fresh.labels != inst.labels {
                    violations.push(format!(
                        "{}: stored labels {:?} != recomputed {:?}",
                        inst.id, inst.labels, fresh.labels
                    ));
                }
                if fresh.metrics != inst.metrics {
                    violations.push(format!(
                        "{}: stored metrics {:?} != recomputed {:?}",
                        inst.id, inst.metrics, fresh.metrics
                    ));
                }
                if fresh.hard_ambiguous != inst.hard_ambiguous {
                    violations.push(format!("{}: hard-ambiguous flag mismatch", inst.id));
                }
                if let Some(spec) = spec {
                    if !matches_spec(&fresh, spec) {
                        violations.push(format!(
                            "{}: violates split `{}` bounds (metrics {:?})",
                            inst.id, spec.name, fresh.metrics
                        ));
                    }
                }
            }
            Err(e) => violations.push(format!("{}: recomputation failed: {e:#}", inst.id)),
        }
    }
    violations
}

/// Checks the label-closure requirement: every relation appearing as a test
/// label must appear as a train label.
pub fn check_label_closure(train: &[ProblemInstance], test: &[ProblemInstance]) -> Vec<String> {
    let train_labels: BTreeSet<&String> = train.iter().flat_map(|i| i.labels.iter()).collect();
    let mut violations = Vec::new();
    for inst in test {
        for label in &inst.labels {
            if !train_labels.contains(label) {
                violations.push(format!(
                    "{}: test label `{label}` never appears in the training labels",
                    inst.id
                ));
            }
        }
    }
    violations
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounds_admit_correctly() {
        assert!(Bound::Le(6).admits(6) && !Bound::Le(6).admits(7));
        assert!(Bound::Gt(6).admits(7) && !Bound::Gt(6).admits(6));
        assert!(Bound::Ge(3).admits(3) && !Bound::Ge(3).admits(2));
        assert!(Bound::Eq(1).admits(1) && !Bound::Eq(1).admits(2));
        assert!(BlBound::Lt(Ratio::new(3, 2)).admits(Ratio::new(4, 3)));
        assert!(!BlBound::Lt(Ratio::new(3, 2)).admits(Ratio::new(3, 2)));
        assert!(BlBound::Ge(Ratio::new(3, 2)).admits(Ratio::new(3, 2)));
    }

    #[test]
    fn presets_cover_the_published_bounds() {
        let train = preset("train-a").unwrap();
        assert_eq!(train.depth, Some(Bound::Le(6)));
        assert_eq!(train.width, Some(Bound::Le(5)));
        assert_eq!(train.opec, Some(Bound::Le(2)));
        assert!(!train.require_positive);
        let opec = preset("test-opec").unwrap();
        assert_eq!(opec.opec, Some(Bound::Ge(3)));
        assert_eq!(opec.depth, None);
        let v11 = preset("train-na-v1.1").unwrap();
        assert_eq!(v11.opec, Some(Bound::Le(3)));
        assert_eq!(v11.bl, Some(BlBound::Lt(Ratio::new(3, 2))));
        assert!(preset("nonsense").is_none());
        for name in PRESET_NAMES {
            assert!(preset(name).is_some(), "{name}");
        }
    }

    #[test]
    fn quantile_bins_put_ties_low() {
        let bins = quantile_bins(&[1u64, 1, 1, 2, 5, 9], 3);
        assert_eq!(bins, vec![0, 0, 0, 1, 2, 2]);
        let all_same = quantile_bins(&[4u64; 5], 3);
        assert!(all_same.iter().all(|&b| b == 0));
    }
}

//! Scoring of rule predictions against a generated dataset.
//!
//! Predictions are JSON lines `{"id": …, "rules": [{"kind", "class", "param"}]}`;
//! `target_class` is accepted in place of `class`.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use skill_core::estimate::{estimate_rules, evaluate, F1Report, KindReport};
use skill_core::geometry::WorkpieceKind;
use skill_core::{Rule, RuleKind, SegmentClass};

use crate::config::RunConfig;
use crate::dataset::{load_sample, reference_for_seed, ManifestEntry, Split};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictedRule {
    pub kind: RuleKind,
    #[serde(alias = "target_class")]
    pub class: SegmentClass,
    pub param: f64,
}

impl From<PredictedRule> for Rule {
    fn from(p: PredictedRule) -> Rule {
        Rule {
            kind: p.kind,
            target_class: p.class,
            param: p.param,
        }
    }
}

impl From<Rule> for PredictedRule {
    fn from(r: Rule) -> PredictedRule {
        PredictedRule {
            kind: r.kind,
            class: r.target_class,
            param: r.param,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    pub rules: Vec<PredictedRule>,
}

pub fn read_predictions<R: BufRead>(r: R) -> Result<Vec<Prediction>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).with_context(|| format!("predictions line {}", i + 1))?);
    }
    Ok(out)
}

pub fn write_predictions<W: Write>(mut w: W, preds: &[Prediction]) -> Result<()> {
    for p in preds {
        serde_json::to_writer(&mut w, p)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Oracle predictions for every manifest entry in `split` (all entries when
/// `None`), in manifest order.
pub fn oracle_predictions(dir: &Path, cfg: &RunConfig, entries: &[ManifestEntry], split: Option<Split>) -> Result<Vec<Prediction>> {
    use rayon::prelude::*;
    entries
        .par_iter()
        .filter(|e| split.is_none_or(|s| e.split == s))
        .map(|e| {
            let sample = load_sample(dir, e)?;
            let (_, path, seg) = reference_for_seed(cfg, e.geometry, sample.seed)?;
            let traj = sample.trajectory.to_trajectory()?;
            let est = estimate_rules(&traj, &path, &seg, &cfg.estimate).with_context(|| format!("estimating {}", e.id))?;
            Ok(Prediction {
                id: e.id.clone(),
                rules: est.rules.rules().iter().map(|&r| r.into()).collect(),
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct F1Summary {
    pub straight: f64,
    pub corner: f64,
    pub none: f64,
    #[serde(rename = "macro")]
    pub macro_f1: f64,
    #[serde(rename = "micro")]
    pub micro_f1: f64,
}

impl From<&F1Report> for F1Summary {
    fn from(r: &F1Report) -> Self {
        let f = |c| r.per_class.get(&c).map_or(0.0, |s| s.f1);
        F1Summary {
            straight: f(SegmentClass::Straight),
            corner: f(SegmentClass::Corner),
            none: f(SegmentClass::None),
            macro_f1: r.macro_f1,
            micro_f1: r.micro_f1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaeSummary {
    pub velocity: Option<f64>,
    pub orientation_rad: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KindSummary {
    pub f1: F1Summary,
    pub mae: Option<f64>,
    pub active: usize,
}

impl From<&KindReport> for KindSummary {
    fn from(k: &KindReport) -> Self {
        KindSummary {
            f1: (&k.f1).into(),
            mae: k.mae,
            active: k.active,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub n: usize,
    /// Both rule kinds pooled.
    pub f1: F1Summary,
    pub mae: MaeSummary,
    pub velocity: KindSummary,
    pub orientation: KindSummary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    #[serde(flatten)]
    pub overall: GroupSummary,
    pub per_geometry: BTreeMap<String, GroupSummary>,
}

/// One predicted-vs-true point for a truly active rule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScatterRow {
    pub kind: RuleKind,
    pub geometry: WorkpieceKind,
    pub class: SegmentClass,
    pub truth: f64,
    pub prediction: f64,
}

/// `(truth, prediction)` rule lists of one sample.
type RulePair = (Vec<Rule>, Vec<Rule>);

fn summarize(pairs: &[RulePair]) -> Result<GroupSummary> {
    let r = evaluate(pairs)?;
    Ok(GroupSummary {
        n: r.n,
        f1: (&r.f1).into(),
        mae: MaeSummary {
            velocity: r.velocity.mae,
            orientation_rad: r.orientation.mae,
        },
        velocity: (&r.velocity).into(),
        orientation: (&r.orientation).into(),
    })
}

/// Scores `preds` against the ground truth of the manifest entries in
/// `split`. Every such entry must have a prediction.
pub fn evaluate_predictions(
    dir: &Path,
    entries: &[ManifestEntry],
    split: Option<Split>,
    preds: &[Prediction],
) -> Result<(EvalSummary, Vec<ScatterRow>)> {
    let by_id: HashMap<&str, &Prediction> = preds.iter().map(|p| (p.id.as_str(), p)).collect();
    let chosen: Vec<&ManifestEntry> = entries.iter().filter(|e| split.is_none_or(|s| e.split == s)).collect();
    if chosen.is_empty() {
        bail!("no manifest entries in the selected split");
    }
    let missing: Vec<&str> = chosen
        .iter()
        .filter(|e| !by_id.contains_key(e.id.as_str()))
        .map(|e| e.id.as_str())
        .collect();
    if !missing.is_empty() {
        bail!("{} ids have no prediction: {}", missing.len(), missing.join(", "));
    }

    let mut groups: BTreeMap<String, Vec<RulePair>> = BTreeMap::new();
    let mut all = Vec::with_capacity(chosen.len());
    let mut scatter = Vec::new();
    for e in chosen {
        let truth = load_sample(dir, e)?.rules;
        let pred: Vec<Rule> = by_id[e.id.as_str()].rules.iter().map(|&r| r.into()).collect();
        for t in truth.iter().filter(|t| t.is_active()) {
            let p = pred.iter().find(|p| p.kind == t.kind).map_or(0.0, |p| p.param);
            scatter.push(ScatterRow {
                kind: t.kind,
                geometry: e.geometry,
                class: t.target_class,
                truth: t.param,
                prediction: p,
            });
        }
        groups
            .entry(e.geometry.as_str().to_string())
            .or_default()
            .push((truth.clone(), pred.clone()));
        all.push((truth, pred));
    }
    let per_geometry = groups
        .iter()
        .map(|(g, pairs)| Ok((g.clone(), summarize(pairs)?)))
        .collect::<Result<_>>()?;
    Ok((
        EvalSummary {
            overall: summarize(&all)?,
            per_geometry,
        },
        scatter,
    ))
}

/// `kind,geometry,class,truth,prediction`.
pub fn write_scatter_csv<W: Write>(w: W, rows: &[ScatterRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_scatter_csv<R: std::io::Read>(r: R) -> Result<Vec<ScatterRow>> {
    csv::Reader::from_reader(r)
        .deserialize()
        .enumerate()
        .map(|(i, row)| row.with_context(|| format!("scatter row {}", i + 1)))
        .collect()
}

//! Log-linear candidate reranker.
//!
//! p(z) ∝ exp(φ(z)·θ). Training maximizes the mean log-likelihood of annotated
//! candidates over annotated examples plus the mean log-likelihood of
//! answer-matching candidates over the rest, minus an L1 penalty, with
//! per-example AdaGrad steps.

use std::collections::{BTreeMap, BTreeSet};

use log::{info, warn};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::{evaluate, result_equals, Denotation};
use crate::formula::{Formula, NodeKind};
use crate::table::{CellValue, Table};

pub const CHECKPOINT_VERSION: u32 = 1;
const ACCUM_INIT: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RerankError {
    #[error("feature vector has dimension {found}, model has {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("example {0} has no annotations")]
    NotAnnotated(String),
    #[error("example {0} has no candidates")]
    NoCandidates(String),
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub formula: Formula,
    pub features: Vec<f64>,
    /// `None` when the formula fails to evaluate.
    pub result: Option<Denotation>,
}

impl Candidate {
    pub fn new(formula: Formula, features: Vec<f64>, result: Option<Denotation>) -> Self {
        Candidate {
            formula,
            features,
            result,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub question_id: String,
    pub question: String,
    pub table_id: String,
    pub gold: Vec<CellValue>,
    pub candidates: Vec<Candidate>,
    /// Candidate positions marked correct by annotators.
    pub annotations: BTreeSet<usize>,
}

impl Example {
    /// Member of the annotated set.
    pub fn is_annotated(&self) -> bool {
        !self.annotations.is_empty()
    }

    pub fn gold_denotation(&self) -> Denotation {
        Denotation::Values(self.gold.iter().cloned().collect())
    }

    /// Positions whose cached result equals the gold answer.
    pub fn answer_matches(&self) -> BTreeSet<usize> {
        let gold = self.gold_denotation();
        self.candidates
            .iter()
            .enumerate()
            .filter(|(_, c)| c.result.as_ref().is_some_and(|r| result_equals(r, &gold)))
            .map(|(i, _)| i)
            .collect()
    }

    /// The correct set used for training and scoring: annotations when present,
    /// answer matches otherwise.
    pub fn correct_set(&self) -> BTreeSet<usize> {
        if self.is_annotated() {
            self.annotations.clone()
        } else {
            self.answer_matches()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    /// Uniform L1 weight.
    pub lambda: f64,
    /// Per-coordinate L1 weights; overrides `lambda` when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_per_coord: Option<Vec<f64>>,
    pub learning_rate: f64,
    pub epochs: usize,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Hyperparameters {
            lambda: 0.0,
            lambda_per_coord: None,
            learning_rate: 0.1,
            epochs: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelState {
    pub theta: Vec<f64>,
    pub accum: Vec<f64>,
    pub hyper: Hyperparameters,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    version: u32,
    dimension: usize,
    theta: Vec<f64>,
    accumulators: Vec<f64>,
    hyperparameters: Hyperparameters,
}

impl ModelState {
    pub fn zeros(dim: usize, hyper: Hyperparameters) -> Self {
        ModelState {
            theta: vec![0.0; dim],
            accum: vec![ACCUM_INIT; dim],
            hyper,
        }
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    fn lambda(&self, j: usize) -> f64 {
        match &self.hyper.lambda_per_coord {
            Some(v) => v.get(j).copied().unwrap_or(self.hyper.lambda),
            None => self.hyper.lambda,
        }
    }

    fn penalty(&self) -> f64 {
        self.theta
            .iter()
            .enumerate()
            .map(|(j, t)| self.lambda(j) * t.abs())
            .sum()
    }

    pub fn to_json(&self) -> String {
        let c = Checkpoint {
            version: CHECKPOINT_VERSION,
            dimension: self.dim(),
            theta: self.theta.clone(),
            accumulators: self.accum.clone(),
            hyperparameters: self.hyper.clone(),
        };
        serde_json::to_string_pretty(&c).expect("checkpoint serializes")
    }

    pub fn from_json(src: &str) -> Result<Self, RerankError> {
        let c: Checkpoint = serde_json::from_str(src).map_err(|e| RerankError::Checkpoint(e.to_string()))?;
        if c.version != CHECKPOINT_VERSION {
            return Err(RerankError::Version(c.version));
        }
        for v in [&c.theta, &c.accumulators] {
            if v.len() != c.dimension {
                return Err(RerankError::DimensionMismatch {
                    expected: c.dimension,
                    found: v.len(),
                });
            }
        }
        if c.accumulators.iter().any(|a| *a < 0.0) {
            return Err(RerankError::Checkpoint("negative accumulator".into()));
        }
        Ok(ModelState {
            theta: c.theta,
            accum: c.accumulators,
            hyper: c.hyperparameters,
        })
    }

    fn check(&self, e: &Example) -> Result<(), RerankError> {
        if e.candidates.is_empty() {
            return Err(RerankError::NoCandidates(e.question_id.clone()));
        }
        for c in &e.candidates {
            if c.features.len() != self.dim() {
                return Err(RerankError::DimensionMismatch {
                    expected: self.dim(),
                    found: c.features.len(),
                });
            }
        }
        Ok(())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn scores(e: &Example, m: &ModelState) -> Vec<f64> {
    e.candidates.iter().map(|c| dot(&c.features, &m.theta)).collect()
}

fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let hi = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + xs.map(|x| (x - hi).exp()).sum::<f64>().ln()
}

fn softmax(s: &[f64]) -> Vec<f64> {
    let z = log_sum_exp(s.iter().copied());
    s.iter().map(|x| (x - z).exp()).collect()
}

pub fn candidate_distribution(e: &Example, m: &ModelState) -> Result<Vec<f64>, RerankError> {
    m.check(e)?;
    Ok(softmax(&scores(e, m)))
}

fn mass(e: &Example, m: &ModelState, set: &BTreeSet<usize>) -> Result<f64, RerankError> {
    let p = candidate_distribution(e, m)?;
    Ok(set.iter().filter_map(|&i| p.get(i)).sum())
}

/// Probability of yielding the gold answer.
pub fn answer_likelihood(e: &Example, m: &ModelState) -> Result<f64, RerankError> {
    mass(e, m, &e.answer_matches())
}

/// Probability mass on annotated candidates.
pub fn annotated_likelihood(e: &Example, m: &ModelState) -> Result<f64, RerankError> {
    if !e.is_annotated() {
        return Err(RerankError::NotAnnotated(e.question_id.clone()));
    }
    mass(e, m, &e.annotations)
}

/// log p(correct) and its gradient for one example, or `None` when the correct
/// set is empty.
fn example_term(e: &Example, m: &ModelState, correct: &BTreeSet<usize>) -> Option<(f64, Vec<f64>)> {
    if correct.is_empty() {
        return None;
    }
    let s = scores(e, m);
    let all = log_sum_exp(s.iter().copied());
    let good = log_sum_exp(correct.iter().map(|&i| s[i]));
    let mut grad = vec![0.0; m.dim()];
    for (i, c) in e.candidates.iter().enumerate() {
        let p_all = (s[i] - all).exp();
        let p_good = if correct.contains(&i) { (s[i] - good).exp() } else { 0.0 };
        for (g, f) in grad.iter_mut().zip(&c.features) {
            *g += (p_good - p_all) * f;
        }
    }
    Some((good - all, grad))
}

/// Per-group data terms: (sum of log-likelihoods, gradient sum, used count).
struct Group {
    value: f64,
    grad: Vec<f64>,
    n: usize,
}

fn group_term<'a>(examples: impl Iterator<Item = &'a Example>, m: &ModelState, annotated: bool) -> Group {
    let mut g = Group {
        value: 0.0,
        grad: vec![0.0; m.dim()],
        n: 0,
    };
    for e in examples {
        let correct = if annotated {
            e.annotations.clone()
        } else {
            e.answer_matches()
        };
        match example_term(e, m, &correct) {
            Some((v, grad)) => {
                g.value += v;
                for (a, b) in g.grad.iter_mut().zip(grad) {
                    *a += b;
                }
                g.n += 1;
            }
            None => warn!("skipping {}: no candidate yields the gold answer", e.question_id),
        }
    }
    g
}

impl Group {
    fn mean(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.value / self.n as f64
        }
    }
}

fn check_all(dataset: &[Example], m: &ModelState) -> Result<(), RerankError> {
    dataset.iter().try_for_each(|e| m.check(e))
}

/// Weak-supervision objective: mean answer log-likelihood minus L1 penalty.
pub fn weak_objective(dataset: &[Example], m: &ModelState) -> Result<f64, RerankError> {
    check_all(dataset, m)?;
    Ok(group_term(dataset.iter(), m, false).mean() - m.penalty())
}

/// Mixed objective. With no annotated examples it is computed exactly as
/// [`weak_objective`].
pub fn objective(dataset: &[Example], m: &ModelState) -> Result<f64, RerankError> {
    check_all(dataset, m)?;
    let rest = group_term(dataset.iter().filter(|e| !e.is_annotated()), m, false);
    if dataset.iter().all(|e| !e.is_annotated()) {
        return Ok(rest.mean() - m.penalty());
    }
    let ann = group_term(dataset.iter().filter(|e| e.is_annotated()), m, true);
    Ok(ann.mean() + rest.mean() - m.penalty())
}

fn l1_subgradient(m: &ModelState, j: usize) -> f64 {
    let t = m.theta[j];
    if t > 0.0 {
        m.lambda(j)
    } else if t < 0.0 {
        -m.lambda(j)
    } else {
        0.0
    }
}

/// Gradient of [`objective`], using sign(θ) as the L1 subgradient.
pub fn gradient(dataset: &[Example], m: &ModelState) -> Result<Vec<f64>, RerankError> {
    check_all(dataset, m)?;
    let ann = group_term(dataset.iter().filter(|e| e.is_annotated()), m, true);
    let rest = group_term(dataset.iter().filter(|e| !e.is_annotated()), m, false);
    let mut g = vec![0.0; m.dim()];
    for grp in [&ann, &rest] {
        if grp.n > 0 {
            for (a, b) in g.iter_mut().zip(&grp.grad) {
                *a += b / grp.n as f64;
            }
        }
    }
    for (j, gj) in g.iter_mut().enumerate() {
        *gj -= l1_subgradient(m, j);
    }
    Ok(g)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub state: ModelState,
    /// Objective after each epoch.
    pub objectives: Vec<f64>,
}

/// Per-example AdaGrad ascent. Each example's step carries its share of the
/// group mean and of the penalty, so one epoch sums to the full gradient.
pub fn train(dataset: &[Example], m: &ModelState) -> Result<TrainReport, RerankError> {
    check_all(dataset, m)?;
    let mut m = m.clone();
    let n_ann = dataset
        .iter()
        .filter(|e| e.is_annotated() && !e.annotations.is_empty())
        .count();
    let n_rest = dataset
        .iter()
        .filter(|e| !e.is_annotated() && !e.answer_matches().is_empty())
        .count();
    let n_total = dataset.len().max(1) as f64;
    let mut objectives = Vec::with_capacity(m.hyper.epochs);
    for epoch in 0..m.hyper.epochs {
        for e in dataset {
            let (correct, n) = if e.is_annotated() {
                (e.annotations.clone(), n_ann)
            } else {
                (e.answer_matches(), n_rest)
            };
            let data = example_term(e, &m, &correct).map(|(_, g)| g);
            for j in 0..m.dim() {
                let mut g = -l1_subgradient(&m, j) / n_total;
                if let Some(d) = &data {
                    g += d[j] / n as f64;
                }
                m.accum[j] += g * g;
                m.theta[j] += m.hyper.learning_rate * g / m.accum[j].sqrt();
            }
        }
        let obj = objective(dataset, &m)?;
        info!("epoch {}: objective {obj:.6}", epoch + 1);
        objectives.push(obj);
    }
    Ok(TrainReport { state: m, objectives })
}

/// Candidate positions ordered best first; ties keep input order.
pub fn rank(e: &Example, m: &ModelState) -> Result<Vec<usize>, RerankError> {
    m.check(e)?;
    let s = scores(e, m);
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
    Ok(order)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub correctness: f64,
    pub mrr: f64,
    pub examples: usize,
    /// Examples without annotations, scored by answer match instead.
    pub answer_scored: usize,
}

pub fn metrics(dataset: &[Example], m: &ModelState) -> Result<Metrics, RerankError> {
    let mut top1 = 0.0;
    let mut rr = 0.0;
    let mut answer_scored = 0;
    for e in dataset {
        if !e.is_annotated() {
            answer_scored += 1;
        }
        let correct = e.correct_set();
        let order = rank(e, m)?;
        if order.first().is_some_and(|i| correct.contains(i)) {
            top1 += 1.0;
        }
        if let Some(r) = order.iter().position(|i| correct.contains(i)) {
            rr += 1.0 / (r + 1) as f64;
        }
    }
    let n = dataset.len();
    let div = |x: f64| if n == 0 { 0.0 } else { x / n as f64 };
    Ok(Metrics {
        correctness: div(top1),
        mrr: div(rr),
        examples: n,
        answer_scored,
    })
}

/// Candidates chosen by at least two voters; `None` votes select nothing.
pub fn aggregate_annotations(votes: &[Option<usize>]) -> BTreeSet<usize> {
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for v in votes.iter().flatten() {
        *counts.entry(*v).or_default() += 1;
    }
    counts.into_iter().filter(|(_, c)| *c >= 2).map(|(p, _)| p).collect()
}

const SIZE_BUCKETS: usize = 4;
const RESULT_SLOTS: usize = 4;

/// Length of [`featurize`] vectors.
pub const FEATURE_DIM: usize = NodeKind::ALL.len() + 3 + RESULT_SLOTS + SIZE_BUCKETS;

fn tokens(s: &str) -> BTreeSet<String> {
    s.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Deterministic features: node-kind counts, depth, question/column token
/// overlap, literals mentioned in the question, result type and size bucket.
pub fn featurize(question: &str, t: &Table, f: &Formula) -> Vec<f64> {
    let mut v = vec![0.0; FEATURE_DIM];
    f.walk(&mut |g| {
        let k = NodeKind::ALL.iter().position(|k| *k == g.kind()).expect("listed kind");
        v[k] += 1.0;
    });
    let base = NodeKind::ALL.len();
    v[base] = f.depth() as f64;
    let q = tokens(question);
    v[base + 1] = f.columns().iter().filter(|c| !tokens(c).is_disjoint(&q)).count() as f64;
    let ql = question.to_lowercase();
    v[base + 2] = f
        .literals()
        .iter()
        .filter(|l| {
            let s = l.to_string().to_lowercase();
            !s.is_empty() && ql.contains(&s)
        })
        .count() as f64;
    let r = base + 3;
    let result = evaluate(f, t);
    let slot = match &result {
        Ok(Denotation::Values(_)) => 0,
        Ok(Denotation::Records(_)) => 1,
        Ok(Denotation::Scalar(_)) => 2,
        Err(_) => 3,
    };
    v[r + slot] = 1.0;
    let size = result.map(|d| d.len()).unwrap_or(0);
    let bucket = match size {
        0 => 0,
        1 => 1,
        2..=5 => 2,
        _ => 3,
    };
    v[r + RESULT_SLOTS + bucket] = 1.0;
    v
}

/// Seeded shuffle split; returns (train, dev).
pub fn split(dataset: &[Example], dev_fraction: f64, seed: u64) -> (Vec<Example>, Vec<Example>) {
    let mut idx: Vec<usize> = (0..dataset.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_dev = ((dataset.len() as f64) * dev_fraction.clamp(0.0, 1.0)).round() as usize;
    let (dev, train) = idx.split_at(n_dev);
    let pick = |ix: &[usize]| {
        let mut ix = ix.to_vec();
        ix.sort_unstable();
        ix.into_iter().map(|i| dataset[i].clone()).collect()
    };
    (pick(train), pick(dev))
}

/// Synthetic examples: random features and one planted correct candidate per
/// question, chosen by a hidden parameter vector.
pub fn synthetic_dataset(questions: usize, candidates: usize, dim: usize, seed: u64) -> Vec<Example> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hidden: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    (0..questions)
        .map(|q| {
            let cands: Vec<Candidate> = (0..candidates)
                .map(|i| {
                    let features = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
                    Candidate::new(Formula::lit(CellValue::Number(i as f64)), features, None)
                })
                .collect();
            let best = (0..candidates)
                .max_by(|&a, &b| dot(&cands[a].features, &hidden).total_cmp(&dot(&cands[b].features, &hidden)))
                .expect("at least one candidate");
            Example {
                question_id: format!("q{q}"),
                question: String::new(),
                table_id: String::new(),
                gold: vec![CellValue::Number(best as f64)],
                candidates: cands,
                annotations: BTreeSet::from([best]),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::parse_formula;
    use crate::table::fixtures::olympics;

    fn ex(features: Vec<Vec<f64>>, matches: &[usize], annotations: &[usize]) -> Example {
        let candidates = features
            .into_iter()
            .enumerate()
            .map(|(i, f)| {
                let r = if matches.contains(&i) { "yes" } else { "no" };
                Candidate::new(
                    Formula::lit_str(r),
                    f,
                    Some(Denotation::Values(BTreeSet::from([CellValue::text(r)]))),
                )
            })
            .collect();
        Example {
            question_id: "q".into(),
            question: String::new(),
            table_id: "t".into(),
            gold: vec![CellValue::text("yes")],
            candidates,
            annotations: annotations.iter().copied().collect(),
        }
    }

    fn model(dim: usize) -> ModelState {
        ModelState::zeros(dim, Hyperparameters::default())
    }

    #[test]
    fn distribution_examples() {
        let e = ex(vec![vec![0.0]; 7], &[], &[]);
        for p in candidate_distribution(&e, &model(1)).unwrap() {
            assert!((p - 1.0 / 7.0).abs() < 1e-15);
        }
        let e = ex(vec![vec![1.0, 0.0], vec![0.0, 1.0]], &[], &[]);
        let mut m = model(2);
        m.theta = vec![2f64.ln(), 0.0];
        let p = candidate_distribution(&e, &m).unwrap();
        assert!((p[0] - 2.0 / 3.0).abs() < 1e-12 && (p[1] - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(
            candidate_distribution(&ex(vec![vec![3.0]], &[], &[]), &model(1)).unwrap(),
            vec![1.0]
        );
        assert_eq!(
            candidate_distribution(&e, &model(3)),
            Err(RerankError::DimensionMismatch { expected: 3, found: 2 })
        );
    }

    #[test]
    fn likelihoods() {
        let e = ex(vec![vec![0.0]; 7], &[1, 4], &[]);
        assert!((answer_likelihood(&e, &model(1)).unwrap() - 2.0 / 7.0).abs() < 1e-12);
        assert!(matches!(
            annotated_likelihood(&e, &model(1)),
            Err(RerankError::NotAnnotated(_))
        ));
        let all = ex(vec![vec![0.0]; 3], &[0, 1, 2], &[0, 1, 2]);
        assert!((answer_likelihood(&all, &model(1)).unwrap() - 1.0).abs() < 1e-12);
        assert!((annotated_likelihood(&all, &model(1)).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(
            answer_likelihood(&ex(vec![vec![0.0]; 3], &[], &[]), &model(1)).unwrap(),
            0.0
        );
        let one = ex(vec![vec![0.0]; 7], &[], &[3]);
        assert!((annotated_likelihood(&one, &model(1)).unwrap() - 1.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn objective_reductions() {
        let e = ex(vec![vec![0.0]; 7], &[1, 4], &[]);
        let o = objective(std::slice::from_ref(&e), &model(1)).unwrap();
        assert!((o - (2.0f64 / 7.0).ln()).abs() < 1e-12);
        let weak = vec![e.clone(), ex(vec![vec![1.0], vec![-1.0]], &[0], &[])];
        let mut m = model(1);
        m.theta = vec![0.3];
        m.hyper.lambda = 0.2;
        assert_eq!(
            objective(&weak, &m).unwrap().to_bits(),
            weak_objective(&weak, &m).unwrap().to_bits()
        );
        let ann = ex(vec![vec![1.0], vec![-1.0]], &[], &[1]);
        m.hyper.lambda = 0.0;
        let a = objective(std::slice::from_ref(&ann), &m).unwrap();
        assert!((a - annotated_likelihood(&ann, &m).unwrap().ln()).abs() < 1e-12);
        // Zero-likelihood examples are skipped.
        let dead = ex(vec![vec![0.0]; 2], &[], &[]);
        assert_eq!(objective(&[dead], &model(1)).unwrap(), 0.0);
    }

    #[test]
    fn identical_features_are_a_fixed_point() {
        let e = ex(vec![vec![1.0, 2.0]; 4], &[0], &[2]);
        let r = train(&[e], &model(2)).unwrap();
        assert_eq!(r.state.theta, vec![0.0, 0.0]);
    }

    #[test]
    fn training_raises_annotated_probability() {
        let e = ex(vec![vec![1.0, 0.0], vec![0.0, 1.0]], &[], &[0]);
        let mut m = model(2);
        m.hyper.epochs = 10;
        let before = annotated_likelihood(&e, &m).unwrap();
        let after = annotated_likelihood(&e, &train(std::slice::from_ref(&e), &m).unwrap().state).unwrap();
        assert!(after > before);
    }

    #[test]
    fn large_lambda_keeps_theta_near_zero() {
        let e = ex(vec![vec![1.0, 0.0], vec![0.0, 1.0]], &[], &[0]);
        let mut m = model(2);
        m.hyper.lambda = 100.0;
        m.hyper.epochs = 50;
        let free = {
            let mut f = m.clone();
            f.hyper.lambda = 0.0;
            train(std::slice::from_ref(&e), &f).unwrap().state
        };
        let held = train(std::slice::from_ref(&e), &m).unwrap().state;
        let norm = |t: &[f64]| t.iter().map(|x| x.abs()).sum::<f64>();
        assert!(norm(&held.theta) < 0.1 * norm(&free.theta), "{:?}", held.theta);
    }

    #[test]
    fn metric_fixtures() {
        let first = ex(vec![vec![1.0], vec![0.0]], &[], &[0]);
        let m = {
            let mut m = model(1);
            m.theta = vec![1.0];
            m
        };
        let r = metrics(std::slice::from_ref(&first), &m).unwrap();
        assert_eq!((r.correctness, r.mrr), (1.0, 1.0));
        let second = ex(vec![vec![1.0], vec![0.0]], &[], &[1]);
        let r = metrics(std::slice::from_ref(&second), &m).unwrap();
        assert_eq!((r.correctness, r.mrr), (0.0, 0.5));
        let none = ex(vec![vec![1.0], vec![0.0]], &[], &[]);
        let r = metrics(std::slice::from_ref(&none), &m).unwrap();
        assert_eq!((r.correctness, r.mrr, r.answer_scored), (0.0, 0.0, 1));
        // Ties keep input order.
        assert_eq!(
            rank(&ex(vec![vec![0.0]; 3], &[], &[]), &model(1)).unwrap(),
            vec![0, 1, 2]
        );
    }

    #[test]
    fn majority_votes() {
        assert_eq!(aggregate_annotations(&[Some(2), Some(2), None]), BTreeSet::from([2]));
        assert!(aggregate_annotations(&[Some(1), Some(2), Some(3)]).is_empty());
        assert!(aggregate_annotations(&[None, None, Some(4)]).is_empty());
    }

    #[test]
    fn features() {
        let t = olympics();
        let f = parse_formula("R[City].Country.Greece").unwrap();
        let q = "Which city hosted in Greece?";
        assert_eq!(featurize(q, &t, &f), featurize(q, &t, &f));
        assert_eq!(featurize(q, &t, &f).len(), FEATURE_DIM);
        let base = NodeKind::ALL.len();
        let other = parse_formula("R[Year].Country.Greece").unwrap();
        assert!(featurize(q, &t, &f)[base + 1] > featurize(q, &t, &other)[base + 1]);
        let lit = featurize(q, &t, &parse_formula("Athens").unwrap());
        assert_eq!((lit[base], lit[base + 1]), (1.0, 0.0));
        assert_eq!(featurize(q, &t, &f)[base + 2], 1.0);
    }

    #[test]
    fn checkpoint_round_trip() {
        let mut m = model(3);
        m.theta = vec![0.5, -1.0, 0.0];
        let back = ModelState::from_json(&m.to_json()).unwrap();
        assert_eq!(back, m);
        let bad = m.to_json().replace("\"version\": 1", "\"version\": 9");
        assert_eq!(ModelState::from_json(&bad), Err(RerankError::Version(9)));
    }

    #[test]
    fn split_is_seeded_partition() {
        let data = synthetic_dataset(20, 3, 2, 1);
        let (a, b) = split(&data, 0.25, 9);
        assert_eq!((a.len(), b.len()), (15, 5));
        assert_eq!(split(&data, 0.25, 9), (a, b));
    }
}

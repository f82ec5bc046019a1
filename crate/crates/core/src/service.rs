//! Review-workflow backend over a data directory:
//!
//! ```text
//! DIR/tables/*.tsv|*.csv     tables, id = file stem
//! DIR/manifest.json          questions with candidate formulas
//! DIR/annotations.jsonl      append-only feedback log
//! DIR/model.json             reranker checkpoint
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::{evaluate, Denotation};
use crate::formula::{parse_formula, Formula, ParseError};
use crate::highlight::{highlight_with, AnnotationDocument, HighlightOptions};
use crate::rerank::{
    aggregate_annotations, featurize, metrics, rank, train, Candidate, Example, Hyperparameters, Metrics, ModelState,
    RerankError, TrainReport, FEATURE_DIM,
};
use crate::sql::{to_sql, SqlSchema};
use crate::table::{infer_value, Table, TableError, TableRegistry};
use crate::utterance::utter;

pub const DEFAULT_K: usize = 7;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("unknown question {0}")]
    UnknownQuestion(String),
    #[error("selection {selection} is not one of the {candidates} candidates")]
    InvalidSelection { selection: usize, candidates: usize },
    #[error("malformed manifest: {0}")]
    Manifest(String),
    #[error("candidate {position} of question {question_id}: {source}")]
    Candidate {
        question_id: String,
        position: usize,
        source: ParseError,
    },
    #[error("corrupt annotation store line {line}: {message}")]
    Store { line: usize, message: String },
    #[error(transparent)]
    Table(#[from] TableError),
    #[error(transparent)]
    Rerank(#[from] RerankError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl ServiceError {
    pub fn is_user_error(&self) -> bool {
        !matches!(self, ServiceError::Io(_) | ServiceError::Table(TableError::Io(_)))
    }
}

/// One manifest question.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Question {
    pub question_id: String,
    pub question: String,
    pub table_id: String,
    /// Gold answers as raw cell text.
    pub gold: Vec<String>,
    /// Candidate formulas in canonical text, in display order.
    pub candidates: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub questions: Vec<Question>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplainedCandidate {
    pub position: usize,
    pub formula: String,
    pub utterance: String,
    pub highlight: Option<AnnotationDocument>,
    pub result: Option<Denotation>,
    pub sql: Option<String>,
    /// Evaluation or translation failure, reported per candidate.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Feedback {
    pub question_id: String,
    pub worker_id: String,
    /// Manifest position, or `None` when no candidate is correct.
    pub selection: Option<usize>,
    #[serde(default)]
    pub elapsed_ms: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub question_id: String,
    pub worker_id: String,
    pub selection: Option<usize>,
    #[serde(default)]
    pub elapsed_ms: Option<u64>,
    /// Milliseconds since the Unix epoch.
    pub timestamp: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainRequest {
    pub epochs: Option<usize>,
    pub lr: Option<f64>,
    pub lambda: Option<f64>,
}

pub struct Service {
    dir: PathBuf,
    registry: TableRegistry,
    manifest: Manifest,
    index: BTreeMap<String, usize>,
    store: Mutex<()>,
    pub highlight: HighlightOptions,
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

impl Service {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, ServiceError> {
        let dir = dir.into();
        let registry = TableRegistry::scan(&dir.join("tables"))?;
        let raw = fs::read_to_string(dir.join("manifest.json"))?;
        let manifest: Manifest = serde_json::from_str(&raw).map_err(|e| ServiceError::Manifest(e.to_string()))?;
        let mut index = BTreeMap::new();
        for (i, q) in manifest.questions.iter().enumerate() {
            if index.insert(q.question_id.clone(), i).is_some() {
                return Err(ServiceError::Manifest(format!(
                    "duplicate question id {}",
                    q.question_id
                )));
            }
            for (position, c) in q.candidates.iter().enumerate() {
                parse_formula(c).map_err(|source| ServiceError::Candidate {
                    question_id: q.question_id.clone(),
                    position,
                    source,
                })?;
            }
        }
        Ok(Service {
            dir,
            registry,
            manifest,
            index,
            store: Mutex::new(()),
            highlight: HighlightOptions::default(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn questions(&self) -> &[Question] {
        &self.manifest.questions
    }

    pub fn question(&self, id: &str) -> Result<&Question, ServiceError> {
        self.index
            .get(id)
            .map(|&i| &self.manifest.questions[i])
            .ok_or_else(|| ServiceError::UnknownQuestion(id.to_string()))
    }

    pub fn table(&self, id: &str) -> Result<Table, ServiceError> {
        Ok(self.registry.load(id)?)
    }

    fn formulas(q: &Question) -> Vec<Formula> {
        q.candidates
            .iter()
            .map(|c| parse_formula(c).expect("validated on open"))
            .collect()
    }

    /// Explanations for the first `k` candidates, in manifest order. Read-only.
    pub fn explain(&self, question_id: &str, k: usize) -> Result<Vec<ExplainedCandidate>, ServiceError> {
        let q = self.question(question_id)?;
        let t = self.table(&q.table_id)?;
        let schema = SqlSchema::from_table(&t);
        Ok(Self::formulas(q)
            .into_iter()
            .take(k)
            .enumerate()
            .map(|(position, f)| {
                let mut errors = Vec::new();
                let result = evaluate(&f, &t).map_err(|e| errors.push(e.to_string())).ok();
                let highlight = highlight_with(&f, &t, &self.highlight)
                    .ok()
                    .filter(|_| result.is_some())
                    .map(|a| AnnotationDocument::new(q.table_id.clone(), &t, &a));
                let sql = to_sql(&f, &schema).map_err(|e| errors.push(e.to_string())).ok();
                errors.dedup();
                ExplainedCandidate {
                    position,
                    formula: f.to_string(),
                    utterance: utter(&f),
                    highlight,
                    result,
                    sql,
                    error: (!errors.is_empty()).then(|| errors.join("; ")),
                }
            })
            .collect())
    }

    fn store_path(&self) -> PathBuf {
        self.dir.join("annotations.jsonl")
    }

    /// Appends a feedback record; later records for the same worker and
    /// question supersede earlier ones.
    pub fn record_feedback(&self, fb: Feedback) -> Result<AnnotationRecord, ServiceError> {
        let q = self.question(&fb.question_id)?;
        if let Some(s) = fb.selection {
            if s >= q.candidates.len() {
                return Err(ServiceError::InvalidSelection {
                    selection: s,
                    candidates: q.candidates.len(),
                });
            }
        }
        let rec = AnnotationRecord {
            question_id: fb.question_id,
            worker_id: fb.worker_id,
            selection: fb.selection,
            elapsed_ms: fb.elapsed_ms,
            timestamp: now_ms(),
        };
        let line = serde_json::to_string(&rec).expect("record serializes");
        let _guard = self.store.lock().unwrap_or_else(|p| p.into_inner());
        let mut f = OpenOptions::new().create(true).append(true).open(self.store_path())?;
        writeln!(f, "{line}")?;
        f.flush()?;
        Ok(rec)
    }

    /// Latest record per (question, worker), in first-seen order.
    pub fn annotations(&self) -> Result<Vec<AnnotationRecord>, ServiceError> {
        let path = self.store_path();
        if !path.exists() {
            return Ok(Vec::new());
        }
        let mut order: Vec<(String, String)> = Vec::new();
        let mut latest: BTreeMap<(String, String), AnnotationRecord> = BTreeMap::new();
        for (i, line) in BufReader::new(File::open(path)?).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: AnnotationRecord = serde_json::from_str(&line).map_err(|e| ServiceError::Store {
                line: i + 1,
                message: e.to_string(),
            })?;
            let key = (rec.question_id.clone(), rec.worker_id.clone());
            if !latest.contains_key(&key) {
                order.push(key.clone());
            }
            latest.insert(key, rec);
        }
        Ok(order.into_iter().filter_map(|k| latest.remove(&k)).collect())
    }

    /// One vote per worker for `question_id`.
    pub fn votes(&self, question_id: &str) -> Result<Vec<Option<usize>>, ServiceError> {
        Ok(self
            .annotations()?
            .into_iter()
            .filter(|r| r.question_id == question_id)
            .map(|r| r.selection)
            .collect())
    }

    /// Every manifest question as a featurized example with majority annotations.
    pub fn dataset(&self) -> Result<Vec<Example>, ServiceError> {
        let records = self.annotations()?;
        let mut votes: BTreeMap<&str, Vec<Option<usize>>> = BTreeMap::new();
        for r in &records {
            votes.entry(&r.question_id).or_default().push(r.selection);
        }
        let mut tables: BTreeMap<String, Table> = BTreeMap::new();
        let mut out = Vec::new();
        for q in &self.manifest.questions {
            if !tables.contains_key(&q.table_id) {
                tables.insert(q.table_id.clone(), self.table(&q.table_id)?);
            }
            let t = &tables[&q.table_id];
            let candidates = Self::formulas(q)
                .into_iter()
                .map(|f| {
                    let features = featurize(&q.question, t, &f);
                    let result = evaluate(&f, t).ok();
                    Candidate::new(f, features, result)
                })
                .collect();
            out.push(Example {
                question_id: q.question_id.clone(),
                question: q.question.clone(),
                table_id: q.table_id.clone(),
                gold: q.gold.iter().map(|g| infer_value(g)).collect(),
                candidates,
                annotations: votes
                    .get(q.question_id.as_str())
                    .map(|v| aggregate_annotations(v))
                    .unwrap_or_default(),
            });
        }
        Ok(out)
    }

    fn model_path(&self) -> PathBuf {
        self.dir.join("model.json")
    }

    /// The saved checkpoint, or a zero model when none exists.
    pub fn model(&self) -> Result<ModelState, ServiceError> {
        let path = self.model_path();
        if !path.exists() {
            return Ok(ModelState::zeros(FEATURE_DIM, Hyperparameters::default()));
        }
        Ok(ModelState::from_json(&fs::read_to_string(path)?)?)
    }

    /// Retrains from the current model and saves the checkpoint.
    pub fn train(&self, req: &TrainRequest) -> Result<TrainReport, ServiceError> {
        let mut m = self.model()?;
        if let Some(e) = req.epochs {
            m.hyper.epochs = e;
        }
        if let Some(lr) = req.lr {
            m.hyper.learning_rate = lr;
        }
        if let Some(l) = req.lambda {
            m.hyper.lambda = l;
        }
        let report = train(&self.dataset()?, &m)?;
        let tmp = self.dir.join("model.json.tmp");
        fs::write(&tmp, report.state.to_json())?;
        fs::rename(tmp, self.model_path())?;
        Ok(report)
    }

    pub fn metrics(&self) -> Result<Metrics, ServiceError> {
        Ok(metrics(&self.dataset()?, &self.model()?)?)
    }

    /// The majority-annotated candidate if any, else the model's top candidate.
    pub fn hybrid_choice(&self, question_id: &str, m: &ModelState) -> Result<(usize, Formula), ServiceError> {
        let q = self.question(question_id)?;
        let annotated: BTreeSet<usize> = aggregate_annotations(&self.votes(question_id)?);
        let position = match annotated.first() {
            Some(&p) => p,
            None => {
                let e = self
                    .dataset()?
                    .into_iter()
                    .find(|e| e.question_id == question_id)
                    .expect("question is in the manifest");
                rank(&e, m)?[0]
            }
        };
        let f = Self::formulas(q).swap_remove(position);
        Ok((position, f))
    }
}

//! Reading and writing a synthesized automaton as a JSON document.
//!
//! The document is self-describing: `dim`, a list of locations (1-based
//! `id`, `flow`, `invariant` box), a list of transitions (`source`,
//! `target`, `guard` box), and the tube radius `epsilon`. Floats keep
//! their exact value across a write/read cycle.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::automaton::{AutomatonError, DiscreteStructure, IntervalBox, Lha};

#[derive(Debug, Error)]
pub enum ModelIoError {
    #[error("could not parse the model document: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("could not access {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("model has no locations")]
    NoLocations,
    #[error("location ids are 1-based, got {0}")]
    BadLocationId(usize),
    #[error("duplicate location id {0}")]
    DuplicateLocation(usize),
    #[error("transition references unknown location {0}")]
    UnknownLocation(usize),
    #[error("duplicate transition ({0}, {1})")]
    DuplicateTransition(usize, usize),
    #[error("location {id}: flow has dimension {got}, expected {expected}")]
    FlowDimensionMismatch {
        id: usize,
        got: usize,
        expected: usize,
    },
    #[error("location {0}: flow is not finite")]
    FlowNotFinite(usize),
    #[error("epsilon must be nonnegative and finite, got {0}")]
    BadEpsilon(f64),
    #[error(transparent)]
    Automaton(#[from] AutomatonError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxDoc {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxDoc {
    fn from_box(b: &IntervalBox) -> BoxDoc {
        BoxDoc {
            lo: b.lo().to_vec(),
            hi: b.hi().to_vec(),
        }
    }

    fn to_box(&self) -> Result<IntervalBox, AutomatonError> {
        IntervalBox::new(self.lo.clone(), self.hi.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocationDoc {
    /// 1-based.
    pub id: usize,
    pub flow: Vec<f64>,
    pub invariant: BoxDoc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionDoc {
    pub source: usize,
    pub target: usize,
    pub guard: BoxDoc,
}

/// The on-disk shape of a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub dim: usize,
    pub locations: Vec<LocationDoc>,
    pub transitions: Vec<TransitionDoc>,
    pub epsilon: f64,
}

impl ModelDocument {
    pub fn from_lha(lha: &Lha, epsilon: f64) -> ModelDocument {
        let locations = lha
            .structure
            .locations
            .iter()
            .map(|l| LocationDoc {
                id: l + 1,
                flow: lha.flows[l].clone(),
                invariant: BoxDoc::from_box(&lha.invariants[l]),
            })
            .collect();
        let transitions = lha
            .structure
            .edges
            .iter()
            .map(|(source, target)| TransitionDoc {
                source: source + 1,
                target: target + 1,
                guard: BoxDoc::from_box(&lha.guards[&(*source, *target)]),
            })
            .collect();
        ModelDocument {
            dim: lha.dim,
            locations,
            transitions,
            epsilon,
        }
    }

    /// Validates the document and converts it back to an automaton plus
    /// its radius.
    pub fn to_lha(&self) -> Result<(Lha, f64), ModelIoError> {
        if self.locations.is_empty() {
            return Err(ModelIoError::NoLocations);
        }
        if !self.epsilon.is_finite() || self.epsilon < 0.0 {
            return Err(ModelIoError::BadEpsilon(self.epsilon));
        }
        let mut flows = BTreeMap::new();
        let mut invariants = BTreeMap::new();
        for loc in &self.locations {
            if loc.id == 0 {
                return Err(ModelIoError::BadLocationId(0));
            }
            let label = loc.id - 1;
            if flows.contains_key(&label) {
                return Err(ModelIoError::DuplicateLocation(loc.id));
            }
            if loc.flow.len() != self.dim {
                return Err(ModelIoError::FlowDimensionMismatch {
                    id: loc.id,
                    got: loc.flow.len(),
                    expected: self.dim,
                });
            }
            if loc.flow.iter().any(|m| !m.is_finite()) {
                return Err(ModelIoError::FlowNotFinite(loc.id));
            }
            flows.insert(label, loc.flow.clone());
            invariants.insert(label, loc.invariant.to_box()?);
        }
        let mut guards = BTreeMap::new();
        for tr in &self.transitions {
            for end in [tr.source, tr.target] {
                if end == 0 || !flows.contains_key(&(end - 1)) {
                    return Err(ModelIoError::UnknownLocation(end));
                }
            }
            let edge = (tr.source - 1, tr.target - 1);
            if guards.contains_key(&edge) {
                return Err(ModelIoError::DuplicateTransition(tr.source, tr.target));
            }
            guards.insert(edge, tr.guard.to_box()?);
        }
        let lha = Lha {
            dim: self.dim,
            structure: DiscreteStructure {
                locations: flows.keys().copied().collect(),
                edges: guards.keys().copied().collect(),
            },
            flows,
            invariants,
            guards,
        };
        lha.validate()?;
        Ok((lha, self.epsilon))
    }
}

/// The model as pretty-printed JSON.
pub fn render_model(lha: &Lha, epsilon: f64) -> String {
    let doc = ModelDocument::from_lha(lha, epsilon);
    let mut out = serde_json::to_string_pretty(&doc).expect("the document shape is serializable");
    out.push('\n');
    out
}

pub fn parse_model_str(text: &str) -> Result<(Lha, f64), ModelIoError> {
    let doc: ModelDocument = serde_json::from_str(text)?;
    doc.to_lha()
}

pub fn write_model(path: &Path, lha: &Lha, epsilon: f64) -> Result<(), ModelIoError> {
    std::fs::write(path, render_model(lha, epsilon)).map_err(|source| ModelIoError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn read_model(path: &Path) -> Result<(Lha, f64), ModelIoError> {
    let text = std::fs::read_to_string(path).map_err(|source| ModelIoError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_model_str(&text)
}

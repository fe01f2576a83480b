//! Structured JSON interchange for problem sequences. Hessians travel as
//! flat row-major arrays; constants are rederived on load.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::benchmark::ProblemSequence;
use crate::error::{Error, Result};
use crate::model::{derive_constants, AmbientSet, QuadraticFunction, RoundPair};
use crate::point::Point;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadraticDoc {
    /// Row-major `dim * dim` entries.
    pub h: Vec<f64>,
    pub center: Vec<f64>,
    pub offset: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoundDoc {
    pub f: QuadraticDoc,
    pub g: QuadraticDoc,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AmbientDoc {
    pub center: Vec<f64>,
    pub radius: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemDocument {
    pub dim: usize,
    pub rounds: Vec<RoundDoc>,
    pub ambient: AmbientDoc,
    pub dist: f64,
    pub alpha: f64,
}

fn quadratic_to_doc(q: &QuadraticFunction) -> QuadraticDoc {
    QuadraticDoc {
        h: q.hessian().transpose().iter().copied().collect(),
        center: q.center().coords().to_vec(),
        offset: q.offset(),
    }
}

fn quadratic_from_doc(doc: &QuadraticDoc, dim: usize) -> Result<QuadraticFunction> {
    if doc.h.len() != dim * dim {
        return Err(Error::invalid(format!(
            "hessian needs {} row-major entries, found {}",
            dim * dim,
            doc.h.len()
        )));
    }
    let h = DMatrix::from_row_slice(dim, dim, &doc.h);
    QuadraticFunction::new(h, Point::new(doc.center.clone())?, doc.offset)
}

impl ProblemDocument {
    pub fn from_sequence(seq: &ProblemSequence) -> Self {
        ProblemDocument {
            dim: seq.ambient.center().dim(),
            rounds: seq
                .rounds
                .iter()
                .map(|r| RoundDoc {
                    f: quadratic_to_doc(&r.f),
                    g: quadratic_to_doc(&r.g),
                })
                .collect(),
            ambient: AmbientDoc {
                center: seq.ambient.center().coords().to_vec(),
                radius: seq.ambient.radius(),
            },
            dist: seq.constants.dist,
            alpha: seq.constants.alpha,
        }
    }

    /// Rebuilds the sequence; constants are rederived from the spectra and
    /// the start defaults to the ambient center.
    pub fn into_sequence(self) -> Result<ProblemSequence> {
        let ambient = AmbientSet::new(Point::new(self.ambient.center.clone())?, self.ambient.radius)?;
        if ambient.center().dim() != self.dim {
            return Err(Error::invalid("ambient center dimension disagrees with dim"));
        }
        let rounds: Vec<RoundPair> = self
            .rounds
            .iter()
            .map(|r| {
                RoundPair::new(
                    quadratic_from_doc(&r.f, self.dim)?,
                    quadratic_from_doc(&r.g, self.dim)?,
                )
            })
            .collect::<Result<_>>()?;
        let constants = derive_constants(&rounds, &ambient, self.dist, self.alpha)?;
        let start = ambient.center().clone();
        Ok(ProblemSequence {
            rounds,
            ambient,
            constants,
            start,
        })
    }

    /// Content digest of the sequence data, for reproducibility stamps.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update((self.dim as u64).to_le_bytes());
        let feed = |values: &[f64]| {
            let mut h = Sha256::new();
            for v in values {
                h.update(v.to_bits().to_le_bytes());
            }
            h.finalize()
        };
        for r in &self.rounds {
            for q in [&r.f, &r.g] {
                hasher.update(feed(&q.h));
                hasher.update(feed(&q.center));
                hasher.update(feed(&[q.offset]));
            }
        }
        hasher.update(feed(&self.ambient.center));
        hasher.update(feed(&[self.ambient.radius, self.dist, self.alpha]));
        hex::encode(&hasher.finalize()[..8])
    }
}

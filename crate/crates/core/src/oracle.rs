//! The restricted feedback channel: after an action is committed, the round
//! reveals the constraint value at the action, a local feasibility window, and
//! gradients at points of the algorithm's choice. Every answer is recorded in
//! a transcript; gradient query points are counted with set semantics.

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::{
    local_window_empty, BallSet, ConvexSet, IntersectionSet, ProjectionSettings, Region,
    SublevelSet,
};
use crate::model::{AmbientSet, RoundPair};
use crate::point::Point;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FnKind {
    Loss,
    Constraint,
}

impl std::fmt::Display for FnKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FnKind::Loss => write!(f, "f"),
            FnKind::Constraint => write!(f, "g"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum QueryKind {
    ConstraintValue,
    Gradient(FnKind),
    LocalSet,
}

impl std::fmt::Display for QueryKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            QueryKind::ConstraintValue => write!(f, "value_g"),
            QueryKind::Gradient(k) => write!(f, "grad_{k}"),
            QueryKind::LocalSet => write!(f, "local_set"),
        }
    }
}

/// One transcript row: what was asked, where, and a digest of the answer.
#[derive(Debug, Clone)]
pub struct QueryRecord {
    pub kind: QueryKind,
    pub point: Point,
    pub answer_digest: String,
}

fn digest_f64s<'a>(values: impl IntoIterator<Item = &'a f64>) -> String {
    let mut hasher = Sha256::new();
    for v in values {
        hasher.update(v.to_bits().to_le_bytes());
    }
    hex::encode(&hasher.finalize()[..6])
}

/// The revealed window `{g_t <= 0} ∩ B(a_t, dist)` (inside the ambient set),
/// exposed as a queryable handle: membership, projection, emptiness and
/// minimum-of-g, never the raw round data.
#[derive(Debug, Clone)]
pub struct LocalFeasibleSet {
    center: Point,
    radius: f64,
    constraint: SublevelSet,
    ambient: AmbientSet,
    empty: bool,
}

impl LocalFeasibleSet {
    pub fn center(&self) -> &Point {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn is_empty(&self) -> bool {
        self.empty
    }

    pub fn window(&self) -> Result<BallSet> {
        BallSet::new(self.center.clone(), self.radius)
    }

    pub fn contains(&self, x: &Point, tol: f64) -> bool {
        self.constraint.contains(x, tol)
            && x.dist(&self.center) <= self.radius + tol
            && self.ambient.contains(x, tol)
    }

    /// The window as a projection region: sublevel part, window ball, ambient ball.
    pub fn region(&self) -> Result<Region> {
        Ok(Region::Intersection(IntersectionSet::new(vec![
            ConvexSet::Sublevel(self.constraint.clone()),
            ConvexSet::Ball(self.window()?),
            ConvexSet::Ball(BallSet::new(
                self.ambient.center().clone(),
                self.ambient.radius(),
            )?),
        ])?))
    }

    pub fn project(&self, y: &Point, settings: &ProjectionSettings) -> Result<Point> {
        if self.empty {
            return Err(Error::InfeasibleSet("local window is empty".into()));
        }
        self.region()?.project(y, settings)
    }

    /// Minimum of the constraint over the window ball.
    pub fn min_constraint(&self) -> Result<(Point, f64)> {
        crate::geometry::min_over_ball(&self.constraint.g, &self.window()?)
    }
}

/// Per-round feedback gate. Holds the round privately; the algorithm can only
/// reach `f_t`/`g_t` through the queries below, all of which require a
/// committed action and land in the transcript.
pub struct RoundOracle<'a> {
    round: &'a RoundPair,
    ambient: &'a AmbientSet,
    dist: f64,
    action: Option<Point>,
    transcript: Vec<QueryRecord>,
    gradient_points: Vec<Point>,
}

impl<'a> RoundOracle<'a> {
    pub fn new(round: &'a RoundPair, ambient: &'a AmbientSet, dist: f64) -> Result<Self> {
        if !(dist.is_finite() && dist > 0.0) {
            return Err(Error::invalid("window radius must be finite and positive"));
        }
        Ok(RoundOracle {
            round,
            ambient,
            dist,
            action: None,
            transcript: Vec::new(),
            gradient_points: Vec::new(),
        })
    }

    pub fn commit(&mut self, action: Point) -> Result<()> {
        if self.action.is_some() {
            return Err(Error::protocol("action already committed for this round"));
        }
        if action.dim() != self.round.f.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.round.f.dim(),
                found: action.dim(),
            });
        }
        self.action = Some(action);
        Ok(())
    }

    fn committed(&self) -> Result<&Point> {
        self.action
            .as_ref()
            .ok_or_else(|| Error::protocol("query before an action was committed"))
    }

    pub fn committed_action(&self) -> Option<&Point> {
        self.action.as_ref()
    }

    /// `g_t(a_t)`, revealed once the action is committed.
    pub fn constraint_value(&mut self) -> Result<f64> {
        let a = self.committed()?.clone();
        let v = self.round.g.value(&a)?;
        self.transcript.push(QueryRecord {
            kind: QueryKind::ConstraintValue,
            point: a,
            answer_digest: digest_f64s([&v]),
        });
        Ok(v)
    }

    /// Gradient of the requested function at `x`. Budget overruns are
    /// recorded, not rejected; the per-round audit lives in the run log.
    pub fn gradient(&mut self, which: FnKind, x: &Point) -> Result<Point> {
        self.committed()?;
        if !self.ambient.contains(x, 1e-9) {
            return Err(Error::protocol(
                "gradient queries are only answered inside the ambient set",
            ));
        }
        let h = match which {
            FnKind::Loss => &self.round.f,
            FnKind::Constraint => &self.round.g,
        };
        let grad = h.gradient(x)?;
        if !self.gradient_points.iter().any(|p| p.bits_eq(x)) {
            self.gradient_points.push(x.clone());
        }
        self.transcript.push(QueryRecord {
            kind: QueryKind::Gradient(which),
            point: x.clone(),
            answer_digest: digest_f64s(grad.coords()),
        });
        Ok(grad)
    }

    /// The local feasibility window around the committed action.
    pub fn local_set(&mut self) -> Result<LocalFeasibleSet> {
        let a = self.committed()?.clone();
        let window = BallSet::new(a.clone(), self.dist)?;
        // Feasible centers make the window trivially nonempty; otherwise the
        // constrained minimum over the window decides.
        let empty = if self.round.g.value(&a)? <= 0.0 {
            false
        } else {
            local_window_empty(&self.round.g, &window)?
        };
        let set = LocalFeasibleSet {
            center: a.clone(),
            radius: self.dist,
            constraint: SublevelSet::new(self.round.g.clone()),
            ambient: self.ambient.clone(),
            empty,
        };
        let mut payload: Vec<f64> = Vec::new();
        payload.extend(a.coords());
        payload.push(self.dist);
        payload.push(if empty { 1.0 } else { 0.0 });
        payload.extend(self.round.g.hessian().iter());
        payload.extend(self.round.g.center().coords());
        payload.push(self.round.g.offset());
        self.transcript.push(QueryRecord {
            kind: QueryKind::LocalSet,
            point: a,
            answer_digest: digest_f64s(payload.iter()),
        });
        Ok(set)
    }

    /// Distinct gradient query points so far (bitwise point identity).
    pub fn gradient_points_used(&self) -> usize {
        self.gradient_points.len()
    }

    pub fn transcript(&self) -> &[QueryRecord] {
        &self.transcript
    }

    pub fn into_transcript(self) -> (Vec<QueryRecord>, usize) {
        let n = self.gradient_points.len();
        (self.transcript, n)
    }
}

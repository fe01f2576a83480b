//! The per-round update: classify the committed action against the revealed
//! constraint value (strictly feasible, boundary, infeasible), pick the
//! matching region or explicit gradient step, and produce the next action
//! from restricted feedback only.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BallSet, ConvexSet, IntersectionSet, ProjectionSettings, Region};
use crate::model::{AmbientSet, ConstantsBundle};
use crate::optimize::step_with_gradient;
use crate::oracle::{FnKind, QueryRecord, RoundOracle};
use crate::point::Point;

/// Width of the boundary band: the constraint value is compared against zero
/// only up to this tolerance.
pub const EPS_BOUNDARY: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RoundCase {
    StrictFeasibleBigBall,
    StrictFeasibleLocalSet,
    BoundaryLocalSet,
    InfeasibleGradientStep,
    InfeasibleLocalSet,
    InfeasibleEmptyLocal,
}

impl RoundCase {
    pub const ALL: [RoundCase; 6] = [
        RoundCase::StrictFeasibleBigBall,
        RoundCase::StrictFeasibleLocalSet,
        RoundCase::BoundaryLocalSet,
        RoundCase::InfeasibleGradientStep,
        RoundCase::InfeasibleLocalSet,
        RoundCase::InfeasibleEmptyLocal,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            RoundCase::StrictFeasibleBigBall => "strict_feasible_big_ball",
            RoundCase::StrictFeasibleLocalSet => "strict_feasible_local_set",
            RoundCase::BoundaryLocalSet => "boundary_local_set",
            RoundCase::InfeasibleGradientStep => "infeasible_gradient_step",
            RoundCase::InfeasibleLocalSet => "infeasible_local_set",
            RoundCase::InfeasibleEmptyLocal => "infeasible_empty_local",
        }
    }
}

impl std::fmt::Display for RoundCase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.name())
    }
}

/// Which branch the round takes, from revealed information only.
///
/// `grad_g` is required when the action is infeasible; the emptiness flag is
/// required only when the gradient-step guard fails.
pub fn classify_round(
    g_at: f64,
    grad_g: Option<&Point>,
    local_empty: Option<bool>,
    consts: &ConstantsBundle,
) -> Result<RoundCase> {
    let delta = safe_radius(g_at, consts);
    if g_at < -EPS_BOUNDARY {
        if delta >= consts.dist {
            Ok(RoundCase::StrictFeasibleBigBall)
        } else {
            Ok(RoundCase::StrictFeasibleLocalSet)
        }
    } else if g_at <= EPS_BOUNDARY {
        Ok(RoundCase::BoundaryLocalSet)
    } else {
        let grad = grad_g.ok_or_else(|| {
            Error::protocol("infeasible branch needs the constraint gradient at the action")
        })?;
        if delta >= grad.norm() / consts.l_g {
            Ok(RoundCase::InfeasibleGradientStep)
        } else {
            let empty = local_empty.ok_or_else(|| {
                Error::protocol("infeasible branch needs the local-window emptiness flag")
            })?;
            if empty {
                Ok(RoundCase::InfeasibleEmptyLocal)
            } else {
                Ok(RoundCase::InfeasibleLocalSet)
            }
        }
    }
}

/// `|g_t(a_t)| / (2 lip_g)`: the radius around the action whose feasibility
/// status is certified by the Lipschitz bound.
pub fn safe_radius(g_at: f64, consts: &ConstantsBundle) -> f64 {
    g_at.abs() / (2.0 * consts.lip_g)
}

#[derive(Debug, Clone)]
pub struct AlgorithmState {
    pub t: usize,
    pub action: Point,
    pub constants: ConstantsBundle,
}

impl AlgorithmState {
    pub fn new(start: Point, constants: ConstantsBundle) -> Result<Self> {
        constants.validate()?;
        Ok(AlgorithmState {
            t: 1,
            action: start,
            constants,
        })
    }
}

/// What one round produced, including the oracle transcript.
#[derive(Debug, Clone)]
pub struct RoundRecord {
    pub t: usize,
    pub case: RoundCase,
    pub action: Point,
    pub next_action: Point,
    pub safe_radius: f64,
    pub g_at_action: f64,
    pub gradient_points_used: usize,
    pub ambient_clipped: bool,
    pub queries: Vec<QueryRecord>,
}

/// Play one round against the oracle: commit the current action, gather the
/// revealed information, and apply the branch update.
pub fn advance(
    state: AlgorithmState,
    oracle: &mut RoundOracle,
    ambient: &AmbientSet,
    settings: &ProjectionSettings,
) -> Result<(AlgorithmState, RoundRecord)> {
    let consts = &state.constants;
    let action = state.action.clone();
    oracle.commit(action.clone())?;

    let g_at = oracle.constraint_value()?;
    let delta = safe_radius(g_at, consts);

    // Gather exactly the inputs the branch needs before classifying.
    let mut grad_g = None;
    let mut local = None;
    if g_at > EPS_BOUNDARY {
        let grad = oracle.gradient(FnKind::Constraint, &action)?;
        if delta < grad.norm() / consts.l_g {
            local = Some(oracle.local_set()?);
        }
        grad_g = Some(grad);
    }
    let case = classify_round(
        g_at,
        grad_g.as_ref(),
        local.as_ref().map(|l| l.is_empty()),
        consts,
    )?;

    let mu = 2.0 * consts.l_f;
    let next = match case {
        RoundCase::StrictFeasibleBigBall => {
            let region = Region::Intersection(IntersectionSet::new(vec![
                ConvexSet::Ball(BallSet::new(action.clone(), delta)?),
                ConvexSet::Ball(BallSet::new(ambient.center().clone(), ambient.radius())?),
            ])?);
            let grad_f = oracle.gradient(FnKind::Loss, &action)?;
            step_with_gradient(&action, &grad_f, mu, consts.alpha, &region, settings)?
        }
        RoundCase::StrictFeasibleLocalSet | RoundCase::BoundaryLocalSet => {
            let window = oracle.local_set()?;
            let region = window.region()?;
            let grad_f = oracle.gradient(FnKind::Loss, &action)?;
            step_with_gradient(&action, &grad_f, mu, consts.alpha, &region, settings)?
        }
        RoundCase::InfeasibleGradientStep => {
            let grad = grad_g.as_ref().expect("classified with gradient");
            if grad.norm() <= 1e-300 {
                return Err(Error::Degenerate(
                    "zero constraint gradient at a strictly infeasible action".into(),
                ));
            }
            let target = action.offset_by(grad, -1.0 / consts.l_g);
            action.mix_towards(&target, consts.alpha)
        }
        RoundCase::InfeasibleLocalSet => {
            let window = local.as_ref().expect("classified with local window");
            let entry = window.project(&action, settings)?;
            let region = window.region()?;
            let grad_f = oracle.gradient(FnKind::Loss, &entry)?;
            step_with_gradient(&entry, &grad_f, mu, consts.alpha, &region, settings)?
        }
        RoundCase::InfeasibleEmptyLocal => {
            let grad = grad_g.as_ref().expect("classified with gradient");
            let norm = grad.norm();
            if norm <= 1e-300 {
                return Err(Error::Degenerate(
                    "zero constraint gradient at a strictly infeasible action".into(),
                ));
            }
            let target = action.offset_by(grad, -consts.dist / norm);
            action.mix_towards(&target, consts.alpha)
        }
    };

    // The optimize branches keep the action inside the ambient set by
    // construction; the explicit gradient steps are clipped if they ever
    // leave it, which preserves the distance to any feasible comparator.
    let (next, ambient_clipped) = if ambient.contains(&next, 1e-12) {
        (next, false)
    } else {
        let ball = BallSet::new(ambient.center().clone(), ambient.radius())?;
        (crate::geometry::project_ball(&next, &ball), true)
    };

    let record = RoundRecord {
        t: state.t,
        case,
        action: action.clone(),
        next_action: next.clone(),
        safe_radius: delta,
        g_at_action: g_at,
        gradient_points_used: oracle.gradient_points_used(),
        ambient_clipped,
        queries: oracle.transcript().to_vec(),
    };
    let state = AlgorithmState {
        t: state.t + 1,
        action: next,
        constants: state.constants,
    };
    Ok((state, record))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{QuadraticFunction, RoundPair};

    fn pt(coords: &[f64]) -> Point {
        Point::new(coords.to_vec()).unwrap()
    }

    fn consts(lip_g: f64, l_g: f64, dist: f64, alpha: f64) -> ConstantsBundle {
        ConstantsBundle {
            nu_f: 1.0,
            nu_g: 1.0,
            l_f: 1.0,
            l_g,
            lip_f: 2.0,
            lip_g,
            grad_bound: 2.0f64.max(lip_g),
            diameter: 10.0,
            dist,
            alpha,
        }
    }

    #[test]
    fn classify_examples() {
        // deep strictly feasible action with a small window
        let c = consts(2.0, 2.0, 0.05, 0.5);
        assert_eq!(
            classify_round(-0.4, None, None, &c).unwrap(),
            RoundCase::StrictFeasibleBigBall
        );

        // boundary band
        assert_eq!(
            classify_round(0.0, None, None, &c).unwrap(),
            RoundCase::BoundaryLocalSet
        );
        assert_eq!(
            classify_round(5e-10, None, None, &c).unwrap(),
            RoundCase::BoundaryLocalSet
        );

        // infeasible with a failing gradient-step guard falls through to the window
        let c = consts(1.0, 2.0, 0.05, 0.5);
        let grad = pt(&[2.0, 0.0]);
        assert_eq!(
            classify_round(1.0, Some(&grad), Some(false), &c).unwrap(),
            RoundCase::InfeasibleLocalSet
        );
        assert_eq!(
            classify_round(1.0, Some(&grad), Some(true), &c).unwrap(),
            RoundCase::InfeasibleEmptyLocal
        );
    }

    #[test]
    fn classify_missing_inputs_are_protocol_errors() {
        let c = consts(1.0, 2.0, 0.05, 0.5);
        assert!(matches!(
            classify_round(1.0, None, None, &c),
            Err(Error::Protocol(_))
        ));
        let grad = pt(&[2.0, 0.0]);
        assert!(matches!(
            classify_round(1.0, Some(&grad), None, &c),
            Err(Error::Protocol(_))
        ));
    }

    #[test]
    fn advance_local_set_hand_example() {
        // f(x) = x^2/2, g(x) = x^2/2 - 1/2, a = 0.5, lip_g large so the
        // window branch fires; one damped step towards the minimizer.
        let ambient = AmbientSet::new(pt(&[0.0]), 10.0).unwrap();
        let f = QuadraticFunction::isotropic(1.0, pt(&[0.0]), 0.0).unwrap();
        let g = QuadraticFunction::isotropic(1.0, pt(&[0.0]), -0.5).unwrap();
        let round = RoundPair::new(f, g).unwrap();
        let c = consts(100.0, 1.0, 0.5, 0.5);
        let state = AlgorithmState::new(pt(&[0.5]), c).unwrap();
        let mut oracle = RoundOracle::new(&round, &ambient, 0.5).unwrap();
        let (next, rec) =
            advance(state, &mut oracle, &ambient, &ProjectionSettings::default()).unwrap();
        assert_eq!(rec.case, RoundCase::StrictFeasibleLocalSet);
        assert!((next.action.coords()[0] - 0.375).abs() < 1e-12);
        assert_eq!(next.t, 2);
    }

    #[test]
    fn advance_fixed_point_at_interior_optimum() {
        let ambient = AmbientSet::new(pt(&[0.0, 0.0]), 10.0).unwrap();
        let f = QuadraticFunction::isotropic(1.0, pt(&[0.1, 0.2]), 0.0).unwrap();
        let g = QuadraticFunction::isotropic(1.0, pt(&[0.0, 0.0]), -2.0).unwrap();
        let round = RoundPair::new(f, g).unwrap();
        let c = consts(10.0, 1.0, 0.05, 0.5);
        let state = AlgorithmState::new(pt(&[0.1, 0.2]), c).unwrap();
        let mut oracle = RoundOracle::new(&round, &ambient, 0.05).unwrap();
        let (next, _) =
            advance(state, &mut oracle, &ambient, &ProjectionSettings::default()).unwrap();
        assert!(next.action.dist(&pt(&[0.1, 0.2])) < 1e-12);
    }

    #[test]
    fn advance_infeasible_gradient_step_hand_example() {
        // g(x) = ||x||^2/2 - 1/2 at a = (3, 0): value 4, gradient (3, 0).
        // lip_g small enough makes the certified radius beat the step length.
        let ambient = AmbientSet::new(pt(&[0.0, 0.0]), 10.0).unwrap();
        let f = QuadraticFunction::isotropic(1.0, pt(&[0.0, 0.0]), 0.0).unwrap();
        let g = QuadraticFunction::isotropic(1.0, pt(&[0.0, 0.0]), -0.5).unwrap();
        let round = RoundPair::new(f, g).unwrap();
        let c = consts(0.5, 1.0, 0.5, 0.5);
        let state = AlgorithmState::new(pt(&[3.0, 0.0]), c).unwrap();
        let mut oracle = RoundOracle::new(&round, &ambient, 0.5).unwrap();
        let (next, rec) =
            advance(state, &mut oracle, &ambient, &ProjectionSettings::default()).unwrap();
        assert_eq!(rec.case, RoundCase::InfeasibleGradientStep);
        assert!(next.action.dist(&pt(&[1.5, 0.0])) < 1e-12);
        assert_eq!(rec.gradient_points_used, 1);
        // the stepped action is still infeasible
        assert!(round.g.value(&next.action).unwrap() > 0.0);
    }

    #[test]
    fn advance_infeasible_window_uses_two_gradient_points() {
        let ambient = AmbientSet::new(pt(&[0.0, 0.0]), 10.0).unwrap();
        let f = QuadraticFunction::isotropic(1.0, pt(&[0.0, 0.0]), 0.0).unwrap();
        let g = QuadraticFunction::isotropic(1.0, pt(&[0.0, 0.0]), -0.5).unwrap();
        let round = RoundPair::new(f, g).unwrap();
        // big lip_g defeats the gradient-step guard; window of radius 1 reaches
        // the unit disk from (1.5, 0)
        let c = consts(100.0, 1.0, 1.0, 0.5);
        let state = AlgorithmState::new(pt(&[1.5, 0.0]), c).unwrap();
        let mut oracle = RoundOracle::new(&round, &ambient, 1.0).unwrap();
        let (_, rec) =
            advance(state, &mut oracle, &ambient, &ProjectionSettings::default()).unwrap();
        assert_eq!(rec.case, RoundCase::InfeasibleLocalSet);
        assert_eq!(rec.gradient_points_used, 2);
    }
}

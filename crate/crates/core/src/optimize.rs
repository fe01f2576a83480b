//! The one-step damped projected-gradient update: project the gradient step
//! onto a convex region, then mix with the starting point.

use crate::error::{Error, Result};
use crate::geometry::{ProjectionSettings, Region};
use crate::model::QuadraticFunction;
use crate::point::Point;

/// Membership slack tolerated before the start is projected back into the
/// region (guards against accumulated projection drift).
pub const START_MEMBERSHIP_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct OptimizeRequest<'a> {
    pub h: &'a QuadraticFunction,
    pub region: &'a Region,
    /// Inverse step size; the contraction guarantee needs `mu >= smoothness(h)`.
    pub mu: f64,
    pub start: &'a Point,
    /// Mixing constant in (0, 1].
    pub alpha: f64,
    /// When set, a start outside the region is an error instead of being
    /// projected back in.
    pub strict: bool,
}

/// One update of the subroutine: `x+ = x + alpha * (Proj(x - grad/mu, region) - x)`.
///
/// This variant evaluates the gradient of `h` at the start itself; the online
/// algorithm uses [`step_with_gradient`] with an externally revealed gradient.
pub fn optimize_step(req: &OptimizeRequest, settings: &ProjectionSettings) -> Result<Point> {
    if req.mu < req.h.smoothness() {
        log::warn!(
            "inverse step size {} below smoothness {}: contraction guarantee void",
            req.mu,
            req.h.smoothness()
        );
    }
    let start = admit_start(req.start, req.region, req.strict, settings)?;
    let grad = req.h.gradient(&start)?;
    step_with_gradient(&start, &grad, req.mu, req.alpha, req.region, settings)
}

/// Same update, with the gradient supplied by the caller. This is the entry
/// point of the online algorithm, which only ever holds gradients revealed by
/// the round oracle.
pub fn step_with_gradient(
    start: &Point,
    gradient: &Point,
    mu: f64,
    alpha: f64,
    region: &Region,
    settings: &ProjectionSettings,
) -> Result<Point> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::invalid("alpha must lie in (0, 1]"));
    }
    if !(mu.is_finite() && mu > 0.0) {
        return Err(Error::invalid("inverse step size must be finite and positive"));
    }
    let target = region.project(&start.offset_by(gradient, -1.0 / mu), settings)?;
    Ok(start.mix_towards(&target, alpha))
}

fn admit_start(
    start: &Point,
    region: &Region,
    strict: bool,
    settings: &ProjectionSettings,
) -> Result<Point> {
    if region.contains(start, START_MEMBERSHIP_TOL) {
        return Ok(start.clone());
    }
    if strict {
        return Err(Error::invalid(
            "start lies outside the region beyond tolerance",
        ));
    }
    region.project(start, settings)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BallSet;
    use nalgebra::DMatrix;

    fn pt(coords: &[f64]) -> Point {
        Point::new(coords.to_vec()).unwrap()
    }

    fn iso(lambda: f64, center: &[f64]) -> QuadraticFunction {
        QuadraticFunction::isotropic(lambda, pt(center), 0.0).unwrap()
    }

    #[test]
    fn full_step_reaches_the_minimum() {
        let h = iso(1.0, &[0.0, 0.0]);
        let region = Region::Ball(BallSet::new(pt(&[0.0, 0.0]), 10.0).unwrap());
        let settings = ProjectionSettings::default();
        let req = OptimizeRequest {
            h: &h,
            region: &region,
            mu: 1.0,
            start: &pt(&[4.0, 0.0]),
            alpha: 1.0,
            strict: false,
        };
        let next = optimize_step(&req, &settings).unwrap();
        assert!(next.dist(&pt(&[0.0, 0.0])) < 1e-12);
    }

    #[test]
    fn half_step_mixes() {
        let h = iso(1.0, &[0.0, 0.0]);
        let region = Region::Ball(BallSet::new(pt(&[0.0, 0.0]), 10.0).unwrap());
        let req = OptimizeRequest {
            h: &h,
            region: &region,
            mu: 1.0,
            start: &pt(&[4.0, 0.0]),
            alpha: 0.5,
            strict: false,
        };
        let next = optimize_step(&req, &ProjectionSettings::default()).unwrap();
        assert!(next.dist(&pt(&[2.0, 0.0])) < 1e-12);
    }

    #[test]
    fn interior_minimizer_is_a_fixed_point() {
        let h = iso(2.0, &[0.5, -0.5]);
        let region = Region::Ball(BallSet::new(pt(&[0.0, 0.0]), 5.0).unwrap());
        let req = OptimizeRequest {
            h: &h,
            region: &region,
            mu: 4.0,
            start: h.center(),
            alpha: 0.7,
            strict: false,
        };
        let next = optimize_step(&req, &ProjectionSettings::default()).unwrap();
        assert!(next.dist(h.center()) < 1e-14);
    }

    #[test]
    fn strict_mode_rejects_outside_start() {
        let h = iso(1.0, &[0.0, 0.0]);
        let region = Region::Ball(BallSet::new(pt(&[0.0, 0.0]), 1.0).unwrap());
        let start = pt(&[2.0, 0.0]);
        let req = OptimizeRequest {
            h: &h,
            region: &region,
            mu: 1.0,
            start: &start,
            alpha: 0.5,
            strict: true,
        };
        assert!(optimize_step(&req, &ProjectionSettings::default()).is_err());
        let lax = OptimizeRequest { strict: false, ..req };
        assert!(optimize_step(&lax, &ProjectionSettings::default()).is_ok());
    }

    #[test]
    fn result_stays_in_the_region() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(17);
        let settings = ProjectionSettings::default();
        for _ in 0..100 {
            let n = 2;
            let m = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
            let h_m = &m * m.transpose() + DMatrix::identity(n, n) * rng.gen_range(0.2..1.0);
            let center = pt(&[rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)]);
            let h = QuadraticFunction::new(h_m, center, 0.0).unwrap();
            let ball = BallSet::new(pt(&[0.0, 0.0]), rng.gen_range(0.5..2.0)).unwrap();
            let start = {
                let raw = pt(&[rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]);
                crate::geometry::project_ball(&raw, &ball)
            };
            let region = Region::Ball(ball.clone());
            let req = OptimizeRequest {
                h: &h,
                region: &region,
                mu: h.smoothness() * rng.gen_range(1.0..3.0),
                start: &start,
                alpha: rng.gen_range(0.05..=1.0),
                strict: true,
            };
            let next = optimize_step(&req, &settings).unwrap();
            assert!(ball.contains(&next, 1e-9));
        }
    }
}

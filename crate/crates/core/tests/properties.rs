//! Property tests for the projection contracts and the damped step.

use nalgebra::DMatrix;
use proptest::prelude::*;

use oco_core::benchmark::minimize_over_region;
use oco_core::geometry::{
    project_ball, project_intersection, project_sublevel, BallSet, ConvexSet, IntersectionSet,
    ProjectionSettings, Region, SublevelSet,
};
use oco_core::model::QuadraticFunction;
use oco_core::optimize::{optimize_step, OptimizeRequest};
use oco_core::Point;

fn pt(coords: &[f64]) -> Point {
    Point::new(coords.to_vec()).unwrap()
}

fn rotated_pd(l1: f64, l2: f64, angle: f64) -> DMatrix<f64> {
    let (s, c) = angle.sin_cos();
    let r = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
    let d = DMatrix::from_row_slice(2, 2, &[l1, 0.0, 0.0, l2]);
    let h = &r * d * r.transpose();
    (&h + h.transpose()) * 0.5
}

fn coord() -> impl Strategy<Value = f64> {
    -3.0..3.0f64
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ball_projection_contract(
        x1 in coord(), y1 in coord(), x2 in coord(), y2 in coord(),
        cx in -1.0..1.0f64, cy in -1.0..1.0f64, radius in 0.2..2.0f64,
    ) {
        let ball = BallSet::new(pt(&[cx, cy]), radius).unwrap();
        let a = pt(&[x1, y1]);
        let b = pt(&[x2, y2]);
        let pa = project_ball(&a, &ball);
        let pb = project_ball(&b, &ball);
        prop_assert!(pa.dist(&ball.center) <= radius + 1e-12);
        prop_assert!(project_ball(&pa, &ball).dist(&pa) <= 1e-10);
        prop_assert!(pa.dist(&pb) <= a.dist(&b) + 1e-10);
    }

    #[test]
    fn sublevel_projection_contract(
        x1 in coord(), y1 in coord(), x2 in coord(), y2 in coord(),
        cx in -1.0..1.0f64, cy in -1.0..1.0f64,
        l1 in 0.5..3.0f64, l2 in 0.5..3.0f64, angle in 0.0..std::f64::consts::PI,
        level in 0.1..1.0f64,
    ) {
        let g = QuadraticFunction::new(rotated_pd(l1, l2, angle), pt(&[cx, cy]), -level).unwrap();
        let s = SublevelSet::new(g);
        let a = pt(&[x1, y1]);
        let b = pt(&[x2, y2]);
        let pa = project_sublevel(&a, &s).unwrap();
        let pb = project_sublevel(&b, &s).unwrap();
        prop_assert!(s.g.value(&pa).unwrap() <= 1e-8);
        prop_assert!(project_sublevel(&pa, &s).unwrap().dist(&pa) <= 1e-10);
        prop_assert!(pa.dist(&pb) <= a.dist(&b) + 1e-10);
        // projection moves along the outward normal
        if s.g.value(&a).unwrap() > 1e-9 {
            let d = a.sub(&pa);
            let grad = s.g.gradient(&pa).unwrap();
            let cos = d.dot(&grad) / (d.norm() * grad.norm());
            prop_assert!(cos >= 1.0 - 1e-9, "KKT direction broken: cos = {cos}");
        }
    }

    #[test]
    fn intersection_projection_contract(
        x1 in coord(), y1 in coord(), x2 in coord(), y2 in coord(),
        off in -0.5..0.5f64, radius in 0.4..1.5f64,
        l1 in 0.5..2.5f64, l2 in 0.5..2.5f64, angle in 0.0..std::f64::consts::PI,
        level in 0.2..0.8f64,
    ) {
        let g = QuadraticFunction::new(rotated_pd(l1, l2, angle), pt(&[0.0, 0.0]), -level).unwrap();
        // the ball center stays feasible, so the intersection is nonempty
        let anchor = project_sublevel(&pt(&[off, -off]), &SublevelSet::new(g.clone())).unwrap();
        let set = IntersectionSet::new(vec![
            ConvexSet::Ball(BallSet::new(anchor, radius).unwrap()),
            ConvexSet::Sublevel(SublevelSet::new(g)),
        ]).unwrap();
        let settings = ProjectionSettings::default();
        let a = pt(&[x1, y1]);
        let b = pt(&[x2, y2]);
        let pa = project_intersection(&a, &set, &settings).unwrap();
        let pb = project_intersection(&b, &set, &settings).unwrap();
        prop_assert!(set.contains(&pa, 1e-8));
        prop_assert!(project_intersection(&pa, &set, &settings).unwrap().dist(&pa) <= 1e-9);
        prop_assert!(pa.dist(&pb) <= a.dist(&b) + 1e-9);
    }

    #[test]
    fn damped_step_contracts_towards_the_region_optimum(
        sx in coord(), sy in coord(),
        cx in -2.0..2.0f64, cy in -2.0..2.0f64,
        l1 in 0.5..3.0f64, l2 in 0.5..3.0f64, angle in 0.0..std::f64::consts::PI,
        bx in -1.0..1.0f64, by in -1.0..1.0f64, radius in 0.3..1.5f64,
        mu_factor in 1.0..3.0f64, alpha in 0.05..1.0f64,
    ) {
        let h = QuadraticFunction::new(rotated_pd(l1, l2, angle), pt(&[cx, cy]), 0.0).unwrap();
        let ball = BallSet::new(pt(&[bx, by]), radius).unwrap();
        let region = Region::Ball(ball.clone());
        let settings = ProjectionSettings::tight();
        let start = project_ball(&pt(&[sx, sy]), &ball);
        let mu = mu_factor * h.smoothness();
        let req = OptimizeRequest {
            h: &h,
            region: &region,
            mu,
            start: &start,
            alpha,
            strict: true,
        };
        let next = optimize_step(&req, &settings).unwrap();
        prop_assert!(ball.contains(&next, 1e-9));
        let (x_star, _) = minimize_over_region(&h, &region, None, &settings).unwrap();
        let c = (1.0 - alpha * h.strong_convexity() / mu).sqrt();
        prop_assert!(
            x_star.dist(&next) <= c * x_star.dist(&start) + 1e-9,
            "contraction violated: {} > {} * {}",
            x_star.dist(&next), c, x_star.dist(&start)
        );
    }
}

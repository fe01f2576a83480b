//! Projections onto the convex sets the tracking update needs: balls,
//! quadratic sublevel sets, and their intersections (Dykstra), plus
//! minimization of a quadratic over a ball.

use crate::error::{Error, Result};
use crate::model::QuadraticFunction;
use crate::point::Point;

/// Feasibility threshold for the emptiness test of a local window.
pub const EPS_FEAS: f64 = 1e-12;

/// Tolerances of the iterative projections. Defaults match the documented
/// contracts; callers that feed projections into fixed-point loops tighten
/// `tol`.
#[derive(Debug, Clone, Copy)]
pub struct ProjectionSettings {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for ProjectionSettings {
    fn default() -> Self {
        ProjectionSettings {
            tol: 1e-10,
            max_iter: 10_000,
        }
    }
}

impl ProjectionSettings {
    pub fn tight() -> Self {
        ProjectionSettings {
            tol: 1e-13,
            max_iter: 200_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BallSet {
    pub center: Point,
    pub radius: f64,
}

impl BallSet {
    pub fn new(center: Point, radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::invalid("ball radius must be finite and positive"));
        }
        Ok(BallSet { center, radius })
    }

    pub fn contains(&self, x: &Point, tol: f64) -> bool {
        x.dist(&self.center) <= self.radius + tol
    }
}

/// `{x : g(x) <= 0}` for a positive definite quadratic `g`; nonempty iff the
/// offset of `g` is nonpositive.
#[derive(Debug, Clone)]
pub struct SublevelSet {
    pub g: QuadraticFunction,
}

impl SublevelSet {
    pub fn new(g: QuadraticFunction) -> Self {
        SublevelSet { g }
    }

    pub fn is_empty(&self) -> bool {
        self.g.offset() > 0.0
    }

    pub fn contains(&self, x: &Point, value_tol: f64) -> bool {
        self.g.value(x).map(|v| v <= value_tol).unwrap_or(false)
    }
}

#[derive(Debug, Clone)]
pub enum ConvexSet {
    Ball(BallSet),
    Sublevel(SublevelSet),
}

impl ConvexSet {
    pub fn project(&self, y: &Point) -> Result<Point> {
        match self {
            ConvexSet::Ball(b) => Ok(project_ball(y, b)),
            ConvexSet::Sublevel(s) => project_sublevel(y, s),
        }
    }

    /// Membership up to a tolerance: Euclidean slack for balls, value slack
    /// scaled by the local gradient for sublevel sets.
    pub fn contains(&self, x: &Point, tol: f64) -> bool {
        match self {
            ConvexSet::Ball(b) => b.contains(x, tol),
            ConvexSet::Sublevel(s) => match (s.g.value(x), s.g.gradient(x)) {
                (Ok(v), Ok(grad)) => v <= tol * (1.0 + grad.norm()),
                _ => false,
            },
        }
    }
}

/// Ordered intersection of two or three convex parts.
#[derive(Debug, Clone)]
pub struct IntersectionSet {
    pub parts: Vec<ConvexSet>,
}

impl IntersectionSet {
    pub fn new(parts: Vec<ConvexSet>) -> Result<Self> {
        if parts.len() < 2 || parts.len() > 3 {
            return Err(Error::invalid("intersection takes 2 or 3 parts"));
        }
        Ok(IntersectionSet { parts })
    }

    pub fn contains(&self, x: &Point, tol: f64) -> bool {
        self.parts.iter().all(|p| p.contains(x, tol))
    }
}

/// The region argument of the damped projected-gradient step.
#[derive(Debug, Clone)]
pub enum Region {
    Ball(BallSet),
    Intersection(IntersectionSet),
}

impl Region {
    pub fn contains(&self, x: &Point, tol: f64) -> bool {
        match self {
            Region::Ball(b) => b.contains(x, tol),
            Region::Intersection(s) => s.contains(x, tol),
        }
    }

    pub fn project(&self, y: &Point, settings: &ProjectionSettings) -> Result<Point> {
        match self {
            Region::Ball(b) => Ok(project_ball(y, b)),
            Region::Intersection(s) => project_intersection(y, s, settings),
        }
    }
}

/// Closed-form projection onto a ball. Total: interior points are fixed,
/// exterior points are scaled radially onto the sphere.
pub fn project_ball(y: &Point, ball: &BallSet) -> Point {
    let d = y.dist(&ball.center);
    if d <= ball.radius {
        return y.clone();
    }
    ball.center
        .offset_by(&y.sub(&ball.center), ball.radius / d)
}

/// Projection onto `{g <= 0}` for quadratic `g`, via the scalar KKT
/// multiplier in the eigenbasis of the Hessian: `x(t) = c + Q diag(1/(1+t*l_i)) Q'(y-c)`
/// with `g(x(t)) = 0`, bracketing then safeguarded Newton on `t`.
pub fn project_sublevel(y: &Point, s: &SublevelSet) -> Result<Point> {
    if s.is_empty() {
        return Err(Error::InfeasibleSet(
            "sublevel set {g <= 0} is empty (positive offset)".into(),
        ));
    }
    let gy = s.g.value(y)?;
    if gy <= 0.0 {
        return Ok(y.clone());
    }
    // Degenerate single-point set {center}.
    if s.g.offset() == 0.0 {
        return Ok(s.g.center().clone());
    }

    let w = s.g.eigvecs().transpose() * (y.as_vector() - s.g.center().as_vector());
    let lam = s.g.eigvals();
    let level = |t: f64| -> f64 {
        let mut v = s.g.offset();
        for i in 0..w.len() {
            let xi = w[i] / (1.0 + t * lam[i]);
            v += 0.5 * lam[i] * xi * xi;
        }
        v
    };
    let slope = |t: f64| -> f64 {
        let mut d = 0.0;
        for i in 0..w.len() {
            let denom = 1.0 + t * lam[i];
            let xi = w[i] / denom;
            d -= lam[i] * lam[i] * xi * xi / denom;
        }
        d
    };

    // Bracket the root: level(0) = g(y) > 0 and level decreases to offset < 0.
    let mut lo = 0.0;
    let mut hi = 1.0 / s.g.smoothness();
    let mut guard = 0;
    while level(hi) > 0.0 {
        lo = hi;
        hi *= 2.0;
        guard += 1;
        if guard > 1_000 {
            return Err(Error::Numerical {
                context: "project_sublevel bracket",
                residual: level(hi),
                iterations: guard,
            });
        }
    }

    let mut t = 0.5 * (lo + hi);
    let mut value = level(t);
    for _ in 0..200 {
        if value > 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        let d = slope(t);
        let newton = t - value / d;
        t = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        value = level(t);
        if value.abs() <= 1e-14 * (1.0 + gy.abs()) || (hi - lo) <= f64::EPSILON * (1.0 + t) {
            break;
        }
    }

    let mut xi = w.clone();
    for i in 0..xi.len() {
        xi[i] /= 1.0 + t * lam[i];
    }
    Point::from_vector(s.g.center().as_vector() + s.g.eigvecs() * xi)
}

/// Dykstra's alternating projections onto an intersection of convex parts.
/// Converges to the nearest point of the intersection; stops once a full
/// cycle moves the iterate less than `settings.tol`.
pub fn project_intersection(
    y: &Point,
    set: &IntersectionSet,
    settings: &ProjectionSettings,
) -> Result<Point> {
    // Single-active shortcut: a part's exact projection that the other parts
    // already contain minimizes the distance over a superset of the
    // intersection while lying inside it, so it is the projection. This also
    // sidesteps Dykstra's slow tangential mode on thin lens intersections.
    if set.parts.iter().all(|p| p.contains(y, 1e-12)) {
        return Ok(y.clone());
    }
    for (i, part) in set.parts.iter().enumerate() {
        let candidate = part.project(y)?;
        let feasible = set
            .parts
            .iter()
            .enumerate()
            .all(|(j, other)| j == i || other.contains(&candidate, 1e-12));
        if feasible {
            return Ok(candidate);
        }
    }

    let mut x = y.clone();
    let mut corrections: Vec<Point> = vec![Point::zeros(y.dim())?; set.parts.len()];
    let mut residual = f64::INFINITY;
    let mut best = f64::INFINITY;
    let mut stagnant = 0usize;
    for cycle in 0..settings.max_iter {
        let cycle_start = x.clone();
        for (part, corr) in set.parts.iter().zip(corrections.iter_mut()) {
            let z = x.add(corr);
            let projected = part.project(&z)?;
            *corr = z.sub(&projected);
            x = projected;
        }
        residual = x.dist(&cycle_start);
        if residual < settings.tol {
            return Ok(x);
        }
        // Rounding can floor the cycle movement just above the tolerance;
        // accept once meaningful progress has stopped within a small factor
        // of it. Ulp-level wiggle does not count as progress.
        if residual < best * 0.999 {
            best = residual;
            stagnant = 0;
        } else {
            stagnant += 1;
            if stagnant >= 32 && best <= settings.tol * 64.0 {
                return Ok(x);
            }
        }
        // Nearly tangent boundaries (thin lens intersections) drive the
        // alternating-projection rate towards one; once that shows, solve
        // the two-constraint stationarity system directly, seeded by the
        // accumulated corrections.
        if cycle == 512 {
            if let Some(exact) = corner_rescue(y, set, &x, &corrections) {
                return Ok(exact);
            }
        }
    }
    Err(Error::Numerical {
        context: "project_intersection (Dykstra)",
        residual,
        iterations: settings.max_iter,
    })
}

/// Quadratic form of one part: `q(x) = 1/2 (x-c)' H (x-c) + beta <= 0`.
/// Balls are the isotropic case with `beta = -r^2 / 2`.
fn part_quadratic(part: &ConvexSet, dim: usize) -> (nalgebra::DMatrix<f64>, Point, f64) {
    match part {
        ConvexSet::Ball(b) => (
            nalgebra::DMatrix::identity(dim, dim),
            b.center.clone(),
            -0.5 * b.radius * b.radius,
        ),
        ConvexSet::Sublevel(s) => (s.g.hessian().clone(), s.g.center().clone(), s.g.offset()),
    }
}

/// Projection onto an intersection whose solution has exactly two active
/// parts: Newton on the two KKT multipliers. Returns the point only if the
/// full optimality certificate holds (boundary residuals, nonnegative
/// multipliers, remaining parts feasible), so a `Some` answer is exact.
fn corner_rescue(
    y: &Point,
    set: &IntersectionSet,
    current: &Point,
    corrections: &[Point],
) -> Option<Point> {
    let dim = y.dim();
    // the two parts Dykstra is actually fighting over
    let mut order: Vec<usize> = (0..set.parts.len()).collect();
    order.sort_by(|a, b| {
        corrections[*b]
            .norm()
            .partial_cmp(&corrections[*a].norm())
            .unwrap()
    });
    let (i, j) = (order[0], order[1]);
    let (h_i, c_i, beta_i) = part_quadratic(&set.parts[i], dim);
    let (h_j, c_j, beta_j) = part_quadratic(&set.parts[j], dim);

    let value = |h: &nalgebra::DMatrix<f64>, c: &Point, beta: f64, x: &Point| -> f64 {
        let d = x.as_vector() - c.as_vector();
        0.5 * (h * &d).dot(&d) + beta
    };
    let grad_vec = |h: &nalgebra::DMatrix<f64>, c: &Point, x: &Point| -> nalgebra::DVector<f64> {
        h * (x.as_vector() - c.as_vector())
    };

    // multiplier seeds from the correction magnitudes
    let seed = |idx: usize, h: &nalgebra::DMatrix<f64>, c: &Point| -> f64 {
        let g = (h * (current.as_vector() - c.as_vector())).norm();
        if g > 1e-12 {
            (corrections[idx].norm() / g).max(1e-6)
        } else {
            1e-6
        }
    };
    let mut lam = [seed(i, &h_i, &c_i), seed(j, &h_j, &c_j)];

    let eye = nalgebra::DMatrix::identity(dim, dim);
    let solve_x = |lam: &[f64; 2]| -> Option<Point> {
        let m = &eye + &h_i * lam[0] + &h_j * lam[1];
        let rhs = y.as_vector()
            + (&h_i * c_i.as_vector()) * lam[0]
            + (&h_j * c_j.as_vector()) * lam[1];
        let x = m.lu().solve(&rhs)?;
        Point::from_vector(x).ok()
    };

    let mut x = solve_x(&lam)?;
    let mut res = [
        value(&h_i, &c_i, beta_i, &x),
        value(&h_j, &c_j, beta_j, &x),
    ];
    for _ in 0..200 {
        let scale_i = 1.0 + beta_i.abs();
        let scale_j = 1.0 + beta_j.abs();
        if res[0].abs() <= 1e-13 * scale_i && res[1].abs() <= 1e-13 * scale_j {
            break;
        }
        let m = &eye + &h_i * lam[0] + &h_j * lam[1];
        let lu = m.lu();
        let gi = grad_vec(&h_i, &c_i, &x);
        let gj = grad_vec(&h_j, &c_j, &x);
        let si = lu.solve(&gi)?;
        let sj = lu.solve(&gj)?;
        // J_ab = -grad_a' M^-1 grad_b
        let j00 = -gi.dot(&si);
        let j01 = -gi.dot(&sj);
        let j10 = -gj.dot(&si);
        let j11 = -gj.dot(&sj);
        let det = j00 * j11 - j01 * j10;
        if det.abs() < 1e-300 {
            return None;
        }
        let d0 = (-res[0] * j11 + res[1] * j01) / det;
        let d1 = (-res[1] * j00 + res[0] * j10) / det;

        // backtrack on the residual norm, keeping multipliers nonnegative
        let norm_before = res[0].hypot(res[1]);
        let mut step = 1.0;
        let mut improved = false;
        for _ in 0..40 {
            let trial = [(lam[0] + step * d0).max(0.0), (lam[1] + step * d1).max(0.0)];
            if let Some(xt) = solve_x(&trial) {
                let rt = [
                    value(&h_i, &c_i, beta_i, &xt),
                    value(&h_j, &c_j, beta_j, &xt),
                ];
                if rt[0].hypot(rt[1]) < norm_before {
                    lam = trial;
                    x = xt;
                    res = rt;
                    improved = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !improved {
            return None;
        }
    }

    // optimality certificate
    let scale_i = 1.0 + beta_i.abs();
    let scale_j = 1.0 + beta_j.abs();
    if res[0].abs() > 1e-12 * scale_i || res[1].abs() > 1e-12 * scale_j {
        return None;
    }
    if lam[0] < 0.0 || lam[1] < 0.0 {
        return None;
    }
    for (k, part) in set.parts.iter().enumerate() {
        if k != i && k != j && !part.contains(&x, 1e-12) {
            return None;
        }
    }
    Some(x)
}

/// Minimum of a quadratic over a ball by projected gradient descent with
/// step `1/lambda_max`; linear convergence from strong convexity.
pub fn min_over_ball(g: &QuadraticFunction, ball: &BallSet) -> Result<(Point, f64)> {
    if ball.contains(g.center(), 0.0) {
        let v = g.value(g.center())?;
        return Ok((g.center().clone(), v));
    }
    let step = 1.0 / g.smoothness();
    let mut x = project_ball(g.center(), ball);
    for _ in 0..2_000_000 {
        let grad = g.gradient(&x)?;
        let next = project_ball(&x.offset_by(&grad, -step), ball);
        let moved = next.dist(&x);
        x = next;
        if moved < 1e-12 {
            break;
        }
    }
    let v = g.value(&x)?;
    Ok((x, v))
}

/// Emptiness of the local window `{g <= 0} ∩ B(center, radius)`.
pub fn local_window_empty(g: &QuadraticFunction, window: &BallSet) -> Result<bool> {
    let (_, min_g) = min_over_ball(g, window)?;
    Ok(min_g > EPS_FEAS)
}

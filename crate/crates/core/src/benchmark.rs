//! Sequence generation with controllable minimizer path length, ground-truth
//! offline optima, tracking metrics, and the bound checks every run is held
//! against.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::algorithm::{advance, AlgorithmState, RoundCase, RoundRecord};
use crate::error::{Error, Result};
use crate::geometry::{
    min_over_ball, BallSet, ConvexSet, IntersectionSet, ProjectionSettings, Region, SublevelSet,
    EPS_FEAS,
};
use crate::model::{derive_constants, AmbientSet, ConstantsBundle, QuadraticFunction, RoundPair};
use crate::oracle::RoundOracle;
use crate::point::Point;

/// Where the first action is placed relative to the first constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartMode {
    #[default]
    AmbientCenter,
    Boundary,
    InfeasibleNear,
    InfeasibleFar,
}

/// Recipe for a problem sequence. Deterministic given the seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SequenceSpec {
    pub dim: usize,
    pub horizon: usize,
    pub ambient_radius: f64,
    /// Per-round drift magnitude of the loss minimizer.
    pub f_drift: f64,
    /// Per-round drift magnitude of the constraint center.
    pub g_drift: f64,
    /// Depth of the constraint at its own center (`g(center) = -g_level`).
    pub g_level: f64,
    /// Eigenvalue range of the loss Hessians.
    pub eig_f: (f64, f64),
    /// Eigenvalue range of the constraint Hessians.
    pub eig_g: (f64, f64),
    pub dist: f64,
    pub alpha: f64,
    pub seed: u64,
    #[serde(default)]
    pub start: StartMode,
    /// Draw one eigenvalue per round instead of one per axis.
    #[serde(default = "default_true")]
    pub f_isotropic: bool,
    #[serde(default = "default_true")]
    pub g_isotropic: bool,
    /// Optional a-priori smoothness bound for the constraint family. The
    /// derived bound is raised to at least this value; any value above the
    /// realized spectra is a valid Lipschitz modulus and widens the
    /// gradient-step branch without voiding the guarantees.
    #[serde(default)]
    pub g_smoothness_floor: Option<f64>,
}

fn default_true() -> bool {
    true
}

impl SequenceSpec {
    pub fn validate(&self) -> Result<()> {
        if self.dim < 1 {
            return Err(Error::invalid("dimension must be at least 1"));
        }
        if self.horizon < 1 {
            return Err(Error::invalid("horizon must be at least 1"));
        }
        if !(self.ambient_radius > 0.0 && self.ambient_radius.is_finite()) {
            return Err(Error::invalid("ambient radius must be positive"));
        }
        if self.f_drift < 0.0 || self.g_drift < 0.0 {
            return Err(Error::invalid("drift magnitudes must be nonnegative"));
        }
        if self.g_level <= 0.0 || !self.g_level.is_finite() {
            return Err(Error::invalid("g level must be positive"));
        }
        for (lo, hi) in [self.eig_f, self.eig_g] {
            if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
                return Err(Error::invalid(
                    "eigenvalue ranges must satisfy 0 < lo <= hi",
                ));
            }
        }
        if !(self.dist > 0.0 && self.dist.is_finite()) {
            return Err(Error::invalid("dist must be positive"));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::invalid("alpha must lie in (0, 1]"));
        }
        if let Some(fl) = self.g_smoothness_floor {
            if !(fl > 0.0 && fl.is_finite()) {
                return Err(Error::invalid("smoothness floor must be positive"));
            }
        }
        Ok(())
    }
}

/// A generated sequence with its derived constants and starting action.
#[derive(Debug, Clone)]
pub struct ProblemSequence {
    pub rounds: Vec<RoundPair>,
    pub ambient: AmbientSet,
    pub constants: ConstantsBundle,
    pub start: Point,
}

fn gaussian(rng: &mut ChaCha12Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn unit_direction(rng: &mut ChaCha12Rng, dim: usize) -> Point {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| gaussian(rng)).collect();
        let p = Point::new(v).expect("gaussian draws are finite");
        let n = p.norm();
        if n > 1e-9 {
            return p.scale(1.0 / n);
        }
    }
}

/// Random-walk step of fixed length that stays inside `B(center, radius)`:
/// directions are redrawn until the step lands inside, falling back to a
/// step straight towards the center.
fn confined_step(
    rng: &mut ChaCha12Rng,
    from: &Point,
    step: f64,
    center: &Point,
    radius: f64,
) -> Point {
    if step == 0.0 {
        return from.clone();
    }
    for _ in 0..10_000 {
        let cand = from.offset_by(&unit_direction(rng, from.dim()), step);
        if cand.dist(center) <= radius {
            return cand;
        }
    }
    let inward = center.sub(from);
    let n = inward.norm();
    if n <= 1e-12 {
        from.offset_by(&unit_direction(rng, from.dim()), step.min(radius))
    } else {
        from.offset_by(&inward, step / n)
    }
}

fn random_hessian(
    rng: &mut ChaCha12Rng,
    dim: usize,
    range: (f64, f64),
    isotropic: bool,
) -> DMatrix<f64> {
    if isotropic || dim == 1 {
        let lambda = rng.gen_range(range.0..=range.1);
        return DMatrix::identity(dim, dim) * lambda;
    }
    let eigs: Vec<f64> = (0..dim).map(|_| rng.gen_range(range.0..=range.1)).collect();
    let gauss = DMatrix::from_fn(dim, dim, |_, _| gaussian(rng));
    let q = gauss.qr().q();
    let lambda = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(eigs));
    let h = &q * lambda * q.transpose();
    (&h + h.transpose()) * 0.5
}

/// Instantiates the adversary: drifting quadratic pairs whose feasible
/// ellipsoids stay strictly inside the ambient ball and whose loss
/// minimizers stay strictly feasible.
pub fn generate_sequence(spec: &SequenceSpec) -> Result<ProblemSequence> {
    spec.validate()?;
    let mut rng = ChaCha12Rng::seed_from_u64(spec.seed);
    let ambient = AmbientSet::new(Point::zeros(spec.dim)?, spec.ambient_radius)?;

    // Largest/smallest semi-axis of any realized feasible ellipsoid.
    let axis_max = (2.0 * spec.g_level / spec.eig_g.0).sqrt();
    let axis_min = (2.0 * spec.g_level / spec.eig_g.1).sqrt();
    let center_cap = spec.ambient_radius - axis_max - 0.05 * spec.ambient_radius;
    if center_cap < 0.0 {
        return Err(Error::invalid(
            "feasible ellipsoid does not fit inside the ambient set; shrink g_level or grow the radius",
        ));
    }
    let interior_cap = 0.7 * axis_min;
    if spec.f_drift > 0.9 * interior_cap {
        return Err(Error::invalid(
            "loss drift exceeds the strictly feasible interior; shrink f_drift or grow g_level",
        ));
    }
    if spec.g_drift > 0.0 && spec.g_drift > center_cap.max(1e-12) {
        return Err(Error::invalid("constraint drift exceeds the admissible band"));
    }

    let origin = Point::zeros(spec.dim)?;
    let mut g_center = if center_cap > 0.0 {
        origin.offset_by(
            &unit_direction(&mut rng, spec.dim),
            rng.gen_range(0.0..=0.3 * center_cap),
        )
    } else {
        origin.clone()
    };
    let mut interior_offset = origin.offset_by(
        &unit_direction(&mut rng, spec.dim),
        rng.gen_range(0.0..=0.5 * interior_cap),
    );

    let mut rounds = Vec::with_capacity(spec.horizon);
    for t in 0..spec.horizon {
        if t > 0 {
            g_center = confined_step(&mut rng, &g_center, spec.g_drift, &origin, center_cap);
            interior_offset = confined_step(
                &mut rng,
                &interior_offset,
                spec.f_drift,
                &origin,
                interior_cap,
            );
        }
        let h_g = random_hessian(&mut rng, spec.dim, spec.eig_g, spec.g_isotropic);
        let g = QuadraticFunction::new(h_g, g_center.clone(), -spec.g_level)?;
        let h_f = random_hessian(&mut rng, spec.dim, spec.eig_f, spec.f_isotropic);
        let f = QuadraticFunction::new(h_f, g_center.add(&interior_offset), 0.0)?;
        rounds.push(RoundPair::new(f, g)?);
    }

    let mut constants = derive_constants(&rounds, &ambient, spec.dist, spec.alpha)?;
    if let Some(floor) = spec.g_smoothness_floor {
        constants.l_g = constants.l_g.max(floor);
    }

    let start = place_start(&mut rng, spec, &rounds[0], &ambient)?;
    Ok(ProblemSequence {
        rounds,
        ambient,
        constants,
        start,
    })
}

fn place_start(
    rng: &mut ChaCha12Rng,
    spec: &SequenceSpec,
    first: &RoundPair,
    ambient: &AmbientSet,
) -> Result<Point> {
    let mode = spec.start;
    if mode == StartMode::AmbientCenter {
        return Ok(ambient.center().clone());
    }
    let u = unit_direction(rng, spec.dim);
    let curvature = (first.g.hessian() * u.as_vector()).dot(u.as_vector());
    let boundary_reach = (2.0 * spec.g_level / curvature).sqrt();
    let boundary = first.g.center().offset_by(&u, boundary_reach);
    match mode {
        StartMode::AmbientCenter => unreachable!(),
        StartMode::Boundary => Ok(boundary),
        StartMode::InfeasibleNear => Ok(first
            .g
            .center()
            .offset_by(&u, boundary_reach + 0.4 * spec.dist)),
        StartMode::InfeasibleFar => {
            // Push out until the local window is certified empty, staying
            // inside the ambient set.
            let room = 0.95 * ambient.radius() - boundary.norm();
            let mut push = (3.0 * spec.dist).min(room.max(0.0));
            for _ in 0..8 {
                let cand = first.g.center().offset_by(&u, boundary_reach + push);
                if !ambient.contains(&cand, 0.0) {
                    push *= 0.7;
                    continue;
                }
                let window = BallSet::new(cand.clone(), spec.dist)?;
                if crate::geometry::local_window_empty(&first.g, &window)? {
                    return Ok(cand);
                }
                push *= 1.5;
            }
            Ok(first.g.center().offset_by(&u, boundary_reach + push))
        }
    }
}

/// Ground truth for one round: the constrained minimizer of the loss over
/// `{g <= 0}` intersected with the ambient set.
#[derive(Debug, Clone, Serialize)]
pub struct OfflineSolution {
    pub x_star: Point,
    pub f_at_star: f64,
    pub g_at_star: f64,
    pub kkt_residual: f64,
}

/// Projected gradient descent of `h` over an arbitrary region with step
/// `1/smoothness`, run to a displacement below `1e-12`.
pub fn minimize_over_region(
    h: &QuadraticFunction,
    region: &Region,
    start: Option<&Point>,
    settings: &ProjectionSettings,
) -> Result<(Point, f64)> {
    let step = 1.0 / h.smoothness();
    let mut x = match start {
        Some(p) => region.project(p, settings)?,
        None => region.project(h.center(), settings)?,
    };
    let mut residual = f64::INFINITY;
    let mut best = f64::INFINITY;
    let mut stagnant = 0usize;
    for _ in 0..500_000 {
        let grad = h.gradient(&x)?;
        let next = region.project(&x.offset_by(&grad, -step), settings)?;
        residual = next.dist(&x);
        x = next;
        if residual < 1e-12 {
            return Ok((x, residual));
        }
        // inner projection noise can floor the displacement above 1e-12
        if residual < best * 0.999 {
            best = residual;
            stagnant = 0;
        } else {
            stagnant += 1;
            if stagnant >= 64 && best <= 1e-10 {
                return Ok((x, residual));
            }
        }
    }
    Err(Error::Numerical {
        context: "minimize_over_region",
        residual,
        iterations: 500_000,
    })
}

/// The per-round feasible region `{g <= 0} ∩ ambient` as a projection region.
pub fn feasible_region(round: &RoundPair, ambient: &AmbientSet) -> Result<Region> {
    Ok(Region::Intersection(IntersectionSet::new(vec![
        ConvexSet::Sublevel(SublevelSet::new(round.g.clone())),
        ConvexSet::Ball(BallSet::new(ambient.center().clone(), ambient.radius())?),
    ])?))
}

pub fn solve_offline(round: &RoundPair, ambient: &AmbientSet) -> Result<OfflineSolution> {
    solve_offline_from(round, ambient, None)
}

pub fn solve_offline_from(
    round: &RoundPair,
    ambient: &AmbientSet,
    start: Option<&Point>,
) -> Result<OfflineSolution> {
    let ambient_ball = BallSet::new(ambient.center().clone(), ambient.radius())?;
    let (_, g_min) = min_over_ball(&round.g, &ambient_ball)?;
    if g_min > EPS_FEAS {
        return Err(Error::InfeasibleSet(
            "the feasible set of this round is empty inside the ambient set".into(),
        ));
    }
    let region = feasible_region(round, ambient)?;
    let settings = ProjectionSettings::tight();
    let (x_star, kkt_residual) = minimize_over_region(&round.f, &region, start, &settings)?;
    let f_at_star = round.f.value(&x_star)?;
    let g_at_star = round.g.value(&x_star)?;
    if g_at_star > 1e-8 || kkt_residual > 1e-8 {
        return Err(Error::Numerical {
            context: "solve_offline stationarity",
            residual: g_at_star.max(kkt_residual),
            iterations: 0,
        });
    }
    Ok(OfflineSolution {
        x_star,
        f_at_star,
        g_at_star,
        kkt_residual,
    })
}

pub fn solve_offline_all(seq: &ProblemSequence) -> Result<Vec<OfflineSolution>> {
    seq.rounds
        .iter()
        .map(|r| solve_offline(r, &seq.ambient))
        .collect()
}

/// Tracking metrics of one run.
#[derive(Debug, Clone, Serialize)]
pub struct Metrics {
    /// Cumulative loss gap against the per-round optima.
    pub r_d: f64,
    /// Cumulative absolute constraint gap against the per-round optima.
    pub p_g: f64,
    /// Raw cumulative constraint value at the played actions.
    pub p_g_prime: f64,
    /// Path length of the offline minimizers.
    pub path_length: f64,
    /// Per-round contraction ratios; rounds with a vanishing denominator are skipped.
    pub ratios: Vec<Option<f64>>,
    /// Largest observed contraction ratio.
    pub c_empirical: Option<f64>,
}

/// Denominators below this are skipped when forming contraction ratios.
pub const RATIO_DENOM_FLOOR: f64 = 1e-12;

/// Folds actions, ground truth and rounds into the tracking metrics.
/// `actions` holds the played action of every round plus the final update,
/// so its length is `rounds.len() + 1`.
pub fn compute_metrics(
    actions: &[Point],
    solutions: &[OfflineSolution],
    rounds: &[RoundPair],
) -> Result<Metrics> {
    let t_len = rounds.len();
    if solutions.len() != t_len {
        return Err(Error::invalid("one offline solution per round is required"));
    }
    if actions.len() != t_len + 1 {
        return Err(Error::invalid(
            "actions must hold one entry per round plus the final update",
        ));
    }
    if t_len == 0 {
        return Err(Error::invalid("metrics need at least one round"));
    }
    let mut m = Metrics {
        r_d: 0.0,
        p_g: 0.0,
        p_g_prime: 0.0,
        path_length: 0.0,
        ratios: Vec::with_capacity(t_len),
        c_empirical: None,
    };
    for t in 0..t_len {
        let a_t = &actions[t];
        let sol = &solutions[t];
        let f_gap = (sol.f_at_star - rounds[t].f.value(a_t)?).abs();
        let g_at = rounds[t].g.value(a_t)?;
        m.r_d += f_gap;
        m.p_g += (sol.g_at_star - g_at).abs();
        m.p_g_prime += g_at;
        if t > 0 {
            m.path_length += sol.x_star.dist(&solutions[t - 1].x_star);
        }
        let denom = sol.x_star.dist(a_t);
        if denom < RATIO_DENOM_FLOOR {
            m.ratios.push(None);
        } else {
            let ratio = sol.x_star.dist(&actions[t + 1]) / denom;
            m.c_empirical = Some(m.c_empirical.map_or(ratio, |c: f64| c.max(ratio)));
            m.ratios.push(Some(ratio));
        }
    }
    Ok(m)
}

/// The per-branch contraction factors and their maximum.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ContractionConstants {
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub c5: f64,
    pub c: f64,
}

pub fn contraction_c2(consts: &ConstantsBundle) -> f64 {
    (1.0 - consts.alpha * consts.nu_f / (2.0 * consts.l_f)).sqrt()
}

pub fn contraction_c3(consts: &ConstantsBundle) -> f64 {
    (consts.diameter + consts.alpha * consts.dist) / (consts.diameter + consts.dist)
}

pub fn contraction_c4(consts: &ConstantsBundle) -> f64 {
    (1.0 - consts.alpha * consts.nu_g / consts.l_g).sqrt()
}

pub fn contraction_c5(consts: &ConstantsBundle) -> f64 {
    let mu = (consts.grad_bound / consts.dist).max(consts.l_g);
    (1.0 - consts.alpha * consts.nu_g / mu).sqrt()
}

/// Evaluates the guaranteed per-round contraction factor and asserts that it
/// is a genuine contraction.
pub fn theoretical_contraction(consts: &ConstantsBundle) -> Result<ContractionConstants> {
    consts.validate()?;
    let c2 = contraction_c2(consts);
    let c3 = contraction_c3(consts);
    let c4 = contraction_c4(consts);
    let c5 = contraction_c5(consts);
    let c = c2.max(c3).max(c4).max(c5);
    if !(c > 0.0 && c < 1.0) {
        return Err(Error::invalid(format!(
            "contraction factor {c} is not inside (0, 1); alpha = 1 with this geometry is degenerate"
        )));
    }
    Ok(ContractionConstants { c2, c3, c4, c5, c })
}

/// Everything one online run produced.
#[derive(Debug, Clone)]
pub struct RunLog {
    pub records: Vec<RoundRecord>,
    /// `a_1 ... a_{T+1}`.
    pub actions: Vec<Point>,
}

impl RunLog {
    pub fn case_histogram(&self) -> BTreeMap<&'static str, usize> {
        let mut hist = BTreeMap::new();
        for case in RoundCase::ALL {
            hist.insert(case.name(), 0);
        }
        for rec in &self.records {
            *hist.get_mut(rec.case.name()).expect("all cases present") += 1;
        }
        hist
    }
}

/// Plays the whole sequence through the oracle protocol.
pub fn run_online(seq: &ProblemSequence, settings: &ProjectionSettings) -> Result<RunLog> {
    let mut state = AlgorithmState::new(seq.start.clone(), seq.constants.clone())?;
    let mut records = Vec::with_capacity(seq.rounds.len());
    let mut actions = Vec::with_capacity(seq.rounds.len() + 1);
    actions.push(state.action.clone());
    for round in &seq.rounds {
        let mut oracle = RoundOracle::new(round, &seq.ambient, seq.constants.dist)?;
        let (next, record) = advance(state, &mut oracle, &seq.ambient, settings)?;
        actions.push(next.action.clone());
        records.push(record);
        state = next;
    }
    Ok(RunLog { records, actions })
}

/// Oracle-bypass mode: the played actions are the offline optima themselves.
/// Tracking metrics collapse to zero by construction.
pub fn follow_optimum_actions(solutions: &[OfflineSolution]) -> Vec<Point> {
    let mut actions: Vec<Point> = solutions.iter().map(|s| s.x_star.clone()).collect();
    if let Some(last) = solutions.last() {
        actions.push(last.x_star.clone());
    }
    actions
}

/// Slack for the per-round contraction check.
pub const PER_STEP_TOL: f64 = 1e-6;
/// Slack for the cumulative bound checks.
pub const CUMULATIVE_TOL: f64 = 1e-4;
/// Slack for the cumulative distance bound.
pub const SUM_DIST_TOL: f64 = 1e-6;
/// Slack for the penalty ordering check.
pub const ORDERING_TOL: f64 = 1e-9;

/// Verdicts of the guarantees on one finished run.
#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub c: f64,
    pub c_empirical: Option<f64>,
    pub per_step_ok: bool,
    pub sum_dist: f64,
    pub sum_dist_bound: f64,
    pub sum_dist_ok: bool,
    pub r_d_bound: f64,
    pub r_d_ok: bool,
    pub p_g_bound: f64,
    pub p_g_ok: bool,
    pub ordering_ok: bool,
}

impl BoundReport {
    pub fn all_ok(&self) -> bool {
        self.per_step_ok && self.sum_dist_ok && self.r_d_ok && self.p_g_ok && self.ordering_ok
    }
}

pub fn check_bounds(
    metrics: &Metrics,
    solutions: &[OfflineSolution],
    actions: &[Point],
    consts: &ConstantsBundle,
    contraction: &ContractionConstants,
) -> Result<BoundReport> {
    if solutions.is_empty() || actions.len() != solutions.len() + 1 {
        return Err(Error::invalid("bound check needs a completed run"));
    }
    let c = contraction.c;
    let per_step_ok = metrics
        .ratios
        .iter()
        .flatten()
        .all(|r| *r <= c + PER_STEP_TOL);

    let sum_dist: f64 = solutions
        .iter()
        .zip(actions.iter())
        .map(|(s, a)| s.x_star.dist(a))
        .sum();
    let initial_gap = solutions[0].x_star.dist(&actions[0]);
    let sum_dist_bound = (initial_gap + metrics.path_length) / (1.0 - c) + SUM_DIST_TOL;
    let r_d_bound = consts.lip_f * (initial_gap + metrics.path_length) / (1.0 - c) + CUMULATIVE_TOL;
    let p_g_bound = consts.lip_g * (initial_gap + metrics.path_length) / (1.0 - c) + CUMULATIVE_TOL;

    Ok(BoundReport {
        c,
        c_empirical: metrics.c_empirical,
        per_step_ok,
        sum_dist,
        sum_dist_bound,
        sum_dist_ok: sum_dist <= sum_dist_bound,
        r_d_bound,
        r_d_ok: metrics.r_d <= r_d_bound,
        p_g_bound,
        p_g_ok: metrics.p_g <= p_g_bound,
        ordering_ok: metrics.p_g >= metrics.p_g_prime - ORDERING_TOL,
    })
}

/// One run, end to end: play online, solve offline, fold metrics, check bounds.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub log: RunLog,
    pub solutions: Vec<OfflineSolution>,
    pub metrics: Metrics,
    pub contraction: ContractionConstants,
    pub bounds: BoundReport,
}

pub fn execute_run(seq: &ProblemSequence, settings: &ProjectionSettings) -> Result<RunOutcome> {
    let contraction = theoretical_contraction(&seq.constants)?;
    let log = run_online(seq, settings)?;
    let solutions = solve_offline_all(seq)?;
    let metrics = compute_metrics(&log.actions, &solutions, &seq.rounds)?;
    let bounds = check_bounds(
        &metrics,
        &solutions,
        &log.actions,
        &seq.constants,
        &contraction,
    )?;
    Ok(RunOutcome {
        log,
        solutions,
        metrics,
        contraction,
        bounds,
    })
}

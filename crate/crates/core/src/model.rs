//! Problem data: quadratic loss/constraint functions, the ambient set and the
//! constants the tracking guarantees are stated in.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::point::Point;

/// Relative asymmetry tolerated in a Hessian before construction fails.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// `h(x) = 1/2 (x - center)' H (x - center) + offset` with `H` symmetric
/// positive definite.
///
/// The eigendecomposition is computed once at construction: the spectral data
/// drives step sizes, Lipschitz constants and the sublevel-set projection.
#[derive(Debug, Clone)]
pub struct QuadraticFunction {
    hessian: DMatrix<f64>,
    center: Point,
    offset: f64,
    eigvecs: DMatrix<f64>,
    eigvals: DVector<f64>,
    lambda_min: f64,
    lambda_max: f64,
}

impl QuadraticFunction {
    pub fn new(hessian: DMatrix<f64>, center: Point, offset: f64) -> Result<Self> {
        let n = center.dim();
        if hessian.nrows() != n || hessian.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: hessian.nrows().max(hessian.ncols()),
            });
        }
        if !offset.is_finite() || hessian.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("quadratic data must be finite"));
        }
        let scale = 1.0 + hessian.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let max_asym = (&hessian - hessian.transpose())
            .iter()
            .fold(0.0f64, |m, x| m.max(x.abs()));
        if max_asym > SYMMETRY_TOL * scale {
            return Err(Error::invalid(format!(
                "hessian asymmetry {max_asym:.3e} exceeds tolerance"
            )));
        }
        let sym = (&hessian + hessian.transpose()) * 0.5;
        let eig = sym.clone().symmetric_eigen();
        let lambda_min = eig.eigenvalues.min();
        let lambda_max = eig.eigenvalues.max();
        if lambda_min <= 0.0 {
            return Err(Error::invalid(format!(
                "hessian must be positive definite (lambda_min = {lambda_min:.3e})"
            )));
        }
        Ok(QuadraticFunction {
            hessian: sym,
            center,
            offset,
            eigvecs: eig.eigenvectors,
            eigvals: eig.eigenvalues,
            lambda_min,
            lambda_max,
        })
    }

    /// Isotropic quadratic `lambda/2 ||x - center||^2 + offset`.
    pub fn isotropic(lambda: f64, center: Point, offset: f64) -> Result<Self> {
        let n = center.dim();
        Self::new(DMatrix::identity(n, n) * lambda, center, offset)
    }

    pub fn dim(&self) -> usize {
        self.center.dim()
    }

    pub fn hessian(&self) -> &DMatrix<f64> {
        &self.hessian
    }

    pub fn center(&self) -> &Point {
        &self.center
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// Strong convexity modulus (smallest eigenvalue).
    pub fn strong_convexity(&self) -> f64 {
        self.lambda_min
    }

    /// Gradient Lipschitz modulus (largest eigenvalue).
    pub fn smoothness(&self) -> f64 {
        self.lambda_max
    }

    pub fn eigvals(&self) -> &DVector<f64> {
        &self.eigvals
    }

    pub fn eigvecs(&self) -> &DMatrix<f64> {
        &self.eigvecs
    }

    fn check_dim(&self, x: &Point) -> Result<()> {
        if x.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.dim(),
            });
        }
        Ok(())
    }

    pub fn value(&self, x: &Point) -> Result<f64> {
        self.check_dim(x)?;
        let d = x.as_vector() - self.center.as_vector();
        Ok(0.5 * (&self.hessian * &d).dot(&d) + self.offset)
    }

    pub fn gradient(&self, x: &Point) -> Result<Point> {
        self.check_dim(x)?;
        let d = x.as_vector() - self.center.as_vector();
        Point::from_vector(&self.hessian * d)
    }

    /// Exact bound on `sup ||grad h||` over `ambient`, from the spectral data:
    /// `lambda_max * (radius + ||ambient.center - center||)`.
    pub fn gradient_bound_over(&self, ambient: &AmbientSet) -> f64 {
        self.lambda_max * (ambient.radius() + ambient.center().dist(&self.center))
    }
}

/// The compact convex ambient set: a Euclidean ball of diameter `2 * radius`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AmbientSet {
    center: Point,
    radius: f64,
}

impl AmbientSet {
    pub fn new(center: Point, radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::invalid("ambient radius must be finite and positive"));
        }
        Ok(AmbientSet { center, radius })
    }

    pub fn center(&self) -> &Point {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn diameter(&self) -> f64 {
        2.0 * self.radius
    }

    pub fn contains(&self, x: &Point, tol: f64) -> bool {
        x.dist(&self.center) <= self.radius + tol
    }
}

/// One round of the sequence: loss `f` and constraint `g`, with `{g <= 0}`
/// a nonempty ellipsoid.
#[derive(Debug, Clone)]
pub struct RoundPair {
    pub f: QuadraticFunction,
    pub g: QuadraticFunction,
}

impl RoundPair {
    pub fn new(f: QuadraticFunction, g: QuadraticFunction) -> Result<Self> {
        if f.dim() != g.dim() {
            return Err(Error::DimensionMismatch {
                expected: f.dim(),
                found: g.dim(),
            });
        }
        // g attains offset at its center; offset < 0 certifies a nonempty interior.
        if g.offset() >= 0.0 {
            return Err(Error::invalid(
                "constraint offset must be negative so {g <= 0} has nonempty interior",
            ));
        }
        Ok(RoundPair { f, g })
    }
}

/// Everything the guarantees are stated in: convexity/smoothness moduli,
/// function and gradient Lipschitz bounds, geometry, window radius and the
/// mixing constant of the update.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConstantsBundle {
    pub nu_f: f64,
    pub nu_g: f64,
    pub l_f: f64,
    pub l_g: f64,
    pub lip_f: f64,
    pub lip_g: f64,
    /// Bound on gradient norms of both families over the ambient set.
    pub grad_bound: f64,
    /// Diameter of the ambient set.
    pub diameter: f64,
    /// Radius of the revealed local window.
    pub dist: f64,
    /// Mixing constant of the damped update, in (0, 1].
    pub alpha: f64,
}

impl ConstantsBundle {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            self.nu_f,
            self.nu_g,
            self.l_f,
            self.l_g,
            self.lip_f,
            self.lip_g,
            self.grad_bound,
            self.diameter,
            self.dist,
            self.alpha,
        ];
        if fields.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("constants must be finite"));
        }
        if self.nu_f <= 0.0 || self.nu_g <= 0.0 {
            return Err(Error::invalid("strong convexity moduli must be positive"));
        }
        if self.nu_f > self.l_f || self.nu_g > self.l_g {
            return Err(Error::invalid(
                "strong convexity modulus cannot exceed smoothness modulus",
            ));
        }
        if self.diameter <= 0.0 || self.dist <= 0.0 {
            return Err(Error::invalid("diameter and dist must be positive"));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::invalid("alpha must lie in (0, 1]"));
        }
        Ok(())
    }
}

/// Aggregates spectral data of a round sequence into a valid constants bundle.
///
/// Moduli are min/max over rounds; Lipschitz bounds use the exact spectral
/// formula for quadratics over a ball; the gradient bound covers both
/// families.
pub fn derive_constants(
    rounds: &[RoundPair],
    ambient: &AmbientSet,
    dist: f64,
    alpha: f64,
) -> Result<ConstantsBundle> {
    if rounds.is_empty() {
        return Err(Error::invalid("cannot derive constants from an empty sequence"));
    }
    let mut bundle = ConstantsBundle {
        nu_f: f64::INFINITY,
        nu_g: f64::INFINITY,
        l_f: 0.0,
        l_g: 0.0,
        lip_f: 0.0,
        lip_g: 0.0,
        grad_bound: 0.0,
        diameter: ambient.diameter(),
        dist,
        alpha,
    };
    for r in rounds {
        bundle.nu_f = bundle.nu_f.min(r.f.strong_convexity());
        bundle.nu_g = bundle.nu_g.min(r.g.strong_convexity());
        bundle.l_f = bundle.l_f.max(r.f.smoothness());
        bundle.l_g = bundle.l_g.max(r.g.smoothness());
        bundle.lip_f = bundle.lip_f.max(r.f.gradient_bound_over(ambient));
        bundle.lip_g = bundle.lip_g.max(r.g.gradient_bound_over(ambient));
    }
    bundle.grad_bound = bundle.lip_f.max(bundle.lip_g);
    bundle.validate()?;
    Ok(bundle)
}

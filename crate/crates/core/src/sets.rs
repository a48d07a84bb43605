//! Convex constraint sets with exact Euclidean projections, weighted and
//! linearly transformed projections, block projections, and normal-cone
//! residuals.
//!
//! Plain sets ([`ConvexSet::WholeSpace`], [`ConvexSet::Box`],
//! [`ConvexSet::Ball`], [`ConvexSet::Halfspace`], [`ConvexSet::Hyperplane`])
//! have closed-form Euclidean projections. A [`ConvexSet::Transformed`] set
//! `TΩ + v` is projected in closed form when `T` is a nonzero scalar multiple
//! of the identity or an orthogonal matrix, and otherwise through an
//! accelerated projected-gradient inner solver (stepsize `1/λmax`, iteration
//! cap 100 000, tolerance `1e-9` measured in the relevant weighted norm).
//! Weighted projections use the same inner solver except where a closed form
//! exists (whole space, halfspace, hyperplane).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::{eps_clamped, is_finite, Scalar};

/// Distance below which a point is treated as a member of a set
/// (floating-point drift tolerance after repeated projections).
pub const MEMBERSHIP_TOL: f64 = 1e-12;

/// Feasibility tolerance for residual queries that require `y ∈ Ω`.
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// Tolerance of the weighted-projection inner solver, measured in the
/// weighted norm.
pub const INNER_TOL: f64 = 1e-9;

/// Iteration cap of the weighted-projection inner solver.
pub const INNER_CAP: usize = 100_000;

/// A closed convex subset of `ℝ^d` with a computable projection.
///
/// `Box` bounds may contain `±∞` entries as explicit "unbounded" sentinels;
/// clamp arithmetic handles them without overflow.
#[derive(Debug, Clone, PartialEq)]
pub enum ConvexSet<T: Scalar> {
    /// All of `ℝ^d`.
    WholeSpace {
        /// Ambient dimension.
        dim: usize,
    },
    /// `{y : lo ≤ y ≤ hi}` entrywise, `±∞` entries allowed.
    Box {
        /// Lower bounds.
        lo: DVector<T>,
        /// Upper bounds.
        hi: DVector<T>,
    },
    /// `{y : ‖y − center‖₂ ≤ radius}`.
    Ball {
        /// Center.
        center: DVector<T>,
        /// Radius, strictly positive.
        radius: T,
    },
    /// `{y : aᵀy ≤ b}` with `a ≠ 0`.
    Halfspace {
        /// Outward normal.
        a: DVector<T>,
        /// Offset.
        b: T,
    },
    /// `{y : aᵀy = b}` with `a ≠ 0`.
    Hyperplane {
        /// Normal.
        a: DVector<T>,
        /// Offset.
        b: T,
    },
    /// The image set `TΩ + v = {Tω + v : ω ∈ Ω}` of a base set under an
    /// invertible linear map plus a translation.
    Transformed {
        /// The base set `Ω`.
        base: Box<ConvexSet<T>>,
        /// The invertible linear map `T`.
        t: DMatrix<T>,
        /// The translation `v`.
        v: DVector<T>,
    },
}

impl<T: Scalar> ConvexSet<T> {
    /// All of `ℝ^d`.
    pub fn whole_space(dim: usize) -> Self {
        ConvexSet::WholeSpace { dim }
    }

    /// Axis-aligned box; `±∞` entries mark unbounded coordinates.
    pub fn box_set(lo: DVector<T>, hi: DVector<T>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch(format!(
                "box bounds have lengths {} and {}",
                lo.len(),
                hi.len()
            )));
        }
        for i in 0..lo.len() {
            if !(lo[i] <= hi[i]) {
                return Err(Error::InvalidInput(format!(
                    "box bound lo[{i}] > hi[{i}] ({:?} > {:?})",
                    lo[i], hi[i]
                )));
            }
        }
        Ok(ConvexSet::Box { lo, hi })
    }

    /// Euclidean ball.
    pub fn ball(center: DVector<T>, radius: T) -> Result<Self> {
        if !(radius > T::zero()) || !is_finite(radius) {
            return Err(Error::InvalidInput("ball radius must be positive and finite".into()));
        }
        if !linalg::vec_finite(&center) {
            return Err(Error::InvalidInput("ball center must be finite".into()));
        }
        Ok(ConvexSet::Ball { center, radius })
    }

    /// Halfspace `{y : aᵀy ≤ b}`.
    pub fn halfspace(a: DVector<T>, b: T) -> Result<Self> {
        if a.norm() == T::zero() {
            return Err(Error::InvalidInput("halfspace normal must be nonzero".into()));
        }
        Ok(ConvexSet::Halfspace { a, b })
    }

    /// Hyperplane `{y : aᵀy = b}`.
    pub fn hyperplane(a: DVector<T>, b: T) -> Result<Self> {
        if a.norm() == T::zero() {
            return Err(Error::InvalidInput("hyperplane normal must be nonzero".into()));
        }
        Ok(ConvexSet::Hyperplane { a, b })
    }

    /// The transformed set `T·base + v`; `t` must be square, invertible, and
    /// dimension-consistent with the base set.
    pub fn transformed(base: ConvexSet<T>, t: DMatrix<T>, v: DVector<T>) -> Result<Self> {
        let d = base.dim();
        if t.nrows() != d || t.ncols() != d {
            return Err(Error::DimensionMismatch(format!(
                "transform is {}x{}, base set has dimension {d}",
                t.nrows(),
                t.ncols()
            )));
        }
        if v.len() != d {
            return Err(Error::DimensionMismatch(format!(
                "translation has length {}, base set has dimension {d}",
                v.len()
            )));
        }
        linalg::try_inverse(&t, "set transform")?;
        Ok(ConvexSet::Transformed { base: Box::new(base), t, v })
    }

    /// Ambient dimension of the set.
    pub fn dim(&self) -> usize {
        match self {
            ConvexSet::WholeSpace { dim } => *dim,
            ConvexSet::Box { lo, .. } => lo.len(),
            ConvexSet::Ball { center, .. } => center.len(),
            ConvexSet::Halfspace { a, .. } | ConvexSet::Hyperplane { a, .. } => a.len(),
            ConvexSet::Transformed { base, .. } => base.dim(),
        }
    }

    /// Errors unless the set's ambient dimension is exactly `d`.
    pub fn expect_dim(&self, d: usize) -> Result<()> {
        if self.dim() != d {
            return Err(Error::DimensionMismatch(format!(
                "set has dimension {}, expected {d}",
                self.dim()
            )));
        }
        Ok(())
    }

    fn check_dim(&self, x: &DVector<T>, what: &str) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "{what} has length {}, set has dimension {}",
                x.len(),
                self.dim()
            )));
        }
        Ok(())
    }

    /// Euclidean projection `Π_Ω(x) = argmin_{y∈Ω} ‖x − y‖₂`.
    ///
    /// Closed-form for all plain variants; `Transformed` sets with a general
    /// (non-scalar, non-orthogonal) map go through the inner solver.
    pub fn project(&self, x: &DVector<T>) -> Result<DVector<T>> {
        self.check_dim(x, "point")?;
        match self {
            ConvexSet::WholeSpace { .. } => Ok(x.clone()),
            ConvexSet::Box { lo, hi } => {
                let mut y = x.clone();
                for i in 0..y.len() {
                    if y[i] < lo[i] {
                        y[i] = lo[i];
                    } else if y[i] > hi[i] {
                        y[i] = hi[i];
                    }
                }
                Ok(y)
            }
            ConvexSet::Ball { center, radius } => {
                let delta = x - center;
                let n = delta.norm();
                if n <= *radius {
                    Ok(x.clone())
                } else {
                    Ok(center + delta * (*radius / n))
                }
            }
            ConvexSet::Halfspace { a, b } => {
                let s = a.dot(x) - *b;
                if s <= T::zero() {
                    Ok(x.clone())
                } else {
                    Ok(x - a * (s / a.norm_squared()))
                }
            }
            ConvexSet::Hyperplane { a, b } => {
                let s = a.dot(x) - *b;
                Ok(x - a * (s / a.norm_squared()))
            }
            ConvexSet::Transformed { base, t, v } => {
                if let Some(tau) = scalar_multiple_of_identity(t) {
                    // Π_{τΩ+v}(x) = τ·Π_Ω((x−v)/τ) + v for any τ ≠ 0.
                    let inner = base.project(&((x - v) / tau))?;
                    return Ok(inner * tau + v);
                }
                if is_orthogonal(t) {
                    // Π_{TΩ+v}(x) = T·Π_Ω(Tᵀ(x−v)) + v for orthogonal T.
                    let inner = base.project(&(t.transpose() * (x - v)))?;
                    return Ok(t * inner + v);
                }
                let eye = DMatrix::identity(self.dim(), self.dim());
                self.project_weighted(&eye, x)
            }
        }
    }

    /// Weighted projection `Π_Ω^V(x) = argmin_{y∈Ω} (x−y)ᵀV(x−y)` for a
    /// symmetric positive definite weight `V`.
    ///
    /// Closed-form for whole space, halfspace, and hyperplane; box, ball and
    /// transformed sets are solved by accelerated projected gradient descent
    /// to tolerance `1e-9` in the `V`-norm (iteration cap 100 000).
    pub fn project_weighted(&self, v_mat: &DMatrix<T>, x: &DVector<T>) -> Result<DVector<T>> {
        self.check_dim(x, "point")?;
        let d = self.dim();
        if v_mat.nrows() != d || v_mat.ncols() != d {
            return Err(Error::DimensionMismatch(format!(
                "weight is {}x{}, set has dimension {d}",
                v_mat.nrows(),
                v_mat.ncols()
            )));
        }
        let w = linalg::symmetrize(v_mat);
        let w_min = linalg::lambda_min(&w);
        let w_max = linalg::lambda_max(&w);
        if !(w_min > T::zero()) {
            return Err(Error::NotPositiveDefinite(format!(
                "projection weight has smallest eigenvalue {:?}",
                w_min
            )));
        }
        match self {
            ConvexSet::WholeSpace { .. } => Ok(x.clone()),
            ConvexSet::Hyperplane { a, b } => Ok(weighted_hyperplane(&w, a, *b, x)?),
            ConvexSet::Halfspace { a, b } => {
                if a.dot(x) - *b <= T::zero() {
                    Ok(x.clone())
                } else {
                    Ok(weighted_hyperplane(&w, a, *b, x)?)
                }
            }
            ConvexSet::Box { .. } | ConvexSet::Ball { .. } => {
                // Minimize ½(y−x)ᵀV(y−x) over the set; Euclidean projections
                // onto box/ball are closed-form, so projected AGD applies
                // directly with Hessian V.
                let start = self.project(x)?;
                let grad = |y: &DVector<T>| &w * (y - x);
                let step_norm = |s: &DVector<T>| (&w * s).dot(s).sqrt();
                accelerated_projected_argmin(self, &start, grad, w_max, w_min, step_norm)
            }
            ConvexSet::Transformed { base, t, v } => {
                // Minimize ½(Tw+v−x)ᵀV(Tw+v−x) over w ∈ base; the Hessian is
                // TᵀVT, positive definite since T is invertible and V ≻ 0.
                let t_inv = linalg::try_inverse(t, "set transform")?;
                let h = t.transpose() * &w * t;
                let h_min = linalg::lambda_min(&h);
                let h_max = linalg::lambda_max(&h);
                if !(h_min > T::zero()) {
                    return Err(Error::NotPositiveDefinite(
                        "transformed projection Hessian is singular".into(),
                    ));
                }
                let target = x - v;
                let start = base.project(&(&t_inv * &target))?;
                let grad = |ww: &DVector<T>| t.transpose() * (&w * (t * ww - &target));
                // Stop on the image-space step measured in the V-norm.
                let step_norm = |s: &DVector<T>| {
                    let ts = t * s;
                    (&w * &ts).dot(&ts).sqrt()
                };
                let w_star =
                    accelerated_projected_argmin(base, &start, grad, h_max, h_min, step_norm)?;
                Ok(t * w_star + v)
            }
        }
    }

    /// `‖Π_Ω(x) − x‖₂ ≤ tol` membership test.
    pub fn contains(&self, x: &DVector<T>, tol: T) -> Result<bool> {
        let p = self.project(x)?;
        Ok((p - x).norm() <= tol)
    }

    /// Residual `‖Π_Ω(y + v) − y‖₂`, which is zero exactly when `v` lies in
    /// the normal cone `N_Ω(y)`.
    ///
    /// Errors with [`Error::PointOutsideSet`] when `y` is farther than `1e-9`
    /// from the set, since the residual is only meaningful for feasible `y`.
    pub fn normal_cone_residual(&self, y: &DVector<T>, v: &DVector<T>) -> Result<T> {
        self.check_dim(y, "base point")?;
        self.check_dim(v, "direction")?;
        let dist = (self.project(y)? - y).norm();
        if dist > eps_clamped::<T>(FEASIBILITY_TOL) {
            return Err(Error::PointOutsideSet { distance: crate::scalar::to_f64(dist) });
        }
        Ok((self.project(&(y + v))? - y).norm())
    }
}

/// `T·Π_Ω(T⁻¹x)`: the transformed projection map of an invertible matrix.
///
/// This equals the projection onto `TΩ` in the norm weighted by `(TTᵀ)⁻¹`
/// (the weight that pulls the norm back through `T`: `‖z‖²_V = ‖T⁻¹z‖²`).
pub fn transformed_project<T: Scalar>(
    t: &DMatrix<T>,
    set: &ConvexSet<T>,
    x: &DVector<T>,
) -> Result<DVector<T>> {
    let d = set.dim();
    if t.nrows() != d || t.ncols() != d {
        return Err(Error::DimensionMismatch(format!(
            "transform is {}x{}, set has dimension {d}",
            t.nrows(),
            t.ncols()
        )));
    }
    if x.len() != d {
        return Err(Error::DimensionMismatch(format!(
            "point has length {}, set has dimension {d}",
            x.len()
        )));
    }
    let t_inv = linalg::try_inverse(t, "projection transform")?;
    Ok(t * set.project(&(t_inv * x))?)
}

/// Projects the first `d` entries of an `n·d`-vector onto `set` and passes
/// the remaining `(n−1)·d` entries through unchanged — the projection onto
/// the product set `Ω × ℝ^{(n−1)d}`.
pub fn project_block<T: Scalar>(
    set: &ConvexSet<T>,
    x: &DVector<T>,
    n: usize,
    d: usize,
) -> Result<DVector<T>> {
    if set.dim() != d {
        return Err(Error::DimensionMismatch(format!(
            "set has dimension {}, expected block size {d}",
            set.dim()
        )));
    }
    if x.len() != n * d {
        return Err(Error::DimensionMismatch(format!(
            "vector has length {}, expected n·d = {}",
            x.len(),
            n * d
        )));
    }
    let head = x.rows(0, d).into_owned();
    let proj = set.project(&head)?;
    let mut out = x.clone();
    out.rows_mut(0, d).copy_from(&proj);
    Ok(out)
}

/// Returns `Some(τ)` when `m` is exactly `τ·I` with `τ ≠ 0`.
fn scalar_multiple_of_identity<T: Scalar>(m: &DMatrix<T>) -> Option<T> {
    let n = m.nrows();
    if n == 0 || m.ncols() != n {
        return None;
    }
    let tau = m[(0, 0)];
    if tau == T::zero() {
        return None;
    }
    for i in 0..n {
        for j in 0..n {
            let want = if i == j { tau } else { T::zero() };
            if m[(i, j)] != want {
                return None;
            }
        }
    }
    Some(tau)
}

/// True when `MᵀM` is within `1e-12` of the identity entrywise.
fn is_orthogonal<T: Scalar>(m: &DMatrix<T>) -> bool {
    let n = m.nrows();
    if m.ncols() != n {
        return false;
    }
    let g = m.transpose() * m;
    let tol = eps_clamped::<T>(1e-12);
    for i in 0..n {
        for j in 0..n {
            let want = if i == j { T::one() } else { T::zero() };
            if (g[(i, j)] - want).abs() > tol {
                return false;
            }
        }
    }
    true
}

/// Weighted projection onto a hyperplane `{y : aᵀy = b}`:
/// `y = x − V⁻¹a·(aᵀx − b)/(aᵀV⁻¹a)`.
fn weighted_hyperplane<T: Scalar>(
    w: &DMatrix<T>,
    a: &DVector<T>,
    b: T,
    x: &DVector<T>,
) -> Result<DVector<T>> {
    let w_inv = linalg::try_inverse(w, "projection weight")?;
    let wa = &w_inv * a;
    let denom = a.dot(&wa);
    Ok(x - wa * ((a.dot(x) - b) / denom))
}

/// Accelerated projected gradient descent for a strongly convex quadratic
/// objective over a set with computable Euclidean projection.
fn accelerated_projected_argmin<T: Scalar>(
    set: &ConvexSet<T>,
    start: &DVector<T>,
    grad: impl Fn(&DVector<T>) -> DVector<T>,
    l_max: T,
    l_min: T,
    step_norm: impl Fn(&DVector<T>) -> T,
) -> Result<DVector<T>> {
    let kappa = l_max / l_min;
    let sqrt_kappa = kappa.sqrt();
    let theta = (sqrt_kappa - T::one()) / (sqrt_kappa + T::one());
    let step = T::one() / l_max;
    let tol = eps_clamped::<T>(INNER_TOL);

    let mut w = start.clone();
    let mut z = start.clone();
    for _ in 0..INNER_CAP {
        let w_next = set.project(&(&z - grad(&z) * step))?;
        let delta = &w_next - &w;
        if !linalg::vec_finite(&w_next) {
            return Err(Error::InnerSolverDiverged);
        }
        z = &w_next + &delta * theta;
        let done = step_norm(&delta) <= tol;
        w = w_next;
        if done {
            return Ok(w);
        }
    }
    Err(Error::InnerSolverDiverged)
}

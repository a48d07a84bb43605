//! Objective functions with sector metadata `(m, L)`, gradient oracles,
//! slope-restriction validation, and a deliberately simple reference solver
//! used as an independent test oracle.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::{c, to_f64, Scalar};
use crate::sets::ConvexSet;

/// Iteration cap of [`solve_reference`]; generous because the reference
/// solver trades speed for trustworthiness.
pub const REFERENCE_SOLVER_CAP: usize = 2_000_000;

/// A differentiable objective with certified sector bounds: the gradient is
/// slope-restricted to `[m, L]`, i.e.
/// `m‖x−y‖² ≤ (∇f(x)−∇f(y))ᵀ(x−y) ≤ L‖x−y‖²`.
pub trait Objective<T: Scalar> {
    /// Problem dimension.
    fn dim(&self) -> usize;
    /// Strong-convexity modulus `m > 0`.
    fn m(&self) -> T;
    /// Gradient Lipschitz constant `L ≥ m`.
    fn l(&self) -> T;
    /// Gradient `∇f(y)`.
    fn gradient(&self, y: &DVector<T>) -> Result<DVector<T>>;
}

/// `f(y) = ½ yᵀFy + bᵀy` with `F` symmetric positive definite.
///
/// The sector constants `(m, L) = (λmin(F), λmax(F))` are computed once at
/// construction.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticObjective<T: Scalar> {
    f: DMatrix<T>,
    b: DVector<T>,
    m: T,
    l: T,
}

impl<T: Scalar> QuadraticObjective<T> {
    /// Builds the objective, validating that `F` is symmetric (to `1e-12`
    /// relative to its largest entry) and positive definite.
    pub fn new(f: DMatrix<T>, b: DVector<T>) -> Result<Self> {
        let d = f.nrows();
        if f.ncols() != d {
            return Err(Error::DimensionMismatch(format!(
                "quadratic form is {}x{}",
                f.nrows(),
                f.ncols()
            )));
        }
        if b.len() != d {
            return Err(Error::DimensionMismatch(format!(
                "linear term has length {}, form has dimension {d}",
                b.len()
            )));
        }
        if !linalg::mat_finite(&f) || !linalg::vec_finite(&b) {
            return Err(Error::InvalidInput("objective data must be finite".into()));
        }
        let scale = f.amax().max(T::one());
        let asym = (&f - f.transpose()).amax();
        if asym > c::<T>(1e-12) * scale {
            return Err(Error::InvalidInput(format!(
                "quadratic form is not symmetric (max asymmetry {:?})",
                asym
            )));
        }
        let f = linalg::symmetrize(&f);
        let eigs = linalg::sym_eigenvalues(&f);
        let m = eigs[0];
        let l = eigs[d - 1];
        if !(m > T::zero()) {
            return Err(Error::NotPositiveDefinite(format!(
                "quadratic form has smallest eigenvalue {:?}",
                m
            )));
        }
        Ok(Self { f, b, m, l })
    }

    /// The symmetric form `F`.
    pub fn form(&self) -> &DMatrix<T> {
        &self.f
    }

    /// The linear term `b`.
    pub fn linear(&self) -> &DVector<T> {
        &self.b
    }

    /// Objective value `½ yᵀFy + bᵀy`.
    pub fn value(&self, y: &DVector<T>) -> Result<T> {
        if y.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "point has length {}, objective has dimension {}",
                y.len(),
                self.dim()
            )));
        }
        Ok((&self.f * y).dot(y) * c::<T>(0.5) + self.b.dot(y))
    }

    /// `(λmin(F), λmax(F))`.
    pub fn sector_constants(&self) -> (T, T) {
        (self.m, self.l)
    }

    /// The unconstrained minimizer `−F⁻¹b`.
    pub fn unconstrained_minimizer(&self) -> Result<DVector<T>> {
        let inv = linalg::try_inverse(&self.f, "quadratic form")?;
        Ok(-(&inv * &self.b))
    }

    /// The unconstrained optimal value `−½ bᵀF⁻¹b`.
    pub fn optimal_value(&self) -> Result<T> {
        let y = self.unconstrained_minimizer()?;
        Ok(c::<T>(0.5) * self.b.dot(&y))
    }

    /// The ill-conditioned 2-D running example used throughout the test
    /// suite: `F = [[100, −1], [−1, 1]]`, `b = (1, 10)`, condition number
    /// `≈ 101`.
    pub fn reference_example() -> Self {
        let f = DMatrix::from_row_slice(2, 2, &[
            c::<T>(100.0),
            c::<T>(-1.0),
            c::<T>(-1.0),
            c::<T>(1.0),
        ]);
        let b = DVector::from_vec(vec![c::<T>(1.0), c::<T>(10.0)]);
        Self::new(f, b).expect("reference example data is valid")
    }

    /// Random test instance `F = QΛQᵀ` with `Q` a seeded random orthogonal
    /// matrix and `Λ` log-uniform in `[m, L]` with both endpoints present,
    /// so `sector_constants` equals `(m, L)` by construction; `b` is
    /// standard normal. Requires `d ≥ 2` unless `m = L`.
    pub fn random(d: usize, m: T, l: T, rng: &mut impl Rng) -> Result<Self> {
        if !(m > T::zero()) || !(l >= m) {
            return Err(Error::InvalidSector(format!(
                "need 0 < m ≤ L, got m = {:?}, L = {:?}",
                m, l
            )));
        }
        if d == 0 || (d == 1 && l > m) {
            return Err(Error::InvalidInput(
                "dimension must admit both sector endpoints".into(),
            ));
        }
        let normal = rand_distr::StandardNormal;
        let raw = DMatrix::<T>::from_fn(d, d, |_, _| c::<T>(rng.sample::<f64, _>(normal)));
        let q = raw.qr().q();
        let (lm, ll) = (to_f64(m).ln(), to_f64(l).ln());
        let mut eigs = Vec::with_capacity(d);
        for i in 0..d {
            let e = if i == 0 {
                m
            } else if i == d - 1 {
                l
            } else {
                c::<T>((lm + rng.gen::<f64>() * (ll - lm)).exp())
            };
            eigs.push(e);
        }
        let lambda = DMatrix::from_diagonal(&DVector::from_vec(eigs));
        let f = &q * lambda * q.transpose();
        let b = DVector::from_fn(d, |_, _| c::<T>(rng.sample::<f64, _>(normal)));
        Self::new(linalg::symmetrize(&f), b)
    }
}

impl<T: Scalar> Objective<T> for QuadraticObjective<T> {
    fn dim(&self) -> usize {
        self.f.nrows()
    }

    fn m(&self) -> T {
        self.m
    }

    fn l(&self) -> T {
        self.l
    }

    fn gradient(&self, y: &DVector<T>) -> Result<DVector<T>> {
        if y.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "point has length {}, objective has dimension {}",
                y.len(),
                self.dim()
            )));
        }
        Ok(&self.f * y + &self.b)
    }
}

/// A user-supplied smooth objective: a gradient oracle plus claimed sector
/// bounds. The oracle must be pure (same input, same output); the claimed
/// `(m, L)` can be spot-checked with [`slope_restriction_check`].
pub struct SmoothObjective<T: Scalar> {
    grad: Box<dyn Fn(&DVector<T>) -> DVector<T> + Send + Sync>,
    m: T,
    l: T,
    dim: usize,
}

impl<T: Scalar> SmoothObjective<T> {
    /// Wraps a gradient oracle with its claimed sector `[m, L]`.
    pub fn new(
        dim: usize,
        m: T,
        l: T,
        grad: impl Fn(&DVector<T>) -> DVector<T> + Send + Sync + 'static,
    ) -> Result<Self> {
        if !(m > T::zero()) || !(l >= m) {
            return Err(Error::InvalidSector(format!(
                "need 0 < m ≤ L, got m = {:?}, L = {:?}",
                m, l
            )));
        }
        Ok(Self { grad: Box::new(grad), m, l, dim })
    }
}

impl<T: Scalar> std::fmt::Debug for SmoothObjective<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SmoothObjective")
            .field("dim", &self.dim)
            .field("m", &self.m)
            .field("l", &self.l)
            .finish()
    }
}

impl<T: Scalar> Objective<T> for SmoothObjective<T> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn m(&self) -> T {
        self.m
    }

    fn l(&self) -> T {
        self.l
    }

    fn gradient(&self, y: &DVector<T>) -> Result<DVector<T>> {
        if y.len() != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "point has length {}, objective has dimension {}",
                y.len(),
                self.dim
            )));
        }
        let g = (self.grad)(y);
        if g.len() != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "gradient oracle returned length {}, expected {}",
                g.len(),
                self.dim
            )));
        }
        Ok(g)
    }
}

/// Outcome of a [`slope_restriction_check`].
#[derive(Debug, Clone)]
pub struct SlopeRestrictionReport<T: Scalar> {
    /// Whether every sampled pair satisfied the sector inequality.
    pub pass: bool,
    /// Number of pairs tested.
    pub num_samples: usize,
    /// First violating pair `(x, y)` and the violation magnitude, if any.
    pub witness: Option<(DVector<T>, DVector<T>, T)>,
}

/// Samples `num_samples` seeded random pairs `(x, y)` from `[−10, 10]^d` and
/// checks the sector inequality
/// `(∇f(x)−∇f(y)−m(x−y))ᵀ(∇f(x)−∇f(y)−L(x−y)) ≤ 1e-9·‖x−y‖²`
/// for each. Failure is reported, not raised.
pub fn slope_restriction_check<T: Scalar>(
    obj: &impl Objective<T>,
    num_samples: usize,
    seed: u64,
) -> Result<SlopeRestrictionReport<T>> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let d = obj.dim();
    let tol = c::<T>(1e-9);
    let draw = |rng: &mut rand_chacha::ChaCha8Rng| {
        DVector::from_fn(d, |_, _| c::<T>(rng.gen_range(-10.0..10.0)))
    };
    for _ in 0..num_samples {
        let x = draw(&mut rng);
        let y = draw(&mut rng);
        let gx = obj.gradient(&x)?;
        let gy = obj.gradient(&y)?;
        let dg = gx - gy;
        let dx = &x - &y;
        let low = &dg - &dx * obj.m();
        let high = &dg - &dx * obj.l();
        let lhs = low.dot(&high);
        let bound = tol * dx.norm_squared();
        if lhs > bound {
            return Ok(SlopeRestrictionReport {
                pass: false,
                num_samples,
                witness: Some((x, y, lhs - bound)),
            });
        }
    }
    Ok(SlopeRestrictionReport { pass: true, num_samples, witness: None })
}

/// Brute-force reference solver: projected gradient descent with stepsize
/// `1/L`, started from `Π_Ω(0)`, run until the fixed-point residual
/// `‖Π_Ω(y − (1/L)∇f(y)) − y‖ ≤ tol`.
///
/// Deliberately the slowest trustworthy method — used as an independent
/// oracle, never as the solver under test.
pub fn solve_reference<T: Scalar>(
    obj: &impl Objective<T>,
    set: &ConvexSet<T>,
    tol: T,
) -> Result<DVector<T>> {
    if set.dim() != obj.dim() {
        return Err(Error::DimensionMismatch(format!(
            "set dimension {} does not match objective dimension {}",
            set.dim(),
            obj.dim()
        )));
    }
    let step = T::one() / obj.l();
    let mut y = set.project(&DVector::zeros(obj.dim()))?;
    for _ in 0..REFERENCE_SOLVER_CAP {
        let next = set.project(&(&y - obj.gradient(&y)? * step))?;
        let residual = (&next - &y).norm();
        y = next;
        if residual <= tol {
            return Ok(y);
        }
        if !linalg::vec_finite(&y) {
            return Err(Error::NonFiniteIterate { step: 0 });
        }
    }
    Err(Error::MaxIterationsExceeded { cap: REFERENCE_SOLVER_CAP })
}

//! State-space representations of first-order algorithms in reduced
//! (Kronecker) coordinates, the canonical transformation to output-as-state
//! form, and the unconstrained / projected iteration maps.
//!
//! Matrices are stored dimension-free: a reduced `n×n` matrix `K` stands for
//! `K ⊗ I_d`, and the problem dimension `d` enters only when a state is
//! stepped. This keeps the certification LMIs tiny and makes the
//! dimension-independence of the analysis structural rather than incidental.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;
use crate::problems::Objective;
use crate::scalar::{c, eps_clamped, Scalar};
use crate::sets::{ConvexSet, FEASIBILITY_TOL};

/// Absolute tolerance for the eigenvalue-at-one structural check on the
/// reduced state matrix.
pub const EIGENVALUE_AT_ONE_TOL: f64 = 1e-9;

/// An algorithm in reduced Lur'e form:
/// `ξ_{k+1} = (A⊗I_d)ξ_k + (B⊗I_d)u_k`, `y_k = (C⊗I_d)ξ_k + (D⊗I_d)u_k`,
/// closed by the gradient `u_k = ∇f(y_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedSystem<T: Scalar> {
    /// Number of `d`-dimensional state blocks.
    pub n: usize,
    /// Reduced state matrix, `n×n`.
    pub a: DMatrix<T>,
    /// Reduced input column, `n×1`.
    pub b: DVector<T>,
    /// Reduced output row, `1×n`.
    pub c: DMatrix<T>,
    /// Reduced feedthrough scalar (must be zero before the output-form
    /// transformation is applicable).
    pub d: T,
}

impl<T: Scalar> ReducedSystem<T> {
    /// Builds a reduced system, validating dimensions and finiteness.
    pub fn new(a: DMatrix<T>, b: DVector<T>, c: DMatrix<T>, d: T) -> Result<Self> {
        let n = a.nrows();
        if n == 0 {
            return Err(Error::InvalidInput("state dimension must be positive".into()));
        }
        if a.ncols() != n || b.len() != n || c.nrows() != 1 || c.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "A is {}x{}, B has {} entries, C is {}x{}",
                a.nrows(),
                a.ncols(),
                b.len(),
                c.nrows(),
                c.ncols()
            )));
        }
        if !linalg::mat_finite(&a)
            || !linalg::vec_finite(&b)
            || !linalg::mat_finite(&c)
            || !crate::scalar::is_finite(d)
        {
            return Err(Error::InvalidInput("system matrices must be finite".into()));
        }
        Ok(Self { n, a, b, c, d })
    }
}

/// An algorithm whose output is its first state block (so projection acts on
/// a state): reduced dynamics
/// `y_{k+1} = a₁y_k + (A₂⊗I)ξ²_k + c₁u_k`, `ξ²_{k+1} = (A₃⊗I)y_k + (A₄⊗I)ξ²_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputForm<T: Scalar> {
    n: usize,
    a1: T,
    a2: DMatrix<T>,
    a3: DMatrix<T>,
    a4: DMatrix<T>,
    c1: T,
}

impl<T: Scalar> OutputForm<T> {
    /// Builds an output form, enforcing `c₁ < 0` and the eigenvalue-at-one
    /// structural invariant (both construction-time errors). Used by the
    /// built-in algorithm factories.
    pub fn new(
        n: usize,
        a1: T,
        a2: DMatrix<T>,
        a3: DMatrix<T>,
        a4: DMatrix<T>,
        c1: T,
    ) -> Result<Self> {
        let form = Self::assemble(n, a1, a2, a3, a4, c1)?;
        let gap = form.eigenvalue_at_one_gap();
        if gap > eps_clamped::<T>(EIGENVALUE_AT_ONE_TOL) {
            return Err(Error::InvalidInput(format!(
                "reduced state matrix has no eigenvalue at 1 (closest gap {:?})",
                gap
            )));
        }
        Ok(form)
    }

    /// Builds an output form for a user-supplied system: `c₁ < 0` is still a
    /// hard error, but a missing eigenvalue at 1 only logs a warning (some
    /// non-standard methods legitimately lack it).
    pub fn new_lenient(
        n: usize,
        a1: T,
        a2: DMatrix<T>,
        a3: DMatrix<T>,
        a4: DMatrix<T>,
        c1: T,
    ) -> Result<Self> {
        let form = Self::assemble(n, a1, a2, a3, a4, c1)?;
        let gap = form.eigenvalue_at_one_gap();
        if gap > eps_clamped::<T>(EIGENVALUE_AT_ONE_TOL) {
            log::warn!(
                "reduced state matrix has no eigenvalue at 1 (closest gap {:?}); \
                 fixed points of the iteration may not exist",
                gap
            );
        }
        Ok(form)
    }

    fn assemble(
        n: usize,
        a1: T,
        a2: DMatrix<T>,
        a3: DMatrix<T>,
        a4: DMatrix<T>,
        c1: T,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("state dimension must be positive".into()));
        }
        let k = n - 1;
        if a2.nrows() != 1 || a2.ncols() != k || a3.nrows() != k || a3.ncols() != 1
            || a4.nrows() != k || a4.ncols() != k
        {
            return Err(Error::DimensionMismatch(format!(
                "blocks A2 {}x{}, A3 {}x{}, A4 {}x{} inconsistent with n = {n}",
                a2.nrows(),
                a2.ncols(),
                a3.nrows(),
                a3.ncols(),
                a4.nrows(),
                a4.ncols()
            )));
        }
        if !(c1 < T::zero()) {
            return Err(Error::InvalidInput(format!(
                "input gain c1 must be negative, got {:?}",
                c1
            )));
        }
        if !linalg::mat_finite(&a2) || !linalg::mat_finite(&a3) || !linalg::mat_finite(&a4)
            || !crate::scalar::is_finite(a1)
        {
            return Err(Error::InvalidInput("system matrices must be finite".into()));
        }
        Ok(Self { n, a1, a2, a3, a4, c1 })
    }

    /// Number of `d`-dimensional state blocks.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Top-left scalar of the reduced state matrix.
    pub fn a1(&self) -> T {
        self.a1
    }

    /// Top-right row block, `1×(n−1)`.
    pub fn a2(&self) -> &DMatrix<T> {
        &self.a2
    }

    /// Bottom-left column block, `(n−1)×1`.
    pub fn a3(&self) -> &DMatrix<T> {
        &self.a3
    }

    /// Bottom-right block, `(n−1)×(n−1)`.
    pub fn a4(&self) -> &DMatrix<T> {
        &self.a4
    }

    /// Reduced input gain into the output block (negative).
    pub fn c1(&self) -> T {
        self.c1
    }

    /// The assembled reduced state matrix `Ã = [[a₁, A₂], [A₃, A₄]]`.
    pub fn a_tilde(&self) -> DMatrix<T> {
        let n = self.n;
        let mut a = DMatrix::zeros(n, n);
        a[(0, 0)] = self.a1;
        if n > 1 {
            a.view_mut((0, 1), (1, n - 1)).copy_from(&self.a2);
            a.view_mut((1, 0), (n - 1, 1)).copy_from(&self.a3);
            a.view_mut((1, 1), (n - 1, n - 1)).copy_from(&self.a4);
        }
        a
    }

    /// The reduced input column `B̃ = [c₁; 0; …; 0]`.
    pub fn b_tilde(&self) -> DVector<T> {
        let mut b = DVector::zeros(self.n);
        b[0] = self.c1;
        b
    }

    /// The reduced output row `C̃ = [1, 0, …, 0]`.
    pub fn c_tilde(&self) -> DMatrix<T> {
        let mut c = DMatrix::zeros(1, self.n);
        c[(0, 0)] = T::one();
        c
    }

    /// Distance from 1 to the closest eigenvalue of the reduced state
    /// matrix.
    pub fn eigenvalue_at_one_gap(&self) -> T {
        let eigs = self.a_tilde().complex_eigenvalues();
        eigs.iter()
            .map(|ev: &Complex<T>| {
                let dr = ev.re - T::one();
                (dr * dr + ev.im * ev.im).sqrt()
            })
            .fold(c::<T>(f64::INFINITY), |acc, g| if g < acc { g } else { acc })
    }

    /// The equilibrium tail state for a fixed output `y^eq`: solves the
    /// reduced system `(I − A₄)w = A₃` and returns the stacked blocks
    /// `w_j · y^eq`.
    pub fn equilibrium_xi2(&self, y_eq: &DVector<T>) -> Result<DVector<T>> {
        let k = self.n - 1;
        let d = y_eq.len();
        if k == 0 {
            return Ok(DVector::zeros(0));
        }
        let eye = DMatrix::<T>::identity(k, k);
        let inv = linalg::try_inverse(&(eye - &self.a4), "I - A4 in equilibrium solve")?;
        let w = inv * &self.a3;
        let mut out = DVector::zeros(k * d);
        for j in 0..k {
            out.rows_mut(j * d, d).axpy(w[(j, 0)], y_eq, T::one());
        }
        Ok(out)
    }
}

/// The iterate of an output-form algorithm on a `d`-dimensional problem:
/// output block `y ∈ ℝ^d` plus the stacked tail blocks `ξ² ∈ ℝ^{(n−1)d}`.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgorithmState<T: Scalar> {
    /// Current output block.
    pub y: DVector<T>,
    /// Remaining state blocks, stacked.
    pub xi2: DVector<T>,
}

impl<T: Scalar> AlgorithmState<T> {
    /// Packs a state, checking that `ξ²` holds exactly `n−1` blocks of the
    /// same dimension as `y`.
    pub fn new(y: DVector<T>, xi2: DVector<T>, n: usize) -> Result<Self> {
        if n == 0 || xi2.len() != (n - 1) * y.len() {
            return Err(Error::DimensionMismatch(format!(
                "tail state has length {}, expected (n−1)·d = {}",
                xi2.len(),
                (n.max(1) - 1) * y.len()
            )));
        }
        Ok(Self { y, xi2 })
    }

    /// Problem dimension `d`.
    pub fn dim(&self) -> usize {
        self.y.len()
    }

    /// The full stacked state `[y; ξ²] ∈ ℝ^{nd}`.
    pub fn stacked(&self) -> DVector<T> {
        let d = self.y.len();
        let mut out = DVector::zeros(d + self.xi2.len());
        out.rows_mut(0, d).copy_from(&self.y);
        out.rows_mut(d, self.xi2.len()).copy_from(&self.xi2);
        out
    }

    fn check_form(&self, form: &OutputForm<T>) -> Result<()> {
        if self.xi2.len() != (form.n - 1) * self.y.len() {
            return Err(Error::DimensionMismatch(format!(
                "state has {} tail entries, form with n = {} over d = {} needs {}",
                self.xi2.len(),
                form.n,
                self.y.len(),
                (form.n - 1) * self.y.len()
            )));
        }
        Ok(())
    }
}

/// Transforms a reduced system into output-as-state form with the canonical
/// change of coordinates `ξ̃ = Sξ`, `S = [[C], [0, I]]` (first state becomes
/// the output).
///
/// The input must have zero feedthrough and an input column that feeds only
/// the first transformed state (true of all built-in factories, whose `B`
/// has a single leading entry). The structural eigenvalue check is applied
/// leniently: user-supplied systems without an eigenvalue at 1 produce a
/// warning, not an error.
pub fn to_output_form<T: Scalar>(sys: &ReducedSystem<T>) -> Result<OutputForm<T>> {
    if sys.d != T::zero() {
        return Err(Error::FeedthroughPresent);
    }
    let n = sys.n;
    // S = [[C], [0, I]]; det(S) = C[0], so the transform is singular exactly
    // when the output does not involve the first state.
    let mut s = DMatrix::<T>::identity(n, n);
    s.view_mut((0, 0), (1, n)).copy_from(&sys.c);
    let scale = sys.c.amax().max(T::one());
    if sys.c[(0, 0)].abs() <= eps_clamped::<T>(1e-12) * scale {
        return Err(Error::SingularTransform(
            "output-as-state change of coordinates is singular (C has no leading entry)".into(),
        ));
    }
    let s_inv = linalg::try_inverse(&s, "output-as-state change of coordinates")?;
    let a_t = &s * &sys.a * &s_inv;
    let b_t = &s * &sys.b;
    // The representation stores B̃ = [c₁; 0]; reject systems whose input
    // still reaches the tail states after the transform.
    let mut tail_max = T::zero();
    for i in 1..n {
        if b_t[i].abs() > tail_max {
            tail_max = b_t[i].abs();
        }
    }
    if tail_max > eps_clamped::<T>(1e-12) * (T::one() + b_t[0].abs()) {
        return Err(Error::InvalidInput(
            "input feeds non-output states after the transformation; \
             such systems are outside the supported output-as-state class"
                .into(),
        ));
    }
    let k = n - 1;
    let a2 = a_t.view((0, 1), (1, k)).into_owned();
    let a3 = a_t.view((1, 0), (k, 1)).into_owned();
    let a4 = a_t.view((1, 1), (k, k)).into_owned();
    OutputForm::new_lenient(n, a_t[(0, 0)], a2, a3, a4, b_t[0])
}

/// One unconstrained iteration:
/// `(y⁺, ξ²⁺) = (a₁y + (A₂⊗I)ξ² + c₁∇f(y), (A₃⊗I)y + (A₄⊗I)ξ²)`.
pub fn step_unconstrained<T: Scalar>(
    form: &OutputForm<T>,
    obj: &impl Objective<T>,
    s: &AlgorithmState<T>,
) -> Result<AlgorithmState<T>> {
    s.check_form(form)?;
    let d = s.y.len();
    let g = obj.gradient(&s.y)?;
    let mut y_next = &s.y * form.a1 + g * form.c1;
    if form.n > 1 {
        y_next += linalg::kron_apply(&form.a2, &s.xi2, d)?;
    }
    let mut xi2_next = DVector::zeros((form.n - 1) * d);
    if form.n > 1 {
        for i in 0..form.n - 1 {
            xi2_next.rows_mut(i * d, d).axpy(form.a3[(i, 0)], &s.y, T::one());
        }
        xi2_next += linalg::kron_apply(&form.a4, &s.xi2, d)?;
    }
    Ok(AlgorithmState { y: y_next, xi2: xi2_next })
}

/// One projected iteration: the unconstrained step followed by the block
/// projection onto `Ω × ℝ^{(n−1)d}`, i.e. `y⁺ = Π_Ω(y_{k+½})` with the tail
/// state passed through.
pub fn step_projected<T: Scalar>(
    form: &OutputForm<T>,
    set: &ConvexSet<T>,
    obj: &impl Objective<T>,
    s: &AlgorithmState<T>,
) -> Result<AlgorithmState<T>> {
    let half = step_unconstrained(form, obj, s)?;
    Ok(AlgorithmState { y: set.project(&half.y)?, xi2: half.xi2 })
}

/// The constrained-optimality residual `‖Π_Ω(y + c₁∇f(y)) − y‖₂`.
///
/// Zero (up to tolerance) exactly when `c₁∇f(y)` lies in the normal cone
/// `N_Ω(y)`, i.e. when `y` is the fixed point of the projected iteration.
/// Errors with [`Error::PointOutsideSet`] for infeasible `y`.
pub fn fixed_point_residual<T: Scalar>(
    form: &OutputForm<T>,
    set: &ConvexSet<T>,
    obj: &impl Objective<T>,
    y: &DVector<T>,
) -> Result<T> {
    let dist = (set.project(y)? - y).norm();
    if dist > eps_clamped::<T>(FEASIBILITY_TOL) {
        return Err(Error::PointOutsideSet { distance: crate::scalar::to_f64(dist) });
    }
    let g = obj.gradient(y)?;
    let shifted = y + g * form.c1;
    Ok((set.project(&shifted)? - y).norm())
}

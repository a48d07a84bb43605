//! Factories for the built-in first-order methods in reduced output form,
//! the simulation engine for unconstrained and projected runs (with
//! optional certificate and filter co-simulation), empirical rate fitting,
//! and the two-recursion equivalence check for the projected Nesterov
//! method.

use nalgebra::{DMatrix, DVector};

use crate::certify::{lyapunov_factor, Certificate, FilterRealization};
use crate::error::{Error, Result};
use crate::linalg;
use crate::lure::{
    step_projected, step_unconstrained, to_output_form, AlgorithmState, OutputForm,
    ReducedSystem,
};
use crate::problems::Objective;
use crate::scalar::{c, eps_clamped, Scalar};
use crate::sets::ConvexSet;

fn check_sector<T: Scalar>(m: T, l: T) -> Result<()> {
    if !(m > T::zero()) || !(l >= m) || !crate::scalar::is_finite(l) {
        return Err(Error::InvalidSector(format!(
            "need 0 < m ≤ L (finite), got m = {:?}, L = {:?}",
            m, l
        )));
    }
    Ok(())
}

/// Gradient descent `y_{k+1} = y_k − η∇f(y_k)` with the sector-optimal
/// stepsize `η = 2/(L+m)`: the `n = 1` output form with `a₁ = 1`,
/// `c₁ = −2/(L+m)`.
pub fn gradient_descent<T: Scalar>(m: T, l: T) -> Result<OutputForm<T>> {
    check_sector(m, l)?;
    let two = c::<T>(2.0);
    OutputForm::new(
        1,
        T::one(),
        DMatrix::zeros(1, 0),
        DMatrix::zeros(0, 1),
        DMatrix::zeros(0, 0),
        -two / (l + m),
    )
}

/// Shared builder for the two-state momentum family
/// `x_{k+1} = (1+β)x_k − βx_{k−1} − α∇f(y_k)`, `y_k = (1+γ)x_k − γx_{k−1}`,
/// constructed as the observable realization and transformed to output
/// form.
fn momentum_form<T: Scalar>(alpha: T, beta: T, gamma: T) -> Result<OutputForm<T>> {
    let one = T::one();
    let a = DMatrix::from_row_slice(2, 2, &[one + beta, -beta, one, T::zero()]);
    let b = DVector::from_vec(vec![-alpha, T::zero()]);
    let cm = DMatrix::from_row_slice(1, 2, &[one + gamma, -gamma]);
    let sys = ReducedSystem::new(a, b, cm, T::zero())?;
    let form = to_output_form(&sys)?;
    // Re-wrap strictly: for factory-built systems the eigenvalue-at-one
    // invariant is a construction error, not a warning.
    OutputForm::new(
        form.n(),
        form.a1(),
        form.a2().clone(),
        form.a3().clone(),
        form.a4().clone(),
        form.c1(),
    )
}

/// The triple momentum method with its design parameters
/// `ρ = 1 − √(m/L)`, `(α, β, γ) = ((1+ρ)/L, ρ²/(2−ρ), ρ²/((1+ρ)(2−ρ)))`.
///
/// At `m = L` the momentum vanishes and the method degenerates to gradient
/// descent with stepsize `1/L` (still as an `n = 2` form with zero
/// momentum entries).
pub fn triple_momentum<T: Scalar>(m: T, l: T) -> Result<OutputForm<T>> {
    check_sector(m, l)?;
    let one = T::one();
    let two = c::<T>(2.0);
    let rho = one - (m / l).sqrt();
    let alpha = (one + rho) / l;
    let beta = rho * rho / (two - rho);
    let gamma = rho * rho / ((one + rho) * (two - rho));
    momentum_form(alpha, beta, gamma)
}

/// Nesterov's accelerated method: the `β = γ` member of the momentum
/// family with `α = 1/L`, `β = (√L−√m)/(√L+√m)`. Requires `m < L`
/// strictly (at `m = L` the construction degenerates; use
/// [`gradient_descent`]).
pub fn nesterov<T: Scalar>(m: T, l: T) -> Result<OutputForm<T>> {
    check_sector(m, l)?;
    if !(m < l) {
        return Err(Error::InvalidSector(format!(
            "the accelerated method needs m < L strictly, got m = {:?}, L = {:?}",
            m, l
        )));
    }
    let beta = (l.sqrt() - m.sqrt()) / (l.sqrt() + m.sqrt());
    momentum_form(T::one() / l, beta, beta)
}

/// The heavy-ball method `x_{k+1} = x_k − α∇f(x_k) + β(x_k − x_{k−1})`
/// with `α = 4/(√L+√m)²`, `β = ((√L−√m)/(√L+√m))²`.
///
/// Provided for API completeness: no global rate certificate exists for
/// it over the whole sector class (the certification search correctly
/// fails), so it is excluded from the rate-preservation experiments.
pub fn heavy_ball<T: Scalar>(m: T, l: T) -> Result<OutputForm<T>> {
    check_sector(m, l)?;
    let sum = l.sqrt() + m.sqrt();
    let alpha = c::<T>(4.0) / (sum * sum);
    let beta_root = (l.sqrt() - m.sqrt()) / sum;
    momentum_form(alpha, beta_root * beta_root, T::zero())
}

/// Run metadata attached to a [`Trajectory`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimMeta {
    /// Algorithm label (informational).
    pub algorithm: String,
    /// Problem label (informational).
    pub problem: String,
    /// Constraint-set label (informational).
    pub set: String,
    /// Seed used to generate the problem instance, when applicable.
    pub seed: Option<u64>,
    /// Number of iterations actually executed.
    pub iterations: usize,
}

/// A simulated run: error sequence, optional Lyapunov channel, optional
/// recorded states, and the final iterate.
#[derive(Debug, Clone)]
pub struct Trajectory<T: Scalar> {
    /// `‖y_k − y^ref‖₂` for `k = 0..=iterations`.
    pub y_errors: Vec<T>,
    /// `(x_k − x^eq)ᵀ(P ⊗ I)(x_k − x^eq)` when a certificate is attached
    /// (same indexing as `y_errors`), else empty.
    pub lyap_values: Vec<T>,
    /// Per-step transformed-state ratios `‖x̃_{k+1}‖/‖x̃_k‖` over steps
    /// whose denominator exceeds `1e-10`, when a certificate is attached.
    pub t_ratios: Vec<T>,
    /// Recorded stacked states (`[y; ξ²]`, extended by `ζ` when a filter
    /// is co-simulated), when requested.
    pub states: Option<Vec<DVector<T>>>,
    /// The final iterate.
    pub final_state: AlgorithmState<T>,
    /// Run metadata.
    pub meta: SimMeta,
}

/// An empirical linear-rate fit of an error sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct RateEstimate<T: Scalar> {
    /// `exp(slope)` of the least-squares fit of `log(err_k)` against `k`.
    pub rho_hat: T,
    /// `(start, end)` indices of the fitted window.
    pub window: (usize, usize),
    /// Goodness of fit in `[0, 1]`.
    pub r_squared: T,
}

/// Options for [`simulate`].
#[derive(Debug, Clone)]
pub struct SimOptions<T: Scalar> {
    /// Independent reference point `y^ref` (from
    /// [`crate::problems::solve_reference`]; error metrics must never come
    /// from the algorithm under test).
    pub y_ref: DVector<T>,
    /// Iteration cap.
    pub max_iters: usize,
    /// Early-stop threshold on `‖y_k − y^ref‖`.
    pub stop_tol: T,
    /// When set, the Lyapunov channel `lyap_values`/`t_ratios` is recorded
    /// relative to the equilibrium pinned by `y_ref`.
    pub certificate: Option<Certificate<T>>,
    /// Co-simulated IQC filter (required when the certificate's `P` has
    /// filter blocks).
    pub filter: Option<FilterRealization<T>>,
    /// Record the full state sequence.
    pub record_states: bool,
    /// Algorithm label copied into the metadata.
    pub algorithm: String,
    /// Problem label copied into the metadata.
    pub problem: String,
    /// Set label copied into the metadata.
    pub set: String,
    /// Seed copied into the metadata.
    pub seed: Option<u64>,
}

impl<T: Scalar> SimOptions<T> {
    /// Defaults: 200 000 iteration cap, stop at `‖y_k − y^ref‖ ≤ 1e-13`,
    /// no certificate, no filter, no state recording.
    pub fn new(y_ref: DVector<T>) -> Self {
        SimOptions {
            y_ref,
            max_iters: 200_000,
            stop_tol: eps_clamped::<T>(1e-13),
            certificate: None,
            filter: None,
            record_states: false,
            algorithm: String::new(),
            problem: String::new(),
            set: String::new(),
            seed: None,
        }
    }
}

/// The default initial iterate: `y₀ = Π_Ω(0)` (feasible) with zero tail
/// state, consistent with starting the original recursion from `ξ₀ = 0`.
pub fn default_start<T: Scalar>(
    form: &OutputForm<T>,
    set: &ConvexSet<T>,
    d: usize,
) -> Result<AlgorithmState<T>> {
    set.expect_dim(d)?;
    let y0 = set.project(&DVector::zeros(d))?;
    AlgorithmState::new(y0, DVector::zeros((form.n() - 1) * d), form.n())
}

/// The filter equilibrium `ζ^eq = ((I − A_Ψ)⁻¹ ⊗ I_d)(B_Ψ^y y^eq + B_Ψ^u u^eq)`.
fn filter_equilibrium<T: Scalar>(
    filt: &FilterRealization<T>,
    y_eq: &DVector<T>,
    u_eq: &DVector<T>,
) -> Result<DVector<T>> {
    let p = filt.p();
    let d = y_eq.len();
    let mut rhs = DVector::zeros(p * d);
    for i in 0..p {
        rhs.rows_mut(i * d, d).axpy(filt.b_psi_y[(i, 0)], y_eq, T::one());
        rhs.rows_mut(i * d, d).axpy(filt.b_psi_u[(i, 0)], u_eq, T::one());
    }
    let eye_minus_a = DMatrix::identity(p, p) - &filt.a_psi;
    let inv = linalg::try_inverse(&eye_minus_a, "filter equilibrium map I − A_Ψ")?;
    linalg::kron_apply(&inv, &rhs, d)
}

struct LyapContext<T: Scalar> {
    t_red: DMatrix<T>,
    x_eq: DVector<T>,
}

impl<T: Scalar> LyapContext<T> {
    fn t_norm(
        &self,
        state: &AlgorithmState<T>,
        zeta: &DVector<T>,
        d: usize,
    ) -> Result<T> {
        let mut e = DVector::zeros(self.x_eq.len());
        let nd = state.y.len() + state.xi2.len();
        e.rows_mut(0, state.y.len()).copy_from(&state.y);
        e.rows_mut(state.y.len(), state.xi2.len()).copy_from(&state.xi2);
        e.rows_mut(nd, zeta.len()).copy_from(zeta);
        e -= &self.x_eq;
        Ok(linalg::kron_apply(&self.t_red, &e, d)?.norm())
    }
}

/// Simulates the projected iteration (`step_unconstrained` when the set is
/// the whole space) until `‖y_k − y^ref‖ ≤ stop_tol` or the iteration cap.
///
/// With a certificate attached, also records the Lyapunov values
/// `‖T̃(x_k − x^eq)‖²` and per-step transformed ratios, where
/// `T̃ = lyapunov_factor(P) ⊗ I_d` and `x^eq` stacks `y^ref`, the tail
/// equilibrium pinned by the reduced fixed-point equations, and the filter
/// equilibrium. A co-simulated filter starts at its equilibrium and is
/// driven by the pre-step `(y_k, u_k)`.
///
/// Deterministic: identical inputs produce bitwise-identical trajectories.
pub fn simulate<T: Scalar>(
    form: &OutputForm<T>,
    obj: &impl Objective<T>,
    set: &ConvexSet<T>,
    x0: &AlgorithmState<T>,
    opts: &SimOptions<T>,
) -> Result<Trajectory<T>> {
    let d = x0.dim();
    if obj.dim() != d || opts.y_ref.len() != d {
        return Err(Error::DimensionMismatch(format!(
            "state dimension {d}, objective dimension {}, reference length {}",
            obj.dim(),
            opts.y_ref.len()
        )));
    }
    set.expect_dim(d)?;
    if x0.xi2.len() != (form.n() - 1) * d {
        return Err(Error::DimensionMismatch(format!(
            "tail state has length {}, form needs {}",
            x0.xi2.len(),
            (form.n() - 1) * d
        )));
    }
    let whole = matches!(set, ConvexSet::WholeSpace { .. });
    let p = opts.filter.as_ref().map_or(0, FilterRealization::p);

    let lyap_ctx = match &opts.certificate {
        Some(cert) => {
            if cert.p.nrows() != form.n() + p {
                return Err(Error::DimensionMismatch(format!(
                    "certificate P is {}x{}, but n + p = {}",
                    cert.p.nrows(),
                    cert.p.ncols(),
                    form.n() + p
                )));
            }
            let t_red = lyapunov_factor(&linalg::symmetrize(&cert.p))?;
            let u_eq = obj.gradient(&opts.y_ref)?;
            let xi2_eq = form.equilibrium_xi2(&opts.y_ref)?;
            let zeta_eq = match &opts.filter {
                Some(f) if p > 0 => filter_equilibrium(f, &opts.y_ref, &u_eq)?,
                _ => DVector::zeros(0),
            };
            let mut x_eq = DVector::zeros((form.n() + p) * d);
            x_eq.rows_mut(0, d).copy_from(&opts.y_ref);
            x_eq.rows_mut(d, xi2_eq.len()).copy_from(&xi2_eq);
            x_eq.rows_mut(form.n() * d, zeta_eq.len()).copy_from(&zeta_eq);
            Some(LyapContext { t_red, x_eq })
        }
        None => None,
    };

    // The filter starts at its own equilibrium so the shifted filter state
    // is zero, matching the hard-IQC convention.
    let mut zeta = match &opts.filter {
        Some(f) if p > 0 => {
            let u_eq = obj.gradient(&opts.y_ref)?;
            filter_equilibrium(f, &opts.y_ref, &u_eq)?
        }
        _ => DVector::zeros(0),
    };

    let mut state = x0.clone();
    let mut y_errors = Vec::new();
    let mut lyap_values = Vec::new();
    let mut t_ratios = Vec::new();
    let mut states = if opts.record_states { Some(Vec::new()) } else { None };
    let ratio_floor = c::<T>(1e-10);

    let record =
        |state: &AlgorithmState<T>, zeta: &DVector<T>, states: &mut Option<Vec<DVector<T>>>| {
            if let Some(list) = states {
                let mut x = DVector::zeros(state.y.len() + state.xi2.len() + zeta.len());
                x.rows_mut(0, state.y.len()).copy_from(&state.y);
                x.rows_mut(state.y.len(), state.xi2.len()).copy_from(&state.xi2);
                x.rows_mut(state.y.len() + state.xi2.len(), zeta.len()).copy_from(zeta);
                list.push(x);
            }
        };

    let err0 = (&state.y - &opts.y_ref).norm();
    y_errors.push(err0);
    let mut tn_prev = match &lyap_ctx {
        Some(ctx) => {
            let tn = ctx.t_norm(&state, &zeta, d)?;
            lyap_values.push(tn * tn);
            Some(tn)
        }
        None => None,
    };
    record(&state, &zeta, &mut states);

    if err0 > opts.stop_tol {
        for k in 0..opts.max_iters {
            let u = if p > 0 { Some(obj.gradient(&state.y)?) } else { None };
            let next = if whole {
                step_unconstrained(form, obj, &state)?
            } else {
                step_projected(form, set, obj, &state)?
            };
            if let (Some(u), Some(f)) = (&u, &opts.filter) {
                let mut zeta_next = linalg::kron_apply(&f.a_psi, &zeta, d)?;
                for i in 0..p {
                    zeta_next.rows_mut(i * d, d).axpy(f.b_psi_y[(i, 0)], &state.y, T::one());
                    zeta_next.rows_mut(i * d, d).axpy(f.b_psi_u[(i, 0)], u, T::one());
                }
                zeta = zeta_next;
            }
            state = next;
            if !linalg::vec_finite(&state.y) || !linalg::vec_finite(&state.xi2)
                || !linalg::vec_finite(&zeta)
            {
                return Err(Error::NonFiniteIterate { step: k + 1 });
            }
            let err = (&state.y - &opts.y_ref).norm();
            y_errors.push(err);
            if let Some(ctx) = &lyap_ctx {
                let tn = ctx.t_norm(&state, &zeta, d)?;
                lyap_values.push(tn * tn);
                if let Some(prev) = tn_prev {
                    if prev > ratio_floor {
                        t_ratios.push(tn / prev);
                    }
                }
                tn_prev = Some(tn);
            }
            record(&state, &zeta, &mut states);
            if err <= opts.stop_tol {
                break;
            }
        }
    }

    let iterations = y_errors.len() - 1;
    Ok(Trajectory {
        y_errors,
        lyap_values,
        t_ratios,
        states,
        final_state: state,
        meta: SimMeta {
            algorithm: opts.algorithm.clone(),
            problem: opts.problem.clone(),
            set: opts.set.clone(),
            seed: opts.seed,
            iterations,
        },
    })
}

/// Least-squares fit of `log(err_k)` against `k` over the window
/// `[⌈0.2·K_valid⌉, K_valid]`, where `K_valid` is the last index with
/// error above the `1e-12` floor; entries at or below the floor inside the
/// window are skipped. Needs at least 50 above-floor errors overall.
pub fn estimate_rate<T: Scalar>(traj: &Trajectory<T>) -> Result<RateEstimate<T>> {
    let floor = eps_clamped::<T>(1e-12);
    let errs = &traj.y_errors;
    let valid = errs.iter().filter(|&&e| e > floor).count();
    if valid < 50 {
        return Err(Error::InsufficientData(format!(
            "need at least 50 errors above the fit floor, found {valid}"
        )));
    }
    let k_valid = errs
        .iter()
        .rposition(|&e| e > floor)
        .expect("at least 50 valid entries exist");
    let start = ((0.2 * k_valid as f64).ceil()) as usize;
    let pts: Vec<(T, T)> = (start..=k_valid)
        .filter(|&k| errs[k] > floor)
        .map(|k| (c::<T>(k as f64), errs[k].ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::InsufficientData("fit window holds fewer than 2 points".into()));
    }
    let nf = c::<T>(pts.len() as f64);
    let x_mean = pts.iter().map(|p| p.0).fold(T::zero(), |a, b| a + b) / nf;
    let y_mean = pts.iter().map(|p| p.1).fold(T::zero(), |a, b| a + b) / nf;
    let mut sxx = T::zero();
    let mut sxy = T::zero();
    for (x, y) in &pts {
        sxx += (*x - x_mean) * (*x - x_mean);
        sxy += (*x - x_mean) * (*y - y_mean);
    }
    let slope = sxy / sxx;
    let mut ss_res = T::zero();
    let mut ss_tot = T::zero();
    for (x, y) in &pts {
        let fit = y_mean + slope * (*x - x_mean);
        ss_res += (*y - fit) * (*y - fit);
        ss_tot += (*y - y_mean) * (*y - y_mean);
    }
    let r_squared = if ss_tot <= eps_clamped::<T>(1e-300) {
        T::one()
    } else {
        let r2 = T::one() - ss_res / ss_tot;
        if r2 < T::zero() {
            T::zero()
        } else if r2 > T::one() {
            T::one()
        } else {
            r2
        }
    };
    Ok(RateEstimate { rho_hat: slope.exp(), window: (start, k_valid), r_squared })
}

/// Runs the projected output-form recursion of [`nesterov`] and, in
/// parallel, the equivalent recursion in original coordinates
/// (`x_{k+1} = Π_{Ω'_k}(y_k − α∇f(y_k))` with the per-step scaled-shifted
/// set `Ω'_k = (Ω + βx_k)/(1+β)` and `y_k = (1+β)x_k − βx_{k−1}`), and
/// returns the maximum per-step deviation between the two state
/// sequences. The recursions are algebraically identical, so any
/// deviation is floating-point noise (contract: `≤ 1e-10`).
pub fn nesterov_equivalence_check<T: Scalar>(
    m: T,
    l: T,
    set: &ConvexSet<T>,
    obj: &impl Objective<T>,
    x0: &AlgorithmState<T>,
    k_steps: usize,
) -> Result<T> {
    let form = nesterov(m, l)?;
    let d = x0.dim();
    if obj.dim() != d {
        return Err(Error::DimensionMismatch(format!(
            "state dimension {d}, objective dimension {}",
            obj.dim()
        )));
    }
    set.expect_dim(d)?;
    if x0.xi2.len() != d {
        return Err(Error::DimensionMismatch(format!(
            "tail state has length {}, the two-state form needs {d}",
            x0.xi2.len()
        )));
    }
    let one = T::one();
    let beta = (l.sqrt() - m.sqrt()) / (l.sqrt() + m.sqrt());
    let alpha = one / l;
    let one_b = one + beta;

    let mut sa = x0.clone();
    // Original coordinates: x_k from the state map y = (1+β)x_k − βx_{k−1}.
    let mut x_cur = (&x0.y + &x0.xi2 * beta) / one_b;
    let mut x_prev = x0.xi2.clone();
    let mut max_dev = T::zero();
    for _ in 0..k_steps {
        sa = step_projected(&form, set, obj, &sa)?;

        let y = &x_cur * one_b - &x_prev * beta;
        let u = obj.gradient(&y)?;
        let z = y - u * alpha;
        let t = DMatrix::from_diagonal_element(d, d, one / one_b);
        let v = &x_cur * (beta / one_b);
        let shifted = ConvexSet::transformed(set.clone(), t, v)?;
        let x_next = shifted.project(&z)?;
        x_prev = x_cur;
        x_cur = x_next;

        let y_b = &x_cur * one_b - &x_prev * beta;
        let dev = (&y_b - &sa.y).norm().max((&x_prev - &sa.xi2).norm());
        if dev > max_dev {
            max_dev = dev;
        }
        if !crate::scalar::is_finite(max_dev) {
            return Err(Error::NonFiniteIterate { step: 0 });
        }
    }
    Ok(max_dev)
}

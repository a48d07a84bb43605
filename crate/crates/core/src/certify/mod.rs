//! IQC multipliers, augmented-system assembly, LMI construction, certificate
//! search and deterministic verification, rate bisection, and the Lyapunov
//! factor `P = TᵀT` used by the projected-contraction argument.
//!
//! The deterministic [`verify_certificate`] is the trust anchor: the search
//! backend may use any heuristic, but every returned [`Certificate`] must
//! pass the verifier, and that is asserted, never assumed.

mod sdp;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;
use crate::lure::{AlgorithmState, OutputForm};
use crate::problems::Objective;
use crate::scalar::{c, eps_clamped, to_f64, Scalar};
use crate::sets::ConvexSet;

/// Relative strictness used by the verifier for both the LMI bound and the
/// `P` floor.
pub const VERIFY_TOL: f64 = 1e-9;

/// Which integral quadratic constraint family to use for `∇f` in the sector
/// `[m, L]`.
#[derive(Debug, Clone, PartialEq)]
pub enum MultiplierSpec<T: Scalar> {
    /// Pointwise sector IQC: no filter state (`p = 0`, `q = 2`).
    StaticSector,
    /// Off-by-one Zames–Falb multiplier with one filter state (`p = 1`,
    /// `q = 3`) and a cross-term weight `rho_weight ∈ (0, 1]`.
    WeightedOffByOne {
        /// Weight of the one-step-lagged cross term; rate certificates
        /// require it to be at most the certified rate (see
        /// [`MultiplierSpec::effective_at`]).
        rho_weight: T,
    },
}

impl<T: Scalar> MultiplierSpec<T> {
    /// The spec actually used when probing rate `rho`: the off-by-one
    /// cross-term weight is clamped to `min(rho_weight, rho)`, since the
    /// lagged term is only admissible in a rate-`rho` certificate with
    /// weight at most `rho`. The static sector is unaffected.
    pub fn effective_at(&self, rho: T) -> Self {
        match self {
            MultiplierSpec::StaticSector => MultiplierSpec::StaticSector,
            MultiplierSpec::WeightedOffByOne { rho_weight } => {
                let w = if *rho_weight < rho { *rho_weight } else { rho };
                MultiplierSpec::WeightedOffByOne { rho_weight: w }
            }
        }
    }

    /// Stable text label used in serialized certificates.
    pub fn label(&self) -> String {
        match self {
            MultiplierSpec::StaticSector => "static-sector".to_string(),
            MultiplierSpec::WeightedOffByOne { rho_weight } => {
                format!("weighted-off-by-one {}", to_f64(*rho_weight))
            }
        }
    }

    /// Parses a label produced by [`MultiplierSpec::label`].
    pub fn parse_label(s: &str) -> Result<Self> {
        let mut parts = s.split_whitespace();
        match parts.next() {
            Some("static-sector") => Ok(MultiplierSpec::StaticSector),
            Some("weighted-off-by-one") => {
                let w: f64 = parts
                    .next()
                    .ok_or_else(|| Error::InvalidInput("missing off-by-one weight".into()))?
                    .parse()
                    .map_err(|e| Error::InvalidInput(format!("bad off-by-one weight: {e}")))?;
                Ok(MultiplierSpec::WeightedOffByOne { rho_weight: c::<T>(w) })
            }
            other => Err(Error::InvalidInput(format!("unknown multiplier label {:?}", other))),
        }
    }
}

/// A state-space realization of the IQC filter
/// `ζ_{k+1} = A_Ψζ_k + B_Ψ^y y_k + B_Ψ^u u_k`,
/// `h_k = C_Ψζ_k + D_Ψ^y y_k + D_Ψ^u u_k`
/// together with the symmetric basis `{Mᵢ}` over which the LMI searches
/// nonnegative combinations `M = Σ λᵢMᵢ`.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterRealization<T: Scalar> {
    /// Filter state matrix, `p×p`.
    pub a_psi: DMatrix<T>,
    /// Input map from the algorithm output, `p×1`.
    pub b_psi_y: DMatrix<T>,
    /// Input map from the gradient, `p×1`.
    pub b_psi_u: DMatrix<T>,
    /// Output map from the filter state, `q×p`.
    pub c_psi: DMatrix<T>,
    /// Direct term from the algorithm output, `q×1`.
    pub d_psi_y: DMatrix<T>,
    /// Direct term from the gradient, `q×1`.
    pub d_psi_u: DMatrix<T>,
    /// Symmetric `q×q` basis matrices of the multiplier cone.
    pub m_basis: Vec<DMatrix<T>>,
    /// Sector lower bound the filter was built for.
    pub m: T,
    /// Sector upper bound the filter was built for.
    pub l: T,
}

impl<T: Scalar> FilterRealization<T> {
    /// Filter state dimension `p`.
    pub fn p(&self) -> usize {
        self.a_psi.nrows()
    }

    /// Filtered-signal dimension `q`.
    pub fn q(&self) -> usize {
        self.c_psi.nrows()
    }
}

/// The augmented system obtained by stacking the algorithm with the IQC
/// filter and eliminating `y_k` (state `x_k = (ξ̃_k, ζ_k)`).
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedSystem<T: Scalar> {
    /// `(n+p)×(n+p)` block matrix `[[Ã, 0], [B_Ψ^y C̃, A_Ψ]]`.
    pub a_hat: DMatrix<T>,
    /// `(n+p)` column `[B̃; B_Ψ^u]`.
    pub b_hat: DVector<T>,
    /// `q×(n+p)` block row `[D_Ψ^y C̃, C_Ψ]`.
    pub c_hat: DMatrix<T>,
    /// `q` column `D_Ψ^u`.
    pub d_hat: DVector<T>,
    /// Multiplier basis carried along so certificates can be re-verified
    /// from the augmented system alone.
    pub m_basis: Vec<DMatrix<T>>,
    /// Diagonal magnitude hint (`n+p` state scales then the input scale)
    /// used to precondition the certificate search.
    pub scaling_hint: Vec<f64>,
}

impl<T: Scalar> AugmentedSystem<T> {
    /// Combined state dimension `n + p`.
    pub fn state_dim(&self) -> usize {
        self.a_hat.nrows()
    }
}

/// A quadratic rate certificate: `V(x) = (x − x^eq)ᵀ(P ⊗ I_d)(x − x^eq)`
/// decays by `ρ²` per step along the unconstrained dynamics.
#[derive(Debug, Clone, PartialEq)]
pub struct Certificate<T: Scalar> {
    /// Certified rate in `(0, 1)`.
    pub rho: T,
    /// Reduced symmetric Lyapunov matrix, `(n+p)×(n+p)`; the full-space
    /// matrix is `P ⊗ I_d`, natively in the block structure that makes the
    /// `y`-block weighting a positive scalar.
    pub p: DMatrix<T>,
    /// Nonnegative multiplier coefficients.
    pub lambdas: Vec<T>,
    /// Verified slack `−λmax(LMI)` (positive when strictly feasible).
    pub margin: T,
    /// Smallest eigenvalue of `P`.
    pub p_min_eig: T,
}

/// Outcome of the deterministic certificate verifier.
#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport<T: Scalar> {
    /// Overall pass/fail.
    pub pass: bool,
    /// `λmax` of the LMI left-hand side.
    pub lmi_max_eig: T,
    /// Allowed upper bound for it, `tol·(1 + ‖P‖₂)`.
    pub lmi_bound: T,
    /// `λmin(P)`.
    pub p_min_eig: T,
    /// Required floor for it, `tol·tr(P)/(n+p)`.
    pub p_floor: T,
    /// Smallest multiplier coefficient.
    pub min_lambda: T,
    /// Populated when the inputs were structurally unusable.
    pub detail: Option<String>,
}

/// Result of a single-rate certificate search; infeasibility is a value,
/// not an error.
#[derive(Debug, Clone)]
pub enum FindOutcome<T: Scalar> {
    /// A certificate that passes [`verify_certificate`].
    Found(Certificate<T>),
    /// No strictly feasible point was found at this rate.
    Infeasible {
        /// The probed rate.
        rho: T,
        /// Human-readable reason.
        detail: String,
    },
}

/// Options for [`find_certificate`].
#[derive(Debug, Clone, Default)]
pub struct FindOptions {
    /// Overrides the augmented system's preconditioning hint
    /// (`n+p` state magnitudes followed by the input magnitude).
    pub scaling_hint: Option<Vec<f64>>,
}

fn check_sector<T: Scalar>(m: T, l: T) -> Result<()> {
    if !(m > T::zero()) || !(l >= m) {
        return Err(Error::InvalidSector(format!(
            "need 0 < m ≤ L, got m = {:?}, L = {:?}",
            m, l
        )));
    }
    Ok(())
}

/// Builds the IQC filter and multiplier basis for `∇f` slope-restricted to
/// `[m, L]`.
///
/// `StaticSector` stacks `h = (y, u)` with the single basis element
/// `[[−2mL, m+L], [m+L, −2]]`, whose shifted quadratic form is
/// `2(u − my)ᵀ(Ly − u) ≥ 0` for in-sector pairs (sign validated by
/// brute-force sampling in the test-suite).
///
/// `WeightedOffByOne` adds one filter state `ζ_{k+1} = Ly_k − u_k`, stacks
/// `h = (y, u, ζ)`, and spans the cone of the sector form plus the lagged
/// cross form weighted by `rho_weight²`.
pub fn build_filter<T: Scalar>(
    spec: &MultiplierSpec<T>,
    m: T,
    l: T,
) -> Result<FilterRealization<T>> {
    check_sector(m, l)?;
    let two = c::<T>(2.0);
    match spec {
        MultiplierSpec::StaticSector => {
            let m1 = DMatrix::from_row_slice(2, 2, &[
                -two * m * l,
                m + l,
                m + l,
                -two,
            ]);
            Ok(FilterRealization {
                a_psi: DMatrix::zeros(0, 0),
                b_psi_y: DMatrix::zeros(0, 1),
                b_psi_u: DMatrix::zeros(0, 1),
                c_psi: DMatrix::zeros(2, 0),
                d_psi_y: DMatrix::from_column_slice(2, 1, &[T::one(), T::zero()]),
                d_psi_u: DMatrix::from_column_slice(2, 1, &[T::zero(), T::one()]),
                m_basis: vec![m1],
                m,
                l,
            })
        }
        MultiplierSpec::WeightedOffByOne { rho_weight } => {
            let w = *rho_weight;
            if !(w > T::zero()) || !(w <= T::one()) {
                return Err(Error::InvalidInput(format!(
                    "off-by-one weight must lie in (0, 1], got {:?}",
                    w
                )));
            }
            let w2 = w * w;
            let zero = T::zero();
            let mut m1 = DMatrix::zeros(3, 3);
            m1[(0, 0)] = -two * m * l;
            m1[(0, 1)] = m + l;
            m1[(1, 0)] = m + l;
            m1[(1, 1)] = -two;
            let m2 = DMatrix::from_row_slice(3, 3, &[
                -two * m * l,
                m + l,
                w2 * m,
                m + l,
                -two,
                -w2,
                w2 * m,
                -w2,
                zero,
            ]);
            Ok(FilterRealization {
                a_psi: DMatrix::from_row_slice(1, 1, &[zero]),
                b_psi_y: DMatrix::from_row_slice(1, 1, &[l]),
                b_psi_u: DMatrix::from_row_slice(1, 1, &[-T::one()]),
                c_psi: DMatrix::from_column_slice(3, 1, &[zero, zero, T::one()]),
                d_psi_y: DMatrix::from_column_slice(3, 1, &[T::one(), zero, zero]),
                d_psi_u: DMatrix::from_column_slice(3, 1, &[zero, T::one(), zero]),
                m_basis: vec![m1, m2],
                m,
                l,
            })
        }
    }
}

/// Stacks an output-form algorithm with an IQC filter into the augmented
/// system `x_k = (ξ̃_k, ζ_k)`:
/// `Â = [[Ã, 0], [B_Ψ^y C̃, A_Ψ]]`, `B̂ = [B̃; B_Ψ^u]`,
/// `Ĉ = [D_Ψ^y C̃, C_Ψ]`, `D̂ = D_Ψ^u`.
pub fn build_augmented<T: Scalar>(
    form: &OutputForm<T>,
    filt: &FilterRealization<T>,
) -> Result<AugmentedSystem<T>> {
    let n = form.n();
    let p = filt.p();
    let q = filt.q();
    if filt.b_psi_y.ncols() != 1 || filt.b_psi_u.ncols() != 1 || filt.d_psi_y.nrows() != q
        || filt.d_psi_u.nrows() != q
    {
        return Err(Error::DimensionMismatch("filter block shapes inconsistent".into()));
    }
    let na = n + p;
    let a_t = form.a_tilde();
    let b_t = form.b_tilde();
    let c_t = form.c_tilde();

    let mut a_hat = DMatrix::zeros(na, na);
    a_hat.view_mut((0, 0), (n, n)).copy_from(&a_t);
    if p > 0 {
        a_hat.view_mut((n, 0), (p, n)).copy_from(&(&filt.b_psi_y * &c_t));
        a_hat.view_mut((n, n), (p, p)).copy_from(&filt.a_psi);
    }
    let mut b_hat = DVector::zeros(na);
    b_hat.rows_mut(0, n).copy_from(&b_t);
    for i in 0..p {
        b_hat[n + i] = filt.b_psi_u[(i, 0)];
    }
    let mut c_hat = DMatrix::zeros(q, na);
    c_hat.view_mut((0, 0), (q, n)).copy_from(&(&filt.d_psi_y * &c_t));
    if p > 0 {
        c_hat.view_mut((0, n), (q, p)).copy_from(&filt.c_psi);
    }
    let d_hat = DVector::from_fn(q, |i, _| filt.d_psi_u[(i, 0)]);

    let l_f = to_f64(filt.l).abs().max(1.0);
    let mut scaling_hint = vec![1.0; n];
    scaling_hint.extend(std::iter::repeat(l_f).take(p));
    scaling_hint.push(l_f);

    Ok(AugmentedSystem {
        a_hat,
        b_hat,
        c_hat,
        d_hat,
        m_basis: filt.m_basis.clone(),
        scaling_hint,
    })
}

fn lmi_build<T: Scalar>(
    aug: &AugmentedSystem<T>,
    p: &DMatrix<T>,
    lambdas: &[T],
    rho: T,
) -> Result<DMatrix<T>> {
    let na = aug.state_dim();
    if p.nrows() != na || p.ncols() != na {
        return Err(Error::DimensionMismatch(format!(
            "P is {}x{}, augmented state dimension is {na}",
            p.nrows(),
            p.ncols()
        )));
    }
    if lambdas.len() != aug.m_basis.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} multiplier coefficients for a basis of size {}",
            lambdas.len(),
            aug.m_basis.len()
        )));
    }
    let p_sym = linalg::symmetrize(p);
    let nl = na + 1;
    let pa = &p_sym * &aug.a_hat;
    let pb = &p_sym * &aug.b_hat;
    let mut g = DMatrix::zeros(nl, nl);
    g.view_mut((0, 0), (na, na))
        .copy_from(&(aug.a_hat.transpose() * &pa - &p_sym * (rho * rho)));
    let apb = aug.a_hat.transpose() * &pb;
    for r in 0..na {
        g[(r, na)] = apb[r];
        g[(na, r)] = apb[r];
    }
    g[(na, na)] = aug.b_hat.dot(&pb);
    // [Ĉ D̂] stacked once, then ĈD̂ᵀ M ĈD̂ accumulated per basis element.
    let q = aug.c_hat.nrows();
    let mut cd = DMatrix::zeros(q, nl);
    cd.view_mut((0, 0), (q, na)).copy_from(&aug.c_hat);
    for r in 0..q {
        cd[(r, na)] = aug.d_hat[r];
    }
    for (li, m_i) in lambdas.iter().zip(&aug.m_basis) {
        g += cd.transpose() * m_i * &cd * *li;
    }
    Ok(linalg::symmetrize(&g))
}

/// The LMI left-hand side
/// `[[ÂᵀPÂ − ρ²P, ÂᵀPB̂], [B̂ᵀPÂ, B̂ᵀPB̂]] + [Ĉ D̂]ᵀ(Σλᵢ Mᵢ)[Ĉ D̂]`
/// of size `(n+p+1)`, symmetrized.
///
/// `lambdas` must be entrywise nonnegative ([`Error::NegativeLambda`]);
/// `rho` must be finite and nonnegative (`rho = 0` is the limit case that
/// simply drops the `−ρ²P` term).
pub fn lmi_matrix<T: Scalar>(
    aug: &AugmentedSystem<T>,
    p: &DMatrix<T>,
    lambdas: &[T],
    rho: T,
) -> Result<DMatrix<T>> {
    for (i, lam) in lambdas.iter().enumerate() {
        if !(*lam >= T::zero()) {
            return Err(Error::NegativeLambda { index: i, value: to_f64(*lam) });
        }
    }
    if !crate::scalar::is_finite(rho) || rho < T::zero() {
        return Err(Error::InvalidInput(format!("rate must be finite and ≥ 0, got {:?}", rho)));
    }
    lmi_build(aug, p, lambdas, rho)
}

/// Deterministically checks a certificate against the augmented system:
/// (i) `λmin(P) ≥ tol·tr(P)/(n+p)`, (ii) `λmax(LMI) ≤ tol·(1 + ‖P‖₂)`,
/// (iii) `λ ≥ 0` entrywise, with `tol = 1e-9` (relative strictness).
///
/// This is the trust anchor: search heuristics may be sloppy, the verifier
/// may not. Structural mismatches yield a failed report, never a panic.
pub fn verify_certificate<T: Scalar>(
    aug: &AugmentedSystem<T>,
    cert: &Certificate<T>,
) -> VerificationReport<T> {
    let tol = eps_clamped::<T>(VERIFY_TOL);
    let min_lambda = cert
        .lambdas
        .iter()
        .copied()
        .fold(T::zero(), |acc, x| if x < acc { x } else { acc });
    let lmi = match lmi_build(aug, &cert.p, &cert.lambdas, cert.rho) {
        Ok(m) => m,
        Err(e) => {
            return VerificationReport {
                pass: false,
                lmi_max_eig: c::<T>(f64::INFINITY),
                lmi_bound: T::zero(),
                p_min_eig: c::<T>(f64::NEG_INFINITY),
                p_floor: T::zero(),
                min_lambda,
                detail: Some(format!("could not assemble LMI: {e}")),
            }
        }
    };
    let p_sym = linalg::symmetrize(&cert.p);
    let ev_p = linalg::sym_eigenvalues(&p_sym);
    let p_min_eig = ev_p[0];
    let p_max_eig = ev_p[ev_p.len() - 1];
    let lmi_max_eig = linalg::lambda_max(&lmi);
    let lmi_bound = tol * (T::one() + p_max_eig);
    let p_floor = tol * p_sym.trace() / c::<T>(aug.state_dim() as f64);
    let pass = lmi_max_eig <= lmi_bound && p_min_eig >= p_floor && min_lambda >= T::zero();
    VerificationReport {
        pass,
        lmi_max_eig,
        lmi_bound,
        p_min_eig,
        p_floor,
        min_lambda,
        detail: None,
    }
}

fn to_sdp_data<T: Scalar>(aug: &AugmentedSystem<T>, hint: Option<&[f64]>) -> Result<sdp::SdpData> {
    let na = aug.state_dim();
    let q = aug.c_hat.nrows();
    let hint_vec: Vec<f64> = match hint {
        Some(h) => h.to_vec(),
        None => aug.scaling_hint.clone(),
    };
    if hint_vec.len() != na + 1 || hint_vec.iter().any(|&h| !(h > 0.0) || !h.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "scaling hint must hold {} positive entries",
            na + 1
        )));
    }
    let mut cd = DMatrix::<f64>::zeros(q, na + 1);
    for r in 0..q {
        for j in 0..na {
            cd[(r, j)] = to_f64(aug.c_hat[(r, j)]);
        }
        cd[(r, na)] = to_f64(aug.d_hat[r]);
    }
    Ok(sdp::SdpData {
        ah: aug.a_hat.map(|x| to_f64(x)),
        bh: aug.b_hat.map(|x| to_f64(x)),
        cd,
        ms: aug.m_basis.iter().map(|m| m.map(|x| to_f64(x))).collect(),
        hint: hint_vec,
    })
}

fn certificate_from_raw<T: Scalar>(
    aug: &AugmentedSystem<T>,
    rho: T,
    p_raw: &DMatrix<f64>,
    lam_raw: &[f64],
) -> Result<Certificate<T>> {
    let mut cert = Certificate {
        rho,
        p: p_raw.map(|x| c::<T>(x)),
        lambdas: lam_raw.iter().map(|&x| c::<T>(x)).collect(),
        margin: T::zero(),
        p_min_eig: T::zero(),
    };
    let report = verify_certificate(aug, &cert);
    if !report.pass {
        return Err(Error::UnverifiedCertificate(format!(
            "search result fails deterministic verification \
             (λmax(LMI) = {:?} vs bound {:?}, λmin(P) = {:?} vs floor {:?})",
            report.lmi_max_eig, report.lmi_bound, report.p_min_eig, report.p_floor
        )));
    }
    cert.margin = -report.lmi_max_eig;
    cert.p_min_eig = report.p_min_eig;
    Ok(cert)
}

/// Searches for a certificate at a single rate `rho ∈ (0, 1)`.
///
/// The search runs in `f64` regardless of `T` (an interior-point max-margin
/// solve; see the backend docs), maps the result back, and verifies it with
/// [`verify_certificate`] before returning. Infeasibility at the probed
/// rate is reported as a value.
pub fn find_certificate<T: Scalar>(
    aug: &AugmentedSystem<T>,
    rho: T,
    opts: &FindOptions,
) -> Result<FindOutcome<T>> {
    let rho_f = to_f64(rho);
    if !(rho_f > 0.0 && rho_f < 1.0) {
        return Err(Error::InvalidInput(format!("rate must lie in (0, 1), got {rho_f}")));
    }
    let data = to_sdp_data(aug, opts.scaling_hint.as_deref())?;
    match sdp::find_certificate_f64(&data, rho_f) {
        Some((_, p_raw, lam_raw)) => {
            let cert = certificate_from_raw(aug, rho, &p_raw, &lam_raw)?;
            Ok(FindOutcome::Found(cert))
        }
        None => Ok(FindOutcome::Infeasible {
            rho,
            detail: "no strictly feasible (P, λ) at this rate".into(),
        }),
    }
}

/// Certifies the best rate for an algorithm by bisection on `ρ ∈ (0, 1)`.
///
/// Maintains an (infeasible, feasible) bracket starting from
/// `ρ_hi = 1 − 1e-9`; if even that is infeasible the method genuinely fails
/// for this algorithm/multiplier pair ([`Error::NoCertificate`] — e.g. the
/// heavy-ball method). Stops when the bracket is narrower than `tol`
/// (`tol ≥ 1e-6`), with a hard cap of 60 halvings, and returns the feasible
/// endpoint with its verified certificate.
///
/// For the off-by-one multiplier the filter is rebuilt at every probe with
/// the effective weight `min(rho_weight, ρ)`; the certificate's re-\
/// verification convention is therefore [`MultiplierSpec::effective_at`]
/// applied at the returned rate.
pub fn certify_rate<T: Scalar>(
    form: &OutputForm<T>,
    m: T,
    l: T,
    spec: &MultiplierSpec<T>,
    tol: T,
) -> Result<(T, Certificate<T>)> {
    check_sector(m, l)?;
    let tol_f = to_f64(tol);
    if !(tol_f >= 1e-6) {
        return Err(Error::InvalidInput(format!(
            "bisection tolerance must be at least 1e-6, got {tol_f}"
        )));
    }
    let probe = |rho_f: f64| -> Result<Option<(DMatrix<f64>, Vec<f64>, AugmentedSystem<T>)>> {
        let eff = spec.effective_at(c::<T>(rho_f));
        let filt = build_filter(&eff, m, l)?;
        let aug = build_augmented(form, &filt)?;
        let data = to_sdp_data(&aug, None)?;
        Ok(sdp::find_certificate_f64(&data, rho_f).map(|(_, p, lam)| (p, lam, aug)))
    };

    let hi0 = 1.0 - 1e-9;
    if probe(hi0)?.is_none() {
        return Err(Error::NoCertificate);
    }
    let (mut lo, mut hi) = (0.0_f64, hi0);
    for _ in 0..60 {
        if hi - lo <= tol_f {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if probe(mid)?.is_some() {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let (p_raw, lam_raw, aug) = probe(hi)?.ok_or(Error::NoCertificate)?;
    let rho_star = c::<T>(hi);
    let cert = certificate_from_raw(&aug, rho_star, &p_raw, &lam_raw)?;
    Ok((rho_star, cert))
}

/// The invertible factor `T` with `TᵀT = P` (upper-triangular Cholesky).
///
/// The full-space transform is `T ⊗ I_d`, which automatically has the block
/// structure the projected-contraction argument needs: its leading block is
/// the nonzero scalar `T[0,0]·I_d`.
pub fn lyapunov_factor<T: Scalar>(p: &DMatrix<T>) -> Result<DMatrix<T>> {
    linalg::cholesky_upper(p)
}

/// Simulates the projected algorithm with the co-simulated filter state and
/// returns the largest per-step contraction ratio
/// `‖T(x_{k+1} − x^eq)‖ / ‖T(x_k − x^eq)‖` (over steps whose denominator
/// exceeds `1e-10`), where `T = lyapunov_factor(P) ⊗ I_d`.
///
/// The reference `y^eq` comes from the independent projected-gradient
/// oracle; the remaining equilibrium blocks are pinned by the reduced
/// fixed-point equations. Errors with [`Error::UnverifiedCertificate`] if
/// the certificate does not pass [`verify_certificate`] against the
/// supplied filter.
pub fn transformed_contraction_check<T: Scalar>(
    form: &OutputForm<T>,
    set: &ConvexSet<T>,
    obj: &impl Objective<T>,
    cert: &Certificate<T>,
    filt: &FilterRealization<T>,
    x0: &AlgorithmState<T>,
    k_steps: usize,
) -> Result<T> {
    let aug = build_augmented(form, filt)?;
    let report = verify_certificate(&aug, cert);
    if !report.pass {
        return Err(Error::UnverifiedCertificate(format!(
            "certificate fails verification before the contraction check \
             (λmax(LMI) = {:?} vs bound {:?})",
            report.lmi_max_eig, report.lmi_bound
        )));
    }
    let y_ref = crate::problems::solve_reference(obj, set, eps_clamped::<T>(1e-10))?;
    let mut opts = crate::algorithms::SimOptions::new(y_ref);
    opts.max_iters = k_steps;
    opts.certificate = Some(cert.clone());
    opts.filter = Some(filt.clone());
    let traj = crate::algorithms::simulate(form, obj, set, x0, &opts)?;
    Ok(traj
        .t_ratios
        .iter()
        .copied()
        .fold(T::zero(), |acc, r| if r > acc { r } else { acc }))
}

/// A serializable certificate bundle: enough context (algorithm label,
/// sector, multiplier) for a separate process to rebuild the augmented
/// system and re-run [`verify_certificate`].
#[derive(Debug, Clone, PartialEq)]
pub struct CertificateRecord<T: Scalar> {
    /// Algorithm label (e.g. `gradient-descent`, `triple-momentum`).
    pub algorithm: String,
    /// Sector lower bound.
    pub m: T,
    /// Sector upper bound.
    pub l: T,
    /// Multiplier used, with its effective weight.
    pub multiplier: MultiplierSpec<T>,
    /// The certificate itself.
    pub certificate: Certificate<T>,
}

impl<T: Scalar> CertificateRecord<T> {
    /// Plain-text serialization (`key = value` lines; `P` row-major).
    pub fn to_text(&self) -> String {
        let cert = &self.certificate;
        let mut out = String::new();
        out.push_str(&format!("algorithm = {}\n", self.algorithm));
        out.push_str(&format!("m = {}\n", to_f64(self.m)));
        out.push_str(&format!("L = {}\n", to_f64(self.l)));
        out.push_str(&format!("multiplier = {}\n", self.multiplier.label()));
        out.push_str(&format!("rho = {}\n", to_f64(cert.rho)));
        let p_entries: Vec<String> = (0..cert.p.nrows())
            .flat_map(|i| (0..cert.p.ncols()).map(move |j| (i, j)))
            .map(|(i, j)| format!("{}", to_f64(cert.p[(i, j)])))
            .collect();
        out.push_str(&format!("P = {}\n", p_entries.join(" ")));
        let lam: Vec<String> =
            cert.lambdas.iter().map(|&x| format!("{}", to_f64(x))).collect();
        out.push_str(&format!("lambdas = {}\n", lam.join(" ")));
        out.push_str(&format!(
            "margins = {} {}\n",
            to_f64(cert.margin),
            to_f64(cert.p_min_eig)
        ));
        out
    }

    /// Parses the format produced by [`CertificateRecord::to_text`].
    pub fn from_text(text: &str) -> Result<Self> {
        let mut fields = std::collections::HashMap::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::InvalidInput(format!("malformed line {line:?}")))?;
            fields.insert(key.trim().to_string(), value.trim().to_string());
        }
        let get = |key: &str| -> Result<String> {
            fields
                .get(key)
                .cloned()
                .ok_or_else(|| Error::InvalidInput(format!("missing key {key:?}")))
        };
        let parse_f64 = |key: &str, s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|e| Error::InvalidInput(format!("bad value for {key:?}: {e}")))
        };
        let parse_list = |key: &str| -> Result<Vec<f64>> {
            get(key)?
                .split_whitespace()
                .map(|tok| parse_f64(key, tok))
                .collect()
        };
        let p_list = parse_list("P")?;
        let s = (p_list.len() as f64).sqrt().round() as usize;
        if s * s != p_list.len() || s == 0 {
            return Err(Error::InvalidInput(format!(
                "P holds {} entries, not a positive square count",
                p_list.len()
            )));
        }
        let margins = parse_list("margins")?;
        if margins.len() != 2 {
            return Err(Error::InvalidInput("margins must hold two entries".into()));
        }
        Ok(CertificateRecord {
            algorithm: get("algorithm")?,
            m: c::<T>(parse_f64("m", &get("m")?)?),
            l: c::<T>(parse_f64("L", &get("L")?)?),
            multiplier: MultiplierSpec::parse_label(&get("multiplier")?)?,
            certificate: Certificate {
                rho: c::<T>(parse_f64("rho", &get("rho")?)?),
                p: DMatrix::from_fn(s, s, |i, j| c::<T>(p_list[i * s + j])),
                lambdas: parse_list("lambdas")?.into_iter().map(|x| c::<T>(x)).collect(),
                margin: c::<T>(margins[0]),
                p_min_eig: c::<T>(margins[1]),
            },
        })
    }
}

//! Interior-point search backend for the certificate LMI (always `f64`).
//!
//! The search maximizes the feasibility margin `t` of
//! `LMI(P, λ, ρ) + t·I ⪯ 0` subject to `P ⪰ floor`, `tr(P) ≤ n+p`, `λ ≥ 0`
//! — a small semidefinite program solved with Clarabel. Raw problem data is
//! badly scaled for stiff sectors (`L/m ~ 10³`), so the solve happens in a
//! congruence-scaled basis built from a per-state magnitude hint, with each
//! multiplier basis element normalized to unit Frobenius norm; the result is
//! mapped back to the raw basis and re-checked there with a direct
//! eigenvalue computation before being accepted.

use clarabel::algebra::CscMatrix;
use clarabel::solver::SupportedConeT::{NonnegativeConeT, PSDTriangleConeT};
use clarabel::solver::{DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus};
use nalgebra::{DMatrix, DVector};

/// Raw (unscaled) LMI data in `f64`: reduced augmented system, stacked
/// `[Ĉ D̂]`, multiplier basis, and the diagonal scaling hint
/// (`n+p` state magnitudes followed by the input magnitude).
pub(crate) struct SdpData {
    pub ah: DMatrix<f64>,
    pub bh: DVector<f64>,
    pub cd: DMatrix<f64>,
    pub ms: Vec<DMatrix<f64>>,
    pub hint: Vec<f64>,
}

/// Minimum accepted margin in the scaled basis.
const MARGIN_MIN: f64 = 1e-8;
/// Eigenvalue floor imposed on the raw `P` through the scaled cone.
const P_FLOOR_RAW: f64 = 1e-9;

/// Column-stacked upper-triangle vectorization with off-diagonal `√2`
/// weighting (the PSD-triangle convention of the solver).
fn svec(g: &DMatrix<f64>) -> Vec<f64> {
    let n = g.nrows();
    let r2 = 2.0_f64.sqrt();
    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    for j in 0..n {
        for i in 0..=j {
            out.push(if i == j { g[(i, j)] } else { r2 * g[(i, j)] });
        }
    }
    out
}

fn dense_to_csc(a: &DMatrix<f64>) -> CscMatrix<f64> {
    let (m, n) = (a.nrows(), a.ncols());
    let mut colptr = vec![0usize];
    let mut rowval = Vec::new();
    let mut nzval = Vec::new();
    for j in 0..n {
        for i in 0..m {
            if a[(i, j)] != 0.0 {
                rowval.push(i);
                nzval.push(a[(i, j)]);
            }
        }
        colptr.push(rowval.len());
    }
    CscMatrix::new(m, n, colptr, rowval, nzval)
}

fn sym_eigs(a: &DMatrix<f64>) -> Vec<f64> {
    let s = (a + a.transpose()) * 0.5;
    let mut ev: Vec<f64> = s.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|x, y| x.partial_cmp(y).unwrap());
    ev
}

/// The symmetrized LMI left-hand side
/// `[[ÂᵀPÂ − ρ²P, ÂᵀPB̂],[B̂ᵀPÂ, B̂ᵀPB̂]] + [Ĉ D̂]ᵀ(Σλᵢ Mᵢ)[Ĉ D̂]`.
pub(crate) fn lmi_eval_f64(
    ah: &DMatrix<f64>,
    bh: &DVector<f64>,
    cd: &DMatrix<f64>,
    ms: &[DMatrix<f64>],
    p: &DMatrix<f64>,
    lam: &[f64],
    rho: f64,
) -> DMatrix<f64> {
    let na = ah.nrows();
    let nl = na + 1;
    let pa = p * ah;
    let pb = p * bh;
    let mut g = DMatrix::zeros(nl, nl);
    g.view_mut((0, 0), (na, na))
        .copy_from(&(ah.transpose() * &pa - p * (rho * rho)));
    let apb = ah.transpose() * &pb;
    for r in 0..na {
        g[(r, na)] = apb[r];
        g[(na, r)] = apb[r];
    }
    g[(na, na)] = bh.dot(&pb);
    for (li, m_i) in lam.iter().zip(ms) {
        g += cd.transpose() * m_i * cd * *li;
    }
    (&g + g.transpose()) * 0.5
}

/// Max-margin solve in an already-scaled basis with a diagonal floor on `P`.
/// Returns `(t, P, λ)` when the interior-point solver reports (almost)
/// solved.
fn max_margin(
    ah: &DMatrix<f64>,
    bh: &DVector<f64>,
    cd: &DMatrix<f64>,
    ms: &[DMatrix<f64>],
    rho: f64,
    floor: &[f64],
) -> Option<(f64, DMatrix<f64>, Vec<f64>)> {
    let na = ah.nrows();
    let nl = na + 1;
    let nm = ms.len();
    let np_sv = na * (na + 1) / 2;
    let nvar = np_sv + nm + 1;
    let cap = na as f64;
    let r2 = 2.0_f64.sqrt();

    // One column of the LMI map per decision variable: the symmetric basis
    // elements of P, each multiplier direction, and the margin t (identity).
    let mut acols: Vec<Vec<f64>> = Vec::with_capacity(nvar);
    for j in 0..na {
        for i in 0..=j {
            let mut e = DMatrix::<f64>::zeros(na, na);
            if i == j {
                e[(i, j)] = 1.0;
            } else {
                e[(i, j)] = 1.0 / r2;
                e[(j, i)] = 1.0 / r2;
            }
            let ea = &e * ah;
            let eb = &e * bh;
            let mut g = DMatrix::<f64>::zeros(nl, nl);
            g.view_mut((0, 0), (na, na))
                .copy_from(&(ah.transpose() * &ea - &e * (rho * rho)));
            let at_eb = ah.transpose() * &eb;
            let bt_ea = (bh.transpose() * &ea).transpose();
            for r in 0..na {
                let v = 0.5 * (at_eb[r] + bt_ea[r]);
                g[(r, na)] = v;
                g[(na, r)] = v;
            }
            g[(na, na)] = bh.dot(&eb);
            acols.push(svec(&g));
        }
    }
    for m_i in ms {
        let g0 = cd.transpose() * m_i * cd;
        let g = (&g0 + g0.transpose()) * 0.5;
        acols.push(svec(&g));
    }
    acols.push(svec(&DMatrix::identity(nl, nl)));

    let svl = nl * (nl + 1) / 2;
    let rows_total = svl + np_sv + nm + 1;
    let mut a = DMatrix::<f64>::zeros(rows_total, nvar);
    let mut b = vec![0.0; rows_total];
    // PSD block 1: −(LMI + t·I) ⪰ 0.
    for (j, col) in acols.iter().enumerate() {
        for i in 0..svl {
            a[(i, j)] = col[i];
        }
    }
    // PSD block 2: P − diag(floor) ⪰ 0.
    let svfl = svec(&DMatrix::from_diagonal(&DVector::from_row_slice(floor)));
    for k in 0..np_sv {
        a[(svl + k, k)] = -1.0;
        b[svl + k] = -svfl[k];
    }
    // Nonnegative block: λ ≥ 0 and tr(P) ≤ n+p.
    for k in 0..nm {
        a[(svl + np_sv + k, np_sv + k)] = -1.0;
    }
    {
        let mut k = 0;
        for j in 0..na {
            for i in 0..=j {
                if i == j {
                    a[(svl + np_sv + nm, k)] = 1.0;
                }
                k += 1;
            }
        }
        b[svl + np_sv + nm] = cap;
    }
    let mut q = vec![0.0; nvar];
    q[nvar - 1] = -1.0;
    let p_quad = CscMatrix::zeros((nvar, nvar));
    let a_csc = dense_to_csc(&a);
    let cones = [PSDTriangleConeT(nl), PSDTriangleConeT(na), NonnegativeConeT(nm + 1)];
    let settings = DefaultSettingsBuilder::default()
        .verbose(false)
        .tol_gap_abs(1e-11)
        .tol_gap_rel(1e-11)
        .tol_feas(1e-11)
        .max_iter(200)
        .build()
        .ok()?;
    let mut solver = DefaultSolver::new(&p_quad, &q, &a_csc, &b, &cones, settings).ok()?;
    solver.solve();
    match solver.solution.status {
        SolverStatus::Solved | SolverStatus::AlmostSolved => {
            let x = &solver.solution.x;
            let t = x[nvar - 1];
            let mut pm = DMatrix::<f64>::zeros(na, na);
            let mut k = 0;
            for j in 0..na {
                for i in 0..=j {
                    let v = if i == j { x[k] } else { x[k] / r2 };
                    pm[(i, j)] = v;
                    pm[(j, i)] = v;
                    k += 1;
                }
            }
            Some((t, pm, x[np_sv..np_sv + nm].to_vec()))
        }
        _ => None,
    }
}

/// Full search pipeline: scale, normalize, solve, map back, and re-verify
/// the raw-basis result (strict `λmax(LMI) < 0`, `λmin(P)` above its
/// relative floor, `λ ≥ 0`). Returns `(margin, P, λ)` in the raw basis.
pub(crate) fn find_certificate_f64(
    data: &SdpData,
    rho: f64,
) -> Option<(f64, DMatrix<f64>, Vec<f64>)> {
    let s = data.ah.nrows();
    let dx = &data.hint[..s];
    let du = data.hint[s];
    let q = data.cd.nrows();

    let mut ah_s = data.ah.clone();
    for i in 0..s {
        for j in 0..s {
            ah_s[(i, j)] = data.ah[(i, j)] * dx[j] / dx[i];
        }
    }
    let mut bh_s = data.bh.clone();
    for i in 0..s {
        bh_s[i] = data.bh[i] * du / dx[i];
    }
    let mut cd_s = data.cd.clone();
    for r in 0..q {
        for j in 0..s {
            cd_s[(r, j)] = data.cd[(r, j)] * dx[j];
        }
        cd_s[(r, s)] = data.cd[(r, s)] * du;
    }
    let fros: Vec<f64> = data
        .ms
        .iter()
        .map(|m_i| (cd_s.transpose() * m_i * &cd_s).norm())
        .collect();
    if fros.iter().any(|&f| !(f > 0.0) || !f.is_finite()) {
        return None;
    }
    let ms_s: Vec<DMatrix<f64>> =
        data.ms.iter().zip(&fros).map(|(m_i, f)| m_i / *f).collect();
    let floor: Vec<f64> = dx.iter().map(|d| P_FLOOR_RAW * d * d).collect();

    let (t, p_s, lam_s) = max_margin(&ah_s, &bh_s, &cd_s, &ms_s, rho, &floor)?;
    if t < MARGIN_MIN {
        return None;
    }
    let mut p_raw = DMatrix::<f64>::zeros(s, s);
    for i in 0..s {
        for j in 0..s {
            p_raw[(i, j)] = p_s[(i, j)] / (dx[i] * dx[j]);
        }
    }
    let lam_raw: Vec<f64> = lam_s.iter().zip(&fros).map(|(l, f)| l / f).collect();

    let lmi = lmi_eval_f64(&data.ah, &data.bh, &data.cd, &data.ms, &p_raw, &lam_raw, rho);
    let ev_lmi = sym_eigs(&lmi);
    let ev_p = sym_eigs(&p_raw);
    let lmax = *ev_lmi.last()?;
    let pmin = *ev_p.first()?;
    let trp = p_raw.trace();
    let ok = lmax < 0.0
        && pmin >= P_FLOOR_RAW * trp / s as f64
        && lam_raw.iter().all(|&x| x >= 0.0);
    if !ok {
        return None;
    }
    Some((-lmax, p_raw, lam_raw))
}

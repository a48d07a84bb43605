//! Seeded property suites for the projection identities that back the
//! projected-contraction argument, plus the slope-restriction sampler for
//! gradient maps. Each suite draws randomized instances per set kind,
//! counts violations at the stated tolerances, and carries a serialized
//! witness for the worst case.
//!
//! The block-transformed non-expansiveness suite ([`lemma6_suite`])
//! documents a genuine failure mode: a general invertible block-upper-
//! triangular transform does **not** make `𝐓·Π_𝒟(𝐓⁻¹·)` non-expansive in
//! the Euclidean norm (see the frozen counterexample in the tests). The
//! suite reports those violations honestly rather than hiding them.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::linalg;
use crate::problems::{slope_restriction_check, QuadraticObjective};
use crate::scalar::{c, to_f64, Scalar};
use crate::sets::{project_block, transformed_project, ConvexSet};

/// Outcome of one property suite.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport<T: Scalar> {
    /// Suite label.
    pub name: String,
    /// Number of randomized cases executed.
    pub cases: usize,
    /// Number of cases violating the property at its tolerance.
    pub violations: usize,
    /// Worst observed slack (positive means a violation by that amount;
    /// values at or below zero mean the property held with room to spare).
    pub worst_slack: T,
    /// Serialized description of the worst case, when any violation
    /// occurred.
    pub witness: Option<String>,
}

impl<T: Scalar> SuiteReport<T> {
    /// True when no case violated the property.
    pub fn pass(&self) -> bool {
        self.violations == 0
    }
}

#[derive(Clone, Copy, Debug)]
enum SetKind {
    WholeSpace,
    Ball,
    Box,
    Halfspace,
    Hyperplane,
}

const KINDS: [SetKind; 5] = [
    SetKind::WholeSpace,
    SetKind::Ball,
    SetKind::Box,
    SetKind::Halfspace,
    SetKind::Hyperplane,
];

fn kind_name(kind: SetKind) -> &'static str {
    match kind {
        SetKind::WholeSpace => "whole-space",
        SetKind::Ball => "ball",
        SetKind::Box => "box",
        SetKind::Halfspace => "halfspace",
        SetKind::Hyperplane => "hyperplane",
    }
}

fn randn<T: Scalar>(rng: &mut ChaCha8Rng) -> T {
    c::<T>(rng.sample::<f64, _>(StandardNormal))
}

fn randn_vec<T: Scalar>(d: usize, scale: f64, rng: &mut ChaCha8Rng) -> DVector<T> {
    DVector::from_fn(d, |_, _| randn::<T>(rng) * c::<T>(scale))
}

fn sample_set<T: Scalar>(kind: SetKind, d: usize, rng: &mut ChaCha8Rng) -> Result<ConvexSet<T>> {
    match kind {
        SetKind::WholeSpace => Ok(ConvexSet::whole_space(d)),
        SetKind::Ball => {
            let center = randn_vec::<T>(d, 1.0, rng);
            let radius = c::<T>(rng.gen_range(0.3..3.0));
            ConvexSet::ball(center, radius)
        }
        SetKind::Box => {
            let mut lo = DVector::zeros(d);
            let mut hi = DVector::zeros(d);
            for i in 0..d {
                let a: f64 = rng.sample::<f64, _>(StandardNormal);
                let w: f64 = rng.gen_range(0.2..2.5);
                lo[i] = c::<T>(a - w);
                hi[i] = c::<T>(a + w);
                // Occasionally unbounded on one side.
                if rng.gen_bool(0.15) {
                    lo[i] = c::<T>(f64::NEG_INFINITY);
                }
                if rng.gen_bool(0.15) {
                    hi[i] = c::<T>(f64::INFINITY);
                }
            }
            ConvexSet::box_set(lo, hi)
        }
        SetKind::Halfspace => {
            let a = nonzero_vec::<T>(d, rng);
            ConvexSet::halfspace(a, randn::<T>(rng))
        }
        SetKind::Hyperplane => {
            let a = nonzero_vec::<T>(d, rng);
            ConvexSet::hyperplane(a, randn::<T>(rng))
        }
    }
}

fn nonzero_vec<T: Scalar>(d: usize, rng: &mut ChaCha8Rng) -> DVector<T> {
    loop {
        let a = randn_vec::<T>(d, 1.0, rng);
        if to_f64(a.norm()) > 0.1 {
            return a;
        }
    }
}

/// A random invertible matrix with singular values bounded away from zero
/// (so the inner weighted solves stay well-conditioned).
fn well_conditioned<T: Scalar>(d: usize, rng: &mut ChaCha8Rng) -> DMatrix<T> {
    loop {
        let g = DMatrix::from_fn(d, d, |_, _| randn::<T>(rng));
        let svals = g.clone().singular_values();
        let smin = svals.iter().copied().fold(c::<T>(f64::INFINITY), |a, b| a.min(b));
        let smax = svals.iter().copied().fold(T::zero(), |a, b| a.max(b));
        if to_f64(smin) > 0.1 * to_f64(smax) && to_f64(smin) > 1e-3 {
            return g;
        }
    }
}

fn orthogonal<T: Scalar>(d: usize, rng: &mut ChaCha8Rng) -> DMatrix<T> {
    let g = DMatrix::from_fn(d, d, |_, _| randn::<T>(rng));
    g.qr().q()
}

struct Tally<T: Scalar> {
    cases: usize,
    violations: usize,
    worst_slack: T,
    witness: Option<String>,
}

impl<T: Scalar> Tally<T> {
    fn new() -> Self {
        Tally {
            cases: 0,
            violations: 0,
            worst_slack: c::<T>(f64::NEG_INFINITY),
            witness: None,
        }
    }

    /// Records one case with signed slack (positive = violation) and a
    /// lazily-built witness description.
    fn record(&mut self, slack: T, describe: impl FnOnce() -> String) {
        self.cases += 1;
        let violated = slack > T::zero();
        if violated {
            self.violations += 1;
        }
        if slack > self.worst_slack {
            self.worst_slack = slack;
            if violated {
                self.witness = Some(describe());
            }
        }
    }

    fn into_report(self, name: &str) -> SuiteReport<T> {
        SuiteReport {
            name: name.to_string(),
            cases: self.cases,
            violations: self.violations,
            worst_slack: self.worst_slack,
            witness: if self.violations > 0 { self.witness } else { None },
        }
    }
}

/// Transformed-projection / weighted-projection equivalence: for random
/// invertible `T`, `T·Π_Ω(T⁻¹x)` agrees with the `(TTᵀ)⁻¹`-weighted
/// projection of `x` onto `TΩ` to `1e-6`, per set kind.
pub fn lemma2_suite<T: Scalar>(seed: u64, count: usize) -> Result<SuiteReport<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tally = Tally::new();
    let tol = c::<T>(1e-6);
    for &kind in &KINDS {
        for trial in 0..count {
            let d = [1, 2, 3][trial % 3];
            let set = sample_set::<T>(kind, d, &mut rng)?;
            let t = well_conditioned::<T>(d, &mut rng);
            let scale = [0.5, 2.0, 5.0][(trial / 3) % 3];
            let x = randn_vec::<T>(d, scale, &mut rng);
            let left = transformed_project(&t, &set, &x)?;
            let t_inv = linalg::try_inverse(&t, "lemma-2 transform")?;
            let v_mat = linalg::symmetrize(&(t_inv.transpose() * &t_inv));
            let image = ConvexSet::transformed(set.clone(), t.clone(), DVector::zeros(d))?;
            let right = image.project_weighted(&v_mat, &x)?;
            let gap = (left - right).norm();
            tally.record(gap - tol, || {
                format!(
                    "kind={} d={d} trial={trial} seed={seed} gap={}",
                    kind_name(kind),
                    to_f64(gap)
                )
            });
        }
    }
    Ok(tally.into_report("transformed-vs-weighted projection equivalence"))
}

/// Orthogonal-transform non-expansiveness: for random orthogonal `T`, the
/// map `T·Π_Ω(T⁻¹·)` is `1`-Lipschitz in the Euclidean norm.
pub fn lemma3_suite<T: Scalar>(seed: u64, count: usize) -> Result<SuiteReport<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tally = Tally::new();
    let tol = c::<T>(1e-9);
    for &kind in &KINDS {
        for trial in 0..count {
            let d = [1, 2, 3, 5][trial % 4];
            let set = sample_set::<T>(kind, d, &mut rng)?;
            let q = orthogonal::<T>(d, &mut rng);
            let scale = [0.5, 1.0, 3.0][trial % 3];
            let x = randn_vec::<T>(d, scale, &mut rng);
            let y = randn_vec::<T>(d, scale, &mut rng);
            let dist = (&x - &y).norm();
            if to_f64(dist) < 1e-12 {
                continue;
            }
            let fx = transformed_project(&q, &set, &x)?;
            let fy = transformed_project(&q, &set, &y)?;
            let ratio = (fx - fy).norm() / dist;
            tally.record(ratio - (T::one() + tol), || {
                format!(
                    "kind={} d={d} trial={trial} seed={seed} ratio={}",
                    kind_name(kind),
                    to_f64(ratio)
                )
            });
        }
    }
    Ok(tally.into_report("orthogonal-transform non-expansiveness"))
}

/// Uniform-scaling invariance: for `T = τI` (τ ≠ 0), the transformed
/// projection equals the direct Euclidean projection onto the scaled set,
/// and scaling commutes with projection, both to `1e-9` (relative).
pub fn lemma4_suite<T: Scalar>(seed: u64, count: usize) -> Result<SuiteReport<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tally = Tally::new();
    for &kind in &KINDS {
        for trial in 0..count {
            let d = [1, 2, 3][trial % 3];
            let set = sample_set::<T>(kind, d, &mut rng)?;
            let tau = loop {
                let t: f64 = rng.sample::<f64, _>(StandardNormal) * 2.0;
                if t.abs() > 0.05 {
                    break c::<T>(t);
                }
            };
            let x = randn_vec::<T>(d, 2.0, &mut rng);
            let t_mat = DMatrix::from_diagonal_element(d, d, tau);
            let scaled = ConvexSet::transformed(set.clone(), t_mat.clone(), DVector::zeros(d))?;

            let via_transform = transformed_project(&t_mat, &set, &x)?;
            let via_set = scaled.project(&x)?;
            let gap_a = (&via_transform - &via_set).norm();
            let tol_a = c::<T>(1e-9) * (T::one() + via_set.norm());

            let commuted = scaled.project(&(&x * tau))?;
            let direct = set.project(&x)? * tau;
            let gap_b = (&commuted - &direct).norm();
            let tol_b = c::<T>(1e-9) * (T::one() + direct.norm());

            let slack = (gap_a - tol_a).max(gap_b - tol_b);
            tally.record(slack, || {
                format!(
                    "kind={} d={d} trial={trial} seed={seed} tau={} gaps=({}, {})",
                    kind_name(kind),
                    to_f64(tau),
                    to_f64(gap_a),
                    to_f64(gap_b)
                )
            });
        }
    }
    Ok(tally.into_report("uniform-scaling invariance"))
}

/// Translation equivariance: `Π_Ω(x) + v = Π_{Ω+v}(x + v)` to `1e-12`
/// (relative).
pub fn lemma5_suite<T: Scalar>(seed: u64, count: usize) -> Result<SuiteReport<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tally = Tally::new();
    for &kind in &KINDS {
        for trial in 0..count {
            let d = [1, 2, 3, 5][trial % 4];
            let set = sample_set::<T>(kind, d, &mut rng)?;
            let v = randn_vec::<T>(d, 2.0, &mut rng);
            let x = randn_vec::<T>(d, 2.0, &mut rng);
            let shifted =
                ConvexSet::transformed(set.clone(), DMatrix::identity(d, d), v.clone())?;
            let left = set.project(&x)? + &v;
            let right = shifted.project(&(&x + &v))?;
            let gap = (&left - &right).norm();
            let tol = c::<T>(1e-12) * (T::one() + left.norm() + v.norm());
            tally.record(gap - tol, || {
                format!(
                    "kind={} d={d} trial={trial} seed={seed} gap={}",
                    kind_name(kind),
                    to_f64(gap)
                )
            });
        }
    }
    Ok(tally.into_report("translation equivariance"))
}

/// Block-transformed non-expansiveness and idempotence of
/// `F = 𝐓·Π_𝒟(𝐓⁻¹·)` with `𝐓 = T_red ⊗ I_d` (`T_red` a random Cholesky
/// factor, so block-upper-triangular with `T_red[0,0] > 0`) and
/// `𝒟 = Ω × ℝ^{(k−1)d}`.
///
/// Idempotence always holds (`Π_𝒟` is idempotent and the transforms
/// cancel). Non-expansiveness in the plain Euclidean norm **fails** for
/// generic `T_red` — only the `P`-weighted norm carried by a certificate
/// makes the composition contractive — and this suite measures that
/// failure rather than asserting it away.
pub fn lemma6_suite<T: Scalar>(seed: u64, count: usize) -> Result<SuiteReport<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tally = Tally::new();
    let tol = c::<T>(1e-9);
    // 20 transforms × 3 block sizes per kind; trials per cell sized so each
    // kind sees at least `count` cases.
    let cells = 20 * 3;
    let trials_per_cell = count.div_ceil(cells).max(1);
    for &kind in &KINDS {
        for t_idx in 0..20 {
            let k = rng.gen_range(2..5);
            let g = DMatrix::from_fn(k, k, |_, _| randn::<T>(&mut rng));
            let p = linalg::symmetrize(&(&g * g.transpose()))
                + DMatrix::identity(k, k) * c::<T>(0.1);
            let t_red = linalg::cholesky_upper(&p)?;
            let t_red_inv = linalg::try_inverse(&t_red, "block transform")?;
            for &d in &[1usize, 2, 5] {
                let set = sample_set::<T>(kind, d, &mut rng)?;
                for trial in 0..trials_per_cell {
                    let sigma = [0.5, 1.0, 3.0][trial % 3];
                    let x = randn_vec::<T>(k * d, sigma, &mut rng);
                    let y = randn_vec::<T>(k * d, sigma, &mut rng);
                    let apply = |z: &DVector<T>| -> Result<DVector<T>> {
                        let back = linalg::kron_apply(&t_red_inv, z, d)?;
                        let proj = project_block(&set, &back, k, d)?;
                        linalg::kron_apply(&t_red, &proj, d)
                    };
                    let fx = apply(&x)?;
                    let fy = apply(&y)?;
                    let dist = (&x - &y).norm();
                    if to_f64(dist) < 1e-12 {
                        continue;
                    }
                    let ratio = (&fx - &fy).norm() / dist;
                    let slack_ratio = ratio - (T::one() + tol);

                    let ffx = apply(&fx)?;
                    let idem_gap = (&ffx - &fx).norm();
                    let slack_idem = idem_gap - tol * (T::one() + fx.norm());

                    tally.record(slack_ratio.max(slack_idem), || {
                        format!(
                            "kind={} t_idx={t_idx} k={k} d={d} trial={trial} seed={seed} \
                             ratio={} idem_gap={}",
                            kind_name(kind),
                            to_f64(ratio),
                            to_f64(idem_gap)
                        )
                    });
                }
            }
        }
    }
    Ok(tally.into_report("block-transformed non-expansiveness"))
}

/// Slope restriction of random quadratic gradients: for random instances
/// in the sector `[m, L]`, sampled difference pairs satisfy
/// `(Δg − mΔy)ᵀ(Δg − LΔy) ≤ 0`.
pub fn slope_restriction_suite<T: Scalar>(seed: u64, count: usize) -> Result<SuiteReport<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tally = Tally::new();
    for trial in 0..count {
        let d = [1usize, 2, 5][trial % 3];
        let m = c::<T>(10f64.powf(rng.gen_range(-1.0..0.5)));
        let kappa = 10f64.powf(rng.gen_range(0.0..3.0));
        let l = if d == 1 { m } else { m * c::<T>(kappa.max(1.0)) };
        let obj = QuadraticObjective::random(d, m, l, &mut rng)?;
        let report = slope_restriction_check(&obj, 40, seed ^ (trial as u64))?;
        let slack = match &report.witness {
            Some((_, _, excess)) => *excess,
            None => c::<T>(-1.0),
        };
        tally.record(slack, || {
            format!("trial={trial} d={d} seed={seed} excess={}", to_f64(slack))
        });
    }
    Ok(tally.into_report("gradient slope restriction"))
}

/// Runs every suite with the same seed and per-kind case count, in a fixed
/// order.
pub fn run_all<T: Scalar>(seed: u64, count: usize) -> Result<Vec<SuiteReport<T>>> {
    Ok(vec![
        lemma2_suite::<T>(seed, count)?,
        lemma3_suite::<T>(seed, count)?,
        lemma4_suite::<T>(seed, count)?,
        lemma5_suite::<T>(seed, count)?,
        lemma6_suite::<T>(seed, count)?,
        slope_restriction_suite::<T>(seed, count)?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equivalence_suite_passes() {
        let rep = lemma2_suite::<f64>(11, 60).unwrap();
        assert!(rep.pass(), "violations: {} ({:?})", rep.violations, rep.witness);
        assert_eq!(rep.cases, 60 * KINDS.len());
    }

    #[test]
    fn orthogonal_suite_passes() {
        let rep = lemma3_suite::<f64>(12, 250).unwrap();
        assert!(rep.pass(), "violations: {} ({:?})", rep.violations, rep.witness);
        assert!(rep.worst_slack <= 0.0);
    }

    #[test]
    fn scaling_suite_passes() {
        let rep = lemma4_suite::<f64>(13, 120).unwrap();
        assert!(rep.pass(), "violations: {} ({:?})", rep.violations, rep.witness);
    }

    #[test]
    fn translation_suite_passes() {
        let rep = lemma5_suite::<f64>(14, 250).unwrap();
        assert!(rep.pass(), "violations: {} ({:?})", rep.violations, rep.witness);
    }

    #[test]
    fn block_transform_suite_reports_expansion() {
        // General block transforms are NOT non-expansive in the Euclidean
        // norm; the suite must detect that with a witness.
        let rep = lemma6_suite::<f64>(15, 120).unwrap();
        assert!(!rep.pass(), "expected violations, got a clean pass");
        assert!(rep.worst_slack > 1e-6, "worst slack {}", rep.worst_slack);
        let witness = rep.witness.expect("worst case must carry a witness");
        assert!(witness.contains("ratio="));
    }

    #[test]
    fn block_transform_expansion_counterexample_frozen() {
        // T_red = [[1, 2], [0, 1]], Ω = (−∞, 0] ⊂ ℝ¹: the two points
        // (2, 0.9) and (2, 1.1) expand by exactly √2 under T·Π(T⁻¹·).
        let t = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        let t_inv = DMatrix::from_row_slice(2, 2, &[1.0, -2.0, 0.0, 1.0]);
        let set = ConvexSet::box_set(
            DVector::from_vec(vec![f64::NEG_INFINITY]),
            DVector::from_vec(vec![0.0]),
        )
        .unwrap();
        let apply = |z: &DVector<f64>| {
            let back = linalg::kron_apply(&t_inv, z, 1).unwrap();
            let proj = project_block(&set, &back, 2, 1).unwrap();
            linalg::kron_apply(&t, &proj, 1).unwrap()
        };
        let x = DVector::from_vec(vec![2.0, 0.9]);
        let y = DVector::from_vec(vec![2.0, 1.1]);
        let ratio = (apply(&x) - apply(&y)).norm() / (&x - &y).norm();
        assert!((ratio - 2.0f64.sqrt()).abs() <= 1e-12, "ratio {ratio}");
        // Idempotence still holds on the same instance.
        let fx = apply(&x);
        assert!((apply(&fx) - &fx).norm() <= 1e-12);
    }

    #[test]
    fn slope_suite_passes() {
        let rep = slope_restriction_suite::<f64>(16, 150).unwrap();
        assert!(rep.pass(), "violations: {} ({:?})", rep.violations, rep.witness);
    }

    #[test]
    fn suites_are_deterministic() {
        let a = lemma6_suite::<f64>(99, 60).unwrap();
        let b = lemma6_suite::<f64>(99, 60).unwrap();
        assert_eq!(a.cases, b.cases);
        assert_eq!(a.violations, b.violations);
        assert_eq!(a.worst_slack, b.worst_slack);
        assert_eq!(a.witness, b.witness);
    }

    #[test]
    fn run_all_returns_every_suite() {
        let reports = run_all::<f64>(7, 30).unwrap();
        assert_eq!(reports.len(), 6);
        let names: Vec<&str> = reports.iter().map(|r| r.name.as_str()).collect();
        assert!(names.contains(&"translation equivariance"));
        assert!(names.contains(&"block-transformed non-expansiveness"));
        // Exactly one suite (the block-transform one) reports violations.
        let failing: Vec<&str> = reports
            .iter()
            .filter(|r| !r.pass())
            .map(|r| r.name.as_str())
            .collect();
        assert_eq!(failing, vec!["block-transformed non-expansiveness"]);
    }
}

//! Partial-correlation conditional independence test with one-hot context
//! regressors.
//!
//! The single-column case is the classical residual partial correlation with
//! a two-sided Student-t p-value. Context dummies span several columns, so
//! testing them uses the partial F-test on the residualized block; at one
//! retained column it coincides with the t-test exactly (F = t^2).

use crate::causal::{PooledPanel, VarLag};
use crate::error::{Error, Result};
use crate::linalg::residualize;
use crate::scalar::{to_f64, Scalar};
use crate::vars::VariableKind;
use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use statrs::distribution::{ContinuousCDF, FisherSnedecor, StudentsT};

/// Outcome of one conditional independence test.
#[derive(Debug, Clone, Copy)]
pub struct CiOutcome {
    /// Signed t statistic (single x) or sqrt(q * F) (context block).
    pub statistic: f64,
    pub p_value: f64,
    /// Partial correlation; multiple correlation (nonnegative) for blocks.
    pub strength: f64,
    pub n_eff: usize,
    /// Conditioning columns dropped as collinear, if any.
    pub dropped_conditions: usize,
}

fn dot_f64<S: Scalar>(a: ArrayView1<'_, S>, b: ArrayView1<'_, S>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| to_f64(*x) * to_f64(*y)).sum()
}

fn student_t_two_sided(t_abs: f64, df: f64) -> f64 {
    let dist = StudentsT::new(0.0, 1.0, df).expect("valid dof");
    (2.0 * dist.sf(t_abs)).clamp(0.0, 1.0)
}

/// Residual partial correlation test of a single `x` against `y` given `z`.
///
/// Both `x` and `y` are regressed on `z` plus an intercept; the Pearson
/// correlation `r` of the residuals yields
/// `t = r * sqrt((n - |z| - 2) / (1 - r^2))` with `n - |z| - 2` degrees of
/// freedom, `|z|` counting retained conditioning columns.
pub fn partial_correlation<S: Scalar>(
    x: ArrayView1<'_, S>,
    y: ArrayView1<'_, S>,
    z: ArrayView2<'_, S>,
) -> Result<CiOutcome> {
    let n = y.len();
    if x.len() != n || z.nrows() != n {
        return Err(Error::Domain("ci test inputs differ in length".into()));
    }
    if n <= z.ncols() + 3 {
        return Err(Error::InsufficientSamples { needed: z.ncols() + 3, have: n });
    }
    let mut targets = Array2::<S>::zeros((n, 2));
    targets.column_mut(0).assign(&y);
    targets.column_mut(1).assign(&x);
    let fit = residualize(&z.to_owned(), &targets)?;
    let z_kept = fit.kept.len();
    let dropped = fit.dropped.len();

    let ry = fit.residuals.column(0);
    let rx = fit.residuals.column(1);
    let sxx = dot_f64(rx, rx);
    let syy = dot_f64(ry, ry);
    let sxy = dot_f64(rx, ry);

    let df = n as f64 - z_kept as f64 - 2.0;
    if df < 1.0 {
        return Err(Error::InsufficientSamples { needed: z_kept + 3, have: n });
    }
    if sxx <= 0.0 || syy <= 0.0 {
        // A residualized constant carries no testable association.
        return Ok(CiOutcome {
            statistic: 0.0,
            p_value: 1.0,
            strength: 0.0,
            n_eff: n,
            dropped_conditions: dropped,
        });
    }
    let r = (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0);
    let denom = 1.0 - r * r;
    let (statistic, p_value) = if denom <= f64::EPSILON {
        (r.signum() * f64::MAX.sqrt(), 0.0)
    } else {
        let t = r * (df / denom).sqrt();
        (t, student_t_two_sided(t.abs(), df))
    };
    Ok(CiOutcome { statistic, p_value, strength: r, n_eff: n, dropped_conditions: dropped })
}

/// Partial F-test of a multi-column block `xs` against `y` given `z`.
pub fn block_independence<S: Scalar>(
    xs: ArrayView2<'_, S>,
    y: ArrayView1<'_, S>,
    z: ArrayView2<'_, S>,
) -> Result<CiOutcome> {
    let n = y.len();
    if xs.nrows() != n || z.nrows() != n {
        return Err(Error::Domain("ci test inputs differ in length".into()));
    }
    if n <= z.ncols() + xs.ncols() + 3 {
        return Err(Error::InsufficientSamples { needed: z.ncols() + xs.ncols() + 3, have: n });
    }

    // Residualize y and the whole block on [1 | z] in one pass.
    let mut targets = Array2::<S>::zeros((n, 1 + xs.ncols()));
    targets.column_mut(0).assign(&y);
    for (j, col) in xs.axis_iter(Axis(1)).enumerate() {
        targets.column_mut(1 + j).assign(&col);
    }
    let fit = residualize(&z.to_owned(), &targets)?;
    let z_kept = fit.kept.len();
    let dropped = fit.dropped.len();
    let ry = fit.residuals.column(0).to_owned();
    let rx = fit.residuals.slice(ndarray::s![.., 1..]).to_owned();

    let tss = dot_f64(ry.view(), ry.view());
    if tss <= 0.0 {
        return Ok(CiOutcome {
            statistic: 0.0,
            p_value: 1.0,
            strength: 0.0,
            n_eff: n,
            dropped_conditions: dropped,
        });
    }

    let ry2 = ry.clone().insert_axis(Axis(1));
    let fit2 = residualize(&rx, &ry2)?;
    let q = fit2.kept.len();
    if q == 0 {
        return Ok(CiOutcome {
            statistic: 0.0,
            p_value: 1.0,
            strength: 0.0,
            n_eff: n,
            dropped_conditions: dropped,
        });
    }
    let res = fit2.residuals.column(0);
    let rss = dot_f64(res, res);
    let r2 = (1.0 - rss / tss).clamp(0.0, 1.0);

    let df2 = n as f64 - z_kept as f64 - q as f64 - 1.0;
    if df2 < 1.0 {
        return Err(Error::InsufficientSamples { needed: z_kept + q + 2, have: n });
    }
    let denom = 1.0 - r2;
    let (statistic, p_value) = if denom <= f64::EPSILON {
        (f64::MAX.sqrt(), 0.0)
    } else {
        let f = (r2 / q as f64) / (denom / df2);
        let dist = FisherSnedecor::new(q as f64, df2).expect("valid dof");
        ((f * q as f64).sqrt(), dist.sf(f).clamp(0.0, 1.0))
    };
    Ok(CiOutcome {
        statistic,
        p_value,
        strength: r2.sqrt(),
        n_eff: n,
        dropped_conditions: dropped,
    })
}

/// Panel-level conditional independence test of `x` against `y` given `z`.
///
/// Lagged sample rows never straddle lake boundaries; the sample margin is
/// `max(tau_max, referenced lags)` so every test sees a consistent window.
/// Lake/region one-hots are constant within a lake, so their lag is
/// normalized to zero; the seasonal block is evaluated at the lagged day.
pub fn ci_test<S: Scalar>(
    panel: &PooledPanel<S>,
    x: VarLag,
    y: VarLag,
    z: &[VarLag],
) -> Result<CiOutcome> {
    if y.var.kind() == VariableKind::Context {
        return Err(Error::Invalid(format!("context variable {} cannot be an effect", y.var)));
    }
    if x.var.kind() == VariableKind::Context && x.lag != 0 {
        return Err(Error::Invalid("context variables are tested at lag 0 only".into()));
    }
    let tau_max = panel.tau_max();
    if x.lag > tau_max || y.lag > tau_max {
        return Err(Error::Invalid(format!("tested lags must not exceed tau_max {tau_max}")));
    }
    for item in z {
        if item.lag > 2 * tau_max {
            return Err(Error::Invalid(format!(
                "conditioning lag {} exceeds 2 * tau_max",
                item.lag
            )));
        }
    }
    let margin = z
        .iter()
        .map(|v| v.lag)
        .chain([x.lag, y.lag, tau_max])
        .max()
        .unwrap();

    let (zm, _) = panel.gather(z, margin)?;
    let (ym, _) = panel.gather(&[y], margin)?;
    let (xm, _) = panel.gather(&[x], margin)?;

    let n = ym.nrows();
    if n <= zm.ncols() + 3 {
        return Err(Error::InsufficientSamples { needed: zm.ncols() + 3, have: n });
    }
    if xm.ncols() == 1 {
        partial_correlation(xm.column(0), ym.column(0), zm.view())
    } else {
        block_independence(xm.view(), ym.column(0), zm.view())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array1;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn normals(rng: &mut ChaCha8Rng, n: usize) -> Array1<f64> {
        Array1::from_iter((0..n).map(|_| rng.sample::<f64, _>(StandardNormal)))
    }

    #[test]
    fn perfect_dependence_detected() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 500;
        let x = normals(&mut rng, n);
        let noise = normals(&mut rng, n);
        let y = &x + &(noise * 0.1);
        let z = Array2::<f64>::zeros((n, 0));
        let out = partial_correlation(x.view(), y.view(), z.view()).unwrap();
        assert!(out.p_value < 1e-6, "p = {}", out.p_value);
        assert!(out.strength > 0.9);
    }

    #[test]
    fn independent_inputs_not_rejected_typically() {
        // Smoke-level calibration; the acceptance suite runs the full
        // 1000-trial Monte Carlo check.
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 200;
        let trials = 200;
        let mut rejections = 0;
        for _ in 0..trials {
            let x = normals(&mut rng, n);
            let y = normals(&mut rng, n);
            let z = Array2::<f64>::zeros((n, 0));
            let out = partial_correlation(x.view(), y.view(), z.view()).unwrap();
            if out.p_value <= 0.05 {
                rejections += 1;
            }
        }
        let rate = rejections as f64 / trials as f64;
        assert!(rate < 0.12, "rejection rate {rate}");
    }

    #[test]
    fn chain_is_screened_off() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 1000;
        let x = normals(&mut rng, n);
        let z = &x * 0.9 + &(normals(&mut rng, n) * 0.3);
        let y = &z * 0.9 + &(normals(&mut rng, n) * 0.3);
        let zm = z.clone().insert_axis(ndarray::Axis(1));
        let out = partial_correlation(x.view(), y.view(), zm.view()).unwrap();
        assert!(out.p_value > 1e-4, "conditional p = {}", out.p_value);
        let none = Array2::<f64>::zeros((n, 0));
        let raw = partial_correlation(x.view(), y.view(), none.view()).unwrap();
        assert!(raw.p_value < 1e-10, "marginal p = {}", raw.p_value);
    }

    #[test]
    fn swap_symmetry_is_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 300;
        let x = normals(&mut rng, n);
        let y = &x * 0.4 + &normals(&mut rng, n);
        let z = Array2::from_shape_fn((n, 2), |_| rng.sample::<f64, _>(StandardNormal));
        let a = partial_correlation(x.view(), y.view(), z.view()).unwrap();
        let b = partial_correlation(y.view(), x.view(), z.view()).unwrap();
        assert_eq!(a.p_value.to_bits(), b.p_value.to_bits());
        assert_eq!(a.strength.to_bits(), b.strength.to_bits());
    }

    #[test]
    fn affine_rescaling_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 400;
        let x = normals(&mut rng, n);
        let zc = normals(&mut rng, n);
        let y = &x * 0.3 + &zc * 0.5 + &normals(&mut rng, n);
        let z = zc.clone().insert_axis(ndarray::Axis(1));
        let base = partial_correlation(x.view(), y.view(), z.view()).unwrap();

        let x2 = &x * 37.5 + 4.0;
        let y2 = &y * -0.002 + 100.0;
        let z2 = z.mapv(|v| v * 55.0 - 3.0);
        let scaled = partial_correlation(x2.view(), y2.view(), z2.view()).unwrap();
        assert!((base.p_value - scaled.p_value).abs() < 1e-10);
        assert!((base.strength.abs() - scaled.strength.abs()).abs() < 1e-10);
    }

    #[test]
    fn insufficient_samples_rejected() {
        let x = Array1::<f64>::zeros(5);
        let y = Array1::<f64>::zeros(5);
        let z = Array2::<f64>::zeros((5, 3));
        assert!(matches!(
            partial_correlation(x.view(), y.view(), z.view()),
            Err(Error::InsufficientSamples { .. })
        ));
    }

    #[test]
    fn block_test_matches_t_test_at_one_column() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let n = 250;
        let x = normals(&mut rng, n);
        let y = &x * 0.25 + &normals(&mut rng, n);
        let z = Array2::<f64>::zeros((n, 0));
        let single = partial_correlation(x.view(), y.view(), z.view()).unwrap();
        let xs = x.clone().insert_axis(ndarray::Axis(1));
        let block = block_independence(xs.view(), y.view(), z.view()).unwrap();
        assert!((single.p_value - block.p_value).abs() < 1e-10);
        assert!((single.statistic.abs() - block.statistic).abs() < 1e-8);
    }
}

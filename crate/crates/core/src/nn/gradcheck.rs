use crate::nn::{ParamStore, Real};
use crate::{Error, Result};

/// Largest relative error found in one tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorCheck {
    pub name: String,
    pub max_rel_err: f64,
    /// Flat index of the worst element.
    pub worst: usize,
}

/// `|a − n| / max(|a|, |n|, 1e−8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Compare the analytic gradients held in `params` against central differences.
///
/// `loss_fn` must be deterministic; it is evaluated twice at the unperturbed
/// point and the check fails if the results differ.
pub fn finite_diff_check<T, F>(
    mut loss_fn: F,
    params: &mut ParamStore<T>,
    epsilon: T,
) -> Result<Vec<TensorCheck>>
where
    T: Real,
    F: FnMut(&ParamStore<T>) -> T,
{
    if !(epsilon > T::zero()) {
        return Err(Error::Invalid("epsilon must be positive".into()));
    }
    let a = loss_fn(params);
    let b = loss_fn(params);
    if a != b {
        return Err(Error::Invalid(format!(
            "loss function is not deterministic ({a} vs {b})"
        )));
    }
    let two_eps = (epsilon + epsilon).f64();
    compare_elementwise(params, |params, id, i| {
        let orig = params.param(id).value.data()[i];
        params.param_mut(id).value.data_mut()[i] = orig + epsilon;
        let up = loss_fn(params).f64();
        params.param_mut(id).value.data_mut()[i] = orig - epsilon;
        let down = loss_fn(params).f64();
        params.param_mut(id).value.data_mut()[i] = orig;
        (up - down) / two_eps
    })
}

/// Like [`finite_diff_check`], but each numeric derivative is Ridders'
/// polynomial extrapolation of central differences at steps `h0 / 1.4^k`
/// (restarted from `h0 / 10`, ..., `h0 / 10^4`).
///
/// A single central difference cannot resolve gradients much below
/// `ulp(loss) / 2ε`, and large steps cross activation kinks; the tableau
/// picks whichever step range is smooth and reports the extrapolated value.
pub fn ridders_diff_check<T, F>(mut loss_fn: F, params: &mut ParamStore<T>, h0: T) -> Result<Vec<TensorCheck>>
where
    T: Real,
    F: FnMut(&ParamStore<T>) -> T,
{
    if !(h0 > T::zero()) {
        return Err(Error::Invalid("epsilon must be positive".into()));
    }
    let a = loss_fn(params);
    if a != loss_fn(params) {
        return Err(Error::Invalid("loss function is not deterministic".into()));
    }
    compare_elementwise(params, |params, id, i| {
        let orig = params.param(id).value.data()[i];
        let mut central = |h: f64| {
            let h = T::of(h);
            params.param_mut(id).value.data_mut()[i] = orig + h;
            let up = loss_fn(params).f64();
            params.param_mut(id).value.data_mut()[i] = orig - h;
            let down = loss_fn(params).f64();
            params.param_mut(id).value.data_mut()[i] = orig;
            // the step actually taken, after rounding `orig ± h`
            let step = ((orig + h) - (orig - h)).f64();
            ((up - down) / step, T::epsilon().f64() * (up.abs() + down.abs()) / step)
        };
        // restart from smaller steps when a kink spoils the large ones; keep
        // the estimate the tableau itself trusts most
        let mut best = (0.0, f64::INFINITY);
        for start in (0..5).map(|k| h0.f64() / 10f64.powi(k)) {
            let r = ridders(&mut central, start);
            if r.1 < best.1 {
                best = r;
            }
            // already far inside any tolerance worth asking for
            if best.1 <= 1e-9 * best.0.abs().max(1e-8) {
                break;
            }
        }
        best.0
    })
}

/// Ridders' tableau from step `h`: `(estimate, error estimate)`.
///
/// `central(h)` returns the difference quotient and its rounding noise; no
/// error estimate is allowed below the noise of the steps it used, which
/// keeps chance agreement between noisy entries from looking exact.
fn ridders(central: &mut impl FnMut(f64) -> (f64, f64), mut h: f64) -> (f64, f64) {
    const CON: f64 = 1.4;
    const NTAB: usize = 10;
    const SAFE: f64 = 2.0;
    let mut tab = [[0.0f64; NTAB]; NTAB];
    tab[0][0] = central(h).0;
    let (mut best, mut err) = (tab[0][0], f64::INFINITY);
    for k in 1..NTAB {
        h /= CON;
        let noise;
        (tab[0][k], noise) = central(h);
        let mut fac = CON * CON;
        for j in 1..=k {
            tab[j][k] = (tab[j - 1][k] * fac - tab[j - 1][k - 1]) / (fac - 1.0);
            fac *= CON * CON;
            let e = (tab[j][k] - tab[j - 1][k])
                .abs()
                .max((tab[j][k] - tab[j - 1][k - 1]).abs())
                .max(noise);
            if e <= err {
                err = e;
                best = tab[j][k];
            }
        }
        if (tab[k][k] - tab[k - 1][k - 1]).abs() >= SAFE * err {
            break;
        }
    }
    (best, err)
}

fn compare_elementwise<T: Real>(
    params: &mut ParamStore<T>,
    mut numeric: impl FnMut(&mut ParamStore<T>, usize, usize) -> f64,
) -> Result<Vec<TensorCheck>> {
    let mut out = Vec::with_capacity(params.len());
    for id in 0..params.len() {
        let mut check = TensorCheck {
            name: params.param(id).name.clone(),
            max_rel_err: 0.0,
            worst: 0,
        };
        for i in 0..params.param(id).value.len() {
            let n = numeric(params, id, i);
            let err = relative_error(params.param(id).grad[i].f64(), n);
            if err > check.max_rel_err {
                check.max_rel_err = err;
                check.worst = i;
            }
        }
        out.push(check);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::TensorBuf;
    use std::cell::Cell;

    fn quadratic_store() -> ParamStore<f64> {
        let mut s = ParamStore::new();
        s.insert("a", TensorBuf::from_vec(&[3], vec![0.5, -1.25, 2.0]).unwrap())
            .unwrap();
        s.insert("b", TensorBuf::from_vec(&[2, 1], vec![3.0, -0.1]).unwrap())
            .unwrap();
        for id in 0..s.len() {
            let v = s.value(id).to_vec();
            s.param_mut(id).grad.copy_from_slice(&v);
        }
        s
    }

    fn half_sq(s: &ParamStore<f64>) -> f64 {
        s.iter().flat_map(|p| p.value.data()).map(|v| v * v / 2.0).sum()
    }

    #[test]
    fn quadratic_is_exact() {
        let mut s = quadratic_store();
        let report = finite_diff_check(half_sq, &mut s, 1e-4).unwrap();
        assert_eq!(report.len(), 2);
        for r in report {
            assert!(r.max_rel_err <= 1e-8, "{r:?}");
        }
    }

    #[test]
    fn ridders_resolves_what_a_single_step_cannot() {
        // f = 1 + 1e-9·sin(θ): the gradient sits near the relative-error floor
        let mut s = ParamStore::new();
        s.insert("t", TensorBuf::from_vec(&[1], vec![0.3]).unwrap()).unwrap();
        s.param_mut(0).grad[0] = 1e-9 * 0.3f64.cos();
        let f = |s: &ParamStore<f64>| 1.0 + 1e-9 * s.value(0)[0].sin();
        let plain = finite_diff_check(f, &mut s, 1e-6).unwrap();
        let ridders = ridders_diff_check(f, &mut s, 0.1).unwrap();
        assert!(plain[0].max_rel_err > 1e-3, "{plain:?}");
        assert!(ridders[0].max_rel_err < 1e-6, "{ridders:?}");
        assert!(ridders_diff_check(half_sq, &mut quadratic_store(), 1e-2).unwrap().iter().all(|r| r.max_rel_err < 1e-10));
    }

    #[test]
    fn zero_epsilon_rejected() {
        let mut s = quadratic_store();
        let err = finite_diff_check(half_sq, &mut s, 0.0).unwrap_err();
        assert!(err.to_string().contains("epsilon must be positive"));
    }

    #[test]
    fn nondeterministic_loss_rejected() {
        let mut s = quadratic_store();
        let calls = Cell::new(0.0);
        let flaky = |_: &ParamStore<f64>| {
            calls.set(calls.get() + 1.0);
            calls.get()
        };
        assert!(finite_diff_check(flaky, &mut s, 1e-4).is_err());
    }

    #[test]
    fn wrong_gradient_is_reported() {
        let mut s = quadratic_store();
        s.param_mut(1).grad[0] = 0.0;
        let report = finite_diff_check(half_sq, &mut s, 1e-4).unwrap();
        assert!(report[1].max_rel_err > 0.5);
        assert_eq!(report[1].worst, 0);
    }
}

//! Central-difference gradient checking.

use super::params::ParamStore;
use super::tape::{Tape, Var};
use crate::error::Result;

/// Denominator floor for relative error, so near-zero gradients are judged
/// on an absolute scale instead of blowing up the ratio.
pub const RELATIVE_FLOOR: f64 = 1e-6;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR)
}

#[derive(Debug, Clone, Default)]
pub struct GradReport {
    pub checked: usize,
    pub max_abs_error: f64,
    pub max_rel_error: f64,
    /// `name[index]` of the entry with the largest relative error.
    pub worst: Option<String>,
}

/// Finite-difference formula used for the numeric derivative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Stencil {
    /// `(f(x+h) - f(x-h)) / 2h`, truncation error O(h^2).
    #[default]
    Central,
    /// `(-f(x+2h) + 8f(x+h) - 8f(x-h) + f(x-2h)) / 12h`, truncation error O(h^4).
    /// Useful for deep networks whose third derivatives are large.
    FivePoint,
}

/// Compares tape gradients of every parameter against central differences
/// with step `h`. Parameter values are restored before returning.
pub fn check_gradients<F>(store: &mut ParamStore, forward: F, h: f64) -> Result<GradReport>
where
    F: Fn(&mut Tape, &ParamStore) -> Result<Var>,
{
    check_gradients_with(store, forward, h, Stencil::Central)
}

pub fn check_gradients_with<F>(store: &mut ParamStore, forward: F, h: f64, stencil: Stencil) -> Result<GradReport>
where
    F: Fn(&mut Tape, &ParamStore) -> Result<Var>,
{
    let mut tape = Tape::new();
    let loss = forward(&mut tape, store)?;
    let grads = tape.backward(loss)?;
    let ids: Vec<_> = store.iter().map(|(id, _)| id).collect();

    let eval = |store: &ParamStore| -> Result<f64> {
        let mut tape = Tape::new();
        let l = forward(&mut tape, store)?;
        Ok(tape.value(l).item())
    };

    let mut report = GradReport::default();
    for id in ids {
        let analytic = grads.param(id);
        let n = store.get(id).value.numel();
        for k in 0..n {
            let orig = store.get(id).value.data()[k];
            let at = |store: &mut ParamStore, x: f64| -> Result<f64> {
                store.get_mut(id).value.data_mut()[k] = x;
                eval(store)
            };
            let numeric = match stencil {
                Stencil::Central => (at(store, orig + h)? - at(store, orig - h)?) / (2.0 * h),
                Stencil::FivePoint => {
                    let (p1, m1) = (at(store, orig + h)?, at(store, orig - h)?);
                    let (p2, m2) = (at(store, orig + 2.0 * h)?, at(store, orig - 2.0 * h)?);
                    (8.0 * (p1 - m1) - (p2 - m2)) / (12.0 * h)
                }
            };
            store.get_mut(id).value.data_mut()[k] = orig;

            let a = analytic.as_ref().map_or(0.0, |g| g.data()[k]);
            let abs = (a - numeric).abs();
            let rel = relative_error(a, numeric);
            report.checked += 1;
            report.max_abs_error = report.max_abs_error.max(abs);
            if rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst = Some(format!("{}[{k}]", store.get(id).name));
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    #[test]
    fn quadratic_is_exact() {
        let mut store = ParamStore::new();
        let w = store
            .add("w", Tensor::new(vec![3], vec![0.5, -1.0, 2.0]).unwrap())
            .unwrap();
        let report = check_gradients(
            &mut store,
            |tape, s| {
                let v = tape.param(s, w);
                let sq = tape.square(v)?;
                tape.sum_all(sq)
            },
            1e-4,
        )
        .unwrap();
        assert_eq!(report.checked, 3);
        assert!(report.max_rel_error < 1e-9);
        assert_eq!(store.get(w).value.data(), &[0.5, -1.0, 2.0]);
    }

    fn cubic_report(stencil: Stencil) -> GradReport {
        let mut store = ParamStore::new();
        let w = store.add("w", Tensor::new(vec![2], vec![1.5, -0.7]).unwrap()).unwrap();
        check_gradients_with(
            &mut store,
            |tape, s| {
                let v = tape.param(s, w);
                let sq = tape.square(v)?;
                let cube = tape.mul(sq, v)?;
                tape.sum_all(cube)
            },
            1e-2,
            stencil,
        )
        .unwrap()
    }

    #[test]
    fn five_point_stencil_is_exact_on_cubics() {
        // Central differences of x^3 are off by exactly h^2.
        let central = cubic_report(Stencil::Central);
        assert!((central.max_abs_error - 1e-4).abs() < 1e-9);
        assert!(cubic_report(Stencil::FivePoint).max_abs_error < 1e-11);
    }

    #[test]
    fn relative_error_floors_tiny_values() {
        assert_eq!(relative_error(0.0, 0.0), 0.0);
        assert!(relative_error(1e-12, 0.0) < 1e-5);
        assert!((relative_error(1.0, 1.1) - 0.1 / 1.1).abs() < 1e-15);
    }
}

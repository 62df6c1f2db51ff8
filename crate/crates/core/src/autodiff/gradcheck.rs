use crate::autodiff::{Matrix, Tape, Var};
use crate::error::{Error, Result};

/// Gradients smaller than this are compared in absolute rather than relative
/// terms. Central differences carry roughly `ε·|f|/h` of rounding error, so a
/// tiny true gradient cannot be resolved relatively.
pub const RELATIVE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    /// `max |analytic − numeric| / max(|analytic|, |numeric|, RELATIVE_FLOOR)`.
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    /// `(parameter index, flat coordinate)` of the worst coordinate.
    pub worst: Option<(usize, usize)>,
    pub coordinates: usize,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR)
}

fn evaluate<F>(params: &[Matrix], f: &F) -> Result<(Tape, Vec<Var>, Var)>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = params.iter().map(|p| tape.param(p.clone())).collect();
    let loss = f(&mut tape, &vars)?;
    Ok((tape, vars, loss))
}

/// Compares reverse-mode gradients of `f` at `params` against central
/// differences `(f(θ+h) − f(θ−h)) / 2h`, coordinate by coordinate.
///
/// `f` records its computation on the given tape, reading parameters from the
/// supplied handles, and returns the scalar output.
pub fn finite_diff_check<F>(params: &[Matrix], h: f64, f: F) -> Result<GradCheck>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidArgument(format!("finite-difference step h = {h} must be positive")));
    }
    let (tape, vars, loss) = evaluate(params, &f)?;
    let grads = tape.backward(loss)?;
    let analytic: Vec<Matrix> = vars.iter().map(|&v| grads.wrt(v)).collect();

    let scalar_at = |probe: &[Matrix]| -> Result<f64> {
        let (tape, _, loss) = evaluate(probe, &f)?;
        let v = tape.scalar(loss)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite("finite_diff_check"))
        }
    };

    let mut report = GradCheck {
        max_rel_error: 0.0,
        max_abs_error: 0.0,
        worst: None,
        coordinates: 0,
    };
    let mut probe = params.to_vec();
    for (p, grad) in analytic.iter().enumerate() {
        for k in 0..params[p].len() {
            let orig = params[p].as_slice()[k];
            probe[p].as_mut_slice()[k] = orig + h;
            let up = scalar_at(&probe)?;
            probe[p].as_mut_slice()[k] = orig - h;
            let down = scalar_at(&probe)?;
            probe[p].as_mut_slice()[k] = orig;

            let numeric = (up - down) / (2.0 * h);
            let a = grad.as_slice()[k];
            let rel = relative_error(a, numeric);
            report.max_abs_error = report.max_abs_error.max((a - numeric).abs());
            if rel > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = rel.max(report.max_rel_error);
                report.worst = Some((p, k));
            }
            report.coordinates += 1;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_is_exact() {
        let x = Matrix::from_rows(&[[0.3, -1.2, 2.0]]).unwrap();
        let report = finite_diff_check(&[x], 1e-4, |t, p| {
            let sq = t.square(p[0])?;
            let s = t.mul_scalar(sq, 3.0)?;
            t.sum(s)
        })
        .unwrap();
        assert!(report.max_rel_error < 1e-9, "{report:?}");
        assert_eq!(report.coordinates, 3);
    }

    #[test]
    fn relu_away_from_kinks() {
        let x = Matrix::from_rows(&[[0.5, -0.7], [1.3, -2.0]]).unwrap();
        let w = Matrix::from_rows(&[[1.0, -0.5], [0.25, 2.0]]).unwrap();
        let report = finite_diff_check(&[x, w], 1e-5, |t, p| {
            let h = t.matmul(p[0], p[1])?;
            let r = t.relu(h)?;
            let sq = t.square(r)?;
            t.sum(sq)
        })
        .unwrap();
        assert!(report.max_rel_error < 1e-5, "{report:?}");
    }

    #[test]
    fn zero_step_rejected() {
        let x = Matrix::scalar(1.0);
        let err = finite_diff_check(&[x], 0.0, |t, p| t.sum(p[0])).unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)));
    }

    #[test]
    fn non_finite_evaluation_signalled() {
        // log(x) at x = h/2 is fine analytically but x − h crosses zero.
        let x = Matrix::scalar(5e-6);
        let err = finite_diff_check(&[x], 1e-5, |t, p| {
            let l = t.log(p[0])?;
            t.sum(l)
        })
        .unwrap_err();
        assert!(matches!(err, Error::LogDomain(_)));
    }

    #[test]
    fn sign_flip_is_detected() {
        let x = Matrix::from_rows(&[[0.4, 0.9]]).unwrap();
        let report = finite_diff_check(&[x], 1e-5, |t, p| {
            t.inject_fault(crate::autodiff::OpKind::Square);
            let sq = t.square(p[0])?;
            t.sum(sq)
        })
        .unwrap();
        assert!(report.max_rel_error > 1.0);
    }
}

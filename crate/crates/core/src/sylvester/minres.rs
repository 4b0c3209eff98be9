//! MINRES for symmetric (possibly indefinite or singular but consistent)
//! systems, following Paige and Saunders without preconditioning.

use nalgebra::DVector;

pub(crate) struct MinresOutcome {
    pub x: DVector<f64>,
    pub iterations: usize,
}

/// Runs MINRES from a zero initial guess until the recurrence residual
/// drops below `rtol * ‖b‖` or `maxiter` steps have been taken.
pub(crate) fn minres<F>(op: F, b: &DVector<f64>, rtol: f64, maxiter: usize) -> MinresOutcome
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let n = b.len();
    let mut x = DVector::zeros(n);
    let beta1 = b.norm();
    if beta1 == 0.0 {
        return MinresOutcome { x, iterations: 0 };
    }

    let mut r1 = b.clone();
    let mut r2 = b.clone();
    let mut y = b.clone();
    let mut w = DVector::zeros(n);
    let mut w2 = DVector::zeros(n);

    let mut oldb = 0.0;
    let mut beta = beta1;
    let mut dbar = 0.0;
    let mut epsln = 0.0;
    let mut phibar = beta1;
    let mut cs = -1.0;
    let mut sn = 0.0;

    let mut itn = 0;
    while itn < maxiter {
        itn += 1;
        let v = &y / beta;
        y = op(&v);
        if itn >= 2 {
            y.axpy(-beta / oldb, &r1, 1.0);
        }
        let alfa = v.dot(&y);
        y.axpy(-alfa / beta, &r2, 1.0);
        r1 = std::mem::replace(&mut r2, y.clone());
        oldb = beta;
        beta = r2.norm();

        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;

        let gamma = gbar.hypot(beta).max(f64::EPSILON);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;

        let w1 = std::mem::replace(&mut w2, w.clone());
        w = (v - w1 * oldeps - &w2 * delta) / gamma;
        x.axpy(phi, &w, 1.0);

        if phibar <= rtol * beta1 || beta <= f64::EPSILON * beta1 {
            break;
        }
    }
    MinresOutcome { x, iterations: itn }
}

//! Fixed-step classical Runge-Kutta integration on small dense state vectors.

use crate::num::Real;

/// One classical fourth-order Runge-Kutta step of `y' = f(t, y)`.
#[inline]
pub fn rk4_step<T, const N: usize, F>(mut f: F, t: T, y: &[T; N], dt: T) -> [T; N]
where
    T: Real,
    F: FnMut(T, &[T; N]) -> [T; N],
{
    let half = T::lit(0.5) * dt;
    let k1 = f(t, y);
    let k2 = f(t + half, &axpy(y, half, &k1));
    let k3 = f(t + half, &axpy(y, half, &k2));
    let k4 = f(t + dt, &axpy(y, dt, &k3));
    let sixth = dt / T::lit(6.0);
    let two = T::lit(2.0);
    let mut out = *y;
    for i in 0..N {
        out[i] = y[i] + sixth * (k1[i] + two * (k2[i] + k3[i]) + k4[i]);
    }
    out
}

#[inline(always)]
fn axpy<T: Real, const N: usize>(y: &[T; N], a: T, k: &[T; N]) -> [T; N] {
    let mut out = *y;
    for i in 0..N {
        out[i] = y[i] + a * k[i];
    }
    out
}

/// Number of uniform steps of size `dt` covering `span`, or `None` if the
/// step does not fit at least once.
pub fn step_count<T: Real>(span: T, dt: T) -> Option<usize> {
    if !(dt > T::zero()) || !(span > T::zero()) {
        return None;
    }
    let n = (span / dt).round().to_usize()?;
    (n > 0).then_some(n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_is_fourth_order() {
        let err = |n: usize| {
            let dt = 1.0 / n as f64;
            let mut y = [1.0f64];
            for i in 0..n {
                y = rk4_step(|_, y: &[f64; 1]| [-y[0]], i as f64 * dt, &y, dt);
            }
            (y[0] - (-1.0f64).exp()).abs()
        };
        let ratio = err(10) / err(20);
        assert!(ratio > 14.0 && ratio < 18.0, "ratio {ratio}");
    }

    #[test]
    fn time_dependent_rhs_uses_stage_times() {
        // y' = 3t^2 integrates exactly under RK4 (Simpson's rule).
        let mut y = [0.0f64];
        let dt = 0.25;
        for i in 0..4 {
            y = rk4_step(|t, _: &[f64; 1]| [3.0 * t * t], i as f64 * dt, &y, dt);
        }
        assert!((y[0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn step_count_rejects_degenerate() {
        assert_eq!(step_count(1.0f64, 0.0), None);
        assert_eq!(step_count(0.0f64, 0.1), None);
        assert_eq!(step_count(200.0f64, 0.001), Some(200_000));
    }
}

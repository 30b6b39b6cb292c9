//! Adaptive Dormand–Prince 5(4) integrator for real first-order systems.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Upper bound on the step; `None` leaves it to the error control.
    pub max_step: Option<f64>,
    pub initial_step: Option<f64>,
    pub max_steps: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { rtol: 1e-10, atol: 1e-12, max_step: None, initial_step: None, max_steps: 50_000_000 }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        let ok = self.rtol > 0.0 && self.atol > 0.0 && self.rtol.is_finite() && self.atol.is_finite();
        let step_ok = self.max_step.is_none_or(|h| h > 0.0) && self.initial_step.is_none_or(|h| h > 0.0);
        if ok && step_ok && self.max_steps > 0 {
            Ok(())
        } else {
            Err(Error::Domain(format!("invalid solver options {self:?}")))
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolverStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evaluations: usize,
}

impl SolverStats {
    pub fn merge(&mut self, other: &SolverStats) {
        self.accepted += other.accepted;
        self.rejected += other.rejected;
        self.rhs_evaluations += other.rhs_evaluations;
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Integrates `y' = f(t, y)` from `t0`, calling `observe` at every time in
/// `t_out` (ascending, each `≥ t0`). Steps are clipped to land on the
/// output times exactly. Returns the state at the last output time.
pub fn integrate<F, O>(
    mut f: F,
    t0: f64,
    y0: &[f64],
    t_out: &[f64],
    opts: &SolverOptions,
    mut observe: O,
) -> Result<(Vec<f64>, SolverStats)>
where
    F: FnMut(f64, &[f64], &mut [f64]),
    O: FnMut(f64, &[f64]),
{
    opts.validate()?;
    if t_out.windows(2).any(|w| w[1] < w[0]) || t_out.first().is_some_and(|&t| t < t0) {
        return Err(Error::Domain("output times must be ascending and not before the start".into()));
    }
    let n = y0.len();
    let mut y = y0.to_vec();
    let mut stats = SolverStats::default();
    let mut k: [Vec<f64>; 7] = std::array::from_fn(|_| vec![0.0; n]);
    let mut ytmp = vec![0.0; n];
    let mut ynew = vec![0.0; n];
    let mut t = t0;

    f(t, &y, &mut k[0]);
    stats.rhs_evaluations += 1;

    let scale_norm = |y: &[f64], d: &[f64]| -> f64 {
        let s: f64 = y
            .iter()
            .zip(d)
            .map(|(yi, di)| {
                let sc = opts.atol + opts.rtol * yi.abs();
                (di / sc).powi(2)
            })
            .sum();
        (s / n.max(1) as f64).sqrt()
    };
    let mut h = match opts.initial_step {
        Some(h) => h,
        None => {
            let d0 = scale_norm(&y, &y);
            let d1 = scale_norm(&y, &k[0]);
            let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
            h0.min(opts.max_step.unwrap_or(f64::INFINITY))
        }
    };

    for &target in t_out {
        while t < target {
            if stats.accepted + stats.rejected >= opts.max_steps {
                return Err(Error::Integration { t, reason: format!("exceeded {} steps", opts.max_steps), last_state: y });
            }
            if let Some(hm) = opts.max_step {
                h = h.min(hm);
            }
            let remaining = target - t;
            let clipped = h >= remaining;
            let step = if clipped { remaining } else { h };
            if step <= 1e-14 * t.abs().max(1.0) && !clipped {
                return Err(Error::Integration { t, reason: format!("step size underflow (h = {step:e})"), last_state: y });
            }

            let (k1, rest) = k.split_first_mut().unwrap();
            let [k2, k3, k4, k5, k6, k7] = rest else { unreachable!() };
            for i in 0..n {
                ytmp[i] = y[i] + step * A21 * k1[i];
            }
            f(t + C2 * step, &ytmp, k2);
            for i in 0..n {
                ytmp[i] = y[i] + step * (A31 * k1[i] + A32 * k2[i]);
            }
            f(t + C3 * step, &ytmp, k3);
            for i in 0..n {
                ytmp[i] = y[i] + step * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
            }
            f(t + C4 * step, &ytmp, k4);
            for i in 0..n {
                ytmp[i] = y[i] + step * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
            }
            f(t + C5 * step, &ytmp, k5);
            for i in 0..n {
                ytmp[i] = y[i] + step * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
            }
            f(t + step, &ytmp, k6);
            for i in 0..n {
                ynew[i] = y[i] + step * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i]);
            }
            f(t + step, &ynew, k7);
            stats.rhs_evaluations += 6;

            let mut err = 0.0;
            for i in 0..n {
                let e = step
                    * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                let sc = opts.atol + opts.rtol * y[i].abs().max(ynew[i].abs());
                err += (e / sc).powi(2);
            }
            let err = (err / n.max(1) as f64).sqrt();
            if !err.is_finite() {
                return Err(Error::Integration { t, reason: "non-finite error estimate".into(), last_state: y });
            }

            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            if err <= 1.0 {
                stats.accepted += 1;
                t = if clipped { target } else { t + step };
                std::mem::swap(&mut y, &mut ynew);
                k.swap(0, 6);
                // keep the free step size when clipping shortened this one
                if !clipped {
                    h = step * factor;
                } else {
                    h = h.max(step * factor).min(h * 5.0);
                }
            } else {
                stats.rejected += 1;
                h = step * factor.min(1.0);
            }
        }
        observe(t, &y);
    }
    Ok((y, stats))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator() {
        let w = 3.0;
        let f = |_t: f64, y: &[f64], d: &mut [f64]| {
            d[0] = y[1];
            d[1] = -w * w * y[0];
        };
        let times: Vec<f64> = (1..=20).map(|i| i as f64 * 0.5).collect();
        let mut seen = Vec::new();
        let (y, stats) =
            integrate(f, 0.0, &[1.0, 0.0], &times, &SolverOptions::default(), |t, y| seen.push((t, y[0]))).unwrap();
        assert_eq!(seen.len(), 20);
        for (t, q) in seen {
            assert!((q - (w * t).cos()).abs() < 1e-8, "t = {t}");
        }
        assert!((y[1] + w * (w * 10.0).sin()).abs() < 1e-7);
        assert!(stats.accepted > 0);
    }

    #[test]
    fn exponential_growth_and_tolerance_scaling() {
        let f = |_t: f64, y: &[f64], d: &mut [f64]| d[0] = y[0];
        let run = |rtol: f64| {
            let o = SolverOptions { rtol, atol: rtol * 1e-2, ..Default::default() };
            let (y, _) = integrate(f, 0.0, &[1.0], &[5.0], &o, |_, _| {}).unwrap();
            (y[0] - 5f64.exp()).abs() / 5f64.exp()
        };
        let loose = run(1e-6);
        let tight = run(1e-9);
        assert!(tight < loose);
        assert!(tight < 1e-8);
    }

    #[test]
    fn step_limit_reports_last_state() {
        let f = |_t: f64, y: &[f64], d: &mut [f64]| d[0] = y[0];
        let o = SolverOptions { max_steps: 3, max_step: Some(1e-3), ..Default::default() };
        match integrate(f, 0.0, &[1.0], &[1.0], &o, |_, _| {}) {
            Err(Error::Integration { last_state, t, .. }) => {
                assert_eq!(last_state.len(), 1);
                assert!(t > 0.0 && t < 1.0);
                assert!((last_state[0] - t.exp()).abs() < 1e-9);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn singular_rhs_fails_cleanly() {
        // y' = y², blows up at t = 1
        let f = |_t: f64, y: &[f64], d: &mut [f64]| d[0] = y[0] * y[0];
        let r = integrate(f, 0.0, &[1.0], &[2.0], &SolverOptions::default(), |_, _| {});
        assert!(matches!(r, Err(Error::Integration { .. })));
    }

    #[test]
    fn rejects_bad_inputs() {
        let f = |_t: f64, _y: &[f64], _d: &mut [f64]| {};
        let bad = SolverOptions { rtol: 0.0, ..Default::default() };
        assert!(integrate(f, 0.0, &[1.0], &[1.0], &bad, |_, _| {}).is_err());
        assert!(integrate(f, 0.0, &[1.0], &[2.0, 1.0], &SolverOptions::default(), |_, _| {}).is_err());
    }
}

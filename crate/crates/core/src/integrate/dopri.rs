use crate::error::{Error, Result};

use super::{error_norm, Outcome, Stats};

#[derive(Debug, Clone, Copy)]
pub struct DopriOptions {
    pub rtol: f64,
    pub atol: f64,
    pub initial_step: f64,
    pub min_step: f64,
    pub max_steps: usize,
}

impl Default for DopriOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-8,
            atol: 1e-10,
            initial_step: 1e-4,
            min_step: 1e-14,
            max_steps: 1_000_000,
        }
    }
}

// Dormand-Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
// Difference between the 5th- and 4th-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Dormand-Prince 5(4) with step rejection. Output times are hit exactly by
/// shortening the step that would cross them, so no interpolation error is
/// introduced.
pub struct Dopri5 {
    pub options: DopriOptions,
    pub stats: Stats,
}

impl Dopri5 {
    pub fn new(options: DopriOptions) -> Self {
        Self {
            options,
            stats: Stats::default(),
        }
    }

    /// Integrates from `t_out[0]` with state `y0`, recording the state at each
    /// time in `t_out` (ascending). `rhs(t, y, dy)` may fail with
    /// [`Error::SingularState`], which is treated as a step rejection.
    /// `stop(t, y)` is consulted after every accepted step.
    pub fn solve<F, S>(
        &mut self,
        mut rhs: F,
        y0: &[f64],
        t_out: &[f64],
        mut stop: S,
    ) -> Result<(Vec<Vec<f64>>, Outcome)>
    where
        F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
        S: FnMut(f64, &[f64]) -> bool,
    {
        let n = y0.len();
        let opts = self.options;
        let mut out = Vec::with_capacity(t_out.len());
        let Some(&t_start) = t_out.first() else {
            return Ok((out, Outcome::Complete));
        };
        let mut t = t_start;
        let mut y = y0.to_vec();
        out.push(y.clone());

        let mut k = vec![vec![0.0; n]; 7];
        let mut stage = vec![0.0; n];
        let mut y_new = vec![0.0; n];
        let mut err = vec![0.0; n];

        rhs(t, &y, &mut k[0])?;
        self.stats.rhs_evals += 1;
        let mut step = opts.initial_step;
        let mut steps = 0usize;

        for &target in &t_out[1..] {
            while t < target {
                steps += 1;
                if steps > opts.max_steps {
                    return Err(Error::IntegrationFailure {
                        t,
                        reason: "maximum step count exceeded".into(),
                    });
                }
                if step < opts.min_step {
                    return Err(Error::IntegrationFailure {
                        t,
                        reason: format!("step size underflow ({step:e})"),
                    });
                }
                let remaining = target - t;
                let clipped = remaining <= step * (1.0 + 1e-12);
                let hs = if clipped { remaining } else { step };

                match self.attempt(
                    &mut rhs, t, &y, hs, &mut k, &mut stage, &mut y_new, &mut err,
                ) {
                    Ok(()) => {}
                    Err(Error::SingularState(_)) => {
                        self.stats.rejected += 1;
                        step = hs * 0.25;
                        continue;
                    }
                    Err(e) => return Err(e),
                }
                let norm = error_norm(&err, &y, &y_new, opts.rtol, opts.atol);
                if !norm.is_finite() {
                    self.stats.rejected += 1;
                    step = hs * 0.25;
                    continue;
                }
                let factor = if norm == 0.0 {
                    5.0
                } else {
                    (0.9 * norm.powf(-0.2)).clamp(0.2, 5.0)
                };
                if norm <= 1.0 {
                    self.stats.accepted += 1;
                    t = if clipped { target } else { t + hs };
                    std::mem::swap(&mut y, &mut y_new);
                    // first-same-as-last
                    k.swap(0, 6);
                    if !clipped {
                        step = hs * factor;
                    } else {
                        step = step.max(hs * factor);
                    }
                    if stop(t, &y) {
                        return Ok((out, Outcome::Stopped { t }));
                    }
                } else {
                    self.stats.rejected += 1;
                    step = hs * factor.min(1.0);
                }
            }
            out.push(y.clone());
        }
        Ok((out, Outcome::Complete))
    }

    #[allow(clippy::too_many_arguments)]
    fn attempt<F>(
        &mut self,
        rhs: &mut F,
        t: f64,
        y: &[f64],
        h: f64,
        k: &mut [Vec<f64>],
        stage: &mut [f64],
        y_new: &mut [f64],
        err: &mut [f64],
    ) -> Result<()>
    where
        F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
    {
        let n = y.len();
        for s in 1..7 {
            for i in 0..n {
                let mut acc = 0.0;
                for (j, kj) in k.iter().enumerate().take(s) {
                    acc += A[s][j] * kj[i];
                }
                stage[i] = y[i] + h * acc;
            }
            let (head, tail) = k.split_at_mut(s);
            let _ = head;
            rhs(t + C[s] * h, stage, &mut tail[0])?;
            self.stats.rhs_evals += 1;
        }
        // stage 7 was evaluated at the 5th-order solution
        y_new.copy_from_slice(stage);
        for i in 0..n {
            err[i] = h * (0..7).map(|s| E[s] * k[s][i]).sum::<f64>();
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::time_grid;

    #[test]
    fn exponential_decay_to_tolerance() {
        let t = time_grid(101);
        let mut solver = Dopri5::new(DopriOptions::default());
        let (ys, outcome) = solver
            .solve(
                |_, y, dy| {
                    dy[0] = -2.0 * y[0];
                    Ok(())
                },
                &[1.0],
                &t,
                |_, _| false,
            )
            .unwrap();
        assert_eq!(outcome, Outcome::Complete);
        assert_eq!(ys.len(), 101);
        for (tk, yk) in t.iter().zip(&ys) {
            assert!((yk[0] - (-2.0 * tk).exp()).abs() < 1e-9);
        }
    }

    #[test]
    fn fifth_order_convergence() {
        // fixed steps via a loose tolerance-free run: compare errors at two
        // output spacings when every step is clipped to the grid
        let run = |n: usize| {
            let t = time_grid(n + 1);
            let mut solver = Dopri5::new(DopriOptions {
                rtol: 1.0,
                atol: 1.0,
                initial_step: 1.0,
                ..DopriOptions::default()
            });
            let (ys, _) = solver
                .solve(
                    |t, y, dy| {
                        dy[0] = y[1];
                        dy[1] = -y[0] + t.cos() * 0.1;
                        Ok(())
                    },
                    &[1.0, 0.0],
                    &t,
                    |_, _| false,
                )
                .unwrap();
            // exact: cos t + 0.05 t sin t
            let y1 = ys.last().unwrap()[0];
            (y1 - (1.0f64.cos() + 0.05 * 1.0f64.sin())).abs()
        };
        let e1 = run(8);
        let e2 = run(16);
        let order = (e1 / e2).log2();
        assert!(order > 4.5, "observed order {order}");
    }

    #[test]
    fn stop_predicate_ends_early() {
        let t = time_grid(11);
        let mut solver = Dopri5::new(DopriOptions::default());
        let (ys, outcome) = solver
            .solve(
                |_, _, dy| {
                    dy[0] = -1.0;
                    Ok(())
                },
                &[1.0],
                &t,
                |_, y| y[0] < 0.5,
            )
            .unwrap();
        assert!(matches!(outcome, Outcome::Stopped { .. }));
        assert!(ys.len() < 11);
    }
}

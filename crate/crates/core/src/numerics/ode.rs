use crate::error::{Error, Result};

/// Uniform time grid `t0, t0 + dt, ..., t_final`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OdeGrid {
    t0: f64,
    t_final: f64,
    dt: f64,
    steps: usize,
}

impl OdeGrid {
    /// Strict constructor: `(t_final - t0) / dt` has to be an integer to within
    /// one part in 10⁹.
    pub fn new(t0: f64, t_final: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidGrid(format!("dt must be positive, got {dt}")));
        }
        if !(t_final > t0) || !t0.is_finite() || !t_final.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "t_final ({t_final}) must exceed t0 ({t0})"
            )));
        }
        let ratio = (t_final - t0) / dt;
        let steps = ratio.round();
        if (ratio - steps).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::InvalidGrid(format!(
                "span {} is not an integer multiple of dt = {dt}",
                t_final - t0
            )));
        }
        Ok(OdeGrid {
            t0,
            t_final,
            dt,
            steps: steps as usize,
        })
    }

    /// Finest uniform grid on `[t0, t1]` whose step does not exceed `max_dt`.
    ///
    /// Used where the interval endpoints are fixed by the problem (for example
    /// a Grammian over `[0, 2π]`) and need not be a multiple of the step.
    pub fn covering(t0: f64, t1: f64, max_dt: f64) -> Result<Self> {
        if !(max_dt > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "dt must be positive, got {max_dt}"
            )));
        }
        if !(t1 > t0) {
            return Err(Error::InvalidGrid(format!("t1 ({t1}) must exceed t0 ({t0})")));
        }
        let ratio = (t1 - t0) / max_dt;
        let steps = (ratio - 1e-9 * ratio.max(1.0)).ceil().max(1.0) as usize;
        Ok(OdeGrid {
            t0,
            t_final: t1,
            dt: (t1 - t0) / steps as f64,
            steps,
        })
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Number of integration steps; the grid has `steps() + 1` points.
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn time(&self, k: usize) -> f64 {
        if k == self.steps {
            self.t_final
        } else {
            self.t0 + k as f64 * self.dt
        }
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.steps).map(|k| self.time(k))
    }
}

/// One classical fourth-order Runge-Kutta step of `ẋ = f(t, x)`.
pub fn rk4_step<F>(f: F, t: f64, x: &[f64], dt: f64) -> Result<Vec<f64>>
where
    F: Fn(f64, &[f64]) -> Vec<f64>,
{
    let half = 0.5 * dt;
    let k1 = f(t, x);
    let x2: Vec<f64> = x.iter().zip(&k1).map(|(a, k)| a + half * k).collect();
    let k2 = f(t + half, &x2);
    let x3: Vec<f64> = x.iter().zip(&k2).map(|(a, k)| a + half * k).collect();
    let k3 = f(t + half, &x3);
    let x4: Vec<f64> = x.iter().zip(&k3).map(|(a, k)| a + dt * k).collect();
    let k4 = f(t + dt, &x4);

    let sixth = dt / 6.0;
    let out: Vec<f64> = (0..x.len())
        .map(|i| x[i] + sixth * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect();
    if out.iter().all(|v| v.is_finite()) {
        Ok(out)
    } else {
        Err(Error::NonFinite { t: t + dt })
    }
}

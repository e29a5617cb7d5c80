//! Phenomenological nonlinear roll equation
//! `ξ̈ + α1 ξ̇ + α2 ξ̇³ + (β1 + ε1 cos φ · η) ξ + β2 ξ³ = ε2 sin φ · η`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RollParams {
    pub alpha1: f64,
    pub alpha2: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps1: f64,
    pub eps2: f64,
    pub phi: f64,
}

impl Default for RollParams {
    fn default() -> Self {
        RollParams {
            alpha1: 0.19,
            alpha2: 0.06,
            beta1: 0.04,
            beta2: -0.1,
            eps1: 0.020,
            eps2: 0.004,
            phi: std::f64::consts::FRAC_PI_6,
        }
    }
}

/// Roll angle and rate.
pub type RollState = (f64, f64);

/// Precomputed coefficients of the right-hand side.
#[derive(Clone, Copy, Debug)]
pub(crate) struct RollRhs {
    a1: f64,
    a2: f64,
    b1: f64,
    b2: f64,
    c_param: f64,
    c_force: f64,
}

impl RollRhs {
    pub fn new(p: &RollParams) -> Self {
        RollRhs {
            a1: p.alpha1,
            a2: p.alpha2,
            b1: p.beta1,
            b2: p.beta2,
            c_param: p.eps1 * p.phi.cos(),
            c_force: p.eps2 * p.phi.sin(),
        }
    }

    #[inline]
    fn accel(&self, x: f64, v: f64, eta: f64) -> f64 {
        -self.a1 * v - self.a2 * v * v * v - (self.b1 + self.c_param * eta) * x - self.b2 * x * x * x + self.c_force * eta
    }

    /// Advances over one sampling interval from `e0` to `e1` with `sub`
    /// classical RK4 steps, interpolating η linearly.
    #[inline]
    pub fn advance(&self, (mut x, mut v): RollState, e0: f64, e1: f64, dt: f64, sub: usize) -> RollState {
        let h = dt / sub as f64;
        let de = (e1 - e0) / sub as f64;
        for s in 0..sub {
            let ea = e0 + de * s as f64;
            let em = ea + 0.5 * de;
            let eb = ea + de;
            let k1x = v;
            let k1v = self.accel(x, v, ea);
            let (x2, v2) = (x + 0.5 * h * k1x, v + 0.5 * h * k1v);
            let k2v = self.accel(x2, v2, em);
            let (x3, v3) = (x + 0.5 * h * v2, v + 0.5 * h * k2v);
            let k3v = self.accel(x3, v3, em);
            let (x4, v4) = (x + h * v3, v + h * k3v);
            let k4v = self.accel(x4, v4, eb);
            x += h / 6.0 * (k1x + 2.0 * v2 + 2.0 * v3 + v4);
            v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
        }
        (x, v)
    }
}

/// Substeps per sampling interval needed for an integration step of at
/// most `dt`.
pub fn substeps(eta_dt: f64, dt: f64) -> usize {
    ((eta_dt / dt) - 1e-9).ceil().max(1.0) as usize
}

/// Integrates from `ic` over `eta` (sampled every `eta_dt`) with RK4 steps of
/// at most `dt`; returns ξ at every sample time.
pub fn roll_simulate(eta: &[f64], eta_dt: f64, ic: RollState, p: &RollParams, dt: f64) -> Result<Vec<f64>> {
    if !(dt > 0.0 && eta_dt > 0.0) {
        return Err(Error::InvalidArgument("time steps must be positive".into()));
    }
    let rhs = RollRhs::new(p);
    let sub = substeps(eta_dt, dt);
    let mut out = Vec::with_capacity(eta.len());
    let mut state = ic;
    if !eta.is_empty() {
        out.push(state.0);
    }
    for i in 1..eta.len() {
        state = rhs.advance(state, eta[i - 1], eta[i], eta_dt, sub);
        if !(state.0.is_finite() && state.1.is_finite()) {
            return Err(Error::BlowUp { time: i as f64 * eta_dt });
        }
        out.push(state.0);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equilibrium_stays_put() {
        let xi = roll_simulate(&[0.0; 500], 0.75, (0.0, 0.0), &RollParams::default(), 0.15).unwrap();
        assert!(xi.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn free_decay() {
        let xi = roll_simulate(&[0.0; 4000], 0.75, (0.01, 0.0), &RollParams::default(), 0.15).unwrap();
        // successive positive peaks shrink
        let peaks: Vec<f64> = (1..xi.len() - 1).filter(|&i| xi[i] > xi[i - 1] && xi[i] >= xi[i + 1]).map(|i| xi[i]).collect();
        assert!(peaks.len() > 3);
        assert!(peaks.windows(2).all(|w| w[1] < w[0]));
        assert!(xi.last().unwrap().abs() < 1e-4);
    }

    #[test]
    fn blow_up_reports_time() {
        let mut p = RollParams::default();
        p.beta2 = -10.0;
        match roll_simulate(&[0.0; 400], 0.75, (1.0, 3.0), &p, 0.15) {
            Err(Error::BlowUp { time }) => assert!(time > 0.0),
            other => panic!("{other:?}"),
        }
    }
}

//! Adaptive Dormand–Prince 5(4) integration of dρ/dt = L(ρ).

use num_complex::Complex64;

use super::{DensityMatrix, Liouvillian};
use crate::error::{Error, Result};

type C = Complex64;

#[derive(Debug, Clone, Copy)]
pub struct EvolveOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h_min: f64,
    pub h_init: f64,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-9,
            atol: 1e-12,
            h_min: 1e-12,
            h_init: 1e-3,
        }
    }
}

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

fn combo(y: &[C], h: f64, terms: &[(f64, &[C])]) -> Vec<C> {
    let mut out = y.to_vec();
    for &(c, k) in terms {
        let s = h * c;
        for (o, v) in out.iter_mut().zip(k) {
            *o += v * s;
        }
    }
    out
}

/// States at each time of `t_grid`, starting from `rho0` at `t_grid[0]`.
pub fn evolve(
    rho0: &DensityMatrix,
    l: &Liouvillian,
    t_grid: &[f64],
    opts: &EvolveOptions,
) -> Result<Vec<DensityMatrix>> {
    if rho0.dim() != l.dim() {
        return Err(Error::Dimension(format!("state {} vs generator {}", rho0.dim(), l.dim())));
    }
    if t_grid.windows(2).any(|w| !(w[1] >= w[0])) {
        return Err(Error::InvalidParam("time grid must be nondecreasing".into()));
    }
    let d = l.dim();
    let f = |y: &[C]| l.matrix().apply(y);
    let mut y: Vec<C> = rho0.matrix().as_slice().to_vec();
    let mut out = Vec::with_capacity(t_grid.len());
    let Some(&t0) = t_grid.first() else {
        return Ok(out);
    };
    let mut t = t0;
    let mut h = opts.h_init;
    let mut k1 = f(&y);
    out.push(rho0.clone());
    for &target in &t_grid[1..] {
        while t < target {
            let step = h.min(target - t);
            let k2 = f(&combo(&y, step, &[(A21, &k1)]));
            let k3 = f(&combo(&y, step, &[(A31, &k1), (A32, &k2)]));
            let k4 = f(&combo(&y, step, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
            let k5 = f(&combo(&y, step, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
            let k6 = f(&combo(
                &y,
                step,
                &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
            ));
            let y_new = combo(&y, step, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
            let k7 = f(&y_new);
            let mut err: f64 = 0.0;
            for i in 0..y.len() {
                let e = step
                    * (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7);
                let scale = opts.atol + opts.rtol * y[i].norm().max(y_new[i].norm());
                err = err.max(e.norm() / scale);
            }
            if err <= 1.0 {
                t += step;
                y = y_new;
                k1 = k7;
                let grow = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                if step == h {
                    h *= grow;
                }
            } else {
                h = step * (0.9 * err.powf(-0.25)).clamp(0.1, 0.9);
                if h < opts.h_min {
                    return Err(Error::StepUnderflow(t));
                }
            }
        }
        out.push(DensityMatrix::from_matrix(nalgebra::DMatrix::from_vec(d, d, y.clone()))?);
    }
    Ok(out)
}

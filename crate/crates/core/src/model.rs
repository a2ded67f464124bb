//! Closed-form parameter algebra of the linearized dual-coupling model.
//!
//! Every energy is measured in units of the mechanical frequency ω_m.
//! The quadratic a₁–b sector is diagonalized by the Bogoliubov
//! transformation R = M·B with R = (a₁, a₁†, b, b†) and
//! B = (B₋, B₋†, B₊, B₊†).

use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};

/// Fraction of the critical coupling beyond which runs are rejected.
pub const CRITICAL_GUARD: f64 = 0.98;

/// Tolerance on off-diagonal coefficients of the transformed quadratic form.
pub const RESIDUAL_TOL: f64 = 1e-8;

/// Raw physical inputs, in units of ω_m.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub delta1: f64,
    /// Bare frequency of the probe cavity. `None` leaves Δ₂ unset; the
    /// spectrum pipelines sweep the probe detuning directly.
    pub omega2: Option<f64>,
    pub omega_m: f64,
    pub g1: f64,
    pub g2: f64,
    pub beta: f64,
    /// When set, G₁ is taken as given instead of from ω_m·β = g₁α₁².
    pub g1_override: Option<f64>,
    pub kappa: f64,
    pub gamma: f64,
    /// Mechanical bath temperature k_B·T_M in units of ω_m.
    pub t_m: f64,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self {
            delta1: 2.0,
            omega2: None,
            omega_m: 1.0,
            g1: 0.01,
            g2: 0.003,
            beta: 25.0,
            g1_override: None,
            kappa: 0.05,
            gamma: 1e-5,
            t_m: 0.0,
        }
    }
}

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            ("delta1", self.delta1),
            ("omega_m", self.omega_m),
            ("g1", self.g1),
            ("g2", self.g2),
            ("beta", self.beta),
            ("kappa", self.kappa),
            ("gamma", self.gamma),
            ("T_M", self.t_m),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                return Err(Error::InvalidParam(format!("{name} must be finite, got {v}")));
            }
        }
        let check = |ok: bool, msg: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::InvalidParam(msg.to_string()))
            }
        };
        check(self.omega_m > 0.0, "omega_m > 0")?;
        check(self.kappa > 0.0, "kappa > 0")?;
        check(self.gamma >= 0.0, "gamma ≥ 0")?;
        check(self.beta >= 0.0, "beta ≥ 0")?;
        check(self.g1 >= 0.0, "g1 ≥ 0")?;
        check(self.g2 >= 0.0, "g2 ≥ 0")?;
        check(self.t_m >= 0.0, "T_M ≥ 0")?;
        if let Some(w2) = self.omega2 {
            check(w2.is_finite(), "omega2 must be finite")?;
        }
        if let Some(g) = self.g1_override {
            check(g.is_finite() && g >= 0.0, "G1 override must be finite and ≥ 0")?;
        }
        Ok(())
    }
}

/// Parameters after displacing the fields by their steady-state amplitudes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftedParams {
    /// Δ₁ = δ₁ − 2g₁β
    pub detuning1: f64,
    /// Δ₂ = ω₂ − 4g₂β², present only when ω₂ is given.
    pub detuning2: Option<f64>,
    /// G₁ = g₁α₁
    pub g1_lin: f64,
    /// G₂ = 4g₂β
    pub g2_lin: f64,
    pub alpha1: f64,
}

pub fn derive_shifted(params: &SystemParams) -> Result<ShiftedParams> {
    params.validate()?;
    let p = params;
    let detuning1 = p.delta1 - 2.0 * p.g1 * p.beta;
    if detuning1 <= 0.0 {
        return Err(Error::NegativeDetuning(format!(
            "Δ₁ = δ₁ − 2g₁β must be > 0, got {detuning1}"
        )));
    }
    let detuning2 = match p.omega2 {
        Some(w2) => {
            let d2 = w2 - 4.0 * p.g2 * p.beta * p.beta;
            if d2 < 0.0 {
                return Err(Error::NegativeDetuning(format!(
                    "Δ₂ = ω₂ − 4g₂β² must be ≥ 0, got {d2}"
                )));
            }
            Some(d2)
        }
        None => None,
    };
    let (g1_lin, alpha1) = match p.g1_override {
        Some(g) => {
            if p.g1 <= 0.0 {
                return Err(Error::InvalidParam(
                    "override mode needs g1 > 0 to define α₁ = G₁/g₁".into(),
                ));
            }
            (g, g / p.g1)
        }
        None => {
            if p.g1 <= 0.0 {
                return Err(Error::InvalidParam(
                    "β-consistent mode needs g1 > 0 (ω_m·β = g₁α₁²)".into(),
                ));
            }
            let alpha1 = (p.omega_m * p.beta / p.g1).sqrt();
            (p.g1 * alpha1, alpha1)
        }
    };
    Ok(ShiftedParams {
        detuning1,
        detuning2,
        g1_lin,
        g2_lin: 4.0 * p.g2 * p.beta,
        alpha1,
    })
}

/// G₁ at which ω₋ reaches zero.
pub fn critical_g1(delta1: f64, omega_m: f64) -> f64 {
    (delta1 * omega_m).sqrt() / 2.0
}

/// Polariton frequencies (ω₋, ω₊).
pub fn polariton_frequencies(delta1: f64, omega_m: f64, g1: f64) -> Result<(f64, f64)> {
    if !(delta1 > 0.0 && omega_m > 0.0) {
        return Err(Error::InvalidParam(format!(
            "polariton frequencies need Δ₁ > 0 and ω_m > 0, got Δ₁ = {delta1}, ω_m = {omega_m}"
        )));
    }
    if !(g1 >= 0.0) {
        return Err(Error::InvalidParam(format!("G1 must be ≥ 0, got {g1}")));
    }
    let critical = critical_g1(delta1, omega_m);
    if g1 >= critical {
        return Err(Error::Instability { g1, critical });
    }
    let d2 = delta1 * delta1;
    let w2 = omega_m * omega_m;
    let disc = ((w2 - d2).powi(2) + 16.0 * g1 * g1 * delta1 * omega_m).sqrt();
    let plus_sq = 0.5 * (d2 + w2 + disc);
    // Product of the roots avoids cancellation in the lower branch.
    let minus_sq = (d2 * w2 - 4.0 * g1 * g1 * delta1 * omega_m) / plus_sq;
    if minus_sq <= 0.0 {
        return Err(Error::Instability { g1, critical });
    }
    Ok((minus_sq.sqrt(), plus_sq.sqrt()))
}

/// Branch of the half-angle in tan 2θ = 4G₁√(Δ₁ω_m)/(Δ₁² − ω_m²).
///
/// `Consistent` is the branch on which the factor matrix actually
/// diagonalizes the quadratic sector. `Printed` takes the atan2 of the
/// formula verbatim; it is kept as a mutation hook and fails the
/// diagonalization residual away from Δ₁ = ω_m.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThetaBranch {
    #[default]
    Consistent,
    Printed,
}

/// Mixing angle on the consistent branch, in [0, π/2].
pub fn mixing_angle(delta1: f64, omega_m: f64, g1: f64) -> f64 {
    mixing_angle_on(ThetaBranch::Consistent, delta1, omega_m, g1)
}

pub fn mixing_angle_on(branch: ThetaBranch, delta1: f64, omega_m: f64, g1: f64) -> f64 {
    let num = 4.0 * g1 * (delta1 * omega_m).sqrt();
    let den = delta1 * delta1 - omega_m * omega_m;
    match branch {
        ThetaBranch::Printed => 0.5 * num.atan2(den),
        ThetaBranch::Consistent => 0.5 * num.atan2(-den),
    }
}

/// The eight real factors of the Bogoliubov matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BogoliubovFactors {
    pub c_plus: f64,
    pub c_minus: f64,
    pub d_plus: f64,
    pub d_minus: f64,
    pub e_plus: f64,
    pub e_minus: f64,
    pub f_plus: f64,
    pub f_minus: f64,
}

impl BogoliubovFactors {
    /// M with R = M·B, R = (a₁, a₁†, b, b†), B = (B₋, B₋†, B₊, B₊†).
    pub fn matrix(&self) -> [[f64; 4]; 4] {
        let f = self;
        [
            [f.c_plus, f.c_minus, f.d_plus, f.d_minus],
            [f.c_minus, f.c_plus, f.d_minus, f.d_plus],
            [-f.e_plus, -f.e_minus, f.f_plus, f.f_minus],
            [-f.e_minus, -f.e_plus, f.f_minus, f.f_plus],
        ]
    }
}

pub fn bogoliubov_factors(
    delta1: f64,
    omega_m: f64,
    omega_minus: f64,
    omega_plus: f64,
    theta: f64,
) -> BogoliubovFactors {
    let (s, c) = theta.sin_cos();
    let pair = |w0: f64, w: f64, amp: f64| {
        let root = (w0 * w).sqrt();
        (amp * (w0 + w) / root, amp * (w0 - w) / root)
    };
    let (c_plus, c_minus) = pair(delta1, omega_minus, 0.5 * c);
    let (d_plus, d_minus) = pair(delta1, omega_plus, 0.5 * s);
    let (e_plus, e_minus) = pair(omega_m, omega_minus, 0.5 * s);
    let (f_plus, f_minus) = pair(omega_m, omega_plus, 0.5 * c);
    BogoliubovFactors {
        c_plus,
        c_minus,
        d_plus,
        d_minus,
        e_plus,
        e_minus,
        f_plus,
        f_minus,
    }
}

/// Effective radiation-pressure couplings (g₋, g₊); g₋ carries a minus sign.
pub fn effective_couplings(
    g2: f64,
    beta: f64,
    theta: f64,
    omega_minus: f64,
    omega_plus: f64,
    omega_m: f64,
) -> (f64, f64) {
    let g = 4.0 * g2 * beta;
    (
        -g * theta.sin() * (omega_m / omega_minus).sqrt(),
        g * theta.cos() * (omega_m / omega_plus).sqrt(),
    )
}

/// Effective polariton damping rates (κ₋, κ₊).
pub fn effective_rates(
    kappa: f64,
    gamma: f64,
    theta: f64,
    omega_m: f64,
    omega_minus: f64,
    omega_plus: f64,
) -> (f64, f64) {
    let (s, c) = theta.sin_cos();
    (
        gamma * omega_m * s * s / omega_minus + kappa * c * c,
        gamma * omega_m * c * c / omega_plus + kappa * s * s,
    )
}

/// Bose-Einstein occupation at frequency `omega` and temperature `t`.
pub fn bose_occupation(omega: f64, t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        1.0 / (omega / t).exp_m1()
    }
}

/// Effective bath occupancies (n̄₋, n̄₊), including the mechanical-bath term.
#[allow(clippy::too_many_arguments)]
pub fn effective_occupancies(
    kappa: f64,
    theta: f64,
    delta1: f64,
    omega_minus: f64,
    omega_plus: f64,
    kappa_minus: f64,
    kappa_plus: f64,
    gamma: f64,
    omega_m: f64,
    t_m: f64,
) -> (f64, f64) {
    let (s, c) = theta.sin_cos();
    let nb_minus = bose_occupation(omega_minus, t_m);
    let nb_plus = bose_occupation(omega_plus, t_m);
    let n_minus = gamma * omega_m * s * s / (kappa_minus * omega_minus) * nb_minus
        + kappa * c * c * (delta1 - omega_minus).powi(2) / (4.0 * kappa_minus * delta1 * omega_minus);
    let n_plus = gamma * omega_m * c * c / (kappa_plus * omega_plus) * nb_plus
        + kappa * s * s * (delta1 - omega_plus).powi(2) / (4.0 * kappa_plus * delta1 * omega_plus);
    (n_minus, n_plus)
}

/// Energy of |n, m₊, m₋⟩ after the polaron transform:
/// nΔ₂′ + Σ m_σω_σ − n²·Σ g_σ²/ω_σ.
pub fn kerr_eigenvalue(
    n: u32,
    m_plus: u32,
    m_minus: u32,
    delta2_probe: f64,
    g_pm: (f64, f64),
    omega_pm: (f64, f64),
) -> f64 {
    let (g_plus, g_minus) = g_pm;
    let (w_plus, w_minus) = omega_pm;
    let nf = n as f64;
    let shift = g_plus * g_plus / w_plus + g_minus * g_minus / w_minus;
    nf * delta2_probe + m_plus as f64 * w_plus + m_minus as f64 * w_minus - nf * nf * shift
}

/// Frequencies, angle, couplings, rates and occupancies of the two polaritons.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolaritonBasis {
    pub omega_minus: f64,
    pub omega_plus: f64,
    pub theta: f64,
    pub g_minus: f64,
    pub g_plus: f64,
    pub kappa_minus: f64,
    pub kappa_plus: f64,
    pub n_minus: f64,
    pub n_plus: f64,
    pub factors: BogoliubovFactors,
}

impl PolaritonBasis {
    /// Polaron Kerr shift Σ g_σ²/ω_σ.
    pub fn kerr_shift(&self) -> f64 {
        self.g_minus.powi(2) / self.omega_minus + self.g_plus.powi(2) / self.omega_plus
    }
}

/// Shifted parameters plus the polariton basis built from them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Derived {
    pub shifted: ShiftedParams,
    pub basis: PolaritonBasis,
    pub branch: ThetaBranch,
    pub residual: f64,
}

/// Runs the full closed-form chain and checks that the result actually
/// diagonalizes the quadratic sector.
pub fn derive(params: &SystemParams, branch: ThetaBranch) -> Result<Derived> {
    let shifted = derive_shifted(params)?;
    let basis = polariton_basis(params, &shifted, branch)?;
    let residual = diagonalization_residual(
        shifted.detuning1,
        params.omega_m,
        shifted.g1_lin,
        &basis,
    );
    if !(residual < RESIDUAL_TOL) {
        return Err(Error::Residual {
            residual,
            tol: RESIDUAL_TOL,
        });
    }
    Ok(Derived {
        shifted,
        basis,
        branch,
        residual,
    })
}

/// Closed-form basis without the residual check.
pub fn polariton_basis(
    params: &SystemParams,
    shifted: &ShiftedParams,
    branch: ThetaBranch,
) -> Result<PolaritonBasis> {
    let d1 = shifted.detuning1;
    let wm = params.omega_m;
    let g1 = shifted.g1_lin;
    let critical = critical_g1(d1, wm);
    if g1 >= critical {
        return Err(Error::Instability { g1, critical });
    }
    if g1 >= CRITICAL_GUARD * critical {
        return Err(Error::CriticalGuard { g1, critical });
    }
    let (omega_minus, omega_plus) = polariton_frequencies(d1, wm, g1)?;
    let theta = mixing_angle_on(branch, d1, wm, g1);
    let factors = bogoliubov_factors(d1, wm, omega_minus, omega_plus, theta);
    let (g_minus, g_plus) =
        effective_couplings(params.g2, params.beta, theta, omega_minus, omega_plus, wm);
    let (kappa_minus, kappa_plus) =
        effective_rates(params.kappa, params.gamma, theta, wm, omega_minus, omega_plus);
    let (n_minus, n_plus) = effective_occupancies(
        params.kappa,
        theta,
        d1,
        omega_minus,
        omega_plus,
        kappa_minus,
        kappa_plus,
        params.gamma,
        wm,
        params.t_m,
    );
    Ok(PolaritonBasis {
        omega_minus,
        omega_plus,
        theta,
        g_minus,
        g_plus,
        kappa_minus,
        kappa_plus,
        n_minus,
        n_plus,
        factors,
    })
}

/// Coefficient matrix 𝐀 of the a₁–b sector, H = ½·R†𝐀R + const.
///
/// The linear coupling is written as +G₁(a₁+a₁†)(b+b†), i.e. in the gauge
/// b → −b of the linearized Hamiltonian. The relabeling only flips the
/// sign of the phonon quadratures and leaves every polariton quantity
/// unchanged.
pub fn quadratic_form(delta1: f64, omega_m: f64, g1: f64) -> [[f64; 4]; 4] {
    [
        [delta1, 0.0, g1, g1],
        [0.0, delta1, g1, g1],
        [g1, g1, omega_m, 0.0],
        [g1, g1, 0.0, omega_m],
    ]
}

/// Mᵀ𝐀M: coefficients of the quadratic form in the polariton basis.
pub fn transformed_form(delta1: f64, omega_m: f64, g1: f64, f: &BogoliubovFactors) -> [[f64; 4]; 4] {
    let a = quadratic_form(delta1, omega_m, g1);
    let m = f.matrix();
    let mut am = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            am[i][j] = (0..4).map(|k| a[i][k] * m[k][j]).sum();
        }
    }
    let mut out = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            out[i][j] = (0..4).map(|k| m[k][i] * am[k][j]).sum();
        }
    }
    out
}

/// Largest deviation of Mᵀ𝐀M from diag(ω₋, ω₋, ω₊, ω₊).
pub fn diagonalization_residual(
    delta1: f64,
    omega_m: f64,
    g1: f64,
    basis: &PolaritonBasis,
) -> f64 {
    let k = transformed_form(delta1, omega_m, g1, &basis.factors);
    let target = [
        basis.omega_minus,
        basis.omega_minus,
        basis.omega_plus,
        basis.omega_plus,
    ];
    let mut worst: f64 = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            let want = if i == j { target[i] } else { 0.0 };
            worst = worst.max((k[i][j] - want).abs());
        }
    }
    worst
}

/// Deviations of the bosonic commutator identities implied by the factors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CommutatorReport {
    pub c_identity: f64,
    pub d_identity: f64,
    pub e_identity: f64,
    pub f_identity: f64,
    pub minus_mode: f64,
    pub plus_mode: f64,
    pub cross: f64,
}

impl CommutatorReport {
    pub fn max(&self) -> f64 {
        [
            self.c_identity,
            self.d_identity,
            self.e_identity,
            self.f_identity,
            self.minus_mode,
            self.plus_mode,
            self.cross,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

pub fn commutator_identities(f: &BogoliubovFactors, theta: f64) -> CommutatorReport {
    let (s, c) = theta.sin_cos();
    let sq = |p: f64, m: f64| p * p - m * m;
    CommutatorReport {
        c_identity: (sq(f.c_plus, f.c_minus) - c * c).abs(),
        d_identity: (sq(f.d_plus, f.d_minus) - s * s).abs(),
        e_identity: (sq(f.e_plus, f.e_minus) - s * s).abs(),
        f_identity: (sq(f.f_plus, f.f_minus) - c * c).abs(),
        minus_mode: (sq(f.c_plus, f.c_minus) + sq(f.e_plus, f.e_minus) - 1.0).abs(),
        plus_mode: (sq(f.d_plus, f.d_minus) + sq(f.f_plus, f.f_minus) - 1.0).abs(),
        cross: ((f.c_plus * f.d_plus - f.c_minus * f.d_minus)
            - (f.e_plus * f.f_plus - f.e_minus * f.f_minus))
            .abs(),
    }
}

/// Ratios G₁/g₁ and G₂/g₂ that justify dropping the nonlinear remainder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ValidityReport {
    pub ratio1: f64,
    pub ratio2: f64,
    pub threshold: f64,
    pub flagged1: bool,
    pub flagged2: bool,
}

impl ValidityReport {
    pub fn passes(&self) -> bool {
        !(self.flagged1 || self.flagged2)
    }
}

pub const DEFAULT_VALIDITY_THRESHOLD: f64 = 10.0;

pub fn validity_check(params: &SystemParams, shifted: &ShiftedParams, threshold: f64) -> ValidityReport {
    let ratio = |big: f64, small: f64| {
        if small > 0.0 {
            big / small
        } else if big > 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    };
    let ratio1 = ratio(shifted.g1_lin, params.g1);
    let ratio2 = ratio(shifted.g2_lin, params.g2);
    ValidityReport {
        ratio1,
        ratio2,
        threshold,
        flagged1: ratio1 < threshold,
        flagged2: ratio2 < threshold,
    }
}

/// θ on the branch opposite to `branch`, i.e. π/2 − θ.
pub fn complementary_angle(theta: f64) -> f64 {
    FRAC_PI_2 - theta
}

//! Photon back-reflection off a moving mass, non-relativistic kinematics.
//!
//! With `hbar = c = 1`, a photon of frequency `omega` meets a target of mass
//! `m` and velocity `v` and leaves with `omega'`, the target with `v'`:
//!
//! ```text
//! omega + m v^2 / 2 = omega' + m v'^2 / 2
//! m v - omega       = m v' + omega'
//! ```
//!
//! Writing `s = omega + omega'` the pair reduces to
//! `s^2 + 2 m (1 - v) s - 4 m omega = 0`, whose positive root fixes the
//! collision. The frequency shift `omega - omega'` expands to the Compton
//! recoil `2 omega^2 / m` plus the Doppler term `-2 v omega`.

use serde::Serialize;

use crate::error::{Error, Result};

/// Upper bound on `|v|` for the non-relativistic treatment.
pub const MAX_SPEED: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CollisionInput {
    pub omega_in: f64,
    pub v: f64,
    pub mass: f64,
}

impl CollisionInput {
    pub fn new(omega_in: f64, v: f64, mass: f64) -> Result<Self> {
        let input = CollisionInput { omega_in, v, mass };
        input.validate()?;
        Ok(input)
    }

    fn validate(&self) -> Result<()> {
        if !(self.omega_in.is_finite() && self.omega_in > 0.0) {
            return Err(Error::param(
                "omega",
                format!("{} must be positive", self.omega_in),
            ));
        }
        if !(self.mass.is_finite() && self.mass > 0.0) {
            return Err(Error::param(
                "mass",
                format!("{} must be positive", self.mass),
            ));
        }
        if !(self.v.is_finite() && self.v.abs() < MAX_SPEED) {
            return Err(Error::param(
                "v",
                format!(
                    "|{}| is outside the non-relativistic window |v| < {MAX_SPEED}",
                    self.v
                ),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CollisionResult {
    pub omega_out: f64,
    pub v_out: f64,
    /// `omega - omega'` from the exact solution.
    pub shift_exact: f64,
    /// `2 omega^2 / m - 2 v omega`.
    pub shift_expansion: f64,
    /// Infinite-mass limit `-2 v omega`.
    pub shift_doppler: f64,
}

/// Positive root `s = omega + omega'`, in a form free of cancellation for
/// large masses.
fn frequency_sum(omega: f64, v: f64, mass: f64) -> f64 {
    let b = 1.0 - v;
    4.0 * omega / (b + (b * b + 4.0 * omega / mass).sqrt())
}

/// Solves the conservation pair exactly.
pub fn collide_exact(input: &CollisionInput) -> Result<CollisionResult> {
    input.validate()?;
    let CollisionInput {
        omega_in: omega,
        v,
        mass,
    } = *input;
    // omega - omega' = 2 omega - s, rearranged so the small shift is not
    // obtained by subtracting two nearly equal frequencies
    let b = 1.0 - v;
    let root = (b * b + 4.0 * omega / mass).sqrt();
    let shift =
        2.0 * omega * (-v + (v * v - 2.0 * v + 4.0 * omega / mass) / (root + 1.0)) / (b + root);
    let s = frequency_sum(omega, v, mass);
    let omega_out = omega - shift;
    if !(omega_out > 0.0) {
        return Err(Error::NoSolution(format!(
            "outgoing frequency {omega_out} is not positive for omega = {omega}, v = {v}, m = {mass}"
        )));
    }
    Ok(CollisionResult {
        omega_out,
        v_out: v - s / mass,
        shift_exact: shift,
        shift_expansion: shift_expansion(input),
        shift_doppler: -2.0 * v * omega,
    })
}

/// Leading-order shift `2 omega^2 / m - 2 v omega`.
pub fn shift_expansion(input: &CollisionInput) -> f64 {
    let CollisionInput {
        omega_in: omega,
        v,
        mass,
    } = *input;
    2.0 * omega * omega / mass - 2.0 * v * omega
}

/// Recovers the target velocity from a measured frequency pair.
///
/// Solving the quadratic for `v` at fixed `s = omega_in + omega_out` gives
/// `v = 1 - (4 m omega_in - s^2) / (2 m s)`, exact for any `s > 0`.
pub fn infer_velocity(omega_in: f64, omega_out: f64, mass: f64) -> Result<f64> {
    if !(omega_in > 0.0 && omega_out > 0.0 && omega_in.is_finite() && omega_out.is_finite()) {
        return Err(Error::param(
            "omega",
            "frequencies must be positive and finite",
        ));
    }
    if !(mass.is_finite() && mass > 0.0) {
        return Err(Error::param("mass", format!("{mass} must be positive")));
    }
    let s = omega_in + omega_out;
    // 1 - 2 omega_in / s + s / (2 m), grouped to keep the small terms exact
    let v = (omega_out - omega_in) / s + s / (2.0 * mass);
    if !(v.abs() < MAX_SPEED) {
        return Err(Error::NoSolution(format!(
            "frequencies {omega_in} -> {omega_out} imply v = {v}, outside |v| < {MAX_SPEED}"
        )));
    }
    Ok(v)
}

/// Target momentum `m v` read out from a frequency shift.
pub fn readout_momentum(mass: f64, omega_in: f64, omega_out: f64) -> Result<f64> {
    Ok(mass * infer_velocity(omega_in, omega_out, mass)?)
}

/// Relative conservation residuals `(energy, momentum)` of a solution.
pub fn conservation_residuals(input: &CollisionInput, out: &CollisionResult) -> (f64, f64) {
    let CollisionInput {
        omega_in: w,
        v,
        mass: m,
    } = *input;
    let (w2, v2) = (out.omega_out, out.v_out);
    let e_terms = [w, 0.5 * m * v * v, w2, 0.5 * m * v2 * v2];
    let p_terms = [m * v, w, m * v2, w2];
    let scale = |t: &[f64]| t.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let energy = (w + 0.5 * m * v * v - w2 - 0.5 * m * v2 * v2).abs() / scale(&e_terms);
    let momentum = (m * v - w - m * v2 - w2).abs() / scale(&p_terms);
    (energy, momentum)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Bisection on the energy balance after eliminating `v'` through
    /// momentum conservation; independent of the closed-form root.
    fn oracle_shift(omega: f64, v: f64, m: f64) -> f64 {
        // s = omega + omega'; energy balance f(s) = 2 omega - s + s v - s^2 / (2m)
        let f = |s: f64| 2.0 * omega - s * (1.0 - v) - s * s / (2.0 * m);
        let (mut lo, mut hi) = (0.0, 4.0 * omega);
        assert!(f(lo) > 0.0 && f(hi) < 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        2.0 * omega - 0.5 * (lo + hi)
    }

    #[test]
    fn oracle_values_are_frozen() {
        // computed once with `oracle_shift`, kept here as literals
        assert!((oracle_shift(1.0, 0.0, 1e6) - 1.999_996_000_010e-6).abs() < 1e-16);
        assert!((oracle_shift(1.0, 1e-3, 1e9) + 2.001_999_995_990e-3).abs() < 1e-14);
    }

    #[test]
    fn collide_examples() {
        let r = collide_exact(&CollisionInput::new(1.0, 0.0, 1e6).unwrap()).unwrap();
        assert!(
            (r.shift_exact - 1.999_996_000_010e-6).abs() < 1e-16,
            "{}",
            r.shift_exact
        );
        let r = collide_exact(&CollisionInput::new(1.0, 0.0, 1e12).unwrap()).unwrap();
        assert!((r.omega_out - 1.0).abs() < 1e-11);
        let r = collide_exact(&CollisionInput::new(1.0, 1e-3, 1e9).unwrap()).unwrap();
        assert!((r.shift_exact - oracle_shift(1.0, 1e-3, 1e9)).abs() < 1e-12);
        assert!((r.shift_exact + 2e-3).abs() < 3e-6);
    }

    #[test]
    fn expansion_examples() {
        let e = shift_expansion(&CollisionInput::new(1.0, 0.0, 1e6).unwrap());
        assert!((e - 2e-6).abs() < 1e-20);
        let e = shift_expansion(&CollisionInput::new(1.0, 1e-3, 1e9).unwrap());
        assert!((e - (-2e-3 + 2e-9)).abs() < 1e-18);
    }

    #[test]
    fn invalid_inputs() {
        assert!(CollisionInput::new(0.0, 0.0, 1.0).is_err());
        assert!(CollisionInput::new(1.0, 0.2, 1.0).is_err());
        assert!(CollisionInput::new(1.0, 0.0, -1.0).is_err());
        assert!(infer_velocity(1.0, 2.0, 1e9).is_err());
        assert!(infer_velocity(-1.0, 1.0, 1e9).is_err());
    }

    #[test]
    fn inference_examples() {
        let m = 1e9;
        let r = collide_exact(&CollisionInput::new(1.0, 5e-4, m).unwrap()).unwrap();
        let v = infer_velocity(1.0, r.omega_out, m).unwrap();
        assert!((v - 5e-4).abs() < 1e-12);
        assert!(infer_velocity(1.0, 1.0, 1e300).unwrap().abs() < 1e-290);

        // finite-difference sensitivity: dv / d omega' = 1 / (2 omega) to leading order
        let base = infer_velocity(1.0, r.omega_out, m).unwrap();
        let bumped = infer_velocity(1.0, r.omega_out + 1e-9, m).unwrap();
        assert!(((bumped - base) - 0.5e-9).abs() < 1e-12);
    }

    #[test]
    fn readout_examples() {
        let m = 1e9;
        let r = collide_exact(&CollisionInput::new(1.0, 1e-3, m).unwrap()).unwrap();
        let k = readout_momentum(m, 1.0, r.omega_out).unwrap();
        assert!((k - 1e6).abs() / 1e6 < 1e-3);
        let r0 = collide_exact(&CollisionInput::new(1.0, 0.0, m).unwrap()).unwrap();
        assert!(readout_momentum(m, 1.0, r0.omega_out).unwrap().abs() < 1e-3);

        // kick of delta between two readouts
        let (v0, delta) = (2e-4, 5e4);
        let before = collide_exact(&CollisionInput::new(0.5, v0, m).unwrap()).unwrap();
        let after = collide_exact(&CollisionInput::new(0.5, v0 + delta / m, m).unwrap()).unwrap();
        let k0 = readout_momentum(m, 0.5, before.omega_out).unwrap();
        let k1 = readout_momentum(m, 0.5, after.omega_out).unwrap();
        assert!(((k1 - k0) - delta).abs() / delta < 1e-6);
    }
}

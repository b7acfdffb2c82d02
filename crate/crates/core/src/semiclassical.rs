//! Closed-form results for the classically controlled beam splitter.
//!
//! With the mechanics replaced by a classical amplitude the two cavities obey
//! the linear Langevin equations
//!
//! ```text
//! da1/dt = -i ḡ a2 - κ/2 a1 + √κ a1,in
//! da2/dt = -i ḡ a1 - κ/2 a2 + √κ a2,in
//! ```
//!
//! with the boundary condition `a_out = √κ a - a_in`. Everything here assumes
//! symmetric damping `κ1 = κ2 = κ` and exponentially decaying single-photon
//! pulses of bandwidth `γ`. Closed forms written in terms of a coupling `g` in
//! the literature take the effective coupling `ḡ` here; only `gbar` is read.

use crate::error::{Error, Result};
use crate::hilbert::C64;

/// Optional carrier frequencies; the rotating frame assumes `ω2 = ω1 + ωm`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Carrier {
    pub omega1: f64,
    pub omega2: f64,
    pub omega_m: f64,
}

/// Physical rates of the optomechanical beam splitter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    /// Bare trilinear coupling `g`.
    pub g: f64,
    /// Effective beam-splitter coupling `ḡ = g |β|`.
    pub gbar: f64,
    /// Mechanical coherent amplitude, if the mechanics is in a coherent state.
    pub beta: Option<C64>,
    pub kappa1: f64,
    pub kappa2: f64,
    /// Single-photon bandwidth.
    pub gamma: f64,
    /// Delay of the cavity-2 photon relative to the cavity-1 photon.
    pub tau: f64,
    pub carrier: Option<Carrier>,
}

impl SystemParams {
    /// Classical control: `g = 0`, only `ḡ` couples the cavities.
    pub fn semiclassical(kappa: f64, gamma: f64, gbar: f64) -> Self {
        Self {
            g: 0.0,
            gbar,
            beta: None,
            kappa1: kappa,
            kappa2: kappa,
            gamma,
            tau: 0.0,
            carrier: None,
        }
    }

    /// Mechanics in `|beta⟩` (beta real, positive) with `g = ḡ / beta`.
    pub fn with_beta(kappa: f64, gamma: f64, gbar: f64, beta: f64) -> Result<Self> {
        if !(beta > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "beta = {beta} must be positive to fix g = gbar / beta"
            )));
        }
        Ok(Self {
            g: gbar / beta,
            beta: Some(C64::from(beta)),
            ..Self::semiclassical(kappa, gamma, gbar)
        })
    }

    pub fn with_tau(mut self, tau: f64) -> Self {
        self.tau = tau;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("kappa1", self.kappa1), ("kappa2", self.kappa2), ("gamma", self.gamma)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidArgument(format!("{name} = {v} must be > 0")));
            }
        }
        for (name, v) in [("g", self.g), ("gbar", self.gbar)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidArgument(format!("{name} = {v} must be >= 0")));
            }
        }
        if !self.tau.is_finite() {
            return Err(Error::InvalidArgument("tau must be finite".into()));
        }
        if let Some(beta) = self.beta {
            if self.g > 0.0 {
                let want = self.g * beta.norm();
                if (want - self.gbar).abs() > 1e-9 * want.max(self.gbar) {
                    return Err(Error::InvalidArgument(format!(
                        "gbar = {} but g |beta| = {want}",
                        self.gbar
                    )));
                }
            }
        }
        if let Some(c) = self.carrier {
            let want = c.omega1 + c.omega_m;
            if (c.omega2 - want).abs() > 1e-9 * want.abs().max(c.omega2.abs()) {
                return Err(Error::InvalidArgument(format!(
                    "carrier off resonance: omega2 = {} but omega1 + omega_m = {want}",
                    c.omega2
                )));
            }
        }
        Ok(())
    }

    fn symmetric_kappa(&self) -> Result<f64> {
        self.validate()?;
        if self.kappa1 != self.kappa2 {
            return Err(Error::Unsupported(format!(
                "closed forms need kappa1 == kappa2 (got {} and {})",
                self.kappa1, self.kappa2
            )));
        }
        Ok(self.kappa1)
    }
}

/// Decaying-exponential single-photon envelope `ξ(t) = √γ e^{-γ(t-t0)/2}`, `t >= t0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseShape {
    pub gamma: f64,
    pub offset: f64,
}

impl PulseShape {
    pub fn new(gamma: f64, offset: f64) -> Self {
        Self { gamma, offset }
    }

    /// Causal envelope, zero before the onset.
    pub fn amplitude(&self, t: f64) -> f64 {
        if t < self.offset {
            0.0
        } else {
            self.tail(t)
        }
    }

    /// The exponential branch extended to all `t`; integrators use it inside
    /// steps that start at or after the onset.
    pub fn tail(&self, t: f64) -> f64 {
        self.gamma.sqrt() * (-0.5 * self.gamma * (t - self.offset)).exp()
    }

    /// Photon flux `|ξ(t)|²`.
    pub fn flux(&self, t: f64) -> f64 {
        let a = self.amplitude(t);
        a * a
    }

    /// `∫_t^∞ |ξ|²`, the probability that the photon has not yet arrived.
    pub fn remaining(&self, t: f64) -> f64 {
        if t <= self.offset {
            1.0
        } else {
            (-self.gamma * (t - self.offset)).exp()
        }
    }
}

/// Coefficients of the Langevin propagator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Propagator {
    pub a: C64,
    pub b: C64,
    pub c: C64,
    pub d: C64,
}

pub fn propagator_coeffs(t: f64, p: &SystemParams) -> Result<Propagator> {
    let kappa = p.symmetric_kappa()?;
    let (s, c) = (p.gbar * t).sin_cos();
    let decay = (-0.5 * kappa * t).exp();
    let grow = (0.5 * kappa * t).exp();
    Ok(Propagator {
        a: C64::from(decay * c),
        b: C64::new(0.0, -decay * s),
        c: C64::from(grow * c),
        d: C64::new(0.0, grow * s),
    })
}

/// Effective transmission `T` and reflection `R = 1 - T` for one photon.
pub fn transmission_reflection(p: &SystemParams) -> Result<(f64, f64)> {
    let k = p.symmetric_kappa()?;
    let (g, gm) = (p.gbar, p.gamma);
    let g2 = g * g;
    let t = 8.0 * k * g2 * (gm + 2.0 * k) / ((4.0 * g2 + k * k) * (4.0 * g2 + (gm + k).powi(2)));
    Ok((t, 1.0 - t))
}

fn mz_amplitude(p: &SystemParams) -> Result<f64> {
    let k = p.symmetric_kappa()?;
    let (g, gm) = (p.gbar, p.gamma);
    let g2 = g * g;
    Ok(4.0 * k * g * (4.0 * g2 - k * (k + gm)) / ((4.0 * g2 + k * k) * (4.0 * g2 + (k + gm).powi(2))))
}

/// Probability of a count at the upper MZ detector, integrated over time.
pub fn mz_pu(phi: f64, p: &SystemParams) -> Result<f64> {
    Ok(mz_amplitude(p)? * phi.sin() + 0.5)
}

/// Fringe visibility of the MZ interferometer.
pub fn mz_visibility(p: &SystemParams) -> Result<f64> {
    // P_u = 1/2 + A sin φ, so (max - min)/(max + min) = 2|A|
    Ok(2.0 * mz_amplitude(p)?.abs())
}

/// Polynomial constants of the closed-form joint detection probability.
#[derive(Debug, Clone, Copy)]
struct HomConstants {
    a: f64,
    b: f64,
    c: f64,
    kappa: f64,
    gamma: f64,
    g: f64,
}

impl HomConstants {
    fn new(p: &SystemParams) -> Result<Self> {
        let k = p.symmetric_kappa()?;
        let (g, gm) = (p.gbar, p.gamma);
        let (g2, k2, gm2) = (g * g, k * k, gm * gm);
        let g4 = g2 * g2;
        let a = (4.0 * g2 + k2).powi(2) * (16.0 * g4 + (gm2 - k2).powi(2) + 8.0 * g2 * (gm2 + k2)).powi(2);
        let b = (4.0 * g2 + (gm - k).powi(2)).powi(2)
            * (256.0 * g4 * g4
                + k2 * k2 * (gm + k).powi(4)
                + 8.0 * g2 * (gm2 - 2.0 * k2) * (16.0 * g4 + k2 * (gm + k).powi(2))
                + 16.0 * g4 * (gm2 * gm2 + 2.0 * gm2 * k2 + 20.0 * gm * k2 * k + 22.0 * k2 * k2));
        let c = -32.0 * g2 * k2 * (4.0 * g2 + gm2 - k2).powi(2) * (4.0 * g2 + k2).powi(2);
        Ok(Self {
            a,
            b,
            c,
            kappa: k,
            gamma: gm,
            g,
        })
    }

    fn f(&self, dtau: f64) -> f64 {
        let (g, k, gm) = (self.g, self.kappa, self.gamma);
        let (s, c) = (g * dtau).sin_cos();
        k * (-12.0 * g * g - gm * gm + k * k) * c + 2.0 * g * (4.0 * g * g + gm * gm - 3.0 * k * k) * s
    }

    fn g2(&self, dtau: f64) -> f64 {
        let (g, k, gm) = (self.g, self.kappa, self.gamma);
        let f = self.f(dtau);
        let d = -32.0 * g * g * gm * gm * k * k * f * f;
        let e = -64.0 * g * g * gm * k * k * (4.0 * g * g + gm * gm - k * k) * (4.0 * g * g + k * k) * f;
        // The overall e^{-3(κ+γ)δτ/2} prefactor is folded into each term. The
        // C term decays as e^{-γ δτ}: it is the squared overlap of the two
        // directly reflected pulse tails.
        (self.b + self.c * (-gm * dtau).exp() + d * (-k * dtau).exp() + e * (-0.5 * (k + gm) * dtau).exp()) / self.a
    }
}

/// Joint detection probability `G²(δτ)` for one photon per cavity, delay `|δτ|`.
pub fn hom_g2(dtau: f64, p: &SystemParams) -> Result<f64> {
    if !dtau.is_finite() {
        return Err(Error::InvalidArgument("delay must be finite".into()));
    }
    Ok(HomConstants::new(p)?.g2(dtau.abs()))
}

/// `G²(δτ → ∞) = B / A`, the distinguishable-photon coincidence probability.
pub fn hom_g2_limit(p: &SystemParams) -> Result<f64> {
    let k = HomConstants::new(p)?;
    Ok(k.b / k.a)
}

/// HOM visibility `(G²(∞) - G²(0)) / (G²(∞) + G²(0))`.
pub fn hom_visibility(p: &SystemParams) -> Result<f64> {
    let far = hom_g2_limit(p)?;
    let zero = hom_g2(0.0, p)?;
    Ok((far - zero) / (far + zero))
}

/// Bisection for `κ` in `[lo, hi]` such that `T(κ) = target` at fixed `ḡ`, `γ`.
pub fn solve_kappa_for_transmission(target: f64, gbar: f64, gamma: f64, lo: f64, hi: f64) -> Result<f64> {
    let f = |k: f64| -> Result<f64> {
        Ok(transmission_reflection(&SystemParams::semiclassical(k, gamma, gbar))?.0 - target)
    };
    let (mut a, mut b) = (lo, hi);
    let (mut fa, fb) = (f(a)?, f(b)?);
    if fa * fb > 0.0 {
        return Err(Error::InvalidArgument(format!(
            "T - {target} does not change sign on [{lo}, {hi}]"
        )));
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        let fm = f(m)?;
        if fm == 0.0 || (b - a) < 1e-15 * m {
            return Ok(m);
        }
        if fa * fm < 0.0 {
            b = m;
        } else {
            a = m;
            fa = fm;
        }
    }
    Ok(0.5 * (a + b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn workhorse() -> SystemParams {
        SystemParams::semiclassical(1.0, 1.0, 1.0 / 3.0)
    }

    #[test]
    fn propagator_values() {
        let p = workhorse();
        let z = propagator_coeffs(0.0, &p).unwrap();
        assert_eq!(
            (z.a, z.b, z.c, z.d),
            (C64::from(1.0), C64::from(0.0), C64::from(1.0), C64::from(0.0))
        );
        let q = propagator_coeffs(2.7, &p).unwrap();
        assert!((q.a * q.c + q.b * q.d - 1.0).norm() < 1e-12);

        let p2 = SystemParams::semiclassical(1.0, 1.0, FRAC_PI_2 / 2.0);
        let r = propagator_coeffs(2.0, &p2).unwrap();
        assert!(r.a.norm() < 1e-15);
        assert!((r.b - C64::new(0.0, -(-1f64).exp())).norm() < 1e-15);
    }

    #[test]
    fn asymmetric_damping_is_rejected() {
        let mut p = workhorse();
        p.kappa2 = 2.0;
        assert!(matches!(propagator_coeffs(1.0, &p), Err(Error::Unsupported(_))));
        assert!(matches!(transmission_reflection(&p), Err(Error::Unsupported(_))));
    }

    #[test]
    fn transmission_points() {
        let (t, r) = transmission_reflection(&workhorse()).unwrap();
        assert!((t - 27.0 / 65.0).abs() < 1e-12);
        assert_eq!(t + r, 1.0);
        let (t0, r0) = transmission_reflection(&SystemParams::semiclassical(1.0, 1.0, 0.0)).unwrap();
        assert_eq!((t0, r0), (0.0, 1.0));
        let (t9, _) = transmission_reflection(&SystemParams::semiclassical(5.0, 1.0, 1.2)).unwrap();
        assert!((t9 - 0.493).abs() < 5e-4, "T = {t9}");
    }

    #[test]
    fn mz_points() {
        let p = workhorse();
        assert_eq!(mz_pu(0.0, &p).unwrap(), 0.5);
        assert!((mz_pu(FRAC_PI_2, &p).unwrap() - (0.5 - 168.0 / 520.0)).abs() < 1e-12);
        for phi in [0.1, 0.7, 2.0, 3.0] {
            assert!((mz_pu(phi, &p).unwrap() + mz_pu(-phi, &p).unwrap() - 1.0).abs() < 1e-14);
        }
        assert!((mz_visibility(&p).unwrap() - 42.0 / 65.0).abs() < 1e-12);
        let v9 = mz_visibility(&SystemParams::semiclassical(5.0, 1.0, 1.2)).unwrap();
        assert!((v9 - 0.906).abs() < 5e-3, "v = {v9}");
        assert_eq!(mz_visibility(&SystemParams::semiclassical(1.0, 1.0, 0.0)).unwrap(), 0.0);
    }

    #[test]
    fn mz_visibility_is_fringe_swing() {
        for (k, gm, g) in [(1.0, 1.0, 1.0 / 3.0), (5.0, 1.0, 1.2), (0.3, 2.0, 4.0)] {
            let p = SystemParams::semiclassical(k, gm, g);
            let (mut hi, mut lo) = (f64::MIN, f64::MAX);
            for i in 0..=3600 {
                let v = mz_pu(2.0 * PI * i as f64 / 3600.0, &p).unwrap();
                hi = hi.max(v);
                lo = lo.min(v);
            }
            assert!(((hi - lo) / (hi + lo) - mz_visibility(&p).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn hom_limits() {
        let p = workhorse();
        let far = hom_g2_limit(&p).unwrap();
        // distinguishable photons: R² + T²
        assert!((far - 2173.0 / 4225.0).abs() < 1e-12);
        assert!((hom_g2(50.0, &p).unwrap() - far).abs() <= 1e-6 * far);
        assert!((hom_g2(0.0, &p).unwrap() - 1291.0 / 4225.0).abs() < 1e-12);
        assert_eq!(hom_g2(-2.0, &p).unwrap(), hom_g2(2.0, &p).unwrap());
        for i in 0..200 {
            assert!(hom_g2(20.0 * i as f64 / 199.0, &p).unwrap() >= 0.0);
        }
    }

    #[test]
    fn hom_visibility_values() {
        let p = workhorse();
        let v = hom_visibility(&p).unwrap();
        assert!((v - 882.0 / 3464.0).abs() < 1e-12);
        let far = hom_g2_limit(&p).unwrap();
        let via_delay = (hom_g2(50.0, &p).unwrap() - hom_g2(0.0, &p).unwrap())
            / (hom_g2(50.0, &p).unwrap() + hom_g2(0.0, &p).unwrap());
        assert!((via_delay - v).abs() < 1e-6);
        assert!(far > 0.0);
        let weak = SystemParams::semiclassical(1.0, 1.0, 1e-7);
        assert!(hom_visibility(&weak).unwrap().abs() < 1e-6);
    }

    #[test]
    fn pulse_normalized() {
        let p = PulseShape::new(1.3, 0.4);
        assert_eq!(p.amplitude(0.39), 0.0);
        // composite Simpson on [t0, t0 + 60/γ]
        let n = 60_000;
        let h = 60.0 / 1.3 / n as f64;
        let mut s = 0.0;
        for i in 0..=n {
            let w = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            s += w * p.flux(0.4 + i as f64 * h);
        }
        assert!((s * h / 3.0 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn params_validation() {
        assert!(workhorse().validate().is_ok());
        let mut p = workhorse();
        p.kappa1 = -1.0;
        assert!(p.validate().is_err());
        let q = SystemParams::with_beta(1.0, 1.0, 1.0 / 3.0, 8.0).unwrap();
        assert!((q.g - 1.0 / 24.0).abs() < 1e-15);
        assert!(q.validate().is_ok());
        let mut bad = q;
        bad.gbar = 0.5;
        assert!(bad.validate().is_err());
        let mut c = workhorse();
        c.carrier = Some(Carrier {
            omega1: 10.0,
            omega2: 12.0,
            omega_m: 2.0,
        });
        assert!(c.validate().is_ok());
        c.carrier = Some(Carrier {
            omega1: 10.0,
            omega2: 12.5,
            omega_m: 2.0,
        });
        assert!(c.validate().is_err());
    }

    #[test]
    fn transmission_stays_in_unit_interval() {
        for i in 0..50 {
            for j in 0..50 {
                let k = 0.1 * (100f64).powf(i as f64 / 49.0);
                let g = 0.1 * (100f64).powf(j as f64 / 49.0);
                let (t, r) = transmission_reflection(&SystemParams::semiclassical(k, 1.0, g)).unwrap();
                assert!((0.0..=1.0).contains(&t));
                assert_eq!(t + r, 1.0);
            }
        }
    }
}

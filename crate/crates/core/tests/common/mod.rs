//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use num_complex::Complex64 as C64;

/// Cavity amplitudes `(a₁, a₂)` driven by `ξ(t) = √γ e^{-γt/2}` into cavity 1
/// from `t = 0`, for `ȧ = M a + √κ ξ e₁` with `M = [[-κ/2, -iḡ], [-iḡ, -κ/2]]`.
/// Plain RK4 on the grid `t_k = k h`.
pub fn single_photon_response(gbar: f64, kappa: f64, gamma: f64, h: f64, n: usize) -> Vec<[C64; 2]> {
    let mi = C64::new(0.0, -gbar);
    let rhs = |t: f64, a: [C64; 2]| -> [C64; 2] {
        let drive = (kappa * gamma).sqrt() * (-0.5 * gamma * t).exp();
        [
            a[0] * (-0.5 * kappa) + mi * a[1] + drive,
            a[1] * (-0.5 * kappa) + mi * a[0],
        ]
    };
    let add = |a: [C64; 2], k: [C64; 2], s: f64| [a[0] + k[0] * s, a[1] + k[1] * s];
    let mut out = Vec::with_capacity(n + 1);
    let mut a = [C64::new(0.0, 0.0); 2];
    out.push(a);
    for k in 0..n {
        let t = k as f64 * h;
        let k1 = rhs(t, a);
        let k2 = rhs(t + 0.5 * h, add(a, k1, 0.5 * h));
        let k3 = rhs(t + 0.5 * h, add(a, k2, 0.5 * h));
        let k4 = rhs(t + h, add(a, k3, h));
        a = [
            a[0] + (k1[0] + k2[0] * 2.0 + k3[0] * 2.0 + k4[0]) * (h / 6.0),
            a[1] + (k1[1] + k2[1] * 2.0 + k3[1] * 2.0 + k4[1]) * (h / 6.0),
        ];
        out.push(a);
    }
    out
}

/// Composite trapezoid rule on a uniform grid.
pub fn trapezoid(values: &[C64], h: f64) -> C64 {
    if values.len() < 2 {
        return C64::new(0.0, 0.0);
    }
    let inner: C64 = values[1..values.len() - 1].iter().sum();
    (inner + (values[0] + values[values.len() - 1]) * 0.5) * h
}

/// Normalised HOM coincidence probability for photon 2 delayed by `tau`,
/// from the two-photon detection amplitudes built out of the single-photon
/// output mode functions
///
/// `ψ₁ = √κ a₁ - ξ`, `ψ₂ = √κ a₂` (photon entering cavity 1) and
/// `φ₁ = √κ a₁'`, `φ₂ = √κ a₂' - η` (photon entering cavity 2 at `tau`):
///
/// `G² = [∫|ψ₁|²∫|φ₂|² + ∫|φ₁|²∫|ψ₂|² + 2Re(∫ψ₁*φ₁ ∫φ₂*ψ₂)] / [∫(|ψ₁|²+|φ₁|²) ∫(|ψ₂|²+|φ₂|²)]`.
///
/// `tau` must be a multiple of `h`.
pub fn hom_g2_quadrature(tau: f64, gbar: f64, kappa: f64, gamma: f64, h: f64, horizon: f64) -> f64 {
    let tau = tau.abs();
    let shift = (tau / h).round() as usize;
    assert!((shift as f64 * h - tau).abs() < 1e-9, "tau must lie on the grid");
    let n = ((horizon + tau) / h).round() as usize;
    let resp = single_photon_response(gbar, kappa, gamma, h, n);
    let sk = kappa.sqrt();
    let xi = |k: usize| C64::new(gamma.sqrt() * (-0.5 * gamma * k as f64 * h).exp(), 0.0);
    let psi1: Vec<C64> = (0..=n).map(|k| resp[k][0] * sk - xi(k)).collect();
    let psi2: Vec<C64> = (0..=n).map(|k| resp[k][1] * sk).collect();
    // the delayed photon sees the mirror image of the same response
    let phi1: Vec<C64> = (shift..=n).map(|k| resp[k - shift][1] * sk).collect();
    let phi2: Vec<C64> = (shift..=n).map(|k| resp[k - shift][0] * sk - xi(k - shift)).collect();
    let norm = |f: &[C64]| trapezoid(&f.iter().map(|z| C64::new(z.norm_sqr(), 0.0)).collect::<Vec<_>>(), h).re;
    let cross = |f: &[C64], g: &[C64]| trapezoid(&f.iter().zip(g).map(|(a, b)| a.conj() * b).collect::<Vec<_>>(), h);
    let (p1, p2) = (norm(&psi1), norm(&psi2));
    let (f1, f2) = (norm(&phi1), norm(&phi2));
    // φ vanishes before the delayed photon arrives
    let c1 = cross(&psi1[shift..], &phi1);
    let c2 = cross(&phi2, &psi2[shift..]);
    (p1 * f2 + f1 * p2 + 2.0 * (c1 * c2).re) / ((p1 + f1) * (p2 + f2))
}

/// `⟨a†a⟩(t)` of an uncoupled cavity fed by `ξ(t) = √γ e^{-γt/2}`:
/// `|2√(κγ)/(γ-κ) (e^{-κt/2} - e^{-γt/2})|²`, and `κγ t² e^{-κt}` at `γ = κ`.
pub fn filtered_population(kappa: f64, gamma: f64, t: f64) -> f64 {
    if (kappa - gamma).abs() < 1e-12 {
        kappa * gamma * t * t * (-kappa * t).exp()
    } else {
        let amp =
            (kappa * gamma).sqrt() / (gamma - kappa) * ((-0.5 * kappa * t).exp() - (-0.5 * gamma * t).exp()) * 2.0;
        amp * amp
    }
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

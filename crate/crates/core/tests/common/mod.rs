#![allow(dead_code)]

use illiquid_core::{IntensityProfile, MarketModel, UtilitySpec};

pub fn standard_model() -> MarketModel {
    MarketModel::constant(1.0, 0.05, 0.2).unwrap()
}

pub fn unit_profile() -> IntensityProfile {
    IntensityProfile::power_blowup(1.0, 1.0, 1.0).unwrap()
}

pub fn sqrt_utility() -> UtilitySpec {
    UtilitySpec::power(0.5).unwrap()
}

/// Adaptive Simpson quadrature with Richardson correction.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn step<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, 40)
}

pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// `E[g(ξ)]`, `ξ ~ N(0,1)`, by adaptive Simpson on `[−12, 12]` split at zero.
pub fn normal_expectation<F: Fn(f64) -> f64>(g: F, tol: f64) -> f64 {
    let h = |z: f64| g(z) * normal_pdf(z);
    adaptive_simpson(&h, -12.0, 0.0, tol) + adaptive_simpson(&h, 0.0, 12.0, tol)
}

/// Standard normal CDF by integrating the density.
pub fn normal_cdf(z: f64) -> f64 {
    if z >= 0.0 {
        0.5 + adaptive_simpson(&normal_pdf, 0.0, z.min(12.0), 1e-13)
    } else {
        0.5 - adaptive_simpson(&normal_pdf, 0.0, (-z).min(12.0), 1e-13)
    }
}

/// Kolmogorov–Smirnov statistic of `samples` against `cdf`.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &mut [f64], cdf: F) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let c = cdf(x);
            (c - i as f64 / n).abs().max(((i + 1) as f64 / n - c).abs())
        })
        .fold(0.0, f64::max)
}

/// Asymptotic KS critical value at the 1% level.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.628 / (n as f64).sqrt()
}

/// Gauss–Hermite nodes for `E[g(ξ)]` computed with the Golub–Welsch-free
/// Newton iteration on Hermite polynomials (independent of the library rule).
pub fn hermite_rule(n: usize) -> Vec<(f64, f64)> {
    // physicists' Hermite roots by Newton from asymptotic initial guesses
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(n);
    let mut z = 0.0f64;
    for i in 0..n.div_ceil(2) {
        z = match i {
            0 => (2.0 * n as f64 + 1.0).sqrt() - 1.85575 * (2.0 * n as f64 + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * (n as f64).powf(0.426) / z,
            2 => 1.86 * z - 0.86 * out[0].0,
            3 => 1.91 * z - 0.91 * out[1].0,
            _ => 2.0 * z - out[i - 2].0,
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = std::f64::consts::PI.powf(-0.25);
            let mut p2 = 0.0;
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                p1 = z * (2.0 / j as f64).sqrt() * p2 - ((j - 1) as f64 / j as f64).sqrt() * p3;
            }
            pp = (2.0 * n as f64).sqrt() * p2;
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        out.push((z, 2.0 / (pp * pp)));
    }
    let mut rule: Vec<(f64, f64)> = Vec::with_capacity(n);
    for &(x, w) in &out {
        rule.push((x, w));
        if x.abs() > 1e-14 {
            rule.push((-x, w));
        }
    }
    rule.truncate(n);
    let sqrt_pi = std::f64::consts::PI.sqrt();
    rule.into_iter().map(|(x, w)| (std::f64::consts::SQRT_2 * x, w / sqrt_pi)).collect()
}

/// Gauss–Legendre on `[a, b]` by Newton iteration on Legendre polynomials.
pub fn legendre_rule(n: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((0.5 * (a + b) + 0.5 * (b - a) * x, 0.5 * (b - a) * w));
    }
    out
}

/// `E[(1 + πZ_{t,s})^γ]` for constant coefficients, by an independent Hermite rule.
pub fn power_moment(b: f64, c: f64, t: f64, s: f64, pi: f64, gamma: f64, rule: &[(f64, f64)]) -> f64 {
    let var = c * c * (s - t);
    let mean = (b - 0.5 * c * c) * (s - t);
    rule.iter().map(|&(xi, w)| w * (1.0 + pi * (mean + var.sqrt() * xi).exp_m1()).powf(gamma)).sum()
}

/// Two-stage brute force: outer π-grid × time rule × inner π-grid × time rule × return rule.
pub fn two_stage_brute_force() -> f64 {
    let (b, c, gamma) = (0.05, 0.2, 0.5);
    let gh = hermite_rule(30);
    let pis: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
    // arrivals after s are uniform on (s, 1) for λ(t) = 1/(1 − t)
    let phi1 = |s: f64| -> f64 {
        let gl = legendre_rule(40, s, 1.0);
        pis.iter()
            .map(|&pi| gl.iter().map(|&(s2, w)| w * power_moment(b, c, s, s2, pi, gamma, &gh)).sum::<f64>() / (1.0 - s))
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let gl = legendre_rule(40, 0.0, 1.0);
    let phi_at: Vec<f64> = gl.iter().map(|&(s, _)| phi1(s)).collect();
    let u1 = 2.0;
    pis.iter()
        .map(|&pi| {
            u1 * gl
                .iter()
                .zip(&phi_at)
                .map(|(&(s, w), &p)| w * p * power_moment(b, c, 0.0, s, pi, gamma, &gh))
                .sum::<f64>()
        })
        .fold(f64::NEG_INFINITY, f64::max)
}


/// Largest `|Λ⁻¹(Λ(t)) − t| / T` over a grid of times for several profiles.
pub fn arrival_round_trip_error(profiles: &[IntensityProfile]) -> f64 {
    let mut worst = 0.0f64;
    for p in profiles {
        let horizon = p.horizon();
        for i in 0..200 {
            let t = horizon * i as f64 / 200.0 * 0.999_999;
            let back = p.inverse_cumulative(p.cumulative_intensity(t).unwrap()).unwrap();
            worst = worst.max((back - t).abs() / horizon);
        }
    }
    worst
}

/// `|∫ density − 1|`: adaptive Simpson in `ln(T − s)` down to `T − s = 10⁻⁶T`,
/// plus the closed-form mass beyond.
pub fn arrival_density_normalization_error(p: &IntensityProfile, t: f64) -> f64 {
    let horizon = p.horizon();
    let r_min = 1e-6 * horizon;
    let r_max = horizon - t;
    let s_max = horizon - r_min;
    let tail = (-(p.cumulative_intensity(s_max).unwrap() - p.cumulative_intensity(t).unwrap())).exp();
    let g = |lr: f64| {
        let r = lr.exp();
        let s = horizon - r;
        if s <= t || s >= horizon {
            return 0.0;
        }
        p.arrival_density(t, s).unwrap() * r
    };
    let (a, b) = (r_min.ln(), r_max.ln());
    let panels = 200;
    let h = (b - a) / panels as f64;
    let body: f64 = (0..panels).map(|k| adaptive_simpson(&g, a + k as f64 * h, a + (k + 1) as f64 * h, 1e-16)).sum();
    (body + tail - 1.0).abs()
}

/// KS statistic of 10⁴ sampled next arrivals after `t` against the CDF.
pub fn arrival_ks(p: &IntensityProfile, t: f64, seed: u64) -> f64 {
    let mut rng = illiquid_core::rng::path_rng(seed, 0);
    let mut draws: Vec<f64> = (0..10_000).map(|_| p.sample_next_arrival(t, &mut rng).unwrap()).collect();
    ks_statistic(&mut draws, |s| p.arrival_cdf(t, s).unwrap())
}

pub fn test_profiles() -> Vec<IntensityProfile> {
    vec![
        IntensityProfile::power_blowup(1.0, 1.0, 1.0).unwrap(),
        IntensityProfile::power_blowup(2.0, 0.5, 1.0).unwrap(),
        IntensityProfile::power_blowup(1.0, 1.0, 2.0).unwrap(),
        IntensityProfile::power_blowup(1.5, 2.0, 1.5).unwrap(),
        IntensityProfile::power_blowup(1.0, 1.0, 1.0).unwrap().scaled(8.0).unwrap(),
    ]
}

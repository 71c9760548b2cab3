//! Reference formulas written independently of the library, used as oracles.
#![allow(dead_code)]

use std::f64::consts::PI;

/// Which penalty a reference computation uses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    Entropy,
    /// KL to the cosine reference with this amplitude.
    Kl(f64),
    /// Squared distance to the cosine reference with this amplitude.
    L2(f64),
}

impl Family {
    pub fn spec(&self) -> String {
        match self {
            Family::Entropy => "entropy".into(),
            Family::Kl(a) => format!("kl:cosine:{a}"),
            Family::L2(a) => format!("l2:cosine:{a}"),
        }
    }

    pub fn zeta(&self) -> f64 {
        match self {
            Family::L2(_) => 2.0,
            _ => 1.0,
        }
    }
}

pub fn cosine_reference(amplitude: f64, x: &[f64], k: usize) -> Vec<f64> {
    let xbar: f64 = x.iter().sum::<f64>() / x.len() as f64;
    let raw: Vec<f64> = (0..k)
        .map(|i| 1.0 + amplitude * (2.0 * PI * (xbar + i as f64 / k as f64)).cos())
        .collect();
    raw.iter().map(|r| r / k as f64).collect()
}

fn plogp(v: f64) -> f64 {
    if v == 0.0 {
        0.0
    } else {
        v * v.ln()
    }
}

pub fn rho(family: Family, p: &[f64], x: &[f64]) -> f64 {
    let k = p.len();
    match family {
        Family::Entropy => p.iter().map(|&v| plogp(v)).sum(),
        Family::Kl(a) => {
            let q = cosine_reference(a, x, k);
            p.iter()
                .zip(&q)
                .map(|(&pi, &qi)| if pi == 0.0 { 0.0 } else { pi * (pi / qi).ln() })
                .sum()
        }
        Family::L2(a) => {
            let q = cosine_reference(a, x, k);
            p.iter().zip(&q).map(|(pi, qi)| (pi - qi).powi(2)).sum()
        }
    }
}

pub fn rho_grad(family: Family, p: &[f64], x: &[f64]) -> Vec<f64> {
    let k = p.len();
    match family {
        Family::Entropy => p.iter().map(|v| 1.0 + v.ln()).collect(),
        Family::Kl(a) => {
            let q = cosine_reference(a, x, k);
            p.iter()
                .zip(&q)
                .map(|(v, qi)| 1.0 + (v / qi).ln())
                .collect()
        }
        Family::L2(a) => {
            let q = cosine_reference(a, x, k);
            p.iter().zip(&q).map(|(v, qi)| 2.0 * (v - qi)).collect()
        }
    }
}

/// `(z, c)` in the reduced form `ρ = H + ⟨p, z⟩ + c`.
pub fn reduction(family: Family, x: &[f64], k: usize) -> (Vec<f64>, f64) {
    match family {
        Family::Entropy => (vec![0.0; k], 0.0),
        Family::Kl(a) => (
            cosine_reference(a, x, k).iter().map(|q| -q.ln()).collect(),
            0.0,
        ),
        Family::L2(a) => {
            let q = cosine_reference(a, x, k);
            let c = q.iter().map(|v| v * v).sum();
            (q.iter().map(|v| -2.0 * v).collect(), c)
        }
    }
}

/// Euclidean projection by bisection on the threshold `τ` with
/// `Σ max(v_i − τ, 0) = 1`.
pub fn project_bisect(v: &[f64]) -> Vec<f64> {
    let mut lo = v.iter().copied().fold(f64::INFINITY, f64::min) - 1.0;
    let mut hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let mass: f64 = v.iter().map(|x| (x - mid).max(0.0)).sum();
        if mass > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let tau = 0.5 * (lo + hi);
    v.iter().map(|x| (x - tau).max(0.0)).collect()
}

/// Closed-form `∇ρ*(y)`.
pub fn conj_grad(family: Family, y: &[f64], x: &[f64]) -> Vec<f64> {
    let k = y.len();
    let tilt = |w: Vec<f64>| {
        let m = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = w.iter().map(|v| (v - m).exp()).collect();
        let z: f64 = e.iter().sum();
        e.into_iter().map(|v| v / z).collect::<Vec<f64>>()
    };
    match family {
        Family::Entropy => tilt(y.to_vec()),
        Family::Kl(a) => {
            let q = cosine_reference(a, x, k);
            tilt(y.iter().zip(&q).map(|(v, qi)| v + qi.ln()).collect())
        }
        Family::L2(a) => {
            let q = cosine_reference(a, x, k);
            project_bisect(
                &q.iter()
                    .zip(y)
                    .map(|(qi, v)| qi + v / 2.0)
                    .collect::<Vec<f64>>(),
            )
        }
    }
}

/// Closed-form `ρ*(y)`.
pub fn conj(family: Family, y: &[f64], x: &[f64]) -> f64 {
    match family {
        Family::Entropy | Family::Kl(_) => {
            let q = match family {
                Family::Kl(a) => cosine_reference(a, x, y.len()),
                _ => vec![1.0; y.len()],
            };
            let m = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            m + y
                .iter()
                .zip(&q)
                .map(|(v, qi)| qi * (v - m).exp())
                .sum::<f64>()
                .ln()
        }
        Family::L2(_) => {
            let p = conj_grad(family, y, x);
            p.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() - rho(family, &p, x)
        }
    }
}

/// Golden-section search of `t ↦ f(t, 1 − t)` on `[0, 1]`.
pub fn golden_two_arm(f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (0.0f64, 1.0f64);
    let eval = |t: f64| f(&[t, 1.0 - t]);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (eval(c), eval(d));
    for _ in 0..200 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = eval(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = eval(d);
        }
    }
    let t = 0.5 * (a + b);
    vec![t, 1.0 - t]
}

pub fn sup_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn norm2(a: &[f64]) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Random point of the simplex with every component at least `floor`.
pub fn random_simplex(rng: &mut impl rand::Rng, k: usize, floor: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..k)
        .map(|_| -rng.random::<f64>().max(1e-300).ln())
        .collect();
    let s: f64 = raw.iter().sum();
    raw.iter()
        .map(|r| floor + (1.0 - k as f64 * floor) * r / s)
        .collect()
}

//! Bessel, modified Bessel and Hankel functions of integer order and real argument.
//!
//! J_n is computed by Miller's backward recurrence normalized with
//! J_0 + 2 Σ J_2k = 1. Y_0 and Y_1 come from the Neumann expansion in J for
//! moderate arguments and from the Hankel asymptotic series for large ones;
//! higher orders follow by forward recurrence. K_0 and K_1 use the power series
//! for x <= 2 and Steed's continued fraction above.

use crate::error::{Error, Result};
use num_complex::Complex64;
use std::f64::consts::{FRAC_2_PI, PI};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const NEUMANN_LIMIT: f64 = 25.0;
const K_SERIES_LIMIT: f64 = 2.0;
const RESCALE: f64 = 1e250;

fn check_finite(x: f64, what: &str) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{what}: non-finite argument {x}")))
    }
}

fn check_positive(x: f64, what: &str) -> Result<()> {
    check_finite(x, what)?;
    if x > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("{what}: argument must be > 0, got {x}")))
    }
}

/// Starting order for the backward recurrence; generous enough for ~1e-16.
fn miller_start(nmax: usize, x: f64) -> usize {
    let m = (nmax as f64).max(x);
    let start = m + 20.0 + (40.0 * m).sqrt() + 0.5 * x.sqrt() * 5.0;
    let s = start.ceil() as usize;
    s + (s & 1)
}

/// J_0(x) .. J_nmax(x) in one pass. x must be >= 0.
fn j_values(nmax: usize, x: f64) -> Vec<f64> {
    let mut out = vec![0.0; nmax + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let start = miller_start(nmax, x);
    let mut jp1 = 0.0; // J_{k+1}
    let mut jk = 1e-300; // J_k
    let mut norm = 0.0;
    for k in (1..=start).rev() {
        let jm1 = 2.0 * k as f64 / x * jk - jp1;
        jp1 = jk;
        jk = jm1;
        // jk now holds J_{k-1}
        let km1 = k - 1;
        if km1 <= nmax {
            out[km1] = jk;
        }
        if km1 > 0 && km1 % 2 == 0 {
            norm += 2.0 * jk;
        }
        if jk.abs() > RESCALE {
            jk /= RESCALE;
            jp1 /= RESCALE;
            norm /= RESCALE;
            for v in out.iter_mut() {
                *v /= RESCALE;
            }
        }
    }
    norm += jk;
    for v in out.iter_mut() {
        *v /= norm;
    }
    out
}

/// Hankel asymptotic series for (J_nu, Y_nu), nu in {0, 1}, large x.
fn jy_asymptotic(nu: u32, x: f64) -> (f64, f64) {
    let mu = 4.0 * (nu * nu) as f64;
    let mut p = 1.0;
    let mut q = 0.0;
    let mut term = 1.0;
    let mut last = f64::INFINITY;
    for k in 1..60 {
        let odd = (2 * k - 1) as f64;
        term *= (mu - odd * odd) / (k as f64 * 8.0 * x);
        if term.abs() > last {
            break;
        }
        last = term.abs();
        // a_k / x^k alternates between Q and P with signs (-1)^floor(k/2)
        match k % 4 {
            1 => q += term,
            2 => p -= term,
            3 => q -= term,
            _ => p += term,
        }
        if term.abs() < 1e-17 {
            break;
        }
    }
    let chi = x - (0.5 * nu as f64 + 0.25) * PI;
    let amp = (FRAC_2_PI / x).sqrt();
    let (s, c) = chi.sin_cos();
    (amp * (p * c - q * s), amp * (p * s + q * c))
}

/// Y_0 and Y_1 from a J table that extends far enough for the Neumann sums.
fn y01_neumann(x: f64, j: &[f64]) -> (f64, f64) {
    let l = (0.5 * x).ln() + EULER_GAMMA;
    let mut s0 = 0.0;
    let mut s1 = 0.0;
    let mut k = 1;
    while 2 * k + 1 < j.len() {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        s0 += sign * j[2 * k] / k as f64;
        s1 += sign * (j[2 * k - 1] - j[2 * k + 1]) / k as f64;
        k += 1;
    }
    let y0 = FRAC_2_PI * l * j[0] - 2.0 * FRAC_2_PI * s0;
    let y1 = FRAC_2_PI * (l * j[1] - j[0] / x) + FRAC_2_PI * s1;
    (y0, y1)
}

/// Values of J_n and Y_n for n = 0..=nmax at x > 0.
#[derive(Debug, Clone)]
pub struct JyTable {
    pub x: f64,
    pub j: Vec<f64>,
    pub y: Vec<f64>,
}

impl JyTable {
    /// Builds J and Y up to order `nmax + 1`, so derivatives up to `nmax` are available.
    pub fn new(nmax: usize, x: f64) -> Result<Self> {
        check_positive(x, "bessel table")?;
        let top = nmax + 1;
        let (j, y0, y1) = if x <= NEUMANN_LIMIT {
            let full = j_values(top.max(miller_start(0, x)), x);
            let (y0, y1) = y01_neumann(x, &full);
            (full[..=top].to_vec(), y0, y1)
        } else {
            let full = j_values(top, x);
            let (_, y0) = jy_asymptotic(0, x);
            let (_, y1) = jy_asymptotic(1, x);
            (full, y0, y1)
        };
        let mut y = vec![0.0; top + 1];
        y[0] = y0;
        if top >= 1 {
            y[1] = y1;
        }
        for n in 1..top {
            y[n + 1] = 2.0 * n as f64 / x * y[n] - y[n - 1];
        }
        Ok(Self { x, j, y })
    }

    pub fn nmax(&self) -> usize {
        self.j.len() - 2
    }

    pub fn j(&self, n: usize) -> f64 {
        self.j[n]
    }

    pub fn y(&self, n: usize) -> f64 {
        self.y[n]
    }

    pub fn j_prime(&self, n: usize) -> f64 {
        if n == 0 {
            -self.j[1]
        } else {
            0.5 * (self.j[n - 1] - self.j[n + 1])
        }
    }

    pub fn y_prime(&self, n: usize) -> f64 {
        if n == 0 {
            -self.y[1]
        } else {
            0.5 * (self.y[n - 1] - self.y[n + 1])
        }
    }

    /// J_m for signed order.
    pub fn j_signed(&self, m: i32) -> f64 {
        sign_for(m) * self.j[m.unsigned_abs() as usize]
    }

    pub fn y_signed(&self, m: i32) -> f64 {
        sign_for(m) * self.y[m.unsigned_abs() as usize]
    }

    pub fn j_prime_signed(&self, m: i32) -> f64 {
        sign_for(m) * self.j_prime(m.unsigned_abs() as usize)
    }

    pub fn y_prime_signed(&self, m: i32) -> f64 {
        sign_for(m) * self.y_prime(m.unsigned_abs() as usize)
    }
}

/// (-1)^m for negative m, 1 otherwise.
fn sign_for(m: i32) -> f64 {
    if m < 0 && m % 2 != 0 {
        -1.0
    } else {
        1.0
    }
}

pub fn bessel_j(n: u32, x: f64) -> Result<f64> {
    check_finite(x, "bessel_j")?;
    if x < 0.0 {
        return Err(Error::Domain(format!("bessel_j: x must be >= 0, got {x}")));
    }
    Ok(j_values(n as usize + 1, x)[n as usize])
}

pub fn bessel_j_prime(n: u32, x: f64) -> Result<f64> {
    check_finite(x, "bessel_j_prime")?;
    if x < 0.0 {
        return Err(Error::Domain(format!("bessel_j_prime: x must be >= 0, got {x}")));
    }
    let j = j_values(n as usize + 1, x);
    Ok(if n == 0 {
        -j[1]
    } else {
        0.5 * (j[n as usize - 1] - j[n as usize + 1])
    })
}

pub fn bessel_y(n: u32, x: f64) -> Result<f64> {
    Ok(JyTable::new(n as usize, x)?.y(n as usize))
}

pub fn bessel_y_prime(n: u32, x: f64) -> Result<f64> {
    Ok(JyTable::new(n as usize, x)?.y_prime(n as usize))
}

/// I_n(x) by its power series; every term is positive so there is no cancellation.
pub fn bessel_i(n: u32, x: f64) -> Result<f64> {
    check_finite(x, "bessel_i")?;
    if x < 0.0 {
        return Err(Error::Domain(format!("bessel_i: x must be >= 0, got {x}")));
    }
    Ok(i_series(n, x))
}

fn i_series(n: u32, x: f64) -> f64 {
    let half = 0.5 * x;
    let mut term = 1.0;
    for k in 1..=n {
        term *= half / k as f64;
    }
    let mut sum = term;
    let q = half * half;
    let mut k = 1.0;
    loop {
        term *= q / (k * (k + n as f64));
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
        k += 1.0;
    }
    sum
}

pub fn bessel_i_prime(n: u32, x: f64) -> Result<f64> {
    check_finite(x, "bessel_i_prime")?;
    if x < 0.0 {
        return Err(Error::Domain(format!("bessel_i_prime: x must be >= 0, got {x}")));
    }
    Ok(if n == 0 {
        i_series(1, x)
    } else {
        0.5 * (i_series(n - 1, x) + i_series(n + 1, x))
    })
}

fn k01(x: f64) -> (f64, f64) {
    if x <= K_SERIES_LIMIT {
        let l = (0.5 * x).ln() + EULER_GAMMA;
        let q = 0.25 * x * x;
        let mut term = 1.0;
        let mut harmonic = 0.0;
        let mut sum = 0.0;
        let mut k = 1.0;
        loop {
            term *= q / (k * k);
            harmonic += 1.0 / k;
            let add = term * harmonic;
            sum += add;
            if add < 1e-17 * sum.abs() {
                break;
            }
            k += 1.0;
        }
        let i0 = i_series(0, x);
        let i1 = i_series(1, x);
        let k0 = -l * i0 + sum;
        // Wronskian I_0 K_1 + I_1 K_0 = 1/x
        let k1 = (1.0 / x - i1 * k0) / i0;
        (k0, k1)
    } else {
        // Steed's CF2 (Temme's form) at order 0
        let mut b = 2.0 * (1.0 + x);
        let mut d = 1.0 / b;
        let mut delh = d;
        let mut h = d;
        let mut q1 = 0.0;
        let mut q2 = 1.0;
        let a1 = 0.25;
        let mut q = a1;
        let mut c = a1;
        let mut a = -a1;
        let mut s = 1.0 + q * delh;
        for i in 1..10_000 {
            let fi = i as f64;
            a -= 2.0 * fi;
            c = -a * c / (fi + 1.0);
            let qnew = (q1 - b * q2) / a;
            q1 = q2;
            q2 = qnew;
            q += c * qnew;
            b += 2.0;
            d = 1.0 / (b + a * d);
            delh *= b * d - 1.0;
            h += delh;
            let dels = q * delh;
            s += dels;
            if (dels / s).abs() < 1e-17 {
                break;
            }
        }
        h *= a1;
        let k0 = (PI / (2.0 * x)).sqrt() * (-x).exp() / s;
        let k1 = k0 * (x + 0.5 - h) / x;
        (k0, k1)
    }
}

/// K_0(x) .. K_nmax(x) by forward recurrence from K_0, K_1.
pub fn k_values(nmax: usize, x: f64) -> Result<Vec<f64>> {
    check_positive(x, "bessel_k")?;
    let (k0, k1) = k01(x);
    let mut out = Vec::with_capacity(nmax.max(1) + 1);
    out.push(k0);
    out.push(k1);
    for n in 1..nmax {
        let next = out[n - 1] + 2.0 * n as f64 / x * out[n];
        out.push(next);
    }
    out.truncate(nmax + 1);
    Ok(out)
}

pub fn bessel_k(n: u32, x: f64) -> Result<f64> {
    Ok(k_values(n as usize, x)?[n as usize])
}

pub fn bessel_k_prime(n: u32, x: f64) -> Result<f64> {
    let k = k_values(n as usize + 1, x)?;
    Ok(if n == 0 {
        -k[1]
    } else {
        -0.5 * (k[n as usize - 1] + k[n as usize + 1])
    })
}

/// Hankel function H_m^(kind)(x) = J_m ± i Y_m, signed order.
pub fn hankel(kind: u8, m: i32, x: f64) -> Result<Complex64> {
    let t = JyTable::new(m.unsigned_abs() as usize, x)?;
    hankel_from(&t, kind, m, false)
}

pub fn hankel_prime(kind: u8, m: i32, x: f64) -> Result<Complex64> {
    let t = JyTable::new(m.unsigned_abs() as usize, x)?;
    hankel_from(&t, kind, m, true)
}

pub fn hankel_from(t: &JyTable, kind: u8, m: i32, derivative: bool) -> Result<Complex64> {
    let sign = match kind {
        1 => 1.0,
        2 => -1.0,
        _ => return Err(Error::Domain(format!("hankel: kind must be 1 or 2, got {kind}"))),
    };
    let (j, y) = if derivative {
        (t.j_prime_signed(m), t.y_prime_signed(m))
    } else {
        (t.j_signed(m), t.y_signed(m))
    };
    Ok(Complex64::new(j, sign * y))
}

//! Wigner 3j and 6j symbols from the Racah sums.
//!
//! Arguments are half-integers passed as f64; internally everything runs on
//! doubled integers so parity and triangle checks are exact.

use crate::error::{Error, Result};
use std::sync::OnceLock;

const MAX_FACT: usize = 100;

fn factorials() -> &'static [f64; MAX_FACT + 1] {
    static TABLE: OnceLock<[f64; MAX_FACT + 1]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = [1.0; MAX_FACT + 1];
        for i in 1..=MAX_FACT {
            t[i] = t[i - 1] * i as f64;
        }
        t
    })
}

/// n! for a doubled argument 2n (must be even and non-negative).
fn fact2(two_n: i64) -> f64 {
    debug_assert!(two_n >= 0 && two_n % 2 == 0);
    factorials()[(two_n / 2) as usize]
}

fn doubled(v: f64, what: &str) -> Result<i64> {
    if !v.is_finite() {
        return Err(Error::Domain(format!("{what}: non-finite value")));
    }
    let d = (2.0 * v).round();
    if (2.0 * v - d).abs() > 1e-9 {
        return Err(Error::Domain(format!("{what}: {v} is not a half-integer")));
    }
    if d.abs() > 2.0 * (MAX_FACT as f64) / 4.0 {
        return Err(Error::Domain(format!("{what}: {v} outside supported range")));
    }
    Ok(d as i64)
}

fn triangle(a: i64, b: i64, c: i64) -> bool {
    a >= 0 && b >= 0 && c >= 0 && c <= a + b && c >= (a - b).abs() && (a + b + c) % 2 == 0
}

/// Square of the triangle coefficient Δ(abc), doubled arguments.
fn delta(a: i64, b: i64, c: i64) -> f64 {
    fact2(a + b - c) * fact2(a - b + c) * fact2(-a + b + c) / fact2(a + b + c + 2)
}

fn parity(two_k: i64) -> f64 {
    if (two_k / 2) % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// The 3j symbol (j1 j2 j3; m1 m2 m3).
pub fn wigner_3j(j1: f64, j2: f64, j3: f64, m1: f64, m2: f64, m3: f64) -> Result<f64> {
    let (j1, j2, j3) = (doubled(j1, "j1")?, doubled(j2, "j2")?, doubled(j3, "j3")?);
    let (m1, m2, m3) = (doubled(m1, "m1")?, doubled(m2, "m2")?, doubled(m3, "m3")?);
    if j1 < 0 || j2 < 0 || j3 < 0 {
        return Err(Error::Domain("negative angular momentum".into()));
    }
    if m1 + m2 + m3 != 0 || !triangle(j1, j2, j3) {
        return Ok(0.0);
    }
    if m1.abs() > j1 || m2.abs() > j2 || m3.abs() > j3 {
        return Ok(0.0);
    }
    if (j1 + m1) % 2 != 0 || (j2 + m2) % 2 != 0 || (j3 + m3) % 2 != 0 {
        return Ok(0.0);
    }
    let kmin = 0.max(j2 - j3 - m1).max(j1 - j3 + m2);
    let kmax = (j1 + j2 - j3).min(j1 - m1).min(j2 + m2);
    let mut sum = 0.0;
    let mut k = kmin;
    while k <= kmax {
        let den = fact2(k)
            * fact2(j3 - j2 + k + m1)
            * fact2(j3 - j1 + k - m2)
            * fact2(j1 + j2 - j3 - k)
            * fact2(j1 - k - m1)
            * fact2(j2 - k + m2);
        sum += parity(k) / den;
        k += 2;
    }
    let pref = parity(j1 - j2 - m3)
        * (delta(j1, j2, j3)
            * fact2(j1 + m1)
            * fact2(j1 - m1)
            * fact2(j2 + m2)
            * fact2(j2 - m2)
            * fact2(j3 + m3)
            * fact2(j3 - m3))
            .sqrt();
    Ok(pref * sum)
}

/// The 6j symbol {j1 j2 j3; j4 j5 j6}.
pub fn wigner_6j(j1: f64, j2: f64, j3: f64, j4: f64, j5: f64, j6: f64) -> Result<f64> {
    let a = doubled(j1, "j1")?;
    let b = doubled(j2, "j2")?;
    let c = doubled(j3, "j3")?;
    let d = doubled(j4, "j4")?;
    let e = doubled(j5, "j5")?;
    let f = doubled(j6, "j6")?;
    if [a, b, c, d, e, f].iter().any(|&v| v < 0) {
        return Err(Error::Domain("negative angular momentum".into()));
    }
    if !(triangle(a, b, c) && triangle(a, e, f) && triangle(d, b, f) && triangle(d, e, c)) {
        return Ok(0.0);
    }
    let tmin = (a + b + c).max(a + e + f).max(d + b + f).max(d + e + c);
    let tmax = (a + b + d + e).min(a + c + d + f).min(b + c + e + f);
    let mut sum = 0.0;
    let mut t = tmin;
    while t <= tmax {
        let den = fact2(t - a - b - c)
            * fact2(t - a - e - f)
            * fact2(t - d - b - f)
            * fact2(t - d - e - c)
            * fact2(a + b + d + e - t)
            * fact2(a + c + d + f - t)
            * fact2(b + c + e + f - t);
        sum += parity(t) * fact2(t + 2) / den;
        t += 2;
    }
    let pref = (delta(a, b, c) * delta(a, e, f) * delta(d, b, f) * delta(d, e, c)).sqrt();
    Ok(pref * sum)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Clebsch-Gordan coefficients by the lowering-operator recursion from the
    /// stretched state |j1+j2, j1+j2> = |j1 j1>|j2 j2>, then the 3j relation.
    /// Only used for j3 = j1 + j2, which is all the independent check needs.
    fn stretched_cg(j1: f64, j2: f64, m1: f64, m2: f64) -> f64 {
        // For J = j1 + j2 the CG coefficient is known in closed form:
        // sqrt( C(2j1, j1+m1) C(2j2, j2+m2) / C(2J, J+M) )
        fn binom(n: f64, k: f64) -> f64 {
            let mut r = 1.0;
            let k = k.round() as i64;
            let n = n.round() as i64;
            for i in 0..k {
                r *= (n - i) as f64 / (i + 1) as f64;
            }
            r
        }
        let jj = j1 + j2;
        let mm = m1 + m2;
        (binom(2.0 * j1, j1 + m1) * binom(2.0 * j2, j2 + m2) / binom(2.0 * jj, jj + mm)).sqrt()
    }

    #[test]
    fn simple_values() {
        let v = wigner_3j(1.0, 1.0, 0.0, 0.0, 0.0, 0.0).unwrap();
        assert!((v + 1.0 / 3f64.sqrt()).abs() < 1e-14);
        let v = wigner_6j(1.0, 1.0, 1.0, 1.0, 1.0, 1.0).unwrap();
        assert!((v - 1.0 / 6.0).abs() < 1e-14);
    }

    #[test]
    fn stretched_3j() {
        // (4 1 5; 4 1 -5) = sqrt(8! 2! / 11!) = 1/sqrt(11)
        let v = wigner_3j(4.0, 1.0, 5.0, 4.0, 1.0, -5.0).unwrap();
        assert!((v - 1.0 / 11f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn matches_cg_for_stretched_triads() {
        for (j1, j2) in [(4.0, 1.0), (3.5, 1.5), (2.0, 2.0), (0.5, 0.5)] {
            let j3: f64 = j1 + j2;
            let mut m1 = -j1;
            while m1 <= j1 {
                let mut m2 = -j2;
                while m2 <= j2 {
                    let m3 = -(m1 + m2);
                    let cg = stretched_cg(j1, j2, m1, m2);
                    // (j1 j2 j3; m1 m2 -M) = (-1)^(j1-j2+M) CG / sqrt(2 j3 + 1)
                    let sign = if ((j1 - j2 - m3).round() as i64) % 2 == 0 { 1.0 } else { -1.0 };
                    let expect = sign * cg / (2.0 * j3 + 1.0).sqrt();
                    let got = wigner_3j(j1, j2, j3, m1, m2, m3).unwrap();
                    assert!((got - expect).abs() < 1e-13, "{j1} {j2} {m1} {m2}");
                    m2 += 1.0;
                }
                m1 += 1.0;
            }
        }
    }

    #[test]
    fn selection_rules() {
        assert_eq!(wigner_3j(1.0, 1.0, 1.0, 1.0, 1.0, 1.0).unwrap(), 0.0);
        assert_eq!(wigner_3j(1.0, 1.0, 3.0, 0.0, 0.0, 0.0).unwrap(), 0.0);
        assert_eq!(wigner_3j(1.0, 1.0, 1.0, 2.0, -2.0, 0.0).unwrap(), 0.0);
        assert_eq!(wigner_6j(1.0, 1.0, 3.0, 1.0, 1.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn one_zero_argument() {
        let (a, b, c): (f64, f64, f64) = (1.0, 2.0, 2.0);
        let v = wigner_6j(a, b, c, 0.0, c, b).unwrap();
        let sign = if ((a + b + c).round() as i64) % 2 == 0 { 1.0 } else { -1.0 };
        let expect = sign / ((2.0 * b + 1.0) * (2.0 * c + 1.0)).sqrt();
        assert!((v - expect).abs() < 1e-14);
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(wigner_3j(0.3, 1.0, 1.0, 0.0, 0.0, 0.0), Err(Error::Domain(_))));
        assert!(matches!(wigner_6j(1.0, 1.0, 1.0, 1.0, 1.0, 0.25), Err(Error::Domain(_))));
    }

    #[test]
    fn hyperfine_six_j() {
        // {J' F' I; F J 1} for the cesium D2 cycling line
        let v = wigner_6j(1.5, 5.0, 3.5, 4.0, 0.5, 1.0).unwrap();
        assert!((v.abs() - 1.0 / 6.0).abs() < 1e-14);
    }
}

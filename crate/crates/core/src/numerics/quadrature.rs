//! Adaptive Gauss-Kronrod (7/15) and fixed-order Gauss-Legendre quadrature,
//! generic over real and complex integrands.

use crate::error::{Error, Result};
use num_complex::Complex64;
use std::collections::BinaryHeap;
use std::ops::{Add, Mul, Sub};
use std::sync::{Mutex, OnceLock};

pub trait QuadValue: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> {
    fn zero() -> Self;
    fn magnitude(&self) -> f64;
    fn to_complex(&self) -> Complex64;
}

impl QuadValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn magnitude(&self) -> f64 {
        self.abs()
    }
    fn to_complex(&self) -> Complex64 {
        Complex64::new(*self, 0.0)
    }
}

impl QuadValue for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn magnitude(&self) -> f64 {
        self.norm()
    }
    fn to_complex(&self) -> Complex64 {
        *self
    }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<T: QuadValue, F: FnMut(f64) -> T>(f: &mut F, a: f64, b: f64) -> (T, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for i in 0..7 {
        let x = h * XGK[i];
        let s = f(c - x) + f(c + x);
        kron = kron + s * WGK[i];
        if i % 2 == 1 {
            gauss = gauss + s * WG[i / 2];
        }
    }
    let err = (kron - gauss).magnitude() * h.abs();
    (kron * h, err)
}

struct Segment<T> {
    a: f64,
    b: f64,
    value: T,
    err: f64,
}

impl<T> PartialEq for Segment<T> {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl<T> Eq for Segment<T> {}
impl<T> PartialOrd for Segment<T> {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl<T> Ord for Segment<T> {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// Adaptive integration to relative tolerance `rel_tol`, bisecting the worst segment.
pub fn integrate<T, F>(mut f: F, a: f64, b: f64, rel_tol: f64) -> Result<T>
where
    T: QuadValue,
    F: FnMut(f64) -> T,
{
    integrate_limited(&mut f, a, b, rel_tol, 0.0, 4000)
}

/// Same as [`integrate`] with an absolute floor and explicit segment budget.
pub fn integrate_limited<T, F>(
    f: &mut F,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_tol: f64,
    max_segments: usize,
) -> Result<T>
where
    T: QuadValue,
    F: FnMut(f64) -> T,
{
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Domain("integrate: non-finite limits".into()));
    }
    if a == b {
        return Ok(T::zero());
    }
    let (v, e) = gk15(f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Segment { a, b, value: v, err: e });
    let mut total = v;
    let mut total_err = e;
    let mut count = 1;
    loop {
        let tol = (rel_tol * total.magnitude()).max(abs_tol);
        if total_err <= tol {
            return Ok(total);
        }
        if count >= max_segments {
            return Err(Error::Quadrature {
                estimate: total.to_complex(),
                error: total_err,
            });
        }
        let worst = heap.pop().expect("heap never empty");
        let mid = 0.5 * (worst.a + worst.b);
        let (v1, e1) = gk15(f, worst.a, mid);
        let (v2, e2) = gk15(f, mid, worst.b);
        total = total - worst.value + v1 + v2;
        total_err += e1 + e2 - worst.err;
        heap.push(Segment { a: worst.a, b: mid, value: v1, err: e1 });
        heap.push(Segment { a: mid, b: worst.b, value: v2, err: e2 });
        count += 1;
        if count % 64 == 0 {
            // resum to drop accumulated rounding in the running totals
            total = heap.iter().fold(T::zero(), |acc, s| acc + s.value);
            total_err = heap.iter().map(|s| s.err).sum();
        }
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j + 1) as f64 * z * p2 - j as f64 * p3) / (j + 1) as f64;
            }
            pp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Cached node sets, since the same orders are requested many times.
pub fn gauss_legendre_cached(n: usize) -> std::sync::Arc<(Vec<f64>, Vec<f64>)> {
    static CACHE: OnceLock<Mutex<Vec<(usize, std::sync::Arc<(Vec<f64>, Vec<f64>)>)>>> =
        OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(Vec::new()));
    let mut guard = cache.lock().expect("quadrature cache poisoned");
    if let Some((_, v)) = guard.iter().find(|(k, _)| *k == n) {
        return v.clone();
    }
    let v = std::sync::Arc::new(gauss_legendre(n));
    guard.push((n, v.clone()));
    v
}

/// Fixed-order Gauss-Legendre rule on [a, b].
pub fn integrate_gl<T, F>(mut f: F, a: f64, b: f64, n: usize) -> T
where
    T: QuadValue,
    F: FnMut(f64) -> T,
{
    let rule = gauss_legendre_cached(n);
    let (x, w) = (&rule.0, &rule.1);
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut s = T::zero();
    for (xi, wi) in x.iter().zip(w) {
        s = s + f(c + h * xi) * *wi;
    }
    s * h
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::bessel::bessel_k;

    #[test]
    fn sine_integral() {
        let v: f64 = integrate(f64::sin, 0.0, std::f64::consts::PI, 1e-13).unwrap();
        assert!((v - 2.0).abs() < 1e-12);
    }

    #[test]
    fn cubic_exact_with_two_points() {
        let v: f64 = integrate_gl(|x| x * x * x, 0.0, 1.0, 2);
        assert!((v - 0.25).abs() < 1e-15);
    }

    #[test]
    fn complex_integrand() {
        // ∫0^1 e^{i 3x} dx = (e^{3i} - 1) / (3i)
        let v: Complex64 = integrate(|x| Complex64::new(0.0, 3.0 * x).exp(), 0.0, 1.0, 1e-13).unwrap();
        let expect = (Complex64::new(0.0, 3.0).exp() - 1.0) / Complex64::new(0.0, 3.0);
        assert!((v - expect).norm() < 1e-13);
    }

    #[test]
    fn k0_squared_moment() {
        // ∫0^∞ x K0(x)^2 dx = 1/2; the tail beyond 40 is below 1e-30
        let mut f = |x: f64| {
            if x == 0.0 {
                0.0
            } else {
                let k = bessel_k(0, x).unwrap();
                x * k * k
            }
        };
        let head: f64 = integrate_limited(&mut f, 0.0, 1.0, 1e-12, 0.0, 4000).unwrap();
        let tail: f64 = integrate(f, 1.0, 40.0, 1e-12).unwrap();
        assert!((head + tail - 0.5).abs() < 1e-8);
    }

    #[test]
    fn non_convergence_carries_estimate() {
        let mut f = |x: f64| 1.0 / x.sqrt();
        let r: Result<f64> = integrate_limited(&mut f, 0.0, 1.0, 1e-15, 0.0, 10);
        match r {
            Err(Error::Quadrature { estimate, .. }) => assert!((estimate.re - 2.0).abs() < 0.1),
            other => panic!("expected quadrature error, got {other:?}"),
        }
    }

    #[test]
    fn legendre_weights_sum_to_two() {
        for n in [1, 2, 5, 16, 64] {
            let (x, w) = gauss_legendre(n);
            let s: f64 = w.iter().sum();
            assert!((s - 2.0).abs() < 1e-13);
            assert!(x.windows(2).all(|p| p[0] < p[1]));
        }
    }
}

//! Conjugate functions on the torus `𝕋 = [0, 2π)`.
//!
//! The Hilbert transform is the multiplier `-i sign(n)`, equivalently the
//! principal value `(1/2π) p.v. ∫ f(t) cot((x - t)/2) dt`. Harmonic
//! extensions into the disc come from the analytic completion
//! `F(z) = c₀ + 2 Σ_{n≥1} c_n zⁿ`, so `Re F` extends `f` and `Im F` extends `Hf`.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI, TAU};

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::dyadic::Sign;
use crate::error::{Error, Result};

/// A truncated bilateral Fourier series `Σ_{|n|≤M} c_n e^{inθ}`.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierSeries {
    bandwidth: u32,
    coeffs: BTreeMap<i64, Complex64>,
}

impl FourierSeries {
    pub fn zero(bandwidth: u32) -> Self {
        Self {
            bandwidth,
            coeffs: BTreeMap::new(),
        }
    }

    pub fn constant(c: f64) -> Self {
        let mut s = Self::zero(0);
        s.coeffs.insert(0, Complex64::new(c, 0.0));
        s
    }

    /// `a cos(nθ)`.
    pub fn cosine(n: u32, amplitude: f64) -> Self {
        let mut s = Self::zero(n);
        s.add_cos(n, amplitude);
        s
    }

    /// `a sin(nθ)`.
    pub fn sine(n: u32, amplitude: f64) -> Self {
        let mut s = Self::zero(n);
        s.add_sin(n, amplitude);
        s
    }

    /// Real trigonometric polynomial `a₀ + Σ a_n cos nθ + b_n sin nθ`.
    pub fn from_trig(a0: f64, cos: &[f64], sin: &[f64]) -> Self {
        let bandwidth = cos.len().max(sin.len()) as u32;
        let mut s = Self::zero(bandwidth);
        s.add(0, Complex64::new(a0, 0.0));
        for (k, a) in cos.iter().enumerate() {
            s.add_cos(k as u32 + 1, *a);
        }
        for (k, b) in sin.iter().enumerate() {
            s.add_sin(k as u32 + 1, *b);
        }
        s
    }

    pub fn from_coeffs(bandwidth: u32, coeffs: impl IntoIterator<Item = (i64, Complex64)>) -> Result<Self> {
        let mut s = Self::zero(bandwidth);
        for (n, c) in coeffs {
            if n.unsigned_abs() > bandwidth as u64 {
                return Err(Error::InvalidArgument(format!(
                    "mode {n} exceeds bandwidth {bandwidth}"
                )));
            }
            s.add(n, c);
        }
        Ok(s)
    }

    /// Projection of equispaced samples `f(2πj/n)` onto modes `|k| ≤ bandwidth`.
    pub fn from_samples(samples: &[f64], bandwidth: u32) -> Result<Self> {
        let n = samples.len();
        if n < 2 * bandwidth as usize + 1 {
            return Err(Error::InvalidArgument(format!(
                "{n} samples cannot resolve bandwidth {bandwidth}"
            )));
        }
        let mut buffer: Vec<Complex64> = samples.iter().map(|v| Complex64::new(*v, 0.0)).collect();
        FftPlanner::new().plan_fft_forward(n).process(&mut buffer);
        let mut s = Self::zero(bandwidth);
        for k in -(bandwidth as i64)..=bandwidth as i64 {
            s.add(k, buffer[k.rem_euclid(n as i64) as usize] / n as f64);
        }
        Ok(s)
    }

    fn add(&mut self, n: i64, c: Complex64) {
        let entry = self.coeffs.entry(n).or_insert(Complex64::new(0.0, 0.0));
        *entry += c;
        if *entry == Complex64::new(0.0, 0.0) {
            self.coeffs.remove(&n);
        }
    }

    fn add_cos(&mut self, n: u32, a: f64) {
        if n == 0 {
            self.add(0, Complex64::new(a, 0.0));
        } else {
            self.add(n as i64, Complex64::new(a / 2.0, 0.0));
            self.add(-(n as i64), Complex64::new(a / 2.0, 0.0));
        }
        self.bandwidth = self.bandwidth.max(n);
    }

    fn add_sin(&mut self, n: u32, b: f64) {
        if n == 0 {
            return;
        }
        self.add(n as i64, Complex64::new(0.0, -b / 2.0));
        self.add(-(n as i64), Complex64::new(0.0, b / 2.0));
        self.bandwidth = self.bandwidth.max(n);
    }

    pub fn bandwidth(&self) -> u32 {
        self.bandwidth
    }

    pub fn coeff(&self, n: i64) -> Complex64 {
        self.coeffs.get(&n).copied().unwrap_or_default()
    }

    pub fn coeffs(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        self.coeffs.iter().map(|(n, c)| (*n, *c))
    }

    pub fn mean(&self) -> f64 {
        self.coeff(0).re
    }

    /// Whether `c_{-n} = conj(c_n)` for all `n`.
    pub fn is_real(&self, tol: f64) -> bool {
        self.coeffs
            .iter()
            .all(|(n, c)| (self.coeff(-n) - c.conj()).norm() <= tol)
    }

    pub fn eval_complex(&self, theta: f64) -> Complex64 {
        self.coeffs
            .iter()
            .map(|(n, c)| c * Complex64::from_polar(1.0, *n as f64 * theta))
            .sum()
    }

    /// Real part of the series at `θ`.
    pub fn eval(&self, theta: f64) -> f64 {
        self.eval_complex(theta).re
    }

    pub fn samples(&self, n: usize) -> Vec<f64> {
        (0..n).map(|j| self.eval(TAU * j as f64 / n as f64)).collect()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut s = Self::zero(self.bandwidth);
        for (n, c) in &self.coeffs {
            s.add(*n, c * factor);
        }
        s
    }

    pub fn sum(&self, other: &Self) -> Self {
        let mut s = self.clone();
        s.bandwidth = s.bandwidth.max(other.bandwidth);
        for (n, c) in &other.coeffs {
            s.add(*n, *c);
        }
        s
    }

    /// `(f, g) = (1/2π) ∫ f ḡ`, by Parseval.
    pub fn inner(&self, other: &Self) -> Complex64 {
        self.coeffs
            .iter()
            .map(|(n, c)| c * other.coeff(*n).conj())
            .sum()
    }

    pub fn to_record(&self) -> SeriesRecord {
        SeriesRecord {
            bandwidth: self.bandwidth,
            coeffs: self.coeffs.iter().map(|(n, c)| (*n, c.re, c.im)).collect(),
        }
    }

    pub fn from_record(record: &SeriesRecord) -> Result<Self> {
        Self::from_coeffs(
            record.bandwidth,
            record.coeffs.iter().map(|&(n, re, im)| (n, Complex64::new(re, im))),
        )
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_record()).expect("record serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let record: SeriesRecord = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Self::from_record(&record)
    }
}

/// Wire form of a [`FourierSeries`]: `{bandwidth, coeffs: [[n, re, im], ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesRecord {
    pub bandwidth: u32,
    pub coeffs: Vec<(i64, f64, f64)>,
}

/// `Hf` through the multiplier `-i sign(n)`.
pub fn hilbert_spectral(f: &FourierSeries) -> FourierSeries {
    let mut out = FourierSeries::zero(f.bandwidth);
    for (n, c) in f.coeffs() {
        match n.signum() {
            1 => out.add(n, Complex64::new(0.0, -1.0) * c),
            -1 => out.add(n, Complex64::new(0.0, 1.0) * c),
            _ => {}
        }
    }
    out
}

/// `Hf(x)` by symmetric midpoint quadrature of the principal value.
///
/// With `h = 2π/resolution` the nodes are `x ± (i + ½)h`, `i < resolution/2`,
/// and the sum is `Σ [f(x - u) - f(x + u)] cot(u/2) h/2π`. For trigonometric
/// polynomials of bandwidth below `resolution/2` the rule is exact up to
/// roundoff. Points closer than one cell to a listed discontinuity are
/// refused.
pub fn hilbert_pv(
    f: impl Fn(f64) -> f64,
    x: f64,
    resolution: usize,
    discontinuities: &[f64],
) -> Result<f64> {
    if resolution < 4 || !resolution.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!(
            "resolution {resolution} must be an even number ≥ 4"
        )));
    }
    let h = TAU / resolution as f64;
    for &at in discontinuities {
        if circle_distance(x, at) < h {
            return Err(Error::NearDiscontinuity { x, at });
        }
    }
    let sum: f64 = (0..resolution / 2)
        .map(|i| {
            let u = (i as f64 + 0.5) * h;
            (f(x - u) - f(x + u)) / (u / 2.0).tan()
        })
        .sum();
    Ok(sum * h / TAU)
}

/// Distance on the circle of circumference `2π`.
pub fn circle_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

/// The PV rule applied at every midpoint `(j + ½)h` of a lattice at once.
///
/// `samples[j]` holds `f(jh)` with `h = 2π/n`; output `j` approximates
/// `Hf((j + ½)h)`. This is the same rule as [`hilbert_pv`], evaluated as a
/// circular convolution. Jumps of `f` should sit on lattice nodes, where the
/// sample should be the mean of the one-sided limits.
pub fn hilbert_pv_lattice(samples: &[f64]) -> Result<Vec<f64>> {
    let n = samples.len();
    if n < 4 || !n.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!(
            "lattice size {n} must be an even number ≥ 4"
        )));
    }
    let h = TAU / n as f64;
    let mut kernel = vec![Complex64::new(0.0, 0.0); n];
    for i in 0..n / 2 {
        let w = h / TAU / ((i as f64 + 0.5) * h / 2.0).tan();
        kernel[i] = Complex64::new(w, 0.0);
        kernel[n - 1 - i] = Complex64::new(-w, 0.0);
    }
    let mut signal: Vec<Complex64> = samples.iter().map(|v| Complex64::new(*v, 0.0)).collect();
    let mut planner = FftPlanner::new();
    let forward = planner.plan_fft_forward(n);
    forward.process(&mut kernel);
    forward.process(&mut signal);
    for (s, k) in signal.iter_mut().zip(&kernel) {
        *s *= k;
    }
    planner.plan_fft_inverse(n).process(&mut signal);
    Ok(signal.iter().map(|c| c.re / n as f64).collect())
}

/// Quarter of the torus containing `θ`: `0` for `[0, π/2)`, up to `3`.
pub fn quarter(theta: f64) -> usize {
    (theta.rem_euclid(TAU) / FRAC_PI_2).floor() as usize % 4
}

/// The square waves `φ⁻ = sign(sin)` and `φ⁺ = sign(cos)`.
pub fn phi_generator(sign: Sign, theta: f64) -> Result<i8> {
    let value = match sign {
        Sign::Minus => theta.sin(),
        Sign::Plus => theta.cos(),
    };
    // Zeros are decided on the reduced angle, not on the rounded sine.
    let reduced = theta.rem_euclid(PI);
    let zero_at = match sign {
        Sign::Minus => 0.0,
        Sign::Plus => FRAC_PI_2,
    };
    if reduced == zero_at || value == 0.0 {
        return Err(Error::GeneratorZero(theta));
    }
    let q = quarter(theta);
    Ok(match sign {
        Sign::Minus => {
            if q < 2 {
                1
            } else {
                -1
            }
        }
        Sign::Plus => {
            if q == 0 || q == 3 {
                1
            } else {
                -1
            }
        }
    })
}

/// Jump locations of `φ^σ` in `[0, 2π)`.
pub fn phi_discontinuities(sign: Sign) -> [f64; 2] {
    match sign {
        Sign::Minus => [0.0, PI],
        Sign::Plus => [FRAC_PI_2, 3.0 * FRAC_PI_2],
    }
}

/// `φ^σ` sampled on the lattice `jh`, `h = 2π/n`, with `0` at the jumps.
///
/// Requires `4 | n` so the jumps are lattice nodes; the quarter of a node is
/// decided in integer arithmetic.
pub fn phi_lattice(sign: Sign, n: usize) -> Result<Vec<f64>> {
    if n < 4 || !n.is_multiple_of(4) {
        return Err(Error::InvalidArgument(format!("lattice size {n} must be a multiple of 4")));
    }
    let q = n / 4;
    Ok((0..n)
        .map(|j| {
            let shifted = match sign {
                Sign::Minus => j,
                Sign::Plus => (j + q) % n,
            };
            if shifted % (2 * q) == 0 {
                0.0
            } else if shifted < 2 * q {
                1.0
            } else {
                -1.0
            }
        })
        .collect())
}

/// `H 1_{[a,b)}(x) = (1/π) log |sin((x - a)/2) / sin((x - b)/2)|`.
pub fn hilbert_arc_indicator(a: f64, b: f64, x: f64) -> f64 {
    (((x - a) / 2.0).sin() / ((x - b) / 2.0).sin()).abs().ln() / PI
}

/// Closed form of `Hφ^σ(x)`; `Hφ⁻(x) = (2/π) log |tan(x/2)|`.
pub fn hilbert_phi_closed(sign: Sign, x: f64) -> f64 {
    let y = match sign {
        Sign::Minus => x,
        Sign::Plus => x + FRAC_PI_2,
    };
    2.0 / PI * (y / 2.0).tan().abs().ln()
}

/// Value, conjugate value and gradients of the harmonic extension at a point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HarmonicPoint {
    pub z: (f64, f64),
    pub value: f64,
    pub gradient: (f64, f64),
    pub conjugate_value: f64,
    pub conjugate_gradient: (f64, f64),
}

impl HarmonicPoint {
    /// `∇^⊥ u`, the anticlockwise rotation of the gradient.
    pub fn rotated_gradient(&self) -> (f64, f64) {
        (-self.gradient.1, self.gradient.0)
    }
}

/// Analytic completion of a real series, stored as power-series coefficients.
///
/// Evaluation is Horner's rule; `F'` shares the same pass.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticCompletion {
    taylor: Vec<Complex64>,
}

impl AnalyticCompletion {
    pub fn new(f: &FourierSeries) -> Self {
        let m = f.bandwidth as usize;
        let mut taylor = vec![Complex64::new(0.0, 0.0); m + 1];
        taylor[0] = Complex64::new(f.mean(), 0.0);
        for (n, c) in f.coeffs() {
            if n > 0 {
                taylor[n as usize] = 2.0 * c;
            }
        }
        Self { taylor }
    }

    /// Degree of the polynomial `F`.
    pub fn degree(&self) -> usize {
        self.taylor.len() - 1
    }

    pub fn taylor(&self) -> &[Complex64] {
        &self.taylor
    }

    /// `(F(z), F'(z))`.
    pub fn eval_with_derivative(&self, z: Complex64) -> (Complex64, Complex64) {
        let mut value = Complex64::new(0.0, 0.0);
        let mut derivative = Complex64::new(0.0, 0.0);
        for c in self.taylor.iter().rev() {
            derivative = derivative * z + value;
            value = value * z + c;
        }
        (value, derivative)
    }

    /// `F'(z)` alone.
    pub fn derivative(&self, z: Complex64) -> Complex64 {
        let mut d = Complex64::new(0.0, 0.0);
        for (n, c) in self.taylor.iter().enumerate().skip(1).rev() {
            d = d * z + c * n as f64;
        }
        d
    }

    pub fn point(&self, x: f64, y: f64) -> HarmonicPoint {
        let (value, d) = self.eval_with_derivative(Complex64::new(x, y));
        HarmonicPoint {
            z: (x, y),
            value: value.re,
            gradient: (d.re, -d.im),
            conjugate_value: value.im,
            conjugate_gradient: (d.im, d.re),
        }
    }
}

/// Harmonic extension of a real series to `z = (x, y)` in the open disc.
pub fn poisson_extend(f: &FourierSeries, x: f64, y: f64) -> Result<HarmonicPoint> {
    if !(x * x + y * y < 1.0) {
        return Err(Error::OutsideDisc { x, y });
    }
    Ok(AnalyticCompletion::new(f).point(x, y))
}

fn check_exponent(p: f64) -> Result<()> {
    if p > 1.0 && p.is_finite() {
        Ok(())
    } else {
        Err(Error::ExponentOutOfRange(p))
    }
}

/// `‖H‖_{p→p}`: `tan(π/2p)` for `p ≤ 2`, `cot(π/2p)` above.
pub fn hp_constant(p: f64) -> Result<f64> {
    check_exponent(p)?;
    let angle = PI / (2.0 * p);
    Ok(if p <= 2.0 { angle.tan() } else { 1.0 / angle.tan() })
}

/// Best constant of ±1 martingale transforms: `1/(p - 1)` for `p ≤ 2`, `p - 1` above.
pub fn mp_constant(p: f64) -> Result<f64> {
    check_exponent(p)?;
    Ok(if p <= 2.0 { 1.0 / (p - 1.0) } else { p - 1.0 })
}

/// The Hölder conjugate `p/(p - 1)`.
pub fn conjugate_exponent(p: f64) -> Result<f64> {
    check_exponent(p)?;
    Ok(p / (p - 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_real(bandwidth: usize, rng: &mut ChaCha8Rng) -> FourierSeries {
        let cos: Vec<f64> = (0..bandwidth).map(|_| rng.random_range(-1.0..1.0)).collect();
        let sin: Vec<f64> = (0..bandwidth).map(|_| rng.random_range(-1.0..1.0)).collect();
        FourierSeries::from_trig(rng.random_range(-1.0..1.0), &cos, &sin)
    }

    #[test]
    fn spectral_pairs() {
        let h = hilbert_spectral(&FourierSeries::cosine(1, 1.0));
        for k in 0..16 {
            let t = k as f64 * 0.4;
            assert_abs_diff_eq!(h.eval(t), t.sin(), epsilon = 1e-14);
        }
        assert_eq!(hilbert_spectral(&FourierSeries::constant(3.0)).coeffs().count(), 0);
    }

    #[test]
    fn spectral_square_is_minus_identity_plus_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = random_real(12, &mut rng);
        let hh = hilbert_spectral(&hilbert_spectral(&f));
        for k in 0..20 {
            let t = k as f64 * 0.31;
            assert_abs_diff_eq!(hh.eval(t), -f.eval(t) + f.mean(), epsilon = 1e-12);
        }
    }

    #[test]
    fn spectral_antisymmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10 {
            let f = random_real(16, &mut rng);
            let g = random_real(16, &mut rng);
            let lhs = hilbert_spectral(&f).inner(&g);
            let rhs = f.inner(&hilbert_spectral(&g));
            assert!((lhs + rhs).norm() < 1e-10);
        }
    }

    #[test]
    fn pv_matches_spectral_on_band_limited() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..4 {
            let f = random_real(32, &mut rng);
            let h = hilbert_spectral(&f);
            for _ in 0..8 {
                let x = rng.random_range(0.0..TAU);
                let pv = hilbert_pv(|t| f.eval(t), x, 4096, &[]).unwrap();
                assert!((pv - h.eval(x)).abs() < 1e-6);
            }
        }
        assert_abs_diff_eq!(hilbert_pv(f64::cos, 0.0, 4096, &[]).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn pv_closed_form_for_square_wave() {
        let f = |t: f64| phi_generator(Sign::Minus, t).map(f64::from).unwrap_or(0.0);
        for x in [PI / 8.0, PI / 4.0, 3.0 * PI / 8.0] {
            let pv = hilbert_pv(f, x, 1 << 16, &phi_discontinuities(Sign::Minus)).unwrap();
            assert!((pv - 2.0 / PI * (x / 2.0).tan().ln()).abs() < 1e-4);
        }
        assert!(matches!(
            hilbert_pv(f, 1e-5, 1 << 10, &phi_discontinuities(Sign::Minus)),
            Err(Error::NearDiscontinuity { .. })
        ));
    }

    #[test]
    fn arc_indicator_closed_form_matches_pv() {
        let (a, b) = (0.3, 1.7);
        let f = |t: f64| if (a..b).contains(&t.rem_euclid(TAU)) { 1.0 } else { 0.0 };
        for x in [2.5, 4.0, 1.0] {
            let pv = hilbert_pv(f, x, 1 << 16, &[a, b]).unwrap();
            assert!((pv - hilbert_arc_indicator(a, b, x)).abs() < 1e-3);
        }
    }

    #[test]
    fn lattice_agrees_with_pointwise_rule() {
        let n = 256;
        let f = FourierSeries::from_trig(0.2, &[1.0, 0.0, -0.5], &[0.0, 0.7]);
        let out = hilbert_pv_lattice(&f.samples(n)).unwrap();
        let h = hilbert_spectral(&f);
        for (j, v) in out.iter().enumerate() {
            let x = (j as f64 + 0.5) * TAU / n as f64;
            assert_abs_diff_eq!(*v, h.eval(x), epsilon = 1e-12);
        }
        let samples = phi_lattice(Sign::Plus, n).unwrap();
        let out = hilbert_pv_lattice(&samples).unwrap();
        let j = n / 16;
        let x = (j as f64 + 0.5) * TAU / n as f64;
        let h = TAU / n as f64;
        let on_nodes = |t: f64| samples[((t / h).round() as i64).rem_euclid(n as i64) as usize];
        let pointwise = hilbert_pv(on_nodes, x, n, &[]).unwrap();
        assert_abs_diff_eq!(out[j], pointwise, epsilon = 1e-12);
    }

    #[test]
    fn generators() {
        assert_eq!(phi_generator(Sign::Minus, FRAC_PI_2).unwrap(), 1);
        assert_eq!(phi_generator(Sign::Plus, FRAC_PI_2 - 0.01).unwrap(), 1);
        assert_eq!(phi_generator(Sign::Plus, FRAC_PI_2 + 0.01).unwrap(), -1);
        assert!(phi_generator(Sign::Minus, 0.0).is_err());
        assert!(phi_generator(Sign::Minus, PI).is_err());
        for k in 0..1000 {
            let x = 0.0123 + k as f64 * TAU / 1000.0;
            for s in [Sign::Minus, Sign::Plus] {
                assert_eq!(phi_generator(s, x + PI).unwrap(), -phi_generator(s, x).unwrap());
            }
            // φ^±(x + π/2) = ∓φ^∓(x)
            assert_eq!(phi_generator(Sign::Plus, x + FRAC_PI_2).unwrap(), -phi_generator(Sign::Minus, x).unwrap());
            assert_eq!(phi_generator(Sign::Minus, x + FRAC_PI_2).unwrap(), phi_generator(Sign::Plus, x).unwrap());
        }
    }

    #[test]
    fn poisson_linear_case() {
        let f = FourierSeries::cosine(1, 1.0);
        let p = poisson_extend(&f, 0.4, 0.0).unwrap();
        assert_abs_diff_eq!(p.value, 0.4, epsilon = 1e-15);
        assert_eq!(p.gradient, (1.0, 0.0));
        assert_eq!(p.conjugate_value, 0.0);
        let c = poisson_extend(&FourierSeries::constant(2.5), 0.1, -0.3).unwrap();
        assert_eq!(c.value, 2.5);
        assert_eq!(c.gradient, (0.0, 0.0));
        assert!(poisson_extend(&f, 0.8, 0.6).is_err());
    }

    #[test]
    fn poisson_is_harmonic_with_conjugate() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let f = random_real(6, &mut rng);
        let hf = hilbert_spectral(&f);
        let h = 1e-3;
        for _ in 0..10 {
            let r = rng.random_range(0.0..0.8f64);
            let a = rng.random_range(0.0..TAU);
            let (x, y) = (r * a.cos(), r * a.sin());
            let u = |x: f64, y: f64| poisson_extend(&f, x, y).unwrap().value;
            let lap = (u(x + h, y) + u(x - h, y) + u(x, y + h) + u(x, y - h) - 4.0 * u(x, y)) / (h * h);
            let scale = u(x, y).abs().max(1.0);
            assert!(lap.abs() < 1e-6 * scale * 1e2, "laplacian {lap}");
            let p = poisson_extend(&f, x, y).unwrap();
            let gx = (u(x + h, y) - u(x - h, y)) / (2.0 * h);
            let gy = (u(x, y + h) - u(x, y - h)) / (2.0 * h);
            assert!((gx - p.gradient.0).abs() < 1e-5 && (gy - p.gradient.1).abs() < 1e-5);
            assert_eq!(p.conjugate_gradient, p.rotated_gradient());
            let v = |x: f64, y: f64| poisson_extend(&f, x, y).unwrap().conjugate_value;
            let vx = (v(x + h, y) - v(x - h, y)) / (2.0 * h);
            assert!((vx - p.conjugate_gradient.0).abs() < 1e-5);
        }
        // Boundary limits: Re F → f and Im F → Hf.
        let t: f64 = 1.234;
        let p = poisson_extend(&f, 0.999999 * t.cos(), 0.999999 * t.sin()).unwrap();
        assert!((p.value - f.eval(t)).abs() < 1e-4);
        assert!((p.conjugate_value - hf.eval(t)).abs() < 1e-4);
    }

    #[test]
    fn norm_constants() {
        assert_abs_diff_eq!(hp_constant(2.0).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(hp_constant(4.0).unwrap(), 1.0 + 2f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(hp_constant(4.0 / 3.0).unwrap(), 1.0 + 2f64.sqrt(), epsilon = 1e-12);
        for p in [1.1, 1.5, 2.5, 3.0, 7.0, 30.0] {
            let q = conjugate_exponent(p).unwrap();
            assert_abs_diff_eq!(hp_constant(p).unwrap(), hp_constant(q).unwrap(), epsilon = 1e-10);
            assert_abs_diff_eq!(mp_constant(p).unwrap(), mp_constant(q).unwrap(), epsilon = 1e-10);
        }
        assert_eq!(mp_constant(2.0).unwrap(), 1.0);
        assert_eq!(mp_constant(3.0).unwrap(), 2.0);
        assert!(hp_constant(1.0).is_err());
        assert!(mp_constant(0.5).is_err());
    }

    #[test]
    fn json_round_trip() {
        let f = FourierSeries::from_trig(0.5, &[1.0], &[0.0, 2.0]);
        let back = FourierSeries::from_json(&f.to_json()).unwrap();
        assert_eq!(back, f);
        assert!(f.is_real(0.0));
    }

    #[test]
    fn from_samples_recovers_modes() {
        let f = FourierSeries::from_trig(0.1, &[0.3, -0.2], &[0.0, 0.0, 1.0]);
        let g = FourierSeries::from_samples(&f.samples(64), 3).unwrap();
        for n in -3..=3 {
            assert!((g.coeff(n) - f.coeff(n)).norm() < 1e-14);
        }
    }
}

//! Digital Butterworth low-pass design and forward-backward application.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterSpec {
    pub order: usize,
    pub cutoff_hz: f64,
    pub sample_rate_hz: f64,
}

impl FilterSpec {
    pub fn new(order: usize, cutoff_hz: f64, sample_rate_hz: f64) -> Self {
        FilterSpec {
            order,
            cutoff_hz,
            sample_rate_hz,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.order == 0 {
            return Err(Error::FilterDesign("order must be at least 1".into()));
        }
        if !(self.sample_rate_hz.is_finite() && self.sample_rate_hz > 0.0) {
            return Err(Error::FilterDesign(format!(
                "sample rate must be positive, got {}",
                self.sample_rate_hz
            )));
        }
        if !(self.cutoff_hz > 0.0 && self.cutoff_hz < self.sample_rate_hz / 2.0) {
            return Err(Error::FilterDesign(format!(
                "cutoff {} Hz must lie in (0, {}) Hz",
                self.cutoff_hz,
                self.sample_rate_hz / 2.0
            )));
        }
        Ok(())
    }
}

/// One second-order (or, with `b[2] = a[2] = 0`, first-order) section in
/// direct form II transposed. `a[0]` is always 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Section {
    pub b: [f64; 3],
    pub a: [f64; 3],
}

impl Section {
    fn dc_gain(&self) -> f64 {
        self.b.iter().sum::<f64>() / self.a.iter().sum::<f64>()
    }

    fn response(&self, z_inv: Complex64) -> Complex64 {
        let num = self.b[0] + z_inv * (self.b[1] + z_inv * self.b[2]);
        let den = self.a[0] + z_inv * (self.a[1] + z_inv * self.a[2]);
        num / den
    }

    /// Filter state at sample 0 for which an affine input `c + s·n`
    /// produces its affine steady-state output with no transient. Returns
    /// the state and the output's `(offset, slope)`.
    fn affine_state(&self, c: f64, s: f64) -> ([f64; 2], (f64, f64)) {
        let [b0, b1, b2] = self.b;
        let [_, a1, a2] = self.a;
        let b_sum = b0 + b1 + b2;
        let a_sum = 1.0 + a1 + a2;
        let gain = b_sum / a_sum;
        let b_moment = b1 + 2.0 * b2;
        let a_moment = a1 + 2.0 * a2;
        // first moment of the impulse response, sum_k k h[k]
        let moment = (b_moment * a_sum - b_sum * a_moment) / (a_sum * a_sum);
        let q = gain * s;
        let p = gain * c - s * moment;
        let u = |n: f64| c + s * n;
        let y = |n: f64| p + q * n;
        let z2 = b2 * u(-1.0) - a2 * y(-1.0);
        let z1 = b1 * u(-1.0) - a1 * y(-1.0) + b2 * u(-2.0) - a2 * y(-2.0);
        ([z1, z2], (p, q))
    }

    fn run(&self, x: &mut [f64], mut z: [f64; 2]) {
        let [b0, b1, b2] = self.b;
        let [_, a1, a2] = self.a;
        for v in x.iter_mut() {
            let input = *v;
            let out = b0 * input + z[0];
            z[0] = b1 * input - a1 * out + z[1];
            z[1] = b2 * input - a2 * out;
            *v = out;
        }
    }
}

/// A designed low-pass filter held as a cascade of sections.
#[derive(Debug, Clone, PartialEq)]
pub struct Lowpass {
    pub spec: FilterSpec,
    pub sections: Vec<Section>,
}

impl Lowpass {
    pub fn order(&self) -> usize {
        self.spec.order
    }

    /// Expands the cascade into a single rational transfer function
    /// `(b, a)` in powers of `z^-1`, both of length `order + 1`.
    pub fn transfer_function(&self) -> (Vec<f64>, Vec<f64>) {
        let mut b = vec![1.0];
        let mut a = vec![1.0];
        for s in &self.sections {
            let width = if s.a[2] == 0.0 && s.b[2] == 0.0 { 2 } else { 3 };
            b = poly_mul(&b, &s.b[..width]);
            a = poly_mul(&a, &s.a[..width]);
        }
        (b, a)
    }

    pub fn dc_gain(&self) -> f64 {
        self.sections.iter().map(Section::dc_gain).product()
    }

    /// Complex frequency response at `freq_hz`.
    pub fn response(&self, freq_hz: f64) -> Complex64 {
        let w = 2.0 * PI * freq_hz / self.spec.sample_rate_hz;
        let z_inv = Complex64::from_polar(1.0, -w);
        self.sections
            .iter()
            .map(|s| s.response(z_inv))
            .fold(Complex64::new(1.0, 0.0), |acc, h| acc * h)
    }

    pub fn magnitude(&self, freq_hz: f64) -> f64 {
        self.response(freq_hz).norm()
    }

    /// Single causal pass with transient-free initial state for the affine
    /// trend of the first `fit_len` samples.
    fn apply_causal(&self, x: &mut [f64], fit_len: usize) {
        let (mut c, mut s) = affine_fit(&x[..fit_len.min(x.len())]);
        for section in &self.sections {
            let (z, (p, q)) = section.affine_state(c, s);
            section.run(x, z);
            c = p;
            s = q;
        }
    }
}

fn poly_mul(p: &[f64], q: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; p.len() + q.len() - 1];
    for (i, a) in p.iter().enumerate() {
        for (j, b) in q.iter().enumerate() {
            out[i + j] += a * b;
        }
    }
    out
}

/// Least-squares line `c + s·n` through `x[n]`.
fn affine_fit(x: &[f64]) -> (f64, f64) {
    let n = x.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    if n == 1 {
        return (x[0], 0.0);
    }
    let nf = n as f64;
    let mean_n = (nf - 1.0) / 2.0;
    let mean_x = x.iter().sum::<f64>() / nf;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (k, v) in x.iter().enumerate() {
        let dn = k as f64 - mean_n;
        sxy += dn * (v - mean_x);
        sxx += dn * dn;
    }
    let slope = sxy / sxx;
    (mean_x - slope * mean_n, slope)
}

/// Designs a Butterworth low-pass by bilinear transform of the analog
/// prototype, with the cutoff prewarped so that the digital magnitude at
/// `cutoff_hz` is exactly `1/√2`. Each section is normalized to unit DC
/// gain.
pub fn design_lowpass(spec: &FilterSpec) -> Result<Lowpass> {
    spec.validate()?;
    let n = spec.order;
    let k = (PI * spec.cutoff_hz / spec.sample_rate_hz).tan();
    let mut sections = Vec::with_capacity(n.div_ceil(2));

    for idx in 0..n / 2 {
        // upper-half-plane member of each conjugate pair of prototype poles
        let angle = PI * (2 * idx + n + 1) as f64 / (2 * n) as f64;
        let p = Complex64::from_polar(1.0, angle);
        let z = (1.0 + k * p) / (1.0 - k * p);
        let a1 = -2.0 * z.re;
        let a2 = z.norm_sqr();
        let g = (1.0 + a1 + a2) / 4.0;
        sections.push(Section {
            b: [g, 2.0 * g, g],
            a: [1.0, a1, a2],
        });
    }
    if n % 2 == 1 {
        let z = (1.0 - k) / (1.0 + k);
        let g = (1.0 - z) / 2.0;
        sections.push(Section {
            b: [g, g, 0.0],
            a: [1.0, -z, 0.0],
        });
    }
    Ok(Lowpass {
        spec: *spec,
        sections,
    })
}

/// Edge padding used by [`filtfilt`]: three samples per filter order.
pub fn pad_len(filter: &Lowpass) -> usize {
    3 * filter.order()
}

/// Zero-phase filtering: odd-reflection padding, a forward pass, then a
/// backward pass. Each pass starts from the steady state of the local
/// affine trend, so constant and linear inputs pass through unchanged.
pub fn filtfilt(series: &[f64], filter: &Lowpass) -> Result<Vec<f64>> {
    let pad = pad_len(filter);
    let n = series.len();
    if n <= pad {
        return Err(Error::TooShort {
            len: n,
            required: pad,
        });
    }
    let first = series[0];
    let last = series[n - 1];
    let mut ext = Vec::with_capacity(n + 2 * pad);
    ext.extend((1..=pad).rev().map(|k| 2.0 * first - series[k]));
    ext.extend_from_slice(series);
    ext.extend((1..=pad).map(|k| 2.0 * last - series[n - 1 - k]));

    let fit = pad + 1;
    filter.apply_causal(&mut ext, fit);
    ext.reverse();
    filter.apply_causal(&mut ext, fit);
    ext.reverse();
    Ok(ext[pad..pad + n].to_vec())
}

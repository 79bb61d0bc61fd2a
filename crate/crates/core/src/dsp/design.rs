use std::f64::consts::PI;

use rustfft::num_complex::Complex64;

use super::{Biquad, BiquadCascade, DspError};

/// Butterworth band-pass as a cascade of `order` biquads.
///
/// `order` is the order of the low-pass prototype; the band-pass has
/// `2 * order` poles. It must be even so every prototype pole has a complex
/// conjugate partner and the poles pair into real biquads. Band edges are
/// pre-warped for the bilinear transform, and each section is normalized to
/// unit gain at the geometric band centre.
pub fn design_bandpass(fs: f64, lo: f64, hi: f64, order: usize) -> Result<BiquadCascade, DspError> {
    if !(fs > 0.0 && fs.is_finite()) {
        return Err(DspError::Design(format!(
            "sample rate {fs} must be positive"
        )));
    }
    if !(lo > 0.0 && lo < hi && hi < fs / 2.0) {
        return Err(DspError::Design(format!(
            "band edges must satisfy 0 < lo < hi < fs/2, got lo={lo} hi={hi} fs={fs}"
        )));
    }
    if order == 0 || !order.is_multiple_of(2) {
        return Err(DspError::Design(format!(
            "order must be even and positive, got {order}"
        )));
    }

    let k = 2.0 * fs;
    let wl = k * (PI * lo / fs).tan();
    let wh = k * (PI * hi / fs).tan();
    let w0 = (wl * wh).sqrt();
    let bw = wh - wl;
    let centre = 2.0 * (w0 / k).atan();

    let n = order as f64;
    let mut sections = Vec::with_capacity(order);
    for i in 0..order / 2 {
        // upper-half-plane prototype pole; its conjugate yields the mirrored biquads
        let theta = PI * (2.0 * i as f64 + n + 1.0) / (2.0 * n);
        let p = Complex64::from_polar(1.0, theta);
        let pb = p * bw;
        let disc = (pb * pb - 4.0 * w0 * w0).sqrt();
        for s in [(pb + disc) / 2.0, (pb - disc) / 2.0] {
            let z = (k + s) / (k - s);
            let mut section = Biquad {
                b0: 1.0,
                b1: 0.0,
                b2: -1.0,
                a1: -2.0 * z.re,
                a2: z.norm_sqr(),
            };
            let g = 1.0 / section.response(centre).norm();
            section.b0 *= g;
            section.b2 *= g;
            sections.push(section);
        }
    }
    BiquadCascade::new(sections)
}

/// Second-order notch at `f0` with quality factor `q`.
pub fn design_notch(fs: f64, f0: f64, q: f64) -> Result<BiquadCascade, DspError> {
    if !(fs > 0.0 && fs.is_finite()) {
        return Err(DspError::Design(format!(
            "sample rate {fs} must be positive"
        )));
    }
    if !(f0 > 0.0 && f0 < fs / 2.0) {
        return Err(DspError::Design(format!(
            "notch frequency {f0} must lie in (0, fs/2 = {})",
            fs / 2.0
        )));
    }
    if !(q > 0.0) {
        return Err(DspError::Design(format!(
            "quality factor {q} must be positive"
        )));
    }
    let w0 = 2.0 * PI * f0 / fs;
    let alpha = w0.sin() / (2.0 * q);
    let a0 = 1.0 + alpha;
    let c = -2.0 * w0.cos();
    BiquadCascade::new(vec![Biquad {
        b0: 1.0 / a0,
        b1: c / a0,
        b2: 1.0 / a0,
        a1: c / a0,
        a2: (1.0 - alpha) / a0,
    }])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bandpass_band_edges() {
        let f = design_bandpass(250.0, 1.0, 30.0, 4).unwrap();
        assert_eq!(f.sections().len(), 4);
        assert!(f.is_stable());
        assert!(f.magnitude_db(10.0, 250.0).abs() <= 1.0);
        assert!(f.magnitude_db(0.1, 250.0) <= -20.0);
        assert!(f.magnitude_db(60.0, 250.0) <= -20.0);
        // -3 dB at both edges for a Butterworth design
        assert!((f.magnitude_db(1.0, 250.0) + 3.0103).abs() < 0.01);
        assert!((f.magnitude_db(30.0, 250.0) + 3.0103).abs() < 0.01);
        let centre = (1.0f64 * 30.0).sqrt();
        assert!(f.magnitude_db(centre, 250.0).abs() < 1e-9);
    }

    #[test]
    fn bandpass_monotone_outside_band() {
        let f = design_bandpass(250.0, 1.0, 30.0, 4).unwrap();
        let below: Vec<f64> = (1..100)
            .map(|i| f.magnitude(i as f64 * 0.01, 250.0))
            .collect();
        assert!(below.windows(2).all(|w| w[1] >= w[0]));
        let above: Vec<f64> = (0..940)
            .map(|i| f.magnitude(30.0 + i as f64 * 0.1, 250.0))
            .collect();
        assert!(above.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn bandpass_rejects_bad_parameters() {
        assert!(design_bandpass(250.0, 1.0, 125.0, 4).is_err());
        assert!(design_bandpass(250.0, 1.0, 30.0, 3).is_err());
        assert!(design_bandpass(250.0, 30.0, 1.0, 4).is_err());
        assert!(design_bandpass(250.0, 0.0, 30.0, 4).is_err());
    }

    #[test]
    fn bandpass_stable_across_rates() {
        for fs in [250.0, 500.0, 1000.0, 2000.0, 4000.0, 8000.0, 16000.0] {
            let f = design_bandpass(fs, 1.0, 30.0, 4).unwrap();
            assert!(f.poles().iter().all(|p| p.norm() < 1.0), "fs={fs}");
            assert!(f.magnitude_db(10.0, fs).abs() <= 1.0, "fs={fs}");
        }
    }

    #[test]
    fn notch_response() {
        let f = design_notch(250.0, 50.0, 30.0).unwrap();
        assert!(f.magnitude_db(50.0, 250.0) <= -30.0);
        assert!(f.magnitude_db(45.0, 250.0) >= -3.0);
        assert!(f.magnitude_db(55.0, 250.0) >= -3.0);
        assert!(f.magnitude_db(10.0, 250.0) >= -0.5);
        let f60 = design_notch(250.0, 60.0, 30.0).unwrap();
        assert!(f60.magnitude_db(60.0, 250.0) <= -30.0);
        assert!(design_notch(250.0, 124.0, 30.0).is_ok());
        assert!(design_notch(250.0, 125.0, 30.0).is_err());
    }
}

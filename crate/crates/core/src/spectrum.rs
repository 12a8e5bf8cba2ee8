//! Pulse spectra: discrete Fourier transform of sampled controls, peak
//! detection, and full-width-at-half-maximum measurement.
//!
//! The transform is normalized as U_k = dt * sum_n u_n exp(-i w_k t_n) on
//! the grid w_k = 2 pi k / (N dt), which makes Parseval exact:
//! sum |u_n|^2 dt = sum |U_k|^2 df with df = 1/(N dt). Spectra are
//! zero-padded by a factor of 8 so peak shapes are resolved well below the
//! physical resolution 2 pi / tau.

use num_complex::Complex64;
use rustfft::FftPlanner;
use std::io::Write;

use crate::error::{Error, Result};
use crate::pulse::SampledPulse;

/// Zero-padding factor applied before the FFT.
pub const ZERO_PAD_FACTOR: usize = 8;

/// Magnitude spectrum of a real sampled pulse over [0, Nyquist].
#[derive(Debug, Clone)]
pub struct Spectrum {
    /// Angular frequency grid in rad/ns, ascending from 0.
    pub frequencies: Vec<f64>,
    /// |U(w_k)| with the dt-scaled DFT normalization.
    pub magnitudes: Vec<f64>,
    /// Grid spacing in rad/ns (after zero padding).
    pub bin_width: f64,
    /// Physical resolution 2 pi / tau of the unpadded signal.
    pub resolution: f64,
}

/// One detected spectral peak.
#[derive(Debug, Clone, Copy)]
pub struct Peak {
    /// Bin index of the local maximum.
    pub bin: usize,
    /// Angular frequency of the maximum, rad/ns.
    pub center: f64,
    /// Peak magnitude.
    pub height: f64,
    /// Full width at half maximum in rad/ns, when both half-height
    /// crossings exist near the peak.
    pub fwhm: Option<f64>,
}

/// Spectrum plus the peaks found at requested centers.
#[derive(Debug, Clone)]
pub struct SpectrumReport {
    pub spectrum: Spectrum,
    pub peaks: Vec<Peak>,
}

impl Spectrum {
    pub fn nyquist(&self) -> f64 {
        *self.frequencies.last().unwrap()
    }

    pub fn max_magnitude(&self) -> f64 {
        self.magnitudes.iter().cloned().fold(0.0, f64::max)
    }

    /// Locate the local maximum nearest to `center` and measure it.
    pub fn peak_near(&self, center: f64) -> Result<Peak> {
        if center < 0.0 || center > self.nyquist() {
            return Err(Error::OutsideNyquist { omega: center, nyquist: self.nyquist() });
        }
        let start = (center / self.bin_width).round() as usize;
        let start = start.min(self.magnitudes.len() - 1);
        // Hill-climb to the nearest local maximum.
        let mut k = start;
        loop {
            let left = if k > 0 { self.magnitudes[k - 1] } else { f64::NEG_INFINITY };
            let right = if k + 1 < self.magnitudes.len() {
                self.magnitudes[k + 1]
            } else {
                f64::NEG_INFINITY
            };
            if left > self.magnitudes[k] && left >= right {
                k -= 1;
            } else if right > self.magnitudes[k] {
                k += 1;
            } else {
                break;
            }
        }
        Ok(self.measure_peak(k))
    }

    fn measure_peak(&self, k: usize) -> Peak {
        Peak {
            bin: k,
            center: self.frequencies[k],
            height: self.magnitudes[k],
            fwhm: self.fwhm_at(k),
        }
    }

    /// FWHM by linear interpolation at the half-height crossings around bin
    /// k. A crossing must appear within 20 unpadded resolution bins on each
    /// side, otherwise the width is reported missing.
    fn fwhm_at(&self, k: usize) -> Option<f64> {
        let half = 0.5 * self.magnitudes[k];
        if half <= 0.0 {
            return None;
        }
        let window = 20 * (self.resolution / self.bin_width).round() as usize;
        let lo_limit = k.saturating_sub(window);
        let hi_limit = (k + window).min(self.magnitudes.len() - 1);

        let mut left = None;
        for i in (lo_limit..k).rev() {
            if self.magnitudes[i] <= half {
                let f = (half - self.magnitudes[i]) / (self.magnitudes[i + 1] - self.magnitudes[i]);
                left = Some(self.frequencies[i] + f * self.bin_width);
                break;
            }
        }
        let mut right = None;
        for i in (k + 1)..=hi_limit {
            if self.magnitudes[i] <= half {
                let f = (self.magnitudes[i - 1] - half) / (self.magnitudes[i - 1] - self.magnitudes[i]);
                right = Some(self.frequencies[i - 1] + f * self.bin_width);
                break;
            }
        }
        match (left, right) {
            (Some(l), Some(r)) => Some(r - l),
            _ => None,
        }
    }

    /// Local maxima with height at least `height_frac` of the global max and
    /// topographic prominence at least `prominence_frac` of it. Prominence
    /// filtering keeps window sidelobes on a strong peak's skirt from being
    /// counted as peaks of their own.
    pub fn find_peaks(&self, height_frac: f64, prominence_frac: f64) -> Vec<Peak> {
        let hmax = self.max_magnitude();
        if hmax == 0.0 {
            return Vec::new();
        }
        let n = self.magnitudes.len();
        let mut out = Vec::new();
        for k in 1..n - 1 {
            let m = self.magnitudes[k];
            if m < height_frac * hmax {
                continue;
            }
            if m < self.magnitudes[k - 1] || m <= self.magnitudes[k + 1] {
                continue;
            }
            // Prominence: height above the higher of the two key saddles,
            // walking outward until a taller point is found on each side.
            let mut left_min = m;
            let mut i = k;
            while i > 0 {
                i -= 1;
                left_min = left_min.min(self.magnitudes[i]);
                if self.magnitudes[i] > m {
                    break;
                }
            }
            let mut right_min = m;
            let mut i = k;
            while i + 1 < n {
                i += 1;
                right_min = right_min.min(self.magnitudes[i]);
                if self.magnitudes[i] > m {
                    break;
                }
            }
            let prominence = m - left_min.max(right_min);
            if prominence >= prominence_frac * hmax {
                out.push(self.measure_peak(k));
            }
        }
        out
    }

    /// Dominant peaks in a frequency band: local maxima at or above
    /// `height_frac` of the band maximum, merged so that only the highest
    /// survives within `merge_radius` (this folds window sidelobes and
    /// near-peak ripple into their parent lobe). Returned sorted by
    /// frequency.
    pub fn banded_peak_clusters(
        &self,
        omega_min: f64,
        omega_max: f64,
        height_frac: f64,
        merge_radius: f64,
    ) -> Vec<Peak> {
        let lo = (omega_min / self.bin_width).ceil() as usize;
        let hi = ((omega_max / self.bin_width).floor() as usize).min(self.magnitudes.len() - 1);
        if lo + 1 >= hi {
            return Vec::new();
        }
        let band_max = self.magnitudes[lo..=hi].iter().cloned().fold(0.0, f64::max);
        if band_max == 0.0 {
            return Vec::new();
        }
        let mut candidates: Vec<usize> = (lo.max(1)..hi)
            .filter(|&k| {
                self.magnitudes[k] >= height_frac * band_max
                    && self.magnitudes[k] >= self.magnitudes[k - 1]
                    && self.magnitudes[k] > self.magnitudes[k + 1]
            })
            .collect();
        candidates.sort_by(|&a, &b| self.magnitudes[b].total_cmp(&self.magnitudes[a]));
        let mut kept: Vec<usize> = Vec::new();
        for k in candidates {
            if kept
                .iter()
                .all(|&m| (self.frequencies[k] - self.frequencies[m]).abs() > merge_radius)
            {
                kept.push(k);
            }
        }
        kept.sort_unstable();
        kept.into_iter().map(|k| self.measure_peak(k)).collect()
    }

    pub fn write_csv<W: Write>(&self, mut w: W, preamble: &[String]) -> Result<()> {
        for line in preamble {
            writeln!(w, "# {line}")?;
        }
        writeln!(w, "omega_rad_per_ns,magnitude")?;
        for (f, m) in self.frequencies.iter().zip(&self.magnitudes) {
            writeln!(w, "{:.9},{:.12e}", f, m)?;
        }
        Ok(())
    }
}

/// Magnitude spectrum of a sampled pulse.
pub fn spectrum(pulse: &SampledPulse) -> Result<Spectrum> {
    let n = pulse.len();
    if n < 2 {
        return Err(Error::InvalidParameter("spectrum needs at least 2 samples".into()));
    }
    let dt = pulse.dt();
    let n_fft = n * ZERO_PAD_FACTOR;
    let mut buf: Vec<Complex64> = pulse
        .samples()
        .iter()
        .map(|&s| Complex64::new(s, 0.0))
        .chain(std::iter::repeat(Complex64::new(0.0, 0.0)).take(n_fft - n))
        .collect();
    FftPlanner::new().plan_fft_forward(n_fft).process(&mut buf);

    let n_keep = n_fft / 2 + 1;
    let bin_width = 2.0 * std::f64::consts::PI / (n_fft as f64 * dt);
    let frequencies: Vec<f64> = (0..n_keep).map(|k| k as f64 * bin_width).collect();
    let magnitudes: Vec<f64> = buf[..n_keep].iter().map(|z| z.norm() * dt).collect();
    Ok(Spectrum {
        frequencies,
        magnitudes,
        bin_width,
        resolution: 2.0 * std::f64::consts::PI / pulse.duration(),
    })
}

/// Spectrum with peak measurements at the requested centers.
pub fn spectrum_with_peaks(pulse: &SampledPulse, peak_centers: &[f64]) -> Result<SpectrumReport> {
    let spec = spectrum(pulse)?;
    let peaks = peak_centers
        .iter()
        .map(|&c| spec.peak_near(c))
        .collect::<Result<Vec<_>>>()?;
    Ok(SpectrumReport { spectrum: spec, peaks })
}

/// Both sides of the Parseval identity (time-domain, frequency-domain) for
/// diagnostic checks; df = 1/(N dt) over the full two-sided spectrum.
pub fn parseval_pair(pulse: &SampledPulse) -> Result<(f64, f64)> {
    let n = pulse.len();
    let dt = pulse.dt();
    let n_fft = n * ZERO_PAD_FACTOR;
    let mut buf: Vec<Complex64> = pulse
        .samples()
        .iter()
        .map(|&s| Complex64::new(s, 0.0))
        .chain(std::iter::repeat(Complex64::new(0.0, 0.0)).take(n_fft - n))
        .collect();
    FftPlanner::new().plan_fft_forward(n_fft).process(&mut buf);
    let time_side: f64 = pulse.samples().iter().map(|s| s * s * dt).sum();
    let df = 1.0 / (n_fft as f64 * dt);
    let freq_side: f64 = buf.iter().map(|z| z.norm_sqr() * dt * dt * df).sum();
    Ok((time_side, freq_side))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pulse::{flattop, SampledPulse, Tone, TonePulse};
    use approx::assert_abs_diff_eq;

    #[test]
    fn pure_cosine_peak_location_and_width() {
        let w0 = 45.0;
        let tau = 30.0;
        let p = TonePulse::new(
            vec![Tone { amplitude: 1.0, frequency: w0, phase: 0.0 }],
            tau,
            crate::pulse::Envelope::None,
        )
        .unwrap()
        .sample(0.01)
        .unwrap();
        let report = spectrum_with_peaks(&p, &[w0]).unwrap();
        let peak = &report.peaks[0];
        assert!((peak.center - w0).abs() < report.spectrum.resolution);
        // Truncated-cosine main lobe: FWHM of order 2 pi * 0.886 / tau.
        let sinc_fwhm = 2.0 * std::f64::consts::PI * 0.886 / tau;
        let fwhm = peak.fwhm.expect("fwhm resolved");
        assert!(fwhm > 0.5 * sinc_fwhm && fwhm < 2.0 * sinc_fwhm, "fwhm = {fwhm}");
        assert!(fwhm >= report.spectrum.resolution * 0.99);
    }

    #[test]
    fn bichromatic_shows_two_peaks() {
        let (w1, w2) = (41.0, 46.0);
        let p = TonePulse::bichromatic(0.5, w1, 0.5, w2, 30.0).unwrap().sample(0.01).unwrap();
        let spec = spectrum(&p).unwrap();
        let peaks = spec.find_peaks(0.5, 0.25);
        assert_eq!(peaks.len(), 2, "peaks: {peaks:?}");
        assert!((peaks[0].center - w1).abs() < spec.resolution);
        assert!((peaks[1].center - w2).abs() < spec.resolution);
    }

    #[test]
    fn banded_clusters_ignore_out_of_band_pedestal() {
        // Flattop pedestal at DC plus one tone: the band analysis sees only
        // the tone.
        let w0 = 45.0;
        let tau = 30.0;
        let n = 3000;
        let dt = 0.01;
        let samples: Vec<f64> = (0..n)
            .map(|k| {
                let t = (k as f64 + 0.5) * dt;
                let env = crate::pulse::flattop_envelope(t, tau, 2.0);
                env * (0.5 + 0.8 * (w0 * t).cos())
            })
            .collect();
        let p = SampledPulse::new(samples, dt).unwrap();
        let spec = spectrum(&p).unwrap();
        let peaks = spec.banded_peak_clusters(5.0, spec.nyquist(), 0.1, 1.0);
        assert_eq!(peaks.len(), 1, "peaks: {peaks:?}");
        assert!((peaks[0].center - w0).abs() < spec.resolution);
    }

    #[test]
    fn zero_pulse_is_silent() {
        let p = SampledPulse::zeros(10.0, 0.01).unwrap();
        let spec = spectrum(&p).unwrap();
        assert_abs_diff_eq!(spec.max_magnitude(), 0.0);
        assert!(spec.find_peaks(0.1, 0.05).is_empty());
    }

    #[test]
    fn parseval_identity() {
        let p = flattop(20.0, 0.8, 2.0, 0.01).unwrap();
        let (t_side, f_side) = parseval_pair(&p).unwrap();
        assert_abs_diff_eq!(t_side, f_side, epsilon = 1e-8 * t_side.abs());
    }

    #[test]
    fn peak_request_outside_nyquist_errors() {
        let p = SampledPulse::zeros(1.0, 0.01).unwrap();
        let spec = spectrum(&p).unwrap();
        assert!(spec.peak_near(1e4).is_err());
    }
}

//! Control fields: analytic multi-tone pulses, uniformly sampled envelopes,
//! flattop generation, and Rabi-rate synchronization.
//!
//! Sampled pulses hold one amplitude per propagation segment. Sample n is
//! the value on [n*dt, (n+1)*dt), nominally at the segment midpoint; the
//! duration is len*dt. Flattop edges use half-Blackman ramps that reach
//! exactly zero at the first and last segment midpoints, so evaluation at
//! t = 0 and t = tau is exactly zero.

use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::spin::{rabi_sync_ratio, TwoQubitAnalytic};

/// One cosine drive component O cos(w t + phi).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tone {
    /// Amplitude in rad/ns, nonnegative.
    pub amplitude: f64,
    /// Frequency in rad/ns.
    pub frequency: f64,
    /// Phase in rad.
    pub phase: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Envelope {
    None,
    Flattop { rise_time: f64 },
}

/// Analytic multi-tone pulse over [0, tau].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TonePulse {
    pub tones: Vec<Tone>,
    pub duration: f64,
    pub envelope: Envelope,
}

impl TonePulse {
    pub fn new(tones: Vec<Tone>, duration: f64, envelope: Envelope) -> Result<Self> {
        if duration <= 0.0 {
            return Err(Error::InvalidParameter("pulse duration must be positive".into()));
        }
        if tones.iter().any(|t| t.amplitude < 0.0) {
            return Err(Error::InvalidParameter("tone amplitudes must be >= 0".into()));
        }
        if let Envelope::Flattop { rise_time } = envelope {
            check_rise_time(duration, rise_time)?;
        }
        Ok(Self { tones, duration, envelope })
    }

    /// Bichromatic pulse at two frequencies, zero phases.
    pub fn bichromatic(omega1: f64, freq1: f64, omega2: f64, freq2: f64, duration: f64) -> Result<Self> {
        Self::new(
            vec![
                Tone { amplitude: omega1, frequency: freq1, phase: 0.0 },
                Tone { amplitude: omega2, frequency: freq2, phase: 0.0 },
            ],
            duration,
            Envelope::None,
        )
    }

    pub fn evaluate(&self, t: f64) -> Result<f64> {
        if !(0.0..=self.duration).contains(&t) {
            return Err(Error::PulseOutOfRange { t, duration: self.duration });
        }
        let env = match self.envelope {
            Envelope::None => 1.0,
            Envelope::Flattop { rise_time } => flattop_envelope(t, self.duration, rise_time),
        };
        Ok(env
            * self
                .tones
                .iter()
                .map(|tone| tone.amplitude * (tone.frequency * t + tone.phase).cos())
                .sum::<f64>())
    }

    /// Discretize onto a uniform grid of segments of width dt, sampling at
    /// segment midpoints.
    pub fn sample(&self, dt: f64) -> Result<SampledPulse> {
        let n = segments_for(self.duration, dt)?;
        let samples: Vec<f64> = (0..n)
            .map(|k| self.evaluate(((k as f64 + 0.5) * dt).min(self.duration)))
            .collect::<Result<_>>()?;
        SampledPulse::new(samples, dt)
    }
}

/// Rescale the first tone so the two effective Rabi rates coincide.
///
/// Expects exactly two tones addressing the two NOT-gate transitions. The
/// second tone's amplitude is kept; the first becomes ratio * O2 with the
/// ratio fixed by the drift mixing angles. The common effective rate equals
/// O2 * (cos xi2 + sin xi2) and pi over that rate is the nominal flip time.
pub fn synchronize_rabi(pulse: &TonePulse, analytic: &TwoQubitAnalytic) -> Result<TonePulse> {
    if pulse.tones.len() != 2 {
        return Err(Error::InvalidParameter(format!(
            "rabi synchronization expects 2 tones, got {}",
            pulse.tones.len()
        )));
    }
    let ratio = rabi_sync_ratio(analytic)?;
    let mut out = pulse.clone();
    out.tones[0].amplitude = ratio * out.tones[1].amplitude;
    Ok(out)
}

/// Common effective Rabi rate of a synchronized bichromatic pulse.
pub fn effective_rabi_rate(pulse: &TonePulse, analytic: &TwoQubitAnalytic) -> f64 {
    pulse.tones[1].amplitude * analytic.factor2()
}

/// Uniformly sampled real control; one value per propagation segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledPulse {
    samples: Vec<f64>,
    dt: f64,
}

impl SampledPulse {
    pub fn new(samples: Vec<f64>, dt: f64) -> Result<Self> {
        if dt <= 0.0 {
            return Err(Error::InvalidParameter("dt must be positive".into()));
        }
        if samples.is_empty() {
            return Err(Error::InvalidParameter("pulse needs at least one sample".into()));
        }
        if let Some(k) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite sample at index {k}")));
        }
        Ok(Self { samples, dt })
    }

    pub fn zeros(duration: f64, dt: f64) -> Result<Self> {
        let n = segments_for(duration, dt)?;
        Self::new(vec![0.0; n], dt)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [f64] {
        &mut self.samples
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 * self.dt
    }

    /// Nominal time of sample k (segment midpoint).
    pub fn sample_time(&self, k: usize) -> f64 {
        (k as f64 + 0.5) * self.dt
    }

    /// Linear interpolation between midpoint samples, clamped at the ends.
    pub fn evaluate(&self, t: f64) -> Result<f64> {
        if !(0.0..=self.duration() + 1e-12).contains(&t) {
            return Err(Error::PulseOutOfRange { t, duration: self.duration() });
        }
        let x = t / self.dt - 0.5;
        if x <= 0.0 {
            return Ok(self.samples[0]);
        }
        let last = self.samples.len() - 1;
        if x >= last as f64 {
            return Ok(self.samples[last]);
        }
        let k = x.floor() as usize;
        let frac = x - k as f64;
        Ok(self.samples[k] * (1.0 - frac) + self.samples[k + 1] * frac)
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, s| m.max(s.abs()))
    }

    /// Split every segment into `factor` equal sub-segments with the same
    /// amplitude. The pulse is unchanged as a function of time; only the
    /// propagation grid refines.
    pub fn refine(&self, factor: usize) -> Result<Self> {
        if factor == 0 {
            return Err(Error::InvalidParameter("refine factor must be >= 1".into()));
        }
        let samples = self
            .samples
            .iter()
            .flat_map(|&s| std::iter::repeat(s).take(factor))
            .collect();
        Self::new(samples, self.dt / factor as f64)
    }

    /// Write as CSV `t_ns,amplitude`, one row per sample at its midpoint
    /// time. Extra header lines (e.g. a config hash) go in `preamble`.
    pub fn write_csv<W: Write>(&self, mut w: W, preamble: &[String]) -> Result<()> {
        for line in preamble {
            writeln!(w, "# {line}")?;
        }
        writeln!(w, "t_ns,amplitude")?;
        for (k, s) in self.samples.iter().enumerate() {
            writeln!(w, "{:.6},{:.12e}", self.sample_time(k), s)?;
        }
        Ok(())
    }

    /// Read back a pulse written by [`write_csv`]; dt is inferred from the
    /// time column.
    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut times = Vec::new();
        let mut values = Vec::new();
        for line in r.lines() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with("t_ns") {
                continue;
            }
            let mut parts = line.split(',');
            let t: f64 = parts
                .next()
                .ok_or_else(|| Error::Config("missing time column".into()))?
                .trim()
                .parse()
                .map_err(|e| Error::Config(format!("bad time value: {e}")))?;
            let v: f64 = parts
                .next()
                .ok_or_else(|| Error::Config("missing amplitude column".into()))?
                .trim()
                .parse()
                .map_err(|e| Error::Config(format!("bad amplitude value: {e}")))?;
            times.push(t);
            values.push(v);
        }
        if times.len() < 2 {
            return Err(Error::Config("pulse CSV needs at least two samples".into()));
        }
        let dt = times[1] - times[0];
        Self::new(values, dt)
    }
}

fn check_rise_time(duration: f64, rise_time: f64) -> Result<()> {
    if rise_time <= 0.0 || 2.0 * rise_time > duration {
        return Err(Error::InvalidParameter(format!(
            "rise time {rise_time} ns invalid for duration {duration} ns"
        )));
    }
    Ok(())
}

/// Half-Blackman ramp: 0 at x = 0, 1 at x = 1, monotone, zero slope at both
/// ends.
fn blackman_ramp(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    0.42 - 0.5 * (std::f64::consts::PI * x).cos() + 0.08 * (2.0 * std::f64::consts::PI * x).cos()
}

/// Flattop window on [0, tau]: Blackman rise over [0, t_r], flat 1, Blackman
/// fall over [tau - t_r, tau].
pub fn flattop_envelope(t: f64, duration: f64, rise_time: f64) -> f64 {
    if t <= 0.0 || t >= duration {
        return 0.0;
    }
    if t < rise_time {
        blackman_ramp(t / rise_time)
    } else if t > duration - rise_time {
        blackman_ramp((duration - t) / rise_time)
    } else {
        1.0
    }
}

/// Flattop pulse sampled onto the propagation grid.
///
/// The edges are shifted half a segment inward so the first and last samples
/// are exactly zero; evaluation at t = 0 and t = tau is then exactly zero as
/// well.
pub fn flattop(duration: f64, amplitude: f64, rise_time: f64, dt: f64) -> Result<SampledPulse> {
    check_rise_time(duration, rise_time)?;
    let n = segments_for(duration, dt)?;
    let t0 = 0.5 * dt;
    let t1 = duration - 0.5 * dt;
    let samples: Vec<f64> = (0..n)
        .map(|k| {
            let t = (k as f64 + 0.5) * dt;
            amplitude * flattop_envelope(t - t0, t1 - t0, rise_time)
        })
        .collect();
    SampledPulse::new(samples, dt)
}

/// Number of propagation segments for a duration, requiring dt to divide it.
pub fn segments_for(duration: f64, dt: f64) -> Result<usize> {
    if dt <= 0.0 || duration <= 0.0 {
        return Err(Error::InvalidParameter("duration and dt must be positive".into()));
    }
    let n = duration / dt;
    let rounded = n.round();
    if (n - rounded).abs() > 1e-6 || rounded < 1.0 {
        return Err(Error::InvalidParameter(format!(
            "dt = {dt} ns does not divide duration = {duration} ns"
        )));
    }
    Ok(rounded as usize)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn constant_tone() {
        let p = TonePulse::new(
            vec![Tone { amplitude: 1.0, frequency: 0.0, phase: 0.0 }],
            10.0,
            Envelope::None,
        )
        .unwrap();
        assert_abs_diff_eq!(p.evaluate(0.0).unwrap(), 1.0);
        assert_abs_diff_eq!(p.evaluate(7.3).unwrap(), 1.0);
    }

    #[test]
    fn bichromatic_origin_value() {
        let p = TonePulse::bichromatic(0.3, 41.0, 0.2, 46.0, 5.0).unwrap();
        assert_abs_diff_eq!(p.evaluate(0.0).unwrap(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn opposite_phases_cancel_at_origin() {
        let p = TonePulse::new(
            vec![
                Tone { amplitude: 0.4, frequency: 41.0, phase: 0.0 },
                Tone { amplitude: 0.4, frequency: 46.0, phase: PI },
            ],
            5.0,
            Envelope::None,
        )
        .unwrap();
        assert_abs_diff_eq!(p.evaluate(0.0).unwrap(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn evaluate_rejects_out_of_range() {
        let p = TonePulse::bichromatic(0.1, 1.0, 0.1, 2.0, 5.0).unwrap();
        assert!(p.evaluate(-0.1).is_err());
        assert!(p.evaluate(5.1).is_err());
    }

    #[test]
    fn flattop_boundary_and_center() {
        let p = flattop(50.0, 0.7, 2.5, 0.01).unwrap();
        assert_abs_diff_eq!(p.evaluate(0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(p.evaluate(50.0).unwrap(), 0.0);
        assert_abs_diff_eq!(p.evaluate(25.0).unwrap(), 0.7, epsilon = 1e-12);
    }

    #[test]
    fn flattop_monotone_rise() {
        let p = flattop(10.0, 1.0, 2.0, 0.01).unwrap();
        let mut prev = -1.0;
        let mut t = 0.0;
        while t <= 2.0 {
            let v = p.evaluate(t).unwrap();
            assert!(v >= prev - 1e-12, "not monotone at t = {t}");
            prev = v;
            t += 0.05;
        }
    }

    #[test]
    fn flattop_rejects_bad_rise() {
        assert!(flattop(10.0, 1.0, 6.0, 0.01).is_err());
        assert!(flattop(10.0, 1.0, 0.0, 0.01).is_err());
    }

    #[test]
    fn sync_is_idempotent() {
        let ana = TwoQubitAnalytic::new(20.0 * PI, 14.0 * PI, 5.0).unwrap();
        let p = TonePulse::bichromatic(0.1, ana.omega_rf1(), 0.1, ana.omega_rf2(), 50.0).unwrap();
        let s1 = synchronize_rabi(&p, &ana).unwrap();
        let s2 = synchronize_rabi(&s1, &ana).unwrap();
        assert_abs_diff_eq!(s1.tones[0].amplitude, s2.tones[0].amplitude, epsilon = 1e-15);
        assert_abs_diff_eq!(s1.tones[1].amplitude, s2.tones[1].amplitude, epsilon = 1e-15);
    }

    #[test]
    fn sync_requires_two_tones() {
        let ana = TwoQubitAnalytic::new(20.0 * PI, 14.0 * PI, 5.0).unwrap();
        let p = TonePulse::new(
            vec![Tone { amplitude: 0.1, frequency: 41.0, phase: 0.0 }],
            5.0,
            Envelope::None,
        )
        .unwrap();
        assert!(synchronize_rabi(&p, &ana).is_err());
    }

    #[test]
    fn segments_require_divisibility() {
        assert_eq!(segments_for(50.0, 0.01).unwrap(), 5000);
        assert!(segments_for(50.0, 0.013).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let p = flattop(2.0, 0.5, 0.5, 0.01).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf, &["config_hash=deadbeef".into()]).unwrap();
        let q = SampledPulse::read_csv(std::io::Cursor::new(buf)).unwrap();
        assert_eq!(p.len(), q.len());
        assert_abs_diff_eq!(p.dt(), q.dt(), epsilon = 1e-9);
        for (a, b) in p.samples().iter().zip(q.samples()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn midpoint_sampling_of_tones() {
        let p = TonePulse::bichromatic(0.2, 41.0, 0.15, 46.0, 1.0).unwrap();
        let s = p.sample(0.01).unwrap();
        assert_eq!(s.len(), 100);
        let t = s.sample_time(37);
        assert_abs_diff_eq!(s.samples()[37], p.evaluate(t).unwrap(), epsilon = 1e-15);
    }
}

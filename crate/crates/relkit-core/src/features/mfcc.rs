//! Deterministic MFCC front-end: framing, pre-emphasis, Hamming window,
//! FFT power spectrum, mel filterbank, log compression, DCT-II.

use super::wav::Waveform;
use crate::featuremap::FeatureSequence;
use crate::{Error, Result};
use rustfft::{num_complex::Complex, FftPlanner};

/// Log floor applied to mel filterbank energies.
pub const LOG_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct MfccConfig {
    pub sample_rate: u32,
    pub frame_width_ms: f64,
    pub frame_stride_ms: f64,
    pub mel_filter_count: usize,
    pub coefficient_count: usize,
    pub fft_size: usize,
    pub pre_emphasis: f64,
    /// Append first and second temporal differences.
    pub include_deltas: bool,
    /// Resample inputs with other rates instead of rejecting them.
    pub allow_resample: bool,
}

impl Default for MfccConfig {
    fn default() -> Self {
        MfccConfig {
            sample_rate: 16_000,
            frame_width_ms: 25.0,
            frame_stride_ms: 20.0,
            mel_filter_count: 26,
            coefficient_count: 13,
            fft_size: 512,
            pre_emphasis: 0.97,
            include_deltas: false,
            allow_resample: false,
        }
    }
}

impl MfccConfig {
    pub fn validate(&self) -> Result<()> {
        if self.frame_width_ms < self.frame_stride_ms {
            return Err(Error::Config(format!(
                "frame width {} ms below stride {} ms",
                self.frame_width_ms, self.frame_stride_ms
            )));
        }
        if self.coefficient_count > self.mel_filter_count {
            return Err(Error::Config(format!(
                "{} coefficients exceed {} mel filters",
                self.coefficient_count, self.mel_filter_count
            )));
        }
        if self.frame_samples() > self.fft_size {
            return Err(Error::Config(format!(
                "frame of {} samples exceeds FFT size {}",
                self.frame_samples(),
                self.fft_size
            )));
        }
        Ok(())
    }

    pub fn frame_samples(&self) -> usize {
        (self.frame_width_ms * self.sample_rate as f64 / 1000.0).round() as usize
    }

    pub fn stride_samples(&self) -> usize {
        (self.frame_stride_ms * self.sample_rate as f64 / 1000.0).round() as usize
    }

    /// floor((n - width) / stride) + 1 frames for n samples.
    pub fn frame_count(&self, samples: usize) -> Result<usize> {
        let width = self.frame_samples();
        if samples < width {
            return Err(Error::Format(format!(
                "utterance of {samples} samples shorter than one {width}-sample frame"
            )));
        }
        Ok((samples - width) / self.stride_samples() + 1)
    }

    pub fn output_dim(&self) -> usize {
        if self.include_deltas {
            self.coefficient_count * 3
        } else {
            self.coefficient_count
        }
    }
}

fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular mel filterbank as per-filter (bin, weight) lists.
fn mel_filterbank(cfg: &MfccConfig) -> Vec<Vec<(usize, f64)>> {
    let bins = cfg.fft_size / 2 + 1;
    let bin_hz = cfg.sample_rate as f64 / cfg.fft_size as f64;
    let mel_lo = hz_to_mel(0.0);
    let mel_hi = hz_to_mel(cfg.sample_rate as f64 / 2.0);
    let points: Vec<f64> = (0..cfg.mel_filter_count + 2)
        .map(|i| {
            mel_to_hz(mel_lo + (mel_hi - mel_lo) * i as f64 / (cfg.mel_filter_count + 1) as f64)
        })
        .collect();
    (0..cfg.mel_filter_count)
        .map(|f| {
            let (lo, center, hi) = (points[f], points[f + 1], points[f + 2]);
            let mut weights = Vec::new();
            for bin in 0..bins {
                let freq = bin as f64 * bin_hz;
                let w = if freq >= lo && freq <= center && center > lo {
                    (freq - lo) / (center - lo)
                } else if freq > center && freq <= hi && hi > center {
                    (hi - freq) / (hi - center)
                } else {
                    0.0
                };
                if w > 0.0 {
                    weights.push((bin, w));
                }
            }
            weights
        })
        .collect()
}

/// Orthonormal DCT-II matrix rows for the kept coefficients.
fn dct_rows(kept: usize, n: usize) -> Vec<Vec<f64>> {
    let norm0 = (1.0 / n as f64).sqrt();
    let norm = (2.0 / n as f64).sqrt();
    (0..kept)
        .map(|k| {
            (0..n)
                .map(|j| {
                    let scale = if k == 0 { norm0 } else { norm };
                    scale
                        * (std::f64::consts::PI * k as f64 * (2.0 * j as f64 + 1.0)
                            / (2.0 * n as f64))
                            .cos()
                })
                .collect()
        })
        .collect()
}

/// Compute MFCC features for a waveform.
pub fn compute_mfcc(wave: &Waveform, cfg: &MfccConfig) -> Result<FeatureSequence<f64>> {
    cfg.validate()?;
    let wave = if wave.sample_rate == cfg.sample_rate {
        wave.clone()
    } else if cfg.allow_resample {
        wave.resample(cfg.sample_rate)
    } else {
        return Err(Error::Format(format!(
            "sample rate {} does not match configured {} (resampling not enabled)",
            wave.sample_rate, cfg.sample_rate
        )));
    };
    let frame_count = cfg.frame_count(wave.samples.len())?;
    let width = cfg.frame_samples();
    let stride = cfg.stride_samples();

    // pre-emphasis over the whole signal
    let raw = wave.normalized();
    let mut signal = Vec::with_capacity(raw.len());
    signal.push(raw[0]);
    for i in 1..raw.len() {
        signal.push(raw[i] - cfg.pre_emphasis * raw[i - 1]);
    }

    let window: Vec<f64> = (0..width)
        .map(|i| 0.54 - 0.46 * (2.0 * std::f64::consts::PI * i as f64 / (width as f64 - 1.0)).cos())
        .collect();
    let filters = mel_filterbank(cfg);
    let dct = dct_rows(cfg.coefficient_count, cfg.mel_filter_count);
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(cfg.fft_size);

    let mut frames = Vec::with_capacity(frame_count);
    let mut buf = vec![Complex::new(0.0, 0.0); cfg.fft_size];
    for f in 0..frame_count {
        let start = f * stride;
        for v in buf.iter_mut() {
            *v = Complex::new(0.0, 0.0);
        }
        for i in 0..width {
            buf[i] = Complex::new(signal[start + i] * window[i], 0.0);
        }
        fft.process(&mut buf);
        let bins = cfg.fft_size / 2 + 1;
        let power: Vec<f64> = buf[..bins].iter().map(|c| c.norm_sqr()).collect();
        let log_mel: Vec<f64> = filters
            .iter()
            .map(|filter| {
                let e: f64 = filter.iter().map(|&(bin, w)| power[bin] * w).sum();
                e.max(LOG_FLOOR).ln()
            })
            .collect();
        let coeffs: Vec<f64> = dct
            .iter()
            .map(|row| row.iter().zip(&log_mel).map(|(r, m)| r * m).sum())
            .collect();
        frames.push(coeffs);
    }

    if cfg.include_deltas {
        frames = append_deltas(frames);
    }
    Ok(FeatureSequence::new(cfg.output_dim(), frames)?
        .with_frame_geometry(cfg.frame_width_ms, cfg.frame_stride_ms))
}

/// Append first and second central differences, clamping at the edges.
fn append_deltas(frames: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let t_len = frames.len();
    let dim = frames[0].len();
    let delta_of = |src: &[Vec<f64>]| -> Vec<Vec<f64>> {
        (0..t_len)
            .map(|t| {
                let prev = &src[t.saturating_sub(1)];
                let next = &src[(t + 1).min(t_len - 1)];
                (0..dim).map(|d| (next[d] - prev[d]) / 2.0).collect()
            })
            .collect()
    };
    let d1 = delta_of(&frames);
    let d2 = delta_of(&d1);
    frames
        .into_iter()
        .zip(d1)
        .zip(d2)
        .map(|((mut base, a), b)| {
            base.extend(a);
            base.extend(b);
            base
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(freq: f64, secs: f64, rate: u32) -> Waveform {
        let n = (secs * rate as f64) as usize;
        let samples: Vec<i16> = (0..n)
            .map(|i| {
                (0.5 * (2.0 * std::f64::consts::PI * freq * i as f64 / rate as f64).sin() * 32767.0)
                    as i16
            })
            .collect();
        Waveform::new(samples, rate)
    }

    #[test]
    fn one_second_tone_yields_49_frames() {
        let cfg = MfccConfig::default();
        let feats = compute_mfcc(&tone(1000.0, 1.0, 16000), &cfg).unwrap();
        assert_eq!(feats.len(), 49);
        assert_eq!(feats.dim(), 13);
    }

    #[test]
    fn digital_silence_gives_constant_floor_frames() {
        let cfg = MfccConfig::default();
        let wave = Waveform::new(vec![0i16; 16000], 16000);
        let feats = compute_mfcc(&wave, &cfg).unwrap();
        let first = feats.frame(0).to_vec();
        for t in 1..feats.len() {
            assert_eq!(feats.frame(t), first.as_slice());
        }
        // every mel energy sits at the log floor
        let expected_c0: f64 = {
            let log_floor = LOG_FLOOR.ln();
            (1.0 / 26.0f64).sqrt() * log_floor * 26.0
        };
        assert!((first[0] - expected_c0).abs() < 1e-9);
    }

    #[test]
    fn identical_input_is_bitwise_deterministic() {
        let cfg = MfccConfig::default();
        let wave = tone(440.0, 0.3, 16000);
        let a = compute_mfcc(&wave, &cfg).unwrap();
        let b = compute_mfcc(&wave, &cfg).unwrap();
        for t in 0..a.len() {
            let bits_a: Vec<u64> = a.frame(t).iter().map(|v| v.to_bits()).collect();
            let bits_b: Vec<u64> = b.frame(t).iter().map(|v| v.to_bits()).collect();
            assert_eq!(bits_a, bits_b);
        }
    }

    #[test]
    fn polarity_flip_leaves_features_unchanged() {
        let cfg = MfccConfig::default();
        let wave = tone(700.0, 0.2, 16000);
        let flipped = Waveform::new(
            wave.samples.iter().map(|&s| s.saturating_neg()).collect(),
            16000,
        );
        let a = compute_mfcc(&wave, &cfg).unwrap();
        let b = compute_mfcc(&flipped, &cfg).unwrap();
        for t in 0..a.len() {
            for d in 0..a.dim() {
                assert_eq!(a.frame(t)[d], b.frame(t)[d], "t={t} d={d}");
            }
        }
    }

    #[test]
    fn frame_count_formula_exhaustive_25ms_to_2s() {
        let cfg = MfccConfig::default();
        for ms in 25..=2000usize {
            let n = ms * 16;
            let got = cfg.frame_count(n).unwrap();
            assert_eq!(got, (n - 400) / 320 + 1, "at {ms} ms");
        }
    }

    #[test]
    fn wrong_rate_without_resample_is_format_error() {
        let cfg = MfccConfig::default();
        let wave = tone(440.0, 0.5, 8000);
        assert!(matches!(compute_mfcc(&wave, &cfg), Err(Error::Format(_))));
        let cfg = MfccConfig {
            allow_resample: true,
            ..MfccConfig::default()
        };
        assert!(compute_mfcc(&wave, &cfg).is_ok());
    }

    #[test]
    fn too_short_utterance_is_rejected() {
        let cfg = MfccConfig::default();
        let wave = Waveform::new(vec![0i16; 100], 16000);
        assert!(compute_mfcc(&wave, &cfg).is_err());
    }

    #[test]
    fn deltas_triple_the_dimension() {
        let cfg = MfccConfig {
            include_deltas: true,
            ..MfccConfig::default()
        };
        let feats = compute_mfcc(&tone(300.0, 0.2, 16000), &cfg).unwrap();
        assert_eq!(feats.dim(), 39);
    }
}

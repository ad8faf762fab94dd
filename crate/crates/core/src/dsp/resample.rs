use super::Clip;

/// Kaiser-windowed sinc design parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResamplerConfig {
    /// Filter length per polyphase branch, counted in samples of the lower
    /// of the two rates.
    pub taps_per_phase: usize,
    /// Passband edge as a fraction of the lower rate.
    pub cutoff: f64,
    /// Kaiser shape parameter.
    pub beta: f64,
}

impl Default for ResamplerConfig {
    fn default() -> Self {
        ResamplerConfig { taps_per_phase: 256, cutoff: 0.475, beta: 8.6 }
    }
}

/// Rational polyphase resampler from `from` Hz to `to` Hz.
#[derive(Clone, Debug)]
pub struct Resampler {
    from: u32,
    to: u32,
    up: u64,
    down: u64,
    half: i64,
    cutoff: f64,
    beta: f64,
    i0_beta: f64,
    half_width: f64,
    table: Option<Vec<Vec<f64>>>,
}

const MAX_TABLE_PHASES: u64 = 4096;

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Zeroth-order modified Bessel function of the first kind.
fn bessel_i0(x: f64) -> f64 {
    let q = x * x / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    while term > sum * 1e-17 {
        term *= q / (k * k);
        sum += term;
        k += 1.0;
    }
    sum
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

impl Resampler {
    pub fn new(from: u32, to: u32, cfg: ResamplerConfig) -> Self {
        assert!(from > 0 && to > 0, "rates must be positive");
        let g = gcd(u64::from(from), u64::from(to));
        let up = u64::from(to) / g;
        let down = u64::from(from) / g;
        let ratio = (f64::from(from) / f64::from(to)).max(1.0);
        let half_width = cfg.taps_per_phase as f64 / 2.0 * ratio;
        let cutoff = cfg.cutoff * f64::from(from.min(to)) / f64::from(from);
        let mut r = Resampler {
            from,
            to,
            up,
            down,
            half: half_width.ceil() as i64,
            cutoff,
            beta: cfg.beta,
            i0_beta: bessel_i0(cfg.beta),
            half_width,
            table: None,
        };
        if up <= MAX_TABLE_PHASES {
            let table = (0..up).map(|p| r.branch(p)).collect();
            r.table = Some(table);
        }
        r
    }

    /// Continuous kernel, argument in input samples.
    fn kernel(&self, tau: f64) -> f64 {
        let x = tau / self.half_width;
        if x.abs() >= 1.0 {
            return 0.0;
        }
        let w = bessel_i0(self.beta * (1.0 - x * x).sqrt()) / self.i0_beta;
        2.0 * self.cutoff * sinc(2.0 * self.cutoff * tau) * w
    }

    /// Taps for phase `p`, indexed by input offset `j` in `-half+1..=half`.
    fn branch(&self, p: u64) -> Vec<f64> {
        let frac = p as f64 / self.up as f64;
        (-self.half + 1..=self.half).map(|j| self.kernel(frac - j as f64)).collect()
    }

    pub fn output_len(&self, input_len: usize) -> usize {
        (input_len as f64 * f64::from(self.to) / f64::from(self.from)).round() as usize
    }

    pub fn process(&self, input: &[f64]) -> Vec<f64> {
        if self.from == self.to {
            return input.to_vec();
        }
        let n_out = self.output_len(input.len());
        let len = input.len() as i64;
        let mut out = Vec::with_capacity(n_out);
        let mut scratch;
        for n in 0..n_out as u64 {
            let pos = n * self.down;
            let base = (pos / self.up) as i64;
            let phase = pos % self.up;
            let taps: &[f64] = match &self.table {
                Some(t) => &t[phase as usize],
                None => {
                    scratch = self.branch(phase);
                    &scratch
                }
            };
            // tap index i corresponds to input sample base + i - half + 1
            let mut acc = 0.0;
            for (i, h) in taps.iter().enumerate() {
                let k = base + i as i64 - self.half + 1;
                if k >= 0 && k < len {
                    acc += h * input[k as usize];
                }
            }
            out.push(acc);
        }
        out
    }
}

/// Band-limited resampling with the default design. Same-rate input is
/// returned unchanged.
pub fn resample(clip: &Clip, target_rate: u32) -> Clip {
    if clip.rate() == target_rate {
        return clip.clone();
    }
    let r = Resampler::new(clip.rate(), target_rate, ResamplerConfig::default());
    Clip::new(r.process(clip.samples()), target_rate).expect("finite input gives finite output")
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn sine(freq: f64, rate: u32, secs: f64) -> Vec<f64> {
        let n = (secs * f64::from(rate)).round() as usize;
        (0..n).map(|i| (2.0 * PI * freq * i as f64 / f64::from(rate)).sin()).collect()
    }

    #[test]
    fn identity_for_same_rate() {
        let clip = Clip::new(sine(440.0, 16_000, 0.1), 16_000).unwrap();
        assert_eq!(resample(&clip, 16_000), clip);
    }

    #[test]
    fn output_length_rounds() {
        let r = Resampler::new(44_100, 16_000, ResamplerConfig::default());
        assert_eq!(r.output_len(44_100), 16_000);
        assert_eq!(r.output_len(1000), 363);
    }

    #[test]
    fn bessel_matches_reference() {
        // I0(1) = 1.2660658777520082
        assert!((bessel_i0(1.0) - 1.266_065_877_752_008_2).abs() < 1e-14);
        assert_eq!(bessel_i0(0.0), 1.0);
    }

    #[test]
    fn downsampled_sine_matches_analytic() {
        let clip = Clip::new(sine(1000.0, 48_000, 1.0), 48_000).unwrap();
        let out = resample(&clip, 16_000);
        let expected = sine(1000.0, 16_000, 1.0);
        assert_eq!(out.len(), expected.len());
        let trim = 256;
        let err = out.samples()[trim..out.len() - trim]
            .iter()
            .zip(&expected[trim..expected.len() - trim])
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err < 1e-3, "max error {err}");
    }

    #[test]
    fn upsampled_sine_matches_analytic() {
        let clip = Clip::new(sine(700.0, 8_000, 1.0), 8_000).unwrap();
        let out = resample(&clip, 16_000);
        let expected = sine(700.0, 16_000, 1.0);
        let trim = 512;
        let err = out.samples()[trim..out.len() - trim]
            .iter()
            .zip(&expected[trim..expected.len() - trim])
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err < 1e-3, "max error {err}");
    }

    #[test]
    fn untabled_path_matches_formula() {
        // 44.1 kHz -> 16 kHz uses 160 phases (tabled); force a huge ratio
        // to exercise on-the-fly branches.
        let r = Resampler::new(16_001, 16_000, ResamplerConfig::default());
        assert!(r.table.is_none());
        let x = sine(500.0, 16_001, 0.2);
        let y = r.process(&x);
        let expected = sine(500.0, 16_000, 0.2);
        let err = y[400..y.len() - 400]
            .iter()
            .zip(&expected[400..expected.len() - 400])
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err < 1e-3, "max error {err}");
    }

    fn rms(x: &[f64]) -> f64 {
        (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
    }

    fn nyquist_attenuation_db(cfg: ResamplerConfig, freq: f64) -> f64 {
        // phase offset so a tone at exactly the new Nyquist does not sample to zero
        let x: Vec<f64> = (0..48_000)
            .map(|i| (2.0 * PI * freq * i as f64 / 48_000.0 + 0.7).sin())
            .collect();
        let y = Resampler::new(48_000, 16_000, cfg).process(&x);
        let trim = 400;
        20.0 * (rms(&x) / rms(&y[trim..y.len() - trim])).log10()
    }

    #[test]
    fn rejects_energy_at_the_target_nyquist() {
        for freq in [7_900.0, 8_000.0, 9_000.0] {
            let att = nyquist_attenuation_db(ResamplerConfig::default(), freq);
            assert!(att >= 60.0, "{freq} Hz attenuated only {att:.1} dB");
        }
    }

    #[test]
    #[ignore]
    fn report_short_filter_attenuation() {
        for taps in [64, 128, 256] {
            let cfg = ResamplerConfig { taps_per_phase: taps, ..ResamplerConfig::default() };
            eprintln!("{taps} taps: {:.1} dB at 8 kHz", nyquist_attenuation_db(cfg, 8000.0));
        }
    }
}

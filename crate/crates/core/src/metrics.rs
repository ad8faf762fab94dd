//! SNR-family evaluation metrics.
//!
//! Values are clamped to ±[`CLAMP_DB`] instead of going infinite; a clamped
//! value carries `finite = false` so aggregates can report it.

use itertools::Itertools;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsp::Clip;

pub const CLAMP_DB: f64 = 300.0;
/// Relative energy floor below which a ratio is treated as exact.
pub const EPS: f64 = 1e-30;
/// Largest source count accepted by [`pit_snr`].
pub const MAX_PIT_SOURCES: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("reference signal is all zero")]
    ZeroReference,
    #[error("estimate is all zero")]
    ZeroEstimate,
    #[error("length mismatch: estimate {est}, reference {reference}")]
    LengthMismatch { est: usize, reference: usize },
    #[error("{est} estimates for {reference} references")]
    CountMismatch { est: usize, reference: usize },
    #[error("permutation search supports at most {MAX_PIT_SOURCES} sources, got {0}")]
    TooManySources(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricValue {
    pub value: f64,
    /// False when the value hit the ±300 dB clamp.
    pub finite: bool,
}

impl MetricValue {
    fn exact(value: f64) -> Self {
        MetricValue { value, finite: true }
    }

    fn clamped_high() -> Self {
        MetricValue { value: CLAMP_DB, finite: false }
    }

    fn clamped_low() -> Self {
        MetricValue { value: -CLAMP_DB, finite: false }
    }
}

/// `10·log10(signal / noise)` with the clamp rules applied.
fn ratio_db(signal: f64, noise: f64, scale: f64) -> MetricValue {
    if noise <= EPS * scale {
        return MetricValue::clamped_high();
    }
    if signal <= EPS * scale {
        return MetricValue::clamped_low();
    }
    let v = 10.0 * (signal / noise).log10();
    if v >= CLAMP_DB {
        MetricValue::clamped_high()
    } else if v <= -CLAMP_DB {
        MetricValue::clamped_low()
    } else {
        MetricValue::exact(v)
    }
}

/// Dot product with Neumaier-compensated accumulation, so that the
/// residual of a near-perfect estimate is not swamped by summation error.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for (x, y) in a.iter().zip(b) {
        let v = x * y;
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

fn check_len(est: &[f64], reference: &[f64]) -> Result<(), MetricError> {
    if est.len() != reference.len() {
        return Err(MetricError::LengthMismatch { est: est.len(), reference: reference.len() });
    }
    Ok(())
}

/// SNR of raw sample slices.
pub fn snr_samples(est: &[f64], reference: &[f64]) -> Result<MetricValue, MetricError> {
    check_len(est, reference)?;
    let ref_energy = dot(reference, reference);
    if ref_energy == 0.0 {
        return Err(MetricError::ZeroReference);
    }
    let err: f64 = est.iter().zip(reference).map(|(e, r)| (r - e) * (r - e)).sum();
    Ok(ratio_db(ref_energy, err, ref_energy))
}

/// `10·log10(‖ref‖² / ‖ref − est‖²)`.
pub fn snr(est: &Clip, reference: &Clip) -> Result<MetricValue, MetricError> {
    snr_samples(est.samples(), reference.samples())
}

/// `snr(est, ref) − snr(input, ref)`. The result is flagged non-finite if
/// either term was clamped.
pub fn snri(input: &Clip, est: &Clip, reference: &Clip) -> Result<MetricValue, MetricError> {
    let a = snr(est, reference)?;
    let b = snr(input, reference)?;
    Ok(MetricValue { value: a.value - b.value, finite: a.finite && b.finite })
}

fn zero_mean(x: &[f64]) -> Vec<f64> {
    let mean = x.iter().sum::<f64>() / x.len().max(1) as f64;
    x.iter().map(|v| v - mean).collect()
}

/// Scale-invariant SDR on zero-meaned signals.
pub fn si_sdr(est: &Clip, reference: &Clip) -> Result<MetricValue, MetricError> {
    check_len(est.samples(), reference.samples())?;
    let r = zero_mean(reference.samples());
    let e = zero_mean(est.samples());
    let rr = dot(&r, &r);
    if rr == 0.0 {
        return Err(MetricError::ZeroReference);
    }
    let ee = dot(&e, &e);
    if ee == 0.0 {
        return Err(MetricError::ZeroEstimate);
    }
    let scale = dot(&e, &r) / rr;
    let t_energy = scale * scale * rr;
    let residual: Vec<f64> = e.iter().zip(&r).map(|(a, b)| (-scale).mul_add(*b, *a)).collect();
    let noise = dot(&residual, &residual);
    Ok(ratio_db(t_energy, noise, ee))
}

/// Best assignment of estimates to references.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PitResult {
    /// `permutation[i]` is the estimate matched to reference `i`.
    pub permutation: Vec<usize>,
    pub mean: MetricValue,
    pub per_source: Vec<MetricValue>,
}

/// Exhaustive permutation-invariant SNR. Ties keep the first permutation in
/// lexicographic order.
pub fn pit_snr(est: &[Clip], reference: &[Clip]) -> Result<PitResult, MetricError> {
    let n = reference.len();
    if est.len() != n {
        return Err(MetricError::CountMismatch { est: est.len(), reference: n });
    }
    if n > MAX_PIT_SOURCES {
        return Err(MetricError::TooManySources(n));
    }
    // pairwise table: table[r][e]
    let mut table = vec![vec![MetricValue::exact(0.0); n]; n];
    for (r, row) in table.iter_mut().enumerate() {
        for (e, cell) in row.iter_mut().enumerate() {
            *cell = snr(&est[e], &reference[r])?;
        }
    }
    let mut best: Option<(f64, Vec<usize>)> = None;
    for perm in (0..n).permutations(n) {
        let total: f64 = perm.iter().enumerate().map(|(r, &e)| table[r][e].value).sum();
        if best.as_ref().is_none_or(|(b, _)| total > *b) {
            best = Some((total, perm));
        }
    }
    let (total, permutation) = best.unwrap_or((0.0, Vec::new()));
    let per_source: Vec<MetricValue> =
        permutation.iter().enumerate().map(|(r, &e)| table[r][e]).collect();
    let mean = MetricValue {
        value: if n == 0 { 0.0 } else { total / n as f64 },
        finite: per_source.iter().all(|m| m.finite),
    };
    Ok(PitResult { permutation, mean, per_source })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn clip(v: Vec<f64>) -> Clip {
        Clip::new(v, 16_000).unwrap()
    }

    fn noise(n: usize, seed: u64) -> Clip {
        let mut rng = crate::seed::rng(seed);
        clip((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
    }

    #[test]
    fn snr_examples() {
        let x = noise(256, 1);
        assert_eq!(snr(&x, &x).unwrap(), MetricValue { value: 300.0, finite: false });
        let zero = Clip::zeros(256, 16_000);
        assert!(snr(&zero, &x).unwrap().value.abs() < 1e-12);
        let v = snr(&x, &x.scaled(2.0)).unwrap();
        assert!((v.value - 10.0 * 4f64.log10()).abs() < 1e-9);
        assert!(v.finite);
        assert_eq!(snr(&x, &zero), Err(MetricError::ZeroReference));
        assert!(matches!(snr(&x, &noise(10, 2)), Err(MetricError::LengthMismatch { .. })));
    }

    #[test]
    fn snri_examples() {
        let reference = noise(128, 3);
        let input = noise(128, 4);
        assert_eq!(snri(&input, &input, &reference).unwrap().value, 0.0);
        let half = reference.scaled(0.5);
        let v = snri(&half, &reference, &reference).unwrap();
        assert!(!v.finite);
        assert!((v.value - (300.0 - 10.0 * 4f64.log10())).abs() < 1e-9);
    }

    #[test]
    fn si_sdr_examples() {
        let r = noise(512, 5);
        assert_eq!(si_sdr(&r.scaled(3.7), &r).unwrap().value, 300.0);
        let e = noise(512, 6);
        let a = si_sdr(&e, &r).unwrap().value;
        let b = si_sdr(&e.scaled(2.0), &r).unwrap().value;
        assert!((a - b).abs() < 1e-9);
        // orthogonal, zero-mean pair
        let s = clip(vec![1.0, -1.0, 1.0, -1.0]);
        let o = clip(vec![1.0, 1.0, -1.0, -1.0]);
        assert_eq!(si_sdr(&o, &s).unwrap(), MetricValue { value: -300.0, finite: false });
        assert_eq!(si_sdr(&Clip::zeros(4, 16_000), &s), Err(MetricError::ZeroEstimate));
    }

    #[test]
    fn scaled_reference_always_saturates_si_sdr() {
        for seed in 0..50 {
            let r = noise(16_000, 100 + seed);
            for k in [3.7, -0.3, 1e3, 1e-3] {
                let v = si_sdr(&r.scaled(k), &r).unwrap();
                assert!(!v.finite && v.value == CLAMP_DB, "seed {seed} k {k}: {}", v.value);
            }
        }
    }

    #[test]
    fn snr_is_scale_covariant_but_not_invariant() {
        let r = noise(300, 7);
        let e = noise(300, 8);
        let base = snr(&e, &r).unwrap().value;
        assert!((snr(&e.scaled(-3.0), &r.scaled(-3.0)).unwrap().value - base).abs() < 1e-9);
        assert!((snr(&e.scaled(2.0), &r).unwrap().value - base).abs() > 0.1);
    }

    #[test]
    fn pit_recovers_known_permutation() {
        let refs: Vec<Clip> = (0..4).map(|i| noise(200, 10 + i)).collect();
        let sigma = [2, 0, 3, 1];
        let est: Vec<Clip> = sigma.iter().map(|&i| refs[i].clone()).collect();
        let res = pit_snr(&est, &refs).unwrap();
        for (r, &e) in res.permutation.iter().enumerate() {
            assert_eq!(sigma[e], r);
        }
        assert_eq!(res.mean.value, 300.0);
        let one = pit_snr(&est[..1], &est[..1]).unwrap();
        assert_eq!(one.permutation, vec![0]);
        assert!(matches!(pit_snr(&est[..2], &refs), Err(MetricError::CountMismatch { .. })));
    }
}

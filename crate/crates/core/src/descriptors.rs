//! Series characterization: real-FFT spectrum, spectral centroid and
//! normalized entropy, log low/high bandpower ratio, permutation entropy.

use std::collections::BTreeMap;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::SeriesKey;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DescriptorParams {
    /// Boundary between the low and high bands, in cycles per step.
    pub bandpower_split: f64,
    pub pe_order: usize,
    pub pe_delay: usize,
}

impl Default for DescriptorParams {
    fn default() -> Self {
        DescriptorParams {
            bandpower_split: 0.125,
            pe_order: 3,
            pe_delay: 1,
        }
    }
}

impl DescriptorParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.bandpower_split > 0.0 && self.bandpower_split < 0.5) {
            return Err(Error::Config("bandpower_split must lie in (0, 0.5)".into()));
        }
        if !(2..=8).contains(&self.pe_order) || self.pe_delay == 0 {
            return Err(Error::Config("pe_order must be in 2..=8 and pe_delay at least 1".into()));
        }
        Ok(())
    }
}

/// Half spectrum of a real series, bins `k = 0..=n/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSpectrum {
    pub n: usize,
    pub freqs: Vec<f64>,
    pub magnitudes: Vec<f64>,
    pub power: Vec<f64>,
}

impl PowerSpectrum {
    pub fn bins(&self) -> usize {
        self.freqs.len()
    }

    pub fn total_power(&self) -> f64 {
        self.power.iter().sum()
    }

    /// All power is zero; normalized quantities are undefined.
    pub fn is_degenerate(&self) -> bool {
        self.total_power() == 0.0
    }

    /// `P_k / sum(P)`, or `None` when degenerate.
    pub fn normalized(&self) -> Option<Vec<f64>> {
        let total = self.total_power();
        (total > 0.0).then(|| self.power.iter().map(|p| p / total).collect())
    }
}

pub fn power_spectrum(series: &[f64]) -> Result<PowerSpectrum> {
    let n = series.len();
    if n < 2 {
        return Err(Error::Invalid(format!("spectrum needs at least 2 values, got {n}")));
    }
    let mut buf: Vec<Complex<f64>> = series.iter().map(|&y| Complex::new(y, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let k = n / 2 + 1;
    let magnitudes: Vec<f64> = buf[..k].iter().map(|c| c.norm()).collect();
    Ok(PowerSpectrum {
        n,
        freqs: (0..k).map(|i| i as f64 / n as f64).collect(),
        power: magnitudes.iter().map(|m| m * m).collect(),
        magnitudes,
    })
}

/// Magnitude-weighted mean frequency, in cycles per step.
pub fn spectral_centroid(spec: &PowerSpectrum) -> Option<f64> {
    let total: f64 = spec.magnitudes.iter().sum();
    if total == 0.0 {
        return None;
    }
    let weighted: f64 = spec.freqs.iter().zip(&spec.magnitudes).map(|(f, m)| f * m).sum();
    Some((weighted / total).clamp(0.0, 0.5))
}

/// Shannon entropy of the normalized power spectrum over `log K`.
pub fn spectral_entropy(spec: &PowerSpectrum) -> Option<f64> {
    let p = spec.normalized()?;
    let h: f64 = p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.ln()).sum();
    Some((h / (spec.bins() as f64).ln()).clamp(0.0, 1.0))
}

/// `ln(low / high)` with DC excluded from the low band. `None` when either
/// band is empty or carries no power.
pub fn bandpower_ratio(spec: &PowerSpectrum, split: f64) -> Option<f64> {
    let mut low = 0.0;
    let mut high = 0.0;
    for (&f, &p) in spec.freqs.iter().zip(&spec.power).skip(1) {
        if f <= split {
            low += p;
        } else {
            high += p;
        }
    }
    (low > 0.0 && high > 0.0).then(|| (low / high).ln())
}

/// Normalized Shannon entropy of ordinal patterns; equal values rank by
/// position.
pub fn permutation_entropy(series: &[f64], order: usize, delay: usize) -> Result<f64> {
    if order < 2 || delay == 0 {
        return Err(Error::Invalid("permutation entropy needs order >= 2 and delay >= 1".into()));
    }
    let span = (order - 1) * delay;
    let need = order + span;
    if series.len() < need {
        return Err(Error::Invalid(format!(
            "permutation entropy of order {order}, delay {delay} needs {need} values, got {}",
            series.len()
        )));
    }
    let mut counts: BTreeMap<Vec<u8>, usize> = BTreeMap::new();
    let mut idx: Vec<u8> = Vec::with_capacity(order);
    let windows = series.len() - span;
    for t in 0..windows {
        idx.clear();
        idx.extend(0..order as u8);
        idx.sort_by(|&a, &b| series[t + a as usize * delay].total_cmp(&series[t + b as usize * delay]));
        *counts.entry(idx.clone()).or_default() += 1;
    }
    let h: f64 = counts
        .values()
        .map(|&c| {
            let p = c as f64 / windows as f64;
            -p * p.ln()
        })
        .sum();
    let log_fact: f64 = (2..=order).map(|i| (i as f64).ln()).sum();
    Ok((h / log_fact).clamp(0.0, 1.0))
}

/// Descriptors of one series; `None` marks an undefined value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralSummary {
    pub key: SeriesKey,
    pub n: usize,
    pub centroid: Option<f64>,
    pub entropy: Option<f64>,
    pub log_bandpower_ratio: Option<f64>,
    pub permutation_entropy: Option<f64>,
}

pub fn summarize(key: SeriesKey, series: &[f64], params: &DescriptorParams) -> Result<SpectralSummary> {
    let spec = power_spectrum(series)?;
    Ok(SpectralSummary {
        key,
        n: series.len(),
        centroid: spectral_centroid(&spec),
        entropy: spectral_entropy(&spec),
        log_bandpower_ratio: bandpower_ratio(&spec, params.bandpower_split),
        permutation_entropy: permutation_entropy(series, params.pe_order, params.pe_delay).ok(),
    })
}

#[derive(Serialize)]
struct SummaryRow<'a> {
    repo: &'a str,
    kind: &'a str,
    freq: &'a str,
    n: usize,
    centroid: Option<f64>,
    entropy: Option<f64>,
    log_bandpower_ratio: Option<f64>,
    permutation_entropy: Option<f64>,
}

/// Parameter block as `#` lines, then one CSV row per summary.
pub fn summaries_to_csv(rows: &[SpectralSummary], params: &DescriptorParams) -> Vec<u8> {
    let mut out = format!(
        "# bandpower_split: {}\n# bandpower_dc: excluded\n# pe_order: {}\n# pe_delay: {}\n# pe_ties: by position\n",
        params.bandpower_split, params.pe_order, params.pe_delay
    )
    .into_bytes();
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record([
        "repo",
        "kind",
        "freq",
        "n",
        "centroid",
        "entropy",
        "log_bandpower_ratio",
        "permutation_entropy",
    ])
    .expect("in-memory write");
    for s in rows {
        w.serialize(SummaryRow {
            repo: &s.key.repo,
            kind: s.key.kind.as_str(),
            freq: s.key.freq.as_str(),
            n: s.n,
            centroid: s.centroid,
            entropy: s.entropy,
            log_bandpower_ratio: s.log_bandpower_ratio,
            permutation_entropy: s.permutation_entropy,
        })
        .expect("in-memory write");
    }
    out.extend(w.into_inner().expect("in-memory flush"));
    out
}

//! Binned PLE spectra and repeated-scan series.

use serde::{Deserialize, Serialize};

/// Photon counts per laser-detuning bin. Frequencies are bin centres in GHz.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Spectrum {
    pub frequencies: Vec<f64>,
    pub counts: Vec<f64>,
}

impl Spectrum {
    pub fn new(frequencies: Vec<f64>, counts: Vec<f64>) -> Self {
        assert_eq!(frequencies.len(), counts.len(), "frequency/count length mismatch");
        Self {
            frequencies,
            counts,
        }
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn total_counts(&self) -> f64 {
        self.counts.iter().sum()
    }

    /// Mean bin spacing, GHz.
    pub fn bin_width(&self) -> f64 {
        let n = self.frequencies.len();
        if n < 2 {
            return 0.0;
        }
        (self.frequencies[n - 1] - self.frequencies[0]) / (n - 1) as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimedSpectrum {
    /// Scan start time, s.
    pub timestamp: f64,
    pub spectrum: Spectrum,
}

/// Repeated scans of one transition at a fixed bias field.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ScanSeries {
    /// Local field, MV/m.
    pub bias_field: f64,
    pub scans: Vec<TimedSpectrum>,
}

impl ScanSeries {
    pub fn len(&self) -> usize {
        self.scans.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scans.is_empty()
    }

    pub fn timestamps_increasing(&self) -> bool {
        self.scans.windows(2).all(|w| w[1].timestamp > w[0].timestamp)
    }

    /// Bin-wise sum of all scans; `None` when the scans do not share one
    /// frequency grid.
    pub fn summed_spectrum(&self) -> Option<Spectrum> {
        let first = &self.scans.first()?.spectrum;
        let mut counts = vec![0.0; first.len()];
        for scan in &self.scans {
            if scan.spectrum.frequencies != first.frequencies {
                return None;
            }
            for (acc, c) in counts.iter_mut().zip(&scan.spectrum.counts) {
                *acc += c;
            }
        }
        Some(Spectrum::new(first.frequencies.clone(), counts))
    }
}

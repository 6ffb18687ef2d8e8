//! Estimation functions: predicted fraction of `ℓ`-sized supports that Basis
//! Pursuit recovers, for `ℓ = 1..=L`. This module holds the closed-form ones
//! (coherence bounds and the two Chebyshev-type bounds on `q` and `Q`).
//!
//! CSV format:
//!
//! ```text
//! # label=<label> params=<key>=<value>;... [interpolated=<ℓ>,<ℓ>,...]
//! ell,value
//! 1,<value>
//! ...
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::capacity::{CapacityMatrix, CapacityVector};
use crate::dictionary::{grassmanian_mu, CoherenceProfile};
use crate::error::{CapsetError, Result};

/// Relative margin below a threshold that still counts as "strictly below".
/// Keeps step positions stable when `ℓ` meets a threshold up to rounding.
pub const THRESHOLD_RTOL: f64 = 1e-12;

pub(crate) fn strictly_below(ell: f64, threshold: f64) -> bool {
    ell < threshold * (1.0 - THRESHOLD_RTOL)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimationFunction {
    pub label: String,
    /// `values[ℓ - 1]` for `ℓ = 1..=L`.
    values: Vec<f64>,
    /// Support sizes whose value was copied from `ℓ - 1` rather than computed.
    interpolated: Vec<usize>,
    /// Inputs the values were computed from.
    pub params: BTreeMap<String, f64>,
}

impl EstimationFunction {
    /// `values[ℓ - 1]` for `ℓ = 1..=L`; every value must lie in `[0, 1]`.
    pub fn new(label: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(CapsetError::InvariantViolation(format!(
                "estimation value {v} at ell={} outside [0, 1]",
                i + 1
            )));
        }
        Ok(EstimationFunction {
            label: label.into(),
            values,
            interpolated: Vec::new(),
            params: BTreeMap::new(),
        })
    }

    pub fn with_param(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.to_string(), value);
        self
    }

    /// Fills every odd `ℓ` from `ℓ - 1` (`value(0) = 1`) and flags it.
    pub(crate) fn fill_odd_from_even(mut self) -> Self {
        for ell in (1..=self.values.len()).step_by(2) {
            self.values[ell - 1] = if ell == 1 { 1.0 } else { self.values[ell - 2] };
            self.interpolated.push(ell);
        }
        self
    }

    pub(crate) fn mark_interpolated(&mut self, ells: impl IntoIterator<Item = usize>) {
        self.interpolated.extend(ells);
        self.interpolated.sort_unstable();
        self.interpolated.dedup();
    }

    /// Largest `ℓ` covered.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Value at support size `ell` (`1..=L`).
    pub fn value(&self, ell: usize) -> f64 {
        assert!(ell >= 1 && ell <= self.values.len(), "ell={ell} out of 1..={}", self.values.len());
        self.values[ell - 1]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_interpolated(&self, ell: usize) -> bool {
        self.interpolated.binary_search(&ell).is_ok()
    }

    pub fn interpolated(&self) -> &[usize] {
        &self.interpolated
    }

    pub fn to_csv(&self) -> String {
        let params: Vec<String> = self.params.iter().map(|(k, v)| format!("{k}={v:e}")).collect();
        let mut out = format!("# label={} params={}", self.label, params.join(";"));
        if !self.interpolated.is_empty() {
            let ells: Vec<String> = self.interpolated.iter().map(usize::to_string).collect();
            let _ = write!(out, " interpolated={}", ells.join(","));
        }
        out.push_str("\nell,value\n");
        for (i, v) in self.values.iter().enumerate() {
            let _ = writeln!(out, "{},{v:.17e}", i + 1);
        }
        out
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        let mut lines = text.lines();
        let header = lines
            .next()
            .and_then(|h| h.strip_prefix("# label="))
            .ok_or_else(|| CapsetError::format(path, "missing `# label=` header"))?;
        let (label, rest) = header
            .split_once(" params=")
            .ok_or_else(|| CapsetError::format(path, "header lacks params="))?;
        let (params_text, interp_text) = match rest.split_once(" interpolated=") {
            Some((p, i)) => (p, Some(i)),
            None => (rest, None),
        };
        let mut params = BTreeMap::new();
        for kv in params_text.split(';').filter(|s| !s.is_empty()) {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| CapsetError::format(path, format!("bad param `{kv}`")))?;
            let v: f64 = v
                .parse()
                .map_err(|_| CapsetError::format(path, format!("bad param value `{kv}`")))?;
            params.insert(k.to_string(), v);
        }
        let interpolated = match interp_text {
            Some(t) => t
                .split(',')
                .map(|s| s.parse::<usize>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| CapsetError::format(path, "bad interpolated list"))?,
            None => Vec::new(),
        };
        if lines.next() != Some("ell,value") {
            return Err(CapsetError::format(path, "missing `ell,value` column header"));
        }
        let mut values = Vec::new();
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let (ell, v) = line
                .split_once(',')
                .ok_or_else(|| CapsetError::format(path, format!("bad row `{line}`")))?;
            let ell: usize = ell
                .parse()
                .map_err(|_| CapsetError::format(path, format!("bad ell `{ell}`")))?;
            if ell != values.len() + 1 {
                return Err(CapsetError::format(path, format!("rows out of order at ell={ell}")));
            }
            values.push(
                v.parse::<f64>()
                    .map_err(|_| CapsetError::format(path, format!("bad value `{v}`")))?,
            );
        }
        let mut ef = EstimationFunction::new(label, values)?;
        ef.params = params;
        ef.interpolated = interpolated;
        Ok(ef)
    }
}

/// Classical coherence guarantee: every support with `ℓ < ½(1 + 1/μ)` is
/// recovered, nothing is promised above.
pub fn ef_classical(mu: f64, l: usize) -> Result<EstimationFunction> {
    if !(mu > 0.0 && mu <= 1.0) {
        return Err(CapsetError::InvalidParam(format!("coherence must be in (0, 1], got {mu}")));
    }
    let threshold = classical_threshold(mu);
    let values = (1..=l)
        .map(|ell| if strictly_below(ell as f64, threshold) { 1.0 } else { 0.0 })
        .collect();
    Ok(EstimationFunction::new("EF-CB", values)?.with_param("mu", mu))
}

pub fn classical_threshold(mu: f64) -> f64 {
    0.5 * (1.0 + 1.0 / mu)
}

/// Classical bound at the smallest coherence an `N×L` dictionary can have.
pub fn ef_grassmanian(n: usize, l: usize) -> Result<EstimationFunction> {
    let mu = grassmanian_mu(n, l)?;
    let mut ef = ef_classical(mu, l)?;
    ef.label = "EF-GB".into();
    Ok(ef)
}

/// Chebyshev-type bound from the capacity vector:
/// `(½ − ℓE)² / (ℓσ² + (½ − ℓE)²)` for `ℓ < 1/(2E)`, 0 above.
pub fn ef_theorem_a(cv: &CapacityVector) -> EstimationFunction {
    let (e, var) = (cv.mean(), cv.variance());
    let values = (1..=cv.len())
        .map(|ell| chebyshev(ell as f64, e, var))
        .collect();
    EstimationFunction::new("EF-thmA", values)
        .expect("bound lies in [0, 1]")
        .with_param("E_q", e)
        .with_param("var_q", var)
}

/// Pair analogue on the capacity matrix with `ℓ/2` pairs, for even `ℓ`.
/// Odd `ℓ` repeat the even predecessor and are flagged as interpolated.
pub fn ef_conjecture_b(cm: &CapacityMatrix) -> EstimationFunction {
    let (e, var) = (cm.mean(), cm.variance());
    let values = (1..=cm.size())
        .map(|ell| {
            if ell % 2 == 1 {
                0.0
            } else {
                chebyshev((ell / 2) as f64, e, var)
            }
        })
        .collect();
    EstimationFunction::new("EF-thmB", values)
        .expect("bound lies in [0, 1]")
        .fill_odd_from_even()
        .with_param("E_Q", e)
        .with_param("var_Q", var)
}

/// `(½ − kE)² / (kσ² + (½ − kE)²)` where applicable (`kE < ½`), else 0.
/// `E = 0` means every support is recovered.
fn chebyshev(k: f64, e: f64, var: f64) -> f64 {
    if e == 0.0 {
        return 1.0;
    }
    if !strictly_below(k, 0.5 / e) {
        return 0.0;
    }
    let gap = 0.5 - k * e;
    let gap2 = gap * gap;
    (gap2 / (k * var + gap2)).clamp(0.0, 1.0)
}

/// LP-free surrogate `μ_k / (μ_k + 1)`, an entrywise upper bound on `q`.
pub fn relaxed_capacity_vector(profile: &CoherenceProfile) -> Result<CapacityVector> {
    CapacityVector::new(profile.mu_k.iter().map(|m| m / (m + 1.0)).collect())
}

/// The constant surrogate `μ / (μ + 1)` built from the global coherence.
pub fn constant_relaxed_vector(mu: f64, l: usize) -> Result<CapacityVector> {
    CapacityVector::new(vec![mu / (mu + 1.0); l])
}

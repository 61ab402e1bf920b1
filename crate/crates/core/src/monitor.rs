//! QBER baseline calibration and anomaly alerts.
//!
//! A baseline is fitted on clean sessions. Each new session QBER is scored two
//! ways: a z-score against the baseline (single-shot jumps, critical) and a
//! one-sided CUSUM accumulator (slow drift, warning).

use serde::{Deserialize, Serialize};

pub const MIN_CALIBRATION_SESSIONS: usize = 20;
pub const DEFAULT_Z_THRESHOLD: f64 = 4.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineModel {
    pub mean_qber: f64,
    pub std_qber: f64,
    pub calibration_sessions: usize,
    pub z_threshold: f64,
    pub cusum_k: f64,
    pub cusum_h: f64,
}

/// Optional overrides for the detector thresholds. Unset values follow the
/// defaults: z 4, k one baseline std, h ten times k.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorSettings {
    pub z_threshold: Option<f64>,
    pub cusum_k: Option<f64>,
    pub cusum_h: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum MonitorError {
    #[error("too few calibration samples: {0} (need at least {MIN_CALIBRATION_SESSIONS})")]
    TooFewSamples(usize),
    #[error("calibration sample {index} = {value} outside [0, 1]")]
    SampleOutOfRange { index: usize, value: f64 },
    #[error("check-bit count must be positive")]
    NoCheckBits,
}

/// Standard-deviation floor for a QBER estimated from `n_check` bits.
pub fn std_floor(n_check: usize) -> f64 {
    1.0 / (2.0 * (n_check as f64).sqrt())
}

/// Fits a baseline to clean-session QBER samples.
///
/// Uses the sample standard deviation (n - 1 denominator), floored at
/// [`std_floor`]`(n_check)`.
pub fn calibrate(
    samples: &[f64],
    n_check: usize,
    settings: &DetectorSettings,
) -> Result<BaselineModel, MonitorError> {
    if samples.len() < MIN_CALIBRATION_SESSIONS {
        return Err(MonitorError::TooFewSamples(samples.len()));
    }
    if n_check == 0 {
        return Err(MonitorError::NoCheckBits);
    }
    if let Some((index, &value)) = samples
        .iter()
        .enumerate()
        .find(|(_, v)| !(0.0..=1.0).contains(*v))
    {
        return Err(MonitorError::SampleOutOfRange { index, value });
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let std = var.sqrt().max(std_floor(n_check));
    let k = settings.cusum_k.unwrap_or(std);
    Ok(BaselineModel {
        mean_qber: mean,
        std_qber: std,
        calibration_sessions: samples.len(),
        z_threshold: settings.z_threshold.unwrap_or(DEFAULT_Z_THRESHOLD),
        cusum_k: k,
        cusum_h: settings.cusum_h.unwrap_or(10.0 * k),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    ZScore,
    Cusum,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Warning,
    Critical,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Alert {
    pub session_index: usize,
    pub statistic: Statistic,
    pub value: f64,
    pub severity: Severity,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CusumState {
    pub s: f64,
}

/// Scores one observation. Pure in `(baseline, state, qber)`.
///
/// When both detectors fire, the critical z-score alert is the one reported.
/// Alerts never reset the CUSUM accumulator.
pub fn observe(
    b: &BaselineModel,
    session_index: usize,
    qber: f64,
    state: CusumState,
) -> (Option<Alert>, CusumState) {
    let z = (qber - b.mean_qber) / b.std_qber;
    let s = (state.s + (qber - b.mean_qber - b.cusum_k)).max(0.0);
    let alert = if z >= b.z_threshold {
        Some(Alert {
            session_index,
            statistic: Statistic::ZScore,
            value: z,
            severity: Severity::Critical,
        })
    } else if s >= b.cusum_h {
        Some(Alert {
            session_index,
            statistic: Statistic::Cusum,
            value: s,
            severity: Severity::Warning,
        })
    } else {
        None
    };
    (alert, CusumState { s })
}

/// Stateful wrapper that walks a QBER stream.
#[derive(Clone, Debug)]
pub struct Monitor {
    baseline: BaselineModel,
    state: CusumState,
    alerts: Vec<Alert>,
}

impl Monitor {
    pub fn new(baseline: BaselineModel) -> Self {
        Self {
            baseline,
            state: CusumState::default(),
            alerts: Vec::new(),
        }
    }

    pub fn observe(&mut self, session_index: usize, qber: f64) -> Option<&Alert> {
        let (alert, next) = observe(&self.baseline, session_index, qber, self.state);
        self.state = next;
        let alert = alert?;
        self.alerts.push(alert);
        self.alerts.last()
    }

    pub fn baseline(&self) -> &BaselineModel {
        &self.baseline
    }

    pub fn state(&self) -> CusumState {
        self.state
    }

    pub fn alerts(&self) -> &[Alert] {
        &self.alerts
    }

    pub fn into_alerts(self) -> Vec<Alert> {
        self.alerts
    }
}

//! Linearity of activity timelines and synchronicity of report emission,
//! plus a seeded generator producing streams of either regime for tests.
//!
//! A timeline is linear when every consecutive gap is a positive integer
//! multiple of a constant time unit; report emission is synchronous when all
//! sources publish equally long, time-aligned streams, and asynchronous as
//! soon as one corresponding pair of reports differs.

use crate::timestamp::Timestamp;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvolutionError {
    #[error("activity timeline must be non-empty and strictly increasing")]
    BadTimeline,
    #[error("report stream {0:?} must be strictly increasing")]
    BadStream(String),
    #[error("time unit must be positive, got {0}")]
    BadTimeUnit(i64),
    #[error("synchronicity needs at least two streams")]
    TooFewStreams,
    #[error("invalid generator params: {0}")]
    BadParams(String),
}

/// Strictly increasing activity times of one event.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActivityTimeline {
    times: Vec<Timestamp>,
}

impl ActivityTimeline {
    pub fn new(times: Vec<Timestamp>) -> Result<Self, EvolutionError> {
        if times.is_empty() || times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(EvolutionError::BadTimeline);
        }
        Ok(ActivityTimeline { times })
    }

    pub fn times(&self) -> &[Timestamp] {
        &self.times
    }

    fn gaps(&self) -> Vec<i64> {
        self.times
            .windows(2)
            .map(|w| w[1].minutes() - w[0].minutes())
            .collect()
    }
}

/// Strictly increasing publication times of one source's reports.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportStream {
    pub source: String,
    times: Vec<Timestamp>,
}

impl ReportStream {
    pub fn new(source: impl Into<String>, times: Vec<Timestamp>) -> Result<Self, EvolutionError> {
        let source = source.into();
        if times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(EvolutionError::BadStream(source));
        }
        Ok(ReportStream { source, times })
    }

    pub fn times(&self) -> &[Timestamp] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict")]
pub enum LinearityVerdict {
    /// Every consecutive gap equals `multipliers[k] * unit`. A one-activity
    /// timeline is vacuously linear with no unit and no multipliers.
    Linear {
        unit: Option<i64>,
        multipliers: Vec<i64>,
    },
    /// `gaps[failing_index]` is not a positive integer multiple of `unit`.
    NonLinear { unit: i64, failing_index: usize },
}

impl LinearityVerdict {
    pub fn is_linear(&self) -> bool {
        matches!(self, LinearityVerdict::Linear { .. })
    }
}

/// Test whether consecutive activity gaps are positive integer multiples of
/// the time unit `t`. Without an explicit `t` the minimum gap is used.
pub fn classify_linearity(
    timeline: &ActivityTimeline,
    t: Option<i64>,
) -> Result<LinearityVerdict, EvolutionError> {
    if let Some(unit) = t {
        if unit <= 0 {
            return Err(EvolutionError::BadTimeUnit(unit));
        }
    }
    let gaps = timeline.gaps();
    if gaps.is_empty() {
        return Ok(LinearityVerdict::Linear {
            unit: t,
            multipliers: Vec::new(),
        });
    }
    let unit = t.unwrap_or_else(|| *gaps.iter().min().expect("nonempty gaps"));
    let mut multipliers = Vec::with_capacity(gaps.len());
    for (k, gap) in gaps.iter().enumerate() {
        if gap % unit != 0 || gap / unit < 1 {
            return Ok(LinearityVerdict::NonLinear {
                unit,
                failing_index: k,
            });
        }
        multipliers.push(gap / unit);
    }
    Ok(LinearityVerdict::Linear {
        unit: Some(unit),
        multipliers,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AsyncReason {
    LengthMismatch,
    TimeMismatch,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict")]
pub enum SyncVerdict {
    Synchronous,
    /// Two sources and the first report index at which they disagree:
    /// either one stream ends there or the publication times differ by more
    /// than the tolerance.
    Asynchronous {
        first: String,
        second: String,
        index: usize,
        reason: AsyncReason,
    },
}

impl SyncVerdict {
    pub fn is_synchronous(&self) -> bool {
        matches!(self, SyncVerdict::Synchronous)
    }
}

/// Synchronous iff all streams have equal length and corresponding reports
/// are published within `tolerance` minutes of each other (zero tolerance is
/// strict simultaneity). Otherwise returns a concrete witness.
pub fn classify_synchronicity(
    streams: &[ReportStream],
    tolerance: i64,
) -> Result<SyncVerdict, EvolutionError> {
    if streams.len() < 2 {
        return Err(EvolutionError::TooFewStreams);
    }
    for k in 0..streams.len() {
        for l in k + 1..streams.len() {
            let (a, b) = (&streams[k], &streams[l]);
            let shared = a.len().min(b.len());
            for i in 0..shared {
                let gap = (a.times[i].minutes() - b.times[i].minutes()).abs();
                if gap > tolerance {
                    return Ok(SyncVerdict::Asynchronous {
                        first: a.source.clone(),
                        second: b.source.clone(),
                        index: i,
                        reason: AsyncReason::TimeMismatch,
                    });
                }
            }
            if a.len() != b.len() {
                return Ok(SyncVerdict::Asynchronous {
                    first: a.source.clone(),
                    second: b.source.clone(),
                    index: shared,
                    reason: AsyncReason::LengthMismatch,
                });
            }
        }
    }
    Ok(SyncVerdict::Synchronous)
}

// ──────────────────────────────────────────────
// Synthetic stream generation
// ──────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// Constant-gap timeline, all sources publish at the activity times.
    LinearSync,
    /// Linear timeline with at least one skipped slot (multiplier >= 2).
    LinearSyncSkips,
    /// Non-linear timeline, sources of differing lengths and offsets.
    NonLinearAsync,
}

impl std::str::FromStr for Regime {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "linear-sync" => Ok(Regime::LinearSync),
            "linear-sync-skips" => Ok(Regime::LinearSyncSkips),
            "nonlinear-async" => Ok(Regime::NonLinearAsync),
            other => Err(format!(
                "unknown regime {other}; expected linear-sync, linear-sync-skips or nonlinear-async"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamParams {
    pub sources: usize,
    pub min_reports: usize,
    pub max_reports: usize,
    pub time_unit_minutes: i64,
    pub start: Timestamp,
}

impl StreamParams {
    fn check(&self, regime: Regime) -> Result<(), EvolutionError> {
        if self.sources < 1 {
            return Err(EvolutionError::BadParams(
                "source count must be >= 1".into(),
            ));
        }
        if self.min_reports < 1 || self.min_reports > self.max_reports {
            return Err(EvolutionError::BadParams(
                "need 1 <= min_reports <= max_reports".into(),
            ));
        }
        if self.time_unit_minutes < 1 {
            return Err(EvolutionError::BadParams("time unit must be >= 1".into()));
        }
        if regime == Regime::NonLinearAsync {
            if self.sources < 2 {
                return Err(EvolutionError::BadParams(
                    "asynchronous regime needs at least two sources".into(),
                ));
            }
            if self.time_unit_minutes < 2 {
                return Err(EvolutionError::BadParams(
                    "non-linear regime needs a time unit of at least 2 minutes".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Deterministically generate an activity timeline and per-source report
/// streams exhibiting the requested regime.
pub fn generate_stream(
    regime: Regime,
    params: &StreamParams,
    seed: u64,
) -> Result<(ActivityTimeline, Vec<ReportStream>), EvolutionError> {
    params.check(regime)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = params.time_unit_minutes;
    let start = params.start.minutes();

    match regime {
        Regime::LinearSync | Regime::LinearSyncSkips => {
            let mut n = rng.gen_range(params.min_reports..=params.max_reports);
            if regime == Regime::LinearSyncSkips {
                n = n.max(2); // a skip needs at least one gap
            }
            let mut multipliers: Vec<i64> = (1..n)
                .map(|_| {
                    if regime == Regime::LinearSyncSkips {
                        rng.gen_range(1..=3)
                    } else {
                        1
                    }
                })
                .collect();
            if regime == Regime::LinearSyncSkips && multipliers.iter().all(|&m| m == 1) {
                let idx = rng.gen_range(0..multipliers.len());
                multipliers[idx] = 2;
            }
            let mut times = vec![Timestamp::from_minutes(start)];
            let mut cur = start;
            for m in &multipliers {
                cur += m * unit;
                times.push(Timestamp::from_minutes(cur));
            }
            let timeline = ActivityTimeline::new(times.clone())?;
            let streams = (0..params.sources)
                .map(|k| ReportStream::new(format!("S{}", k + 1), times.clone()))
                .collect::<Result<Vec<_>, _>>()?;
            Ok((timeline, streams))
        }
        Regime::NonLinearAsync => {
            // Gaps stay in [unit, 2*unit); the second gap is forced off the
            // minimum-gap lattice so the inferred unit never divides it.
            let n = params.max_reports.max(3);
            let mut gaps: Vec<i64> = Vec::with_capacity(n - 1);
            gaps.push(unit);
            gaps.push(unit + rng.gen_range(1..unit));
            for _ in 2..n - 1 {
                gaps.push(unit + rng.gen_range(0..unit));
            }
            let mut times = vec![Timestamp::from_minutes(start)];
            let mut cur = start;
            for g in &gaps {
                cur += g;
                times.push(Timestamp::from_minutes(cur));
            }
            let timeline = ActivityTimeline::new(times.clone())?;

            let streams = (0..params.sources)
                .map(|k| {
                    let len = rng.gen_range(params.min_reports..=params.max_reports);
                    // A per-source lag below the minimum gap keeps streams
                    // strictly increasing while guaranteeing an index-0
                    // publication mismatch between any two sources.
                    let lag = k as i64;
                    let times: Vec<Timestamp> = timeline
                        .times()
                        .iter()
                        .take(len)
                        .map(|t| Timestamp::from_minutes(t.minutes() + lag))
                        .collect();
                    ReportStream::new(format!("S{}", k + 1), times)
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok((timeline, streams))
        }
    }
}

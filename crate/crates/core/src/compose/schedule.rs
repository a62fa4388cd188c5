use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::Instruction;
use crate::types::Priority;

pub const DEFAULT_DEDUP_WINDOW_MS: u64 = 5000;
pub const DEFAULT_MIN_UTTERANCE_GAP_MS: u64 = 2000;
/// Relative distance change that makes a repeat worth saying again.
pub const DISTANCE_CHANGE_RATIO: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Emission {
    pub at_ms: u64,
    pub distance_m: Option<f64>,
    pub priority: Priority,
}

/// Per-session memory of what was said and when. Survives reconnects.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DedupMemory {
    pub emitted: HashMap<String, Emission>,
    pub last_utterance_ms: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScheduleConfig {
    pub dedup_window_ms: u64,
    pub min_utterance_gap_ms: u64,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig {
            dedup_window_ms: DEFAULT_DEDUP_WINDOW_MS,
            min_utterance_gap_ms: DEFAULT_MIN_UTTERANCE_GAP_MS,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Schedule {
    pub dispatch: Vec<Instruction>,
    /// Not spoken because the utterance gap had not elapsed. They are not
    /// remembered, so the next frame that still shows them proposes them
    /// again.
    pub deferred: Vec<Instruction>,
    pub duplicates: usize,
}

fn distance_changed(prev: Option<f64>, now: Option<f64>) -> bool {
    match (prev, now) {
        (Some(p), Some(n)) if p > 0.0 => ((n - p) / p).abs() > DISTANCE_CHANGE_RATIO,
        (Some(_), Some(_)) => false,
        (None, None) => false,
        _ => true,
    }
}

fn distance_order(a: Option<f64>, b: Option<f64>) -> std::cmp::Ordering {
    match (a, b) {
        (Some(x), Some(y)) => x.total_cmp(&y),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => std::cmp::Ordering::Equal,
    }
}

/// Drops repeats, orders by urgency, applies the utterance gap, and
/// records what goes out.
///
/// A candidate repeats when its dedup key was spoken less than the dedup
/// window ago, unless its distance moved by more than 20% or its priority
/// rose. Survivors are ordered by priority, then nearer first, then input
/// order. Cautions always go out; other items go out only when the gap
/// since the previous batch has elapsed.
pub fn filter_and_schedule(
    candidates: Vec<Instruction>,
    memory: &mut DedupMemory,
    now_ms: u64,
    cfg: ScheduleConfig,
) -> Schedule {
    let mut out = Schedule::default();
    let mut fresh: Vec<Instruction> = Vec::new();
    for c in candidates {
        let repeat = memory.emitted.get(&c.dedup_key).is_some_and(|prev| {
            now_ms.saturating_sub(prev.at_ms) < cfg.dedup_window_ms
                && !distance_changed(prev.distance_m, c.distance_m)
                && c.priority <= prev.priority
        });
        // same key twice in one batch: the first one stands
        if repeat || fresh.iter().any(|f| f.dedup_key == c.dedup_key) {
            out.duplicates += 1;
        } else {
            fresh.push(c);
        }
    }
    fresh.sort_by(|a, b| {
        b.priority
            .cmp(&a.priority)
            .then_with(|| distance_order(a.distance_m, b.distance_m))
    });

    let gap_open = memory
        .last_utterance_ms
        .is_none_or(|t| now_ms.saturating_sub(t) >= cfg.min_utterance_gap_ms);
    for i in fresh {
        if i.priority == Priority::Caution || gap_open {
            out.dispatch.push(i);
        } else {
            out.deferred.push(i);
        }
    }
    for i in &out.dispatch {
        memory.emitted.insert(
            i.dedup_key.clone(),
            Emission {
                at_ms: now_ms,
                distance_m: i.distance_m,
                priority: i.priority,
            },
        );
    }
    if !out.dispatch.is_empty() {
        memory.last_utterance_ms = Some(now_ms);
    }
    out
}

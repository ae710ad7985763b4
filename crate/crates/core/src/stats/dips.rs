use serde::{Deserialize, Serialize};

use super::threshold::ThresholdModel;

/// Binned detector counts for one experimental sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountStream {
    pub sequence_id: u64,
    pub bin_time: f64,
    /// Time of the left edge of bin 0.
    pub start: f64,
    pub counts: Vec<u64>,
}

impl CountStream {
    pub fn bin_center(&self, i: usize) -> f64 {
        self.start + (i as f64 + 0.5) * self.bin_time
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DipEvent {
    /// Center of the minimum bin.
    pub time: f64,
    pub bin_index: usize,
    pub min_count: u64,
}

/// Detected atom transits of one sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnOffRecord {
    pub sequence_id: u64,
    pub dead_time: f64,
    pub events: Vec<DipEvent>,
}

impl OnOffRecord {
    pub fn event_times(&self) -> impl Iterator<Item = f64> + '_ {
        self.events.iter().map(|e| e.time)
    }

    /// True if at least one event lies in [t0, t1).
    pub fn has_event_in(&self, t0: f64, t1: f64) -> bool {
        self.events.iter().any(|e| e.time >= t0 && e.time < t1)
    }
}

/// Marks every excursion below the threshold as an event at its minimum bin.
/// Excursions whose minima lie within `dead_time` of the previous event are
/// merged into it, keeping the deeper minimum.
pub fn detect_dips(stream: &CountStream, model: &ThresholdModel, dead_time: f64) -> OnOffRecord {
    let thr = model.threshold_counts();
    let mut events: Vec<DipEvent> = Vec::new();
    let mut current: Option<DipEvent> = None;
    let close = |cur: &mut Option<DipEvent>, events: &mut Vec<DipEvent>| {
        if let Some(ev) = cur.take() {
            match events.last_mut() {
                Some(last) if ev.time - last.time < dead_time => {
                    if ev.min_count < last.min_count {
                        *last = ev;
                    }
                }
                _ => events.push(ev),
            }
        }
    };
    for (i, &c) in stream.counts.iter().enumerate() {
        if (c as f64) < thr {
            let ev = DipEvent { time: stream.bin_center(i), bin_index: i, min_count: c };
            match current.as_mut() {
                Some(cur) if c < cur.min_count => *cur = ev,
                Some(_) => {}
                None => current = Some(ev),
            }
        } else {
            close(&mut current, &mut events);
        }
    }
    close(&mut current, &mut events);
    assert!(
        events.windows(2).all(|w| w[1].time - w[0].time >= dead_time),
        "events closer than the dead time"
    );
    OnOffRecord { sequence_id: stream.sequence_id, dead_time, events }
}

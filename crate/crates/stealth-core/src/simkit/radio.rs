//! Parametric radio model: unit-disk reachability plus a fixed-base,
//! serialization-time and bounded-jitter latency model.
//!
//! Range is checked at send time only; movement during flight never drops an
//! in-flight message (flight times are far below the snapshot interval).
//! There is no collision or contention modeling.

use rand::Rng;

use crate::types::SimTime;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadioModel {
    pub radius_m: f64,
    pub base_latency_ms: f64,
    pub bitrate_bps: f64,
    pub jitter_bound_ms: f64,
}

impl Default for RadioModel {
    fn default() -> Self {
        RadioModel {
            radius_m: 50.0,
            base_latency_ms: 0.1,
            bitrate_bps: 6_000_000.0,
            jitter_bound_ms: 5.0,
        }
    }
}

/// Outcome of a transmission attempt.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Delivery {
    /// Delivered after this offset from the send instant.
    Delivered(SimTime),
    /// Receiver out of range at send time.
    Dropped,
}

impl RadioModel {
    pub fn in_range(&self, sender: (f64, f64), receiver: (f64, f64)) -> bool {
        let (dx, dy) = (sender.0 - receiver.0, sender.1 - receiver.1);
        dx * dx + dy * dy <= self.radius_m * self.radius_m
    }

    /// Latency for a frame of `size_bytes`: base + serialization + uniform
    /// jitter in `[0, jitter_bound)`, rounded to whole microseconds.
    pub fn sample_latency(&self, size_bytes: usize, rng: &mut impl Rng) -> SimTime {
        let base_us = (self.base_latency_ms * 1_000.0).round() as u64;
        let serialize_us =
            ((size_bytes as f64 * 8.0) / self.bitrate_bps * 1_000_000.0).round() as u64;
        let jitter_bound_us = (self.jitter_bound_ms * 1_000.0).round() as u64;
        let jitter_us = if jitter_bound_us > 0 {
            rng.random_range(0..jitter_bound_us)
        } else {
            0
        };
        SimTime::from_micros(base_us + serialize_us + jitter_us)
    }

    /// Full transmission attempt: range check at send time, then latency.
    pub fn deliver(
        &self,
        size_bytes: usize,
        sender: (f64, f64),
        receiver: (f64, f64),
        rng: &mut impl Rng,
    ) -> Delivery {
        if self.in_range(sender, receiver) {
            Delivery::Delivered(self.sample_latency(size_bytes, rng))
        } else {
            Delivery::Dropped
        }
    }
}

//! Cost and latency accounting for the three pipeline stages.

use std::fmt;
use std::str::FromStr;
use std::sync::Mutex;
use std::time::Duration;

use serde::de::{self, Deserializer, Visitor};
use serde::ser::SerializeStruct;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};

/// Nonnegative USD amount in integer micro-dollars, so ledger sums are exact.
/// Serialized as a decimal string ("0.45", "0.000001").
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct UsdMicros(u64);

impl UsdMicros {
    pub const ZERO: UsdMicros = UsdMicros(0);

    pub const fn from_micros(micros: u64) -> Self {
        UsdMicros(micros)
    }

    pub const fn as_micros(self) -> u64 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64 / 1_000_000.0
    }

    /// Round an estimated dollar amount to the nearest micro-dollar.
    pub fn from_f64_lossy(dollars: f64) -> Result<Self> {
        if !dollars.is_finite() || dollars < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "cost must be a finite nonnegative number, got {dollars}"
            )));
        }
        Ok(UsdMicros((dollars * 1_000_000.0).round() as u64))
    }
}

impl std::ops::Add for UsdMicros {
    type Output = UsdMicros;
    fn add(self, rhs: UsdMicros) -> UsdMicros {
        UsdMicros(self.0 + rhs.0)
    }
}

impl std::ops::AddAssign for UsdMicros {
    fn add_assign(&mut self, rhs: UsdMicros) {
        self.0 += rhs.0;
    }
}

impl std::iter::Sum for UsdMicros {
    fn sum<I: Iterator<Item = UsdMicros>>(iter: I) -> Self {
        iter.fold(UsdMicros::ZERO, |a, b| a + b)
    }
}

impl fmt::Display for UsdMicros {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let dollars = self.0 / 1_000_000;
        let frac = self.0 % 1_000_000;
        if frac == 0 {
            return write!(f, "{dollars}");
        }
        let mut digits = format!("{frac:06}");
        while digits.ends_with('0') {
            digits.pop();
        }
        write!(f, "{dollars}.{digits}")
    }
}

impl FromStr for UsdMicros {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidConfig(format!("not a USD amount: {s:?}"));
        let s = s.trim();
        let (whole, frac) = match s.split_once('.') {
            Some((w, f)) => (w, f),
            None => (s, ""),
        };
        if whole.is_empty() && frac.is_empty() {
            return Err(bad());
        }
        if !whole.chars().all(|c| c.is_ascii_digit()) || !frac.chars().all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let dollars: u64 = if whole.is_empty() {
            0
        } else {
            whole.parse().map_err(|_| bad())?
        };
        // Fractional digits beyond micro-dollar precision are only allowed
        // when they are zeros.
        let (keep, rest) = frac.split_at(frac.len().min(6));
        if rest.bytes().any(|b| b != b'0') {
            return Err(bad());
        }
        let mut micros: u64 = 0;
        for (i, c) in keep.chars().enumerate() {
            micros += (c as u64 - '0' as u64) * 10u64.pow(5 - i as u32);
        }
        Ok(UsdMicros(dollars * 1_000_000 + micros))
    }
}

impl Serialize for UsdMicros {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for UsdMicros {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = UsdMicros;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "a USD amount as a decimal string or number")
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<UsdMicros, E> {
                v.parse().map_err(E::custom)
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<UsdMicros, E> {
                UsdMicros::from_f64_lossy(v).map_err(E::custom)
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<UsdMicros, E> {
                Ok(UsdMicros(v * 1_000_000))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<UsdMicros, E> {
                u64::try_from(v)
                    .map(|d| UsdMicros(d * 1_000_000))
                    .map_err(|_| E::custom("cost must be nonnegative"))
            }
        }
        deserializer.deserialize_any(V)
    }
}

/// API spend per stage. `total` is always the exact sum of the three parts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CostLedger {
    pub retrieve: UsdMicros,
    pub summarize: UsdMicros,
    pub verify: UsdMicros,
}

impl CostLedger {
    pub fn total(&self) -> UsdMicros {
        self.retrieve + self.summarize + self.verify
    }
}

impl std::ops::AddAssign for CostLedger {
    fn add_assign(&mut self, rhs: Self) {
        self.retrieve += rhs.retrieve;
        self.summarize += rhs.summarize;
        self.verify += rhs.verify;
    }
}

impl Serialize for CostLedger {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut s = serializer.serialize_struct("CostLedger", 4)?;
        s.serialize_field("retrieve", &self.retrieve)?;
        s.serialize_field("summarize", &self.summarize)?;
        s.serialize_field("verify", &self.verify)?;
        s.serialize_field("total", &self.total())?;
        s.end()
    }
}

impl<'de> Deserialize<'de> for CostLedger {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            retrieve: UsdMicros,
            summarize: UsdMicros,
            verify: UsdMicros,
            #[serde(default)]
            total: Option<UsdMicros>,
        }
        let raw = Raw::deserialize(deserializer)?;
        let ledger = CostLedger {
            retrieve: raw.retrieve,
            summarize: raw.summarize,
            verify: raw.verify,
        };
        if let Some(total) = raw.total {
            if total != ledger.total() {
                return Err(de::Error::custom(format!(
                    "cost total {total} does not equal the sum of its parts {}",
                    ledger.total()
                )));
            }
        }
        Ok(ledger)
    }
}

/// Wall time attributed to each stage. `total` is the exact sum; durations
/// are integer nanoseconds internally so additivity cannot drift.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StageTimings {
    pub retrieve: Duration,
    pub summarize: Duration,
    pub verify: Duration,
}

impl StageTimings {
    pub fn total(&self) -> Duration {
        self.retrieve + self.summarize + self.verify
    }
}

fn duration_secs<S: Serializer>(d: &Duration, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_f64(d.as_secs_f64())
}

impl Serialize for StageTimings {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Out {
            #[serde(serialize_with = "duration_secs")]
            retrieve: Duration,
            #[serde(serialize_with = "duration_secs")]
            summarize: Duration,
            #[serde(serialize_with = "duration_secs")]
            verify: Duration,
            #[serde(serialize_with = "duration_secs")]
            total: Duration,
        }
        Out {
            retrieve: self.retrieve,
            summarize: self.summarize,
            verify: self.verify,
            total: self.total(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for StageTimings {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            retrieve: f64,
            summarize: f64,
            verify: f64,
        }
        let raw = Raw::deserialize(deserializer)?;
        let to_dur = |secs: f64| -> std::result::Result<Duration, D::Error> {
            if !secs.is_finite() || secs < 0.0 {
                return Err(de::Error::custom(format!("bad duration {secs}")));
            }
            Ok(Duration::from_secs_f64(secs))
        };
        Ok(StageTimings {
            retrieve: to_dur(raw.retrieve)?,
            summarize: to_dur(raw.summarize)?,
            verify: to_dur(raw.verify)?,
        })
    }
}

/// Which stage a provider call is billed to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bucket {
    Retrieve,
    Summarize,
    Verify,
}

/// Cost and latency of one provider call.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CallMeta {
    pub cost: UsdMicros,
    pub latency: Duration,
}

/// Accumulates [`CallMeta`] into per-stage buckets. Stage time is the sum of
/// individual call latencies, so replayed runs reproduce timings exactly.
#[derive(Debug, Default)]
pub struct StageMeter {
    inner: Mutex<(CostLedger, StageTimings)>,
}

impl StageMeter {
    pub fn new() -> Self {
        StageMeter::default()
    }

    pub fn add(&self, bucket: Bucket, meta: CallMeta) {
        let mut guard = self.inner.lock().expect("meter poisoned");
        let (costs, times) = &mut *guard;
        match bucket {
            Bucket::Retrieve => {
                costs.retrieve += meta.cost;
                times.retrieve += meta.latency;
            }
            Bucket::Summarize => {
                costs.summarize += meta.cost;
                times.summarize += meta.latency;
            }
            Bucket::Verify => {
                costs.verify += meta.cost;
                times.verify += meta.latency;
            }
        }
    }

    pub fn snapshot(&self) -> (CostLedger, StageTimings) {
        *self.inner.lock().expect("meter poisoned")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn usd_display_is_canonical() {
        let cases = [
            (0u64, "0"),
            (1, "0.000001"),
            (110_000, "0.11"),
            (450_000, "0.45"),
            (1_000_000, "1"),
            (2_500_000, "2.5"),
            (12_345_678, "12.345678"),
        ];
        for (micros, text) in cases {
            assert_eq!(UsdMicros::from_micros(micros).to_string(), text);
            assert_eq!(text.parse::<UsdMicros>().unwrap().as_micros(), micros);
        }
    }

    #[test]
    fn usd_parse_accepts_long_zero_tails_only() {
        assert_eq!(
            "0.1100000000".parse::<UsdMicros>().unwrap(),
            UsdMicros::from_micros(110_000)
        );
        assert!("0.1234567".parse::<UsdMicros>().is_err());
        assert!("-1".parse::<UsdMicros>().is_err());
        assert!("1.2.3".parse::<UsdMicros>().is_err());
        assert!(".".parse::<UsdMicros>().is_err());
        assert_eq!(".5".parse::<UsdMicros>().unwrap(), UsdMicros::from_micros(500_000));
    }

    #[test]
    fn usd_deserializes_from_string_and_number() {
        assert_eq!(
            serde_json::from_str::<UsdMicros>("\"0.45\"").unwrap(),
            UsdMicros::from_micros(450_000)
        );
        assert_eq!(
            serde_json::from_str::<UsdMicros>("0.45").unwrap(),
            UsdMicros::from_micros(450_000)
        );
        assert_eq!(
            serde_json::from_str::<UsdMicros>("3").unwrap(),
            UsdMicros::from_micros(3_000_000)
        );
        assert!(serde_json::from_str::<UsdMicros>("-2").is_err());
    }

    #[test]
    fn ledger_total_is_exact_sum_and_round_trips() {
        let ledger = CostLedger {
            retrieve: "0.015".parse().unwrap(),
            summarize: "0.08".parse().unwrap(),
            verify: "0.015".parse().unwrap(),
        };
        assert_eq!(ledger.total(), "0.11".parse().unwrap());
        let json = serde_json::to_string(&ledger).unwrap();
        assert_eq!(
            json,
            r#"{"retrieve":"0.015","summarize":"0.08","verify":"0.015","total":"0.11"}"#
        );
        assert_eq!(serde_json::from_str::<CostLedger>(&json).unwrap(), ledger);
        assert!(serde_json::from_str::<CostLedger>(
            r#"{"retrieve":"1","summarize":"0","verify":"0","total":"2"}"#
        )
        .is_err());
    }

    #[test]
    fn timings_total_is_exact_sum() {
        let t = StageTimings {
            retrieve: Duration::from_millis(300),
            summarize: Duration::from_millis(1250),
            verify: Duration::from_millis(75),
        };
        assert_eq!(t.total(), Duration::from_millis(1625));
        let json = serde_json::to_value(t).unwrap();
        assert_eq!(json["total"], serde_json::json!(1.625));
    }

    #[test]
    fn meter_buckets_calls() {
        let meter = StageMeter::new();
        let call = |cost: &str, ms: u64| CallMeta {
            cost: cost.parse().unwrap(),
            latency: Duration::from_millis(ms),
        };
        meter.add(Bucket::Retrieve, call("0.01", 100));
        meter.add(Bucket::Retrieve, call("0.005", 50));
        meter.add(Bucket::Summarize, call("0.08", 2000));
        meter.add(Bucket::Verify, call("0.015", 300));
        let (costs, times) = meter.snapshot();
        assert_eq!(costs.retrieve, "0.015".parse().unwrap());
        assert_eq!(costs.total(), "0.11".parse().unwrap());
        assert_eq!(times.retrieve, Duration::from_millis(150));
        assert_eq!(times.total(), Duration::from_millis(2450));
    }

    proptest! {
        #[test]
        fn usd_display_parse_round_trip(micros in 0u64..10_000_000_000) {
            let v = UsdMicros::from_micros(micros);
            prop_assert_eq!(v.to_string().parse::<UsdMicros>().unwrap(), v);
        }

        #[test]
        fn ledger_additivity_holds(a in 0u64..1_000_000_000, b in 0u64..1_000_000_000, c in 0u64..1_000_000_000) {
            let ledger = CostLedger {
                retrieve: UsdMicros::from_micros(a),
                summarize: UsdMicros::from_micros(b),
                verify: UsdMicros::from_micros(c),
            };
            prop_assert_eq!(ledger.total().as_micros(), a + b + c);
            // String round trip preserves exactness.
            let json = serde_json::to_string(&ledger).unwrap();
            prop_assert_eq!(serde_json::from_str::<CostLedger>(&json).unwrap(), ledger);
        }

        #[test]
        fn timings_additivity_holds(a in 0u64..10_000_000u64, b in 0u64..10_000_000u64, c in 0u64..10_000_000u64) {
            let t = StageTimings {
                retrieve: Duration::from_micros(a),
                summarize: Duration::from_micros(b),
                verify: Duration::from_micros(c),
            };
            prop_assert_eq!(t.total(), Duration::from_micros(a + b + c));
        }
    }
}

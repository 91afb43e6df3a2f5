use std::fmt::Write as _;

use crate::Tick;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Value {
    Int(u64),
    Float(f64),
}

impl std::fmt::Display for Value {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Value::Int(v) => write!(f, "{v}"),
            Value::Float(v) => write!(f, "{v:.6}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Metric {
    pub name: String,
    pub value: Value,
    pub unit: &'static str,
}

/// Named results of one run, in a fixed order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsReport {
    pub metrics: Vec<Metric>,
}

impl MetricsReport {
    pub fn int(&mut self, name: &str, value: u64, unit: &'static str) {
        self.metrics.push(Metric {
            name: name.to_string(),
            value: Value::Int(value),
            unit,
        });
    }

    pub fn float(&mut self, name: &str, value: f64, unit: &'static str) {
        self.metrics.push(Metric {
            name: name.to_string(),
            value: Value::Float(value),
            unit,
        });
    }

    pub fn get(&self, name: &str) -> Option<Value> {
        self.metrics
            .iter()
            .find(|m| m.name == name)
            .map(|m| m.value)
    }

    /// The metric as a float, whichever way it is stored. Panics on unknown names.
    pub fn value(&self, name: &str) -> f64 {
        match self.get(name) {
            Some(Value::Int(v)) => v as f64,
            Some(Value::Float(v)) => v,
            None => panic!("no metric named {name}"),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("name,value,unit\n");
        for m in &self.metrics {
            let _ = writeln!(out, "{},{},{}", m.name, m.value, m.unit);
        }
        out
    }

    pub fn summary(&self) -> String {
        let width = self.metrics.iter().map(|m| m.name.len()).max().unwrap_or(0);
        let mut out = String::new();
        for m in &self.metrics {
            let _ = writeln!(out, "{:width$}  {} {}", m.name, m.value, m.unit);
        }
        out
    }
}

/// Nearest-rank percentile of sorted samples; zero when there are none.
pub fn percentile(sorted: &[Tick], p: f64) -> Tick {
    if sorted.is_empty() {
        return 0;
    }
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// Piecewise-constant per-node utilization, integrated over virtual time.
#[derive(Debug, Clone)]
pub struct UtilizationTrack {
    /// `(tick, per-node values)` at every change.
    changes: Vec<(Tick, Vec<f64>)>,
    nodes: usize,
}

impl UtilizationTrack {
    pub fn new(nodes: usize) -> Self {
        Self {
            changes: vec![(0, vec![0.0; nodes])],
            nodes,
        }
    }

    pub fn record(&mut self, now: Tick, values: Vec<f64>) {
        debug_assert_eq!(values.len(), self.nodes);
        let last = self.changes.last_mut().expect("never empty");
        if last.1 == values {
            return;
        }
        if last.0 == now {
            last.1 = values;
        } else {
            self.changes.push((now, values));
        }
    }

    /// Time average over `[from, to)` of each node's value.
    pub fn per_node_average(&self, from: Tick, to: Tick) -> Vec<f64> {
        let mut sums = vec![0.0; self.nodes];
        if to <= from {
            return sums;
        }
        for (i, (start, values)) in self.changes.iter().enumerate() {
            let end = self.changes.get(i + 1).map_or(Tick::MAX, |c| c.0);
            let (lo, hi) = ((*start).max(from), end.min(to));
            if hi > lo {
                for (s, v) in sums.iter_mut().zip(values) {
                    *s += v * (hi - lo) as f64;
                }
            }
        }
        let span = (to - from) as f64;
        sums.iter().map(|s| s / span).collect()
    }

    /// Time average over `[from, to)` of the mean over nodes.
    pub fn average(&self, from: Tick, to: Tick) -> f64 {
        let per = self.per_node_average(from, to);
        if per.is_empty() {
            0.0
        } else {
            per.iter().sum::<f64>() / per.len() as f64
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentiles() {
        let s: Vec<Tick> = (1..=100).collect();
        assert_eq!(percentile(&s, 50.0), 50);
        assert_eq!(percentile(&s, 99.0), 99);
        assert_eq!(percentile(&s, 100.0), 100);
        assert_eq!(percentile(&[7], 90.0), 7);
        assert_eq!(percentile(&[], 90.0), 0);
    }

    #[test]
    fn time_average() {
        let mut u = UtilizationTrack::new(2);
        u.record(10, vec![1.0, 0.0]);
        u.record(20, vec![1.0, 1.0]);
        assert_eq!(u.average(0, 10), 0.0);
        assert_eq!(u.average(10, 20), 0.5);
        assert_eq!(u.average(0, 40), (0.5 * 10.0 + 1.0 * 20.0) / 40.0);
        assert_eq!(u.per_node_average(10, 30), vec![1.0, 0.5]);
        assert_eq!(u.average(5, 5), 0.0);
    }

    #[test]
    fn csv_layout() {
        let mut r = MetricsReport::default();
        r.int("events", 3, "count");
        r.float("ratio", 0.25, "fraction");
        assert_eq!(
            r.to_csv(),
            "name,value,unit\nevents,3,count\nratio,0.250000,fraction\n"
        );
        assert_eq!(r.value("events"), 3.0);
    }
}

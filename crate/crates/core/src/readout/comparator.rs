use super::ReadoutParams;
use crate::physics::ElectricalTrace;
use crate::scalar::Real;

/// A comparator click: leading-edge crossing time and time spent above threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClickEvent<T> {
    pub t_cross: T,
    pub dwell: T,
}

/// Level comparator with a minimum-dwell filter, run sample by sample.
#[derive(Debug, Clone)]
pub struct Comparator<T> {
    threshold: T,
    release: T,
    min_samples: usize,
    dt: T,
    t0: T,
    start: Option<usize>,
    count: usize,
}

impl<T: Real> Comparator<T> {
    pub fn new(params: &ReadoutParams<T>, dt: T) -> Self {
        Self::with_origin(params, dt, T::zero())
    }

    /// Sample `k` is stamped `t0 + k·dt`.
    pub fn with_origin(params: &ReadoutParams<T>, dt: T, t0: T) -> Self {
        let min_samples = (params.min_dwell / dt * T::lit(1.0 - 1e-9)).ceil().to_usize().unwrap_or(0);
        Self {
            threshold: params.threshold,
            release: params.threshold - params.hysteresis,
            min_samples,
            dt,
            t0,
            start: None,
            count: 0,
        }
    }

    fn close(&mut self) -> Option<ClickEvent<T>> {
        let start = self.start.take()?;
        let n = std::mem::take(&mut self.count);
        (n >= self.min_samples).then(|| ClickEvent {
            t_cross: self.t0 + self.dt * T::from_usize_lossy(start),
            dwell: self.dt * T::from_usize_lossy(n),
        })
    }

    /// Feed sample `k`; returns a click when an above-threshold interval of
    /// sufficient dwell ends.
    #[inline]
    pub fn process(&mut self, k: usize, v: T) -> Option<ClickEvent<T>> {
        match self.start {
            None if v > self.threshold => {
                self.start = Some(k);
                self.count = 1;
                None
            }
            None => None,
            Some(_) if v > self.release => {
                self.count += 1;
                None
            }
            Some(_) => self.close(),
        }
    }

    /// Whether the input is currently above threshold.
    pub fn is_high(&self) -> bool {
        self.start.is_some()
    }

    /// Flush an interval still open at the end of the record.
    pub fn finish(&mut self) -> Option<ClickEvent<T>> {
        self.close()
    }
}

/// One click per maximal above-threshold interval lasting at least `min_dwell`.
pub fn discriminate<T: Real>(trace: &ElectricalTrace<T>, params: &ReadoutParams<T>) -> Vec<ClickEvent<T>> {
    let mut cmp = Comparator::new(params, trace.dt);
    let mut clicks: Vec<_> = trace
        .v_out
        .iter()
        .enumerate()
        .filter_map(|(k, &v)| cmp.process(k, v))
        .collect();
    clicks.extend(cmp.finish());
    clicks
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rect(dt: f64, level: f64, start: f64, len: f64, total: f64) -> ElectricalTrace<f64> {
        let n = (total / dt).round() as usize;
        let v = (0..n)
            .map(|k| {
                let t = k as f64 * dt;
                if t >= start - 1e-15 && t < start + len - 1e-15 {
                    level
                } else {
                    0.0
                }
            })
            .collect();
        ElectricalTrace { dt, v_out: v, events: vec![] }
    }

    #[test]
    fn zero_trace_never_clicks() {
        let r = ReadoutParams::default();
        assert!(discriminate(&rect(10e-12, 0.0, 0.0, 0.0, 100e-9), &r).is_empty());
    }

    #[test]
    fn short_excursion_is_filtered() {
        let r = ReadoutParams::default();
        assert!(discriminate(&rect(10e-12, 20e-3, 10e-9, 2e-9, 100e-9), &r).is_empty());
        let c = discriminate(&rect(10e-12, 20e-3, 10e-9, 3e-9, 100e-9), &r);
        assert_eq!(c.len(), 1);
        assert!((c[0].t_cross - 10e-9).abs() < 1e-15);
        assert!((c[0].dwell - 3e-9).abs() < 1e-15);
    }

    #[test]
    fn open_interval_at_end_is_flushed() {
        let r = ReadoutParams::default();
        let c = discriminate(&rect(10e-12, 20e-3, 90e-9, 20e-9, 100e-9), &r);
        assert_eq!(c.len(), 1);
    }

    #[test]
    fn hysteresis_merges_dips() {
        let mut tr = rect(10e-12, 20e-3, 10e-9, 20e-9, 60e-9);
        for k in 1500..1510 {
            tr.v_out[k] = 9.5e-3;
        }
        let r = ReadoutParams::default();
        assert_eq!(discriminate(&tr, &r).len(), 2);
        let r = ReadoutParams { hysteresis: 1e-3, ..r };
        assert_eq!(discriminate(&tr, &r).len(), 1);
    }

    #[test]
    fn quantization_grid() {
        let r = ReadoutParams::<f64>::default().with_threshold(11.63e-3);
        assert!((r.threshold - 11.6e-3).abs() < 1e-12);
    }
}

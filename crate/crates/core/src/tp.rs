//! Per-topic topical prevalence with lazy exponential decay.
//!
//! Only two scalars are stored per topic: the time of the most recent hit and
//! the prevalence value right after it. The current value is recovered on
//! demand as `tp_last * 0.5^(alpha * (t - t_last))`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TpConfig {
    /// Decay coefficient; a gap of `1/alpha` steps halves the prevalence.
    pub alpha: f64,
}

impl TpConfig {
    pub fn new(alpha: f64) -> Result<Self> {
        if !alpha.is_finite() || alpha < 0.0 {
            return Err(Error::usage(format!("alpha must be finite and >= 0, got {alpha}")));
        }
        Ok(Self { alpha })
    }

    /// Half-life of one cache capacity.
    pub fn for_capacity(capacity: usize) -> Self {
        Self { alpha: 1.0 / capacity.max(1) as f64 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TpState {
    pub t_last: u64,
    pub tp_last: f64,
}

#[inline]
fn decay(alpha: f64, gap: u64) -> f64 {
    (-alpha * gap as f64).exp2()
}

impl TpState {
    /// Decay-then-increment on a hit at `t`.
    pub fn on_hit(self, t: u64, cfg: &TpConfig) -> Result<TpState> {
        let current = self.value(t, cfg)?;
        Ok(TpState { t_last: t, tp_last: current + 1.0 })
    }

    /// Prevalence at `t` without mutating the state.
    pub fn value(&self, t: u64, cfg: &TpConfig) -> Result<f64> {
        if t < self.t_last {
            return Err(Error::usage(format!(
                "time ran backward: t={t} is before t_last={}",
                self.t_last
            )));
        }
        Ok(decay(cfg.alpha, t - self.t_last) * self.tp_last)
    }
}

pub fn tp_on_hit(state: TpState, t: u64, cfg: &TpConfig) -> Result<TpState> {
    state.on_hit(t, cfg)
}

pub fn tp_value(state: &TpState, t: u64, cfg: &TpConfig) -> Result<f64> {
    state.value(t, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Direct sum over recorded hit times.
    fn direct(hits: &[u64], t: u64, alpha: f64) -> f64 {
        hits.iter().map(|&i| 0.5f64.powf(alpha * (t - i) as f64)).sum()
    }

    #[test]
    fn first_hit_initializes() {
        let s = TpState::default().on_hit(5, &TpConfig { alpha: 0.3 }).unwrap();
        assert_eq!(s, TpState { t_last: 5, tp_last: 1.0 });
    }

    #[test]
    fn one_step_half_decay() {
        let cfg = TpConfig { alpha: 1.0 };
        let s = TpState::default().on_hit(0, &cfg).unwrap();
        assert_eq!(s.tp_last, 1.0);
        let s = s.on_hit(1, &cfg).unwrap();
        assert!((s.tp_last - 1.5).abs() < 1e-15);
    }

    #[test]
    fn zero_alpha_counts_hits() {
        let cfg = TpConfig { alpha: 0.0 };
        let mut s = TpState::default();
        for k in 1..=17u64 {
            s = s.on_hit(k * 3, &cfg).unwrap();
            assert_eq!(s.tp_last, k as f64);
        }
        assert_eq!(s.value(10_000, &cfg).unwrap(), 17.0);
    }

    #[test]
    fn value_examples() {
        let s = TpState { t_last: 4, tp_last: 2.0 };
        assert_eq!(s.value(4, &TpConfig { alpha: 0.7 }).unwrap(), 2.0);
        assert!((s.value(6, &TpConfig { alpha: 0.5 }).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn backward_time_is_usage_error() {
        let s = TpState { t_last: 9, tp_last: 1.0 };
        let cfg = TpConfig { alpha: 0.1 };
        assert!(matches!(s.value(8, &cfg), Err(Error::Usage(_))));
        assert!(matches!(s.on_hit(3, &cfg), Err(Error::Usage(_))));
    }

    #[test]
    fn config_rejects_negative() {
        assert!(TpConfig::new(-0.1).is_err());
        assert!(TpConfig::new(f64::NAN).is_err());
        assert_eq!(TpConfig::for_capacity(4).alpha, 0.25);
    }

    proptest! {
        #[test]
        fn lazy_matches_direct_sum(
            gaps in proptest::collection::vec(0u64..20, 1..200),
            tail in 0u64..50,
            alpha_ix in 0usize..4,
        ) {
            let alpha = [0.0, 0.01, 0.1, 1.0][alpha_ix];
            let cfg = TpConfig { alpha };
            let mut hits = Vec::new();
            let mut t = 0;
            let mut s = TpState::default();
            for g in gaps {
                t += g;
                hits.push(t);
                s = s.on_hit(t, &cfg).unwrap();
            }
            let now = t + tail;
            let lazy = s.value(now, &cfg).unwrap();
            let want = direct(&hits, now, alpha);
            prop_assert!((lazy - want).abs() <= 1e-9 * (1.0 + want));
        }

        #[test]
        fn decays_monotonically(t_last in 0u64..100, tp in 0.0f64..50.0, a in 0u64..100, b in 0u64..100, alpha in 0.0f64..2.0) {
            let s = TpState { t_last, tp_last: tp };
            let cfg = TpConfig { alpha };
            let (lo, hi) = (a.min(b), a.max(b));
            prop_assert!(s.value(t_last + lo, &cfg).unwrap() >= s.value(t_last + hi, &cfg).unwrap());
            let h = s.on_hit(t_last + hi, &cfg).unwrap();
            prop_assert!(h.value(t_last + hi, &cfg).unwrap() >= 1.0);
        }
    }
}

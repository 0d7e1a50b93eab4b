use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};

/// Queue progress as shown to annotators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueueProgress {
    pub total: usize,
    pub completed: usize,
    pub remaining: usize,
    pub started_at: DateTime<Utc>,
    /// Length of the window the speed is measured over.
    pub window_seconds: f64,
    pub decisions_in_window: usize,
    /// Decisions per second.
    pub speed: f64,
    /// `None` while the speed is zero.
    pub eta_seconds: Option<f64>,
}

/// Speed is the number of decisions in `(now - w, now]` divided by `w`, where
/// `w` is the configured window clipped to the time since the session started.
pub fn compute_progress(
    total: usize,
    completed: usize,
    started_at: DateTime<Utc>,
    window: Duration,
    decision_times: &[DateTime<Utc>],
    now: DateTime<Utc>,
) -> QueueProgress {
    let completed = completed.min(total);
    let remaining = total - completed;
    let elapsed = (now - started_at).max(Duration::zero());
    let w = window.min(elapsed);
    let from = now - w;
    let decisions_in_window = if w > Duration::zero() {
        decision_times
            .iter()
            .filter(|t| **t > from && **t <= now)
            .count()
    } else {
        0
    };
    let window_seconds = w.num_milliseconds() as f64 / 1000.0;
    let speed = if window_seconds > 0.0 {
        decisions_in_window as f64 / window_seconds
    } else {
        0.0
    };
    let eta_seconds = (speed > 0.0).then(|| remaining as f64 / speed);
    QueueProgress {
        total,
        completed,
        remaining,
        started_at,
        window_seconds,
        decisions_in_window,
        speed,
        eta_seconds,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(secs: i64) -> DateTime<Utc> {
        DateTime::<Utc>::UNIX_EPOCH + Duration::seconds(secs)
    }

    #[test]
    fn no_decisions_means_no_eta() {
        let p = compute_progress(10, 0, t(0), Duration::seconds(60), &[], t(30));
        assert_eq!(p.speed, 0.0);
        assert_eq!(p.eta_seconds, None);
        assert_eq!(p.remaining, 10);
    }

    #[test]
    fn window_is_clipped_to_session() {
        let times = [t(5), t(10), t(20), t(25)];
        let p = compute_progress(10, 4, t(0), Duration::seconds(60), &times, t(40));
        assert_eq!(p.window_seconds, 40.0);
        assert_eq!(p.speed, 0.1);
        assert_eq!(p.eta_seconds, Some(60.0));
    }

    #[test]
    fn old_decisions_fall_out_of_the_window() {
        let times = [t(5), t(10), t(80), t(90), t(95)];
        let p = compute_progress(20, 5, t(0), Duration::seconds(60), &times, t(100));
        assert_eq!(p.decisions_in_window, 3);
        assert_eq!(p.speed, 0.05);
    }

    #[test]
    fn zero_elapsed_time() {
        let p = compute_progress(3, 0, t(7), Duration::seconds(60), &[t(7)], t(7));
        assert_eq!(p.speed, 0.0);
        assert_eq!(p.window_seconds, 0.0);
    }
}

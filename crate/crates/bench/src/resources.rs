//! Per-process CPU time and resident memory from /proc (Linux).
//!
//! CPU time is `utime + stime` from `/proc/<pid>/stat` in clock ticks of
//! 1/100 s (the fixed user-visible tick rate), memory is `VmRSS` from
//! `/proc/<pid>/status`. Series are summed over the deployment's processes.

use std::fs;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

pub const TICKS_PER_SECOND: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProcSnapshot {
    pub cpu_seconds: f64,
    pub rss_bytes: u64,
}

/// `None` when the process is gone.
pub fn read_process(pid: u32) -> Option<ProcSnapshot> {
    let stat = fs::read_to_string(format!("/proc/{pid}/stat")).ok()?;
    // the command name may contain spaces; fields resume after the last ')'
    let rest = &stat[stat.rfind(')')? + 2..];
    let f: Vec<&str> = rest.split_whitespace().collect();
    // rest starts at field 3 (state); utime and stime are fields 14 and 15
    let utime: u64 = f.get(11)?.parse().ok()?;
    let stime: u64 = f.get(12)?.parse().ok()?;
    let status = fs::read_to_string(format!("/proc/{pid}/status")).ok()?;
    let rss_kb: u64 = status
        .lines()
        .find_map(|l| l.strip_prefix("VmRSS:"))
        .and_then(|v| v.split_whitespace().next())
        .and_then(|v| v.parse().ok())
        .unwrap_or(0);
    Some(ProcSnapshot {
        cpu_seconds: (utime + stime) as f64 / TICKS_PER_SECOND,
        rss_bytes: rss_kb * 1024,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResourceSample {
    /// Seconds since the start of sampling.
    pub t_s: f64,
    /// CPU use over the preceding interval, 100 = one core.
    pub cpu_percent: f64,
    pub rss_bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ResourceReport {
    pub pids: Vec<u32>,
    pub samples: Vec<ResourceSample>,
    pub cpu_seconds: f64,
    pub gb_seconds: f64,
    pub mean_cpu_percent: f64,
    pub mean_rss_bytes: f64,
    /// A process exited (or was unreadable) mid-run; the series stops there.
    pub truncated: bool,
}

/// Samples at a fixed interval until stopped.
pub struct Sampler {
    pids: Vec<u32>,
    start: Instant,
    last: Option<(Instant, f64)>,
    first_cpu: f64,
    report: ResourceReport,
}

fn read_all(pids: &[u32]) -> Option<ProcSnapshot> {
    let mut total = ProcSnapshot {
        cpu_seconds: 0.0,
        rss_bytes: 0,
    };
    for p in pids {
        let s = read_process(*p)?;
        total.cpu_seconds += s.cpu_seconds;
        total.rss_bytes += s.rss_bytes;
    }
    Some(total)
}

impl Sampler {
    pub fn start(pids: Vec<u32>) -> Self {
        let now = Instant::now();
        let snap = read_all(&pids);
        Sampler {
            report: ResourceReport {
                pids: pids.clone(),
                truncated: snap.is_none() && !pids.is_empty(),
                ..Default::default()
            },
            pids,
            start: now,
            last: snap.map(|s| (now, s.cpu_seconds)),
            first_cpu: snap.map(|s| s.cpu_seconds).unwrap_or(0.0),
        }
    }

    /// Takes one sample; false once the series is truncated.
    pub fn sample(&mut self) -> bool {
        if self.report.truncated || self.pids.is_empty() {
            return false;
        }
        let Some((t_prev, cpu_prev)) = self.last else {
            return false;
        };
        let now = Instant::now();
        let Some(s) = read_all(&self.pids) else {
            self.report.truncated = true;
            return false;
        };
        let dt = now.duration_since(t_prev).as_secs_f64();
        if dt <= 0.0 {
            return true;
        }
        self.report.samples.push(ResourceSample {
            t_s: now.duration_since(self.start).as_secs_f64(),
            cpu_percent: 100.0 * (s.cpu_seconds - cpu_prev) / dt,
            rss_bytes: s.rss_bytes,
        });
        self.report.gb_seconds += s.rss_bytes as f64 / 1e9 * dt;
        self.report.cpu_seconds = s.cpu_seconds - self.first_cpu;
        self.last = Some((now, s.cpu_seconds));
        true
    }

    pub fn finish(mut self) -> ResourceReport {
        self.sample();
        let r = &mut self.report;
        let span = r.samples.last().map(|s| s.t_s).unwrap_or(0.0);
        if span > 0.0 {
            r.mean_cpu_percent = 100.0 * r.cpu_seconds / span;
            r.mean_rss_bytes = r.gb_seconds * 1e9 / span;
        }
        self.report
    }
}

/// Samples `pids` every `interval` until `stop` resolves.
pub async fn sample_resources(pids: Vec<u32>, interval: Duration, stop: impl std::future::Future<Output = ()>) -> ResourceReport {
    let mut s = Sampler::start(pids);
    let mut tick = tokio::time::interval(interval);
    tick.tick().await;
    tokio::pin!(stop);
    loop {
        tokio::select! {
            _ = &mut stop => break,
            _ = tick.tick() => {
                if !s.sample() {
                    break;
                }
            }
        }
    }
    if !s.report.truncated {
        stop.await;
    }
    s.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_own_process() {
        let s = read_process(std::process::id()).unwrap();
        assert!(s.rss_bytes > 0);
        assert!(s.cpu_seconds >= 0.0);
        assert!(read_process(u32::MAX - 1).is_none());
    }

    #[test]
    fn idle_child_is_near_zero() {
        let mut child = std::process::Command::new("sleep").arg("5").spawn().unwrap();
        let mut s = Sampler::start(vec![child.id()]);
        std::thread::sleep(Duration::from_millis(1200));
        s.sample();
        let r = s.finish();
        assert!(r.mean_cpu_percent < 5.0, "{}", r.mean_cpu_percent);
        assert!(!r.truncated);
        child.kill().unwrap();
        child.wait().unwrap();
        let mut s = Sampler::start(vec![child.id()]);
        assert!(!s.sample());
        assert!(s.finish().truncated);
    }
}

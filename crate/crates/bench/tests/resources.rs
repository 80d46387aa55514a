//! Kept alone in its own test binary so no other test competes for the CPU.

use std::time::{Duration, Instant};

use resa_bench::resources::Sampler;

#[test]
fn busy_loop_is_about_one_core() {
    let child = std::process::Command::new("sh")
        .args(["-c", "i=0; while [ $i -lt 1000000000 ]; do i=$((i+1)); done"])
        .spawn()
        .unwrap();
    let mut child = child;
    let mut s = Sampler::start(vec![child.id()]);
    let t0 = Instant::now();
    while t0.elapsed() < Duration::from_millis(1500) {
        std::thread::sleep(Duration::from_millis(250));
        s.sample();
    }
    let r = s.finish();
    child.kill().ok();
    child.wait().ok();
    assert!(r.mean_cpu_percent > 70.0 && r.mean_cpu_percent < 130.0, "{}", r.mean_cpu_percent);
    assert!(r.samples.iter().all(|x| x.rss_bytes > 0));
    assert!(!r.truncated);
}

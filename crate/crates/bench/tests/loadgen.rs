use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Duration;

use resa_bench::stub::{Stub, StubConfig};
use resa_bench::workload::plan;
use resa_bench::{ramp_to_failure, run_load, BenchError, LoadProfile, Mix, Target, Thresholds, WorkloadContext};
use resa_core::synthgen::{gen_scenario, ScenarioParams};

/// Timing-sensitive tests share one CPU; run them one at a time.
static SERIAL: tokio::sync::Mutex<()> = tokio::sync::Mutex::const_new(());

async fn serial() -> tokio::sync::MutexGuard<'static, ()> {
    SERIAL.lock().await
}

fn ctx() -> Arc<WorkloadContext> {
    let p = ScenarioParams {
        n_cities: 3,
        n_users: 8,
        n_history_days: 30,
        ..Default::default()
    };
    let b = gen_scenario(&p).unwrap();
    Arc::new(WorkloadContext::new(b.catalog, &b.users, p.horizon_days).unwrap())
}

fn target(s: &Stub) -> Target {
    Target {
        url: s.url.clone(),
        token: None,
    }
}

fn profile(concurrency: usize, duration_s: f64) -> LoadProfile {
    LoadProfile {
        concurrency,
        duration_s,
        warmup_s: 0.2,
        sample_interval_ms: 200,
        ..Default::default()
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn sequential_requests_against_fixed_latency_stub() {
    let _serial = serial().await;
    let stub = Stub::start(StubConfig {
        latency: Duration::from_millis(10),
        ..Default::default()
    })
    .await
    .unwrap();
    let r = run_load(&target(&stub), ctx(), &profile(1, 2.0)).await.unwrap();
    assert!((r.throughput - 100.0).abs() <= 20.0, "throughput {}", r.throughput);
    assert!(r.latency.mean_ms >= 10.0, "mean {}", r.latency.mean_ms);
    assert_eq!(r.errors, 0);
    assert_eq!(r.mode.as_deref(), Some("stub"));
}

#[tokio::test]
async fn accounting_identities() {
    let _serial = serial().await;
    let stub = Stub::start(StubConfig {
        latency: Duration::from_millis(2),
        ..Default::default()
    })
    .await
    .unwrap();
    let r = run_load(&target(&stub), ctx(), &profile(8, 1.0)).await.unwrap();
    assert!(r.completed > 0);
    assert_eq!(r.total_responses(), r.completed + r.errors);
    assert_eq!(r.histogram.count(), r.completed + r.errors);
    assert_eq!(r.status_counts.values().sum::<u64>(), r.completed + r.errors);
    assert_eq!(r.throughput * r.window_s, r.completed as f64);
    assert!((0.0..=1.0).contains(&r.error_rate));
}

#[tokio::test]
async fn zero_duration_is_an_empty_window() {
    let _serial = serial().await;
    let stub = Stub::start(StubConfig::default()).await.unwrap();
    let err = run_load(&target(&stub), ctx(), &profile(1, 0.0)).await.unwrap_err();
    assert!(matches!(err, BenchError::EmptyWindow));
    assert_eq!(err.to_string(), "empty measurement window");
}

#[tokio::test]
async fn unreachable_target_fails_before_measuring() {
    let _serial = serial().await;
    let l = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", l.local_addr().unwrap());
    drop(l);
    let t = Target { url, token: None };
    let err = run_load(&t, ctx(), &profile(1, 1.0)).await.unwrap_err();
    assert!(matches!(err, BenchError::Unreachable { .. }), "{err}");
}

#[tokio::test]
async fn invalid_profile_is_rejected() {
    let _serial = serial().await;
    let stub = Stub::start(StubConfig::default()).await.unwrap();
    let mut p = profile(1, 1.0);
    p.mix = Mix { search: 99, ..Mix::default() };
    assert!(matches!(
        run_load(&target(&stub), ctx(), &p).await,
        Err(BenchError::InvalidProfile(_))
    ));
}

async fn recorded_run(seed: u64) -> BTreeMap<String, Vec<(String, String, Vec<u8>)>> {
    let stub = Stub::start(StubConfig {
        latency: Duration::from_millis(1),
        record: true,
        ..Default::default()
    })
    .await
    .unwrap();
    let mut p = profile(3, 0.5);
    p.seed = seed;
    p.warmup_s = 0.0;
    run_load(&target(&stub), ctx(), &p).await.unwrap();
    let mut by_user: BTreeMap<String, Vec<_>> = BTreeMap::new();
    for r in stub.recorded() {
        let (user, seq) = r.request_id.split_once('-').unwrap();
        by_user
            .entry(user.to_owned())
            .or_default()
            .push((seq.parse::<u64>().unwrap(), r.method, r.path, r.body));
    }
    by_user
        .into_iter()
        .map(|(u, mut v)| {
            v.sort();
            (u, v.into_iter().map(|(_, m, p, b)| (m, p, b)).collect())
        })
        .collect()
}

#[tokio::test]
async fn same_seed_issues_the_same_requests() {
    let _serial = serial().await;
    let c = ctx();
    let a = recorded_run(5).await;
    let b = recorded_run(5).await;
    assert_eq!(a.len(), 3);
    for (user, reqs) in &a {
        let idx: usize = user.trim_start_matches('u').parse().unwrap();
        let expected: Vec<_> = plan(&c, Mix::default(), 5, idx, reqs.len())
            .into_iter()
            .map(|p| (p.method.to_string(), p.path, p.body.unwrap_or_default()))
            .collect();
        assert_eq!(reqs, &expected, "user {user}");
        let other = &b[user];
        let n = reqs.len().min(other.len());
        assert_eq!(reqs[..n], other[..n]);
    }
    let c2 = recorded_run(6).await;
    assert_ne!(a["u0"][..3], c2["u0"][..3]);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn ramp_finds_the_capacity_cliff() {
    let _serial = serial().await;
    let cliff = 120;
    let stub = Stub::start(StubConfig {
        latency: Duration::from_millis(50),
        admission_limit: Some(cliff),
        ..Default::default()
    })
    .await
    .unwrap();
    let base = profile(1, 1.0);
    let r = ramp_to_failure(&target(&stub), ctx(), 40, 40, 400, &base, Thresholds::default())
        .await
        .unwrap();
    let fp = r.failure_point.expect("cliff should be found");
    assert!(fp.abs_diff(cliff) <= 40, "failure point {fp}");
    let levels: Vec<usize> = r.steps.iter().map(|s| s.concurrency).collect();
    assert!(levels.windows(2).all(|w| w[0] < w[1]));
    assert_eq!(levels.last(), Some(&fp));
    assert_eq!(levels, vec![40, 80, 120, 160]);
    assert!(r.steps[..3].iter().all(|s| s.report.error_rate == 0.0));
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn ramp_without_failure_runs_to_max() {
    let _serial = serial().await;
    let stub = Stub::start(StubConfig {
        latency: Duration::from_millis(5),
        ..Default::default()
    })
    .await
    .unwrap();
    let mut base = profile(1, 0.5);
    base.warmup_s = 0.1;
    let r = ramp_to_failure(&target(&stub), ctx(), 1, 2, 5, &base, Thresholds::default())
        .await
        .unwrap();
    assert_eq!(r.failure_point, None);
    assert_eq!(r.steps.len(), 3);
    assert!(ramp_to_failure(&target(&stub), ctx(), 0, 2, 5, &base, Thresholds::default())
        .await
        .is_err());
}

/// Generator headroom: against a zero-latency stub the generator alone
/// must reach a rate well above any real deployment under test here.
#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn generator_self_test_against_null_stub() {
    let _serial = serial().await;
    let stub = Stub::start(StubConfig::default()).await.unwrap();
    let r = run_load(&target(&stub), ctx(), &profile(64, 2.0)).await.unwrap();
    println!("null-stub throughput: {:.0} req/s", r.throughput);
    assert_eq!(r.errors, 0);
    assert!(r.throughput > 1000.0, "{}", r.throughput);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn two_thousand_virtual_users() {
    let _serial = serial().await;
    let stub = Stub::start(StubConfig {
        latency: Duration::from_millis(200),
        ..Default::default()
    })
    .await
    .unwrap();
    let r = run_load(&target(&stub), ctx(), &profile(2000, 1.0)).await.unwrap();
    assert_eq!(r.errors, 0, "{:?}", r.status_counts);
    assert!(r.completed >= 2000, "{}", r.completed);
}

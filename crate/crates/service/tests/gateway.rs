mod common;

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Duration;

use common::*;
use resa_client::{Client, Method, REQUEST_ID_HEADER};
use resa_service::app::router;
use resa_service::{serve_until, AppState, Mode, Peers, Role};

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn round_robin_over_two_replicas() {
    let s = scenario(&params(1));
    let d = tokio::task::block_in_place(|| deploy(&spec(Mode::Microservices), &s));
    let c = client(&d);
    let cities: Vec<String> = s.catalog.cities().iter().cloned().collect();
    for _ in 0..4 {
        c.search(&cities[0], &cities[1], None, None).await.unwrap();
    }
    let replicas = d.urls(Role::Search);
    assert_eq!(replicas.len(), 2);
    for url in replicas {
        let m = Client::new(url, None).metrics().await.unwrap();
        assert_eq!(m["endpoints"]["GET /search"]["count"], 2);
    }
    let gm = c.metrics().await.unwrap();
    assert_eq!(gm["processes"].as_array().unwrap().len(), 3 + 8 + 1);
    tokio::task::block_in_place(|| d.stop());
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn health_auth_ids_and_unknown_paths() {
    let s = scenario(&params(2));
    for mode in [Mode::Monolith, Mode::Microservices] {
        let d = tokio::task::block_in_place(|| deploy(&spec(mode), &s));
        let anon = Client::new(d.url(), None);
        let h = anon.health().await.unwrap();
        assert_eq!(h.status, "ok");
        let r = anon.send(Method::GET, "/search?origin=X&dest=Y", None, &[]).await.unwrap();
        assert_eq!(r.status, 401);
        assert_eq!(r.body, br#"{"error":"unauthorized"}"#);

        let c = client(&d);
        let r = c.send(Method::GET, "/nowhere", None, &[]).await.unwrap();
        assert_eq!(r.status, 404, "{mode}");
        let r = c.send(Method::GET, "/internal/events?topic=t", None, &[]).await.unwrap();
        assert_eq!(r.status, if mode == Mode::Monolith { 200 } else { 404 });
        let r = c.send(Method::GET, "/metrics", None, &[]).await.unwrap();
        assert!(r.request_id.unwrap().starts_with("req-"));
        let r = c.send(Method::GET, "/metrics", None, &[(REQUEST_ID_HEADER, "mine-1")]).await.unwrap();
        assert_eq!(r.request_id.as_deref(), Some("mine-1"));
        let r = c.send(Method::POST, "/quote", Some(b"{not json".to_vec()), &[]).await.unwrap();
        assert_eq!(r.status, 400);
        tokio::task::block_in_place(|| d.stop());
    }
}

async fn lone_gateway(peers: Peers, timeout_ms: u64) -> (String, tokio::sync::oneshot::Sender<()>) {
    let mut spec = spec(Mode::Microservices);
    spec.downstream_timeout_ms = timeout_ms;
    let st: Arc<AppState> = AppState::build(Role::Gateway, spec, None, peers).await.unwrap();
    let l = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let url = format!("http://{}", l.local_addr().unwrap());
    let (tx, rx) = tokio::sync::oneshot::channel::<()>();
    tokio::spawn(serve_until(l, router(st), async { rx.await.unwrap_or(()) }, Duration::from_millis(100)));
    (url, tx)
}

#[tokio::test]
async fn downstream_down_is_502_and_slow_is_504() {
    // a port that was free a moment ago: connection refused
    let dead = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let dead_url = format!("http://{}", dead.local_addr().unwrap());
    drop(dead);
    // accepts connections but never answers
    let slow = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let slow_url = format!("http://{}", slow.local_addr().unwrap());
    tokio::spawn(async move {
        let mut held = Vec::new();
        while let Ok((sock, _)) = slow.accept().await {
            held.push(sock);
        }
    });
    let peers = Peers {
        urls: BTreeMap::from([(Role::Search, vec![dead_url]), (Role::Quote, vec![slow_url])]),
        processes: vec![],
    };
    let (url, stop) = lone_gateway(peers, 300).await;
    let c = Client::new(url, Some(TOKEN.into()));
    let r = c.send(Method::GET, "/search?origin=A&dest=B", None, &[]).await.unwrap();
    assert_eq!(r.status, 502);
    let r = c.send(Method::POST, "/quote", Some(b"{}".to_vec()), &[]).await.unwrap();
    assert_eq!(r.status, 504);
    let r = c.send(Method::POST, "/recommend", Some(b"{}".to_vec()), &[]).await.unwrap();
    assert_eq!(r.status, 502, "no replica configured");
    let _ = stop.send(());
}

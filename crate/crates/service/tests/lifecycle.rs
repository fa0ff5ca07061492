//! Session lifetime: eviction, snapshots and concurrent use.

use std::sync::Arc;
use std::time::{Duration, Instant};

use infillkit::synth::{synth_score, SynthSpec};
use infillkit::wire::ErrorCode;
use infillkit::{serialize_midi, TrackRole};
use infillkit_service::messages::InfillRequestMsg;
use infillkit_service::{ServiceConfig, SessionService};
use serde_json::json;

const TRIO: [TrackRole; 3] = [TrackRole::Melody, TrackRole::Bass, TrackRole::Harmony];

fn midi(bars: usize) -> Vec<u8> {
    serialize_midi(&synth_score(&SynthSpec::trio(bars), 5))
}

fn request(seed: u64) -> InfillRequestMsg {
    serde_json::from_value(json!({"cells": [{"track": 0, "bar": 1}], "seed": seed})).unwrap()
}

fn ready(service: &SessionService) -> String {
    let (id, _) = service.create_session(&midi(8)).unwrap();
    service.set_roles(&id, &TRIO).unwrap();
    service.analyze(&id, 1).unwrap();
    id
}

#[test]
fn idle_sessions_are_evicted() {
    let config = ServiceConfig { ttl_minutes: 1, ..ServiceConfig::default() };
    let service = SessionService::new(config);
    let id = ready(&service);
    assert_eq!(service.evict_idle_at(Instant::now() + Duration::from_secs(30)), 0);
    assert_eq!(service.evict_idle_at(Instant::now() + Duration::from_secs(61)), 1);
    assert_eq!(service.analyze(&id, 1).unwrap_err().code, ErrorCode::UnknownSession);
}

#[test]
fn committed_history_survives_a_restart() {
    let dir = tempfile::tempdir().unwrap();
    let config = ServiceConfig { snapshot_dir: Some(dir.path().to_path_buf()), ..ServiceConfig::default() };
    let service = SessionService::new(config.clone());
    let id = ready(&service);
    service.request_infill(&id, &request(3)).unwrap();
    service.resolve(&id, true).unwrap();
    let exported = service.export(&id).unwrap();
    let analysis = service.analyze(&id, 1).unwrap();
    drop(service);

    let restarted = SessionService::new(config.clone());
    assert_eq!(restarted.export(&id).unwrap(), exported);
    assert_eq!(restarted.analyze(&id, 1).unwrap(), analysis);
    assert_eq!(restarted.history_depth(&id).unwrap(), 2);

    // eviction removes the snapshot too
    restarted.evict_idle_at(Instant::now() + Duration::from_secs(24 * 3600));
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
    assert_eq!(SessionService::new(config).session_count(), 0);
}

#[test]
fn garbage_snapshots_are_skipped() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.json"), "{").unwrap();
    std::fs::write(dir.path().join("note.txt"), "hello").unwrap();
    let config = ServiceConfig { snapshot_dir: Some(dir.path().to_path_buf()), ..ServiceConfig::default() };
    assert_eq!(SessionService::new(config).session_count(), 0);
}

#[test]
fn state_machine_errors() {
    let service = SessionService::new(ServiceConfig::default());
    let (id, _) = service.create_session(&midi(4)).unwrap();
    assert_eq!(service.analyze(&id, 1).unwrap_err().code, ErrorCode::NotReady);
    service.set_roles(&id, &TRIO).unwrap();
    assert_eq!(service.request_infill(&id, &request(1)).unwrap_err().code, ErrorCode::NotReady);
    service.analyze(&id, 1).unwrap();
    assert_eq!(service.resolve(&id, true).unwrap_err().code, ErrorCode::NothingPending);
    service.request_infill(&id, &request(1)).unwrap();
    assert!(service.pending_result(&id).unwrap().is_some());
    assert_eq!(service.request_infill(&id, &request(2)).unwrap_err().code, ErrorCode::ConcurrentRequest);
    let r = service.resolve(&id, true).unwrap();
    assert_eq!((r.kept, r.history_depth), (true, 2));
    assert!(service.pending_result(&id).unwrap().is_none());
}

#[test]
fn sessions_are_independent_across_threads() {
    let service = Arc::new(SessionService::new(ServiceConfig::default()));
    let handles: Vec<_> = (0..8)
        .map(|i| {
            let service = Arc::clone(&service);
            std::thread::spawn(move || {
                let id = ready(&service);
                for k in 0..3 {
                    service.request_infill(&id, &request(i * 10 + k)).unwrap();
                    service.resolve(&id, k % 2 == 0).unwrap();
                }
                service.history_depth(&id).unwrap()
            })
        })
        .collect();
    for h in handles {
        assert_eq!(h.join().unwrap(), 3);
    }
    assert_eq!(service.session_count(), 8);
}

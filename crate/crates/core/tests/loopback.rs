mod common;

use std::collections::HashSet;
use std::net::{TcpListener, TcpStream};
use std::thread;
use std::time::Duration;

use certrand_core::extractor::bits_from_bytes;
use certrand_core::net::{run_verifier_service, PostProcess, ServiceOptions};
use certrand_core::wire::{read_message, write_message, Hello, Payload, Samples, WireMessage};
use certrand_core::{Decision, DeviceKind, DeviceModel, Key32, ProtocolConfig, ProtocolKind, Transcript};

fn small_config() -> ProtocolConfig {
    let mut c = ProtocolConfig::new(ProtocolKind::Full, 6, 100, 1.5, 0.05, Key32::filled(9));
    c.eta = 0.5;
    c.min_epoch_tests = 5;
    c.timeout_ms = 300;
    c
}

/// Runs a single session against a hand-written client.
fn with_raw_client(config: &ProtocolConfig, client: impl FnOnce(TcpStream) + Send + 'static) -> Transcript {
    let dir = tempfile::tempdir().unwrap();
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let mut opts = ServiceOptions::new(dir.path());
    opts.max_sessions = Some(1);
    let cfg = config.clone();
    let service = thread::spawn(move || run_verifier_service(&cfg, listener, &opts));
    let c = thread::spawn(move || client(TcpStream::connect(addr).unwrap()));
    let outcomes = service.join().unwrap().unwrap();
    c.join().unwrap();
    Transcript::read(&outcomes[0].transcript).unwrap().0
}

fn answer_hello(stream: &mut TcpStream, n: u32) -> [u8; 16] {
    let hello = read_message(stream).unwrap();
    let reply = WireMessage::new(hello.session_id, 0, Payload::Hello(Hello { n, k: None, m: None, protocol: None }));
    write_message(stream, &reply).unwrap();
    hello.session_id
}

#[test]
fn honest_full_protocol_certifies_and_extracts() {
    let mut config = ProtocolConfig::new(ProtocolKind::Full, 10, 6000, 1.5, 1.0 / 500.0, Key32::filled(3));
    config.min_epoch_tests = 50;
    let seed: Vec<u8> = (0..8192u32).map(|i| (i.wrapping_mul(2_654_435_761) >> 13) as u8).collect();
    let post = PostProcess { certify: true, extract: Some((256, seed)) };
    let dir = tempfile::tempdir().unwrap();
    let models = [DeviceModel::new(DeviceKind::Honest, Key32::filled(4))];
    let (outcomes, reports) = common::loopback(&config, &models, dir.path(), post, false);
    let o = &outcomes[0];
    assert_eq!(o.decision, Decision::Accept, "{o:?}");
    assert!(o.post_error.is_none(), "{o:?}");
    assert!(o.certified_bits.unwrap() > 352.0);
    assert_eq!(o.output_bits, Some(256));
    let bits = std::fs::read(o.transcript.with_extension("bits")).unwrap();
    assert_eq!(bits.len(), 32);
    let ones = bits_from_bytes(&bits, 256).unwrap().iter().filter(|&&b| b).count();
    assert!((80..=176).contains(&ones), "{ones}");
    let client = reports[0].as_ref().unwrap();
    assert_eq!((client.decision, client.rounds), (Decision::Accept, 6000));
    assert_eq!(client.transcript_hash, o.hash);
}

#[test]
fn uniform_device_is_not_certified() {
    let dir = tempfile::tempdir().unwrap();
    let post = PostProcess { certify: true, extract: None };
    let models = [DeviceModel::new(DeviceKind::Uniform, Key32::filled(4))];
    let (outcomes, _) = common::loopback(&small_config(), &models, dir.path(), post, false);
    assert_eq!(outcomes[0].decision, Decision::Abort);
    assert!(outcomes[0].certified_bits.is_none());
    assert!(!outcomes[0].transcript.with_extension("cert.json").exists());
}

#[test]
fn stalled_client_times_out() {
    let t = with_raw_client(&small_config(), |mut s| {
        answer_hello(&mut s, 6);
        let _challenge = read_message(&mut s).unwrap();
        thread::sleep(Duration::from_millis(900));
    });
    assert_eq!(t.decision(), Decision::Timeout);
    assert!(t.rounds.is_empty());
}

#[test]
fn silent_client_times_out_at_hello() {
    let t = with_raw_client(&small_config(), |_s| thread::sleep(Duration::from_millis(900)));
    assert_eq!(t.decision(), Decision::Timeout);
}

#[test]
fn disconnect_mid_session_is_a_protocol_error() {
    let t = with_raw_client(&small_config(), |mut s| {
        let id = answer_hello(&mut s, 6);
        for round in 0..3 {
            let msg = read_message(&mut s).unwrap();
            assert_eq!(msg.round, round);
            write_message(&mut s, &WireMessage::new(id, round, Payload::Response(Samples { samples: vec![1] }))).unwrap();
        }
    });
    assert_eq!(t.decision(), Decision::ProtocolError);
    assert_eq!(t.rounds.len(), 3);
}

#[test]
fn wrong_round_and_bad_samples_are_protocol_errors() {
    let t = with_raw_client(&small_config(), |mut s| {
        let id = answer_hello(&mut s, 6);
        let _ = read_message(&mut s).unwrap();
        let _ = write_message(&mut s, &WireMessage::new(id, 7, Payload::Response(Samples { samples: vec![1] })));
        let _ = read_message(&mut s);
    });
    assert_eq!(t.decision(), Decision::ProtocolError);

    let t = with_raw_client(&small_config(), |mut s| {
        let id = answer_hello(&mut s, 6);
        let _ = read_message(&mut s).unwrap();
        let _ = write_message(&mut s, &WireMessage::new(id, 0, Payload::Response(Samples { samples: vec![64] })));
        let _ = read_message(&mut s);
    });
    assert_eq!(t.decision(), Decision::ProtocolError);
}

#[test]
fn qubit_mismatch_is_rejected() {
    let t = with_raw_client(&small_config(), |mut s| {
        answer_hello(&mut s, 5);
        let msg = read_message(&mut s).unwrap();
        assert!(matches!(msg.payload, Payload::Error(_)));
    });
    assert_eq!(t.decision(), Decision::ProtocolError);
}

#[test]
fn garbage_frame_is_a_protocol_error() {
    let t = with_raw_client(&small_config(), |mut s| {
        use std::io::Write;
        let _ = read_message(&mut s).unwrap();
        s.write_all(&[0, 0, 0, 3, b'{', b'{', b'{']).unwrap();
        thread::sleep(Duration::from_millis(50));
    });
    assert_eq!(t.decision(), Decision::ProtocolError);
}

#[test]
fn concurrent_sessions_are_isolated() {
    let dir = tempfile::tempdir().unwrap();
    let models: Vec<DeviceModel> = (0..4).map(|i| DeviceModel::new(DeviceKind::Honest, Key32::filled(20 + i))).collect();
    let (outcomes, reports) = common::loopback(&small_config(), &models, dir.path(), PostProcess::default(), true);
    assert_eq!(outcomes.len(), 4);
    let ids: HashSet<&str> = outcomes.iter().map(|o| o.session_id.as_str()).collect();
    assert_eq!(ids.len(), 4);
    let sessions: HashSet<u64> = outcomes.iter().map(|o| o.session).collect();
    assert_eq!(sessions, (0..4).collect());
    for o in &outcomes {
        let (t, _) = Transcript::read(&o.transcript).unwrap();
        assert_eq!(t.header.session_id, o.session_id);
        assert_eq!(t.rounds.len(), 100);
    }
    for r in &reports {
        assert!(ids.contains(r.as_ref().unwrap().session_id.as_str()));
    }
    let index = std::fs::read_to_string(dir.path().join("sessions.jsonl")).unwrap();
    assert_eq!(index.lines().count(), 4);
}

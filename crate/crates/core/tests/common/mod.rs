#![allow(dead_code)]

use std::net::TcpListener;
use std::path::Path;
use std::thread;

use certrand_core::net::{connect_device, run_verifier_service, ClientReport, PostProcess, ServiceOptions, SessionOutcome};
use certrand_core::{DeviceModel, ProtocolConfig};

/// Serves one session per model on a fresh loopback port; clients connect one
/// after another unless `concurrent`.
pub fn loopback(
    config: &ProtocolConfig,
    models: &[DeviceModel],
    out_dir: &Path,
    post: PostProcess,
    concurrent: bool,
) -> (Vec<SessionOutcome>, Vec<certrand_core::Result<ClientReport>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let opts = ServiceOptions {
        out_dir: out_dir.to_path_buf(),
        post,
        max_sessions: Some(models.len() as u64),
        first_session: 0,
    };
    let cfg = config.clone();
    let service = thread::spawn(move || run_verifier_service(&cfg, listener, &opts));
    let reports = if concurrent {
        let handles: Vec<_> = models
            .iter()
            .cloned()
            .map(|m| thread::spawn(move || connect_device(addr, &m)))
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    } else {
        models.iter().map(|m| connect_device(addr, m)).collect()
    };
    (service.join().unwrap().unwrap(), reports)
}

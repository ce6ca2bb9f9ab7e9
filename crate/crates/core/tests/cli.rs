use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::thread;

use zkbridge::cli::{parse_statement, run, EXIT_FAILURE, EXIT_OK, EXIT_USAGE};
use zkbridge::devirgo::serve;

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}

fn zk(args: &[&str]) -> i32 {
    run(std::iter::once("zkbridge").chain(args.iter().copied()))
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Builds a 4-signature job in `dir`, returning the prefix.
fn job(dir: &Path) -> PathBuf {
    let prefix = dir.join("lc");
    assert_eq!(zk(&["build-circuit", "--signatures", "4", "--out", p(&prefix)]), EXIT_OK);
    prefix
}

fn with(prefix: &Path, suffix: &str) -> String {
    format!("{}{suffix}", prefix.display())
}

#[test]
fn prove_then_verify_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let j = job(dir.path());
    let out = dir.path().join("proof4");
    let code = zk(&["prove", "--circuit", &with(&j, ".circuit"), "--witness", &with(&j, ".witness"), "--workers", "4", "--out", p(&out)]);
    assert_eq!(code, EXIT_OK);
    let stats: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(with(&out, ".json")).unwrap()).unwrap();
    assert_eq!(stats["workers"], 4);
    assert_eq!(stats["per_worker"].as_array().unwrap().len(), 4);
    assert!(stats["proof_bytes"].as_u64().unwrap() > 0);
    let verify = |statement: &str| {
        zk(&["verify", "--circuit", &with(&j, ".circuit"), "--statement", statement, "--proof", &with(&out, ".proof")])
    };
    assert_eq!(verify(&with(&out, ".statement")), EXIT_OK);

    // A statement with one public value changed is rejected.
    let text = std::fs::read_to_string(with(&out, ".statement")).unwrap();
    let (public, _) = parse_statement(&text).unwrap();
    let first = public[0].value().to_string();
    let tampered = text.replacen(&format!("\n{first} "), &format!("\n{} ", public[0].value() ^ 1), 1);
    assert_ne!(tampered, text);
    let bad = dir.path().join("bad.statement");
    std::fs::write(&bad, tampered).unwrap();
    assert_eq!(verify(p(&bad)), EXIT_FAILURE);
}

#[test]
fn single_worker_stats() {
    let dir = tempfile::tempdir().unwrap();
    let j = job(dir.path());
    let out = dir.path().join("proof1");
    let code = zk(&["prove", "--circuit", &with(&j, ".circuit"), "--witness", &with(&j, ".witness"), "--workers", "1", "--out", p(&out)]);
    assert_eq!(code, EXIT_OK);
    let stats: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(with(&out, ".json")).unwrap()).unwrap();
    assert_eq!(stats["workers"], 1);
    assert_eq!(stats["per_worker"].as_array().unwrap().len(), 1);
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let j = job(dir.path());
    let missing = dir.path().join("nope.witness");
    let out = dir.path().join("x");
    assert_eq!(zk(&["prove", "--circuit", &with(&j, ".circuit"), "--witness", p(&missing), "--out", p(&out)]), EXIT_USAGE);
    assert_eq!(zk(&["prove", "--circuit", &with(&j, ".circuit"), "--witness", &with(&j, ".witness"), "--workers", "3", "--out", p(&out)]), EXIT_USAGE);
    assert_eq!(zk(&["bench-scaling", "--copies", "", "--workers", "1"]), EXIT_USAGE);
    assert_eq!(zk(&["frobnicate"]), EXIT_USAGE);
    let bad_conf = dir.path().join("bad.conf");
    std::fs::write(&bad_conf, "workers = 3\n").unwrap();
    assert_eq!(zk(&["--config", p(&bad_conf), "lock-mint"]), EXIT_USAGE);
    let bad_scn = dir.path().join("bad.scn");
    std::fs::write(&bad_scn, "seed = 1\nteleport = yes\n").unwrap();
    assert_eq!(zk(&["scenario", p(&bad_scn)]), EXIT_USAGE);
}

#[test]
fn shipped_scenarios_pass() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["happy_path.scn", "adversarial.scn", "batched.scn"] {
        let report = dir.path().join(format!("{name}.json"));
        assert_eq!(zk(&["scenario", p(&scenarios().join(name)), "--out", p(&report)]), EXIT_OK, "{name}");
        let r: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
        assert_eq!(r["forged_accepted"], 0);
        assert_eq!(r["missing_blocks"], 0);
        if name == "adversarial.scn" {
            assert!(r["forged_submitted"].as_u64().unwrap() > 0);
        }
    }
    let conf = scenarios().join("cluster.conf");
    assert_eq!(zk(&["--config", p(&conf), "scenario", p(&scenarios().join("happy_path.scn"))]), EXIT_OK);
}

#[test]
fn bench_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("bench.csv");
    assert_eq!(zk(&["bench-scaling", "--copies", "1,2", "--workers", "1,2", "--out", p(&csv)]), EXIT_OK);
    let text = std::fs::read_to_string(&csv).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "copies,workers,wall_ms,per_worker_gates,total_gates");
    // (1,1), (2,1), (2,2)
    assert_eq!(rows.len(), 4);
}

#[test]
fn coordinate_over_tcp() {
    let dir = tempfile::tempdir().unwrap();
    let j = job(dir.path());
    let mut addrs = Vec::new();
    let mut handles = Vec::new();
    for _ in 0..2 {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        addrs.push(listener.local_addr().unwrap().to_string());
        handles.push(thread::spawn(move || serve(&listener, None, Some(1))));
    }
    let out = dir.path().join("remote");
    let list = addrs.join(",");
    let code = zk(&["coordinate", "--workers", &list, "--circuit", &with(&j, ".circuit"), "--witness", &with(&j, ".witness"), "--out", p(&out)]);
    assert_eq!(code, EXIT_OK);
    for h in handles {
        h.join().unwrap().unwrap();
    }
    let local = dir.path().join("local");
    assert_eq!(zk(&["prove", "--circuit", &with(&j, ".circuit"), "--witness", &with(&j, ".witness"), "--workers", "2", "--out", p(&local)]), EXIT_OK);
    assert_eq!(std::fs::read(with(&out, ".proof")).unwrap(), std::fs::read(with(&local, ".proof")).unwrap());
}

#[test]
fn unreachable_worker_is_a_protocol_failure() {
    let dir = tempfile::tempdir().unwrap();
    let j = job(dir.path());
    // Bind then drop to get a port nobody listens on.
    let addr = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().to_string();
    let out = dir.path().join("x");
    let code = zk(&["coordinate", "--workers", &addr, "--circuit", &with(&j, ".circuit"), "--witness", &with(&j, ".witness"), "--out", p(&out)]);
    assert_eq!(code, EXIT_FAILURE);
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_zkbridge");
    let status = |args: &[&str]| Command::new(bin).args(args).output().unwrap().status.code().unwrap();
    assert_eq!(status(&["lock-mint", "--amount", "7"]), EXIT_OK);
    assert_eq!(status(&["--help"]), EXIT_OK);
    assert_eq!(status(&["scenario", "/nonexistent.scn"]), EXIT_USAGE);
    let out = Command::new(bin).args(["lock-mint", "--amount", "7"]).output().unwrap();
    assert!(String::from_utf8_lossy(&out.stdout).contains("balance: 7"));
}

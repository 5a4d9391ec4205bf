use std::fs;
use std::net::UdpSocket;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::Duration;

use savprobe_core::codec::{build_query, encode_domain, DnsMessage, Nonce, Rcode, ScanId};
use savprobe_core::net::Ip4;

const ZONE: &str = "sim.savprobe.test";

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/data")
        .join(name)
}

fn savprobe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_savprobe"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) {
    let out = savprobe(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn code(args: &[&str]) -> i32 {
    savprobe(args).status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn simulate(dir: &Path, seed: &str) -> PathBuf {
    let out = dir.join(format!("sim-{seed}"));
    ok(&[
        "simulate",
        "--topology",
        s(&data("topology.json")),
        "--seed",
        seed,
        "--out",
        s(&out),
    ]);
    out
}

fn analyze(sim: &Path, out: &Path, auth_log: &Path) {
    ok(&[
        "analyze",
        "--zone",
        ZONE,
        "--auth-log",
        s(auth_log),
        "--scan-sink",
        s(&sim.join("responses.jsonl")),
        "--bgp",
        s(&sim.join("bgp.txt")),
        "--asn",
        s(&sim.join("asn.csv")),
        "--scanner-ip",
        "30.0.0.1",
        "--out",
        s(out),
    ]);
}

/// `unit,verdict` pairs of a verdict or ground-truth CSV.
fn verdict_pairs(path: &Path) -> Vec<(String, String)> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| {
            let mut f = l.split(',');
            (f.next().unwrap().to_string(), f.next().unwrap().to_string())
        })
        .collect()
}

fn assert_same_outputs(a: &Path, b: &Path) {
    let mut names: Vec<_> = fs::read_dir(a)
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert!(names.iter().any(|n| n == "manifest.json"));
    for n in names.iter().filter(|n| *n != "manifest.json") {
        assert_eq!(
            fs::read(a.join(n)).unwrap(),
            fs::read(b.join(n)).unwrap(),
            "{n:?}"
        );
    }
}

#[test]
fn simulate_then_analyze_matches_ground_truth() {
    let dir = tempfile::tempdir().unwrap();
    let sim = simulate(dir.path(), "3");
    let an = dir.path().join("analysis");
    analyze(&sim, &an, &sim.join("auth_log.jsonl"));
    let gt = verdict_pairs(&sim.join("ground_truth.csv"));
    assert_eq!(gt.len(), 8);
    assert_eq!(verdict_pairs(&an.join("verdicts_slash24.csv")), gt);
    let leaks = fs::read_to_string(an.join("misbehaving_forwarders.csv")).unwrap();
    assert!(leaks.contains("21.0.5.7,41.0.0.53"));
    for d in [&sim, &an] {
        let m: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(d.join("manifest.json")).unwrap()).unwrap();
        assert_eq!(m["zone"], ZONE);
        assert!(m["inputs"]
            .as_object()
            .unwrap()
            .values()
            .all(|v| v.as_str().unwrap().len() == 64));
    }
}

#[test]
fn commands_are_replayable() {
    let dir = tempfile::tempdir().unwrap();
    let a = simulate(dir.path(), "5");
    let b = dir.path().join("again");
    ok(&[
        "simulate",
        "--topology",
        s(&data("topology.json")),
        "--seed",
        "5",
        "--out",
        s(&b),
    ]);
    assert_same_outputs(&a, &b);
    let (x, y) = (dir.path().join("an-x"), dir.path().join("an-y"));
    analyze(&a, &x, &a.join("auth_log.jsonl"));
    analyze(&a, &y, &a.join("auth_log.jsonl"));
    assert_same_outputs(&x, &y);
    let (r1, r2) = (dir.path().join("rep-1"), dir.path().join("rep-2"));
    for r in [&r1, &r2] {
        ok(&[
            "report",
            "--verdicts",
            s(&x),
            "--geo",
            s(&data("geo.csv")),
            "--asn",
            s(&a.join("asn.csv")),
            "--bgp",
            s(&a.join("bgp.txt")),
            "--out",
            s(r),
        ]);
    }
    assert_same_outputs(&r1, &r2);
    let stats = fs::read_to_string(r1.join("country_stats.csv")).unwrap();
    assert!(stats.starts_with("country,resolvers,vulnerable_slash24,total_slash24,fraction\n"));
    assert!(stats.contains("\nCC,"));
}

#[test]
fn empty_auth_log_yields_only_ns() {
    let dir = tempfile::tempdir().unwrap();
    let sim = simulate(dir.path(), "4");
    let empty = dir.path().join("empty.jsonl");
    fs::write(&empty, "").unwrap();
    let an = dir.path().join("an");
    analyze(&sim, &an, &empty);
    let v = verdict_pairs(&an.join("verdicts_slash24.csv"));
    assert!(!v.is_empty());
    assert!(v.iter().all(|(_, verdict)| verdict == "NS"));
}

#[test]
fn dry_run_writes_schedule_only() {
    let dir = tempfile::tempdir().unwrap();
    let bgp = dir.path().join("bgp.txt");
    fs::write(&bgp, "198.18.0.0/23\n198.18.0.0/24\n198.18.4.4/30\n").unwrap();
    let run = |name: &str| {
        let csv = dir.path().join(name);
        ok(&[
            "scan",
            "--bgp",
            s(&bgp),
            "--zone",
            ZONE,
            "--seed",
            "9",
            "--dry-run",
            s(&csv),
        ]);
        fs::read_to_string(csv).unwrap()
    };
    let a = run("a.csv");
    assert_eq!(a, run("b.csv"));
    let mut lines = a.lines();
    assert_eq!(
        lines.next(),
        Some("target,spoofed_src,spoofed_domain,unspoofed_domain")
    );
    assert_eq!(lines.count(), 2 * 254 + 2);
    assert!(dir.path().join("manifest.json").exists());
    assert!(!dir.path().join("responses.jsonl").exists());
}

#[test]
fn sim_transport_scan_feeds_analysis() {
    let dir = tempfile::tempdir().unwrap();
    let sim = simulate(dir.path(), "6");
    let scan = dir.path().join("scan");
    ok(&[
        "scan",
        "--bgp",
        s(&sim.join("bgp.txt")),
        "--exclude",
        s(&data("exclude.txt")),
        "--zone",
        ZONE,
        "--seed",
        "6",
        "--transport",
        "sim",
        "--topology",
        s(&data("topology.json")),
        "--grace",
        "5",
        "--out",
        s(&scan),
    ]);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(scan.join("scan_report.json")).unwrap()).unwrap();
    assert_eq!(
        report["sent"].as_u64().unwrap(),
        2 * report["pairs"].as_u64().unwrap()
    );
    let an = dir.path().join("an");
    ok(&[
        "analyze",
        "--zone",
        ZONE,
        "--auth-log",
        s(&scan.join("auth_log.jsonl")),
        "--scan-sink",
        s(&scan.join("responses.jsonl")),
        "--bgp",
        s(&sim.join("bgp.txt")),
        "--out",
        s(&an),
    ]);
    assert_eq!(
        verdict_pairs(&an.join("verdicts_slash24.csv")),
        verdict_pairs(&sim.join("ground_truth.csv"))
    );
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.txt");
    let bad = dir.path().join("bad.txt");
    fs::write(&bad, "10.0.0.0/33\n").unwrap();
    let good = dir.path().join("good.txt");
    fs::write(&good, "198.18.0.0/24\n").unwrap();
    let out = dir.path().join("out");
    // clap usage error
    assert_eq!(code(&["scan", "--zone", ZONE]), 2);
    assert_eq!(code(&["bogus"]), 2);
    // missing input
    assert_eq!(
        code(&["simulate", "--topology", s(&missing), "--out", s(&out)]),
        2
    );
    assert_eq!(
        code(&[
            "scan",
            "--bgp",
            s(&missing),
            "--zone",
            ZONE,
            "--dry-run",
            s(&dir.path().join("x.csv"))
        ]),
        2
    );
    // malformed input
    assert_eq!(
        code(&[
            "scan",
            "--bgp",
            s(&bad),
            "--zone",
            ZONE,
            "--dry-run",
            s(&dir.path().join("x.csv"))
        ]),
        3
    );
    assert_eq!(
        code(&["simulate", "--topology", s(&bad), "--out", s(&out)]),
        3
    );
    // real scans refuse to start without the ethics flag and an exclusion file
    let real = [
        "scan",
        "--bgp",
        s(&good),
        "--zone",
        ZONE,
        "--transport",
        "raw",
        "--rate",
        "10",
        "--scanner-ip",
        "192.0.2.1",
        "--out",
        s(&out),
    ];
    assert_eq!(code(&real), 2);
    let mut with_flag = real.to_vec();
    with_flag.push("--i-understand-ethics");
    assert_eq!(code(&with_flag), 2);
    assert!(!out.join("responses.jsonl").exists());
    // port already taken
    let taken = UdpSocket::bind("127.0.0.1:0").unwrap();
    let addr = taken.local_addr().unwrap().to_string();
    let log = dir.path().join("auth.jsonl");
    assert_eq!(
        code(&[
            "serve",
            "--zone",
            ZONE,
            "--answer",
            "192.0.2.1",
            "--log",
            s(&log),
            "--bind",
            &addr,
            "--duration",
            "0.1"
        ]),
        4
    );
}

#[test]
fn serve_answers_and_logs() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("auth.jsonl");
    let port = {
        let probe = UdpSocket::bind("127.0.0.1:0").unwrap();
        probe.local_addr().unwrap().port()
    };
    let addr = format!("127.0.0.1:{port}");
    let mut child = Command::new(env!("CARGO_BIN_EXE_savprobe"))
        .args([
            "serve",
            "--zone",
            ZONE,
            "--answer",
            "192.0.2.7",
            "--log",
            s(&log),
            "--bind",
            &addr,
            "--duration",
            "3",
        ])
        .spawn()
        .unwrap();
    let client = UdpSocket::bind("127.0.0.1:0").unwrap();
    client
        .set_read_timeout(Some(Duration::from_millis(200)))
        .unwrap();
    let d = encode_domain(
        Nonce::new("abcdef").unwrap(),
        Ip4(0x01020304),
        ScanId::spoofed(1),
        &ZONE.parse().unwrap(),
    )
    .unwrap();
    let query = build_query(&d, 77).encode();
    let mut buf = [0u8; 1500];
    let mut reply = None;
    for _ in 0..10 {
        client.send_to(&query, &addr).unwrap();
        if let Ok((n, _)) = client.recv_from(&mut buf) {
            reply = Some(DnsMessage::decode(&buf[..n]).unwrap());
            break;
        }
    }
    let reply = reply.expect("collector answered");
    assert_eq!(reply.id, 77);
    assert_eq!(reply.flags.rcode(), Rcode::NoError);
    assert!(child.wait().unwrap().success());
    let text = fs::read_to_string(&log).unwrap();
    assert!(text.lines().count() >= 1);
    assert!(text.contains("abcdef.01020304.s1.sim.savprobe.test"));
    assert!(dir.path().join("manifest.json").exists());
}

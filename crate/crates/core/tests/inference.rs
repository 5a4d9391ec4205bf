mod common;

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use savprobe_core::codec::DnsName;
use savprobe_core::inference::{
    analyze, cross_tab, ingest_spoofer, outbound_verdicts, parse_spoofer_csv, verdicts, Analysis,
    AnalysisInput, Granularity, Outbound, ScanEvidence, SpooferOutcome, SpooferState, Unit,
    Verdict,
};
use savprobe_core::net::{to_slash24, Asn, AsnMap, Ip4, Prefix, RoutingTable};
use savprobe_core::sim::{ground_truth, simulate, SimRunConfig, SimTopology};

fn zone() -> DnsName {
    "inf.example".parse().unwrap()
}

fn ip(s: &str) -> Ip4 {
    s.parse().unwrap()
}

fn p(s: &str) -> Prefix {
    s.parse().unwrap()
}

fn run_pipeline(t: &SimTopology, seed: u64) -> Analysis {
    let run = simulate(t, &SimRunConfig::new(zone(), seed)).unwrap();
    analyze(&AnalysisInput {
        zone: &zone(),
        auth_log: &run.auth_log,
        responses: &run.responses,
        table: &t.routing_table(),
        asn: &t.asn_map(),
        scanner_ip: Some(t.scanner_ip()),
        spoofer: &[],
    })
}

fn slash24s(a: &Analysis) -> BTreeMap<Prefix, Verdict> {
    a.slash24
        .iter()
        .filter_map(|v| match v.unit {
            Unit::Slash24(p) => Some((p, v.verdict)),
            _ => None,
        })
        .collect()
}

fn state_strategy() -> impl Strategy<Value = SpooferState> {
    (0u32..30, 0usize..4, 0i64..20).prop_map(|(b, s, ts)| SpooferState {
        slash24: Prefix::truncating(Ip4((60 << 24) | (b << 8)), 24),
        state: [
            SpooferOutcome::Blocked,
            SpooferOutcome::Received,
            SpooferOutcome::Rewritten,
            SpooferOutcome::Unknown,
        ][s],
        ts,
    })
}

fn evidence_strategy() -> impl Strategy<Value = ScanEvidence> {
    let addr = (0u32..16, 0u32..8).prop_map(|(b, h)| Ip4((61 << 24) | (b << 8) | h));
    (
        prop::collection::btree_set(addr.clone(), 0..40),
        prop::collection::btree_set(addr, 0..40),
    )
        .prop_map(|(vulnerable, open)| ScanEvidence { vulnerable, open })
}

fn maps() -> (RoutingTable, AsnMap) {
    let table = RoutingTable::from_prefixes([
        p("61.0.0.0/22"),
        p("61.0.4.0/22"),
        p("61.0.8.0/21"),
        p("61.0.2.0/24"),
    ]);
    let asn = AsnMap::from_entries([(p("61.0.0.0/21"), Asn(1)), (p("61.0.8.0/21"), Asn(2))]);
    (table, asn)
}

proptest! {
    #[test]
    fn spoofer_reduction_is_order_independent(mut recs in prop::collection::vec(state_strategy(), 0..200), seed in any::<u64>()) {
        let oracle = common::spoofer_sort_oracle(&recs);
        recs.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(ingest_spoofer(&recs), oracle);
    }

    #[test]
    fn verdicts_follow_counts(ev in evidence_strategy()) {
        let (table, asn) = maps();
        for g in Granularity::ALL {
            let set = verdicts(&ev, g, &table, &asn);
            for v in set.iter() {
                // partition: exactly one class, decided by the counts
                prop_assert_eq!(Some(v.verdict), Verdict::from_counts(v.spoofed_hits, v.sav_hits));
                prop_assert!(v.spoofed_hits + v.sav_hits > 0);
            }
            let total: u64 = set.iter().map(|v| v.spoofed_hits + v.sav_hits).sum();
            let sav = ev.sav_present().count() as u64;
            prop_assert_eq!(total + set.unmapped, ev.vulnerable.len() as u64 + sav);
            let classes = set.count(Verdict::S) + set.count(Verdict::NS) + set.count(Verdict::I);
            prop_assert_eq!(classes, set.units.len());
        }
    }

    #[test]
    fn more_vulnerable_evidence_never_yields_ns(ev in evidence_strategy(), extra in (0u32..16, 0u32..8)) {
        let (table, asn) = maps();
        let mut more = ev.clone();
        more.vulnerable.insert(Ip4((61 << 24) | (extra.0 << 8) | extra.1));
        for g in Granularity::ALL {
            let before = verdicts(&ev, g, &table, &asn);
            let after = verdicts(&more, g, &table, &asn);
            for (unit, v) in &before.units {
                let now = after.get(unit);
                match v.verdict {
                    Verdict::S => prop_assert_eq!(now, Some(Verdict::S)),
                    // the new hit may also withdraw that resolver's SAV evidence
                    Verdict::I => prop_assert!(matches!(now, Some(Verdict::I | Verdict::S))),
                    Verdict::NS => prop_assert!(now.is_some()),
                }
            }
        }
    }

    #[test]
    fn lone_slash24_decides_its_prefix(ev in evidence_strategy()) {
        let (table, asn) = maps();
        let s24 = verdicts(&ev, Granularity::Slash24, &table, &asn);
        let pre = verdicts(&ev, Granularity::Prefix, &table, &asn);
        for v in s24.iter() {
            let Unit::Slash24(block) = v.unit else { continue };
            let Some(owner) = table.lpm_lookup(block.base()) else { continue };
            let siblings = s24
                .iter()
                .filter(|w| matches!(w.unit, Unit::Slash24(b) if table.lpm_lookup(b.base()) == Some(owner)))
                .count();
            if siblings == 1 {
                prop_assert_eq!(pre.get(&Unit::Prefix(owner)), Some(v.verdict));
            }
        }
    }
}

#[test]
fn spoofer_csv_reduction_matches_oracle() {
    let mut lines = [
        "61.1.1.0/24,blocked,100".to_string(),
        "61.1.1.0/24,received,50".to_string(),
        "61.1.2.0/24,received,1970-01-01T00:03:20Z".to_string(),
        "61.1.2.0/24,rewritten,100".to_string(),
        "61.1.3.0/24,unknown,7".to_string(),
    ];
    lines.shuffle(&mut ChaCha8Rng::seed_from_u64(1));
    let text = format!("slash24,state,timestamp\n{}\n", lines.join("\n"));
    let recs = parse_spoofer_csv(&text).unwrap();
    let reduced = ingest_spoofer(&recs);
    assert_eq!(reduced, common::spoofer_sort_oracle(&recs));
    assert_eq!(reduced[&p("61.1.1.0/24")].state, SpooferOutcome::Blocked);
    assert_eq!(reduced[&p("61.1.2.0/24")].state, SpooferOutcome::Received);
    assert!(parse_spoofer_csv("61.1.1.0/25,blocked,1\n").is_err());
    assert!(parse_spoofer_csv("61.1.1.0/24,maybe,1\n").is_err());
}

#[test]
fn six_network_cross_tab() {
    let ev = ScanEvidence {
        vulnerable: [
            ip("62.0.1.1"),
            ip("62.0.2.1"),
            ip("62.0.5.1"),
            ip("62.0.6.1"),
        ]
        .into(),
        open: [
            ip("62.0.1.1"),
            ip("62.0.3.1"),
            ip("62.0.4.1"),
            ip("62.0.5.2"),
        ]
        .into(),
    };
    let inbound = verdicts(
        &ev,
        Granularity::Slash24,
        &RoutingTable::default(),
        &AsnMap::default(),
    );
    assert_eq!(
        inbound.get(&Unit::Slash24(p("62.0.5.0/24"))),
        Some(Verdict::I)
    );
    let spoofer = ingest_spoofer(&[
        SpooferState {
            slash24: p("62.0.1.0/24"),
            state: SpooferOutcome::Blocked,
            ts: 5,
        },
        SpooferState {
            slash24: p("62.0.2.0/24"),
            state: SpooferOutcome::Blocked,
            ts: 5,
        },
        SpooferState {
            slash24: p("62.0.4.0/24"),
            state: SpooferOutcome::Blocked,
            ts: 5,
        },
        SpooferState {
            slash24: p("62.0.5.0/24"),
            state: SpooferOutcome::Received,
            ts: 5,
        },
        SpooferState {
            slash24: p("62.0.6.0/24"),
            state: SpooferOutcome::Unknown,
            ts: 5,
        },
    ]);
    // forwarders leak from 62.0.1.0/24 (conflicting with Spoofer) and 62.0.3.0/24
    let fwd: BTreeSet<(Ip4, Ip4)> = [
        (ip("62.0.1.9"), ip("70.0.0.1")),
        (ip("62.0.3.9"), ip("70.0.0.1")),
    ]
    .into();
    let out = outbound_verdicts(&spoofer, &fwd);
    assert_eq!(out.conflicts, 1);
    assert_eq!(out.excluded, 1);
    assert_eq!(out.map[&p("62.0.1.0/24")], Outbound::Vuln);
    let ct = cross_tab(&inbound, &out);
    assert_eq!(ct.inbound_vuln_outbound_vuln, 1); // 62.0.1
    assert_eq!(ct.inbound_vuln_outbound_filtered, 1); // 62.0.2
    assert_eq!(ct.inbound_filtered_outbound_vuln, 1); // 62.0.3
    assert_eq!(ct.inbound_filtered_outbound_filtered, 1); // 62.0.4
    assert_eq!(ct.total(), 4);
}

#[test]
fn transit_filtering_masquerades_as_edge_sav() {
    let mut t = common::fixture_topology(200, 40, 0.0);
    t.transit_filter = 1.0;
    let got = slash24s(&run_pipeline(&t, 40));
    let gt = ground_truth(&t);
    let unfiltered: BTreeSet<Prefix> = t
        .networks
        .iter()
        .filter(|n| !n.inbound_sav)
        .map(|n| n.prefix)
        .collect();
    // edge networks that do not filter are reported as protected
    let confused = got
        .iter()
        .filter(|(p, v)| {
            **v == Verdict::NS && unfiltered.contains(p) && gt.verdicts.get(p) == Some(&Verdict::S)
        })
        .count();
    assert!(confused > 0);
    assert_eq!(got.values().filter(|v| **v == Verdict::S).count(), 0);
}

#[test]
fn loss_only_removes_evidence() {
    let t0 = common::fixture_topology(400, 41, 0.0);
    let base = slash24s(&run_pipeline(&t0, 41));
    let (s0, ns0, i0) = common::verdict_counts(&base);
    for loss in [0.1, 0.3, 0.6] {
        let t = common::fixture_topology(400, 41, loss);
        let v = slash24s(&run_pipeline(&t, 41));
        let (s, ns, i) = common::verdict_counts(&v);
        assert!(s + ns + i <= s0 + ns0 + i0);
        assert!(v.keys().all(|p| base.contains_key(p)));
        assert!(
            s + ns <= s0 + ns0,
            "loss {loss}: S+NS {} above {}",
            s + ns,
            s0 + ns0
        );
    }
}

#[test]
fn empty_auth_log_gives_only_ns() {
    let t = common::fixture_topology(120, 42, 0.0);
    let run = simulate(&t, &SimRunConfig::new(zone(), 42)).unwrap();
    let a = analyze(&AnalysisInput {
        zone: &zone(),
        auth_log: &[],
        responses: &run.responses,
        table: &t.routing_table(),
        asn: &t.asn_map(),
        scanner_ip: Some(t.scanner_ip()),
        spoofer: &[],
    });
    assert_eq!(a.slash24.count(Verdict::S), 0);
    assert_eq!(a.slash24.count(Verdict::I), 0);
    assert!(a.slash24.count(Verdict::NS) > 0);
    let open_24s: BTreeSet<Prefix> = a.evidence.open.iter().map(|ip| to_slash24(*ip)).collect();
    assert_eq!(a.slash24.units.len(), open_24s.len());
}

#[test]
fn verdict_examples() {
    let ev = ScanEvidence {
        vulnerable: [
            ip("63.0.0.1"),
            ip("63.0.0.2"),
            ip("63.0.0.3"),
            ip("63.0.1.1"),
        ]
        .into(),
        open: [ip("63.0.1.2"), ip("63.0.2.2")].into(),
    };
    let set = verdicts(
        &ev,
        Granularity::Slash24,
        &RoutingTable::default(),
        &AsnMap::default(),
    );
    assert_eq!(set.get(&Unit::Slash24(p("63.0.0.0/24"))), Some(Verdict::S));
    assert_eq!(set.get(&Unit::Slash24(p("63.0.1.0/24"))), Some(Verdict::I));
    assert_eq!(set.get(&Unit::Slash24(p("63.0.2.0/24"))), Some(Verdict::NS));
    assert_eq!(set.get(&Unit::Slash24(p("63.0.3.0/24"))), None);
}

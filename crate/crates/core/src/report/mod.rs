//! Country aggregation, size distributions and CSV report files.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::inference::{Granularity, Unit, UnitVerdict, Verdict, VerdictSet};
use crate::net::{to_slash24, Asn, AsnMap, Country, GeoMap, Ip4, NetError, Prefix, RoutingTable};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountryStats {
    pub country: Country,
    pub resolvers: u64,
    pub vulnerable_slash24: u64,
    pub total_slash24: u64,
    pub fraction: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CountryReport {
    /// Sorted by country code.
    pub stats: Vec<CountryStats>,
    /// /24s whose majority vote was tied.
    pub ties: u64,
    /// /24s with no geolocated address.
    pub unassigned: u64,
}

fn slash24s_of(p: Prefix) -> impl Iterator<Item = Prefix> {
    let first = p.base().0 >> 8;
    let count = if p.len() >= 24 {
        1
    } else {
        1u64 << (24 - p.len())
    };
    (0..count).map(move |i| Prefix::truncating(Ip4((first + i as u32) << 8), 24))
}

/// Per-country /24 totals, S-verdict /24s and resolver counts. The /24
/// universe is every /24 touched by `universe` plus every verdict /24; each
/// is placed in the country holding most of its addresses.
pub fn country_stats(
    slash24_verdicts: &VerdictSet,
    geo: &GeoMap,
    universe: &RoutingTable,
    resolvers: &[Ip4],
) -> CountryReport {
    let mut blocks: BTreeSet<Prefix> = universe
        .entries()
        .iter()
        .flat_map(|p| slash24s_of(*p))
        .collect();
    let mut vulnerable: BTreeSet<Prefix> = BTreeSet::new();
    for v in slash24_verdicts.iter() {
        if let Unit::Slash24(p) = v.unit {
            blocks.insert(p);
            if v.verdict == Verdict::S {
                vulnerable.insert(p);
            }
        }
    }
    let mut report = CountryReport::default();
    let mut acc: BTreeMap<Country, (u64, u64, u64)> = BTreeMap::new();
    for b in &blocks {
        let Some(m) = geo.majority_country(*b) else {
            report.unassigned += 1;
            continue;
        };
        report.ties += m.tied as u64;
        let e = acc.entry(m.country).or_default();
        e.1 += 1;
        e.0 += vulnerable.contains(b) as u64;
    }
    let mut country_cache: BTreeMap<Prefix, Option<Country>> = BTreeMap::new();
    for ip in resolvers {
        let b = to_slash24(*ip);
        let c = country_cache
            .entry(b)
            .or_insert_with(|| geo.majority_country(b).map(|m| m.country));
        if let Some(c) = c {
            acc.entry(c.clone()).or_default().2 += 1;
        }
    }
    report.stats = acc
        .into_iter()
        .filter(|(_, (_, total, _))| *total > 0)
        .map(|(country, (vuln, total, res))| CountryStats {
            country,
            resolvers: res,
            vulnerable_slash24: vuln,
            total_slash24: total,
            fraction: vuln as f64 / total as f64,
        })
        .collect();
    report
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CdfRow {
    pub verdict: Verdict,
    pub size: u64,
    pub cumulative_fraction: f64,
}

/// Cumulative distribution of `sizes` for one class: one row per distinct
/// size.
fn cdf(verdict: Verdict, mut sizes: Vec<u64>) -> Vec<CdfRow> {
    sizes.sort_unstable();
    let n = sizes.len() as f64;
    let mut rows: Vec<CdfRow> = Vec::new();
    for (i, s) in sizes.iter().enumerate() {
        let frac = (i + 1) as f64 / n;
        match rows.last_mut() {
            Some(r) if r.size == *s => r.cumulative_fraction = frac,
            _ => rows.push(CdfRow {
                verdict,
                size: *s,
                cumulative_fraction: frac,
            }),
        }
    }
    rows
}

/// Announced address count per AS: the sum of its prefixes after removing
/// covered ones.
pub fn as_sizes(asn: &AsnMap) -> BTreeMap<Asn, u64> {
    let mut per: BTreeMap<Asn, Vec<Prefix>> = BTreeMap::new();
    for (p, a) in asn.entries() {
        per.entry(a).or_default().push(p);
    }
    per.into_iter()
        .map(|(a, ps)| {
            (
                a,
                RoutingTable::aggregate(ps)
                    .entries()
                    .iter()
                    .map(|p| p.size())
                    .sum(),
            )
        })
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SizeDistributions {
    pub as_cdf: Vec<CdfRow>,
    pub prefix_cdf: Vec<CdfRow>,
}

/// Size CDFs per verdict class for AS and prefix units.
pub fn size_distributions(
    asn_verdicts: &VerdictSet,
    prefix_verdicts: &VerdictSet,
    asn: &AsnMap,
) -> SizeDistributions {
    let sizes = as_sizes(asn);
    let mut out = SizeDistributions::default();
    for class in [Verdict::S, Verdict::NS, Verdict::I] {
        let a: Vec<u64> = asn_verdicts
            .iter()
            .filter(|v| v.verdict == class)
            .filter_map(|v| match v.unit {
                Unit::Asn(a) => sizes.get(&a).copied(),
                _ => None,
            })
            .collect();
        out.as_cdf.extend(cdf(class, a));
        let p: Vec<u64> = prefix_verdicts
            .iter()
            .filter(|v| v.verdict == class)
            .filter_map(|v| match v.unit {
                Unit::Prefix(p) => Some(p.size()),
                _ => None,
            })
            .collect();
        out.prefix_cdf.extend(cdf(class, p));
    }
    out
}

fn create(dir: &Path, name: &str) -> io::Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::Writer::from_writer(BufWriter::new(File::create(
        dir.join(name),
    )?)))
}

/// Writes `verdicts_<granularity>.csv`: `unit,verdict,spoofed_hits,sav_hits`.
pub fn write_verdicts(dir: &Path, set: &VerdictSet) -> io::Result<()> {
    let mut w = create(dir, &format!("verdicts_{}.csv", set.granularity.name()))?;
    w.write_record(["unit", "verdict", "spoofed_hits", "sav_hits"])?;
    for v in set.iter() {
        w.write_record([
            v.unit.to_string(),
            v.verdict.to_string(),
            v.spoofed_hits.to_string(),
            v.sav_hits.to_string(),
        ])?;
    }
    w.flush()
}

/// Reads a file written by [`write_verdicts`].
pub fn read_verdicts(text: &str, granularity: Granularity) -> Result<VerdictSet, NetError> {
    let mut units = BTreeMap::new();
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let err = |reason: String| NetError::Line { line, reason };
        let rec = rec.map_err(|e| err(e.to_string()))?;
        if rec.len() != 4 {
            return Err(err("expected unit,verdict,spoofed_hits,sav_hits".into()));
        }
        let unit = match granularity {
            Granularity::Slash24 => {
                Unit::Slash24(rec[0].parse().map_err(|e: NetError| err(e.to_string()))?)
            }
            Granularity::Prefix => {
                Unit::Prefix(rec[0].parse().map_err(|e: NetError| err(e.to_string()))?)
            }
            Granularity::Asn => {
                Unit::Asn(rec[0].parse().map_err(|e: NetError| err(e.to_string()))?)
            }
        };
        let s: u64 = rec[2].parse().map_err(|_| err("bad spoofed_hits".into()))?;
        let n: u64 = rec[3].parse().map_err(|_| err("bad sav_hits".into()))?;
        let verdict =
            Verdict::from_counts(s, n).ok_or_else(|| err("unit without evidence".into()))?;
        if verdict.to_string() != rec[1] {
            return Err(err(format!("verdict {} disagrees with counts", &rec[1])));
        }
        units.insert(
            unit,
            UnitVerdict {
                unit,
                verdict,
                spoofed_hits: s,
                sav_hits: n,
            },
        );
    }
    Ok(VerdictSet {
        granularity,
        units,
        unmapped: 0,
    })
}

fn write_cdf(dir: &Path, name: &str, rows: &[CdfRow]) -> io::Result<()> {
    let mut w = create(dir, name)?;
    w.write_record(["verdict", "size", "cumulative_fraction"])?;
    for r in rows {
        w.write_record([
            r.verdict.to_string(),
            r.size.to_string(),
            format!("{:.6}", r.cumulative_fraction),
        ])?;
    }
    w.flush()
}

/// Writes every report CSV into `dir`. Output depends only on the inputs.
pub fn emit_reports(
    dir: &Path,
    countries: &CountryReport,
    sizes: &SizeDistributions,
    verdicts: &[&VerdictSet],
) -> io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut w = create(dir, "country_stats.csv")?;
    w.write_record([
        "country",
        "resolvers",
        "vulnerable_slash24",
        "total_slash24",
        "fraction",
    ])?;
    for c in &countries.stats {
        w.write_record([
            c.country.0.clone(),
            c.resolvers.to_string(),
            c.vulnerable_slash24.to_string(),
            c.total_slash24.to_string(),
            format!("{:.6}", c.fraction),
        ])?;
    }
    w.flush()?;
    write_cdf(dir, "as_size_cdf.csv", &sizes.as_cdf)?;
    write_cdf(dir, "prefix_size_cdf.csv", &sizes.prefix_cdf)?;
    for v in verdicts {
        write_verdicts(dir, v)?;
    }
    let mut f = BufWriter::new(File::create(dir.join("report_summary.json"))?);
    serde_json::to_writer_pretty(
        &mut f,
        &serde_json::json!({ "geo_ties": countries.ties, "geo_unassigned": countries.unassigned }),
    )?;
    f.write_all(b"\n")?;
    f.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::{verdicts, ScanEvidence};

    fn ip(s: &str) -> Ip4 {
        s.parse().unwrap()
    }

    fn geo(rows: &[(&str, &str, &str)]) -> GeoMap {
        GeoMap::from_ranges(
            rows.iter()
                .map(|(s, e, c)| (ip(s), ip(e), Country::from(*c))),
        )
        .unwrap()
    }

    #[test]
    fn single_block_country_fully_vulnerable() {
        let g = geo(&[
            ("1.2.3.0", "1.2.3.255", "CC"),
            ("5.0.0.0", "5.0.1.255", "DE"),
        ]);
        let universe =
            RoutingTable::aggregate(["1.2.3.0/24".parse().unwrap(), "5.0.0.0/23".parse().unwrap()]);
        let ev = ScanEvidence {
            vulnerable: [ip("1.2.3.9")].into(),
            open: [ip("5.0.0.1")].into(),
        };
        let v = verdicts(&ev, Granularity::Slash24, &universe, &AsnMap::default());
        let r = country_stats(
            &v,
            &g,
            &universe,
            &[ip("1.2.3.9"), ip("5.0.0.1"), ip("5.0.1.1")],
        );
        assert_eq!(r.stats.len(), 2);
        let cc = &r.stats[0];
        assert_eq!(
            (
                cc.country.0.as_str(),
                cc.total_slash24,
                cc.vulnerable_slash24
            ),
            ("CC", 1, 1)
        );
        assert_eq!(cc.fraction, 1.0);
        let de = &r.stats[1];
        assert_eq!(
            (de.total_slash24, de.vulnerable_slash24, de.resolvers),
            (2, 0, 2)
        );
    }

    #[test]
    fn split_block_goes_to_majority() {
        let g = geo(&[
            ("1.2.3.0", "1.2.3.199", "AA"),
            ("1.2.3.200", "1.2.3.255", "BB"),
        ]);
        let universe = RoutingTable::aggregate(["1.2.3.0/24".parse().unwrap()]);
        let v = verdicts(
            &ScanEvidence::default(),
            Granularity::Slash24,
            &universe,
            &AsnMap::default(),
        );
        let r = country_stats(&v, &g, &universe, &[]);
        assert_eq!(r.stats.len(), 1);
        assert_eq!(r.stats[0].country.0, "AA");
    }

    #[test]
    fn as_size_sums_aggregated_prefixes() {
        let m = AsnMap::from_entries([
            ("1.2.0.0/16".parse().unwrap(), Asn(1)),
            ("1.2.3.0/24".parse().unwrap(), Asn(1)),
            ("9.9.9.0/24".parse().unwrap(), Asn(2)),
            ("9.9.10.0/24".parse().unwrap(), Asn(2)),
        ]);
        let s = as_sizes(&m);
        assert_eq!(s[&Asn(1)], 65536);
        assert_eq!(s[&Asn(2)], 512);
    }

    #[test]
    fn cdf_distinct_sizes() {
        let rows = cdf(Verdict::S, vec![256, 65536, 256, 512]);
        let pairs: Vec<_> = rows
            .iter()
            .map(|r| (r.size, r.cumulative_fraction))
            .collect();
        assert_eq!(pairs, [(256, 0.5), (512, 0.75), (65536, 1.0)]);
        assert!(cdf(Verdict::I, vec![]).is_empty());
    }

    #[test]
    fn verdict_csv_round_trip() {
        let t = RoutingTable::from_prefixes(["1.2.3.0/24".parse().unwrap()]);
        let ev = ScanEvidence {
            vulnerable: [ip("1.2.3.4")].into(),
            open: [ip("1.2.3.5"), ip("7.7.7.7")].into(),
        };
        let v = verdicts(&ev, Granularity::Slash24, &t, &AsnMap::default());
        let dir = tempfile::tempdir().unwrap();
        write_verdicts(dir.path(), &v).unwrap();
        let text = std::fs::read_to_string(dir.path().join("verdicts_slash24.csv")).unwrap();
        assert_eq!(
            text,
            "unit,verdict,spoofed_hits,sav_hits\n1.2.3.0/24,I,1,1\n7.7.7.0/24,NS,0,1\n"
        );
        let back = read_verdicts(&text, Granularity::Slash24).unwrap();
        assert_eq!(back.units, v.units);
    }

    #[test]
    fn empty_inputs_give_header_only_files() {
        let dir = tempfile::tempdir().unwrap();
        let empty = verdicts(
            &ScanEvidence::default(),
            Granularity::Asn,
            &RoutingTable::default(),
            &AsnMap::default(),
        );
        emit_reports(
            dir.path(),
            &CountryReport::default(),
            &SizeDistributions::default(),
            &[&empty],
        )
        .unwrap();
        let read = |n: &str| std::fs::read_to_string(dir.path().join(n)).unwrap();
        assert_eq!(
            read("country_stats.csv"),
            "country,resolvers,vulnerable_slash24,total_slash24,fraction\n"
        );
        assert_eq!(
            read("as_size_cdf.csv"),
            "verdict,size,cumulative_fraction\n"
        );
        assert_eq!(
            read("verdicts_asn.csv"),
            "unit,verdict,spoofed_hits,sav_hits\n"
        );
    }
}

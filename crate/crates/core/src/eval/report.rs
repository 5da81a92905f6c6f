use std::io::Write;

use super::protocol::{FoldMetrics, MetricsReport};

/// Aligned text table with one row per fold plus the average. Includes
/// wall-clock timing, so it is not byte-stable across runs.
pub fn write_table<W: Write>(report: &MetricsReport, mut out: W) -> std::io::Result<()> {
    writeln!(out, "protocol: {}", report.protocol.as_str())?;
    writeln!(out, "K: {}   seed: {}   folds: {}", report.k, report.seed, report.folds.len())?;
    write!(out, "{:<8}", "fold")?;
    for name in FoldMetrics::NAMES {
        write!(out, "{:>18}", format!("{name}@{}", report.k))?;
    }
    writeln!(out, "{:>10}{:>10}{:>10}", "projects", "dropped", "seconds")?;
    for f in &report.folds {
        write!(out, "{:<8}", f.fold)?;
        match &f.metrics {
            Some(m) => {
                for v in m.values() {
                    write!(out, "{v:>18.2}")?;
                }
            }
            None => write!(out, "{:>18}", "failed")?,
        }
        writeln!(out, "{:>10}{:>10}{:>10.1}", f.evaluated, f.dropped, f.seconds)?;
    }
    if let Some(avg) = &report.average {
        write!(out, "{:<8}", "average")?;
        for v in avg.values() {
            write!(out, "{v:>18.2}")?;
        }
        writeln!(out, "{:>10}{:>10}{:>10.1}", "", report.dropped(), report.seconds)?;
    }
    for f in report.folds.iter().filter(|f| f.error.is_some()) {
        writeln!(out, "fold {} incomplete: {}", f.fold, f.error.as_deref().unwrap_or(""))?;
    }
    Ok(())
}

/// Machine-readable form: `#` comment header, then `fold,metric,K,value`
/// lines with `avg` as the fold of the averages. No timing.
pub fn write_kv<W: Write>(report: &MetricsReport, mut out: W) -> std::io::Result<()> {
    writeln!(out, "# protocol={}", report.protocol.as_str())?;
    writeln!(out, "# seed={}", report.seed)?;
    let incomplete: Vec<String> = report.incomplete().iter().map(|f| f.to_string()).collect();
    writeln!(out, "# incomplete_folds={}", incomplete.join(" "))?;
    writeln!(out, "# dropped_projects={}", report.dropped())?;
    writeln!(out, "fold,metric,K,value")?;
    let k = report.k;
    for f in &report.folds {
        if let Some(m) = &f.metrics {
            for (name, v) in FoldMetrics::NAMES.iter().zip(m.values()) {
                writeln!(out, "{},{name},{k},{v:.6}", f.fold)?;
            }
        }
    }
    if let Some(avg) = &report.average {
        for (name, v) in FoldMetrics::NAMES.iter().zip(avg.values()) {
            writeln!(out, "avg,{name},{k},{v:.6}")?;
        }
    }
    Ok(())
}

/// Parse `fold,metric,K,value` lines back into tuples, skipping the header
/// and comments.
pub fn parse_kv(text: &str) -> Vec<(String, String, usize, f64)> {
    text.lines()
        .filter(|l| !l.starts_with('#') && *l != "fold,metric,K,value" && !l.is_empty())
        .filter_map(|l| {
            let mut it = l.split(',');
            let fold = it.next()?.to_owned();
            let metric = it.next()?.to_owned();
            let k = it.next()?.parse().ok()?;
            let v = it.next()?.parse().ok()?;
            Some((fold, metric, k, v))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{FoldResult, Protocol};

    fn report() -> MetricsReport {
        let m = FoldMetrics {
            precision: 12.5,
            recall: 40.0,
            epc: 55.0,
            coverage: 30.0,
            random_recall: 5.0,
            popularity_recall: 20.0,
        };
        MetricsReport {
            protocol: Protocol::ColdStart30,
            k: 10,
            seed: 4,
            folds: vec![
                FoldResult {
                    fold: 0,
                    metrics: Some(m),
                    error: None,
                    error_class: None,
                    evaluated: 9,
                    dropped: 1,
                    seconds: 2.0,
                },
                FoldResult {
                    fold: 1,
                    metrics: None,
                    error: Some("boom".into()),
                    error_class: Some(crate::ErrorClass::Data),
                    evaluated: 0,
                    dropped: 0,
                    seconds: 0.5,
                },
            ],
            average: Some(m),
            seconds: 3.0,
        }
    }

    #[test]
    fn kv_round_trip_and_no_timing() {
        let mut buf = Vec::new();
        write_kv(&report(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("# protocol=coldstart-30"));
        assert!(text.contains("# incomplete_folds=1"));
        assert!(!text.contains("second"));
        let rows = parse_kv(&text);
        assert_eq!(rows.len(), 12);
        assert!(rows.contains(&("avg".into(), "recall".into(), 10, 40.0)));
        for metric in ["precision", "recall", "epc", "coverage"] {
            assert!(rows.iter().any(|r| r.0 == "avg" && r.1 == metric));
        }
    }

    #[test]
    fn table_marks_failed_folds() {
        let mut buf = Vec::new();
        write_table(&report(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("protocol: coldstart-30"));
        assert!(text.contains("failed"));
        assert!(text.contains("fold 1 incomplete: boom"));
    }
}

use std::fmt::Write;

use crate::aggregate::{fmt_num, Summary, MISSING};
use crate::BenchError;

fn table(out: &mut String, header: &[String], rows: &[Vec<String>]) {
    let mut width: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for r in rows {
        for (w, c) in width.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |cells: &[String]| {
        let mut s = String::new();
        for (i, (c, w)) in cells.iter().zip(&width).enumerate() {
            if i > 0 {
                s.push_str("  ");
            }
            let pad = w - c.chars().count();
            if i == 0 {
                s.push_str(c);
                s.push_str(&" ".repeat(pad));
            } else {
                s.push_str(&" ".repeat(pad));
                s.push_str(c);
            }
        }
        s.trim_end().to_string()
    };
    let _ = writeln!(out, "{}", line(header));
    let _ = writeln!(out, "{}", width.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("  "));
    for r in rows {
        let _ = writeln!(out, "{}", line(r));
    }
    out.push('\n');
}

/// Plain-text rendering of a summary. Skipped pairs print as a dash and the
/// best cell of each row is starred.
pub fn render(s: &Summary) -> Result<String, BenchError> {
    if s.records == 0 && s.failures == 0 {
        return Err(BenchError::Empty);
    }
    let mut out = String::new();
    let _ = writeln!(out, "records: {} ok, {} failed\n", s.records, s.failures);
    for h in &s.heatmaps {
        let _ = writeln!(out, "{} ({}), median ± IQR", h.measure.id(), h.scope);
        let mut header = vec!["regressor".to_string()];
        header.extend(h.explainers.iter().map(|e| e.to_string()));
        let rows: Vec<Vec<String>> = h
            .regressors
            .iter()
            .enumerate()
            .map(|(ri, reg)| {
                let best = h.best(ri);
                let mut row = vec![reg.to_string()];
                row.extend(h.cells[ri].iter().enumerate().map(|(ei, c)| match c {
                    Some(c) if best == Some(ei) => format!("*{}", c.render()),
                    Some(c) => c.render(),
                    None => MISSING.to_string(),
                }));
                row
            })
            .collect();
        table(&mut out, &header, &rows);
    }
    if !s.accuracy.is_empty() {
        let _ = writeln!(out, "accuracy on the test sets, median ± IQR");
        let header: Vec<String> =
            ["regressor", "dataset", "MAE", "NMSE", "R2", "size", "hit rate"].iter().map(|h| h.to_string()).collect();
        let rows: Vec<Vec<String>> = s
            .accuracy
            .iter()
            .map(|a| {
                vec![
                    a.regressor.to_string(),
                    a.dataset.clone(),
                    a.mae.render(),
                    a.nmse.render(),
                    a.r2.render(),
                    a.size.map_or(MISSING.into(), |c| c.render()),
                    a.hit_rate.map_or(MISSING.into(), |h| format!("{h:.2}")),
                ]
            })
            .collect();
        table(&mut out, &header, &rows);
    }
    for r in &s.ranks {
        let _ = writeln!(out, "average ranks: {} ({}), {} blocks", r.measure.id(), r.scope, r.blocks);
        let mut order: Vec<usize> = (0..r.table.methods.len()).collect();
        order.sort_by(|&a, &b| r.table.average_ranks[a].total_cmp(&r.table.average_ranks[b]));
        let header = vec!["explainer".to_string(), "rank".to_string(), "differs from (p < 0.05)".to_string()];
        let rows: Vec<Vec<String>> = order
            .iter()
            .map(|&i| {
                let sig: Vec<&str> = (0..r.table.methods.len())
                    .filter(|&j| r.table.significant(i, j))
                    .map(|j| r.table.methods[j].as_str())
                    .collect();
                vec![r.table.methods[i].clone(), format!("{:.2}", r.table.average_ranks[i]), sig.join(" ")]
            })
            .collect();
        table(&mut out, &header, &rows);
    }
    let _ = writeln!(out, "explanation seconds per record, median");
    let mut header = vec!["regressor".to_string()];
    header.extend(s.explainers.iter().map(|e| e.to_string()));
    let rows: Vec<Vec<String>> = s
        .regressors
        .iter()
        .zip(&s.timing)
        .map(|(reg, row)| {
            let mut r = vec![reg.to_string()];
            r.extend(row.iter().map(|t| t.map_or(MISSING.into(), fmt_num)));
            r
        })
        .collect();
    table(&mut out, &header, &rows);
    Ok(out)
}

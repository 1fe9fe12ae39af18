//! Plain-text rendering of the study tables at full precision.

use hawkesnet::experiments::{MetricsTable, ParamRow};

fn render(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut width: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (w, c) in width.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let line = |cells: Vec<&str>| {
        cells.iter().zip(&width).map(|(c, w)| format!("{c:<w$}")).collect::<Vec<_>>().join("  ").trim_end().to_string()
    };
    let mut out = line(header.to_vec());
    for r in rows {
        out.push('\n');
        out.push_str(&line(r.iter().map(String::as_str).collect()));
    }
    out
}

fn param_rows(rows: &[&ParamRow]) -> String {
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.scenario.clone(),
                r.parameter.clone(),
                r.truth.to_string(),
                r.mean_bias.to_string(),
                r.median_bias.to_string(),
                r.sd.to_string(),
                r.mad.to_string(),
                r.rmse.to_string(),
            ]
        })
        .collect();
    render(&["scenario", "parameter", "truth", "mean_bias", "median_bias", "sd", "mad", "rmse"], &body)
}

/// Tables 1 to 4 (θ, confusion, true edges, baselines) and the study summaries.
pub fn format(m: &MetricsTable) -> String {
    let mut s = String::new();
    s.push_str("Table 1: estimates of beta and gamma\n");
    s.push_str(&param_rows(&m.theta.iter().collect::<Vec<_>>()));
    s.push_str("\n\nTable 2: average confusion matrices\n");
    let conf: Vec<Vec<String>> = m
        .confusion
        .iter()
        .map(|c| {
            vec![
                c.scenario.clone(),
                c.replications.to_string(),
                c.tp.to_string(),
                c.fn_.to_string(),
                c.fp.to_string(),
                c.tn.to_string(),
            ]
        })
        .collect();
    s.push_str(&render(&["scenario", "replications", "tp", "fn", "fp", "tn"], &conf));
    s.push_str("\n\nTable 3: estimates of the non-zero entries of C\n");
    s.push_str(&param_rows(&m.edges.iter().filter(|r| r.truth != 0.0).collect::<Vec<_>>()));
    s.push_str("\n\nTable 4: estimates of alpha\n");
    s.push_str(&param_rows(&m.alpha.iter().collect::<Vec<_>>()));
    s.push_str("\n\nEdge separation (true edges outweigh non-edges)\n");
    let sep: Vec<Vec<String>> = m
        .separation
        .iter()
        .map(|r| vec![r.scenario.clone(), r.replications.to_string(), r.separated.to_string()])
        .collect();
    s.push_str(&render(&["scenario", "replications", "separated"], &sep));
    s.push_str("\n\nFailed fits\n");
    let fail: Vec<Vec<String>> = m
        .failures
        .iter()
        .map(|r| vec![r.scenario.clone(), r.attempted.to_string(), r.failed.to_string()])
        .collect();
    s.push_str(&render(&["scenario", "attempted", "failed"], &fail));
    s
}

pub fn print(m: &MetricsTable) {
    println!("{}", format(m));
}

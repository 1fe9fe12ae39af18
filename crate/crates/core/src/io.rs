//! CSV exchange formats for event logs and covariate fields.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a write
//! followed by a read reproduces every value bit for bit.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::model::{CovariateField, EventLog};

/// Write `node,id,time` rows, nodes in order and times ascending.
pub fn write_events<W: Write>(events: &EventLog, w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["node", "id", "time"])?;
    for (i, node) in events.nodes().iter().enumerate() {
        for (k, t) in node.iter().enumerate() {
            wr.write_record([i.to_string(), k.to_string(), t.to_string()])?;
        }
    }
    wr.flush()?;
    Ok(())
}

/// Read an event CSV. `n` fixes the node count (nodes without rows are
/// empty); `None` infers it from the largest node id.
pub fn read_events<R: Read>(r: R, horizon: f64, n: Option<usize>) -> Result<EventLog> {
    let mut rd = csv::Reader::from_reader(r);
    check_header(rd.headers()?, &["node", "id", "time"])?;
    let mut rows: Vec<(usize, f64)> = Vec::new();
    for (line, rec) in rd.records().enumerate() {
        let rec = rec?;
        let node: usize = parse(&rec, 0, line)?;
        let time: f64 = parse(&rec, 2, line)?;
        rows.push((node, time));
    }
    let n = match n {
        Some(n) => n,
        None => rows.iter().map(|r| r.0 + 1).max().unwrap_or(0),
    };
    let mut times = vec![Vec::new(); n];
    for (node, t) in rows {
        if node >= n {
            return Err(Error::InvalidInput(format!("node id {node} out of range for {n} nodes")));
        }
        times[node].push(t);
    }
    EventLog::new(horizon, times)
}

/// Write `segment_start,node,x1..xp`, one row per node and segment.
pub fn write_covariates<W: Write>(cov: &CovariateField, w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let mut header = vec!["segment_start".to_string(), "node".to_string()];
    header.extend((1..=cov.dim()).map(|k| format!("x{k}")));
    wr.write_record(&header)?;
    for i in 0..cov.n() {
        for r in 0..cov.n_segments() {
            let mut rec = vec![cov.boundaries()[r].to_string(), i.to_string()];
            rec.extend(cov.value(i, r).iter().map(|v| v.to_string()));
            wr.write_record(&rec)?;
        }
    }
    wr.flush()?;
    Ok(())
}

/// Read a covariate CSV; every node must list the same segment starts and
/// `horizon` closes the last segment.
pub fn read_covariates<R: Read>(r: R, horizon: f64) -> Result<CovariateField> {
    let mut rd = csv::Reader::from_reader(r);
    let header = rd.headers()?.clone();
    if header.len() < 3 || &header[0] != "segment_start" || &header[1] != "node" {
        return Err(Error::InvalidInput(
            "covariate header must be segment_start,node,x1,...,xp".into(),
        ));
    }
    let p = header.len() - 2;
    let mut per_node: Vec<Vec<(f64, Vec<f64>)>> = Vec::new();
    for (line, rec) in rd.records().enumerate() {
        let rec = rec?;
        let start: f64 = parse(&rec, 0, line)?;
        let node: usize = parse(&rec, 1, line)?;
        let x = (0..p).map(|k| parse(&rec, k + 2, line)).collect::<Result<Vec<f64>>>()?;
        if per_node.len() <= node {
            per_node.resize(node + 1, Vec::new());
        }
        per_node[node].push((start, x));
    }
    if per_node.is_empty() {
        return Err(Error::InvalidInput("covariate file has no rows".into()));
    }
    for rows in per_node.iter_mut() {
        rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    let starts: Vec<f64> = per_node[0].iter().map(|r| r.0).collect();
    for (i, rows) in per_node.iter().enumerate() {
        if rows.len() != starts.len() || rows.iter().zip(&starts).any(|(r, s)| r.0 != *s) {
            return Err(Error::InvalidInput(format!("node {i} does not share the segment grid of node 0")));
        }
    }
    let mut boundaries = starts;
    boundaries.push(horizon);
    let n = per_node.len();
    let values = per_node.into_iter().flat_map(|rows| rows.into_iter().flat_map(|r| r.1)).collect();
    CovariateField::new(boundaries, n, p, values)
}

fn check_header(h: &csv::StringRecord, want: &[&str]) -> Result<()> {
    if h.iter().ne(want.iter().copied()) {
        return Err(Error::InvalidInput(format!("expected header {}", want.join(","))));
    }
    Ok(())
}

fn parse<T: std::str::FromStr>(rec: &csv::StringRecord, col: usize, line: usize) -> Result<T> {
    let field = rec
        .get(col)
        .ok_or_else(|| Error::InvalidInput(format!("line {}: missing column {}", line + 2, col + 1)))?;
    field
        .trim()
        .parse()
        .map_err(|_| Error::InvalidInput(format!("line {}: cannot parse {field:?}", line + 2)))
}

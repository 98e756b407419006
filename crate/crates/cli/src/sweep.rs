//! Parameter sweeps: one axis, points run in parallel, results ordered by axis value.

use rayon::prelude::*;
use serde_json::Value;

use crate::config::{RunConfig, SweepConfig};
use crate::error::CliError;
use crate::output::{Cell, Outcome, PointFailure, Table};
use crate::pipeline::run_command;

pub struct SweepResult {
    pub axis: String,
    pub points: Vec<(f64, Result<Outcome, CliError>)>,
}

fn json_number(v: f64) -> Value {
    if v.fract() == 0.0 && v.abs() < 9.0e15 {
        Value::from(v as i64)
    } else {
        Value::from(v)
    }
}

/// Replaces the scalar at a dotted path; the field must already exist as a number or null.
pub fn set_axis(config: &mut Value, axis: &str, v: f64) -> Result<(), CliError> {
    let bad = |why: &str| CliError::Config(format!("sweep.axis: `{axis}` {why}"));
    let mut node = config;
    let parts: Vec<&str> = axis.split('.').collect();
    for (i, key) in parts.iter().enumerate() {
        let obj = node.as_object_mut().ok_or_else(|| bad("does not address a config field"))?;
        let child = obj.get_mut(*key).ok_or_else(|| bad("does not address a config field"))?;
        if i + 1 == parts.len() {
            if !(child.is_number() || child.is_null()) {
                return Err(bad("is not a scalar numeric field"));
            }
            *child = json_number(v);
            return Ok(());
        }
        node = child;
    }
    Err(bad("is empty"))
}

/// Point configurations in ascending axis order; an invalid axis aborts the sweep.
pub fn point_configs(cfg: &RunConfig, sw: &SweepConfig) -> Result<Vec<(f64, Result<RunConfig, CliError>)>, CliError> {
    let mut base = serde_json::to_value(cfg).expect("config serialises");
    base["command"] = serde_json::to_value(sw.command).expect("command serialises");
    base["sweep"] = Value::Null;
    // the axis is checked once on the base document
    set_axis(&mut base.clone(), &sw.axis, 0.0)?;
    let mut values = sw.values.clone();
    values.sort_by(f64::total_cmp);
    Ok(values
        .into_iter()
        .map(|v| {
            let mut doc = base.clone();
            let point = set_axis(&mut doc, &sw.axis, v).and_then(|_| RunConfig::from_value(doc));
            (v, point)
        })
        .collect())
}

pub fn run_sweep(cfg: &RunConfig) -> Result<SweepResult, CliError> {
    let sw = cfg.sweep.as_ref().ok_or_else(|| CliError::Config("sweep: missing".into()))?;
    let configs = point_configs(cfg, sw)?;
    let points = configs.into_par_iter().map(|(v, c)| (v, c.and_then(|c| run_command(&c)))).collect();
    Ok(SweepResult { axis: sw.axis.clone(), points })
}

impl SweepResult {
    pub fn failures(&self) -> Vec<PointFailure> {
        self.points
            .iter()
            .filter_map(|(v, r)| r.as_ref().err().map(|e| PointFailure { axis_value: *v, exit_code: e.exit_code(), error: e.to_string() }))
            .collect()
    }

    /// sweep.csv with one row per point plus every per-point table concatenated with the axis prepended.
    pub fn tables(&self) -> Vec<(String, Table)> {
        if self.points.is_empty() {
            return Vec::new();
        }
        let mut keys: Vec<String> = Vec::new();
        for (_, r) in &self.points {
            if let Ok(o) = r {
                for (k, v) in &o.summary.0 {
                    if !v.is_array() && !keys.contains(k) {
                        keys.push(k.clone());
                    }
                }
            }
        }
        let mut header = vec![self.axis.clone(), "status".to_string()];
        header.extend(keys.iter().cloned());
        let mut summary = Table { header, rows: Vec::new() };
        let mut merged: Vec<(String, Table)> = Vec::new();
        for (v, r) in &self.points {
            let mut row = vec![Cell::Num(*v)];
            match r {
                Ok(o) => {
                    row.push(Cell::Text("ok".into()));
                    for k in &keys {
                        row.push(match o.summary.get(k) {
                            Some(Value::Number(n)) => Cell::Num(n.as_f64().unwrap_or(f64::NAN)),
                            Some(Value::String(s)) => Cell::Text(s.clone()),
                            Some(other) => Cell::Text(other.to_string()),
                            None => Cell::Text(String::new()),
                        });
                    }
                    for (name, t) in &o.tables {
                        let pos = match merged.iter().position(|(n, _)| n == name) {
                            Some(p) => p,
                            None => {
                                let mut h = vec![self.axis.clone()];
                                h.extend(t.header.iter().cloned());
                                merged.push((name.clone(), Table { header: h, rows: Vec::new() }));
                                merged.len() - 1
                            }
                        };
                        for tr in &t.rows {
                            let mut full = vec![Cell::Num(*v)];
                            full.extend(tr.iter().cloned());
                            merged[pos].1.rows.push(full);
                        }
                    }
                }
                Err(e) => {
                    row.push(Cell::Text(format!("error: {e}")));
                    row.extend(keys.iter().map(|_| Cell::Text(String::new())));
                }
            }
            summary.rows.push(row);
        }
        let mut out = vec![("sweep.csv".to_string(), summary)];
        out.extend(merged);
        out
    }

    pub fn warnings(&self) -> Vec<String> {
        self.points
            .iter()
            .filter_map(|(v, r)| r.as_ref().ok().map(|o| (v, o)))
            .flat_map(|(v, o)| o.warnings.iter().map(move |w| format!("{}={}: {w}", self.axis, crate::output::fmt_num(*v))))
            .collect()
    }
}

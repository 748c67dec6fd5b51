//! Mean-ApR tables and CSV exports built from solve traces.

use std::ops::Range;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::oracle::mean_apr;
use crate::solver::{BudgetCut, SolveTrace};

/// Snapshots that enter ApR averages: all but the first, or the only one
/// when there is a single snapshot.
pub fn evaluated_snapshots(len: usize) -> Range<usize> {
    if len > 1 {
        1..len
    } else {
        0..len
    }
}

/// Median of the values; the mean of the middle pair for even counts.
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of an empty slice");
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Mean ApR of one trace at every budget.
pub fn trace_apr(trace: &SolveTrace, optima: &[f64]) -> Result<Vec<f64>> {
    if optima.len() != trace.snapshots.len() {
        return Err(Error::DimensionMismatch { expected: trace.snapshots.len(), got: optima.len() });
    }
    let range = evaluated_snapshots(optima.len());
    (0..trace.budgets.len()).map(|k| mean_apr(&trace.objectives_at(k)[range.clone()], &optima[range.clone()])).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AprRow {
    pub method: String,
    pub repetitions: usize,
    /// Per budget, mean over repetitions.
    pub mean: Vec<f64>,
    /// Per budget, median over repetitions.
    pub median: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AprTable {
    pub budgets: Vec<usize>,
    pub rows: Vec<AprRow>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Statistic {
    Mean,
    Median,
}

/// Groups traces by method (in order of first appearance) and aggregates
/// their mean ApR over repetitions.
pub fn apr_table(traces: &[SolveTrace], optima: &[f64]) -> Result<AprTable> {
    let Some(first) = traces.first() else {
        return Err(Error::invalid("no traces to report"));
    };
    let budgets = first.budgets.clone();
    let mut groups: Vec<(String, Vec<Vec<f64>>)> = Vec::new();
    for t in traces {
        if t.budgets != budgets {
            return Err(Error::invalid("all traces in a table must share the same budgets"));
        }
        let apr = trace_apr(t, optima)?;
        match groups.iter_mut().find(|(m, _)| *m == t.method) {
            Some((_, v)) => v.push(apr),
            None => groups.push((t.method.clone(), vec![apr])),
        }
    }
    let rows = groups
        .into_iter()
        .map(|(method, reps)| {
            let column = |k: usize| reps.iter().map(|r| r[k]).collect::<Vec<_>>();
            AprRow {
                method,
                repetitions: reps.len(),
                mean: (0..budgets.len()).map(|k| mean(&column(k))).collect(),
                median: (0..budgets.len()).map(|k| median(&column(k))).collect(),
            }
        })
        .collect();
    Ok(AprTable { budgets, rows })
}

impl AprTable {
    pub fn row(&self, method: &str) -> Option<&AprRow> {
        self.rows.iter().find(|r| r.method == method)
    }

    /// One row per method, one column per budget.
    pub fn to_csv(&self, stat: Statistic) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["method".to_string()];
        header.extend(self.budgets.iter().map(|b| b.to_string()));
        write_record(&mut w, &header)?;
        for r in &self.rows {
            let vals = match stat {
                Statistic::Mean => &r.mean,
                Statistic::Median => &r.median,
            };
            let mut rec = vec![r.method.clone()];
            rec.extend(vals.iter().map(|v| format!("{v:.5}")));
            write_record(&mut w, &rec)?;
        }
        finish(w)
    }

    pub fn to_markdown(&self, stat: Statistic) -> String {
        let mut s = String::from("| method |");
        for b in &self.budgets {
            s.push_str(&format!(" {b} |"));
        }
        s.push_str("\n|---|");
        s.push_str(&"---|".repeat(self.budgets.len()));
        s.push('\n');
        for r in &self.rows {
            let vals = if stat == Statistic::Mean { &r.mean } else { &r.median };
            s.push_str(&format!("| {} |", r.method));
            for v in vals {
                s.push_str(&format!(" {v:.5} |"));
            }
            s.push('\n');
        }
        s
    }
}

fn write_record(w: &mut csv::Writer<Vec<u8>>, rec: &[String]) -> Result<()> {
    w.write_record(rec).map_err(|e| Error::invalid(e.to_string()))
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.6}")).unwrap_or_default()
}

/// Per snapshot and budget, medians over repetitions: columns
/// `snapshot,budget_epochs,seconds,objective,apr`. The `apr` column is empty
/// without optima.
pub fn solve_csv(traces: &[SolveTrace], optima: Option<&[f64]>) -> Result<String> {
    let Some(first) = traces.first() else {
        return Err(Error::invalid("no traces to report"));
    };
    let mut w = csv::Writer::from_writer(Vec::new());
    write_record(&mut w, &["snapshot", "budget_epochs", "seconds", "objective", "apr"].map(String::from))?;
    for t in 0..first.snapshots.len() {
        for (k, &b) in first.budgets.iter().enumerate() {
            let cuts: Vec<&BudgetCut> = traces.iter().map(|tr| &tr.snapshots[t].cuts[k]).collect();
            let secs = median(&cuts.iter().map(|c| c.seconds).collect::<Vec<_>>());
            let objs: Vec<f64> = cuts.iter().map(|c| c.solution.natural_objective).collect();
            let apr = match optima {
                Some(o) if o[t] != 0.0 => Some(median(&objs.iter().map(|v| v / o[t]).collect::<Vec<_>>())),
                _ => None,
            };
            write_record(
                &mut w,
                &[t.to_string(), b.to_string(), format!("{secs:.6}"), format!("{:.6}", median(&objs)), fmt_opt(apr)],
            )?;
        }
    }
    finish(w)
}

/// Long-format per-snapshot results for bar charts: columns
/// `method,snapshot,budget_epochs,mean_objective,mean_apr`, averaged over
/// repetitions. No timing, so the output depends only on the inputs.
pub fn per_snapshot_csv(traces: &[SolveTrace], optima: &[f64]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    write_record(&mut w, &["method", "snapshot", "budget_epochs", "mean_objective", "mean_apr"].map(String::from))?;
    let mut methods: Vec<&str> = Vec::new();
    for t in traces {
        if !methods.contains(&t.method.as_str()) {
            methods.push(&t.method);
        }
    }
    for m in methods {
        let group: Vec<&SolveTrace> = traces.iter().filter(|t| t.method == m).collect();
        let first = group[0];
        if optima.len() != first.snapshots.len() {
            return Err(Error::DimensionMismatch { expected: first.snapshots.len(), got: optima.len() });
        }
        for t in 0..first.snapshots.len() {
            for (k, &b) in first.budgets.iter().enumerate() {
                let objs: Vec<f64> =
                    group.iter().map(|tr| tr.snapshots[t].cuts[k].solution.natural_objective).collect();
                let o = mean(&objs);
                let apr = if optima[t] != 0.0 { format!("{:.6}", o / optima[t]) } else { String::new() };
                write_record(&mut w, &[m.to_string(), t.to_string(), b.to_string(), format!("{o:.6}"), apr])?;
            }
        }
    }
    finish(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decode::{DiscreteSolution, SolutionRecord};
    use crate::graph::ProblemKind;
    use crate::solver::SnapshotTrace;

    fn fake(method: &str, objs: &[[f64; 2]]) -> SolveTrace {
        SolveTrace {
            method: method.into(),
            problem: ProblemKind::MaxCut,
            repetition: 0,
            budgets: vec![10, 20],
            snapshots: objs
                .iter()
                .enumerate()
                .map(|(i, o)| SnapshotTrace {
                    index: i,
                    cuts: o
                        .iter()
                        .zip([10, 20])
                        .map(|(&v, e)| BudgetCut {
                            epochs: e,
                            loss: -v,
                            relaxed: vec![],
                            solution: SolutionRecord { solution: DiscreteSolution::Cut(vec![]), natural_objective: v },
                            seconds: 0.1,
                        })
                        .collect(),
                    losses: vec![],
                    reference: None,
                })
                .collect(),
        }
    }

    #[test]
    fn medians() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn first_snapshot_is_skipped() {
        let t = fake("static", &[[1.0, 1.0], [8.0, 10.0], [9.0, 10.0]]);
        let apr = trace_apr(&t, &[100.0, 10.0, 10.0]).unwrap();
        assert!((apr[0] - 0.85).abs() < 1e-15);
        assert_eq!(apr[1], 1.0);
    }

    #[test]
    fn table_layout() {
        let traces = vec![
            fake("static", &[[0.0, 0.0], [8.0, 10.0]]),
            fake("warm", &[[0.0, 0.0], [9.0, 9.0]]),
            fake("static", &[[0.0, 0.0], [6.0, 10.0]]),
        ];
        let table = apr_table(&traces, &[1.0, 10.0]).unwrap();
        assert_eq!(table.rows.len(), 2);
        assert_eq!(table.row("static").unwrap().repetitions, 2);
        let csv = table.to_csv(Statistic::Mean).unwrap();
        assert_eq!(csv, "method,10,20\nstatic,0.70000,1.00000\nwarm,0.90000,0.90000\n");
        assert!(table.to_markdown(Statistic::Median).contains("| warm | 0.90000 | 0.90000 |"));
    }

    #[test]
    fn solve_csv_columns() {
        let traces = vec![fake("sp-full", &[[1.0, 2.0], [3.0, 4.0]])];
        let csv = solve_csv(&traces, Some(&[2.0, 4.0])).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "snapshot,budget_epochs,seconds,objective,apr");
        assert_eq!(lines.next().unwrap(), "0,10,0.100000,1.000000,0.500000");
        let no_apr = solve_csv(&traces, None).unwrap();
        assert!(no_apr.lines().nth(1).unwrap().ends_with(','));
        let snap = per_snapshot_csv(&traces, &[2.0, 4.0]).unwrap();
        assert_eq!(snap.lines().nth(4).unwrap(), "sp-full,1,20,4.000000,1.000000");
    }
}

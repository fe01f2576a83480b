//! CSV and summary emission. Layouts are fixed so reruns of the same config
//! and seed are byte-identical.

use std::fmt::Write as _;

use oco_core::{ProblemSequence, RunOutcome};

fn push_coords(line: &mut String, coords: &[f64], sep: char) {
    for (i, c) in coords.iter().enumerate() {
        if i > 0 {
            line.push(sep);
        }
        let _ = write!(line, "{c}");
    }
}

/// Per-round CSV: action, ground truth, constraint value, loss gap,
/// contraction ratio and gradient budget for every round.
pub fn round_csv(seq: &ProblemSequence, outcome: &RunOutcome) -> String {
    let dim = seq.ambient.center().dim();
    let mut header = String::from("t,case");
    for i in 0..dim {
        let _ = write!(header, ",a_{i}");
    }
    for i in 0..dim {
        let _ = write!(header, ",xstar_{i}");
    }
    header.push_str(",g_at,f_gap,ratio,grad_points\n");

    let mut out = header;
    for (idx, rec) in outcome.log.records.iter().enumerate() {
        let sol = &outcome.solutions[idx];
        let f_gap = (sol.f_at_star
            - seq.rounds[idx]
                .f
                .value(&rec.action)
                .expect("round data is consistent"))
        .abs();
        let mut line = format!("{},{}", rec.t, rec.case.name());
        line.push(',');
        push_coords(&mut line, rec.action.coords(), ',');
        line.push(',');
        push_coords(&mut line, sol.x_star.coords(), ',');
        let _ = write!(line, ",{},{}", rec.g_at_action, f_gap);
        match outcome.metrics.ratios[idx] {
            Some(r) => {
                let _ = write!(line, ",{r}");
            }
            None => line.push(','),
        }
        let _ = writeln!(line, ",{}", rec.gradient_points_used);
        out.push_str(&line);
    }
    out
}

/// Oracle transcript CSV: every answered query with a digest of the answer.
pub fn transcript_csv(outcome: &RunOutcome) -> String {
    let mut out = String::from("t,kind,point,answer_digest\n");
    for rec in &outcome.log.records {
        for q in &rec.queries {
            let mut point = String::new();
            push_coords(&mut point, q.point.coords(), ';');
            let _ = writeln!(out, "{},{},{},{}", rec.t, q.kind, point, q.answer_digest);
        }
    }
    out
}

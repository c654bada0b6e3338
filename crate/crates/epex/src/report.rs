//! Plain-text tables for stdout.

use std::fmt::Write;

use epex_core::checks::BlockCheck;
use epex_core::eval::{EvalReport, Setting};

use crate::commands::RedundancyOutput;

pub fn eval_table(report: &EvalReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<8} {:<5} {:>6} {:>6} {:>6} {:>7} {:>7} {:>7}", "setting", "task", "tp", "fp", "fn", "P", "R", "F1");
    for setting in Setting::ALL {
        let r = report.get(setting);
        let name = format!("{setting:?}").to_lowercase();
        for (task, t) in r.tasks() {
            let _ = writeln!(
                s,
                "{name:<8} {task:<5} {:>6} {:>6} {:>6} {:>7.4} {:>7.4} {:>7.4}",
                t.tp, t.fp, t.fn_, t.precision, t.recall, t.f1
            );
        }
        let _ = writeln!(s, "{name:<8} {:<5} {:>6} {:>6} {:>6} {:>7} {:>7} {:>7.4}", "all", "", "", "", "", "", r.overall_f1);
    }
    s
}

pub fn gradcheck_table(blocks: &[BlockCheck]) -> String {
    let mut s = String::new();
    for b in blocks {
        let _ = writeln!(
            s,
            "{:<20} {:>4} params {:>5} coords  max rel err {:.3e}  {}",
            b.block,
            b.params_checked,
            b.coords_checked,
            b.max_rel_error,
            if b.passed { "ok" } else { "FAIL" }
        );
    }
    s
}

pub fn redundancy_table(out: &RedundancyOutput) -> String {
    let mut s = String::new();
    let c = &out.counts;
    let _ = writeln!(s, "samples        {}", c.samples.len());
    let _ = writeln!(s, "table filling  {}", c.table_filling);
    let _ = writeln!(s, "pairwise       {}", c.pairwise);
    let _ = writeln!(s, "slot based     {}  (n = {})", c.slot_based, out.slots);
    let _ = writeln!(s, "triples  sentences  fraction");
    for (k, n) in &out.histogram.counts {
        let _ = writeln!(s, "{k:>7}  {n:>9}  {:.4}", out.histogram.fractions[k]);
    }
    s
}

use semiphi::problem::{ReportFile, Witness};
use serde_json::Value;

fn scalar(v: &Value) -> Option<String> {
    match v {
        Value::Number(n) => n.as_f64().map(|x| {
            if x == x.trunc() && x.abs() < 1e9 {
                format!("{x}")
            } else {
                format!("{x:.6e}")
            }
        }),
        Value::Bool(b) => Some(b.to_string()),
        Value::String(s) => Some(s.clone()),
        Value::Null => Some("none".into()),
        _ => None,
    }
}

fn witness_line(w: &Witness) -> String {
    match w {
        Witness::Choi { value, vector, .. } => format!(
            "Choi vector of length {} with v*Cv = {value:.6e}",
            vector.first().map_or(0, |v| v.len())
        ),
        Witness::SemiPhi { witness, .. } => format!(
            "semi-phi family: |sum Φ(x_k) h_k|^2 = {:.6e} > {:.6e}",
            witness.lhs, witness.rhs
        ),
        Witness::Positivity { witness } => format!(
            "level {} positive input (λ_min {:.3e}) with image λ_min {:.6e}",
            witness.level, witness.input_min_eigenvalue, witness.image_min_eigenvalue
        ),
    }
}

/// Plain-text report; structured values are only listed by name.
pub fn summary(report: &ReportFile) -> String {
    let mut out = String::new();
    let status = if report.all_hold() { "OK" } else { "REFUTED" };
    out.push_str(&format!("{}: {status}\n", report.command));
    for (name, v) in &report.verdicts {
        let mark = if v.holds { "yes" } else { "no" };
        out.push_str(&format!("  {name}: {mark} (margin {:.6e})\n", v.margin));
    }
    let mut structured = Vec::new();
    for (name, v) in &report.values {
        match scalar(v) {
            Some(s) => out.push_str(&format!("  {name} = {s}\n")),
            None => structured.push(name.as_str()),
        }
    }
    if !structured.is_empty() {
        out.push_str(&format!("  structured values (see --json): {}\n", structured.join(", ")));
    }
    for w in &report.witnesses {
        out.push_str(&format!("  witness: {}\n", witness_line(w)));
    }
    for m in &report.messages {
        out.push_str(&format!("  note: {m}\n"));
    }
    out
}

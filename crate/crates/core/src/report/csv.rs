use crate::measures::{sched_work_estimate, CurvePoint, CurveSet};

use super::ReportError;

pub const CSV_HEADER: &str =
    "p,linear,maximal,idle_specific,inflation_specific,actual,elision_bound,work_inflation,parallel_work";

/// Significant digits written per value. Ten keeps the parse round trip within
/// 1e-9 relative error.
pub const CSV_DIGITS: usize = 10;

/// Formats like C's `%.{digits}g`: fixed or exponent notation by magnitude,
/// trailing zeros removed.
pub fn format_sig(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if x.is_nan() {
        return "nan".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= digits as i32 {
        format!("{}e{}", strip_zeros(mantissa), exp)
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        strip_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// One header line and one row per P, in the fixed column order.
pub fn emit_csv(curves: &CurveSet) -> String {
    let mut out = String::with_capacity(64 * (curves.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    let f = |x: f64| format_sig(x, CSV_DIGITS);
    for c in curves.points() {
        let elision = c.elision_bound.map(f).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            c.p,
            f(c.linear),
            f(c.maximal),
            f(c.idle_specific),
            f(c.inflation_specific),
            f(c.actual),
            elision,
            f(c.work_inflation),
            f(c.parallel_work),
        ));
    }
    out
}

/// Inverse of [`emit_csv`]. Quantities not stored in columns are rebuilt:
/// `T_1 = W_P - F_P`, `T_s = maximal * T_1 / P`, `T_elision = P * T_s / elision_bound`.
pub fn parse_csv(text: &str) -> Result<CurveSet, ReportError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, h)) if h.trim() == CSV_HEADER => {}
        Some((i, _)) => return Err(ReportError::Csv { line: i + 1, message: "unexpected header".into() }),
        None => return Err(ReportError::Csv { line: 1, message: "empty input".into() }),
    }
    let mut points = Vec::new();
    for (i, line) in lines {
        let line_no = i + 1;
        let err = |message: String| ReportError::Csv { line: line_no, message };
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() != 9 {
            return Err(err(format!("expected 9 columns, found {}", cols.len())));
        }
        let num = |idx: usize| -> Result<f64, ReportError> {
            cols[idx].parse::<f64>().map_err(|_| err(format!("column {} is not a number: {:?}", idx + 1, cols[idx])))
        };
        let p = cols[0].parse::<usize>().map_err(|_| err(format!("bad worker count {:?}", cols[0])))?;
        let elision_bound = if cols[6].is_empty() { None } else { Some(num(6)?) };
        let (maximal, work_inflation, parallel_work) = (num(2)?, num(7)?, num(8)?);
        let inflation_specific = num(4)?;
        let sched = elision_bound.map(|eb| {
            let t_1 = parallel_work - work_inflation;
            let t_s = maximal * t_1 / p as f64;
            sched_work_estimate(t_1, p as f64 * t_s / eb)
        });
        points.push(CurvePoint {
            p,
            linear: num(1)?,
            maximal,
            idle_specific: num(3)?,
            inflation_specific,
            actual: num(5)?,
            elision_bound,
            work_inflation,
            parallel_work,
            sched_work_estimate: sched,
            unbounded_inflation: inflation_specific.is_infinite(),
        });
    }
    if points.is_empty() {
        return Err(ReportError::Empty);
    }
    CurveSet::new(points).map_err(|e| ReportError::Csv { line: 0, message: e.to_string() })
}

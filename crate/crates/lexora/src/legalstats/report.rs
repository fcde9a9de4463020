//! Deterministic text renderings of the analytics: CSV tables and an SVG
//! scatter plot. Byte-stable output is a requirement here — reports are
//! diffed across runs — so every float goes through a fixed format.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::legalstats::{
    loss_month_points, ols_months_vs_log_loss, BacBin, BucketRow, CaseRecord, RegimeRow,
};

/// `year_range,prior_record,mean_months,n` — one row per regime cell.
pub fn regime_csv(rows: &[RegimeRow]) -> String {
    let mut out = String::from("year_range,prior_record,mean_months,n\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{}-{},{},{:.2},{}",
            r.year_min, r.year_max, r.prior_record, r.mean_months, r.n
        );
    }
    out
}

/// `lo_log,hi_log,n,fine_share,imprisonment_share,suspension_share` —
/// sentence-type composition per loss bucket.
pub fn shares_csv(rows: &[BucketRow]) -> String {
    let mut out = String::from("lo_log,hi_log,n,fine_share,imprisonment_share,suspension_share\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{:.2},{:.2},{},{:.4},{:.4},{:.4}",
            r.lo_log, r.hi_log, r.n, r.fine_share, r.imprisonment_share, r.suspension_share
        );
    }
    out
}

/// `bac_lo,bac_hi,n` — blood-alcohol histogram bins.
pub fn bac_csv(bins: &[BacBin]) -> String {
    let mut out = String::from("bac_lo,bac_hi,n\n");
    for b in bins {
        let _ = writeln!(out, "{:.3},{:.3},{}", b.lo, b.hi, b.n);
    }
    out
}

const SVG_W: f64 = 640.0;
const SVG_H: f64 = 480.0;
const MARGIN_L: f64 = 56.0;
const MARGIN_R: f64 = 16.0;
const MARGIN_T: f64 = 16.0;
const MARGIN_B: f64 = 44.0;

struct Frame {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl Frame {
    fn x(&self, v: f64) -> f64 {
        MARGIN_L + (v - self.x_min) / (self.x_max - self.x_min) * (SVG_W - MARGIN_L - MARGIN_R)
    }

    fn y(&self, v: f64) -> f64 {
        // SVG y grows downward.
        SVG_H - MARGIN_B
            - (v - self.y_min) / (self.y_max - self.y_min) * (SVG_H - MARGIN_T - MARGIN_B)
    }
}

/// Scatter of imprisonment months against log10(loss) with the fitted
/// line drawn through it. The fit is the only `<line>` element in the
/// document; axes and ticks are paths, so tooling can locate the
/// regression by tag name. Output is byte-deterministic for fixed input.
pub fn regression_svg(records: &[CaseRecord]) -> Result<String> {
    let points = loss_month_points(records);
    let fit = ols_months_vs_log_loss(records)
        .ok_or_else(|| Error::Invalid("too few distinct points for a regression plot".into()))?;

    let x_lo = points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min).floor();
    let x_hi = points.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max).ceil();
    let x_hi = if x_hi > x_lo { x_hi } else { x_lo + 1.0 };
    let y_top = points.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let frame = Frame { x_min: x_lo, x_max: x_hi, y_min: 0.0, y_max: (y_top / 5.0).ceil() * 5.0 };

    let mut s = String::new();
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SVG_W:.0}\" height=\"{SVG_H:.0}\" viewBox=\"0 0 {SVG_W:.0} {SVG_H:.0}\">"
    );
    let _ = writeln!(s, "  <rect width=\"{SVG_W:.0}\" height=\"{SVG_H:.0}\" fill=\"white\"/>");

    // Axes with tick marks, as one path.
    let (ox, oy) = (frame.x(frame.x_min), frame.y(frame.y_min));
    let mut axis = format!(
        "M {:.2} {:.2} L {ox:.2} {oy:.2} L {:.2} {oy:.2}",
        ox,
        frame.y(frame.y_max),
        frame.x(frame.x_max)
    );
    let mut tick_labels = String::new();
    let mut xt = frame.x_min;
    while xt <= frame.x_max + 1e-9 {
        let px = frame.x(xt);
        let _ = write!(axis, " M {px:.2} {oy:.2} L {px:.2} {:.2}", oy + 5.0);
        let _ = writeln!(
            tick_labels,
            "  <text x=\"{px:.2}\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"middle\">{xt:.0}</text>",
            oy + 18.0
        );
        xt += 1.0;
    }
    for i in 0..=4 {
        let yv = frame.y_min + (frame.y_max - frame.y_min) * f64::from(i) / 4.0;
        let py = frame.y(yv);
        let _ = write!(axis, " M {ox:.2} {py:.2} L {:.2} {py:.2}", ox - 5.0);
        let _ = writeln!(
            tick_labels,
            "  <text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"end\">{yv:.1}</text>",
            ox - 8.0,
            py + 4.0
        );
    }
    let _ = writeln!(s, "  <path d=\"{axis}\" stroke=\"black\" fill=\"none\" stroke-width=\"1\"/>");
    s.push_str(&tick_labels);
    let _ = writeln!(
        s,
        "  <text x=\"{:.2}\" y=\"{:.2}\" font-size=\"13\" text-anchor=\"middle\">log10 of loss (won)</text>",
        (MARGIN_L + SVG_W - MARGIN_R) / 2.0,
        SVG_H - 8.0
    );
    let _ = writeln!(
        s,
        "  <text x=\"14\" y=\"{:.2}\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 14 {:.2})\">imprisonment (months)</text>",
        (MARGIN_T + SVG_H - MARGIN_B) / 2.0,
        (MARGIN_T + SVG_H - MARGIN_B) / 2.0
    );

    for (x, y) in &points {
        let _ = writeln!(
            s,
            "  <circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"steelblue\" fill-opacity=\"0.6\"/>",
            frame.x(*x),
            frame.y(*y)
        );
    }

    let fit_y = |x: f64| (fit.slope * x + fit.intercept).clamp(frame.y_min, frame.y_max);
    let _ = writeln!(
        s,
        "  <line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"crimson\" stroke-width=\"2\"/>",
        frame.x(frame.x_min),
        frame.y(fit_y(frame.x_min)),
        frame.x(frame.x_max),
        frame.y(fit_y(frame.x_max))
    );
    let _ = writeln!(
        s,
        "  <text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" fill=\"crimson\">months = {:.2} x log10(loss) {} {:.2}  (r2 = {:.3}, n = {})</text>",
        MARGIN_L + 10.0,
        MARGIN_T + 14.0,
        fit.slope,
        if fit.intercept < 0.0 { "-" } else { "+" },
        fit.intercept.abs(),
        fit.r2,
        fit.n
    );
    s.push_str("</svg>\n");
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::taskschema::Task;

    fn rec(id: &str, loss: u64, months: f64) -> CaseRecord {
        CaseRecord {
            id: id.into(),
            task: Task::Fraud,
            year: 2020,
            prior_record: false,
            bac: None,
            fine: None,
            imprisonment_months: Some(months),
            suspension_months: None,
            loss: Some(loss),
        }
    }

    #[test]
    fn regime_csv_layout_is_pinned() {
        let rows = vec![
            RegimeRow { year_min: 2017, year_max: 2018, prior_record: false, mean_months: 5.312, n: 40 },
            RegimeRow { year_min: 2019, year_max: 2022, prior_record: true, mean_months: 11.9, n: 55 },
        ];
        assert_eq!(
            regime_csv(&rows),
            "year_range,prior_record,mean_months,n\n\
             2017-2018,false,5.31,40\n\
             2019-2022,true,11.90,55\n"
        );
    }

    #[test]
    fn shares_and_bac_csv_have_stable_headers() {
        assert!(shares_csv(&[]).starts_with("lo_log,hi_log,n,fine_share,"));
        let bins = vec![BacBin { lo: 0.05, hi: 0.08, n: 3 }];
        assert_eq!(bac_csv(&bins), "bac_lo,bac_hi,n\n0.050,0.080,3\n");
    }

    #[test]
    fn svg_has_one_fit_line_and_is_deterministic() {
        let recs: Vec<CaseRecord> = (0..30)
            .map(|i| rec(&format!("r{i}"), 100_000 * (i + 1), 5.0 + 0.7 * i as f64))
            .collect();
        let svg = regression_svg(&recs).unwrap();
        assert_eq!(svg.matches("<line").count(), 1, "fit must be the only line element");
        assert_eq!(svg.matches("<circle").count(), 30);
        assert!(svg.starts_with("<svg "));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg, regression_svg(&recs).unwrap(), "rendering must be reproducible");
    }

    #[test]
    fn svg_requires_a_fit() {
        assert!(regression_svg(&[]).is_err());
        assert!(regression_svg(&[rec("only", 1_000_000, 8.0)]).is_err());
    }
}

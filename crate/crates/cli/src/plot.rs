//! Stacked-panel SVG rendering of one episode trace.

use std::fmt::Write as _;

use thermoctl_core::trace::TraceRow;

const WIDTH: f64 = 960.0;
const PANEL_H: f64 = 170.0;
const GAP: f64 = 36.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;

struct Panel {
    title: &'static str,
    values: Vec<f64>,
    color: &'static str,
    /// Shaded horizontal band, e.g. the comfort range.
    band: Option<(f64, f64)>,
}

/// Value range including `band`, padded, never degenerate.
fn y_range(values: &[f64], band: Option<(f64, f64)>) -> (f64, f64) {
    let mut lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if let Some((b0, b1)) = band {
        lo = lo.min(b0);
        hi = hi.max(b1);
    }
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-9 {
        return (lo - 1.0, hi + 1.0);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

/// Render `rows` as an SVG document. The indoor panel shades
/// `[comfort_low, comfort_high]`; a price panel is added when the trace has prices.
pub fn render_svg(rows: &[TraceRow], title: &str, comfort_low: f64, comfort_high: f64) -> String {
    let mut panels = vec![
        Panel {
            title: "Outdoor temperature (°C)",
            values: rows.iter().map(|r| r.t_out).collect(),
            color: "#1f77b4",
            band: None,
        },
        Panel {
            title: "Indoor temperature (°C)",
            values: rows.iter().map(|r| r.t_in).collect(),
            color: "#d62728",
            band: Some((comfort_low, comfort_high)),
        },
        Panel {
            title: "Heat-pump thermal power (kW)",
            values: rows.iter().map(|r| r.q_hp / 1000.0).collect(),
            color: "#2ca02c",
            band: None,
        },
    ];
    if rows.iter().any(|r| r.price.is_some()) {
        panels.push(Panel {
            title: "Price (cent/kWh)",
            values: rows.iter().map(|r| r.price.unwrap_or(0.0) * 1000.0).collect(),
            color: "#9467bd",
            band: None,
        });
    }

    let height = TOP + panels.len() as f64 * (PANEL_H + GAP) + 10.0;
    let plot_w = WIDTH - LEFT - RIGHT;
    let hours = rows.len() as f64 * 0.25;
    let x = |i: usize| LEFT + plot_w * i as f64 / (rows.len().max(2) - 1) as f64;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{LEFT}" y="22" font-size="14">{}</text>"#, escape(title));
    for (k, p) in panels.iter().enumerate() {
        let top = TOP + k as f64 * (PANEL_H + GAP);
        let (lo, hi) = y_range(&p.values, p.band);
        let y = |v: f64| top + PANEL_H * (1.0 - (v - lo) / (hi - lo));
        let _ = writeln!(s, r#"<g class="panel" data-title="{}">"#, escape(p.title));
        let _ = writeln!(s, r#"<text x="{LEFT}" y="{:.1}">{}</text>"#, top - 6.0, escape(p.title));
        if let Some((b0, b1)) = p.band {
            let _ = writeln!(
                s,
                r##"<rect class="band" x="{LEFT}" y="{:.2}" width="{plot_w}" height="{:.2}" fill="#ffe8a0" data-low="{b0}" data-high="{b1}"/>"##,
                y(b1),
                y(b0) - y(b1)
            );
        }
        let _ = writeln!(
            s,
            r##"<rect x="{LEFT}" y="{top}" width="{plot_w}" height="{PANEL_H}" fill="none" stroke="#888"/>"##
        );
        for t in 0..=4 {
            let v = lo + (hi - lo) * t as f64 / 4.0;
            let _ = writeln!(
                s,
                r##"<text x="{:.1}" y="{:.1}" text-anchor="end" fill="#444">{v:.1}</text>"##,
                LEFT - 6.0,
                y(v) + 4.0
            );
        }
        let mut pts = String::with_capacity(p.values.len() * 14);
        for (i, v) in p.values.iter().enumerate() {
            let _ = write!(pts, "{:.2},{:.2} ", x(i), y(*v));
        }
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{}" stroke-width="1" points="{}"/>"#,
            p.color,
            pts.trim_end()
        );
        let _ = writeln!(s, "</g>");
    }
    let bottom = TOP + panels.len() as f64 * (PANEL_H + GAP) - GAP + 16.0;
    let _ = writeln!(s, r##"<text x="{LEFT}" y="{bottom:.1}" fill="#444">0 h</text>"##);
    let _ = writeln!(
        s,
        r##"<text x="{:.1}" y="{bottom:.1}" text-anchor="end" fill="#444">{hours} h</text>"##,
        WIDTH - RIGHT
    );
    s.push_str("</svg>\n");
    s
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rows(n: usize, q: f64, price: Option<f64>) -> Vec<TraceRow> {
        (0..n)
            .map(|i| TraceRow {
                step: i,
                t_out: (i as f64 * 0.1).sin() * 5.0,
                t_in: 21.0 + (i as f64 * 0.05).cos(),
                t_ret: 28.0,
                q_hp: q,
                electricity_wh: q / 16.0,
                deviation_c: 0.0,
                price,
                reward: 0.0,
            })
            .collect()
    }

    fn panel_count(svg: &str) -> usize {
        svg.matches(r#"class="panel""#).count()
    }

    #[test]
    fn panel_count_follows_schema() {
        assert_eq!(panel_count(&render_svg(&rows(96, 3000.0, None), "base", 21.0, 25.0)), 3);
        assert_eq!(panel_count(&render_svg(&rows(96, 3000.0, Some(4e-3)), "dr", 21.0, 25.0)), 4);
    }

    #[test]
    fn comfort_band_is_drawn_at_its_bounds() {
        let svg = render_svg(&rows(96, 3000.0, None), "t", 21.0, 25.0);
        assert_eq!(svg.matches(r#"class="band""#).count(), 1);
        assert!(svg.contains(r#"data-low="21" data-high="25""#));
    }

    #[test]
    fn zero_power_is_a_flat_line() {
        let svg = render_svg(&rows(10, 0.0, None), "flat", 21.0, 25.0);
        let power = svg.split(r#"data-title="Heat-pump thermal power (kW)""#).nth(1).unwrap();
        let pts = power.split(r#"points=""#).nth(1).unwrap().split('"').next().unwrap();
        let ys: Vec<&str> = pts.split(' ').map(|p| p.split(',').nth(1).unwrap()).collect();
        assert!(ys.windows(2).all(|w| w[0] == w[1]), "{ys:?}");
    }

    proptest! {
        #[test]
        fn y_range_contains_data_and_band(v in prop::collection::vec(-50.0f64..50.0, 1..50), b0 in 15.0f64..22.0) {
            let band = Some((b0, b0 + 4.0));
            let (lo, hi) = y_range(&v, band);
            prop_assert!(lo < hi);
            for x in &v {
                prop_assert!(*x >= lo && *x <= hi);
            }
            prop_assert!(lo <= b0 && hi >= b0 + 4.0);
        }
    }
}

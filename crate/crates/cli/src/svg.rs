use std::fmt::Write as _;

use fastgate::sim::{PwcWaveform, DT_NS};

const WIDTH: f64 = 760.0;
const HEIGHT: f64 = 360.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const Y_MIN: f64 = -0.1;
const Y_MAX: f64 = 0.2;

/// Step plot of both quadratures against time in `dt` ticks.
pub fn pulse_svg(w: &PwcWaveform, title: &str) -> String {
    let per = w.ticks_per_segment();
    let total = (w.len() * per).max(1) as f64;
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let x = |tick: f64| LEFT + tick / total * plot_w;
    let y = |v: f64| TOP + (Y_MAX - v.clamp(Y_MIN, Y_MAX)) / (Y_MAX - Y_MIN) * plot_h;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );

    for i in 0..=6 {
        let v = Y_MIN + i as f64 * 0.05;
        let py = y(v);
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" y1="{py:.2}" x2="{:.2}" y2="{py:.2}" stroke="#e0e0e0"/><text x="{:.2}" y="{:.2}" text-anchor="end">{v:.2}</text>"##,
            WIDTH - RIGHT,
            LEFT - 6.0,
            py + 4.0
        );
    }
    let step = tick_step(total as usize, per);
    let mut t = 0;
    while t as f64 <= total {
        let px = x(t as f64);
        let _ = writeln!(
            s,
            r##"<line x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}" stroke="#444"/><text x="{px:.2}" y="{:.2}" text-anchor="middle">{t}</text>"##,
            HEIGHT - BOTTOM,
            HEIGHT - BOTTOM + 5.0,
            HEIGHT - BOTTOM + 18.0
        );
        t += step;
    }
    let _ = writeln!(
        s,
        r##"<rect x="{LEFT}" y="{TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="#444"/>"##
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">time (dt = {DT_NS} ns)</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 18.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">amplitude</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0
    );

    for (q, colour, label) in [(0, "#1f77b4", "u^x"), (1, "#d62728", "u^y")] {
        let mut pts = String::new();
        for (k, seg) in w.segments().iter().enumerate() {
            let (t0, t1) = ((k * per) as f64, ((k + 1) * per) as f64);
            let _ = write!(
                pts,
                "{:.2},{:.2} {:.2},{:.2} ",
                x(t0),
                y(seg[q]),
                x(t1),
                y(seg[q])
            );
        }
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{colour}" stroke-width="2" points="{}"/>"#,
            pts.trim_end()
        );
        let ly = TOP + 16.0 + 16.0 * q as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{ly}" x2="{:.2}" y2="{ly}" stroke="{colour}" stroke-width="2"/><text x="{:.2}" y="{:.2}">{label}</text>"#,
            WIDTH - RIGHT - 70.0,
            WIDTH - RIGHT - 50.0,
            WIDTH - RIGHT - 44.0,
            ly + 4.0
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Tick spacing in `dt`: a multiple of the segment length keeping about ten labels.
fn tick_step(total: usize, per: usize) -> usize {
    let mut step = per.max(1);
    while total / step > 10 {
        step += per.max(1);
    }
    step
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

use std::fmt::Write;

const PALETTE: [&str; 4] = ["#4878a8", "#e0884a", "#6aa56a", "#b85450"];

/// Grouped bar chart: one group per category, one bar per series. Values
/// are percentages on a fixed 0-100 axis.
pub fn grouped_bar_svg(title: &str, categories: &[String], series: &[(String, Vec<f64>)]) -> String {
    let (left, top, bottom, right) = (50.0, 40.0, 50.0, 130.0);
    let group_w = 20.0 + 22.0 * series.len() as f64;
    let plot_w = group_w * categories.len().max(1) as f64;
    let plot_h = 240.0;
    let (width, height) = (left + plot_w + right, top + plot_h + bottom);
    let y = |v: f64| top + plot_h * (1.0 - v.clamp(0.0, 100.0) / 100.0);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="13">{}</text>"#,
        left + plot_w / 2.0,
        escape(title)
    );
    for tick in (0..=100).step_by(20) {
        let ty = y(tick as f64);
        let _ = writeln!(
            s,
            r##"<line x1="{left}" y1="{ty}" x2="{}" y2="{ty}" stroke="#ddd"/><text x="{}" y="{}" text-anchor="end">{tick}</text>"##,
            left + plot_w,
            left - 6.0,
            ty + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" transform="rotate(-90 14 {})" text-anchor="middle">SID rate (%)</text>"#,
        top + plot_h / 2.0,
        top + plot_h / 2.0
    );
    for (g, cat) in categories.iter().enumerate() {
        let gx = left + g as f64 * group_w + 10.0;
        for (k, (_, values)) in series.iter().enumerate() {
            let v = values.get(g).copied().unwrap_or(f64::NAN);
            if !v.is_finite() {
                continue;
            }
            let x = gx + 22.0 * k as f64;
            let _ = writeln!(
                s,
                r#"<rect x="{x}" y="{}" width="18" height="{}" fill="{}"><title>{v:.1}</title></rect>"#,
                y(v),
                top + plot_h - y(v),
                PALETTE[k % PALETTE.len()]
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            gx + 11.0 * series.len() as f64 - 2.0,
            top + plot_h + 16.0,
            escape(cat)
        );
    }
    for (k, (name, _)) in series.iter().enumerate() {
        let ly = top + 10.0 + 18.0 * k as f64;
        let lx = left + plot_w + 14.0;
        let _ = writeln!(
            s,
            r#"<rect x="{lx}" y="{}" width="12" height="12" fill="{}"/><text x="{}" y="{}">{}</text>"#,
            ly - 10.0,
            PALETTE[k % PALETTE.len()],
            lx + 18.0,
            ly,
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

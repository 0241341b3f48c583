//! SVG scatter plot of observation coordinates.
//!
//! The plot is a plain equirectangular projection: longitude maps linearly
//! to x and latitude to y. Every observation becomes one `<circle>` with
//! class `marker docked` or `marker free`; the legend uses separate
//! `swatch` elements so markers can be counted by class.

use std::fmt::Write as _;

use bikeshare_equity::gbfs::{BikeObservation, DockingType};

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 600.0;
const MARGIN_LEFT: f64 = 80.0;
const MARGIN_RIGHT: f64 = 30.0;
const MARGIN_TOP: f64 = 50.0;
const MARGIN_BOTTOM: f64 = 90.0;
const TICKS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Extent {
    min_lon: f64,
    max_lon: f64,
    min_lat: f64,
    max_lat: f64,
}

impl Extent {
    /// Data bounds padded by 5%, or the whole globe for an empty plot.
    fn of(observations: &[BikeObservation]) -> Extent {
        if observations.is_empty() {
            return Extent {
                min_lon: -180.0,
                max_lon: 180.0,
                min_lat: -90.0,
                max_lat: 90.0,
            };
        }
        let mut e = Extent {
            min_lon: f64::INFINITY,
            max_lon: f64::NEG_INFINITY,
            min_lat: f64::INFINITY,
            max_lat: f64::NEG_INFINITY,
        };
        for o in observations {
            e.min_lon = e.min_lon.min(o.lon);
            e.max_lon = e.max_lon.max(o.lon);
            e.min_lat = e.min_lat.min(o.lat);
            e.max_lat = e.max_lat.max(o.lat);
        }
        let pad_lon = ((e.max_lon - e.min_lon) * 0.05).max(0.005);
        let pad_lat = ((e.max_lat - e.min_lat) * 0.05).max(0.005);
        Extent {
            min_lon: e.min_lon - pad_lon,
            max_lon: e.max_lon + pad_lon,
            min_lat: e.min_lat - pad_lat,
            max_lat: e.max_lat + pad_lat,
        }
    }

    fn x(&self, lon: f64) -> f64 {
        MARGIN_LEFT + (lon - self.min_lon) / (self.max_lon - self.min_lon) * (WIDTH - MARGIN_LEFT - MARGIN_RIGHT)
    }

    fn y(&self, lat: f64) -> f64 {
        HEIGHT - MARGIN_BOTTOM - (lat - self.min_lat) / (self.max_lat - self.min_lat) * (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM)
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Enough decimals to tell adjacent ticks apart.
fn tick_label(value: f64, step: f64) -> String {
    let decimals = (-step.abs().log10()).ceil().clamp(0.0, 6.0) as usize;
    let s = format!("{value:.decimals$}");
    if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
        s[1..].to_string()
    } else {
        s
    }
}

fn class_of(kind: DockingType) -> &'static str {
    match kind {
        DockingType::Docked => "docked",
        DockingType::Free => "free",
    }
}

/// Renders the scatter plot. Output depends only on the input order and
/// values.
pub fn render_map(observations: &[BikeObservation]) -> String {
    let e = Extent::of(observations);
    let (left, right) = (MARGIN_LEFT, WIDTH - MARGIN_RIGHT);
    let (top, bottom) = (MARGIN_TOP, HEIGHT - MARGIN_BOTTOM);
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    svg.push_str(
        "<style>.marker{stroke-width:0.5}.docked{fill:#1f77b4;stroke:#0b3c5d}\
         .free{fill:#ff7f0e;stroke:#8c4306}.axis{stroke:#333;stroke-width:1}\
         .tick{stroke:#333}</style>\n",
    );
    let _ = writeln!(svg, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);

    // axes with ticks
    let _ = writeln!(svg, r#"<g class="axes">"#);
    let _ = writeln!(svg, r#"<line class="axis" x1="{left}" y1="{bottom}" x2="{right}" y2="{bottom}"/>"#);
    let _ = writeln!(svg, r#"<line class="axis" x1="{left}" y1="{top}" x2="{left}" y2="{bottom}"/>"#);
    let lon_step = (e.max_lon - e.min_lon) / (TICKS - 1) as f64;
    let lat_step = (e.max_lat - e.min_lat) / (TICKS - 1) as f64;
    for i in 0..TICKS {
        let lon = e.min_lon + lon_step * i as f64;
        let x = e.x(lon);
        let _ = writeln!(
            svg,
            r#"<line class="tick" x1="{x:.2}" y1="{bottom}" x2="{x:.2}" y2="{:.2}"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            bottom + 5.0,
            bottom + 20.0,
            tick_label(lon, lon_step)
        );
        let lat = e.min_lat + lat_step * i as f64;
        let y = e.y(lat);
        let _ = writeln!(
            svg,
            r#"<line class="tick" x1="{:.2}" y1="{y:.2}" x2="{left}" y2="{y:.2}"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            left - 5.0,
            left - 8.0,
            y + 4.0,
            tick_label(lat, lat_step)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">Longitude</text>"#,
        (left + right) / 2.0,
        bottom + 40.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="20" y="{:.2}" text-anchor="middle" transform="rotate(-90 20 {:.2})">Latitude</text>"#,
        (top + bottom) / 2.0,
        (top + bottom) / 2.0
    );
    svg.push_str("</g>\n");

    // markers: docked first so free bikes stay visible on top
    let mut docked = 0;
    let mut free = 0;
    let _ = writeln!(svg, r#"<g class="markers">"#);
    for kind in [DockingType::Docked, DockingType::Free] {
        for o in observations.iter().filter(|o| o.docking_type == kind) {
            match kind {
                DockingType::Docked => docked += 1,
                DockingType::Free => free += 1,
            }
            let _ = writeln!(
                svg,
                r#"<circle class="marker {}" cx="{:.2}" cy="{:.2}" r="3"><title>{} {}</title></circle>"#,
                class_of(kind),
                e.x(o.lon),
                e.y(o.lat),
                escape(&o.system_id),
                escape(&o.entity_id)
            );
        }
    }
    svg.push_str("</g>\n");

    // legend and caption
    let _ = writeln!(svg, r#"<g class="legend">"#);
    for (i, (kind, label, n)) in [
        (DockingType::Docked, "Docked stations", docked),
        (DockingType::Free, "Free bikes", free),
    ]
    .into_iter()
    .enumerate()
    {
        let y = 22.0 + 18.0 * i as f64;
        let _ = writeln!(
            svg,
            r#"<circle class="swatch {}" cx="{:.2}" cy="{y:.2}" r="4"/><text x="{:.2}" y="{:.2}">{label} ({n})</text>"#,
            class_of(kind),
            right - 150.0,
            right - 140.0,
            y + 4.0
        );
    }
    svg.push_str("</g>\n");
    let _ = writeln!(
        svg,
        r#"<text class="caption" x="{:.2}" y="{:.2}" text-anchor="middle">{} observations: {docked} docked stations, {free} free bikes</text>"#,
        (left + right) / 2.0,
        HEIGHT - 15.0,
        observations.len()
    );
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs(lat: f64, lon: f64, kind: DockingType) -> BikeObservation {
        BikeObservation {
            system_id: "s&t".into(),
            entity_id: "<1>".into(),
            lat,
            lon,
            docking_type: kind,
            observed_at: 0,
        }
    }

    #[test]
    fn one_marker_per_observation_by_class() {
        let data = vec![
            obs(45.5, -122.6, DockingType::Docked),
            obs(45.6, -122.7, DockingType::Free),
            obs(45.4, -122.5, DockingType::Free),
        ];
        let svg = render_map(&data);
        assert_eq!(svg.matches(r#"class="marker docked""#).count(), 1);
        assert_eq!(svg.matches(r#"class="marker free""#).count(), 2);
        assert!(svg.contains("3 observations: 1 docked stations, 2 free bikes"));
        assert!(svg.contains("s&amp;t &lt;1&gt;"));
    }

    #[test]
    fn markers_stay_inside_the_plot_area() {
        let data = vec![obs(10.0, 20.0, DockingType::Free), obs(-5.0, -3.0, DockingType::Docked)];
        let e = Extent::of(&data);
        for o in &data {
            let (x, y) = (e.x(o.lon), e.y(o.lat));
            assert!((MARGIN_LEFT..=WIDTH - MARGIN_RIGHT).contains(&x));
            assert!((MARGIN_TOP..=HEIGHT - MARGIN_BOTTOM).contains(&y));
        }
        // north is up
        assert!(e.y(10.0) < e.y(-5.0));
    }

    #[test]
    fn empty_plot_keeps_axes() {
        let svg = render_map(&[]);
        assert_eq!(svg.matches("class=\"marker ").count(), 0);
        assert!(svg.contains("Longitude") && svg.contains(r#"class="axis""#));
        assert!(svg.contains("0 observations"));
    }

    #[test]
    fn tick_labels() {
        assert_eq!(tick_label(-122.6543, 0.02), "-122.65");
        assert_eq!(tick_label(-0.0001, 0.5), "0.0");
        assert_eq!(tick_label(90.0, 45.0), "90");
    }
}

//! Deterministic SVG phase portraits (`u` horizontal, `u'` vertical).

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::integrate::Trajectory;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlotError {
    #[error("trajectory needs at least two points, got {0}")]
    Degenerate(usize),
    #[error("trajectory has zero extent in both coordinates")]
    ZeroExtent,
    #[error("invalid plot window: {0}")]
    InvalidWindow(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlotSpec {
    /// Fixed `u` window; derived from the data when absent.
    pub x_range: Option<(f64, f64)>,
    /// Fixed `u'` window; derived from the data when absent.
    pub y_range: Option<(f64, f64)>,
    /// Magnification about the window center.
    pub zoom: f64,
    pub width: u32,
    pub height: u32,
    pub stroke: String,
    pub stroke_width: f64,
    pub title: Option<String>,
}

impl Default for PlotSpec {
    fn default() -> Self {
        Self {
            x_range: None,
            y_range: None,
            zoom: 1.0,
            width: 640,
            height: 540,
            stroke: "#1f4e9c".into(),
            stroke_width: 1.2,
            title: None,
        }
    }
}

impl PlotSpec {
    pub fn validate(&self) -> Result<(), PlotError> {
        if !(self.zoom.is_finite() && self.zoom > 0.0) {
            return Err(PlotError::InvalidWindow(format!("zoom must be positive, got {}", self.zoom)));
        }
        for (name, r) in [("x_range", self.x_range), ("y_range", self.y_range)] {
            if let Some((lo, hi)) = r {
                if !(lo.is_finite() && hi.is_finite() && hi > lo) {
                    return Err(PlotError::InvalidWindow(format!("{name} [{lo}, {hi}]")));
                }
            }
        }
        if self.width == 0 || self.height == 0 {
            return Err(PlotError::InvalidWindow("zero image size".into()));
        }
        Ok(())
    }

    pub fn zoomed(&self, zoom: f64) -> Self {
        Self { zoom, ..self.clone() }
    }
}

/// Data window `(u_min, u_max, v_min, v_max)` after padding and zoom.
///
/// Without fixed ranges the window is the trajectory's bounding box grown by
/// 20% of its half-extent, then shrunk by `zoom` about the box center.
pub fn plot_window(traj: &Trajectory, spec: &PlotSpec) -> Result<(f64, f64, f64, f64), PlotError> {
    spec.validate()?;
    if traj.len() < 2 {
        return Err(PlotError::Degenerate(traj.len()));
    }
    let bounds = |f: fn(&crate::systems::State) -> f64| {
        traj.states.iter().map(f).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
    };
    let (ulo, uhi) = bounds(|s| s.x2);
    let (vlo, vhi) = bounds(|s| s.x1);
    let (mut hu, mut hv) = (0.5 * (uhi - ulo), 0.5 * (vhi - vlo));
    if hu == 0.0 && hv == 0.0 && (spec.x_range.is_none() || spec.y_range.is_none()) {
        return Err(PlotError::ZeroExtent);
    }
    if hu == 0.0 {
        hu = hv;
    }
    if hv == 0.0 {
        hv = hu;
    }
    let (cu, hu) = match spec.x_range {
        Some((lo, hi)) => (0.5 * (lo + hi), 0.5 * (hi - lo)),
        None => (0.5 * (ulo + uhi), 1.2 * hu),
    };
    let (cv, hv) = match spec.y_range {
        Some((lo, hi)) => (0.5 * (lo + hi), 0.5 * (hi - lo)),
        None => (0.5 * (vlo + vhi), 1.2 * hv),
    };
    let (hu, hv) = (hu / spec.zoom, hv / spec.zoom);
    Ok((cu - hu, cu + hu, cv - hv, cv + hv))
}

fn f6(x: f64) -> String {
    // normalise negative zero so output is byte-stable
    let s = format!("{x:.6}");
    if s == "-0.000000" {
        "0.000000".into()
    } else {
        s
    }
}

/// Renders the trajectory as a single polyline in data coordinates.
pub fn render_phase_svg(traj: &Trajectory, spec: &PlotSpec) -> Result<String, PlotError> {
    let (u0, u1, v0, v1) = plot_window(traj, spec)?;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="{} {} {} {}" preserveAspectRatio="none">"#,
        spec.width,
        spec.height,
        f6(u0),
        f6(-v1),
        f6(u1 - u0),
        f6(v1 - v0)
    );
    if let Some(title) = &spec.title {
        let escaped = title.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;");
        let _ = writeln!(svg, "<title>{escaped}</title>");
    }
    let _ = writeln!(
        svg,
        r#"<rect x="{}" y="{}" width="{}" height="{}" fill="white"/>"#,
        f6(u0),
        f6(-v1),
        f6(u1 - u0),
        f6(v1 - v0)
    );
    let axis = r##"stroke="#999999" stroke-width="0.6" vector-effect="non-scaling-stroke""##;
    if v0 <= 0.0 && 0.0 <= v1 {
        let _ = writeln!(svg, r#"<line x1="{}" y1="0.000000" x2="{}" y2="0.000000" {axis}/>"#, f6(u0), f6(u1));
    }
    if u0 <= 0.0 && 0.0 <= u1 {
        let _ = writeln!(svg, r#"<line x1="0.000000" y1="{}" x2="0.000000" y2="{}" {axis}/>"#, f6(-v1), f6(-v0));
    }
    let mut points = String::with_capacity(traj.len() * 22);
    for (i, s) in traj.states.iter().enumerate() {
        if i > 0 {
            points.push(' ');
        }
        let _ = write!(points, "{},{}", f6(s.x2), f6(-s.x1));
    }
    let _ = writeln!(
        svg,
        r#"<polyline points="{points}" fill="none" stroke="{}" stroke-width="{}" vector-effect="non-scaling-stroke"/>"#,
        spec.stroke,
        f6(spec.stroke_width)
    );
    svg.push_str("</svg>\n");
    Ok(svg)
}

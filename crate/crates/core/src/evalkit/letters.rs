//! Minimal stroke alphabet (A-Z plus space) and waypoint sampling for the
//! letter-path demonstration.
//!
//! Glyphs are polylines in the unit square, scaled into per-letter cells
//! across the target area. Aesthetics are irrelevant; the contracts are
//! containment and deterministic sampling.

use super::EvalError;
use crate::channel::Area;

type Stroke = &'static [(f64, f64)];

fn glyph(c: char) -> Option<&'static [Stroke]> {
    let strokes: &'static [Stroke] = match c {
        'A' => &[
            &[(0.0, 0.0), (0.5, 1.0), (1.0, 0.0)],
            &[(0.25, 0.45), (0.75, 0.45)],
        ],
        'B' => &[
            &[(0.0, 0.0), (0.0, 1.0)],
            &[(0.0, 1.0), (0.8, 0.9), (0.8, 0.6), (0.0, 0.5)],
            &[(0.0, 0.5), (0.9, 0.35), (0.9, 0.15), (0.0, 0.0)],
        ],
        'C' => &[&[
            (1.0, 0.85),
            (0.5, 1.0),
            (0.0, 0.75),
            (0.0, 0.25),
            (0.5, 0.0),
            (1.0, 0.15),
        ]],
        'D' => &[&[
            (0.0, 0.0),
            (0.0, 1.0),
            (0.7, 0.85),
            (0.9, 0.5),
            (0.7, 0.15),
            (0.0, 0.0),
        ]],
        'E' => &[
            &[(1.0, 1.0), (0.0, 1.0), (0.0, 0.0), (1.0, 0.0)],
            &[(0.0, 0.5), (0.7, 0.5)],
        ],
        'F' => &[
            &[(1.0, 1.0), (0.0, 1.0), (0.0, 0.0)],
            &[(0.0, 0.5), (0.7, 0.5)],
        ],
        'G' => &[&[
            (1.0, 0.85),
            (0.5, 1.0),
            (0.0, 0.75),
            (0.0, 0.25),
            (0.5, 0.0),
            (1.0, 0.2),
            (1.0, 0.45),
            (0.6, 0.45),
        ]],
        'H' => &[
            &[(0.0, 0.0), (0.0, 1.0)],
            &[(1.0, 0.0), (1.0, 1.0)],
            &[(0.0, 0.5), (1.0, 0.5)],
        ],
        'I' => &[&[(0.5, 0.0), (0.5, 1.0)]],
        'J' => &[&[(0.8, 1.0), (0.8, 0.2), (0.5, 0.0), (0.2, 0.1)]],
        'K' => &[
            &[(0.0, 0.0), (0.0, 1.0)],
            &[(1.0, 1.0), (0.0, 0.5), (1.0, 0.0)],
        ],
        'L' => &[&[(0.0, 1.0), (0.0, 0.0), (1.0, 0.0)]],
        'M' => &[&[(0.0, 0.0), (0.0, 1.0), (0.5, 0.5), (1.0, 1.0), (1.0, 0.0)]],
        'N' => &[&[(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)]],
        'O' => &[&[
            (0.5, 0.0),
            (0.0, 0.25),
            (0.0, 0.75),
            (0.5, 1.0),
            (1.0, 0.75),
            (1.0, 0.25),
            (0.5, 0.0),
        ]],
        'P' => &[&[(0.0, 0.0), (0.0, 1.0), (0.9, 0.85), (0.9, 0.6), (0.0, 0.5)]],
        'Q' => &[
            &[
                (0.5, 0.0),
                (0.0, 0.25),
                (0.0, 0.75),
                (0.5, 1.0),
                (1.0, 0.75),
                (1.0, 0.25),
                (0.5, 0.0),
            ],
            &[(0.6, 0.35), (1.0, 0.0)],
        ],
        'R' => &[
            &[(0.0, 0.0), (0.0, 1.0), (0.9, 0.85), (0.9, 0.6), (0.0, 0.5)],
            &[(0.3, 0.5), (1.0, 0.0)],
        ],
        'S' => &[&[
            (1.0, 0.85),
            (0.5, 1.0),
            (0.0, 0.8),
            (1.0, 0.2),
            (0.5, 0.0),
            (0.0, 0.15),
        ]],
        'T' => &[&[(0.0, 1.0), (1.0, 1.0)], &[(0.5, 1.0), (0.5, 0.0)]],
        'U' => &[&[(0.0, 1.0), (0.0, 0.2), (0.5, 0.0), (1.0, 0.2), (1.0, 1.0)]],
        'V' => &[&[(0.0, 1.0), (0.5, 0.0), (1.0, 1.0)]],
        'W' => &[&[
            (0.0, 1.0),
            (0.25, 0.0),
            (0.5, 0.6),
            (0.75, 0.0),
            (1.0, 1.0),
        ]],
        'X' => &[&[(0.0, 0.0), (1.0, 1.0)], &[(0.0, 1.0), (1.0, 0.0)]],
        'Y' => &[
            &[(0.0, 1.0), (0.5, 0.5), (1.0, 1.0)],
            &[(0.5, 0.5), (0.5, 0.0)],
        ],
        'Z' => &[&[(0.0, 1.0), (1.0, 1.0), (0.0, 0.0), (1.0, 0.0)]],
        ' ' => &[],
        _ => return None,
    };
    Some(strokes)
}

/// The glyphs [`letter_path`] accepts.
pub fn supported_glyphs() -> String {
    let mut s: String = ('A'..='Z').collect();
    s.push(' ');
    s
}

/// Converts text to an ordered list of (x, y) waypoints in mm.
///
/// Letters occupy equal-width cells across the area (with a small
/// horizontal gap between cells) and span the full area height. Every
/// stroke is resampled at arclength steps of at most `spacing_mm`,
/// endpoints included, so a straight stroke of length `L` yields
/// `ceil(L / spacing) + 1` points. All output lies inside the area.
pub fn letter_path(
    text: &str,
    area: &Area,
    spacing_mm: f64,
) -> Result<Vec<[f64; 2]>, EvalError> {
    if text.is_empty() {
        return Err(EvalError::Empty("letter_path text"));
    }
    if spacing_mm <= 0.0 {
        return Err(EvalError::Config("spacing must be positive".into()));
    }
    let upper = text.to_ascii_uppercase();
    let n = upper.chars().count();
    let advance = area.extent_x / n as f64;
    let glyph_width = advance * 0.8;
    let margin = (advance - glyph_width) / 2.0;

    let mut out = Vec::new();
    for (i, c) in upper.chars().enumerate() {
        let strokes = glyph(c).ok_or_else(|| EvalError::UnsupportedGlyph {
            glyph: c,
            supported: supported_glyphs(),
        })?;
        let cell_x0 = area.x0 + i as f64 * advance + margin;
        for stroke in strokes {
            let points: Vec<[f64; 2]> = stroke
                .iter()
                .map(|&(ux, uy)| {
                    [cell_x0 + ux * glyph_width, area.y0 + uy * area.extent_y]
                })
                .collect();
            sample_polyline(&points, spacing_mm, &mut out);
        }
    }
    Ok(out)
}

/// Uniform arclength resampling of one polyline, both endpoints included.
fn sample_polyline(points: &[[f64; 2]], spacing: f64, out: &mut Vec<[f64; 2]>) {
    if points.len() < 2 {
        out.extend_from_slice(points);
        return;
    }
    let seg_lengths: Vec<f64> = points
        .windows(2)
        .map(|w| {
            let dx = w[1][0] - w[0][0];
            let dy = w[1][1] - w[0][1];
            (dx * dx + dy * dy).sqrt()
        })
        .collect();
    let total: f64 = seg_lengths.iter().sum();
    if total == 0.0 {
        out.push(points[0]);
        return;
    }
    let n_steps = (total / spacing).ceil() as usize;
    for step in 0..=n_steps {
        let mut remaining = total * step as f64 / n_steps as f64;
        let mut position = points[0];
        for (seg, &len) in seg_lengths.iter().enumerate() {
            if remaining <= len || seg == seg_lengths.len() - 1 {
                let t = if len > 0.0 { (remaining / len).min(1.0) } else { 0.0 };
                position = [
                    points[seg][0] + t * (points[seg + 1][0] - points[seg][0]),
                    points[seg][1] + t * (points[seg + 1][1] - points[seg][1]),
                ];
                break;
            }
            remaining -= len;
        }
        out.push(position);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn area(extent_x: f64, extent_y: f64) -> Area {
        Area {
            x0: -extent_x / 2.0,
            y0: 1000.0,
            extent_x,
            extent_y,
        }
    }

    #[test]
    fn letter_i_point_count_and_geometry() {
        // 100 mm tall vertical stroke sampled at 30 mm: ceil(100/30)+1 = 5.
        let a = area(200.0, 100.0);
        let path = letter_path("I", &a, 30.0).unwrap();
        assert_eq!(path.len(), 5);
        // Vertical: constant x, y sweeps the full area height.
        assert!(path.iter().all(|p| p[0] == path[0][0]));
        assert_eq!(path[0][1], 1000.0);
        assert_eq!(path[4][1], 1100.0);
        // Exact division: 100/25 + 1 = 5 as well.
        assert_eq!(letter_path("I", &a, 25.0).unwrap().len(), 5);
    }

    #[test]
    fn all_points_stay_inside_the_area() {
        let a = area(1250.0, 300.0);
        let path = letter_path("KU LEUVEN", &a, 10.0).unwrap();
        assert!(!path.is_empty());
        for p in &path {
            assert!(
                a.contains(p[0], p[1]),
                "point ({}, {}) outside area",
                p[0],
                p[1]
            );
        }
    }

    #[test]
    fn every_letter_renders_inside_unit_cells() {
        let a = area(2600.0, 200.0);
        let text: String = ('A'..='Z').collect();
        let path = letter_path(&text, &a, 15.0).unwrap();
        for p in &path {
            assert!(a.contains(p[0], p[1]));
        }
    }

    #[test]
    fn unsupported_glyph_lists_alphabet() {
        let a = area(100.0, 100.0);
        let err = letter_path("K?", &a, 10.0).unwrap_err();
        match err {
            EvalError::UnsupportedGlyph { glyph, supported } => {
                assert_eq!(glyph, '?');
                assert!(supported.contains('A') && supported.contains('Z'));
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let a = area(500.0, 150.0);
        assert_eq!(
            letter_path("LEUVEN", &a, 12.0).unwrap(),
            letter_path("LEUVEN", &a, 12.0).unwrap()
        );
    }
}

//! Antenna array geometries in the URA-centered frame.
//!
//! Frame convention: x to the right, y toward the user area, z up, all in
//! mm. The URA centre projects to the origin in x; arrays sit at y = 0 and
//! the user area begins one standoff away in +y.

use super::ChannelError;

/// The three deployment scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TopologyKind {
    /// 8-by-8 uniform rectangular array.
    Ura,
    /// 64 elements on one line.
    Ula,
    /// 8 sub-arrays of 8 collinear elements spread around the user area.
    Dis,
}

impl TopologyKind {
    pub fn name(self) -> &'static str {
        match self {
            TopologyKind::Ura => "URA",
            TopologyKind::Ula => "ULA",
            TopologyKind::Dis => "DIS",
        }
    }

    pub fn parse(s: &str) -> Result<Self, ChannelError> {
        match s.to_ascii_lowercase().as_str() {
            "ura" => Ok(TopologyKind::Ura),
            "ula" => Ok(TopologyKind::Ula),
            "dis" => Ok(TopologyKind::Dis),
            other => Err(ChannelError::Config(format!(
                "unknown topology '{other}' (expected ura, ula, or dis)"
            ))),
        }
    }
}

/// Placement constants for array construction, all in mm.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometryConfig {
    /// Pitch between adjacent elements (70 mm in the campaign).
    pub element_spacing: f64,
    /// Distance from the arrays to the near edge of the user area (1 m).
    pub standoff: f64,
    /// Height of the lowest element above the floor (930 mm).
    pub base_height: f64,
    /// Half-extent of the user-area bounding box in x, used only by the
    /// distributed layout to place sub-arrays around the area.
    pub user_area_half_extent: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        GeometryConfig {
            element_spacing: 70.0,
            standoff: 1000.0,
            base_height: 930.0,
            user_area_half_extent: 625.0,
        }
    }
}

/// Antenna element positions for one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub kind: TopologyKind,
    /// Element centres `[x, y, z]` in mm.
    pub elements: Vec<[f64; 3]>,
    pub element_spacing: f64,
    pub name: String,
}

impl Topology {
    pub fn n_antennas(&self) -> usize {
        self.elements.len()
    }
}

/// Builds the element layout for a scenario.
///
/// URA: 8x8 vertical grid facing +y, centred on x = 0, lowest row at
/// `base_height`. ULA: 64 elements along x at `base_height`. DIS: 8
/// sub-arrays of 8 collinear elements placed at the corners and edge
/// midpoints of a square one standoff outside the user-area bounding box,
/// oriented tangentially, at the URA centre height. The distributed layout
/// is a documented synthetic stand-in; the measured room's exact placement
/// is not public.
pub fn build_topology(kind: TopologyKind, geo: &GeometryConfig) -> Result<Topology, ChannelError> {
    if geo.element_spacing <= 0.0 {
        return Err(ChannelError::Config(
            "element spacing must be positive".into(),
        ));
    }
    let s = geo.element_spacing;
    let elements = match kind {
        TopologyKind::Ura => {
            let mut e = Vec::with_capacity(64);
            for row in 0..8 {
                for col in 0..8 {
                    let x = (col as f64 - 3.5) * s;
                    let z = geo.base_height + row as f64 * s;
                    e.push([x, 0.0, z]);
                }
            }
            e
        }
        TopologyKind::Ula => (0..64)
            .map(|i| [(i as f64 - 31.5) * s, 0.0, geo.base_height])
            .collect(),
        TopologyKind::Dis => {
            // Square ring one standoff outside the user-area bounding box.
            // User area: x in [-h, h], y in [standoff, standoff + 2h].
            let h = geo.user_area_half_extent;
            let ring = h + geo.standoff;
            let cy = geo.standoff + h; // centre of the user area in y
            let centre_height = geo.base_height + 3.5 * s;
            // Corners and edge midpoints, anticlockwise from +x midpoint;
            // each sub-array lies along the tangent direction.
            let placements: [((f64, f64), (f64, f64)); 8] = [
                ((ring, cy), (0.0, 1.0)),
                ((ring, cy + ring), (-1.0, 0.0)),
                ((0.0, cy + ring), (-1.0, 0.0)),
                ((-ring, cy + ring), (0.0, -1.0)),
                ((-ring, cy), (0.0, -1.0)),
                ((-ring, cy - ring), (1.0, 0.0)),
                ((0.0, cy - ring), (1.0, 0.0)),
                ((ring, cy - ring), (0.0, 1.0)),
            ];
            let mut e = Vec::with_capacity(64);
            for ((px, py), (tx, ty)) in placements {
                for i in 0..8 {
                    let offset = (i as f64 - 3.5) * s;
                    e.push([px + tx * offset, py + ty * offset, centre_height]);
                }
            }
            e
        }
    };
    Ok(Topology {
        kind,
        elements,
        element_spacing: s,
        name: kind.name().to_string(),
    })
}

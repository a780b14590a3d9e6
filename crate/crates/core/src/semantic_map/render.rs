//! Raster rendering of an annotated map.
//!
//! Each cell is an 8x8 pixel block. Colours:
//!
//! - unexplored `(48, 48, 48)`, explored free `(224, 224, 224)`, explored wall `(0, 0, 0)`
//! - target annotations `(0, 190, 0)`, other landmarks from a fixed 12-colour palette
//! - trajectory polyline `(0, 170, 170)` through cell centres
//! - overlay waypoints: 4x4 dots on the heat scale [`heat_color`]
//! - current pose: 2x2 white square at the cell centre

use super::{AnnotatedMap, MapError, Occupancy};

pub const CELL_PX: usize = 8;

const UNEXPLORED: [u8; 3] = [48, 48, 48];
const FREE: [u8; 3] = [224, 224, 224];
const WALL: [u8; 3] = [0, 0, 0];
const TARGET: [u8; 3] = [0, 190, 0];
const TRAJECTORY: [u8; 3] = [0, 170, 170];
const PALETTE: [[u8; 3]; 12] = [
    [141, 85, 36],
    [198, 134, 66],
    [128, 0, 128],
    [255, 140, 0],
    [105, 105, 105],
    [70, 130, 180],
    [210, 105, 30],
    [154, 205, 50],
    [219, 112, 147],
    [112, 128, 144],
    [189, 183, 107],
    [72, 61, 139],
];

/// Linear heat scale over `[0, 1]` (clamped): blue `(0, 0, 255)` at 0 to red `(255, 0, 0)` at 1.
pub fn heat_color(v: f64) -> [u8; 3] {
    let v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
    let r = (255.0 * v).round() as u8;
    [r, 0, 255 - r]
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pixmap {
    pub width: usize,
    pub height: usize,
    /// RGB triples, row-major.
    pub data: Vec<u8>,
}

impl Pixmap {
    pub fn new(width: usize, height: usize, fill: [u8; 3]) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for _ in 0..width * height {
            data.extend_from_slice(&fill);
        }
        Self { width, height, data }
    }

    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn put(&mut self, x: i64, y: i64, c: [u8; 3]) {
        if x < 0 || y < 0 || x as usize >= self.width || y as usize >= self.height {
            return;
        }
        let i = (y as usize * self.width + x as usize) * 3;
        self.data[i..i + 3].copy_from_slice(&c);
    }

    fn rect(&mut self, x0: i64, y0: i64, w: i64, h: i64, c: [u8; 3]) {
        for y in y0..y0 + h {
            for x in x0..x0 + w {
                self.put(x, y, c);
            }
        }
    }

    fn line(&mut self, (x0, y0): (i64, i64), (x1, y1): (i64, i64), c: [u8; 3]) {
        let (dx, dy) = ((x1 - x0).abs(), -(y1 - y0).abs());
        let (sx, sy) = ((x1 - x0).signum(), (y1 - y0).signum());
        let (mut x, mut y, mut err) = (x0, y0, dx + dy);
        loop {
            self.put(x, y, c);
            if x == x1 && y == y1 {
                break;
            }
            let e2 = 2 * err;
            if e2 >= dy {
                err += dy;
                x += sx;
            }
            if e2 <= dx {
                err += dx;
                y += sy;
            }
        }
    }

    /// Binary portable pixmap (P6).
    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.data);
        out
    }
}

fn centre(x: i32, y: i32) -> (i64, i64) {
    let h = (CELL_PX / 2) as i64;
    (i64::from(x) * CELL_PX as i64 + h, i64::from(y) * CELL_PX as i64 + h)
}

/// Renders `map`; `overlay`, when given, holds one value per waypoint except the last.
pub fn render_map(map: &AnnotatedMap, overlay: Option<&[f64]>) -> Result<Pixmap, MapError> {
    if let Some(values) = overlay {
        let expected = map.trajectory.len().saturating_sub(1);
        if values.len() != expected {
            return Err(MapError::OverlayLength {
                expected,
                got: values.len(),
            });
        }
    }
    let px = CELL_PX as i64;
    let mut img = Pixmap::new(map.width * CELL_PX, map.height * CELL_PX, UNEXPLORED);
    for y in 0..map.height {
        for x in 0..map.width {
            let i = y * map.width + x;
            if !map.explored[i] {
                continue;
            }
            let c = match map.occupancy[i] {
                Occupancy::Wall => WALL,
                Occupancy::Free => FREE,
                Occupancy::Unknown => UNEXPLORED,
            };
            img.rect(x as i64 * px, y as i64 * px, px, px, c);
        }
    }
    for l in &map.landmarks {
        let c = if l.category == map.target_category {
            TARGET
        } else {
            PALETTE[l.category as usize % PALETTE.len()]
        };
        img.rect(
            i64::from(l.pos.x) * px + 1,
            i64::from(l.pos.y) * px + 1,
            px - 2,
            px - 2,
            c,
        );
    }
    for w in map.trajectory.windows(2) {
        img.line(centre(w[0].x, w[0].y), centre(w[1].x, w[1].y), TRAJECTORY);
    }
    if let Some(values) = overlay {
        for (pose, &v) in map.trajectory.iter().zip(values) {
            let (cx, cy) = centre(pose.x, pose.y);
            img.rect(cx - 2, cy - 2, 4, 4, heat_color(v));
        }
    }
    if let Some(p) = map.current_pose {
        let (cx, cy) = centre(p.x, p.y);
        img.rect(cx - 1, cy - 1, 2, 2, [255, 255, 255]);
    }
    Ok(img)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heat_scale_endpoints() {
        assert_eq!(heat_color(0.0), [0, 0, 255]);
        assert_eq!(heat_color(1.0), [255, 0, 0]);
        assert_eq!(heat_color(-3.0), [0, 0, 255]);
        assert_eq!(heat_color(0.5), [128, 0, 127]);
    }

    #[test]
    fn ppm_header() {
        let p = Pixmap::new(2, 1, [1, 2, 3]);
        let bytes = p.to_ppm();
        assert!(bytes.starts_with(b"P6\n2 1\n255\n"));
        assert_eq!(&bytes[bytes.len() - 6..], &[1, 2, 3, 1, 2, 3]);
    }
}

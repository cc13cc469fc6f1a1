//! Color encodings for viewing depth and flow channels.

use super::{FloatMap, RgbImage};

const INVALID: [f64; 3] = [0.0, 0.0, 0.0];

fn hsv_to_rgb(hue_deg: f64, saturation: f64, value: f64) -> [f64; 3] {
    let h = hue_deg.rem_euclid(360.0) / 60.0;
    let sector = h.floor();
    let f = h - sector;
    let p = value * (1.0 - saturation);
    let q = value * (1.0 - saturation * f);
    let t = value * (1.0 - saturation * (1.0 - f));
    match sector as i32 {
        0 => [value, t, p],
        1 => [q, value, p],
        2 => [p, value, t],
        3 => [p, q, value],
        4 => [t, p, value],
        _ => [value, p, q],
    }
}

/// Hue of a flow vector in degrees, `[0, 360)`, measured from +u towards +v.
pub fn flow_hue(u: f64, v: f64) -> f64 {
    v.atan2(u).to_degrees().rem_euclid(360.0)
}

/// Hue encodes direction, saturation encodes `|flow| / max_magnitude` (capped at 1).
/// Zero flow is white and invalid (NaN) pixels are black.
pub fn flow_to_color(flow: &FloatMap, max_magnitude: f64) -> RgbImage {
    assert_eq!(flow.channels, 2, "flow_to_color expects a 2-channel map");
    assert!(max_magnitude > 0.0, "max magnitude must be positive");
    let pixels = flow
        .data
        .chunks_exact(2)
        .map(|uv| {
            let (u, v) = (uv[0] as f64, uv[1] as f64);
            if !u.is_finite() || !v.is_finite() {
                return INVALID;
            }
            let saturation = ((u * u + v * v).sqrt() / max_magnitude).min(1.0);
            hsv_to_rgb(flow_hue(u, v), saturation, 1.0)
        })
        .collect();
    RgbImage {
        width: flow.width,
        height: flow.height,
        pixels,
    }
}

/// Gray level proportional to inverse depth, normalized by the nearest valid depth.
pub fn depth_to_color(depth: &FloatMap) -> RgbImage {
    assert_eq!(depth.channels, 1, "depth_to_color expects a 1-channel map");
    let nearest = depth
        .data
        .iter()
        .filter(|d| d.is_finite() && **d > 0.0)
        .fold(f64::INFINITY, |acc, d| acc.min(*d as f64));
    let pixels = depth
        .data
        .iter()
        .map(|d| {
            let d = *d as f64;
            if !d.is_finite() || d <= 0.0 {
                INVALID
            } else {
                let g = (nearest / d).min(1.0);
                [g, g, g]
            }
        })
        .collect();
    RgbImage {
        width: depth.width,
        height: depth.height,
        pixels,
    }
}

/// Each motion component mapped to `0.5 + c / (2 max_magnitude)`.
pub fn scene_flow_to_color(motion: &FloatMap, max_magnitude: f64) -> RgbImage {
    assert_eq!(motion.channels, 3, "scene_flow_to_color expects a 3-channel map");
    assert!(max_magnitude > 0.0, "max magnitude must be positive");
    let pixels = motion
        .data
        .chunks_exact(3)
        .map(|m| {
            if m.iter().any(|c| !c.is_finite()) {
                return INVALID;
            }
            let enc = |c: f32| (0.5 + c as f64 / (2.0 * max_magnitude)).clamp(0.0, 1.0);
            [enc(m[0]), enc(m[1]), enc(m[2])]
        })
        .collect();
    RgbImage {
        width: motion.width,
        height: motion.height,
        pixels,
    }
}

//! Ray-marched visibility between scene samples and focal-plane targets.
//!
//! While a scene point spreads over a focal plane, surfaces between the
//! point and the plane shadow parts of its blur disk. Visibility is
//! resolved by marching the straight ray from the source sample to the
//! target pixel and testing whether any other sample lies on it, within a
//! depth tolerance that scales with the scene, so occlusion boundaries
//! land where similar triangles put them instead of on a quantized depth
//! bin.

use crate::ldi::LayeredDepthImage;

/// Default depth tolerance: a quarter of the inter-plane spacing of a
/// volume of thickness `volume_depth` sampled by `plane_count` planes.
pub fn default_depth_tolerance(volume_depth: f64, plane_count: usize) -> f64 {
    volume_depth / (4.0 * plane_count.max(1) as f64)
}

/// Identifies the source sample a ray starts from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SourceSample {
    pub x: usize,
    pub y: usize,
    pub layer: usize,
}

/// Returns whether the source sample sees the target position on the
/// focal plane at `plane_depth`.
///
/// The ray runs from the source pixel center (in image coordinates, in
/// units of pixels) to `target`, interpolating depth linearly from the
/// source depth to `plane_depth`. It is sampled once per crossed pixel
/// (at the midpoints of `ceil(chebyshev_length)` equal parameter steps);
/// a sample blocks the ray when some other valid LDI sample at that
/// pixel lies strictly between source and plane depths, farther than
/// `depth_tolerance` from the source depth, and within `depth_tolerance`
/// of the interpolated ray depth.
pub fn trace_visibility(
    ldi: &LayeredDepthImage,
    source: SourceSample,
    target: (f64, f64),
    plane_depth: f64,
    depth_tolerance: f64,
) -> bool {
    let sx = source.x as f64 + 0.5;
    let sy = source.y as f64 + 0.5;
    let z_s = ldi.depth(source.x, source.y, source.layer);
    let (dx, dy) = (target.0 - sx, target.1 - sy);
    let z_lo = z_s.min(plane_depth);
    let z_hi = z_s.max(plane_depth);

    let steps = dx.abs().max(dy.abs()).ceil().max(1.0) as usize;
    for j in 0..steps {
        let t = (j as f64 + 0.5) / steps as f64;
        let px = (sx + t * dx).floor();
        let py = (sy + t * dy).floor();
        if px < 0.0 || py < 0.0 || px >= ldi.width() as f64 || py >= ldi.height() as f64 {
            continue;
        }
        let (px, py) = (px as usize, py as usize);
        let ray_depth = z_s + t * (plane_depth - z_s);
        for layer in 0..ldi.layer_count() {
            if px == source.x && py == source.y && layer == source.layer {
                continue;
            }
            if !ldi.is_valid(px, py, layer) {
                continue;
            }
            let z = ldi.depth(px, py, layer);
            if z <= z_lo || z >= z_hi {
                continue;
            }
            if (z - z_s).abs() <= depth_tolerance {
                continue;
            }
            if (z - ray_depth).abs() <= depth_tolerance {
                return false;
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ldi::LdiLayer;

    /// A 9x9 scene: a bright back wall at 4 mm and a single dark
    /// occluder sample at 2 mm in the middle.
    fn wall_and_occluder() -> LayeredDepthImage {
        let n = 81;
        let wall = LdiLayer::dense(vec![[1.0; 3]; n], vec![4e-3; n]);
        let mut valid = vec![false; n];
        let mut depth = vec![0.0; n];
        valid[4 * 9 + 4] = true;
        depth[4 * 9 + 4] = 2e-3;
        let occ = LdiLayer::new(vec![[0.1; 3]; n], depth, valid);
        LayeredDepthImage::new(9, 9, vec![occ, wall]).unwrap()
    }

    const EPS: f64 = 0.25e-3;

    #[test]
    fn unobstructed_ray_is_visible() {
        let ldi = wall_and_occluder();
        // Wall sample in a corner, target right at its own pixel.
        let src = SourceSample { x: 0, y: 0, layer: 1 };
        assert!(trace_visibility(&ldi, src, (0.5, 0.5), 0.0, EPS));
    }

    #[test]
    fn occluder_blocks_the_straight_ray() {
        let ldi = wall_and_occluder();
        // Wall sample behind the occluder, focal plane at the front: the
        // ray from (4,4,wall) to its own pixel passes depth 2 mm at the
        // occluder pixel.
        let src = SourceSample { x: 4, y: 4, layer: 1 };
        assert!(!trace_visibility(&ldi, src, (4.5, 4.5), 0.0, EPS));
    }

    #[test]
    fn ray_to_the_side_misses_the_occluder() {
        let ldi = wall_and_occluder();
        let src = SourceSample { x: 4, y: 4, layer: 1 };
        // Aim far to the side: by the time the ray crosses other pixels
        // its depth is far from the occluder depth.
        assert!(trace_visibility(&ldi, src, (8.5, 4.5), 0.0, EPS));
    }

    #[test]
    fn source_sample_never_blocks_itself() {
        let n = 9;
        let layer = LdiLayer::dense(vec![[1.0; 3]; n], vec![2e-3; n]);
        let ldi = LayeredDepthImage::new(3, 3, vec![layer]).unwrap();
        let src = SourceSample { x: 1, y: 1, layer: 0 };
        assert!(trace_visibility(&ldi, src, (1.5, 1.5), 0.0, EPS));
    }

    #[test]
    fn coplanar_neighbors_do_not_block() {
        // Samples at the same depth as the source are excluded by the
        // source-depth tolerance, even along long rays.
        let n = 81;
        let layer = LdiLayer::dense(vec![[1.0; 3]; n], vec![3e-3; n]);
        let ldi = LayeredDepthImage::new(9, 9, vec![layer]).unwrap();
        let src = SourceSample { x: 0, y: 0, layer: 0 };
        assert!(trace_visibility(&ldi, src, (8.5, 8.5), 0.0, EPS));
    }

    #[test]
    fn occlusion_respects_plane_side() {
        let ldi = wall_and_occluder();
        // Looking from the wall toward a plane *behind* the wall, the
        // occluder in front is outside the depth interval.
        let src = SourceSample { x: 4, y: 4, layer: 1 };
        assert!(trace_visibility(&ldi, src, (4.5, 4.5), 6e-3, EPS));
    }

    #[test]
    fn shadow_boundary_follows_similar_triangles() {
        // Occluder at depth 2 mm halfway between a wall sample at 4 mm
        // and the plane at 0: the shadow on the plane is the occluder
        // footprint magnified 2x about the source.
        let ldi = wall_and_occluder();
        let src = SourceSample { x: 4, y: 4, layer: 1 };
        // A ray aimed at target offset `2*o` crosses the occluder depth
        // at offset `o`, so the shadow of the occluder pixel (half-width
        // one pixel about the source) ends at target offset 1.
        let blocked = trace_visibility(&ldi, src, (4.5 + 0.8, 4.5), 0.0, EPS);
        let visible = trace_visibility(&ldi, src, (4.5 + 1.2, 4.5), 0.0, EPS);
        assert!(!blocked);
        assert!(visible);
    }
}

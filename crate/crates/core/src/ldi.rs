//! Layered depth images: per-pixel stacks of colored surface samples.
//!
//! Each pixel column holds zero or more valid samples ordered front to
//! back by strictly increasing depth, so one image can carry surfaces
//! that occlude each other. Depths stay unquantized floating point; they
//! are never snapped to the focal-plane grid.

use crate::error::{Error, Result};

/// One depth layer: per-pixel color, depth, and validity.
#[derive(Debug, Clone)]
pub struct LdiLayer {
    color: Vec<[f64; 3]>,
    depth: Vec<f64>,
    valid: Vec<bool>,
}

impl LdiLayer {
    pub fn new(color: Vec<[f64; 3]>, depth: Vec<f64>, valid: Vec<bool>) -> Self {
        LdiLayer { color, depth, valid }
    }

    /// A fully valid layer.
    pub fn dense(color: Vec<[f64; 3]>, depth: Vec<f64>) -> Self {
        let n = depth.len();
        LdiLayer { color, depth, valid: vec![true; n] }
    }
}

/// A scene sample drawn from one LDI pixel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointSample {
    pub x: usize,
    pub y: usize,
    pub layer: usize,
    pub depth: f64,
    pub color: [f64; 3],
}

/// A validated layered depth image.
#[derive(Debug, Clone)]
pub struct LayeredDepthImage {
    width: usize,
    height: usize,
    layers: Vec<LdiLayer>,
}

impl LayeredDepthImage {
    pub fn new(width: usize, height: usize, layers: Vec<LdiLayer>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("LDI dimensions must be nonzero"));
        }
        if layers.is_empty() {
            return Err(Error::invalid("LDI needs at least one layer"));
        }
        let n = width * height;
        for (li, layer) in layers.iter().enumerate() {
            if layer.color.len() != n || layer.depth.len() != n || layer.valid.len() != n {
                return Err(Error::invalid(format!(
                    "layer {li} arrays do not match {width}x{height}"
                )));
            }
        }
        let mut any_valid = false;
        for i in 0..n {
            let mut prev: Option<f64> = None;
            for (li, layer) in layers.iter().enumerate() {
                if !layer.valid[i] {
                    continue;
                }
                any_valid = true;
                let d = layer.depth[i];
                if !d.is_finite() {
                    return Err(Error::non_finite(format!(
                        "layer {li} depth at pixel {i} is not finite"
                    )));
                }
                if layer.color[i].iter().any(|c| !c.is_finite() || *c < 0.0) {
                    return Err(Error::invalid(format!(
                        "layer {li} color at pixel {i} must be finite and non-negative"
                    )));
                }
                if let Some(p) = prev {
                    if d <= p {
                        return Err(Error::invalid(format!(
                            "depths at pixel {i} must be strictly increasing across layers"
                        )));
                    }
                }
                prev = Some(d);
            }
        }
        if !any_valid {
            return Err(Error::invalid("LDI has no valid samples"));
        }
        Ok(LayeredDepthImage { width, height, layers })
    }

    /// Wraps a single dense RGB-D image as an LDI with one layer.
    pub fn from_rgbd(
        width: usize,
        height: usize,
        color: Vec<[f64; 3]>,
        depth: Vec<f64>,
    ) -> Result<Self> {
        Self::new(width, height, vec![LdiLayer::dense(color, depth)])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn layer_count(&self) -> usize {
        self.layers.len()
    }

    pub fn is_valid(&self, x: usize, y: usize, layer: usize) -> bool {
        self.layers[layer].valid[y * self.width + x]
    }

    pub fn depth(&self, x: usize, y: usize, layer: usize) -> f64 {
        self.layers[layer].depth[y * self.width + x]
    }

    pub fn color(&self, x: usize, y: usize, layer: usize) -> [f64; 3] {
        self.layers[layer].color[y * self.width + x]
    }

    /// All valid samples in deterministic order: layer-major, then
    /// row-major within the layer.
    pub fn points(&self) -> Vec<PointSample> {
        let mut out = Vec::new();
        for (li, layer) in self.layers.iter().enumerate() {
            for y in 0..self.height {
                for x in 0..self.width {
                    let i = y * self.width + x;
                    if layer.valid[i] {
                        out.push(PointSample {
                            x,
                            y,
                            layer: li,
                            depth: layer.depth[i],
                            color: layer.color[i],
                        });
                    }
                }
            }
        }
        out
    }

    /// Minimum and maximum depth over all valid samples.
    pub fn depth_bounds(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for layer in &self.layers {
            for (i, &v) in layer.valid.iter().enumerate() {
                if v {
                    lo = lo.min(layer.depth[i]);
                    hi = hi.max(layer.depth[i]);
                }
            }
        }
        (lo, hi)
    }

    /// Sum of sample intensities per channel.
    pub fn total_intensity(&self) -> [f64; 3] {
        let mut sum = [0.0; 3];
        for p in self.points() {
            for c in 0..3 {
                sum[c] += p.color[c];
            }
        }
        sum
    }
}

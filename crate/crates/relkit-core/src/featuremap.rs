//! Per-time-step context windows, temporal filtering, and the tile grid that
//! maps a filtered feature map onto graph nodes.

use crate::numerics::tensor::Tensor;
use crate::numerics::Scalar;
use crate::{Error, Result};

/// A sequence of feature columns c_1..c_T, all of dimension `dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSequence<F> {
    dim: usize,
    frames: Vec<Vec<F>>,
    pub frame_width_ms: f64,
    pub frame_stride_ms: f64,
}

impl<F: Scalar> FeatureSequence<F> {
    pub fn new(dim: usize, frames: Vec<Vec<F>>) -> Result<Self> {
        if frames.is_empty() {
            return Err(Error::Config("feature sequence must have T >= 1".into()));
        }
        for (i, f) in frames.iter().enumerate() {
            if f.len() != dim {
                return Err(Error::shape(format!("feature column {i}"), dim, f.len()));
            }
        }
        Ok(FeatureSequence {
            dim,
            frames,
            frame_width_ms: 25.0,
            frame_stride_ms: 20.0,
        })
    }

    pub fn with_frame_geometry(mut self, width_ms: f64, stride_ms: f64) -> Self {
        self.frame_width_ms = width_ms;
        self.frame_stride_ms = stride_ms;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frame(&self, t: usize) -> &[F] {
        &self.frames[t]
    }

    pub fn frames(&self) -> &[Vec<F>] {
        &self.frames
    }

    /// Local-context feature map ending at 0-based time step `t`: columns
    /// `t-w+1 ..= t` of the sequence, with out-of-range columns exactly zero.
    pub fn feature_map(&self, t: usize, w: usize) -> Result<FeatureMap<F>> {
        if t >= self.frames.len() {
            return Err(Error::Index {
                what: "time step".into(),
                got: t.to_string(),
                range: format!("0..{}", self.frames.len()),
            });
        }
        if w == 0 {
            return Err(Error::Config("window width must be >= 1".into()));
        }
        let d = self.dim;
        let mut values = vec![F::zero(); d * w];
        for j in 0..w {
            let src = t as isize - (w as isize - 1) + j as isize;
            if src >= 0 {
                let col = &self.frames[src as usize];
                for row in 0..d {
                    values[row * w + j] = col[row];
                }
            }
        }
        Ok(FeatureMap {
            matrix: Tensor::new(vec![d, w], values).unwrap(),
            origin: t,
        })
    }
}

/// One time step's D_c x w context window.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap<F> {
    pub matrix: Tensor<F>,
    /// 0-based index of the last (current) column in the source sequence.
    pub origin: usize,
}

impl<F: Scalar> FeatureMap<F> {
    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn width(&self) -> usize {
        self.matrix.cols()
    }

    /// Flattened row-major values (the input layout of the edge networks).
    pub fn flat(&self) -> &[F] {
        self.matrix.values()
    }
}

/// Temporal filter geometry for the smoothing/sub-sampling operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FilterSpec {
    pub kernel_width: usize,
    pub stride: usize,
}

impl FilterSpec {
    pub fn new(kernel_width: usize, stride: usize) -> Result<Self> {
        if kernel_width == 0 || stride == 0 {
            return Err(Error::Config("kernel width and stride must be >= 1".into()));
        }
        Ok(FilterSpec {
            kernel_width,
            stride,
        })
    }

    /// Output width floor((w - kernel) / stride) + 1.
    pub fn output_width(&self, input_width: usize) -> Result<usize> {
        if self.kernel_width > input_width {
            return Err(Error::Config(format!(
                "kernel width {} exceeds window width {}",
                self.kernel_width, input_width
            )));
        }
        Ok((input_width - self.kernel_width) / self.stride + 1)
    }
}

/// Depthwise temporal convolution on plain values: one kernel per feature
/// row, shared across output positions. Used by the non-differentiating
/// paths and as the reference for the tape op.
pub fn apply_filter<F: Scalar>(
    map: &Tensor<F>,
    weights: &Tensor<F>,
    spec: FilterSpec,
) -> Result<Tensor<F>> {
    let (d, w) = (map.rows(), map.cols());
    if weights.rows() != d || weights.cols() != spec.kernel_width {
        return Err(Error::shape(
            "filter weights",
            format!("[{d}, {}]", spec.kernel_width),
            format!("[{}, {}]", weights.rows(), weights.cols()),
        ));
    }
    let w_out = spec.output_width(w)?;
    let mut out = vec![F::zero(); d * w_out];
    for row in 0..d {
        for o in 0..w_out {
            let mut acc = F::zero();
            for j in 0..spec.kernel_width {
                acc += weights.at(row, j) * map.at(row, o * spec.stride + j);
            }
            out[row * w_out + o] = acc;
        }
    }
    Tensor::new(vec![d, w_out], out)
}

/// Tiling resolutions: `time` tiles along the filtered width, `freq` tiles
/// along the feature dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Resolution {
    pub time: usize,
    pub freq: usize,
}

impl Resolution {
    pub fn new(time: usize, freq: usize) -> Self {
        Resolution { time, freq }
    }

    pub fn node_count(&self) -> usize {
        self.time * self.freq
    }
}

/// The tile grid over a filtered map, with tiles in frequency-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeGrid<F> {
    pub tiles: Vec<Tensor<F>>,
    pub resolution: Resolution,
    pub tile_rows: usize,
    pub tile_cols: usize,
}

impl<F: Scalar> NodeGrid<F> {
    pub fn node_count(&self) -> usize {
        self.tiles.len()
    }

    /// Feature vector of one node: the flattened tile.
    pub fn node_features(&self, node: usize) -> &[F] {
        self.tiles[node].values()
    }

    pub fn node_dim(&self) -> usize {
        self.tile_rows * self.tile_cols
    }

    /// Rebuild the filtered map from the tiles (inverse of partitioning).
    pub fn reassemble(&self) -> Tensor<F> {
        let d = self.tile_rows * self.resolution.freq;
        let w = self.tile_cols * self.resolution.time;
        let mut out = vec![F::zero(); d * w];
        for (node, tile) in self.tiles.iter().enumerate() {
            let f = node / self.resolution.time;
            let t = node % self.resolution.time;
            for r in 0..self.tile_rows {
                for c in 0..self.tile_cols {
                    out[(f * self.tile_rows + r) * w + t * self.tile_cols + c] = tile.at(r, c);
                }
            }
        }
        Tensor::new(vec![d, w], out).unwrap()
    }
}

/// Check divisibility and return the tile dimensions (rows, cols).
pub fn tile_dims(d_c: usize, w_check: usize, res: Resolution) -> Result<(usize, usize)> {
    if res.freq == 0 || res.time == 0 {
        return Err(Error::Config("resolutions must be >= 1".into()));
    }
    if !d_c.is_multiple_of(res.freq) {
        return Err(Error::Config(format!(
            "frequency resolution {} does not divide feature dimension {d_c}",
            res.freq
        )));
    }
    if !w_check.is_multiple_of(res.time) {
        return Err(Error::Config(format!(
            "time resolution {} does not divide filtered width {w_check}",
            res.time
        )));
    }
    Ok((d_c / res.freq, w_check / res.time))
}

/// Row-major flat indices (into a [d_c, w_check] matrix) of every tile, in
/// frequency-major node order; each tile's indices are row-major.
pub fn tile_indices(d_c: usize, w_check: usize, res: Resolution) -> Result<Vec<Vec<usize>>> {
    let (tile_rows, tile_cols) = tile_dims(d_c, w_check, res)?;
    let mut nodes = Vec::with_capacity(res.node_count());
    for f in 0..res.freq {
        for t in 0..res.time {
            let mut idx = Vec::with_capacity(tile_rows * tile_cols);
            for r in 0..tile_rows {
                for c in 0..tile_cols {
                    idx.push((f * tile_rows + r) * w_check + t * tile_cols + c);
                }
            }
            nodes.push(idx);
        }
    }
    Ok(nodes)
}

/// Partition a filtered map into the node grid.
pub fn partition_grid<F: Scalar>(filtered: &Tensor<F>, res: Resolution) -> Result<NodeGrid<F>> {
    let (d_c, w_check) = (filtered.rows(), filtered.cols());
    let (tile_rows, tile_cols) = tile_dims(d_c, w_check, res)?;
    let indices = tile_indices(d_c, w_check, res)?;
    let tiles = indices
        .into_iter()
        .map(|idx| {
            let values: Vec<F> = idx.iter().map(|&i| filtered.values()[i]).collect();
            Tensor::new(vec![tile_rows, tile_cols], values).unwrap()
        })
        .collect();
    Ok(NodeGrid {
        tiles,
        resolution: res,
        tile_rows,
        tile_cols,
    })
}

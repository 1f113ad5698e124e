use std::ops::{Deref, DerefMut};

use super::{DenseLayer, LayerGrad};
use crate::error::{Error, Result};

/// All trainable parameters of a layer stack as one flat vector: for each
/// layer in order, the weight matrix row-major followed by the bias.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamVector(pub Vec<f64>);

impl Deref for ParamVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for ParamVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamSlot {
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
}

impl ParamSlot {
    fn len(&self) -> usize {
        self.rows * self.cols + self.rows
    }
}

/// Where each layer lives inside a [`ParamVector`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamLayout {
    pub slots: Vec<ParamSlot>,
}

/// Location of one flat index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamRef {
    Weight { layer: usize, row: usize, col: usize },
    Bias { layer: usize, row: usize },
}

impl ParamLayout {
    pub fn of<'a>(layers: impl IntoIterator<Item = &'a DenseLayer>) -> Self {
        let mut offset = 0;
        let slots = layers
            .into_iter()
            .map(|l| {
                let slot = ParamSlot {
                    offset,
                    rows: l.output_dim(),
                    cols: l.input_dim(),
                };
                offset += slot.len();
                slot
            })
            .collect();
        ParamLayout { slots }
    }

    pub fn len(&self) -> usize {
        self.slots.last().map_or(0, |s| s.offset + s.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn locate(&self, index: usize) -> Option<ParamRef> {
        let layer = self
            .slots
            .iter()
            .position(|s| index >= s.offset && index < s.offset + s.len())?;
        let s = self.slots[layer];
        let local = index - s.offset;
        Some(if local < s.rows * s.cols {
            ParamRef::Weight {
                layer,
                row: local / s.cols,
                col: local % s.cols,
            }
        } else {
            ParamRef::Bias {
                layer,
                row: local - s.rows * s.cols,
            }
        })
    }
}

impl ParamVector {
    pub fn flatten<'a>(layers: impl IntoIterator<Item = &'a DenseLayer>) -> Self {
        let mut out = Vec::new();
        for l in layers {
            out.extend(l.weights.iter().copied());
            out.extend(l.bias.iter().copied());
        }
        ParamVector(out)
    }

    pub fn flatten_grads<'a>(grads: impl IntoIterator<Item = &'a LayerGrad>) -> Self {
        let mut out = Vec::new();
        for g in grads {
            out.extend(g.weights.iter().copied());
            out.extend(g.bias.iter().copied());
        }
        ParamVector(out)
    }

    /// Write the flat values back into `layers`.
    pub fn unflatten_into<'a>(
        &self,
        layers: impl IntoIterator<Item = &'a mut DenseLayer>,
    ) -> Result<()> {
        let mut pos = 0;
        for l in layers {
            let need = l.param_count();
            let chunk = self.0.get(pos..pos + need).ok_or_else(|| {
                Error::Shape(format!(
                    "parameter vector of length {} is too short",
                    self.0.len()
                ))
            })?;
            let nw = l.weights.len();
            for (dst, src) in l.weights.iter_mut().zip(&chunk[..nw]) {
                *dst = *src;
            }
            for (dst, src) in l.bias.iter_mut().zip(&chunk[nw..]) {
                *dst = *src;
            }
            pos += need;
        }
        if pos != self.0.len() {
            return Err(Error::Shape(format!(
                "parameter vector has {} values, layers take {pos}",
                self.0.len()
            )));
        }
        Ok(())
    }
}

/// Little-endian IEEE-754 bytes of `values`.
pub fn encode_params_le(values: &[f64]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

pub fn decode_params_le(bytes: &[u8]) -> Result<Vec<f64>> {
    if bytes.len() % 8 != 0 {
        return Err(Error::ModelFormat(format!(
            "parameter block of {} bytes is not a whole number of f64 values",
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}

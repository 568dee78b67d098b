use crate::error::{Error, Result};
use crate::norm::{lp_distance_slices, PNorm};

/// A `(channels, height, width)` image stored as a flat `f32` buffer.
///
/// Pixel data normally lives in `[0, 1]`; [`ImageTensor::check_unit_range`]
/// enforces that on ingest. Corrupted images produced without clamping may
/// leave the interval.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageTensor {
    data: Vec<f32>,
    shape: [usize; 3],
}

impl ImageTensor {
    pub fn new(shape: [usize; 3], data: Vec<f32>) -> Result<Self> {
        let expected = shape.iter().product::<usize>();
        if data.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                actual: data.len(),
            });
        }
        Ok(Self { data, shape })
    }

    pub fn filled(shape: [usize; 3], value: f32) -> Self {
        let len = shape.iter().product();
        Self {
            data: vec![value; len],
            shape,
        }
    }

    pub fn shape(&self) -> [usize; 3] {
        self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn check_unit_range(&self) -> Result<()> {
        match self
            .data
            .iter()
            .position(|v| !(0.0..=1.0).contains(v))
        {
            None => Ok(()),
            Some(i) => Err(Error::Invariant {
                field: "image".into(),
                message: format!("component {i} = {} lies outside [0, 1]", self.data[i]),
            }),
        }
    }
}

/// Distance between two images under `p` (see [`lp_distance_slices`]).
pub fn lp_distance(a: &ImageTensor, b: &ImageTensor, p: PNorm) -> Result<f64> {
    lp_distance_slices(&a.data, &b.data, p)
}

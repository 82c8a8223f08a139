//! Binary container for 2-D and 3-D `f32` tensors.
//!
//! Layout (all little-endian):
//!
//! | bytes        | field                     |
//! |--------------|---------------------------|
//! | 0..4         | magic `"AWET"`            |
//! | 4..8         | version, `u32` (= 1)      |
//! | 8..12        | ndims, `u32` (2 or 3)     |
//! | 12..12+8n    | dims, `u64` each          |
//! | rest         | payload, `f32` row-major  |

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"AWET";
pub const VERSION: u32 = 1;

/// A dense row-major `f32` tensor with 2 or 3 dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    dims: Vec<usize>,
    data: Vec<f32>,
}

fn check_dims(dims: &[usize]) -> Result<usize> {
    if !(2..=3).contains(&dims.len()) {
        return Err(Error::Shape(format!(
            "tensor must have 2 or 3 dimensions, got {}",
            dims.len()
        )));
    }
    if dims.contains(&0) {
        return Err(Error::Shape(format!("all dims must be >= 1, got {dims:?}")));
    }
    dims.iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::Shape(format!("dims {dims:?} overflow")))
}

impl Tensor {
    pub fn new(dims: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        let expected = check_dims(&dims)?;
        if data.len() != expected {
            return Err(Error::Shape(format!(
                "dims {dims:?} require {expected} values, got {}",
                data.len()
            )));
        }
        Ok(Tensor { dims, data })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_parts(self) -> (Vec<usize>, Vec<f32>) {
        (self.dims, self.data)
    }

    /// Row `i` of a 2-D tensor.
    pub fn row(&self, i: usize) -> &[f32] {
        assert_eq!(self.dims.len(), 2, "row() needs a 2-D tensor");
        let d = self.dims[1];
        &self.data[i * d..(i + 1) * d]
    }

    /// Frame `frame` of layer `layer` in a 3-D `[layers, frames, dim]` tensor.
    pub fn frame(&self, layer: usize, frame: usize) -> &[f32] {
        assert_eq!(self.dims.len(), 3, "frame() needs a 3-D tensor");
        let (nf, d) = (self.dims[1], self.dims[2]);
        let start = (layer * nf + frame) * d;
        &self.data[start..start + d]
    }

    /// All frames of one layer of a 3-D tensor, as a flat `[frames * dim]` slice.
    pub fn layer(&self, layer: usize) -> &[f32] {
        assert_eq!(self.dims.len(), 3, "layer() needs a 3-D tensor");
        let n = self.dims[1] * self.dims[2];
        &self.data[layer * n..(layer + 1) * n]
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + 8 * self.dims.len() + 4 * self.data.len());
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.dims.len() as u32).to_le_bytes());
        for &d in &self.dims {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for &v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let header = bytes
            .get(..12)
            .ok_or_else(|| Error::Format(format!("file too short for header ({} bytes)", bytes.len())))?;
        if header[..4] != MAGIC {
            return Err(Error::Format(format!("bad magic {:?}", &header[..4])));
        }
        let version = u32::from_le_bytes(header[4..8].try_into().unwrap());
        if version != VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let ndims = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
        if !(2..=3).contains(&ndims) {
            return Err(Error::Format(format!("ndims must be 2 or 3, got {ndims}")));
        }
        let dims_end = 12 + 8 * ndims;
        let dim_bytes = bytes
            .get(12..dims_end)
            .ok_or_else(|| Error::Format("truncated dims".into()))?;
        let dims: Vec<usize> = dim_bytes
            .chunks_exact(8)
            .map(|c| u64::from_le_bytes(c.try_into().unwrap()) as usize)
            .collect();
        let n = check_dims(&dims).map_err(|e| Error::Format(e.to_string()))?;
        let payload = &bytes[dims_end..];
        if payload.len() != n * 4 {
            return Err(Error::Format(format!(
                "dims {dims:?} need {} payload bytes, found {}",
                n * 4,
                payload.len()
            )));
        }
        let data = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Tensor { dims, data })
    }
}

/// Writes `data` with shape `dims` to `path`.
pub fn write_tensor(dims: &[usize], data: &[f32], path: impl AsRef<Path>) -> Result<()> {
    let expected = check_dims(dims)?;
    if data.len() != expected {
        return Err(Error::Shape(format!(
            "dims {dims:?} require {expected} values, got {}",
            data.len()
        )));
    }
    let path = path.as_ref();
    let tensor = Tensor {
        dims: dims.to_vec(),
        data: data.to_vec(),
    };
    fs::write(path, tensor.to_bytes()).map_err(|e| Error::io(path, e))
}

pub fn write_tensor_file(tensor: &Tensor, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, tensor.to_bytes()).map_err(|e| Error::io(path, e))
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<Tensor> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Tensor::from_bytes(&bytes).map_err(|e| e.context(path.display().to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn roundtrip_small() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.awet");
        let data = [1.0, -2.5, 3.25, 0.0, f32::MIN_POSITIVE, 7.0];
        write_tensor(&[2, 3], &data, &p).unwrap();
        let t = read_tensor(&p).unwrap();
        assert_eq!(t.dims(), &[2, 3]);
        assert_eq!(t.data(), &data);
    }

    #[test]
    fn length_mismatch_is_shape_error() {
        let dir = tempfile::tempdir().unwrap();
        let err = write_tensor(&[2, 3], &[0.0; 5], dir.path().join("t")).unwrap_err();
        assert!(matches!(err, Error::Shape(_)));
    }

    #[test]
    fn rejects_bad_dims() {
        assert!(matches!(Tensor::new(vec![4], vec![0.0; 4]), Err(Error::Shape(_))));
        assert!(matches!(Tensor::new(vec![2, 0], vec![]), Err(Error::Shape(_))));
        assert!(matches!(
            Tensor::new(vec![1, 1, 1, 1], vec![0.0]),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn roundtrip_full_layer_stack() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("utt.awet");
        let dims = [13, 50, 768];
        let data: Vec<f32> = (0..13 * 50 * 768).map(|i| (i as f32).sin()).collect();
        write_tensor(&dims, &data, &p).unwrap();
        let t = read_tensor(&p).unwrap();
        assert_eq!(t.dims(), &dims);
        assert_eq!(t.data().len(), 499_200);
        assert!(t.data().iter().zip(&data).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn exact_byte_layout() {
        let t = Tensor::new(vec![1, 2], vec![1.0, -0.5]).unwrap();
        let b = t.to_bytes();
        assert_eq!(&b[0..4], b"AWET");
        assert_eq!(&b[4..8], &[1, 0, 0, 0]);
        assert_eq!(&b[8..12], &[2, 0, 0, 0]);
        assert_eq!(&b[12..20], &[1, 0, 0, 0, 0, 0, 0, 0]);
        assert_eq!(&b[20..28], &[2, 0, 0, 0, 0, 0, 0, 0]);
        assert_eq!(&b[28..32], &1.0f32.to_le_bytes());
        assert_eq!(&b[32..36], &(-0.5f32).to_le_bytes());
        assert_eq!(b.len(), 36);
    }

    #[test]
    fn corrupted_magic_is_format_error() {
        let mut b = Tensor::new(vec![2, 2], vec![0.0; 4]).unwrap().to_bytes();
        b[0] = b'X';
        assert!(matches!(Tensor::from_bytes(&b), Err(Error::Format(_))));
    }

    #[test]
    fn truncated_payload_is_format_error() {
        let b = Tensor::new(vec![2, 2], vec![0.0; 4]).unwrap().to_bytes();
        // header for [2,2] followed by only 3 floats
        assert!(matches!(
            Tensor::from_bytes(&b[..b.len() - 4]),
            Err(Error::Format(_))
        ));
        assert!(matches!(Tensor::from_bytes(&b[..10]), Err(Error::Format(_))));
        let mut long = b.clone();
        long.extend_from_slice(&[0, 0, 0, 0]);
        assert!(matches!(Tensor::from_bytes(&long), Err(Error::Format(_))));
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = read_tensor("/nonexistent/dir/t.awet").unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    fn shape_and_data() -> impl Strategy<Value = (Vec<usize>, Vec<f32>)> {
        prop::collection::vec(1usize..6, 2..=3).prop_flat_map(|dims| {
            let n: usize = dims.iter().product();
            (Just(dims), prop::collection::vec(any::<f32>(), n))
        })
    }

    proptest! {
        #[test]
        fn bytes_roundtrip_is_bit_exact((dims, data) in shape_and_data()) {
            let t = Tensor::new(dims.clone(), data.clone()).unwrap();
            let back = Tensor::from_bytes(&t.to_bytes()).unwrap();
            prop_assert_eq!(back.dims(), &dims[..]);
            let same = back.data().iter().zip(&data).all(|(a, b)| a.to_bits() == b.to_bits());
            prop_assert!(same);
        }
    }
}

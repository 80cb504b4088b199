//! Flat binary dump of a discriminator input tensor.
//!
//! Layout: one line of JSON (`{"shape":[3,T,F],"dtype":"f32","order":"C","endian":"little"}`),
//! a `\n`, then `3·T·F` little-endian values in row-major order.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use ndarray::Array3;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    F32,
    F64,
}

impl Dtype {
    pub fn width(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DumpHeader {
    pub shape: [usize; 3],
    pub dtype: Dtype,
    pub order: String,
    pub endian: String,
}

pub fn write_dump(path: &Path, tensor: &Array3<f64>, dtype: Dtype) -> Result<()> {
    let (c, t, f) = tensor.dim();
    let header = DumpHeader {
        shape: [c, t, f],
        dtype,
        order: "C".into(),
        endian: "little".into(),
    };
    let mut buf = serde_json::to_vec(&header)?;
    buf.push(b'\n');
    buf.reserve(tensor.len() * dtype.width());
    // `iter` walks logical (row-major) order regardless of memory layout.
    for v in tensor.iter() {
        match dtype {
            Dtype::F32 => buf.extend_from_slice(&(*v as f32).to_le_bytes()),
            Dtype::F64 => buf.extend_from_slice(&v.to_le_bytes()),
        }
    }
    std::fs::File::create(path)
        .and_then(|mut file| file.write_all(&buf))
        .with_context(|| format!("writing {}", path.display()))
}

pub fn read_dump(path: &Path) -> Result<(DumpHeader, Array3<f64>)> {
    let file = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut reader = BufReader::new(file);
    let mut line = String::new();
    reader.read_line(&mut line)?;
    let header: DumpHeader = serde_json::from_str(line.trim_end()).context("parsing dump header")?;
    ensure!(header.order == "C" && header.endian == "little", "unsupported layout {header:?}");
    let mut body = Vec::new();
    reader.read_to_end(&mut body)?;
    let n: usize = header.shape.iter().product();
    let w = header.dtype.width();
    if body.len() != n * w {
        bail!("payload has {} bytes, header implies {}", body.len(), n * w);
    }
    let values: Vec<f64> = body
        .chunks_exact(w)
        .map(|b| match header.dtype {
            Dtype::F32 => f32::from_le_bytes(b.try_into().expect("4 bytes")) as f64,
            Dtype::F64 => f64::from_le_bytes(b.try_into().expect("8 bytes")),
        })
        .collect();
    let [c, t, f] = header.shape;
    let tensor = Array3::from_shape_vec((c, t, f), values)?;
    Ok((header, tensor))
}

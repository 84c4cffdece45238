//! Flat parameter vectors with named, shaped segments.
//!
//! All trainable state (dense layers, biases, category embedding tables)
//! lives in one `ParamVector` so that federated averaging, Adam updates and
//! checkpointing operate on a single contiguous `f64` buffer.

use std::io::{Read, Write};
use std::sync::Arc;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Ordered list of (name, shape) segments defining a parameter layout.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    segments: Vec<Segment>,
    total: usize,
}

impl Layout {
    pub fn builder() -> LayoutBuilder {
        LayoutBuilder { segments: Vec::new(), total: 0 }
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn total_len(&self) -> usize {
        self.total
    }

    pub fn find(&self, name: &str) -> Option<&Segment> {
        self.segments.iter().find(|s| s.name == name)
    }

    /// Name of the segment that holds flat index `idx`.
    pub fn segment_of(&self, idx: usize) -> Option<&Segment> {
        self.segments.iter().find(|s| idx >= s.offset && idx < s.offset + s.len())
    }
}

pub struct LayoutBuilder {
    segments: Vec<Segment>,
    total: usize,
}

impl LayoutBuilder {
    pub fn add(mut self, name: impl Into<String>, shape: &[usize]) -> Self {
        let name = name.into();
        debug_assert!(self.segments.iter().all(|s| s.name != name), "duplicate segment {name}");
        let len: usize = shape.iter().product();
        self.segments.push(Segment { name, shape: shape.to_vec(), offset: self.total });
        self.total += len;
        self
    }

    pub fn build(self) -> Arc<Layout> {
        Arc::new(Layout { segments: self.segments, total: self.total })
    }
}

/// Flat `f64` parameter vector over a shared [`Layout`].
#[derive(Debug, Clone)]
pub struct ParamVector {
    layout: Arc<Layout>,
    values: Vec<f64>,
}

impl ParamVector {
    pub fn zeros(layout: Arc<Layout>) -> Self {
        let values = vec![0.0; layout.total_len()];
        ParamVector { layout, values }
    }

    pub fn from_values(layout: Arc<Layout>, values: Vec<f64>) -> Result<Self> {
        if values.len() != layout.total_len() {
            return Err(Error::shape(format!(
                "parameter vector length {} does not match layout length {}",
                values.len(),
                layout.total_len()
            )));
        }
        Ok(ParamVector { layout, values })
    }

    pub fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn same_layout(&self, other: &ParamVector) -> bool {
        Arc::ptr_eq(&self.layout, &other.layout) || *self.layout == *other.layout
    }

    /// First segment whose name differs between two layouts, for error reporting.
    pub fn first_layout_divergence(&self, other: &ParamVector) -> Option<String> {
        let a = self.layout.segments();
        let b = other.layout.segments();
        for i in 0..a.len().max(b.len()) {
            match (a.get(i), b.get(i)) {
                (Some(x), Some(y)) if x == y => continue,
                (Some(x), _) => return Some(x.name.clone()),
                (None, Some(y)) => return Some(y.name.clone()),
                (None, None) => unreachable!(),
            }
        }
        None
    }

    pub fn segment(&self, name: &str) -> Result<&[f64]> {
        let seg = self
            .layout
            .find(name)
            .ok_or_else(|| Error::shape(format!("no segment named {name}")))?;
        Ok(&self.values[seg.offset..seg.offset + seg.len()])
    }

    pub fn segment_mut(&mut self, name: &str) -> Result<&mut [f64]> {
        let seg = self
            .layout
            .find(name)
            .cloned()
            .ok_or_else(|| Error::shape(format!("no segment named {name}")))?;
        Ok(&mut self.values[seg.offset..seg.offset + seg.len()])
    }

    /// `self += scale * other`; layouts must match.
    pub fn add_scaled(&mut self, other: &ParamVector, scale: f64) -> Result<()> {
        if !self.same_layout(other) {
            let seg = self.first_layout_divergence(other).unwrap_or_default();
            return Err(Error::shape(format!("layout mismatch at segment {seg}")));
        }
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += scale * b;
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: f64) {
        for v in &mut self.values {
            *v *= factor;
        }
    }

    pub fn bitwise_eq(&self, other: &ParamVector) -> bool {
        self.same_layout(other)
            && self.values.len() == other.values.len()
            && self
                .values
                .iter()
                .zip(&other.values)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }

    /// Serializes layout header plus payload: per segment a name-length,
    /// name bytes, rank and dims, followed by all values as little-endian
    /// 64-bit floats. Round-trips bit-exactly.
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        let segs = self.layout.segments();
        w.write_all(&(segs.len() as u32).to_le_bytes())?;
        for seg in segs {
            let name = seg.name.as_bytes();
            w.write_all(&(name.len() as u32).to_le_bytes())?;
            w.write_all(name)?;
            w.write_all(&(seg.shape.len() as u32).to_le_bytes())?;
            for &d in &seg.shape {
                w.write_all(&(d as u64).to_le_bytes())?;
            }
        }
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let n_segs = read_u32(r)? as usize;
        let mut builder = Layout::builder();
        for _ in 0..n_segs {
            let name_len = read_u32(r)? as usize;
            let mut name = vec![0u8; name_len];
            r.read_exact(&mut name)?;
            let name = String::from_utf8(name)
                .map_err(|_| Error::load("segment name is not valid UTF-8".to_string()))?;
            let rank = read_u32(r)? as usize;
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(read_u64(r)? as usize);
            }
            builder = builder.add(name, &shape);
        }
        let layout = builder.build();
        let mut values = vec![0.0f64; layout.total_len()];
        let mut buf = [0u8; 8];
        for v in &mut values {
            r.read_exact(&mut buf)?;
            *v = f64::from_le_bytes(buf);
        }
        Ok(ParamVector { layout, values })
    }
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

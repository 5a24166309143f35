//! Visual encodings: the SEMF feature-file format and RMAC pooling of
//! convolutional activation maps.
//!
//! SEMF layout (little-endian):
//!
//! ```text
//! magic "SEMF" | version u32 = 1 | count u64 | dim u32
//! count x ( id_len u16 | id utf-8 | dim x f32 )
//! ```
//!
//! Convolutional maps use the same container with version 2 and three
//! dimension fields `C, H, W` in place of `dim`; values are channel-major.

use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::exec::Exec;

pub const MAGIC: &[u8; 4] = b"SEMF";
pub const VERSION_FEATURES: u32 = 1;
pub const VERSION_CONV_MAPS: u32 = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct DenseFeatureVector {
    values: Vec<f64>,
}

impl DenseFeatureVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Argument("feature vector must have dim > 0".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Argument(format!("non-finite feature value at index {i}")));
        }
        Ok(DenseFeatureVector { values })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// Feature vectors keyed by sample id, in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStore {
    dim: usize,
    records: Vec<(String, DenseFeatureVector)>,
    index: HashMap<String, usize>,
}

impl FeatureStore {
    pub fn new(dim: usize) -> Self {
        FeatureStore {
            dim,
            records: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn insert(&mut self, id: impl Into<String>, v: DenseFeatureVector) -> Result<()> {
        let id = id.into();
        if v.dim() != self.dim {
            return Err(Error::Schema(format!(
                "feature `{id}` has dim {}, store dim is {}",
                v.dim(),
                self.dim
            )));
        }
        if id.len() > u16::MAX as usize {
            return Err(Error::Argument(format!("id longer than {} bytes", u16::MAX)));
        }
        if self.index.contains_key(&id) {
            return Err(Error::Conflict(format!("duplicate feature id `{id}`")));
        }
        self.index.insert(id.clone(), self.records.len());
        self.records.push((id, v));
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&DenseFeatureVector> {
        self.index.get(id).map(|&i| &self.records[i].1)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &DenseFeatureVector)> {
        self.records.iter().map(|(id, v)| (id.as_str(), v))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(20 + self.records.len() * (8 + 4 * self.dim));
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION_FEATURES.to_le_bytes());
        out.extend_from_slice(&(self.records.len() as u64).to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        for (id, v) in &self.records {
            write_id(&mut out, id);
            for &x in v.values() {
                out.extend_from_slice(&(x as f32).to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes);
        let version = r.header()?;
        if version != VERSION_FEATURES {
            return Err(Error::Format(format!(
                "unsupported SEMF version {version} (expected {VERSION_FEATURES})"
            )));
        }
        let count = r.u64()?;
        let dim = r.u32()? as usize;
        if dim == 0 {
            return Err(Error::Schema("SEMF dim must be positive".into()));
        }
        let mut store = FeatureStore::new(dim);
        for _ in 0..count {
            let id = r.id()?;
            let values = r.f32s(dim)?;
            let v = DenseFeatureVector::new(values).map_err(|e| Error::Corruption {
                offset: r.pos as u64,
                message: format!("record `{id}`: {e}"),
            })?;
            store.insert(id, v)?;
        }
        if r.pos != bytes.len() {
            return Err(Error::Corruption {
                offset: r.pos as u64,
                message: format!("{} trailing bytes after last record", bytes.len() - r.pos),
            });
        }
        Ok(store)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }
}

/// Reads a SEMF feature file.
pub fn load_feature_file(path: &Path) -> Result<FeatureStore> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    FeatureStore::from_bytes(&bytes)
}

fn write_id(out: &mut Vec<u8>, id: &str) {
    out.extend_from_slice(&(id.len() as u16).to_le_bytes());
    out.extend_from_slice(id.as_bytes());
}

struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        ByteReader { bytes, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Corruption {
                offset: self.pos as u64,
                message: format!(
                    "truncated: needed {n} bytes, {} remain",
                    self.bytes.len() - self.pos
                ),
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn header(&mut self) -> Result<u32> {
        if self.bytes.len() < 8 || &self.bytes[..4] != MAGIC {
            return Err(Error::Format("missing SEMF magic".into()));
        }
        self.pos = 4;
        self.u32()
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn id(&mut self) -> Result<String> {
        let start = self.pos;
        let len = self.u16()? as usize;
        let raw = self.take(len)?;
        String::from_utf8(raw.to_vec()).map_err(|_| Error::Corruption {
            offset: start as u64,
            message: "record id is not valid UTF-8".into(),
        })
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n * 4)?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect())
    }
}

/// A `C x H x W` activation map, channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvFeatureMap {
    channels: usize,
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl ConvFeatureMap {
    pub fn new(channels: usize, height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(Error::Argument("conv map dimensions must be >= 1".into()));
        }
        if values.len() != channels * height * width {
            return Err(Error::Argument(format!(
                "conv map needs {} values, got {}",
                channels * height * width,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Argument("conv map contains non-finite values".into()));
        }
        Ok(ConvFeatureMap {
            channels,
            height,
            width,
            values,
        })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn at(&self, c: usize, y: usize, x: usize) -> f64 {
        self.values[(c * self.height + y) * self.width + x]
    }
}

/// Writes conv maps (all sharing one shape) in the SEMF version-2 layout.
pub fn conv_maps_to_bytes(maps: &[(String, ConvFeatureMap)]) -> Result<Vec<u8>> {
    let (c, h, w) = match maps.first() {
        Some((_, m)) => (m.channels, m.height, m.width),
        None => return Err(Error::Argument("no conv maps to write".into())),
    };
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION_CONV_MAPS.to_le_bytes());
    out.extend_from_slice(&(maps.len() as u64).to_le_bytes());
    for d in [c, h, w] {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for (id, m) in maps {
        if (m.channels, m.height, m.width) != (c, h, w) {
            return Err(Error::Schema(format!("conv map `{id}` has a different shape")));
        }
        write_id(&mut out, id);
        for &v in &m.values {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    Ok(out)
}

pub fn conv_maps_from_bytes(bytes: &[u8]) -> Result<Vec<(String, ConvFeatureMap)>> {
    let mut r = ByteReader::new(bytes);
    let version = r.header()?;
    if version != VERSION_CONV_MAPS {
        return Err(Error::Format(format!(
            "unsupported conv-map version {version} (expected {VERSION_CONV_MAPS})"
        )));
    }
    let count = r.u64()?;
    let (c, h, w) = (r.u32()? as usize, r.u32()? as usize, r.u32()? as usize);
    let mut maps = Vec::new();
    for _ in 0..count {
        let id = r.id()?;
        let offset = r.pos as u64;
        let values = r.f32s(c * h * w)?;
        let map = ConvFeatureMap::new(c, h, w, values).map_err(|e| Error::Corruption {
            offset,
            message: e.to_string(),
        })?;
        maps.push((id, map));
    }
    if r.pos != bytes.len() {
        return Err(Error::Corruption {
            offset: r.pos as u64,
            message: "trailing bytes after last conv map".into(),
        });
    }
    Ok(maps)
}

pub fn load_conv_maps(path: &Path) -> Result<Vec<(String, ConvFeatureMap)>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    conv_maps_from_bytes(&bytes)
}

/// Axis-aligned square region of a conv map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Region {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

/// Start offsets of windows of size `side` along an axis of length `len`,
/// spaced so consecutive windows overlap by at least 40% of `side`.
fn axis_starts(len: usize, side: usize) -> Vec<usize> {
    if side >= len {
        return vec![0];
    }
    let span = len - side;
    let max_step = (3 * side / 5).max(1);
    let n_steps = span.div_ceil(max_step);
    (0..=n_steps).map(|i| i * span / n_steps).collect()
}

/// Multi-scale RMAC grid: at level `l` the square side is
/// `ceil(2 * min(W, H) / (l + 1))`.
pub fn rmac_regions(width: usize, height: usize, levels: usize) -> Vec<Region> {
    let mut out: Vec<Region> = Vec::new();
    if width == 0 || height == 0 {
        return out;
    }
    let short = width.min(height);
    for l in 1..=levels {
        let side = (2 * short).div_ceil(l + 1);
        let w = side.min(width);
        let h = side.min(height);
        for y in axis_starts(height, h) {
            for x in axis_starts(width, w) {
                let r = Region {
                    x,
                    y,
                    width: w,
                    height: h,
                };
                if !out.contains(&r) {
                    out.push(r);
                }
            }
        }
    }
    out
}

/// RMAC descriptor. `degenerate` is set when every region max is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct RmacDescriptor {
    pub values: Vec<f64>,
    pub degenerate: bool,
}

fn normalize_in_place(v: &mut [f64]) -> bool {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
        true
    } else {
        false
    }
}

/// Region-wise channel max, ℓ2-normalized per region, summed, ℓ2-normalized.
pub fn rmac_pool(map: &ConvFeatureMap, levels: usize) -> RmacDescriptor {
    let c = map.channels;
    let mut acc = vec![0.0; c];
    let mut region_max = vec![0.0; c];
    for r in rmac_regions(map.width, map.height, levels) {
        for (ch, slot) in region_max.iter_mut().enumerate() {
            let mut m = f64::NEG_INFINITY;
            for y in r.y..r.y + r.height {
                let row = (ch * map.height + y) * map.width;
                for &v in &map.values[row + r.x..row + r.x + r.width] {
                    m = m.max(v);
                }
            }
            *slot = m;
        }
        if normalize_in_place(&mut region_max) {
            acc.iter_mut().zip(&region_max).for_each(|(a, v)| *a += v);
        }
    }
    let ok = normalize_in_place(&mut acc);
    RmacDescriptor {
        values: acc,
        degenerate: !ok,
    }
}

/// Pools a batch of maps into a feature store.
pub fn rmac_store(maps: &[(String, ConvFeatureMap)], levels: usize, exec: Exec) -> Result<FeatureStore> {
    let dim = maps.first().map(|(_, m)| m.channels).unwrap_or(1);
    let pooled = exec.map_slice(maps, |(_, m)| rmac_pool(m, levels));
    let mut store = FeatureStore::new(dim);
    for ((id, _), d) in maps.iter().zip(pooled) {
        store.insert(id.clone(), DenseFeatureVector::new(d.values)?)?;
    }
    Ok(store)
}

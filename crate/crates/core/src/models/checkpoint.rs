//! Versioned binary checkpoints.
//!
//! ```text
//! magic "SEMM" | version u32 = 1
//! header: count u32, then (key u16-len utf-8, value u16-len utf-8) pairs
//! matrices: count u32, then (name u16-len utf-8, rows u32, cols u32, rows*cols f64)
//! ```
//! All integers and floats little-endian. Vectors are stored as `1 x n` matrices.

use std::collections::BTreeMap;
use std::path::Path;

use super::cca::CcaModel;
use super::head::ProjectionHead;
use super::network::{Classifiers, JointNetwork, TextArch, TextTower};
use super::{AmdModel, CmlModel, JointModel};
use crate::error::{Error, Result};
use crate::numeric::{Linear, Matrix};

const MAGIC: &[u8; 4] = b"SEMM";
const VERSION: u32 = 1;

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u16).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

fn put_matrix(out: &mut Vec<u8>, name: &str, m: &Matrix) {
    put_str(out, name);
    out.extend_from_slice(&(m.rows() as u32).to_le_bytes());
    out.extend_from_slice(&(m.cols() as u32).to_le_bytes());
    for v in m.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

fn row(v: &[f64]) -> Matrix {
    Matrix::from_vec(1, v.len(), v.to_vec()).expect("row vector")
}

fn network_layers(net: &JointNetwork) -> Vec<(&'static str, &Linear)> {
    let mut out = vec![("vis", &net.vis.linear)];
    match &net.text {
        TextTower::Bow { head } => out.push(("text", &head.linear)),
        TextTower::Mlp {
            comment,
            title,
            head,
        } => out.extend([
            ("comment", &comment.linear),
            ("title", &title.linear),
            ("text", &head.linear),
        ]),
    }
    if let Some(c) = &net.classifiers {
        out.extend([("cls_text", &c.text), ("cls_vis", &c.vis)]);
    }
    out
}

pub fn write_checkpoint(model: &JointModel) -> Vec<u8> {
    let mut header: Vec<(&str, String)> = vec![("kind", model.kind().to_string())];
    let mut mats: Vec<(String, Matrix)> = Vec::new();
    match model {
        JointModel::Cca(m) => {
            header.push(("dim", m.dim().to_string()));
            mats.push(("mean_x".into(), row(&m.mean_x)));
            mats.push(("mean_y".into(), row(&m.mean_y)));
            mats.push(("wx".into(), m.wx.clone()));
            mats.push(("wy".into(), m.wy.clone()));
            mats.push(("correlations".into(), row(&m.correlations)));
        }
        JointModel::Cml(_) | JointModel::Amd(_) => {
            let (net, margin) = match model {
                JointModel::Cml(m) => (&m.network, m.margin),
                JointModel::Amd(m) => (&m.base.network, m.base.margin),
                JointModel::Cca(_) => unreachable!(),
            };
            header.push(("arch", net.arch().name().to_string()));
            header.push(("dim", net.dim().to_string()));
            header.push(("margin", margin.to_string()));
            if let JointModel::Amd(m) = model {
                header.push(("alpha", m.alpha.to_string()));
                header.push(("attribute", m.attribute.name().to_string()));
            }
            for (name, l) in network_layers(net) {
                mats.push((format!("{name}.weight"), l.weight.clone()));
                mats.push((format!("{name}.bias"), row(&l.bias)));
            }
        }
    }

    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    for (k, v) in &header {
        put_str(&mut out, k);
        put_str(&mut out, v);
    }
    out.extend_from_slice(&(mats.len() as u32).to_le_bytes());
    for (name, m) in &mats {
        put_matrix(&mut out, name, m);
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Corruption {
                offset: self.pos as u64,
                message: "truncated checkpoint".into(),
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String> {
        let offset = self.pos as u64;
        let n = self.u16()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| Error::Corruption {
            offset,
            message: "string is not valid UTF-8".into(),
        })
    }
}

struct Parts {
    header: BTreeMap<String, String>,
    mats: BTreeMap<String, Matrix>,
}

impl Parts {
    fn key(&self, k: &str) -> Result<&str> {
        self.header
            .get(k)
            .map(String::as_str)
            .ok_or_else(|| Error::Format(format!("checkpoint header lacks `{k}`")))
    }

    fn float(&self, k: &str) -> Result<f64> {
        self.key(k)?
            .parse()
            .map_err(|_| Error::Format(format!("checkpoint `{k}` is not a number")))
    }

    fn take(&mut self, name: &str) -> Result<Matrix> {
        self.mats
            .remove(name)
            .ok_or_else(|| Error::Format(format!("checkpoint lacks matrix `{name}`")))
    }

    fn vector(&mut self, name: &str) -> Result<Vec<f64>> {
        Ok(self.take(name)?.as_slice().to_vec())
    }

    fn linear(&mut self, name: &str) -> Result<Linear> {
        let w = self.take(&format!("{name}.weight"))?;
        let b = self.vector(&format!("{name}.bias"))?;
        Linear::new(w, b).map_err(|e| Error::Format(format!("layer `{name}`: {e}")))
    }

    fn head(&mut self, name: &str) -> Result<ProjectionHead> {
        Ok(ProjectionHead::new(self.linear(name)?))
    }
}

pub fn read_checkpoint(bytes: &[u8]) -> Result<JointModel> {
    if bytes.len() < 8 || &bytes[..4] != MAGIC {
        return Err(Error::Format("not a model checkpoint (bad magic)".into()));
    }
    let mut r = Reader { bytes, pos: 4 };
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let mut header = BTreeMap::new();
    for _ in 0..r.u32()? {
        let k = r.string()?;
        let v = r.string()?;
        header.insert(k, v);
    }
    let mut mats = BTreeMap::new();
    for _ in 0..r.u32()? {
        let name = r.string()?;
        let rows = r.u32()? as usize;
        let cols = r.u32()? as usize;
        let offset = r.pos as u64;
        let raw = r.take(rows * cols * 8)?;
        let values = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let m = Matrix::from_vec(rows, cols, values).map_err(|e| Error::Corruption {
            offset,
            message: format!("matrix `{name}`: {e}"),
        })?;
        mats.insert(name, m);
    }
    if r.pos != bytes.len() {
        return Err(Error::Corruption {
            offset: r.pos as u64,
            message: "trailing bytes in checkpoint".into(),
        });
    }
    let mut p = Parts { header, mats };

    let kind = p.key("kind")?.to_string();
    match kind.as_str() {
        "cca" => Ok(JointModel::Cca(CcaModel {
            mean_x: p.vector("mean_x")?,
            mean_y: p.vector("mean_y")?,
            wx: p.take("wx")?,
            wy: p.take("wy")?,
            correlations: p.vector("correlations")?,
        })),
        "cml" | "amd" => {
            let arch: TextArch = p.key("arch")?.parse()?;
            let margin = p.float("margin")?;
            let vis = p.head("vis")?;
            let text = match arch {
                TextArch::Bow => TextTower::Bow { head: p.head("text")? },
                TextArch::Mlp => TextTower::Mlp {
                    comment: p.head("comment")?,
                    title: p.head("title")?,
                    head: p.head("text")?,
                },
            };
            let classifiers = if kind == "amd" {
                Some(Classifiers {
                    text: p.linear("cls_text")?,
                    vis: p.linear("cls_vis")?,
                })
            } else {
                None
            };
            let network = JointNetwork {
                vis,
                text,
                classifiers,
            };
            let base = CmlModel { network, margin };
            if kind == "cml" {
                Ok(JointModel::Cml(base))
            } else {
                Ok(JointModel::Amd(AmdModel {
                    base,
                    alpha: p.float("alpha")?,
                    attribute: p.key("attribute")?.parse()?,
                }))
            }
        }
        other => Err(Error::Format(format!("unknown model kind `{other}`"))),
    }
}

pub fn save_checkpoint(model: &JointModel, path: &Path) -> Result<()> {
    std::fs::write(path, write_checkpoint(model)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<JointModel> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(&bytes)
}

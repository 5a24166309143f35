//! Twin-tower network shared by the cosine-margin and metadata-augmented
//! models, with a hand-written backward pass over a mini-batch objective.

use rand::Rng;

use super::head::{HeadCache, ProjectionHead};
use super::loss::{cml_dcos, cml_from_cos};
use crate::dataset::EncodedPair;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::numeric::{cross_entropy, cross_entropy_backward, dot, Input, Linear, LinearGrad};
use crate::text::{EncodedText, SparseTextVector};

/// How the textual side is encoded before the projection head.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TextArch {
    /// The head reads the concatenated tf-idf vector `t_k` directly.
    Bow,
    /// Comment and title tf-idf vectors each pass a trainable
    /// FC + tanh + ℓ2 layer; the concatenation feeds the head.
    Mlp,
}

impl TextArch {
    pub fn name(self) -> &'static str {
        match self {
            TextArch::Bow => "bow",
            TextArch::Mlp => "mlp",
        }
    }
}

impl std::str::FromStr for TextArch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bow" => Ok(TextArch::Bow),
            "mlp" => Ok(TextArch::Mlp),
            _ => Err(Error::Argument(format!("unknown text architecture `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TextTower {
    Bow {
        head: ProjectionHead,
    },
    Mlp {
        comment: ProjectionHead,
        title: ProjectionHead,
        head: ProjectionHead,
    },
}

/// Metadata classifiers on the projected vectors (no activation).
#[derive(Debug, Clone, PartialEq)]
pub struct Classifiers {
    pub text: Linear,
    pub vis: Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NetworkShape {
    pub vis_in: usize,
    pub comment_in: usize,
    pub title_in: usize,
    pub dim: usize,
    pub arch: TextArch,
    /// Output width of each MLP text encoder.
    pub mlp_dim: usize,
    /// Number of metadata classes, when classifiers are attached.
    pub n_classes: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointNetwork {
    pub vis: ProjectionHead,
    pub text: TextTower,
    pub classifiers: Option<Classifiers>,
}

/// Text tower activations for one sample.
#[derive(Debug, Clone)]
pub enum TextCache {
    Bow(HeadCache),
    Mlp {
        comment: HeadCache,
        title: HeadCache,
        hidden: Vec<f64>,
        head: HeadCache,
    },
}

impl TextCache {
    pub fn output(&self) -> &[f64] {
        match self {
            TextCache::Bow(h) => &h.output,
            TextCache::Mlp { head, .. } => &head.output,
        }
    }
}

/// Loss weights of the batch objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Objective {
    pub margin: f64,
    /// Weight of each classifier loss; ignored without classifiers.
    pub alpha: f64,
}

/// Parameter gradients in [`JointNetwork::linears`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkGrad {
    pub layers: Vec<LinearGrad>,
}

impl NetworkGrad {
    pub fn buffers(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|g| [g.weight.as_slice(), g.bias.as_slice()])
            .collect()
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.buffers().concat()
    }
}

/// Per-sample pre-activation gradients, in layer order.
struct SampleBackward {
    layers: Vec<Vec<f64>>,
}

fn axpy(dst: &mut [f64], a: f64, x: &[f64]) {
    dst.iter_mut().zip(x).for_each(|(d, x)| *d += a * x);
}

impl JointNetwork {
    /// Random initialization. Heads are drawn before classifiers so a network
    /// with classifiers shares its towers with one without, for the same RNG.
    pub fn init<R: Rng + ?Sized>(shape: NetworkShape, rng: &mut R) -> Self {
        let vis = ProjectionHead::init(shape.vis_in, shape.dim, rng);
        let text = match shape.arch {
            TextArch::Bow => TextTower::Bow {
                head: ProjectionHead::init(shape.comment_in + shape.title_in, shape.dim, rng),
            },
            TextArch::Mlp => TextTower::Mlp {
                comment: ProjectionHead::init(shape.comment_in, shape.mlp_dim, rng),
                title: ProjectionHead::init(shape.title_in, shape.mlp_dim, rng),
                head: ProjectionHead::init(2 * shape.mlp_dim, shape.dim, rng),
            },
        };
        let classifiers = shape.n_classes.map(|c| Classifiers {
            text: Linear::init(shape.dim, c, rng),
            vis: Linear::init(shape.dim, c, rng),
        });
        JointNetwork {
            vis,
            text,
            classifiers,
        }
    }

    pub fn dim(&self) -> usize {
        self.vis.out_dim()
    }

    pub fn arch(&self) -> TextArch {
        match self.text {
            TextTower::Bow { .. } => TextArch::Bow,
            TextTower::Mlp { .. } => TextArch::Mlp,
        }
    }

    pub fn shape(&self) -> NetworkShape {
        let (comment_in, title_in, mlp_dim) = match &self.text {
            TextTower::Bow { head } => (head.in_dim(), 0, 0),
            TextTower::Mlp { comment, title, .. } => {
                (comment.in_dim(), title.in_dim(), comment.out_dim())
            }
        };
        NetworkShape {
            vis_in: self.vis.in_dim(),
            comment_in,
            title_in,
            dim: self.dim(),
            arch: self.arch(),
            mlp_dim,
            n_classes: self.classifiers.as_ref().map(|c| c.text.out_dim()),
        }
    }

    /// Every trainable layer in a fixed order: visual head, text tower
    /// (comment, title, head for MLP), then text and visual classifiers.
    pub fn linears(&self) -> Vec<&Linear> {
        let mut out = vec![&self.vis.linear];
        match &self.text {
            TextTower::Bow { head } => out.push(&head.linear),
            TextTower::Mlp {
                comment,
                title,
                head,
            } => out.extend([&comment.linear, &title.linear, &head.linear]),
        }
        if let Some(c) = &self.classifiers {
            out.extend([&c.text, &c.vis]);
        }
        out
    }

    pub fn linears_mut(&mut self) -> Vec<&mut Linear> {
        let mut out = vec![&mut self.vis.linear];
        match &mut self.text {
            TextTower::Bow { head } => out.push(&mut head.linear),
            TextTower::Mlp {
                comment,
                title,
                head,
            } => out.extend([&mut comment.linear, &mut title.linear, &mut head.linear]),
        }
        if let Some(c) = &mut self.classifiers {
            out.extend([&mut c.text, &mut c.vis]);
        }
        out
    }

    pub fn param_sizes(&self) -> Vec<usize> {
        self.linears().iter().flat_map(|l| l.param_sizes()).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        self.linears_mut()
            .into_iter()
            .flat_map(|l| l.params_mut())
            .collect()
    }

    pub fn flat_params(&self) -> Vec<f64> {
        self.linears()
            .iter()
            .flat_map(|l| l.weight.as_slice().iter().chain(&l.bias).copied())
            .collect()
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) {
        let mut it = flat.iter().copied();
        for buf in self.params_mut() {
            for p in buf.iter_mut() {
                *p = it.next().expect("flat parameter vector too short");
            }
        }
        assert!(it.next().is_none(), "flat parameter vector too long");
    }

    fn index_of_text_head(&self) -> usize {
        match self.text {
            TextTower::Bow { .. } => 1,
            TextTower::Mlp { .. } => 3,
        }
    }

    pub fn forward_vis(&self, image: &[f64]) -> Result<HeadCache> {
        self.vis.forward(Input::Dense(image))
    }

    pub fn forward_text(&self, text: &EncodedText, joint: &SparseTextVector) -> Result<TextCache> {
        match &self.text {
            TextTower::Bow { head } => Ok(TextCache::Bow(head.forward(Input::Sparse(joint))?)),
            TextTower::Mlp {
                comment,
                title,
                head,
            } => {
                let c = comment.forward(Input::Sparse(&text.comment))?;
                let a = title.forward(Input::Sparse(&text.title))?;
                let mut hidden = c.output.clone();
                hidden.extend_from_slice(&a.output);
                let h = head.forward(Input::Dense(&hidden))?;
                Ok(TextCache::Mlp {
                    comment: c,
                    title: a,
                    hidden,
                    head: h,
                })
            }
        }
    }

    pub fn project_text(&self, pair: &EncodedPair) -> Result<Vec<f64>> {
        Ok(self.forward_text(&pair.text, &pair.joint)?.output().to_vec())
    }

    pub fn project_vis(&self, image: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_vis(image)?.output)
    }

    /// Text and image projections of every pair.
    pub fn embed(&self, pairs: &[EncodedPair], exec: Exec) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
        let out = exec.map_slice(pairs, |p| -> Result<(Vec<f64>, Vec<f64>)> {
            Ok((self.project_text(p)?, self.project_vis(&p.image)?))
        });
        let mut text = Vec::with_capacity(pairs.len());
        let mut vis = Vec::with_capacity(pairs.len());
        for r in out {
            let (t, v) = r?;
            text.push(t);
            vis.push(v);
        }
        Ok((text, vis))
    }

    fn text_backward(&self, cache: &TextCache, grad_out: &[f64]) -> Result<Vec<Vec<f64>>> {
        match (&self.text, cache) {
            (TextTower::Bow { head }, TextCache::Bow(h)) => Ok(vec![head.backward_pre(h, grad_out)]),
            (
                TextTower::Mlp {
                    comment,
                    title,
                    head,
                },
                TextCache::Mlp {
                    comment: cc,
                    title: tc,
                    head: hc,
                    ..
                },
            ) => {
                let dy_head = head.backward_pre(hc, grad_out);
                let d_hidden = head.linear.backward_input(&dy_head)?;
                let (d_c, d_a) = d_hidden.split_at(comment.out_dim());
                Ok(vec![
                    comment.backward_pre(cc, d_c),
                    title.backward_pre(tc, d_a),
                    dy_head,
                ])
            }
            _ => Err(Error::Contract("text cache does not match the tower".into())),
        }
    }

    /// Mean loss and parameter gradients over one mini-batch.
    ///
    /// Every sample contributes its matching pair; `negatives` lists
    /// mismatched `(text index, image index)` pairs within the batch. With
    /// classifiers attached, matching pairs whose sample is labeled also add
    /// `alpha`-weighted cross-entropy on both projections, and the cosine
    /// terms are weighted by `1 - 2 alpha`.
    pub fn batch_objective(
        &self,
        batch: &[&EncodedPair],
        negatives: &[(usize, usize)],
        obj: Objective,
        exec: Exec,
    ) -> Result<(f64, NetworkGrad)> {
        let b = batch.len();
        if b == 0 {
            return Err(Error::Argument("empty batch".into()));
        }
        let forward = exec.map_slice(batch, |p| -> Result<(TextCache, HeadCache)> {
            Ok((self.forward_text(&p.text, &p.joint)?, self.forward_vis(&p.image)?))
        });
        let forward: Vec<(TextCache, HeadCache)> = forward.into_iter().collect::<Result<_>>()?;

        let dim = self.dim();
        let scale = 1.0 / b as f64;
        let (w_cml, alpha) = match self.classifiers {
            Some(_) => (1.0 - 2.0 * obj.alpha, obj.alpha),
            None => (1.0, 0.0),
        };
        let mut grads = NetworkGrad {
            layers: self.linears().iter().map(|l| LinearGrad::zeros_like(l)).collect(),
        };
        let mut g_text = vec![vec![0.0; dim]; b];
        let mut g_vis = vec![vec![0.0; dim]; b];
        let mut loss = 0.0;

        let mut pair_term = |t: usize, v: usize, positive: bool, loss: &mut f64| {
            let pt = forward[t].0.output();
            let pv = &forward[v].1.output;
            let cos = dot(pt, pv).clamp(-1.0, 1.0);
            *loss += w_cml * cml_from_cos(cos, positive, obj.margin);
            let dc = w_cml * cml_dcos(cos, positive, obj.margin) * scale;
            if dc != 0.0 {
                axpy(&mut g_text[t], dc, pv);
                axpy(&mut g_vis[v], dc, pt);
            }
        };
        for k in 0..b {
            pair_term(k, k, true, &mut loss);
        }
        for &(t, v) in negatives {
            if t >= b || v >= b {
                return Err(Error::Argument(format!("negative pair ({t}, {v}) outside batch")));
            }
            pair_term(t, v, false, &mut loss);
        }

        if let Some(cls) = &self.classifiers {
            let n_layers = grads.layers.len();
            for (k, p) in batch.iter().enumerate() {
                let Some(label) = p.label else { continue };
                for (side, layer, g_side, idx) in [
                    (forward[k].0.output(), &cls.text, &mut g_text[k], n_layers - 2),
                    (&forward[k].1.output[..], &cls.vis, &mut g_vis[k], n_layers - 1),
                ] {
                    let logits = layer.forward(Input::Dense(side))?;
                    loss += alpha * cross_entropy(&logits, label)?;
                    let mut dlogits = cross_entropy_backward(&logits, label)?;
                    dlogits.iter_mut().for_each(|g| *g *= alpha * scale);
                    layer.accumulate(Input::Dense(side), &dlogits, &mut grads.layers[idx]);
                    axpy(g_side, 1.0, &layer.backward_input(&dlogits)?);
                }
            }
        }

        let backward = exec.map_range(b, |k| -> Result<SampleBackward> {
            let mut layers = vec![self.vis.backward_pre(&forward[k].1, &g_vis[k])];
            layers.extend(self.text_backward(&forward[k].0, &g_text[k])?);
            Ok(SampleBackward { layers })
        });
        let head_idx = self.index_of_text_head();
        let linears = self.linears();
        for (k, sb) in backward.into_iter().enumerate() {
            let sb = sb?;
            let p = batch[k];
            let inputs: Vec<Input<'_>> = match &forward[k].0 {
                TextCache::Bow(_) => vec![Input::Dense(&p.image), Input::Sparse(&p.joint)],
                TextCache::Mlp { hidden, .. } => vec![
                    Input::Dense(&p.image),
                    Input::Sparse(&p.text.comment),
                    Input::Sparse(&p.text.title),
                    Input::Dense(hidden),
                ],
            };
            debug_assert_eq!(inputs.len(), head_idx + 1);
            for (i, (x, dy)) in inputs.iter().zip(&sb.layers).enumerate() {
                linears[i].accumulate(*x, dy, &mut grads.layers[i]);
            }
        }
        Ok((loss * scale, grads))
    }

    /// Fraction of labeled pairs each classifier gets right (text, visual).
    pub fn classifier_accuracy(&self, pairs: &[EncodedPair]) -> Result<Option<(f64, f64)>> {
        let Some(cls) = &self.classifiers else {
            return Ok(None);
        };
        let argmax = |v: &[f64]| {
            v.iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .map(|(i, _)| i)
                .unwrap_or(0)
        };
        let (mut t_ok, mut v_ok, mut n) = (0usize, 0usize, 0usize);
        for p in pairs {
            let Some(label) = p.label else { continue };
            n += 1;
            let t = cls.text.forward(Input::Dense(&self.project_text(p)?))?;
            let v = cls.vis.forward(Input::Dense(&self.project_vis(&p.image)?))?;
            t_ok += usize::from(argmax(&t) == label);
            v_ok += usize::from(argmax(&v) == label);
        }
        if n == 0 {
            return Ok(None);
        }
        Ok(Some((t_ok as f64 / n as f64, v_ok as f64 / n as f64)))
    }
}

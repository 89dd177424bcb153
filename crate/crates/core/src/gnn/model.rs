use ndarray::{concatenate, s, Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use super::mlp::{Dense, Mlp, MlpTape};
use super::GnnConfig;
use crate::encoding::{MmilpGraph, CONSTRAINT_BASE_FEATURES, VAR_BASE_FEATURES};
use crate::error::{Error, Result};
use crate::rng;

/// Per-column affine normalization applied to raw features before encoding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaler {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl FeatureScaler {
    pub fn identity(dim: usize) -> Self {
        FeatureScaler { mean: vec![0.0; dim], scale: vec![1.0; dim] }
    }

    /// Column means and standard deviations (1 where a column is constant).
    pub fn fit<'a>(dim: usize, blocks: impl Iterator<Item = &'a Array2<f64>>) -> Self {
        let mut sum = vec![0.0; dim];
        let mut sq = vec![0.0; dim];
        let mut n = 0usize;
        for b in blocks {
            for row in b.rows() {
                for (c, &v) in row.iter().enumerate() {
                    sum[c] += v;
                    sq[c] += v * v;
                }
                n += 1;
            }
        }
        if n == 0 {
            return Self::identity(dim);
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
        let scale = sq
            .iter()
            .zip(&mean)
            .map(|(q, m)| {
                let var = (q / n as f64 - m * m).max(0.0);
                if var > 1e-12 { var.sqrt() } else { 1.0 }
            })
            .collect();
        FeatureScaler { mean, scale }
    }

    pub fn apply(&self, x: &Array2<f64>) -> Array2<f64> {
        let mean = Array1::from(self.mean.clone());
        let scale = Array1::from(self.scale.clone());
        (x - &mean) / &scale
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    /// Message function per variable group.
    pub message: Vec<Mlp>,
    /// Constraint-to-variable message functions; empty when messages are shared.
    pub message_rev: Vec<Mlp>,
    pub update_constraint: Mlp,
    pub update_vars: Vec<Mlp>,
}

/// Every trainable tensor of the network. Gradients and Adam moments use the
/// same structure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GnnParams {
    /// One encoder per variable group, then the constraint encoder.
    pub encoders: Vec<Mlp>,
    pub layers: Vec<LayerParams>,
    pub readout: Dense,
}

fn push_mlp<'a>(out: &mut Vec<(String, &'a Array2<f64>)>, name: &str, m: &'a Mlp) {
    for (i, d) in m.layers.iter().enumerate() {
        out.push((format!("{name}.{i}.weight"), &d.weight));
        out.push((format!("{name}.{i}.bias"), &d.bias));
    }
}

fn push_mlp_mut<'a>(out: &mut Vec<&'a mut Array2<f64>>, m: &'a mut Mlp) {
    for d in m.layers.iter_mut() {
        out.push(&mut d.weight);
        out.push(&mut d.bias);
    }
}

impl GnnParams {
    /// Builds parameters in canonical order: encoders, then per layer the
    /// message, reverse message, constraint update and variable updates,
    /// then the readout.
    pub fn init(cfg: &GnnConfig) -> Self {
        let mut rng = rng::seeded(cfg.seed);
        let d = cfg.embed_dim;
        let with = |input: usize, hidden: &[usize], rng: &mut rng::Rng| {
            let mut dims = vec![input];
            dims.extend_from_slice(hidden);
            dims.push(d);
            Mlp::glorot(&dims, rng)
        };
        let mut encoders: Vec<Mlp> = (0..cfg.var_groups)
            .map(|_| with(VAR_BASE_FEATURES + cfg.random_dim, &cfg.encoder_hidden, &mut rng))
            .collect();
        encoders.push(with(CONSTRAINT_BASE_FEATURES + cfg.random_dim, &cfg.encoder_hidden, &mut rng));
        let layers = (0..cfg.layers)
            .map(|_| {
                let message = (0..cfg.var_groups).map(|_| with(2 * d + 1, &cfg.message_hidden, &mut rng)).collect();
                let message_rev = if cfg.separate_messages {
                    (0..cfg.var_groups).map(|_| with(2 * d + 1, &cfg.message_hidden, &mut rng)).collect()
                } else {
                    Vec::new()
                };
                let update_constraint = with(2 * d, &cfg.update_hidden, &mut rng);
                let update_vars = (0..cfg.var_groups).map(|_| with(2 * d, &cfg.update_hidden, &mut rng)).collect();
                LayerParams { message, message_rev, update_constraint, update_vars }
            })
            .collect();
        let readout = Dense::glorot(d, 1, &mut rng);
        GnnParams { encoders, layers, readout }
    }

    pub fn zeros_like(&self) -> Self {
        let z = |ms: &Vec<Mlp>| ms.iter().map(Mlp::zeros_like).collect::<Vec<_>>();
        GnnParams {
            encoders: z(&self.encoders),
            layers: self
                .layers
                .iter()
                .map(|l| LayerParams {
                    message: z(&l.message),
                    message_rev: z(&l.message_rev),
                    update_constraint: l.update_constraint.zeros_like(),
                    update_vars: z(&l.update_vars),
                })
                .collect(),
            readout: Dense::zeros(self.readout.weight.nrows(), 1),
        }
    }

    pub fn named_tensors(&self) -> Vec<(String, &Array2<f64>)> {
        let mut out = Vec::new();
        let groups = self.encoders.len() - 1;
        for (k, m) in self.encoders.iter().enumerate() {
            let name = if k == groups { "encoder.v".to_string() } else { format!("encoder.w{k}") };
            push_mlp(&mut out, &name, m);
        }
        for (l, layer) in self.layers.iter().enumerate() {
            for (k, m) in layer.message.iter().enumerate() {
                push_mlp(&mut out, &format!("layer{l}.message.w{k}"), m);
            }
            for (k, m) in layer.message_rev.iter().enumerate() {
                push_mlp(&mut out, &format!("layer{l}.message_rev.w{k}"), m);
            }
            push_mlp(&mut out, &format!("layer{l}.update.v"), &layer.update_constraint);
            for (k, m) in layer.update_vars.iter().enumerate() {
                push_mlp(&mut out, &format!("layer{l}.update.w{k}"), m);
            }
        }
        out.push(("readout.weight".into(), &self.readout.weight));
        out.push(("readout.bias".into(), &self.readout.bias));
        out
    }

    /// Same order as [`GnnParams::named_tensors`].
    pub fn tensors_mut(&mut self) -> Vec<&mut Array2<f64>> {
        let mut out = Vec::new();
        for m in self.encoders.iter_mut() {
            push_mlp_mut(&mut out, m);
        }
        for layer in self.layers.iter_mut() {
            for m in layer.message.iter_mut() {
                push_mlp_mut(&mut out, m);
            }
            for m in layer.message_rev.iter_mut() {
                push_mlp_mut(&mut out, m);
            }
            push_mlp_mut(&mut out, &mut layer.update_constraint);
            for m in layer.update_vars.iter_mut() {
                push_mlp_mut(&mut out, m);
            }
        }
        out.push(&mut self.readout.weight);
        out.push(&mut self.readout.bias);
        out
    }

    pub fn param_count(&self) -> usize {
        self.named_tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.named_tensors().into_iter().flat_map(|(_, t)| t.iter().copied().collect::<Vec<_>>()).collect()
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        let total = self.param_count();
        if flat.len() != total {
            return Err(Error::DimensionMismatch { expected: total, got: flat.len() });
        }
        let mut pos = 0;
        for t in self.tensors_mut() {
            for v in t.iter_mut() {
                *v = flat[pos];
                pos += 1;
            }
        }
        Ok(())
    }

    /// `self += scale * other`
    pub fn add_scaled(&mut self, other: &GnnParams, scale: f64) {
        let src = other.named_tensors();
        for (dst, (_, s)) in self.tensors_mut().into_iter().zip(src) {
            dst.scaled_add(scale, s);
        }
    }
}

/// Per-W0-vertex interdiction probabilities, aligned with the MILP edge order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub probabilities: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub step: u64,
    pub m: GnnParams,
    pub v: GnnParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GnnModel {
    pub config: GnnConfig,
    pub params: GnnParams,
    /// Variable-group scalers, then the constraint scaler.
    pub scalers: Vec<FeatureScaler>,
    pub adam: Option<AdamState>,
}

struct GroupEdges {
    var: Vec<usize>,
    cons: Vec<usize>,
    weight: Array2<f64>,
}

struct LayerTape {
    message: Vec<MlpTape>,
    message_rev: Vec<MlpTape>,
    update_constraint: MlpTape,
    update_vars: Vec<MlpTape>,
}

/// Everything the backward pass needs from one forward pass.
pub struct ForwardTape {
    edges: Vec<GroupEdges>,
    present: usize,
    encoders: Vec<MlpTape>,
    layers: Vec<LayerTape>,
    final_w0: Array2<f64>,
    pub prediction: Prediction,
}

fn gather(h: &Array2<f64>, idx: &[usize]) -> Array2<f64> {
    h.select(Axis(0), idx)
}

fn scatter_add(target: &mut Array2<f64>, idx: &[usize], rows: &Array2<f64>) {
    for (r, &i) in idx.iter().enumerate() {
        let mut t = target.row_mut(i);
        t += &rows.row(r);
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl GnnModel {
    pub fn new(config: GnnConfig) -> Result<Self> {
        config.validate()?;
        let params = GnnParams::init(&config);
        let mut scalers: Vec<FeatureScaler> =
            (0..config.var_groups).map(|_| FeatureScaler::identity(VAR_BASE_FEATURES + config.random_dim)).collect();
        scalers.push(FeatureScaler::identity(CONSTRAINT_BASE_FEATURES + config.random_dim));
        Ok(GnnModel { config, params, scalers, adam: None })
    }

    fn check_graph(&self, g: &MmilpGraph) -> Result<usize> {
        let present = g.group_count();
        if present == 0 || present > self.config.var_groups {
            return Err(Error::DimensionMismatch { expected: self.config.var_groups, got: present });
        }
        if g.random_dim != self.config.random_dim {
            return Err(Error::DimensionMismatch { expected: self.config.random_dim, got: g.random_dim });
        }
        if g.var_features.iter().any(|f| f.ncols() != VAR_BASE_FEATURES + self.config.random_dim)
            || g.constraint_features.ncols() != CONSTRAINT_BASE_FEATURES + self.config.random_dim
        {
            return Err(Error::InvalidConfig("graph feature width does not match the model".into()));
        }
        Ok(present)
    }

    pub fn forward(&self, g: &MmilpGraph) -> Result<Prediction> {
        Ok(self.forward_tape(g)?.prediction)
    }

    /// Forward pass that records the tape for [`GnnModel::backward`].
    pub fn forward_tape(&self, g: &MmilpGraph) -> Result<ForwardTape> {
        let present = self.check_graph(g)?;
        let act = self.config.activation;
        let d = self.config.embed_dim;
        let p = &self.params;
        let groups = self.config.var_groups;

        let mut edges: Vec<GroupEdges> = (0..present)
            .map(|_| GroupEdges { var: Vec::new(), cons: Vec::new(), weight: Array2::zeros((0, 1)) })
            .collect();
        let mut weights: Vec<Vec<f64>> = vec![Vec::new(); present];
        for e in &g.edges {
            edges[e.group].var.push(e.var);
            edges[e.group].cons.push(e.constraint);
            weights[e.group].push(e.weight);
        }
        for (ge, w) in edges.iter_mut().zip(weights) {
            let n = w.len();
            ge.weight = Array2::from_shape_vec((n, 1), w).expect("edge weight column");
        }

        let mut enc_tapes = Vec::with_capacity(present + 1);
        let mut h_vars = Vec::with_capacity(present);
        for k in 0..present {
            let (h, t) = p.encoders[k].forward(self.scalers[k].apply(&g.var_features[k]), act);
            h_vars.push(h);
            enc_tapes.push(t);
        }
        let (mut h_c, t) = p.encoders[groups].forward(self.scalers[groups].apply(&g.constraint_features), act);
        enc_tapes.push(t);

        let mut layer_tapes = Vec::with_capacity(self.config.layers);
        for layer in &p.layers {
            let mut agg_c = Array2::zeros((h_c.nrows(), d));
            let mut message_tapes = Vec::with_capacity(present);
            let mut rev_tapes = Vec::new();
            let mut agg_vars = Vec::with_capacity(present);
            for k in 0..present {
                let ge = &edges[k];
                let input = concatenate![Axis(1), gather(&h_c, &ge.cons), gather(&h_vars[k], &ge.var), ge.weight];
                let mut agg_k = Array2::zeros((h_vars[k].nrows(), d));
                if self.config.separate_messages {
                    let (msg, t) = layer.message[k].forward(input.clone(), act);
                    scatter_add(&mut agg_c, &ge.cons, &msg);
                    message_tapes.push(t);
                    let (rev, t) = layer.message_rev[k].forward(input, act);
                    scatter_add(&mut agg_k, &ge.var, &rev);
                    rev_tapes.push(t);
                } else {
                    let (msg, t) = layer.message[k].forward(input, act);
                    scatter_add(&mut agg_c, &ge.cons, &msg);
                    scatter_add(&mut agg_k, &ge.var, &msg);
                    message_tapes.push(t);
                }
                agg_vars.push(agg_k);
            }
            let (new_c, uc_tape) = layer.update_constraint.forward(concatenate![Axis(1), h_c, agg_c], act);
            let mut new_vars = Vec::with_capacity(present);
            let mut uv_tapes = Vec::with_capacity(present);
            for k in 0..present {
                let (h, t) = layer.update_vars[k].forward(concatenate![Axis(1), h_vars[k], agg_vars[k]], act);
                new_vars.push(h);
                uv_tapes.push(t);
            }
            h_c = new_c;
            h_vars = new_vars;
            layer_tapes.push(LayerTape {
                message: message_tapes,
                message_rev: rev_tapes,
                update_constraint: uc_tape,
                update_vars: uv_tapes,
            });
        }

        let logits = p.readout.forward(&h_vars[0]);
        let probabilities = logits.column(0).iter().map(|&z| sigmoid(z)).collect();
        Ok(ForwardTape {
            edges,
            present,
            encoders: enc_tapes,
            layers: layer_tapes,
            final_w0: h_vars.swap_remove(0),
            prediction: Prediction { probabilities },
        })
    }

    /// Gradients of `sum_i dlogit[i] * logit_i` for the W0 readout logits.
    pub fn backward_from_logits(&self, tape: &ForwardTape, d_logits: &[f64]) -> GnnParams {
        let act = self.config.activation;
        let d = self.config.embed_dim;
        let p = &self.params;
        let groups = self.config.var_groups;
        let present = tape.present;
        let mut grad = p.zeros_like();

        let dz = Array2::from_shape_vec((d_logits.len(), 1), d_logits.to_vec()).expect("logit column");
        grad.readout.weight += &tape.final_w0.t().dot(&dz);
        grad.readout.bias += &dz.sum_axis(Axis(0)).insert_axis(Axis(0));

        let n_c = tape.encoders[present].rows();
        let mut dh_vars: Vec<Array2<f64>> =
            (0..present).map(|k| Array2::zeros((tape.encoders[k].rows(), d))).collect();
        dh_vars[0] = dz.dot(&p.readout.weight.t());
        let mut dh_c: Array2<f64> = Array2::zeros((n_c, d));

        for (l, layer) in p.layers.iter().enumerate().rev() {
            let lt = &tape.layers[l];
            let gl = &mut grad.layers[l];
            let d_in = layer.update_constraint.backward(&lt.update_constraint, dh_c, act, &mut gl.update_constraint);
            let mut prev_c = d_in.slice(s![.., ..d]).to_owned();
            let d_agg_c = d_in.slice(s![.., d..]).to_owned();
            let mut prev_vars = Vec::with_capacity(present);
            let mut d_agg_vars = Vec::with_capacity(present);
            for k in 0..present {
                let dk = std::mem::take(&mut dh_vars[k]);
                let d_in = layer.update_vars[k].backward(&lt.update_vars[k], dk, act, &mut gl.update_vars[k]);
                prev_vars.push(d_in.slice(s![.., ..d]).to_owned());
                d_agg_vars.push(d_in.slice(s![.., d..]).to_owned());
            }
            for k in 0..present {
                let ge = &tape.edges[k];
                let spread = |d_input: Array2<f64>, prev_c: &mut Array2<f64>, prev_v: &mut Array2<f64>| {
                    scatter_add(prev_c, &ge.cons, &d_input.slice(s![.., ..d]).to_owned());
                    scatter_add(prev_v, &ge.var, &d_input.slice(s![.., d..2 * d]).to_owned());
                };
                if self.config.separate_messages {
                    let d_msg = gather(&d_agg_c, &ge.cons);
                    let d_input = layer.message[k].backward(&lt.message[k], d_msg, act, &mut gl.message[k]);
                    spread(d_input, &mut prev_c, &mut prev_vars[k]);
                    let d_rev = gather(&d_agg_vars[k], &ge.var);
                    let d_input = layer.message_rev[k].backward(&lt.message_rev[k], d_rev, act, &mut gl.message_rev[k]);
                    spread(d_input, &mut prev_c, &mut prev_vars[k]);
                } else {
                    let d_msg = gather(&d_agg_c, &ge.cons) + gather(&d_agg_vars[k], &ge.var);
                    let d_input = layer.message[k].backward(&lt.message[k], d_msg, act, &mut gl.message[k]);
                    spread(d_input, &mut prev_c, &mut prev_vars[k]);
                }
            }
            dh_c = prev_c;
            dh_vars = prev_vars;
        }

        for k in 0..present {
            let dk = std::mem::take(&mut dh_vars[k]);
            p.encoders[k].backward(&tape.encoders[k], dk, act, &mut grad.encoders[k]);
        }
        p.encoders[groups].backward(&tape.encoders[present], dh_c, act, &mut grad.encoders[groups]);
        grad
    }

    /// Loss and exact gradients of the mean binary cross-entropy for one graph.
    pub fn backward(&self, g: &MmilpGraph, label: &[bool]) -> Result<(f64, GnnParams)> {
        let tape = self.forward_tape(g)?;
        let loss = super::loss(&tape.prediction, label)?;
        let d_logits = super::loss_logit_gradient(&tape.prediction, label);
        Ok((loss, self.backward_from_logits(&tape, &d_logits)))
    }
}

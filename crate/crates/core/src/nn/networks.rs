use super::layers::{
    concat_columns, cosine_embed_batch, masked_max_pool, masked_max_pool_backward, relu, relu_backward, Linear,
};
use super::param::{Module, Param};
use super::{NetworkConfig, StateBatch};
use crate::dynamics::THRUST_RATE_LIMIT;
use crate::error::{Error, Result};
use crate::perception::{EGO_DIM, OBJECT_DIM};
use ndarray::{s, Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerOp {
    Input,
    Linear,
    Relu,
    Tanh,
    Cosine,
    MaxPool,
    Product,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub name: String,
    pub op: LayerOp,
    pub inputs: Vec<String>,
    pub in_dim: usize,
    pub out_dim: usize,
}

/// Declarative description of a network graph, stored alongside weights.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub kind: String,
    pub layers: Vec<LayerSpec>,
}

impl NetworkSpec {
    fn new(kind: &str) -> Self {
        Self { kind: kind.to_string(), layers: Vec::new() }
    }

    fn push(&mut self, name: &str, op: LayerOp, inputs: &[&str], in_dim: usize, out_dim: usize) {
        self.layers.push(LayerSpec {
            name: name.to_string(),
            op,
            inputs: inputs.iter().map(|s| s.to_string()).collect(),
            in_dim,
            out_dim,
        });
    }

    /// Checks that every layer's declared input width matches its sources.
    pub fn validate(&self) -> Result<()> {
        let mut dims: HashMap<&str, usize> = HashMap::new();
        for layer in &self.layers {
            let sources: Vec<usize> = layer
                .inputs
                .iter()
                .map(|n| {
                    dims.get(n.as_str())
                        .copied()
                        .ok_or_else(|| Error::Dimension(format!("{}: unknown input {n}", layer.name)))
                })
                .collect::<Result<_>>()?;
            let ok = match layer.op {
                LayerOp::Input => sources.is_empty() && layer.in_dim == layer.out_dim,
                LayerOp::Linear => sources.iter().sum::<usize>() == layer.in_dim,
                LayerOp::Relu | LayerOp::Tanh | LayerOp::MaxPool => {
                    sources.len() == 1 && sources[0] == layer.in_dim && layer.in_dim == layer.out_dim
                }
                LayerOp::Cosine => sources == [1] && layer.in_dim == 1,
                LayerOp::Product => {
                    sources.len() >= 2 && sources.iter().all(|&d| d == layer.out_dim) && layer.in_dim == layer.out_dim
                }
            };
            if !ok {
                return Err(Error::Dimension(format!(
                    "layer {} ({:?}) declares {}→{} but receives {:?}",
                    layer.name, layer.op, layer.in_dim, layer.out_dim, sources
                )));
            }
            if dims.insert(&layer.name, layer.out_dim).is_some() {
                return Err(Error::Dimension(format!("duplicate layer name {}", layer.name)));
            }
        }
        Ok(())
    }
}

/// Shared ego and object encoders with masked max pooling.
#[derive(Debug, Clone, PartialEq)]
pub struct StateEncoder {
    pub ego: Linear,
    pub object: Linear,
}

#[derive(Debug, Clone)]
pub struct EncoderCache {
    ego_in: Array2<f64>,
    ego_out: Array2<f64>,
    obj_in: Array2<f64>,
    obj_out: Array2<f64>,
    arg: Vec<Option<usize>>,
}

impl StateEncoder {
    pub fn new<R: Rng + ?Sized>(cfg: &NetworkConfig, rng: &mut R) -> Self {
        Self { ego: Linear::new(EGO_DIM, cfg.ego_hidden, rng), object: Linear::new(OBJECT_DIM, cfg.object_hidden, rng) }
    }

    pub fn output_dim(&self) -> usize {
        self.ego.outputs() + self.object.outputs()
    }

    pub fn forward(&self, s: &StateBatch) -> (Array2<f64>, EncoderCache) {
        let ego_out = relu(self.ego.forward(&s.ego));
        let obj_out = relu(self.object.forward(&s.objects));
        let (pooled, arg) = masked_max_pool(&obj_out, &s.mask, s.slots);
        let out = concat_columns(&ego_out, &pooled);
        (out, EncoderCache { ego_in: s.ego.clone(), ego_out, obj_in: s.objects.clone(), obj_out, arg })
    }

    pub fn backward(&mut self, cache: &EncoderCache, d: &Array2<f64>) {
        let he = self.ego.outputs();
        let d_ego = relu_backward(&cache.ego_out, &d.slice(s![.., ..he]).to_owned());
        self.ego.accumulate(&cache.ego_in, &d_ego);
        let d_pool = d.slice(s![.., he..]).to_owned();
        let d_obj = masked_max_pool_backward(&d_pool, &cache.arg, cache.obj_out.nrows());
        let d_obj = relu_backward(&cache.obj_out, &d_obj);
        self.object.accumulate(&cache.obj_in, &d_obj);
    }

    fn params(&self) -> Vec<&Param> {
        vec![&self.ego.weight, &self.ego.bias, &self.object.weight, &self.object.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.ego.weight, &mut self.ego.bias, &mut self.object.weight, &mut self.object.bias]
    }

    fn spec_into(&self, spec: &mut NetworkSpec) {
        let (he, ho) = (self.ego.outputs(), self.object.outputs());
        spec.push("ego", LayerOp::Input, &[], EGO_DIM, EGO_DIM);
        spec.push("objects", LayerOp::Input, &[], OBJECT_DIM, OBJECT_DIM);
        spec.push("ego_fc", LayerOp::Linear, &["ego"], EGO_DIM, he);
        spec.push("ego_relu", LayerOp::Relu, &["ego_fc"], he, he);
        spec.push("object_fc", LayerOp::Linear, &["objects"], OBJECT_DIM, ho);
        spec.push("object_relu", LayerOp::Relu, &["object_fc"], ho, ho);
        spec.push("object_pool", LayerOp::MaxPool, &["object_relu"], ho, ho);
    }
}

/// Distributional network `Z(s, [a,] τ)` combining a state(-action) feature
/// with a cosine embedding of τ by element-wise product. With an action input
/// it returns one value per τ; without, one value per discrete action.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileCritic {
    pub encoder: StateEncoder,
    pub state_action: Linear,
    pub tau: Linear,
    pub hidden: Linear,
    pub out: Linear,
    action_dim: usize,
    embedding_dim: usize,
}

#[derive(Debug, Clone)]
pub struct CriticCache {
    enc: EncoderCache,
    sa_in: Array2<f64>,
    f: Array2<f64>,
    emb: Array2<f64>,
    g: Array2<f64>,
    h: Array2<f64>,
    h2: Array2<f64>,
    n: usize,
}

impl QuantileCritic {
    pub fn new<R: Rng + ?Sized>(cfg: &NetworkConfig, action_dim: usize, outputs: usize, rng: &mut R) -> Self {
        let encoder = StateEncoder::new(cfg, rng);
        let sdim = encoder.output_dim();
        Self {
            state_action: Linear::new(sdim + action_dim, cfg.hidden, rng),
            tau: Linear::new(cfg.embedding_dim, cfg.hidden, rng),
            hidden: Linear::new(cfg.hidden, cfg.hidden, rng),
            out: Linear::new(cfg.hidden, outputs, rng),
            encoder,
            action_dim,
            embedding_dim: cfg.embedding_dim,
        }
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn outputs(&self) -> usize {
        self.out.outputs()
    }

    /// `taus` is `B × N`; the result is `(B·N) × outputs`, row `b·N + i`.
    pub fn forward(
        &self,
        s: &StateBatch,
        actions: Option<&Array2<f64>>,
        taus: &Array2<f64>,
    ) -> Result<(Array2<f64>, CriticCache)> {
        let b = s.len();
        if taus.nrows() != b {
            return Err(Error::Dimension(format!("{} τ rows for {} states", taus.nrows(), b)));
        }
        let (st, enc) = self.encoder.forward(s);
        let sa_in = match (self.action_dim, actions) {
            (0, _) => st,
            (d, Some(a)) if a.ncols() == d && a.nrows() == b => concat_columns(&st, &(a / THRUST_RATE_LIMIT)),
            _ => return Err(Error::Dimension("critic action input missing or misshapen".into())),
        };
        let f = relu(self.state_action.forward(&sa_in));
        let n = taus.ncols();
        let emb = cosine_embed_batch(taus, self.embedding_dim)?;
        let g = relu(self.tau.forward(&emb));
        let mut h = g.clone();
        for (r, mut row) in h.axis_iter_mut(Axis(0)).enumerate() {
            row *= &f.row(r / n);
        }
        let h2 = relu(self.hidden.forward(&h));
        let z = self.out.forward(&h2);
        Ok((z, CriticCache { enc, sa_in, f, emb, g, h, h2, n }))
    }

    pub fn predict(&self, s: &StateBatch, actions: Option<&Array2<f64>>, taus: &Array2<f64>) -> Result<Array2<f64>> {
        Ok(self.forward(s, actions, taus)?.0)
    }

    /// Back-propagates `dz`. Parameter gradients are accumulated only when
    /// `param_grads`; the action gradient (in raw action units) is returned
    /// when the critic has an action input.
    pub fn backward(&mut self, cache: &CriticCache, dz: &Array2<f64>, param_grads: bool) -> Option<Array2<f64>> {
        let dh2 = relu_backward(&cache.h2, &self.out.backward(&cache.h2, dz, param_grads));
        let dh = self.hidden.backward(&cache.h, &dh2, param_grads);
        let n = cache.n;
        let b = cache.f.nrows();
        let width = cache.f.ncols();
        let mut df = Array2::<f64>::zeros((b, width));
        let mut dg = dh.clone();
        for (r, mut row) in dg.axis_iter_mut(Axis(0)).enumerate() {
            let fb = cache.f.row(r / n);
            let mut acc = df.row_mut(r / n);
            acc.scaled_add(1.0, &(&dh.row(r) * &cache.g.row(r)));
            row *= &fb;
        }
        let df = relu_backward(&cache.f, &df);
        if param_grads {
            let dg = relu_backward(&cache.g, &dg);
            self.tau.accumulate(&cache.emb, &dg);
        }
        let d_sa = self.state_action.backward(&cache.sa_in, &df, param_grads);
        let sdim = self.encoder.output_dim();
        if param_grads {
            self.encoder.backward(&cache.enc, &d_sa.slice(s![.., ..sdim]).to_owned());
        }
        (self.action_dim > 0).then(|| d_sa.slice(s![.., sdim..]).to_owned() / THRUST_RATE_LIMIT)
    }
}

impl Module for QuantileCritic {
    fn params(&self) -> Vec<&Param> {
        let mut p = self.encoder.params();
        for l in [&self.state_action, &self.tau, &self.hidden, &self.out] {
            p.push(&l.weight);
            p.push(&l.bias);
        }
        p
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut p = self.encoder.params_mut();
        for l in [&mut self.state_action, &mut self.tau, &mut self.hidden, &mut self.out] {
            p.push(&mut l.weight);
            p.push(&mut l.bias);
        }
        p
    }

    fn spec(&self) -> NetworkSpec {
        let kind = if self.action_dim > 0 { "quantile_critic" } else { "quantile_q_network" };
        let mut spec = NetworkSpec::new(kind);
        self.encoder.spec_into(&mut spec);
        let sdim = self.encoder.output_dim();
        let h = self.hidden.outputs();
        let mut sa_inputs = vec!["ego_relu", "object_pool"];
        if self.action_dim > 0 {
            spec.push("action", LayerOp::Input, &[], self.action_dim, self.action_dim);
            sa_inputs.push("action");
        }
        spec.push("tau", LayerOp::Input, &[], 1, 1);
        spec.push("state_action_fc", LayerOp::Linear, &sa_inputs, sdim + self.action_dim, h);
        spec.push("state_action_relu", LayerOp::Relu, &["state_action_fc"], h, h);
        spec.push("tau_cos", LayerOp::Cosine, &["tau"], 1, self.embedding_dim);
        spec.push("tau_fc", LayerOp::Linear, &["tau_cos"], self.embedding_dim, h);
        spec.push("tau_relu", LayerOp::Relu, &["tau_fc"], h, h);
        spec.push("combine", LayerOp::Product, &["state_action_relu", "tau_relu"], h, h);
        spec.push("hidden_fc", LayerOp::Linear, &["combine"], h, h);
        spec.push("hidden_relu", LayerOp::Relu, &["hidden_fc"], h, h);
        spec.push("out", LayerOp::Linear, &["hidden_relu"], h, self.out.outputs());
        spec
    }
}

/// Plain value network: `Q(s)` per discrete action or `Q(s, a)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueNetwork {
    pub encoder: StateEncoder,
    pub fc1: Linear,
    pub fc2: Linear,
    pub out: Linear,
    action_dim: usize,
}

#[derive(Debug, Clone)]
pub struct ValueCache {
    enc: EncoderCache,
    x: Array2<f64>,
    h1: Array2<f64>,
    h2: Array2<f64>,
}

impl ValueNetwork {
    pub fn new<R: Rng + ?Sized>(cfg: &NetworkConfig, action_dim: usize, outputs: usize, rng: &mut R) -> Self {
        let encoder = StateEncoder::new(cfg, rng);
        let sdim = encoder.output_dim();
        Self {
            fc1: Linear::new(sdim + action_dim, cfg.hidden, rng),
            fc2: Linear::new(cfg.hidden, cfg.hidden, rng),
            out: Linear::new(cfg.hidden, outputs, rng),
            encoder,
            action_dim,
        }
    }

    pub fn outputs(&self) -> usize {
        self.out.outputs()
    }

    pub fn forward(&self, s: &StateBatch, actions: Option<&Array2<f64>>) -> Result<(Array2<f64>, ValueCache)> {
        let (st, enc) = self.encoder.forward(s);
        let x = match (self.action_dim, actions) {
            (0, _) => st,
            (d, Some(a)) if a.ncols() == d && a.nrows() == s.len() => concat_columns(&st, &(a / THRUST_RATE_LIMIT)),
            _ => return Err(Error::Dimension("value network action input missing or misshapen".into())),
        };
        let h1 = relu(self.fc1.forward(&x));
        let h2 = relu(self.fc2.forward(&h1));
        let y = self.out.forward(&h2);
        Ok((y, ValueCache { enc, x, h1, h2 }))
    }

    pub fn predict(&self, s: &StateBatch, actions: Option<&Array2<f64>>) -> Result<Array2<f64>> {
        Ok(self.forward(s, actions)?.0)
    }

    pub fn backward(&mut self, cache: &ValueCache, dy: &Array2<f64>, param_grads: bool) -> Option<Array2<f64>> {
        let d2 = relu_backward(&cache.h2, &self.out.backward(&cache.h2, dy, param_grads));
        let d1 = relu_backward(&cache.h1, &self.fc2.backward(&cache.h1, &d2, param_grads));
        let dx = self.fc1.backward(&cache.x, &d1, param_grads);
        let sdim = self.encoder.output_dim();
        if param_grads {
            self.encoder.backward(&cache.enc, &dx.slice(s![.., ..sdim]).to_owned());
        }
        (self.action_dim > 0).then(|| dx.slice(s![.., sdim..]).to_owned() / THRUST_RATE_LIMIT)
    }
}

impl Module for ValueNetwork {
    fn params(&self) -> Vec<&Param> {
        let mut p = self.encoder.params();
        for l in [&self.fc1, &self.fc2, &self.out] {
            p.push(&l.weight);
            p.push(&l.bias);
        }
        p
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut p = self.encoder.params_mut();
        for l in [&mut self.fc1, &mut self.fc2, &mut self.out] {
            p.push(&mut l.weight);
            p.push(&mut l.bias);
        }
        p
    }

    fn spec(&self) -> NetworkSpec {
        let kind = if self.action_dim > 0 { "critic" } else { "q_network" };
        let mut spec = NetworkSpec::new(kind);
        self.encoder.spec_into(&mut spec);
        let sdim = self.encoder.output_dim();
        let h = self.fc1.outputs();
        let mut inputs = vec!["ego_relu", "object_pool"];
        if self.action_dim > 0 {
            spec.push("action", LayerOp::Input, &[], self.action_dim, self.action_dim);
            inputs.push("action");
        }
        spec.push("fc1", LayerOp::Linear, &inputs, sdim + self.action_dim, h);
        spec.push("fc1_relu", LayerOp::Relu, &["fc1"], h, h);
        spec.push("fc2", LayerOp::Linear, &["fc1_relu"], h, h);
        spec.push("fc2_relu", LayerOp::Relu, &["fc2"], h, h);
        spec.push("out", LayerOp::Linear, &["fc2_relu"], h, self.out.outputs());
        spec
    }
}

/// Deterministic policy with a bounded output of `±THRUST_RATE_LIMIT` per thruster.
#[derive(Debug, Clone, PartialEq)]
pub struct Actor {
    pub encoder: StateEncoder,
    pub fc1: Linear,
    pub fc2: Linear,
    pub out: Linear,
}

#[derive(Debug, Clone)]
pub struct ActorCache {
    enc: EncoderCache,
    x: Array2<f64>,
    h1: Array2<f64>,
    h2: Array2<f64>,
    t: Array2<f64>,
}

impl Actor {
    pub fn new<R: Rng + ?Sized>(cfg: &NetworkConfig, rng: &mut R) -> Self {
        let encoder = StateEncoder::new(cfg, rng);
        let sdim = encoder.output_dim();
        Self {
            fc1: Linear::new(sdim, cfg.hidden, rng),
            fc2: Linear::new(cfg.hidden, cfg.hidden, rng),
            out: Linear::new(cfg.hidden, 2, rng),
            encoder,
        }
    }

    pub fn forward(&self, s: &StateBatch) -> (Array2<f64>, ActorCache) {
        let (x, enc) = self.encoder.forward(s);
        let h1 = relu(self.fc1.forward(&x));
        let h2 = relu(self.fc2.forward(&h1));
        let t = self.out.forward(&h2).mapv_into(f64::tanh);
        let a = &t * THRUST_RATE_LIMIT;
        (a, ActorCache { enc, x, h1, h2, t })
    }

    pub fn predict(&self, s: &StateBatch) -> Array2<f64> {
        self.forward(s).0
    }

    /// Accumulates parameter gradients for an upstream gradient on the
    /// (scaled) action output.
    pub fn backward(&mut self, cache: &ActorCache, d_action: &Array2<f64>) {
        let mut d = d_action * THRUST_RATE_LIMIT;
        d.zip_mut_with(&cache.t, |d, &t| *d *= 1.0 - t * t);
        let d2 = relu_backward(&cache.h2, &self.out.backward(&cache.h2, &d, true));
        let d1 = relu_backward(&cache.h1, &self.fc2.backward(&cache.h1, &d2, true));
        let dx = self.fc1.backward(&cache.x, &d1, true);
        self.encoder.backward(&cache.enc, &dx);
    }
}

impl Module for Actor {
    fn params(&self) -> Vec<&Param> {
        let mut p = self.encoder.params();
        for l in [&self.fc1, &self.fc2, &self.out] {
            p.push(&l.weight);
            p.push(&l.bias);
        }
        p
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut p = self.encoder.params_mut();
        for l in [&mut self.fc1, &mut self.fc2, &mut self.out] {
            p.push(&mut l.weight);
            p.push(&mut l.bias);
        }
        p
    }

    fn spec(&self) -> NetworkSpec {
        let mut spec = NetworkSpec::new("actor");
        self.encoder.spec_into(&mut spec);
        let sdim = self.encoder.output_dim();
        let h = self.fc1.outputs();
        spec.push("fc1", LayerOp::Linear, &["ego_relu", "object_pool"], sdim, h);
        spec.push("fc1_relu", LayerOp::Relu, &["fc1"], h, h);
        spec.push("fc2", LayerOp::Linear, &["fc1_relu"], h, h);
        spec.push("fc2_relu", LayerOp::Relu, &["fc2"], h, h);
        spec.push("out", LayerOp::Linear, &["fc2_relu"], h, 2);
        spec.push("out_tanh", LayerOp::Tanh, &["out"], 2, 2);
        spec
    }
}

use super::config::{Fusion, ModelConfig};
use crate::error::{Error, Result};
use crate::nn::{self, Matrix, Param, Rng};
use crate::synth::LanguageBundle;

/// Weight and bias of one linear or same-padded conv layer.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub weight: Param,
    pub bias: Param,
}

impl Layer {
    fn init(rng: &mut Rng, fan_in: usize, dout: usize, std: f64, bias: f64) -> Self {
        Layer {
            weight: Param::new(Matrix::from_fn(fan_in, dout, |_, _| std * rng.normal())),
            bias: Param::new(Matrix::filled(1, dout, bias)),
        }
    }

    fn conv(&self, x: &Matrix) -> Result<Matrix> {
        nn::conv1d(x, &self.weight, &self.bias)
    }

    fn conv_backward(&mut self, x: &Matrix, dout: &Matrix) -> Matrix {
        nn::conv1d_backward(x, &mut self.weight, &mut self.bias, dout)
    }

    fn params_mut(&mut self) -> [&mut Param; 2] {
        [&mut self.weight, &mut self.bias]
    }
}

/// All trainable weights.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelState {
    /// Advantage regressor: one affine map per frame to a scalar.
    pub adv_fc: Layer,
    pub cls_trunk: Vec<Layer>,
    pub loc_trunk: Vec<Layer>,
    pub cls_out: Layer,
    pub loc_out: Layer,
    pub tmpl_out: Layer,
}

impl ModelState {
    pub fn init(cfg: &ModelConfig) -> Self {
        let mut rng = Rng::new(cfg.init_seed);
        let k = cfg.kernel;
        let adv_in = if cfg.adv_sees_vision { 2 * cfg.dim } else { cfg.dim };
        let adv_fc = Layer::init(&mut rng, adv_in, 1, 0.01, cfg.adv_bias_init);
        let trunk = |rng: &mut Rng| {
            let mut din = cfg.dim;
            (0..cfg.head_layers)
                .map(|_| {
                    let l = Layer::init(rng, k * din, cfg.hidden, (2.0 / (k * din) as f64).sqrt(), 0.0);
                    din = cfg.hidden;
                    l
                })
                .collect::<Vec<_>>()
        };
        let cls_trunk = trunk(&mut rng);
        let loc_trunk = trunk(&mut rng);
        let feat = if cfg.head_layers == 0 { cfg.dim } else { cfg.hidden };
        let prior_bias = -((1.0 - cfg.prior_prob) / cfg.prior_prob).ln();
        let cls_out = Layer::init(&mut rng, k * feat, cfg.num_classes, 0.01, prior_bias);
        let loc_out = Layer::init(&mut rng, k * feat, 2, 0.01, 1.0);
        let tmpl_out = Layer::init(&mut rng, k * feat, cfg.num_classes + 1, 0.01, 0.0);
        ModelState {
            adv_fc,
            cls_trunk,
            loc_trunk,
            cls_out,
            loc_out,
            tmpl_out,
        }
    }

    /// Stable parameter order used by the optimizer and checkpoints.
    pub fn named_params(&self) -> Vec<(String, &Param)> {
        let mut out = vec![
            ("adv_fc.weight".to_string(), &self.adv_fc.weight),
            ("adv_fc.bias".to_string(), &self.adv_fc.bias),
        ];
        for (prefix, trunk) in [("cls_trunk", &self.cls_trunk), ("loc_trunk", &self.loc_trunk)] {
            for (i, l) in trunk.iter().enumerate() {
                out.push((format!("{prefix}.{i}.weight"), &l.weight));
                out.push((format!("{prefix}.{i}.bias"), &l.bias));
            }
        }
        for (name, l) in [("cls_out", &self.cls_out), ("loc_out", &self.loc_out), ("tmpl_out", &self.tmpl_out)] {
            out.push((format!("{name}.weight"), &l.weight));
            out.push((format!("{name}.bias"), &l.bias));
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut out: Vec<&mut Param> = self.adv_fc.params_mut().into();
        for l in self.cls_trunk.iter_mut().chain(self.loc_trunk.iter_mut()) {
            out.extend(l.params_mut());
        }
        out.extend(self.cls_out.params_mut());
        out.extend(self.loc_out.params_mut());
        out.extend(self.tmpl_out.params_mut());
        out
    }

    pub fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }
}

/// Per-frame predictions of one video.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameOutputs {
    /// `L x C` class probabilities.
    pub cls_scores: Matrix,
    /// `L x 2` distances from the frame to the predicted start and end.
    pub offsets: Matrix,
    /// `L x 1` language gate.
    pub lambda: Matrix,
    /// `L x 1` predicted language advantage.
    pub adv_pred: Matrix,
    /// `L x (C + 1)` template-token logits, last column is background.
    pub tmpl_logits: Matrix,
}

impl FrameOutputs {
    pub fn frames(&self) -> usize {
        self.cls_scores.rows()
    }
}

/// What the head sees in one forward pass.
#[derive(Clone, Copy, Debug)]
pub enum Inputs<'a> {
    /// Vision features on both branches; no language, no gate.
    VisionOnly(&'a Matrix),
    /// Vision fused with language according to the model's [`Fusion`].
    Fused {
        vis: &'a Matrix,
        lang: &'a LanguageBundle,
    },
}

/// `Â = FC(adv)`, one affine projection per frame.
pub fn predict_advantage(adv_in: &Matrix, state: &ModelState) -> Result<Matrix> {
    nn::linear(adv_in, &state.adv_fc.weight, &state.adv_fc.bias)
}

/// `lambda = 2 sigmoid(relu(Â)) - 1`, elementwise, in `[0, 1)`.
pub fn lambda_from_advantage(adv: &Matrix) -> Matrix {
    adv.map(|a| 2.0 * nn::sigmoid_scalar(a.max(0.0)) - 1.0)
}

/// Residual aggregation `F = F_vis + lambda * F_lang` for the classification
/// and localization branches. Frames with a zero gate copy the vision row.
pub fn aggregate(vis: &Matrix, bundle: &LanguageBundle, lambda: &Matrix) -> Result<(Matrix, Matrix)> {
    vis.ensure_same_shape("aggregate cls", &bundle.cls_stream)?;
    vis.ensure_same_shape("aggregate loc", &bundle.loc_stream)?;
    if lambda.shape() != (vis.rows(), 1) {
        return Err(Error::Shape {
            op: "aggregate gate",
            left: lambda.shape(),
            right: (vis.rows(), 1),
        });
    }
    let fuse = |lang: &Matrix| {
        let mut out = vis.clone();
        for l in 0..vis.rows() {
            let g = lambda[(l, 0)];
            if g == 0.0 {
                continue;
            }
            for (o, x) in out.row_mut(l).iter_mut().zip(lang.row(l)) {
                *o += g * x;
            }
        }
        out
    };
    Ok((fuse(&bundle.cls_stream), fuse(&bundle.loc_stream)))
}

struct TrunkCache {
    inputs: Vec<Matrix>,
    pre: Vec<Matrix>,
    features: Matrix,
}

fn trunk_forward(layers: &[Layer], x: &Matrix) -> Result<TrunkCache> {
    let mut inputs = Vec::with_capacity(layers.len());
    let mut pre = Vec::with_capacity(layers.len());
    let mut cur = x.clone();
    for layer in layers {
        let z = layer.conv(&cur)?;
        let next = nn::relu(&z);
        inputs.push(cur);
        pre.push(z);
        cur = next;
    }
    Ok(TrunkCache {
        inputs,
        pre,
        features: cur,
    })
}

fn trunk_backward(layers: &mut [Layer], cache: &TrunkCache, dfeat: Matrix) -> Matrix {
    let mut d = dfeat;
    for (i, layer) in layers.iter_mut().enumerate().rev() {
        let dz = nn::relu_backward(&cache.pre[i], &d);
        d = layer.conv_backward(&cache.inputs[i], &dz);
    }
    d
}

/// Forward activations kept for the backward pass.
pub struct Forward {
    pub outputs: FrameOutputs,
    gate: Option<GateCache>,
    cls: TrunkCache,
    loc: TrunkCache,
    loc_raw: Matrix,
}

struct GateCache {
    adv_in: Matrix,
    lang_cls: Matrix,
    lang_loc: Matrix,
}

/// Gradients of a scalar loss with respect to the raw head outputs.
#[derive(Clone, Debug)]
pub struct OutputGrads {
    /// `d loss / d logit` for each class score (pre-sigmoid).
    pub cls_logits: Matrix,
    pub offsets: Matrix,
    pub tmpl_logits: Option<Matrix>,
    /// Direct gradient on the advantage prediction (the regression loss).
    pub adv_pred: Option<Matrix>,
}

impl OutputGrads {
    pub fn zeros(frames: usize, num_classes: usize) -> Self {
        OutputGrads {
            cls_logits: Matrix::zeros(frames, num_classes),
            offsets: Matrix::zeros(frames, 2),
            tmpl_logits: None,
            adv_pred: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub state: ModelState,
}

impl Model {
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let state = ModelState::init(&config);
        Ok(Model { config, state })
    }

    fn adv_input(&self, vis: &Matrix, lang: &LanguageBundle) -> Result<Matrix> {
        if self.config.adv_sees_vision {
            lang.adv_stream.hconcat(vis)
        } else {
            Ok(lang.adv_stream.clone())
        }
    }

    pub fn forward(&self, inputs: Inputs<'_>) -> Result<Forward> {
        let (vis, frames) = match inputs {
            Inputs::VisionOnly(v) | Inputs::Fused { vis: v, .. } => (v, v.rows()),
        };
        if vis.cols() != self.config.dim {
            return Err(Error::Shape {
                op: "model input",
                left: vis.shape(),
                right: (frames, self.config.dim),
            });
        }
        let zeros = Matrix::zeros(frames, 1);
        let (f_cls, f_loc, lambda, adv_pred, gate) = match inputs {
            Inputs::VisionOnly(v) => (v.clone(), v.clone(), zeros.clone(), zeros, None),
            Inputs::Fused { vis, lang } => match self.config.fusion {
                Fusion::Learned => {
                    let adv_in = self.adv_input(vis, lang)?;
                    let adv_pred = predict_advantage(&adv_in, &self.state)?;
                    let lambda = lambda_from_advantage(&adv_pred);
                    let (c, l) = aggregate(vis, lang, &lambda)?;
                    let gate = GateCache {
                        adv_in,
                        lang_cls: lang.cls_stream.clone(),
                        lang_loc: lang.loc_stream.clone(),
                    };
                    (c, l, lambda, adv_pred, Some(gate))
                }
                Fusion::Fixed(g) => {
                    let lambda = Matrix::filled(frames, 1, g);
                    let (c, l) = aggregate(vis, lang, &lambda)?;
                    (c, l, lambda, zeros, None)
                }
                Fusion::LanguageOnly => {
                    vis.ensure_same_shape("language-only", &lang.cls_stream)?;
                    vis.ensure_same_shape("language-only", &lang.loc_stream)?;
                    let ones = Matrix::filled(frames, 1, 1.0);
                    (lang.cls_stream.clone(), lang.loc_stream.clone(), ones, zeros, None)
                }
            },
        };
        let cls = trunk_forward(&self.state.cls_trunk, &f_cls)?;
        let loc = trunk_forward(&self.state.loc_trunk, &f_loc)?;
        let cls_scores = nn::sigmoid(&self.state.cls_out.conv(&cls.features)?);
        let tmpl_logits = self.state.tmpl_out.conv(&cls.features)?;
        let loc_raw = self.state.loc_out.conv(&loc.features)?;
        let scale = self.config.offset_scale;
        let offsets = loc_raw.map(|z| scale * z.max(0.0));
        Ok(Forward {
            outputs: FrameOutputs {
                cls_scores,
                offsets,
                lambda,
                adv_pred,
                tmpl_logits,
            },
            gate,
            cls,
            loc,
            loc_raw,
        })
    }

    pub fn predict(&self, inputs: Inputs<'_>) -> Result<FrameOutputs> {
        Ok(self.forward(inputs)?.outputs)
    }

    /// Accumulates parameter gradients for the loss whose output gradients are
    /// `grads`. Does not zero existing gradients.
    pub fn backward(&mut self, fwd: &Forward, grads: &OutputGrads) {
        let state = &mut self.state;
        let scale = self.config.offset_scale;
        let dloc_raw = Matrix::from_fn(fwd.loc_raw.rows(), 2, |r, c| {
            if fwd.loc_raw[(r, c)] > 0.0 {
                scale * grads.offsets[(r, c)]
            } else {
                0.0
            }
        });
        let dloc_feat = state.loc_out.conv_backward(&fwd.loc.features, &dloc_raw);
        let mut dcls_feat = state.cls_out.conv_backward(&fwd.cls.features, &grads.cls_logits);
        if let Some(dt) = &grads.tmpl_logits {
            let d = state.tmpl_out.conv_backward(&fwd.cls.features, dt);
            dcls_feat.add_assign(&d).expect("template grad shape");
        }
        let df_loc = trunk_backward(&mut state.loc_trunk, &fwd.loc, dloc_feat);
        let df_cls = trunk_backward(&mut state.cls_trunk, &fwd.cls, dcls_feat);

        let Some(gate) = &fwd.gate else {
            return;
        };
        let frames = df_cls.rows();
        let mut dadv = grads.adv_pred.clone().unwrap_or_else(|| Matrix::zeros(frames, 1));
        for l in 0..frames {
            let a = fwd.outputs.adv_pred[(l, 0)];
            if a <= 0.0 {
                continue;
            }
            let dlambda: f64 = df_cls
                .row(l)
                .iter()
                .zip(gate.lang_cls.row(l))
                .chain(df_loc.row(l).iter().zip(gate.lang_loc.row(l)))
                .map(|(g, x)| g * x)
                .sum();
            let s = nn::sigmoid_scalar(a);
            dadv[(l, 0)] += dlambda * 2.0 * s * (1.0 - s);
        }
        nn::linear_backward(&gate.adv_in, &mut state.adv_fc.weight, &mut state.adv_fc.bias, &dadv);
    }
}

/// Detection head on already aggregated features. The gate and advantage
/// fields of the result are zero.
pub fn head_forward(f_cls: &Matrix, f_loc: &Matrix, model: &Model) -> Result<FrameOutputs> {
    f_cls.ensure_same_shape("head_forward", f_loc)?;
    let cls = trunk_forward(&model.state.cls_trunk, f_cls)?;
    let loc = trunk_forward(&model.state.loc_trunk, f_loc)?;
    let scale = model.config.offset_scale;
    let frames = f_cls.rows();
    Ok(FrameOutputs {
        cls_scores: nn::sigmoid(&model.state.cls_out.conv(&cls.features)?),
        offsets: model.state.loc_out.conv(&loc.features)?.map(|z| scale * z.max(0.0)),
        lambda: Matrix::zeros(frames, 1),
        adv_pred: Matrix::zeros(frames, 1),
        tmpl_logits: model.state.tmpl_out.conv(&cls.features)?,
    })
}

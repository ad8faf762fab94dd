//! FiLM-conditioned mask network.
//!
//! ```text
//! h_x   = E(x)                                 linear conv, C filters, kernel K, stride K/2
//! γ_i   = F_i(z), β_i = G_i(z)                 two-layer perceptrons D → H → C
//! h̃_i   = γ_i ⊙ h_i + β_i                      γ, β broadcast over latent time
//! h_i+1 = ReLU(conv_i(h̃_i))                    kernel 3, dilation 2^i
//! h_m   = clamp(W h_R + b, 0, m_max)           one mask per output head
//! ŝ_n   = D(h_m,n ⊙ h_x),   ŷ = Σ_n ŝ_n         transposed-conv decoder, zero-padded to T
//! ```
//!
//! All parameters live in one flat `f64` vector so optimizers, checkpoints
//! and finite-difference checks can treat the network uniformly. Gradients
//! are hand-derived; ReLU kinks and the mask clamp use subgradient 0.

use std::f64::consts::{LN_10, PI};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{EditingMask, EditorError, DEFAULT_M_MAX};
use crate::metrics::{snr_samples, MetricValue};
use crate::seed;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilmConfig {
    /// Latent channels `C`.
    pub channels: usize,
    /// Encoder/decoder kernel `K`; the stride is `K / 2`.
    pub kernel: usize,
    /// Editing blocks `R`.
    pub blocks: usize,
    /// Conditioning dimension `D`.
    pub embed_dim: usize,
    /// Hidden width of the FiLM perceptrons.
    pub hidden: usize,
    /// Number of output masks.
    pub n_masks: usize,
    pub m_max: f64,
}

impl Default for FilmConfig {
    fn default() -> Self {
        FilmConfig { channels: 64, kernel: 16, blocks: 4, embed_dim: 32, hidden: 64, n_masks: 1, m_max: DEFAULT_M_MAX }
    }
}

impl FilmConfig {
    /// The small configuration used for gradient checks.
    pub fn toy() -> Self {
        FilmConfig { channels: 8, kernel: 16, blocks: 2, embed_dim: 8, hidden: 8, n_masks: 1, m_max: DEFAULT_M_MAX }
    }

    pub fn stride(&self) -> usize {
        self.kernel / 2
    }

    /// `floor((T − K) / (K/2)) + 1`, or `None` when `T < K`.
    pub fn latent_frames(&self, t: usize) -> Option<usize> {
        (t >= self.kernel).then(|| (t - self.kernel) / self.stride() + 1)
    }

    pub fn validate(&self) -> Result<(), EditorError> {
        let bad = |m: &str| Err(EditorError::ShapeMismatch(m.to_string()));
        if self.kernel < 2 || !self.kernel.is_multiple_of(2) {
            return bad("kernel must be even and at least 2");
        }
        if self.channels == 0 || self.embed_dim == 0 || self.hidden == 0 || self.n_masks == 0 {
            return bad("channels, embed_dim, hidden and n_masks must be positive");
        }
        if !(self.m_max > 0.0 && self.m_max.is_finite()) {
            return bad("m_max must be positive");
        }
        if self.blocks > 16 {
            return bad("at most 16 blocks");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
struct MlpIdx {
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
}

#[derive(Clone, Debug, PartialEq)]
struct BlockIdx {
    gamma: MlpIdx,
    beta: MlpIdx,
    conv_w: usize,
    conv_b: usize,
}

/// Offsets of every tensor inside the flat parameter vector.
#[derive(Clone, Debug, PartialEq)]
struct Layout {
    enc: usize,
    dec: usize,
    blocks: Vec<BlockIdx>,
    head_w: usize,
    head_b: usize,
    total: usize,
    shapes: Vec<(String, Vec<usize>)>,
}

impl Layout {
    fn new(cfg: &FilmConfig) -> Self {
        let (c, k, d, h, n) = (cfg.channels, cfg.kernel, cfg.embed_dim, cfg.hidden, cfg.n_masks);
        let mut total = 0;
        let mut shapes = Vec::new();
        let mut alloc = |name: String, shape: Vec<usize>| {
            let at = total;
            total += shape.iter().product::<usize>();
            shapes.push((name, shape));
            at
        };
        let enc = alloc("encoder".into(), vec![c, k]);
        let dec = alloc("decoder".into(), vec![c, k]);
        let blocks = (0..cfg.blocks)
            .map(|r| {
                let mut mlp = |which: &str| MlpIdx {
                    w1: alloc(format!("block{r}.{which}.w1"), vec![h, d]),
                    b1: alloc(format!("block{r}.{which}.b1"), vec![h]),
                    w2: alloc(format!("block{r}.{which}.w2"), vec![c, h]),
                    b2: alloc(format!("block{r}.{which}.b2"), vec![c]),
                };
                let gamma = mlp("gamma");
                let beta = mlp("beta");
                BlockIdx {
                    gamma,
                    beta,
                    conv_w: alloc(format!("block{r}.conv.w"), vec![c, c, 3]),
                    conv_b: alloc(format!("block{r}.conv.b"), vec![c]),
                }
            })
            .collect();
        let head_w = alloc("head.w".into(), vec![n * c, c]);
        let head_b = alloc("head.b".into(), vec![n * c]);
        Layout { enc, dec, blocks, head_w, head_b, total, shapes }
    }
}

/// How the editing blocks are modulated.
#[derive(Clone, Copy, Debug)]
pub enum Conditioning<'a> {
    /// γ and β computed from `z` by the FiLM perceptrons.
    Embedding(&'a [f64]),
    /// Explicit per-block `(γ, β)`.
    Film(&'a [(Vec<f64>, Vec<f64>)]),
    /// No modulation at all.
    Unconditioned,
}

#[derive(Clone, Debug)]
struct MlpCache {
    pre: Vec<f64>,
}

#[derive(Clone, Debug)]
struct BlockCache {
    h_in: Vec<f64>,
    gamma: Vec<f64>,
    beta: Vec<f64>,
    mlp: Option<(MlpCache, MlpCache)>,
    h_mod: Vec<f64>,
    pre: Vec<f64>,
}

/// Output of one forward pass plus what the backward pass needs.
#[derive(Clone, Debug)]
pub struct FilmOutput {
    /// `ŷ`, same length as the input.
    pub output: Vec<f64>,
    /// Per-mask decoded outputs `ŝ_n`; they sum to `output`.
    pub sources: Vec<Vec<f64>>,
    /// Masks as `[latent frame][n·C + c]`.
    pub mask: EditingMask,
    x: Vec<f64>,
    z: Option<Vec<f64>>,
    frames: usize,
    h_x: Vec<f64>,
    blocks: Vec<BlockCache>,
    h_last: Vec<f64>,
    head_pre: Vec<f64>,
    masks: Vec<f64>,
}

impl FilmOutput {
    pub fn latent_frames(&self) -> usize {
        self.frames
    }

    /// `(γ_i, β_i)` used by each block.
    pub fn film(&self) -> Vec<(Vec<f64>, Vec<f64>)> {
        self.blocks.iter().map(|b| (b.gamma.clone(), b.beta.clone())).collect()
    }

    /// Block input `h_i` and modulated `h̃_i`, both `[c·L + l]`.
    pub fn block_io(&self, block: usize) -> (&[f64], &[f64]) {
        let b = &self.blocks[block];
        (&b.h_in, &b.h_mod)
    }

    /// Piecewise-linear regime of every nonlinearity: 1 for an active ReLU,
    /// 0 for an inactive one; for mask units 0 / 1 / 2 for below, inside
    /// and above the clamp range. Two passes with equal patterns lie on the
    /// same smooth piece of the network.
    pub fn activation_pattern(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for b in &self.blocks {
            if let Some((g, be)) = &b.mlp {
                out.extend(g.pre.iter().chain(&be.pre).map(|v| u8::from(*v > 0.0)));
            }
            out.extend(b.pre.iter().map(|v| u8::from(*v > 0.0)));
        }
        let m_max = self.mask.m_max;
        out.extend(self.head_pre.iter().map(|v| {
            if *v <= 0.0 {
                0
            } else if *v < m_max {
                1
            } else {
                2
            }
        }));
        out
    }

    /// Encoded mixture `h_x`, `[c·L + l]`.
    pub fn encoded(&self) -> &[f64] {
        &self.h_x
    }
}

/// Gradients with the same layout as the parameter vector, plus `∂L/∂z`.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub params: Vec<f64>,
    pub z: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct LossAndGrad {
    pub loss: f64,
    pub snr: MetricValue,
    pub grads: Gradients,
    pub output: FilmOutput,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FilmMaskNet {
    config: FilmConfig,
    params: Vec<f64>,
    layout: Layout,
}

fn relu(v: f64) -> f64 {
    v.max(0.0)
}

/// Orthonormal lapped-cosine basis for a `2M`-tap frame with hop `M`.
fn mlt_basis(k: usize, n: usize, m: usize) -> f64 {
    let mf = m as f64;
    let w = (PI * (n as f64 + 0.5) / (2.0 * mf)).sin();
    (2.0 / mf).sqrt() * w * (PI / mf * (n as f64 + 0.5 + mf / 2.0) * (k as f64 + 0.5)).cos()
}

impl FilmMaskNet {
    /// Seeded initialisation. The first `K/2` encoder/decoder channels start
    /// as a perfect-reconstruction lapped cosine transform and the head
    /// bias starts at 1, so an untrained net approximately passes the
    /// mixture through.
    pub fn new(config: FilmConfig, seed_value: u64) -> Result<Self, EditorError> {
        config.validate()?;
        let layout = Layout::new(&config);
        let mut p = vec![0.0; layout.total];
        let mut rng = seed::rng(seed::derive_named(seed_value, "film-init"));
        let (c, k, d, h) = (config.channels, config.kernel, config.embed_dim, config.hidden);
        let m = config.stride();
        let mut uniform = |slice: &mut [f64], scale: f64| {
            for v in slice {
                *v = rng.gen_range(-scale..scale);
            }
        };
        for ch in 0..c {
            let row = layout.enc + ch * k..layout.enc + (ch + 1) * k;
            if ch < m {
                for n in 0..k {
                    p[layout.enc + ch * k + n] = mlt_basis(ch, n, m);
                    p[layout.dec + ch * k + n] = mlt_basis(ch, n, m);
                }
            } else {
                uniform(&mut p[row], 0.1 / (k as f64).sqrt());
            }
        }
        for b in &layout.blocks {
            for (mlp, bias) in [(&b.gamma, 1.0), (&b.beta, 0.0)] {
                uniform(&mut p[mlp.w1..mlp.w1 + h * d], 1.0 / (d as f64).sqrt());
                p[mlp.b1..mlp.b1 + h].fill(0.1);
                uniform(&mut p[mlp.w2..mlp.w2 + c * h], 0.1 / (h as f64).sqrt());
                p[mlp.b2..mlp.b2 + c].fill(bias);
            }
            uniform(&mut p[b.conv_w..b.conv_w + c * c * 3], (1.0 / (3.0 * c as f64)).sqrt());
            p[b.conv_b..b.conv_b + c].fill(0.1);
        }
        let nc = config.n_masks * c;
        uniform(&mut p[layout.head_w..layout.head_w + nc * c], 0.1 / (c as f64).sqrt());
        p[layout.head_b..layout.head_b + nc].fill(1.0);
        Ok(FilmMaskNet { config, params: p, layout })
    }

    pub fn from_params(config: FilmConfig, params: Vec<f64>) -> Result<Self, EditorError> {
        config.validate()?;
        let layout = Layout::new(&config);
        if params.len() != layout.total {
            return Err(EditorError::ShapeMismatch(format!(
                "{} parameters for a network with {}",
                params.len(),
                layout.total
            )));
        }
        Ok(FilmMaskNet { config, params, layout })
    }

    pub fn config(&self) -> &FilmConfig {
        &self.config
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// `(name, shape)` of every tensor, in storage order.
    pub fn tensor_shapes(&self) -> &[(String, Vec<usize>)] {
        &self.layout.shapes
    }

    /// Offset of the head bias; with it one can overwrite the initial mask
    /// level for experiments.
    pub fn head_bias_range(&self) -> std::ops::Range<usize> {
        self.layout.head_b..self.layout.head_b + self.config.n_masks * self.config.channels
    }

    /// Head weight range, `[n·C + c][i]` row-major.
    pub fn head_weight_range(&self) -> std::ops::Range<usize> {
        let nc = self.config.n_masks * self.config.channels;
        self.layout.head_w..self.layout.head_w + nc * self.config.channels
    }

    fn mlp_forward(&self, idx: &MlpIdx, z: &[f64]) -> (Vec<f64>, MlpCache) {
        let (c, d, h) = (self.config.channels, self.config.embed_dim, self.config.hidden);
        let p = &self.params;
        let pre: Vec<f64> =
            (0..h).map(|j| p[idx.b1 + j] + (0..d).map(|i| p[idx.w1 + j * d + i] * z[i]).sum::<f64>()).collect();
        let out = (0..c)
            .map(|o| p[idx.b2 + o] + (0..h).map(|j| p[idx.w2 + o * h + j] * relu(pre[j])).sum::<f64>())
            .collect();
        (out, MlpCache { pre })
    }

    /// Per-block `(γ, β)` for a conditioning vector.
    pub fn film_params(&self, z: &[f64]) -> Result<Vec<(Vec<f64>, Vec<f64>)>, EditorError> {
        self.check_z(z)?;
        Ok(self
            .layout
            .blocks
            .iter()
            .map(|b| (self.mlp_forward(&b.gamma, z).0, self.mlp_forward(&b.beta, z).0))
            .collect())
    }

    fn check_z(&self, z: &[f64]) -> Result<(), EditorError> {
        if z.len() != self.config.embed_dim {
            return Err(EditorError::ShapeMismatch(format!(
                "conditioning has {} entries, expected {}",
                z.len(),
                self.config.embed_dim
            )));
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64], cond: Conditioning<'_>) -> Result<FilmOutput, EditorError> {
        let cfg = &self.config;
        let (c, k, s) = (cfg.channels, cfg.kernel, cfg.stride());
        let l = cfg.latent_frames(x.len()).ok_or_else(|| {
            EditorError::ShapeMismatch(format!("input of {} samples is shorter than the kernel {k}", x.len()))
        })?;
        let p = &self.params;
        let lay = &self.layout;

        let mut h_x = vec![0.0; c * l];
        for ch in 0..c {
            let w = &p[lay.enc + ch * k..lay.enc + (ch + 1) * k];
            for f in 0..l {
                let seg = &x[f * s..f * s + k];
                h_x[ch * l + f] = w.iter().zip(seg).map(|(a, b)| a * b).sum();
            }
        }

        let z = match cond {
            Conditioning::Embedding(z) => {
                self.check_z(z)?;
                Some(z.to_vec())
            }
            _ => None,
        };
        if let Conditioning::Film(f) = cond {
            if f.len() != cfg.blocks || f.iter().any(|(g, b)| g.len() != c || b.len() != c) {
                return Err(EditorError::ShapeMismatch("explicit FiLM parameters have the wrong shape".into()));
            }
        }

        let mut h = h_x.clone();
        let mut blocks = Vec::with_capacity(cfg.blocks);
        for (r, bi) in lay.blocks.iter().enumerate() {
            let (gamma, beta, mlp) = match cond {
                Conditioning::Embedding(z) => {
                    let (g, gc) = self.mlp_forward(&bi.gamma, z);
                    let (b, bc) = self.mlp_forward(&bi.beta, z);
                    (g, b, Some((gc, bc)))
                }
                Conditioning::Film(f) => (f[r].0.clone(), f[r].1.clone(), None),
                Conditioning::Unconditioned => (vec![1.0; c], vec![0.0; c], None),
            };
            let h_mod: Vec<f64> = if matches!(cond, Conditioning::Unconditioned) {
                h.clone()
            } else {
                modulate(&h, &gamma, &beta, l)
            };
            let dil = 1isize << r;
            let mut pre = vec![0.0; c * l];
            for o in 0..c {
                let row = &mut pre[o * l..(o + 1) * l];
                row.fill(p[bi.conv_b + o]);
                for i in 0..c {
                    let src = &h_mod[i * l..(i + 1) * l];
                    for tap in 0..3 {
                        let w = p[bi.conv_w + (o * c + i) * 3 + tap];
                        let shift = (tap as isize - 1) * dil;
                        for (f, out) in row.iter_mut().enumerate() {
                            let j = f as isize + shift;
                            if j >= 0 && (j as usize) < l {
                                *out += w * src[j as usize];
                            }
                        }
                    }
                }
            }
            let next: Vec<f64> = pre.iter().map(|v| relu(*v)).collect();
            blocks.push(BlockCache { h_in: std::mem::replace(&mut h, next), gamma, beta, mlp, h_mod, pre });
        }

        let nc = cfg.n_masks * c;
        let mut head_pre = vec![0.0; nc * l];
        for o in 0..nc {
            let row = &mut head_pre[o * l..(o + 1) * l];
            row.fill(p[lay.head_b + o]);
            for i in 0..c {
                let w = p[lay.head_w + o * c + i];
                for (out, v) in row.iter_mut().zip(&h[i * l..(i + 1) * l]) {
                    *out += w * v;
                }
            }
        }
        let masks: Vec<f64> = head_pre.iter().map(|v| v.clamp(0.0, cfg.m_max)).collect();

        let t = x.len();
        let mut sources = vec![vec![0.0; t]; cfg.n_masks];
        for (n, src) in sources.iter_mut().enumerate() {
            for ch in 0..c {
                let w = &p[lay.dec + ch * k..lay.dec + (ch + 1) * k];
                for f in 0..l {
                    let a = masks[(n * c + ch) * l + f] * h_x[ch * l + f];
                    if a == 0.0 {
                        continue;
                    }
                    for (o, wk) in src[f * s..f * s + k].iter_mut().zip(w) {
                        *o += a * wk;
                    }
                }
            }
        }
        let mut output = vec![0.0; t];
        for src in &sources {
            for (o, v) in output.iter_mut().zip(src) {
                *o += v;
            }
        }
        let mask = EditingMask {
            values: (0..l).map(|f| (0..nc).map(|o| masks[o * l + f]).collect()).collect(),
            m_max: cfg.m_max,
        };
        Ok(FilmOutput {
            output,
            sources,
            mask,
            x: x.to_vec(),
            z,
            frames: l,
            h_x,
            blocks,
            h_last: h,
            head_pre,
            masks,
        })
    }

    fn mlp_backward(&self, idx: &MlpIdx, cache: &MlpCache, z: &[f64], d_out: &[f64], g: &mut [f64], dz: &mut [f64]) {
        let (c, d, h) = (self.config.channels, self.config.embed_dim, self.config.hidden);
        let p = &self.params;
        let mut d_hidden = vec![0.0; h];
        for o in 0..c {
            g[idx.b2 + o] += d_out[o];
            for j in 0..h {
                g[idx.w2 + o * h + j] += d_out[o] * relu(cache.pre[j]);
                d_hidden[j] += p[idx.w2 + o * h + j] * d_out[o];
            }
        }
        for j in 0..h {
            if cache.pre[j] <= 0.0 {
                continue;
            }
            let dp = d_hidden[j];
            g[idx.b1 + j] += dp;
            for i in 0..d {
                g[idx.w1 + j * d + i] += dp * z[i];
                dz[i] += p[idx.w1 + j * d + i] * dp;
            }
        }
    }

    /// Reverse pass given `∂L/∂ŝ_n` for every mask output.
    pub fn backward(&self, out: &FilmOutput, d_sources: &[Vec<f64>]) -> Result<Gradients, EditorError> {
        let cfg = &self.config;
        let (c, k, s, l) = (cfg.channels, cfg.kernel, cfg.stride(), out.frames);
        if d_sources.len() != cfg.n_masks || d_sources.iter().any(|d| d.len() != out.x.len()) {
            return Err(EditorError::ShapeMismatch("output gradient has the wrong shape".into()));
        }
        let p = &self.params;
        let lay = &self.layout;
        let mut g = vec![0.0; lay.total];
        let mut dz = vec![0.0; cfg.embed_dim];
        let nc = cfg.n_masks * c;

        // decoder
        let mut d_hx = vec![0.0; c * l];
        let mut d_head = vec![0.0; nc * l];
        for (n, ds) in d_sources.iter().enumerate() {
            for ch in 0..c {
                let w = &p[lay.dec + ch * k..lay.dec + (ch + 1) * k];
                for f in 0..l {
                    let seg = &ds[f * s..f * s + k];
                    let mi = (n * c + ch) * l + f;
                    let a = out.masks[mi] * out.h_x[ch * l + f];
                    let d_a: f64 = w.iter().zip(seg).map(|(x, y)| x * y).sum();
                    for (gk, sv) in g[lay.dec + ch * k..lay.dec + (ch + 1) * k].iter_mut().zip(seg) {
                        *gk += a * sv;
                    }
                    d_hx[ch * l + f] += d_a * out.masks[mi];
                    let pre = out.head_pre[mi];
                    if pre > 0.0 && pre < cfg.m_max {
                        d_head[mi] = d_a * out.h_x[ch * l + f];
                    }
                }
            }
        }

        // head
        let mut d_h = vec![0.0; c * l];
        for o in 0..nc {
            let row = &d_head[o * l..(o + 1) * l];
            g[lay.head_b + o] += row.iter().sum::<f64>();
            for i in 0..c {
                let hi = &out.h_last[i * l..(i + 1) * l];
                g[lay.head_w + o * c + i] += row.iter().zip(hi).map(|(a, b)| a * b).sum::<f64>();
                let w = p[lay.head_w + o * c + i];
                for (dh, dr) in d_h[i * l..(i + 1) * l].iter_mut().zip(row) {
                    *dh += w * dr;
                }
            }
        }

        // editing blocks, last to first
        for (r, (bi, bc)) in lay.blocks.iter().zip(&out.blocks).enumerate().rev() {
            let d_pre: Vec<f64> = d_h.iter().zip(&bc.pre).map(|(d, v)| if *v > 0.0 { *d } else { 0.0 }).collect();
            let dil = 1isize << r;
            let mut d_mod = vec![0.0; c * l];
            for o in 0..c {
                let dp = &d_pre[o * l..(o + 1) * l];
                g[bi.conv_b + o] += dp.iter().sum::<f64>();
                for i in 0..c {
                    let src = &bc.h_mod[i * l..(i + 1) * l];
                    for tap in 0..3 {
                        let wi = bi.conv_w + (o * c + i) * 3 + tap;
                        let shift = (tap as isize - 1) * dil;
                        let mut gw = 0.0;
                        for (f, dv) in dp.iter().enumerate() {
                            let j = f as isize + shift;
                            if j >= 0 && (j as usize) < l {
                                gw += dv * src[j as usize];
                                d_mod[i * l + j as usize] += p[wi] * dv;
                            }
                        }
                        g[wi] += gw;
                    }
                }
            }
            let mut d_in = vec![0.0; c * l];
            let mut d_gamma = vec![0.0; c];
            let mut d_beta = vec![0.0; c];
            for ch in 0..c {
                for f in 0..l {
                    let i = ch * l + f;
                    d_gamma[ch] += d_mod[i] * bc.h_in[i];
                    d_beta[ch] += d_mod[i];
                    d_in[i] = if bc.mlp.is_some() || bc.gamma[ch] != 1.0 { bc.gamma[ch] * d_mod[i] } else { d_mod[i] };
                }
            }
            if let (Some((gc, bcache)), Some(z)) = (&bc.mlp, &out.z) {
                self.mlp_backward(&bi.gamma, gc, z, &d_gamma, &mut g, &mut dz);
                self.mlp_backward(&bi.beta, bcache, z, &d_beta, &mut g, &mut dz);
            }
            d_h = d_in;
        }
        for (a, b) in d_hx.iter_mut().zip(&d_h) {
            *a += b;
        }

        // encoder
        for ch in 0..c {
            for f in 0..l {
                let dv = d_hx[ch * l + f];
                if dv == 0.0 {
                    continue;
                }
                for (gk, xv) in g[lay.enc + ch * k..lay.enc + (ch + 1) * k].iter_mut().zip(&out.x[f * s..f * s + k]) {
                    *gk += dv * xv;
                }
            }
        }
        Ok(Gradients { params: g, z: dz })
    }
}

/// `h̃[c][l] = γ[c]·h[c][l] + β[c]` for every latent frame `l`.
pub(crate) fn modulate(h: &[f64], gamma: &[f64], beta: &[f64], frames: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(h.len());
    for (ch, row) in h.chunks(frames).enumerate() {
        out.extend(row.iter().map(|v| gamma[ch] * v + beta[ch]));
    }
    out
}

/// `∂(−SNR)/∂ŷ`, zero when the SNR is clamped.
pub(crate) fn neg_snr_grad(est: &[f64], reference: &[f64], value: MetricValue) -> Vec<f64> {
    if !value.finite {
        return vec![0.0; est.len()];
    }
    let err: f64 = est.iter().zip(reference).map(|(a, b)| (a - b) * (a - b)).sum();
    let scale = 20.0 / LN_10 / err;
    est.iter().zip(reference).map(|(a, b)| scale * (a - b)).collect()
}

/// Loss `−SNR(ŷ, y)` and its gradient with respect to every parameter and `z`.
pub fn snr_loss_grad(net: &FilmMaskNet, x: &[f64], z: &[f64], y: &[f64]) -> Result<LossAndGrad, EditorError> {
    let out = net.forward(x, Conditioning::Embedding(z))?;
    let value = snr_samples(&out.output, y)?;
    let d = neg_snr_grad(&out.output, y, value);
    let grads = net.backward(&out, &vec![d; net.config.n_masks])?;
    Ok(LossAndGrad { loss: -value.value, snr: value, grads, output: out })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn signal(n: usize, seed_value: u64) -> Vec<f64> {
        let mut rng = seed::rng(seed_value);
        (0..n)
            .map(|i| 0.5 * (2.0 * PI * 440.0 * i as f64 / 16_000.0).sin() + rng.gen_range(-0.1..0.1))
            .collect()
    }

    #[test]
    fn latent_frame_arithmetic() {
        let cfg = FilmConfig::default();
        assert_eq!(cfg.latent_frames(80_000), Some(9999));
        assert_eq!(cfg.latent_frames(15), None);
        assert_eq!(cfg.latent_frames(16), Some(1));
    }

    #[test]
    fn untrained_net_is_near_identity() {
        let net = FilmMaskNet::new(FilmConfig::toy(), 1).unwrap();
        let x = signal(1600, 2);
        let z = vec![0.0; 8];
        let out = net.forward(&x, Conditioning::Embedding(&z)).unwrap();
        assert_eq!(out.output.len(), x.len());
        // interior only: the first and last half-frames have no overlap partner
        let interior = 8..1592;
        let err: f64 = interior.clone().map(|i| (out.output[i] - x[i]).powi(2)).sum();
        let energy: f64 = interior.map(|i| x[i] * x[i]).sum();
        let snr = 10.0 * (energy / err).log10();
        assert!(snr > 15.0, "identity-ish init gives {snr:.1} dB");
    }

    #[test]
    fn mlt_init_reconstructs_with_unit_mask() {
        let mut net = FilmMaskNet::new(FilmConfig::toy(), 3).unwrap();
        let hw = net.head_weight_range();
        net.params_mut()[hw].fill(0.0);
        let x = signal(800, 4);
        let out = net.forward(&x, Conditioning::Unconditioned).unwrap();
        for i in 8..792 {
            assert!((out.output[i] - x[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn film_identity_equals_unconditioned() {
        let cfg = FilmConfig::toy();
        let net = FilmMaskNet::new(cfg, 5).unwrap();
        let x = signal(400, 6);
        let ident: Vec<(Vec<f64>, Vec<f64>)> = (0..cfg.blocks).map(|_| (vec![1.0; 8], vec![0.0; 8])).collect();
        let a = net.forward(&x, Conditioning::Film(&ident)).unwrap();
        let b = net.forward(&x, Conditioning::Unconditioned).unwrap();
        assert_eq!(a.output, b.output);
    }

    #[test]
    fn film_is_broadcast_over_time() {
        let net = FilmMaskNet::new(FilmConfig::toy(), 7).unwrap();
        let x = signal(1600, 8);
        let z: Vec<f64> = (0..8).map(|i| (i as f64 - 3.5) / 4.0).collect();
        let out = net.forward(&x, Conditioning::Embedding(&z)).unwrap();
        let l = out.latent_frames();
        for (b, (gamma, beta)) in out.film().iter().enumerate() {
            let (h, hm) = out.block_io(b);
            for ch in 0..8 {
                for f in 0..l {
                    assert_eq!(hm[ch * l + f], gamma[ch] * h[ch * l + f] + beta[ch]);
                }
            }
        }
        assert_eq!(out.film(), net.film_params(&z).unwrap());
    }

    #[test]
    fn shape_errors() {
        let net = FilmMaskNet::new(FilmConfig::toy(), 0).unwrap();
        assert!(net.forward(&[0.0; 10], Conditioning::Unconditioned).is_err());
        assert!(net.forward(&[0.0; 100], Conditioning::Embedding(&[0.0; 3])).is_err());
        assert!(FilmMaskNet::from_params(FilmConfig::toy(), vec![0.0; 3]).is_err());
        assert!(FilmConfig { kernel: 15, ..FilmConfig::toy() }.validate().is_err());
    }

    #[test]
    fn exact_estimate_has_zero_gradient() {
        let net = FilmMaskNet::new(FilmConfig::toy(), 9).unwrap();
        let x = signal(400, 10);
        let z = vec![0.1; 8];
        let y = net.forward(&x, Conditioning::Embedding(&z)).unwrap().output;
        let lg = snr_loss_grad(&net, &x, &z, &y).unwrap();
        assert!(!lg.snr.finite);
        assert!(lg.grads.params.iter().all(|g| *g == 0.0));
        assert!(lg.grads.z.iter().all(|g| *g == 0.0));
    }
}

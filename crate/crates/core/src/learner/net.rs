//! Forward pass and hand-derived backpropagation-through-time for one tower.

use super::spec::{NetworkSpec, TowerLayout};

/// One network input: an image, an optional one-hot category, raw features.
#[derive(Debug, Clone, Copy)]
pub struct NetInput<'a> {
    pub image: &'a [f64],
    pub category: Option<usize>,
    pub raw: &'a [f64],
}

/// Owned copy of a [`NetInput`], kept in rollout buffers.
#[derive(Debug, Clone, PartialEq)]
pub struct OwnedInput {
    pub image: Vec<f64>,
    pub category: Option<usize>,
    pub raw: Vec<f64>,
}

impl OwnedInput {
    pub fn view(&self) -> NetInput<'_> {
        NetInput {
            image: &self.image,
            category: self.category,
            raw: &self.raw,
        }
    }
}

impl From<NetInput<'_>> for OwnedInput {
    fn from(i: NetInput<'_>) -> Self {
        OwnedInput {
            image: i.image.to_vec(),
            category: i.category,
            raw: i.raw.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl LstmState {
    pub fn zeros(width: usize) -> Self {
        LstmState {
            h: vec![0.0; width],
            c: vec![0.0; width],
        }
    }
}

/// Activations of one step, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct StepCache {
    image: Vec<f64>,
    category: Option<usize>,
    conv_out: Vec<f64>,
    embed: Vec<f64>,
    x: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    /// i, f, g, o after their nonlinearities
    gates: Vec<f64>,
    tanh_c: Vec<f64>,
    h: Vec<f64>,
    a1: Vec<f64>,
    a2: Vec<f64>,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Dot product with independent partial sums so the loop vectorizes.
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 8];
    let chunks = n / 8;
    for c in 0..chunks {
        let (ac, bc) = (&a[c * 8..c * 8 + 8], &b[c * 8..c * 8 + 8]);
        for k in 0..8 {
            acc[k] += ac[k] * bc[k];
        }
    }
    let mut tail = 0.0;
    for i in chunks * 8..n {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[4]) + (acc[1] + acc[5]) + (acc[2] + acc[6]) + (acc[3] + acc[7]) + tail
}

/// `out += W x` for row-major `W` of shape `rows × x.len()`.
fn gemv_acc(w: &[f64], x: &[f64], out: &mut [f64]) {
    let cols = x.len();
    for (r, o) in out.iter_mut().enumerate() {
        *o += dot(&w[r * cols..(r + 1) * cols], x);
    }
}

/// `out += Wᵀ d`.
fn gemv_t_acc(w: &[f64], d: &[f64], out: &mut [f64]) {
    let cols = out.len();
    for (r, dr) in d.iter().enumerate() {
        if *dr == 0.0 {
            continue;
        }
        let row = &w[r * cols..(r + 1) * cols];
        for (o, a) in out.iter_mut().zip(row) {
            *o += a * dr;
        }
    }
}

/// `g += d xᵀ`.
fn outer_acc(g: &mut [f64], d: &[f64], x: &[f64]) {
    let cols = x.len();
    for (r, dr) in d.iter().enumerate() {
        if *dr == 0.0 {
            continue;
        }
        let row = &mut g[r * cols..(r + 1) * cols];
        for (gv, xv) in row.iter_mut().zip(x) {
            *gv += dr * xv;
        }
    }
}

/// A tower viewed through its layout.
pub struct Tower<'a> {
    pub spec: &'a NetworkSpec,
    pub layout: &'a TowerLayout,
}

impl Tower<'_> {
    fn conv_forward(&self, p: &[f64], image: &[f64]) -> Vec<f64> {
        let s = self.spec;
        let [c_in, h_in, w_in] = s.image;
        let k = s.kernel;
        let (ho, wo) = s.conv_out_hw();
        let kw = &p[self.layout.conv_w.clone()];
        let kb = &p[self.layout.conv_b.clone()];
        let mut out = vec![0.0; s.conv_filters * ho * wo];
        for f in 0..s.conv_filters {
            for y in 0..ho {
                for x in 0..wo {
                    let mut acc = kb[f];
                    for c in 0..c_in {
                        for ky in 0..k {
                            let img_row = &image[(c * h_in + y + ky) * w_in + x..][..k];
                            let ker = &kw[((f * c_in + c) * k + ky) * k..][..k];
                            acc += dot(img_row, ker);
                        }
                    }
                    out[(f * ho + y) * wo + x] = acc.max(0.0);
                }
            }
        }
        out
    }

    /// Runs one step, updating `state`. Returns the tower outputs.
    pub fn step(
        &self,
        p: &[f64],
        input: &NetInput,
        state: &mut LstmState,
        cache: Option<&mut Vec<StepCache>>,
    ) -> Vec<f64> {
        let s = self.spec;
        let l = self.layout;
        let hw = s.recurrent_width;
        let conv_out = self.conv_forward(p, input.image);

        let mut embed = Vec::new();
        if let Some(e) = s.embedding {
            let w = &p[l.emb_w.clone()];
            let b = &p[l.emb_b.clone()];
            let cat = input.category.unwrap_or(0).min(e.categories - 1);
            embed = (0..e.width)
                .map(|r| (w[r * e.categories + cat] + b[r]).max(0.0))
                .collect();
        }

        let mut x = Vec::with_capacity(s.lstm_input_len());
        x.extend_from_slice(&conv_out);
        x.extend_from_slice(&embed);
        x.extend_from_slice(input.raw);

        let mut z = p[l.lstm_b.clone()].to_vec();
        gemv_acc(&p[l.lstm_w.clone()], &x, &mut z);
        gemv_acc(&p[l.lstm_u.clone()], &state.h, &mut z);
        let mut gates = vec![0.0; 4 * hw];
        for j in 0..hw {
            gates[j] = sigmoid(z[j]);
            gates[hw + j] = sigmoid(z[hw + j]);
            gates[2 * hw + j] = z[2 * hw + j].tanh();
            gates[3 * hw + j] = sigmoid(z[3 * hw + j]);
        }
        let c_prev = std::mem::take(&mut state.c);
        let h_prev = std::mem::take(&mut state.h);
        let mut c = vec![0.0; hw];
        let mut tanh_c = vec![0.0; hw];
        let mut h = vec![0.0; hw];
        for j in 0..hw {
            c[j] = gates[hw + j] * c_prev[j] + gates[j] * gates[2 * hw + j];
            tanh_c[j] = c[j].tanh();
            h[j] = gates[3 * hw + j] * tanh_c[j];
        }

        let mut a1 = p[l.fc1_b.clone()].to_vec();
        gemv_acc(&p[l.fc1_w.clone()], &h, &mut a1);
        a1.iter_mut().for_each(|v| *v = v.tanh());
        let mut a2 = p[l.fc2_b.clone()].to_vec();
        gemv_acc(&p[l.fc2_w.clone()], &a1, &mut a2);
        a2.iter_mut().for_each(|v| *v = v.tanh());
        let mut out = p[l.out_b.clone()].to_vec();
        gemv_acc(&p[l.out_w.clone()], &a2, &mut out);

        state.h = h.clone();
        state.c = c.clone();
        if let Some(cache) = cache {
            cache.push(StepCache {
                image: input.image.to_vec(),
                category: input.category,
                conv_out,
                embed,
                x,
                h_prev,
                c_prev,
                gates,
                tanh_c,
                h,
                a1,
                a2,
            });
        }
        out
    }

    /// Backpropagates `d_out[t]` (gradient of the loss w.r.t. the step-`t`
    /// output) through the whole unrolled sequence, accumulating into `grad`.
    pub fn backward(&self, p: &[f64], caches: &[StepCache], d_out: &[Vec<f64>], grad: &mut [f64]) {
        let s = self.spec;
        let l = self.layout;
        let hw = s.recurrent_width;
        let [d1, d2] = s.head_widths;
        let x_len = s.lstm_input_len();
        let conv_len = s.conv_out_len();
        let mut dh_next = vec![0.0; hw];
        let mut dc_next = vec![0.0; hw];

        for t in (0..caches.len()).rev() {
            let cache = &caches[t];
            let dout = &d_out[t];

            outer_acc(&mut grad[l.out_w.clone()], dout, &cache.a2);
            add(&mut grad[l.out_b.clone()], dout);
            let mut da2 = vec![0.0; d2];
            gemv_t_acc(&p[l.out_w.clone()], dout, &mut da2);
            for (d, a) in da2.iter_mut().zip(&cache.a2) {
                *d *= 1.0 - a * a;
            }
            outer_acc(&mut grad[l.fc2_w.clone()], &da2, &cache.a1);
            add(&mut grad[l.fc2_b.clone()], &da2);
            let mut da1 = vec![0.0; d1];
            gemv_t_acc(&p[l.fc2_w.clone()], &da2, &mut da1);
            for (d, a) in da1.iter_mut().zip(&cache.a1) {
                *d *= 1.0 - a * a;
            }
            outer_acc(&mut grad[l.fc1_w.clone()], &da1, &cache.h);
            add(&mut grad[l.fc1_b.clone()], &da1);
            let mut dh = dh_next.clone();
            gemv_t_acc(&p[l.fc1_w.clone()], &da1, &mut dh);

            let g = &cache.gates;
            let mut dz = vec![0.0; 4 * hw];
            let mut dc_prev = vec![0.0; hw];
            for j in 0..hw {
                let (i, f, gg, o) = (g[j], g[hw + j], g[2 * hw + j], g[3 * hw + j]);
                let tc = cache.tanh_c[j];
                let dc = dc_next[j] + dh[j] * o * (1.0 - tc * tc);
                let d_o = dh[j] * tc;
                let d_i = dc * gg;
                let d_g = dc * i;
                let d_f = dc * cache.c_prev[j];
                dc_prev[j] = dc * f;
                dz[j] = d_i * i * (1.0 - i);
                dz[hw + j] = d_f * f * (1.0 - f);
                dz[2 * hw + j] = d_g * (1.0 - gg * gg);
                dz[3 * hw + j] = d_o * o * (1.0 - o);
            }
            outer_acc(&mut grad[l.lstm_w.clone()], &dz, &cache.x);
            outer_acc(&mut grad[l.lstm_u.clone()], &dz, &cache.h_prev);
            add(&mut grad[l.lstm_b.clone()], &dz);
            let mut dx = vec![0.0; x_len];
            gemv_t_acc(&p[l.lstm_w.clone()], &dz, &mut dx);
            let mut dhp = vec![0.0; hw];
            gemv_t_acc(&p[l.lstm_u.clone()], &dz, &mut dhp);
            dh_next = dhp;
            dc_next = dc_prev;

            if let Some(e) = s.embedding {
                let cat = cache.category.unwrap_or(0).min(e.categories - 1);
                let gw = l.emb_w.start;
                let gb = l.emb_b.start;
                for r in 0..e.width {
                    if cache.embed[r] > 0.0 {
                        let d = dx[conv_len + r];
                        grad[gw + r * e.categories + cat] += d;
                        grad[gb + r] += d;
                    }
                }
            }
            self.conv_backward(&cache.image, &cache.conv_out, &dx[..conv_len], grad);
        }
    }

    fn conv_backward(&self, image: &[f64], conv_out: &[f64], d_post: &[f64], grad: &mut [f64]) {
        let s = self.spec;
        let [c_in, h_in, w_in] = s.image;
        let k = s.kernel;
        let (ho, wo) = s.conv_out_hw();
        let gw = self.layout.conv_w.start;
        let gb = self.layout.conv_b.start;
        for f in 0..s.conv_filters {
            for y in 0..ho {
                for x in 0..wo {
                    let idx = (f * ho + y) * wo + x;
                    if conv_out[idx] <= 0.0 {
                        continue;
                    }
                    let d = d_post[idx];
                    if d == 0.0 {
                        continue;
                    }
                    grad[gb + f] += d;
                    for c in 0..c_in {
                        for ky in 0..k {
                            let img_row = &image[(c * h_in + y + ky) * w_in + x..][..k];
                            let base = gw + ((f * c_in + c) * k + ky) * k;
                            for (kx, v) in img_row.iter().enumerate() {
                                grad[base + kx] += d * v;
                            }
                        }
                    }
                }
            }
        }
    }
}

fn add(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

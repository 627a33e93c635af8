use nalgebra::DMatrix;
use rand::distr::weighted::WeightedIndex;
use rand::distr::{Distribution, Uniform};
use rand::Rng;
use rand_distr::StandardNormal;

use super::net::{LstmState, NetInput, StepCache, Tower};
use super::spec::{NetworkSpec, TowerLayout};
use crate::error::{Error, Result};

const HIDDEN_GAIN: f64 = std::f64::consts::SQRT_2;
const POLICY_OUT_GAIN: f64 = 0.01;
const VALUE_OUT_GAIN: f64 = 1.0;

/// Hidden and cell state of both towers.
#[derive(Debug, Clone, PartialEq)]
pub struct RecurrentState {
    pub policy: LstmState,
    pub value: LstmState,
}

impl RecurrentState {
    pub fn zeros(spec: &NetworkSpec) -> Self {
        RecurrentState {
            policy: LstmState::zeros(spec.recurrent_width),
            value: LstmState::zeros(spec.recurrent_width),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput {
    pub logits: Vec<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActOutput {
    pub action: usize,
    pub log_prob: f64,
    pub value: f64,
}

/// Network topology, flat parameters, and the running recurrent state.
#[derive(Debug, Clone)]
pub struct PolicyHandle {
    pub spec: NetworkSpec,
    pub params: Vec<f64>,
    pub state: RecurrentState,
    policy_layout: TowerLayout,
    value_layout: TowerLayout,
}

impl PolicyHandle {
    /// Wraps an existing parameter vector.
    pub fn from_params(spec: NetworkSpec, params: Vec<f64>) -> Result<Self> {
        spec.validate()?;
        if params.len() != spec.param_count() {
            return Err(Error::invalid(format!(
                "parameter vector has {} entries, spec needs {}",
                params.len(),
                spec.param_count()
            )));
        }
        Ok(PolicyHandle {
            state: RecurrentState::zeros(&spec),
            policy_layout: spec.policy_layout(),
            value_layout: spec.value_layout(),
            spec,
            params,
        })
    }

    pub fn zeros(spec: NetworkSpec) -> Result<Self> {
        let n = spec.param_count();
        Self::from_params(spec, vec![0.0; n])
    }

    /// Orthogonal linear and recurrent maps, fan-in uniform convolution,
    /// forget-gate bias 1, small policy output.
    pub fn init<R: Rng + ?Sized>(spec: NetworkSpec, rng: &mut R) -> Result<Self> {
        let mut h = Self::zeros(spec)?;
        let layouts = [
            (h.policy_layout.clone(), POLICY_OUT_GAIN),
            (h.value_layout.clone(), VALUE_OUT_GAIN),
        ];
        let s = h.spec.clone();
        let fan_in = (s.image[0] * s.kernel * s.kernel) as f64;
        let hw = s.recurrent_width;
        for (l, out_gain) in layouts {
            let p = &mut h.params;
            let bound = 1.0 / fan_in.sqrt();
            let u = Uniform::new_inclusive(-bound, bound).expect("finite bound");
            for v in &mut p[l.conv_w.clone()] {
                *v = u.sample(rng);
            }
            if let Some(e) = s.embedding {
                orthogonal_into(&mut p[l.emb_w.clone()], e.width, e.categories, 1.0, rng);
            }
            let x = s.lstm_input_len();
            for gate in 0..4 {
                let w = l.lstm_w.start + gate * hw * x;
                orthogonal_into(&mut p[w..w + hw * x], hw, x, 1.0, rng);
                let u = l.lstm_u.start + gate * hw * hw;
                orthogonal_into(&mut p[u..u + hw * hw], hw, hw, 1.0, rng);
            }
            for v in &mut p[l.lstm_b.start + hw..l.lstm_b.start + 2 * hw] {
                *v = 1.0;
            }
            let [d1, d2] = s.head_widths;
            orthogonal_into(&mut p[l.fc1_w.clone()], d1, hw, HIDDEN_GAIN, rng);
            orthogonal_into(&mut p[l.fc2_w.clone()], d2, d1, HIDDEN_GAIN, rng);
            orthogonal_into(&mut p[l.out_w.clone()], l.out_dim, d2, out_gain, rng);
        }
        Ok(h)
    }

    pub fn policy_layout(&self) -> &TowerLayout {
        &self.policy_layout
    }

    pub fn value_layout(&self) -> &TowerLayout {
        &self.value_layout
    }

    pub fn reset_state(&mut self) {
        self.state = RecurrentState::zeros(&self.spec);
    }

    pub fn check_input(&self, input: &NetInput) -> Result<()> {
        if input.image.len() != self.spec.image_len() {
            return Err(Error::invalid(format!(
                "image has {} values, network expects {}",
                input.image.len(),
                self.spec.image_len()
            )));
        }
        if input.raw.len() != self.spec.raw_inputs {
            return Err(Error::invalid(format!(
                "raw input has {} values, network expects {}",
                input.raw.len(),
                self.spec.raw_inputs
            )));
        }
        match (self.spec.embedding, input.category) {
            (Some(e), Some(c)) if c < e.categories => Ok(()),
            (Some(e), Some(c)) => Err(Error::invalid(format!("category {c} out of range 0..{}", e.categories))),
            (Some(_), None) => Err(Error::invalid("network expects a categorical input")),
            (None, _) => Ok(()),
        }
    }

    /// Pure forward step from an explicit recurrent state.
    pub fn forward_from(&self, input: &NetInput, state: &RecurrentState) -> Result<(ForwardOutput, RecurrentState)> {
        self.check_input(input)?;
        let mut next = state.clone();
        let logits = self.policy_tower().step(&self.params, input, &mut next.policy, None);
        let value = self.value_tower().step(&self.params, input, &mut next.value, None)[0];
        Ok((ForwardOutput { logits, value }, next))
    }

    /// Forward step that advances the handle's own recurrent state.
    pub fn forward(&mut self, input: &NetInput) -> Result<ForwardOutput> {
        let state = std::mem::replace(&mut self.state, RecurrentState::zeros(&self.spec));
        let (out, next) = self.forward_from(input, &state)?;
        self.state = next;
        Ok(out)
    }

    /// Samples an action from the softmax of the logits.
    pub fn act<R: Rng + ?Sized>(&mut self, input: &NetInput, rng: &mut R) -> Result<ActOutput> {
        let out = self.forward(input)?;
        let (action, log_prob) = sample_logits(&out.logits, rng)?;
        Ok(ActOutput {
            action,
            log_prob,
            value: out.value,
        })
    }

    pub(crate) fn policy_tower(&self) -> Tower<'_> {
        Tower {
            spec: &self.spec,
            layout: &self.policy_layout,
        }
    }

    pub(crate) fn value_tower(&self) -> Tower<'_> {
        Tower {
            spec: &self.spec,
            layout: &self.value_layout,
        }
    }

    /// Runs an episode from a zero state, caching activations of both towers.
    pub(crate) fn unroll(
        &self,
        params: &[f64],
        inputs: &[NetInput],
    ) -> (Vec<Vec<f64>>, Vec<f64>, Vec<StepCache>, Vec<StepCache>) {
        let mut ps = LstmState::zeros(self.spec.recurrent_width);
        let mut vs = ps.clone();
        let mut pc = Vec::with_capacity(inputs.len());
        let mut vc = Vec::with_capacity(inputs.len());
        let mut logits = Vec::with_capacity(inputs.len());
        let mut values = Vec::with_capacity(inputs.len());
        let (pt, vt) = (self.policy_tower(), self.value_tower());
        for input in inputs {
            logits.push(pt.step(params, input, &mut ps, Some(&mut pc)));
            values.push(vt.step(params, input, &mut vs, Some(&mut vc))[0]);
        }
        (logits, values, pc, vc)
    }
}

/// `logits − logsumexp(logits)`.
pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.iter().map(|z| (z - m).exp()).sum::<f64>().ln();
    logits.iter().map(|z| z - lse).collect()
}

pub(crate) fn sample_logits<R: Rng + ?Sized>(logits: &[f64], rng: &mut R) -> Result<(usize, f64)> {
    if logits.iter().any(|z| !z.is_finite()) {
        return Err(Error::NonFinite(format!("policy logits {logits:?}")));
    }
    let logp = log_softmax(logits);
    let dist = WeightedIndex::new(logp.iter().map(|l| l.exp()))
        .map_err(|e| Error::NonFinite(format!("action distribution: {e}")))?;
    let a = dist.sample(rng);
    Ok((a, logp[a]))
}

/// Writes a `rows × cols` row-major matrix with orthonormal rows or columns, scaled by `gain`.
fn orthogonal_into<R: Rng + ?Sized>(out: &mut [f64], rows: usize, cols: usize, gain: f64, rng: &mut R) {
    let (big, small) = (rows.max(cols), rows.min(cols));
    let a = DMatrix::<f64>::from_fn(big, small, |_, _| rng.sample(StandardNormal));
    let qr = a.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..small {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    for i in 0..rows {
        for j in 0..cols {
            let v = if rows >= cols { q[(i, j)] } else { q[(j, i)] };
            out[i * cols + j] = gain * v;
        }
    }
}

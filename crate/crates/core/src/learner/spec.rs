use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gridworld::{NavAction, VIEW_CHANNELS, VIEW_SIZE};

/// Learned embedding of a one-hot categorical input (facing direction, timestep).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Embedding {
    pub categories: usize,
    pub width: usize,
}

/// Topology of one actor-critic pair.
///
/// Each tower is conv(kernel, filters) → ReLU → LSTM(recurrent_width) →
/// tanh FC(head_widths[0]) → tanh FC(head_widths[1]) → linear output. The
/// embedding and raw inputs join the flattened conv features at the LSTM input.
/// The policy tower emits `n_actions` logits; the value tower an identical
/// topology with one output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    /// Channels, height, width of the image input.
    pub image: [usize; 3],
    pub conv_filters: usize,
    pub kernel: usize,
    pub embedding: Option<Embedding>,
    /// Inputs wired straight into the LSTM (the adversary's latent vector).
    pub raw_inputs: usize,
    pub recurrent_width: usize,
    pub head_widths: [usize; 2],
    pub n_actions: usize,
}

impl NetworkSpec {
    /// Navigation agent at paper scale: 16 filters, LSTM 256, heads 32.
    pub fn agent_paper() -> Self {
        NetworkSpec {
            image: [VIEW_CHANNELS, VIEW_SIZE, VIEW_SIZE],
            conv_filters: 16,
            kernel: 3,
            embedding: Some(Embedding {
                categories: 4,
                width: 5,
            }),
            raw_inputs: 0,
            recurrent_width: 256,
            head_widths: [32, 32],
            n_actions: NavAction::COUNT,
        }
    }

    /// Navigation agent for CI-sized runs: 8 filters, LSTM 64, heads 16.
    pub fn agent_desk() -> Self {
        NetworkSpec {
            conv_filters: 8,
            recurrent_width: 64,
            head_widths: [16, 16],
            ..Self::agent_paper()
        }
    }

    /// Environment adversary over a `width`×`height` grid with `steps` placements.
    pub fn adversary_paper(width: usize, height: usize, steps: usize, filters: usize) -> Self {
        NetworkSpec {
            image: [3, height, width],
            conv_filters: filters,
            kernel: 3,
            embedding: Some(Embedding {
                categories: steps,
                width: 10,
            }),
            raw_inputs: crate::designer::LATENT_DIM,
            recurrent_width: 256,
            head_widths: [32, 32],
            n_actions: (width - 2) * (height - 2),
        }
    }

    pub fn adversary_desk(width: usize, height: usize, steps: usize) -> Self {
        NetworkSpec {
            conv_filters: 16,
            recurrent_width: 64,
            head_widths: [16, 16],
            ..Self::adversary_paper(width, height, steps, 16)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let [c, h, w] = self.image;
        let checks = [
            (c, "image channels"),
            (h, "image height"),
            (w, "image width"),
            (self.conv_filters, "conv_filters"),
            (self.kernel, "kernel"),
            (self.recurrent_width, "recurrent_width"),
            (self.head_widths[0], "head_widths[0]"),
            (self.head_widths[1], "head_widths[1]"),
            (self.n_actions, "n_actions"),
        ];
        for (v, name) in checks {
            if v == 0 {
                return Err(Error::invalid(format!("network {name} must be >= 1")));
            }
        }
        if self.kernel > h || self.kernel > w {
            return Err(Error::invalid(format!(
                "kernel {} larger than image {h}x{w}",
                self.kernel
            )));
        }
        if let Some(e) = self.embedding {
            if e.categories == 0 || e.width == 0 {
                return Err(Error::invalid("embedding needs categories and width >= 1"));
            }
        }
        Ok(())
    }

    pub fn conv_out_hw(&self) -> (usize, usize) {
        (self.image[1] - self.kernel + 1, self.image[2] - self.kernel + 1)
    }

    pub fn conv_out_len(&self) -> usize {
        let (h, w) = self.conv_out_hw();
        self.conv_filters * h * w
    }

    pub fn embed_width(&self) -> usize {
        self.embedding.map_or(0, |e| e.width)
    }

    /// Width of the concatenated LSTM input.
    pub fn lstm_input_len(&self) -> usize {
        self.conv_out_len() + self.embed_width() + self.raw_inputs
    }

    pub fn image_len(&self) -> usize {
        self.image.iter().product()
    }

    pub fn policy_layout(&self) -> TowerLayout {
        TowerLayout::new(self, self.n_actions, 0)
    }

    pub fn value_layout(&self) -> TowerLayout {
        let p = self.policy_layout();
        TowerLayout::new(self, 1, p.len)
    }

    /// Exact parameter count of both towers.
    pub fn param_count(&self) -> usize {
        self.policy_layout().len + self.value_layout().len
    }
}

/// Where each block of one tower lives inside the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TowerLayout {
    pub conv_w: Range<usize>,
    pub conv_b: Range<usize>,
    pub emb_w: Range<usize>,
    pub emb_b: Range<usize>,
    pub lstm_w: Range<usize>,
    pub lstm_u: Range<usize>,
    pub lstm_b: Range<usize>,
    pub fc1_w: Range<usize>,
    pub fc1_b: Range<usize>,
    pub fc2_w: Range<usize>,
    pub fc2_b: Range<usize>,
    pub out_w: Range<usize>,
    pub out_b: Range<usize>,
    pub out_dim: usize,
    pub start: usize,
    pub len: usize,
}

impl TowerLayout {
    fn new(spec: &NetworkSpec, out_dim: usize, start: usize) -> Self {
        let mut at = start;
        let mut take = |n: usize| {
            let r = at..at + n;
            at += n;
            r
        };
        let c = spec.image[0];
        let k = spec.kernel;
        let f = spec.conv_filters;
        let e = spec.embedding.map_or((0, 0), |e| (e.width, e.categories));
        let x = spec.lstm_input_len();
        let h = spec.recurrent_width;
        let [d1, d2] = spec.head_widths;
        let conv_w = take(f * c * k * k);
        let conv_b = take(f);
        let emb_w = take(e.0 * e.1);
        let emb_b = take(e.0);
        let lstm_w = take(4 * h * x);
        let lstm_u = take(4 * h * h);
        let lstm_b = take(4 * h);
        let fc1_w = take(d1 * h);
        let fc1_b = take(d1);
        let fc2_w = take(d2 * d1);
        let fc2_b = take(d2);
        let out_w = take(out_dim * d2);
        let out_b = take(out_dim);
        TowerLayout {
            conv_w,
            conv_b,
            emb_w,
            emb_b,
            lstm_w,
            lstm_u,
            lstm_b,
            fc1_w,
            fc1_b,
            fc2_w,
            fc2_b,
            out_w,
            out_b,
            out_dim,
            start,
            len: at - start,
        }
    }

    pub fn range(&self) -> Range<usize> {
        self.start..self.start + self.len
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn towers_share_topology() {
        let s = NetworkSpec::agent_desk();
        let p = s.policy_layout();
        let v = s.value_layout();
        assert_eq!(
            p.len - p.out_w.len() - p.out_b.len(),
            v.len - v.out_w.len() - v.out_b.len()
        );
        assert_eq!(v.start, p.len);
        assert_eq!(s.param_count(), p.len + v.len);
    }

    #[test]
    fn agent_lstm_input_width() {
        let s = NetworkSpec::agent_paper();
        // 3x3 valid conv output with 16 filters, plus the direction embedding
        assert_eq!(s.lstm_input_len(), 16 * 9 + 5);
        let a = NetworkSpec::adversary_paper(15, 15, 52, 128);
        assert_eq!(a.n_actions, 169);
        assert_eq!(a.raw_inputs, 50);
    }

    #[test]
    fn zero_widths_rejected() {
        let mut s = NetworkSpec::agent_desk();
        s.recurrent_width = 0;
        assert!(s.validate().is_err());
        let mut s = NetworkSpec::agent_desk();
        s.kernel = 7;
        assert!(s.validate().is_err());
    }
}

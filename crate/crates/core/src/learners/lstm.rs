//! LSTM combiner: a single recurrent layer with the usual input/forget/
//! candidate/output gating plus an affine head on the hidden state. Unlike
//! the other combiners it consumes the training patterns as an ordered
//! sequence, carrying cell and hidden state across steps, so the forecast
//! can use information from earlier hours as well as the current pattern.
//!
//! Training is full-sequence backpropagation of the squared-error loss with
//! per-parameter adaptive steps (first/second moment estimates with bias
//! correction), a base step of 0.01 and global gradient-norm clipping at 1.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::domain::{Error, Result, TrainingSet};
use crate::learners::Standardizer;

const STEP: f64 = 0.01;
const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;
const CLIP_NORM: f64 = 1.0;

/// Gate order inside the flat weight vector: input, forget, candidate,
/// output.
const GATES: usize = 4;

/// Fitted LSTM: layer sizes, flat weights and the standardization captured
/// at fit time. Weight layout per gate: W (hidden x inputs, row-major),
/// U (hidden x hidden), bias (hidden); after the four gates come the head
/// weights v (hidden) and the head bias.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmModel {
    pub n_inputs: usize,
    pub hidden: usize,
    pub weights: Vec<f64>,
    pub norm: Standardizer,
}

pub fn param_count(n_inputs: usize, hidden: usize) -> usize {
    GATES * gate_size(n_inputs, hidden) + hidden + 1
}

fn gate_size(n_inputs: usize, hidden: usize) -> usize {
    hidden * n_inputs + hidden * hidden + hidden
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

struct Net<'a> {
    n: usize,
    m: usize,
    w: &'a [f64],
}

impl<'a> Net<'a> {
    fn new(n_inputs: usize, hidden: usize, weights: &'a [f64]) -> Net<'a> {
        debug_assert_eq!(weights.len(), param_count(n_inputs, hidden));
        Net {
            n: n_inputs,
            m: hidden,
            w: weights,
        }
    }

    fn gate_offsets(&self, gate: usize) -> (usize, usize, usize) {
        let base = gate * gate_size(self.n, self.m);
        (
            base,
            base + self.m * self.n,
            base + self.m * self.n + self.m * self.m,
        )
    }

    fn head(&self) -> (&[f64], f64) {
        let off = GATES * gate_size(self.n, self.m);
        (&self.w[off..off + self.m], self.w[off + self.m])
    }

    /// One step. Gate activations, the new cell state, tanh of it and the
    /// new hidden state are written into the provided rows (all length m).
    #[allow(clippy::too_many_arguments)]
    fn step(
        &self,
        x: &[f64],
        h_prev: &[f64],
        c_prev: &[f64],
        gates_out: &mut [&mut [f64]; GATES],
        c_out: &mut [f64],
        tanh_c_out: &mut [f64],
        h_out: &mut [f64],
    ) {
        // all four gates per unit while x and h_prev are hot
        for u in 0..self.m {
            let mut pre = [0.0; GATES];
            for (gate, acc) in pre.iter_mut().enumerate() {
                let (w_off, u_off, b_off) = self.gate_offsets(gate);
                let mut a = self.w[b_off + u];
                let wrow = &self.w[w_off + u * self.n..w_off + (u + 1) * self.n];
                for (wv, xv) in wrow.iter().zip(x) {
                    a += wv * xv;
                }
                let urow = &self.w[u_off + u * self.m..u_off + (u + 1) * self.m];
                for (uv, hv) in urow.iter().zip(h_prev) {
                    a += uv * hv;
                }
                *acc = a;
            }
            let gi = sigmoid(pre[0]);
            let gf = sigmoid(pre[1]);
            let gg = pre[2].tanh();
            let go = sigmoid(pre[3]);
            gates_out[0][u] = gi;
            gates_out[1][u] = gf;
            gates_out[2][u] = gg;
            gates_out[3][u] = go;
            let c = gf * c_prev[u] + gi * gg;
            let tc = c.tanh();
            c_out[u] = c;
            tanh_c_out[u] = tc;
            h_out[u] = go * tc;
        }
    }

    fn head_output(&self, h: &[f64]) -> f64 {
        let (v, v0) = self.head();
        v0 + v.iter().zip(h).map(|(a, b)| a * b).sum::<f64>()
    }
}

impl LstmModel {
    /// Wrap raw weights with no standardization.
    pub fn from_weights(n_inputs: usize, hidden: usize, weights: Vec<f64>) -> LstmModel {
        assert_eq!(weights.len(), param_count(n_inputs, hidden));
        LstmModel {
            n_inputs,
            hidden,
            weights,
            norm: Standardizer::identity(n_inputs),
        }
    }

    /// Replay `history` in time order to build up the states, then consume
    /// the query pattern and read the forecast off the head.
    pub fn predict(&self, history: &[Vec<f64>], query: &[f64]) -> f64 {
        let net = Net::new(self.n_inputs, self.hidden, &self.weights);
        let m = self.hidden;
        let mut buf = vec![0.0; 6 * m];
        let (h, rest) = buf.split_at_mut(m);
        let (c, rest) = rest.split_at_mut(m);
        let (gi, rest) = rest.split_at_mut(m);
        let (gf, rest) = rest.split_at_mut(m);
        let (gg, go) = rest.split_at_mut(m);
        let mut gates = [gi, gf, gg, go];
        let mut h_new = vec![0.0; m];
        let mut c_new = vec![0.0; m];
        let mut tanh_c = vec![0.0; m];
        for x in history.iter().map(Vec::as_slice).chain([query]) {
            let xs = self.norm.transform_x(x);
            net.step(&xs, h, c, &mut gates, &mut c_new, &mut tanh_c, &mut h_new);
            h.copy_from_slice(&h_new);
            c.copy_from_slice(&c_new);
        }
        self.norm.inverse_y(net.head_output(h))
    }
}

/// Flat per-step activation storage for one sequence pass.
struct Trace {
    m: usize,
    gates: [Vec<f64>; GATES],
    c: Vec<f64>,
    tanh_c: Vec<f64>,
    h: Vec<f64>,
    preds: Vec<f64>,
}

impl Trace {
    fn new(m: usize, steps: usize) -> Trace {
        let mat = || vec![0.0; m * steps];
        Trace {
            m,
            gates: [mat(), mat(), mat(), mat()],
            c: mat(),
            tanh_c: mat(),
            h: mat(),
            preds: vec![0.0; steps],
        }
    }

    fn row<'a>(&self, field: &'a [f64], t: usize) -> &'a [f64] {
        &field[t * self.m..(t + 1) * self.m]
    }
}

/// Squared-error loss of the network run over a sequence, plus its gradient
/// with respect to every weight. States start at zero; the prediction at
/// each step is compared against that step's target.
pub fn sequence_sse_and_gradient(
    n_inputs: usize,
    hidden: usize,
    weights: &[f64],
    xs: &[Vec<f64>],
    ys: &[f64],
) -> (f64, Vec<f64>) {
    let mut trace = Trace::new(hidden, xs.len());
    let mut grad = vec![0.0; weights.len()];
    let sse = sse_and_grad_into(n_inputs, hidden, weights, xs, ys, &mut trace, &mut grad);
    (sse, grad)
}

fn sse_and_grad_into(
    n_inputs: usize,
    hidden: usize,
    weights: &[f64],
    xs: &[Vec<f64>],
    ys: &[f64],
    trace: &mut Trace,
    grad: &mut [f64],
) -> f64 {
    let net = Net::new(n_inputs, hidden, weights);
    let m = hidden;
    let steps = xs.len();
    let zero_state = vec![0.0; m];

    // forward
    for (t, x) in xs.iter().enumerate() {
        let row = t * m..(t + 1) * m;
        let (h_done, h_rest) = trace.h.split_at_mut(t * m);
        let (c_done, c_rest) = trace.c.split_at_mut(t * m);
        let h_prev: &[f64] = if t > 0 { &h_done[(t - 1) * m..] } else { &zero_state };
        let c_prev: &[f64] = if t > 0 { &c_done[(t - 1) * m..] } else { &zero_state };
        let [g0, g1, g2, g3] = &mut trace.gates;
        let mut gates = [
            &mut g0[row.clone()],
            &mut g1[row.clone()],
            &mut g2[row.clone()],
            &mut g3[row.clone()],
        ];
        net.step(
            x,
            h_prev,
            c_prev,
            &mut gates,
            &mut c_rest[..m],
            &mut trace.tanh_c[row],
            &mut h_rest[..m],
        );
        trace.preds[t] = net.head_output(&h_rest[..m]);
    }
    let sse: f64 = trace
        .preds
        .iter()
        .zip(ys)
        .map(|(p, y)| (p - y) * (p - y))
        .sum();

    // backward through time
    grad.fill(0.0);
    let (v, _) = net.head();
    let v = v.to_vec();
    let v_off = GATES * gate_size(n_inputs, hidden);
    let mut dz = vec![0.0; GATES * m];
    let mut dh_next = vec![0.0; m];
    let mut dc_next = vec![0.0; m];
    let mut dh_prev = vec![0.0; m];
    for t in (0..steps).rev() {
        let e = 2.0 * (trace.preds[t] - ys[t]);
        let h_row = trace.row(&trace.h, t);
        for u in 0..m {
            grad[v_off + u] += e * h_row[u];
        }
        grad[v_off + m] += e;

        let (h_prev, c_prev) = if t > 0 {
            (trace.row(&trace.h, t - 1), trace.row(&trace.c, t - 1))
        } else {
            (&zero_state[..], &zero_state[..])
        };

        let tanh_row = trace.row(&trace.tanh_c, t);
        let gi_row = trace.row(&trace.gates[0], t);
        let gf_row = trace.row(&trace.gates[1], t);
        let gg_row = trace.row(&trace.gates[2], t);
        let go_row = trace.row(&trace.gates[3], t);
        for u in 0..m {
            let dh = e * v[u] + dh_next[u];
            let (gi, gf, gg, go) = (gi_row[u], gf_row[u], gg_row[u], go_row[u]);
            let d_out = dh * tanh_row[u];
            let dc = dc_next[u] + dh * go * (1.0 - tanh_row[u] * tanh_row[u]);
            let d_in = dc * gg;
            let d_cand = dc * gi;
            let d_forget = dc * c_prev[u];
            dc_next[u] = dc * gf; // becomes the next step's carry
            dz[u] = d_in * gi * (1.0 - gi);
            dz[m + u] = d_forget * gf * (1.0 - gf);
            dz[2 * m + u] = d_cand * (1.0 - gg * gg);
            dz[3 * m + u] = d_out * go * (1.0 - go);
        }

        dh_prev.fill(0.0);
        for gate in 0..GATES {
            let (w_off, u_off, b_off) = net.gate_offsets(gate);
            for u in 0..m {
                let d = dz[gate * m + u];
                if d == 0.0 {
                    continue;
                }
                let row = w_off + u * n_inputs;
                for (gslot, xv) in grad[row..row + n_inputs].iter_mut().zip(&xs[t]) {
                    *gslot += d * xv;
                }
                let urow = u_off + u * m;
                for (gslot, hv) in grad[urow..urow + m].iter_mut().zip(h_prev) {
                    *gslot += d * hv;
                }
                grad[b_off + u] += d;
                for (dhp, uv) in dh_prev.iter_mut().zip(&weights[urow..urow + m]) {
                    *dhp += uv * d;
                }
            }
        }
        std::mem::swap(&mut dh_next, &mut dh_prev);
    }
    sse
}

/// Fit on the training patterns taken as one ordered sequence.
pub fn fit(train: &TrainingSet, hidden: usize, epochs: usize, seed: u64) -> Result<LstmModel> {
    if train.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    if hidden == 0 || epochs == 0 {
        return Err(Error::InvalidParameter {
            name: "lstm",
            reason: format!("need hidden >= 1 and epochs >= 1, got {hidden}, {epochs}"),
        });
    }
    let n_inputs = train.n_features();
    let norm = Standardizer::fit(train.patterns(), train.targets());
    let xs: Vec<Vec<f64>> = train.patterns().iter().map(|p| norm.transform_x(p)).collect();
    let ys: Vec<f64> = train.targets().iter().map(|&y| norm.transform_y(y)).collect();

    let p = param_count(n_inputs, hidden);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut theta: Vec<f64> = (0..p).map(|_| rng.gen_range(-0.5..0.5)).collect();
    let mut m1 = vec![0.0; p];
    let mut m2 = vec![0.0; p];
    let mut grad = vec![0.0; p];
    let mut trace = Trace::new(hidden, xs.len());

    for epoch in 1..=epochs {
        sse_and_grad_into(n_inputs, hidden, &theta, &xs, &ys, &mut trace, &mut grad);
        let norm2: f64 = grad.iter().map(|g| g * g).sum();
        let gnorm = norm2.sqrt();
        if gnorm > CLIP_NORM {
            let scale = CLIP_NORM / gnorm;
            for g in &mut grad {
                *g *= scale;
            }
        }
        let bc1 = 1.0 - BETA1.powi(epoch as i32);
        let bc2 = 1.0 - BETA2.powi(epoch as i32);
        for i in 0..p {
            m1[i] = BETA1 * m1[i] + (1.0 - BETA1) * grad[i];
            m2[i] = BETA2 * m2[i] + (1.0 - BETA2) * grad[i] * grad[i];
            let mhat = m1[i] / bc1;
            let vhat = m2[i] / bc2;
            theta[i] -= STEP * mhat / (vhat.sqrt() + ADAM_EPS);
        }
    }

    Ok(LstmModel {
        n_inputs,
        hidden,
        weights: theta,
        norm,
    })
}

//! Projection, shared bidirectional GRU, question attention summary and
//! the start / conditioned-end scoring heads, with a hand-written reverse
//! pass.

use std::collections::BTreeMap;

use ndarray::{concatenate, s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::params::*;
use crate::error::{Error, Result};

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Raw scores for one context: start scores for every token and end
/// score rows for the selected starts. The row for start `i` covers ends
/// `i..n`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreSet {
    pub y_start: Vec<f64>,
    pub y_end: BTreeMap<usize, Vec<f64>>,
}

impl ScoreSet {
    pub fn n(&self) -> usize {
        self.y_start.len()
    }

    pub fn selected_starts(&self) -> Vec<usize> {
        self.y_end.keys().copied().collect()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        for (&i, row) in &self.y_end {
            if i >= n || row.len() != n - i {
                return Err(Error::ShapeMismatch(format!(
                    "end row for start {i} has {} entries, context has {n} tokens",
                    row.len()
                )));
            }
        }
        Ok(())
    }
}

/// Which end-score rows a forward pass should produce.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EndRows {
    All,
    /// Rows for the `k` highest start scores (ties: lower index first).
    TopK(usize),
    Starts(Vec<usize>),
}

/// Per-example variational dropout masks over the input embedding
/// columns, reused for every token of the sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct DropoutMasks {
    pub question: Array1<f64>,
    pub context: Array1<f64>,
}

struct GruWeights<'a> {
    w: [ArrayView2<'a, f64>; 3],
    b: [ArrayView1<'a, f64>; 3],
}

struct Weights<'a> {
    proj_w: ArrayView2<'a, f64>,
    proj_b: ArrayView1<'a, f64>,
    gru: [GruWeights<'a>; 2],
    out_w: ArrayView2<'a, f64>,
    out_b: ArrayView1<'a, f64>,
    attn: ArrayView1<'a, f64>,
    start_w: ArrayView1<'a, f64>,
    start_b: f64,
    end_w: ArrayView1<'a, f64>,
    end_b: f64,
}

impl<'a> Weights<'a> {
    fn new(p: &'a ModelParams) -> Self {
        let gru = [0, 1].map(|d| GruWeights {
            w: GRU_WEIGHTS[d].map(|name| p.matrix(name)),
            b: GRU_BIASES[d].map(|name| p.vector(name)),
        });
        Weights {
            proj_w: p.matrix(PROJ_W),
            proj_b: p.vector(PROJ_B),
            gru,
            out_w: p.matrix(OUT_W),
            out_b: p.vector(OUT_B),
            attn: p.vector(QUESTION_ATTN),
            start_w: p.vector(START_W),
            start_b: p.vector(START_B)[0],
            end_w: p.vector(END_W),
            end_b: p.vector(END_B)[0],
        }
    }

    fn hidden(&self) -> usize {
        self.proj_b.len()
    }

    fn start_part(&self, k: usize) -> ArrayView1<'_, f64> {
        let h = self.hidden();
        self.start_w.slice_move(s![k * h..(k + 1) * h])
    }

    fn end_part(&self, k: usize) -> ArrayView1<'_, f64> {
        let h = self.hidden();
        self.end_w.slice_move(s![k * h..(k + 1) * h])
    }
}

/// Time-indexed intermediate values of one GRU direction. Rows are in
/// token order regardless of the direction of the recurrence.
#[derive(Clone, Debug)]
struct GruTrace {
    /// `[x_t ; h_{t-1}]`
    gate_in: Array2<f64>,
    /// `[x_t ; r_t * h_{t-1}]`
    cand_in: Array2<f64>,
    z: Array2<f64>,
    r: Array2<f64>,
    c: Array2<f64>,
    h_prev: Array2<f64>,
    h: Array2<f64>,
}

#[derive(Clone, Debug)]
struct SeqTrace {
    x: Array2<f64>,
    u: Array2<f64>,
    gru: [GruTrace; 2],
    states: Array2<f64>,
    z: Array2<f64>,
}

/// Cached forward values needed by [`backward`] and by on-demand end rows.
#[derive(Clone, Debug)]
pub struct Activations {
    config: ModelConfig,
    question: SeqTrace,
    context: SeqTrace,
    masks: Option<DropoutMasks>,
    alpha: Array1<f64>,
    summary: Array1<f64>,
}

impl Activations {
    pub fn context_len(&self) -> usize {
        self.context.z.nrows()
    }

    /// Start scores for every context token.
    pub fn start_scores(&self, params: &ModelParams) -> Vec<f64> {
        self.start_scores_with(&Weights::new(params))
    }

    fn start_scores_with(&self, w: &Weights<'_>) -> Vec<f64> {
        let q = &self.summary;
        let per_token = &w.start_part(0) + &(&w.start_part(2) * q);
        let constant = w.start_part(1).dot(q) + w.start_b;
        self.context
            .z
            .dot(&per_token)
            .mapv(|v| v + constant)
            .to_vec()
    }

    /// End scores conditioned on start `i`, for ends `i..n`.
    pub fn end_row(&self, params: &ModelParams, i: usize) -> Vec<f64> {
        self.end_row_with(&Weights::new(params), i)
    }

    fn end_row_with(&self, w: &Weights<'_>, i: usize) -> Vec<f64> {
        let zc = &self.context.z;
        let zi = zc.row(i);
        let per_token = &w.end_part(0) + &(&w.end_part(3) * &zi);
        let constant = w.end_part(1).dot(&self.summary) + w.end_part(2).dot(&zi) + w.end_b;
        zc.slice(s![i.., ..])
            .dot(&per_token)
            .mapv(|v| v + constant)
            .to_vec()
    }

    pub fn scores(&self, params: &ModelParams, rows: &EndRows) -> ScoreSet {
        let w = Weights::new(params);
        let y_start = self.start_scores_with(&w);
        let n = y_start.len();
        let starts: Vec<usize> = match rows {
            EndRows::All => (0..n).collect(),
            EndRows::TopK(k) => top_k_indices(&y_start, *k),
            EndRows::Starts(v) => v.iter().copied().filter(|&i| i < n).collect(),
        };
        let y_end = starts
            .into_iter()
            .map(|i| (i, self.end_row_with(&w, i)))
            .collect();
        ScoreSet { y_start, y_end }
    }
}

/// Indices of the `k` largest values; ties go to the lower index.
pub fn top_k_indices(values: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

/// Recurrent rows (`h_{t-1}` part) of a gate matrix, contiguous.
fn recurrent_part(w: &ArrayView2<'_, f64>, in_dim: usize) -> Array2<f64> {
    w.slice(s![in_dim.., ..]).to_owned()
}

/// `acc[j] += Σ_k v[k] * m[k, j]` for a row-major `m`.
fn add_vec_mat(acc: &mut [f64], v: &[f64], m: &[f64]) {
    let h = acc.len();
    for (k, &vk) in v.iter().enumerate() {
        for (a, &mk) in acc.iter_mut().zip(&m[k * h..(k + 1) * h]) {
            *a += vk * mk;
        }
    }
}

/// `Σ_j m[k, j] * v[j]`
fn row_dot(m: &[f64], k: usize, v: &[f64]) -> f64 {
    let h = v.len();
    m[k * h..(k + 1) * h]
        .iter()
        .zip(v)
        .map(|(a, b)| a * b)
        .sum()
}

fn gru_forward(u: ArrayView2<'_, f64>, w: &GruWeights<'_>, reverse: bool) -> GruTrace {
    let (len, in_dim) = u.dim();
    let h = w.b[0].len();
    // input contributions for every step at once
    let x: [Array2<f64>; 3] = [0, 1, 2].map(|g| u.dot(&w.w[g].slice(s![..in_dim, ..])) + w.b[g]);
    let rec = [0, 1, 2].map(|g| recurrent_part(&w.w[g], in_dim));
    let rec: [&[f64]; 3] = [0, 1, 2].map(|g| rec[g].as_slice().expect("contiguous"));
    let mut tr = GruTrace {
        gate_in: Array2::zeros((len, in_dim + h)),
        cand_in: Array2::zeros((len, in_dim + h)),
        z: Array2::zeros((len, h)),
        r: Array2::zeros((len, h)),
        c: Array2::zeros((len, h)),
        h_prev: Array2::zeros((len, h)),
        h: Array2::zeros((len, h)),
    };
    let mut prev = vec![0.0; h];
    let (mut z, mut r, mut c, mut rh) = (vec![0.0; h], vec![0.0; h], vec![0.0; h], vec![0.0; h]);
    for step in 0..len {
        let t = if reverse { len - 1 - step } else { step };
        z.iter_mut().zip(x[0].row(t)).for_each(|(a, &b)| *a = b);
        r.iter_mut().zip(x[1].row(t)).for_each(|(a, &b)| *a = b);
        c.iter_mut().zip(x[2].row(t)).for_each(|(a, &b)| *a = b);
        add_vec_mat(&mut z, &prev, rec[0]);
        add_vec_mat(&mut r, &prev, rec[1]);
        z.iter_mut().for_each(|v| *v = sigmoid(*v));
        r.iter_mut().for_each(|v| *v = sigmoid(*v));
        for k in 0..h {
            rh[k] = r[k] * prev[k];
        }
        add_vec_mat(&mut c, &rh, rec[2]);
        c.iter_mut().for_each(|v| *v = v.tanh());

        let ut = u.row(t);
        tr.gate_in.slice_mut(s![t, ..in_dim]).assign(&ut);
        tr.cand_in.slice_mut(s![t, ..in_dim]).assign(&ut);
        for k in 0..h {
            tr.gate_in[[t, in_dim + k]] = prev[k];
            tr.cand_in[[t, in_dim + k]] = rh[k];
            tr.z[[t, k]] = z[k];
            tr.r[[t, k]] = r[k];
            tr.c[[t, k]] = c[k];
            tr.h_prev[[t, k]] = prev[k];
            prev[k] += z[k] * (c[k] - prev[k]);
            tr.h[[t, k]] = prev[k];
        }
    }
    tr
}

fn encode_sequence(
    x: ArrayView2<'_, f64>,
    mask: Option<&Array1<f64>>,
    features: ArrayView2<'_, f64>,
    w: &Weights<'_>,
) -> SeqTrace {
    let x = match mask {
        Some(m) => &x * m,
        None => x.to_owned(),
    };
    let projected = x.dot(&w.proj_w) + w.proj_b;
    let u = concatenate![Axis(1), projected, features];
    let fw = gru_forward(u.view(), &w.gru[0], false);
    let bw = gru_forward(u.view(), &w.gru[1], true);
    let states = concatenate![Axis(1), fw.h, bw.h];
    let z = (states.dot(&w.out_w) + w.out_b).mapv(f64::tanh);
    SeqTrace {
        x,
        u,
        gru: [fw, bw],
        states,
        z,
    }
}

fn softmax(v: &Array1<f64>) -> Array1<f64> {
    let max = v.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
    let e = v.mapv(|x| (x - max).exp());
    let sum = e.sum();
    e / sum
}

/// Runs the encoder up to the scoring heads.
///
/// `question` and `context` are embedded rows of equal width; `wiq` holds
/// the two word-in-question features per context token. Question tokens
/// receive constant features `[1, 1]`.
pub fn encode(
    question: ArrayView2<'_, f64>,
    context: ArrayView2<'_, f64>,
    wiq: ArrayView2<'_, f64>,
    params: &ModelParams,
    masks: Option<&DropoutMasks>,
) -> Result<Activations> {
    let config = *params.config();
    let d = config.embedding.total_dim();
    if question.nrows() == 0 || context.nrows() == 0 {
        return Err(Error::ShapeMismatch(
            "question and context must be non-empty".into(),
        ));
    }
    if question.ncols() != d || context.ncols() != d {
        return Err(Error::ShapeMismatch(format!(
            "embeddings have widths {} and {}, model expects {d}",
            question.ncols(),
            context.ncols()
        )));
    }
    if wiq.dim() != (context.nrows(), WIQ_DIM) {
        return Err(Error::ShapeMismatch(format!(
            "word-in-question features are {:?}, expected ({}, {WIQ_DIM})",
            wiq.dim(),
            context.nrows()
        )));
    }
    if let Some(m) = masks {
        if m.question.len() != d || m.context.len() != d {
            return Err(Error::ShapeMismatch(
                "dropout masks do not match the input width".into(),
            ));
        }
    }
    let w = Weights::new(params);
    let q_features = Array2::ones((question.nrows(), WIQ_DIM));
    let q = encode_sequence(question, masks.map(|m| &m.question), q_features.view(), &w);
    let c = encode_sequence(context, masks.map(|m| &m.context), wiq, &w);
    let alpha = softmax(&q.z.dot(&w.attn));
    let summary = q.z.t().dot(&alpha);
    Ok(Activations {
        config,
        question: q,
        context: c,
        masks: masks.cloned(),
        alpha,
        summary,
    })
}

pub fn forward(
    question: ArrayView2<'_, f64>,
    context: ArrayView2<'_, f64>,
    wiq: ArrayView2<'_, f64>,
    params: &ModelParams,
    masks: Option<&DropoutMasks>,
    rows: &EndRows,
) -> Result<(ScoreSet, Activations)> {
    let acts = encode(question, context, wiq, params, masks)?;
    let scores = acts.scores(params, rows);
    Ok((scores, acts))
}

/// Parameter gradients plus gradients with respect to the embedded inputs
/// (the latter feed the character convolution).
#[derive(Clone, Debug)]
pub struct EncoderGrads {
    pub params: ModelParams,
    pub question: Array2<f64>,
    pub context: Array2<f64>,
}

struct GruGrads {
    w: [Array2<f64>; 3],
    b: [Array1<f64>; 3],
}

struct LocalGrads {
    proj_w: Array2<f64>,
    proj_b: Array1<f64>,
    gru: [GruGrads; 2],
    out_w: Array2<f64>,
    out_b: Array1<f64>,
    attn: Array1<f64>,
    start_w: Array1<f64>,
    start_b: f64,
    end_w: Array1<f64>,
    end_b: f64,
}

impl LocalGrads {
    fn zeros(w: &Weights<'_>) -> Self {
        let gru = || GruGrads {
            w: w.gru[0].w.map(|m| Array2::zeros(m.dim())),
            b: w.gru[0].b.map(|v| Array1::zeros(v.len())),
        };
        LocalGrads {
            proj_w: Array2::zeros(w.proj_w.dim()),
            proj_b: Array1::zeros(w.proj_b.len()),
            gru: [gru(), gru()],
            out_w: Array2::zeros(w.out_w.dim()),
            out_b: Array1::zeros(w.out_b.len()),
            attn: Array1::zeros(w.attn.len()),
            start_w: Array1::zeros(w.start_w.len()),
            start_b: 0.0,
            end_w: Array1::zeros(w.end_w.len()),
            end_b: 0.0,
        }
    }

    fn into_params(self, config: ModelConfig) -> ModelParams {
        let mut p = ModelParams::zeros(config);
        let mut put = |name: &str, data: ndarray::ArrayD<f64>| {
            p.get_mut(name).assign(&data);
        };
        put(PROJ_W, self.proj_w.into_dyn());
        put(PROJ_B, self.proj_b.into_dyn());
        for (d, g) in self.gru.into_iter().enumerate() {
            for ((gate, w), b) in g.w.into_iter().enumerate().zip(g.b) {
                put(GRU_WEIGHTS[d][gate], w.into_dyn());
                put(GRU_BIASES[d][gate], b.into_dyn());
            }
        }
        put(OUT_W, self.out_w.into_dyn());
        put(OUT_B, self.out_b.into_dyn());
        put(QUESTION_ATTN, self.attn.into_dyn());
        put(START_W, self.start_w.into_dyn());
        put(START_B, Array1::from_elem(1, self.start_b).into_dyn());
        put(END_W, self.end_w.into_dyn());
        put(END_B, Array1::from_elem(1, self.end_b).into_dyn());
        p
    }
}

fn gru_backward(
    tr: &GruTrace,
    w: &GruWeights<'_>,
    reverse: bool,
    d_h: ArrayView2<'_, f64>,
    grads: &mut GruGrads,
    d_u: &mut Array2<f64>,
) {
    let (len, h) = tr.h.dim();
    let in_dim = d_u.ncols();
    let rec = [0, 1, 2].map(|g| recurrent_part(&w.w[g], in_dim));
    let rec: [&[f64]; 3] = [0, 1, 2].map(|g| rec[g].as_slice().expect("contiguous"));
    let mut pre: [Array2<f64>; 3] = [0, 1, 2].map(|_| Array2::zeros((len, h)));
    let mut carry = vec![0.0; h];
    let (mut dh, mut dzp, mut drp, mut dcp) =
        (vec![0.0; h], vec![0.0; h], vec![0.0; h], vec![0.0; h]);
    for step in (0..len).rev() {
        let t = if reverse { len - 1 - step } else { step };
        let row = |a: &Array2<f64>| a.row(t).to_owned();
        let (z, r, c, hp) = (row(&tr.z), row(&tr.r), row(&tr.c), row(&tr.h_prev));
        for j in 0..h {
            dh[j] = d_h[[t, j]] + carry[j];
            dcp[j] = dh[j] * z[j] * (1.0 - c[j] * c[j]);
            dzp[j] = dh[j] * (c[j] - hp[j]) * z[j] * (1.0 - z[j]);
            carry[j] = dh[j] * (1.0 - z[j]);
        }
        for k in 0..h {
            let d_rh = row_dot(rec[2], k, &dcp);
            drp[k] = d_rh * hp[k] * r[k] * (1.0 - r[k]);
            carry[k] += d_rh * r[k];
        }
        for k in 0..h {
            carry[k] += row_dot(rec[0], k, &dzp) + row_dot(rec[1], k, &drp);
        }
        for j in 0..h {
            pre[0][[t, j]] = dzp[j];
            pre[1][[t, j]] = drp[j];
            pre[2][[t, j]] = dcp[j];
        }
    }
    for g in 0..3 {
        *d_u += &pre[g].dot(&w.w[g].slice(s![..in_dim, ..]).t());
        let input = if g == 2 { &tr.cand_in } else { &tr.gate_in };
        grads.w[g] += &input.t().dot(&pre[g]);
        grads.b[g] += &pre[g].sum_axis(Axis(0));
    }
}

/// Backpropagates `d_z` (gradient at the encoder outputs) to the inputs.
fn sequence_backward(
    seq: &SeqTrace,
    d_z: &Array2<f64>,
    mask: Option<&Array1<f64>>,
    w: &Weights<'_>,
    g: &mut LocalGrads,
) -> Array2<f64> {
    let h = w.hidden();
    let d_s = d_z * &seq.z.mapv(|v| 1.0 - v * v);
    g.out_w += &seq.states.t().dot(&d_s);
    g.out_b += &d_s.sum_axis(Axis(0));
    let d_states = d_s.dot(&w.out_w.t());
    let mut d_u = Array2::zeros(seq.u.dim());
    for (k, reverse) in [(0, false), (1, true)] {
        let d_h = d_states.slice(s![.., k * h..(k + 1) * h]);
        gru_backward(
            &seq.gru[k],
            &w.gru[k],
            reverse,
            d_h,
            &mut g.gru[k],
            &mut d_u,
        );
    }
    let d_p = d_u.slice(s![.., ..h]);
    g.proj_w += &seq.x.t().dot(&d_p);
    g.proj_b += &d_p.sum_axis(Axis(0));
    let d_x = d_p.dot(&w.proj_w.t());
    match mask {
        Some(m) => d_x * m,
        None => d_x,
    }
}

/// Exact gradients of a scalar loss given its gradients with respect to
/// the start scores and to the end-score rows.
pub fn backward(
    d_start: &[f64],
    d_end: &BTreeMap<usize, Vec<f64>>,
    acts: &Activations,
    params: &ModelParams,
) -> Result<EncoderGrads> {
    if *params.config() != acts.config {
        return Err(Error::StaleActivations(
            "model configuration changed".into(),
        ));
    }
    let n = acts.context_len();
    if d_start.len() != n {
        return Err(Error::StaleActivations(format!(
            "{} start gradients for a context of {n} tokens",
            d_start.len()
        )));
    }
    for (&i, row) in d_end {
        if i >= n || row.len() != n - i {
            return Err(Error::StaleActivations(format!(
                "end gradient row {i} has wrong length"
            )));
        }
    }
    let w = Weights::new(params);
    let h = w.hidden();
    let mut g = LocalGrads::zeros(&w);
    let zc = &acts.context.z;
    let zq = &acts.question.z;
    let q = &acts.summary;

    let mut d_zc = Array2::<f64>::zeros(zc.dim());
    let mut d_q = Array1::<f64>::zeros(h);

    // start head
    let dys = ArrayView1::from(d_start);
    let total = dys.sum();
    let weighted = zc.t().dot(&dys);
    g.start_w.slice_mut(s![..h]).scaled_add(1.0, &weighted);
    g.start_w.slice_mut(s![h..2 * h]).scaled_add(total, q);
    g.start_w
        .slice_mut(s![2 * h..])
        .scaled_add(1.0, &(&weighted * q));
    g.start_b += total;
    let per_token = &w.start_part(0) + &(&w.start_part(2) * q);
    d_zc += &dys
        .insert_axis(Axis(1))
        .dot(&per_token.view().insert_axis(Axis(0)));
    d_q.scaled_add(total, &w.start_part(1));
    d_q += &(&w.start_part(2) * &weighted);

    // end heads
    for (&i, row) in d_end {
        let gy = ArrayView1::from(row.as_slice());
        let gsum = gy.sum();
        let zi = zc.row(i).to_owned();
        let tail = zc.slice(s![i.., ..]);
        let zsum = tail.t().dot(&gy);
        g.end_w.slice_mut(s![..h]).scaled_add(1.0, &zsum);
        g.end_w.slice_mut(s![h..2 * h]).scaled_add(gsum, q);
        g.end_w.slice_mut(s![2 * h..3 * h]).scaled_add(gsum, &zi);
        g.end_w
            .slice_mut(s![3 * h..])
            .scaled_add(1.0, &(&zsum * &zi));
        g.end_b += gsum;
        let per_token = &w.end_part(0) + &(&w.end_part(3) * &zi);
        let outer = gy
            .insert_axis(Axis(1))
            .dot(&per_token.view().insert_axis(Axis(0)));
        let mut d_tail = d_zc.slice_mut(s![i.., ..]);
        d_tail += &outer;
        d_q.scaled_add(gsum, &w.end_part(1));
        let mut d_zi = d_zc.row_mut(i);
        d_zi.scaled_add(gsum, &w.end_part(2));
        d_zi += &(&w.end_part(3) * &zsum);
    }

    // question summary
    let alpha = &acts.alpha;
    let mut d_zq = alpha
        .view()
        .insert_axis(Axis(1))
        .dot(&d_q.view().insert_axis(Axis(0)));
    let d_alpha = zq.dot(&d_q);
    let mean = alpha.dot(&d_alpha);
    let d_logits = alpha * &d_alpha.mapv(|v| v - mean);
    g.attn += &zq.t().dot(&d_logits);
    d_zq += &d_logits
        .view()
        .insert_axis(Axis(1))
        .dot(&w.attn.insert_axis(Axis(0)));

    let masks = acts.masks.as_ref();
    let d_context = sequence_backward(&acts.context, &d_zc, masks.map(|m| &m.context), &w, &mut g);
    let d_question = sequence_backward(
        &acts.question,
        &d_zq,
        masks.map(|m| &m.question),
        &w,
        &mut g,
    );

    Ok(EncoderGrads {
        params: g.into_params(acts.config),
        question: d_question,
        context: d_context,
    })
}

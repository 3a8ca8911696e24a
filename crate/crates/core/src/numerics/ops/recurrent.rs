//! Bidirectional LSTM along an arbitrary axis of a channels-last tensor.
//!
//! Gate layout in the `4·hidden` columns is `[input | forget | cell | output]`.

use super::super::graph::{Graph, Var};
use super::super::linalg::{gemm_acc, matmul_acc, MatRef};
use super::super::tensor::Tensor;
use super::act::sigmoid;
use crate::error::{Error, Result};

/// Parameter handles of one bidirectional LSTM.
#[derive(Debug, Clone, Copy)]
pub struct LstmVars {
    /// `[C, 4h]` per direction.
    pub w_ih: [Var; 2],
    /// `[h, 4h]` per direction.
    pub w_hh: [Var; 2],
    /// `[4h]` per direction.
    pub bias: [Var; 2],
}

#[derive(Debug, Clone, Copy)]
struct SeqLayout {
    outer: usize,
    len: usize,
    mid: usize,
    c: usize,
}

impl SeqLayout {
    fn n(&self) -> usize {
        self.outer * self.mid
    }

    /// Copies `(outer, len, mid, c)` into time-major `[len][outer·mid][c]`.
    fn to_time_major(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        let c = self.c;
        for o in 0..self.outer {
            for t in 0..self.len {
                for m in 0..self.mid {
                    let src = ((o * self.len + t) * self.mid + m) * c;
                    let dst = (t * self.n() + o * self.mid + m) * c;
                    out[dst..dst + c].copy_from_slice(&x[src..src + c]);
                }
            }
        }
        out
    }

    /// Inverse of [`Self::to_time_major`] for a tensor with `c` channels.
    fn from_time_major(&self, x: &[f64], c: usize) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        for o in 0..self.outer {
            for t in 0..self.len {
                for m in 0..self.mid {
                    let dst = ((o * self.len + t) * self.mid + m) * c;
                    let src = (t * self.n() + o * self.mid + m) * c;
                    out[dst..dst + c].copy_from_slice(&x[src..src + c]);
                }
            }
        }
        out
    }
}

/// Activations of one direction, time-major.
struct DirTrace {
    gates: Vec<f64>,
    cells: Vec<f64>,
    hidden: Vec<f64>,
}

fn step_order(len: usize, reverse: bool) -> impl Fn(usize) -> usize {
    move |s| if reverse { len - 1 - s } else { s }
}

/// Runs one direction; writes `h` into columns `[col, col+h)` of the
/// time-major `[len][n][2h]` output.
#[allow(clippy::too_many_arguments)]
fn run_direction(
    lay: SeqLayout,
    h: usize,
    xt: &[f64],
    w_ih: &[f64],
    w_hh: &[f64],
    bias: &[f64],
    reverse: bool,
    out: &mut [f64],
    col: usize,
    keep_trace: bool,
) -> Option<DirTrace> {
    let (n, len, g4) = (lay.n(), lay.len, 4 * h);
    let mut pre = vec![0.0; len * n * g4];
    for row in pre.chunks_exact_mut(g4) {
        row.copy_from_slice(bias);
    }
    matmul_acc(xt, w_ih, &mut pre, len * n, lay.c, g4);

    let mut cells = vec![0.0; if keep_trace { len * n * h } else { 0 }];
    let mut hidden = vec![0.0; if keep_trace { len * n * h } else { 0 }];
    let mut h_prev = vec![0.0; n * h];
    let mut c_prev = vec![0.0; n * h];
    let order = step_order(len, reverse);
    for s in 0..len {
        let t = order(s);
        let a = &mut pre[t * n * g4..(t + 1) * n * g4];
        if s > 0 {
            matmul_acc(&h_prev, w_hh, a, n, h, g4);
        }
        for r in 0..n {
            let gr = &mut a[r * g4..(r + 1) * g4];
            for j in 0..h {
                let i = sigmoid(gr[j]);
                let f = sigmoid(gr[h + j]);
                let g = gr[2 * h + j].tanh();
                let o = sigmoid(gr[3 * h + j]);
                gr[j] = i;
                gr[h + j] = f;
                gr[2 * h + j] = g;
                gr[3 * h + j] = o;
                let c = f * c_prev[r * h + j] + i * g;
                c_prev[r * h + j] = c;
                h_prev[r * h + j] = o * c.tanh();
            }
        }
        for r in 0..n {
            let dst = (t * n + r) * 2 * h + col;
            out[dst..dst + h].copy_from_slice(&h_prev[r * h..(r + 1) * h]);
        }
        if keep_trace {
            cells[t * n * h..(t + 1) * n * h].copy_from_slice(&c_prev);
            hidden[t * n * h..(t + 1) * n * h].copy_from_slice(&h_prev);
        }
    }
    keep_trace.then_some(DirTrace { gates: pre, cells, hidden })
}

struct DirGrads {
    d_x: Vec<f64>,
    d_w_ih: Vec<f64>,
    d_w_hh: Vec<f64>,
    d_bias: Vec<f64>,
}

/// Back-propagation through time for one direction. `dout` is time-major
/// `[len][n][2h]`.
#[allow(clippy::too_many_arguments)]
fn backprop_direction(
    lay: SeqLayout,
    h: usize,
    xt: &[f64],
    w_ih: &[f64],
    w_hh: &[f64],
    trace: &DirTrace,
    reverse: bool,
    dout: &[f64],
    col: usize,
) -> DirGrads {
    let (n, len, g4) = (lay.n(), lay.len, 4 * h);
    let order = step_order(len, reverse);
    let mut d_pre = vec![0.0; len * n * g4];
    let mut d_w_hh = vec![0.0; h * g4];
    let mut dh_next = vec![0.0; n * h];
    let mut dc_next = vec![0.0; n * h];
    for s in (0..len).rev() {
        let t = order(s);
        let prev = (s > 0).then(|| order(s - 1));
        let gates = &trace.gates[t * n * g4..(t + 1) * n * g4];
        let cells = &trace.cells[t * n * h..(t + 1) * n * h];
        let da = &mut d_pre[t * n * g4..(t + 1) * n * g4];
        for r in 0..n {
            for j in 0..h {
                let k = r * h + j;
                let gr = &gates[r * g4..(r + 1) * g4];
                let (i, f, g, o) = (gr[j], gr[h + j], gr[2 * h + j], gr[3 * h + j]);
                let dh = dout[(t * n + r) * 2 * h + col + j] + dh_next[k];
                let tc = cells[k].tanh();
                let c_prev = prev.map_or(0.0, |tp| trace.cells[tp * n * h + k]);
                let dc = dh * o * (1.0 - tc * tc) + dc_next[k];
                let dar = &mut da[r * g4..(r + 1) * g4];
                dar[j] = dc * g * i * (1.0 - i);
                dar[h + j] = dc * c_prev * f * (1.0 - f);
                dar[2 * h + j] = dc * i * (1.0 - g * g);
                dar[3 * h + j] = dh * tc * o * (1.0 - o);
                dc_next[k] = dc * f;
            }
        }
        dh_next.iter_mut().for_each(|v| *v = 0.0);
        if let Some(tp) = prev {
            let da = MatRef::dense(da, n, g4);
            gemm_acc(da, MatRef::dense(w_hh, h, g4).t(), &mut dh_next, h, 1);
            let hp = MatRef::dense(&trace.hidden[tp * n * h..(tp + 1) * n * h], n, h);
            gemm_acc(hp.t(), da, &mut d_w_hh, g4, 1);
        }
    }
    let rows = len * n;
    let dp = MatRef::dense(&d_pre, rows, g4);
    let mut d_x = vec![0.0; rows * lay.c];
    gemm_acc(dp, MatRef::dense(w_ih, lay.c, g4).t(), &mut d_x, lay.c, 1);
    let mut d_w_ih = vec![0.0; lay.c * g4];
    gemm_acc(MatRef::dense(xt, rows, lay.c).t(), dp, &mut d_w_ih, g4, 1);
    let mut d_bias = vec![0.0; g4];
    for row in d_pre.chunks_exact(g4) {
        d_bias.iter_mut().zip(row).for_each(|(b, v)| *b += v);
    }
    DirGrads { d_x, d_w_ih, d_w_hh, d_bias }
}

impl Graph {
    /// Bidirectional LSTM along `axis`; output channels are
    /// `[forward h | backward h]`.
    pub fn bilstm(&mut self, x: Var, axis: usize, p: &LstmVars, hidden: usize) -> Result<Var> {
        const OP: &str = "bilstm";
        let shape = self.shape(x).to_vec();
        if shape.len() < 2 || axis + 1 >= shape.len() || shape[axis] == 0 {
            return Err(Error::shape(OP, format!("axis {axis} of {shape:?}")));
        }
        let lay = SeqLayout {
            outer: shape[..axis].iter().product(),
            len: shape[axis],
            mid: shape[axis + 1..shape.len() - 1].iter().product(),
            c: shape[shape.len() - 1],
        };
        let g4 = 4 * hidden;
        for d in 0..2 {
            let ok = self.shape(p.w_ih[d]) == [lay.c, g4]
                && self.shape(p.w_hh[d]) == [hidden, g4]
                && self.shape(p.bias[d]) == [g4];
            if !ok {
                return Err(Error::shape(OP, format!("direction {d} parameters do not match C={} hidden={hidden}", lay.c)));
            }
        }
        let xt = lay.to_time_major(self.value(x).data());
        let keep = self.is_recording();
        let mut out_t = vec![0.0; lay.len * lay.n() * 2 * hidden];
        let mut traces = Vec::with_capacity(2);
        for d in 0..2 {
            traces.push(run_direction(
                lay,
                hidden,
                &xt,
                self.value(p.w_ih[d]).data(),
                self.value(p.w_hh[d]).data(),
                self.value(p.bias[d]).data(),
                d == 1,
                &mut out_t,
                d * hidden,
                keep,
            ));
        }
        let mut out_shape = shape;
        *out_shape.last_mut().unwrap() = 2 * hidden;
        let y = Tensor::new(&out_shape, lay.from_time_major(&out_t, 2 * hidden))?;
        let inputs = [x, p.w_ih[0], p.w_hh[0], p.bias[0], p.w_ih[1], p.w_hh[1], p.bias[1]];
        self.push(OP, y, &inputs, move || {
            let traces: Vec<DirTrace> = traces.into_iter().map(|t| t.expect("recorded")).collect();
            Box::new(move |ctx| {
                let dout = lay.to_time_major_c(ctx.grad, 2 * hidden);
                let mut dx_t = vec![0.0; xt.len()];
                let mut res: Vec<Option<Vec<f64>>> = vec![None];
                for (d, trace) in traces.iter().enumerate() {
                    let w_ih = ctx.inputs[1 + 3 * d].data();
                    let w_hh = ctx.inputs[2 + 3 * d].data();
                    let gr = backprop_direction(lay, hidden, &xt, w_ih, w_hh, trace, d == 1, &dout, d * hidden);
                    dx_t.iter_mut().zip(&gr.d_x).for_each(|(a, b)| *a += b);
                    res.push(Some(gr.d_w_ih));
                    res.push(Some(gr.d_w_hh));
                    res.push(Some(gr.d_bias));
                }
                res[0] = ctx.needs[0].then(|| lay.from_time_major(&dx_t, lay.c));
                res
            })
        })
    }
}

impl SeqLayout {
    fn to_time_major_c(&self, x: &[f64], c: usize) -> Vec<f64> {
        SeqLayout { c, ..*self }.to_time_major(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngState;

    fn vars(g: &mut Graph, c: usize, h: usize, r: &mut RngState, zero_bias: bool) -> LstmVars {
        let mut mk = |shape: &[usize], zero: bool| {
            let t = if zero { Tensor::zeros(shape) } else { Tensor::uniform(shape, 0.5, r) };
            g.leaf(t)
        };
        let w_ih = [mk(&[c, 4 * h], false), mk(&[c, 4 * h], false)];
        let w_hh = [mk(&[h, 4 * h], false), mk(&[h, 4 * h], false)];
        let bias = [mk(&[4 * h], zero_bias), mk(&[4 * h], zero_bias)];
        LstmVars { w_ih, w_hh, bias }
    }

    #[test]
    fn length_one_directions_agree_when_weights_match() {
        let mut r = RngState::new(2);
        let mut g = Graph::new();
        let mut p = vars(&mut g, 3, 4, &mut r, false);
        p.w_ih[1] = p.w_ih[0];
        p.w_hh[1] = p.w_hh[0];
        p.bias[1] = p.bias[0];
        let x = g.constant(Tensor::randn(&[2, 1, 3], &mut r));
        let y = g.bilstm(x, 1, &p, 4).unwrap();
        for row in g.value(y).data().chunks(8) {
            assert_eq!(row[..4], row[4..]);
        }
    }

    #[test]
    fn zero_input_zero_bias_gives_zero() {
        let mut r = RngState::new(3);
        let mut g = Graph::new();
        let p = vars(&mut g, 3, 2, &mut r, true);
        let x = g.constant(Tensor::zeros(&[2, 5, 3]));
        let y = g.bilstm(x, 1, &p, 2).unwrap();
        assert!(g.value(y).data().iter().all(|&v| v == 0.0));
    }

    /// Naive per-sequence loop as an independent reference for the forward pass.
    #[test]
    fn matches_naive_recurrence() {
        let mut r = RngState::new(11);
        let (c, h) = (3, 2);
        let mut g = Graph::inference();
        let p = vars(&mut g, c, h, &mut r, false);
        let x = Tensor::randn(&[2, 4, 3, c], &mut r);
        let xv = g.constant(x.clone());
        let y = g.bilstm(xv, 1, &p, h).unwrap();
        let y = g.value(y).clone();
        for d in 0..2 {
            let (wi, wh, b) = (g.value(p.w_ih[d]), g.value(p.w_hh[d]), g.value(p.bias[d]));
            for o in 0..2 {
                for m in 0..3 {
                    let (mut hs, mut cs) = (vec![0.0; h], vec![0.0; h]);
                    let ts: Vec<usize> = if d == 0 { (0..4).collect() } else { (0..4).rev().collect() };
                    for t in ts {
                        let xin = &x.data()[((o * 4 + t) * 3 + m) * c..][..c];
                        let mut a = b.data().to_vec();
                        for q in 0..4 * h {
                            for ci in 0..c {
                                a[q] += xin[ci] * wi.data()[ci * 4 * h + q];
                            }
                            for hi in 0..h {
                                a[q] += hs[hi] * wh.data()[hi * 4 * h + q];
                            }
                        }
                        for j in 0..h {
                            let (i, f, gg, oo) =
                                (sigmoid(a[j]), sigmoid(a[h + j]), a[2 * h + j].tanh(), sigmoid(a[3 * h + j]));
                            cs[j] = f * cs[j] + i * gg;
                            hs[j] = oo * cs[j].tanh();
                        }
                        for j in 0..h {
                            let got = y.data()[((o * 4 + t) * 3 + m) * 2 * h + d * h + j];
                            assert!((got - hs[j]).abs() < 1e-12);
                        }
                    }
                }
            }
        }
    }
}

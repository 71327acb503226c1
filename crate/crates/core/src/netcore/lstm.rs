//! LSTM forward pass and backpropagation through time.
//!
//! Gate pre-activations are `z = W_x·x_t + W_h·h_{t-1} + b`, split into
//! blocks [i, f, g, o]:
//!
//! ```text
//! i = σ(z_i)  f = σ(z_f)  g = tanh(z_g)  o = σ(z_o)
//! c_t = f ⊙ c_{t-1} + i ⊙ g
//! h_t = o ⊙ tanh(c_t)
//! ```
//!
//! Internally sequences are stored time-major, (T, B, ·), so each step is
//! a contiguous (B, ·) block.

use ndarray::{concatenate, s, Array2, Array3, ArrayView2, ArrayView3, Axis, Zip};

use super::params::LstmParams;
use crate::error::{Error, Result};

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

/// Everything the backward pass needs from one direction of one layer.
#[derive(Debug, Clone)]
pub struct LstmTrace {
    /// Input in processing order, (T, B, F).
    pub x: Array3<f64>,
    /// Activated gates, (T, B, 4H).
    pub gates: Array3<f64>,
    /// Cell states, (T, B, H).
    pub c: Array3<f64>,
    /// Hidden states, (T, B, H).
    pub h: Array3<f64>,
}

fn check_shapes(x_width: usize, p: &LstmParams) -> Result<()> {
    let h = p.hidden();
    if p.w_x.nrows() != 4 * h || p.w_h.nrows() != 4 * h || p.b.len() != 4 * h {
        return Err(Error::Shape(format!(
            "LSTM parameter blocks inconsistent with H = {h}"
        )));
    }
    if x_width != p.input() {
        return Err(Error::Shape(format!(
            "LSTM expects {} input features, got {x_width}",
            p.input()
        )));
    }
    Ok(())
}

/// Applies gate nonlinearities to `z` (B, 4H) in place, then advances the
/// cell: returns (c_t, h_t).
fn cell_step(z: &mut Array2<f64>, c_prev: ArrayView2<'_, f64>, hidden: usize) -> (Array2<f64>, Array2<f64>) {
    let b = z.nrows();
    let mut c = Array2::zeros((b, hidden));
    let mut h = Array2::zeros((b, hidden));
    for r in 0..b {
        let zr = z.row_mut(r).into_slice().expect("contiguous row");
        let (gi, rest) = zr.split_at_mut(hidden);
        let (gf, rest) = rest.split_at_mut(hidden);
        let (gg, go) = rest.split_at_mut(hidden);
        let cp = c_prev.row(r);
        let mut cr = c.row_mut(r);
        let mut hr = h.row_mut(r);
        for j in 0..hidden {
            gi[j] = sigmoid(gi[j]);
            gf[j] = sigmoid(gf[j]);
            gg[j] = gg[j].tanh();
            go[j] = sigmoid(go[j]);
            let cj = gf[j] * cp[j] + gi[j] * gg[j];
            cr[j] = cj;
            hr[j] = go[j] * cj.tanh();
        }
    }
    (c, h)
}

/// One LSTM step for a batch: `x_t` (B, F), states (B, H).
pub fn lstm_cell_forward(
    x_t: ArrayView2<'_, f64>,
    h_prev: ArrayView2<'_, f64>,
    c_prev: ArrayView2<'_, f64>,
    p: &LstmParams,
) -> Result<(Array2<f64>, Array2<f64>)> {
    check_shapes(x_t.ncols(), p)?;
    let hidden = p.hidden();
    if h_prev.dim() != (x_t.nrows(), hidden) || c_prev.dim() != (x_t.nrows(), hidden) {
        return Err(Error::Shape("LSTM state shape does not match batch".into()));
    }
    let mut z = x_t.dot(&p.w_x.t()) + h_prev.dot(&p.w_h.t()) + &p.b;
    let (c, h) = cell_step(&mut z, c_prev, hidden);
    if c.iter().chain(h.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite LSTM state".into()));
    }
    Ok((h, c))
}

/// Runs a sequence given time-major input (T, B, F) from zero state.
pub fn run_time_major(x: Array3<f64>, p: &LstmParams) -> Result<LstmTrace> {
    let (t_len, batch, f) = x.dim();
    check_shapes(f, p)?;
    let hidden = p.hidden();
    let flat = x
        .view()
        .into_shape_with_order((t_len * batch, f))
        .expect("standard layout");
    let proj = flat.dot(&p.w_x.t()) + &p.b;
    let proj = proj
        .into_shape_with_order((t_len, batch, 4 * hidden))
        .expect("contiguous");
    let mut gates = Array3::zeros((t_len, batch, 4 * hidden));
    let mut c_all = Array3::zeros((t_len, batch, hidden));
    let mut h_all = Array3::zeros((t_len, batch, hidden));
    let zeros = Array2::zeros((batch, hidden));
    for t in 0..t_len {
        let (h_prev, c_prev) = if t == 0 {
            (zeros.view(), zeros.view())
        } else {
            (h_all.slice(s![t - 1, .., ..]), c_all.slice(s![t - 1, .., ..]))
        };
        let mut z = proj.slice(s![t, .., ..]).to_owned() + h_prev.dot(&p.w_h.t());
        let (c, h) = cell_step(&mut z, c_prev, hidden);
        gates.slice_mut(s![t, .., ..]).assign(&z);
        c_all.slice_mut(s![t, .., ..]).assign(&c);
        h_all.slice_mut(s![t, .., ..]).assign(&h);
    }
    Ok(LstmTrace {
        x,
        gates,
        c: c_all,
        h: h_all,
    })
}

/// Converts batch-major (B, T, F) to time-major, optionally reversing time.
pub fn to_time_major(seq: ArrayView3<'_, f64>, dir: Direction) -> Array3<f64> {
    let v = match dir {
        Direction::Forward => seq,
        Direction::Backward => seq.slice_move(s![.., ..;-1, ..]),
    };
    v.permuted_axes([1, 0, 2]).as_standard_layout().into_owned()
}

/// Inverse of [`to_time_major`].
pub fn to_batch_major(tm: ArrayView3<'_, f64>, dir: Direction) -> Array3<f64> {
    let v = match dir {
        Direction::Forward => tm,
        Direction::Backward => tm.slice_move(s![..;-1, .., ..]),
    };
    v.permuted_axes([1, 0, 2]).as_standard_layout().into_owned()
}

/// Unidirectional pass over (B, T, F). The backward direction processes
/// t = T..1 and writes each output back at its original time index.
pub fn recurrent_forward(seq: ArrayView3<'_, f64>, p: &LstmParams, dir: Direction) -> Result<Array3<f64>> {
    let trace = run_time_major(to_time_major(seq, dir), p)?;
    Ok(to_batch_major(trace.h.view(), dir))
}

/// Concatenates forward and backward passes along the feature axis:
/// `[forward H | backward H]`.
pub fn bidirectional_forward(
    seq: ArrayView3<'_, f64>,
    fwd: &LstmParams,
    bwd: &LstmParams,
) -> Result<Array3<f64>> {
    if fwd.hidden() != bwd.hidden() {
        return Err(Error::Config(format!(
            "bidirectional halves differ: H = {} vs {}",
            fwd.hidden(),
            bwd.hidden()
        )));
    }
    let a = recurrent_forward(seq, fwd, Direction::Forward)?;
    let b = recurrent_forward(seq, bwd, Direction::Backward)?;
    Ok(concatenate(Axis(2), &[a.view(), b.view()]).expect("matching shapes"))
}

/// Backpropagation through time for one direction.
///
/// `d_h` holds dLoss/dh_t in processing order, (T, B, H). Parameter
/// gradients are accumulated into `grads`; the returned array is dLoss/dx
/// in processing order, (T, B, F).
pub fn backward_time_major(
    trace: &LstmTrace,
    p: &LstmParams,
    d_h: ArrayView3<'_, f64>,
    grads: &mut LstmParams,
) -> Array3<f64> {
    let (t_len, batch, f) = trace.x.dim();
    let hidden = p.hidden();
    let mut dz_all = Array3::<f64>::zeros((t_len, batch, 4 * hidden));
    let mut dh_next = Array2::<f64>::zeros((batch, hidden));
    let mut dc_next = Array2::<f64>::zeros((batch, hidden));
    for t in (0..t_len).rev() {
        let gates = trace.gates.slice(s![t, .., ..]);
        let c = trace.c.slice(s![t, .., ..]);
        let dh_out = d_h.slice(s![t, .., ..]);
        let mut dz = dz_all.slice_mut(s![t, .., ..]);
        for r in 0..batch {
            let g = gates.row(r);
            let mut dzr = dz.row_mut(r);
            for j in 0..hidden {
                let (gi, gf, gg, go) = (g[j], g[hidden + j], g[2 * hidden + j], g[3 * hidden + j]);
                let tc = c[[r, j]].tanh();
                let dh = dh_out[[r, j]] + dh_next[[r, j]];
                let c_prev = if t > 0 { trace.c[[t - 1, r, j]] } else { 0.0 };
                let dc = dh * go * (1.0 - tc * tc) + dc_next[[r, j]];
                dzr[j] = dc * gg * gi * (1.0 - gi);
                dzr[hidden + j] = dc * c_prev * gf * (1.0 - gf);
                dzr[2 * hidden + j] = dc * gi * (1.0 - gg * gg);
                dzr[3 * hidden + j] = dh * tc * go * (1.0 - go);
                dc_next[[r, j]] = dc * gf;
            }
        }
        let dz = dz_all.slice(s![t, .., ..]);
        if t > 0 {
            let h_prev = trace.h.slice(s![t - 1, .., ..]);
            grads.w_h += &dz.t().dot(&h_prev);
        }
        dh_next = dz.dot(&p.w_h);
    }
    let dz_flat = dz_all
        .view()
        .into_shape_with_order((t_len * batch, 4 * hidden))
        .expect("contiguous");
    let x_flat = trace
        .x
        .view()
        .into_shape_with_order((t_len * batch, f))
        .expect("contiguous");
    grads.w_x += &dz_flat.t().dot(&x_flat);
    grads.b += &dz_flat.sum_axis(Axis(0));
    dz_flat
        .dot(&p.w_x)
        .into_shape_with_order((t_len, batch, f))
        .expect("contiguous")
}

/// True when every entry of `a` is finite.
pub(crate) fn finite3(a: &Array3<f64>) -> bool {
    Zip::from(a).all(|v| v.is_finite())
}

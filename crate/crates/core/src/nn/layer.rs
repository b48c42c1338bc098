use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{axpy, dot, Tensor};

/// `(rows, cols)`: time steps × features.
pub type Shape = (usize, usize);

/// One layer of a sequential model. Input widths are inferred from the
/// preceding layer's output shape.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum LayerSpec {
    /// Affine map applied to every row.
    Dense { units: usize },
    Tanh,
    /// Stride 1, "same" padding (`(k-1)/2` zeros before, the rest after).
    Conv1D { filters: usize, kernel_size: usize },
    /// Non-overlapping max over `pool_size` rows; a trailing remainder is dropped.
    MaxPool1D { pool_size: usize },
    /// Nearest-neighbour repeat of every row.
    Upsample1D { factor: usize },
    #[serde(rename = "LSTM")]
    Lstm { units: usize, return_sequences: bool },
    /// Repeats the last row `repeat_count` times.
    RepeatLast { repeat_count: usize },
    Flatten,
    Reshape { rows: usize, cols: usize },
}

pub(crate) struct ParamShape {
    pub name: &'static str,
    pub shape: Vec<usize>,
    pub fan_in: usize,
    pub fan_out: usize,
    pub kind: Init,
}

#[derive(Clone, Copy, PartialEq, Eq)]
pub(crate) enum Init {
    Glorot,
    Zero,
    /// LSTM bias: zeros except the forget-gate block, which starts at 1.
    LstmBias,
}

impl LayerSpec {
    pub fn name(&self) -> &'static str {
        match self {
            LayerSpec::Dense { .. } => "dense",
            LayerSpec::Tanh => "tanh",
            LayerSpec::Conv1D { .. } => "conv1d",
            LayerSpec::MaxPool1D { .. } => "maxpool1d",
            LayerSpec::Upsample1D { .. } => "upsample1d",
            LayerSpec::Lstm { .. } => "lstm",
            LayerSpec::RepeatLast { .. } => "repeat_last",
            LayerSpec::Flatten => "flatten",
            LayerSpec::Reshape { .. } => "reshape",
        }
    }

    pub fn output_shape(&self, (rows, cols): Shape) -> Result<Shape> {
        let positive = |v: usize, what: &str| {
            if v == 0 {
                Err(Error::shape(format!("{}: {what} must be positive", self.name())))
            } else {
                Ok(v)
            }
        };
        if rows == 0 || cols == 0 {
            return Err(Error::shape(format!(
                "{}: empty input shape {rows}x{cols}",
                self.name()
            )));
        }
        Ok(match *self {
            LayerSpec::Dense { units } => (rows, positive(units, "units")?),
            LayerSpec::Tanh => (rows, cols),
            LayerSpec::Conv1D {
                filters,
                kernel_size,
            } => {
                positive(kernel_size, "kernel_size")?;
                (rows, positive(filters, "filters")?)
            }
            LayerSpec::MaxPool1D { pool_size } => {
                let p = positive(pool_size, "pool_size")?;
                if rows < p {
                    return Err(Error::shape(format!(
                        "maxpool1d: {rows} rows cannot be pooled by {p}"
                    )));
                }
                (rows / p, cols)
            }
            LayerSpec::Upsample1D { factor } => (rows * positive(factor, "factor")?, cols),
            LayerSpec::Lstm {
                units,
                return_sequences,
            } => {
                let u = positive(units, "units")?;
                (if return_sequences { rows } else { 1 }, u)
            }
            LayerSpec::RepeatLast { repeat_count } => {
                (positive(repeat_count, "repeat_count")?, cols)
            }
            LayerSpec::Flatten => (1, rows * cols),
            LayerSpec::Reshape { rows: r, cols: c } => {
                if r * c != rows * cols {
                    return Err(Error::shape(format!(
                        "reshape: {rows}x{cols} cannot become {r}x{c}"
                    )));
                }
                (r, c)
            }
        })
    }

    pub(crate) fn param_shapes(&self, (_, cols): Shape) -> Vec<ParamShape> {
        let p = |name, shape: Vec<usize>, fan_in, fan_out, kind| ParamShape {
            name,
            shape,
            fan_in,
            fan_out,
            kind,
        };
        match *self {
            LayerSpec::Dense { units } => vec![
                p("kernel", vec![units, cols], cols, units, Init::Glorot),
                p("bias", vec![units], 0, 0, Init::Zero),
            ],
            LayerSpec::Conv1D {
                filters,
                kernel_size,
            } => vec![
                p(
                    "kernel",
                    vec![filters, kernel_size, cols],
                    kernel_size * cols,
                    kernel_size * filters,
                    Init::Glorot,
                ),
                p("bias", vec![filters], 0, 0, Init::Zero),
            ],
            LayerSpec::Lstm { units, .. } => vec![
                p("input_kernel", vec![4 * units, cols], cols, 4 * units, Init::Glorot),
                p("recurrent_kernel", vec![4 * units, units], units, 4 * units, Init::Glorot),
                p("bias", vec![4 * units], 0, 0, Init::LstmBias),
            ],
            _ => vec![],
        }
    }
}

/// Per-layer values saved by the forward pass.
#[derive(Debug, Clone)]
pub(crate) enum LayerCache {
    Input(Tensor),
    Output(Tensor),
    Argmax(Vec<usize>),
    Lstm(LstmCache),
    None,
}

#[derive(Debug, Clone)]
pub(crate) struct LstmCache {
    input: Tensor,
    /// `T × 4h` post-activation gates in order i, f, g, o.
    gates: Vec<f64>,
    /// `T × h`
    cells: Vec<f64>,
    tanh_cells: Vec<f64>,
    hidden: Vec<f64>,
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub(crate) fn forward(
    spec: &LayerSpec,
    params: &[f64],
    input: &Tensor,
    out_shape: Shape,
) -> (Tensor, LayerCache) {
    let (rows, cols) = input.shape();
    match *spec {
        LayerSpec::Dense { units } => {
            let (w, b) = params.split_at(units * cols);
            let mut out = Tensor::zeros(rows, units);
            for t in 0..rows {
                let x = input.row(t);
                let y = out.row_mut(t);
                for o in 0..units {
                    y[o] = b[o] + dot(&w[o * cols..(o + 1) * cols], x);
                }
            }
            (out, LayerCache::Input(input.clone()))
        }
        LayerSpec::Tanh => {
            let data = input.as_slice().iter().map(|v| v.tanh()).collect();
            let out = Tensor::from_vec(rows, cols, data).expect("tanh shape");
            (out.clone(), LayerCache::Output(out))
        }
        LayerSpec::Conv1D {
            filters,
            kernel_size,
        } => {
            let span = kernel_size * cols;
            let (w, b) = params.split_at(filters * span);
            let mut out = Tensor::zeros(rows, filters);
            let mut col = vec![0.0; span];
            for t in 0..rows {
                im2col(input, t, kernel_size, &mut col);
                let y = out.row_mut(t);
                for f in 0..filters {
                    y[f] = b[f] + dot(&w[f * span..(f + 1) * span], &col);
                }
            }
            (out, LayerCache::Input(input.clone()))
        }
        LayerSpec::MaxPool1D { pool_size } => {
            let (out_rows, _) = out_shape;
            let mut out = Tensor::zeros(out_rows, cols);
            let mut argmax = vec![0usize; out_rows * cols];
            for t in 0..out_rows {
                for c in 0..cols {
                    let mut best = t * pool_size;
                    for r in t * pool_size + 1..(t + 1) * pool_size {
                        if input.get(r, c) > input.get(best, c) {
                            best = r;
                        }
                    }
                    out.set(t, c, input.get(best, c));
                    argmax[t * cols + c] = best;
                }
            }
            (out, LayerCache::Argmax(argmax))
        }
        LayerSpec::Upsample1D { factor } => {
            let mut out = Tensor::zeros(rows * factor, cols);
            for t in 0..rows * factor {
                out.row_mut(t).copy_from_slice(input.row(t / factor));
            }
            (out, LayerCache::None)
        }
        LayerSpec::Lstm {
            units,
            return_sequences,
        } => {
            let cache = lstm_forward(params, input, units);
            let out = if return_sequences {
                Tensor::from_vec(rows, units, cache.hidden.clone()).expect("lstm shape")
            } else {
                Tensor::row_vector(cache.hidden[(rows - 1) * units..].to_vec())
            };
            (out, LayerCache::Lstm(cache))
        }
        LayerSpec::RepeatLast { repeat_count } => {
            let last = input.row(rows - 1);
            let data = (0..repeat_count).flat_map(|_| last.iter().copied()).collect();
            let out = Tensor::from_vec(repeat_count, cols, data).expect("repeat shape");
            (out, LayerCache::None)
        }
        LayerSpec::Flatten | LayerSpec::Reshape { .. } => {
            let (r, c) = out_shape;
            let out = input.clone().reshaped(r, c).expect("validated reshape");
            (out, LayerCache::None)
        }
    }
}

/// Gathers the `kernel_size` input rows feeding output row `t` into `col`
/// (zero where the window leaves the sequence).
fn im2col(input: &Tensor, t: usize, kernel_size: usize, col: &mut [f64]) {
    let (rows, cols) = input.shape();
    let pad = (kernel_size - 1) / 2;
    for j in 0..kernel_size {
        let dst = &mut col[j * cols..(j + 1) * cols];
        match (t + j).checked_sub(pad) {
            Some(src) if src < rows => dst.copy_from_slice(input.row(src)),
            _ => dst.fill(0.0),
        }
    }
}

fn lstm_forward(params: &[f64], input: &Tensor, h: usize) -> LstmCache {
    let (steps, cols) = input.shape();
    let g4 = 4 * h;
    let (wx, rest) = params.split_at(g4 * cols);
    let (wh, bias) = rest.split_at(g4 * h);
    let mut gates = vec![0.0; steps * g4];
    let mut cells = vec![0.0; steps * h];
    let mut tanh_cells = vec![0.0; steps * h];
    let mut hidden = vec![0.0; steps * h];
    let zeros = vec![0.0; h];
    for t in 0..steps {
        let x = input.row(t);
        let h_prev: &[f64] = if t == 0 { &zeros } else { &hidden[(t - 1) * h..t * h] };
        let z = &mut gates[t * g4..(t + 1) * g4];
        for r in 0..g4 {
            z[r] = bias[r] + dot(&wx[r * cols..(r + 1) * cols], x) + dot(&wh[r * h..(r + 1) * h], h_prev);
        }
        for k in 0..h {
            z[k] = sigmoid(z[k]);
            z[h + k] = sigmoid(z[h + k]);
            z[2 * h + k] = z[2 * h + k].tanh();
            z[3 * h + k] = sigmoid(z[3 * h + k]);
        }
        for k in 0..h {
            let c_prev = if t == 0 { 0.0 } else { cells[(t - 1) * h + k] };
            let c = z[h + k] * c_prev + z[k] * z[2 * h + k];
            let tc = c.tanh();
            cells[t * h + k] = c;
            tanh_cells[t * h + k] = tc;
            hidden[t * h + k] = z[3 * h + k] * tc;
        }
    }
    LstmCache {
        input: input.clone(),
        gates,
        cells,
        tanh_cells,
        hidden,
    }
}

/// Accumulates parameter gradients into `grad_params` and returns the
/// gradient with respect to the layer input.
pub(crate) fn backward(
    spec: &LayerSpec,
    params: &[f64],
    cache: &LayerCache,
    in_shape: Shape,
    grad_out: &Tensor,
    grad_params: &mut [f64],
) -> Tensor {
    let (rows, cols) = in_shape;
    match (spec, cache) {
        (LayerSpec::Dense { units }, LayerCache::Input(input)) => {
            let units = *units;
            let (w, _) = params.split_at(units * cols);
            let (dw, db) = grad_params.split_at_mut(units * cols);
            let mut dx = Tensor::zeros(rows, cols);
            for t in 0..rows {
                let x = input.row(t);
                let g = grad_out.row(t);
                let dxt = dx.row_mut(t);
                for o in 0..units {
                    let go = g[o];
                    if go == 0.0 {
                        continue;
                    }
                    db[o] += go;
                    axpy(go, x, &mut dw[o * cols..(o + 1) * cols]);
                    axpy(go, &w[o * cols..(o + 1) * cols], dxt);
                }
            }
            dx
        }
        (LayerSpec::Tanh, LayerCache::Output(out)) => {
            let data = grad_out
                .as_slice()
                .iter()
                .zip(out.as_slice())
                .map(|(g, y)| g * (1.0 - y * y))
                .collect();
            Tensor::from_vec(rows, cols, data).expect("tanh grad shape")
        }
        (
            LayerSpec::Conv1D {
                filters,
                kernel_size,
            },
            LayerCache::Input(input),
        ) => {
            let (filters, k) = (*filters, *kernel_size);
            let span = k * cols;
            let pad = (k - 1) / 2;
            let (w, _) = params.split_at(filters * span);
            let (dw, db) = grad_params.split_at_mut(filters * span);
            let mut dx = Tensor::zeros(rows, cols);
            let mut col = vec![0.0; span];
            let mut dcol = vec![0.0; span];
            for t in 0..rows {
                im2col(input, t, k, &mut col);
                dcol.fill(0.0);
                let g = grad_out.row(t);
                for f in 0..filters {
                    let gf = g[f];
                    if gf == 0.0 {
                        continue;
                    }
                    db[f] += gf;
                    axpy(gf, &col, &mut dw[f * span..(f + 1) * span]);
                    axpy(gf, &w[f * span..(f + 1) * span], &mut dcol);
                }
                for j in 0..k {
                    if let Some(src) = (t + j).checked_sub(pad) {
                        if src < rows {
                            axpy(1.0, &dcol[j * cols..(j + 1) * cols], dx.row_mut(src));
                        }
                    }
                }
            }
            dx
        }
        (LayerSpec::MaxPool1D { .. }, LayerCache::Argmax(argmax)) => {
            let mut dx = Tensor::zeros(rows, cols);
            let out_rows = grad_out.rows();
            for t in 0..out_rows {
                for c in 0..cols {
                    let src = argmax[t * cols + c];
                    let v = dx.get(src, c) + grad_out.get(t, c);
                    dx.set(src, c, v);
                }
            }
            dx
        }
        (LayerSpec::Upsample1D { factor }, LayerCache::None) => {
            let mut dx = Tensor::zeros(rows, cols);
            for t in 0..rows * factor {
                axpy(1.0, grad_out.row(t), dx.row_mut(t / factor));
            }
            dx
        }
        (
            LayerSpec::Lstm {
                units,
                return_sequences,
            },
            LayerCache::Lstm(c),
        ) => lstm_backward(params, c, *units, *return_sequences, grad_out, grad_params),
        (LayerSpec::RepeatLast { .. }, LayerCache::None) => {
            let mut dx = Tensor::zeros(rows, cols);
            let last = dx.row_mut(rows - 1);
            for t in 0..grad_out.rows() {
                axpy(1.0, grad_out.row(t), last);
            }
            dx
        }
        (LayerSpec::Flatten | LayerSpec::Reshape { .. }, LayerCache::None) => grad_out
            .clone()
            .reshaped(rows, cols)
            .expect("validated reshape"),
        _ => unreachable!("cache variant does not match layer {}", spec.name()),
    }
}

fn lstm_backward(
    params: &[f64],
    cache: &LstmCache,
    h: usize,
    return_sequences: bool,
    grad_out: &Tensor,
    grad_params: &mut [f64],
) -> Tensor {
    let (steps, cols) = cache.input.shape();
    let g4 = 4 * h;
    let (wx, rest) = params.split_at(g4 * cols);
    let (wh, _) = rest.split_at(g4 * h);
    let (dwx, rest) = grad_params.split_at_mut(g4 * cols);
    let (dwh, db) = rest.split_at_mut(g4 * h);
    let mut dx = Tensor::zeros(steps, cols);
    let mut dh_next = vec![0.0; h];
    let mut dc_next = vec![0.0; h];
    let mut dz = vec![0.0; g4];
    let zeros = vec![0.0; h];
    for t in (0..steps).rev() {
        let gates = &cache.gates[t * g4..(t + 1) * g4];
        let upstream: Option<&[f64]> = if return_sequences {
            Some(grad_out.row(t))
        } else if t == steps - 1 {
            Some(grad_out.row(0))
        } else {
            None
        };
        for k in 0..h {
            let dh = dh_next[k] + upstream.map_or(0.0, |g| g[k]);
            let (i, f, g, o) = (gates[k], gates[h + k], gates[2 * h + k], gates[3 * h + k]);
            let tc = cache.tanh_cells[t * h + k];
            let c_prev = if t == 0 { 0.0 } else { cache.cells[(t - 1) * h + k] };
            let dc = dh * o * (1.0 - tc * tc) + dc_next[k];
            dz[k] = dc * g * i * (1.0 - i);
            dz[h + k] = dc * c_prev * f * (1.0 - f);
            dz[2 * h + k] = dc * i * (1.0 - g * g);
            dz[3 * h + k] = dh * tc * o * (1.0 - o);
            dc_next[k] = dc * f;
        }
        let x = cache.input.row(t);
        let h_prev: &[f64] = if t == 0 { &zeros } else { &cache.hidden[(t - 1) * h..t * h] };
        dh_next.fill(0.0);
        let dxt = dx.row_mut(t);
        for r in 0..g4 {
            let d = dz[r];
            if d == 0.0 {
                continue;
            }
            db[r] += d;
            axpy(d, x, &mut dwx[r * cols..(r + 1) * cols]);
            axpy(d, h_prev, &mut dwh[r * h..(r + 1) * h]);
            axpy(d, &wx[r * cols..(r + 1) * cols], dxt);
            axpy(d, &wh[r * h..(r + 1) * h], &mut dh_next);
        }
    }
    dx
}

//! Dense tanh network over a borrowed flat parameter slice, with the
//! matching reverse pass.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerShape {
    pub inputs: usize,
    pub outputs: usize,
}

impl LayerShape {
    pub fn table(dims: &[usize]) -> Vec<LayerShape> {
        dims.windows(2).map(|w| LayerShape { inputs: w[0], outputs: w[1] }).collect()
    }

    pub fn param_count(&self) -> usize {
        self.inputs * self.outputs + self.outputs
    }
}

/// `dims = [input, hidden.., output]`; tanh on hidden layers, identity on
/// the output layer.
#[derive(Debug, Clone)]
pub struct Mlp<'a> {
    dims: Vec<usize>,
    params: &'a [f64],
}

impl<'a> Mlp<'a> {
    pub fn new(dims: Vec<usize>, params: &'a [f64]) -> Self {
        debug_assert_eq!(params.len(), Self::param_count(&dims));
        Self { dims, params }
    }

    pub fn param_count(dims: &[usize]) -> usize {
        LayerShape::table(dims).iter().map(LayerShape::param_count).sum()
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().unwrap()
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.forward_cached(x).pop().unwrap()
    }

    /// Activations of every layer, input first and output last.
    pub fn forward_cached(&self, x: &[f64]) -> Vec<Vec<f64>> {
        assert_eq!(x.len(), self.dims[0], "input dimension");
        let n_layers = self.dims.len() - 1;
        let mut acts = Vec::with_capacity(n_layers + 1);
        acts.push(x.to_vec());
        let mut offset = 0;
        for (l, shape) in LayerShape::table(&self.dims).into_iter().enumerate() {
            let w = &self.params[offset..offset + shape.inputs * shape.outputs];
            let b = &self.params[offset + shape.inputs * shape.outputs..offset + shape.param_count()];
            let input = &acts[l];
            let hidden = l + 1 < n_layers;
            let out: Vec<f64> = (0..shape.outputs)
                .map(|o| {
                    let row = &w[o * shape.inputs..(o + 1) * shape.inputs];
                    let z = b[o] + row.iter().zip(input).map(|(a, x)| a * x).sum::<f64>();
                    if hidden {
                        z.tanh()
                    } else {
                        z
                    }
                })
                .collect();
            acts.push(out);
            offset += shape.param_count();
        }
        acts
    }

    /// Accumulates `d(loss)/d(params)` into `grad`, given the activations of
    /// a forward pass and `d(loss)/d(output)`.
    pub fn backward(&self, acts: &[Vec<f64>], d_out: &[f64], grad: &mut [f64]) {
        let shapes = LayerShape::table(&self.dims);
        let mut offsets = Vec::with_capacity(shapes.len());
        let mut off = 0;
        for s in &shapes {
            offsets.push(off);
            off += s.param_count();
        }
        let mut delta = d_out.to_vec();
        for l in (0..shapes.len()).rev() {
            let s = shapes[l];
            let off = offsets[l];
            let input = &acts[l];
            let n_w = s.inputs * s.outputs;
            for o in 0..s.outputs {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                let g_row = &mut grad[off + o * s.inputs..off + (o + 1) * s.inputs];
                for (g, x) in g_row.iter_mut().zip(input) {
                    *g += d * x;
                }
                grad[off + n_w + o] += d;
            }
            if l > 0 {
                let w = &self.params[off..off + n_w];
                delta = (0..s.inputs)
                    .map(|i| {
                        let back: f64 = (0..s.outputs).map(|o| w[o * s.inputs + i] * delta[o]).sum();
                        back * (1.0 - input[i] * input[i])
                    })
                    .collect();
            }
        }
    }
}

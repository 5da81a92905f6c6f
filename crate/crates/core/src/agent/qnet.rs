use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use sha2::{Digest, Sha256};

/// Dueling Q-network: one rectified hidden layer feeding a scalar value
/// head and a per-action advantage head,
/// `Q(s, a) = V(s) + A(s, a) - mean_a' A(s, a')`.
///
/// Parameters live in one flat vector laid out as
/// `w1 (hidden x input) | b1 | wv (hidden) | bv | wa (actions x hidden) | ba`.
#[derive(Debug, Clone, PartialEq)]
pub struct QNetwork {
    input: usize,
    hidden: usize,
    actions: usize,
    params: Vec<f64>,
}

/// Intermediate activations kept for the backward pass.
pub struct Forward {
    pub q: Array2<f64>,
    pre: Array2<f64>,
    act: Array2<f64>,
}

struct Offsets {
    w1: usize,
    b1: usize,
    wv: usize,
    bv: usize,
    wa: usize,
    ba: usize,
    end: usize,
}

impl QNetwork {
    pub fn new<R: Rng>(input: usize, hidden: usize, actions: usize, rng: &mut R) -> Self {
        let mut net = Self::zeros(input, hidden, actions);
        let o = net.offsets();
        fn fill<R: Rng>(slice: &mut [f64], fan_in: usize, rng: &mut R) {
            let bound = 1.0 / (fan_in as f64).sqrt();
            for v in slice {
                *v = rng.random_range(-bound..bound);
            }
        }
        fill(&mut net.params[o.w1..o.wv], input, rng);
        fill(&mut net.params[o.wv..o.wa], hidden, rng);
        fill(&mut net.params[o.wa..o.end], hidden, rng);
        net
    }

    pub fn zeros(input: usize, hidden: usize, actions: usize) -> Self {
        let len = hidden * input + hidden + hidden + 1 + actions * hidden + actions;
        Self {
            input,
            hidden,
            actions,
            params: vec![0.0; len],
        }
    }

    /// Rebuild from persisted parameters.
    pub fn from_params(input: usize, hidden: usize, actions: usize, params: Vec<f64>) -> Option<Self> {
        let net = Self::zeros(input, hidden, actions);
        (net.params.len() == params.len()).then_some(Self { params, ..net })
    }

    fn offsets(&self) -> Offsets {
        let (d, h, m) = (self.input, self.hidden, self.actions);
        let w1 = 0;
        let b1 = w1 + h * d;
        let wv = b1 + h;
        let bv = wv + h;
        let wa = bv + 1;
        let ba = wa + m * h;
        Offsets {
            w1,
            b1,
            wv,
            bv,
            wa,
            ba,
            end: ba + m,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.input
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden
    }

    pub fn n_actions(&self) -> usize {
        self.actions
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// `(rows, cols)` of each weight matrix, in storage order.
    pub fn layer_shapes(&self) -> [(usize, usize); 3] {
        [(self.hidden, self.input), (1, self.hidden), (self.actions, self.hidden)]
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    /// SHA-256 over the little-endian parameter bytes.
    pub fn param_hash(&self) -> String {
        let mut h = Sha256::new();
        for p in &self.params {
            h.update(p.to_le_bytes());
        }
        hex::encode(h.finalize())
    }

    fn w1(&self) -> ArrayView2<'_, f64> {
        let o = self.offsets();
        ArrayView2::from_shape((self.hidden, self.input), &self.params[o.w1..o.b1]).unwrap()
    }

    fn b1(&self) -> ArrayView1<'_, f64> {
        let o = self.offsets();
        ArrayView1::from(&self.params[o.b1..o.wv])
    }

    fn wv(&self) -> ArrayView1<'_, f64> {
        let o = self.offsets();
        ArrayView1::from(&self.params[o.wv..o.bv])
    }

    fn wa(&self) -> ArrayView2<'_, f64> {
        let o = self.offsets();
        ArrayView2::from_shape((self.actions, self.hidden), &self.params[o.wa..o.ba]).unwrap()
    }

    fn ba(&self) -> ArrayView1<'_, f64> {
        let o = self.offsets();
        ArrayView1::from(&self.params[o.ba..o.end])
    }

    /// Value and advantage streams for a batch of states (rows).
    pub fn streams(&self, states: &Array2<f64>) -> (Array1<f64>, Array2<f64>) {
        let (_, act) = self.hidden_layer(states);
        let bv = self.params[self.offsets().bv];
        let v = act.dot(&self.wv()) + bv;
        let a = act.dot(&self.wa().t()) + self.ba();
        (v, a)
    }

    fn hidden_layer(&self, states: &Array2<f64>) -> (Array2<f64>, Array2<f64>) {
        assert_eq!(states.ncols(), self.input, "state dimension mismatch");
        let pre = states.dot(&self.w1().t()) + self.b1();
        let act = pre.mapv(|x| x.max(0.0));
        (pre, act)
    }

    pub fn forward(&self, states: &Array2<f64>) -> Forward {
        let (pre, act) = self.hidden_layer(states);
        let bv = self.params[self.offsets().bv];
        let v = act.dot(&self.wv()) + bv;
        let mut q = act.dot(&self.wa().t()) + self.ba();
        for (mut row, &vs) in q.rows_mut().into_iter().zip(v.iter()) {
            let mean = row.mean().unwrap_or(0.0);
            row.mapv_inplace(|a| vs + a - mean);
        }
        Forward { q, pre, act }
    }

    pub fn q_values(&self, state: ArrayView1<'_, f64>) -> Vec<f64> {
        let s = state.to_owned().insert_axis(Axis(0));
        self.forward(&s).q.row(0).to_vec()
    }

    /// Parameter gradient given `dL/dQ` for every (state, action) cell.
    pub fn backward(&self, states: &Array2<f64>, fwd: &Forward, grad_q: &Array2<f64>) -> Vec<f64> {
        let o = self.offsets();
        let mut grad = vec![0.0; self.params.len()];

        let grad_v = grad_q.sum_axis(Axis(1));
        let mut grad_a = grad_q.clone();
        for mut row in grad_a.rows_mut() {
            let mean = row.mean().unwrap_or(0.0);
            row.mapv_inplace(|g| g - mean);
        }

        let g_wa = grad_a.t().dot(&fwd.act);
        grad[o.wa..o.ba].copy_from_slice(g_wa.as_standard_layout().as_slice().unwrap());
        grad[o.ba..o.end].copy_from_slice(grad_a.sum_axis(Axis(0)).as_slice().unwrap());
        let g_wv = fwd.act.t().dot(&grad_v);
        grad[o.wv..o.bv].copy_from_slice(g_wv.as_slice().unwrap());
        grad[o.bv] = grad_v.sum();

        let mut grad_h = grad_a.dot(&self.wa());
        for (mut row, &gv) in grad_h.rows_mut().into_iter().zip(grad_v.iter()) {
            row.scaled_add(gv, &self.wv());
        }
        ndarray::Zip::from(&mut grad_h)
            .and(&fwd.pre)
            .for_each(|g, &p| {
                if p <= 0.0 {
                    *g = 0.0;
                }
            });
        let g_w1 = grad_h.t().dot(states);
        grad[o.w1..o.b1].copy_from_slice(g_w1.as_standard_layout().as_slice().unwrap());
        grad[o.b1..o.wv].copy_from_slice(grad_h.sum_axis(Axis(0)).as_slice().unwrap());
        grad
    }
}

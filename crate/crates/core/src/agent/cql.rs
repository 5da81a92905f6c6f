use ndarray::{Array1, Array2, Axis};

use super::qnet::QNetwork;
use super::transition::Transition;
use crate::error::{Error, Result};
use crate::rank::argmax;

/// Double-DQN target: `r` for terminal transitions, otherwise
/// `r + gamma * Q_target(s', argmax_a Q_online(s', a))`.
pub fn q_target(t: &Transition, online: &QNetwork, target: &QNetwork, gamma: f64) -> f64 {
    q_targets(&[t], online, target, gamma)[0]
}

pub fn q_targets(batch: &[&Transition], online: &QNetwork, target: &QNetwork, gamma: f64) -> Vec<f64> {
    let live: Vec<usize> = (0..batch.len())
        .filter(|&k| !batch[k].terminal && gamma != 0.0)
        .collect();
    let mut y: Vec<f64> = batch.iter().map(|t| t.reward).collect();
    if live.is_empty() {
        return y;
    }
    let next = stack(live.iter().map(|&k| &batch[k].next_state));
    let q_online = online.forward(&next).q;
    let q_target = target.forward(&next).q;
    for (row, &k) in live.iter().enumerate() {
        let qs = q_online.row(row);
        let best = argmax(qs.as_slice().expect("contiguous"), |_| true).expect("nonempty action set");
        y[k] += gamma * q_target[[row, best as usize]];
    }
    y
}

pub(crate) fn stack<'a, I>(rows: I) -> Array2<f64>
where
    I: IntoIterator<Item = &'a Array1<f64>>,
{
    let views: Vec<_> = rows.into_iter().map(|r| r.view().insert_axis(Axis(0))).collect();
    ndarray::concatenate(Axis(0), &views).expect("equal state dimensions")
}

#[derive(Debug, Clone)]
pub struct CqlOutput {
    pub loss: f64,
    pub grad: Vec<f64>,
    /// `logsumexp_a Q(s, a) - Q(s, a_t)` per sample; never negative.
    pub regularizer: Vec<f64>,
    /// Mean `Q(s_t, a_t)` over the batch.
    pub mean_q: f64,
}

/// Weighted conservative Q-learning objective with fixed targets:
///
/// `Σ_k w_k [ alpha (logsumexp_a Q(s_k, a) - Q(s_k, a_k)) + ½ (y_k - Q(s_k, a_k))² ]`.
///
/// With uniform weights `1/B` this is the batch mean form.
pub fn cql_loss_with_targets(
    net: &QNetwork,
    states: &Array2<f64>,
    actions: &[u32],
    targets: &[f64],
    weights: &[f64],
    alpha: f64,
) -> Result<CqlOutput> {
    let b = actions.len();
    if b == 0 {
        return Err(Error::InvalidInput("empty batch".into()));
    }
    assert_eq!(states.nrows(), b);
    assert_eq!(targets.len(), b);
    assert_eq!(weights.len(), b);

    let fwd = net.forward(states);
    let mut grad_q = Array2::zeros(fwd.q.raw_dim());
    let mut loss = 0.0;
    let mut regularizer = Vec::with_capacity(b);
    let mut mean_q = 0.0;

    for k in 0..b {
        let q = fwd.q.row(k);
        let a = actions[k] as usize;
        let max = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = q.iter().map(|v| (v - max).exp()).sum();
        let lse = max + sum.ln();
        let qa = q[a];
        let reg = lse - qa;
        let td = targets[k] - qa;
        loss += weights[k] * (alpha * reg + 0.5 * td * td);
        regularizer.push(reg);
        mean_q += qa / b as f64;

        let mut g = grad_q.row_mut(k);
        for (j, gj) in g.iter_mut().enumerate() {
            *gj = weights[k] * alpha * (q[j] - lse).exp();
        }
        g[a] += weights[k] * (-alpha - td);
    }

    if !loss.is_finite() {
        return Err(Error::Numeric(format!("CQL loss is {loss}")));
    }
    let grad = net.backward(states, &fwd, &grad_q);
    Ok(CqlOutput {
        loss,
        grad,
        regularizer,
        mean_q,
    })
}

/// Batch-mean CQL loss with double-DQN targets computed from `target`.
pub fn cql_loss(
    batch: &[&Transition],
    online: &QNetwork,
    target: &QNetwork,
    alpha: f64,
    gamma: f64,
) -> Result<CqlOutput> {
    if batch.is_empty() {
        return Err(Error::InvalidInput("empty batch".into()));
    }
    let y = q_targets(batch, online, target, gamma);
    let states = stack(batch.iter().map(|t| &t.state));
    let actions: Vec<u32> = batch.iter().map(|t| t.action).collect();
    let w = vec![1.0 / batch.len() as f64; batch.len()];
    cql_loss_with_targets(online, &states, &actions, &y, &w, alpha)
}

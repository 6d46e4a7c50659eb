//! Analytic layer gradients against central finite differences at 64-bit.

mod common;

use common::{contract, max_rel_err, numeric_grad, FD_TOL};
use tweetclf::layers::*;
use tweetclf::tensor::{softmax, softmax_backward};
use tweetclf::train::cross_entropy;
use tweetclf::{RngState, Tensor};

fn check(label: &str, analytic: &Tensor, numeric: &Tensor) {
    let err = max_rel_err(analytic, numeric);
    assert!(err < FD_TOL, "{label}: relative error {err:e}");
}

fn dims(rng: &mut RngState, lo: usize, hi: usize) -> usize {
    lo + rng.below(hi - lo + 1)
}

#[test]
fn embedding_gradient() {
    let mut rng = RngState::new(100);
    for _ in 0..5 {
        let (b, l, v, d) = (
            dims(&mut rng, 1, 4),
            dims(&mut rng, 1, 6),
            dims(&mut rng, 2, 8),
            dims(&mut rng, 1, 8),
        );
        let ids = TokenIds::new(b, l, (0..b * l).map(|_| rng.below(v)).collect()).unwrap();
        let table = rng.uniform_tensor(&[v, d], -1.0, 1.0);
        let w = rng.uniform_tensor(&[b, l, d], -1.0, 1.0);
        let analytic = embedding_backward(&ids, &w, v).unwrap();
        let numeric = numeric_grad(&table, |t| {
            contract(&embedding_lookup(&ids, t).unwrap(), &w)
        });
        check("embedding", &analytic, &numeric);
    }
}

#[test]
fn dense_gradient() {
    let mut rng = RngState::new(101);
    for case in 0..6 {
        let (input, output) = (dims(&mut rng, 1, 8), dims(&mut rng, 1, 8));
        let shape = if case % 2 == 0 {
            vec![dims(&mut rng, 1, 5), input]
        } else {
            vec![dims(&mut rng, 1, 3), dims(&mut rng, 1, 4), input]
        };
        let x = rng.uniform_tensor(&shape, -1.0, 1.0);
        let p = DenseParams {
            weight: rng.uniform_tensor(&[input, output], -1.0, 1.0),
            bias: rng.uniform_tensor(&[output], -1.0, 1.0),
        };
        let y = dense(&x, &p).unwrap();
        let w = rng.uniform_tensor(y.shape(), -1.0, 1.0);
        let (dx, dp) = dense_backward(&x, &p, &w).unwrap();
        check(
            "dense dx",
            &dx,
            &numeric_grad(&x, |x| contract(&dense(x, &p).unwrap(), &w)),
        );
        check(
            "dense dW",
            &dp.weight,
            &numeric_grad(&p.weight, |t| {
                let q = DenseParams {
                    weight: t.clone(),
                    bias: p.bias.clone(),
                };
                contract(&dense(&x, &q).unwrap(), &w)
            }),
        );
        check(
            "dense db",
            &dp.bias,
            &numeric_grad(&p.bias, |t| {
                let q = DenseParams {
                    weight: p.weight.clone(),
                    bias: t.clone(),
                };
                contract(&dense(&x, &q).unwrap(), &w)
            }),
        );
    }
}

#[test]
fn conv1d_gradient() {
    let mut rng = RngState::new(102);
    for _ in 0..6 {
        let (b, cin, cout, k, stride) = (
            dims(&mut rng, 1, 3),
            dims(&mut rng, 1, 4),
            dims(&mut rng, 1, 4),
            dims(&mut rng, 1, 4),
            dims(&mut rng, 1, 2),
        );
        let len = k + dims(&mut rng, 0, 8 - k);
        let x = rng.uniform_tensor(&[b, len, cin], -1.0, 1.0);
        let p = ConvParams {
            kernels: rng.uniform_tensor(&[cout, cin, k], -1.0, 1.0),
            bias: rng.uniform_tensor(&[cout], -1.0, 1.0),
        };
        let y = conv1d(&x, &p, stride).unwrap();
        assert_eq!(y.shape()[1], (len - k) / stride + 1);
        let w = rng.uniform_tensor(y.shape(), -1.0, 1.0);
        let (dx, dp) = conv1d_backward(&x, &p, stride, &w).unwrap();
        check(
            "conv dx",
            &dx,
            &numeric_grad(&x, |x| contract(&conv1d(x, &p, stride).unwrap(), &w)),
        );
        check(
            "conv dK",
            &dp.kernels,
            &numeric_grad(&p.kernels, |t| {
                let q = ConvParams {
                    kernels: t.clone(),
                    bias: p.bias.clone(),
                };
                contract(&conv1d(&x, &q, stride).unwrap(), &w)
            }),
        );
        check(
            "conv db",
            &dp.bias,
            &numeric_grad(&p.bias, |t| {
                let q = ConvParams {
                    kernels: p.kernels.clone(),
                    bias: t.clone(),
                };
                contract(&conv1d(&x, &q, stride).unwrap(), &w)
            }),
        );
    }
}

#[test]
fn maxpool_gradient() {
    let mut rng = RngState::new(103);
    for _ in 0..6 {
        let (b, ch, window) = (
            dims(&mut rng, 1, 3),
            dims(&mut rng, 1, 4),
            dims(&mut rng, 1, 3),
        );
        let len = window + dims(&mut rng, 0, 8 - window);
        let x = rng.uniform_tensor(&[b, len, ch], -1.0, 1.0);
        let (y, cache) = maxpool1d(&x, window).unwrap();
        assert_eq!(y.shape()[1], len / window);
        let w = rng.uniform_tensor(y.shape(), -1.0, 1.0);
        let dx = maxpool1d_backward(&cache, &w).unwrap();
        check(
            "maxpool dx",
            &dx,
            &numeric_grad(&x, |x| contract(&maxpool1d(x, window).unwrap().0, &w)),
        );
    }
}

#[test]
fn maxpool_sum_gradient_marks_argmax() {
    let x = Tensor::new(vec![1, 6, 1], vec![0.1, 0.9, 0.3, 0.5, 0.2, 0.4]).unwrap();
    let (y, cache) = maxpool1d(&x, 3).unwrap();
    let dx = maxpool1d_backward(&cache, &Tensor::full(y.shape(), 1.0)).unwrap();
    let numeric = numeric_grad(&x, |x| maxpool1d(x, 3).unwrap().0.sum());
    assert_eq!(dx.data(), &[0.0, 1.0, 0.0, 1.0, 0.0, 0.0]);
    check("maxpool sum", &dx, &numeric);
}

fn random_cell(rng: &mut RngState, input: usize, hidden: usize) -> LstmCellParams {
    let mut p = LstmCellParams::zeros(input, hidden);
    for t in p.tensors_mut() {
        *t = rng.uniform_tensor(t.shape(), -1.0, 1.0);
    }
    p
}

fn with_tensor(p: &LstmCellParams, k: usize, t: &Tensor) -> LstmCellParams {
    let mut q = p.clone();
    *q.tensors_mut()[k] = t.clone();
    q
}

#[test]
fn lstm_step_gradient() {
    let mut rng = RngState::new(104);
    for _ in 0..5 {
        let (b, input, hidden) = (
            dims(&mut rng, 1, 3),
            dims(&mut rng, 1, 5),
            dims(&mut rng, 1, 5),
        );
        let p = random_cell(&mut rng, input, hidden);
        let x = rng.uniform_tensor(&[b, input], -1.0, 1.0);
        let prev = LstmState {
            h: rng.uniform_tensor(&[b, hidden], -0.9, 0.9),
            c: rng.uniform_tensor(&[b, hidden], -1.5, 1.5),
        };
        let wh = rng.uniform_tensor(&[b, hidden], -1.0, 1.0);
        let wc = rng.uniform_tensor(&[b, hidden], -1.0, 1.0);
        let loss = |x: &Tensor, prev: &LstmState, p: &LstmCellParams| {
            let s = lstm_step(x, prev, p).unwrap();
            contract(&s.h, &wh) + contract(&s.c, &wc)
        };
        let (_, cache) = lstm_step_cached(&x, &prev, &p).unwrap();
        let mut grads = LstmCellParams::zeros(input, hidden);
        let (dx, dh, dc) = lstm_step_backward(&cache, &wh, &wc, &p, &mut grads).unwrap();

        check("lstm dx", &dx, &numeric_grad(&x, |x| loss(x, &prev, &p)));
        check(
            "lstm dh_prev",
            &dh,
            &numeric_grad(&prev.h, |h| {
                loss(
                    &x,
                    &LstmState {
                        h: h.clone(),
                        c: prev.c.clone(),
                    },
                    &p,
                )
            }),
        );
        check(
            "lstm dc_prev",
            &dc,
            &numeric_grad(&prev.c, |c| {
                loss(
                    &x,
                    &LstmState {
                        h: prev.h.clone(),
                        c: c.clone(),
                    },
                    &p,
                )
            }),
        );
        let analytic: Vec<Tensor> = grads.tensors_mut().into_iter().map(|t| t.clone()).collect();
        let mut base = p.clone();
        let originals: Vec<Tensor> = base.tensors_mut().into_iter().map(|t| t.clone()).collect();
        for (k, (orig, a)) in originals.iter().zip(&analytic).enumerate() {
            let numeric = numeric_grad(orig, |t| loss(&x, &prev, &with_tensor(&p, k, t)));
            check(&format!("lstm param {k}"), a, &numeric);
        }
    }
}

#[test]
fn bilstm_gradient() {
    let mut rng = RngState::new(105);
    for case in 0..6 {
        let mode = if case % 2 == 0 {
            BiLstmMode::Sequence
        } else {
            BiLstmMode::Final
        };
        let (b, len, input, hidden) = (
            dims(&mut rng, 1, 3),
            dims(&mut rng, 1, 5),
            dims(&mut rng, 1, 4),
            dims(&mut rng, 1, 4),
        );
        let p = BiLstmParams {
            fwd: random_cell(&mut rng, input, hidden),
            bwd: random_cell(&mut rng, input, hidden),
        };
        let x = rng.uniform_tensor(&[b, len, input], -1.0, 1.0);
        let (y, cache) = bilstm_forward(&x, &p, mode).unwrap();
        let w = rng.uniform_tensor(y.shape(), -1.0, 1.0);
        let (dx, grads) = bilstm_backward(&cache, &p, &w).unwrap();
        check(
            "bilstm dx",
            &dx,
            &numeric_grad(&x, |x| contract(&bilstm(x, &p, mode).unwrap(), &w)),
        );
        for (dir, analytic) in [(0, &grads.fwd), (1, &grads.bwd)] {
            let mut an = analytic.clone();
            let an: Vec<Tensor> = an.tensors_mut().into_iter().map(|t| t.clone()).collect();
            let cell = if dir == 0 { &p.fwd } else { &p.bwd };
            let mut cell_copy = cell.clone();
            let originals: Vec<Tensor> = cell_copy
                .tensors_mut()
                .into_iter()
                .map(|t| t.clone())
                .collect();
            for (k, orig) in originals.iter().enumerate() {
                let numeric = numeric_grad(orig, |t| {
                    let mut q = p.clone();
                    let c = with_tensor(cell, k, t);
                    if dir == 0 {
                        q.fwd = c;
                    } else {
                        q.bwd = c;
                    }
                    contract(&bilstm(&x, &q, mode).unwrap(), &w)
                });
                check(&format!("bilstm dir {dir} param {k}"), &an[k], &numeric);
            }
        }
    }
}

#[test]
fn residual_gradient() {
    let mut rng = RngState::new(106);
    for case in 0..6 {
        let (b, d_in) = (dims(&mut rng, 1, 4), dims(&mut rng, 1, 6));
        let projected = case % 2 == 1;
        let d_out = if projected {
            dims(&mut rng, 1, 6)
        } else {
            d_in
        };
        let proj = projected.then(|| DenseParams {
            weight: rng.uniform_tensor(&[d_in, d_out], -1.0, 1.0),
            bias: rng.uniform_tensor(&[d_out], -1.0, 1.0),
        });
        let x = rng.uniform_tensor(&[b, d_in], -1.0, 1.0);
        let block = rng.uniform_tensor(&[b, d_out], -1.0, 1.0);
        let w = rng.uniform_tensor(&[b, d_out], -1.0, 1.0);
        let (d_block, d_in_grad, d_proj) = residual_backward(&x, proj.as_ref(), &w).unwrap();
        check(
            "residual d_block",
            &d_block,
            &numeric_grad(&block, |t| {
                contract(&residual_add(t, &x, proj.as_ref()).unwrap(), &w)
            }),
        );
        check(
            "residual d_in",
            &d_in_grad,
            &numeric_grad(&x, |t| {
                contract(&residual_add(&block, t, proj.as_ref()).unwrap(), &w)
            }),
        );
        if let (Some(p), Some(dp)) = (&proj, &d_proj) {
            check(
                "residual d_proj",
                &dp.weight,
                &numeric_grad(&p.weight, |t| {
                    let q = DenseParams {
                        weight: t.clone(),
                        bias: p.bias.clone(),
                    };
                    contract(&residual_add(&block, &x, Some(&q)).unwrap(), &w)
                }),
            );
        }
    }
}

#[test]
fn residual_identity_path_survives_zero_block() {
    // A block whose output ignores its input still passes gradient to the
    // input through the skip.
    let mut rng = RngState::new(107);
    let x = rng.uniform_tensor(&[2, 4], -1.0, 1.0);
    let w = rng.uniform_tensor(&[2, 4], -1.0, 1.0);
    let zero_block = Tensor::zeros(&[2, 4]);
    let numeric = numeric_grad(&x, |t| {
        contract(&residual_add(&zero_block, t, None).unwrap(), &w)
    });
    let (_, d_in, _) = residual_backward(&x, None, &w).unwrap();
    check("identity skip", &d_in, &numeric);
    assert!(d_in.data().iter().any(|&g| g != 0.0));
}

#[test]
fn softmax_cross_entropy_gradient() {
    let mut rng = RngState::new(108);
    for _ in 0..6 {
        let (b, c) = (dims(&mut rng, 1, 6), dims(&mut rng, 2, 8));
        let logits = rng.uniform_tensor(&[b, c], -3.0, 3.0);
        let labels: Vec<usize> = (0..b).map(|_| rng.below(c)).collect();
        let (_, analytic) = cross_entropy(&softmax(&logits), &labels).unwrap();
        let numeric = numeric_grad(&logits, |l| cross_entropy(&softmax(l), &labels).unwrap().0);
        check("softmax+xent", &analytic, &numeric);

        let w = rng.uniform_tensor(&[b, c], -1.0, 1.0);
        let y = softmax(&logits);
        let numeric = numeric_grad(&logits, |l| contract(&softmax(l), &w));
        check("softmax vjp", &softmax_backward(&y, &w), &numeric);
    }
}

use proptest::prelude::*;
use scnet::numerics::ops::{conv_out_len, GROUP_NORM_EPS};
use scnet::numerics::ops::LstmVars;
use scnet::numerics::{grad_check, GradCheckOptions, Graph, Tensor, Var};
use scnet::RngState;

const TOL: f64 = 1e-3;

fn randn(shape: &[usize], seed: u64) -> Tensor {
    Tensor::randn(shape, &mut RngState::new(seed))
}

/// Scalar probe `Σ y ⊙ w` with a fixed random `w`, so every output element
/// contributes with its own weight.
fn probe(g: &mut Graph, y: Var, seed: u64) -> scnet::Result<Var> {
    let w = randn(g.shape(y), seed ^ 0xabcd);
    g.dot_const(y, &w)
}

fn check(inputs: &[Tensor], f: impl Fn(&mut Graph, &[Var]) -> scnet::Result<Var>) {
    let rep = grad_check(inputs, f, GradCheckOptions::default()).unwrap();
    assert!(rep.checked > 0);
    assert!(rep.max_rel_err <= TOL, "{rep:?}");
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn conv_transpose_is_adjoint(
        outer in 1usize..3, len in 1usize..20, mid in 1usize..3,
        cin in 1usize..4, cout in 1usize..4, k in 1usize..6, stride in 1usize..6,
        pad_seed in 0usize..6, seed in 0u64..1000,
    ) {
        let pad = pad_seed % k;
        prop_assume!(len + pad >= k);
        let lout = conv_out_len(len, k, stride, 0, pad).unwrap();
        let x = randn(&[outer, len, mid, cin], seed);
        let z = randn(&[outer, lout, mid, cout], seed + 1);
        let w = randn(&[k, cin, cout], seed + 2);
        let mut g = Graph::inference();
        let (xv, zv, wv) = (g.constant(x.clone()), g.constant(z.clone()), g.constant(w));
        let y = g.conv1d(xv, wv, 1, stride, 0, pad).unwrap();
        prop_assert_eq!(g.shape(y)[1], lout);
        let xt = g.conv1d_transposed(zv, wv, 1, stride, len).unwrap();
        let lhs = g.value(y).dot(&z);
        let rhs = x.dot(g.value(xt));
        prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + lhs.abs()), "{} vs {}", lhs, rhs);
    }

    #[test]
    fn rfft_round_trip_and_parseval(len in 2usize..40, c in 1usize..3, seed in 0u64..1000) {
        let x = randn(&[2, len, c], seed);
        let mut g = Graph::inference();
        let xv = g.constant(x.clone());
        let f = g.rfft_features(xv, 1).unwrap();
        prop_assert_eq!(g.shape(f), &[2, len / 2 + 1, 2 * c][..]);
        let back = g.irfft_features(f, 1, len).unwrap();
        prop_assert!(g.value(back).max_abs_diff(&x) <= 1e-9);
        // Parseval for a real signal: Σx² = (|X0|² + 2Σ|Xk|² + [|X_{N/2}|²]) / N
        let spec = g.value(f);
        let k = len / 2 + 1;
        for o in 0..2 {
            for ch in 0..c {
                let time: f64 = (0..len).map(|t| x.data()[(o * len + t) * c + ch].powi(2)).sum();
                let mut freq = 0.0;
                for b in 0..k {
                    let base = (o * k + b) * 2 * c;
                    let p = spec.data()[base + ch].powi(2) + spec.data()[base + c + ch].powi(2);
                    let twice = b != 0 && !(len % 2 == 0 && b == len / 2);
                    freq += if twice { 2.0 * p } else { p };
                }
                prop_assert!((time - freq / len as f64).abs() <= 1e-9 * (1.0 + time));
            }
        }
    }
}

#[test]
fn grad_conv1d_shapes() {
    for (i, &(len, k, s, pl, pr, cin, cout)) in
        [(7, 3, 1, 1, 1, 2, 3), (9, 4, 4, 0, 3, 3, 2), (5, 1, 2, 0, 1, 1, 4)].iter().enumerate()
    {
        let x = randn(&[2, len, 3, cin], i as u64);
        let w = randn(&[k, cin, cout], 10 + i as u64);
        check(&[x, w], |g, v| {
            let y = g.conv1d(v[0], v[1], 1, s, pl, pr)?;
            probe(g, y, i as u64)
        });
    }
}

#[test]
fn grad_conv1d_transposed_shapes() {
    for (i, &(lin, k, s, target, cin, cout)) in [(3, 4, 4, 10, 2, 3), (4, 2, 2, 8, 1, 2), (2, 3, 1, 4, 3, 3)].iter().enumerate() {
        let x = randn(&[1, 2, lin, cout], i as u64);
        let w = randn(&[k, cin, cout], 20 + i as u64);
        check(&[x, w], |g, v| {
            let y = g.conv1d_transposed(v[0], v[1], 2, s, target)?;
            probe(g, y, i as u64)
        });
    }
}

#[test]
fn grad_conv2d_and_linear() {
    for (i, &(h, w, cin, cout, kh, kw)) in [(4, 5, 2, 3, 3, 3), (3, 3, 4, 4, 3, 1), (6, 2, 1, 2, 1, 3)].iter().enumerate() {
        let x = randn(&[2, h, w, cin], i as u64);
        let k = randn(&[kh, kw, cin, cout], 30 + i as u64);
        check(&[x, k], |g, v| {
            let y = g.conv2d_same(v[0], v[1])?;
            probe(g, y, i as u64)
        });
    }
    for (i, shape) in [vec![3, 4], vec![2, 3, 5], vec![1, 2, 2, 6]].into_iter().enumerate() {
        let cin = *shape.last().unwrap();
        let x = randn(&shape, i as u64);
        let w = randn(&[cin, 3], 40 + i as u64);
        check(&[x, w], |g, v| {
            let y = g.linear(v[0], v[1])?;
            probe(g, y, i as u64)
        });
    }
}

#[test]
fn grad_group_norm() {
    for (i, &(groups, c, f)) in [(1, 4, 3), (2, 4, 5), (4, 8, 2)].iter().enumerate() {
        let x = randn(&[2, f, 3, c], i as u64);
        let gamma = randn(&[c], 50 + i as u64);
        let beta = randn(&[c], 60 + i as u64);
        check(&[x, gamma, beta], |g, v| {
            let y = g.group_norm(v[0], groups, v[1], v[2], GROUP_NORM_EPS)?;
            probe(g, y, i as u64)
        });
    }
}

#[test]
fn grad_activations() {
    for (i, shape) in [vec![5], vec![2, 3, 4], vec![1, 2, 3, 6]].into_iter().enumerate() {
        let x = randn(&shape, 70 + i as u64);
        check(std::slice::from_ref(&x), |g, v| {
            let y = g.gelu(v[0])?;
            probe(g, y, i as u64)
        });
        check(std::slice::from_ref(&x), |g, v| {
            let y = g.sigmoid(v[0])?;
            probe(g, y, i as u64)
        });
        if shape.last().unwrap() % 2 == 0 {
            check(std::slice::from_ref(&x), |g, v| {
                let y = g.glu(v[0])?;
                probe(g, y, i as u64)
            });
        }
    }
}

#[test]
fn grad_bilstm() {
    for (i, &(len, c, h, axis)) in [(4, 3, 2, 1), (3, 2, 3, 2), (5, 4, 1, 1)].iter().enumerate() {
        let shape = if axis == 1 { [1, len, 2, c] } else { [1, 2, len, c] };
        let s = 80 + 10 * i as u64;
        let mut inputs = vec![randn(&shape, s)];
        for d in 0..2u64 {
            inputs.push(randn(&[c, 4 * h], s + 1 + d).map(|v| 0.5 * v));
            inputs.push(randn(&[h, 4 * h], s + 3 + d).map(|v| 0.5 * v));
            inputs.push(randn(&[4 * h], s + 5 + d).map(|v| 0.1 * v));
        }
        check(&inputs, |g, v| {
            let p = LstmVars { w_ih: [v[1], v[4]], w_hh: [v[2], v[5]], bias: [v[3], v[6]] };
            let y = g.bilstm(v[0], axis, &p, h)?;
            probe(g, y, i as u64)
        });
    }
}

#[test]
fn grad_fourier_features() {
    for (i, &len) in [2usize, 5, 8].iter().enumerate() {
        let x = randn(&[1, 3, len, 2], 100 + i as u64);
        check(std::slice::from_ref(&x), |g, v| {
            let y = g.rfft_features(v[0], 2)?;
            probe(g, y, i as u64)
        });
        let f = randn(&[1, 3, len / 2 + 1, 4], 110 + i as u64);
        check(&[f], |g, v| {
            let y = g.irfft_features(v[0], 2, len)?;
            probe(g, y, i as u64)
        });
    }
}

#[test]
fn grad_shape_plumbing() {
    let a = randn(&[2, 3, 4], 120);
    let b = randn(&[2, 5, 4], 121);
    let bias = randn(&[4], 122);
    check(&[a, b, bias], |g, v| {
        let c = g.concat(&[v[0], v[1]], 1)?;
        let s = g.slice(c, 1, 2, 4)?;
        let p = g.permute(s, &[2, 0, 1])?;
        let r = g.reshape(p, &[4, 8])?;
        let r = g.permute(r, &[1, 0])?;
        let r = g.add_bias(r, v[2])?;
        let m = g.mul(r, r)?;
        let d = g.sub(m, r)?;
        probe(g, d, 7)
    });
}

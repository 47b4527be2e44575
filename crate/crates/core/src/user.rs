//! User encoders: additive attention over the clicked documents, or a GRU
//! run over them oldest first.

use thiserror::Error;

use crate::encoder::{additive_attention, AdditivePoolParams, AdditiveVars};
use crate::numeric::{NumericError, Tape, Tensor, Var};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum UserEncoderError {
    #[error("cold user: empty click history")]
    ColdUser,
    #[error(transparent)]
    Numeric(#[from] NumericError),
}

/// `W_U` (`D_H × D_U`), `b_U` and `V_U` (`D_U`).
pub type UserAttentionParams = AdditivePoolParams;

/// GRU cell weights, all `D_H × D_H` matrices and `D_H` biases.
#[derive(Clone, Debug, PartialEq)]
pub struct GruParams {
    pub w_ir: Tensor,
    pub w_iz: Tensor,
    pub w_in: Tensor,
    pub w_hr: Tensor,
    pub w_hz: Tensor,
    pub w_hn: Tensor,
    pub b_r: Tensor,
    pub b_z: Tensor,
    pub b_in: Tensor,
    pub b_hn: Tensor,
}

impl GruParams {
    pub const NAMES: [&'static str; 10] = [
        "w_ir", "w_iz", "w_in", "w_hr", "w_hz", "w_hn", "b_r", "b_z", "b_in", "b_hn",
    ];

    pub fn tensors(&self) -> [&Tensor; 10] {
        [
            &self.w_ir, &self.w_iz, &self.w_in, &self.w_hr, &self.w_hz, &self.w_hn, &self.b_r,
            &self.b_z, &self.b_in, &self.b_hn,
        ]
    }

    pub fn from_tensors(t: [Tensor; 10]) -> Self {
        let [w_ir, w_iz, w_in, w_hr, w_hz, w_hn, b_r, b_z, b_in, b_hn] = t;
        Self {
            w_ir,
            w_iz,
            w_in,
            w_hr,
            w_hz,
            w_hn,
            b_r,
            b_z,
            b_in,
            b_hn,
        }
    }
}

/// Tape handles for [`GruParams`], in [`GruParams::NAMES`] order.
#[derive(Clone, Copy, Debug)]
pub struct GruVars(pub [Var; 10]);

#[derive(Clone, Debug, PartialEq)]
pub struct UserRepresentation {
    pub vector: Vec<f64>,
    /// Attention over history items; empty for the GRU variant.
    pub gamma: Vec<f64>,
}

/// Attentive user encoder on the tape. `docs` is `H × D_H`.
pub fn attention_user_on_tape(
    tape: &mut Tape,
    docs: Var,
    vars: &AdditiveVars,
) -> Result<(Var, Var), NumericError> {
    additive_attention(tape, docs, vars)
}

/// One GRU step: returns the next hidden state.
pub fn gru_step(tape: &mut Tape, d: Var, prev: Var, vars: &GruVars) -> Result<Var, NumericError> {
    let [w_ir, w_iz, w_in, w_hr, w_hz, w_hn, b_r, b_z, b_in, b_hn] = vars.0;
    let gate = |tape: &mut Tape, wi: Var, wh: Var, b: Var| -> Result<Var, NumericError> {
        let x = tape.matvec(wi, d)?;
        let h = tape.matvec(wh, prev)?;
        let s = tape.add(x, h)?;
        let s = tape.add(s, b)?;
        Ok(tape.sigmoid(s))
    };
    let r = gate(tape, w_ir, w_hr, b_r)?;
    let z = gate(tape, w_iz, w_hz, b_z)?;
    let x = tape.matvec(w_in, d)?;
    let x = tape.add(x, b_in)?;
    let h = tape.matvec(w_hn, prev)?;
    let h = tape.add(h, b_hn)?;
    let gated = tape.mul(r, h)?;
    let pre = tape.add(x, gated)?;
    let n = tape.tanh(pre);
    // (1 - z) * n + z * prev = n + z * (prev - n)
    let diff = tape.sub(prev, n)?;
    let keep = tape.mul(z, diff)?;
    tape.add(n, keep)
}

/// Runs the GRU over `docs` in order and returns the final state.
pub fn gru_user_on_tape(
    tape: &mut Tape,
    docs: &[Var],
    initial: Var,
    vars: &GruVars,
) -> Result<Var, NumericError> {
    docs.iter()
        .try_fold(initial, |o, &d| gru_step(tape, d, o, vars))
}

fn history_matrix(history: &[Vec<f64>]) -> Result<Tensor, UserEncoderError> {
    if history.is_empty() {
        return Err(UserEncoderError::ColdUser);
    }
    Ok(Tensor::from_rows(history)?)
}

pub fn attention_user_forward(
    history: &[Vec<f64>],
    params: &UserAttentionParams,
) -> Result<UserRepresentation, UserEncoderError> {
    let mut tape = Tape::new();
    let docs = tape.input(history_matrix(history)?);
    let vars = AdditiveVars {
        projection: tape.input(params.projection.clone()),
        bias: tape.input(params.bias.clone()),
        query: tape.input(params.query.clone()),
    };
    let (gamma, u) = attention_user_on_tape(&mut tape, docs, &vars)?;
    Ok(UserRepresentation {
        vector: tape.value(u).data().to_vec(),
        gamma: tape.value(gamma).data().to_vec(),
    })
}

/// `initial` defaults to the zero vector.
pub fn gru_user_forward(
    history: &[Vec<f64>],
    params: &GruParams,
    initial: Option<&[f64]>,
) -> Result<UserRepresentation, UserEncoderError> {
    let dim = history_matrix(history)?.cols();
    let mut tape = Tape::new();
    let vars = GruVars(params.tensors().map(|t| tape.input(t.clone())));
    let o0 = tape.input(Tensor::vector(
        initial.map_or_else(|| vec![0.0; dim], <[f64]>::to_vec),
    ));
    let docs: Vec<Var> = history
        .iter()
        .map(|d| tape.input(Tensor::vector(d.clone())))
        .collect();
    let u = gru_user_on_tape(&mut tape, &docs, o0, &vars)?;
    Ok(UserRepresentation {
        vector: tape.value(u).data().to_vec(),
        gamma: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::xavier_uniform;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn att_params() -> UserAttentionParams {
        AdditivePoolParams {
            projection: Tensor::from_rows(&[vec![0.7, -0.2], vec![0.3, 0.9]]).unwrap(),
            bias: Tensor::vector(vec![-0.1, 0.25]),
            query: Tensor::vector(vec![1.1, -0.6]),
        }
    }

    fn random_gru(rng: &mut ChaCha8Rng, dim: usize) -> GruParams {
        GruParams::from_tensors(std::array::from_fn(|i| {
            if i < 6 {
                xavier_uniform(rng, dim, dim, dim, dim)
            } else {
                Tensor::vector((0..dim).map(|_| rng.random_range(-0.5..0.5)).collect())
            }
        }))
    }

    fn sigmoid(x: f64) -> f64 {
        1.0 / (1.0 + (-x).exp())
    }

    fn mv(m: &Tensor, v: &[f64]) -> Vec<f64> {
        (0..m.rows())
            .map(|r| m.row(r).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Plain-loop GRU recurrence.
    fn hand_gru(history: &[Vec<f64>], p: &GruParams) -> Vec<f64> {
        let dim = history[0].len();
        let mut o = vec![0.0; dim];
        for d in history {
            let (xr, hr) = (mv(&p.w_ir, d), mv(&p.w_hr, &o));
            let (xz, hz) = (mv(&p.w_iz, d), mv(&p.w_hz, &o));
            let (xn, hn) = (mv(&p.w_in, d), mv(&p.w_hn, &o));
            o = (0..dim)
                .map(|i| {
                    let r = sigmoid(xr[i] + hr[i] + p.b_r.data()[i]);
                    let z = sigmoid(xz[i] + hz[i] + p.b_z.data()[i]);
                    let n = (xn[i] + p.b_in.data()[i] + r * (hn[i] + p.b_hn.data()[i])).tanh();
                    (1.0 - z) * n + z * o[i]
                })
                .collect();
        }
        o
    }

    #[test]
    fn single_history_item() {
        let rep = attention_user_forward(&[vec![0.4, -0.9]], &att_params()).unwrap();
        assert_eq!(rep.gamma, vec![1.0]);
        assert_eq!(rep.vector, vec![0.4, -0.9]);
    }

    #[test]
    fn identical_history_is_uniform() {
        let h = vec![vec![0.4, -0.9]; 4];
        let rep = attention_user_forward(&h, &att_params()).unwrap();
        for g in &rep.gamma {
            assert!((g - 0.25).abs() < 1e-15);
        }
        assert!((rep.vector[0] - 0.4).abs() < 1e-15 && (rep.vector[1] + 0.9).abs() < 1e-15);
    }

    #[test]
    fn attention_matches_hand_trace() {
        let h = vec![vec![0.4, -0.9], vec![1.2, 0.3], vec![-0.5, 0.6]];
        let p = att_params();
        let theta: Vec<f64> = h
            .iter()
            .map(|d| {
                (0..2)
                    .map(|c| {
                        let z = d[0] * p.projection.row(0)[c]
                            + d[1] * p.projection.row(1)[c]
                            + p.bias.data()[c];
                        p.query.data()[c] * z.tanh()
                    })
                    .sum()
            })
            .collect();
        let total: f64 = theta.iter().map(|t| t.exp()).sum();
        let gamma: Vec<f64> = theta.iter().map(|t| t.exp() / total).collect();
        let rep = attention_user_forward(&h, &p).unwrap();
        for i in 0..3 {
            assert!((rep.gamma[i] - gamma[i]).abs() < 1e-14);
        }
        for c in 0..2 {
            let u: f64 = (0..3).map(|i| gamma[i] * h[i][c]).sum();
            assert!((rep.vector[c] - u).abs() < 1e-14);
        }
    }

    #[test]
    fn empty_history_is_cold_user() {
        assert_eq!(
            attention_user_forward(&[], &att_params()),
            Err(UserEncoderError::ColdUser)
        );
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(
            gru_user_forward(&[], &random_gru(&mut rng, 2), None),
            Err(UserEncoderError::ColdUser)
        );
    }

    #[test]
    fn saturated_update_gate_keeps_initial_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut p = random_gru(&mut rng, 3);
        p.b_z = Tensor::vector(vec![50.0; 3]);
        let o0 = [0.3, -0.2, 0.7];
        let h = vec![
            vec![1.0, 0.5, -1.0],
            vec![-0.4, 0.2, 0.9],
            vec![0.1, 0.1, 0.1],
        ];
        let rep = gru_user_forward(&h, &p, Some(&o0)).unwrap();
        for (a, b) in rep.vector.iter().zip(o0) {
            assert!((a - b).abs() < 1e-6);
        }
        assert!(rep.gamma.is_empty());
    }

    #[test]
    fn open_reset_and_closed_update_gate() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut p = random_gru(&mut rng, 2);
        p.b_z = Tensor::vector(vec![-60.0; 2]);
        p.b_r = Tensor::vector(vec![60.0; 2]);
        let h = vec![vec![0.6, -0.3], vec![0.2, 0.8]];
        let mut o = vec![0.0; 2];
        for d in &h {
            let (x, hn) = (mv(&p.w_in, d), mv(&p.w_hn, &o));
            o = (0..2)
                .map(|i| (x[i] + p.b_in.data()[i] + hn[i] + p.b_hn.data()[i]).tanh())
                .collect();
        }
        let rep = gru_user_forward(&h, &p, None).unwrap();
        for (a, b) in rep.vector.iter().zip(&o) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn gru_matches_hand_iteration() {
        let p = GruParams {
            w_ir: Tensor::from_rows(&[vec![0.5, -0.3], vec![0.2, 0.8]]).unwrap(),
            w_iz: Tensor::from_rows(&[vec![-0.4, 0.1], vec![0.6, 0.3]]).unwrap(),
            w_in: Tensor::from_rows(&[vec![0.9, -0.7], vec![0.05, 0.4]]).unwrap(),
            w_hr: Tensor::from_rows(&[vec![0.3, 0.2], vec![-0.5, 0.1]]).unwrap(),
            w_hz: Tensor::from_rows(&[vec![0.7, -0.2], vec![0.0, 0.45]]).unwrap(),
            w_hn: Tensor::from_rows(&[vec![-0.6, 0.3], vec![0.25, 0.9]]).unwrap(),
            b_r: Tensor::vector(vec![0.1, -0.1]),
            b_z: Tensor::vector(vec![0.0, 0.2]),
            b_in: Tensor::vector(vec![-0.05, 0.15]),
            b_hn: Tensor::vector(vec![0.3, 0.0]),
        };
        let h = vec![vec![1.0, -0.5], vec![0.25, 0.75]];
        let rep = gru_user_forward(&h, &p, None).unwrap();
        let expect = hand_gru(&h, &p);
        for (a, b) in rep.vector.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn attention_is_order_invariant_and_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let dim = 4;
            let p = AdditivePoolParams {
                projection: xavier_uniform(&mut rng, dim, 3, dim, 3),
                bias: Tensor::vector((0..3).map(|_| rng.random_range(-0.5..0.5)).collect()),
                query: Tensor::vector((0..3).map(|_| rng.random_range(-1.0..1.0)).collect()),
            };
            let n = rng.random_range(1..8);
            let h: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect())
                .collect();
            let rep = attention_user_forward(&h, &p).unwrap();
            assert!((rep.gamma.iter().sum::<f64>() - 1.0).abs() < 1e-10);
            let max_norm = h
                .iter()
                .map(|d| d.iter().map(|x| x * x).sum::<f64>().sqrt())
                .fold(0.0, f64::max);
            let norm = rep.vector.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!(norm <= max_norm + 1e-12);
            let mut rev = h.clone();
            rev.reverse();
            let r2 = attention_user_forward(&rev, &p).unwrap();
            for (a, b) in r2.vector.iter().zip(&rep.vector) {
                assert!((a - b).abs() < 1e-10);
            }
            for i in 0..n {
                assert!((r2.gamma[i] - rep.gamma[n - 1 - i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gru_is_order_sensitive() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let p = random_gru(&mut rng, 4);
            let h: Vec<Vec<f64>> = (0..3)
                .map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect();
            let mut rev = h.clone();
            rev.reverse();
            let a = gru_user_forward(&h, &p, None).unwrap().vector;
            let b = gru_user_forward(&rev, &p, None).unwrap().vector;
            assert!(a.iter().zip(&b).any(|(x, y)| (x - y).abs() > 1e-8));
        }
    }
}

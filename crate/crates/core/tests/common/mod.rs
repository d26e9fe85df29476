#![allow(dead_code)]

//! Random small models and a brute-force trajectory-enumeration oracle.

use normact::model::{
    enumerate_policies, GenerativeModel, InitialStateVector, LikelihoodTensor, ModelParts,
    ModelShape, PreferenceTensor, TransitionSet,
};
use normact::tensor::{Matrix, Tensor};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn random_column<R: Rng>(rng: &mut R, n: usize, sparse: bool) -> Vec<f64> {
    loop {
        let mut w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        if sparse && n > 1 {
            let drop = rng.gen_range(0..n);
            w[drop] = 0.0;
        }
        let total: f64 = w.iter().sum();
        if total > 1e-3 {
            return w.into_iter().map(|x| x / total).collect();
        }
    }
}

/// A model with up to 3 states per factor, up to 3 outcomes per modality,
/// trial length up to 3 and horizon up to 2. Likelihoods depend on the
/// joint state, so factors are coupled through every modality.
pub fn random_model(rng: &mut ChaCha8Rng) -> GenerativeModel {
    let num_factors = rng.gen_range(1..=2);
    let states: Vec<usize> = (0..num_factors).map(|_| rng.gen_range(1..=3)).collect();
    let num_modalities = rng.gen_range(1..=2);
    let outcomes: Vec<usize> = (0..num_modalities).map(|_| rng.gen_range(2..=3)).collect();
    let trial_length = rng.gen_range(1..=3);
    let horizon = rng.gen_range(1..=2.min(trial_length));
    let joint: usize = states.iter().product();

    let likelihood = outcomes
        .iter()
        .map(|&n| {
            let sparse = rng.gen_bool(0.3);
            let columns: Vec<Vec<f64>> = (0..joint).map(|_| random_column(rng, n, sparse)).collect();
            let mut dims = vec![n];
            dims.extend(&states);
            let mut data = vec![0.0; n * joint];
            for (s, col) in columns.iter().enumerate() {
                for (o, p) in col.iter().enumerate() {
                    data[o * joint + s] = *p;
                }
            }
            Tensor::from_vec(dims, data).unwrap()
        })
        .collect();

    let num_actions = rng.gen_range(1..=3);
    let transitions = states
        .iter()
        .enumerate()
        .map(|(f, &n)| {
            let count = if f == 0 { num_actions } else { 1 };
            (0..count)
                .map(|_| {
                    let sparse = rng.gen_bool(0.3);
                    let mut m = Matrix::zeros(n, n);
                    for from in 0..n {
                        for (to, p) in random_column(rng, n, sparse).into_iter().enumerate() {
                            m.set(to, from, p);
                        }
                    }
                    m
                })
                .collect()
        })
        .collect();

    let context_factor = rng.gen_range(0..num_factors);
    let preferences = PreferenceTensor {
        context_factor,
        modalities: outcomes
            .iter()
            .map(|&n| {
                let data = (0..n * states[context_factor])
                    .map(|_| rng.gen_range(-3.0..3.0))
                    .collect();
                Tensor::from_vec(vec![n, states[context_factor]], data).unwrap()
            })
            .collect(),
    };

    let initial = InitialStateVector(states.iter().map(|&n| random_column(rng, n, false)).collect());

    GenerativeModel::new(ModelParts {
        shape: ModelShape {
            num_factors,
            states_per_factor: states,
            num_modalities,
            outcomes_per_modality: outcomes,
            trial_length,
            horizon,
        },
        likelihood: LikelihoodTensor(likelihood),
        transitions: TransitionSet(transitions),
        preferences,
        initial,
        policies: enumerate_policies(num_actions, horizon).unwrap(),
    })
    .expect("random model is valid by construction")
}

fn draw<R: Rng>(rng: &mut R, probs: &[f64]) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.iter().rposition(|p| *p > 0.0).unwrap()
}

/// A history drawn from the model itself: observations for steps
/// `0..=current` and the actions taken between them.
pub struct History {
    pub observations: Vec<Vec<usize>>,
    pub actions: Vec<usize>,
}

pub fn sample_history(model: &GenerativeModel, rng: &mut ChaCha8Rng) -> History {
    let parts = model.parts();
    let shape = &parts.shape;
    let current = rng.gen_range(0..shape.trial_length);
    let num_actions = parts.transitions.0[0].len();
    let mut state: Vec<usize> = parts.initial.0.iter().map(|d| draw(rng, d)).collect();
    let mut observations = Vec::new();
    let mut actions = Vec::new();
    for t in 0..=current {
        if t > 0 {
            let a = rng.gen_range(0..num_actions);
            actions.push(a);
            for (f, s) in state.iter_mut().enumerate() {
                let b = &parts.transitions.0[f][if f == 0 { a } else { 0 }];
                *s = draw(rng, &b.column(*s));
            }
        }
        let obs = parts
            .likelihood
            .0
            .iter()
            .map(|a| {
                let column: Vec<f64> = (0..a.dims()[0])
                    .map(|o| {
                        let mut index = vec![o];
                        index.extend(&state);
                        a.get(&index)
                    })
                    .collect();
                draw(rng, &column)
            })
            .collect();
        observations.push(obs);
    }
    History { observations, actions }
}

fn factor_tuples(states: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for &n in states {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (0..n).map(move |s| {
                    let mut next = prefix.clone();
                    next.push(s);
                    next
                })
            })
            .collect();
    }
    out
}

/// P(s_t | o_0..o_t, a_0..a_{t-1}) per factor, by summing the joint
/// probability of every state trajectory.
pub fn brute_force_marginals(model: &GenerativeModel, history: &History) -> Vec<Vec<f64>> {
    let parts = model.parts();
    let states = &parts.shape.states_per_factor;
    let tuples = factor_tuples(states);
    let steps = history.observations.len();

    let likelihood = |t: usize, s: &[usize]| -> f64 {
        history.observations[t]
            .iter()
            .zip(&parts.likelihood.0)
            .map(|(o, a)| {
                let mut index = vec![*o];
                index.extend(s);
                a.get(&index)
            })
            .product()
    };

    let mut marginals: Vec<Vec<f64>> = states.iter().map(|&n| vec![0.0; n]).collect();
    let mut path = vec![0usize; steps];
    loop {
        let mut p = 1.0;
        let first = &tuples[path[0]];
        for (f, s) in first.iter().enumerate() {
            p *= parts.initial.0[f][*s];
        }
        p *= likelihood(0, first);
        for t in 1..steps {
            let (prev, next) = (&tuples[path[t - 1]], &tuples[path[t]]);
            for f in 0..states.len() {
                let action = if f == 0 { history.actions[t - 1] } else { 0 };
                p *= parts.transitions.0[f][action].get(next[f], prev[f]);
            }
            p *= likelihood(t, next);
        }
        let last = &tuples[path[steps - 1]];
        for (f, s) in last.iter().enumerate() {
            marginals[f][*s] += p;
        }

        // odometer over trajectories
        let mut k = steps;
        loop {
            if k == 0 {
                let total: f64 = marginals[0].iter().sum();
                for m in &mut marginals {
                    m.iter_mut().for_each(|x| *x /= total);
                }
                return marginals;
            }
            k -= 1;
            path[k] += 1;
            if path[k] < tuples.len() {
                break;
            }
            path[k] = 0;
        }
    }
}

pub fn max_abs_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).abs()))
        .fold(0.0, f64::max)
}

#![allow(dead_code)]

use colmkt_core::rational::ratio;
use colmkt_core::{MarketModel, RandomVector, Rational};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Claim with component `i` constant on agent `i`'s blocks at time `t`.
pub fn random_measurable(
    rng: &mut ChaCha8Rng,
    model: &MarketModel,
    t: usize,
    span: i64,
) -> RandomVector {
    let k = model.atom_count();
    RandomVector::new(
        model
            .agents()
            .iter()
            .map(|a| {
                let part = a.filtration.at(t);
                let vals: Vec<Rational> = (0..part.len())
                    .map(|_| ratio(rng.gen_range(-span..=span), rng.gen_range(1..=3)))
                    .collect();
                (0..k).map(|x| vals[part.block_of(x)].clone()).collect()
            })
            .collect(),
    )
}

pub fn dot(a: &[Rational], b: &[Rational]) -> Rational {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

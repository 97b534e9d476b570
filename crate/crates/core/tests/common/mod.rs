use msglass::ModelSpec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random pure models with 2 to 4 species, `p(s) ∈ [1, 4]` and
/// `|p| ∈ [3, 8]`. Proportions are bounded away from zero.
pub fn random_models(seed: u64, count: usize) -> Vec<ModelSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let species = rng.random_range(2..=4);
        let p: Vec<u32> = (0..species).map(|_| rng.random_range(1..=4)).collect();
        let total: u32 = p.iter().sum();
        if !(3..=8).contains(&total) {
            continue;
        }
        let raw: Vec<f64> = (0..species).map(|_| rng.random_range(0.05..1.0)).collect();
        let sum: f64 = raw.iter().sum();
        let mut lambda: Vec<f64> = raw.iter().map(|x| x / sum).collect();
        // absorb rounding so the proportions sum to one
        let head: f64 = lambda[..species - 1].iter().sum();
        lambda[species - 1] = 1.0 - head;
        out.push(ModelSpec::from_parts(&lambda, &p).expect("valid random model"));
    }
    out
}

/// Random bipartite proportions `λ_s ∈ [0.05, 0.95]`.
#[allow(dead_code)]
pub fn random_bipartite(seed: u64, count: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| rng.random_range(0.05..0.95)).collect()
}

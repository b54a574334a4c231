use gate_diffkit::Mat;
use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::distribution::{ContinuousCDF, Normal};

use super::forward::decode_log_rates;
use super::params::DecoderParams;
use crate::graph::{devectorize, EdgeVector, Graph};
use crate::rng::derived_rng;
use crate::Result;

/// Rates at or above this use a rounded normal approximation.
pub const POISSON_NORMAL_CUTOFF: f64 = 700.0;

pub(crate) const CODE_STREAM: u64 = 21;
pub(crate) const COUNT_STREAM: u64 = 22;

/// Poisson draw by inversion of the CDF at `u ∈ [0, 1)`.
///
/// One uniform per draw, so equal `u` at nearby rates give coupled counts.
pub fn poisson_inverse(lambda: f64, u: f64) -> u64 {
    if lambda <= 0.0 {
        return 0;
    }
    if lambda >= POISSON_NORMAL_CUTOFF {
        let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
        let x = std_normal.inverse_cdf(u.clamp(1e-300, 1.0 - 1e-16));
        return (lambda + lambda.sqrt() * x).round().max(0.0) as u64;
    }
    let mut k = 0u64;
    let mut p = (-lambda).exp();
    let mut cdf = p;
    while u > cdf {
        k += 1;
        p *= lambda / k as f64;
        if p == 0.0 && k as f64 > lambda {
            break;
        }
        cdf += p;
    }
    k
}

/// Graphs for the codes in the columns of `z`; draw `i` takes its uniforms
/// from the stream `(seed, index_offset + i)`.
pub fn sample_from_codes(
    dec: &DecoderParams,
    z: &Mat,
    seed: u64,
    index_offset: u64,
) -> Result<Vec<Graph>> {
    let log_rates = decode_log_rates(dec, z)?;
    let v = node_count_for(dec.edge_dim());
    (0..z.ncols())
        .map(|j| {
            let mut rng = derived_rng(seed, COUNT_STREAM, index_offset + j as u64);
            let values = log_rates
                .column(j)
                .iter()
                .map(|l| poisson_inverse(l.exp(), rng.gen::<f64>()))
                .collect();
            devectorize(&EdgeVector::new(v, values)?)
        })
        .collect()
}

pub(crate) fn node_count_for(edges: usize) -> usize {
    // V(V-1)/2 = edges
    let v = ((1.0 + (1.0 + 8.0 * edges as f64).sqrt()) / 2.0).round() as usize;
    debug_assert_eq!(v * (v - 1) / 2, edges);
    v
}

/// Standard-normal `K×count` matrix whose column `i` comes from the stream
/// `(seed, index_offset + i)`.
pub(crate) fn standard_codes(k: usize, count: usize, seed: u64, index_offset: u64) -> Mat {
    let mut z = Array2::zeros((k, count));
    for j in 0..count {
        let mut rng = derived_rng(seed, CODE_STREAM, index_offset + j as u64);
        for i in 0..k {
            z[[i, j]] = StandardNormal.sample(&mut rng);
        }
    }
    z
}

const SAMPLE_CHUNK: usize = 250;

/// `count` graphs from the prior predictive `z ~ N(0, I)`, `A ~ Poisson(λ(z))`.
pub fn sample_prior_graphs(dec: &DecoderParams, count: usize, seed: u64) -> Result<Vec<Graph>> {
    let mut out = Vec::with_capacity(count);
    let mut start = 0;
    while start < count {
        let len = SAMPLE_CHUNK.min(count - start);
        let z = standard_codes(dec.latent_dim(), len, seed, start as u64);
        out.extend(sample_from_codes(dec, &z, seed, start as u64)?);
        start += len;
    }
    Ok(out)
}

pub fn sample_prior_graph(dec: &DecoderParams, seed: u64) -> Result<Graph> {
    Ok(sample_prior_graphs(dec, 1, seed)?.remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::{Discrete, Poisson};

    #[test]
    fn inversion_matches_pmf_cdf() {
        for &lambda in &[0.3, 2.0, 17.5, 250.0] {
            let pois = Poisson::new(lambda).unwrap();
            for &u in &[0.0, 0.01, 0.3, 0.5, 0.77, 0.999] {
                let k = poisson_inverse(lambda, u);
                let below: f64 = (0..k).map(|j| pois.pmf(j)).sum();
                assert!(below <= u + 1e-12, "λ={lambda} u={u} k={k}");
                assert!(below + pois.pmf(k) >= u - 1e-12);
            }
        }
        assert_eq!(poisson_inverse(0.0, 0.9), 0);
    }

    #[test]
    fn large_rates_use_normal_approximation() {
        assert_eq!(poisson_inverse(1e6, 0.5), 1_000_000);
        let hi = poisson_inverse(1e4, 0.975) as f64;
        assert!((hi - (1e4 + 100.0 * 1.959964)).abs() <= 1.0);
    }

    #[test]
    fn extreme_uniform_terminates() {
        let k = poisson_inverse(650.0, 1.0 - 1e-17);
        assert!(k > 650);
    }

    #[test]
    fn node_count_inverts_edge_count() {
        for v in 2..80 {
            assert_eq!(node_count_for(v * (v - 1) / 2), v);
        }
    }
}

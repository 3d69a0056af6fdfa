//! Worst-case bounds on the canonical-embedding norm of error terms.
//!
//! A polynomial with independent coefficients of variance `V` has
//! `|e(ζ)| <= 6 sqrt(N V)` except with probability about `e^{-36}`; a
//! product of two such independent polynomials is bounded by
//! `36 N sqrt(V_a V_b)`.

/// Tail factor for a single random polynomial.
pub const TAIL: f64 = 6.0;
/// Tail factor for the product of two independent random polynomials.
pub const TAIL_PRODUCT: f64 = TAIL * TAIL;

const TERNARY_VARIANCE: f64 = 2.0 / 3.0;
const ROUNDING_VARIANCE: f64 = 1.0 / 12.0;

pub fn single(n: usize, variance: f64) -> f64 {
    TAIL * (n as f64 * variance).sqrt()
}

pub fn product(n: usize, var_a: f64, var_b: f64) -> f64 {
    TAIL_PRODUCT * n as f64 * (var_a * var_b).sqrt()
}

/// Rounding a coefficient to the nearest integer in each ring component
/// of `(c0, c1)`, observed through `c0 + c1 s`.
pub fn rounding(n: usize) -> f64 {
    single(n, ROUNDING_VARIANCE) + product(n, ROUNDING_VARIANCE, TERNARY_VARIANCE)
}

/// `v e_pk + e_0 + e_1 s` plus the rounding of the encoder, whose
/// coefficients are off by at most `1/2` each.
pub fn fresh(n: usize, sigma: f64) -> f64 {
    let var = sigma * sigma;
    2.0 * product(n, TERNARY_VARIANCE, var) + single(n, var) + n as f64 / 2.0
}

/// `e` plus the encoder rounding, for secret-key encryption.
pub fn fresh_symmetric(n: usize, sigma: f64) -> f64 {
    single(n, sigma * sigma) + n as f64 / 2.0
}

/// Relinearization error `sum_i d_i e_i / P` plus the final division by
/// `P`, with digits `d_i` uniform modulo `q_i`.
pub fn key_switch(n: usize, sigma: f64, digit_moduli: &[u64], special: u64) -> f64 {
    let var = sigma * sigma;
    let digits: f64 = digit_moduli
        .iter()
        .map(|&q| product(n, (q as f64).powi(2) / 12.0, var))
        .sum();
    digits / special as f64 + rounding(n)
}

/// Error of `ct1 * ct2` before rescaling, with `p` the message bounds
/// and `s` the scales. Message bounds below one are raised to one so
/// that relative error never shrinks through a product.
pub fn product_before_rescale(
    p1: f64,
    s1: f64,
    b1: f64,
    p2: f64,
    s2: f64,
    b2: f64,
    key_switch: f64,
) -> f64 {
    p1.max(1.0) * s1 * b2 + p2.max(1.0) * s2 * b1 + b1 * b2 + key_switch
}

pub fn rescaled(b: f64, q: u64, n: usize) -> f64 {
    b / q as f64 + rounding(n)
}

//! Fixed-order Gauss-Legendre rule, exact for polynomials up to degree 15.

const NODES: [f64; 8] = [
    -0.960_289_856_497_536_3,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const WEIGHTS: [f64; 8] = [
    0.101_228_536_290_376_26,
    0.222_381_034_453_374_47,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362,
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_47,
    0.101_228_536_290_376_26,
];

/// `∫_a^b f`.
pub(crate) fn gauss(a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    NODES
        .iter()
        .zip(&WEIGHTS)
        .map(|(x, w)| w * f(mid + half * x))
        .sum::<f64>()
        * half
}

#[cfg(test)]
mod tests {
    #[test]
    fn exact_on_degree_fifteen() {
        let v = super::gauss(-0.3, 1.7, |x| x.powi(15) - 2.0 * x.powi(4));
        let exact = (1.7f64.powi(16) - 0.3f64.powi(16)) / 16.0 - 2.0 * (1.7f64.powi(5) + 0.3f64.powi(5)) / 5.0;
        assert!((v - exact).abs() < 1e-11 * exact.abs());
    }
}

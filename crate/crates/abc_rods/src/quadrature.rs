//! Gauss-Legendre rules on [-1, 1].

/// Nodes and weights for an n-point Gauss-Legendre rule, n in 1..=10.
/// Exact for polynomials of degree 2n - 1.
pub fn gauss_legendre(n: usize) -> &'static [(f64, f64)] {
    match n {
        1 => &GL1,
        2 => &GL2,
        3 => &GL3,
        4 => &GL4,
        5 => &GL5,
        6 => &GL6,
        7 => &GL7,
        8 => &GL8,
        9 => &GL9,
        10 => &GL10,
        _ => panic!("Gauss-Legendre rule with {n} points not tabulated"),
    }
}

static GL1: [(f64, f64); 1] = [(0.0, 2.0)];

static GL2: [(f64, f64); 2] = [
    (-0.5773502691896257, 1.0),
    (0.5773502691896257, 1.0),
];

static GL3: [(f64, f64); 3] = [
    (-0.7745966692414834, 0.5555555555555556),
    (0.0, 0.8888888888888888),
    (0.7745966692414834, 0.5555555555555556),
];

static GL4: [(f64, f64); 4] = [
    (-0.8611363115940526, 0.3478548451374538),
    (-0.3399810435848563, 0.6521451548625461),
    (0.3399810435848563, 0.6521451548625461),
    (0.8611363115940526, 0.3478548451374538),
];

static GL5: [(f64, f64); 5] = [
    (-0.9061798459386640, 0.2369268850561891),
    (-0.5384693101056831, 0.4786286704993665),
    (0.0, 0.5688888888888889),
    (0.5384693101056831, 0.4786286704993665),
    (0.9061798459386640, 0.2369268850561891),
];

static GL6: [(f64, f64); 6] = [
    (-0.9324695142031521, 0.1713244923791704),
    (-0.6612093864662645, 0.3607615730481386),
    (-0.2386191860831969, 0.4679139345726910),
    (0.2386191860831969, 0.4679139345726910),
    (0.6612093864662645, 0.3607615730481386),
    (0.9324695142031521, 0.1713244923791704),
];

static GL7: [(f64, f64); 7] = [
    (-0.9491079123427585, 0.1294849661688697),
    (-0.7415311855993945, 0.2797053914892766),
    (-0.4058451513773972, 0.3818300505051189),
    (0.0, 0.4179591836734694),
    (0.4058451513773972, 0.3818300505051189),
    (0.7415311855993945, 0.2797053914892766),
    (0.9491079123427585, 0.1294849661688697),
];

static GL8: [(f64, f64); 8] = [
    (-0.9602898564975363, 0.1012285362903763),
    (-0.7966664774136267, 0.2223810344533745),
    (-0.5255324099163290, 0.3137066458778873),
    (-0.1834346424956498, 0.3626837833783620),
    (0.1834346424956498, 0.3626837833783620),
    (0.5255324099163290, 0.3137066458778873),
    (0.7966664774136267, 0.2223810344533745),
    (0.9602898564975363, 0.1012285362903763),
];

static GL9: [(f64, f64); 9] = [
    (-0.9681602395076261, 0.0812743883615744),
    (-0.8360311073266358, 0.1806481606948574),
    (-0.6133714327005904, 0.2606106964029354),
    (-0.3242534234038089, 0.3123470770400029),
    (0.0, 0.3302393550012598),
    (0.3242534234038089, 0.3123470770400029),
    (0.6133714327005904, 0.2606106964029354),
    (0.8360311073266358, 0.1806481606948574),
    (0.9681602395076261, 0.0812743883615744),
];

static GL10: [(f64, f64); 10] = [
    (-0.9739065285171717, 0.0666713443086881),
    (-0.8650633666889845, 0.1494513491505806),
    (-0.6794095682990244, 0.2190863625159820),
    (-0.4333953941292472, 0.2692667193099963),
    (-0.1488743389816312, 0.2955242247147529),
    (0.1488743389816312, 0.2955242247147529),
    (0.4333953941292472, 0.2692667193099963),
    (0.6794095682990244, 0.2190863625159820),
    (0.8650633666889845, 0.1494513491505806),
    (0.9739065285171717, 0.0666713443086881),
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_two() {
        for n in 1..=10 {
            let sum: f64 = gauss_legendre(n).iter().map(|&(_, w)| w).sum();
            assert!((sum - 2.0).abs() < 1e-14, "n = {n}: sum = {sum}");
        }
    }

    #[test]
    fn integrates_monomials_exactly() {
        // n points are exact up to degree 2n - 1; odd powers vanish by symmetry.
        for n in 1..=10 {
            for p in 0..2 * n {
                let num: f64 = gauss_legendre(n)
                    .iter()
                    .map(|&(x, w)| w * x.powi(p as i32))
                    .sum();
                let exact = if p % 2 == 0 {
                    2.0 / (p as f64 + 1.0)
                } else {
                    0.0
                };
                assert!(
                    (num - exact).abs() < 1e-13,
                    "n = {n}, p = {p}: {num} vs {exact}"
                );
            }
        }
    }
}

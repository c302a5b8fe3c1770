use moment_tubes::cover::TubeCover;
use moment_tubes::curve::CurveSpec;
use moment_tubes::fourier::*;
use moment_tubes::mc::stratum_rng;
use rand::Rng;

fn coarse_cover(k: usize) -> TubeCover {
    TubeCover::new(&CurveSpec::moment(k).unwrap(), 0.25, 16).unwrap()
}

fn random_points(n: usize, radius: f64, k: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = stratum_rng(seed, 0);
    (0..n).map(|_| (0..k).map(|_| rng.gen_range(-radius..radius)).collect()).collect()
}

#[test]
fn atom_sum_matches_direct_frequency_quadrature() {
    let cover = coarse_cover(2);
    let chart = CurveChart::build(&cover, ChartResolution::new(64.0)).unwrap();
    let direct = ChartQuadrature::build(&cover, &chart).unwrap();
    let xs = random_points(20, 8.0, 2, 11);
    let atoms = inverse_ft_total_batch(&cover, &xs, AtomResolution::low()).unwrap();
    for (x, a) in xs.iter().zip(&atoms) {
        let b = direct.inverse_ft(x).unwrap();
        assert!((a - b).norm() <= 1e-3 * b.norm(), "{x:?}: {a} vs {b}");
    }
    let zero = inverse_ft_total(&cover, &[0.0, 0.0], AtomResolution::low()).unwrap();
    assert!((zero.re - direct.integral()).abs() <= 1e-5 * direct.integral());
}

#[test]
fn chart_evaluator_matches_direct_quadrature() {
    let cover = coarse_cover(2);
    let chart = CurveChart::build(&cover, ChartResolution::new(64.0)).unwrap();
    let direct = ChartQuadrature::build(&cover, &chart).unwrap();
    for x in random_points(20, 8.0, 2, 12) {
        let a = chart.inverse_ft(&x).unwrap();
        let b = direct.inverse_ft(&x).unwrap();
        assert!((a - b).norm() <= 1e-3 * b.norm(), "{x:?}: {a} vs {b}");
    }
}

#[test]
fn conjugate_symmetry() {
    let cover = coarse_cover(3);
    let xs = random_points(500, 30.0, 3, 13);
    let neg: Vec<Vec<f64>> = xs.iter().map(|x| x.iter().map(|v| -v).collect()).collect();
    let all: Vec<Vec<f64>> = xs.iter().chain(&neg).cloned().collect();
    let v = inverse_ft_total_batch(&cover, &all, AtomResolution::low()).unwrap();
    let scale = v[0].norm().max(1e-300);
    for i in 0..xs.len() {
        assert!((v[i] - v[i + xs.len()].conj()).norm() <= 1e-12 * scale.max(v[i].norm()) + 1e-18);
    }
}

#[test]
fn atom_mass_matches_chart_integral() {
    let cover = coarse_cover(2);
    for iota in [0, 7, cover.len() / 2, cover.len() - 1] {
        let atom = TubeAtom::build(&cover, iota, AtomResolution::new(4096.0, 4096.0)).unwrap();
        let a = atom.jacobian() * atom.integral();
        let b = tube_integral_in_chart(&cover, iota, 64).unwrap();
        assert!((a - b).abs() <= 1e-6 * b, "tube {iota}: {a} vs {b}");
    }
}

#[test]
fn single_tube_and_triangle_bounds() {
    let cover = coarse_cover(2);
    let atoms: Vec<TubeAtom> = (0..cover.len())
        .map(|i| TubeAtom::build(&cover, i, AtomResolution::low()).unwrap())
        .collect();
    for x in random_points(10, 20.0, 2, 14) {
        let mut sum_abs = 0.0;
        for atom in &atoms {
            let v = atom.inverse_ft(&x).unwrap().norm();
            assert!(v <= atom.jacobian() * atom.integral() * (1.0 + 1e-12));
            sum_abs += v;
        }
        let total = inverse_ft_total(&cover, &x, AtomResolution::low()).unwrap().norm();
        assert!(total <= sum_abs * (1.0 + 1e-12));
    }
}

#[test]
fn l2_norm_halves_with_epsilon_for_planar_curve() {
    let spec = CurveSpec::moment(2).unwrap();
    let norm = |m: i32| {
        let cover = TubeCover::new(&spec, 2f64.powi(-m), 256).unwrap();
        l2_norm_eta(&cover, &TubeSumOptions::default()).unwrap()
    };
    let (a, b) = (norm(4), norm(5));
    assert!(a.admissible() && b.admissible());
    let slope = (a.value / b.value).log2();
    assert!((slope - 1.0).abs() <= 0.05, "slope {slope}");
}

#[test]
fn plancherel_against_direct_quadrature() {
    let spec = CurveSpec::moment(2).unwrap();
    let cover = TubeCover::new(&spec, 1.0 / 16.0, 256).unwrap();
    let tubes = l2_norm_eta(&cover, &TubeSumOptions::default()).unwrap();
    let chart = CurveChart::build(&cover, ChartResolution::new(64.0)).unwrap();
    let direct = ChartQuadrature::build(&cover, &chart).unwrap().l2_squared().sqrt();
    assert!((tubes.value - direct).abs() <= 1e-6 * direct, "{} vs {direct}", tubes.value);
}

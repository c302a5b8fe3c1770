use moment_tubes::bump::{smooth_step, BumpProfile, INNER_HALFWIDTH, OUTER_HALFWIDTH};
use moment_tubes::cover::TubeCover;
use moment_tubes::curve::{gamma, CurveSpec};

#[test]
fn partition_of_unity_on_thin_tube() {
    for (k, m) in [(2usize, 4i32), (2, 7), (3, 5)] {
        let spec = CurveSpec::moment(k).unwrap();
        let cover = TubeCover::new(&spec, 2f64.powi(-m), 256).unwrap();
        let r = cover.check_partition(2000, 5);
        assert!(r.calibrated(), "k={k} m={m}: {r:?}");
        assert!(r.partition_defect <= 1e-8, "k={k} m={m}: {:e}", r.partition_defect);
        assert!(r.fringe_eta_min >= -1e-12 && r.fringe_eta_max <= 1.0 + 1e-12);
    }
}

#[test]
fn total_cutoff_is_one_on_the_curve() {
    let spec = CurveSpec::moment(3).unwrap();
    let cover = TubeCover::new(&spec, 1.0 / 16.0, 256).unwrap();
    for i in 0..=200 {
        let x = gamma(&spec, i as f64 / 200.0).unwrap();
        assert!((cover.eta_total(&x).unwrap() - 1.0).abs() <= 1e-8);
    }
}

#[test]
fn cutoffs_vanish_far_from_the_curve() {
    let spec = CurveSpec::moment(2).unwrap();
    let cover = TubeCover::new(&spec, 1.0 / 16.0, 256).unwrap();
    assert_eq!(cover.eta_total(&[0.5, 0.9]).unwrap(), 0.0);
    assert_eq!(cover.eta_total(&[2.0, 0.0]).unwrap(), 0.0);
}

#[test]
fn bump_profile_plateau_and_support() {
    let b = BumpProfile::new(INNER_HALFWIDTH).unwrap();
    assert_eq!(b.psi(0.0), 1.0);
    assert_eq!(b.psi(0.999 * INNER_HALFWIDTH), 1.0);
    assert_eq!(b.psi(OUTER_HALFWIDTH), 0.0);
    assert_eq!(b.psi(-1.5 * OUTER_HALFWIDTH), 0.0);
    let mid = b.psi(0.5 * (INNER_HALFWIDTH + OUTER_HALFWIDTH));
    assert!(mid > 0.0 && mid < 1.0);
    // The step is symmetric: s(u) + s(1 − u) = 1.
    for i in 1..10 {
        let u = i as f64 / 10.0;
        assert!((smooth_step(u) + smooth_step(1.0 - u) - 1.0).abs() < 1e-15);
    }
}

use dotbench_core::complexity::{
    build_reference, rate_experiment, sample_complexity_run, RateSpec, ReferenceMethod,
};
use dotbench_core::measure::Curve;
use dotbench_core::{DivergenceKind, SamplerSpec};

fn spec(sampler: SamplerSpec) -> RateSpec<f64> {
    let mut s = RateSpec::new(
        vec![sampler; 2],
        DivergenceKind::Alpha(2.0),
        0.5,
        vec![16, 32, 64, 128],
        20,
    );
    s.reference.resolutions = vec![64, 128, 256];
    s.reference.method = ReferenceMethod::Richardson;
    s.bootstrap = 200;
    s.seed = 9;
    s
}

#[test]
fn straight_segment_matches_native_line() {
    let seg = Curve::Segment {
        start: [0.0, 0.0, 0.0],
        end: [1.0, 0.0, 0.0],
    };
    let a = rate_experiment(&spec(SamplerSpec::Curve(seg))).unwrap();
    let b = rate_experiment(&spec(SamplerSpec::UniformCube { dim: 1 })).unwrap();
    for (x, y) in a.mean_abs_errors.iter().zip(&b.mean_abs_errors) {
        assert!((x - y).abs() <= 1e-9 * (1.0 + y), "{x} vs {y}");
    }
    assert!(a.slope >= b.slope_ci.0 && a.slope <= b.slope_ci.1);
}

#[test]
fn reports_are_reproducible_and_serialize() {
    let mut s = spec(SamplerSpec::UniformCube { dim: 2 });
    s.reference.resolutions = vec![8, 16, 24];
    let r = build_reference(&s).unwrap();
    assert!(r.bias_estimate.is_finite());
    let a = sample_complexity_run(&s, &r).unwrap();
    let b = sample_complexity_run(&s, &r).unwrap();
    assert_eq!(
        serde_json::to_string(&a).unwrap(),
        serde_json::to_string(&b).unwrap()
    );
    assert!(a.mean_abs_errors.iter().all(|&e| e >= 0.0) && a.slope.is_finite());
    assert_eq!(a.to_csv().lines().count(), 5);
}

#[test]
fn invalid_specs_are_rejected() {
    let mut s = spec(SamplerSpec::UniformCube { dim: 1 });
    s.n_values = vec![64, 32];
    assert!(build_reference(&s).is_err());
    let mut s = spec(SamplerSpec::UniformCube { dim: 1 });
    s.samplers.truncate(1);
    assert!(build_reference(&s).is_err());
}

#[test]
fn config_roundtrip() {
    let json = r#"{
        "samplers": [{"uniform_cube": {"dim": 3}}, {"uniform_cube": {"dim": 3}}],
        "divergence": {"alpha": 2.0},
        "epsilon": 1.0,
        "n_values": [32, 64],
        "replications": 20
    }"#;
    let s: RateSpec<f64> = serde_json::from_str(json).unwrap();
    assert_eq!(s.p, 2.0);
    assert_eq!(s.reference.method, ReferenceMethod::Finest);
    assert!(
        serde_json::from_str::<RateSpec<f64>>(&json.replace("\"epsilon\"", "\"eps\"")).is_err()
    );
}

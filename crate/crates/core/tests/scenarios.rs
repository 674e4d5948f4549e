use std::path::PathBuf;

use clearsens_core::*;
use nalgebra::DVector;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

#[test]
fn smib_fixture_matches_builder() {
    let file = load_scenario(fixture("smib.toml")).unwrap();
    let built = smib_model(&SmibParams::default()).unwrap();
    assert_eq!(file.p0, built.p0);
    assert_eq!(file.param_names, built.param_names);
    assert_eq!(file.h_post, built.h_post);
    let x = DVector::from_vec(vec![0.3, -0.7]);
    for (a, b) in [(&file.pre, &built.pre), (&file.fault, &built.fault), (&file.post, &built.post)] {
        assert_eq!(a.f(&x, &file.p0), b.f(&x, &built.p0));
    }
}

#[test]
fn threemachine_fixture_shape() {
    let sc = load_scenario(fixture("threemachine.toml")).unwrap();
    assert_eq!(sc.dim(), 4);
    assert_eq!(sc.param_names, ["Pm1", "Pm2", "Pm3", "dlim"]);
    assert_eq!(sc.post.state_names(), ["d1", "d2", "w1", "w2"]);
    let sep = sc.pre_sep(&sc.p0).unwrap();
    assert_eq!(sep.kind, EquilibriumKind::Sep);
    assert!(sc.h_post.is_feasible(&sep.x, &sc.p0));
    // fault at the bus-1 end of line 1-2 cuts machine 1 off electrically
    let f = sc.fault.f(&sep.x, &sc.p0);
    assert!(f[2] > 0.0);
}

#[test]
fn base_smib_is_category_one() {
    let sc = load_scenario(fixture("smib.toml")).unwrap();
    let r = find_cct(&sc, &sc.p0, &CctOptions::default()).unwrap();
    assert_eq!(r.category, Category::FaultOnBoundary);
    assert!((r.t_cr - 6f64.ln() / 2.0).abs() < 1e-6);
}

#[test]
fn tight_angle_limit_is_loss_of_synchronism() {
    let mut sc = load_scenario(fixture("smib.toml")).unwrap();
    for (n, v) in [("Pm", 0.86), ("wmax", 2.0), ("dmax", 2.26)] {
        sc.set_param(n, v).unwrap();
    }
    let r = find_cct(&sc, &sc.p0, &CctOptions::default()).unwrap();
    assert_eq!(r.category, Category::LossOfSynchronism);
    let cuep = r.cuep.unwrap();
    assert!((cuep.x[0] - (std::f64::consts::PI - 0.86f64.asin())).abs() < 1e-8);
}

#[test]
fn missing_fixture_is_not_found() {
    let r = load_scenario(fixture("nope.toml"));
    assert!(matches!(r, Err(Error::ScenarioNotFound(_))));
}

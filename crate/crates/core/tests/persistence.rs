use std::fs;

use mvsk::harness::{run_experiment, EpsilonGrid, ExperimentConfig, Variant};
use mvsk::imaging::{default_stix_geometry, two_gaussian_scenario, VisibilitySet};
use mvsk::io::{
    read_json, read_nodes_csv, read_visibilities_csv, write_experiment, write_json, write_nodes_csv, write_visibilities_csv,
};
use mvsk::scalings::PiecewiseConstant;
use mvsk::{fit, AugmentedMap, Interpolant, NodeMap, NodeSet, Partition, Profile, RadialKernel, ScalingFunction};
use proptest::prelude::*;

fn coords() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1e3f64..1e3, 2..40).prop_map(|mut v| {
        if v.len() % 2 == 1 {
            v.pop();
        }
        v
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn node_sets_round_trip_exactly(c in coords()) {
        let dir = tempfile::tempdir().unwrap();
        let nodes = NodeSet::new(2, c).unwrap();
        let path = dir.path().join("n.csv");
        write_nodes_csv(&path, &nodes, None).unwrap();
        prop_assert_eq!(read_nodes_csv(&path).unwrap(), nodes);
    }
}

#[test]
fn visibilities_round_trip_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let vis = two_gaussian_scenario(4).visibilities(&default_stix_geometry(), Some(vec![0.013; 60])).unwrap();
    let path = dir.path().join("v.csv");
    write_visibilities_csv(&path, &vis).unwrap();
    let back: VisibilitySet = read_visibilities_csv(&path).unwrap();
    assert_eq!(back.values(), vis.values());
    assert_eq!(back.noise_sigma(), vis.noise_sigma());
    assert_eq!(back.geometry().points(), vis.geometry().points());
}

#[test]
fn interpolants_round_trip_with_maps() {
    let dir = tempfile::tempdir().unwrap();
    let partition = Partition::along_axis(0, vec![0.0]).unwrap();
    let psi = ScalingFunction::PiecewiseConstant(PiecewiseConstant::new(partition, vec![0.0, 1.0]).unwrap());
    let map = AugmentedMap::new(NodeMap::erf_isotropic(2, 0.0, 0.1).unwrap(), psi).unwrap();
    let nodes = NodeSet::new(2, vec![-0.5, 0.1, 0.3, -0.2, 0.7, 0.6, -0.1, -0.8, 0.2, 0.9]).unwrap();
    let values = [1.0, -1.0, 0.5, 2.0, 0.0];
    let interp = fit(&RadialKernel::new(Profile::MaternC6, 2.5).unwrap(), &map, &nodes, &values).unwrap();
    let path = dir.path().join("i.json");
    write_json(&path, &interp).unwrap();
    let back: Interpolant = read_json(&path).unwrap();
    assert_eq!(back.coefficients, interp.coefficients);
    let q = [[0.11, -0.4], [-0.9, 0.95]];
    assert_eq!(back.evaluate(&q).unwrap(), interp.evaluate(&q).unwrap());
}

#[test]
fn experiment_tables_are_deterministic() {
    let config = ExperimentConfig {
        n_values: vec![15],
        eval_grid: 12,
        kernels: vec![Profile::WendlandC0],
        variants: vec![Variant::Vsdk],
        loocv: EpsilonGrid { lower: 0.5, upper: 4.0, count: 5 },
        fill_resolution: 20,
        ..Default::default()
    };
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    write_experiment(&a, &run_experiment(&config).unwrap()).unwrap();
    write_experiment(&b, &run_experiment(&config).unwrap()).unwrap();
    for f in ["rmse.csv", "distances.csv", "loocv_curves/wendland0_vsdk_N15.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let curve = fs::read_to_string(a.join("loocv_curves/wendland0_vsdk_N15.csv")).unwrap();
    assert_eq!(curve.lines().count(), 6);
}

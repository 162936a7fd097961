use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn mvsk(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mvsk")).args(args).current_dir(dir).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn write_nodes(dir: &Path) {
    fs::write(dir.join("n.csv"), "x1,x2,value\n0,0,1\n1,0,2\n0,1,3\n1,1,0\n0.5,0.5,1.5\n").unwrap();
    fs::write(dir.join("q.csv"), "0.2,0.3\n0.9,0.1\n0,0\n").unwrap();
    fs::write(dir.join("p.csv"), "x1,x2\n0,0\n1,0\n0,1\n1,1\n0.5,0.5\n").unwrap();
}

#[test]
fn help_and_version_exit_zero() {
    let dir = tempfile::tempdir().unwrap();
    for args in [&["--help"][..], &["--version"], &["interp", "--help"], &["metrics", "--help"], &["bench-discontinuous", "--help"], &["image-reconstruct", "--help"]] {
        let out = mvsk(args, dir.path());
        assert_eq!(code(&out), 0, "{args:?}");
        assert!(!out.stdout.is_empty());
    }
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    write_nodes(dir.path());
    for args in [
        &[][..],
        &["frobnicate"],
        &["interp", "--out", "o"],
        &["interp", "--nodes", "n.csv", "--out", "o", "--kernel", "cubic"],
        &["interp", "--nodes", "n.csv", "--out", "o", "--epsilon", "-1"],
        &["image-reconstruct", "--source", "x.json", "--variant", "fancy", "--out", "o"],
    ] {
        let out = mvsk(args, dir.path());
        assert_eq!(code(&out), 1, "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let out = mvsk(&["interp", "--nodes", "n.csv", "--out", "o", "--epsilon", "-1"], dir.path());
    assert!(String::from_utf8_lossy(&out.stderr).contains("`epsilon`"));
}

#[test]
fn runtime_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    write_nodes(dir.path());
    fs::write(dir.path().join("dup.csv"), "0,0,1\n0,0,2\n").unwrap();
    let out = mvsk(&["interp", "--nodes", "dup.csv", "--epsilon", "1", "--out", "o"], dir.path());
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
    let out = mvsk(&["metrics", "--nodes", "n.csv", "--lower", "0,0", "--upper", "1,1"], dir.path());
    assert_eq!(code(&out), 2, "value column makes the nodes three-dimensional");
}

#[test]
fn interp_writes_interpolant_and_predictions() {
    let dir = tempfile::tempdir().unwrap();
    write_nodes(dir.path());
    let out = mvsk(&["interp", "--nodes", "n.csv", "--queries", "q.csv", "--kernel", "gaussian", "--epsilon", "1.5", "--out", "o"], dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let interp: mvsk::Interpolant = mvsk::io::read_json(&dir.path().join("o/interpolant.json")).unwrap();
    assert_eq!(interp.kernel.epsilon(), 1.5);
    let pred = mvsk::io::read_samples_csv(&dir.path().join("o/predictions.csv")).unwrap();
    assert_eq!(pred.nodes.len(), 3);
    // the third query is a node
    assert!((pred.values[2] - 1.0).abs() < 1e-12);
    assert_eq!(pred.values, interp.evaluate(&[[0.2, 0.3], [0.9, 0.1], [0.0, 0.0]]).unwrap());
}

#[test]
fn interp_loocv_writes_the_score_curve() {
    let dir = tempfile::tempdir().unwrap();
    write_nodes(dir.path());
    fs::write(dir.path().join("run.toml"), "nodes = \"n.csv\"\nkernel = \"matern6\"\n[loocv]\nlower = 0.5\nupper = 5.0\ncount = 10\n").unwrap();
    let out = mvsk(&["interp", "--config", "run.toml", "--loocv", "--out", "o"], dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let curve = fs::read_to_string(dir.path().join("o/loocv_curve.csv")).unwrap();
    assert_eq!(curve.lines().count(), 11);
    assert!(curve.starts_with("epsilon,loo_rmse\n"));
}

#[test]
fn metrics_reports_distances() {
    let dir = tempfile::tempdir().unwrap();
    write_nodes(dir.path());
    let out = mvsk(&["metrics", "--nodes", "p.csv", "--lower", "0,0", "--upper", "1,1", "--resolution", "11"], dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["schema_version"], 1);
    // corners plus center: the farthest grid points are edge midpoints
    assert!((v["h"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    assert!((v["q"].as_f64().unwrap() - 0.5f64.sqrt() / 2.0).abs() < 1e-12);
    assert_eq!(v["per_region"].as_array().unwrap().len(), 1);

    fs::write(
        dir.path().join("m.toml"),
        "nodes = \"p.csv\"\nlower = [0.0, 0.0]\nupper = [1.0, 1.0]\nresolution = 11\n[partition]\nkind = \"axis\"\ncuts = [{ axis = 0, thresholds = [0.5] }]\n",
    )
    .unwrap();
    let out = mvsk(&["metrics", "--config", "m.toml", "--out", "m.json"], dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("m.json")).unwrap()).unwrap();
    assert_eq!(v["per_region"].as_array().unwrap().len(), 2);
}

#[test]
fn bench_writes_tables_and_curves() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("b.toml"),
        "n_values = [20, 30]\neval_grid = 20\nkernels = [\"matern6\"]\nvariants = [\"classical\", \"mvsdk\"]\nfill_resolution = 40\n[loocv]\nlower = 0.5\nupper = 10.0\ncount = 8\n",
    )
    .unwrap();
    let out = mvsk(&["bench-discontinuous", "--config", "b.toml", "--out", "res"], dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let rmse = fs::read_to_string(dir.path().join("res/rmse.csv")).unwrap();
    assert_eq!(rmse.lines().count(), 5);
    assert!(rmse.starts_with("kernel,variant,n_requested,"));
    assert_eq!(fs::read_to_string(dir.path().join("res/distances.csv")).unwrap().lines().count(), 5);
    assert!(dir.path().join("res/loocv_curves/matern6_mvsdk_N30.csv").is_file());

    let again = mvsk(&["bench-discontinuous", "--config", "b.toml", "--out", "res2"], dir.path());
    assert_eq!(code(&again), 0);
    assert_eq!(rmse, fs::read_to_string(dir.path().join("res2/rmse.csv")).unwrap());

    let out = mvsk(&["bench-discontinuous", "--config", "b.toml"], dir.path());
    assert_eq!(code(&out), 1, "no output directory anywhere");
}

#[test]
fn image_reconstruct_from_model_and_from_visibilities() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("src.json"),
        r#"{"components": [{"center": [-10.0, -5.0], "sigma": 10.0, "flux": 1.0}, {"center": [12.0, 8.0], "sigma": 8.0, "flux": 0.6}]}"#,
    )
    .unwrap();
    let out = mvsk(&["image-reconstruct", "--geometry", "default", "--source", "src.json", "--variant", "classical", "--out", "img"], dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["image.csv", "residuals.csv", "visibility_fit.csv", "summary.json"] {
        assert!(dir.path().join("img").join(f).is_file(), "{f}");
    }
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("img/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["schema_version"], 1);
    assert!(summary["chi_square"].as_f64().unwrap() >= 0.0);
    assert!(summary["relative_l2_error"].as_f64().unwrap() < 0.5);
    let image = fs::read_to_string(dir.path().join("img/image.csv")).unwrap();
    assert_eq!(image.lines().count(), 65);
    assert_eq!(fs::read_to_string(dir.path().join("img/visibility_fit.csv")).unwrap().lines().count(), 61);

    let source = mvsk::imaging::SourceModel {
        components: vec![mvsk::imaging::GaussianComponent { center: [5.0, 0.0], sigma: 9.0, flux: 1.0 }],
    };
    let vis = source.visibilities(&mvsk::imaging::default_stix_geometry(), None).unwrap();
    mvsk::io::write_visibilities_csv(&dir.path().join("vis.csv"), &vis).unwrap();
    let out = mvsk(&["image-reconstruct", "--source", "vis.csv", "--variant", "vsk", "--out", "img2"], dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("img2/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["variant"], "vsk");
    assert!(summary.get("relative_l2_error").is_none());

    fs::write(dir.path().join("g.csv"), "u,v\n0.01,0\n").unwrap();
    let out = mvsk(&["image-reconstruct", "--geometry", "g.csv", "--source", "vis.csv", "--out", "img3"], dir.path());
    assert_eq!(code(&out), 1);
}

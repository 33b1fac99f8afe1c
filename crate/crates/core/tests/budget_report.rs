use std::fs;

use heralded::budget::{compose_losses, opo_escape_efficiency, LossBudget};
use heralded::experiment::{run_experiment, GroundTruth};
use heralded::{apply_loss, Error, ExperimentConfig, PhotonDistribution};

fn write_config(dir: &std::path::Path, config: &ExperimentConfig) -> std::path::PathBuf {
    let path = dir.join("run.conf");
    fs::write(&path, config.to_text()).unwrap();
    path
}

#[test]
fn composition_is_order_invariant() {
    let losses = LossBudget::reference().losses();
    let total = compose_losses(&losses).unwrap();
    let mut reversed = losses.clone();
    reversed.reverse();
    assert!((compose_losses(&reversed).unwrap() - total).abs() < 1e-15);
    let mut rotated = losses.clone();
    rotated.rotate_left(3);
    assert!((compose_losses(&rotated).unwrap() - total).abs() < 1e-15);
}

#[test]
fn composition_matches_cascaded_damping() {
    let losses = LossBudget::reference().losses();
    let one = PhotonDistribution::fock(1, 6).unwrap();
    let mut cascaded = one.clone();
    for &l in &losses {
        cascaded = apply_loss(&cascaded, l).unwrap();
    }
    let once = apply_loss(&one, compose_losses(&losses).unwrap()).unwrap();
    for n in 0..=6 {
        assert!((cascaded.get(n) - once.get(n)).abs() < 1e-12);
    }
}

#[test]
fn budget_and_escape_examples() {
    let total = LossBudget::reference().total().unwrap();
    assert!((total - 0.132).abs() < 5e-4, "{total}");
    assert!((total - 0.13).abs() < 0.005);
    assert!((compose_losses(&[0.5, 0.5]).unwrap() - 0.75).abs() < 1e-15);
    assert!(matches!(compose_losses(&[1.0]), Err(Error::Domain { .. })));

    let eta = opo_escape_efficiency(0.142, 0.0022).unwrap();
    assert!((eta - 0.985).abs() < 1e-3 && 1.0 - eta <= 0.02, "{eta}");
    assert_eq!(opo_escape_efficiency(0.3, 0.0).unwrap(), 1.0);
    assert!((opo_escape_efficiency(0.1, 0.1).unwrap() - 0.5).abs() < 1e-15);
    assert!(matches!(opo_escape_efficiency(0.0, 0.0), Err(Error::UndefinedEfficiency)));
    assert!(opo_escape_efficiency(1.0, 0.1).is_err());
}

#[test]
fn reference_run_brackets_ground_truth() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::reference_defaults();
    let report = run_experiment(write_config(dir.path(), &cfg), dir.path().join("out")).unwrap();
    let truth = GroundTruth::of(&cfg).unwrap().wigner_origin;
    let se = report.se.as_ref().unwrap().wigner_origin;
    assert!(report.wigner_origin < 0.0);
    assert!((report.wigner_origin - truth).abs() <= 3.0 * se, "{} vs {truth} (SE {se})", report.wigner_origin);
    for name in ["report.json", "mode.csv", "histogram.csv", "wigner.csv", "eigenvalues.csv"] {
        assert!(dir.path().join("out").join(name).is_file(), "{name}");
    }
    let wigner = fs::read_to_string(dir.path().join("out/wigner.csv")).unwrap();
    assert_eq!(wigner.lines().next().unwrap(), "x,p,w");
}

#[test]
fn half_loss_erases_negativity() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        optical_loss: 0.5,
        two_photon_weight: 0.0,
        three_photon_weight: 0.0,
        dark_cps: 0.0,
        stray_cps: 0.0,
        electronic_noise_rel: 0.0,
        ..ExperimentConfig::reference_defaults()
    };
    let report = run_experiment(write_config(dir.path(), &cfg), dir.path().join("out")).unwrap();
    let se = report.se.as_ref().unwrap().wigner_origin;
    assert!(report.wigner_origin.abs() <= 3.0 * se, "{} (SE {se})", report.wigner_origin);
}

#[test]
fn missing_key_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let text: String = ExperimentConfig::reference_defaults()
        .to_text()
        .lines()
        .filter(|l| !l.starts_with("seed"))
        .map(|l| format!("{l}\n"))
        .collect();
    let path = dir.path().join("run.conf");
    fs::write(&path, text).unwrap();
    let err = run_experiment(&path, dir.path().join("out")).unwrap_err();
    assert!(matches!(err, Error::Config(_)));
    assert!(err.to_string().contains("seed"), "{err}");
    assert!(!dir.path().join("out").exists());
}

#[test]
fn failed_run_removes_partial_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        frame_len: 512,
        n_frames: 3000,
        vacuum_frames: 3000,
        bootstrap_replicates: 50,
        ..ExperimentConfig::reference_defaults()
    };
    let out = dir.path().join("out");
    fs::create_dir(&out).unwrap();
    fs::write(out.join("keep.txt"), "unrelated").unwrap();
    // A directory squatting on one output name makes the write fail midway.
    fs::create_dir(out.join("wigner.csv")).unwrap();
    let err = run_experiment(write_config(dir.path(), &cfg), &out).unwrap_err();
    assert!(matches!(err, Error::Io(_)), "{err}");
    let mut left: Vec<String> = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    left.sort();
    assert_eq!(left, ["keep.txt", "wigner.csv"]);
}

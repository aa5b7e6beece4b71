// SPDX-License-Identifier: Apache-2.0

use std::path::{Path, PathBuf};
use std::process::Command;

use otcp::conformal::predict_set;
use otcp::conformal::RegionExport;
use otcp::io::ArtifactFile;
use otcp::partition::Boundedness;
use otcp::rng::{stream_rng, Stream};
use otcp::simulation::Scenario;
use serde_json::Value;

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn otcp(args: &[&str]) -> Run {
    let out = Command::new(env!("CARGO_BIN_EXE_otcp"))
        .args(args)
        .output()
        .unwrap();
    Run {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

fn write_scores(path: &Path, n: usize, seed: u64) {
    let mut rng = stream_rng(seed, Stream::ScenarioData, 0);
    let mut s = String::from("score_1,score_2\n");
    for _ in 0..n {
        let z = Scenario::Gaussian.draw(&mut rng);
        s.push_str(&format!("{},{}\n", z[0], z[1]));
    }
    std::fs::write(path, s).unwrap();
}

struct Fixture {
    dir: tempfile::TempDir,
}

impl Fixture {
    fn new(n: usize) -> Self {
        let dir = tempfile::tempdir().unwrap();
        write_scores(&dir.path().join("scores.csv"), n, 11);
        Fixture { dir }
    }

    fn path(&self, name: &str) -> String {
        self.dir.path().join(name).to_str().unwrap().to_string()
    }

    fn fit(&self, extra: &[&str]) -> (Run, PathBuf) {
        let out = self.path("artifact.json");
        let scores = self.path("scores.csv");
        let mut args = vec!["fit", "--scores", &scores, "--out", &out, "--no-meta"];
        args.extend_from_slice(extra);
        (otcp(&args), PathBuf::from(out))
    }
}

#[test]
fn fit_reports_plan_and_radius() {
    let fx = Fixture::new(99);
    let (run, path) = fx.fit(&["--alpha", "0.1"]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    assert!(
        run.stdout.contains("plan: n_R=10 n_S=9 n_o=10"),
        "{}",
        run.stdout
    );
    assert!(run.stdout.contains("radius: 0.9"));
    assert!(run.stdout.contains("nominal_mass: 0.91"));
    assert!(run.stderr.is_empty());
    let file = ArtifactFile::load(&path).unwrap();
    assert!(file.meta.is_none());
    assert_eq!(file.j_alpha, 9);
}

#[test]
fn outer_shell_radius_warns() {
    let fx = Fixture::new(99);
    let (run, _) = fx.fit(&["--alpha", "0.1", "--grid", "9,11,1"]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    assert!(
        run.stderr.contains("region may be unbounded (r=1)"),
        "{}",
        run.stderr
    );
}

#[test]
fn metadata_is_written_by_default() {
    let fx = Fixture::new(9);
    let out = fx.path("m.json");
    let run = otcp(&[
        "fit",
        "--scores",
        &fx.path("scores.csv"),
        "--alpha",
        "0.2",
        "--out",
        &out,
    ]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    let meta = ArtifactFile::load(Path::new(&out)).unwrap().meta.unwrap();
    assert_eq!(meta.tool_version, env!("CARGO_PKG_VERSION"));
}

#[test]
fn malformed_csv_exits_2_with_line() {
    let fx = Fixture::new(5);
    std::fs::write(fx.path("scores.csv"), "a,b\n1,2\n3,x\n").unwrap();
    let (run, _) = fx.fit(&["--alpha", "0.1"]);
    assert_eq!(run.code, 2);
    assert!(run.stderr.contains("line 3"), "{}", run.stderr);
}

#[test]
fn missing_file_exits_2() {
    let run = otcp(&[
        "fit",
        "--scores",
        "/nonexistent/s.csv",
        "--alpha",
        "0.1",
        "--out",
        "/tmp/x.json",
    ]);
    assert_eq!(run.code, 2);
}

#[test]
fn configuration_errors_exit_3() {
    let fx = Fixture::new(9);
    // 10 target points needed.
    assert_eq!(fx.fit(&["--alpha", "0.1", "--grid", "3,3,0"]).0.code, 3);
    // A full grid reaches every alpha; r = 1 is a warning, not an error.
    let (run, _) = fx.fit(&["--alpha", "0.01", "--grid", "3,3,1"]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    assert!(run.stderr.contains("r=1"));
    let (run, _) = fx.fit(&["--alpha", "0"]);
    assert_eq!(run.code, 3);
    assert!(run.stderr.contains("alpha must lie in (0, 1)"));
    assert_eq!(fx.fit(&["--alpha", "1.5"]).0.code, 3);
    assert_eq!(
        fx.fit(&[
            "--alpha",
            "0.2",
            "--mode",
            "semidiscrete",
            "--grid",
            "2,3,4"
        ])
        .0
        .code,
        3
    );
}

#[test]
fn randomized_needs_semidiscrete_artifact() {
    let fx = Fixture::new(19);
    let (run, path) = fx.fit(&["--alpha", "0.2"]);
    assert_eq!(run.code, 0);
    std::fs::write(fx.path("c.csv"), "a,b\n0,0\n").unwrap();
    let run = otcp(&[
        "predict",
        "--artifact",
        path.to_str().unwrap(),
        "--prediction",
        "0,0",
        "--candidates",
        &fx.path("c.csv"),
        "--randomized",
    ]);
    assert_eq!(run.code, 3);
    assert!(run.stderr.contains("mode mismatch"), "{}", run.stderr);
}

#[test]
fn predictions_match_library_verdicts() {
    let fx = Fixture::new(99);
    let (_, path) = fx.fit(&["--alpha", "0.1"]);
    let file = ArtifactFile::load(&path).unwrap();
    let mut rng = stream_rng(3, Stream::ScenarioData, 0);
    let cands: Vec<Vec<f64>> = (0..40)
        .map(|_| {
            Scenario::Gaussian
                .draw(&mut rng)
                .into_iter()
                .map(|x| 2.0 * x)
                .collect()
        })
        .collect();
    let mut csv = String::from("id,a,b\nself,-1,2\n");
    for (i, c) in cands.iter().enumerate() {
        csv.push_str(&format!("c{i},{},{}\n", c[0], c[1]));
    }
    std::fs::write(fx.path("c.csv"), csv).unwrap();
    let run = otcp(&[
        "predict",
        "--artifact",
        path.to_str().unwrap(),
        "--prediction",
        "-1,2",
        "--candidates",
        &fx.path("c.csv"),
        "--cpd",
    ]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    let lines: Vec<Value> = run
        .stdout
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 41);

    let (k0, psi0) = file.artifact.assign(&[0.0, 0.0]).unwrap();
    assert_eq!(lines[0]["id"], "self");
    assert_eq!(lines[0]["assigned_index"].as_u64().unwrap() as usize, k0);
    let norm0 = psi0.iter().map(|x| x * x).sum::<f64>().sqrt();
    assert!((lines[0]["norm_rank"].as_f64().unwrap() - norm0).abs() < 1e-15);

    let set = predict_set(&file.artifact, file.radius, &[-1.0, 2.0]).unwrap();
    for (line, c) in lines[1..].iter().zip(&cands) {
        assert_eq!(line["in_set"].as_bool().unwrap(), set.contains(c).unwrap());
        assert_eq!(line["vector_rank"].as_array().unwrap().len(), 2);
        assert!(line.get("randomized_norm").is_none());
    }
}

#[test]
fn randomized_predictions_on_semidiscrete_artifact() {
    let fx = Fixture::new(19);
    let (run, path) = fx.fit(&[
        "--alpha",
        "0.2",
        "--mode",
        "semidiscrete",
        "--mc-samples",
        "20000",
        "--mass-tol",
        "1e-2",
    ]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    std::fs::write(fx.path("c.csv"), "a,b\n0,0\n1,1\n-3,0.5\n").unwrap();
    let run = otcp(&[
        "predict",
        "--artifact",
        path.to_str().unwrap(),
        "--prediction",
        "0,0",
        "--candidates",
        &fx.path("c.csv"),
        "--randomized",
        "--seed",
        "4",
    ]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    let file = ArtifactFile::load(&path).unwrap();
    let diagram = file.diagram.as_ref().unwrap();
    for line in run.stdout.lines() {
        let v: Value = serde_json::from_str(line).unwrap();
        let r = v["randomized_norm"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&r));
        let u: Vec<f64> = v["randomized_point"]
            .as_array()
            .unwrap()
            .iter()
            .map(|x| x.as_f64().unwrap())
            .collect();
        assert_eq!(
            diagram.cell_of(&u),
            v["assigned_index"].as_u64().unwrap() as usize
        );
    }
}

#[test]
fn simulate_uniform_pit_and_unknown_scenario() {
    let run = otcp(&[
        "simulate",
        "--scenario",
        "uniform1d",
        "--n",
        "4",
        "--alpha",
        "0.5",
        "--reps",
        "20000",
        "--seed",
        "1",
        "--pit",
    ]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    let sections: Vec<&str> = run.stdout.split("\n\n").collect();
    assert_eq!(sections.len(), 2);
    let rows: Vec<Vec<f64>> = sections[1]
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 5);
    for r in rows {
        assert!((r[2] - 0.2).abs() < 0.015, "{r:?}");
        assert_eq!(r[3], 0.2);
    }
    let run = otcp(&[
        "simulate",
        "--scenario",
        "spiral",
        "--n",
        "4",
        "--alpha",
        "0.5",
        "--reps",
        "10",
    ]);
    assert_eq!(run.code, 3);
}

#[test]
fn export_region_levels() {
    let fx = Fixture::new(99);
    let (_, path) = fx.fit(&["--alpha", "0.1"]);
    let artifact = path.to_str().unwrap();
    let export = |r: &str, pred: Option<&str>| -> RegionExport {
        let out = fx.path(&format!("export-{r}.json"));
        let mut args = vec![
            "export-region",
            "--artifact",
            artifact,
            "--r",
            r,
            "--out",
            &out,
        ];
        if let Some(p) = pred {
            args.extend(["--prediction", p]);
        }
        let run = otcp(&args);
        assert_eq!(run.code, 0, "{}", run.stderr);
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap()
    };
    let e0 = export("0", None);
    assert_eq!(e0.regions.len(), 1);
    assert_eq!(e0.regions[0].multiplicity, 10);
    assert_eq!(e0.active_indices.len(), 10);
    assert!(e0.regions[0].target.iter().all(|&x| x == 0.0));

    let e9 = export("0.9", Some("1,-1"));
    assert!(e9
        .regions
        .iter()
        .all(|r| r.boundedness == Boundedness::ProvenBounded));
    assert_eq!(e9.prediction, Some(vec![1.0, -1.0]));
    assert!((e9.nominal_mass - 0.91).abs() < 1e-12);

    let e1 = export("1", None);
    assert!(e1
        .regions
        .iter()
        .any(|r| r.boundedness == Boundedness::ProvenUnbounded));

    let run = otcp(&[
        "export-region",
        "--artifact",
        artifact,
        "--r",
        "1.5",
        "--out",
        &fx.path("x.json"),
    ]);
    assert_eq!(run.code, 3);
}

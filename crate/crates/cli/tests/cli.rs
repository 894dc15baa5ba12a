use canon_core::io::{read_file, read_hamiltonian, read_matrix, read_samples, read_weight, Report};
use std::path::Path;
use std::process::{Command, Output};

fn canon(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_canon"))
        .args(args)
        .output()
        .expect("spawn canon")
}

fn report(dir: &Path) -> Report {
    Report::parse(&read_file(&dir.join("report.txt")).unwrap()).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn factorize_constant_weight_gives_scaled_identity() {
    let dir = tempfile::tempdir().unwrap();
    let out = canon(&[
        "factorize",
        "--weight",
        "constant:value=4",
        "--r",
        "2",
        "--n",
        "8",
        "-o",
        path(dir.path()),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let a = read_matrix(&read_file(&dir.path().join("A.csv")).unwrap()).unwrap();
    assert_eq!((a.nrows(), a.ncols()), (8, 8));
    for i in 0..8 {
        for j in 0..8 {
            assert_eq!(a[(i, j)], if i == j { 2.0 } else { 0.0 });
        }
    }
    let l = read_matrix(&read_file(&dir.path().join("L.csv")).unwrap()).unwrap();
    assert_eq!(l.nrows(), 8);
    let rep = report(dir.path());
    assert_eq!(rep.get_f64("residual"), Some(0.0));
    assert_eq!(rep.get_f64("leakage"), Some(0.0));
}

#[test]
fn szego_of_a_constant_weight_vanishes() {
    let dir = tempfile::tempdir().unwrap();
    let out = canon(&[
        "szego",
        "--weight",
        "constant:value=3",
        "--z",
        "0,1",
        "--z",
        "-1.5,0.25",
        "-o",
        path(dir.path()),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let rows = read_samples(&read_file(&dir.path().join("szego.txt")).unwrap()).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[1].0, canon_core::C64::new(-1.5, 0.25));
    assert!(rows.iter().all(|(_, k)| k.re == 0.0 && k.im == 0.0));
}

#[test]
fn invert_then_forward_recovers_the_density() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("job.toml");
    std::fs::write(
        &cfg,
        "[weight]\nkind = \"sinc-squared\"\namplitude = 0.5\n[grid]\nr = 20.0\nn = 256\n[tolerances]\neps_density = 0.05\n",
    )
    .unwrap();
    let inv = dir.path().join("inv");
    let out = canon(&["invert", "--config", path(&cfg), "-o", path(&inv)]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let h = read_hamiltonian(&read_file(&inv.join("hamiltonian.txt")).unwrap()).unwrap();
    assert!(h.is_unimodular() && h.grid().cells() == 256);

    let fwd = dir.path().join("fwd");
    let hp = inv.join("hamiltonian.txt");
    let out = canon(&[
        "forward",
        "--hamiltonian",
        path(&hp),
        "--x-max",
        "1.5",
        "--points",
        "7",
        "-o",
        path(&fwd),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let d = read_weight(&read_file(&fwd.join("density.txt")).unwrap()).unwrap();
    for (&x, &v) in d.x.iter().zip(&d.w) {
        let s = if x == 0.0 { 1.0 } else { x.sin() / x };
        let exact = 1.0 + 0.5 * s * s;
        assert!((v - exact).abs() < 1e-3 * exact, "x={x}: {v} vs {exact}");
    }
    assert_eq!(report(&fwd).get("unimodular"), Some("true"));
}

#[test]
fn outputs_are_deterministic_across_thread_counts() {
    let run = |threads: &str| {
        let dir = tempfile::tempdir().unwrap();
        let out = Command::new(env!("CARGO_BIN_EXE_canon"))
            .env("CANON_FACTOR_THREADS", threads)
            .args([
                "factorize",
                "--weight",
                "step:inner=2,outer=1,half_width=1",
                "--r",
                "4",
                "--n",
                "32",
            ])
            .args(["--x-truncation", "200", "-o", path(dir.path())])
            .output()
            .unwrap();
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        let files: Vec<String> = ["A.csv", "L.csv", "report.txt"]
            .iter()
            .map(|f| read_file(&dir.path().join(f)).unwrap())
            .collect();
        (files, out.stdout)
    };
    let one = run("1");
    assert_eq!(one, run("3"));
    assert_eq!(one, run("0"));
}

#[test]
fn decompose_and_a2_read_halfline_files() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("f.txt");
    std::fs::write(&f, "#halfline v1\n0 0.5 3\n0.5 2 -0.25\n2 10 1e-3\n").unwrap();
    let out = canon(&["decompose", "--function", path(&f), "-o", path(dir.path())]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(report(dir.path()).get("exact"), Some("true"));
    assert!(dir.path().join("f1.txt").exists() && dir.path().join("f2.txt").exists());

    let g = dir.path().join("g.txt");
    std::fs::write(&g, "#halfline v1\n#tail 1\n0 1 2\n1 3 0.5\n").unwrap();
    let out = canon(&[
        "a2",
        "--function",
        path(&g),
        "--format",
        "tsv",
        "-o",
        path(dir.path()),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    let keys: Vec<&str> = lines.next().unwrap().split('\t').collect();
    let vals: Vec<&str> = lines.next().unwrap().split('\t').collect();
    let a2: f64 = vals[keys.iter().position(|k| *k == "a2_classical").unwrap()]
        .parse()
        .unwrap();
    assert!(a2 >= 1.0);
}

#[test]
fn weyl_of_the_free_system_is_i() {
    let dir = tempfile::tempdir().unwrap();
    let h = dir.path().join("h.txt");
    std::fs::write(
        &h,
        "#canon-hamiltonian v1\n#unimodular\n0 1 1 0 1\n1 2 1 0 1\n",
    )
    .unwrap();
    let out = canon(&[
        "weyl",
        "--hamiltonian",
        path(&h),
        "--hold",
        "--z",
        "0.5,1",
        "-o",
        path(dir.path()),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let rows = read_samples(&read_file(&dir.path().join("weyl.txt")).unwrap()).unwrap();
    assert!((rows[0].1 - canon_core::C64::new(0.0, 1.0)).norm() < 1e-8);
}

#[test]
fn exit_codes_follow_the_error_class() {
    let dir = tempfile::tempdir().unwrap();
    let o = path(dir.path());
    let code = |args: &[&str]| canon(args).status.code();
    // usage and configuration errors
    assert_eq!(code(&["bogus"]), Some(2));
    assert_eq!(code(&["invert", "--weight", "wobble", "-o", o]), Some(2));
    assert_eq!(code(&["invert", "-o", o]), Some(2));
    assert_eq!(
        code(&["invert", "--weight", "constant", "--n", "1", "-o", o]),
        Some(2)
    );
    let bad = dir.path().join("bad.txt");
    std::fs::write(&bad, "#canon-hamiltonian v1\n0 1 1 zero 1\n").unwrap();
    assert_eq!(
        code(&["weyl", "--hamiltonian", path(&bad), "-o", o]),
        Some(2)
    );
    // domain errors
    assert_eq!(
        code(&["invert", "--weight", "step:inner=-1", "-o", o]),
        Some(3)
    );
    let missing = dir.path().join("missing.txt");
    assert_eq!(
        code(&["weyl", "--hamiltonian", path(&missing), "-o", o]),
        Some(3)
    );
    // no convergence: a short grid without a tail rule
    let h = dir.path().join("h.txt");
    std::fs::write(&h, "#canon-hamiltonian v1\n#unimodular\n0 1 1 0 1\n").unwrap();
    let out = canon(&["weyl", "--hamiltonian", path(&h), "--z", "0,0.1", "-o", o]);
    assert_eq!(out.status.code(), Some(4));
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.lines().count(), 1);
    assert!(err.starts_with("canon: error[convergence]: "), "{err}");
    let out = Command::new(env!("CARGO_BIN_EXE_canon"))
        .env("CANON_FACTOR_THREADS", "many")
        .args(["invert", "--weight", "constant", "-o", o])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_runs_selected_criteria() {
    let dir = tempfile::tempdir().unwrap();
    let out = canon(&[
        "verify",
        "--criterion",
        "9",
        "--criterion",
        "10",
        "-o",
        path(dir.path()),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let rep = report(dir.path());
    assert_eq!(rep.get("criterion_9"), Some("pass"));
    assert_eq!(rep.get("all_passed"), Some("true"));
    assert_eq!(
        canon(&["verify", "--criterion", "12", "-o", path(dir.path())])
            .status
            .code(),
        Some(2)
    );
}

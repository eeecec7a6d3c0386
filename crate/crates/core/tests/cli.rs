use std::process::Command;

use pim_core::harness::CSV_HEADER;

fn pim() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pim"))
}

#[test]
fn solve_writes_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("solve.csv");
    let status = pim()
        .args(["solve", "--case", "circle", "--n", "200", "--t", "0.05", "--kernel", "truncated_gaussian"])
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], CSV_HEADER);
    let fields: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(fields[0], "circle");
    assert_eq!(fields[1], "200");
    assert_eq!(fields[3].parse::<f64>().unwrap(), 0.05);
    assert_eq!(fields[9], "true");
}

#[test]
fn sweep_is_deterministic_and_ordered() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let path = dir.path().join(name);
        let output = pim()
            .args(["sweep", "--case", "sphere", "--n", "300,200,250", "--coupling", "0.5,1"])
            .args(["--mode", "random", "--seed", "5", "--weights", "uniform", "--n-eval", "800"])
            .arg("--out")
            .arg(&path)
            .output()
            .unwrap();
        assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
        let stderr = String::from_utf8_lossy(&output.stderr).to_string();
        assert!(stderr.contains("kernel=wendland_c2") && stderr.contains("fitted slopes"));
        std::fs::read_to_string(path).unwrap()
    };
    let strip = |s: &str| s.lines().map(|l| l.rsplit_once(',').unwrap().0.to_string()).collect::<Vec<_>>();
    let (a, b) = (run("a.csv"), run("b.csv"));
    assert_eq!(strip(&a), strip(&b));
    let ns: Vec<&str> = a.lines().skip(1).map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(ns, ["300", "200", "250"]);
}

#[test]
fn rejects_bad_arguments() {
    for args in [
        vec!["solve", "--case", "torus", "--n", "100"],
        vec!["solve", "--case", "circle", "--n", "100", "--t", "fast"],
        vec!["sweep", "--case", "circle", "--n", "100,200"],
        vec!["sweep", "--case", "circle", "--n", "100,200,300", "--coupling", "1,5"],
        vec!["solve", "--case", "disk", "--n", "100", "--weights", "magic"],
    ] {
        let output = pim().args(&args).output().unwrap();
        assert!(!output.status.success(), "{args:?} should fail");
    }
}

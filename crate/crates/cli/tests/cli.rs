use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn shardgame(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shardgame"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn fig3() -> String {
    scenarios().join("fig3_convergence.toml").display().to_string()
}

#[test]
fn equilibrium_on_fig3_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let out = shardgame(&["equilibrium", "--scenario", &fig3(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    let at_cap: Vec<&str> = stdout.lines().filter(|l| l.contains("[at capacity]")).collect();
    assert_eq!(at_cap.len(), 2, "{stdout}");
    assert!(at_cap[0].contains("mu1") && at_cap[1].contains("mu2"));
    let csv = fs::read_to_string(dir.path().join("equilibrium.csv")).unwrap();
    assert!(csv.starts_with("follower_id,shard_id,allocation,row_total,capacity,utility\n"));
    assert_eq!(csv.lines().count(), 1 + 4 * 2);
}

#[test]
fn negative_capacity_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let src = fs::read_to_string(fig3()).unwrap().replace("capacity = 300.0", "capacity = -300.0");
    let path = dir.path().join("bad.toml");
    fs::write(&path, src).unwrap();
    let out = shardgame(&["equilibrium", "--scenario", path.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("\"mu3\"") && stderr.contains("capacity"), "{stderr}");
}

#[test]
fn forced_non_convergence_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let src = format!("{}\n[solver]\nmax_sweeps = 1\n", fs::read_to_string(fig3()).unwrap());
    let path = dir.path().join("short.toml");
    fs::write(&path, src).unwrap();
    let out = shardgame(&["equilibrium", "--scenario", path.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn missing_file_and_bad_usage() {
    let out = shardgame(&["equilibrium", "--scenario", "/nonexistent/x.toml"]);
    assert_eq!(out.status.code(), Some(3));
    let out = shardgame(&["figure", "--figure", "7"]);
    assert_eq!(out.status.code(), Some(1));
    let out = shardgame(&["equilibrium"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn payments_required_for_fixed_payment_commands() {
    let fig4 = scenarios().join("fig4_leader_alpha_4_6.toml");
    let out = shardgame(&["verify", "--scenario", fig4.to_str().unwrap(), "--out", "/tmp"]);
    assert_eq!(out.status.code(), Some(1));
}

fn read_all(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap())
        .filter(|e| e.path().is_file())
        .map(|e| {
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let runs: Vec<_> = (0..2)
        .map(|_| {
            let dir = tempfile::tempdir().unwrap();
            let d = dir.path().to_str().unwrap();
            let fig2 = scenarios().join("fig2_best_response.toml");
            for cmd in ["equilibrium", "verify", "payout", "stackelberg"] {
                let out = shardgame(&[cmd, "--scenario", &fig3(), "--out", d]);
                assert_eq!(out.status.code(), Some(0), "{cmd}");
            }
            let out = shardgame(&["payout", "--scenario", fig2.to_str().unwrap(), "--out", &format!("{d}/focal")]);
            assert_eq!(out.status.code(), Some(0));
            for fig in ["2", "3", "4"] {
                let out = shardgame(&["figure", "--figure", fig, "--grid", "12", "--out", d]);
                assert_eq!(out.status.code(), Some(0), "figure {fig}");
            }
            let mut files = read_all(dir.path());
            files.extend(read_all(&dir.path().join("focal")));
            files
        })
        .collect();
    assert_eq!(runs[0].len(), 11);
    assert_eq!(runs[0], runs[1]);
}

#[test]
fn trajectory_ends_at_the_equilibrium() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    assert_eq!(shardgame(&["equilibrium", "--scenario", &fig3(), "--out", d]).status.code(), Some(0));
    assert_eq!(shardgame(&["figure", "--figure", "3", "--scenario", &fig3(), "--out", d]).status.code(), Some(0));

    let eq = fs::read_to_string(dir.path().join("equilibrium.csv")).unwrap();
    let traj = fs::read_to_string(dir.path().join("fig3_trajectory.csv")).unwrap();
    let last_sweep = traj.lines().skip(1).map(|l| l.split(',').next().unwrap().to_owned()).last().unwrap();
    let final_rows: Vec<(String, String, f64)> = traj
        .lines()
        .skip(1)
        .map(|l| l.split(',').collect::<Vec<_>>())
        .filter(|f| f[0] == last_sweep)
        .map(|f| (f[1].to_owned(), f[2].to_owned(), f[3].parse().unwrap()))
        .collect();
    let eq_rows: Vec<(String, String, f64)> = eq
        .lines()
        .skip(1)
        .map(|l| l.split(',').collect::<Vec<_>>())
        .map(|f| (f[0].to_owned(), f[1].to_owned(), f[2].parse().unwrap()))
        .collect();
    assert_eq!(final_rows.len(), eq_rows.len());
    for (a, b) in final_rows.iter().zip(&eq_rows) {
        assert_eq!((&a.0, &a.1), (&b.0, &b.1));
        assert!((a.2 - b.2).abs() <= 1e-9, "{a:?} vs {b:?}");
    }
}

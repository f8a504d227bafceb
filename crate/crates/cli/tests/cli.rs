use std::path::Path;
use std::process::{Command, Output};

fn chaoslab(args: &[&str], workers: Option<usize>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_chaoslab"));
    cmd.args(args).env_remove("CHAOSLAB_WORKERS");
    if let Some(w) = workers {
        cmd.env("CHAOSLAB_WORKERS", w.to_string());
    }
    cmd.output().expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("run.toml");
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn oracle_gaussian_is_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[oracle]\ndists = [{ kind = \"gaussian\" }]\nn = [10, 25, 40]\n");
    let out = chaoslab(&["oracle", "--config", &cfg], None);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("dist,N,constraint,log_E2\r\n"));
    let trailer = text.lines().last().unwrap();
    assert!(trailer.starts_with("# run=") && trailer.contains(" seed=0 version="));
    for r in rows(&text) {
        assert!(r[3].parse::<f64>().unwrap().abs() < 1e-10);
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let empty = write_config(dir.path(), "[oracle]\ndists = [{ kind = \"gaussian\" }]\nn = []\n");
    assert_eq!(chaoslab(&["oracle", "--config", &empty], None).status.code(), Some(2));

    let big = dir.path().join("big.toml");
    std::fs::write(&big, "[oracle]\ndists = [{ kind = \"se\", p = 0.5 }]\nn = [80]\n").unwrap();
    assert_eq!(chaoslab(&["oracle", "--config", big.to_str().unwrap()], None).status.code(), Some(3));

    let no_q = dir.path().join("noq.toml");
    std::fs::write(&no_q, "[moments]\ndists = [{ kind = \"gaussian\" }]\nn = [10]\nreplicates = 4\n").unwrap();
    assert_eq!(chaoslab(&["moments", "--config", no_q.to_str().unwrap()], None).status.code(), Some(2));

    let guard = dir.path().join("guard.toml");
    std::fs::write(
        &guard,
        "[moments]\ndists = [{ kind = \"exp\", gamma = 1.0 }]\nq = [1.0]\nn = [10]\nreplicates = 4\nestimator = \"plain\"\n",
    )
    .unwrap();
    let out = chaoslab(&["moments", "--config", guard.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("variance guard"));

    let se_p1 = dir.path().join("se.toml");
    std::fs::write(&se_p1, "[phase_scan]\nfamily = \"se\"\nparams = [1.0]\nq = [1.0]\nn = [10, 20, 30]\nreplicates = 4\n").unwrap();
    assert_eq!(chaoslab(&["phase-scan", "--config", se_p1.to_str().unwrap()], None).status.code(), Some(2));

    let band = dir.path().join("band.toml");
    std::fs::write(&band, "[chaos]\ndist = { kind = \"gaussian\" }\nk = [256]\nr = [1.1]\nq = [1.0]\nreplicates = 4\n").unwrap();
    assert_eq!(chaoslab(&["chaos", "--config", band.to_str().unwrap()], None).status.code(), Some(2));

    let level = dir.path().join("level.toml");
    std::fs::write(&level, "[chaos]\ndist = { kind = \"gaussian\" }\nk = [256]\nr = [1.0]\na = [3.0]\nbarrier_replicates = 4\n").unwrap();
    assert_eq!(chaoslab(&["chaos", "--config", level.to_str().unwrap()], None).status.code(), Some(4));

    let se_mass = dir.path().join("semass.toml");
    std::fs::write(&se_mass, "[chaos]\ndist = { kind = \"se\", p = 0.5 }\nk = [64]\nr = [1.0]\nq = [1.0]\nreplicates = 4\n").unwrap();
    assert_eq!(chaoslab(&["chaos", "--config", se_mass.to_str().unwrap()], None).status.code(), Some(4));

    assert_eq!(chaoslab(&["moments"], None).status.code(), Some(2));
    assert_eq!(chaoslab(&["oracle", "--config", "/nonexistent.toml"], None).status.code(), Some(2));
}

#[test]
fn phase_scan_regimes_and_svg() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "[phase_scan]\nfamily = \"exp\"\nparams = [0.5, 1.0, 2.0, 3.0]\nq = [1.0]\nn = [12, 16, 20]\nreplicates = 40\n",
    );
    let out_dir = dir.path().join("out");
    let out = chaoslab(
        &["phase-scan", "--config", &cfg, "--out", out_dir.to_str().unwrap(), "--format", "csv+svg"],
        None,
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(out_dir.join("phase-scan.csv")).unwrap();
    let regimes: Vec<String> = rows(&text).iter().map(|r| r[2].clone()).collect();
    assert_eq!(regimes, ["EXP_SUPER", "EXP_SUPER", "EXP_CRIT", "EXP_SUB"]);
    let svg = std::fs::read_to_string(out_dir.join("phase-scan.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("gamma = 2q"));
    let record: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join("run.json")).unwrap()).unwrap();
    assert_eq!(record["command"], "phase-scan");
    assert_eq!(record["config_digest"].as_str().unwrap().len(), 64);

    let single = write_config(
        dir.path(),
        "[phase_scan]\nfamily = \"exp\"\nparams = [3.0]\nq = [1.0]\nn = [12]\nreplicates = 10\n",
    );
    let out = chaoslab(&["phase-scan", "--config", &single], None);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stderr).contains("degenerate fit"));
    assert!(String::from_utf8(out.stdout).unwrap().contains("unfitted"));
}

#[test]
fn same_config_same_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "seed = 5\n[moments]\ndists = [{ kind = \"gaussian\" }, { kind = \"exp\", gamma = 1.0 }]\nq = [0.5, 1.0]\nn = [20, 300]\nreplicates = 30\n",
    );
    let a = chaoslab(&["moments", "--config", &cfg], Some(1)).stdout;
    let b = chaoslab(&["moments", "--config", &cfg, "--workers", "3"], None).stdout;
    assert!(!a.is_empty());
    assert_eq!(a, b);
    let c = chaoslab(&["moments", "--config", &cfg, "--seed", "6"], None).stdout;
    assert_ne!(a, c);
    let digest = |v: &[u8]| String::from_utf8_lossy(v).lines().last().unwrap().split(' ').next().unwrap().to_string();
    assert_eq!(digest(&a), digest(&c));
}

#[test]
fn other_subcommands_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"
[defaults]
m_star = 4
[chaos]
dist = { kind = "gaussian" }
k = [128]
r = [1.0]
q = [1.0, 0.5]
replicates = 50
a = [1.0, 2.0]
barrier_replicates = 20
[tightness]
dist = { kind = "gaussian" }
n = [16, 64]
replicates = 20
[sobolev]
dist = { kind = "gaussian" }
s = [-0.75]
n_max = 64
replicates = 10
[bench]
n = [64]
repeats = 1
"#,
    );
    for (cmd, lines) in [("chaos", 5), ("tightness", 3), ("sobolev", 4), ("bench", 3)] {
        let out = chaoslab(&[cmd, "--config", &cfg], None);
        assert_eq!(out.status.code(), Some(0), "{cmd}: {}", String::from_utf8_lossy(&out.stderr));
        let text = String::from_utf8(out.stdout).unwrap();
        assert_eq!(text.lines().count(), lines + 1, "{cmd}:\n{text}");
    }
}

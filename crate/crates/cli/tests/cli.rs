use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const HEADER: &str =
    "instance_id,solver,policy,n,solved,total_ms,verify_ms,other_ms,planner_calls,buffers,seed";

fn rearrange(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rearrange"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const SWAP: &str = r#"{
  "world": {"workspace": [0, 0, 14.4, 9.6], "object_radius": 1, "gripper_radius": 0.5,
            "wrist_length": 5, "grid_resolution": 2.4, "grasp_count": 1},
  "objects": ["a", "b"],
  "start": {"a": [10.6, 3.4], "b": [3.4, 3.4]},
  "goal": {"a": [3.4, 5.8], "b": [10.6, 5.8]}
}"#;

#[test]
fn generate_solve_validate_render() {
    let dir = tempfile::tempdir().unwrap();
    let out = rearrange(&[
        "generate",
        "--n",
        "4",
        "--count",
        "3",
        "--seed",
        "7",
        "--out",
        path(dir.path()),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let inst = dir.path().join("n4-s7.json");
    assert!(inst.exists());
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 3);

    let plan = dir.path().join("plan.json");
    let out = rearrange(&[
        "solve",
        "--instance",
        path(&inst),
        "--solver",
        "lrs",
        "--policy",
        "hybrid",
        "--budget",
        "30",
        "--plan",
        path(&plan),
    ]);
    assert!(out.status.success(), "{}", stdout(&out));
    assert!(stdout(&out).contains("solved with"));

    let out = rearrange(&["validate", "--instance", path(&inst), "--plan", path(&plan)]);
    assert!(out.status.success(), "{}", stdout(&out));

    let svg = dir.path().join("scene.svg");
    let out = rearrange(&[
        "render",
        "--instance",
        path(&inst),
        "--plan",
        path(&plan),
        "--out",
        path(&svg),
    ]);
    assert!(out.status.success());
    let text = fs::read_to_string(&svg).unwrap();
    assert_eq!(text.matches(r#"class="start""#).count(), 4);
    assert!(text.contains(r#"class="action""#));
}

#[test]
fn monotone_solver_reports_failure_with_status_two() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("swap.json");
    fs::write(&inst, SWAP).unwrap();
    for solver in ["mrs", "dfsdp", "cirs", "lrs"] {
        let out = rearrange(&[
            "solve",
            "--instance",
            path(&inst),
            "--solver",
            solver,
            "--budget",
            "10",
        ]);
        assert_eq!(out.status.code(), Some(2), "{solver}");
        assert!(stdout(&out).contains("no plan found"));
    }
    let out = rearrange(&[
        "solve",
        "--instance",
        path(&inst),
        "--policy",
        "greedy",
        "--budget",
        "10",
    ]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("solved with"), "{}", stdout(&out));

    let out = rearrange(&["constraints", "--instance", path(&inst)]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!(v.get("a").is_some() && v.get("b").is_some(), "{v}");
}

#[test]
fn bad_input_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("broken.json");
    fs::write(&inst, "{\n  \"world\": {,\n}").unwrap();
    let out = rearrange(&["solve", "--instance", path(&inst)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));

    let out = rearrange(&["solve", "--instance", path(&inst), "--solver", "bfs"]);
    assert!(!out.status.success());
}

#[test]
fn bench_csv_is_deterministic_modulo_timing() {
    let dir = tempfile::tempdir().unwrap();
    let suite = dir.path().join("suite.json");
    fs::write(
        &suite,
        r#"{"object_counts": [3, 4], "instances_per_count": 3, "seed_base": 11, "budget_secs": 10,
            "solvers": ["mrs", "lrs"], "parallel": true}"#,
    )
    .unwrap();
    let run = |name: &str| -> Vec<Vec<String>> {
        let csv = dir.path().join(name);
        let out = rearrange(&["bench", "--suite", path(&suite), "--csv", path(&csv)]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        assert!(stdout(&out).contains("success"));
        let text = fs::read_to_string(&csv).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(HEADER));
        lines
            .map(|l| {
                l.split(',')
                    .enumerate()
                    .filter(|(i, _)| !(5..=7).contains(i))
                    .map(|(_, f)| f.to_string())
                    .collect()
            })
            .collect()
    };
    let a = run("a.csv");
    let b = run("b.csv");
    assert_eq!(a.len(), 12);
    assert_eq!(a, b);

    let out = rearrange(&["summarize", "--csv", path(&dir.path().join("a.csv"))]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("lrs"));
}

use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

const BIN: &str = env!("CARGO_BIN_EXE_rankrefine");

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn run_with(args: &[&str], stdin: &str, env: &[(&str, &str)]) -> Run {
    let mut cmd = Command::new(BIN);
    cmd.args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .env_remove("RANKREFINE_THREADS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    let mut child = cmd.spawn().expect("spawn rankrefine");
    child.stdin.take().unwrap().write_all(stdin.as_bytes()).unwrap();
    let Output { status, stdout, stderr } = child.wait_with_output().unwrap();
    Run {
        code: status.code().unwrap_or(-1),
        stdout: String::from_utf8(stdout).unwrap(),
        stderr: String::from_utf8(stderr).unwrap(),
    }
}

fn run(args: &[&str]) -> Run {
    run_with(args, "", &[])
}

fn write(dir: &Path, name: &str, content: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, content).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Maximum-likelihood value by bisection on the score, and its inverse information.
fn bt_oracle(below: &[f64], above: &[f64]) -> (f64, f64) {
    let score = |y: f64| {
        above.iter().map(|&l| sigmoid(y - l)).sum::<f64>() - below.iter().map(|&l| sigmoid(l - y)).sum::<f64>()
    };
    let (mut lo, mut hi) = (-100.0, 100.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if score(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let y = 0.5 * (lo + hi);
    let info: f64 = below
        .iter()
        .chain(above)
        .map(|&l| sigmoid(y - l) * sigmoid(l - y))
        .sum();
    (y, 1.0 / info)
}

fn parse_table(text: &str) -> Vec<HashMap<String, String>> {
    let mut lines = text.lines();
    let header: Vec<String> = lines.next().unwrap().split(',').map(String::from).collect();
    lines
        .map(|l| header.iter().cloned().zip(l.split(',').map(String::from)).collect())
        .collect()
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-7 * (1.0 + b.abs())
}

fn refine_fixture(dir: &Path) -> (PathBuf, PathBuf) {
    let preds = write(
        dir,
        "preds.csv",
        "id,y_reg,var_reg\nq1,1.0,2.0\nq2,3.0,0.5\nq3,-0.25,1.5\n",
    );
    let refs = write(dir, "refs.csv", "id,y\nr1,0\nr2,1\nr3,2\nr4,3\nr5,4\n");
    (preds, refs)
}

#[test]
fn refine_matches_hand_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let (preds, refs) = refine_fixture(dir.path());
    let comps = write(
        dir.path(),
        "comps.csv",
        "query_id,ref_id,outcome\nq1,r1,1\nq1,r2,1\nq1,r4,0\nq1,r5,0\nq2,r1,1\nq2,r3,1\nq2,r2,0\nq2,r4,0\nq2,r5,0\n",
    );
    let out = run(&[
        "refine",
        "--predictions",
        s(&preds),
        "--references",
        s(&refs),
        "--comparisons",
        s(&comps),
    ]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    let rows = parse_table(&out.stdout);
    assert_eq!(rows.len(), 3);

    let cases = [
        ("q1", 1.0, 2.0, vec![0.0, 1.0], vec![3.0, 4.0]),
        ("q2", 3.0, 0.5, vec![0.0, 2.0], vec![1.0, 3.0, 4.0]),
    ];
    for ((id, y_reg, var_reg, below, above), row) in cases.iter().zip(&rows) {
        assert_eq!(&row["id"], id);
        let (y_rank, var_rank) = bt_oracle(below, above);
        let get = |k: &str| row[k].parse::<f64>().unwrap();
        assert!(close(get("y_rank"), y_rank), "{id}: {} vs {y_rank}", get("y_rank"));
        assert!(
            close(get("var_rank"), var_rank),
            "{id}: {} vs {var_rank}",
            get("var_rank")
        );
        let var_fused = 1.0 / (1.0 / var_reg + 1.0 / var_rank);
        let y_fused = var_fused * (y_reg / var_reg + y_rank / var_rank);
        assert!(close(get("y_fused"), y_fused), "{id}");
        assert!(close(get("var_fused"), var_fused), "{id}");
        assert_eq!(row["clamped"], "0");
    }
    // Symmetric labels around 2 put q1's rank estimate exactly there.
    assert!(close(rows[0]["y_rank"].parse().unwrap(), 2.0));

    let q3 = &rows[2];
    assert_eq!(q3["y_rank"], "");
    assert_eq!(q3["var_rank"], "");
    assert_eq!(q3["y_fused"], "-0.25");
    assert_eq!(q3["var_fused"], "1.5");
}

#[test]
fn refine_with_no_comparisons_passes_predictions_through() {
    let dir = tempfile::tempdir().unwrap();
    let (preds, refs) = refine_fixture(dir.path());
    let comps = write(dir.path(), "comps.csv", "query_id,ref_id,outcome\n");
    let out = run(&[
        "refine",
        "--predictions",
        s(&preds),
        "--references",
        s(&refs),
        "--comparisons",
        s(&comps),
    ]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    for row in parse_table(&out.stdout) {
        assert_eq!(row["y_fused"], row["y_reg"]);
        assert_eq!(row["var_fused"], row["var_reg"]);
        assert_eq!(row["clamped"], "0");
    }
}

#[test]
fn refine_clamp_floors_rank_variance() {
    let dir = tempfile::tempdir().unwrap();
    let (preds, refs) = refine_fixture(dir.path());
    let comps = write(dir.path(), "comps.csv", "query_id,ref_id,outcome\nq1,r1,1\nq1,r5,0\n");
    let out = run(&[
        "refine",
        "--predictions",
        s(&preds),
        "--references",
        s(&refs),
        "--comparisons",
        s(&comps),
        "--clamp-c",
        "10",
    ]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    let rows = parse_table(&out.stdout);
    assert_eq!(rows[0]["var_rank"].parse::<f64>().unwrap(), 20.0);
}

#[test]
fn refine_reports_missing_variance_column() {
    let dir = tempfile::tempdir().unwrap();
    let (_, refs) = refine_fixture(dir.path());
    let preds = write(dir.path(), "p.csv", "id,y_reg\nq1,1.0\n");
    let comps = write(dir.path(), "comps.csv", "query_id,ref_id,outcome\n");
    let out = run(&[
        "refine",
        "--predictions",
        s(&preds),
        "--references",
        s(&refs),
        "--comparisons",
        s(&comps),
    ]);
    assert_eq!(out.code, 3);
    assert!(out.stderr.contains("var_reg"), "{}", out.stderr);
}

#[test]
fn refine_rejects_comparisons_for_unknown_queries() {
    let dir = tempfile::tempdir().unwrap();
    let (preds, refs) = refine_fixture(dir.path());
    let comps = write(dir.path(), "comps.csv", "query_id,ref_id,outcome\nq9,r1,1\n");
    let out = run(&[
        "refine",
        "--predictions",
        s(&preds),
        "--references",
        s(&refs),
        "--comparisons",
        s(&comps),
    ]);
    assert_eq!(out.code, 3);
    assert!(out.stderr.contains("q9"), "{}", out.stderr);
}

#[test]
fn validate_bound_hits_target_ratio() {
    let out = run(&[
        "validate-bound",
        "--alphas",
        "0.5",
        "--samples",
        "200000",
        "--seed",
        "3",
    ]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    let rows = parse_table(&out.stdout);
    let beta: f64 = rows[0]["empirical_beta"].parse().unwrap();
    assert!((beta - 0.5).abs() < 0.01, "{beta}");
    assert_eq!(rows[0]["n_samples"], "200000");
}

#[test]
fn validate_bound_rejects_small_sample_counts() {
    assert_eq!(run(&["validate-bound", "--samples", "100"]).code, 2);
}

#[test]
fn sweep_help_lists_grid_defaults() {
    let out = run(&["sweep", "--help"]);
    assert_eq!(out.code, 0);
    for needle in ["0.50:0.05:1.00", "10,20,30", "[default: 5]", "[default: 50]"] {
        assert!(out.stdout.contains(needle), "missing {needle}");
    }
}

#[test]
fn bad_thread_count_is_a_usage_error() {
    let out = run_with(
        &["synth", "--rows", "60", "--dim", "2"],
        "",
        &[("RANKREFINE_THREADS", "zero")],
    );
    assert_eq!(out.code, 2);
}

#[test]
fn synth_predict_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    assert_eq!(run(&["synth", "--rows", "80", "--dim", "3", "--out", s(&data)]).code, 0);
    let model = dir.path().join("m.json");
    let out = run(&[
        "predict",
        "--train",
        s(&data),
        "--test",
        s(&data),
        "--trees",
        "10",
        "--save-model",
        s(&model),
    ]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    let rows = parse_table(&out.stdout);
    assert_eq!(rows.len(), 80);
    assert!(rows.iter().all(|r| r["var_reg"].parse::<f64>().unwrap() > 0.0));
    assert!(fs::read_to_string(model).unwrap().contains("rankrefine-forest"));
}

fn rank_fixture(dir: &Path) -> (PathBuf, PathBuf) {
    let queries = write(dir, "queries.csv", "id,text,y\nq1,CCO,0.35\nq2,CCN,2.75\n");
    let mut refs = String::from("id,text,y\n");
    for i in 0..6 {
        refs.push_str(&format!("r{i},C{},{i}\n", "C".repeat(i)));
    }
    (queries, write(dir, "refs.csv", &refs))
}

fn outcomes(csv: &str) -> Vec<(String, String, bool)> {
    parse_table(csv)
        .into_iter()
        .map(|r| (r["query_id"].clone(), r["ref_id"].clone(), r["outcome"] == "1"))
        .collect()
}

#[test]
fn perfect_oracle_ranks_consistently() {
    let dir = tempfile::tempdir().unwrap();
    let (queries, refs) = rank_fixture(dir.path());
    let base = [
        "rank",
        "--source",
        "oracle",
        "--queries",
        s(&queries),
        "--references",
        s(&refs),
        "--seed",
        "4",
    ];
    let big = run(&[&base[..], &["--k", "5"]].concat());
    assert_eq!(big.code, 0, "{}", big.stderr);
    let truth = |id: &str| -> f64 {
        match id {
            "q1" => 0.35,
            "q2" => 2.75,
            r => r[1..].parse().unwrap(),
        }
    };
    let all = outcomes(&big.stdout);
    assert_eq!(all.len(), 10);
    for (q, r, above) in &all {
        assert_eq!(*above, truth(q) > truth(r), "{q} vs {r}");
    }
    assert!(big.stderr.contains("pairwise accuracy 1.0000"), "{}", big.stderr);

    let small = outcomes(&run(&[&base[..], &["--k", "3"]].concat()).stdout);
    for q in ["q1", "q2"] {
        let of = |v: &[(String, String, bool)]| v.iter().filter(|o| o.0 == q).cloned().collect::<Vec<_>>();
        assert_eq!(of(&small)[..], of(&all)[..3]);
    }
    assert_eq!(run(&[&base[..], &["--k", "5"]].concat()).stdout, big.stdout);
}

#[test]
fn interactive_ranking_reads_answers_from_stdin() {
    let dir = tempfile::tempdir().unwrap();
    let (_, refs) = rank_fixture(dir.path());
    let queries = write(dir.path(), "one.csv", "id,text\nq1,CCO\n");
    let out = run_with(
        &[
            "rank",
            "--source",
            "interactive",
            "--queries",
            s(&queries),
            "--references",
            s(&refs),
            "--k",
            "3",
        ],
        "y\nmaybe\nn\nskip\n",
        &[],
    );
    assert_eq!(out.code, 0, "{}", out.stderr);
    let got = outcomes(&out.stdout);
    assert_eq!(got.len(), 2);
    assert!(got[0].2 && !got[1].2);
    assert!(out.stderr.contains("Does CCO exceed"), "{}", out.stderr);
}

/// Minimal chat endpoint answering from a fixed lookup of text values.
/// Checks the bearer token, serves `expected` requests, then stops.
fn fake_endpoint(
    values: HashMap<String, f64>,
    token: &'static str,
    expected: usize,
) -> (String, std::thread::JoinHandle<()>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
    let handle = std::thread::spawn(move || {
        for _ in 0..expected {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut length = 0;
            let mut authorized = false;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                let lower = line.to_ascii_lowercase();
                if let Some(v) = lower.strip_prefix("content-length:") {
                    length = v.trim().parse().unwrap();
                }
                if lower.starts_with("authorization:") && line.trim_end().ends_with(&format!("Bearer {token}")) {
                    authorized = true;
                }
                if line == "\r\n" {
                    break;
                }
            }
            let mut body = vec![0; length];
            reader.read_exact(&mut body).unwrap();
            let request: serde_json::Value = serde_json::from_slice(&body).unwrap();
            let prompt = request["messages"][0]["content"].as_str().unwrap();
            let pairs = prompt.rsplit("molecule_a,molecule_b\n").next().unwrap();
            let mut content = String::from("molecule_a, molecule_b, is_a_greater\n");
            for line in pairs.lines().filter(|l| !l.trim().is_empty()) {
                let (a, b) = line.split_once(',').unwrap();
                let greater = values[a] > values[b];
                content.push_str(&format!("{a}, {b}, {}\n", u8::from(greater)));
            }
            let reply = serde_json::json!({ "choices": [{ "message": { "role": "assistant", "content": content } }] });
            let (status, payload) = if authorized {
                ("200 OK", reply.to_string())
            } else {
                ("401 Unauthorized", "{}".to_string())
            };
            let mut stream = stream;
            write!(
                stream,
                "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{payload}",
                payload.len()
            )
            .unwrap();
        }
    });
    (url, handle)
}

#[test]
fn llm_ranking_records_and_replays() {
    let dir = tempfile::tempdir().unwrap();
    let (queries, refs) = rank_fixture(dir.path());
    let mut values: HashMap<String, f64> = (0..6).map(|i| (format!("C{}", "C".repeat(i)), i as f64)).collect();
    values.insert("CCO".into(), 0.35);
    values.insert("CCN".into(), 2.75);
    let (url, server) = fake_endpoint(values, "sekret", 2);
    let config = write(
        dir.path(),
        "llm.json",
        &serde_json::json!({
            "endpoint_url": url,
            "model_name": "test-model",
            "api_key_env_var": "RANKREFINE_TEST_KEY",
            "batch_size": 4,
            "property_description": "boiling point",
        })
        .to_string(),
    );
    let fixture = dir.path().join("replay.jsonl");
    let args = [
        "rank",
        "--source",
        "llm",
        "--queries",
        s(&queries),
        "--references",
        s(&refs),
        "--k",
        "4",
    ];
    let args_cfg = [&args[..], &["--llm-config", s(&config)]].concat();

    let live = run_with(
        &[&args_cfg[..], &["--record", s(&fixture)]].concat(),
        "",
        &[("RANKREFINE_TEST_KEY", "sekret")],
    );
    server.join().unwrap();
    assert_eq!(live.code, 0, "{}", live.stderr);
    assert_eq!(outcomes(&live.stdout).len(), 8);
    assert!(live.stderr.contains("pairwise accuracy 1.0000"), "{}", live.stderr);
    assert_eq!(fs::read_to_string(&fixture).unwrap().lines().count(), 2);

    let replayed = run_with(&[&args_cfg[..], &["--replay", s(&fixture)]].concat(), "", &[]);
    assert_eq!(replayed.code, 0, "{}", replayed.stderr);
    assert_eq!(replayed.stdout, live.stdout);
}

#[test]
fn llm_ranking_without_key_is_a_network_error() {
    let dir = tempfile::tempdir().unwrap();
    let (queries, refs) = rank_fixture(dir.path());
    let config = write(
        dir.path(),
        "llm.json",
        r#"{"endpoint_url": "http://127.0.0.1:9/none", "api_key_env_var": "RANKREFINE_UNSET_KEY"}"#,
    );
    let out = run_with(
        &[
            "rank",
            "--source",
            "llm",
            "--queries",
            s(&queries),
            "--references",
            s(&refs),
            "--k",
            "2",
            "--llm-config",
            s(&config),
        ],
        "",
        &[],
    );
    assert_eq!(out.code, 5);
    assert!(out.stderr.contains("RANKREFINE_UNSET_KEY"), "{}", out.stderr);
}

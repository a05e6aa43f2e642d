use std::fs;
use std::path::Path;
use std::process::Command;

use ipfs_core::cli::run;

struct Out {
    code: i32,
    stdout: String,
    stderr: String,
}

fn ipfs_raw(repo: &Path, args: &[&str]) -> (i32, Vec<u8>, Vec<u8>) {
    let mut argv = vec!["ipfs".to_string(), "--repo".to_string(), repo.display().to_string()];
    argv.extend(args.iter().map(|s| s.to_string()));
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run(argv, &mut out, &mut err);
    (code, out, err)
}

fn ipfs(repo: &Path, args: &[&str]) -> Out {
    let (code, out, err) = ipfs_raw(repo, args);
    Out { code, stdout: String::from_utf8_lossy(&out).into_owned(), stderr: String::from_utf8_lossy(&err).into_owned() }
}

fn ok(repo: &Path, args: &[&str]) -> String {
    let out = ipfs(repo, args);
    assert_eq!(out.code, 0, "{args:?}: {}", out.stderr);
    out.stdout
}

fn last_added(stdout: &str) -> String {
    stdout.lines().last().unwrap().split(' ').nth(1).unwrap().to_string()
}

fn init(dir: &Path) -> std::path::PathBuf {
    let repo = dir.join("repo");
    ok(&repo, &["init", "--seed", "7"]);
    repo
}

#[test]
fn uninitialized_and_double_init() {
    let dir = tempfile::tempdir().unwrap();
    let repo = dir.path().join("repo");
    let out = ipfs(&repo, &["cat", "QmaqnY2DYtP7uGqP2jN8bKFdGvd8wTmQ2e4iYLZ2wFk5Vo"]);
    assert_eq!(out.code, 2);
    assert!(out.stderr.starts_with("error: Uninitialized:"), "{}", out.stderr);
    ok(&repo, &["init", "--seed", "1"]);
    assert_eq!(ipfs(&repo, &["init"]).code, 10);
}

#[test]
fn seeded_init_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = ok(&dir.path().join("a"), &["init", "--seed", "5"]);
    let b = ok(&dir.path().join("b"), &["init", "--seed", "5"]);
    assert_eq!(a.lines().last(), b.lines().last());
}

#[test]
fn add_cat_ls_refs() {
    let dir = tempfile::tempdir().unwrap();
    let repo = init(dir.path());
    let src = dir.path().join("site");
    fs::create_dir_all(src.join("sub")).unwrap();
    fs::write(src.join("index.html"), "<h1>hi</h1>\n").unwrap();
    let big: Vec<u8> = (0..200_000u32).map(|i| (i.wrapping_mul(2654435761) >> 13) as u8).collect();
    fs::write(src.join("sub/big.bin"), &big).unwrap();

    let added = ok(&repo, &["add", src.to_str().unwrap()]);
    assert_eq!(added.lines().count(), 4, "{added}");
    let root = last_added(&added);

    assert_eq!(ok(&repo, &["cat", &format!("{root}/index.html")]), "<h1>hi</h1>\n");
    let (code, bytes, _) = ipfs_raw(&repo, &["cat", &format!("/ipfs/{root}/sub/big.bin")]);
    assert_eq!((code, bytes), (0, big));

    let ls = ok(&repo, &["ls", &root]);
    let names: Vec<_> = ls.lines().map(|l| l.rsplit(' ').next().unwrap()).collect();
    assert_eq!(names, ["index.html", "sub"]);
    let index_row: Vec<_> = ls.lines().next().unwrap().split(' ').collect();
    // tree links carry the encoded object size
    assert_eq!(index_row[1], "15");

    let direct = ok(&repo, &["refs", &root]);
    let all = ok(&repo, &["refs", "-r", &root]);
    assert_eq!(direct.lines().count(), 2);
    assert!(all.lines().count() > 4);

    let hex = ok(&repo, &["--hex", "refs", &root]);
    assert!(hex.lines().all(|l| l.starts_with("1220") && l.len() == 68), "{hex}");
    // hex keys are accepted as input
    let first_hex = hex.lines().next().unwrap();
    assert_eq!(ok(&repo, &["cat", first_hex]), "<h1>hi</h1>\n");
}

#[test]
fn chunker_option_changes_layout() {
    let dir = tempfile::tempdir().unwrap();
    let repo = init(dir.path());
    let file = dir.path().join("f");
    fs::write(&file, vec![7u8; 10_000]).unwrap();
    let fixed = last_added(&ok(&repo, &["add", "--chunker", "fixed:1000", file.to_str().unwrap()]));
    assert_eq!(ok(&repo, &["ls", &fixed]).lines().count(), 10);
    let out = ipfs(&repo, &["add", "--chunker", "fixed:x", file.to_str().unwrap()]);
    assert_eq!(out.code, 64, "{}", out.stderr);
}

#[test]
fn error_codes() {
    let dir = tempfile::tempdir().unwrap();
    let repo = init(dir.path());
    let missing = "QmaqnY2DYtP7uGqP2jN8bKFdGvd8wTmQ2e4iYLZ2wFk5Vo";
    let out = ipfs(&repo, &["cat", missing]);
    assert_eq!((out.code, out.stderr.split(':').nth(1)), (3, Some(" FetchError")), "{}", out.stderr);
    assert_eq!(ipfs(&repo, &["cat", "/ipfs/nothere"]).code, 3);
    assert_eq!(ipfs(&repo, &["bogus"]).code, 64);
    assert_eq!(ipfs(&repo, &["add", dir.path().join("none").to_str().unwrap()]).code, 8);
    let out = ipfs(&repo, &["resolve", "/ipns/lusab-babad"]);
    assert_eq!(out.code, 4, "{}", out.stderr);
    assert_eq!(ipfs(&repo, &["resolve", "/ipns/nowhere.example"]).code, 3);

    let file = dir.path().join("f");
    fs::write(&file, "x").unwrap();
    let key = last_added(&ok(&repo, &["add", file.to_str().unwrap()]));
    let dir_key = last_added(&ok(&repo, &["add", dir.path().join("repo").parent().unwrap().join("f").to_str().unwrap()]));
    assert_eq!(key, dir_key);
    let out = ipfs(&repo, &["cat", &format!("{key}/inner")]);
    assert_eq!(out.code, 3, "{}", out.stderr);
}

#[test]
fn pins_and_gc() {
    let dir = tempfile::tempdir().unwrap();
    let repo = init(dir.path());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    fs::write(&a, "kept").unwrap();
    fs::write(&b, "dropped").unwrap();
    let ka = last_added(&ok(&repo, &["add", a.to_str().unwrap()]));
    let kb = last_added(&ok(&repo, &["add", "--no-pin", b.to_str().unwrap()]));
    let removed = ok(&repo, &["gc"]);
    assert_eq!(removed.trim(), format!("removed {kb}"));
    assert_eq!(ok(&repo, &["cat", &ka]), "kept");
    assert_eq!(ipfs(&repo, &["cat", &kb]).code, 3);

    ok(&repo, &["pin", "rm", "-r", &ka]);
    assert_eq!(ipfs(&repo, &["pin", "rm", "-r", &ka]).code, 64);
    assert_eq!(ok(&repo, &["gc"]).trim(), format!("removed {ka}"));
    assert!(ok(&repo, &["gc"]).is_empty());
}

#[test]
fn publish_resolve_and_history() {
    let dir = tempfile::tempdir().unwrap();
    let repo = init(dir.path());
    let site = dir.path().join("site");
    fs::create_dir_all(&site).unwrap();
    fs::write(site.join("readme"), "v1").unwrap();
    let v1 = last_added(&ok(&repo, &["add", site.to_str().unwrap()]));
    let published = ok(&repo, &["publish", &v1]);
    let id = published.split(' ').nth(1).unwrap().trim_start_matches("/ipns/").to_string();
    assert!(published.trim_end().ends_with("(sequence 1)"), "{published}");
    assert_eq!(ok(&repo, &["resolve", &format!("/ipns/{id}")]).trim(), format!("/ipfs/{v1}"));
    assert_eq!(ok(&repo, &["cat", &format!("/ipns/{id}/readme")]), "v1");

    fs::write(site.join("readme"), "v2").unwrap();
    let v2 = last_added(&ok(&repo, &["add", site.to_str().unwrap()]));
    let published = ok(&repo, &["publish", "--with-history", "--message", "second", &v2]);
    assert!(published.trim_end().ends_with("(sequence 2)"), "{published}");
    assert_eq!(ok(&repo, &["cat", &format!("/ipns/{id}/object/readme")]), "v2");
    let json = ok(&repo, &["file-cat", "--json", ok(&repo, &["resolve", &format!("/ipns/{id}")]).trim()]);
    let value: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(value["data"]["type"], "tree");
    assert_eq!(value["links"].as_array().unwrap().len(), 2);
    assert_eq!(value["data"]["message"], "second");

    // dns fixture
    fs::write(repo.join("dns.txt"), format!("docs.example\tipfs={id}\n")).unwrap();
    let config = fs::read_to_string(repo.join("config")).unwrap().replace("dns.fixture = \n", "dns.fixture = dns.txt\n");
    fs::write(repo.join("config"), config).unwrap();
    assert_eq!(ok(&repo, &["cat", "/ipns/docs.example/object/readme"]), "v2");
}

#[test]
fn daemon_sim_fetches_pins_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let repo = init(dir.path());
    let file = dir.path().join("f");
    let data: Vec<u8> = (0..120_000u32).map(|i| (i.wrapping_mul(40503) >> 7) as u8).collect();
    fs::write(&file, data).unwrap();
    let key = last_added(&ok(&repo, &["add", file.to_str().unwrap()]));
    let scenario = dir.path().join("scenario");
    fs::write(&scenario, "seed = 11\nnodes = 6\nlatency = 2ms-8ms\n").unwrap();
    let a = ok(&repo, &["daemon", "--sim", scenario.to_str().unwrap()]);
    assert!(a.contains(&format!("node 5 fetched {key}")), "{a}");
    let b = ok(&repo, &["daemon", "--sim", scenario.to_str().unwrap()]);
    assert_eq!(a, b);
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bin = env!("CARGO_BIN_EXE_ipfs");
    let status = Command::new(bin).env("IPFS_REPO", dir.path().join("r")).args(["ls", "x"]).output().unwrap();
    assert_eq!(status.status.code(), Some(2));
    let status = Command::new(bin).env("IPFS_REPO", dir.path().join("r")).args(["init", "--seed", "3"]).output().unwrap();
    assert_eq!(status.status.code(), Some(0));
    let status = Command::new(bin).arg("--help").output().unwrap();
    assert_eq!(status.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&status.stdout).contains("daemon"));
}

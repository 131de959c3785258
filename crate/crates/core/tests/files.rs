use std::io::Write;

use rankrefine_core::rankers::{load_comparisons, read_outcomes, write_outcomes};
use rankrefine_core::{ComparisonOutcome, Dataset, Error, ReferenceSet};

fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> std::path::PathBuf {
    let path = dir.path().join(name);
    std::fs::File::create(&path)
        .unwrap()
        .write_all(body.as_bytes())
        .unwrap();
    path
}

#[test]
fn outcomes_round_trip() {
    let outcomes = vec![
        ComparisonOutcome::new("q1", "a", true),
        ComparisonOutcome::new("q1", "b", false),
        ComparisonOutcome::new("q2", "a", false),
    ];
    let mut buf = Vec::new();
    write_outcomes(&mut buf, &outcomes).unwrap();
    assert_eq!(
        String::from_utf8(buf.clone()).unwrap(),
        "query_id,ref_id,outcome\nq1,a,1\nq1,b,0\nq2,a,0\n"
    );
    assert_eq!(read_outcomes(buf.as_slice(), "mem").unwrap(), outcomes);
}

#[test]
fn comparisons_resolve_against_references() {
    let dir = tempfile::tempdir().unwrap();
    let refs = write(&dir, "refs.csv", "id,y\na,1.0\nb,3.0\nc,5.0\n");
    let comps = write(&dir, "comps.csv", "query_id,ref_id,outcome\nq,a,1\nq,c,0\nz,b,1\n");
    let refs = ReferenceSet::from_csv_path(&refs).unwrap();
    let sets = load_comparisons(&comps, &refs).unwrap();
    assert_eq!(sets.keys().collect::<Vec<_>>(), vec!["q", "z"]);
    assert_eq!((sets["q"].below(), sets["q"].above()), (&[1.0][..], &[5.0][..]));

    let bad = write(&dir, "bad.csv", "query_id,ref_id,outcome\nq,missing,1\n");
    assert!(matches!(load_comparisons(&bad, &refs), Err(Error::UnknownId(_))));
}

#[test]
fn references_need_both_columns() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(&dir, "refs.csv", "id,value\na,1.0\n");
    assert!(matches!(
        ReferenceSet::from_csv_path(&path),
        Err(Error::MissingColumn { .. })
    ));
}

#[test]
fn dataset_round_trip_with_text() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(
        &dir,
        "mols.csv",
        "id,text,logp,mw,y\nm1,CCO,0.1,46.0,-0.3\nm2,CCC,1.2,44.0,0.8\n",
    );
    let data = Dataset::from_csv_path(&path).unwrap();
    assert_eq!(data.name(), "mols");
    assert_eq!(data.feature_names(), ["logp", "mw"]);
    assert_eq!(data.rows()[0].text.as_deref(), Some("CCO"));
    let mut buf = Vec::new();
    data.write_csv(&mut buf).unwrap();
    let again = Dataset::from_csv_reader(buf.as_slice(), "mem").unwrap();
    assert_eq!(again.rows(), data.rows());
}

#[test]
fn dataset_rejects_non_numeric_features() {
    let body = "id,x,y\na,1.0,2.0\nb,oops,3.0\n";
    match Dataset::from_csv_reader(body.as_bytes(), "d.csv") {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
        other => panic!("expected parse error, got {other:?}"),
    }
}

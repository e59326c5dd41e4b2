use std::io::Write;

use m2fgb_core::booster::{train, BoosterConfig};
use m2fgb_core::data::{
    generate_synthetic, load_csv, preprocess, stratified_split, write_csv, ColumnSchema, Preprocessor, SplitSpec,
    SyntheticGroup, TaskKind,
};
use m2fgb_core::Error;

fn write_file(dir: &std::path::Path, name: &str, text: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    std::fs::File::create(&path).unwrap().write_all(text.as_bytes()).unwrap();
    path
}

#[test]
fn csv_to_trained_model() {
    let dir = tempfile::tempdir().unwrap();
    let mut csv = String::from("age,purpose,sex,income,id,default\n");
    let purposes = ["car", "home", "edu"];
    for i in 0..120 {
        let sex = if i % 3 == 0 { "f" } else { "m" };
        let label = ((i * 7) % 5 < 2) as u8;
        csv.push_str(&format!(
            "{},{},{sex},{:.1},{i},{label}\n",
            20 + i % 40,
            purposes[i % 3],
            1000.0 + 13.0 * i as f64
        ));
    }
    let data = write_file(dir.path(), "data.csv", &csv);
    let schema = write_file(
        dir.path(),
        "schema.txt",
        "# credit\n@task = binary\nage = numeric\npurpose = categorical\nsex = group\nincome = numeric\nid = ignore\ndefault = label\n",
    );
    let schema = ColumnSchema::from_file(&schema).unwrap();
    let raw = load_csv(&data, &schema).unwrap();
    assert_eq!(raw.len(), 120);
    assert_eq!(raw.group_names, vec!["f", "m"]);

    let (train_raw, valid_raw, test_raw) = stratified_split(&raw, &SplitSpec::default()).unwrap();
    assert_eq!(train_raw.len() + valid_raw.len() + test_raw.len(), 120);
    let (train_set, pre, warnings) = preprocess(&train_raw).unwrap();
    assert!(warnings.is_empty());
    // age, purpose=car, purpose=home, purpose=edu, income
    assert_eq!(train_set.num_features(), 5);
    let frozen = Preprocessor::from_json(&pre.to_json()).unwrap();
    let valid_set = frozen.transform(&valid_raw).unwrap();
    assert_eq!(valid_set.num_features(), 5);

    let mut config = BoosterConfig::for_task(TaskKind::BinaryClassification);
    config.rounds = 10;
    config.tree.min_samples_leaf = 3;
    let (model, _) = train(&train_set, &config).unwrap();
    assert_eq!(model.predict(&valid_set.features).unwrap().len(), valid_set.len());
}

#[test]
fn bad_cell_reports_row_and_column() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_file(dir.path(), "d.csv", "x,g,y\n1.0,a,1\noops,b,0\n");
    let schema = ColumnSchema::parse("x = numeric\ng = group\ny = label\n").unwrap();
    match load_csv(&data, &schema) {
        Err(Error::Cell { row, column, .. }) => {
            assert_eq!(row, 3);
            assert_eq!(column, "x");
        }
        other => panic!("expected a cell error, got {other:?}"),
    }
}

#[test]
fn written_csv_reloads_identically() {
    let ds = generate_synthetic(
        60,
        &[SyntheticGroup::new("u", 0.5, 0.5, 0.0), SyntheticGroup::new("v", 0.5, 0.4, 0.2)],
        3,
        1.0,
        11,
    )
    .unwrap();
    let mut buf = Vec::new();
    let schema = write_csv(&ds, &mut buf).unwrap();
    let reread = m2fgb_core::data::read_csv(buf.as_slice(), &schema).unwrap();
    // group indices follow first appearance, so compare rows by group name
    assert_eq!(reread.features, ds.features);
    assert_eq!(reread.labels, ds.labels);
    for i in 0..ds.len() {
        assert_eq!(reread.group_names[reread.groups[i]], ds.group_names[ds.groups[i]]);
    }
}

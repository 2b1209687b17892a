use std::collections::HashSet;
use std::fs;

use active_search::classifier::{OracleScorer, ScoreTable, Scorer, TableScorer};
use active_search::dataio::synthetic::{generate_synthetic, ProposalSource, SyntheticConfig};
use active_search::dataio::{load_dataset, Dataset};

fn small(seed: u64) -> SyntheticConfig {
    SyntheticConfig {
        train_scenes: 8,
        test_scenes: 5,
        proposals_per_image: 80,
        code_bits: 64,
        seed,
        ..SyntheticConfig::default()
    }
}

#[test]
fn generated_splits_survive_save_and_load() {
    let data = generate_synthetic(&small(3)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    for (name, split) in [("train", &data.train), ("test", &data.test)] {
        let path = dir.path().join(format!("{name}.jsonl"));
        split.save(&path).unwrap();
        let back = load_dataset(&path).unwrap();
        assert_eq!(&back, split);
        assert_eq!(back.code_bits(), 64);
        for img in back.images() {
            assert_eq!(img.proposals.len(), 80);
            assert!(!img.boxes("object").is_empty());
        }
    }
}

#[test]
fn splits_share_no_image_ids() {
    let data = generate_synthetic(&small(4)).unwrap();
    let train: HashSet<_> = data.train.images().iter().map(|i| i.id.as_str()).collect();
    assert_eq!(train.len(), 8);
    assert_eq!(data.test.len(), 5);
    assert!(data.test.images().iter().all(|i| !train.contains(i.id.as_str())));
    assert_eq!(data.test_sources.len(), 5);
}

#[test]
fn noise_free_scenes_reuse_signature_codes_across_images() {
    let data = generate_synthetic(&SyntheticConfig {
        noise_rate: 0.0,
        ..small(5)
    })
    .unwrap();
    let mut regions = 0;
    for img in data.test.images() {
        for (p, s) in img.proposals.iter().zip(&data.test_sources[&img.id]) {
            match s {
                ProposalSource::Tight { .. } => assert_eq!(p.code, data.signatures.object),
                ProposalSource::Region { region, .. } => {
                    assert_eq!(p.code, data.signatures.regions[*region]);
                    regions += 1;
                }
                _ => {}
            }
        }
    }
    assert!(regions > 0);
}

#[test]
fn same_seed_writes_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let write = |seed: u64, name: &str| {
        let path = dir.path().join(name);
        generate_synthetic(&small(seed)).unwrap().test.save(&path).unwrap();
        fs::read(path).unwrap()
    };
    let a = write(9, "a.jsonl");
    assert_eq!(a, write(9, "b.jsonl"));
    assert_ne!(a, write(10, "c.jsonl"));
}

fn saved(dir: &std::path::Path) -> (std::path::PathBuf, String) {
    let path = dir.join("d.jsonl");
    generate_synthetic(&small(6)).unwrap().test.save(&path).unwrap();
    let text = fs::read_to_string(&path).unwrap();
    (path, text)
}

#[test]
fn loader_rejects_zero_width_windows() {
    let dir = tempfile::tempdir().unwrap();
    let (path, text) = saved(dir.path());
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let mut img: serde_json::Value = serde_json::from_str(&lines[2]).unwrap();
    img["proposals"][0][2] = serde_json::json!(0.0);
    lines[2] = img.to_string();
    fs::write(&path, lines.join("\n")).unwrap();
    let err = load_dataset(&path).unwrap_err();
    assert!(err.to_string().contains(":3"), "{err}");
}

#[test]
fn loader_rejects_duplicate_ids() {
    let dir = tempfile::tempdir().unwrap();
    let (path, text) = saved(dir.path());
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let mut img: serde_json::Value = serde_json::from_str(&lines[2]).unwrap();
    img["id"] = serde_json::from_str::<serde_json::Value>(&lines[1]).unwrap()["id"].clone();
    lines[2] = img.to_string();
    fs::write(&path, lines.join("\n")).unwrap();
    let err = load_dataset(&path).unwrap_err();
    assert!(err.to_string().contains("id"), "{err}");
}

#[test]
fn loader_rejects_header_count_mismatch_and_unknown_schema() {
    let dir = tempfile::tempdir().unwrap();
    let (path, text) = saved(dir.path());
    let truncated: Vec<&str> = text.lines().take(3).collect();
    fs::write(&path, truncated.join("\n")).unwrap();
    assert!(load_dataset(&path).is_err());
    fs::write(&path, text.replacen("\"schema_version\":1", "\"schema_version\":7", 1)).unwrap();
    assert!(load_dataset(&path).is_err());
}

#[test]
fn score_tables_round_trip_and_reject_out_of_range() {
    let data = generate_synthetic(&small(7)).unwrap();
    let oracle = OracleScorer::new("object", 0.05, 1).unwrap();
    let tables = TableScorer::tabulate(&data.test, &oracle).unwrap();
    let dir = tempfile::tempdir().unwrap();
    tables.save_dir(dir.path()).unwrap();
    let back = TableScorer::load_dir(dir.path(), &data.test).unwrap();
    for img in data.test.images() {
        for i in 0..img.proposals.len() {
            assert_eq!(back.score(img, i).unwrap(), oracle.score(img, i).unwrap());
        }
    }

    assert!(ScoreTable::new(vec![0.2, 1.5]).is_err());
    let bad = dir.path().join("bad.tsv");
    ScoreTable::new(vec![0.2, 0.4]).unwrap().save(&bad).unwrap();
    let text = fs::read_to_string(&bad).unwrap().replace("0.4", "-0.1");
    fs::write(&bad, text).unwrap();
    assert!(ScoreTable::load(&bad).is_err());

    // a table shorter than the proposal list is refused
    let img = &data.test.images()[0];
    ScoreTable::new(vec![0.5; 3])
        .unwrap()
        .save(&active_search::classifier::score_table_path(dir.path(), &img.id))
        .unwrap();
    assert!(TableScorer::load_dir(dir.path(), &data.test).is_err());
}

#[test]
fn subset_keeps_only_requested_images() {
    let data = generate_synthetic(&small(8)).unwrap();
    let ids: HashSet<&str> = data.train.images().iter().take(3).map(|i| i.id.as_str()).collect();
    let sub: Dataset = data.train.subset(&ids);
    assert_eq!(sub.len(), 3);
    assert!(sub.images().iter().all(|i| ids.contains(i.id.as_str())));
}

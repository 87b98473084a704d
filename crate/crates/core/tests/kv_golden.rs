//! The seed-42, 50-pair KV example is frozen in `data/`; the generator must
//! keep reproducing it byte for byte.
//!
//! Set `TOKSHAP_REGEN_GOLDEN=1` to rewrite the file.

use std::path::PathBuf;

use token_shapley::eval::{gen_kv, load_jsonl, write_jsonl, Context};

fn golden_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/kv_seed42_pairs50.jsonl")
}

#[test]
fn seed_42_matches_golden_file() {
    let ex = gen_kv(50, 42).unwrap();
    let path = golden_path();
    if std::env::var_os("TOKSHAP_REGEN_GOLDEN").is_some() {
        write_jsonl(std::slice::from_ref(&ex), &path).unwrap();
    }
    let frozen = load_jsonl(&path).unwrap();
    assert_eq!(frozen, vec![ex.clone()]);

    let dir = tempfile::tempdir().unwrap();
    let tmp = dir.path().join("kv.jsonl");
    write_jsonl(&[ex], &tmp).unwrap();
    assert_eq!(std::fs::read(&tmp).unwrap(), std::fs::read(&path).unwrap());
}

#[test]
fn golden_file_structure() {
    let ex = &load_jsonl(golden_path()).unwrap()[0];
    let Context::Text(text) = &ex.context else { panic!("KV context is a single text") };
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 50);
    let gold = ex.gold.sentence_ids().unwrap()[0];
    let (key, value) = lines[gold].split_once(": ").unwrap();
    assert_eq!(ex.query, format!("What is the value of key {key}?"));
    assert_eq!(ex.response, value);
}

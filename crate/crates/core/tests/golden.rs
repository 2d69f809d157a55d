//! Committed golden outputs. Regenerate with `OTR_BLESS=1 cargo test --test golden`.

use std::fs;
use std::path::PathBuf;

use otr_core::demos::{run_demo, ClockMode, DemoName};
use otr_core::export::to_chrome;
use otr_core::schema::{schema_hash, Schema};
use otr_core::wire::{read_header, HEADER_LEN};
use otr_core::Trace;

fn golden(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name)
}

fn check_or_bless(name: &str, actual: &[u8]) {
    let path = golden(name);
    if std::env::var_os("OTR_BLESS").is_some() {
        fs::write(&path, actual).unwrap();
        return;
    }
    let expected = fs::read(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert!(
        expected == actual,
        "{} differs from the generated output",
        path.display()
    );
}

#[test]
fn demo_traces_and_schemas() {
    for d in DemoName::ALL {
        let out = run_demo(d, ClockMode::Logical).unwrap();
        check_or_bless(&format!("{d}.trace"), &out.trace);
        check_or_bless(
            &format!("{d}.schema.json"),
            out.schema.to_canonical_json().as_bytes(),
        );
    }
}

#[test]
fn chrome_exports() {
    for d in DemoName::ALL {
        let out = run_demo(d, ClockMode::Logical).unwrap();
        let trace = Trace::from_bytes(&out.trace, out.schema).unwrap();
        check_or_bless(
            &format!("{d}.chrome.json"),
            to_chrome(&trace, true).to_json_string().as_bytes(),
        );
    }
}

// Hashes of the committed schema files, computed by a separate FNV-1a 64
// implementation over the file bytes.
const SCHEMA_HASHES: [(&str, u64); 3] = [
    ("depth", HASH_DEPTH),
    ("ambiguity", HASH_AMBIGUITY),
    ("exception", HASH_EXCEPTION),
];
const HASH_DEPTH: u64 = 0x9fc3_114d_ddb3_ebea;
const HASH_AMBIGUITY: u64 = 0x17ac_6179_9f57_9a37;
const HASH_EXCEPTION: u64 = 0x001e_80ce_dcc1_54e1;

#[test]
fn committed_schema_hashes() {
    for (name, hash) in SCHEMA_HASHES {
        let text = fs::read_to_string(golden(&format!("{name}.schema.json"))).unwrap();
        let schema = Schema::from_json(&text).unwrap();
        assert_eq!(
            schema.to_canonical_json(),
            text,
            "{name}: golden is not canonical"
        );
        assert_eq!(schema_hash(&schema), hash, "{name}");
        let trace = fs::read(golden(&format!("{name}.trace"))).unwrap();
        assert!(trace.len() >= HEADER_LEN);
        assert_eq!(read_header(&trace, &schema).unwrap().schema_hash, hash, "{name}");
    }
}

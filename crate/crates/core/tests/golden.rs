use std::path::PathBuf;

use msms_core::fault::{run_attack, AttackSetup};
use msms_core::monitor::{StateDump, Strategy};

fn golden(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

fn check(name: &str, actual: &str) {
    let path = golden(name);
    if std::env::var_os("MSMS_BLESS").is_some() {
        std::fs::write(&path, actual).unwrap();
        return;
    }
    let expected =
        std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e} (set MSMS_BLESS=1)", path.display()));
    assert_eq!(actual, expected, "{name} drifted; rerun with MSMS_BLESS=1 if intended");
}

#[test]
fn enhanced_attack_dump_is_stable() {
    let setup = AttackSetup {
        strategy: Strategy::Enhanced,
        priority_victim: true,
        words_per_page: 4,
        seed: 7,
        ..AttackSetup::default()
    };
    let (outcome, store) = run_attack(&setup).unwrap();
    assert!(outcome.detected);
    let dump = store.dump();
    let text = serde_json::to_string_pretty(&dump).unwrap() + "\n";
    check("attack-enhanced-seed7.json", &text);

    let back: StateDump = serde_json::from_str(&text).unwrap();
    assert!(back.verify_audit().intact);
    assert_eq!(serde_json::to_string_pretty(&back).unwrap() + "\n", text);
}

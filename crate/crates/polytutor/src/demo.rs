//! The bundled demo pack and glossary: three concepts (binary numbers,
//! logic gates, how a CPU works), lessons for three styles and an
//! English-Persian-Spanish glossary.

use std::fs;
use std::io;
use std::path::Path;

use polytutor_core::knowledge::ContentPack;
use polytutor_core::translation::GlossaryBackend;

use crate::glossary::{parse_glossary, GlossaryError};
use crate::pack::{load_pack, LoadError};

/// Pack files as (path relative to the pack root, contents).
pub const DEMO_FILES: &[(&str, &str)] = &[
    (
        "concepts/binary-numbers.toml",
        include_str!("../demo/concepts/binary-numbers.toml"),
    ),
    (
        "concepts/cpu-basics.toml",
        include_str!("../demo/concepts/cpu-basics.toml"),
    ),
    (
        "concepts/logic-gates.toml",
        include_str!("../demo/concepts/logic-gates.toml"),
    ),
    (
        "lessons/binary-numbers.CA.toml",
        include_str!("../demo/lessons/binary-numbers.CA.toml"),
    ),
    (
        "lessons/binary-numbers.DLA.toml",
        include_str!("../demo/lessons/binary-numbers.DLA.toml"),
    ),
    (
        "lessons/binary-numbers.SS.toml",
        include_str!("../demo/lessons/binary-numbers.SS.toml"),
    ),
    (
        "lessons/cpu-basics.CA.toml",
        include_str!("../demo/lessons/cpu-basics.CA.toml"),
    ),
    (
        "lessons/cpu-basics.DLA.toml",
        include_str!("../demo/lessons/cpu-basics.DLA.toml"),
    ),
    (
        "lessons/cpu-basics.SS.toml",
        include_str!("../demo/lessons/cpu-basics.SS.toml"),
    ),
    (
        "lessons/logic-gates.CA.toml",
        include_str!("../demo/lessons/logic-gates.CA.toml"),
    ),
    (
        "lessons/logic-gates.DLA.toml",
        include_str!("../demo/lessons/logic-gates.DLA.toml"),
    ),
    (
        "lessons/logic-gates.SS.toml",
        include_str!("../demo/lessons/logic-gates.SS.toml"),
    ),
    ("pack.toml", include_str!("../demo/pack.toml")),
    (
        "questionnaire/items.toml",
        include_str!("../demo/questionnaire/items.toml"),
    ),
    (
        "questions/binary-numbers.toml",
        include_str!("../demo/questions/binary-numbers.toml"),
    ),
    (
        "questions/cpu-basics.toml",
        include_str!("../demo/questions/cpu-basics.toml"),
    ),
    (
        "questions/logic-gates.toml",
        include_str!("../demo/questions/logic-gates.toml"),
    ),
];

pub const DEMO_GLOSSARY: &str = include_str!("../demo/glossary.tsv");

/// Write the demo pack into `dir`, plus `glossary.tsv` next to it.
pub fn write_demo_pack(dir: &Path) -> io::Result<()> {
    for (path, contents) in DEMO_FILES {
        let path = dir.join(path);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(path, contents)?;
    }
    fs::write(dir.join("glossary.tsv"), DEMO_GLOSSARY)
}

/// Load the demo pack through the regular on-disk loader.
pub fn demo_pack() -> Result<ContentPack, LoadError> {
    let dir = std::env::temp_dir().join(format!("polytutor-demo-{}-{}", std::process::id(), unique()));
    write_demo_pack(&dir).map_err(|source| LoadError::Io {
        path: dir.clone(),
        source,
    })?;
    let pack = load_pack(&dir);
    let _ = fs::remove_dir_all(&dir);
    pack
}

pub fn demo_glossary() -> Result<GlossaryBackend, GlossaryError> {
    parse_glossary(DEMO_GLOSSARY)
}

fn unique() -> u64 {
    use std::sync::atomic::{AtomicU64, Ordering};
    static NEXT: AtomicU64 = AtomicU64::new(0);
    NEXT.fetch_add(1, Ordering::Relaxed)
}

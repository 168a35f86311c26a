//! On-disk content pack format.
//!
//! A pack is a directory of UTF-8 TOML files:
//!
//! ```text
//! pack.toml                        pack_id, version, default_language
//! concepts/<concept_id>.toml       title, sections, prerequisites
//! lessons/<concept_id>.<STYLE>.toml  [[blocks]] lang, text
//! questions/<concept_id>.toml      [[questions]] id, section, level, weight,
//!                                  eval_kind, stem, choices, correct_index
//! questionnaire/items.toml         [[items]] item_id, prompt, scale, reverse_scored
//! rules/*.toml                     [[rules]] rule_id, priority, conditions, actions
//! ```
//!
//! Concept ids, lesson concept/style pairs and question concept ids come from
//! file names. Texts (`title`, `stem`, each choice, `prompt`) are either a
//! plain string in the pack's default language or a table keyed by language
//! code. Unknown keys are rejected. Files are read in file-name order.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use polytutor_core::assessment::Level;
use polytutor_core::knowledge::{
    check_parts, Concept, ContentBlock, ContentPack, EvalKind, LessonVariant, PackError, PackParts, Question,
};
use polytutor_core::rules::Rule;
use polytutor_core::style::{LearningStyle, QuestionnaireItem};
use polytutor_core::text::LocalizedText;
use polytutor_core::translation::LanguageCode;
use serde::{Deserialize, Serialize};

pub const MANIFEST: &str = "pack.toml";

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}: {message}", path.display())]
    Syntax { path: PathBuf, message: String },
    #[error("invalid pack: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<PackError>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestFile {
    pub pack_id: String,
    pub version: String,
    pub default_language: LanguageCode,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConceptFile {
    pub title: LocalizedText,
    pub sections: Vec<String>,
    #[serde(default)]
    pub prerequisites: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LessonFile {
    pub blocks: Vec<ContentBlock>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuestionRecord {
    pub id: String,
    pub section: String,
    pub level: Level,
    pub weight: u32,
    pub eval_kind: EvalKind,
    pub stem: LocalizedText,
    pub choices: Vec<LocalizedText>,
    pub correct_index: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuestionsFile {
    pub questions: Vec<QuestionRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuestionnaireFile {
    pub items: Vec<QuestionnaireItem>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RulesFile {
    pub rules: Vec<Rule>,
}

/// Load and validate a pack. All-or-nothing.
pub fn load_pack(dir: &Path) -> Result<ContentPack, LoadError> {
    let parts = load_parts(dir)?;
    let errors = check_parts(&parts);
    if !errors.is_empty() {
        return Err(LoadError::Invalid(errors));
    }
    ContentPack::from_parts(parts).map_err(|e| LoadError::Invalid(vec![e]))
}

/// Parse every file without cross-checking. A missing manifest yields
/// parts with no default language, which [`check_parts`] reports as
/// `MissingManifest`.
pub fn load_parts(dir: &Path) -> Result<PackParts, LoadError> {
    let meta = fs::metadata(dir).map_err(|source| LoadError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    if !meta.is_dir() {
        return Err(LoadError::Io {
            path: dir.to_path_buf(),
            source: io::Error::new(io::ErrorKind::NotADirectory, "not a directory"),
        });
    }

    let manifest_path = dir.join(MANIFEST);
    let manifest: Option<ManifestFile> = if manifest_path.is_file() {
        Some(parse(&manifest_path)?)
    } else {
        None
    };

    let mut concepts = Vec::new();
    for (stem, path) in entity_files(&dir.join("concepts"))? {
        let file: ConceptFile = parse(&path)?;
        concepts.push(Concept {
            concept_id: stem,
            title: file.title,
            sections: file.sections,
            prerequisites: file.prerequisites,
        });
    }

    let mut variants = Vec::new();
    for (stem, path) in entity_files(&dir.join("lessons"))? {
        let (concept_id, style) = stem.rsplit_once('.').ok_or_else(|| LoadError::Syntax {
            path: path.clone(),
            message: "lesson file name must be <concept_id>.<STYLE>.toml".into(),
        })?;
        let style: LearningStyle = style.parse().map_err(|e| LoadError::Syntax {
            path: path.clone(),
            message: format!("{e}"),
        })?;
        let file: LessonFile = parse(&path)?;
        variants.push(LessonVariant {
            concept_id: concept_id.into(),
            style,
            blocks: file.blocks,
        });
    }

    let mut questions = Vec::new();
    for (stem, path) in entity_files(&dir.join("questions"))? {
        let file: QuestionsFile = parse(&path)?;
        questions.extend(file.questions.into_iter().map(|q| Question {
            question_id: q.id,
            concept_id: stem.clone(),
            section_id: q.section,
            level: q.level,
            score_weight: q.weight,
            eval_kind: q.eval_kind,
            stem: q.stem,
            choices: q.choices,
            correct_index: q.correct_index,
        }));
    }

    let items_path = dir.join("questionnaire").join("items.toml");
    let questionnaire = if items_path.is_file() {
        parse::<QuestionnaireFile>(&items_path)?.items
    } else {
        Vec::new()
    };

    let rule_files = entity_files(&dir.join("rules"))?;
    let rules = if rule_files.is_empty() {
        None
    } else {
        let mut rules = Vec::new();
        for (_, path) in rule_files {
            rules.extend(parse::<RulesFile>(&path)?.rules);
        }
        Some(rules)
    };

    let (pack_id, version, default_language) = match manifest {
        Some(m) => (m.pack_id, m.version, Some(m.default_language)),
        None => (String::from("?"), String::new(), None),
    };
    Ok(PackParts {
        pack_id,
        version,
        default_language,
        concepts,
        variants,
        questions,
        questionnaire,
        rules,
    })
}

/// Write `parts` in the on-disk format. Texts and blocks are written as
/// given; question concept ids become file names.
pub fn write_parts(dir: &Path, parts: &PackParts) -> Result<(), LoadError> {
    let default_language = parts
        .default_language
        .clone()
        .ok_or(LoadError::Invalid(vec![PackError::MissingManifest]))?;
    write_toml(
        &dir.join(MANIFEST),
        &ManifestFile {
            pack_id: parts.pack_id.clone(),
            version: parts.version.clone(),
            default_language,
        },
    )?;
    for c in &parts.concepts {
        write_toml(
            &dir.join("concepts").join(format!("{}.toml", c.concept_id)),
            &ConceptFile {
                title: c.title.clone(),
                sections: c.sections.clone(),
                prerequisites: c.prerequisites.clone(),
            },
        )?;
    }
    for v in &parts.variants {
        write_toml(
            &dir.join("lessons")
                .join(format!("{}.{}.toml", v.concept_id, v.style.code())),
            &LessonFile {
                blocks: v.blocks.clone(),
            },
        )?;
    }
    let mut by_concept: std::collections::BTreeMap<&str, Vec<QuestionRecord>> = Default::default();
    for q in &parts.questions {
        by_concept.entry(&q.concept_id).or_default().push(QuestionRecord {
            id: q.question_id.clone(),
            section: q.section_id.clone(),
            level: q.level,
            weight: q.score_weight,
            eval_kind: q.eval_kind,
            stem: q.stem.clone(),
            choices: q.choices.clone(),
            correct_index: q.correct_index,
        });
    }
    for (concept, questions) in by_concept {
        write_toml(
            &dir.join("questions").join(format!("{concept}.toml")),
            &QuestionsFile { questions },
        )?;
    }
    if !parts.questionnaire.is_empty() {
        write_toml(
            &dir.join("questionnaire").join("items.toml"),
            &QuestionnaireFile {
                items: parts.questionnaire.clone(),
            },
        )?;
    }
    if let Some(rules) = &parts.rules {
        write_toml(
            &dir.join("rules").join("policy.toml"),
            &RulesFile { rules: rules.clone() },
        )?;
    }
    Ok(())
}

fn write_toml<T: Serialize>(path: &Path, value: &T) -> Result<(), LoadError> {
    let io_err = |source| LoadError::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io_err)?;
    }
    let text = toml::to_string_pretty(value).map_err(|e| LoadError::Syntax {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    fs::write(path, text).map_err(io_err)
}

fn parse<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, LoadError> {
    let text = fs::read_to_string(path).map_err(|source| LoadError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    toml::from_str(&text).map_err(|e| LoadError::Syntax {
        path: path.to_path_buf(),
        message: e.to_string().trim_end().to_string(),
    })
}

/// `*.toml` files directly under `dir`, as (file stem, path) sorted by
/// name. A missing directory is empty.
fn entity_files(dir: &Path) -> Result<Vec<(String, PathBuf)>, LoadError> {
    let entries = match fs::read_dir(dir) {
        Ok(entries) => entries,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(source) => {
            return Err(LoadError::Io {
                path: dir.to_path_buf(),
                source,
            })
        }
    };
    let mut out = Vec::new();
    for entry in entries {
        let path = entry
            .map_err(|source| LoadError::Io {
                path: dir.to_path_buf(),
                source,
            })?
            .path();
        if path.extension().and_then(|e| e.to_str()) != Some("toml") || !path.is_file() {
            continue;
        }
        let Some(stem) = path.file_stem().and_then(|s| s.to_str()) else {
            return Err(LoadError::Syntax {
                path,
                message: "file name is not UTF-8".into(),
            });
        };
        out.push((stem.to_string(), path));
    }
    out.sort();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demo;

    #[test]
    fn demo_pack_round_trips_through_files() {
        let dir = tempfile::tempdir().unwrap();
        demo::write_demo_pack(dir.path()).unwrap();
        let pack = load_pack(dir.path()).unwrap();
        assert_eq!(pack.pack_id(), "demo");
        assert_eq!(pack.course_order(), ["binary-numbers", "logic-gates", "cpu-basics"]);

        let parts = load_parts(dir.path()).unwrap();
        let again = tempfile::tempdir().unwrap();
        write_parts(again.path(), &parts).unwrap();
        assert_eq!(load_pack(again.path()).unwrap(), pack);
    }

    #[test]
    fn minimal_pack() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path();
        fs::write(
            p.join(MANIFEST),
            "pack_id = \"mini\"\nversion = \"1\"\ndefault_language = \"en\"\n",
        )
        .unwrap();
        fs::create_dir_all(p.join("concepts")).unwrap();
        fs::write(p.join("concepts/c1.toml"), "title = \"One\"\nsections = [\"s1\"]\n").unwrap();
        fs::create_dir_all(p.join("lessons")).unwrap();
        fs::write(
            p.join("lessons/c1.SS.toml"),
            "[[blocks]]\nlang = \"en\"\ntext = \"Hello\"\n",
        )
        .unwrap();
        fs::create_dir_all(p.join("questions")).unwrap();
        let q = |id: &str, kind: &str| {
            format!(
                "[[questions]]\nid = \"{id}\"\nsection = \"s1\"\nlevel = \"Good\"\nweight = 1\neval_kind = \"{kind}\"\nstem = \"?\"\nchoices = [\"a\", \"b\"]\ncorrect_index = 0\n"
            )
        };
        fs::write(
            p.join("questions/c1.toml"),
            q("q1", "Conceptual") + &q("q2", "Objective"),
        )
        .unwrap();
        let pack = load_pack(p).unwrap();
        assert_eq!(pack.concepts().len(), 1);
        assert_eq!(pack.bank_for("c1").unwrap().len(), 2);
        assert!(pack.rules().is_none());

        // a question pointing at a missing section
        fs::write(
            p.join("questions/c1.toml"),
            q("q1", "Conceptual").replace("\"s1\"", "\"s9\""),
        )
        .unwrap();
        match load_pack(p) {
            Err(LoadError::Invalid(errors)) => {
                assert!(errors.iter().any(|e| e.kind() == "DanglingReference"), "{errors:?}")
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_manifest_and_bad_syntax() {
        let dir = tempfile::tempdir().unwrap();
        match load_pack(dir.path()) {
            Err(LoadError::Invalid(errors)) => assert!(errors.contains(&PackError::MissingManifest)),
            other => panic!("{other:?}"),
        }
        fs::write(dir.path().join(MANIFEST), "pack_id = \n").unwrap();
        assert!(matches!(load_pack(dir.path()), Err(LoadError::Syntax { .. })));
        fs::write(
            dir.path().join(MANIFEST),
            "pack_id = \"x\"\nversion = \"1\"\ndefault_language = \"en\"\nextra = 1\n",
        )
        .unwrap();
        assert!(matches!(load_pack(dir.path()), Err(LoadError::Syntax { .. })));
        assert!(matches!(load_pack(&dir.path().join("nope")), Err(LoadError::Io { .. })));
    }

    #[test]
    fn rules_directory_replaces_default_policy() {
        let dir = tempfile::tempdir().unwrap();
        demo::write_demo_pack(dir.path()).unwrap();
        fs::create_dir_all(dir.path().join("rules")).unwrap();
        fs::write(
            dir.path().join("rules/policy.toml"),
            r#"
[[rules]]
rule_id = "always-end"
priority = 1
conditions = [{ subject = "session", attribute = "event", op = "=", value = "entry" }]
actions = [{ kind = "Emit", action = "EndCourse" }]
"#,
        )
        .unwrap();
        let pack = load_pack(dir.path()).unwrap();
        let rules = pack.rules().unwrap();
        assert_eq!(rules.len(), 1);
        assert_eq!(rules[0].rule_id, "always-end");
    }
}

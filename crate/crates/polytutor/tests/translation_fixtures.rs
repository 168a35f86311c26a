//! Translation backends against the committed fixtures: the test glossary
//! and recorded remote exchanges served by the local stub.

use std::path::PathBuf;
use std::time::Duration;

use polytutor::glossary::load_glossary;
use polytutor::translation::remote::WireRequest;
use polytutor::translation::stub::{Exchange, StubServer};
use polytutor::translation::{RemoteBackend, RemoteConfig, TranslatorSettings};
use polytutor_core::translation::{translate, LanguageCode, TranslateError, TranslationRequest};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn lang(code: &str) -> LanguageCode {
    LanguageCode::new(code).unwrap()
}

fn req(from: &str, to: &str, text: &str) -> TranslationRequest {
    TranslationRequest::new(lang(from), lang(to), text).unwrap()
}

#[test]
fn glossary_fixture_lookups() {
    let g = load_glossary(&fixture("glossary.tsv")).unwrap();
    assert_eq!(translate(&g, &req("en", "fa", "book")).unwrap(), "کتاب");
    assert_eq!(translate(&g, &req("en", "fa", "the book")).unwrap(), "the کتاب");
    assert_eq!(translate(&g, &req("en", "es", "book")).unwrap(), "libro");
    assert_eq!(
        translate(&g, &req("en", "fa", "machine translation")).unwrap(),
        "ترجمه ماشینی"
    );
    assert_eq!(translate(&g, &req("en", "fa", "a machine")).unwrap(), "a ماشین");
    // declared pair without entries passes text through
    assert_eq!(translate(&g, &req("fa", "en", "کتاب")).unwrap(), "کتاب");
    assert!(matches!(
        translate(&g, &req("en", "de", "book")),
        Err(TranslateError::UnsupportedPair { .. })
    ));
}

#[test]
fn glossary_path_from_settings() {
    let path = fixture("glossary.tsv");
    let settings = TranslatorSettings::from_lookup(|name| match name {
        "TRANSLATOR_BACKEND" => Some("glossary".into()),
        "GLOSSARY_PATH" => Some(path.display().to_string()),
        _ => None,
    })
    .unwrap();
    let t = settings.build().unwrap();
    assert_eq!(translate(&t, &req("en", "fa", "the book")).unwrap(), "the کتاب");
}

#[test]
fn recorded_exchanges_replay_byte_identically() {
    let path = fixture("remote_exchanges.json");
    let exchanges: Vec<Exchange> = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let server = StubServer::replay_file(&path).unwrap();
    let mut config = RemoteConfig::new(server.url());
    config.backoff = Duration::from_millis(1);
    let backend = RemoteBackend::new(config);

    for exchange in &exchanges {
        let WireRequest { source, target, text } = &exchange.request;
        let got = translate(&backend, &req(source, target, text));
        match exchange.response.get("text").and_then(|t| t.as_str()) {
            Some(expected) => assert_eq!(got.unwrap().as_bytes(), expected.as_bytes()),
            None => assert_eq!(
                got,
                Err(TranslateError::UnsupportedPair {
                    from: lang(source),
                    to: lang(target),
                })
            ),
        }
    }
    // unsupported_pair is not retried
    assert_eq!(server.requests().len(), exchanges.len());

    // a request that was never recorded is a non-retryable backend error
    let unknown = translate(&backend, &req("en", "fa", "never recorded"));
    assert!(
        matches!(unknown, Err(TranslateError::BackendUnavailable(_))),
        "{unknown:?}"
    );
}

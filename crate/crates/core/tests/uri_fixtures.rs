use agenturi_core::{AgentId, AgentUri, IdValidation};

fn lines(text: &str) -> impl Iterator<Item = (&str, &str)> {
    text.lines()
        .filter(|l| !l.starts_with('#') && !l.is_empty())
        .map(|l| l.split_once('\t').expect("tab separated"))
}

#[test]
fn valid_corpus_parses_to_expected_canonical_form() {
    let corpus = include_str!("../fixtures/uris_valid.txt");
    let mut n = 0;
    for (input, canonical) in lines(corpus) {
        let uri = AgentUri::parse(input).unwrap_or_else(|e| panic!("{input}: {e}"));
        assert_eq!(uri.canonical().as_str(), canonical, "{input}");
        let reparsed = AgentUri::parse(uri.canonical().as_str()).unwrap();
        assert!(reparsed.equivalent(&uri));
        n += 1;
    }
    assert!(n >= 50);
}

#[test]
fn invalid_corpus_fails_with_expected_error() {
    let corpus = include_str!("../fixtures/uris_invalid.txt");
    let mut n = 0;
    for (expected, input) in lines(corpus) {
        let err = AgentUri::parse(input).expect_err(input);
        assert_eq!(err.name(), expected, "{input}: {err}");
        n += 1;
    }
    assert!(n >= 50);
}

#[test]
fn lenient_mode_accepts_non_v7_ids() {
    let id = AgentId::from_uuid(0x01890a5d_ac96_474b_bcce_b302099a8057);
    let v4 = format!("agent://acme.com/workflow/{id}");
    assert!(AgentUri::parse(&v4).is_err());
    let uri = AgentUri::parse_with(&v4, IdValidation::Lenient).unwrap();
    assert_eq!(uri.agent_id().version(), 4);
}

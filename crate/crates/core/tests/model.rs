use std::path::PathBuf;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use studyu_core::fixtures;
use studyu_core::model::{
    parse_study, serialize_study, validate_study, DecodeErrorKind, ParseError, Severity, Study,
};

fn golden(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

fn to_bytes(value: &Value) -> Vec<u8> {
    serde_json::to_vec(value).unwrap()
}

fn fixture_value(json: &str) -> Value {
    serde_json::from_str(json).unwrap()
}

fn decode_kind(bytes: &[u8]) -> (DecodeErrorKind, String) {
    match parse_study(bytes) {
        Err(ParseError::Decode { kind, path, .. }) => (kind, path),
        other => panic!("expected a decode error, got {other:?}"),
    }
}

#[test]
fn back_pain_has_three_interventions_and_one_observation() {
    let (_, details) = parse_study(fixtures::BACK_PAIN_JSON.as_bytes()).unwrap();
    let names: Vec<_> = details.intervention_set.interventions.iter().map(|i| i.name.as_str()).collect();
    assert_eq!(names, ["Willow bark tea", "Arnica balm", "Warming pad"]);
    assert_eq!(details.observations.len(), 1);
}

#[test]
fn fixtures_pass_publish_validation() {
    for study in [fixtures::back_pain(), fixtures::ibs_diets(), fixtures::calibration_study()] {
        let report = validate_study(&study.details, &study.metadata, true);
        assert!(!report.has_errors(), "{}: {:?}", study.metadata.study_id, report.findings);
    }
}

#[test]
fn empty_object_is_missing_metadata() {
    assert_eq!(decode_kind(b"{}"), (DecodeErrorKind::MalformedDocument, "$.metadata".to_owned()));
}

#[test]
fn not_json_is_malformed() {
    assert_eq!(decode_kind(b"{\"metadata\": ").0, DecodeErrorKind::MalformedDocument);
    assert_eq!(decode_kind(b"[1, 2]").0, DecodeErrorKind::MalformedDocument);
}

#[test]
fn zero_phase_duration_is_rejected_at_its_path() {
    let mut value = fixture_value(fixtures::BACK_PAIN_JSON);
    value["details"]["schedule"]["phaseDurationDays"] = json!(0);
    assert_eq!(
        decode_kind(&to_bytes(&value)),
        (DecodeErrorKind::TypeMismatch, "$.details.schedule.phaseDurationDays".to_owned())
    );
}

#[test]
fn string_for_number_is_type_mismatch() {
    let mut value = fixture_value(fixtures::BACK_PAIN_JSON);
    value["metadata"]["revision"] = json!("three");
    assert_eq!(
        decode_kind(&to_bytes(&value)),
        (DecodeErrorKind::TypeMismatch, "$.metadata.revision".to_owned())
    );
}

#[test]
fn unknown_member_is_reported_with_its_path() {
    let mut value = fixture_value(fixtures::BACK_PAIN_JSON);
    value["details"]["schedule"]["washoutDays"] = json!(2);
    assert_eq!(
        decode_kind(&to_bytes(&value)),
        (DecodeErrorKind::UnknownField, "$.details.schedule.washoutDays".to_owned())
    );
}

#[test]
fn dangling_criterion_reference_is_one_error() {
    let mut value = fixture_value(fixtures::BACK_PAIN_JSON);
    value["details"]["eligibilityCriteria"][0]["expression"]["target"] = json!("q99");
    let Err(ParseError::Invalid(report)) = parse_study(&to_bytes(&value)) else {
        panic!("expected validation failure");
    };
    let errors: Vec<_> = report.errors().collect();
    assert_eq!(errors.len(), 1, "{errors:?}");
    assert_eq!(errors[0].path, "$.details.eligibilityCriteria[0].expression");
}

#[test]
fn minimum_length_beyond_duration_is_one_error() {
    let mut study = fixtures::back_pain();
    study.details.minimum_study_length_days = 40.try_into().unwrap();
    let report = validate_study(&study.details, &study.metadata, false);
    assert_eq!(report.errors().count(), 1, "{:?}", report.findings);
}

#[test]
fn publish_gate_requires_consent_and_irb() {
    let mut study = fixtures::back_pain();
    study.details.consent.clear();
    study.metadata.irb.protocol_number.clear();
    assert!(!validate_study(&study.details, &study.metadata, false).has_errors());
    let report = validate_study(&study.details, &study.metadata, true);
    let paths: Vec<_> = report.errors().map(|f| f.path.as_str()).collect();
    assert_eq!(paths, ["$.details.consent", "$.metadata.irb.protocolNumber"]);
}

#[test]
fn single_intervention_is_rejected() {
    let mut study = fixtures::back_pain();
    study.details.intervention_set.interventions.truncate(1);
    let report = validate_study(&study.details, &study.metadata, false);
    assert!(report
        .errors()
        .any(|f| f.path == "$.details.interventionSet.interventions"));
}

#[test]
fn report_is_sorted_and_deterministic() {
    let mut study = fixtures::ibs_diets();
    study.details.consent.clear();
    study.metadata.title.clear();
    study.details.observations[0].task.schedule.clear();
    let first = validate_study(&study.details, &study.metadata, true);
    let second = validate_study(&study.details, &study.metadata, true);
    assert_eq!(first, second);
    let mut sorted = first.findings.clone();
    sorted.sort();
    assert_eq!(first.findings, sorted);
    assert!(first.findings.iter().any(|f| f.severity == Severity::Warning));
}

#[test]
fn back_pain_canonical_golden() {
    let study = fixtures::back_pain();
    let bytes = serialize_study(&study.metadata, &study.details);
    let path = golden("back_pain.canonical.json");
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, &bytes).unwrap();
    }
    let expected = std::fs::read(&path).expect("golden file present");
    assert_eq!(String::from_utf8(bytes).unwrap(), String::from_utf8(expected).unwrap());
}

#[test]
fn canonical_form_is_a_fixed_point() {
    for json in [fixtures::BACK_PAIN_JSON, fixtures::IBS_DIETS_JSON, fixtures::CALIBRATION_JSON] {
        let (m, d) = parse_study(json.as_bytes()).unwrap();
        let once = serialize_study(&m, &d);
        let (m2, d2) = parse_study(&once).unwrap();
        assert_eq!((&m, &d), (&m2, &d2));
        assert_eq!(once, serialize_study(&m2, &d2));
        assert!(once.ends_with(b"}\n"));
        assert!(once.starts_with(b"{\n  \"details\": {\n    \""));
    }
}

#[test]
fn unicode_title_round_trips() {
    let mut study = fixtures::back_pain();
    study.metadata.title = "Rückenschmerzen".into();
    let bytes = serialize_study(&study.metadata, &study.details);
    assert!(std::str::from_utf8(&bytes).unwrap().contains("\"title\": \"Rückenschmerzen\""));
    let (m, d) = parse_study(&bytes).unwrap();
    assert_eq!(serialize_study(&m, &d), bytes);
}

/// Every object node in `value`, as a JSON pointer.
fn object_pointers(value: &Value, at: String, out: &mut Vec<String>) {
    match value {
        Value::Object(map) => {
            out.push(at.clone());
            for (k, v) in map {
                object_pointers(v, format!("{at}/{k}"), out);
            }
        }
        Value::Array(items) => {
            for (i, v) in items.iter().enumerate() {
                object_pointers(v, format!("{at}/{i}"), out);
            }
        }
        _ => {}
    }
}

fn random_study(seed: u64) -> Study {
    fixtures::random_study(&mut ChaCha8Rng::seed_from_u64(seed))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn generated_studies_round_trip(seed in any::<u64>()) {
        let study = random_study(seed);
        let report = validate_study(&study.details, &study.metadata, true);
        prop_assert!(!report.has_errors(), "{:?}", report.findings);
        let bytes = serialize_study(&study.metadata, &study.details);
        let (m, d) = parse_study(&bytes).unwrap();
        prop_assert_eq!(&m, &study.metadata);
        prop_assert_eq!(&d, &study.details);
        prop_assert_eq!(serialize_study(&m, &d), bytes);
    }

    #[test]
    fn unknown_members_are_rejected_at_any_depth(seed in any::<u64>(), pick in any::<prop::sample::Index>()) {
        let study = random_study(seed);
        let mut value: Value = serde_json::from_slice(&serialize_study(&study.metadata, &study.details)).unwrap();
        let mut pointers = Vec::new();
        object_pointers(&value, String::new(), &mut pointers);
        let target = pick.get(&pointers).clone();
        value.pointer_mut(&target).unwrap().as_object_mut().unwrap().insert("zzUnexpected".into(), json!(1));
        match parse_study(&to_bytes(&value)) {
            Err(ParseError::Decode { kind, .. }) => prop_assert_eq!(kind, DecodeErrorKind::UnknownField, "at {}", target),
            other => prop_assert!(false, "accepted unknown member at {target}: {other:?}"),
        }
    }
}

mod support;

use std::sync::Arc;

use studyu_core::fixtures;
use studyu_store::{ExportOptions, FileBackend, ManualClock, SeededEntropy, TrialStore};
use support::*;

const HEADER: &str = "participant_id,enrollment_day,study_day,phase_index,active_intervention,task_id,property_id,\
                      pain_intensity,painkiller_taken,balm_applied\r\n";

fn golden(name: &str, actual: &str) {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, actual).unwrap();
    }
    let expected = std::fs::read_to_string(&path).unwrap();
    assert_eq!(actual, expected, "golden file {name} differs");
}

#[test]
fn unpublished_studies_cannot_be_exported() {
    let h = Harness::new();
    let study = fixtures::back_pain();
    h.store.save_draft(study.metadata, study.details, 0).unwrap();
    assert_eq!(h.store.export_csv("back-pain", ExportOptions::default()).unwrap_err().code(), "study_not_published");
    assert_eq!(h.store.export_csv("nope", ExportOptions::default()).unwrap_err().code(), "not_found");
}

#[test]
fn empty_study_exports_the_header_only() {
    let h = Harness::new();
    h.publish_back_pain();
    assert_eq!(h.store.export_csv("back-pain", ExportOptions::default()).unwrap(), HEADER);
}

#[test]
fn three_results_give_three_rows() {
    let h = Harness::new();
    h.publish_back_pain();
    let user = h.store.create_user(true).unwrap();
    let e = h.enroll(user.user_id.as_str());
    let id = e.enrollment_id.as_str();
    // one checkmark without an export column, one with, and one diary answer
    // exporting its intensity and painkiller columns
    let balm_day = (1..=14).find(|d| intervention_tasks(&e, *d) == ["apply_balm"]).unwrap();
    let tea_day = (1..=14).find(|d| intervention_tasks(&e, *d).len() == 2).unwrap();
    h.goto(&e, tea_day);
    h.store.record_task_result(id, checkmark("tea_morning", tea_day)).unwrap();
    h.goto(&e, balm_day);
    h.store.record_task_result(id, checkmark("apply_balm", balm_day)).unwrap();
    h.store.record_task_result(id, pain(&e, balm_day, 6.5, false)).unwrap();

    let csv = h.store.export_csv("back-pain", ExportOptions::default()).unwrap();
    assert_eq!(csv.matches("\r\n").count(), 4);
    assert!(!csv.contains(user.user_id.as_str()));
    golden("three_results.csv", &csv);
}

#[test]
fn scripted_participants_export_is_stable() {
    let build = || {
        let h = Harness::new();
        h.publish_back_pain();
        for (user_n, days) in [(0, 28u32), (1, 12), (2, 3)] {
            let user = h.store.create_user(true).unwrap();
            let mut req = request(user.user_id.as_str(), &["willow_bark_tea", "arnica_balm"]);
            req.seed = Some(100 + user_n);
            let e = h.store.enroll(req).unwrap();
            walk(&h, &e, 1..=days);
            h.clock.set(start());
        }
        h
    };
    let first = build();
    let csv = first.store.export_csv("back-pain", ExportOptions::default()).unwrap();
    assert_eq!(csv, first.store.export_csv("back-pain", ExportOptions::default()).unwrap());
    assert_eq!(csv, build().store.export_csv("back-pain", ExportOptions::default()).unwrap());
    // 28 + 12 + 3 diary entries with two columns each, plus balm checkmarks
    let rows = csv.lines().count() - 1;
    assert!(rows > 2 * 43);

    let mut reader = csv::Reader::from_reader(csv.as_bytes());
    let records: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    let keys: Vec<(String, u32, String)> = records
        .iter()
        .map(|r| (r[0].to_owned(), r[2].parse().unwrap(), r[5].to_owned()))
        .collect();
    assert!(keys.windows(2).all(|w| w[0] <= w[1]));
    for r in &records {
        let filled = (7..10).filter(|i| !r[*i].is_empty()).count();
        assert_eq!(filled, 1);
        assert!(["willow_bark_tea", "arnica_balm"].contains(&&r[4]));
    }
    golden("scripted_participants.csv", &csv);
}

#[test]
fn pseudonym_column_is_opt_in() {
    let h = Harness::new();
    h.publish_back_pain();
    let user = h.store.create_user(true).unwrap();
    let e = h.enroll(user.user_id.as_str());
    walk(&h, &e, 1..=1);
    let plain = h.store.export_csv("back-pain", ExportOptions::default()).unwrap();
    assert!(!plain.contains(user.user_id.as_str()));
    let with = h
        .store
        .export_csv("back-pain", ExportOptions { include_user_pseudonym: true })
        .unwrap();
    assert!(with.starts_with("participant_id,user_pseudonym,enrollment_day,"));
    assert!(with.lines().skip(1).all(|l| l.split(',').nth(1) == Some(user.user_id.as_str())));
}

#[test]
fn awkward_column_names_are_quoted() {
    let h = Harness::new();
    let mut study = fixtures::back_pain();
    study.details.results[0].column_name = "pain, \"evening\"".into();
    let rev = h.store.save_draft(study.metadata, study.details, 0).unwrap();
    h.store.publish("back-pain", rev).unwrap();
    let csv = h.store.export_csv("back-pain", ExportOptions::default()).unwrap();
    assert!(csv.contains(",\"pain, \"\"evening\"\"\",painkiller_taken,"));
    let header = csv::Reader::from_reader(csv.as_bytes()).headers().unwrap().clone();
    assert_eq!(&header[7], "pain, \"evening\"");
}

#[test]
fn file_store_reopens_with_identical_state() {
    let dir = tempfile::tempdir().unwrap();
    let clock = Arc::new(ManualClock::new(start()));
    let open = |seed| {
        TrialStore::new(
            Arc::new(FileBackend::open_with(dir.path(), false).unwrap()),
            clock.clone(),
            Arc::new(SeededEntropy::new(seed)),
        )
    };
    let (csv, report, eid) = {
        let store = open(1);
        let study = fixtures::back_pain();
        store.save_draft(study.metadata, study.details, 0).unwrap();
        store.publish("back-pain", 1).unwrap();
        let user = store.create_user(true).unwrap();
        let e = store.enroll(request(user.user_id.as_str(), &["willow_bark_tea", "warming_pad"])).unwrap();
        let id = e.enrollment_id.to_string();
        for task in intervention_tasks(&e, 1) {
            store.record_task_result(&id, checkmark(&task, 1)).unwrap();
        }
        store.record_task_result(&id, pain(&e, 1, 3.0, true)).unwrap();
        (
            store.export_csv("back-pain", ExportOptions::default()).unwrap(),
            store.report(&id, true).unwrap(),
            id,
        )
    };
    let store = open(2);
    assert_eq!(store.export_csv("back-pain", ExportOptions::default()).unwrap(), csv);
    assert_eq!(store.report(&eid, true).unwrap(), report);
    assert_eq!(store.get_enrollment(&eid).unwrap().results.len(), 3);
}

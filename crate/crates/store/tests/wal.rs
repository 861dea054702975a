use std::fs::{self, OpenOptions};
use std::io::Write;
use std::sync::Arc;
use std::thread;

use studyu_store::{FileBackend, KvBackend, WriteOp};

fn log_len(dir: &std::path::Path) -> u64 {
    fs::metadata(dir.join("wal.log")).unwrap().len()
}

#[test]
fn committed_batches_survive_reopen() {
    let dir = tempfile::tempdir().unwrap();
    {
        let db = FileBackend::open(dir.path()).unwrap();
        db.commit(vec![WriteOp::put("a/1", "one"), WriteOp::put("a/2", "two")]).unwrap();
        db.commit(vec![WriteOp::delete("a/1"), WriteOp::put("b", "{\"x\":1}")]).unwrap();
        db.commit(vec![]).unwrap();
    }
    let db = FileBackend::open(dir.path()).unwrap();
    assert_eq!(db.get("a/1").unwrap(), None);
    assert_eq!(db.get("a/2").unwrap().as_deref(), Some("two"));
    assert_eq!(
        db.scan_prefix("").unwrap(),
        [("a/2".to_owned(), "two".to_owned()), ("b".to_owned(), "{\"x\":1}".to_owned())]
    );
}

#[test]
fn torn_tail_is_discarded() {
    let dir = tempfile::tempdir().unwrap();
    {
        let db = FileBackend::open(dir.path()).unwrap();
        db.commit(vec![WriteOp::put("kept", "1")]).unwrap();
    }
    let valid = log_len(dir.path());
    // half a frame: a header promising 100 bytes followed by 3
    let mut f = OpenOptions::new().append(true).open(dir.path().join("wal.log")).unwrap();
    f.write_all(&100u32.to_le_bytes()).unwrap();
    f.write_all(&0u32.to_le_bytes()).unwrap();
    f.write_all(b"[{\"").unwrap();
    drop(f);

    let db = FileBackend::open(dir.path()).unwrap();
    assert_eq!(db.get("kept").unwrap().as_deref(), Some("1"));
    assert_eq!(log_len(dir.path()), valid);
    db.commit(vec![WriteOp::put("after", "2")]).unwrap();
    drop(db);
    let db = FileBackend::open(dir.path()).unwrap();
    assert_eq!(db.scan_prefix("").unwrap().len(), 2);
}

#[test]
fn corrupt_frame_ends_replay() {
    let dir = tempfile::tempdir().unwrap();
    {
        let db = FileBackend::open_with(dir.path(), false).unwrap();
        db.commit(vec![WriteOp::put("first", "1")]).unwrap();
        db.commit(vec![WriteOp::put("second", "2")]).unwrap();
    }
    // flip one payload byte of the last frame
    let path = dir.path().join("wal.log");
    let mut bytes = fs::read(&path).unwrap();
    let last = bytes.len() - 2;
    bytes[last] ^= 0x20;
    fs::write(&path, bytes).unwrap();

    let db = FileBackend::open(dir.path()).unwrap();
    assert_eq!(db.get("first").unwrap().as_deref(), Some("1"));
    assert_eq!(db.get("second").unwrap(), None);
}

#[test]
fn every_prefix_of_the_log_replays_to_a_batch_boundary() {
    let dir = tempfile::tempdir().unwrap();
    let batches: Vec<Vec<WriteOp>> = (0..6)
        .map(|i| vec![WriteOp::put(format!("k{i}"), format!("v{i}")), WriteOp::put("count", i.to_string())])
        .collect();
    {
        // reopen first so the log starts empty and holds exactly these frames
        let db = FileBackend::open_with(dir.path(), false).unwrap();
        for b in &batches {
            db.commit(b.clone()).unwrap();
        }
    }
    let full = fs::read(dir.path().join("wal.log")).unwrap();
    for cut in 0..=full.len() {
        let trial = tempfile::tempdir().unwrap();
        fs::write(trial.path().join("wal.log"), &full[..cut]).unwrap();
        let db = FileBackend::open_with(trial.path(), false).unwrap();
        let n = db.scan_prefix("k").unwrap().len();
        let count = db.get("count").unwrap();
        match n {
            0 => assert_eq!(count, None),
            n => assert_eq!(count, Some((n - 1).to_string()), "cut at {cut}"),
        }
    }
}

#[test]
fn reopen_compacts_the_log() {
    let dir = tempfile::tempdir().unwrap();
    {
        let db = FileBackend::open_with(dir.path(), false).unwrap();
        for i in 0..200 {
            db.commit(vec![WriteOp::put("hot", i.to_string())]).unwrap();
        }
    }
    let before = log_len(dir.path());
    let db = FileBackend::open(dir.path()).unwrap();
    assert!(log_len(dir.path()) < before / 20);
    assert_eq!(db.get("hot").unwrap().as_deref(), Some("199"));
    assert!(!dir.path().join("wal.compact").exists());
}

#[test]
fn concurrent_commits_are_all_durable() {
    let dir = tempfile::tempdir().unwrap();
    {
        let db = Arc::new(FileBackend::open_with(dir.path(), false).unwrap());
        let handles: Vec<_> = (0..8)
            .map(|t| {
                let db = db.clone();
                thread::spawn(move || {
                    for i in 0..50 {
                        db.commit(vec![WriteOp::put(format!("t{t}/{i:03}"), format!("{t}-{i}"))]).unwrap();
                    }
                })
            })
            .collect();
        for h in handles {
            h.join().unwrap();
        }
    }
    let db = FileBackend::open(dir.path()).unwrap();
    assert_eq!(db.scan_prefix("t").unwrap().len(), 400);
    assert_eq!(db.get("t3/049").unwrap().as_deref(), Some("3-49"));
}

use refmon_core::model::DEFAULT_BUDGET;
use refmon_core::sandbox::{ErrorCode, Monitor, QueryResult};
use refmon_core::value::Value;
use refmon_core::wiring::parse_wirings;

const NOTES: &str = "
TABLE notes ( nid KEY, owner OWNER, body TEXT, audience TINYTEXT )
OUTPUT TABLE shared ( SELECT nid AS key, owner, body, audience FROM notes INVARIANT is(owner, @uid) OR is(audience, @uid) )
";
const INBOX: &str = "
INPUT TABLE incoming ( key KEY, owner OWNER, body TEXT )
TABLE pins ( pid KEY, owner OWNER, note TINYTEXT, FOREIGN KEY (note) REFERENCES incoming(key) )
";
const WIRE: &str = "WIRE Notes.shared -> Inbox.incoming\n key <- key\n owner <- owner\n body <- body\n";

fn populated(m: &Monitor) {
    m.integrate("Notes", NOTES, false).unwrap();
    m.integrate("Inbox", INBOX, false).unwrap();
    m.wire(&parse_wirings(WIRE).unwrap()[0]).unwrap();
    for (owner, body, audience) in [("ann", "to ben", "ben"), ("ben", "to ann", "ann"), ("cat", "private", "cat")] {
        let s = m.open_session("Notes", owner).unwrap();
        m.execute(&s, &format!("INSERT INTO notes (owner, body, audience) VALUES ('{owner}', '{body}', '{audience}')")).unwrap();
    }
    let s = m.open_session("Inbox", "ben").unwrap();
    m.execute(&s, "INSERT INTO pins (owner, note) VALUES ('ben', 'Notes:1')").unwrap();
}

fn rows(m: &Monitor, funit: &str, uid: &str, sql: &str) -> Vec<Vec<Value>> {
    let s = m.open_session(funit, uid).unwrap();
    match m.execute(&s, sql).unwrap().result {
        QueryResult::Rows { rows, .. } => rows,
        r => panic!("{r:?}"),
    }
}

#[test]
fn projected_store_is_sound_for_every_request() {
    let m = Monitor::new();
    populated(&m);
    let u = m.universe(&["ann", "ben", "cat"]).unwrap();
    u.check_invariants().unwrap();
    let requests = u.enumerate_requests(2);
    let report = u.soundness_check(&requests, DEFAULT_BUDGET).unwrap();
    assert!(report.is_sound(), "{:?}", report.violations);
    assert!(report.permitted > 0);
}

#[test]
fn reopened_store_keeps_state_and_identity() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("store.json");
    let before = {
        let m = Monitor::open(&path).unwrap();
        populated(&m);
        rows(&m, "Inbox", "ben", "SELECT key, body FROM incoming")
    };
    // ben receives ann's note addressed to him and his own outgoing one.
    assert_eq!(before, vec![vec![Value::text("Notes:1"), Value::text("to ben")], vec![Value::text("Notes:2"), Value::text("to ann")]]);

    let m = Monitor::open(&path).unwrap();
    assert_eq!(rows(&m, "Inbox", "ben", "SELECT key, body FROM incoming"), before);
    assert_eq!(m.wirings().len(), 1);
    assert_eq!(m.graph().export(), "Notes -> Inbox [sh]\n");

    // The pin depends on ann's note reaching ben; revoking it cascades.
    let s = m.open_session("Notes", "ann").unwrap();
    let out = m.execute(&s, "UPDATE notes SET audience = 'cat' WHERE owner = 'ann'").unwrap();
    assert_eq!(out.rebuild, ["Notes", "Inbox"]);
    assert_eq!(out.cascaded.len(), 1);
    assert!(rows(&m, "Inbox", "ben", "SELECT * FROM pins").is_empty());

    let reopened = Monitor::open(&path).unwrap();
    assert!(rows(&reopened, "Inbox", "ben", "SELECT * FROM pins").is_empty());
    assert_eq!(reopened.audit_log().len(), 1);
    let same_key = m.open_session("Inbox", "ben").unwrap();
    assert!(reopened.verify_uid(&same_key, "Inbox"));
    let other = Monitor::new();
    populated(&other);
    let foreign = other.open_session("Inbox", "ben").unwrap();
    let e = reopened.execute(&foreign, "SELECT * FROM pins").unwrap_err();
    assert_eq!(e.code, ErrorCode::Identity);
}

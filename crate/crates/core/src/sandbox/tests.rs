use std::collections::BTreeSet;

use super::*;
use crate::wiring::parse_wirings;
use proptest::prelude::*;

const GROUPS: &str = "
TABLE groups ( gid KEY, name TINYTEXT, owner OWNER, public INT )
OUTPUT TABLE all_groups (
  SELECT name, gid AS key, owner FROM groups
  INVARIANT ALL )
";

const MESSAGING: &str = "
TABLE conversations ( msg_id KEY, msg TEXT, uid_from OWNER, uid_recipient TINYTEXT )
OUTPUT TABLE private_msgs (
  SELECT    msg_id AS key,  msg,  uid_from AS owner,  uid_recipient AS to
  FROM      conversations
  INVARIANT is(owner,@uid) OR is(to,@uid) )
";

const LIVESEARCH: &str = "
INPUT TABLE data ( text  TEXT
                   type  VARCHAR(20)
                   key   KEY
                   owner OWNER )
";

const WIRINGS: &str = "
WIRE Groups.all_groups -> LiveSearch.data
  key <- key
  text <- name
  type <- 'Group'
  owner <- owner
WIRE Messaging.private_msgs -> LiveSearch.data
  key <- key
  text <- msg
  type <- 'Message'
  owner <- owner
";

fn run(m: &Monitor, funit: &str, uid: &str, sql: &str) -> Result<Outcome, EngineError> {
    let s = m.open_session(funit, uid)?;
    m.execute(&s, sql)
}

fn rows(m: &Monitor, funit: &str, uid: &str, sql: &str) -> Vec<Vec<Value>> {
    match run(m, funit, uid, sql).unwrap().result {
        QueryResult::Rows { rows, .. } => rows,
        other => panic!("{other:?}"),
    }
}

fn code(r: Result<Outcome, EngineError>) -> ErrorCode {
    r.expect_err("statement should fail").code
}

fn t(s: &str) -> Value {
    Value::text(s)
}

fn demo() -> Monitor {
    let m = Monitor::new();
    m.integrate("Groups", GROUPS, false).unwrap();
    m.integrate("Messaging", MESSAGING, false).unwrap();
    m.integrate("LiveSearch", LIVESEARCH, false).unwrap();
    for w in parse_wirings(WIRINGS).unwrap() {
        m.wire(&w).unwrap();
    }
    for (uid, name) in [("alice", "Hiking"), ("bob", "Book club"), ("dave", "Photography")] {
        run(&m, "Groups", uid, &format!("INSERT INTO groups (name, owner, public) VALUES ('{name}', '{uid}', 1)")).unwrap();
    }
    for (from, to, msg) in [("alice", "bob", "Hi Bob"), ("bob", "alice", "Hey Alice"), ("bob", "dave", "Lunch tomorrow?"), ("dave", "bob", "Sure")] {
        run(&m, "Messaging", from, &format!("INSERT INTO conversations (msg, uid_from, uid_recipient) VALUES ('{msg}', '{from}', '{to}')"))
            .unwrap();
    }
    m
}

fn sorted(mut v: Vec<Vec<Value>>) -> Vec<Vec<Value>> {
    v.sort();
    v
}

#[test]
fn insert_then_select() {
    let m = demo();
    let out = run(&m, "Groups", "alice", "INSERT INTO groups(name,owner,public) VALUES('Chess','alice',1)").unwrap();
    assert_eq!(out.result, QueryResult::Affected(1));
    assert_eq!(rows(&m, "Groups", "bob", "SELECT gid, owner FROM groups WHERE name = 'Chess'"), [[t("4"), t("alice")]]);
    let data = rows(&m, "LiveSearch", "carol", "SELECT text, type FROM data WHERE type = 'Group'");
    assert!(data.contains(&vec![t("Chess"), t("Group")]));
}

#[test]
fn livesearch_scenario() {
    let m = demo();
    let q = "SELECT text, type FROM data";
    let groups = [("Hiking"), ("Book club"), ("Photography")].map(|g| vec![t(g), t("Group")]);
    let mut alice: Vec<Vec<Value>> = groups.to_vec();
    alice.push(vec![t("Hi Bob"), t("Message")]);
    alice.push(vec![t("Hey Alice"), t("Message")]);
    assert_eq!(sorted(rows(&m, "LiveSearch", "alice", q)), sorted(alice));
    assert_eq!(sorted(rows(&m, "LiveSearch", "carol", q)), sorted(groups.to_vec()));

    let search = "SELECT text AS result, type AS info FROM data WHERE 'hi'<>'' AND LOWER(text) LIKE LOWER(CONCAT('%','hi','%')) ORDER BY result";
    assert_eq!(rows(&m, "LiveSearch", "alice", search), [[t("Hi Bob"), t("Message")], [t("Hiking"), t("Group")]]);
}

#[test]
fn input_view_visibility_and_provenance() {
    let m = demo();
    let keys = |uid: &str| -> BTreeSet<(String, String)> {
        m.input_view("LiveSearch", "data", uid)
            .unwrap()
            .into_iter()
            .map(|r| (r.src, r.values[2].render().unwrap()))
            .collect()
    };
    let bob = keys("bob");
    assert!(bob.contains(&("Messaging".into(), "Messaging:1".into())));
    assert!(!keys("carol").iter().any(|(s, _)| s == "Messaging"));
    for uid in ["alice", "carol", "nobody"] {
        let g: BTreeSet<String> = keys(uid).into_iter().filter(|(s, _)| s == "Groups").map(|(_, k)| k).collect();
        assert_eq!(g, BTreeSet::from(["Groups:1".into(), "Groups:2".into(), "Groups:3".into()]));
    }
}

#[test]
fn owner_change_rejected_atomically() {
    let m = demo();
    let before = m.snapshot();
    assert_eq!(code(run(&m, "Messaging", "alice", "UPDATE conversations SET uid_from='bob'")), ErrorCode::Owner);
    assert_eq!(m.snapshot(), before);
    assert_eq!(code(run(&m, "Groups", "alice", "DELETE FROM groups")), ErrorCode::Owner);
    assert_eq!(m.snapshot(), before);
    assert_eq!(code(run(&m, "Groups", "alice", "INSERT INTO groups (name, owner) VALUES ('A','alice'), ('B','bob')")), ErrorCode::Owner);
    assert_eq!(m.snapshot(), before);
    let ok = run(&m, "Groups", "alice", "DELETE FROM groups WHERE owner = 'alice'").unwrap();
    assert_eq!(ok.result, QueryResult::Affected(1));
}

#[test]
fn namespace_boundaries() {
    let m = demo();
    assert_eq!(code(run(&m, "LiveSearch", "alice", "SELECT * FROM conversations")), ErrorCode::UnknownTable);
    assert_eq!(code(run(&m, "Groups", "alice", "SELECT * FROM f_Messaging__conversations")), ErrorCode::UnknownTable);
    assert_eq!(code(run(&m, "LiveSearch", "alice", "UPDATE data SET text = 'x'")), ErrorCode::Permission);
    assert_eq!(code(run(&m, "Groups", "alice", "SELECT * FROM all_groups")), ErrorCode::Permission);
    assert_eq!(
        code(run(&m, "Groups", "alice", "UPDATE groups SET name = (SELECT msg FROM conversations LIMIT 1) WHERE owner = 'alice'")),
        ErrorCode::UnknownTable
    );
    assert_eq!(code(run(&m, "Groups", "alice", "SELEKT 1")), ErrorCode::Syntax);
    assert_eq!(code(run(&m, "Groups", "alice", "DROP TABLE groups")), ErrorCode::Unsupported);
    assert_eq!(code(run(&m, "Groups", "alice", "SELECT nope FROM groups")), ErrorCode::Syntax);
}

#[test]
fn identity_is_bound() {
    let m = demo();
    let s = m.open_session("Groups", "alice").unwrap();
    assert!(m.verify_uid(&s, "Groups"));
    assert!(!m.verify_uid(&s, "Messaging"));
    let forged = s.with_uid("bob");
    assert_eq!(code(m.execute(&forged, "SELECT * FROM groups")), ErrorCode::Identity);
    let moved = Session::from_parts("Messaging", "alice", s.uid_h());
    assert_eq!(code(m.execute(&moved, "SELECT * FROM conversations")), ErrorCode::Identity);
    assert_eq!(m.open_session("Nowhere", "alice").unwrap_err().code, ErrorCode::Identity);
    assert_eq!(m.open_session("Groups", "").unwrap_err().code, ErrorCode::Identity);
    assert_eq!(m.open_session("Groups", "a\u{1f}b").unwrap_err().code, ErrorCode::Identity);
    assert_eq!(
        m.guard_owner(&forged, "Groups", Op::Ins, None, Some(&t("bob"))).unwrap_err().code,
        ErrorCode::Identity
    );
}

#[test]
fn constraints() {
    let m = demo();
    let before = m.snapshot();
    assert_eq!(code(run(&m, "Groups", "alice", "INSERT INTO groups (gid, name, owner) VALUES ('1', 'Dup', 'alice')")), ErrorCode::Constraint);
    assert_eq!(code(run(&m, "Groups", "alice", "INSERT INTO groups (name, owner, public) VALUES ('X', 'alice', 'yes')")), ErrorCode::Constraint);
    assert_eq!(code(run(&m, "Groups", "alice", "UPDATE groups SET gid = '2' WHERE owner = 'alice'")), ErrorCode::Constraint);
    assert_eq!(code(run(&m, "Groups", "alice", "INSERT INTO groups (name) VALUES ('X', 'Y')")), ErrorCode::Syntax);
    assert_eq!(code(run(&m, "Groups", "alice", "SELECT (SELECT name FROM groups) FROM groups")), ErrorCode::Eval);
    assert_eq!(m.snapshot(), before);
    let out = run(&m, "Groups", "alice", "INSERT INTO groups VALUES ('g7', 'Seven', 'alice', 0), (NULL, 'Next', 'alice', 0)").unwrap();
    assert_eq!(out.result, QueryResult::Affected(2));
    assert_eq!(rows(&m, "Groups", "alice", "SELECT gid FROM groups WHERE name = 'Next'"), [[t("4")]]);
}

#[test]
fn select_features() {
    let m = demo();
    assert_eq!(rows(&m, "Groups", "x", "SELECT COUNT(*) FROM groups"), [[Value::Int(3)]]);
    assert_eq!(rows(&m, "Groups", "x", "SELECT COUNT(*) FROM groups WHERE owner = 'nobody'"), [[Value::Int(0)]]);
    assert_eq!(
        rows(&m, "Groups", "x", "SELECT name FROM groups ORDER BY name DESC LIMIT 2"),
        [[t("Photography")], [t("Hiking")]]
    );
    assert_eq!(
        rows(&m, "Messaging", "x", "SELECT a.msg, b.msg FROM conversations a JOIN conversations b ON a.uid_from = b.uid_recipient AND a.uid_recipient = b.uid_from WHERE a.uid_from = 'alice'"),
        [[t("Hi Bob"), t("Hey Alice")]]
    );
    assert_eq!(
        rows(&m, "Messaging", "x", "SELECT msg FROM conversations WHERE uid_from IN (SELECT uid_recipient FROM conversations WHERE uid_from = 'dave') ORDER BY 1"),
        [[t("Hey Alice")], [t("Lunch tomorrow?")]]
    );
    assert_eq!(rows(&m, "Groups", "alice", "SELECT @uid, @other"), [[t("alice"), Value::Null]]);
    assert_eq!(code(run(&m, "Groups", "x", "SELECT gid FROM groups a, groups b")), ErrorCode::Syntax);
}

#[test]
fn modification_trace() {
    let m = demo();
    let out = run(&m, "Groups", "bob", "UPDATE groups SET name = (SELECT name FROM groups WHERE gid = '1') WHERE owner = 'bob'").unwrap();
    assert_eq!(out.trace.len(), 2);
    assert_eq!(out.trace[0].op, Op::Upd);
    assert_eq!(out.trace[0].selection, Selection::Items(BTreeSet::from(["Groups.groups#2".to_owned()])));
    assert_eq!(out.trace[1].op, Op::Sel);
    let sel = run(&m, "LiveSearch", "bob", "SELECT * FROM data").unwrap();
    assert_eq!(sel.trace[0].scope_tables, BTreeSet::from(["LiveSearch.data@bob".to_owned()]));
}

#[test]
fn replayed_requests_are_sound() {
    let m = demo();
    let users = ["alice", "bob", "carol", "dave"];
    let statements = [
        ("LiveSearch", "alice", "SELECT text FROM data"),
        ("Groups", "carol", "SELECT * FROM groups"),
        ("Groups", "carol", "INSERT INTO groups (name, owner) VALUES ('Carol club', 'carol')"),
        ("Messaging", "bob", "UPDATE conversations SET msg = 'edited' WHERE uid_from = 'bob'"),
        ("Messaging", "dave", "DELETE FROM conversations WHERE uid_from = 'dave'"),
        ("Groups", "dave", "UPDATE groups SET name = (SELECT name FROM groups WHERE gid = '1') WHERE owner = 'dave'"),
    ];
    for (f, u, sql) in statements {
        let universe = m.universe(&users).unwrap();
        universe.check_invariants().unwrap();
        let out = run(&m, f, u, sql).unwrap();
        for r in &out.trace {
            assert!(universe.sb(r).unwrap(), "{r}");
            assert!(universe.req_valid(r).unwrap(), "{r}");
        }
    }
}

#[test]
fn corrupted_provenance_is_detected() {
    let m = demo();
    assert!(m.corrupt_src("Groups", "groups", 1, "Messaging"));
    let universe = m.universe(&["alice"]).unwrap();
    let r = Request::new(Op::Sel, ["Groups.groups"], Selection::All, "alice", "Groups");
    assert!(universe.sb(&r).unwrap());
    assert!(!universe.req_valid(&r).unwrap());
}

#[test]
fn rebuild_order_after_change() {
    let m = demo();
    for n in ["SocialApp", "LiveSearchResults"] {
        m.add_node(n).unwrap();
    }
    for (p, c) in [("SocialApp", "Groups"), ("SocialApp", "Messaging"), ("SocialApp", "LiveSearch"), ("LiveSearch", "LiveSearchResults")] {
        m.add_activation(p, c).unwrap();
    }
    let out = run(&m, "Groups", "alice", "INSERT INTO groups (name, owner) VALUES ('Chess', 'alice')").unwrap();
    assert_eq!(out.rebuild, ["Groups", "LiveSearch", "LiveSearchResults"]);
    assert!(run(&m, "Groups", "alice", "SELECT * FROM groups").unwrap().rebuild.is_empty());
    assert!(matches!(m.add_activation("LiveSearchResults", "SocialApp"), Err(MonitorError::Graph(_))));
}

const GALLERY: &str = "
TABLE images ( iid KEY, owner OWNER, title TEXT )
TABLE comments ( cid KEY, owner OWNER, image TINYTEXT, body TEXT,
                 FOREIGN KEY (image) REFERENCES images(iid) )
TABLE votes ( vid KEY, owner OWNER, comment TINYTEXT,
              FOREIGN KEY (comment) REFERENCES comments(cid) )
";

fn count(m: &Monitor, funit: &str, uid: &str, table: &str) -> i64 {
    rows(m, funit, uid, &format!("SELECT COUNT(*) FROM {table}"))[0][0].as_int().unwrap()
}

#[test]
fn cascades_remove_transitive_children() {
    let m = Monitor::new();
    m.integrate("Gallery", GALLERY, false).unwrap();
    run(&m, "Gallery", "alice", "INSERT INTO images (owner, title) VALUES ('alice', 'Sunset'), ('alice', 'Dawn')").unwrap();
    run(&m, "Gallery", "bob", "INSERT INTO comments (owner, image, body) VALUES ('bob', '1', 'nice'), ('bob', '2', 'ok')").unwrap();
    run(&m, "Gallery", "carol", "INSERT INTO comments (owner, image, body) VALUES ('carol', '1', 'agreed')").unwrap();
    run(&m, "Gallery", "dave", "INSERT INTO votes (owner, comment) VALUES ('dave', '1'), ('dave', '3'), ('dave', '2')").unwrap();

    let before = m.snapshot();
    assert_eq!(code(run(&m, "Gallery", "bob", "INSERT INTO comments (owner, image) VALUES ('bob', '9')")), ErrorCode::Constraint);
    assert_eq!(code(run(&m, "Gallery", "dave", "UPDATE votes SET comment = '7' WHERE vid = '1'")), ErrorCode::Constraint);
    assert_eq!(m.snapshot(), before);

    let out = run(&m, "Gallery", "alice", "DELETE FROM images WHERE iid = '1'").unwrap();
    assert_eq!(out.result, QueryResult::Affected(1));
    let gone: BTreeSet<(String, u64)> = out.cascaded.iter().map(|a| (a.table.clone(), a.rowid)).collect();
    let expect: BTreeSet<(String, u64)> =
        [("f_Gallery__comments", 1), ("f_Gallery__comments", 3), ("f_Gallery__votes", 1), ("f_Gallery__votes", 2)]
            .into_iter()
            .map(|(a, b)| (a.to_owned(), b))
            .collect();
    assert_eq!(gone, expect);
    assert!(out.cascaded.iter().all(|a| a.actor_uid == "alice" && a.reason.starts_with("cascade: ")));
    assert_eq!(m.audit_log().len(), 4);
    assert_eq!(rows(&m, "Gallery", "x", "SELECT cid FROM comments"), [[t("2")]]);
    assert_eq!(rows(&m, "Gallery", "x", "SELECT vid FROM votes"), [[t("3")]]);

    let out = run(&m, "Gallery", "alice", "DELETE FROM images WHERE iid = '2'").unwrap();
    assert_eq!(out.cascaded.len(), 2);
    for t in ["images", "comments", "votes"] {
        assert_eq!(count(&m, "Gallery", "x", t), 0);
    }

    run(&m, "Gallery", "alice", "INSERT INTO images (owner) VALUES ('alice')").unwrap();
    let out = run(&m, "Gallery", "alice", "DELETE FROM images").unwrap();
    assert!(out.cascaded.is_empty());
}

const BOOKMARKS: &str = "
INPUT TABLE groups_in ( key KEY, owner OWNER, title TEXT )
TABLE marks ( mid KEY, owner OWNER, target TINYTEXT,
              FOREIGN KEY (target) REFERENCES groups_in(key) )
";

#[test]
fn references_into_input_tables() {
    let m = demo();
    m.integrate("Bookmarks", BOOKMARKS, false).unwrap();
    let w = parse_wirings("WIRE Groups.all_groups -> Bookmarks.groups_in\n key <- key\n owner <- owner\n title <- name").unwrap();
    m.wire(&w[0]).unwrap();
    run(&m, "Bookmarks", "carol", "INSERT INTO marks (owner, target) VALUES ('carol', 'Groups:2'), ('carol', 'Groups:3')").unwrap();
    assert_eq!(code(run(&m, "Bookmarks", "carol", "INSERT INTO marks (owner, target) VALUES ('carol', 'Groups:9')")), ErrorCode::Constraint);
    let out = run(&m, "Groups", "bob", "DELETE FROM groups WHERE owner = 'bob'").unwrap();
    assert_eq!(out.cascaded.len(), 1);
    assert_eq!(out.cascaded[0].table, "f_Bookmarks__marks");
    assert!(out.rebuild.contains(&"Bookmarks".to_owned()));
    assert_eq!(rows(&m, "Bookmarks", "carol", "SELECT target FROM marks"), [[t("Groups:3")]]);
}

#[test]
fn integration_rules() {
    let m = demo();
    let before = m.snapshot();
    assert!(matches!(m.integrate("Groups", GROUPS, false), Err(MonitorError::Exists(_))));
    assert!(matches!(m.integrate("Bad__name", GROUPS, false), Err(MonitorError::Name(_))));
    let leak = "TABLE t (k KEY, owner OWNER)\nOUTPUT TABLE o = SELECT msg_id AS key, uid_from AS owner FROM conversations";
    let err = m.integrate("Leak", leak, false).unwrap_err();
    assert!(!err.diagnostics().is_empty());
    assert!(matches!(m.integrate("Syntax", "TABLE (", false), Err(MonitorError::Schema(_))));
    let w = WiringSpec::new(
        crate::wiring::Endpoint::new("Groups", "all_groups"),
        crate::wiring::Endpoint::new("LiveSearch", "data"),
        vec![("key", crate::wiring::Mapping::Column("key".into()))],
    );
    assert!(matches!(m.wire(&w), Err(MonitorError::Wiring(_))));
    assert_eq!(m.snapshot(), before);

    let report = m.integrate("Groups", GROUPS, true).unwrap();
    assert_eq!(report.dropped_wirings, 1);
    assert_eq!(report.tables, [("groups".to_owned(), "f_Groups__groups".to_owned())]);
    assert_eq!(report.outputs[0].restriction, "1");
    assert_eq!(count(&m, "Groups", "x", "groups"), 3);
    assert!(rows(&m, "LiveSearch", "alice", "SELECT * FROM data WHERE type = 'Group'").is_empty());
    assert_eq!(m.graph().sharing_edge_set().len(), 1);
}

#[test]
fn same_output_twice_namespaces_keys() {
    let m = demo();
    let mut w = parse_wirings(WIRINGS).unwrap().remove(0);
    w.column_map[2].1 = crate::wiring::Mapping::Constant(t("Club"));
    m.wire(&w).unwrap();
    let keys: Vec<String> = m.input_view("LiveSearch", "data", "carol").unwrap().iter().map(|r| r.values[2].render().unwrap()).collect();
    assert!(keys.contains(&"Groups#1:1".to_owned()));
    assert!(keys.contains(&"Groups#2:1".to_owned()));
    let unique: BTreeSet<&String> = keys.iter().collect();
    assert_eq!(unique.len(), keys.len());
    assert_eq!(m.graph().sharing_edge_set().len(), 2);
}

#[test]
fn persistence_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("store.json");
    {
        let m = Monitor::open(&path).unwrap();
        m.integrate("Groups", GROUPS, false).unwrap();
        run(&m, "Groups", "alice", "INSERT INTO groups (name, owner) VALUES ('Chess', 'alice')").unwrap();
    }
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        assert_eq!(std::fs::metadata(&path).unwrap().permissions().mode() & 0o777, 0o600);
    }
    let m = Monitor::open(&path).unwrap();
    assert_eq!(rows(&m, "Groups", "bob", "SELECT name FROM groups"), [[t("Chess")]]);
    let s = m.open_session("Groups", "alice").unwrap();
    let m2 = Monitor::open(&path).unwrap();
    assert!(m2.verify_uid(&s, "Groups"));
    assert!(!m.snapshot().contains(&m.sk.to_hex()));
    assert!(!format!("{m:?}").contains(&m.sk.to_hex()));
}

// Random statements over the demo ecosystem.
fn statement() -> impl Strategy<Value = (usize, usize, String)> {
    let uid = 0usize..4;
    let val = prop_oneof![Just("'alice'".to_owned()), Just("'bob'".to_owned()), Just("NULL".to_owned()), Just("'x'".to_owned()), Just("1".to_owned())];
    let key = (1u8..8).prop_map(|k| format!("'{k}'"));
    prop_oneof![
        (uid.clone(), val.clone()).prop_map(|(u, o)| (0, u, format!("INSERT INTO groups (name, owner) VALUES ('n', {o})"))),
        (uid.clone(), val.clone(), key.clone()).prop_map(|(u, o, k)| (0, u, format!("UPDATE groups SET owner = {o} WHERE gid = {k}"))),
        (uid.clone(), val.clone(), key.clone()).prop_map(|(u, v, k)| (0, u, format!("UPDATE groups SET name = {v} WHERE gid = {k}"))),
        (uid.clone(), key.clone()).prop_map(|(u, k)| (0, u, format!("DELETE FROM groups WHERE gid = {k}"))),
        (uid.clone(), val.clone()).prop_map(|(u, v)| (0, u, format!("DELETE FROM groups WHERE owner = {v}"))),
        (uid.clone(), val.clone(), val.clone()).prop_map(|(u, a, b)| (1, u, format!("INSERT INTO conversations (msg, uid_from, uid_recipient) VALUES ('m', {a}, {b})"))),
        (uid.clone(), key.clone()).prop_map(|(u, k)| (1, u, format!("UPDATE conversations SET msg = 'e' WHERE msg_id = {k}"))),
        (uid.clone(), key).prop_map(|(u, k)| (1, u, format!("INSERT INTO groups (gid, name, owner) VALUES ({k}, 'k', 'alice')"))),
        uid.clone().prop_map(|u| (2, u, "SELECT * FROM data".to_owned())),
        uid.prop_map(|u| (2, u, "INSERT INTO data VALUES ('t', 'x', 'k', 'alice')".to_owned())),
    ]
}

const USERS: [&str; 4] = ["alice", "bob", "carol", "dave"];
const FUNITS: [&str; 3] = ["Groups", "Messaging", "LiveSearch"];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn statements_are_atomic_and_keep_owners(stmts in prop::collection::vec(statement(), 1..12)) {
        let m = demo();
        for (f, u, sql) in stmts {
            let (funit, uid) = (FUNITS[f], USERS[u]);
            let before = m.snapshot();
            let universe = m.universe(&USERS).unwrap();
            let existing: BTreeSet<String> = rows(&m, "Groups", uid, "SELECT gid FROM groups").into_iter().map(|r| r[0].render().unwrap()).collect();
            match run(&m, funit, uid, &sql) {
                Err(_) => prop_assert_eq!(m.snapshot(), before),
                Ok(out) => {
                    for r in &out.trace {
                        prop_assert!(universe.sb(r).unwrap(), "{}", r);
                        prop_assert!(universe.req_valid(r).unwrap(), "{}", r);
                    }
                    if sql.starts_with("INSERT INTO groups") {
                        for row in rows(&m, "Groups", uid, "SELECT gid, owner FROM groups") {
                            if !existing.contains(&row[0].render().unwrap()) {
                                prop_assert_eq!(&row[1], &t(uid));
                            }
                        }
                    }
                }
            }
        }
    }

}

fn friends_rows() -> impl Strategy<Value = Vec<(usize, usize)>> {
    prop::collection::vec((0usize..4, 0usize..4), 0..20)
}

const SOCIAL: &str = "
TABLE friends ( fid KEY, owner OWNER, friend TINYTEXT )
TABLE ignores ( iid KEY, owner OWNER, ignored TINYTEXT )
TABLE posts ( pid KEY, owner OWNER, body TEXT )
OUTPUT TABLE mine = SELECT pid AS key, owner, body FROM posts
OUTPUT TABLE everyone ( SELECT pid AS key, owner, body FROM posts INVARIANT ALL )
OUTPUT TABLE social (
  SELECT pid AS key, owner, body FROM posts
  INVARIANT is(owner, @uid) OR (friends(owner, @uid) AND !ignores(owner, @uid)) )
";

const READER: &str = "INPUT TABLE feed ( key KEY, owner OWNER, body TEXT )";

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn restricted_views_match_their_definition(friends in friends_rows(), ignores in friends_rows(), posts in prop::collection::vec(0usize..4, 0..12)) {
        let m = Monitor::new();
        m.integrate("Social", SOCIAL, false).unwrap();
        m.integrate("Reader", READER, false).unwrap();
        m.wire(&parse_wirings("WIRE Social.social -> Reader.feed\n key <- key\n owner <- owner\n body <- body").unwrap()[0]).unwrap();
        for (a, b) in &friends {
            m.raw_insert("Social", "friends", vec![Value::Null, t(USERS[*a]), t(USERS[*b])]).unwrap();
        }
        for (a, b) in &ignores {
            m.raw_insert("Social", "ignores", vec![Value::Null, t(USERS[*a]), t(USERS[*b])]).unwrap();
        }
        for (i, o) in posts.iter().enumerate() {
            m.raw_insert("Social", "posts", vec![t(&i.to_string()), t(USERS[*o]), t("p")]).unwrap();
        }
        let all: Vec<Vec<Value>> = posts.iter().enumerate().map(|(i, o)| vec![t(&i.to_string()), t(USERS[*o]), t("p")]).collect();
        let universe = m.universe(&USERS).unwrap();
        for uid in USERS {
            let everyone = m.output_view("Social", "everyone", uid).unwrap().rows;
            prop_assert_eq!(sorted(everyone), sorted(all.clone()));

            let mine = m.output_view("Social", "mine", uid).unwrap().rows;
            let expect: Vec<Vec<Value>> = all.iter().filter(|r| r[1] == t(uid)).cloned().collect();
            prop_assert_eq!(sorted(mine), sorted(expect));

            let social = sorted(m.output_view("Social", "social", uid).unwrap().rows);
            let has = |set: &[(usize, usize)], a: &str, b: &str| set.iter().any(|(x, y)| USERS[*x] == a && USERS[*y] == b);
            let expect: Vec<Vec<Value>> = all.iter().filter(|r| {
                let owner = r[1].render().unwrap();
                owner == uid || (has(&friends, &owner, uid) && !has(&ignores, &owner, uid))
            }).cloned().collect();
            prop_assert_eq!(&social, &sorted(expect));
            prop_assert!(social.iter().all(|r| all.contains(r)));

            let feed = m.input_view("Reader", "feed", uid).unwrap();
            prop_assert_eq!(feed.len(), social.len());
            for (row, view) in feed.iter().zip(&universe.data[&format!("Reader.feed@{uid}")]) {
                prop_assert_eq!(&row.src, "Social");
                prop_assert_eq!(&view.src, "Social");
                prop_assert!(universe.shares_component("Social", "Reader", view).unwrap());
                prop_assert!(row.values[0].render().unwrap().starts_with("Social:"));
            }
        }
    }

    #[test]
    fn no_reference_dangles(ops in prop::collection::vec((0usize..3, 0usize..4, 1u8..6), 1..30)) {
        let m = Monitor::new();
        m.integrate("Gallery", GALLERY, false).unwrap();
        for (op, u, k) in ops {
            let uid = USERS[u];
            let sql = match op {
                0 => format!("INSERT INTO images (owner) VALUES ('{uid}')"),
                1 => format!("INSERT INTO comments (owner, image) VALUES ('{uid}', '{k}')"),
                _ => format!("DELETE FROM images WHERE iid = '{k}'"),
            };
            let _ = run(&m, "Gallery", uid, &sql);
            let _ = run(&m, "Gallery", uid, &format!("INSERT INTO votes (owner, comment) VALUES ('{uid}', '{k}')"));
            let images: BTreeSet<Value> = rows(&m, "Gallery", "x", "SELECT iid FROM images").into_iter().map(|mut r| r.remove(0)).collect();
            let comments = rows(&m, "Gallery", "x", "SELECT cid, image FROM comments");
            let cids: BTreeSet<Value> = comments.iter().map(|r| r[0].clone()).collect();
            prop_assert!(comments.iter().all(|r| images.contains(&r[1])));
            prop_assert!(rows(&m, "Gallery", "x", "SELECT comment FROM votes").iter().all(|r| cids.contains(&r[0])));
        }
    }
}

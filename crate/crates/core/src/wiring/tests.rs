use super::*;
use crate::schema::{parse_db_file, parse_invariant, InvariantExpr};
use crate::value::Value;

const GROUPS: &str = "
TABLE groups ( gid KEY, name TINYTEXT, owner OWNER, public INT )
OUTPUT TABLE all_groups (
  SELECT name, gid AS key, owner FROM groups
  INVARIANT ALL )
";

const MESSAGING: &str = "
TABLE conversations ( msg_id KEY, msg TEXT, uid_from OWNER, uid_recipient TINYTEXT )
INPUT TABLE friends ( key KEY, owner OWNER, friend TINYTEXT )
TABLE ignores ( iid KEY, owner OWNER, ignored TINYTEXT )
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

fn schemas() -> Schemas {
    [("Groups", GROUPS), ("Messaging", MESSAGING), ("LiveSearch", LIVESEARCH)]
        .into_iter()
        .map(|(n, t)| (n.to_owned(), parse_db_file(n, t).unwrap()))
        .collect()
}

fn graph() -> EcosystemGraph {
    let mut g = EcosystemGraph::new();
    for n in ["Groups", "Messaging", "LiveSearch"] {
        g.add_node(n);
    }
    g
}

const WIRINGS: &str = "
WIRE Groups.all_groups -> LiveSearch.data
  key   <- key
  text  <- name
  type  <- 'Group'
  owner <- owner

# messages, sent and received
WIRE Messaging.private_msgs -> LiveSearch.data
  key   <- key
  text  <- msg
  type  <- 'Message'
  owner <- owner
";

#[test]
fn demo_wirings_check() {
    let ws = parse_wirings(WIRINGS).unwrap();
    assert_eq!(ws.len(), 2);
    assert_eq!(ws[0].source, Endpoint::new("Groups", "all_groups"));
    assert_eq!(ws[0].mapping("type"), Some(&Mapping::Constant(Value::text("Group"))));
    assert_eq!(ws[1].pos.line, 9);
    for w in &ws {
        assert!(check_wiring(w, &schemas(), &graph()).is_empty(), "{w}");
    }
    let again = parse_wirings(&format!("{}{}", ws[0], ws[1])).unwrap();
    let strip = |v: &[WiringSpec]| v.iter().map(|w| (w.source.clone(), w.target.clone(), w.column_map.clone())).collect::<Vec<_>>();
    assert_eq!(strip(&again), strip(&ws));
}

fn messages(pairs: Vec<(&str, Mapping)>) -> WiringSpec {
    WiringSpec::new(Endpoint::new("Messaging", "private_msgs"), Endpoint::new("LiveSearch", "data"), pairs)
}

fn col(c: &str) -> Mapping {
    Mapping::Column(c.to_owned())
}

fn messages_to_data() -> Vec<(&'static str, Mapping)> {
    vec![("key", col("key")), ("text", col("msg")), ("type", Mapping::Constant(Value::text("Message"))), ("owner", col("owner"))]
}

fn messages_with(target: &str, m: Mapping) -> WiringSpec {
    let mut pairs = messages_to_data();
    pairs.iter_mut().find(|(c, _)| *c == target).unwrap().1 = m;
    messages(pairs)
}

fn messages_of(spec: &WiringSpec) -> Vec<String> {
    check_wiring(spec, &schemas(), &graph()).into_iter().map(|d| d.message).collect()
}

#[test]
fn constant_owner_is_rejected() {
    let m = messages_of(&messages_with("owner", Mapping::Constant(Value::text("alice"))));
    assert_eq!(m, ["OWNER column `owner` must map a source column, not a constant"]);
    let m = messages_of(&messages_with("key", Mapping::Constant(Value::Int(1))));
    assert_eq!(m, ["KEY column `key` must map a source column, not a constant"]);
    let m = messages_of(&messages_with("owner", col("to")));
    assert_eq!(m, ["OWNER column `owner` must map the source's `owner`, not `to`"]);
}

#[test]
fn total_single_mapping() {
    let mut pairs = messages_to_data();
    pairs.retain(|(c, _)| *c != "text");
    assert_eq!(messages_of(&messages(pairs)), ["unmapped column `text` of LiveSearch.data"]);

    let mut pairs = messages_to_data();
    pairs.push(("text", col("to")));
    pairs.push(("extra", col("to")));
    assert_eq!(messages_of(&messages(pairs)), ["`extra` is not a column of LiveSearch.data", "`text` mapped 2 times"]);

    assert_eq!(messages_of(&messages_with("text", col("body"))), ["`body` is not a column of Messaging.private_msgs"]);
}

#[test]
fn constant_types_follow_target() {
    assert_eq!(messages_of(&messages_with("type", Mapping::Constant(Value::text("x".repeat(21))))), ["type mismatch for `type`: value exceeds VARCHAR(20)"]);
    assert!(messages_of(&messages_with("type", Mapping::Constant(Value::Int(7)))).is_empty());

    let mut s = schemas();
    s.insert("Stats".into(), parse_db_file("Stats", "INPUT TABLE counts ( key KEY, owner OWNER, n INT )").unwrap());
    let mut g = graph();
    g.add_node("Stats");
    let w = |m: Mapping| {
        WiringSpec::new(Endpoint::new("Messaging", "private_msgs"), Endpoint::new("Stats", "counts"), vec![("key", col("key")), ("owner", col("owner")), ("n", m)])
    };
    let diags = |spec: &WiringSpec| check_wiring(spec, &s, &g).into_iter().map(|d| d.message).collect::<Vec<_>>();
    assert_eq!(diags(&w(col("msg"))), ["type mismatch: `n` is INT but `msg` is TEXT"]);
    assert_eq!(diags(&w(Mapping::Constant(Value::text("many")))), ["type mismatch for `n`: 'many' is not an integer"]);
    assert!(diags(&w(Mapping::Constant(Value::Int(3)))).is_empty());
}

#[test]
fn unknown_endpoints() {
    let mut w = messages(messages_to_data());
    w.source.table = "conversations".into();
    assert_eq!(messages_of(&w), ["`Messaging.conversations` is not an output table"]);
    let mut w = messages(messages_to_data());
    w.target.component = "Nowhere".into();
    assert_eq!(messages_of(&w), ["unknown component `Nowhere`"]);
}

#[test]
fn cycle_is_diagnosed() {
    // LiveSearch activates Messaging; wiring Messaging into LiveSearch would close a loop.
    let mut g = graph();
    g.add_activation("LiveSearch", "Messaging").unwrap();
    let before = g.clone();
    let diags = check_wiring(&messages(messages_to_data()), &schemas(), &g);
    assert_eq!(diags.len(), 1);
    assert!(diags[0].message.contains("cycle"), "{}", diags[0].message);
    assert_eq!(g, before);
}

#[test]
fn restriction_compilation() {
    let s = schemas();
    let msg = &s["Messaging"];
    let proj: Vec<String> = ["key", "msg", "owner", "to"].map(String::from).to_vec();
    let e = compile_restriction(&parse_invariant("is(owner,@uid) OR is(to,@uid)").unwrap(), &proj, msg).unwrap();
    assert_eq!(e.to_string(), "(__row.owner <=> @uid) OR (__row.to <=> @uid)");

    let e = compile_restriction(&parse_invariant("friends(@uid, owner)").unwrap(), &proj, msg).unwrap();
    assert_eq!(e.to_string(), "EXISTS (SELECT * FROM friends AS __pred WHERE (__pred.owner = @uid) AND (__pred.friend = __row.owner))");

    let e = compile_restriction(&parse_invariant("!ignores(owner, @uid)").unwrap(), &proj, msg).unwrap();
    assert_eq!(e.to_string(), "NOT EXISTS (SELECT * FROM ignores AS __pred WHERE (__pred.owner = __row.owner) AND (__pred.ignored = @uid))");

    assert_eq!(compile_restriction(&InvariantExpr::All, &proj, msg).unwrap().to_string(), "1");

    assert_eq!(
        compile_restriction(&parse_invariant("friends(owner)").unwrap(), &proj, msg),
        Err(RestrictionError::Arity { table: "friends".into(), expected: 2, given: 1 })
    );
    assert_eq!(
        compile_restriction(&parse_invariant("groups(owner, to)").unwrap(), &proj, msg),
        Err(RestrictionError::UnknownPredicate("groups".into()))
    );
    assert_eq!(
        compile_restriction(&parse_invariant("is(owner, sender)").unwrap(), &proj, msg),
        Err(RestrictionError::UnknownColumn("sender".into()))
    );
}

#[test]
fn input_view_branches() {
    let ws = parse_wirings(WIRINGS).unwrap();
    let target = Endpoint::new("LiveSearch", "data");
    let refs: Vec<&WiringSpec> = ws.iter().collect();
    let v = compile_input_view(&target, &refs, &schemas()).unwrap();
    assert_eq!(v.key_column, "key");
    assert_eq!(v.owner_column, "owner");
    let srcs: Vec<(&str, &str)> = v.branches.iter().map(|b| (b.source.component.as_str(), b.key_prefix.as_str())).collect();
    assert_eq!(srcs, [("Groups", "Groups"), ("Messaging", "Messaging")]);
    assert_eq!(v.branches[0].query.to_string(), "SELECT name, gid AS key, owner FROM f_Groups__groups AS groups");
    assert_eq!(v.branches[0].restriction.to_string(), "1");
    let cols: Vec<&str> = v.branches[1].columns.iter().map(|(c, _)| c.as_str()).collect();
    assert_eq!(cols, ["text", "type", "key", "owner"]);

    let empty = compile_input_view(&target, &[], &schemas()).unwrap();
    assert!(empty.branches.is_empty());
}

#[test]
fn same_output_wired_twice() {
    let ws = parse_wirings(WIRINGS).unwrap();
    let mut twice = ws[0].clone();
    twice.column_map[2].1 = Mapping::Constant(Value::text("Club"));
    let target = Endpoint::new("LiveSearch", "data");
    let v = compile_input_view(&target, &[&ws[0], &twice], &schemas()).unwrap();
    let prefixes: Vec<&str> = v.branches.iter().map(|b| b.key_prefix.as_str()).collect();
    assert_eq!(prefixes, ["Groups#1", "Groups#2"]);
    let (a, b) = (&v.branches[0], &v.branches[1]);
    assert_eq!(a.query, b.query);
    let differing: Vec<&str> = a.columns.iter().zip(&b.columns).filter(|(x, y)| x != y).map(|(x, _)| x.0.as_str()).collect();
    assert_eq!(differing, ["type"]);
}

#[test]
fn wiring_syntax_errors() {
    assert!(parse_wirings("WIRE Groups.all_groups LiveSearch.data").is_err());
    assert!(parse_wirings("WIRE Groups.all_groups -> LiveSearch.data\n key <- ").is_err());
    assert!(parse_wirings("key <- key").is_err());
    assert_eq!(parse_wirings("# nothing\n").unwrap(), []);
}

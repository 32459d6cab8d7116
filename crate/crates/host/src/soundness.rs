//! Randomised soundness runs. Each trial checks the abstract sandbox
//! decision against request validity on a random universe, then drives a
//! random ecosystem through the monitor and replays every accepted
//! statement against the model projection of the pre-statement store.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use refmon_core::model::{DataItem, ModelError, Op, Request, Selection, Universe};
use refmon_core::sandbox::{Monitor, QueryResult};
use refmon_core::wiring::{Endpoint, Mapping, WiringSpec};

#[derive(Debug, Clone, Copy)]
pub struct Config {
    pub trials: usize,
    pub seed: u64,
    /// Per-trial budget of model requests.
    pub budget: usize,
    /// Corrupt row provenance in every trial's store.
    pub corrupt: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Summary {
    pub trials: usize,
    pub model_requests: usize,
    pub model_permitted: usize,
    pub statements: usize,
    pub accepted: usize,
    pub replayed: usize,
    pub violations: Vec<String>,
}

impl Summary {
    pub fn render(&self) -> String {
        let mut out = String::new();
        for v in self.violations.iter().take(10) {
            out.push_str(&format!("violation: {v}\n"));
        }
        if self.violations.len() > 10 {
            out.push_str(&format!("... {} more\n", self.violations.len() - 10));
        }
        out.push_str(&format!("model: {} requests, {} admitted by sb\n", self.model_requests, self.model_permitted));
        out.push_str(&format!(
            "replay: {} statements, {} accepted, {} requests replayed\n",
            self.statements, self.accepted, self.replayed
        ));
        out.push_str(&format!("{} violations / {} trials\n", self.violations.len(), self.trials));
        out
    }
}

const MAX_USERS: usize = 3;
const MAX_COMPONENTS: usize = 3;
const MAX_TABLES: usize = 4;
const MAX_ROWS: usize = 20;

fn names(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

/// A random well-formed universe: local rows originate in their table's
/// component, input rows come from a component wired into the consumer.
pub fn random_universe(rng: &mut ChaCha8Rng) -> Universe {
    let users = names("u", rng.gen_range(1..=MAX_USERS));
    let comps = names("c", rng.gen_range(1..=MAX_COMPONENTS));
    let mut u = Universe::two_dimensional(users.clone(), comps.clone()).expect("distinct principals");
    let ntables = rng.gen_range(1..=MAX_TABLES);
    let mut homes = Vec::new();
    for i in 0..ntables {
        let c = comps.choose(rng).unwrap().clone();
        let table = format!("t{i}");
        let providers: Vec<&String> = comps.iter().filter(|p| **p != c).collect();
        if rng.gen_bool(0.4) && !providers.is_empty() {
            let user = users.choose(rng).unwrap().clone();
            let p = (*providers.choose(rng).unwrap()).clone();
            u.add_input_table(&c, &user, &table);
            u.add_wiring(&p, &c);
            homes.push((table, p));
        } else {
            u.add_local_table(&c, &table);
            homes.push((table, c));
        }
    }
    for n in 0..rng.gen_range(0..=MAX_ROWS) {
        let (table, src) = homes.choose(rng).unwrap();
        let owner = users.choose(rng).unwrap();
        let item = DataItem::new(&format!("{table}#{n}"), table, owner, src).with_value("v", rng.gen_range(0..3i64));
        u.insert(item).expect("declared table");
    }
    u
}

fn random_request(u: &Universe, rng: &mut ChaCha8Rng) -> Request {
    let tables: Vec<String> = u.tables.iter().cloned().collect();
    let users: Vec<String> = u.users().cloned().collect();
    let comps: Vec<String> = u.components().cloned().collect();
    let op = *Op::ALL.choose(rng).unwrap();
    let k = rng.gen_range(1..=tables.len());
    let scope: BTreeSet<String> = tables.choose_multiple(rng, k).cloned().collect();
    let user = users.choose(rng).unwrap().clone();
    let comp = comps.choose(rng).unwrap().clone();
    let selection = match op {
        Op::Ins => {
            let t: Vec<&String> = scope.iter().collect();
            let items = (0..rng.gen_range(1..=2))
                .map(|i| {
                    let owner = users.choose(rng).unwrap();
                    DataItem::new(&format!("new#{i}"), t.choose(rng).unwrap(), owner, &comp)
                })
                .collect();
            Selection::Pending(items)
        }
        _ if rng.gen_bool(0.5) => Selection::All,
        _ => {
            let ids: Vec<String> = scope.iter().flat_map(|t| u.data[t].iter().map(|d| d.id.clone())).collect();
            let n = rng.gen_range(0..=ids.len().min(3));
            Selection::Items(ids.choose_multiple(rng, n).cloned().collect::<BTreeSet<_>>())
        }
    };
    Request::new(op, scope, selection, &user, &comp)
}

const INVARIANTS: &[&str] = &["", "INVARIANT ALL", "INVARIANT is(@uid, v)", "INVARIANT is(owner, @uid) OR is(v, @uid)"];

struct Ecosystem {
    monitor: Monitor,
    users: Vec<String>,
    /// (component, local tables, has input)
    components: Vec<(String, Vec<String>, bool)>,
}

fn random_ecosystem(rng: &mut ChaCha8Rng) -> Ecosystem {
    let m = Monitor::new();
    let users = names("u", rng.gen_range(1..=MAX_USERS));
    let ncomp = rng.gen_range(1..=MAX_COMPONENTS);
    let mut budget = MAX_TABLES;
    let mut components = Vec::new();
    for i in 0..ncomp {
        let name = format!("C{i}");
        let mut text = String::new();
        let mut locals = Vec::new();
        let nlocal = rng.gen_range(0..=2.min(budget));
        for j in 0..nlocal {
            let t = format!("t{j}");
            text.push_str(&format!("TABLE {t} ( k KEY, owner OWNER, v TINYTEXT )\n"));
            text.push_str(&format!("OUTPUT TABLE o{j} ( SELECT k AS key, owner, v FROM {t} {} )\n", INVARIANTS.choose(rng).unwrap()));
            locals.push(t);
        }
        budget -= nlocal;
        let input = i > 0 && budget > 0 && rng.gen_bool(0.6);
        if input {
            text.push_str("INPUT TABLE inp ( key KEY, owner OWNER, v TINYTEXT )\n");
            budget -= 1;
        }
        m.integrate(&name, &text, false).expect("generated schema is valid");
        components.push((name, locals, input));
    }
    for (i, (target, _, input)) in components.iter().enumerate() {
        if !input {
            continue;
        }
        for (source, locals, _) in &components[..i] {
            for j in 0..locals.len() {
                if rng.gen_bool(0.6) {
                    let v = if rng.gen_bool(0.7) { Mapping::Column("v".into()) } else { Mapping::Constant("c".into()) };
                    let spec = WiringSpec::new(
                        Endpoint::new(source, &format!("o{j}")),
                        Endpoint::new(target, "inp"),
                        vec![("key", Mapping::Column("key".into())), ("owner", Mapping::Column("owner".into())), ("v", v)],
                    );
                    m.wire(&spec).expect("forward wiring keeps the graph acyclic");
                }
            }
        }
    }
    Ecosystem { monitor: m, users, components }
}

fn random_statement(eco: &Ecosystem, rng: &mut ChaCha8Rng) -> (String, String, String) {
    let (funit, locals, input) = eco.components.choose(rng).unwrap();
    let uid = eco.users.choose(rng).unwrap().clone();
    // Occasionally name a table from another component or an unknown one.
    let mut tables: Vec<String> = locals.clone();
    if *input {
        tables.push("inp".into());
    }
    tables.push("missing".into());
    for (c, l, _) in &eco.components {
        if c != funit {
            tables.extend(l.iter().cloned());
        }
    }
    let t = tables.choose(rng).unwrap().clone();
    let who = |rng: &mut ChaCha8Rng| {
        if rng.gen_bool(0.15) {
            "NULL".to_owned()
        } else {
            format!("'{}'", eco.users.choose(rng).unwrap())
        }
    };
    let value = |rng: &mut ChaCha8Rng| format!("'{}'", eco.users.choose(rng).unwrap());
    let key = rng.gen_range(1..=5);
    let sql = match rng.gen_range(0..7) {
        0 | 1 => format!("INSERT INTO {t} (owner, v) VALUES ({}, {})", who(rng), value(rng)),
        2 => format!("UPDATE {t} SET v = {} WHERE k = '{key}'", value(rng)),
        3 => format!("UPDATE {t} SET owner = {} WHERE k = '{key}'", who(rng)),
        4 => format!("DELETE FROM {t} WHERE owner = {}", who(rng)),
        5 => format!("SELECT * FROM {t}"),
        _ => {
            let other = locals.choose(rng).cloned().unwrap_or_else(|| t.clone());
            format!("UPDATE {t} SET v = (SELECT COUNT(*) FROM {other}) WHERE owner = '{uid}'")
        }
    };
    (funit.clone(), uid, sql)
}

fn local_row_count(m: &Monitor, eco: &Ecosystem) -> usize {
    let mut n = 0;
    for (c, locals, _) in &eco.components {
        for t in locals {
            let s = m.open_session(c, &eco.users[0]).unwrap();
            if let Ok(out) = m.execute(&s, &format!("SELECT COUNT(*) FROM {t}")) {
                if let QueryResult::Rows { rows, .. } = out.result {
                    n += rows[0][0].as_int().unwrap_or(0) as usize;
                }
            }
        }
    }
    n
}

fn corrupt(eco: &Ecosystem, rng: &mut ChaCha8Rng) {
    for (c, locals, _) in &eco.components {
        for t in locals {
            for rowid in 1..=MAX_ROWS as u64 {
                if rng.gen_bool(0.5) {
                    eco.monitor.corrupt_src(c, t, rowid, &format!("{c}x"));
                }
            }
        }
    }
}

pub fn run(cfg: Config) -> Result<Summary, ModelError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut s = Summary { trials: cfg.trials, ..Summary::default() };
    for trial in 0..cfg.trials {
        let u = random_universe(&mut rng);
        let requests: Vec<Request> = (0..24).map(|_| random_request(&u, &mut rng)).collect();
        let report = u.soundness_check(&requests, cfg.budget)?;
        s.model_requests += report.evaluated;
        s.model_permitted += report.permitted;
        for v in report.violations {
            s.violations.push(format!("trial {trial}: model: {}", v.request));
        }

        let eco = random_ecosystem(&mut rng);
        let m = &eco.monitor;
        let users = &eco.users;
        for step in 0..8 {
            if cfg.corrupt && step == 4 {
                corrupt(&eco, &mut rng);
            }
            let (funit, uid, sql) = random_statement(&eco, &mut rng);
            if sql.starts_with("INSERT") && local_row_count(m, &eco) >= MAX_ROWS {
                continue;
            }
            s.statements += 1;
            let universe = m.universe(users)?;
            let session = m.open_session(&funit, &uid).expect("integrated component");
            let Ok(out) = m.execute(&session, &sql) else { continue };
            s.accepted += 1;
            for r in &out.trace {
                s.replayed += 1;
                if !universe.sb(r)? {
                    s.violations.push(format!("trial {trial}: `{sql}` as ({uid}, {funit}) admitted but sb rejects {r}"));
                } else if !universe.req_valid(r)? {
                    let bad = universe.invalid_items(r)?;
                    s.violations.push(format!("trial {trial}: `{sql}` as ({uid}, {funit}): {r} invalid on {bad:?}"));
                }
            }
        }
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(trials: usize, seed: u64, corrupt: bool) -> Config {
        Config { trials, seed, budget: refmon_core::model::DEFAULT_BUDGET, corrupt }
    }

    #[test]
    fn seeded_runs_repeat() {
        let a = run(cfg(30, 7, false)).unwrap();
        assert_eq!(a, run(cfg(30, 7, false)).unwrap());
        assert!(a.violations.is_empty(), "{}", a.render());
        assert!(a.accepted > 0 && a.model_permitted > 0);
    }

    #[test]
    fn corruption_is_reported() {
        let s = run(cfg(60, 3, true)).unwrap();
        assert!(!s.violations.is_empty());
    }

    #[test]
    fn tiny_budget_is_exceeded() {
        let e = run(Config { budget: 1, ..cfg(5, 1, false) }).unwrap_err();
        assert!(matches!(e, ModelError::Budget { limit: 1, .. }));
    }
}

//! App bundles. Each f-unit is a directory named after the component that
//! holds `<name>.db` and optionally `seed.sql`; `wirings.cfg` and
//! `activations.cfg` may sit at the bundle root or inside an f-unit.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use refmon_core::graph::EcosystemGraph;
use refmon_core::sandbox::{ErrorCode, IntegrationReport, Monitor, MonitorError};
use refmon_core::schema::SchemaError;
use refmon_core::sql::{parse_query, Expr, Statement};
use refmon_core::value::Value;
use refmon_core::wiring::{parse_wirings, WiringSpec};

#[derive(Debug, Clone)]
pub struct Funit {
    pub name: String,
    pub schema_path: PathBuf,
    pub schema: String,
    pub seed: Option<(PathBuf, String)>,
}

#[derive(Debug, Clone)]
pub struct AppBundle {
    pub root: PathBuf,
    pub funits: Vec<Funit>,
    pub wirings: Vec<(PathBuf, String)>,
    pub activations: Vec<(PathBuf, String)>,
}

/// A failed bundle operation: diagnostics and the process exit status.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BundleError {
    pub status: i32,
    pub lines: Vec<String>,
}

impl BundleError {
    fn new(status: i32, line: impl Into<String>) -> Self {
        Self { status, lines: vec![line.into()] }
    }
}

impl fmt::Display for BundleError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.lines.join("\n"))
    }
}

impl std::error::Error for BundleError {}

fn read(path: &Path) -> Result<String, BundleError> {
    fs::read_to_string(path).map_err(|e| BundleError::new(1, format!("{}: {e}", path.display())))
}

fn optional(path: PathBuf) -> Result<Option<(PathBuf, String)>, BundleError> {
    if path.is_file() {
        let text = read(&path)?;
        Ok(Some((path, text)))
    } else {
        Ok(None)
    }
}

pub fn load(root: &Path) -> Result<AppBundle, BundleError> {
    if !root.is_dir() {
        return Err(BundleError::new(1, format!("{}: not a bundle directory", root.display())));
    }
    let mut dirs: Vec<PathBuf> = fs::read_dir(root)
        .map_err(|e| BundleError::new(1, format!("{}: {e}", root.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();
    let mut bundle = AppBundle { root: root.to_owned(), funits: Vec::new(), wirings: Vec::new(), activations: Vec::new() };
    bundle.wirings.extend(optional(root.join("wirings.cfg"))?);
    bundle.activations.extend(optional(root.join("activations.cfg"))?);
    for dir in dirs {
        let name = dir.file_name().unwrap().to_string_lossy().into_owned();
        let schema_path = dir.join(format!("{name}.db"));
        if !schema_path.is_file() {
            return Err(BundleError::new(1, format!("{}: f-unit directory without {name}.db", dir.display())));
        }
        let schema = read(&schema_path)?;
        let seed = optional(dir.join("seed.sql"))?;
        bundle.wirings.extend(optional(dir.join("wirings.cfg"))?);
        bundle.activations.extend(optional(dir.join("activations.cfg"))?);
        bundle.funits.push(Funit { name, schema_path, schema, seed });
    }
    Ok(bundle)
}

/// Renders a monitor failure against the file it came from.
pub fn render_error(e: &MonitorError, file: &Path) -> BundleError {
    let file = file.display().to_string();
    match e {
        MonitorError::Invalid { diagnostics, .. } | MonitorError::Wiring(diagnostics) => {
            BundleError { status: 1, lines: diagnostics.iter().map(|d| d.render(&file)).collect() }
        }
        MonitorError::Schema(s) => {
            let status = match s {
                SchemaError::Syntax(_) | SchemaError::Unsupported { .. } => 2,
                _ => 1,
            };
            BundleError::new(status, format!("{file}:{s}"))
        }
        MonitorError::Engine(x) => BundleError::new(x.code.exit_status(), format!("{file}: {x}")),
        other => BundleError::new(1, format!("{file}: {other}")),
    }
}

pub fn render_report(r: &IntegrationReport) -> Vec<String> {
    let sig = |cols: &[(String, refmon_core::value::ColumnType)]| {
        cols.iter().map(|(c, t)| format!("{c} {t}")).collect::<Vec<_>>().join(", ")
    };
    let mut out = vec![format!("integrated {}", r.funit)];
    for (t, p) in &r.tables {
        out.push(format!("  local  {t} -> {p}"));
    }
    for o in &r.outputs {
        out.push(format!("  output {} ({}) INVARIANT {}", o.name, sig(&o.signature), o.invariant));
    }
    for (t, cols) in &r.inputs {
        out.push(format!("  input  {t} ({})", sig(cols)));
    }
    if r.dropped_wirings > 0 {
        out.push(format!("  dropped {} wiring(s)", r.dropped_wirings));
    }
    out
}

/// Splits a script into statements at top-level semicolons, skipping
/// `--` and `#` comments.
fn statements(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut chars = text.chars().peekable();
    let mut quoted = false;
    while let Some(c) = chars.next() {
        if quoted {
            cur.push(c);
            if c == '\'' {
                if chars.peek() == Some(&'\'') {
                    cur.push(chars.next().unwrap());
                } else {
                    quoted = false;
                }
            }
            continue;
        }
        match c {
            '\'' => {
                quoted = true;
                cur.push(c);
            }
            '#' => {
                for n in chars.by_ref() {
                    if n == '\n' {
                        break;
                    }
                }
                cur.push('\n');
            }
            '-' if chars.peek() == Some(&'-') => {
                for n in chars.by_ref() {
                    if n == '\n' {
                        break;
                    }
                }
                cur.push('\n');
            }
            ';' => out.push(std::mem::take(&mut cur)),
            _ => cur.push(c),
        }
    }
    out.push(cur);
    out.into_iter().map(|s| s.trim().to_owned()).filter(|s| !s.is_empty()).collect()
}

/// Applies a seed script. Every row is inserted by its own session for
/// the row's owner, so the owner guard applies as for any other write.
pub fn apply_seed(m: &Monitor, funit: &str, path: &Path, text: &str) -> Result<usize, BundleError> {
    let file = path.display().to_string();
    let schema = m.schema(funit).ok_or_else(|| BundleError::new(1, format!("{file}: unknown component `{funit}`")))?;
    let mut n = 0;
    for stmt in statements(text) {
        let ast = parse_query(&stmt).map_err(|e| BundleError::new(2, format!("{file}: {e}")))?;
        let Statement::Insert(ins) = ast.statement else {
            return Err(BundleError::new(1, format!("{file}: seed scripts hold INSERT statements only")));
        };
        let decl = schema
            .local(&ins.table)
            .ok_or_else(|| BundleError::new(ErrorCode::UnknownTable.exit_status(), format!("{file}: unknown local table `{}`", ins.table)))?;
        let columns: Vec<String> =
            if ins.columns.is_empty() { decl.columns.iter().map(|c| c.name.clone()).collect() } else { ins.columns.clone() };
        let oi = columns
            .iter()
            .position(|c| c == decl.owner_column())
            .ok_or_else(|| BundleError::new(1, format!("{file}: seed rows of `{}` must name their owner", ins.table)))?;
        for row in &ins.rows {
            let uid = match row.get(oi) {
                Some(Expr::Literal(Value::Text(u))) => u.clone(),
                _ => return Err(BundleError::new(1, format!("{file}: seed row owner must be a string literal"))),
            };
            let values: Vec<String> = row.iter().map(Expr::to_string).collect();
            let sql = format!("INSERT INTO {} ({}) VALUES ({})", ins.table, columns.join(", "), values.join(", "));
            let session = m.open_session(funit, &uid).map_err(|e| BundleError::new(e.code.exit_status(), format!("{file}: {e}")))?;
            m.execute(&session, &sql).map_err(|e| BundleError::new(e.code.exit_status(), format!("{file}: {e}")))?;
            n += 1;
        }
    }
    Ok(n)
}

fn same_wiring(a: &WiringSpec, b: &WiringSpec) -> bool {
    a.source == b.source && a.target == b.target && a.column_map == b.column_map
}

/// Integrates `bundle` (or only `only` from it), applies its wirings,
/// activations and seed data. Nothing is changed unless every step
/// succeeds.
pub fn integrate(m: &Monitor, bundle: &AppBundle, only: Option<&str>, force: bool) -> Result<Vec<String>, BundleError> {
    let stage = m.fork();
    let mut lines = Vec::new();
    let selected: Vec<&Funit> = bundle.funits.iter().filter(|f| only.is_none_or(|o| o == f.name)).collect();
    if let (Some(o), true) = (only, selected.is_empty()) {
        return Err(BundleError::new(1, format!("{}: no f-unit `{o}`", bundle.root.display())));
    }
    let existing = stage.components();
    for f in &selected {
        let report = stage.integrate(&f.name, &f.schema, force).map_err(|e| render_error(&e, &f.schema_path))?;
        lines.extend(render_report(&report));
    }
    let touches = |a: &str, b: &str| only.is_none_or(|o| o == a || o == b);
    let mut wired = 0;
    for (path, text) in &bundle.wirings {
        let specs = parse_wirings(text).map_err(|e| BundleError::new(2, format!("{}:{}: {}", path.display(), e.pos, e.message)))?;
        let known = stage.components();
        for spec in specs {
            if !touches(&spec.source.component, &spec.target.component) {
                continue;
            }
            let present = known.contains(&spec.source.component) && known.contains(&spec.target.component);
            if only.is_some() && !present {
                continue;
            }
            if stage.wirings().iter().any(|w| same_wiring(w, &spec)) {
                continue;
            }
            stage.wire(&spec).map_err(|e| render_error(&e, path))?;
            lines.push(format!("wired {} -> {}", spec.source, spec.target));
            wired += 1;
        }
    }
    for (path, text) in &bundle.activations {
        let edges = EcosystemGraph::parse_activations(text).map_err(|e| BundleError::new(2, format!("{}: {e}", path.display())))?;
        for (p, c) in edges {
            if !touches(&p, &c) {
                continue;
            }
            for n in [&p, &c] {
                if !stage.graph().contains(n) {
                    stage.add_node(n).map_err(|e| render_error(&e, path))?;
                    lines.push(format!("node {n}"));
                }
            }
            if stage.graph().activation_edges().contains(&(p.clone(), c.clone())) {
                continue;
            }
            stage.add_activation(&p, &c).map_err(|e| render_error(&e, path))?;
            lines.push(format!("activation {p} -> {c}"));
        }
    }
    // Seeds are initial data: a forced re-integration keeps the rows of
    // unchanged tables and does not seed again.
    for f in selected.iter().filter(|f| !existing.contains(&f.name)) {
        if let Some((path, text)) = &f.seed {
            let n = apply_seed(&stage, &f.name, path, text)?;
            lines.push(format!("seeded {}: {n} row(s)", f.name));
        }
    }
    m.adopt(stage).map_err(|e| BundleError::new(1, e.to_string()))?;
    lines.push(format!("{} f-unit(s) integrated, {wired} wiring(s) applied", selected.len()));
    Ok(lines)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn script_splitting() {
        let s = statements("INSERT INTO t VALUES ('a;b'); -- x;y\n# z;\nINSERT INTO t VALUES ('it''s');\n;");
        assert_eq!(s, ["INSERT INTO t VALUES ('a;b')", "INSERT INTO t VALUES ('it''s')"]);
    }
}

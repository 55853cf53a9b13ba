//! Canonical in-memory grid representation, case-file ingestion, and
//! structural validation.
//!
//! The native case format is a versioned JSON schema (see `CASE_SCHEMA_VERSION`);
//! a MATPOWER-style importer maps `mpc` tables onto the same structures.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const CASE_SCHEMA_VERSION: u32 = 1;

/// Default system-loss fraction when the case does not state one.
pub const DEFAULT_LOSS_FRACTION: f64 = 0.02;

/// Default short-term rating as a multiple of the long-term rating.
pub const DEFAULT_SHORT_TERM_FACTOR: f64 = 1.15;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("unknown bus id `{0}`")]
    UnknownBus(String),
    #[error("unknown branch id `{0}`")]
    UnknownBranch(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseFormat {
    NativeJson,
    Matpower,
}

impl std::str::FromStr for CaseFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "native" | "json" | "native-json" => Ok(CaseFormat::NativeJson),
            "matpower" | "m" | "mpc" => Ok(CaseFormat::Matpower),
            other => Err(format!("unknown case format `{other}`")),
        }
    }
}

fn default_true() -> bool {
    true
}

fn schema_version() -> u32 {
    CASE_SCHEMA_VERSION
}

fn default_loss_fraction() -> f64 {
    DEFAULT_LOSS_FRACTION
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Bus {
    pub id: String,
    pub base_kv: f64,
    /// Real load, MW.
    #[serde(default)]
    pub load_p: f64,
    /// Reactive load, Mvar.
    #[serde(default)]
    pub load_q: f64,
    #[serde(default)]
    pub is_slack: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Branch {
    pub id: String,
    pub from_bus: String,
    pub to_bus: String,
    /// Series reactance, per-unit on the system MVA base.
    pub reactance_x: f64,
    /// Long-term apparent-power rating, MVA.
    pub rating_long_s: f64,
    /// Short-term (contingency) rating, MVA. Defaults to 1.15x long-term.
    #[serde(default)]
    pub rating_short_s: Option<f64>,
    /// Base-case reactive flow at the from end, Mvar (input data; there is
    /// no AC solver in this tool).
    #[serde(default)]
    pub q_from: f64,
    #[serde(default)]
    pub q_to: f64,
    /// Worst post-contingency reactive flows; default to the base-case values.
    #[serde(default)]
    pub q_from_ctg: Option<f64>,
    #[serde(default)]
    pub q_to_ctg: Option<f64>,
    #[serde(default = "default_true")]
    pub in_service: bool,
}

impl Branch {
    pub fn short_term_rating(&self) -> f64 {
        self.rating_short_s
            .unwrap_or(DEFAULT_SHORT_TERM_FACTOR * self.rating_long_s)
    }

    pub fn q_from_contingency(&self) -> f64 {
        self.q_from_ctg.unwrap_or(self.q_from)
    }

    pub fn q_to_contingency(&self) -> f64 {
        self.q_to_ctg.unwrap_or(self.q_to)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Generator {
    pub id: String,
    pub bus: String,
    /// Output limits, MW.
    pub p_min: f64,
    pub p_max: f64,
    /// Pre-dispatch output, MW.
    pub p0: f64,
    /// Ramp rate, MW per minute.
    pub ramp_rate: f64,
    /// Energy cost, $/MWh.
    pub cost_energy: f64,
    /// Reserve cost, $/MWh.
    pub cost_reserve: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GridCase {
    #[serde(default = "schema_version")]
    pub version: u32,
    pub mva_base: f64,
    #[serde(default = "default_loss_fraction")]
    pub loss_fraction: f64,
    pub buses: Vec<Bus>,
    pub branches: Vec<Branch>,
    pub generators: Vec<Generator>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Warning,
    Error,
}

/// One validation finding: what broke, where, and how bad.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    /// Field path such as `branches[3].reactance_x`.
    pub location: String,
    pub message: String,
}

impl Diagnostic {
    fn error(location: impl Into<String>, message: impl Into<String>) -> Self {
        Diagnostic {
            severity: Severity::Error,
            location: location.into(),
            message: message.into(),
        }
    }

    fn warning(location: impl Into<String>, message: impl Into<String>) -> Self {
        Diagnostic {
            severity: Severity::Warning,
            location: location.into(),
            message: message.into(),
        }
    }
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let sev = match self.severity {
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        write!(f, "{sev}: {}: {}", self.location, self.message)
    }
}

impl GridCase {
    pub fn bus_index(&self, id: &str) -> Result<usize, GridError> {
        self.buses
            .iter()
            .position(|b| b.id == id)
            .ok_or_else(|| GridError::UnknownBus(id.to_string()))
    }

    pub fn branch_index(&self, id: &str) -> Result<usize, GridError> {
        self.branches
            .iter()
            .position(|b| b.id == id)
            .ok_or_else(|| GridError::UnknownBranch(id.to_string()))
    }

    pub fn slack_index(&self) -> Option<usize> {
        self.buses.iter().position(|b| b.is_slack)
    }

    /// Bus real loads in bus order, MW.
    pub fn loads_mw(&self) -> Vec<f64> {
        self.buses.iter().map(|b| b.load_p).collect()
    }

    pub fn total_load_mw(&self) -> f64 {
        self.buses.iter().map(|b| b.load_p).sum()
    }

    /// Net injection per bus, MW, for a given generator dispatch.
    pub fn injections_mw(&self, dispatch: &[f64]) -> Vec<f64> {
        assert_eq!(dispatch.len(), self.generators.len());
        let mut inj: Vec<f64> = self.buses.iter().map(|b| -b.load_p).collect();
        for (g, p) in self.generators.iter().zip(dispatch.iter()) {
            if let Ok(i) = self.bus_index(&g.bus) {
                inj[i] += p;
            }
        }
        inj
    }

    /// Pre-dispatch generator outputs in generator order, MW.
    pub fn p0(&self) -> Vec<f64> {
        self.generators.iter().map(|g| g.p0).collect()
    }

    /// Copy of the case with different bus loads; used to hand the defender
    /// its falsified view of the system.
    pub fn with_loads(&self, loads_mw: &[f64]) -> GridCase {
        assert_eq!(loads_mw.len(), self.buses.len());
        let mut c = self.clone();
        for (bus, &p) in c.buses.iter_mut().zip(loads_mw.iter()) {
            bus.load_p = p;
        }
        c
    }

    /// Copy with updated pre-dispatch outputs; used when replaying a second
    /// measurement round after a re-dispatch.
    pub fn with_p0(&self, p0: &[f64]) -> GridCase {
        assert_eq!(p0.len(), self.generators.len());
        let mut c = self.clone();
        for (g, &p) in c.generators.iter_mut().zip(p0.iter()) {
            g.p0 = p;
        }
        c
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("case serialization cannot fail")
    }
}

/// Options applied while loading a case.
#[derive(Debug, Clone)]
pub struct LoadOptions {
    /// Multiplier for defaulting a missing short-term rating.
    pub short_term_factor: f64,
    /// Override for the case loss fraction.
    pub loss_fraction: Option<f64>,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            short_term_factor: DEFAULT_SHORT_TERM_FACTOR,
            loss_fraction: None,
        }
    }
}

/// Parse, normalize, and validate a case from a byte stream.
///
/// Any error-severity diagnostic rejects the case; warnings are logged and
/// kept in the returned list alongside the case.
pub fn load_case(
    source: impl Read,
    format: CaseFormat,
    opts: &LoadOptions,
) -> Result<(GridCase, Vec<Diagnostic>), GridError> {
    let mut text = String::new();
    let mut reader = source;
    reader.read_to_string(&mut text)?;
    let mut case = match format {
        CaseFormat::NativeJson => parse_native_json(&text)?,
        CaseFormat::Matpower => parse_matpower(&text, opts)?,
    };
    let mut diags = normalize(&mut case, opts);
    diags.extend(validate(&case));
    if let Some(first) = diags.iter().find(|d| d.severity == Severity::Error) {
        return Err(GridError::Validation(first.to_string()));
    }
    for d in &diags {
        log::warn!("{d}");
    }
    Ok((case, diags))
}

fn parse_native_json(text: &str) -> Result<GridCase, GridError> {
    let case: GridCase = serde_json::from_str(text).map_err(|e| GridError::Parse(e.to_string()))?;
    if case.version != CASE_SCHEMA_VERSION {
        return Err(GridError::Parse(format!(
            "unsupported case schema version {} (this build reads version {})",
            case.version, CASE_SCHEMA_VERSION
        )));
    }
    Ok(case)
}

/// Fill defaults that depend on load options and pick a slack bus when the
/// case marks none (highest-capacity generator bus, with a warning).
fn normalize(case: &mut GridCase, opts: &LoadOptions) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    if let Some(lf) = opts.loss_fraction {
        case.loss_fraction = lf;
    }
    for br in case.branches.iter_mut() {
        if br.rating_short_s.is_none() {
            br.rating_short_s = Some(opts.short_term_factor * br.rating_long_s);
        }
        if br.q_from_ctg.is_none() {
            br.q_from_ctg = Some(br.q_from);
        }
        if br.q_to_ctg.is_none() {
            br.q_to_ctg = Some(br.q_to);
        }
    }
    if case.buses.iter().all(|b| !b.is_slack) && !case.buses.is_empty() {
        // deterministic fallback: bus hosting the largest total generation capacity
        let mut cap: BTreeMap<&str, f64> = BTreeMap::new();
        for g in &case.generators {
            *cap.entry(g.bus.as_str()).or_insert(0.0) += g.p_max;
        }
        let pick = cap
            .iter()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap().then(b.0.cmp(a.0)))
            .map(|(id, _)| id.to_string())
            .unwrap_or_else(|| case.buses[0].id.clone());
        if let Some(bus) = case.buses.iter_mut().find(|b| b.id == pick) {
            bus.is_slack = true;
            diags.push(Diagnostic::warning(
                format!("buses[{pick}].is_slack"),
                "no slack bus marked; chose the highest-capacity generator bus",
            ));
        }
    }
    diags
}

/// Structural validation. Returns an empty list iff every invariant holds.
pub fn validate(case: &GridCase) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    if !(case.mva_base > 0.0) {
        diags.push(Diagnostic::error("mva_base", "must be positive"));
    }
    if case.loss_fraction < 0.0 {
        diags.push(Diagnostic::error("loss_fraction", "must be nonnegative"));
    }

    let mut seen = BTreeSet::new();
    for (i, b) in case.buses.iter().enumerate() {
        if !seen.insert(b.id.clone()) {
            diags.push(Diagnostic::error(
                format!("buses[{i}].id"),
                format!("duplicate bus id `{}`", b.id),
            ));
        }
        if !(b.base_kv > 0.0) {
            diags.push(Diagnostic::error(
                format!("buses[{i}].base_kv"),
                "must be positive",
            ));
        }
    }

    let slack_count = case.buses.iter().filter(|b| b.is_slack).count();
    if slack_count != 1 {
        diags.push(Diagnostic::error(
            "buses[].is_slack",
            format!("exactly one slack bus required, found {slack_count}"),
        ));
    }

    let mut seen = BTreeSet::new();
    for (i, br) in case.branches.iter().enumerate() {
        let at = |f: &str| format!("branches[{i}].{f}");
        if !seen.insert(br.id.clone()) {
            diags.push(Diagnostic::error(
                at("id"),
                format!("duplicate branch id `{}`", br.id),
            ));
        }
        if br.reactance_x == 0.0 || !br.reactance_x.is_finite() {
            diags.push(Diagnostic::error(at("reactance_x"), "must be nonzero"));
        }
        if !(br.rating_long_s > 0.0) {
            diags.push(Diagnostic::error(at("rating_long_s"), "must be positive"));
        }
        if let Some(st) = br.rating_short_s {
            if st < br.rating_long_s {
                diags.push(Diagnostic::error(
                    at("rating_short_s"),
                    "short-term rating below long-term rating",
                ));
            }
        }
        if br.from_bus == br.to_bus {
            diags.push(Diagnostic::error(at("to_bus"), "self-loop branch"));
        }
        for (field, bus) in [("from_bus", &br.from_bus), ("to_bus", &br.to_bus)] {
            if case.bus_index(bus).is_err() {
                diags.push(Diagnostic::error(
                    at(field),
                    format!("references unknown bus `{bus}`"),
                ));
            }
        }
    }

    let mut seen = BTreeSet::new();
    for (i, g) in case.generators.iter().enumerate() {
        let at = |f: &str| format!("generators[{i}].{f}");
        if !seen.insert(g.id.clone()) {
            diags.push(Diagnostic::error(
                at("id"),
                format!("duplicate generator id `{}`", g.id),
            ));
        }
        if case.bus_index(&g.bus).is_err() {
            diags.push(Diagnostic::error(
                at("bus"),
                format!("references unknown bus `{}`", g.bus),
            ));
        }
        if !(g.p_min <= g.p0 && g.p0 <= g.p_max) {
            diags.push(Diagnostic::error(
                at("p0"),
                format!(
                    "pre-dispatch output {} outside [{}, {}]",
                    g.p0, g.p_min, g.p_max
                ),
            ));
        }
        if g.ramp_rate < 0.0 {
            diags.push(Diagnostic::error(at("ramp_rate"), "must be nonnegative"));
        }
        if g.p_max < 0.0 {
            diags.push(Diagnostic::error(at("p_max"), "must be nonnegative"));
        }
    }

    // connectivity over in-service branches
    if !case.buses.is_empty() {
        let comp = components(case);
        let n_comp = comp.iter().max().map_or(0, |&c| c + 1);
        if n_comp > 1 {
            let mut members: Vec<Vec<&str>> = vec![Vec::new(); n_comp];
            for (i, &c) in comp.iter().enumerate() {
                members[c].push(&case.buses[i].id);
            }
            // report every component except the largest
            members.sort_by_key(|m| std::cmp::Reverse(m.len()));
            for m in members.iter().skip(1) {
                diags.push(Diagnostic::error(
                    "branches",
                    format!(
                        "network is disconnected; isolated component: {{{}}}",
                        m.join(", ")
                    ),
                ));
            }
        }
    }

    let total_load = case.total_load_mw();
    let capacity: f64 = case.generators.iter().map(|g| g.p_max).sum();
    if capacity < (1.0 + case.loss_fraction) * total_load {
        diags.push(Diagnostic::error(
            "generators",
            format!(
                "total capacity {capacity} MW below loss-adjusted load {} MW",
                (1.0 + case.loss_fraction) * total_load
            ),
        ));
    }

    diags
}

/// Union-find style component labels over in-service branches.
fn components(case: &GridCase) -> Vec<usize> {
    let n = case.buses.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut Vec<usize>, mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for br in case.branches.iter().filter(|b| b.in_service) {
        if let (Ok(a), Ok(b)) = (case.bus_index(&br.from_bus), case.bus_index(&br.to_bus)) {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                parent[ra] = rb;
            }
        }
    }
    let mut label = BTreeMap::new();
    let mut out = vec![0usize; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        let next = label.len();
        out[i] = *label.entry(r).or_insert(next);
    }
    out
}

/// Branch ids whose removal disconnects the network (bridges), over
/// in-service branches. Contingency analysis excludes these.
pub fn radial_branches(case: &GridCase) -> BTreeSet<String> {
    let n = case.buses.len();
    // adjacency: (neighbor bus, branch index)
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for (bi, br) in case.branches.iter().enumerate() {
        if !br.in_service {
            continue;
        }
        if let (Ok(a), Ok(b)) = (case.bus_index(&br.from_bus), case.bus_index(&br.to_bus)) {
            adj[a].push((b, bi));
            adj[b].push((a, bi));
        }
    }
    // iterative Tarjan bridge detection; parallel branches are distinguished
    // by branch index, so twins are never bridges
    let mut disc = vec![usize::MAX; n];
    let mut low = vec![usize::MAX; n];
    let mut timer = 0usize;
    let mut bridges = BTreeSet::new();
    for start in 0..n {
        if disc[start] != usize::MAX {
            continue;
        }
        // stack frame: (node, incoming branch, next adjacency cursor)
        let mut stack: Vec<(usize, usize, usize)> = vec![(start, usize::MAX, 0)];
        disc[start] = timer;
        low[start] = timer;
        timer += 1;
        loop {
            let Some(&(u, in_edge, cursor)) = stack.last() else {
                break;
            };
            if cursor < adj[u].len() {
                stack.last_mut().unwrap().2 += 1;
                let (v, e) = adj[u][cursor];
                if e == in_edge {
                    continue;
                }
                if disc[v] == usize::MAX {
                    disc[v] = timer;
                    low[v] = timer;
                    timer += 1;
                    stack.push((v, e, 0));
                } else {
                    low[u] = low[u].min(disc[v]);
                }
            } else {
                stack.pop();
                if let Some(&(p, _, _)) = stack.last() {
                    low[p] = low[p].min(low[u]);
                    if low[u] > disc[p] {
                        bridges.insert(case.branches[in_edge].id.clone());
                    }
                }
            }
        }
    }
    bridges
}

// --- MATPOWER-style importer -------------------------------------------------

/// Parse MATPOWER `mpc` tables. Supported fields: baseMVA, bus, gen, branch,
/// gencost. Reactive flows and reserve costs have no MATPOWER equivalent and
/// get documented defaults (zero reactive flow; reserve cost = 10% of energy
/// cost; ramp from RAMP_AGC or p_max/60).
fn parse_matpower(text: &str, opts: &LoadOptions) -> Result<GridCase, GridError> {
    let base_mva = parse_scalar(text, "baseMVA")
        .ok_or_else(|| GridError::Parse("missing mpc.baseMVA".into()))?;
    let bus_rows = parse_table(text, "bus")?;
    let gen_rows = parse_table(text, "gen")?;
    let branch_rows = parse_table(text, "branch")?;
    let cost_rows = parse_table(text, "gencost").unwrap_or_default();

    let mut buses = Vec::new();
    for row in &bus_rows {
        if row.len() < 10 {
            return Err(GridError::Parse(format!(
                "bus row needs >= 10 columns, got {}",
                row.len()
            )));
        }
        buses.push(Bus {
            id: format!("{}", row[0] as i64),
            base_kv: row[9],
            load_p: row[2],
            load_q: row[3],
            is_slack: row[1] as i64 == 3,
        });
    }

    let mut branches = Vec::new();
    for (i, row) in branch_rows.iter().enumerate() {
        if row.len() < 11 {
            return Err(GridError::Parse(format!(
                "branch row needs >= 11 columns, got {}",
                row.len()
            )));
        }
        let rate_a = row[5];
        let rate_b = row[6];
        branches.push(Branch {
            id: format!("br{}-{}-{}", row[0] as i64, row[1] as i64, i + 1),
            from_bus: format!("{}", row[0] as i64),
            to_bus: format!("{}", row[1] as i64),
            reactance_x: row[3],
            rating_long_s: rate_a,
            rating_short_s: if rate_b > 0.0 {
                Some(rate_b)
            } else {
                Some(opts.short_term_factor * rate_a)
            },
            q_from: 0.0,
            q_to: 0.0,
            q_from_ctg: None,
            q_to_ctg: None,
            in_service: row[10] != 0.0,
        });
    }

    let mut generators = Vec::new();
    for (i, row) in gen_rows.iter().enumerate() {
        if row.len() < 10 {
            return Err(GridError::Parse(format!(
                "gen row needs >= 10 columns, got {}",
                row.len()
            )));
        }
        let p_max = row[8];
        let ramp = if row.len() >= 17 && row[16] > 0.0 {
            row[16]
        } else {
            p_max / 60.0
        };
        let cost_energy = cost_rows.get(i).and_then(|c| linear_cost(c)).unwrap_or(1.0);
        generators.push(Generator {
            id: format!("g{}-{}", row[0] as i64, i + 1),
            bus: format!("{}", row[0] as i64),
            p_min: row[9],
            p_max,
            p0: row[1],
            ramp_rate: ramp,
            cost_energy,
            cost_reserve: 0.1 * cost_energy,
        });
    }

    Ok(GridCase {
        version: CASE_SCHEMA_VERSION,
        mva_base: base_mva,
        loss_fraction: DEFAULT_LOSS_FRACTION,
        buses,
        branches,
        generators,
    })
}

/// Linear coefficient of a MATPOWER gencost row (model 2 polynomial).
fn linear_cost(row: &[f64]) -> Option<f64> {
    if row.len() < 5 || row[0] as i64 != 2 {
        return None;
    }
    let n = row[3] as usize;
    if row.len() < 4 + n || n == 0 {
        return None;
    }
    // polynomial coefficients are ordered highest degree first; the linear
    // term is second from the end
    if n >= 2 {
        Some(row[4 + n - 2])
    } else {
        Some(row[4])
    }
}

fn parse_scalar(text: &str, field: &str) -> Option<f64> {
    let needle = format!("mpc.{field}");
    for line in text.lines() {
        let line = line.split('%').next().unwrap_or("");
        if let Some(rest) = line.trim().strip_prefix(&needle) {
            let rest = rest.trim_start().strip_prefix('=')?;
            let value = rest.trim().trim_end_matches(';').trim();
            return value.parse().ok();
        }
    }
    None
}

fn parse_table(text: &str, field: &str) -> Result<Vec<Vec<f64>>, GridError> {
    let needle = format!("mpc.{field}");
    let mut rows = Vec::new();
    let mut in_table = false;
    for line in text.lines() {
        let line = line.split('%').next().unwrap_or("").trim();
        if !in_table {
            if let Some(rest) = line.strip_prefix(&needle) {
                let rest = rest.trim_start();
                if let Some(after_eq) = rest.strip_prefix('=') {
                    if after_eq.trim_start().starts_with('[') {
                        in_table = true;
                        let inline = after_eq.trim_start().trim_start_matches('[');
                        if !inline.is_empty() {
                            push_rows(inline, &mut rows, &mut in_table)?;
                        }
                    }
                }
            }
            continue;
        }
        push_rows(line, &mut rows, &mut in_table)?;
        if !in_table {
            break;
        }
    }
    if rows.is_empty() {
        return Err(GridError::Parse(format!("missing or empty mpc.{field}")));
    }
    Ok(rows)
}

fn push_rows(line: &str, rows: &mut Vec<Vec<f64>>, in_table: &mut bool) -> Result<(), GridError> {
    let mut line = line;
    if let Some(pos) = line.find(']') {
        line = &line[..pos];
        *in_table = false;
    }
    for chunk in line.split(';') {
        let chunk = chunk.trim();
        if chunk.is_empty() {
            continue;
        }
        let row: Result<Vec<f64>, _> = chunk
            .split([' ', '\t', ','])
            .filter(|t| !t.is_empty())
            .map(|t| t.parse::<f64>())
            .collect();
        rows.push(row.map_err(|e| GridError::Parse(format!("bad numeric token: {e}")))?);
    }
    Ok(())
}

//! Parser for the supported subset of the DSS circuit-description language.
//!
//! Supported statements: `New Circuit.`, `New LineCode.`, `New Line.`,
//! `New Transformer.`, `New Load.`, `New PVSystem.`, `New Generator.`,
//! `New Capacitor.`, `New Relay.`/`New Recloser.`/`New Fuse.`, continuation
//! lines (`~` or `more`), comments (`!`, `//`). `Set`, `Solve`, `Plot` and a
//! few other housekeeping commands are recognized and ignored. Any other
//! element class or command is skipped with a warning.
//!
//! Extensions beyond stock DSS: `conn=delta` on `Circuit` declares an
//! ungrounded source; `kind=pv|wind` and `fault_current_limit=` on DER
//! elements; `r_pu=`/`x_pu=` on `Transformer` give the series impedance
//! directly in per-unit.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use num_complex::Complex64;
use thiserror::Error;

use super::*;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DssError {
    #[error("syntax error at line {line}, column {col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("invalid value at line {line}, column {col}: {msg}")]
    InvalidValue { line: usize, col: usize, msg: String },
    #[error("duplicate {class} id '{id}' at line {line}")]
    DuplicateId { class: String, id: String, line: usize },
    #[error("line '{line_id}' references unknown linecode '{code}' (line {line})")]
    UnresolvedLineCode { line_id: String, code: String, line: usize },
    #[error("line '{line_id}' has non-positive length {length} (line {line})")]
    InvalidLength { line_id: String, length: f64, line: usize },
    #[error("no `New Circuit` statement")]
    NoCircuit,
    #[error("io error reading {path}: {msg}")]
    Io { path: String, msg: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DssWarning {
    pub line: usize,
    pub message: String,
}

impl std::fmt::Display for DssWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

#[derive(Debug, Clone)]
pub struct ParseOutput {
    pub network: Network,
    pub warnings: Vec<DssWarning>,
}

pub fn parse_dss_file(path: impl AsRef<Path>) -> Result<ParseOutput, DssError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| DssError::Io {
        path: path.display().to_string(),
        msg: e.to_string(),
    })?;
    parse_dss(&text)
}

/// Parses DSS text into a [`Network`]. Structural problems that the grammar
/// can express (dangling device references, disconnected islands) are left to
/// [`validate`].
pub fn parse_dss(text: &str) -> Result<ParseOutput, DssError> {
    let statements = lex(text)?;
    let mut builder = Builder::default();
    for st in statements {
        builder.statement(st)?;
    }
    builder.finish()
}

#[derive(Debug, Clone)]
struct Token {
    key: Option<String>,
    value: String,
    line: usize,
    col: usize,
}

#[derive(Debug, Clone)]
struct Statement {
    line: usize,
    tokens: Vec<Token>,
}

fn strip_comment(line: &str) -> &str {
    let mut depth = 0i32;
    let mut quote: Option<char> = None;
    let bytes: Vec<(usize, char)> = line.char_indices().collect();
    for (k, &(i, c)) in bytes.iter().enumerate() {
        if let Some(q) = quote {
            if c == q {
                quote = None;
            }
            continue;
        }
        match c {
            '"' | '\'' => quote = Some(c),
            '(' | '[' | '{' => depth += 1,
            ')' | ']' | '}' => depth -= 1,
            '!' if depth <= 0 => return &line[..i],
            '/' if depth <= 0 && bytes.get(k + 1).map(|x| x.1) == Some('/') => return &line[..i],
            _ => {}
        }
    }
    line
}

fn closing(c: char) -> Option<char> {
    match c {
        '(' => Some(')'),
        '[' => Some(']'),
        '{' => Some('}'),
        '"' => Some('"'),
        '\'' => Some('\''),
        _ => None,
    }
}

/// Reads one value starting at `chars[*pos]`; returns the raw value (brackets
/// and quotes stripped).
fn read_value(chars: &[char], pos: &mut usize, line: usize, offset: usize) -> Result<String, DssError> {
    let start = *pos;
    if let Some(close) = closing(chars[*pos]) {
        *pos += 1;
        let body_start = *pos;
        while *pos < chars.len() && chars[*pos] != close {
            *pos += 1;
        }
        if *pos >= chars.len() {
            return Err(DssError::Syntax {
                line,
                col: start + 1 + offset,
                msg: format!("unterminated '{}'", chars[start]),
            });
        }
        let body: String = chars[body_start..*pos].iter().collect();
        *pos += 1;
        Ok(body.trim().to_string())
    } else {
        while *pos < chars.len() && !chars[*pos].is_whitespace() && chars[*pos] != '=' && chars[*pos] != ',' {
            *pos += 1;
        }
        Ok(chars[start..*pos].iter().collect())
    }
}

fn tokenize(text: &str, line: usize, offset: usize) -> Result<Vec<Token>, DssError> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut pos = 0;
    let skip_ws = |pos: &mut usize| {
        while *pos < chars.len() && (chars[*pos].is_whitespace() || chars[*pos] == ',') {
            *pos += 1;
        }
    };
    loop {
        skip_ws(&mut pos);
        if pos >= chars.len() {
            break;
        }
        let col = pos + 1 + offset;
        if chars[pos] == '=' {
            return Err(DssError::Syntax { line, col, msg: "'=' without property name".into() });
        }
        let first = read_value(&chars, &mut pos, line, offset)?;
        let mut look = pos;
        while look < chars.len() && chars[look].is_whitespace() {
            look += 1;
        }
        if look < chars.len() && chars[look] == '=' {
            pos = look + 1;
            while pos < chars.len() && chars[pos].is_whitespace() {
                pos += 1;
            }
            if pos >= chars.len() {
                return Err(DssError::Syntax {
                    line,
                    col: pos + 1 + offset,
                    msg: format!("missing value for property '{first}'"),
                });
            }
            let value = read_value(&chars, &mut pos, line, offset)?;
            tokens.push(Token { key: Some(first.to_ascii_lowercase()), value, line, col });
        } else {
            tokens.push(Token { key: None, value: first, line, col });
        }
    }
    Ok(tokens)
}

fn lex(text: &str) -> Result<Vec<Statement>, DssError> {
    let mut out: Vec<Statement> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let body = strip_comment(raw);
        let trimmed = body.trim_start();
        if trimmed.trim().is_empty() {
            continue;
        }
        let indent = body.len() - trimmed.len();
        let lower = trimmed.to_ascii_lowercase();
        let (cont, rest, off) = if let Some(r) = trimmed.strip_prefix('~') {
            (true, r, indent + 1)
        } else if lower.starts_with("more ") || lower == "more" {
            (true, &trimmed[4..], indent + 4)
        } else {
            (false, trimmed, indent)
        };
        let tokens = tokenize(rest, line_no, off)?;
        if cont {
            match out.last_mut() {
                Some(st) => st.tokens.extend(tokens),
                None => {
                    return Err(DssError::Syntax {
                        line: line_no,
                        col: indent + 1,
                        msg: "continuation line without a preceding statement".into(),
                    })
                }
            }
        } else {
            out.push(Statement { line: line_no, tokens });
        }
    }
    Ok(out)
}

/// Property bag of one element statement, with consumption tracking so that
/// unrecognized properties can be reported.
struct Props {
    items: Vec<Token>,
    positional: Vec<Token>,
}

impl Props {
    fn get(&self, key: &str) -> Option<&Token> {
        // last assignment wins, as in DSS
        self.items.iter().rev().find(|t| t.key.as_deref() == Some(key))
    }

    fn has(&self, key: &str) -> bool {
        self.get(key).is_some()
    }

    fn str(&self, key: &str) -> Option<String> {
        self.get(key).map(|t| t.value.clone())
    }

    fn f64(&self, key: &str) -> Result<Option<f64>, DssError> {
        self.get(key).map(parse_f64).transpose()
    }

    fn f64_or(&self, key: &str, default: f64) -> Result<f64, DssError> {
        Ok(self.f64(key)?.unwrap_or(default))
    }

    fn usize(&self, key: &str) -> Result<Option<usize>, DssError> {
        match self.get(key) {
            None => Ok(None),
            Some(t) => {
                let v = parse_f64(t)?;
                if v < 0.0 || v.fract() != 0.0 {
                    return Err(invalid(t, format!("'{}' must be a non-negative integer", t.value)));
                }
                Ok(Some(v as usize))
            }
        }
    }

    fn bool(&self, key: &str) -> Result<Option<bool>, DssError> {
        match self.get(key) {
            None => Ok(None),
            Some(t) => match t.value.to_ascii_lowercase().as_str() {
                "y" | "yes" | "true" | "t" => Ok(Some(true)),
                "n" | "no" | "false" | "f" => Ok(Some(false)),
                _ => Err(invalid(t, format!("'{}' is not a boolean", t.value))),
            },
        }
    }

    fn unknown_keys(&self, known: &[&str]) -> Vec<&Token> {
        self.items
            .iter()
            .filter(|t| {
                let k = t.key.as_deref().unwrap_or("");
                !known.contains(&k) && !IGNORED_PROPS.contains(&k)
            })
            .collect()
    }
}

/// Common DSS properties that carry nothing this model uses.
const IGNORED_PROPS: &[&str] = &[
    "basefreq", "normamps", "emergamps", "faultrate", "pctperm", "repair", "cmatrix", "c1", "c0", "b1", "b0",
    "like", "spectrum", "daily", "yearly", "duty", "xrharm", "vminpu", "vmaxpu", "status", "class", "numcust",
    "kvs_reg", "sub", "%noloadloss", "%imag", "%loadloss", "xfmrcode", "ppm_antifloat", "ppm", "isdelta",
    "switchedobj", "switchedterm", "type", "phasetrip", "groundtrip", "tdphase", "tdground", "phaseinst",
    "groundinst", "shots", "recloseintervals", "delay", "ratedcurrent", "fusecurve", "irradiance", "temperature",
    "effcurve", "p-tcurve", "%cutin", "%cutout", "kvarlimit", "model_gen", "xdp", "xdpp", "h", "d", "rg", "xg",
    "rho", "geometry", "wires", "spacing", "neutral", "kron", "seasons", "ratings", "mvasc", "scantype",
    "sequence", "frequency", "basemva", "puzideal", "puz1", "puz0", "puz2", "z1", "z0", "z2", "vmag", "pf_mode",
];

fn invalid(t: &Token, msg: String) -> DssError {
    DssError::InvalidValue { line: t.line, col: t.col, msg }
}

fn parse_f64(t: &Token) -> Result<f64, DssError> {
    let v: f64 = t
        .value
        .trim()
        .parse()
        .map_err(|_| invalid(t, format!("'{}' is not a number", t.value)))?;
    if !v.is_finite() {
        return Err(invalid(t, format!("'{}' is not finite", t.value)));
    }
    Ok(v)
}

fn parse_list(t: &Token) -> Vec<String> {
    t.value
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

/// Parses a DSS matrix, either full or lower-triangular, rows separated by `|`.
fn parse_matrix(t: &Token, n: usize) -> Result<Vec<f64>, DssError> {
    let rows: Vec<Vec<f64>> = t
        .value
        .split('|')
        .map(|r| {
            r.split(|c: char| c.is_whitespace() || c == ',')
                .filter(|s| !s.is_empty())
                .map(|s| s.parse::<f64>().ok().filter(|v| v.is_finite()))
                .collect::<Option<Vec<f64>>>()
        })
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| invalid(t, format!("malformed matrix '{}'", t.value)))?;
    let mut m = vec![0.0; n * n];
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    let lower = rows.len() == n && rows.iter().enumerate().all(|(i, r)| r.len() == i + 1);
    let full_rows = rows.len() == n && rows.iter().all(|r| r.len() == n);
    if lower || (rows.len() == 1 && flat.len() == n * (n + 1) / 2 && n > 1) {
        let mut k = 0;
        for i in 0..n {
            for j in 0..=i {
                m[i * n + j] = flat[k];
                m[j * n + i] = flat[k];
                k += 1;
            }
        }
    } else if full_rows || flat.len() == n * n {
        m.copy_from_slice(&flat);
    } else {
        return Err(invalid(t, format!("matrix '{}' does not match {n} phases", t.value)));
    }
    Ok(m)
}

/// Splits `name.1.2.3` into the lowercase bus name and its node list (ground
/// node 0 dropped).
fn parse_bus_ref(t: &Token, raw: &str) -> Result<(String, Option<Vec<Phase>>), DssError> {
    let mut parts = raw.split('.');
    let name = parts.next().unwrap_or("").trim().to_ascii_lowercase();
    if name.is_empty() {
        return Err(invalid(t, format!("empty bus name in '{raw}'")));
    }
    let mut nodes = Vec::new();
    let mut any = false;
    for p in parts {
        any = true;
        let n: usize = p.parse().map_err(|_| invalid(t, format!("bad node '{p}' in bus '{raw}'")))?;
        match n {
            0 => {}
            1..=3 => nodes.push(Phase::from_index(n - 1).expect("1..=3")),
            _ => return Err(invalid(t, format!("node {n} in bus '{raw}' is outside phases 1..3"))),
        }
    }
    Ok((name, any.then_some(nodes)))
}

fn unit_km(t: &Token) -> Result<Option<f64>, DssError> {
    Ok(match t.value.to_ascii_lowercase().as_str() {
        "none" => None,
        "mi" => Some(1.609344),
        "kft" => Some(0.3048),
        "km" => Some(1.0),
        "m" => Some(0.001),
        "ft" => Some(0.0003048),
        "in" => Some(0.0000254),
        "cm" => Some(0.00001),
        other => return Err(invalid(t, format!("unknown length unit '{other}'"))),
    })
}

#[derive(Debug)]
struct PendingLine {
    line: Line,
    code: Option<String>,
    length: f64,
    units: Option<f64>,
    explicit_phases: Option<usize>,
    from_nodes: Option<Vec<Phase>>,
    to_nodes: Option<Vec<Phase>>,
    stmt_line: usize,
}

#[derive(Default)]
struct Builder {
    circuit: Option<SourceSpec>,
    linecodes: Vec<LineCode>,
    linecode_units: HashMap<String, Option<f64>>,
    lines: Vec<PendingLine>,
    transformers: Vec<Transformer>,
    loads: Vec<LoadSpec>,
    ders: Vec<DerSpec>,
    capacitors: Vec<CapacitorSpec>,
    devices: Vec<DeviceLocation>,
    seen: HashSet<(String, String)>,
    warnings: Vec<DssWarning>,
}

const QUIET_COMMANDS: &[&str] = &[
    "set", "solve", "plot", "clear", "calcvoltagebases", "calcv", "buscoords", "show", "export",
];

impl Builder {
    fn warn(&mut self, line: usize, message: impl Into<String>) {
        self.warnings.push(DssWarning { line, message: message.into() });
    }

    fn statement(&mut self, st: Statement) -> Result<(), DssError> {
        let Some(head) = st.tokens.first() else { return Ok(()) };
        if head.key.is_some() {
            return Err(DssError::Syntax {
                line: head.line,
                col: head.col,
                msg: format!("statement must start with a command, found property '{}'", head.key.as_deref().unwrap_or("")),
            });
        }
        let cmd = head.value.to_ascii_lowercase();
        if QUIET_COMMANDS.contains(&cmd.as_str()) {
            return Ok(());
        }
        if cmd != "new" {
            self.warn(st.line, format!("unsupported command '{}' skipped", head.value));
            return Ok(());
        }
        let mut rest = st.tokens[1..].to_vec();
        let target = match rest.first() {
            Some(t) if t.key.is_none() || t.key.as_deref() == Some("object") => rest.remove(0),
            _ => {
                return Err(DssError::Syntax {
                    line: head.line,
                    col: head.col + 3,
                    msg: "`New` requires Class.name".into(),
                })
            }
        };
        let Some((class, name)) = target.value.split_once('.') else {
            return Err(DssError::Syntax {
                line: target.line,
                col: target.col,
                msg: format!("expected Class.name, found '{}'", target.value),
            });
        };
        let class = class.to_ascii_lowercase();
        let name = name.trim().to_ascii_lowercase();
        if name.is_empty() {
            return Err(DssError::Syntax { line: target.line, col: target.col, msg: "empty element name".into() });
        }
        let (items, positional): (Vec<Token>, Vec<Token>) = rest.into_iter().partition(|t| t.key.is_some());
        let props = Props { items, positional };
        for p in &props.positional {
            self.warnings.push(DssWarning {
                line: p.line,
                message: format!("positional value '{}' ignored (use key=value)", p.value),
            });
        }
        let key_class = match class.as_str() {
            "pvsystem" | "generator" => "der".to_string(),
            "relay" | "recloser" | "fuse" => "device".to_string(),
            c => c.to_string(),
        };
        let known = matches!(
            class.as_str(),
            "circuit" | "linecode" | "line" | "transformer" | "load" | "pvsystem" | "generator" | "capacitor" | "relay"
                | "recloser" | "fuse"
        );
        if !known {
            self.warn(st.line, format!("unsupported element class '{class}' ({name}) skipped"));
            return Ok(());
        }
        if !self.seen.insert((key_class, name.clone())) {
            return Err(DssError::DuplicateId { class, id: name, line: st.line });
        }
        let known_keys: &[&str] = match class.as_str() {
            "circuit" => {
                self.circuit(&name, &props, st.line)?;
                &["bus1", "basekv", "pu", "angle", "mvasc3", "mvasc1", "x1r1", "x0r0", "r1", "x1", "r0", "x0", "conn", "phases"]
            }
            "linecode" => {
                self.linecode(&name, &props)?;
                &["nphases", "rmatrix", "xmatrix", "r1", "x1", "r0", "x0", "units"]
            }
            "line" => {
                self.line(&name, &props, st.line)?;
                &[
                    "bus1", "bus2", "phases", "linecode", "length", "units", "switch", "enabled", "r1", "x1", "r0", "x0",
                    "rmatrix", "xmatrix",
                ]
            }
            "transformer" => {
                self.transformer(&name, &props, st.line)?;
                &[
                    "phases", "windings", "buses", "conns", "kvs", "kvas", "taps", "%rs", "xhl", "x12", "%r", "wdg",
                    "bus", "conn", "kv", "kva", "tap", "rneut", "r_pu", "x_pu",
                ]
            }
            "load" => {
                self.load(&name, &props)?;
                &["bus1", "phases", "conn", "kw", "kvar", "pf", "kv", "model", "kva"]
            }
            "pvsystem" | "generator" => {
                self.der(&name, &class, &props)?;
                &["bus1", "phases", "kva", "pmpp", "kw", "pf", "conn", "kind", "fault_current_limit", "kv"]
            }
            "capacitor" => {
                self.capacitor(&name, &props)?;
                &["bus1", "phases", "kvar", "kv", "conn"]
            }
            _ => {
                self.device(&name, &class, &props, st.line)?;
                &["monitoredobj", "monitoredterm", "element", "terminal"]
            }
        };
        let unknown: Vec<String> = props.unknown_keys(known_keys).iter().map(|t| t.key.clone().unwrap_or_default()).collect();
        for k in unknown {
            self.warn(st.line, format!("{class}.{name}: property '{k}' ignored"));
        }
        Ok(())
    }

    fn circuit(&mut self, name: &str, p: &Props, line: usize) -> Result<(), DssError> {
        if self.circuit.is_some() {
            return Err(DssError::DuplicateId { class: "circuit".into(), id: name.into(), line });
        }
        let bus = match p.get("bus1") {
            Some(t) => parse_bus_ref(t, &t.value)?.0,
            None => "sourcebus".to_string(),
        };
        let kv = p.f64_or("basekv", 115.0)?;
        if kv <= 0.0 {
            return Err(invalid(p.get("basekv").expect("present when non-default"), "basekv must be > 0".into()));
        }
        let x1r1 = p.f64_or("x1r1", 4.0)?;
        let x0r0 = p.f64_or("x0r0", 3.0)?;
        let z1 = if p.has("r1") || p.has("x1") {
            Complex64::new(p.f64_or("r1", 0.0)?, p.f64_or("x1", 0.0)?)
        } else {
            let mag = kv * kv / p.f64_or("mvasc3", 2000.0)?;
            polar_xr(mag, x1r1)
        };
        let z0 = if p.has("r0") || p.has("x0") {
            Complex64::new(p.f64_or("r0", 0.0)?, p.f64_or("x0", 0.0)?)
        } else {
            let z1ph = 3.0 * kv * kv / p.f64_or("mvasc1", 2100.0)?;
            polar_xr((z1ph - 2.0 * z1.norm()).max(1e-6), x0r0)
        };
        let grounded = match p.get("conn") {
            None => true,
            Some(t) => match t.value.to_ascii_lowercase().as_str() {
                "wye" | "y" | "ln" => true,
                "delta" | "d" | "ll" => false,
                other => return Err(invalid(t, format!("unknown connection '{other}'"))),
            },
        };
        self.circuit = Some(SourceSpec {
            name: name.to_string(),
            bus,
            nominal_kv: kv,
            pu: p.f64_or("pu", 1.0)?,
            angle_deg: p.f64_or("angle", 0.0)?,
            z1,
            z0,
            grounded,
        });
        Ok(())
    }

    fn linecode(&mut self, name: &str, p: &Props) -> Result<(), DssError> {
        let n = p.usize("nphases")?.unwrap_or(3);
        if !(1..=3).contains(&n) {
            let t = p.get("nphases").expect("nphases given when out of range");
            return Err(invalid(t, format!("nphases {n} outside 1..3")));
        }
        let units = match p.get("units") {
            Some(t) => unit_km(t)?,
            None => None,
        };
        let (mut r, mut x) = impedance_matrices(p, n)?;
        if let Some(u) = units {
            r.iter_mut().for_each(|v| *v /= u);
            x.iter_mut().for_each(|v| *v /= u);
        }
        self.linecode_units.insert(name.to_string(), units);
        self.linecodes.push(LineCode { id: name.to_string(), n_phases: n, r_matrix: r, x_matrix: x });
        Ok(())
    }

    fn line(&mut self, name: &str, p: &Props, stmt_line: usize) -> Result<(), DssError> {
        let bus_of = |key: &str| -> Result<(String, Option<Vec<Phase>>), DssError> {
            match p.get(key) {
                Some(t) => parse_bus_ref(t, &t.value),
                None => Err(DssError::Syntax {
                    line: stmt_line,
                    col: 1,
                    msg: format!("line '{name}' is missing {key}"),
                }),
            }
        };
        let (from_bus, from_nodes) = bus_of("bus1")?;
        let (to_bus, to_nodes) = bus_of("bus2")?;
        let switchable = p.bool("switch")?.unwrap_or(false);
        let closed = p.bool("enabled")?.unwrap_or(true);
        let units = match p.get("units") {
            Some(t) => unit_km(t)?,
            None => None,
        };
        let mut code = p.str("linecode").map(|s| s.to_ascii_lowercase());
        let explicit_phases = p.usize("phases")?;
        let mut length = p.f64_or("length", 1.0)?;
        let mut units = units;
        if code.is_none() {
            let n = explicit_phases
                .or(from_nodes.as_ref().map(|v| v.len()).filter(|&k| k > 0))
                .unwrap_or(3)
                .clamp(1, 3);
            let implicit = format!("__{name}");
            let (r, x) = if switchable && !p.has("r1") && !p.has("rmatrix") {
                length = 0.001;
                units = Some(1.0);
                let mut r = vec![0.0; n * n];
                for i in 0..n {
                    r[i * n + i] = 1.0;
                }
                (r.clone(), r)
            } else {
                let (mut r, mut x) = impedance_matrices(p, n)?;
                // r1/x1 given on a line are per unit of its own length units
                if let Some(u) = units {
                    r.iter_mut().for_each(|v| *v /= u);
                    x.iter_mut().for_each(|v| *v /= u);
                }
                (r, x)
            };
            self.linecode_units.insert(implicit.clone(), Some(1.0));
            self.linecodes.push(LineCode { id: implicit.clone(), n_phases: n, r_matrix: r, x_matrix: x });
            code = Some(implicit);
            if units.is_none() {
                units = Some(1.0);
            }
        }
        self.lines.push(PendingLine {
            line: Line {
                id: name.to_string(),
                from_bus,
                to_bus,
                phases: PhaseSet::ABC,
                length_km: 0.0,
                code: String::new(),
                switchable,
                closed,
            },
            code,
            length,
            units,
            explicit_phases,
            from_nodes,
            to_nodes,
            stmt_line,
        });
        Ok(())
    }

    fn transformer(&mut self, name: &str, p: &Props, line: usize) -> Result<(), DssError> {
        let units = p.usize("phases")?.unwrap_or(3);
        if units != 1 && units != 3 {
            let t = p.get("phases").expect("given");
            return Err(invalid(t, format!("transformer phases must be 1 or 3, got {units}")));
        }
        let nw = p.usize("windings")?.unwrap_or(2);
        if nw != 2 {
            let t = p.get("windings").expect("given");
            return Err(invalid(t, format!("only 2-winding transformers are supported, got {nw}")));
        }
        #[derive(Clone)]
        struct W {
            bus: Option<(String, Option<Vec<Phase>>)>,
            conn: WindingConnection,
            kv: f64,
            kva: f64,
            tap: f64,
            r_pct: f64,
        }
        let mut w = vec![
            W { bus: None, conn: WindingConnection::WyeGrounded, kv: 12.47, kva: 1000.0, tap: 1.0, r_pct: 0.2 };
            2
        ];
        let mut xhl = 7.0;
        let mut current = 0usize;
        let parse_conn = |t: &Token, s: &str| -> Result<WindingConnection, DssError> {
            match s.to_ascii_lowercase().as_str() {
                "wye" | "y" | "ln" => Ok(WindingConnection::WyeGrounded),
                "delta" | "d" | "ll" => Ok(WindingConnection::Delta),
                other => Err(invalid(t, format!("unknown connection '{other}'"))),
            }
        };
        // Process in statement order: `wdg=` switches the target of the
        // per-winding properties that follow it.
        for t in &p.items {
            let key = t.key.as_deref().unwrap_or("");
            match key {
                "wdg" => {
                    let k = parse_f64(t)? as usize;
                    if !(1..=2).contains(&k) {
                        return Err(invalid(t, format!("winding {k} out of range")));
                    }
                    current = k - 1;
                }
                "bus" => w[current].bus = Some(parse_bus_ref(t, &t.value)?),
                "conn" => w[current].conn = parse_conn(t, &t.value)?,
                "kv" => w[current].kv = parse_f64(t)?,
                "kva" => w[current].kva = parse_f64(t)?,
                "tap" => w[current].tap = parse_f64(t)?,
                "%r" => w[current].r_pct = parse_f64(t)?,
                "rneut" => {
                    if parse_f64(t)? < 0.0 && w[current].conn == WindingConnection::WyeGrounded {
                        w[current].conn = WindingConnection::Wye;
                    }
                }
                "buses" | "conns" | "kvs" | "kvas" | "taps" | "%rs" => {
                    let list = parse_list(t);
                    if list.len() != 2 {
                        return Err(invalid(t, format!("'{key}' needs 2 entries, got {}", list.len())));
                    }
                    for (k, s) in list.iter().enumerate() {
                        let num = || -> Result<f64, DssError> {
                            s.parse::<f64>().map_err(|_| invalid(t, format!("'{s}' is not a number")))
                        };
                        match key {
                            "buses" => w[k].bus = Some(parse_bus_ref(t, s)?),
                            "conns" => w[k].conn = parse_conn(t, s)?,
                            "kvs" => w[k].kv = num()?,
                            "kvas" => w[k].kva = num()?,
                            "taps" => w[k].tap = num()?,
                            _ => w[k].r_pct = num()?,
                        }
                    }
                }
                "xhl" | "x12" => xhl = parse_f64(t)?,
                _ => {}
            }
        }
        let mut windings = Vec::with_capacity(2);
        for (k, wd) in w.iter().enumerate() {
            let Some((bus, nodes)) = wd.bus.clone() else {
                return Err(DssError::Syntax { line, col: 1, msg: format!("transformer '{name}' winding {} has no bus", k + 1) });
            };
            let phases = match nodes.filter(|n| !n.is_empty()) {
                Some(n) => PhaseSet::new(n).expect("nonempty"),
                None if units == 3 => PhaseSet::ABC,
                None if wd.conn == WindingConnection::Delta => PhaseSet::new([Phase::A, Phase::B]).expect("nonempty"),
                None => PhaseSet::single(Phase::A),
            };
            windings.push(Winding { bus, phases, connection: wd.conn, kv: wd.kv, kva: wd.kva, tap: wd.tap });
        }
        let r = match p.f64("r_pu")? {
            Some(v) => v,
            None => (w[0].r_pct + w[1].r_pct) / 100.0,
        };
        let x = match p.f64("x_pu")? {
            Some(v) => v,
            None => xhl / 100.0,
        };
        self.transformers.push(Transformer {
            id: name.to_string(),
            units,
            windings,
            series_impedance: Complex64::new(r, x),
        });
        Ok(())
    }

    fn shunt_phases(p: &Props, delta: bool) -> Result<(String, PhaseSet), DssError> {
        let t = p.get("bus1").ok_or_else(|| DssError::Syntax { line: 0, col: 0, msg: "missing bus1".into() })?;
        let (bus, nodes) = parse_bus_ref(t, &t.value)?;
        let nph = p.usize("phases")?.unwrap_or(3).clamp(1, 3);
        let phases = match nodes.filter(|n| !n.is_empty()) {
            Some(n) => PhaseSet::new(n).expect("nonempty"),
            None if nph == 3 => PhaseSet::ABC,
            None if delta && nph == 1 => PhaseSet::new([Phase::A, Phase::B]).expect("nonempty"),
            None if nph == 2 => PhaseSet::new([Phase::A, Phase::B]).expect("nonempty"),
            None => PhaseSet::single(Phase::A),
        };
        if delta && phases.len() < 2 {
            return Err(invalid(t, format!("delta element on '{}' needs two or three phases", t.value)));
        }
        Ok((bus, phases))
    }

    fn load_conn(p: &Props) -> Result<LoadConnection, DssError> {
        match p.get("conn") {
            None => Ok(LoadConnection::Wye),
            Some(t) => match t.value.to_ascii_lowercase().as_str() {
                "wye" | "y" | "ln" => Ok(LoadConnection::Wye),
                "delta" | "d" | "ll" => Ok(LoadConnection::Delta),
                other => Err(invalid(t, format!("unknown connection '{other}'"))),
            },
        }
    }

    fn load(&mut self, name: &str, p: &Props) -> Result<(), DssError> {
        let connection = Self::load_conn(p)?;
        let (bus, phases) = Self::shunt_phases(p, connection == LoadConnection::Delta).map_err(|e| with_name(e, name))?;
        let kw = match (p.f64("kw")?, p.f64("kva")?) {
            (Some(kw), _) => kw,
            (None, Some(kva)) => kva * p.f64_or("pf", 0.88)?.abs(),
            _ => 10.0,
        };
        let kvar = match p.f64("kvar")? {
            Some(q) => q,
            None => {
                let pf = p.f64_or("pf", 0.88)?;
                if pf == 0.0 {
                    return Err(invalid(p.get("pf").expect("given"), "pf must be nonzero".into()));
                }
                kw * (1.0 / (pf * pf) - 1.0).max(0.0).sqrt() * pf.signum()
            }
        };
        let model = match p.usize("model")?.unwrap_or(1) {
            1 => LoadModel::ConstantPq,
            2 => LoadModel::ConstantZ,
            5 => LoadModel::ConstantI,
            m => {
                self.warn(p.get("model").map_or(0, |t| t.line), format!("load.{name}: model {m} treated as constant PQ"));
                LoadModel::ConstantPq
            }
        };
        self.loads.push(LoadSpec { id: name.to_string(), bus, phases, connection, kw, kvar, model });
        Ok(())
    }

    fn der(&mut self, name: &str, class: &str, p: &Props) -> Result<(), DssError> {
        let connection = Self::load_conn(p)?;
        let (bus, phases) = Self::shunt_phases(p, connection == LoadConnection::Delta).map_err(|e| with_name(e, name))?;
        let kind = match p.get("kind") {
            Some(t) => match t.value.to_ascii_lowercase().as_str() {
                "pv" => DerKind::Pv,
                "wind" => DerKind::Wind,
                other => return Err(invalid(t, format!("unknown DER kind '{other}'"))),
            },
            None if class == "pvsystem" => DerKind::Pv,
            None => DerKind::Wind,
        };
        let rated = p.f64("kva")?.or(p.f64("pmpp")?).or(p.f64("kw")?).unwrap_or(500.0);
        self.ders.push(DerSpec {
            id: name.to_string(),
            bus,
            phases,
            kind,
            rated_kva: rated,
            connection,
            fault_current_limit: p.f64_or("fault_current_limit", 1.2)?,
            pf: p.f64_or("pf", 1.0)?,
        });
        Ok(())
    }

    fn capacitor(&mut self, name: &str, p: &Props) -> Result<(), DssError> {
        let (bus, phases) = Self::shunt_phases(p, false).map_err(|e| with_name(e, name))?;
        self.capacitors.push(CapacitorSpec { id: name.to_string(), bus, phases, kvar: p.f64_or("kvar", 600.0)? });
        Ok(())
    }

    fn device(&mut self, name: &str, class: &str, p: &Props, line: usize) -> Result<(), DssError> {
        let obj = p.get("monitoredobj").or(p.get("element")).ok_or_else(|| DssError::Syntax {
            line,
            col: 1,
            msg: format!("{class}.{name} has no monitoredobj"),
        })?;
        let Some((oc, target)) = obj.value.split_once('.') else {
            return Err(invalid(obj, format!("expected Line.name, found '{}'", obj.value)));
        };
        if !oc.eq_ignore_ascii_case("line") {
            return Err(invalid(obj, format!("devices may only monitor lines, found '{}'", obj.value)));
        }
        let terminal = match p.usize("monitoredterm")?.or(p.usize("terminal")?).unwrap_or(1) {
            t @ (1 | 2) => t as u8,
            t => return Err(invalid(p.get("monitoredterm").or(p.get("terminal")).expect("given"), format!("terminal {t} not 1 or 2"))),
        };
        let kind = match class {
            "relay" => DeviceKind::Relay,
            "recloser" => DeviceKind::Recloser,
            _ => DeviceKind::Fuse,
        };
        self.devices.push(DeviceLocation { id: name.to_string(), kind, line: target.trim().to_ascii_lowercase(), terminal });
        Ok(())
    }

    fn finish(mut self) -> Result<ParseOutput, DssError> {
        let source = self.circuit.take().ok_or(DssError::NoCircuit)?;
        let codes: HashMap<String, usize> =
            self.linecodes.iter().enumerate().map(|(i, c)| (c.id.clone(), i)).collect();
        let mut lines = Vec::with_capacity(self.lines.len());
        for pl in std::mem::take(&mut self.lines) {
            let PendingLine { mut line, code, length, units, explicit_phases, from_nodes, to_nodes, stmt_line } = pl;
            let code = code.expect("implicit code assigned at parse");
            let Some(&ci) = codes.get(&code) else {
                return Err(DssError::UnresolvedLineCode { line_id: line.id, code, line: stmt_line });
            };
            let lc = &self.linecodes[ci];
            let code_units = self.linecode_units.get(&code).copied().flatten();
            let len_units = units.or(code_units).unwrap_or(1.0);
            let length_km = length * len_units;
            if length_km <= 0.0 {
                return Err(DssError::InvalidLength { line_id: line.id, length, line: stmt_line });
            }
            let nodes = from_nodes.clone().filter(|v| !v.is_empty()).or(to_nodes.clone().filter(|v| !v.is_empty()));
            let phases = match nodes {
                Some(n) => PhaseSet::new(n).expect("nonempty"),
                None => {
                    let n = explicit_phases.unwrap_or(lc.n_phases).clamp(1, 3);
                    PhaseSet::new(Phase::ALL.into_iter().take(n)).expect("nonempty")
                }
            };
            if let (Some(f), Some(t)) = (&from_nodes, &to_nodes) {
                if !f.is_empty() && !t.is_empty() && PhaseSet::new(f.clone()) != PhaseSet::new(t.clone()) {
                    return Err(DssError::InvalidValue {
                        line: stmt_line,
                        col: 1,
                        msg: format!("line '{}' connects different phases at its two ends", line.id),
                    });
                }
            }
            line.phases = phases;
            line.length_km = length_km;
            line.code = code;
            lines.push(line);
        }

        // Buses materialize in a fixed element order so that the canonical
        // text form reproduces the same bus ordering.
        let mut order: Vec<String> = Vec::new();
        let mut phases: HashMap<String, PhaseSet> = HashMap::new();
        let mut touch = |bus: &str, ps: PhaseSet| {
            match phases.get_mut(bus) {
                Some(existing) => *existing = existing.union(ps),
                None => {
                    order.push(bus.to_string());
                    phases.insert(bus.to_string(), ps);
                }
            };
        };
        touch(&source.bus, PhaseSet::ABC);
        for l in &lines {
            touch(&l.from_bus, l.phases);
            touch(&l.to_bus, l.phases);
        }
        for t in &self.transformers {
            for w in &t.windings {
                touch(&w.bus, w.phases);
            }
        }
        for l in &self.loads {
            touch(&l.bus, l.phases);
        }
        for d in &self.ders {
            touch(&d.bus, d.phases);
        }
        for c in &self.capacitors {
            touch(&c.bus, c.phases);
        }
        let base_kv = propagate_base_kv(&source, &order, &lines, &self.transformers);
        let buses = order
            .iter()
            .map(|id| Bus { id: id.clone(), phases: phases[id], base_kv: base_kv[id] })
            .collect();
        let network = Network::from_parts(
            source.name.clone(),
            buses,
            self.linecodes,
            lines,
            self.transformers,
            self.loads,
            self.ders,
            self.capacitors,
            source,
            self.devices,
        );
        Ok(ParseOutput { network, warnings: self.warnings })
    }
}

fn with_name(e: DssError, name: &str) -> DssError {
    match e {
        DssError::Syntax { line: 0, msg, .. } => DssError::Syntax { line: 0, col: 0, msg: format!("{name}: {msg}") },
        other => other,
    }
}

fn polar_xr(mag: f64, xr: f64) -> Complex64 {
    let r = mag / (1.0 + xr * xr).sqrt();
    Complex64::new(r, r * xr)
}

fn impedance_matrices(p: &Props, n: usize) -> Result<(Vec<f64>, Vec<f64>), DssError> {
    if let Some(rt) = p.get("rmatrix") {
        let r = parse_matrix(rt, n)?;
        let x = match p.get("xmatrix") {
            Some(xt) => parse_matrix(xt, n)?,
            None => vec![0.0; n * n],
        };
        return Ok((r, x));
    }
    let r1 = p.f64_or("r1", 0.058)?;
    let x1 = p.f64_or("x1", 0.1206)?;
    let r0 = p.f64_or("r0", 0.1784)?;
    let x0 = p.f64_or("x0", 0.4047)?;
    let (rs, xs) = ((2.0 * r1 + r0) / 3.0, (2.0 * x1 + x0) / 3.0);
    let (rm, xm) = ((r0 - r1) / 3.0, (x0 - x1) / 3.0);
    let mut r = vec![rm; n * n];
    let mut x = vec![xm; n * n];
    for i in 0..n {
        r[i * n + i] = rs;
        x[i * n + i] = xs;
    }
    if n == 1 {
        r[0] = r1;
        x[0] = x1;
    }
    Ok((r, x))
}

fn winding_ll_kv(t: &Transformer, w: &Winding) -> f64 {
    if t.units == 3 || w.connection == WindingConnection::Delta {
        w.kv
    } else {
        w.kv * 3f64.sqrt()
    }
}

fn propagate_base_kv(
    source: &SourceSpec,
    order: &[String],
    lines: &[Line],
    transformers: &[Transformer],
) -> HashMap<String, f64> {
    // (neighbor, fixed kV at the neighbor if reached through a transformer)
    let mut adj: HashMap<&str, Vec<(&str, Option<f64>)>> = HashMap::new();
    for l in lines {
        adj.entry(&l.from_bus).or_default().push((&l.to_bus, None));
        adj.entry(&l.to_bus).or_default().push((&l.from_bus, None));
    }
    for t in transformers {
        let (a, b) = (&t.windings[0], &t.windings[1]);
        adj.entry(&a.bus).or_default().push((&b.bus, Some(winding_ll_kv(t, b))));
        adj.entry(&b.bus).or_default().push((&a.bus, Some(winding_ll_kv(t, a))));
    }
    let mut kv: HashMap<String, f64> = HashMap::new();
    kv.insert(source.bus.clone(), source.nominal_kv);
    let mut queue = std::collections::VecDeque::from([source.bus.clone()]);
    while let Some(bus) = queue.pop_front() {
        let here = kv[&bus];
        for &(next, fixed) in adj.get(bus.as_str()).map(Vec::as_slice).unwrap_or(&[]) {
            if kv.contains_key(next) {
                continue;
            }
            kv.insert(next.to_string(), fixed.unwrap_or(here));
            queue.push_back(next.to_string());
        }
    }
    for b in order {
        kv.entry(b.clone()).or_insert(source.nominal_kv);
    }
    kv
}

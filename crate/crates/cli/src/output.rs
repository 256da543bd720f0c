use serde_json::{json, Value};

/// What went wrong, mapped onto the exit codes.
#[derive(Debug)]
pub enum Failure {
    /// Exit 1.
    Config {
        field: Option<String>,
        message: String,
    },
    /// Exit 3.
    Numerical { message: String },
}

impl Failure {
    pub fn config(field: &str, message: impl ToString) -> Self {
        Failure::Config {
            field: Some(field.to_string()),
            message: message.to_string(),
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Config { .. } => 1,
            Failure::Numerical { .. } => 3,
        }
    }

    pub fn diagnostic(&self) -> Value {
        match self {
            Failure::Config { field, message } => json!({
                "status": "config_error",
                "field": field,
                "message": message,
            }),
            Failure::Numerical { message } => json!({
                "status": "numerical_failure",
                "message": message,
            }),
        }
    }
}

fn is_numerical(e: &fracperim::Error) -> bool {
    matches!(
        e,
        fracperim::Error::ConvergenceFailure { .. } | fracperim::Error::ConfinementUndetermined
    )
}

/// Attach the offending option to a library error.
pub trait At<T> {
    fn at(self, field: &str) -> Result<T, Failure>;
}

impl<T> At<T> for fracperim::Result<T> {
    fn at(self, field: &str) -> Result<T, Failure> {
        self.map_err(|e| {
            if is_numerical(&e) {
                Failure::Numerical {
                    message: e.to_string(),
                }
            } else {
                Failure::config(field, e)
            }
        })
    }
}

/// Rendered output plus the property checks that did not hold.
pub struct Report {
    pub text: String,
    pub violations: Vec<String>,
}

impl Report {
    pub fn new(text: String) -> Self {
        Self {
            text,
            violations: Vec::new(),
        }
    }

    pub fn check(&mut self, ok: bool, what: impl Into<String>) {
        if !ok {
            self.violations.push(what.into());
        }
    }
}

pub enum Cell {
    F(f64),
    U(usize),
    B(bool),
}

impl std::fmt::Display for Cell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Cell::F(x) => write!(f, "{x:.16e}"),
            Cell::U(x) => write!(f, "{x}"),
            Cell::B(x) => write!(f, "{x}"),
        }
    }
}

/// CSV with the run configuration echoed as a leading `#` line.
pub fn csv(config: &Value, header: &[&str], rows: &[Vec<Cell>]) -> String {
    let mut out = format!("# fracperim {} {}\n", env!("CARGO_PKG_VERSION"), config);
    out += &header.join(",");
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|c| c.to_string()).collect();
        out += &cells.join(",");
        out.push('\n');
    }
    out
}

/// Pretty JSON with the configuration under `"config"`.
pub fn json_doc(config: &Value, mut body: Value) -> String {
    if let Value::Object(map) = &mut body {
        map.insert("config".into(), config.clone());
        map.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
    }
    let mut s = serde_json::to_string_pretty(&body).expect("JSON values serialize");
    s.push('\n');
    s
}

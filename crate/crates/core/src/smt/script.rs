use std::fmt::Write;

/// An SMT-LIB2 script. Serialization depends only on the order of calls.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SmtScript {
    pub logic: String,
    pub produce_model: bool,
    commands: Vec<String>,
    declared: std::collections::BTreeSet<String>,
}

impl SmtScript {
    pub fn new(logic: &str) -> SmtScript {
        SmtScript { logic: logic.to_string(), produce_model: false, commands: Vec::new(), declared: Default::default() }
    }

    pub fn with_model(mut self) -> SmtScript {
        self.produce_model = true;
        self
    }

    /// Declares a constant once; later calls with the same name are ignored.
    pub fn declare_const(&mut self, name: &str, sort: &str) {
        if self.declared.insert(name.to_string()) {
            self.commands.push(format!("(declare-fun {} () {})", name, sort));
        }
    }

    pub fn declare_fun(&mut self, name: &str, args: &[&str], ret: &str) {
        if self.declared.insert(name.to_string()) {
            self.commands.push(format!("(declare-fun {} ({}) {})", name, args.join(" "), ret));
        }
    }

    pub fn is_declared(&self, name: &str) -> bool {
        self.declared.contains(name)
    }

    pub fn comment(&mut self, text: &str) {
        for line in text.lines() {
            self.commands.push(format!("; {}", line));
        }
    }

    pub fn assert(&mut self, expr: impl Into<String>) {
        self.commands.push(format!("(assert {})", expr.into()));
    }

    /// Appends a command verbatim, e.g. a `define-fun`.
    pub fn command(&mut self, text: impl Into<String>) {
        self.commands.push(text.into());
    }

    pub fn assertions(&self) -> impl Iterator<Item = &str> {
        self.commands.iter().filter(|c| c.starts_with("(assert ")).map(|c| c.as_str())
    }

    pub fn to_smt2(&self) -> String {
        let mut out = String::new();
        if self.produce_model {
            out.push_str("(set-option :produce-models true)\n");
        }
        writeln!(out, "(set-logic {})", self.logic).unwrap();
        for c in &self.commands {
            out.push_str(c);
            out.push('\n');
        }
        out.push_str("(check-sat)\n");
        if self.produce_model {
            out.push_str("(get-model)\n");
        }
        out
    }
}

impl std::fmt::Display for SmtScript {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.to_smt2())
    }
}

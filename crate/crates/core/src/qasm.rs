//! OpenQASM 2 subset: parsing into a [`Circuit`] and emitting back.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt::Write as _;

use crate::circuit::{Circuit, Gate, GateKind};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Num(f64),
    Str(String),
    Sym(char),
    Arrow,
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(text: &str) -> Result<Vec<Token>> {
    let mut out = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let (mut i, mut line, mut col) = (0, 1, 1);
    while i < chars.len() {
        let ch = chars[i];
        let (l0, c0) = (line, col);
        let adv = |i: &mut usize, n: usize, col: &mut usize| {
            *i += n;
            *col += n;
        };
        if ch == '\n' {
            i += 1;
            line += 1;
            col = 1;
        } else if ch.is_whitespace() {
            adv(&mut i, 1, &mut col);
        } else if ch == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                adv(&mut i, 1, &mut col);
            }
        } else if ch.is_ascii_alphabetic() || ch == '_' {
            let s = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                adv(&mut i, 1, &mut col);
            }
            out.push(Token { tok: Tok::Ident(chars[s..i].iter().collect()), line: l0, col: c0 });
        } else if ch.is_ascii_digit() || (ch == '.' && chars.get(i + 1).is_some_and(|c| c.is_ascii_digit())) {
            let s = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                adv(&mut i, 1, &mut col);
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    while j < chars.len() && chars[j].is_ascii_digit() {
                        j += 1;
                    }
                    let n = j - i;
                    adv(&mut i, n, &mut col);
                }
            }
            let s: String = chars[s..i].iter().collect();
            let v: f64 = s.parse().map_err(|_| Error::Parse { line: l0, col: c0, msg: format!("bad number `{s}`") })?;
            out.push(Token { tok: Tok::Num(v), line: l0, col: c0 });
        } else if ch == '"' {
            let s = i + 1;
            adv(&mut i, 1, &mut col);
            while i < chars.len() && chars[i] != '"' && chars[i] != '\n' {
                adv(&mut i, 1, &mut col);
            }
            if i >= chars.len() || chars[i] != '"' {
                return Err(Error::Parse { line: l0, col: c0, msg: "unterminated string".into() });
            }
            out.push(Token { tok: Tok::Str(chars[s..i].iter().collect()), line: l0, col: c0 });
            adv(&mut i, 1, &mut col);
        } else if ch == '-' && chars.get(i + 1) == Some(&'>') {
            out.push(Token { tok: Tok::Arrow, line: l0, col: c0 });
            adv(&mut i, 2, &mut col);
        } else if "[](),;+-*/^".contains(ch) {
            out.push(Token { tok: Tok::Sym(ch), line: l0, col: c0 });
            adv(&mut i, 1, &mut col);
        } else {
            return Err(Error::Parse { line: l0, col: c0, msg: format!("unexpected character `{ch}`") });
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    eof: (usize, usize),
    regs: HashMap<String, (usize, usize)>,
    creg: HashMap<String, usize>,
    nq: usize,
    gates: Vec<(Gate, usize, usize)>,
}

/// Qubit operand: one index or a whole register.
enum Operand {
    One(usize),
    Reg(usize, usize),
}

impl Parser {
    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        let (line, col) = self.toks.get(self.pos).map(|t| (t.line, t.col)).unwrap_or(self.eof);
        Err(Error::Parse { line, col, msg: msg.into() })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|t| t.tok.clone());
        self.pos += 1;
        t
    }

    fn expect_sym(&mut self, c: char) -> Result<()> {
        if self.peek() == Some(&Tok::Sym(c)) {
            self.pos += 1;
            Ok(())
        } else {
            self.err(format!("expected `{c}`"))
        }
    }

    fn ident(&mut self) -> Result<String> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => self.err("expected identifier"),
        }
    }

    fn uint(&mut self) -> Result<usize> {
        match self.peek() {
            Some(Tok::Num(v)) if v.fract() == 0.0 && *v >= 0.0 => {
                let v = *v as usize;
                self.pos += 1;
                Ok(v)
            }
            _ => self.err("expected non-negative integer"),
        }
    }

    fn expr(&mut self) -> Result<f64> {
        let mut v = self.term()?;
        loop {
            match self.peek() {
                Some(Tok::Sym('+')) => {
                    self.pos += 1;
                    v += self.term()?;
                }
                Some(Tok::Sym('-')) => {
                    self.pos += 1;
                    v -= self.term()?;
                }
                _ => return Ok(v),
            }
        }
    }

    fn term(&mut self) -> Result<f64> {
        let mut v = self.unary()?;
        loop {
            match self.peek() {
                Some(Tok::Sym('*')) => {
                    self.pos += 1;
                    v *= self.unary()?;
                }
                Some(Tok::Sym('/')) => {
                    self.pos += 1;
                    v /= self.unary()?;
                }
                _ => return Ok(v),
            }
        }
    }

    fn unary(&mut self) -> Result<f64> {
        match self.peek() {
            Some(Tok::Sym('-')) => {
                self.pos += 1;
                Ok(-self.unary()?)
            }
            Some(Tok::Sym('+')) => {
                self.pos += 1;
                self.unary()
            }
            _ => self.atom(),
        }
    }

    fn atom(&mut self) -> Result<f64> {
        match self.peek().cloned() {
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Ok(v)
            }
            Some(Tok::Ident(s)) if s == "pi" => {
                self.pos += 1;
                Ok(PI)
            }
            Some(Tok::Sym('(')) => {
                self.pos += 1;
                let v = self.expr()?;
                self.expect_sym(')')?;
                Ok(v)
            }
            _ => self.err("expected number, `pi` or `(`"),
        }
    }

    fn operand(&mut self) -> Result<Operand> {
        let name = self.ident()?;
        let Some(&(off, size)) = self.regs.get(&name) else {
            return self.err(format!("unknown quantum register `{name}`"));
        };
        if self.peek() == Some(&Tok::Sym('[')) {
            self.pos += 1;
            let i = self.uint()?;
            if i >= size {
                self.pos -= 1;
                return self.err(format!("index {i} out of range for register `{name}` of size {size}"));
            }
            self.expect_sym(']')?;
            Ok(Operand::One(off + i))
        } else {
            Ok(Operand::Reg(off, size))
        }
    }

    fn statement(&mut self) -> Result<()> {
        let (line, col) = (self.toks[self.pos].line, self.toks[self.pos].col);
        let head = self.ident()?;
        match head.as_str() {
            "OPENQASM" => {
                match self.next() {
                    Some(Tok::Num(_)) => {}
                    _ => {
                        self.pos -= 1;
                        return self.err("expected version number");
                    }
                }
                self.expect_sym(';')
            }
            "include" => {
                match self.next() {
                    Some(Tok::Str(_)) => {}
                    _ => {
                        self.pos -= 1;
                        return self.err("expected file name");
                    }
                }
                self.expect_sym(';')
            }
            "qreg" | "creg" => {
                let name = self.ident()?;
                self.expect_sym('[')?;
                let n = self.uint()?;
                self.expect_sym(']')?;
                self.expect_sym(';')?;
                if head == "qreg" {
                    if self.regs.contains_key(&name) {
                        return self.err(format!("register `{name}` declared twice"));
                    }
                    self.regs.insert(name, (self.nq, n));
                    self.nq += n;
                } else {
                    self.creg.insert(name, n);
                }
                Ok(())
            }
            "measure" => {
                self.operand()?;
                if self.next() != Some(Tok::Arrow) {
                    self.pos -= 1;
                    return self.err("expected `->`");
                }
                let c = self.ident()?;
                if !self.creg.contains_key(&c) {
                    return self.err(format!("unknown classical register `{c}`"));
                }
                if self.peek() == Some(&Tok::Sym('[')) {
                    self.pos += 1;
                    self.uint()?;
                    self.expect_sym(']')?;
                }
                self.expect_sym(';')?;
                log::warn!("line {line}: measurement dropped");
                Ok(())
            }
            "gate" | "opaque" | "if" | "reset" => {
                self.pos -= 1;
                self.err(format!("unsupported statement `{head}`"))
            }
            _ => self.gate_statement(&head, line, col),
        }
    }

    fn gate_statement(&mut self, name: &str, line: usize, col: usize) -> Result<()> {
        let kind = match name {
            "u" | "U" => GateKind::U3,
            "CX" => GateKind::Cx,
            other => match GateKind::from_name(other) {
                Some(k) => k,
                None => return Err(Error::Parse { line, col, msg: format!("unknown gate `{name}`") }),
            },
        };
        let mut params = Vec::new();
        if self.peek() == Some(&Tok::Sym('(')) {
            self.pos += 1;
            if self.peek() != Some(&Tok::Sym(')')) {
                params.push(self.expr()?);
                while self.peek() == Some(&Tok::Sym(',')) {
                    self.pos += 1;
                    params.push(self.expr()?);
                }
            }
            self.expect_sym(')')?;
        }
        let mut ops = vec![self.operand()?];
        while self.peek() == Some(&Tok::Sym(',')) {
            self.pos += 1;
            ops.push(self.operand()?);
        }
        self.expect_sym(';')?;
        let perr = |msg: String| Error::Parse { line, col, msg };
        if kind == GateKind::Barrier {
            let mut qs = Vec::new();
            for o in ops {
                match o {
                    Operand::One(q) => qs.push(q),
                    Operand::Reg(off, n) => qs.extend(off..off + n),
                }
            }
            qs.dedup();
            let g = Gate::new(kind, qs, params).map_err(|e| perr(e.to_string()))?;
            self.gates.push((g, line, col));
            return Ok(());
        }
        // Whole-register operands broadcast; all registers must agree in size.
        let width = ops.iter().filter_map(|o| if let Operand::Reg(_, n) = o { Some(*n) } else { None }).max();
        let reps = width.unwrap_or(1);
        for o in &ops {
            if let Operand::Reg(_, n) = o {
                if *n != reps {
                    return Err(perr("register sizes differ in broadcast".into()));
                }
            }
        }
        for r in 0..reps {
            let qs = ops
                .iter()
                .map(|o| match o {
                    Operand::One(q) => *q,
                    Operand::Reg(off, _) => off + r,
                })
                .collect();
            let g = Gate::new(kind, qs, params.clone()).map_err(|e| perr(e.to_string()))?;
            self.gates.push((g, line, col));
        }
        Ok(())
    }
}

/// Parse OpenQASM 2 text. Multiple quantum registers are concatenated in
/// declaration order; measurements are dropped with a warning.
pub fn parse_qasm(text: &str) -> Result<Circuit> {
    let toks = lex(text)?;
    let eof = toks.last().map(|t| (t.line, t.col + 1)).unwrap_or((1, 1));
    let mut p = Parser { toks, pos: 0, eof, regs: HashMap::new(), creg: HashMap::new(), nq: 0, gates: Vec::new() };
    while p.pos < p.toks.len() {
        p.statement()?;
    }
    let mut c = Circuit::new(p.nq);
    for (g, line, col) in p.gates {
        c.push(g).map_err(|e| Error::Parse { line, col, msg: e.to_string() })?;
    }
    Ok(c)
}

/// Emit OpenQASM 2 with angles in shortest round-trip decimal form.
pub fn emit_qasm(circuit: &Circuit) -> Result<String> {
    let mut s = String::from("OPENQASM 2.0;\ninclude \"qelib1.inc\";\n");
    if circuit.global_phase != 0.0 {
        writeln!(s, "// global phase: {}", circuit.global_phase).unwrap();
    }
    writeln!(s, "qreg q[{}];", circuit.num_qubits).unwrap();
    for g in &circuit.gates {
        g.validate()?;
        s.push_str(g.kind.name());
        if !g.params.is_empty() {
            let ps: Vec<String> = g.params.iter().map(|p| format!("{p}")).collect();
            write!(s, "({})", ps.join(",")).unwrap();
        }
        let qs: Vec<String> = g.qubits.iter().map(|q| format!("q[{q}]")).collect();
        writeln!(s, " {};", qs.join(",")).unwrap();
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn sandwich_text() {
        let c = parse_qasm("qreg q[3]; cx q[0],q[1]; ccx q[0],q[1],q[2]; swap q[1],q[2];").unwrap();
        assert_eq!(c.gates, vec![Gate::cx(0, 1), Gate::ccx(0, 1, 2), Gate::swap(1, 2)]);
        let back = parse_qasm(&emit_qasm(&c).unwrap()).unwrap();
        assert_eq!(back.gates, c.gates);
    }

    #[test]
    fn angle_expressions() {
        let c = parse_qasm("qreg q[1]; rz(pi/4) q[0]; u(-pi/2, 2*(pi-1)/3, 1e-3) q[0];").unwrap();
        assert_eq!(c.gates[0], Gate::rz(0, PI / 4.0));
        assert_eq!(c.gates[1].kind, GateKind::U3);
        assert!((c.gates[1].params[1] - 2.0 * (PI - 1.0) / 3.0).abs() < 1e-15);
        assert_eq!(c.gates[1].params[2], 1e-3);
    }

    #[test]
    fn emitted_u3_text() {
        let c = Circuit::from_gates(1, vec![Gate::u3(0, FRAC_PI_2, -FRAC_PI_2, 0.0)]).unwrap();
        let s = emit_qasm(&c).unwrap();
        assert!(s.contains("u3(1.5707963267948966,-1.5707963267948966,0) q[0];"));
        let c = Circuit::from_gates(2, vec![Gate::rzx(0, 1, FRAC_PI_2)]).unwrap();
        assert_eq!(parse_qasm(&emit_qasm(&c).unwrap()).unwrap().gates, c.gates);
    }

    #[test]
    fn errors_carry_location() {
        match parse_qasm("qreg q[2];\ncz q[0],q[1];") {
            Err(Error::Parse { line: 2, col: 1, msg }) => assert!(msg.contains("cz")),
            other => panic!("{other:?}"),
        }
        match parse_qasm("qreg q[2];\ncx q[0],q[5];") {
            Err(Error::Parse { line: 2, .. }) => {}
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_qasm("qreg q[2]; cx q[0] q[1];"), Err(Error::Parse { .. })));
        assert!(matches!(parse_qasm("qreg q[2]; h q[0]"), Err(Error::Parse { .. })));
        assert!(matches!(parse_qasm("qreg q[1]; rz(pi q[0];"), Err(Error::Parse { .. })));
        assert!(matches!(parse_qasm("qreg q[1]; h q[0]; $"), Err(Error::Parse { .. })));
    }

    #[test]
    fn registers_measure_barrier() {
        let t = "OPENQASM 2.0;\ninclude \"qelib1.inc\";\nqreg a[2];\nqreg b[1];\ncreg c[3];\n\
                 h a;\ncx a[1],b[0];\nbarrier a,b;\nmeasure a[0] -> c[0];\nmeasure b -> c;\n";
        let c = parse_qasm(t).unwrap();
        assert_eq!(c.num_qubits, 3);
        assert_eq!(c.gates, vec![Gate::h(0), Gate::h(1), Gate::cx(1, 2), Gate::barrier(vec![0, 1, 2])]);
    }
}

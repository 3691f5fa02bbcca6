//! Line-oriented reaction DSL.
//!
//! ```text
//! # comments run to end of line
//! @species X1, X2, X3            # optional: fixes species order
//! @complexes X1, X2 + 2 X3       # optional: fixes complex order
//! 0 -> X1 ; k=4                  # constant inflow into complex X1
//! X1 <-> X2 + 2 X3 ; kf=2, kr=1  # reversible pair
//! X2 + 2 X3 -> 0 ; k=2           # mass-action outflow
//! ```
//!
//! Rates accept decimals, scientific notation and `p/q` fractions; each is
//! kept as an exact rational next to its f64 value.

use std::collections::HashMap;

use num_traits::{Signed, ToPrimitive, Zero};

use crate::error::ParseError;
use crate::exact::{parse_rational, Rational};
use crate::network::{Complex, Flow, Model, OpenSpec, Reaction, ReactionNetwork, SpeciesTable};

type Terms = Vec<(usize, u32)>;

struct Builder {
    species: Vec<String>,
    species_index: HashMap<String, usize>,
    complexes: Vec<Terms>,
    complex_index: HashMap<Terms, usize>,
    reactions: Vec<Reaction>,
    inflows: Vec<(usize, f64, usize)>,
    outflows: Vec<(usize, f64, usize)>,
}

impl Builder {
    fn species_id(&mut self, name: &str) -> usize {
        if let Some(&i) = self.species_index.get(name) {
            return i;
        }
        self.species.push(name.to_string());
        self.species_index.insert(name.to_string(), self.species.len() - 1);
        self.species.len() - 1
    }

    fn complex_id(&mut self, raw: &[(u32, String)]) -> usize {
        let mut acc: HashMap<usize, u32> = HashMap::new();
        for (n, s) in raw {
            let id = self.species_id(s);
            *acc.entry(id).or_default() += n;
        }
        let mut terms: Terms = acc.into_iter().collect();
        terms.sort_unstable();
        if let Some(&i) = self.complex_index.get(&terms) {
            return i;
        }
        self.complexes.push(terms.clone());
        self.complex_index.insert(terms, self.complexes.len() - 1);
        self.complexes.len() - 1
    }

    fn add_flow(&mut self, inflow: bool, complex: usize, rate: f64, line: usize) -> Result<(), ParseError> {
        let list = if inflow { &mut self.inflows } else { &mut self.outflows };
        if let Some(&(_, _, first)) = list.iter().find(|f| f.0 == complex) {
            return Err(ParseError::Invalid {
                line,
                message: format!(
                    "second {} for the same complex (first on line {first})",
                    if inflow { "inflow" } else { "outflow" }
                ),
            });
        }
        list.push((complex, rate, line));
        Ok(())
    }
}

struct Cursor<'a> {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    _src: &'a str,
}

impl<'a> Cursor<'a> {
    fn new(src: &'a str, line: usize) -> Self {
        Cursor {
            chars: src.chars().collect(),
            pos: 0,
            line,
            _src: src,
        }
    }

    fn column(&self) -> usize {
        self.pos + 1
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(char::is_whitespace) {
            self.pos += 1;
        }
    }

    fn at_end(&mut self) -> bool {
        self.skip_ws();
        self.pos >= self.chars.len()
    }

    fn error(&self, message: impl Into<String>) -> ParseError {
        ParseError::Syntax {
            line: self.line,
            column: self.column(),
            message: message.into(),
        }
    }

    fn eat(&mut self, s: &str) -> bool {
        self.skip_ws();
        let n = s.chars().count();
        if self.chars[self.pos..].iter().take(n).copied().eq(s.chars()) {
            self.pos += n;
            true
        } else {
            false
        }
    }

    fn ident(&mut self) -> Option<String> {
        self.skip_ws();
        let start = self.pos;
        match self.peek() {
            Some(c) if c.is_alphabetic() || c == '_' => self.pos += 1,
            _ => return None,
        }
        while self.peek().is_some_and(|c| c.is_alphanumeric() || c == '_') {
            self.pos += 1;
        }
        Some(self.chars[start..self.pos].iter().collect())
    }

    fn digits(&mut self) -> Option<String> {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        (self.pos > start).then(|| self.chars[start..self.pos].iter().collect())
    }

    /// `None` for the zero complex.
    fn complex(&mut self) -> Result<Option<Vec<(u32, String)>>, ParseError> {
        let mut terms = Vec::new();
        loop {
            self.skip_ws();
            let col = self.column();
            if self.peek() == Some('-') && !self.chars[self.pos..].starts_with(&['-', '>']) {
                return Err(ParseError::NegativeCoefficient {
                    line: self.line,
                    column: col,
                });
            }
            let coeff = self.digits();
            let name = self.ident();
            match (coeff, name) {
                (Some(c), None) if c.chars().all(|d| d == '0') && terms.is_empty() => {
                    return Ok(None);
                }
                (_, None) => return Err(self.error("expected a species name")),
                (coeff, Some(name)) => {
                    let n = match coeff {
                        None => 1,
                        Some(c) => c
                            .parse::<u32>()
                            .map_err(|_| self.error(format!("coefficient `{c}` is too large")))?,
                    };
                    if n == 0 {
                        return Err(ParseError::Syntax {
                            line: self.line,
                            column: col,
                            message: "zero coefficient".into(),
                        });
                    }
                    terms.push((n, name));
                }
            }
            if !self.eat("+") {
                return Ok(Some(terms));
            }
        }
    }

    /// `key=value` pairs up to the end of the line.
    fn rates(&mut self) -> Result<Vec<(String, String, usize)>, ParseError> {
        let mut out = Vec::new();
        loop {
            let Some(key) = self.ident() else {
                return Err(self.error("expected a rate such as `k=1.0`"));
            };
            if !self.eat("=") {
                return Err(self.error(format!("expected `=` after `{key}`")));
            }
            self.skip_ws();
            let col = self.column();
            let start = self.pos;
            while self.peek().is_some_and(|c| c != ',') {
                self.pos += 1;
            }
            let value: String = self.chars[start..self.pos].iter().collect();
            out.push((key, value.trim().to_string(), col));
            if !self.eat(",") {
                break;
            }
        }
        if !self.at_end() {
            return Err(self.error("unexpected trailing input"));
        }
        Ok(out)
    }
}

fn rate_value(key: &str, text: &str, line: usize, column: usize) -> Result<(f64, Rational), ParseError> {
    let exact = parse_rational(text).ok_or_else(|| ParseError::Syntax {
        line,
        column,
        message: format!("`{text}` is not a number"),
    })?;
    if exact.is_negative() || exact.is_zero() {
        return Err(ParseError::NonPositiveRate {
            line,
            key: key.into(),
            value: text.into(),
        });
    }
    let value = exact.to_f64().unwrap_or(f64::INFINITY);
    if !(value.is_finite() && value > 0.0) {
        return Err(ParseError::Syntax {
            line,
            column,
            message: format!("rate `{text}` is outside the f64 range"),
        });
    }
    Ok((value, exact))
}

fn take_rates<'k>(
    rates: &[(String, String, usize)],
    keys: &[&'k str],
    cur: &Cursor,
) -> Result<Vec<(f64, Rational)>, ParseError> {
    let given: Vec<&str> = rates.iter().map(|r| r.0.as_str()).collect();
    if given != keys {
        return Err(ParseError::Syntax {
            line: cur.line,
            column: rates.first().map_or(cur.column(), |r| r.2),
            message: format!("expected rates `{}`, got `{}`", keys.join(", "), given.join(", ")),
        });
    }
    rates
        .iter()
        .map(|(k, v, col)| rate_value(k, v, cur.line, *col))
        .collect()
}

/// Parses the DSL into a network plus its flows.
pub fn parse_network(text: &str) -> Result<Model, ParseError> {
    let mut b = Builder {
        species: Vec::new(),
        species_index: HashMap::new(),
        complexes: Vec::new(),
        complex_index: HashMap::new(),
        reactions: Vec::new(),
        inflows: Vec::new(),
        outflows: Vec::new(),
    };
    let mut last_line = 0;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        last_line = line;
        let body = raw.split('#').next().unwrap_or("");
        if body.trim().is_empty() {
            continue;
        }
        let mut cur = Cursor::new(body, line);
        cur.skip_ws();
        if cur.eat("@") {
            let name = cur.ident().unwrap_or_default();
            match name.as_str() {
                "species" => loop {
                    let Some(s) = cur.ident() else {
                        return Err(cur.error("expected a species name"));
                    };
                    b.species_id(&s);
                    if !cur.eat(",") {
                        if !cur.at_end() {
                            return Err(cur.error("expected `,`"));
                        }
                        break;
                    }
                },
                "complexes" => loop {
                    match cur.complex()? {
                        Some(terms) => {
                            b.complex_id(&terms);
                        }
                        None => return Err(cur.error("the zero complex cannot be declared")),
                    }
                    if !cur.eat(",") {
                        if !cur.at_end() {
                            return Err(cur.error("expected `,`"));
                        }
                        break;
                    }
                },
                _ => return Err(ParseError::UnknownDirective { line, name }),
            }
            continue;
        }

        let lhs = cur.complex()?;
        let reversible = if cur.eat("<->") {
            true
        } else if cur.eat("->") {
            false
        } else {
            return Err(cur.error("expected `->` or `<->`"));
        };
        let rhs = cur.complex()?;
        if !cur.eat(";") {
            return Err(cur.error("expected `;` before the rates"));
        }
        let rates = cur.rates()?;
        let keys: &[&str] = if reversible { &["kf", "kr"] } else { &["k"] };
        let vals = take_rates(&rates, keys, &cur)?;

        match (lhs, rhs) {
            (None, None) => {
                return Err(ParseError::Invalid {
                    line,
                    message: "`0 -> 0` is not a reaction".into(),
                })
            }
            (None, Some(t)) => {
                let c = b.complex_id(&t);
                b.add_flow(true, c, vals[0].0, line)?;
                if reversible {
                    b.add_flow(false, c, vals[1].0, line)?;
                }
            }
            (Some(t), None) => {
                let c = b.complex_id(&t);
                b.add_flow(false, c, vals[0].0, line)?;
                if reversible {
                    b.add_flow(true, c, vals[1].0, line)?;
                }
            }
            (Some(l), Some(r)) => {
                let s = b.complex_id(&l);
                let p = b.complex_id(&r);
                if s == p {
                    return Err(ParseError::Invalid {
                        line,
                        message: "substrate and product are the same complex".into(),
                    });
                }
                let j = b.reactions.len();
                let mut fwd = Reaction::new(s, p, vals[0].0);
                fwd.exact_rate = Some(vals[0].1.clone());
                if reversible {
                    let mut rev = Reaction::new(p, s, vals[1].0);
                    rev.exact_rate = Some(vals[1].1.clone());
                    fwd.reverse = Some(j + 1);
                    rev.reverse = Some(j);
                    b.reactions.push(fwd);
                    b.reactions.push(rev);
                } else {
                    b.reactions.push(fwd);
                }
            }
        }
    }

    let invalid = |message: String| ParseError::Invalid {
        line: last_line,
        message,
    };
    let m = b.species.len();
    let species = SpeciesTable::new(b.species).map_err(|e| invalid(e.to_string()))?;
    let complexes = b
        .complexes
        .iter()
        .map(|terms| {
            let mut v = vec![0; m];
            for &(i, n) in terms {
                v[i] = n;
            }
            Complex::new(v)
        })
        .collect();
    let network = ReactionNetwork::new(species, complexes, b.reactions).map_err(|e| invalid(e.to_string()))?;
    let flows = |list: Vec<(usize, f64, usize)>| {
        list.into_iter()
            .map(|(complex, rate, _)| Flow { complex, rate })
            .collect()
    };
    let open = OpenSpec {
        inflows: flows(b.inflows),
        outflows: flows(b.outflows),
    };
    Model::new(network, Some(open)).map_err(|e| invalid(e.to_string()))
}

/// Decimal expansion of `r` when it terminates.
fn exact_decimal(r: &Rational) -> Option<String> {
    use num_bigint::BigInt;
    use num_integer::Integer;
    let mut d = r.denom().clone();
    let (two, five) = (BigInt::from(2), BigInt::from(5));
    let mut places = 0usize;
    let (mut twos, mut fives) = (0usize, 0usize);
    while d.is_even() {
        d /= &two;
        twos += 1;
    }
    while (&d % &five).is_zero() {
        d /= &five;
        fives += 1;
    }
    if d != BigInt::from(1) {
        return None;
    }
    places = places.max(twos).max(fives);
    let scaled = (r * Rational::from_integer(num_traits::pow(BigInt::from(10), places))).to_integer();
    let digits = scaled.abs().to_string();
    let sign = if scaled.is_negative() { "-" } else { "" };
    if places == 0 {
        return Some(format!("{sign}{digits}"));
    }
    let padded = format!("{digits:0>width$}", width = places + 1);
    let (int, frac) = padded.split_at(padded.len() - places);
    Some(format!("{sign}{int}.{frac}"))
}

fn rate_text(rate: f64, exact: Option<&Rational>) -> String {
    match exact {
        Some(r) => exact_decimal(r).unwrap_or_else(|| r.to_string()),
        None => format!("{rate:?}"),
    }
}

/// Writes a model back to the DSL. Parsing the output reproduces the
/// model (species, complex and reaction order included).
pub fn to_dsl(model: &Model) -> String {
    let n = &model.network;
    let mut out = String::new();
    out.push_str(&format!("@species {}\n", n.species().names().join(", ")));
    let labels: Vec<String> = (0..n.num_complexes()).map(|i| n.complex_label(i)).collect();
    if !labels.is_empty() {
        out.push_str(&format!("@complexes {}\n", labels.join(", ")));
    }
    for (j, rx) in n.reactions().iter().enumerate() {
        let (s, p) = (&labels[rx.substrate], &labels[rx.product]);
        match rx.reverse {
            Some(r) if r > j => {
                let rev = &n.reactions()[r];
                out.push_str(&format!(
                    "{s} <-> {p} ; kf={}, kr={}\n",
                    rate_text(rx.rate, rx.exact_rate.as_ref()),
                    rate_text(rev.rate, rev.exact_rate.as_ref())
                ));
            }
            Some(_) => {}
            None => out.push_str(&format!(
                "{s} -> {p} ; k={}\n",
                rate_text(rx.rate, rx.exact_rate.as_ref())
            )),
        }
    }
    if let Some(open) = &model.open {
        for f in &open.inflows {
            out.push_str(&format!("0 -> {} ; k={}\n", labels[f.complex], rate_text(f.rate, None)));
        }
        for f in &open.outflows {
            out.push_str(&format!("{} -> 0 ; k={}\n", labels[f.complex], rate_text(f.rate, None)));
        }
    }
    out
}

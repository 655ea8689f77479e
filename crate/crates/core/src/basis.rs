//! Operator bases: a small word parser and the preset bases.
//!
//! Words are written the way they appear in tables, e.g. `Vp^2r^2`,
//! `q(1/r - ip)` or `qur^2p`. Recognized atoms:
//!
//! * `r`, `p`, `i`, decimal or integer numbers
//! * `V`, `V'`, `V''`, ... for the potential and its derivatives
//! * `q = r^(1/2)` and `u = (-V)^(1/2)`
//!
//! Juxtaposition multiplies, `/` divides by the next atom (only `r`, `q`
//! and numbers can be inverted), `^` raises to an integer power, and
//! parentheses with `+`/`-` build sums.

use alloc::borrow::ToOwned;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::opalg::{Algebra, Factor, OperatorPoly};
use crate::rational::{cq, creal, parse_decimal, q, Q};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BlockKind {
    /// `<A_i^dagger A_j>`, positive in every state.
    Gram,
    /// `<B_i^dagger [H, B_j]>`, positive in the ground state only.
    Ground,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Element {
    pub label: String,
    pub op: OperatorPoly,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Basis {
    pub label: String,
    pub kind: BlockKind,
    pub elements: Vec<Element>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BasisSet {
    pub name: String,
    pub blocks: Vec<Basis>,
}

impl BasisSet {
    pub fn has_ground_blocks(&self) -> bool {
        self.blocks.iter().any(|b| b.kind == BlockKind::Ground)
    }

    pub fn gram_only(&self) -> BasisSet {
        BasisSet {
            name: self.name.clone(),
            blocks: self.blocks.iter().filter(|b| b.kind == BlockKind::Gram).cloned().collect(),
        }
    }
}

impl Basis {
    pub fn parse(label: &str, kind: BlockKind, words: &[&str]) -> Result<Basis> {
        let elements = words
            .iter()
            .map(|w| Ok(Element { label: (*w).to_owned(), op: parse_operator(w)? }))
            .collect::<Result<Vec<_>>>()?;
        Ok(Basis { label: label.to_owned(), kind, elements })
    }
}

/// Parses one operator expression into canonical symbolic form.
pub fn parse_operator(s: &str) -> Result<OperatorPoly> {
    let mut p = Parser { s: s.as_bytes(), pos: 0, alg: Algebra::symbolic() };
    let out = p.expr()?;
    p.skip_ws();
    if p.pos != p.s.len() {
        return Err(p.err("unexpected trailing input"));
    }
    Ok(out)
}

struct Parser<'a> {
    s: &'a [u8],
    pos: usize,
    alg: Algebra,
}

impl Parser<'_> {
    fn err(&self, msg: &str) -> Error {
        Error::Parse { pos: self.pos, msg: msg.to_string() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.s.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<OperatorPoly> {
        let mut sign = 1;
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                sign = -1;
            }
            Some(b'+') => self.pos += 1,
            _ => {}
        }
        let mut acc = self.term()?.scale(&creal(q(sign)));
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    acc = acc.add(&self.term()?);
                }
                Some(b'-') => {
                    self.pos += 1;
                    acc = acc.sub(&self.term()?);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<OperatorPoly> {
        let mut acc: Option<OperatorPoly> = None;
        loop {
            let invert = match self.peek() {
                Some(b'/') => {
                    if acc.is_none() {
                        return Err(self.err("'/' without a numerator"));
                    }
                    self.pos += 1;
                    true
                }
                Some(b'*') => {
                    self.pos += 1;
                    false
                }
                Some(c) if c.is_ascii_alphanumeric() || c == b'(' || c == b'.' => false,
                _ => break,
            };
            let item = self.item(invert)?;
            acc = Some(match acc {
                None => item,
                Some(a) => self.alg.multiply(&a, &item),
            });
        }
        acc.ok_or_else(|| self.err("expected an operator"))
    }

    fn exponent(&mut self) -> Result<i32> {
        if self.peek() != Some(b'^') {
            return Ok(1);
        }
        self.pos += 1;
        self.skip_ws();
        let paren = self.peek() == Some(b'(');
        if paren {
            self.pos += 1;
        }
        let start = self.pos;
        if self.peek() == Some(b'-') {
            self.pos += 1;
        }
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        let txt = core::str::from_utf8(&self.s[start..self.pos]).map_err(|_| self.err("bad exponent"))?;
        let e: i32 = txt.parse().map_err(|_| self.err("bad exponent"))?;
        if paren {
            if self.peek() != Some(b')') {
                return Err(self.err("expected ')'"));
            }
            self.pos += 1;
        }
        Ok(e)
    }

    fn item(&mut self, invert: bool) -> Result<OperatorPoly> {
        let c = self.peek().ok_or_else(|| self.err("unexpected end"))?;
        let start = self.pos;
        let (base, invertible): (OperatorPoly, Option<Factor>) = match c {
            b'(' => {
                self.pos += 1;
                let e = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.err("expected ')'"));
                }
                self.pos += 1;
                (e, None)
            }
            b'r' => {
                self.pos += 1;
                (OperatorPoly::r(2), Some(Factor::R(2)))
            }
            b'q' => {
                self.pos += 1;
                (OperatorPoly::r(1), Some(Factor::R(1)))
            }
            b'p' => {
                self.pos += 1;
                (OperatorPoly::p(1), None)
            }
            b'u' => {
                self.pos += 1;
                (OperatorPoly::from_factor(&Factor::W(1)), None)
            }
            b'i' => {
                self.pos += 1;
                (OperatorPoly::scalar(cq(q(0), q(1))), None)
            }
            b'V' => {
                self.pos += 1;
                let mut k = 0u8;
                while self.s.get(self.pos) == Some(&b'\'') {
                    self.pos += 1;
                    k += 1;
                }
                (OperatorPoly::from_factor(&Factor::V(k)), None)
            }
            c if c.is_ascii_digit() || c == b'.' => {
                while self.pos < self.s.len() && (self.s[self.pos].is_ascii_digit() || self.s[self.pos] == b'.') {
                    self.pos += 1;
                }
                let txt = core::str::from_utf8(&self.s[start..self.pos]).map_err(|_| self.err("bad number"))?;
                let v: Q = parse_decimal(txt).ok_or_else(|| self.err("bad number"))?;
                if invert {
                    if v.is_zero() {
                        return Err(self.err("division by zero"));
                    }
                    let e = self.exponent()?;
                    return Ok(OperatorPoly::scalar(creal(num_traits::pow(v.recip(), e.unsigned_abs() as usize))));
                }
                let e = self.exponent()?;
                if e < 0 {
                    return Ok(OperatorPoly::scalar(creal(num_traits::pow(v.recip(), e.unsigned_abs() as usize))));
                }
                return Ok(OperatorPoly::scalar(creal(num_traits::pow(v, e as usize))));
            }
            _ => return Err(self.err("unknown symbol")),
        };
        let e = self.exponent()?;
        let e = if invert { -e } else { e };
        if e >= 0 {
            return Ok(self.alg.pow(&base, e as u32));
        }
        match invertible {
            Some(Factor::R(s)) => Ok(OperatorPoly::r(s * e)),
            _ => Err(Error::Parse { pos: start, msg: "only r, q and numbers can be inverted".into() }),
        }
    }
}

const COULOMB_A: &[&str] = &["1", "p", "V"];
const COULOMB_B: &[&str] = &["r", "rp"];

const YUKAWA_M1: &[&str] = &[
    "1", "1/r", "p", "V", "rp^2", "Vpr", "pVr", "Vp^2r^2", "p^2Vr^2", "rp", "Vr", "r^2p^2", "Vr^2p", "r^2", "r", "r^2p",
    "Vr^2",
];
const YUKAWA_M2: &[&str] = &[
    "q", "q/r", "qp", "qV", "qrp^2", "qVpr", "qpVr", "qVp^2r^2", "qp^2Vr^2", "qrp", "qVr", "qr^2p^2", "qVr^2p", "qr^2",
    "qr", "qr^2p", "qVr^2",
];
const YUKAWA_M3: &[&str] = &["ur^2", "ur", "ur^2p", "u", "urp", "ur^2p^2"];
const YUKAWA_M4: &[&str] = &["qur^2", "qur", "qur^2p", "qu", "qurp", "qur^2p^2", "qu/r", "qup", "qurp^2"];
const YUKAWA_G1: &[&str] = &["1", "r^3", "r^3p", "Vr^3", "r^2", "r", "r^2p", "Vr^2", "rp", "Vr", "r^2p^2"];
const YUKAWA_G2: &[&str] = &["qr^2", "qr", "qr^2p", "qVr^2", "q", "qrp", "qVr", "qr^2p^2", "qV", "qrp^2"];

const GAUSSIAN_M1: &[&str] =
    &["1", "1/r", "p", "V", "rp^2", "Vrp", "rp", "Vr", "r^2p^2", "Vr^2p", "r^2", "r", "r^2p", "Vr^2"];
const GAUSSIAN_M2: &[&str] =
    &["q", "q/r", "qp", "qV", "qrp^2", "qVpr", "qrp", "qVr", "qr^2p^2", "qVr^2p", "qr^2", "qr", "qr^2p", "qVr^2"];
const GAUSSIAN_M3: &[&str] = &["ur^2", "ur", "ur^2p", "u", "urp", "u/r", "up", "urp^2"];
const GAUSSIAN_M4: &[&str] = &["qur^2", "qur", "qur^2p", "qu", "qurp", "qu/r", "qup", "qurp^2"];
const GAUSSIAN_G1: &[&str] = &["1/r - ip", "rp", "r^2p^2", "r", "r^2p", "r^2", "V", "Vr", "Vr^2"];
const GAUSSIAN_G2: &[&str] =
    &["q", "q(1/r - ip)", "qV", "qrp^2", "qrp", "qVr", "qr^2p^2", "qr^2", "qr", "qr^2p", "qVr^2"];

const CORNELL_M1: &[&str] = &["1", "1/r", "p", "V", "rp^2", "Vpr", "rp", "Vr", "r^2p^2", "Vr^2p", "r", "r^2p", "Vr^2"];
const CORNELL_M2: &[&str] =
    &["q", "q/r", "qp", "qV", "qrp^2", "qVpr", "qrp", "qVr", "qr^2p^2", "qVr^2p", "qr", "qr^2p", "qVr^2"];
const CORNELL_G1: &[&str] = &["1", "rp", "Vr", "r^2p^2", "r", "r^2p", "Vr^2", "r^3p^2", "r^2", "r^3p", "Vr^3"];
const CORNELL_G2: &[&str] = &["q", "qrp", "qVr", "qr^2p^2", "qr", "qr^2p", "qVr^2", "qr^2", "qr^3p", "Vr^3"];

const CONFORMAL2_M1: &[&str] = &["1", "r"];
const CONFORMAL2_M2: &[&str] = &["q/r", "q"];
const CONFORMAL3_M1: &[&str] = &["1", "r", "r^2"];
const CONFORMAL3_M2: &[&str] = &["q/r", "q", "qr"];

pub const PRESET_NAMES: &[&str] =
    &["coulomb-s2", "yukawa-s3", "gaussian-s4", "cornell-s5", "conformal-2", "conformal-3"];

/// Looks up a named preset basis set.
pub fn preset(name: &str) -> Result<BasisSet> {
    use BlockKind::{Gram, Ground};
    let spec: &[(&str, BlockKind, &[&str])] = match name {
        "coulomb-s2" => &[("M", Gram, COULOMB_A), ("G", Ground, COULOMB_B)],
        "yukawa-s3" => &[
            ("M1", Gram, YUKAWA_M1),
            ("M2", Gram, YUKAWA_M2),
            ("M3", Gram, YUKAWA_M3),
            ("M4", Gram, YUKAWA_M4),
            ("G1", Ground, YUKAWA_G1),
            ("G2", Ground, YUKAWA_G2),
        ],
        "gaussian-s4" => &[
            ("M1", Gram, GAUSSIAN_M1),
            ("M2", Gram, GAUSSIAN_M2),
            ("M3", Gram, GAUSSIAN_M3),
            ("M4", Gram, GAUSSIAN_M4),
            ("G1", Ground, GAUSSIAN_G1),
            ("G2", Ground, GAUSSIAN_G2),
        ],
        "cornell-s5" => &[
            ("M1", Gram, CORNELL_M1),
            ("M2", Gram, CORNELL_M2),
            ("G1", Ground, CORNELL_G1),
            ("G2", Ground, CORNELL_G2),
        ],
        "conformal-2" => &[("M1", Gram, CONFORMAL2_M1), ("M2", Gram, CONFORMAL2_M2)],
        "conformal-3" => &[("M1", Gram, CONFORMAL3_M1), ("M2", Gram, CONFORMAL3_M2)],
        _ => return Err(Error::InvalidParameter(alloc::format!("unknown basis preset '{name}'"))),
    };
    let blocks = spec.iter().map(|(l, k, w)| Basis::parse(l, *k, w)).collect::<Result<Vec<_>>>()?;
    Ok(BasisSet { name: name.to_owned(), blocks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::opalg::FuncKey;

    #[test]
    fn parses_simple_words() {
        let alg = Algebra::symbolic();
        assert_eq!(parse_operator("1/r").unwrap(), OperatorPoly::r(-2));
        assert_eq!(parse_operator("q").unwrap(), OperatorPoly::r(1));
        assert_eq!(
            parse_operator("rp^2").unwrap(),
            alg.canonicalize(&[Factor::R(2), Factor::P, Factor::P])
        );
        assert_eq!(
            parse_operator("pVr").unwrap(),
            alg.canonicalize(&[Factor::P, Factor::V(0), Factor::R(2)])
        );
    }

    #[test]
    fn parses_sums_and_scalars() {
        let op = parse_operator("q(1/r - ip)").unwrap();
        let want = OperatorPoly::r(-1).add(&OperatorPoly::term(cq(q(0), q(-1)), FuncKey::r(1), 1));
        assert_eq!(op, want);
        assert_eq!(parse_operator("2r").unwrap(), OperatorPoly::r(2).scale(&creal(q(2))));
    }

    #[test]
    fn u_squared_is_minus_v() {
        assert_eq!(parse_operator("uu").unwrap(), parse_operator("-V").unwrap());
        assert_eq!(parse_operator("V''").unwrap(), OperatorPoly::from_factor(&Factor::V(2)));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(parse_operator("x").is_err());
        assert!(parse_operator("1/p").is_err());
        assert!(parse_operator("r(").is_err());
    }

    #[test]
    fn presets_have_paper_sizes() {
        let sizes = |n: &str| preset(n).unwrap().blocks.iter().map(|b| b.elements.len()).collect::<Vec<_>>();
        assert_eq!(sizes("yukawa-s3"), [17, 17, 6, 9, 11, 10]);
        assert_eq!(sizes("gaussian-s4"), [14, 14, 8, 8, 9, 11]);
        assert_eq!(sizes("cornell-s5"), [13, 13, 11, 10]);
        assert_eq!(sizes("coulomb-s2"), [3, 2]);
        assert_eq!(sizes("conformal-3"), [3, 3]);
        assert!(preset("nope").is_err());
    }
}

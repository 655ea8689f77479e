//! SDPA sparse format (`.dat-s`).
//!
//! SDPA states the primal as `min c.x` subject to `sum x_i F_i - F_0 >= 0`.
//! Our pencils read `F0 + sum y_i F_i >= 0`, so the constant matrix is
//! written negated. Maximization is written as minimization of `-c`. The
//! direction, objective offset and variable names travel in leading comment
//! lines, which other SDPA readers skip.
//!
//! Values are printed with 17 significant digits, which is enough for every
//! double to survive a write/read cycle unchanged.

use std::fmt::Write as _;

use cpboot_core::rational::{parse_decimal, to_f64, Q};
use cpboot_core::sdp::{Direction, Pencil, PsdBlock, SdpInstance};

use crate::error::CliError;

fn fmt_value(v: f64) -> String {
    format!("{v:.16e}")
}

/// Renders an instance as SDPA sparse text.
pub fn export_sdpa(inst: &SdpInstance) -> String {
    let mut out = String::new();
    let sign = match inst.direction {
        Direction::Minimize => 1.0,
        Direction::Maximize => -1.0,
    };
    let dir = match inst.direction {
        Direction::Minimize => "minimize",
        Direction::Maximize => "maximize",
    };
    let _ = writeln!(out, "* cpboot instance");
    let _ = writeln!(out, "* direction {dir}");
    let _ = writeln!(out, "* objective_offset {}", fmt_value(to_f64(&inst.objective_constant)));
    for (i, name) in inst.var_names.iter().enumerate() {
        let _ = writeln!(out, "* var {} {name}", i + 1);
    }
    for b in &inst.blocks {
        let _ = writeln!(out, "* block {} {}{}", b.label, b.size, if b.ground_only { " ground" } else { "" });
    }
    let _ = writeln!(out, "{} = mDIM", inst.num_vars());
    let _ = writeln!(out, "{} = nBLOCK", inst.blocks.len());
    let sizes: Vec<String> = inst.blocks.iter().map(|b| b.size.to_string()).collect();
    let _ = writeln!(out, "{} = bLOCKsTRUCT", sizes.join(" "));
    let c: Vec<String> = inst.objective.iter().map(|v| fmt_value(sign * to_f64(v))).collect();
    let _ = writeln!(out, "{}", c.join(" "));
    for (k, b) in inst.blocks.iter().enumerate() {
        for (&(i, j), v) in &b.constant.entries {
            let _ = writeln!(out, "0 {} {} {} {}", k + 1, i + 1, j + 1, fmt_value(-to_f64(v)));
        }
    }
    for var in 0..inst.num_vars() {
        for (k, b) in inst.blocks.iter().enumerate() {
            for (&(i, j), v) in &b.coeffs[var].entries {
                let _ = writeln!(out, "{} {} {} {} {}", var + 1, k + 1, i + 1, j + 1, fmt_value(to_f64(v)));
            }
        }
    }
    out
}

fn bad(line: usize, msg: impl Into<String>) -> CliError {
    CliError::Format(format!("SDPA line {line}: {}", msg.into()))
}

fn number(tok: &str, line: usize) -> Result<Q, CliError> {
    let t = tok.trim_matches(|c: char| matches!(c, ',' | '{' | '}' | '(' | ')'));
    // exact decimal, so the stored value is the one printed
    parse_decimal(t).ok_or_else(|| bad(line, format!("not a number: {tok:?}")))
}

/// Parses SDPA sparse text. Comment lines written by [`export_sdpa`] restore
/// the direction, offset, names and block labels; plain files get defaults.
pub fn parse_sdpa(text: &str) -> Result<SdpInstance, CliError> {
    let mut direction = Direction::Minimize;
    let mut offset = Q::from_integer(0.into());
    let mut names: Vec<(usize, String)> = Vec::new();
    let mut labels: Vec<(String, bool)> = Vec::new();
    let mut body: Vec<(usize, &str)> = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('*').or_else(|| line.strip_prefix('"')) {
            let mut it = rest.split_whitespace();
            match it.next() {
                Some("direction") if body.is_empty() => {
                    direction = match it.next() {
                        Some("maximize") => Direction::Maximize,
                        _ => Direction::Minimize,
                    }
                }
                Some("objective_offset") if body.is_empty() => {
                    offset = number(it.next().unwrap_or(""), n + 1)?;
                }
                Some("var") if body.is_empty() => {
                    let idx: usize = it.next().and_then(|s| s.parse().ok()).ok_or_else(|| bad(n + 1, "bad var comment"))?;
                    names.push((idx, it.collect::<Vec<_>>().join(" ")));
                }
                Some("block") if body.is_empty() => {
                    let label = it.next().unwrap_or("").to_owned();
                    let _size = it.next();
                    labels.push((label, it.next() == Some("ground")));
                }
                _ => {}
            }
            continue;
        }
        body.push((n + 1, line));
    }
    let mut lines = body.into_iter();
    let mut header = |what: &str| {
        lines.next().ok_or_else(|| CliError::Format(format!("SDPA input ends before {what}")))
    };
    let first_int = |(n, l): (usize, &str)| -> Result<usize, CliError> {
        let t = l.split(|c: char| c.is_whitespace() || c == '=').find(|t| !t.is_empty()).unwrap_or("");
        t.parse().map_err(|_| bad(n, format!("expected an integer, got {t:?}")))
    };
    let m = first_int(header("mDIM")?)?;
    let nblock = first_int(header("nBLOCK")?)?;
    let (n, l) = header("bLOCKsTRUCT")?;
    let sizes: Vec<i64> = l
        .split(|c: char| c.is_whitespace() || matches!(c, ',' | '{' | '}' | '(' | ')'))
        .filter(|t| !t.is_empty())
        .take(nblock)
        .map(|t| t.parse::<i64>().map_err(|_| bad(n, format!("bad block size {t:?}"))))
        .collect::<Result<_, _>>()?;
    if sizes.len() != nblock {
        return Err(bad(n, format!("expected {nblock} block sizes")));
    }
    if let Some(s) = sizes.iter().find(|&&s| s <= 0) {
        return Err(bad(n, format!("diagonal or empty block {s} is not supported")));
    }
    // the objective vector may wrap over several lines
    let mut c: Vec<Q> = Vec::with_capacity(m);
    while c.len() < m {
        let (n, l) = header("objective vector")?;
        for tok in l.split(|ch: char| ch.is_whitespace() || ch == ',').filter(|t| !t.is_empty() && !matches!(*t, "{" | "}")) {
            if c.len() < m {
                c.push(number(tok, n)?);
            }
        }
    }
    let mut blocks: Vec<PsdBlock> = sizes
        .iter()
        .enumerate()
        .map(|(k, &s)| {
            let (label, ground_only) = labels.get(k).cloned().unwrap_or_else(|| (format!("B{}", k + 1), false));
            PsdBlock { label, ground_only, size: s as usize, constant: Pencil::default(), coeffs: vec![Pencil::default(); m] }
        })
        .collect();
    for (n, l) in lines {
        let toks: Vec<&str> = l.split_whitespace().collect();
        if toks.len() != 5 {
            return Err(bad(n, "expected `matno blkno i j value`"));
        }
        let idx = |t: &str| t.parse::<usize>().map_err(|_| bad(n, format!("bad index {t:?}")));
        let (mat, blk, i, j) = (idx(toks[0])?, idx(toks[1])?, idx(toks[2])?, idx(toks[3])?);
        let v = number(toks[4], n)?;
        if mat > m || blk == 0 || blk > nblock {
            return Err(bad(n, "matrix or block index out of range"));
        }
        let b = &mut blocks[blk - 1];
        if i == 0 || j == 0 || i > b.size || j > b.size {
            return Err(bad(n, "entry outside its block"));
        }
        if mat == 0 {
            b.constant.add(i - 1, j - 1, &-v);
        } else {
            b.coeffs[mat - 1].add(i - 1, j - 1, &v);
        }
    }
    let objective = match direction {
        Direction::Minimize => c,
        Direction::Maximize => c.into_iter().map(|v| -v).collect(),
    };
    let mut var_names: Vec<String> = (1..=m).map(|i| format!("y{i}")).collect();
    for (i, name) in names {
        if (1..=m).contains(&i) {
            var_names[i - 1] = name;
        }
    }
    Ok(SdpInstance { var_names, blocks, objective, objective_constant: offset, direction })
}

#[cfg(test)]
mod tests {
    use super::*;
    use cpboot_core::rational::q;

    fn tiny() -> SdpInstance {
        // x >= 2 as a 1x1 block [x - 2]
        let mut f0 = Pencil::default();
        f0.add(0, 0, &q(-2));
        let mut f1 = Pencil::default();
        f1.add(0, 0, &q(1));
        SdpInstance {
            var_names: vec!["x".into()],
            blocks: vec![PsdBlock { label: "B".into(), ground_only: false, size: 1, constant: f0, coeffs: vec![f1] }],
            objective: vec![q(1)],
            objective_constant: q(0),
            direction: Direction::Minimize,
        }
    }

    #[test]
    fn one_by_one_block() {
        let text = export_sdpa(&tiny());
        let body: Vec<&str> = text.lines().filter(|l| !l.starts_with('*')).collect();
        assert_eq!(body[0], "1 = mDIM");
        assert_eq!(body[2], "1 = bLOCKsTRUCT");
        assert_eq!(body[4], "0 1 1 1 2.0000000000000000e0");
        assert_eq!(parse_sdpa(&text).unwrap(), tiny());
    }

    #[test]
    fn plain_sdpa_is_read() {
        let text = "\"a comment\n2 =mdim\n1 =nblocks\n{2}\n{1.0, -1.5}\n0 1 1 2 1\n1 1 1 1 1\n2 1 2 2 1.0e0\n";
        let inst = parse_sdpa(text).unwrap();
        assert_eq!(inst.num_vars(), 2);
        assert_eq!(inst.blocks[0].size, 2);
        assert_eq!(inst.blocks[0].constant.entries.get(&(0, 1)), Some(&q(-1)));
        assert_eq!(inst.objective[1], cpboot_core::rational::qf(-3, 2));
    }

    #[test]
    fn truncated_input_is_rejected() {
        assert!(parse_sdpa("1 = mDIM\n").is_err());
        assert!(parse_sdpa("1\n1\n2\n1.0\n1 1 3 3 1.0\n").is_err());
    }
}

//! Sparse SDPA (`.dat-s`) export and import.
//!
//! SDPA solves `min c^T x s.t. Σ F_i x_i − F0 ⪰ 0`, so `F_i = G_i` and
//! `F0 = −G0` for the standard form `G0 + Σ y_i G_i ⪰ 0`. LP rows and
//! equalities share one trailing diagonal block; each equality `e^T y = f`
//! becomes the row pair `e^T y − f ≥ 0`, `f − e^T y ≥ 0`. Comment headers
//! record the pair count, sense and objective offset so re-import restores
//! the original equalities.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use super::program::{EqRow, LmiBlock, LpRow, Program, Sense, SparseEntries, StandardForm};
use crate::error::{Error, Result};

const PAIRS_TAG: &str = "qrelent: equality-pairs";
const SENSE_TAG: &str = "qrelent: sense";

/// Writes the real-embedded program in sparse SDPA format.
pub fn export_sdpa(prog: &Program, path: impl AsRef<Path>) -> Result<()> {
    let sf = prog.standard_form()?;
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_sdpa(&sf, &mut file)?;
    file.flush()?;
    Ok(())
}

pub fn write_sdpa(sf: &StandardForm, out: &mut impl Write) -> Result<()> {
    let m = sf.n_vars;
    let q = sf.eqs.len();
    let diag = sf.lp.len() + 2 * q;
    let mut s = String::new();
    let sense = match sf.sense {
        Sense::Minimize => "minimize",
        Sense::Maximize => "maximize",
    };
    writeln!(s, "\"{SENSE_TAG} {sense} offset {:e}", sf.offset).unwrap();
    writeln!(s, "\"{PAIRS_TAG} {q}").unwrap();
    writeln!(s, "{m}").unwrap();
    let nblocks = sf.blocks.len() + usize::from(diag > 0);
    writeln!(s, "{nblocks}").unwrap();
    let mut sizes: Vec<String> = sf.blocks.iter().map(|b| b.size.to_string()).collect();
    if diag > 0 {
        sizes.push(format!("-{diag}"));
    }
    writeln!(s, "{}", sizes.join(" ")).unwrap();
    let cs: Vec<String> = sf.c.iter().map(|v| format!("{v:e}")).collect();
    writeln!(s, "{}", cs.join(" ")).unwrap();

    // Gather per-matrix entries: matno → (block, i, j, value), 1-based.
    let mut per_mat: Vec<Vec<(usize, usize, usize, f64)>> = vec![Vec::new(); m + 1];
    for (bi, b) in sf.blocks.iter().enumerate() {
        for &(i, j, v) in &b.constant {
            per_mat[0].push((bi + 1, i + 1, j + 1, -v));
        }
        for (var, ents) in &b.coeffs {
            for &(i, j, v) in ents {
                per_mat[var + 1].push((bi + 1, i + 1, j + 1, v));
            }
        }
    }
    let dblk = sf.blocks.len() + 1;
    let mut push_row = |row: usize, constant: f64, coeffs: &[(usize, f64)]| {
        if constant != 0.0 {
            per_mat[0].push((dblk, row, row, -constant));
        }
        for &(var, a) in coeffs {
            if a != 0.0 {
                per_mat[var + 1].push((dblk, row, row, a));
            }
        }
    };
    for (l, r) in sf.lp.iter().enumerate() {
        push_row(l + 1, r.constant, &r.coeffs);
    }
    for (k, r) in sf.eqs.iter().enumerate() {
        let base = sf.lp.len() + 2 * k + 1;
        push_row(base, -r.rhs, &r.coeffs);
        let neg: Vec<(usize, f64)> = r.coeffs.iter().map(|&(v, a)| (v, -a)).collect();
        push_row(base + 1, r.rhs, &neg);
    }
    for (matno, ents) in per_mat.iter().enumerate() {
        for &(b, i, j, v) in ents {
            let (i, j) = (i.min(j), i.max(j));
            writeln!(s, "{matno} {b} {i} {j} {v:e}").unwrap();
        }
    }
    out.write_all(s.as_bytes())?;
    Ok(())
}

pub fn import_sdpa(path: impl AsRef<Path>) -> Result<StandardForm> {
    parse_sdpa(&std::fs::read_to_string(path)?)
}

fn perr(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

/// Parses sparse SDPA text. Separators `,(){}` are treated as whitespace.
pub fn parse_sdpa(text: &str) -> Result<StandardForm> {
    let mut pairs = 0usize;
    let mut sense = Sense::Minimize;
    let mut offset = 0.0;
    // (line number, tokens) of non-comment lines.
    let mut lines: Vec<(usize, Vec<String>)> = Vec::new();
    for (ln, raw) in text.lines().enumerate() {
        let ln = ln + 1;
        let t = raw.trim();
        if t.is_empty() {
            continue;
        }
        if let Some(comment) = t.strip_prefix('"').or_else(|| t.strip_prefix('*')) {
            let comment = comment.trim();
            if let Some(rest) = comment.strip_prefix(PAIRS_TAG) {
                pairs = rest
                    .trim()
                    .parse()
                    .map_err(|_| perr(ln, "bad equality-pair count"))?;
            } else if let Some(rest) = comment.strip_prefix(SENSE_TAG) {
                let toks: Vec<&str> = rest.split_whitespace().collect();
                match toks.as_slice() {
                    ["minimize", "offset", v] | ["maximize", "offset", v] => {
                        sense = if toks[0] == "maximize" {
                            Sense::Maximize
                        } else {
                            Sense::Minimize
                        };
                        offset = v.parse().map_err(|_| perr(ln, "bad offset"))?;
                    }
                    _ => return Err(perr(ln, "bad sense header")),
                }
            }
            continue;
        }
        let cleaned: String = t
            .chars()
            .map(|ch| if ",(){}".contains(ch) { ' ' } else { ch })
            .collect();
        lines.push((ln, cleaned.split_whitespace().map(str::to_string).collect()));
    }
    let mut it = lines.into_iter();
    let mut header = |what: &str| it.next().ok_or_else(|| perr(0, format!("missing {what}")));

    let (ln, toks) = header("variable count")?;
    let m: usize = toks
        .first()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| perr(ln, "bad variable count"))?;
    let (ln, toks) = header("block count")?;
    let nb: usize = toks
        .first()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| perr(ln, "bad block count"))?;
    let (ln, toks) = header("block sizes")?;
    if toks.len() < nb {
        return Err(perr(ln, "too few block sizes"));
    }
    let sizes: Vec<i64> = toks[..nb]
        .iter()
        .map(|t| t.parse::<i64>().map_err(|_| perr(ln, "bad block size")))
        .collect::<Result<_>>()?;
    if sizes.contains(&0) {
        return Err(perr(ln, "zero block size"));
    }

    // Objective vector may span lines; entries follow.
    let mut rest: Vec<(usize, String)> = Vec::new();
    for (ln, toks) in it {
        rest.extend(toks.into_iter().map(|t| (ln, t)));
    }
    if rest.len() < m {
        return Err(perr(0, "objective vector too short"));
    }
    let num = |(ln, t): &(usize, String)| {
        t.parse::<f64>()
            .map_err(|_| perr(*ln, format!("bad number '{t}'")))
    };
    let idx = |(ln, t): &(usize, String)| {
        t.parse::<usize>()
            .map_err(|_| perr(*ln, format!("bad index '{t}'")))
    };
    let c: Vec<f64> = rest[..m].iter().map(num).collect::<Result<_>>()?;
    let ents = &rest[m..];
    if ents.len() % 5 != 0 {
        return Err(perr(
            ents.last().map_or(0, |e| e.0),
            "incomplete entry quintuple",
        ));
    }

    let mut psd_blocks: Vec<Option<LmiBlock>> = Vec::new();
    let mut diag_offset = vec![0usize; nb];
    let mut diag_total = 0usize;
    for (b, &sz) in sizes.iter().enumerate() {
        if sz > 0 {
            psd_blocks.push(Some(LmiBlock {
                size: sz as usize,
                constant: Vec::new(),
                coeffs: Vec::new(),
            }));
        } else {
            psd_blocks.push(None);
            diag_offset[b] = diag_total;
            diag_total += (-sz) as usize;
        }
    }
    let mut diag_const = vec![0.0; diag_total];
    let mut diag_coeffs: Vec<Vec<(usize, f64)>> = vec![Vec::new(); diag_total];
    let mut coeff_maps: Vec<std::collections::BTreeMap<usize, SparseEntries>> =
        vec![Default::default(); nb];

    for q in ents.chunks(5) {
        let ln = q[0].0;
        let matno = idx(&q[0])?;
        let blk = idx(&q[1])?;
        let i = idx(&q[2])?;
        let j = idx(&q[3])?;
        let v = num(&q[4])?;
        if matno > m || blk == 0 || blk > nb || i == 0 || j == 0 {
            return Err(perr(ln, "entry index out of range"));
        }
        let b = blk - 1;
        let sz = sizes[b].unsigned_abs() as usize;
        if i > sz || j > sz {
            return Err(perr(ln, "entry outside block"));
        }
        let (i, j) = (i.min(j) - 1, i.max(j) - 1);
        match &mut psd_blocks[b] {
            Some(block) => {
                if matno == 0 {
                    block.constant.push((i, j, -v));
                } else {
                    coeff_maps[b].entry(matno - 1).or_default().push((i, j, v));
                }
            }
            None => {
                if i != j {
                    return Err(perr(ln, "off-diagonal entry in diagonal block"));
                }
                let row = diag_offset[b] + i;
                if matno == 0 {
                    diag_const[row] -= v;
                } else {
                    diag_coeffs[row].push((matno - 1, v));
                }
            }
        }
    }
    let blocks = psd_blocks
        .into_iter()
        .zip(coeff_maps)
        .filter_map(|(b, map)| {
            b.map(|mut b| {
                b.coeffs = map.into_iter().collect();
                b
            })
        })
        .collect();
    if 2 * pairs > diag_total {
        return Err(perr(0, "equality-pair count exceeds diagonal rows"));
    }
    let nlp = diag_total - 2 * pairs;
    let lp = (0..nlp)
        .map(|l| LpRow {
            constant: diag_const[l],
            coeffs: diag_coeffs[l].clone(),
        })
        .collect();
    let eqs = (0..pairs)
        .map(|k| {
            let row = nlp + 2 * k;
            EqRow {
                coeffs: diag_coeffs[row].clone(),
                rhs: -diag_const[row],
            }
        })
        .collect();
    Ok(StandardForm {
        n_vars: m,
        c,
        offset,
        sense,
        blocks,
        lp,
        eqs,
    })
}

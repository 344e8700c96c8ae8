//! Plain-text table format for fractional MDPs.
//!
//! ```text
//! # comments and blank lines are ignored
//! fmdp <num_states> <num_actions> <discount> <initial_state>
//! P
//! <one row per (s, a), s-major, num_states probabilities each>
//! N
//! <one row per s, num_actions numerator costs each>
//! D
//! <one row per s, num_actions denominator costs each>
//! ```
//!
//! Numbers are written with Rust's shortest round-trip formatting, so
//! `parse_mdp(&write_mdp(m))` reproduces `m` bit for bit.

use std::fmt::Write as _;

use super::{FractionalMdp, MdpError};

pub fn write_mdp(mdp: &FractionalMdp) -> String {
    let ns = mdp.num_states();
    let na = mdp.num_actions();
    let mut out = String::new();
    let _ = writeln!(
        out,
        "fmdp {} {} {} {}",
        ns,
        na,
        mdp.discount(),
        mdp.initial_state()
    );
    out.push_str("P\n");
    for s in 0..ns {
        for a in 0..na {
            push_row(&mut out, mdp.transition_row(s, a));
        }
    }
    out.push_str("N\n");
    for row in mdp.cost_n_table().chunks(na) {
        push_row(&mut out, row);
    }
    out.push_str("D\n");
    for row in mdp.cost_d_table().chunks(na) {
        push_row(&mut out, row);
    }
    out
}

fn push_row(out: &mut String, values: &[f64]) {
    let line: Vec<String> = values.iter().map(|v| format!("{v:?}")).collect();
    out.push_str(&line.join(" "));
    out.push('\n');
}

pub fn parse_mdp(input: &str) -> Result<FractionalMdp, MdpError> {
    let mut lines = input
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());

    let (line_no, header) = lines.next().ok_or(MdpError::Parse {
        line: 0,
        message: "empty input".into(),
    })?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 5 || fields[0] != "fmdp" {
        return Err(parse_err(
            line_no,
            "expected `fmdp <states> <actions> <discount> <initial>`",
        ));
    }
    let ns: usize = parse_num(line_no, fields[1])?;
    let na: usize = parse_num(line_no, fields[2])?;
    let discount: f64 = parse_num(line_no, fields[3])?;
    let s0: usize = parse_num(line_no, fields[4])?;

    let mut read_section = |tag: &str, rows: usize, width: usize| -> Result<Vec<f64>, MdpError> {
        let (line_no, marker) = lines
            .next()
            .ok_or_else(|| parse_err(0, &format!("missing section `{tag}`")))?;
        if marker != tag {
            return Err(parse_err(line_no, &format!("expected section `{tag}`")));
        }
        let mut values = Vec::with_capacity(rows * width);
        for _ in 0..rows {
            let (line_no, row) = lines
                .next()
                .ok_or_else(|| parse_err(0, &format!("section `{tag}` is truncated")))?;
            let parsed = row
                .split_whitespace()
                .map(|tok| parse_num::<f64>(line_no, tok))
                .collect::<Result<Vec<_>, _>>()?;
            if parsed.len() != width {
                return Err(parse_err(
                    line_no,
                    &format!("expected {width} values, found {}", parsed.len()),
                ));
            }
            values.extend(parsed);
        }
        Ok(values)
    };

    let transition = read_section("P", ns * na, ns)?;
    let cost_n = read_section("N", ns, na)?;
    let cost_d = read_section("D", ns, na)?;
    if let Some((line_no, _)) = lines.next() {
        return Err(parse_err(line_no, "trailing content"));
    }
    FractionalMdp::new(ns, na, transition, cost_n, cost_d, discount, s0)
}

fn parse_err(line: usize, message: &str) -> MdpError {
    MdpError::Parse {
        line,
        message: message.to_string(),
    }
}

fn parse_num<T: std::str::FromStr>(line: usize, token: &str) -> Result<T, MdpError> {
    token
        .parse()
        .map_err(|_| parse_err(line, &format!("cannot parse `{token}`")))
}

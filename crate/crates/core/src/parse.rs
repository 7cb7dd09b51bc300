//! The `.crn` text format.
//!
//! ```text
//! # comment
//! species A B C            # optional, fixes the species ordering
//! A + B <-> 2 C : 1.0, 2.0
//! 0 -> A : 0.5
//! ```
//!
//! Each reaction line is `LHS -> RHS : rate` or `LHS <-> RHS : fwd, bwd`.
//! A side is a `+`-separated list of terms `coeff name` (the coefficient is
//! optional and defaults to 1) or the zero complex `0`.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::network::{Complex, MassActionSystem, Reaction, ReactionNetwork};

struct RawReaction {
    lhs: Vec<(String, u32)>,
    rhs: Vec<(String, u32)>,
    rate: f64,
    line: usize,
    column: usize,
}

fn err(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        column,
        message: message.into(),
    }
}

/// Parses `.crn` text into a validated mass-action system.
pub fn parse_network(text: &str) -> Result<MassActionSystem> {
    let mut directive: Option<(Vec<String>, usize)> = None;
    let mut raw = Vec::new();

    for (idx, full_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match full_line.find('#') {
            Some(p) => &full_line[..p],
            None => full_line,
        };
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let indent = line.len() - line.trim_start().len();
        if let Some(rest) = trimmed.strip_prefix("species") {
            if rest.is_empty() || rest.starts_with(char::is_whitespace) {
                if directive.is_some() {
                    return Err(err(line_no, indent + 1, "repeated species directive"));
                }
                let names = parse_directive(rest, line_no, indent + 1 + "species".len())?;
                directive = Some((names, line_no));
                continue;
            }
        }
        parse_reaction_line(line, line_no, &mut raw)?;
    }

    if raw.is_empty() && directive.is_none() {
        return Err(err(1, 1, "no reactions and no species directive"));
    }

    let mut order: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    if let Some((names, _)) = &directive {
        for name in names {
            index.insert(name.clone(), order.len());
            order.push(name.clone());
        }
    }
    for r in &raw {
        for (name, _) in r.lhs.iter().chain(&r.rhs) {
            if !index.contains_key(name) {
                if directive.is_some() {
                    return Err(err(
                        r.line,
                        r.column,
                        format!("species '{name}' is not listed in the species directive"),
                    ));
                }
                index.insert(name.clone(), order.len());
                order.push(name.clone());
            }
        }
    }

    let n = order.len();
    let to_vec = |terms: &[(String, u32)]| {
        let mut v = vec![0u32; n];
        for (name, k) in terms {
            v[index[name]] += k;
        }
        v
    };

    let mut complexes: Vec<Complex> = Vec::new();
    let mut complex_lookup: HashMap<Vec<u32>, usize> = HashMap::new();
    let mut reactions: Vec<Reaction> = Vec::new();
    let mut rates: Vec<f64> = Vec::new();
    let mut reaction_lookup: HashMap<(usize, usize), usize> = HashMap::new();

    for r in &raw {
        let lhs = to_vec(&r.lhs);
        let rhs = to_vec(&r.rhs);
        if lhs == rhs {
            return Err(err(r.line, r.column, "self-loop reaction: both sides are equal"));
        }
        let mut intern = |v: Vec<u32>| {
            *complex_lookup.entry(v.clone()).or_insert_with(|| {
                complexes.push(Complex::new(v));
                complexes.len() - 1
            })
        };
        let source = intern(lhs);
        let target = intern(rhs);
        match reaction_lookup.get(&(source, target)) {
            Some(&j) if rates[j] == r.rate => {}
            Some(&j) => {
                return Err(err(
                    r.line,
                    r.column,
                    format!(
                        "duplicate reaction with conflicting rate ({} vs {})",
                        rates[j], r.rate
                    ),
                ));
            }
            None => {
                reaction_lookup.insert((source, target), reactions.len());
                reactions.push(Reaction { source, target });
                rates.push(r.rate);
            }
        }
    }

    if !reactions.is_empty() {
        if let Some((names, line)) = &directive {
            for (i, name) in names.iter().enumerate() {
                if complexes.iter().all(|c| c.coefficients[i] == 0) {
                    return Err(err(
                        *line,
                        1,
                        format!("species '{name}' does not appear in any reaction"),
                    ));
                }
            }
        }
    }

    let network = ReactionNetwork::new(order, complexes, reactions)?;
    MassActionSystem::new(network, rates)
}

fn parse_directive(rest: &str, line: usize, base_col: usize) -> Result<Vec<String>> {
    let mut names: Vec<String> = Vec::new();
    let mut offset = 0;
    for token in rest.split(|c: char| c.is_whitespace() || c == ',') {
        let col = base_col + offset + 1;
        offset += token.len() + 1;
        if token.is_empty() {
            continue;
        }
        if !is_identifier(token) {
            return Err(err(line, col, format!("invalid species name '{token}'")));
        }
        if names.iter().any(|n| n == token) {
            return Err(err(line, col, format!("species '{token}' listed twice")));
        }
        names.push(token.to_string());
    }
    Ok(names)
}

fn parse_reaction_line(line: &str, line_no: usize, out: &mut Vec<RawReaction>) -> Result<()> {
    let start_col = line.len() - line.trim_start().len() + 1;
    let colon = line
        .find(':')
        .ok_or_else(|| err(line_no, line.trim_end().len() + 1, "expected ':' followed by rate"))?;
    let (equation, rates_part) = (&line[..colon], &line[colon + 1..]);
    let rates_col = colon + 2;

    let (arrow_pos, arrow_len, reversible) = if let Some(p) = equation.find("<->") {
        (p, 3, true)
    } else if let Some(p) = equation.find("->") {
        (p, 2, false)
    } else {
        return Err(err(line_no, start_col, "expected '->' or '<->'"));
    };
    let lhs_text = &equation[..arrow_pos];
    let rhs_text = &equation[arrow_pos + arrow_len..];
    if rhs_text.contains("->") || rhs_text.contains("<-") {
        return Err(err(
            line_no,
            arrow_pos + arrow_len + 1,
            "more than one arrow in reaction",
        ));
    }
    let lhs = parse_side(lhs_text, line_no, 1)?;
    let rhs = parse_side(rhs_text, line_no, arrow_pos + arrow_len + 1)?;

    let rate_tokens: Vec<(&str, usize)> = {
        let mut v = Vec::new();
        let mut offset = 0;
        for tok in rates_part.split(',') {
            let lead = tok.len() - tok.trim_start().len();
            v.push((tok.trim(), rates_col + offset + lead));
            offset += tok.len() + 1;
        }
        v
    };
    let expected = if reversible { 2 } else { 1 };
    if rate_tokens.len() != expected {
        return Err(err(
            line_no,
            rates_col,
            format!("expected {expected} rate(s), found {}", rate_tokens.len()),
        ));
    }
    let mut rates = Vec::with_capacity(expected);
    for (tok, col) in rate_tokens {
        let value: f64 = tok
            .parse()
            .map_err(|_| err(line_no, col, format!("invalid rate '{tok}'")))?;
        if !(value.is_finite() && value > 0.0) {
            return Err(err(
                line_no,
                col,
                format!("rate must be positive, got '{tok}'"),
            ));
        }
        rates.push(value);
    }

    out.push(RawReaction {
        lhs: lhs.clone(),
        rhs: rhs.clone(),
        rate: rates[0],
        line: line_no,
        column: start_col,
    });
    if reversible {
        out.push(RawReaction {
            lhs: rhs,
            rhs: lhs,
            rate: rates[1],
            line: line_no,
            column: start_col,
        });
    }
    Ok(())
}

fn parse_side(text: &str, line: usize, base_col: usize) -> Result<Vec<(String, u32)>> {
    let terms: Vec<(&str, usize)> = {
        let mut v = Vec::new();
        let mut offset = 0;
        for t in text.split('+') {
            let lead = t.len() - t.trim_start().len();
            v.push((t.trim(), base_col + offset + lead));
            offset += t.len() + 1;
        }
        v
    };
    if terms.len() == 1 && terms[0].0 == "0" {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for (term, col) in terms {
        if term.is_empty() {
            return Err(err(line, col, "empty term"));
        }
        if term == "0" {
            return Err(err(line, col, "'0' must be the only term of its side"));
        }
        let digits = term.chars().take_while(char::is_ascii_digit).count();
        let coeff = if digits == 0 {
            1
        } else {
            term[..digits]
                .parse::<u32>()
                .map_err(|_| err(line, col, "coefficient out of range"))?
        };
        let name = term[digits..].trim_start();
        if name.is_empty() {
            return Err(err(line, col, format!("term '{term}' has no species name")));
        }
        if !is_identifier(name) {
            return Err(err(line, col, format!("invalid species name '{name}'")));
        }
        if coeff == 0 {
            return Err(err(line, col, "zero coefficient"));
        }
        out.push((name.to_string(), coeff));
    }
    Ok(out)
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Serializes a system back to `.crn` text. Always emits a species directive
/// so that the ordering survives a round trip.
pub fn to_crn_string(sys: &MassActionSystem) -> String {
    let net = sys.network();
    let mut out = String::new();
    out.push_str("species");
    for s in net.species() {
        out.push(' ');
        out.push_str(&s.name);
    }
    out.push('\n');
    for (j, r) in net.reactions().iter().enumerate() {
        out.push_str(&format!(
            "{} -> {} : {}\n",
            net.complex_label(r.source),
            net.complex_label(r.target),
            sys.rate(j)
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_reversible_pair() {
        let sys = parse_network("A + B <-> 2 C : 1, 2").unwrap();
        let net = sys.network();
        assert_eq!(net.n_species(), 3);
        assert_eq!(net.n_complexes(), 2);
        assert_eq!(net.n_reactions(), 2);
        assert_eq!(net.complexes()[0].coefficients, vec![1, 1, 0]);
        assert_eq!(net.complexes()[1].coefficients, vec![0, 0, 2]);
        assert_eq!(sys.rates(), &[1.0, 2.0]);
    }

    #[test]
    fn empty_input_is_rejected() {
        let e = parse_network("").unwrap_err();
        assert!(e.to_string().contains("no reactions"));
        assert!(parse_network("# only a comment\n\n").is_err());
    }

    #[test]
    fn species_directive_alone_gives_empty_network() {
        let sys = parse_network("species A B").unwrap();
        assert_eq!(sys.n_species(), 2);
        assert_eq!(sys.n_reactions(), 0);
    }

    #[test]
    fn self_loop_is_rejected() {
        let e = parse_network("A -> A : 1.0").unwrap_err();
        assert!(e.to_string().contains("self-loop"), "{e}");
        assert!(parse_network("A + B -> B + A : 1").is_err());
    }

    #[test]
    fn rate_errors_carry_position() {
        match parse_network("A -> B : 1\nB -> A : -3").unwrap_err() {
            Error::Parse { line, column, .. } => {
                assert_eq!(line, 2);
                assert_eq!(column, 10);
            }
            e => panic!("unexpected {e}"),
        }
        assert!(parse_network("A -> B : 0").is_err());
        assert!(parse_network("A <-> B : 1").is_err());
        assert!(parse_network("A -> B : x").is_err());
        assert!(parse_network("A -> B").is_err());
        assert!(parse_network("A B : 1").is_err());
    }

    #[test]
    fn duplicate_reactions() {
        let sys = parse_network("A -> B : 1\nA -> B : 1").unwrap();
        assert_eq!(sys.n_reactions(), 1);
        assert!(parse_network("A -> B : 1\nA -> B : 2").is_err());
    }

    #[test]
    fn species_directive_fixes_order() {
        let sys = parse_network("species C D A B\nC <-> D : 1, 2\n2A <-> 2B : 3, 4\nA -> 0 : 5")
            .unwrap();
        assert_eq!(sys.network().species_names(), vec!["C", "D", "A", "B"]);
        assert!(parse_network("species A\nA -> B : 1").is_err());
        assert!(parse_network("species A B C\nA -> B : 1").is_err());
    }

    #[test]
    fn zero_complex_and_compact_terms() {
        let sys = parse_network("0 <-> C : 1, 1\n2A -> 0 : 1").unwrap();
        assert!(sys.network().complexes()[0].is_zero());
        assert_eq!(sys.network().complexes()[2].coefficients, vec![0, 2]);
        assert!(parse_network("0 + A -> B : 1").is_err());
        assert!(parse_network("0 A -> B : 1").is_err());
    }

    #[test]
    fn repeated_species_in_a_side_add_up() {
        let sys = parse_network("A + A -> B : 1").unwrap();
        assert_eq!(sys.network().complexes()[0].coefficients, vec![2, 0]);
    }

    #[test]
    fn comments_are_ignored() {
        let sys = parse_network("# header\nA -> B : 1 # trailing\n").unwrap();
        assert_eq!(sys.n_reactions(), 1);
    }

    #[test]
    fn serialize_round_trip() {
        let text = "species C D A B\nC <-> D : 1.25, 2\n2A <-> 2B : 3e-3, 4\nA -> 0 : 0.1";
        let sys = parse_network(text).unwrap();
        let again = parse_network(&to_crn_string(&sys)).unwrap();
        assert_eq!(sys, again);
    }
}

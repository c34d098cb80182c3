use std::io::BufRead;
use std::net::{Ipv4Addr, Ipv6Addr};

use super::{FeedRecord, FeedSource, LineOutcome, ParseStats, RrSet, RrType};
use crate::domain::normalize;

const CLASSES: [&str; 4] = ["IN", "CH", "HS", "CS"];

/// Splits one physical line into tokens, dropping comments and parentheses.
/// Returns the tokens and the change in parenthesis depth.
fn tokenize(line: &str) -> (Vec<String>, i32) {
    let mut tokens = Vec::new();
    let mut cur = String::new();
    let mut depth = 0;
    let mut quoted = false;
    for ch in line.chars() {
        match ch {
            '"' => {
                quoted = !quoted;
                cur.push(ch);
            }
            ';' if !quoted => break,
            '(' if !quoted => depth += 1,
            ')' if !quoted => depth -= 1,
            c if c.is_whitespace() && !quoted => {
                if !cur.is_empty() {
                    tokens.push(std::mem::take(&mut cur));
                }
            }
            c => cur.push(c),
        }
    }
    if !cur.is_empty() {
        tokens.push(cur);
    }
    (tokens, depth)
}

fn is_ttl(tok: &str) -> bool {
    let mut chars = tok.chars().peekable();
    let mut seen_digit = false;
    while let Some(c) = chars.next() {
        if c.is_ascii_digit() {
            seen_digit = true;
        } else if seen_digit && "smhdwSMHDW".contains(c) {
            // units such as 1h30m
            if chars.peek().is_some_and(|n| !n.is_ascii_digit()) {
                return false;
            }
        } else {
            return false;
        }
    }
    seen_digit
}

struct ZoneState {
    origin: String,
    last_owner: Option<String>,
    observed_at: Option<u64>,
}

impl ZoneState {
    /// Fully qualified, dot-free-at-end form of a zone-file name.
    fn qualify(&self, name: &str) -> String {
        if name == "@" {
            self.origin.clone()
        } else if let Some(abs) = name.strip_suffix('.') {
            abs.to_string()
        } else if self.origin.is_empty() {
            name.to_string()
        } else {
            format!("{name}.{}", self.origin)
        }
    }

    fn record(&mut self, tokens: &[String], inherits_owner: bool, sink: &mut dyn FnMut(FeedRecord)) -> LineOutcome {
        let Some(first) = tokens.first() else {
            return LineOutcome::Ignored;
        };
        if let Some(directive) = first.strip_prefix('$') {
            return match directive.to_ascii_uppercase().as_str() {
                "ORIGIN" => match tokens.get(1).map(|t| normalize(&self.qualify(t))) {
                    Some(Ok(origin)) if tokens.len() == 2 => {
                        self.origin = origin;
                        LineOutcome::Ignored
                    }
                    _ => LineOutcome::Malformed,
                },
                "TTL" if tokens.len() == 2 && is_ttl(&tokens[1]) => LineOutcome::Ignored,
                "TTL" => LineOutcome::Malformed,
                _ => LineOutcome::Unsupported,
            };
        }
        let (owner, rest) = if inherits_owner {
            match &self.last_owner {
                Some(o) => (o.clone(), tokens),
                None => return LineOutcome::Malformed,
            }
        } else {
            (self.qualify(first), &tokens[1..])
        };
        let mut i = 0;
        while i < rest.len() && (is_ttl(&rest[i]) || CLASSES.contains(&rest[i].to_ascii_uppercase().as_str())) {
            i += 1;
        }
        let Some(rtype) = rest.get(i) else {
            return LineOutcome::Malformed;
        };
        if !rtype.chars().next().is_some_and(|c| c.is_ascii_alphabetic()) || !rtype.chars().all(|c| c.is_ascii_alphanumeric()) {
            return LineOutcome::Malformed;
        }
        let rdata = &rest[i + 1..];
        if rdata.is_empty() {
            return LineOutcome::Malformed;
        }
        let owner = match normalize(&owner) {
            Ok(o) => o,
            Err(_) => return LineOutcome::BadName,
        };
        self.last_owner = Some(owner.clone());
        let Some(kind) = RrType::from_name(rtype) else {
            return LineOutcome::Unsupported;
        };
        let valid = rdata.len() == 1
            && match kind {
                RrType::A => rdata[0].parse::<Ipv4Addr>().is_ok(),
                RrType::Aaaa => rdata[0].parse::<Ipv6Addr>().is_ok(),
                RrType::Ns => normalize(&self.qualify(&rdata[0])).is_ok(),
            };
        if !valid {
            return LineOutcome::Malformed;
        }
        sink(FeedRecord {
            fqdn: owner,
            source: FeedSource::Zone,
            rr_types: RrSet::of(&[kind]),
            observed_at: self.observed_at,
        });
        LineOutcome::Parsed(1)
    }
}

/// A master-file subset: `$ORIGIN`, `$TTL`, `@`, relative owners, blank
/// owners repeating the previous one, optional TTL and class, parenthesised
/// continuations and `;` comments. NS, A and AAAA records are collected;
/// other types are counted as unsupported. A record spanning several lines
/// is accounted on its last line, the others count as ignored.
pub fn parse_zone_stream<R: BufRead>(
    reader: R,
    origin: &str,
    observed_at: Option<u64>,
    mut sink: impl FnMut(FeedRecord),
) -> std::io::Result<ParseStats> {
    let mut state = ZoneState {
        origin: normalize(origin).unwrap_or_default(),
        last_owner: None,
        observed_at,
    };
    let mut stats = ParseStats::default();
    let mut pending: Vec<String> = Vec::new();
    let mut inherits = false;
    let mut depth = 0;
    for line in reader.lines() {
        let line = line?;
        let (tokens, delta) = tokenize(&line);
        if depth == 0 {
            inherits = line.starts_with([' ', '\t']);
            pending = tokens;
        } else {
            pending.extend(tokens);
        }
        depth += delta;
        if depth > 0 {
            stats.count(LineOutcome::Ignored);
            continue;
        }
        let outcome = if depth < 0 {
            LineOutcome::Malformed
        } else {
            state.record(&pending, inherits, &mut sink)
        };
        depth = 0;
        pending.clear();
        stats.count(outcome);
    }
    Ok(stats)
}

pub fn parse_zone<R: BufRead>(reader: R, origin: &str, observed_at: Option<u64>) -> std::io::Result<(Vec<FeedRecord>, ParseStats)> {
    let mut out = Vec::new();
    let stats = parse_zone_stream(reader, origin, observed_at, |r| out.push(r))?;
    Ok((out, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::merge_evidence;

    fn names(recs: &[FeedRecord]) -> Vec<(&str, String)> {
        recs.iter().map(|r| (r.fqdn.as_str(), r.rr_types.to_string())).collect()
    }

    #[test]
    fn qualification_and_accumulation() {
        let input = "example 3600 IN NS ns1.host.example.\nexample IN A 192.0.2.1\n";
        let (recs, _) = parse_zone(input.as_bytes(), "com.", None).unwrap();
        assert_eq!(names(&recs), [("example.com", "{NS}".to_string()), ("example.com", "{A}".to_string())]);
        let merged = merge_evidence(recs);
        assert_eq!(merged["example.com"], RrSet::of(&[RrType::Ns, RrType::A]));
    }

    #[test]
    fn origin_switch() {
        let input = "$ORIGIN net.\nfoo IN AAAA 2001:db8::1\n";
        let (recs, stats) = parse_zone(input.as_bytes(), "com.", None).unwrap();
        assert_eq!(names(&recs), [("foo.net", "{AAAA}".to_string())]);
        assert_eq!(stats.ignored, 1);
    }

    #[test]
    fn master_file_features() {
        let input = "\
$TTL 86400
$ORIGIN example.com.
@   IN  SOA ns1 hostmaster (
        2024010101 ; serial
        3600 900 604800 86400 )
@       NS  ns1
        NS  ns2.other.net.
www 300 A 192.0.2.10
    IN AAAA 2001:db8::10   ; same owner
mail    MX 10 mx
bad name A 192.0.2.1
api     A   999.1.1.1
Api.Example.Com. A 192.0.2.20
$INCLUDE other.zone
";
        let (recs, stats) = parse_zone(input.as_bytes(), "", Some(7)).unwrap();
        assert_eq!(
            names(&recs),
            [
                ("example.com", "{NS}".to_string()),
                ("example.com", "{NS}".to_string()),
                ("www.example.com", "{A}".to_string()),
                ("www.example.com", "{AAAA}".to_string()),
                ("api.example.com", "{A}".to_string()),
            ]
        );
        assert!(recs.iter().all(|r| r.observed_at == Some(7) && r.source == FeedSource::Zone));
        assert_eq!(stats.lines, 14);
        assert_eq!(stats.accounted(), stats.lines);
        // SOA, MX, $INCLUDE and "bad name ...", read as owner "bad" with
        // an unknown type "name".
        assert_eq!(stats.unsupported, 4);
        assert_eq!(stats.malformed, 1);
    }

    #[test]
    fn unbalanced_parens_are_malformed() {
        let (recs, stats) = parse_zone("a IN A 192.0.2.1 )\n".as_bytes(), "com", None).unwrap();
        assert!(recs.is_empty());
        assert_eq!(stats.malformed, 1);
    }
}

use super::{Dag, GraphError, Result};

fn valid_name(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn name(s: &str, line: usize) -> Result<String> {
    let s = s.trim();
    if valid_name(s) {
        Ok(s.to_string())
    } else {
        Err(GraphError::Syntax {
            line,
            message: format!("invalid node name `{s}`"),
        })
    }
}

/// Parses the edge-list format: one `A -> B` per line, `node A` to declare an
/// isolated node, `#` starts a comment, blank lines are ignored.
pub fn parse_dag(text: &str) -> Result<Dag> {
    let mut nodes: Vec<String> = Vec::new();
    let mut edges: Vec<(String, String)> = Vec::new();
    let declare = |n: &String, nodes: &mut Vec<String>| {
        if !nodes.contains(n) {
            nodes.push(n.clone());
        }
    };

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some((a, b)) = line.split_once("->") {
            let a = name(a, line_no)?;
            let b = name(b, line_no)?;
            if edges.iter().any(|(x, y)| *x == a && *y == b) {
                return Err(GraphError::Syntax {
                    line: line_no,
                    message: format!("duplicate edge {a} -> {b}"),
                });
            }
            declare(&a, &mut nodes);
            declare(&b, &mut nodes);
            edges.push((a, b));
        } else if let Some(rest) = line.strip_prefix("node ") {
            let n = name(rest, line_no)?;
            declare(&n, &mut nodes);
        } else {
            return Err(GraphError::Syntax {
                line: line_no,
                message: format!("expected `A -> B` or `node A`, found `{line}`"),
            });
        }
    }
    Dag::new(nodes, edges)
}

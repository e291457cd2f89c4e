//! Canonical SQL text for an AST. Parentheses are emitted only where the
//! parser's precedence would otherwise regroup the tree.

use super::ast::*;
use super::parser::is_reserved;

const PRIMARY: u8 = 10;
const CAST: u8 = 9;
const NEGATE: u8 = 8;
const JSON: u8 = 5;
const IS_NULL: u8 = 3;

pub fn render(q: &QueryAst) -> String {
    let mut out = String::from("SELECT ");
    let items: Vec<String> = q
        .select_items
        .iter()
        .map(|item| match &item.alias {
            Some(alias) => format!("{} AS {}", render_expr(&item.expr), ident(alias)),
            None => render_expr(&item.expr),
        })
        .collect();
    out.push_str(&items.join(", "));
    out.push_str(" FROM ");
    out.push_str(&ident(&q.from_table));
    if let Some(w) = &q.where_clause {
        out.push_str(" WHERE ");
        out.push_str(&render_expr(w));
    }
    if !q.group_by.is_empty() {
        let keys: Vec<String> = q.group_by.iter().map(render_expr).collect();
        out.push_str(" GROUP BY ");
        out.push_str(&keys.join(", "));
    }
    if !q.order_by.is_empty() {
        let keys: Vec<String> = q
            .order_by
            .iter()
            .map(|o| match o.direction {
                SortDirection::Asc => render_expr(&o.expr),
                SortDirection::Desc => format!("{} DESC", render_expr(&o.expr)),
            })
            .collect();
        out.push_str(" ORDER BY ");
        out.push_str(&keys.join(", "));
    }
    if let Some(n) = q.limit {
        out.push_str(&format!(" LIMIT {n}"));
    }
    out
}

pub fn render_expr(e: &Expr) -> String {
    match e {
        Expr::Column(name) => ident(name),
        Expr::Literal(lit) => literal(lit),
        Expr::Negate(inner) => {
            if matches!(
                inner.as_ref(),
                Expr::Column(_)
                    | Expr::Aggregate { .. }
                    | Expr::Coalesce(_)
                    | Expr::ToChar { .. }
                    | Expr::ExtractEpoch { .. }
            ) {
                format!("-{}", render_expr(inner))
            } else {
                format!("-({})", render_expr(inner))
            }
        }
        Expr::Binary { op, left, right } => {
            let p = op.precedence();
            let (l, r) = if op.is_comparison() {
                (wrap(left, prec(left) <= p), wrap(right, prec(right) <= p))
            } else {
                (wrap(left, prec(left) < p), wrap(right, prec(right) <= p))
            };
            format!("{l} {} {r}", op.symbol())
        }
        Expr::IsNull { expr, negated } => {
            let inner = wrap(expr, prec(expr) < IS_NULL + 1);
            if *negated {
                format!("{inner} IS NOT NULL")
            } else {
                format!("{inner} IS NULL")
            }
        }
        Expr::Aggregate { func, arg } => match arg {
            AggregateArg::Star => format!("{}(*)", func.name()),
            AggregateArg::Expr(inner) => format!("{}({})", func.name(), render_expr(inner)),
        },
        Expr::Coalesce(args) => {
            let parts: Vec<String> = args.iter().map(render_expr).collect();
            format!("COALESCE({})", parts.join(", "))
        }
        Expr::ToChar { expr, pattern } => {
            format!("TO_CHAR({}, {})", render_expr(expr), quote_text(pattern))
        }
        Expr::ExtractEpoch { end, start } => {
            let sub = Expr::Binary {
                op: BinaryOp::Sub,
                left: end.clone(),
                right: start.clone(),
            };
            format!("EXTRACT(EPOCH FROM ({}))", render_expr(&sub))
        }
        Expr::JsonAccess { column, key, as_text } => {
            let arrow = if *as_text { "->>" } else { "->" };
            format!("{}{arrow}{}", ident(column), quote_text(key))
        }
        Expr::Cast { expr, target } => {
            let negative_literal = matches!(
                expr.as_ref(),
                Expr::Literal(Literal::Number(d)) if d.is_sign_negative()
            );
            let inner = wrap(expr, prec(expr) < CAST || negative_literal);
            format!("{inner}::{}", target.sql_name())
        }
    }
}

fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Binary { op, .. } => op.precedence(),
        Expr::IsNull { .. } => IS_NULL,
        Expr::JsonAccess { .. } => JSON,
        Expr::Negate(_) => NEGATE,
        Expr::Cast { .. } => CAST,
        _ => PRIMARY,
    }
}

fn wrap(e: &Expr, parens: bool) -> String {
    if parens {
        format!("({})", render_expr(e))
    } else {
        render_expr(e)
    }
}

fn literal(lit: &Literal) -> String {
    match lit {
        Literal::Text(s) => quote_text(s),
        Literal::Number(d) => d.to_string(),
        Literal::Null => "NULL".to_string(),
    }
}

fn quote_text(s: &str) -> String {
    format!("'{}'", s.replace('\'', "''"))
}

/// Bare identifiers are emitted unquoted only when the parser would read
/// them back unchanged.
pub(crate) fn ident(name: &str) -> String {
    let plain = name.bytes().next().is_some_and(|b| b.is_ascii_lowercase() || b == b'_')
        && name
            .bytes()
            .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_');
    if plain && !is_reserved(name) {
        name.to_string()
    } else {
        format!("\"{}\"", name.replace('"', "\"\""))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sql::parse;
    use rust_decimal::Decimal;

    #[test]
    fn canonical_form_of_prompt_query() {
        let sql = "select workflow_id, count(*) as job_count from jobs group by workflow_id order by job_count desc";
        let q = parse(sql).unwrap();
        let text = render(&q);
        assert_eq!(
            text,
            "SELECT workflow_id, COUNT(*) AS job_count FROM jobs GROUP BY workflow_id ORDER BY job_count DESC"
        );
        assert_eq!(parse(&text).unwrap(), q);
        assert_eq!(render(&q), text);
    }

    #[test]
    fn coalesce_of_aggregate() {
        let e = Expr::Coalesce(vec![
            Expr::aggregate(AggregateFunc::Avg, Some(Expr::column("x"))),
            Expr::number(Decimal::ZERO),
        ]);
        assert!(render_expr(&e).contains("COALESCE(AVG("));
    }

    #[test]
    fn parens_follow_precedence() {
        let e = Expr::binary(
            BinaryOp::Mul,
            Expr::binary(BinaryOp::Add, Expr::column("a"), Expr::column("b")),
            Expr::column("c"),
        );
        assert_eq!(render_expr(&e), "(a + b) * c");
        let e = Expr::binary(
            BinaryOp::Sub,
            Expr::column("a"),
            Expr::binary(BinaryOp::Sub, Expr::column("b"), Expr::column("c")),
        );
        assert_eq!(render_expr(&e), "a - (b - c)");
        let e = Expr::Cast {
            expr: Box::new(Expr::number(Decimal::from(-5))),
            target: CastType::Float,
        };
        assert_eq!(render_expr(&e), "(-5)::FLOAT");
    }

    #[test]
    fn identifiers_quoted_when_needed() {
        assert_eq!(ident("state"), "state");
        assert_eq!(ident("State"), "\"State\"");
        assert_eq!(ident("order"), "\"order\"");
        assert_eq!(ident("a\"b"), "\"a\"\"b\"");
    }
}

//! Recursive-descent parser for the constrained SELECT subset.
//!
//! Precedence follows PostgreSQL, loosest first: OR, AND, IS [NOT] NULL,
//! comparisons, JSON operators (`->`, `->>`), `+ -`, `* /`, unary minus,
//! `::` casts.

use std::str::FromStr;

use rust_decimal::Decimal;

use super::ast::*;
use super::lexer::{tokenize, Tok, Token};
use super::{ParseError, ParseErrorKind};

const RESERVED: &[&str] = &[
    "select",
    "from",
    "where",
    "group",
    "by",
    "order",
    "limit",
    "as",
    "and",
    "or",
    "is",
    "not",
    "null",
    "with",
    "having",
    "join",
    "union",
    "distinct",
    "asc",
    "desc",
    "on",
    "over",
    "case",
    "when",
    "then",
    "else",
    "end",
    "in",
    "like",
    "between",
    "except",
    "intersect",
    "offset",
    "all",
    "any",
    "exists",
    "inner",
    "left",
    "right",
    "full",
    "cross",
    "window",
    "true",
    "false",
    "nulls",
    "fetch",
];

const WINDOW_FUNCTIONS: &[&str] = &[
    "row_number",
    "rank",
    "dense_rank",
    "percent_rank",
    "cume_dist",
    "ntile",
    "lag",
    "lead",
    "first_value",
    "last_value",
    "nth_value",
];

pub(crate) fn is_reserved(word: &str) -> bool {
    RESERVED.iter().any(|r| r.eq_ignore_ascii_case(word))
}

pub fn parse(sql: &str) -> Result<QueryAst, ParseError> {
    let tokens = tokenize(sql)?;
    let mut p = Parser { tokens, pos: 0 };
    if matches!(p.peek(), Tok::Eof) {
        return Err(ParseError {
            offset: 0,
            message: "empty query".into(),
            kind: ParseErrorKind::Empty,
        });
    }
    let query = p.query()?;
    if matches!(p.peek(), Tok::Semicolon) {
        p.advance();
        while matches!(p.peek(), Tok::Semicolon) {
            p.advance();
        }
        if !matches!(p.peek(), Tok::Eof) {
            return Err(p.error_kind(ParseErrorKind::Unsupported, "only a single statement is allowed".into()));
        }
    }
    match p.peek() {
        Tok::Eof => Ok(query),
        t if t.is_keyword("union") || t.is_keyword("except") || t.is_keyword("intersect") => {
            Err(p.error_kind(ParseErrorKind::Unsupported, "set operations are not supported".into()))
        }
        t if t.is_keyword("having") => Err(p.error_kind(ParseErrorKind::Unsupported, "HAVING is not supported".into())),
        t if t.is_keyword("offset") || t.is_keyword("fetch") => {
            Err(p.error_kind(ParseErrorKind::Unsupported, "OFFSET/FETCH are not supported".into()))
        }
        t => {
            let d = t.describe();
            Err(p.error(format!("unexpected {d} after end of query")))
        }
    }
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        let i = (self.pos + n).min(self.tokens.len() - 1);
        &self.tokens[i].tok
    }

    fn offset(&self) -> usize {
        self.tokens[self.pos].offset
    }

    fn advance(&mut self) -> Tok {
        let t = self.tokens[self.pos].tok.clone();
        if self.pos < self.tokens.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn error(&self, message: String) -> ParseError {
        self.error_kind(ParseErrorKind::Syntax, message)
    }

    fn error_kind(&self, kind: ParseErrorKind, message: String) -> ParseError {
        ParseError {
            offset: self.offset(),
            message,
            kind,
        }
    }

    fn eat_keyword(&mut self, kw: &str) -> bool {
        if self.peek().is_keyword(kw) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<(), ParseError> {
        if self.eat_keyword(kw) {
            Ok(())
        } else {
            Err(self.error(format!(
                "expected {}, found {}",
                kw.to_ascii_uppercase(),
                self.peek().describe()
            )))
        }
    }

    fn expect(&mut self, tok: Tok) -> Result<(), ParseError> {
        if *self.peek() == tok {
            self.advance();
            Ok(())
        } else {
            Err(self.error(format!("expected {}, found {}", tok.describe(), self.peek().describe())))
        }
    }

    fn query(&mut self) -> Result<QueryAst, ParseError> {
        if self.peek().is_keyword("with") {
            return Err(self.error_kind(
                ParseErrorKind::Cte,
                "WITH clauses (CTEs) are not allowed; write a single top-level SELECT".into(),
            ));
        }
        if !self.peek().is_keyword("select") {
            return Err(self.error(format!(
                "query must start with SELECT, found {}",
                self.peek().describe()
            )));
        }
        self.advance();
        if self.peek().is_keyword("distinct") || self.peek().is_keyword("all") {
            return Err(self.error_kind(
                ParseErrorKind::Unsupported,
                "SELECT DISTINCT/ALL is not supported".into(),
            ));
        }

        let mut select_items = Vec::new();
        loop {
            select_items.push(self.select_item()?);
            if matches!(self.peek(), Tok::Comma) {
                self.advance();
            } else {
                break;
            }
        }

        self.expect_keyword("from")?;
        if matches!(self.peek(), Tok::LParen) {
            if self.peek_at(1).is_keyword("select") || self.peek_at(1).is_keyword("with") {
                return Err(self.error_kind(ParseErrorKind::Subquery, "subqueries are not allowed".into()));
            }
            return Err(self.error("expected a table name after FROM".into()));
        }
        let from_table = self.identifier("table name")?;
        match self.peek() {
            Tok::Comma => {
                return Err(self.error_kind(
                    ParseErrorKind::Unsupported,
                    "only a single table is allowed in FROM".into(),
                ))
            }
            t if ["join", "inner", "left", "right", "full", "cross"]
                .iter()
                .any(|k| t.is_keyword(k)) =>
            {
                return Err(self.error_kind(ParseErrorKind::Unsupported, "joins are not supported".into()))
            }
            Tok::Word(w) if !is_reserved(w) => {
                return Err(self.error_kind(ParseErrorKind::Unsupported, "table aliases are not supported".into()))
            }
            _ => {}
        }
        if self.peek().is_keyword("as") {
            return Err(self.error_kind(ParseErrorKind::Unsupported, "table aliases are not supported".into()));
        }

        let where_clause = if self.eat_keyword("where") {
            Some(self.expr()?)
        } else {
            None
        };

        let mut group_by = Vec::new();
        if self.eat_keyword("group") {
            self.expect_keyword("by")?;
            loop {
                group_by.push(self.expr()?);
                if matches!(self.peek(), Tok::Comma) {
                    self.advance();
                } else {
                    break;
                }
            }
        }
        if self.peek().is_keyword("having") {
            return Err(self.error_kind(ParseErrorKind::Unsupported, "HAVING is not supported".into()));
        }

        let mut order_by = Vec::new();
        if self.eat_keyword("order") {
            self.expect_keyword("by")?;
            loop {
                let expr = self.expr()?;
                let direction = if self.eat_keyword("desc") {
                    SortDirection::Desc
                } else {
                    self.eat_keyword("asc");
                    SortDirection::Asc
                };
                if self.peek().is_keyword("nulls") {
                    return Err(
                        self.error_kind(ParseErrorKind::Unsupported, "NULLS FIRST/LAST is not supported".into())
                    );
                }
                order_by.push(OrderItem { expr, direction });
                if matches!(self.peek(), Tok::Comma) {
                    self.advance();
                } else {
                    break;
                }
            }
        }

        let limit = if self.eat_keyword("limit") {
            match self.advance() {
                Tok::Number(n) => Some(n.parse::<u64>().map_err(|_| ParseError {
                    offset: self.tokens[self.pos - 1].offset,
                    message: format!("LIMIT must be a non-negative integer, found {n}"),
                    kind: ParseErrorKind::Syntax,
                })?),
                t => {
                    return Err(ParseError {
                        offset: self.tokens[self.pos.saturating_sub(1)].offset,
                        message: format!("LIMIT must be an integer, found {}", t.describe()),
                        kind: ParseErrorKind::Syntax,
                    })
                }
            }
        } else {
            None
        };

        Ok(QueryAst {
            select_items,
            from_table,
            where_clause,
            group_by,
            order_by,
            limit,
        })
    }

    fn select_item(&mut self) -> Result<SelectItem, ParseError> {
        if matches!(self.peek(), Tok::Star) {
            return Err(self.error_kind(
                ParseErrorKind::Unsupported,
                "SELECT * is not supported; name the 2-3 output columns".into(),
            ));
        }
        let expr = self.expr()?;
        let alias = if self.eat_keyword("as") {
            Some(self.identifier("alias")?)
        } else {
            match self.peek() {
                Tok::Word(w) if !is_reserved(w) => Some(self.identifier("alias")?),
                Tok::QuotedIdent(_) => Some(self.identifier("alias")?),
                _ => None,
            }
        };
        Ok(SelectItem { expr, alias })
    }

    fn identifier(&mut self, what: &str) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Word(w) if !is_reserved(&w) => {
                self.advance();
                Ok(w.to_ascii_lowercase())
            }
            Tok::QuotedIdent(w) => {
                self.advance();
                Ok(w)
            }
            t => Err(self.error(format!("expected {what}, found {}", t.describe()))),
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        self.or_expr()
    }

    fn or_expr(&mut self) -> Result<Expr, ParseError> {
        let mut left = self.and_expr()?;
        while self.eat_keyword("or") {
            let right = self.and_expr()?;
            left = Expr::binary(BinaryOp::Or, left, right);
        }
        Ok(left)
    }

    fn and_expr(&mut self) -> Result<Expr, ParseError> {
        let mut left = self.is_expr()?;
        while self.eat_keyword("and") {
            let right = self.is_expr()?;
            left = Expr::binary(BinaryOp::And, left, right);
        }
        Ok(left)
    }

    fn is_expr(&mut self) -> Result<Expr, ParseError> {
        if self.peek().is_keyword("not") {
            return Err(self.error_kind(
                ParseErrorKind::Unsupported,
                "NOT is only supported as IS NOT NULL".into(),
            ));
        }
        let mut e = self.comparison()?;
        while self.eat_keyword("is") {
            let negated = self.eat_keyword("not");
            if !self.eat_keyword("null") {
                return Err(self.error_kind(
                    ParseErrorKind::Unsupported,
                    "only IS NULL / IS NOT NULL are supported".into(),
                ));
            }
            e = Expr::IsNull {
                expr: Box::new(e),
                negated,
            };
        }
        Ok(e)
    }

    fn comparison(&mut self) -> Result<Expr, ParseError> {
        let left = self.json_expr()?;
        let op = match self.peek() {
            Tok::Eq => BinaryOp::Eq,
            Tok::NotEq => BinaryOp::NotEq,
            Tok::Lt => BinaryOp::Lt,
            Tok::LtEq => BinaryOp::LtEq,
            Tok::Gt => BinaryOp::Gt,
            Tok::GtEq => BinaryOp::GtEq,
            t if t.is_keyword("in")
                && self.peek_at(1) == &Tok::LParen
                && (self.peek_at(2).is_keyword("select") || self.peek_at(2).is_keyword("with")) =>
            {
                return Err(self.error_kind(ParseErrorKind::Subquery, "subqueries are not allowed".into()))
            }
            t if ["in", "like", "between", "not"].iter().any(|k| t.is_keyword(k)) => {
                return Err(self.error_kind(
                    ParseErrorKind::Unsupported,
                    format!("{} is not supported", t.describe()),
                ))
            }
            _ => return Ok(left),
        };
        self.advance();
        let right = self.json_expr()?;
        if matches!(
            self.peek(),
            Tok::Eq | Tok::NotEq | Tok::Lt | Tok::LtEq | Tok::Gt | Tok::GtEq
        ) {
            return Err(self.error("comparison operators cannot be chained".into()));
        }
        Ok(Expr::binary(op, left, right))
    }

    fn json_expr(&mut self) -> Result<Expr, ParseError> {
        let start = self.offset();
        let left = self.additive()?;
        let as_text = match self.peek() {
            Tok::Arrow => false,
            Tok::LongArrow => true,
            _ => return Ok(left),
        };
        let column = match left {
            Expr::Column(c) => c,
            Expr::JsonAccess { .. } => {
                return Err(ParseError {
                    offset: start,
                    message: "nested JSONB access is not allowed; use a single top-level key".into(),
                    kind: ParseErrorKind::NestedJsonAccess,
                })
            }
            _ => {
                return Err(ParseError {
                    offset: start,
                    message: "JSONB access must be applied directly to a column".into(),
                    kind: ParseErrorKind::Unsupported,
                })
            }
        };
        self.advance();
        let key_offset = self.offset();
        let key = match self.additive()? {
            Expr::Literal(Literal::Text(k)) => k,
            _ => {
                return Err(ParseError {
                    offset: key_offset,
                    message: "JSONB key must be a text literal (wrap the access in parentheses before casting)".into(),
                    kind: ParseErrorKind::Unsupported,
                })
            }
        };
        if matches!(self.peek(), Tok::Arrow | Tok::LongArrow) {
            return Err(self.error_kind(
                ParseErrorKind::NestedJsonAccess,
                "nested JSONB access is not allowed; use a single top-level key".into(),
            ));
        }
        Ok(Expr::JsonAccess { column, key, as_text })
    }

    fn additive(&mut self) -> Result<Expr, ParseError> {
        let mut left = self.multiplicative()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinaryOp::Add,
                Tok::Minus => BinaryOp::Sub,
                _ => return Ok(left),
            };
            self.advance();
            let right = self.multiplicative()?;
            left = Expr::binary(op, left, right);
        }
    }

    fn multiplicative(&mut self) -> Result<Expr, ParseError> {
        let mut left = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinaryOp::Mul,
                Tok::Slash => BinaryOp::Div,
                _ => return Ok(left),
            };
            self.advance();
            let right = self.unary()?;
            left = Expr::binary(op, left, right);
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if matches!(self.peek(), Tok::Minus) {
            self.advance();
            // A minus directly in front of a number literal folds into it.
            if let Tok::Number(n) = self.peek().clone() {
                let offset = self.offset();
                self.advance();
                let value = parse_number(&n, offset)?;
                return self.postfix(Expr::number(-value));
            }
            let operand = self.unary()?;
            return Ok(Expr::Negate(Box::new(operand)));
        }
        if matches!(self.peek(), Tok::Plus) {
            return Err(self.error("unary plus is not supported".into()));
        }
        let primary = self.primary()?;
        self.postfix(primary)
    }

    fn postfix(&mut self, mut e: Expr) -> Result<Expr, ParseError> {
        while matches!(self.peek(), Tok::DoubleColon) {
            self.advance();
            let target = self.cast_type()?;
            e = Expr::Cast {
                expr: Box::new(e),
                target,
            };
        }
        if matches!(self.peek(), Tok::Dot) {
            return Err(self.error_kind(ParseErrorKind::Unsupported, "qualified names are not supported".into()));
        }
        Ok(e)
    }

    fn cast_type(&mut self) -> Result<CastType, ParseError> {
        let word = match self.peek().clone() {
            Tok::Word(w) => w.to_ascii_lowercase(),
            t => return Err(self.error(format!("expected a type name, found {}", t.describe()))),
        };
        let t = match word.as_str() {
            "float" | "float8" => CastType::Float,
            "double" => {
                self.advance();
                if !self.peek().is_keyword("precision") {
                    return Err(self.error("expected PRECISION after DOUBLE".into()));
                }
                CastType::Float
            }
            "numeric" | "decimal" => CastType::Numeric,
            other => {
                return Err(self.error_kind(
                    ParseErrorKind::Unsupported,
                    format!("cast to '{other}' is not supported; use FLOAT or NUMERIC"),
                ))
            }
        };
        self.advance();
        Ok(t)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let offset = self.offset();
        match self.peek().clone() {
            Tok::Number(n) => {
                self.advance();
                Ok(Expr::number(parse_number(&n, offset)?))
            }
            Tok::Str(s) => {
                self.advance();
                Ok(Expr::Literal(Literal::Text(s)))
            }
            Tok::LParen => {
                if self.peek_at(1).is_keyword("select") || self.peek_at(1).is_keyword("with") {
                    return Err(self.error_kind(ParseErrorKind::Subquery, "subqueries are not allowed".into()));
                }
                self.advance();
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Tok::QuotedIdent(name) => {
                self.advance();
                Ok(Expr::Column(name))
            }
            Tok::Word(w) => {
                if w.eq_ignore_ascii_case("null") {
                    self.advance();
                    return Ok(Expr::Literal(Literal::Null));
                }
                if matches!(self.peek_at(1), Tok::LParen) {
                    return self.function_call(w);
                }
                if w.eq_ignore_ascii_case("exists") || w.eq_ignore_ascii_case("case") {
                    return Err(self.error_kind(
                        ParseErrorKind::Unsupported,
                        format!("{} is not supported", w.to_ascii_uppercase()),
                    ));
                }
                if is_reserved(&w) {
                    return Err(self.error(format!("unexpected keyword {}", w.to_ascii_uppercase())));
                }
                self.advance();
                Ok(Expr::Column(w.to_ascii_lowercase()))
            }
            t => Err(self.error(format!("unexpected {}", t.describe()))),
        }
    }

    fn function_call(&mut self, name: String) -> Result<Expr, ParseError> {
        let lower = name.to_ascii_lowercase();
        if WINDOW_FUNCTIONS.contains(&lower.as_str()) {
            return Err(self.error_kind(
                ParseErrorKind::WindowFunction,
                format!("window function {} is not allowed", lower.to_ascii_uppercase()),
            ));
        }
        let func_offset = self.offset();
        self.advance(); // name
        self.advance(); // (
        let e = match lower.as_str() {
            "count" | "sum" | "avg" | "min" | "max" => {
                let func = match lower.as_str() {
                    "count" => AggregateFunc::Count,
                    "sum" => AggregateFunc::Sum,
                    "avg" => AggregateFunc::Avg,
                    "min" => AggregateFunc::Min,
                    _ => AggregateFunc::Max,
                };
                if self.peek().is_keyword("distinct") {
                    return Err(self.error_kind(
                        ParseErrorKind::Unsupported,
                        "DISTINCT inside aggregates is not supported".into(),
                    ));
                }
                let arg = if matches!(self.peek(), Tok::Star) {
                    if func != AggregateFunc::Count {
                        return Err(self.error(format!("{}(*) is not valid", func.name())));
                    }
                    self.advance();
                    AggregateArg::Star
                } else {
                    AggregateArg::Expr(Box::new(self.expr()?))
                };
                self.expect(Tok::RParen)?;
                Expr::Aggregate { func, arg }
            }
            "coalesce" => {
                let mut args = vec![self.expr()?];
                while matches!(self.peek(), Tok::Comma) {
                    self.advance();
                    args.push(self.expr()?);
                }
                self.expect(Tok::RParen)?;
                Expr::Coalesce(args)
            }
            "to_char" => {
                let arg = self.expr()?;
                self.expect(Tok::Comma)?;
                let pattern = match self.advance() {
                    Tok::Str(s) => s,
                    t => {
                        return Err(self.error(format!("TO_CHAR format must be a text literal, found {}", t.describe())))
                    }
                };
                self.expect(Tok::RParen)?;
                Expr::ToChar {
                    expr: Box::new(arg),
                    pattern,
                }
            }
            "extract" => {
                let field_ok = self.peek().is_keyword("epoch");
                if !field_ok {
                    return Err(self.error_kind(
                        ParseErrorKind::Unsupported,
                        "only EXTRACT(EPOCH FROM (ts2 - ts1)) is supported".into(),
                    ));
                }
                self.advance();
                self.expect_keyword("from")?;
                let inner_offset = self.offset();
                let inner = self.expr()?;
                self.expect(Tok::RParen)?;
                match inner {
                    Expr::Binary {
                        op: BinaryOp::Sub,
                        left,
                        right,
                    } => Expr::ExtractEpoch {
                        end: left,
                        start: right,
                    },
                    _ => {
                        return Err(ParseError {
                            offset: inner_offset,
                            message: "only EXTRACT(EPOCH FROM (ts2 - ts1)) is supported".into(),
                            kind: ParseErrorKind::Unsupported,
                        })
                    }
                }
            }
            "cast" => {
                let arg = self.expr()?;
                self.expect_keyword("as")?;
                let target = self.cast_type()?;
                self.expect(Tok::RParen)?;
                Expr::Cast {
                    expr: Box::new(arg),
                    target,
                }
            }
            _ => {
                return Err(ParseError {
                    offset: func_offset,
                    message: format!("function {} is not supported", lower.to_ascii_uppercase()),
                    kind: ParseErrorKind::Unsupported,
                })
            }
        };
        if self.peek().is_keyword("over") {
            return Err(self.error_kind(
                ParseErrorKind::WindowFunction,
                "window functions (OVER) are not allowed".into(),
            ));
        }
        if self.peek().is_keyword("filter") {
            return Err(self.error_kind(
                ParseErrorKind::Unsupported,
                "aggregate FILTER clauses are not supported".into(),
            ));
        }
        Ok(e)
    }
}

fn parse_number(text: &str, offset: usize) -> Result<Decimal, ParseError> {
    let parsed = if text.contains(['e', 'E']) {
        Decimal::from_scientific(text)
    } else {
        Decimal::from_str(text)
    };
    parsed.map_err(|_| ParseError {
        offset,
        message: format!("numeric literal {text} is out of range"),
        kind: ParseErrorKind::Syntax,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prompt_example_query() {
        let q =
            parse("SELECT workflow_id, COUNT(*) AS job_count FROM jobs GROUP BY workflow_id ORDER BY job_count DESC")
                .unwrap();
        assert_eq!(q.select_items.len(), 2);
        assert_eq!(q.select_items[1].alias.as_deref(), Some("job_count"));
        assert_eq!(q.order_by[0].direction, SortDirection::Desc);
        assert_eq!(q.group_by, vec![Expr::column("workflow_id")]);
    }

    #[test]
    fn creation_to_start_query() {
        let q = parse("SELECT state, AVG(EXTRACT(EPOCH FROM (started_timestamp - created_timestamp))) AS avg_creation_to_start_time FROM jobs WHERE started_timestamp IS NOT NULL GROUP BY state").unwrap();
        match &q.select_items[1].expr {
            Expr::Aggregate {
                func: AggregateFunc::Avg,
                arg: AggregateArg::Expr(inner),
            } => {
                assert!(matches!(inner.as_ref(), Expr::ExtractEpoch { .. }));
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(q.where_clause, Some(Expr::IsNull { negated: true, .. })));
    }

    #[test]
    fn with_clause_rejected() {
        let e = parse("WITH t AS (SELECT 1) SELECT * FROM t").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::Cte);
        assert_eq!(e.offset, 0);
    }

    #[test]
    fn subquery_and_window_rejected() {
        assert_eq!(
            parse("SELECT a, b FROM jobs WHERE a = (SELECT 1)").unwrap_err().kind,
            ParseErrorKind::Subquery
        );
        assert_eq!(
            parse("SELECT state, COUNT(*) FROM jobs WHERE id IN (SELECT id FROM jobs) GROUP BY state")
                .unwrap_err()
                .kind,
            ParseErrorKind::Subquery
        );
        assert_eq!(
            parse("SELECT state, COUNT(*) FROM jobs WHERE state IN ('A') GROUP BY state")
                .unwrap_err()
                .kind,
            ParseErrorKind::Unsupported
        );
        assert_eq!(
            parse("SELECT state, COUNT(*) OVER (PARTITION BY state) FROM jobs")
                .unwrap_err()
                .kind,
            ParseErrorKind::WindowFunction
        );
        assert_eq!(
            parse("SELECT state, ROW_NUMBER() OVER () FROM jobs").unwrap_err().kind,
            ParseErrorKind::WindowFunction
        );
    }

    #[test]
    fn json_access_precedence() {
        let q =
            parse("SELECT lab_id, AVG(COALESCE(execution_records->>'duration', '0')::FLOAT) FROM jobs GROUP BY lab_id")
                .unwrap();
        let Expr::Aggregate {
            arg: AggregateArg::Expr(inner),
            ..
        } = &q.select_items[1].expr
        else {
            panic!()
        };
        let Expr::Cast {
            expr,
            target: CastType::Float,
        } = inner.as_ref()
        else {
            panic!("{inner:?}")
        };
        assert!(matches!(expr.as_ref(), Expr::Coalesce(_)));
        // `->>` binds looser than `::`, so the key would be cast first
        let e = parse("SELECT a, b->>'k'::FLOAT FROM jobs").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::Unsupported);
        let e = parse("SELECT a, logs->'x'->>'y' FROM jobs").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::NestedJsonAccess);
    }

    #[test]
    fn negative_literals_fold() {
        let q = parse("SELECT a, -5 FROM jobs").unwrap();
        assert_eq!(q.select_items[1].expr, Expr::number(Decimal::from(-5)));
        let q = parse("SELECT a, -(5) FROM jobs").unwrap();
        assert!(matches!(q.select_items[1].expr, Expr::Negate(_)));
    }

    #[test]
    fn keywords_case_insensitive_identifiers_lowercase() {
        let q = parse("select State, count(*) from jobs group by State;").unwrap();
        assert_eq!(q.select_items[0].expr, Expr::column("state"));
        let q = parse(r#"SELECT "State", COUNT(*) FROM jobs GROUP BY 1"#).unwrap();
        assert_eq!(q.select_items[0].expr, Expr::column("State"));
    }

    #[test]
    fn assorted_errors_have_offsets() {
        let e = parse("SELECT state, COUNT(*) FROM jobs GROUP state").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::Syntax);
        assert_eq!(e.offset, 39);
        assert_eq!(parse("   ").unwrap_err().kind, ParseErrorKind::Empty);
        assert_eq!(
            parse("INSERT INTO jobs VALUES (1)").unwrap_err().kind,
            ParseErrorKind::Syntax
        );
        assert_eq!(
            parse("SELECT * FROM jobs").unwrap_err().kind,
            ParseErrorKind::Unsupported
        );
        assert_eq!(
            parse("SELECT a, b FROM jobs j").unwrap_err().kind,
            ParseErrorKind::Unsupported
        );
        assert_eq!(
            parse("SELECT a, b FROM jobs; SELECT 1").unwrap_err().kind,
            ParseErrorKind::Unsupported
        );
        assert_eq!(
            parse("SELECT a, NOW() FROM jobs").unwrap_err().kind,
            ParseErrorKind::Unsupported
        );
    }
}

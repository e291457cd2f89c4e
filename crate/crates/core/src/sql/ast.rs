use std::fmt;

use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};

/// A single top-level `SELECT ... FROM <table>` statement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryAst {
    pub select_items: Vec<SelectItem>,
    pub from_table: String,
    pub where_clause: Option<Expr>,
    pub group_by: Vec<Expr>,
    pub order_by: Vec<OrderItem>,
    pub limit: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectItem {
    pub expr: Expr,
    pub alias: Option<String>,
}

impl SelectItem {
    /// Output column name, following PostgreSQL's naming of unaliased items.
    pub fn output_name(&self) -> String {
        if let Some(alias) = &self.alias {
            return alias.clone();
        }
        self.expr.default_name()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SortDirection {
    Asc,
    Desc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderItem {
    pub expr: Expr,
    pub direction: SortDirection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Literal {
    Text(String),
    Number(Decimal),
    Null,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Eq,
    NotEq,
    Lt,
    LtEq,
    Gt,
    GtEq,
    And,
    Or,
}

impl BinaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Eq => "=",
            BinaryOp::NotEq => "<>",
            BinaryOp::Lt => "<",
            BinaryOp::LtEq => "<=",
            BinaryOp::Gt => ">",
            BinaryOp::GtEq => ">=",
            BinaryOp::And => "AND",
            BinaryOp::Or => "OR",
        }
    }

    pub fn is_arithmetic(self) -> bool {
        matches!(self, BinaryOp::Add | BinaryOp::Sub | BinaryOp::Mul | BinaryOp::Div)
    }

    pub fn is_comparison(self) -> bool {
        matches!(
            self,
            BinaryOp::Eq | BinaryOp::NotEq | BinaryOp::Lt | BinaryOp::LtEq | BinaryOp::Gt | BinaryOp::GtEq
        )
    }

    /// Binding strength; larger binds tighter.
    pub(crate) fn precedence(self) -> u8 {
        match self {
            BinaryOp::Or => 1,
            BinaryOp::And => 2,
            BinaryOp::Eq | BinaryOp::NotEq | BinaryOp::Lt | BinaryOp::LtEq | BinaryOp::Gt | BinaryOp::GtEq => 4,
            BinaryOp::Add | BinaryOp::Sub => 6,
            BinaryOp::Mul | BinaryOp::Div => 7,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AggregateFunc {
    Count,
    Sum,
    Avg,
    Min,
    Max,
}

impl AggregateFunc {
    pub fn name(self) -> &'static str {
        match self {
            AggregateFunc::Count => "COUNT",
            AggregateFunc::Sum => "SUM",
            AggregateFunc::Avg => "AVG",
            AggregateFunc::Min => "MIN",
            AggregateFunc::Max => "MAX",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum AggregateArg {
    Star,
    Expr(Box<Expr>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CastType {
    Float,
    Numeric,
}

impl CastType {
    pub fn sql_name(self) -> &'static str {
        match self {
            CastType::Float => "FLOAT",
            CastType::Numeric => "NUMERIC",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Expr {
    Column(String),
    Literal(Literal),
    Negate(Box<Expr>),
    Binary {
        op: BinaryOp,
        left: Box<Expr>,
        right: Box<Expr>,
    },
    IsNull {
        expr: Box<Expr>,
        negated: bool,
    },
    Aggregate {
        func: AggregateFunc,
        arg: AggregateArg,
    },
    Coalesce(Vec<Expr>),
    ToChar {
        expr: Box<Expr>,
        pattern: String,
    },
    /// `EXTRACT(EPOCH FROM (end - start))`.
    ExtractEpoch {
        end: Box<Expr>,
        start: Box<Expr>,
    },
    /// `column -> 'key'` (JSON) or `column ->> 'key'` (text); one level only.
    JsonAccess {
        column: String,
        key: String,
        as_text: bool,
    },
    Cast {
        expr: Box<Expr>,
        target: CastType,
    },
}

impl Expr {
    pub fn column(name: &str) -> Expr {
        Expr::Column(name.to_string())
    }

    pub fn text(s: &str) -> Expr {
        Expr::Literal(Literal::Text(s.to_string()))
    }

    pub fn number(d: Decimal) -> Expr {
        Expr::Literal(Literal::Number(d))
    }

    pub fn binary(op: BinaryOp, left: Expr, right: Expr) -> Expr {
        Expr::Binary {
            op,
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    pub fn aggregate(func: AggregateFunc, arg: Option<Expr>) -> Expr {
        Expr::Aggregate {
            func,
            arg: arg.map_or(AggregateArg::Star, |e| AggregateArg::Expr(Box::new(e))),
        }
    }

    pub fn is_aggregate(&self) -> bool {
        matches!(self, Expr::Aggregate { .. })
    }

    /// Immediate sub-expressions.
    pub fn children(&self) -> Vec<&Expr> {
        match self {
            Expr::Column(_) | Expr::Literal(_) | Expr::JsonAccess { .. } => vec![],
            Expr::Negate(e) | Expr::IsNull { expr: e, .. } | Expr::Cast { expr: e, .. } => {
                vec![e]
            }
            Expr::ToChar { expr, .. } => vec![expr],
            Expr::Binary { left, right, .. } => vec![left, right],
            Expr::ExtractEpoch { end, start } => vec![end, start],
            Expr::Aggregate { arg, .. } => match arg {
                AggregateArg::Star => vec![],
                AggregateArg::Expr(e) => vec![e],
            },
            Expr::Coalesce(args) => args.iter().collect(),
        }
    }

    pub fn contains_aggregate(&self) -> bool {
        self.is_aggregate() || self.children().into_iter().any(Expr::contains_aggregate)
    }

    /// Visits every column name referenced, including JSONB access targets.
    pub fn for_each_column<'a>(&'a self, f: &mut impl FnMut(&'a str)) {
        match self {
            Expr::Column(name) => f(name),
            Expr::JsonAccess { column, .. } => f(column),
            _ => {
                for c in self.children() {
                    c.for_each_column(f);
                }
            }
        }
    }

    pub(crate) fn default_name(&self) -> String {
        match self {
            Expr::Column(name) => name.clone(),
            Expr::Aggregate { func, .. } => func.name().to_ascii_lowercase(),
            Expr::Coalesce(_) => "coalesce".to_string(),
            Expr::ToChar { .. } => "to_char".to_string(),
            Expr::ExtractEpoch { .. } => "extract".to_string(),
            Expr::Cast { expr, target } => match expr.as_ref() {
                Expr::Column(name) => name.clone(),
                _ => match target {
                    CastType::Float => "float8".to_string(),
                    CastType::Numeric => "numeric".to_string(),
                },
            },
            _ => "?column?".to_string(),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&super::render::render_expr(self))
    }
}

impl fmt::Display for QueryAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&super::render::render(self))
    }
}

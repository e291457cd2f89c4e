use ctra_core::sql::*;
use proptest::prelude::*;
use rust_decimal::Decimal;

fn ident() -> impl Strategy<Value = String> {
    prop_oneof![
        4 => prop::sample::select(vec!["state", "lab_id", "outputs", "created_timestamp", "a", "b_2"]).prop_map(String::from),
        1 => "[A-Za-z_][A-Za-z0-9_ \"]{0,8}",
        1 => prop::sample::select(vec!["order", "select", "null", "count", "Desc"]).prop_map(String::from),
    ]
}

fn literal() -> impl Strategy<Value = Expr> {
    prop_oneof![
        (any::<i32>(), 0u32..4).prop_map(|(m, s)| Expr::number(Decimal::new(m as i64, s))),
        "[a-z' %-]{0,6}".prop_map(|s| Expr::text(&s)),
        Just(Expr::Literal(Literal::Null)),
    ]
}

fn leaf() -> impl Strategy<Value = Expr> {
    prop_oneof![
        ident().prop_map(Expr::Column),
        literal(),
        (ident(), "[a-z_']{1,6}", any::<bool>()).prop_map(|(column, key, as_text)| Expr::JsonAccess {
            column,
            key,
            as_text
        }),
    ]
}

fn binop() -> impl Strategy<Value = BinaryOp> {
    prop::sample::select(vec![
        BinaryOp::Add,
        BinaryOp::Sub,
        BinaryOp::Mul,
        BinaryOp::Div,
        BinaryOp::Eq,
        BinaryOp::NotEq,
        BinaryOp::Lt,
        BinaryOp::LtEq,
        BinaryOp::Gt,
        BinaryOp::GtEq,
        BinaryOp::And,
        BinaryOp::Or,
    ])
}

fn expr() -> impl Strategy<Value = Expr> {
    leaf().prop_recursive(4, 32, 3, |inner| {
        let agg = prop::sample::select(vec![
            AggregateFunc::Count,
            AggregateFunc::Sum,
            AggregateFunc::Avg,
            AggregateFunc::Min,
            AggregateFunc::Max,
        ]);
        prop_oneof![
            (binop(), inner.clone(), inner.clone()).prop_map(|(op, l, r)| Expr::binary(op, l, r)),
            inner.clone().prop_map(|e| Expr::Negate(Box::new(e))),
            (inner.clone(), any::<bool>()).prop_map(|(e, negated)| Expr::IsNull {
                expr: Box::new(e),
                negated
            }),
            (agg, prop::option::of(inner.clone())).prop_map(|(f, a)| match a {
                None => Expr::aggregate(AggregateFunc::Count, None),
                a => Expr::aggregate(f, a),
            }),
            prop::collection::vec(inner.clone(), 1..4).prop_map(Expr::Coalesce),
            (
                inner.clone(),
                prop::sample::select(vec!["YYYY-MM-DD", "YYYY-\"W\"WW", "it's"])
            )
                .prop_map(|(e, p)| Expr::ToChar {
                    expr: Box::new(e),
                    pattern: p.to_string()
                }),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::ExtractEpoch {
                end: Box::new(a),
                start: Box::new(b)
            }),
            (inner, any::<bool>()).prop_map(|(e, f)| Expr::Cast {
                expr: Box::new(e),
                target: if f { CastType::Float } else { CastType::Numeric },
            }),
        ]
    })
}

fn query() -> impl Strategy<Value = QueryAst> {
    (
        prop::collection::vec((expr(), prop::option::of(ident())), 1..4),
        prop::option::of(expr()),
        prop::collection::vec(expr(), 0..3),
        prop::collection::vec((expr(), any::<bool>()), 0..3),
        prop::option::of(0u64..1000),
    )
        .prop_map(|(items, where_clause, group_by, order, limit)| QueryAst {
            select_items: items
                .into_iter()
                .map(|(expr, alias)| SelectItem { expr, alias })
                .collect(),
            from_table: "jobs".into(),
            where_clause,
            group_by,
            order_by: order
                .into_iter()
                .map(|(expr, d)| OrderItem {
                    expr,
                    direction: if d { SortDirection::Desc } else { SortDirection::Asc },
                })
                .collect(),
            limit,
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(600))]

    #[test]
    fn parse_inverts_render(q in query()) {
        let text = render(&q);
        let back = parse(&text).map_err(|e| TestCaseError::fail(format!("{e}: {text}")))?;
        prop_assert_eq!(&back, &q, "{}", text);
        prop_assert_eq!(render(&back), text);
    }
}

#[test]
fn prompt_example_round_trip() {
    let q = parse("SELECT workflow_id, COUNT(*) AS job_count FROM jobs GROUP BY workflow_id ORDER BY job_count DESC")
        .unwrap();
    assert_eq!(parse(&render(&q)).unwrap(), q);
}

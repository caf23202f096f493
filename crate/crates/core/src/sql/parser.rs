//! Recursive-descent parser for the query subset used by text-to-SQL corpora.

use super::lexer::{tokenize, Token, TokenKind};
use super::SqlError;

#[derive(Debug, Clone, PartialEq)]
pub enum Query {
    Select(Box<Select>),
    Compound {
        op: SetOp,
        left: Box<Query>,
        right: Box<Query>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SetOp {
    Union,
    Intersect,
    Except,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Select {
    pub distinct: bool,
    pub items: Vec<SelectItem>,
    pub from: Vec<TableFactor>,
    /// `ON` conditions of every join in the FROM clause.
    pub join_conditions: Vec<Expr>,
    pub selection: Option<Expr>,
    pub group_by: Vec<Expr>,
    pub having: Option<Expr>,
    pub order_by: Vec<OrderItem>,
    pub limit: Option<Expr>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectItem {
    pub expr: Expr,
    pub alias: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TableFactor {
    Table {
        name: String,
        alias: Option<String>,
        pos: usize,
    },
    Derived {
        query: Box<Query>,
        alias: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderItem {
    pub expr: Expr,
    pub descending: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Or,
    And,
    Eq,
    NotEq,
    Lt,
    LtEq,
    Gt,
    GtEq,
    Plus,
    Minus,
    Multiply,
    Divide,
    Modulo,
    Concat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Not,
    Minus,
    Plus,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Column {
        qualifier: Option<String>,
        name: String,
        pos: usize,
    },
    /// `*` or `alias.*`
    Wildcard {
        qualifier: Option<String>,
        pos: usize,
    },
    Number(String),
    Str(String),
    Null,
    Function {
        name: String,
        distinct: bool,
        args: Vec<Expr>,
    },
    Unary {
        op: UnaryOp,
        expr: Box<Expr>,
    },
    Binary {
        op: BinaryOp,
        left: Box<Expr>,
        right: Box<Expr>,
    },
    Between {
        expr: Box<Expr>,
        low: Box<Expr>,
        high: Box<Expr>,
        negated: bool,
    },
    InList {
        expr: Box<Expr>,
        list: Vec<Expr>,
        negated: bool,
    },
    InSubquery {
        expr: Box<Expr>,
        query: Box<Query>,
        negated: bool,
    },
    Exists {
        query: Box<Query>,
        negated: bool,
    },
    Subquery(Box<Query>),
    Like {
        expr: Box<Expr>,
        pattern: Box<Expr>,
        negated: bool,
    },
    IsNull {
        expr: Box<Expr>,
        negated: bool,
    },
}

const RESERVED: &[&str] = &[
    "all",
    "and",
    "as",
    "asc",
    "between",
    "by",
    "cross",
    "desc",
    "distinct",
    "except",
    "exists",
    "from",
    "group",
    "having",
    "in",
    "inner",
    "intersect",
    "is",
    "join",
    "left",
    "like",
    "limit",
    "natural",
    "not",
    "null",
    "offset",
    "on",
    "or",
    "order",
    "outer",
    "right",
    "select",
    "union",
    "where",
];

fn is_reserved(word: &str) -> bool {
    RESERVED.iter().any(|r| r.eq_ignore_ascii_case(word))
}

/// Parses a complete query. A trailing `;` is allowed.
pub fn parse_query(sql: &str) -> Result<Query, SqlError> {
    let tokens = tokenize(sql)?;
    let mut parser = Parser {
        tokens,
        cursor: 0,
        end: sql.len(),
    };
    let query = parser.query()?;
    parser.eat_symbol(";");
    if let Some(tok) = parser.peek() {
        return Err(SqlError::Syntax {
            pos: tok.pos,
            expected: "end of query".into(),
            found: tok.describe(),
        });
    }
    Ok(query)
}

struct Parser {
    tokens: Vec<Token>,
    cursor: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.cursor)
    }

    fn peek_at(&self, offset: usize) -> Option<&Token> {
        self.tokens.get(self.cursor + offset)
    }

    fn pos(&self) -> usize {
        self.peek().map_or(self.end, |t| t.pos)
    }

    fn error<T>(&self, expected: &str) -> Result<T, SqlError> {
        Err(SqlError::Syntax {
            pos: self.pos(),
            expected: expected.to_string(),
            found: self
                .peek()
                .map_or_else(|| "end of query".to_string(), Token::describe),
        })
    }

    fn is_keyword_at(&self, offset: usize, kw: &str) -> bool {
        matches!(self.peek_at(offset), Some(Token { kind: TokenKind::Ident(s), .. }) if s.eq_ignore_ascii_case(kw))
    }

    fn is_keyword(&self, kw: &str) -> bool {
        self.is_keyword_at(0, kw)
    }

    fn eat_keyword(&mut self, kw: &str) -> bool {
        if self.is_keyword(kw) {
            self.cursor += 1;
            true
        } else {
            false
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<(), SqlError> {
        if self.eat_keyword(kw) {
            Ok(())
        } else {
            self.error(&kw.to_uppercase())
        }
    }

    fn is_symbol(&self, sym: &str) -> bool {
        matches!(self.peek(), Some(Token { kind: TokenKind::Symbol(s), .. }) if *s == sym)
    }

    fn eat_symbol(&mut self, sym: &str) -> bool {
        if self.is_symbol(sym) {
            self.cursor += 1;
            true
        } else {
            false
        }
    }

    fn expect_symbol(&mut self, sym: &str) -> Result<(), SqlError> {
        if self.eat_symbol(sym) {
            Ok(())
        } else {
            self.error(&format!("'{sym}'"))
        }
    }

    /// A non-reserved identifier, if one is next.
    fn identifier(&mut self) -> Option<(String, usize)> {
        match self.peek() {
            Some(Token {
                kind: TokenKind::Ident(s),
                pos,
            }) if !is_reserved(s) => {
                let out = (s.clone(), *pos);
                self.cursor += 1;
                Some(out)
            }
            Some(Token {
                kind: TokenKind::QuotedIdent(s),
                pos,
            }) => {
                let out = (s.clone(), *pos);
                self.cursor += 1;
                Some(out)
            }
            _ => None,
        }
    }

    fn expect_identifier(&mut self, what: &str) -> Result<(String, usize), SqlError> {
        match self.identifier() {
            Some(id) => Ok(id),
            None => self.error(what),
        }
    }

    /// `[AS] alias`; string literals are accepted as aliases after AS.
    fn alias(&mut self) -> Result<Option<String>, SqlError> {
        if self.eat_keyword("as") {
            if let Some(Token {
                kind: TokenKind::Str(s),
                ..
            }) = self.peek()
            {
                let s = s.clone();
                self.cursor += 1;
                return Ok(Some(s));
            }
            return Ok(Some(self.expect_identifier("alias")?.0));
        }
        Ok(self.identifier().map(|(s, _)| s))
    }

    fn starts_query(&self) -> bool {
        self.is_keyword("select")
            || (self.is_symbol("(") && {
                let mut depth = 0;
                let mut k = 0;
                while matches!(
                    self.peek_at(k),
                    Some(Token {
                        kind: TokenKind::Symbol("("),
                        ..
                    })
                ) {
                    depth += 1;
                    k += 1;
                }
                depth > 0 && self.is_keyword_at(k, "select")
            })
    }

    fn query(&mut self) -> Result<Query, SqlError> {
        let mut left = self.query_term()?;
        loop {
            let op = if self.eat_keyword("union") {
                self.eat_keyword("all");
                SetOp::Union
            } else if self.eat_keyword("intersect") {
                SetOp::Intersect
            } else if self.eat_keyword("except") {
                SetOp::Except
            } else {
                return Ok(left);
            };
            let right = self.query_term()?;
            left = Query::Compound {
                op,
                left: Box::new(left),
                right: Box::new(right),
            };
        }
    }

    fn query_term(&mut self) -> Result<Query, SqlError> {
        if self.eat_symbol("(") {
            let q = self.query()?;
            self.expect_symbol(")")?;
            return Ok(q);
        }
        Ok(Query::Select(Box::new(self.select()?)))
    }

    fn select(&mut self) -> Result<Select, SqlError> {
        self.expect_keyword("select")?;
        let mut select = Select {
            distinct: self.eat_keyword("distinct"),
            ..Select::default()
        };
        if !select.distinct {
            self.eat_keyword("all");
        }
        loop {
            select.items.push(self.select_item()?);
            if !self.eat_symbol(",") {
                break;
            }
        }
        if self.eat_keyword("from") {
            self.parse_from(&mut select)?;
        }
        if self.eat_keyword("where") {
            select.selection = Some(self.expr()?);
        }
        if self.eat_keyword("group") {
            self.expect_keyword("by")?;
            loop {
                select.group_by.push(self.expr()?);
                if !self.eat_symbol(",") {
                    break;
                }
            }
        }
        if self.eat_keyword("having") {
            select.having = Some(self.expr()?);
        }
        if self.eat_keyword("order") {
            self.expect_keyword("by")?;
            loop {
                let expr = self.expr()?;
                let descending = if self.eat_keyword("desc") {
                    true
                } else {
                    self.eat_keyword("asc");
                    false
                };
                select.order_by.push(OrderItem { expr, descending });
                if !self.eat_symbol(",") {
                    break;
                }
            }
        }
        if self.eat_keyword("limit") {
            select.limit = Some(self.expr()?);
            if self.eat_keyword("offset") || self.eat_symbol(",") {
                self.expr()?;
            }
        }
        Ok(select)
    }

    fn select_item(&mut self) -> Result<SelectItem, SqlError> {
        let pos = self.pos();
        if self.eat_symbol("*") {
            return Ok(SelectItem {
                expr: Expr::Wildcard {
                    qualifier: None,
                    pos,
                },
                alias: None,
            });
        }
        let expr = self.expr()?;
        let alias = self.alias()?;
        Ok(SelectItem { expr, alias })
    }

    fn parse_from(&mut self, select: &mut Select) -> Result<(), SqlError> {
        select.from.push(self.table_factor()?);
        loop {
            if self.eat_symbol(",") {
                select.from.push(self.table_factor()?);
                continue;
            }
            let save = self.cursor;
            self.eat_keyword("natural");
            if self.eat_keyword("left") || self.eat_keyword("right") {
                self.eat_keyword("outer");
            } else {
                let _ = self.eat_keyword("inner") || self.eat_keyword("cross");
            }
            if !self.eat_keyword("join") {
                self.cursor = save;
                return Ok(());
            }
            select.from.push(self.table_factor()?);
            if self.eat_keyword("on") {
                select.join_conditions.push(self.expr()?);
            }
        }
    }

    fn table_factor(&mut self) -> Result<TableFactor, SqlError> {
        if self.is_symbol("(") {
            self.cursor += 1;
            let query = self.query()?;
            self.expect_symbol(")")?;
            let alias = self.alias()?;
            return Ok(TableFactor::Derived {
                query: Box::new(query),
                alias,
            });
        }
        let (name, pos) = self.expect_identifier("table name")?;
        let alias = self.alias()?;
        Ok(TableFactor::Table { name, alias, pos })
    }

    fn expr(&mut self) -> Result<Expr, SqlError> {
        let mut left = self.and_expr()?;
        while self.eat_keyword("or") {
            let right = self.and_expr()?;
            left = binary(BinaryOp::Or, left, right);
        }
        Ok(left)
    }

    fn and_expr(&mut self) -> Result<Expr, SqlError> {
        let mut left = self.not_expr()?;
        while self.eat_keyword("and") {
            let right = self.not_expr()?;
            left = binary(BinaryOp::And, left, right);
        }
        Ok(left)
    }

    fn not_expr(&mut self) -> Result<Expr, SqlError> {
        if self.is_keyword("not") && !self.is_keyword_at(1, "exists") {
            self.cursor += 1;
            let inner = self.not_expr()?;
            return Ok(Expr::Unary {
                op: UnaryOp::Not,
                expr: Box::new(inner),
            });
        }
        self.predicate()
    }

    fn predicate(&mut self) -> Result<Expr, SqlError> {
        let left = self.additive()?;
        if self.eat_keyword("is") {
            let negated = self.eat_keyword("not");
            self.expect_keyword("null")?;
            return Ok(Expr::IsNull {
                expr: Box::new(left),
                negated,
            });
        }
        let negated = if self.is_keyword("not")
            && (self.is_keyword_at(1, "between")
                || self.is_keyword_at(1, "in")
                || self.is_keyword_at(1, "like"))
        {
            self.cursor += 1;
            true
        } else {
            false
        };
        if self.eat_keyword("between") {
            let low = self.additive()?;
            self.expect_keyword("and")?;
            let high = self.additive()?;
            return Ok(Expr::Between {
                expr: Box::new(left),
                low: Box::new(low),
                high: Box::new(high),
                negated,
            });
        }
        if self.eat_keyword("in") {
            self.expect_symbol("(")?;
            if self.starts_query() {
                let query = self.query()?;
                self.expect_symbol(")")?;
                return Ok(Expr::InSubquery {
                    expr: Box::new(left),
                    query: Box::new(query),
                    negated,
                });
            }
            let mut list = Vec::new();
            if !self.is_symbol(")") {
                loop {
                    list.push(self.expr()?);
                    if !self.eat_symbol(",") {
                        break;
                    }
                }
            }
            self.expect_symbol(")")?;
            return Ok(Expr::InList {
                expr: Box::new(left),
                list,
                negated,
            });
        }
        if self.eat_keyword("like") {
            let pattern = self.additive()?;
            return Ok(Expr::Like {
                expr: Box::new(left),
                pattern: Box::new(pattern),
                negated,
            });
        }
        let op = match self.peek() {
            Some(Token {
                kind: TokenKind::Symbol(s),
                ..
            }) => match *s {
                "=" | "==" => Some(BinaryOp::Eq),
                "!=" | "<>" => Some(BinaryOp::NotEq),
                "<" => Some(BinaryOp::Lt),
                "<=" => Some(BinaryOp::LtEq),
                ">" => Some(BinaryOp::Gt),
                ">=" => Some(BinaryOp::GtEq),
                _ => None,
            },
            _ => None,
        };
        match op {
            Some(op) => {
                self.cursor += 1;
                let right = self.additive()?;
                Ok(binary(op, left, right))
            }
            None => Ok(left),
        }
    }

    fn additive(&mut self) -> Result<Expr, SqlError> {
        let mut left = self.multiplicative()?;
        loop {
            let op = if self.eat_symbol("+") {
                BinaryOp::Plus
            } else if self.eat_symbol("-") {
                BinaryOp::Minus
            } else if self.eat_symbol("||") {
                BinaryOp::Concat
            } else {
                return Ok(left);
            };
            let right = self.multiplicative()?;
            left = binary(op, left, right);
        }
    }

    fn multiplicative(&mut self) -> Result<Expr, SqlError> {
        let mut left = self.unary()?;
        loop {
            let op = if self.eat_symbol("*") {
                BinaryOp::Multiply
            } else if self.eat_symbol("/") {
                BinaryOp::Divide
            } else if self.eat_symbol("%") {
                BinaryOp::Modulo
            } else {
                return Ok(left);
            };
            let right = self.unary()?;
            left = binary(op, left, right);
        }
    }

    fn unary(&mut self) -> Result<Expr, SqlError> {
        let op = if self.eat_symbol("-") {
            UnaryOp::Minus
        } else if self.eat_symbol("+") {
            UnaryOp::Plus
        } else {
            return self.primary();
        };
        Ok(Expr::Unary {
            op,
            expr: Box::new(self.unary()?),
        })
    }

    fn primary(&mut self) -> Result<Expr, SqlError> {
        if self.is_keyword("not") && self.is_keyword_at(1, "exists") {
            self.cursor += 2;
            return self.exists(true);
        }
        if self.eat_keyword("exists") {
            return self.exists(false);
        }
        if self.eat_keyword("null") {
            return Ok(Expr::Null);
        }
        if self.is_symbol("(") {
            if self.starts_query() {
                self.cursor += 1;
                let q = self.query()?;
                self.expect_symbol(")")?;
                return Ok(Expr::Subquery(Box::new(q)));
            }
            self.cursor += 1;
            let e = self.expr()?;
            self.expect_symbol(")")?;
            return Ok(e);
        }
        match self.peek().cloned() {
            Some(Token {
                kind: TokenKind::Number(n),
                ..
            }) => {
                self.cursor += 1;
                Ok(Expr::Number(n))
            }
            Some(Token {
                kind: TokenKind::Str(s),
                ..
            }) => {
                self.cursor += 1;
                Ok(Expr::Str(s))
            }
            _ => {
                let Some((name, pos)) = self.identifier() else {
                    return self.error("expression");
                };
                if self.eat_symbol("(") {
                    return self.function(name);
                }
                if self.eat_symbol(".") {
                    if self.eat_symbol("*") {
                        return Ok(Expr::Wildcard {
                            qualifier: Some(name),
                            pos,
                        });
                    }
                    let (column, column_pos) = self.expect_identifier("column name")?;
                    return Ok(Expr::Column {
                        qualifier: Some(name),
                        name: column,
                        pos: column_pos,
                    });
                }
                Ok(Expr::Column {
                    qualifier: None,
                    name,
                    pos,
                })
            }
        }
    }

    fn exists(&mut self, negated: bool) -> Result<Expr, SqlError> {
        self.expect_symbol("(")?;
        let query = self.query()?;
        self.expect_symbol(")")?;
        Ok(Expr::Exists {
            query: Box::new(query),
            negated,
        })
    }

    fn function(&mut self, name: String) -> Result<Expr, SqlError> {
        let distinct = self.eat_keyword("distinct");
        let mut args = Vec::new();
        if self.eat_symbol(")") {
            return Ok(Expr::Function {
                name,
                distinct,
                args,
            });
        }
        loop {
            let pos = self.pos();
            if self.eat_symbol("*") {
                args.push(Expr::Wildcard {
                    qualifier: None,
                    pos,
                });
            } else {
                args.push(self.expr()?);
            }
            if !self.eat_symbol(",") {
                break;
            }
        }
        self.expect_symbol(")")?;
        Ok(Expr::Function {
            name,
            distinct,
            args,
        })
    }
}

fn binary(op: BinaryOp, left: Expr, right: Expr) -> Expr {
    Expr::Binary {
        op,
        left: Box::new(left),
        right: Box::new(right),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn select(q: &Query) -> &Select {
        match q {
            Query::Select(s) => s,
            _ => panic!("expected a plain select"),
        }
    }

    #[test]
    fn joins_and_aliases() {
        let q = parse_query(
            "SELECT T1.name FROM actor AS T1 JOIN musical AS T2 ON T1.musical_id = T2.id",
        )
        .unwrap();
        let s = select(&q);
        assert_eq!(s.from.len(), 2);
        assert_eq!(s.join_conditions.len(), 1);
        assert!(matches!(&s.from[1], TableFactor::Table { alias: Some(a), .. } if a == "T2"));
    }

    #[test]
    fn full_clause_set() {
        let q = parse_query(
            "SELECT DISTINCT a, count(*) AS n FROM t WHERE b BETWEEN 1 AND 2 AND c NOT IN (1, 2) \
             AND d LIKE '%x%' OR NOT e = 3 GROUP BY a HAVING count(*) > 1 ORDER BY n DESC, a LIMIT 5;",
        )
        .unwrap();
        let s = select(&q);
        assert!(s.distinct);
        assert_eq!(s.items[1].alias.as_deref(), Some("n"));
        assert_eq!(s.group_by.len(), 1);
        assert!(s.having.is_some());
        assert!(s.order_by[0].descending);
        assert!(s.limit.is_some());
    }

    #[test]
    fn set_operations_and_subqueries() {
        let q = parse_query(
            "SELECT a FROM t WHERE b IN (SELECT b FROM u) INTERSECT SELECT a FROM (SELECT a FROM v) \
             EXCEPT SELECT a FROM w WHERE NOT EXISTS (SELECT * FROM x)",
        )
        .unwrap();
        assert!(matches!(
            q,
            Query::Compound {
                op: SetOp::Except,
                ..
            }
        ));
    }

    #[test]
    fn comma_from_and_outer_join() {
        let q = parse_query("SELECT * FROM a, b LEFT OUTER JOIN c ON a.x = c.x").unwrap();
        assert_eq!(select(&q).from.len(), 3);
    }

    #[test]
    fn rejects_outside_grammar() {
        let err = parse_query("UPDATE t SET a = 1").unwrap_err();
        assert!(matches!(err, SqlError::Syntax { pos: 0, .. }));
        let err = parse_query("SELECT a FROM t WHERE").unwrap_err();
        assert!(matches!(err, SqlError::Syntax { pos: 21, .. }), "{err:?}");
        assert!(parse_query("SELECT a FROM t garbage extra").is_err());
    }
}

use std::collections::HashSet;

use super::ast::*;
use super::lexer::{Token, TokenKind};
use super::FrontendError;

pub struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    next_id: NodeId,
    /// Node ids that were wrapped in parentheses in the source. Needed to
    /// reject unparenthesized mixing of `??` with `||`/`&&`.
    parenthesized: HashSet<NodeId>,
}

impl Parser {
    pub fn new(tokens: Vec<Token>) -> Self {
        Parser {
            tokens,
            pos: 0,
            next_id: 0,
            parenthesized: HashSet::new(),
        }
    }

    fn peek(&self) -> &Token {
        &self.tokens[self.pos.min(self.tokens.len() - 1)]
    }

    fn peek_kind(&self) -> &TokenKind {
        &self.peek().kind
    }

    fn advance(&mut self) -> Token {
        let t = self.tokens[self.pos.min(self.tokens.len() - 1)].clone();
        if self.pos < self.tokens.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn check(&self, kind: &TokenKind) -> bool {
        self.peek_kind() == kind
    }

    fn eat(&mut self, kind: &TokenKind) -> bool {
        if self.check(kind) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, kind: TokenKind) -> Result<Token, FrontendError> {
        if self.check(&kind) {
            Ok(self.advance())
        } else {
            Err(self.unexpected(&kind.describe()))
        }
    }

    fn unexpected(&self, expected: &str) -> FrontendError {
        let t = self.peek();
        FrontendError::Parse {
            expected: expected.to_string(),
            found: t.kind.describe(),
            loc: t.loc.clone(),
        }
    }

    fn node(&mut self, kind: NodeKind, start: &SourceLocation, end_byte: usize) -> AstNode {
        let id = self.next_id;
        self.next_id += 1;
        let mut loc = start.clone();
        loc.byte_end = end_byte;
        AstNode { id, loc, kind }
    }

    fn prev_end(&self) -> usize {
        if self.pos == 0 {
            return 0;
        }
        self.tokens[self.pos - 1].loc.byte_end
    }

    fn expect_ident(&mut self) -> Result<(String, SourceLocation), FrontendError> {
        match self.peek_kind().clone() {
            TokenKind::Ident(name) => {
                let t = self.advance();
                Ok((name, t.loc))
            }
            _ => Err(self.unexpected("identifier")),
        }
    }

    pub fn parse_program(&mut self, file: &str) -> Result<AstNode, FrontendError> {
        let start = self
            .tokens
            .first()
            .map(|t| t.loc.clone())
            .unwrap_or_else(|| SourceLocation::synthetic(file));
        let mut body = Vec::new();
        while !self.check(&TokenKind::Eof) {
            body.push(self.parse_statement()?);
        }
        let end = self.peek().loc.byte_start.max(start.byte_start + 1);
        Ok(self.node(NodeKind::Program { body }, &start, end))
    }

    fn parse_statement(&mut self) -> Result<AstNode, FrontendError> {
        match self.peek_kind() {
            TokenKind::Let => self.parse_var_decl(),
            TokenKind::Function => self.parse_function_decl(),
            TokenKind::If => self.parse_if(),
            TokenKind::While => self.parse_while(),
            TokenKind::For => self.parse_for(),
            TokenKind::Return => self.parse_return(),
            TokenKind::Ident(name) if name == "module" => self.parse_export_or_expr(),
            _ => self.parse_expr_statement(),
        }
    }

    fn parse_var_decl(&mut self) -> Result<AstNode, FrontendError> {
        let start = self.expect(TokenKind::Let)?.loc;
        let (name, _) = self.expect_ident()?;
        let init = if self.eat(&TokenKind::Eq) {
            Some(Box::new(self.parse_expression()?))
        } else {
            None
        };
        self.expect(TokenKind::Semi)?;
        let end = self.prev_end();
        Ok(self.node(NodeKind::VarDecl { name, init }, &start, end))
    }

    fn parse_function_decl(&mut self) -> Result<AstNode, FrontendError> {
        let start = self.expect(TokenKind::Function)?.loc;
        let (name, _) = self.expect_ident()?;
        let params = self.parse_params()?;
        let body = self.parse_block()?;
        let end = self.prev_end();
        Ok(self.node(NodeKind::FunctionDecl { name, params, body }, &start, end))
    }

    fn parse_params(&mut self) -> Result<Vec<String>, FrontendError> {
        self.expect(TokenKind::LParen)?;
        let mut params = Vec::new();
        if !self.check(&TokenKind::RParen) {
            loop {
                let (name, _) = self.expect_ident()?;
                params.push(name);
                if !self.eat(&TokenKind::Comma) {
                    break;
                }
            }
        }
        self.expect(TokenKind::RParen)?;
        Ok(params)
    }

    fn parse_block(&mut self) -> Result<Vec<AstNode>, FrontendError> {
        self.expect(TokenKind::LBrace)?;
        let mut body = Vec::new();
        while !self.check(&TokenKind::RBrace) {
            if self.check(&TokenKind::Eof) {
                return Err(self.unexpected("`}`"));
            }
            body.push(self.parse_statement()?);
        }
        self.expect(TokenKind::RBrace)?;
        Ok(body)
    }

    /// Either a braced block or a single statement.
    fn parse_body(&mut self) -> Result<Vec<AstNode>, FrontendError> {
        if self.check(&TokenKind::LBrace) {
            self.parse_block()
        } else {
            Ok(vec![self.parse_statement()?])
        }
    }

    fn parse_if(&mut self) -> Result<AstNode, FrontendError> {
        let start = self.expect(TokenKind::If)?.loc;
        self.expect(TokenKind::LParen)?;
        let test = Box::new(self.parse_expression()?);
        self.expect(TokenKind::RParen)?;
        let consequent = self.parse_body()?;
        let alternate = if self.eat(&TokenKind::Else) {
            Some(self.parse_body()?)
        } else {
            None
        };
        let end = self.prev_end();
        Ok(self.node(
            NodeKind::If {
                test,
                consequent,
                alternate,
            },
            &start,
            end,
        ))
    }

    fn parse_while(&mut self) -> Result<AstNode, FrontendError> {
        let start = self.expect(TokenKind::While)?.loc;
        self.expect(TokenKind::LParen)?;
        let test = Box::new(self.parse_expression()?);
        self.expect(TokenKind::RParen)?;
        let body = self.parse_body()?;
        let end = self.prev_end();
        Ok(self.node(NodeKind::While { test, body }, &start, end))
    }

    fn parse_for(&mut self) -> Result<AstNode, FrontendError> {
        let start = self.expect(TokenKind::For)?.loc;
        self.expect(TokenKind::LParen)?;
        let init = if self.check(&TokenKind::Semi) {
            self.advance();
            None
        } else if self.check(&TokenKind::Let) {
            // parse_var_decl consumes the trailing semicolon
            Some(Box::new(self.parse_var_decl()?))
        } else {
            let e = self.parse_expression()?;
            self.expect(TokenKind::Semi)?;
            Some(Box::new(e))
        };
        let test = if self.check(&TokenKind::Semi) {
            None
        } else {
            Some(Box::new(self.parse_expression()?))
        };
        self.expect(TokenKind::Semi)?;
        let update = if self.check(&TokenKind::RParen) {
            None
        } else {
            Some(Box::new(self.parse_expression()?))
        };
        self.expect(TokenKind::RParen)?;
        let body = self.parse_body()?;
        let end = self.prev_end();
        Ok(self.node(
            NodeKind::For {
                init,
                test,
                update,
                body,
            },
            &start,
            end,
        ))
    }

    fn parse_return(&mut self) -> Result<AstNode, FrontendError> {
        let start = self.expect(TokenKind::Return)?.loc;
        let value = if self.check(&TokenKind::Semi) {
            None
        } else {
            Some(Box::new(self.parse_expression()?))
        };
        self.expect(TokenKind::Semi)?;
        let end = self.prev_end();
        Ok(self.node(NodeKind::Return { value }, &start, end))
    }

    /// `module.exports = expr;` is the export statement; anything else
    /// starting with the `module` identifier is an ordinary expression.
    fn parse_export_or_expr(&mut self) -> Result<AstNode, FrontendError> {
        let is_export = matches!(
            (
                self.tokens.get(self.pos + 1).map(|t| &t.kind),
                self.tokens.get(self.pos + 2).map(|t| &t.kind),
                self.tokens.get(self.pos + 3).map(|t| &t.kind),
            ),
            (
                Some(TokenKind::Dot),
                Some(TokenKind::Ident(name)),
                Some(TokenKind::Eq),
            ) if name == "exports"
        );
        if !is_export {
            return self.parse_expr_statement();
        }
        let start = self.advance().loc; // module
        self.advance(); // .
        self.advance(); // exports
        self.advance(); // =
        let value = Box::new(self.parse_expression()?);
        self.expect(TokenKind::Semi)?;
        let end = self.prev_end();
        Ok(self.node(NodeKind::ExportStmt { value }, &start, end))
    }

    fn parse_expr_statement(&mut self) -> Result<AstNode, FrontendError> {
        let expr = self.parse_expression()?;
        self.expect(TokenKind::Semi)?;
        Ok(expr)
    }

    pub fn parse_expression(&mut self) -> Result<AstNode, FrontendError> {
        self.parse_assignment()
    }

    fn parse_assignment(&mut self) -> Result<AstNode, FrontendError> {
        let left = self.parse_ternary()?;
        if self.check(&TokenKind::Eq) {
            let start = left.loc.clone();
            self.advance();
            let value = Box::new(self.parse_assignment()?);
            let end = self.prev_end();
            return match left.kind {
                NodeKind::Identifier { name } => {
                    Ok(self.node(NodeKind::Assign { name, value }, &start, end))
                }
                NodeKind::MemberRead { base, key } => {
                    Ok(self.node(NodeKind::MemberWrite { base, key, value }, &start, end))
                }
                _ => Err(FrontendError::Parse {
                    expected: "assignable target (identifier or member access)".to_string(),
                    found: "expression".to_string(),
                    loc: start,
                }),
            };
        }
        Ok(left)
    }

    fn parse_ternary(&mut self) -> Result<AstNode, FrontendError> {
        let test = self.parse_nullish()?;
        if self.eat(&TokenKind::Question) {
            let start = test.loc.clone();
            let consequent = Box::new(self.parse_assignment()?);
            self.expect(TokenKind::Colon)?;
            let alternate = Box::new(self.parse_assignment()?);
            let end = self.prev_end();
            return Ok(self.node(
                NodeKind::Ternary {
                    test: Box::new(test),
                    consequent,
                    alternate,
                },
                &start,
                end,
            ));
        }
        Ok(test)
    }

    fn check_nullish_operand(&self, operand: &AstNode) -> Result<(), FrontendError> {
        let mixed = matches!(
            operand.kind,
            NodeKind::LogicalOr { .. } | NodeKind::LogicalAnd { .. }
        ) && !self.parenthesized.contains(&operand.id);
        if mixed {
            return Err(FrontendError::Parse {
                expected: "parentheses around `||`/`&&` when mixed with `??`".to_string(),
                found: "unparenthesized logical operand".to_string(),
                loc: operand.loc.clone(),
            });
        }
        Ok(())
    }

    fn parse_nullish(&mut self) -> Result<AstNode, FrontendError> {
        let mut left = self.parse_logical_or()?;
        while self.check(&TokenKind::QuestionQuestion) {
            self.check_nullish_operand(&left)?;
            self.advance();
            let start = left.loc.clone();
            let right = self.parse_logical_or()?;
            self.check_nullish_operand(&right)?;
            let end = self.prev_end();
            left = self.node(
                NodeKind::NullishCoalesce {
                    left: Box::new(left),
                    right: Box::new(right),
                },
                &start,
                end,
            );
        }
        Ok(left)
    }

    fn parse_logical_or(&mut self) -> Result<AstNode, FrontendError> {
        let mut left = self.parse_logical_and()?;
        while self.eat(&TokenKind::OrOr) {
            let start = left.loc.clone();
            let right = self.parse_logical_and()?;
            let end = self.prev_end();
            left = self.node(
                NodeKind::LogicalOr {
                    left: Box::new(left),
                    right: Box::new(right),
                },
                &start,
                end,
            );
        }
        Ok(left)
    }

    fn parse_logical_and(&mut self) -> Result<AstNode, FrontendError> {
        let mut left = self.parse_equality()?;
        while self.eat(&TokenKind::AndAnd) {
            let start = left.loc.clone();
            let right = self.parse_equality()?;
            let end = self.prev_end();
            left = self.node(
                NodeKind::LogicalAnd {
                    left: Box::new(left),
                    right: Box::new(right),
                },
                &start,
                end,
            );
        }
        Ok(left)
    }

    fn parse_equality(&mut self) -> Result<AstNode, FrontendError> {
        let mut left = self.parse_comparison()?;
        loop {
            let op = match self.peek_kind() {
                TokenKind::EqEq => BinaryOp::Eq,
                TokenKind::EqEqEq => BinaryOp::StrictEq,
                TokenKind::NotEq => BinaryOp::Ne,
                TokenKind::NotEqEq => BinaryOp::StrictNe,
                _ => break,
            };
            self.advance();
            let start = left.loc.clone();
            let right = self.parse_comparison()?;
            let end = self.prev_end();
            left = self.node(
                NodeKind::Binary {
                    op,
                    left: Box::new(left),
                    right: Box::new(right),
                },
                &start,
                end,
            );
        }
        Ok(left)
    }

    fn parse_comparison(&mut self) -> Result<AstNode, FrontendError> {
        let mut left = self.parse_additive()?;
        loop {
            let op = match self.peek_kind() {
                TokenKind::Lt => BinaryOp::Lt,
                TokenKind::Le => BinaryOp::Le,
                TokenKind::Gt => BinaryOp::Gt,
                TokenKind::Ge => BinaryOp::Ge,
                _ => break,
            };
            self.advance();
            let start = left.loc.clone();
            let right = self.parse_additive()?;
            let end = self.prev_end();
            left = self.node(
                NodeKind::Binary {
                    op,
                    left: Box::new(left),
                    right: Box::new(right),
                },
                &start,
                end,
            );
        }
        Ok(left)
    }

    fn parse_additive(&mut self) -> Result<AstNode, FrontendError> {
        let mut left = self.parse_multiplicative()?;
        loop {
            let op = match self.peek_kind() {
                TokenKind::Plus => BinaryOp::Add,
                TokenKind::Minus => BinaryOp::Sub,
                _ => break,
            };
            self.advance();
            let start = left.loc.clone();
            let right = self.parse_multiplicative()?;
            let end = self.prev_end();
            left = self.node(
                NodeKind::Binary {
                    op,
                    left: Box::new(left),
                    right: Box::new(right),
                },
                &start,
                end,
            );
        }
        Ok(left)
    }

    fn parse_multiplicative(&mut self) -> Result<AstNode, FrontendError> {
        let mut left = self.parse_unary()?;
        loop {
            let op = match self.peek_kind() {
                TokenKind::Star => BinaryOp::Mul,
                TokenKind::Slash => BinaryOp::Div,
                TokenKind::Percent => BinaryOp::Rem,
                _ => break,
            };
            self.advance();
            let start = left.loc.clone();
            let right = self.parse_unary()?;
            let end = self.prev_end();
            left = self.node(
                NodeKind::Binary {
                    op,
                    left: Box::new(left),
                    right: Box::new(right),
                },
                &start,
                end,
            );
        }
        Ok(left)
    }

    fn parse_unary(&mut self) -> Result<AstNode, FrontendError> {
        let op = match self.peek_kind() {
            TokenKind::Bang => Some(UnaryOp::Not),
            TokenKind::Minus => Some(UnaryOp::Neg),
            TokenKind::TypeOf => Some(UnaryOp::TypeOf),
            _ => None,
        };
        if let Some(op) = op {
            let start = self.advance().loc;
            let operand = Box::new(self.parse_unary()?);
            let end = self.prev_end();
            return Ok(self.node(NodeKind::Unary { op, operand }, &start, end));
        }
        self.parse_postfix()
    }

    fn parse_postfix(&mut self) -> Result<AstNode, FrontendError> {
        let mut expr = self.parse_primary()?;
        loop {
            if self.eat(&TokenKind::Dot) {
                let start = expr.loc.clone();
                let (name, _) = self.expect_ident()?;
                if self.check(&TokenKind::LParen) {
                    let args = self.parse_args()?;
                    let end = self.prev_end();
                    expr = self.node(
                        NodeKind::MethodCall {
                            base: Box::new(expr),
                            key: MemberKey::Static(name),
                            args,
                        },
                        &start,
                        end,
                    );
                } else {
                    let end = self.prev_end();
                    expr = self.node(
                        NodeKind::MemberRead {
                            base: Box::new(expr),
                            key: MemberKey::Static(name),
                        },
                        &start,
                        end,
                    );
                }
            } else if self.check(&TokenKind::LBracket) {
                let start = expr.loc.clone();
                self.advance();
                let key_expr = self.parse_expression()?;
                self.expect(TokenKind::RBracket)?;
                let key = match &key_expr.kind {
                    NodeKind::Literal {
                        value: LiteralValue::Str(s),
                    } => MemberKey::Static(s.clone()),
                    _ => MemberKey::Computed(Box::new(key_expr)),
                };
                if self.check(&TokenKind::LParen) {
                    let args = self.parse_args()?;
                    let end = self.prev_end();
                    expr = self.node(
                        NodeKind::MethodCall {
                            base: Box::new(expr),
                            key,
                            args,
                        },
                        &start,
                        end,
                    );
                } else {
                    let end = self.prev_end();
                    expr = self.node(
                        NodeKind::MemberRead {
                            base: Box::new(expr),
                            key,
                        },
                        &start,
                        end,
                    );
                }
            } else if self.check(&TokenKind::LParen) {
                let start = expr.loc.clone();
                let args = self.parse_args()?;
                let end = self.prev_end();
                expr = self.node(
                    NodeKind::Call {
                        callee: Box::new(expr),
                        args,
                    },
                    &start,
                    end,
                );
            } else {
                break;
            }
        }
        Ok(expr)
    }

    fn parse_args(&mut self) -> Result<Vec<AstNode>, FrontendError> {
        self.expect(TokenKind::LParen)?;
        let mut args = Vec::new();
        if !self.check(&TokenKind::RParen) {
            loop {
                args.push(self.parse_expression()?);
                if !self.eat(&TokenKind::Comma) {
                    break;
                }
            }
        }
        self.expect(TokenKind::RParen)?;
        Ok(args)
    }

    fn parse_primary(&mut self) -> Result<AstNode, FrontendError> {
        let tok = self.peek().clone();
        match tok.kind {
            TokenKind::Num(n) => {
                self.advance();
                Ok(self.node(
                    NodeKind::Literal {
                        value: LiteralValue::Num(n),
                    },
                    &tok.loc,
                    tok.loc.byte_end,
                ))
            }
            TokenKind::Str(s) => {
                self.advance();
                Ok(self.node(
                    NodeKind::Literal {
                        value: LiteralValue::Str(s),
                    },
                    &tok.loc,
                    tok.loc.byte_end,
                ))
            }
            TokenKind::True | TokenKind::False => {
                let b = matches!(tok.kind, TokenKind::True);
                self.advance();
                Ok(self.node(
                    NodeKind::Literal {
                        value: LiteralValue::Bool(b),
                    },
                    &tok.loc,
                    tok.loc.byte_end,
                ))
            }
            TokenKind::Null => {
                self.advance();
                Ok(self.node(
                    NodeKind::Literal {
                        value: LiteralValue::Null,
                    },
                    &tok.loc,
                    tok.loc.byte_end,
                ))
            }
            TokenKind::Undefined => {
                self.advance();
                Ok(self.node(
                    NodeKind::Literal {
                        value: LiteralValue::Undefined,
                    },
                    &tok.loc,
                    tok.loc.byte_end,
                ))
            }
            TokenKind::Ident(name) => {
                self.advance();
                Ok(self.node(NodeKind::Identifier { name }, &tok.loc, tok.loc.byte_end))
            }
            TokenKind::Require => {
                self.advance();
                self.expect(TokenKind::LParen)?;
                let path = Box::new(self.parse_expression()?);
                self.expect(TokenKind::RParen)?;
                let end = self.prev_end();
                Ok(self.node(NodeKind::RequireExpr { path }, &tok.loc, end))
            }
            TokenKind::Function => {
                self.advance();
                let params = self.parse_params()?;
                let body = self.parse_block()?;
                let end = self.prev_end();
                Ok(self.node(NodeKind::FunctionExpr { params, body }, &tok.loc, end))
            }
            TokenKind::LParen => {
                self.advance();
                let inner = self.parse_expression()?;
                self.expect(TokenKind::RParen)?;
                self.parenthesized.insert(inner.id);
                Ok(inner)
            }
            TokenKind::LBrace => self.parse_object_literal(),
            TokenKind::LBracket => self.parse_array_literal(),
            _ => Err(self.unexpected("expression")),
        }
    }

    fn parse_object_literal(&mut self) -> Result<AstNode, FrontendError> {
        let start = self.expect(TokenKind::LBrace)?.loc;
        let mut props = Vec::new();
        if !self.check(&TokenKind::RBrace) {
            loop {
                let (key, key_loc) = match self.peek_kind().clone() {
                    TokenKind::Ident(name) => {
                        let t = self.advance();
                        (name, t.loc)
                    }
                    TokenKind::Str(s) => {
                        let t = self.advance();
                        (s, t.loc)
                    }
                    _ => return Err(self.unexpected("object key")),
                };
                let value = if self.eat(&TokenKind::Colon) {
                    self.parse_expression()?
                } else {
                    // shorthand `{run}`
                    let end = key_loc.byte_end;
                    self.node(NodeKind::Identifier { name: key.clone() }, &key_loc, end)
                };
                props.push((key, value));
                if !self.eat(&TokenKind::Comma) {
                    break;
                }
                if self.check(&TokenKind::RBrace) {
                    break;
                }
            }
        }
        self.expect(TokenKind::RBrace)?;
        let end = self.prev_end();
        Ok(self.node(NodeKind::ObjectLiteral { props }, &start, end))
    }

    fn parse_array_literal(&mut self) -> Result<AstNode, FrontendError> {
        let start = self.expect(TokenKind::LBracket)?.loc;
        let mut elements = Vec::new();
        if !self.check(&TokenKind::RBracket) {
            loop {
                elements.push(self.parse_expression()?);
                if !self.eat(&TokenKind::Comma) {
                    break;
                }
                if self.check(&TokenKind::RBracket) {
                    break;
                }
            }
        }
        self.expect(TokenKind::RBracket)?;
        let end = self.prev_end();
        Ok(self.node(NodeKind::ArrayLiteral { elements }, &start, end))
    }
}

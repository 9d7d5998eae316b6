use serde::{Deserialize, Serialize};

/// Byte-exact position of a syntax element inside a package-relative file.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SourceLocation {
    pub file: String,
    pub line: u32,
    pub column: u32,
    pub byte_start: usize,
    pub byte_end: usize,
}

impl SourceLocation {
    pub fn synthetic(file: &str) -> Self {
        SourceLocation {
            file: file.to_string(),
            line: 1,
            column: 1,
            byte_start: 0,
            byte_end: 1,
        }
    }

    /// Compact `file:line:col` form used by reports and flow keys.
    pub fn display_key(&self) -> String {
        format!("{}:{}:{}", self.file, self.line, self.column)
    }
}

impl std::fmt::Display for SourceLocation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}:{}", self.file, self.line, self.column)
    }
}

pub type NodeId = u32;

#[derive(Debug, Clone, PartialEq)]
pub struct AstNode {
    pub id: NodeId,
    pub loc: SourceLocation,
    pub kind: NodeKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LiteralValue {
    Undefined,
    Null,
    Bool(bool),
    Num(f64),
    Str(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum MemberKey {
    /// `base.key` or `base["key"]` with a string literal.
    Static(String),
    /// `base[expr]`.
    Computed(Box<AstNode>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    StrictEq,
    Ne,
    StrictNe,
}

impl BinaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Rem => "%",
            BinaryOp::Lt => "<",
            BinaryOp::Le => "<=",
            BinaryOp::Gt => ">",
            BinaryOp::Ge => ">=",
            BinaryOp::Eq => "==",
            BinaryOp::StrictEq => "===",
            BinaryOp::Ne => "!=",
            BinaryOp::StrictNe => "!==",
        }
    }

    pub fn is_equality(self) -> bool {
        matches!(
            self,
            BinaryOp::Eq | BinaryOp::StrictEq | BinaryOp::Ne | BinaryOp::StrictNe
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Not,
    Neg,
    TypeOf,
}

impl UnaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            UnaryOp::Not => "!",
            UnaryOp::Neg => "-",
            UnaryOp::TypeOf => "typeof",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NodeKind {
    Program {
        body: Vec<AstNode>,
    },
    FunctionDecl {
        name: String,
        params: Vec<String>,
        body: Vec<AstNode>,
    },
    FunctionExpr {
        params: Vec<String>,
        body: Vec<AstNode>,
    },
    VarDecl {
        name: String,
        init: Option<Box<AstNode>>,
    },
    Assign {
        name: String,
        value: Box<AstNode>,
    },
    Identifier {
        name: String,
    },
    Literal {
        value: LiteralValue,
    },
    ObjectLiteral {
        props: Vec<(String, AstNode)>,
    },
    ArrayLiteral {
        elements: Vec<AstNode>,
    },
    MemberRead {
        base: Box<AstNode>,
        key: MemberKey,
    },
    MemberWrite {
        base: Box<AstNode>,
        key: MemberKey,
        value: Box<AstNode>,
    },
    Call {
        callee: Box<AstNode>,
        args: Vec<AstNode>,
    },
    MethodCall {
        base: Box<AstNode>,
        key: MemberKey,
        args: Vec<AstNode>,
    },
    Binary {
        op: BinaryOp,
        left: Box<AstNode>,
        right: Box<AstNode>,
    },
    Unary {
        op: UnaryOp,
        operand: Box<AstNode>,
    },
    LogicalOr {
        left: Box<AstNode>,
        right: Box<AstNode>,
    },
    LogicalAnd {
        left: Box<AstNode>,
        right: Box<AstNode>,
    },
    NullishCoalesce {
        left: Box<AstNode>,
        right: Box<AstNode>,
    },
    Ternary {
        test: Box<AstNode>,
        consequent: Box<AstNode>,
        alternate: Box<AstNode>,
    },
    If {
        test: Box<AstNode>,
        consequent: Vec<AstNode>,
        alternate: Option<Vec<AstNode>>,
    },
    While {
        test: Box<AstNode>,
        body: Vec<AstNode>,
    },
    For {
        init: Option<Box<AstNode>>,
        test: Option<Box<AstNode>>,
        update: Option<Box<AstNode>>,
        body: Vec<AstNode>,
    },
    Return {
        value: Option<Box<AstNode>>,
    },
    RequireExpr {
        path: Box<AstNode>,
    },
    ExportStmt {
        value: Box<AstNode>,
    },
}

impl AstNode {
    /// Depth-first walk over the node and all descendants.
    pub fn walk<'a>(&'a self, visit: &mut dyn FnMut(&'a AstNode)) {
        visit(self);
        let mut kids: Vec<&AstNode> = Vec::new();
        match &self.kind {
            NodeKind::Program { body }
            | NodeKind::FunctionDecl { body, .. }
            | NodeKind::FunctionExpr { body, .. } => kids.extend(body.iter()),
            NodeKind::VarDecl { init, .. } => {
                if let Some(e) = init {
                    kids.push(e);
                }
            }
            NodeKind::Assign { value, .. } => kids.push(value),
            NodeKind::Identifier { .. } | NodeKind::Literal { .. } => {}
            NodeKind::ObjectLiteral { props } => kids.extend(props.iter().map(|(_, v)| v)),
            NodeKind::ArrayLiteral { elements } => kids.extend(elements.iter()),
            NodeKind::MemberRead { base, key } => {
                kids.push(base);
                if let MemberKey::Computed(e) = key {
                    kids.push(e);
                }
            }
            NodeKind::MemberWrite { base, key, value } => {
                kids.push(base);
                if let MemberKey::Computed(e) = key {
                    kids.push(e);
                }
                kids.push(value);
            }
            NodeKind::Call { callee, args } => {
                kids.push(callee);
                kids.extend(args.iter());
            }
            NodeKind::MethodCall { base, key, args } => {
                kids.push(base);
                if let MemberKey::Computed(e) = key {
                    kids.push(e);
                }
                kids.extend(args.iter());
            }
            NodeKind::Binary { left, right, .. }
            | NodeKind::LogicalOr { left, right }
            | NodeKind::LogicalAnd { left, right }
            | NodeKind::NullishCoalesce { left, right } => {
                kids.push(left);
                kids.push(right);
            }
            NodeKind::Unary { operand, .. } => kids.push(operand),
            NodeKind::Ternary {
                test,
                consequent,
                alternate,
            } => {
                kids.push(test);
                kids.push(consequent);
                kids.push(alternate);
            }
            NodeKind::If {
                test,
                consequent,
                alternate,
            } => {
                kids.push(test);
                kids.extend(consequent.iter());
                if let Some(alt) = alternate {
                    kids.extend(alt.iter());
                }
            }
            NodeKind::While { test, body } => {
                kids.push(test);
                kids.extend(body.iter());
            }
            NodeKind::For {
                init,
                test,
                update,
                body,
            } => {
                if let Some(e) = init {
                    kids.push(e);
                }
                if let Some(e) = test {
                    kids.push(e);
                }
                if let Some(e) = update {
                    kids.push(e);
                }
                kids.extend(body.iter());
            }
            NodeKind::Return { value } => {
                if let Some(e) = value {
                    kids.push(e);
                }
            }
            NodeKind::RequireExpr { path } => kids.push(path),
            NodeKind::ExportStmt { value } => kids.push(value),
        }
        for k in kids {
            k.walk(visit);
        }
    }
}

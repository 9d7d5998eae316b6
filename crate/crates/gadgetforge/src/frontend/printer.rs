//! Canonical printer for MiniJS ASTs. Output is deterministic and fully
//! parenthesized on compound operands, so print-parse-print is a fixpoint.

use super::ast::*;

pub fn print_program(program: &AstNode) -> String {
    let NodeKind::Program { body } = &program.kind else {
        panic!("print_program expects a Program node");
    };
    let mut out = String::new();
    for stmt in body {
        print_stmt(stmt, 0, &mut out);
    }
    out
}

fn indent(depth: usize, out: &mut String) {
    for _ in 0..depth {
        out.push_str("  ");
    }
}

fn print_block(body: &[AstNode], depth: usize, out: &mut String) {
    out.push_str("{\n");
    for stmt in body {
        print_stmt(stmt, depth + 1, out);
    }
    indent(depth, out);
    out.push('}');
}

fn print_stmt(node: &AstNode, depth: usize, out: &mut String) {
    indent(depth, out);
    match &node.kind {
        NodeKind::VarDecl { name, init } => {
            out.push_str("let ");
            out.push_str(name);
            if let Some(e) = init {
                out.push_str(" = ");
                print_expr(e, out);
            }
            out.push_str(";\n");
        }
        NodeKind::FunctionDecl { name, params, body } => {
            out.push_str("function ");
            out.push_str(name);
            out.push('(');
            out.push_str(&params.join(", "));
            out.push_str(") ");
            print_block(body, depth, out);
            out.push('\n');
        }
        NodeKind::If {
            test,
            consequent,
            alternate,
        } => {
            out.push_str("if (");
            print_expr(test, out);
            out.push_str(") ");
            print_block(consequent, depth, out);
            if let Some(alt) = alternate {
                out.push_str(" else ");
                print_block(alt, depth, out);
            }
            out.push('\n');
        }
        NodeKind::While { test, body } => {
            out.push_str("while (");
            print_expr(test, out);
            out.push_str(") ");
            print_block(body, depth, out);
            out.push('\n');
        }
        NodeKind::For {
            init,
            test,
            update,
            body,
        } => {
            out.push_str("for (");
            match init.as_deref() {
                Some(AstNode {
                    kind: NodeKind::VarDecl { name, init },
                    ..
                }) => {
                    out.push_str("let ");
                    out.push_str(name);
                    if let Some(e) = init {
                        out.push_str(" = ");
                        print_expr(e, out);
                    }
                }
                Some(e) => print_expr(e, out),
                None => {}
            }
            out.push_str("; ");
            if let Some(e) = test {
                print_expr(e, out);
            }
            out.push_str("; ");
            if let Some(e) = update {
                print_expr(e, out);
            }
            out.push_str(") ");
            print_block(body, depth, out);
            out.push('\n');
        }
        NodeKind::Return { value } => {
            out.push_str("return");
            if let Some(e) = value {
                out.push(' ');
                print_expr(e, out);
            }
            out.push_str(";\n");
        }
        NodeKind::ExportStmt { value } => {
            out.push_str("module.exports = ");
            print_expr(value, out);
            out.push_str(";\n");
        }
        _ => {
            print_expr(node, out);
            out.push_str(";\n");
        }
    }
}

fn is_atom(node: &AstNode) -> bool {
    matches!(
        node.kind,
        NodeKind::Identifier { .. }
            | NodeKind::Literal { .. }
            | NodeKind::ObjectLiteral { .. }
            | NodeKind::ArrayLiteral { .. }
            | NodeKind::MemberRead { .. }
            | NodeKind::MethodCall { .. }
            | NodeKind::Call { .. }
            | NodeKind::RequireExpr { .. }
    )
}

/// Print an operand, adding parentheses unless it is an atom.
fn print_operand(node: &AstNode, out: &mut String) {
    if is_atom(node) {
        print_expr(node, out);
    } else {
        out.push('(');
        print_expr(node, out);
        out.push(')');
    }
}

fn quote_string(s: &str, out: &mut String) {
    out.push('\'');
    for ch in s.chars() {
        match ch {
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\\' => out.push_str("\\\\"),
            '\'' => out.push_str("\\'"),
            other => out.push(other),
        }
    }
    out.push('\'');
}

fn print_num(n: f64, out: &mut String) {
    if n.fract() == 0.0 && n.abs() < 1e15 {
        out.push_str(&format!("{}", n as i64));
    } else {
        out.push_str(&format!("{n}"));
    }
}

fn print_key(key: &MemberKey, out: &mut String) {
    match key {
        MemberKey::Static(name) => {
            let plain = !name.is_empty()
                && name
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '$')
                && !name.chars().next().unwrap().is_ascii_digit();
            if plain {
                out.push('.');
                out.push_str(name);
            } else {
                out.push('[');
                quote_string(name, out);
                out.push(']');
            }
        }
        MemberKey::Computed(e) => {
            out.push('[');
            print_expr(e, out);
            out.push(']');
        }
    }
}

fn print_expr(node: &AstNode, out: &mut String) {
    match &node.kind {
        NodeKind::Identifier { name } => out.push_str(name),
        NodeKind::Literal { value } => match value {
            LiteralValue::Undefined => out.push_str("undefined"),
            LiteralValue::Null => out.push_str("null"),
            LiteralValue::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
            LiteralValue::Num(n) => print_num(*n, out),
            LiteralValue::Str(s) => quote_string(s, out),
        },
        NodeKind::ObjectLiteral { props } => {
            if props.is_empty() {
                out.push_str("{}");
                return;
            }
            out.push_str("{ ");
            for (i, (key, value)) in props.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                out.push_str(key);
                out.push_str(": ");
                print_expr(value, out);
            }
            out.push_str(" }");
        }
        NodeKind::ArrayLiteral { elements } => {
            out.push('[');
            for (i, e) in elements.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                print_expr(e, out);
            }
            out.push(']');
        }
        NodeKind::MemberRead { base, key } => {
            print_operand(base, out);
            print_key(key, out);
        }
        NodeKind::MemberWrite { base, key, value } => {
            print_operand(base, out);
            print_key(key, out);
            out.push_str(" = ");
            print_expr(value, out);
        }
        NodeKind::Assign { name, value } => {
            out.push_str(name);
            out.push_str(" = ");
            print_expr(value, out);
        }
        NodeKind::Call { callee, args } => {
            print_operand(callee, out);
            print_args(args, out);
        }
        NodeKind::MethodCall { base, key, args } => {
            print_operand(base, out);
            print_key(key, out);
            print_args(args, out);
        }
        NodeKind::Binary { op, left, right } => {
            print_operand(left, out);
            out.push(' ');
            out.push_str(op.symbol());
            out.push(' ');
            print_operand(right, out);
        }
        NodeKind::LogicalOr { left, right } => {
            print_operand(left, out);
            out.push_str(" || ");
            print_operand(right, out);
        }
        NodeKind::LogicalAnd { left, right } => {
            print_operand(left, out);
            out.push_str(" && ");
            print_operand(right, out);
        }
        NodeKind::NullishCoalesce { left, right } => {
            print_operand(left, out);
            out.push_str(" ?? ");
            print_operand(right, out);
        }
        NodeKind::Unary { op, operand } => {
            out.push_str(op.symbol());
            if *op == UnaryOp::TypeOf {
                out.push(' ');
            }
            print_operand(operand, out);
        }
        NodeKind::Ternary {
            test,
            consequent,
            alternate,
        } => {
            print_operand(test, out);
            out.push_str(" ? ");
            print_operand(consequent, out);
            out.push_str(" : ");
            print_operand(alternate, out);
        }
        NodeKind::FunctionExpr { params, body } => {
            out.push_str("function(");
            out.push_str(&params.join(", "));
            out.push_str(") ");
            // function expressions are printed flat; nested statements get a
            // fresh indentation context
            let mut inner = String::new();
            print_block(body, 0, &mut inner);
            out.push_str(&inner);
        }
        NodeKind::RequireExpr { path } => {
            out.push_str("require(");
            print_expr(path, out);
            out.push(')');
        }
        other => {
            // statements routed through print_stmt should not reach here
            panic!("print_expr on non-expression node: {other:?}");
        }
    }
}

fn print_args(args: &[AstNode], out: &mut String) {
    out.push('(');
    for (i, a) in args.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        print_expr(a, out);
    }
    out.push(')');
}

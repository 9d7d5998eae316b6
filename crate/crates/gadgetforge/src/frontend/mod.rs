//! MiniJS frontend: lexer, parser, located AST, and a canonical printer.

pub mod ast;
pub mod lexer;
pub mod parser;
pub mod printer;

pub use ast::{
    AstNode, BinaryOp, LiteralValue, MemberKey, NodeId, NodeKind, SourceLocation, UnaryOp,
};
pub use lexer::{tokenize, Token, TokenKind};
pub use printer::print_program;

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum FrontendError {
    #[error("{loc}: {message}")]
    Lex { message: String, loc: SourceLocation },
    #[error("{loc}: expected {expected}, found {found}")]
    Parse {
        expected: String,
        found: String,
        loc: SourceLocation,
    },
}

impl FrontendError {
    pub fn loc(&self) -> &SourceLocation {
        match self {
            FrontendError::Lex { loc, .. } => loc,
            FrontendError::Parse { loc, .. } => loc,
        }
    }
}

/// Parse a MiniJS module source into a `Program` node. `file` is the
/// package-relative path recorded in every source location.
pub fn parse(source: &str, file: &str) -> Result<AstNode, FrontendError> {
    let tokens = tokenize(source, file)?;
    parser::Parser::new(tokens).parse_program(file)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids_in_order(program: &AstNode) -> Vec<NodeId> {
        let mut ids = Vec::new();
        program.walk(&mut |n| ids.push(n.id));
        ids
    }

    #[test]
    fn tokenizes_simple_declaration() {
        let toks = tokenize("let x = 1;", "m.mjs.txt").unwrap();
        let kinds: Vec<_> = toks.into_iter().map(|t| t.kind).collect();
        assert_eq!(
            kinds,
            vec![
                TokenKind::Let,
                TokenKind::Ident("x".into()),
                TokenKind::Eq,
                TokenKind::Num(1.0),
                TokenKind::Semi,
                TokenKind::Eof,
            ]
        );
    }

    #[test]
    fn tokenizes_fallback_expression() {
        let toks = tokenize("opts.bin || './default.exe'", "m.mjs.txt").unwrap();
        let kinds: Vec<_> = toks.into_iter().map(|t| t.kind).collect();
        assert_eq!(
            kinds,
            vec![
                TokenKind::Ident("opts".into()),
                TokenKind::Dot,
                TokenKind::Ident("bin".into()),
                TokenKind::OrOr,
                TokenKind::Str("./default.exe".into()),
                TokenKind::Eof,
            ]
        );
    }

    #[test]
    fn unterminated_string_reports_opening_quote() {
        let err = tokenize("let s = 'oops;\n", "m.mjs.txt").unwrap_err();
        match err {
            FrontendError::Lex { message, loc } => {
                assert!(message.contains("unterminated string"));
                assert_eq!((loc.line, loc.column), (1, 9));
            }
            other => panic!("expected lex error, got {other:?}"),
        }
    }

    #[test]
    fn member_access_is_left_associative() {
        let prog = parse("let v = a.b.c;", "m.mjs.txt").unwrap();
        let NodeKind::Program { body } = &prog.kind else {
            unreachable!()
        };
        let NodeKind::VarDecl { init: Some(e), .. } = &body[0].kind else {
            panic!("expected var decl")
        };
        let NodeKind::MemberRead { base, key } = &e.kind else {
            panic!("expected member read")
        };
        assert_eq!(key, &MemberKey::Static("c".into()));
        let NodeKind::MemberRead { base: inner, key } = &base.kind else {
            panic!("expected inner member read")
        };
        assert_eq!(key, &MemberKey::Static("b".into()));
        assert!(matches!(&inner.kind, NodeKind::Identifier { name } if name == "a"));
    }

    #[test]
    fn mixing_nullish_with_or_requires_parens() {
        let err = parse("let v = x || y ?? z;", "m.mjs.txt").unwrap_err();
        assert!(matches!(err, FrontendError::Parse { .. }));
        assert!(parse("let v = (x || y) ?? z;", "m.mjs.txt").is_ok());
        assert!(parse("let v = x ?? (y && z);", "m.mjs.txt").is_ok());
        let err = parse("let v = x ?? y && z;", "m.mjs.txt").unwrap_err();
        assert!(matches!(err, FrontendError::Parse { .. }));
    }

    #[test]
    fn node_ids_are_dense_and_creation_ordered() {
        let prog = parse("let a = 1 + 2 * 3; foo(a, 'x');", "m.mjs.txt").unwrap();
        let mut ids = ids_in_order(&prog);
        ids.sort_unstable();
        let expected: Vec<NodeId> = (0..ids.len() as NodeId).collect();
        assert_eq!(ids, expected);
    }

    #[test]
    fn parses_gadget_shaped_module() {
        let src = "\
let child_process = std.child_process;

function run(options) {
  let opts = options || {};
  let bin = opts.bin || './default.exe';
  let newProcess = opts.newProcess;
  let cmd = bin + ' --flag';
  if (newProcess) {
    child_process.execSync(cmd);
  }
}

module.exports = { run };
";
        let prog = parse(src, "index.mjs.txt").unwrap();
        let NodeKind::Program { body } = &prog.kind else {
            unreachable!()
        };
        assert_eq!(body.len(), 3);
        assert!(matches!(&body[1].kind, NodeKind::FunctionDecl { name, .. } if name == "run"));
        assert!(matches!(&body[2].kind, NodeKind::ExportStmt { .. }));
    }

    #[test]
    fn export_requires_full_module_exports_form() {
        // `module.exports.x = 1;` is a plain member write, not an export
        let prog = parse("module.exports = 1;", "m.mjs.txt").unwrap();
        let NodeKind::Program { body } = &prog.kind else {
            unreachable!()
        };
        assert!(matches!(&body[0].kind, NodeKind::ExportStmt { .. }));
    }

    #[test]
    fn computed_string_key_folds_to_static() {
        let prog = parse("let v = a['b'];", "m.mjs.txt").unwrap();
        let NodeKind::Program { body } = &prog.kind else {
            unreachable!()
        };
        let NodeKind::VarDecl { init: Some(e), .. } = &body[0].kind else {
            panic!()
        };
        let NodeKind::MemberRead { key, .. } = &e.kind else {
            panic!()
        };
        assert_eq!(key, &MemberKey::Static("b".into()));
    }

    #[test]
    fn print_parse_print_is_a_fixpoint() {
        let sources = [
            "let a = 1 + 2 * 3;",
            "let b = (1 + 2) * 3;",
            "function f(x, y) { return x < y ? x : y; }",
            "let o = { a: 1, b: 'two', run: function(z) { return z; } };",
            "let arr = [1, 2, 3]; arr.push(4);",
            "if (a) { b(); } else { c(); }",
            "for (let i = 0; i < 10; i = i + 1) { std.console.log(i); }",
            "while (!done) { done = step(); }",
            "let m = require('./util.mjs.txt');",
            "let v = (x || y) ?? z;",
            "let t = typeof x === 'string';",
            "module.exports = { run };",
            "a.b.c = d[e](1, 2);",
        ];
        for src in sources {
            let once = print_program(&parse(src, "m.mjs.txt").unwrap());
            let twice = print_program(&parse(&once, "m.mjs.txt").unwrap());
            assert_eq!(once, twice, "printer not stable for {src:?}");
        }
    }
}

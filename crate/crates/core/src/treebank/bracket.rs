//! Penn-style bracket trees: `(LABEL child child ...)` where a child is a
//! nested bracket or a bare token.

use crate::error::{ParseError, Result};
use crate::trees::{ConstTree, TokenSeq};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Open,
    Close,
    Atom(String),
}

#[derive(Debug, Clone)]
struct Lexeme {
    tok: Tok,
    line: usize,
    column: usize,
}

fn lex(text: &str) -> Vec<Lexeme> {
    let mut out = Vec::new();
    let mut line = 1;
    let mut column = 0;
    let mut atom = String::new();
    let mut atom_pos = (1, 1);
    let flush = |atom: &mut String, pos: (usize, usize), out: &mut Vec<Lexeme>| {
        if !atom.is_empty() {
            out.push(Lexeme {
                tok: Tok::Atom(std::mem::take(atom)),
                line: pos.0,
                column: pos.1,
            });
        }
    };
    for ch in text.chars() {
        column += 1;
        match ch {
            '(' | ')' => {
                flush(&mut atom, atom_pos, &mut out);
                out.push(Lexeme {
                    tok: if ch == '(' { Tok::Open } else { Tok::Close },
                    line,
                    column,
                });
            }
            c if c.is_whitespace() => {
                flush(&mut atom, atom_pos, &mut out);
                if c == '\n' {
                    line += 1;
                    column = 0;
                }
            }
            c => {
                if atom.is_empty() {
                    atom_pos = (line, column);
                }
                atom.push(c);
            }
        }
    }
    flush(&mut atom, atom_pos, &mut out);
    out
}

struct Parser {
    lexemes: Vec<Lexeme>,
    pos: usize,
    next_leaf: usize,
    end: (usize, usize),
}

impl Parser {
    fn err_here(&self, msg: &str) -> ParseError {
        match self.lexemes.get(self.pos) {
            Some(l) => ParseError::new(l.line, l.column, msg),
            None => ParseError::new(self.end.0, self.end.1, msg),
        }
    }

    fn parse_tree(&mut self) -> Result<ConstTree, ParseError> {
        // caller guarantees an Open at pos
        let open = self.lexemes[self.pos].clone();
        self.pos += 1;
        let label = match self.lexemes.get(self.pos).map(|l| &l.tok) {
            Some(Tok::Atom(a)) => {
                let a = a.clone();
                self.pos += 1;
                a
            }
            Some(Tok::Open) => String::new(),
            Some(Tok::Close) => {
                return Err(ParseError::new(open.line, open.column, "empty node"));
            }
            None => return Err(self.err_here("unbalanced parentheses")),
        };
        let mut children = Vec::new();
        loop {
            match self.lexemes.get(self.pos).map(|l| l.tok.clone()) {
                Some(Tok::Close) => {
                    self.pos += 1;
                    break;
                }
                Some(Tok::Open) => children.push(self.parse_tree()?),
                Some(Tok::Atom(a)) => {
                    self.pos += 1;
                    children.push(ConstTree::leaf(a, self.next_leaf));
                    self.next_leaf += 1;
                }
                None => return Err(self.err_here("unbalanced parentheses")),
            }
        }
        if children.is_empty() {
            return Err(ParseError::new(
                open.line,
                open.column,
                format!("leaf with no token under label {label:?}"),
            ));
        }
        // PTB wraps each tree in an unlabeled outer bracket: "( (S ...) )"
        if label.is_empty() {
            if children.len() == 1 && !children[0].is_leaf() {
                return Ok(children.pop().unwrap());
            }
            return Err(ParseError::new(
                open.line,
                open.column,
                "node without label",
            ));
        }
        Ok(ConstTree::node(label, children))
    }
}

fn end_position(text: &str) -> (usize, usize) {
    let line = text.matches('\n').count() + 1;
    let column = text.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

/// Parses exactly one s-expression tree.
pub fn parse_bracket(text: &str) -> Result<(ConstTree, TokenSeq)> {
    let mut trees = parse_bracket_corpus(text)?;
    match trees.len() {
        1 => Ok(trees.pop().unwrap()),
        0 => Err(ParseError::new(1, 1, "no tree found").into()),
        _ => Err(ParseError::new(1, 1, "more than one tree in input").into()),
    }
}

/// Parses a sequence of trees (normally one per line).
pub fn parse_bracket_corpus(text: &str) -> Result<Vec<(ConstTree, TokenSeq)>> {
    let mut p = Parser {
        lexemes: lex(text),
        pos: 0,
        next_leaf: 0,
        end: end_position(text),
    };
    let mut out = Vec::new();
    while p.pos < p.lexemes.len() {
        match p.lexemes[p.pos].tok {
            Tok::Open => {
                p.next_leaf = 0;
                let tree = p.parse_tree()?;
                let seq = tree.token_seq()?;
                out.push((tree, seq));
            }
            Tok::Close => return Err(p.err_here("unbalanced parentheses").into()),
            Tok::Atom(_) => return Err(p.err_here("token outside of brackets").into()),
        }
    }
    Ok(out)
}

/// Canonical single-line rendering. A bare leaf at the root is wrapped as `(X tok)`.
pub fn emit_bracket(tree: &ConstTree) -> String {
    let mut out = String::new();
    match tree {
        ConstTree::Leaf { token, .. } => {
            out.push_str("(X ");
            out.push_str(token);
            out.push(')');
        }
        node => emit_into(node, &mut out),
    }
    out
}

fn emit_into(tree: &ConstTree, out: &mut String) {
    match tree {
        ConstTree::Leaf { token, .. } => out.push_str(token),
        ConstTree::Node {
            label, children, ..
        } => {
            out.push('(');
            out.push_str(label);
            for c in children {
                out.push(' ');
                emit_into(c, out);
            }
            out.push(')');
        }
    }
}

use std::fmt;

use crate::decimal::Decimal;

/// Byte range of a node within the source text.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn join(self, other: Span) -> Span {
        Span::new(self.start.min(other.start), self.end.max(other.end))
    }

    pub fn slice(self, text: &str) -> &str {
        text.get(self.start..self.end).unwrap_or("")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Pow => "^",
        }
    }
}

/// The closed set of callable functions. Nothing else can be named in a call.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Function {
    Ceil,
    Floor,
    Round,
    Sqrt,
    Exp,
    Log,
}

impl Function {
    pub const ALL: [Function; 6] = [
        Function::Ceil,
        Function::Floor,
        Function::Round,
        Function::Sqrt,
        Function::Exp,
        Function::Log,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Function::Ceil => "ceil",
            Function::Floor => "floor",
            Function::Round => "round",
            Function::Sqrt => "sqrt",
            Function::Exp => "exp",
            Function::Log => "log",
        }
    }

    pub fn from_name(name: &str) -> Option<Function> {
        Function::ALL.into_iter().find(|f| f.name() == name)
    }

    /// Inclusive bounds on the number of arguments.
    pub fn arity(self) -> (usize, usize) {
        match self {
            Function::Round => (1, 2),
            _ => (1, 1),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Literal {
        value: Decimal,
        span: Span,
    },
    Variable {
        name: String,
        span: Span,
    },
    Neg {
        operand: Box<Expr>,
        span: Span,
    },
    Binary {
        op: BinaryOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
        span: Span,
    },
    Call {
        function: Function,
        args: Vec<Expr>,
        span: Span,
    },
}

impl Expr {
    pub fn span(&self) -> Span {
        match self {
            Expr::Literal { span, .. }
            | Expr::Variable { span, .. }
            | Expr::Neg { span, .. }
            | Expr::Binary { span, .. }
            | Expr::Call { span, .. } => *span,
        }
    }

    /// Variable names in order of first appearance.
    pub fn variables(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_variables(&mut out);
        out
    }

    fn collect_variables<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Expr::Literal { .. } => {}
            Expr::Variable { name, .. } => {
                if !out.contains(&name.as_str()) {
                    out.push(name);
                }
            }
            Expr::Neg { operand, .. } => operand.collect_variables(out),
            Expr::Binary { lhs, rhs, .. } => {
                lhs.collect_variables(out);
                rhs.collect_variables(out);
            }
            Expr::Call { args, .. } => args.iter().for_each(|a| a.collect_variables(out)),
        }
    }

    /// Spans of every variable reference, in source order.
    pub fn variable_spans(&self) -> Vec<(&str, Span)> {
        let mut out = Vec::new();
        self.walk(&mut |e| {
            if let Expr::Variable { name, span } = e {
                out.push((name.as_str(), *span));
            }
        });
        out.sort_by_key(|(_, s)| s.start);
        out
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Binary { op: BinaryOp::Add | BinaryOp::Sub, .. } => 1,
            Expr::Binary { op: BinaryOp::Mul | BinaryOp::Div, .. } => 2,
            Expr::Binary { op: BinaryOp::Pow, .. } => 3,
            Expr::Neg { .. } => 4,
            _ => 5,
        }
    }

    /// Source-like text with only the parentheses the grammar needs.
    pub fn source_form(&self) -> String {
        let wrap = |e: &Expr, min: u8| {
            if e.precedence() < min {
                format!("({})", e.source_form())
            } else {
                e.source_form()
            }
        };
        match self {
            Expr::Literal { value, .. } => value.to_string(),
            Expr::Variable { name, .. } => name.clone(),
            Expr::Neg { operand, .. } => format!("-{}", wrap(operand, 4)),
            Expr::Binary { op, lhs, rhs, .. } => {
                let p = self.precedence();
                let (l, r) = if *op == BinaryOp::Pow { (p + 1, p) } else { (p, p + 1) };
                format!("{} {} {}", wrap(lhs, l), op.symbol(), wrap(rhs, r))
            }
            Expr::Call { function, args, .. } => {
                let args: Vec<String> = args.iter().map(Expr::source_form).collect();
                format!("{}({})", function.name(), args.join(", "))
            }
        }
    }

    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a Expr)) {
        f(self);
        match self {
            Expr::Literal { .. } | Expr::Variable { .. } => {}
            Expr::Neg { operand, .. } => operand.walk(f),
            Expr::Binary { lhs, rhs, .. } => {
                lhs.walk(f);
                rhs.walk(f);
            }
            Expr::Call { args, .. } => args.iter().for_each(|a| a.walk(f)),
        }
    }
}

/// Fully parenthesised form; useful for checking how text was grouped.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Literal { value, .. } => write!(f, "{value}"),
            Expr::Variable { name, .. } => f.write_str(name),
            Expr::Neg { operand, .. } => write!(f, "(-{operand})"),
            Expr::Binary { op, lhs, rhs, .. } => write!(f, "({lhs} {} {rhs})", op.symbol()),
            Expr::Call { function, args, .. } => {
                write!(f, "{}(", function.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

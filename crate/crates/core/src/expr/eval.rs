use serde::{Deserialize, Serialize};

use super::ast::{BinaryOp, Expr, Function};
use super::{ExprError, Resolver};
use crate::decimal::{Decimal, DecimalError, RoundingMode};
use crate::model::Value;

/// Largest `places` argument accepted by `round`.
const MAX_ROUND_PLACES: i64 = 1_000;

/// What one formula evaluation read and produced.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FormulaStepRecord {
    /// Variables in order of first read.
    pub inputs: Vec<(String, Value)>,
    /// Value before the final rounding.
    pub intermediate: Decimal,
    pub result: Decimal,
    pub precision: u32,
    pub rounding: RoundingMode,
}

struct Evaluator<'r, R> {
    resolver: &'r mut R,
    precision: u32,
    rounding: RoundingMode,
    inputs: Vec<(String, Value)>,
}

fn arithmetic(err: DecimalError, at: &Expr) -> ExprError {
    let place = at.source_form();
    let message = match err {
        DecimalError::DivisionByZero => format!("division by zero in {place}"),
        DecimalError::Domain { function: "sqrt", operand } => {
            format!("sqrt of negative operand {operand} in {place}")
        }
        DecimalError::Domain { function: "log", operand } => {
            format!("log of non-positive operand {operand} in {place}")
        }
        DecimalError::Domain { function, operand } => {
            format!("{function} operand {operand} is out of range in {place}")
        }
        other => format!("{other} in {place}"),
    };
    ExprError::Arithmetic { message }
}

impl<R: Resolver> Evaluator<'_, R> {
    fn variable(&mut self, name: &str) -> Result<Decimal, R::Error> {
        let value = self.resolver.resolve(name)?;
        let Value::Decimal(d) = &value else {
            return Err(ExprError::TypeMismatch {
                message: format!(
                    "variable {name} is {} '{value}', but formulas only accept decimals",
                    value.value_type()
                ),
            }
            .into());
        };
        let d = d.clone();
        if !self.inputs.iter().any(|(n, _)| n == name) {
            self.inputs.push((name.to_string(), value));
        }
        Ok(d)
    }

    fn eval(&mut self, expr: &Expr) -> Result<Decimal, R::Error> {
        let p = self.precision;
        match expr {
            Expr::Literal { value, .. } => Ok(value.clone()),
            Expr::Variable { name, .. } => self.variable(name),
            Expr::Neg { operand, .. } => Ok(self.eval(operand)?.neg()),
            Expr::Binary { op, lhs, rhs, .. } => {
                let a = self.eval(lhs)?;
                let b = self.eval(rhs)?;
                let out = match op {
                    BinaryOp::Add => a.checked_add(&b),
                    BinaryOp::Sub => a.checked_sub(&b),
                    BinaryOp::Mul => a.checked_mul(&b),
                    BinaryOp::Div => a.checked_div(&b, p),
                    BinaryOp::Pow => {
                        let Some(n) = b.to_i64() else {
                            let message = if b.is_integer() {
                                format!("exponent {b} is too large in {}", expr.source_form())
                            } else {
                                format!("exponent {b} is not an integer in {}", expr.source_form())
                            };
                            return Err(ExprError::Arithmetic { message }.into());
                        };
                        a.checked_powi(n, p)
                    }
                };
                Ok(out.map_err(|e| arithmetic(e, expr))?)
            }
            Expr::Call { function, args, .. } => {
                let x = self.eval(&args[0])?;
                let out = match function {
                    Function::Ceil => Ok(x.ceil()),
                    Function::Floor => Ok(x.floor()),
                    Function::Sqrt => x.sqrt(p),
                    Function::Exp => x.exp(p),
                    Function::Log => x.ln(p),
                    Function::Round => {
                        let places = match args.get(1) {
                            Some(arg) => {
                                let v = self.eval(arg)?;
                                match v.to_i64() {
                                    Some(n) if (0..=MAX_ROUND_PLACES).contains(&n) => n as u32,
                                    _ => {
                                        return Err(ExprError::Arithmetic {
                                            message: format!(
                                                "round places must be an integer from 0 to {MAX_ROUND_PLACES}, got {v} in {}",
                                                expr.source_form()
                                            ),
                                        }
                                        .into())
                                    }
                                }
                            }
                            None => 0,
                        };
                        Ok(x.round(places, self.rounding))
                    }
                };
                Ok(out.map_err(|e| arithmetic(e, expr))?)
            }
        }
    }
}

/// Evaluates without the final rounding. Inexact steps keep at least
/// `precision` plus guard digits. Returns the variables read, in order.
pub fn evaluate_unrounded<R: Resolver>(
    expr: &Expr,
    resolver: &mut R,
    precision: u32,
    rounding: RoundingMode,
) -> Result<(Decimal, Vec<(String, Value)>), R::Error> {
    let mut ev = Evaluator {
        resolver,
        precision,
        rounding,
        inputs: Vec::new(),
    };
    let value = ev.eval(expr)?;
    Ok((value, ev.inputs))
}

/// Evaluates and rounds the result to `precision` places.
pub fn evaluate_expression<R: Resolver>(
    expr: &Expr,
    resolver: &mut R,
    precision: u32,
    rounding: RoundingMode,
) -> Result<(Decimal, FormulaStepRecord), R::Error> {
    let (intermediate, inputs) = evaluate_unrounded(expr, resolver, precision, rounding)?;
    let result = intermediate.round(precision, rounding);
    let record = FormulaStepRecord {
        inputs,
        intermediate,
        result: result.clone(),
        precision,
        rounding,
    };
    Ok((result, record))
}

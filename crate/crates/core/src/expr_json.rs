//! JSON AST for expressions.
//!
//! A node is an object `{"op", "args", "value", "index"}`:
//!
//! | op      | fields                                   |
//! |---------|------------------------------------------|
//! | `const` | `value`                                  |
//! | `coord` | `index: {"block": "x"|"y"|"z", "i": k}`  |
//! | `add`   | `args` (one or more)                     |
//! | `mul`   | `args` (one or more)                     |
//! | `pow`   | `args: [base]`, `value`: exponent        |
//! | `recip` | `args: [a]`                              |
//! | `sqrt`  | `args: [a]`                              |
//! | `exp`   | `args: [a]`                              |
//!
//! Block indices `i` are one-based, matching `x_1 .. x_n`. Loading does not
//! simplify, so `to_json(from_json(v)) == v` for every canonical document.

use serde_json::{json, Map, Value};

use crate::chart::{Block, Coord};
use crate::error::{Error, Result};
use crate::expr::{Expr, Node};

impl Expr {
    pub fn to_json(&self) -> Result<Value> {
        Ok(match self.node() {
            Node::Const(c) => json!({"op": "const", "value": finite(*c)?}),
            Node::Coord(c) => json!({
                "op": "coord",
                "index": {"block": c.block.label(), "i": c.i + 1},
            }),
            Node::Add(ts) => json!({"op": "add", "args": args_json(ts)?}),
            Node::Mul(ts) => json!({"op": "mul", "args": args_json(ts)?}),
            Node::Pow(a, k) => json!({"op": "pow", "args": [a.to_json()?], "value": finite(*k)?}),
            Node::Recip(a) => json!({"op": "recip", "args": [a.to_json()?]}),
            Node::Sqrt(a) => json!({"op": "sqrt", "args": [a.to_json()?]}),
            Node::Exp(a) => json!({"op": "exp", "args": [a.to_json()?]}),
            Node::Solve(..) => {
                return Err(Error::Parse(
                    "expressions containing pointwise linear solves have no JSON form".into(),
                ))
            }
        })
    }

    pub fn to_json_string(&self) -> Result<String> {
        serde_json::to_string(&self.to_json()?).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Parses a node. `n`, when given, bounds the block indices; `pointer`
    /// is the JSON pointer of `v` used in error messages.
    pub fn from_json(v: &Value, n: Option<usize>, pointer: &str) -> Result<Expr> {
        let obj = v
            .as_object()
            .ok_or_else(|| Error::schema(pointer, "expression node must be an object"))?;
        for key in obj.keys() {
            if !matches!(key.as_str(), "op" | "args" | "value" | "index") {
                return Err(Error::schema(pointer, format!("unknown field \"{key}\"")));
            }
        }
        let op = obj
            .get("op")
            .and_then(Value::as_str)
            .ok_or_else(|| Error::schema(pointer, "missing string field \"op\""))?;
        let node = match op {
            "const" => {
                only(obj, pointer, &["op", "value"])?;
                Node::Const(number(obj, pointer)?)
            }
            "coord" => {
                only(obj, pointer, &["op", "index"])?;
                Node::Coord(coord(obj, n, pointer)?)
            }
            "add" | "mul" => {
                only(obj, pointer, &["op", "args"])?;
                let args = args(obj, n, pointer)?;
                if args.is_empty() {
                    return Err(Error::schema(format!("{pointer}/args"), "needs at least one argument"));
                }
                if op == "add" {
                    Node::Add(args)
                } else {
                    Node::Mul(args)
                }
            }
            "pow" => {
                only(obj, pointer, &["op", "args", "value"])?;
                let a = unary(obj, n, pointer)?;
                Node::Pow(a, number(obj, pointer)?)
            }
            "recip" | "sqrt" | "exp" => {
                only(obj, pointer, &["op", "args"])?;
                let a = unary(obj, n, pointer)?;
                match op {
                    "recip" => Node::Recip(a),
                    "sqrt" => Node::Sqrt(a),
                    _ => Node::Exp(a),
                }
            }
            other => return Err(Error::schema(format!("{pointer}/op"), format!("unknown op \"{other}\""))),
        };
        Ok(Expr::raw(node))
    }

    pub fn from_json_str(s: &str, n: Option<usize>) -> Result<Expr> {
        let v: Value = serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        Expr::from_json(&v, n, "")
    }
}

fn finite(c: f64) -> Result<f64> {
    if c.is_finite() {
        Ok(c)
    } else {
        Err(Error::Parse(format!("non-finite constant {c} has no JSON form")))
    }
}

fn args_json(ts: &[Expr]) -> Result<Vec<Value>> {
    ts.iter().map(Expr::to_json).collect()
}

fn only(obj: &Map<String, Value>, pointer: &str, allowed: &[&str]) -> Result<()> {
    for key in obj.keys() {
        if !allowed.contains(&key.as_str()) {
            return Err(Error::schema(
                format!("{pointer}/{key}"),
                format!("field not allowed for op \"{}\"", obj["op"].as_str().unwrap_or("?")),
            ));
        }
    }
    for key in allowed {
        if !obj.contains_key(*key) {
            return Err(Error::schema(pointer, format!("missing field \"{key}\"")));
        }
    }
    Ok(())
}

fn number(obj: &Map<String, Value>, pointer: &str) -> Result<f64> {
    obj["value"]
        .as_f64()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::schema(format!("{pointer}/value"), "expected a finite number"))
}

fn args(obj: &Map<String, Value>, n: Option<usize>, pointer: &str) -> Result<Vec<Expr>> {
    let arr = obj["args"]
        .as_array()
        .ok_or_else(|| Error::schema(format!("{pointer}/args"), "expected an array"))?;
    arr.iter()
        .enumerate()
        .map(|(k, a)| Expr::from_json(a, n, &format!("{pointer}/args/{k}")))
        .collect()
}

fn unary(obj: &Map<String, Value>, n: Option<usize>, pointer: &str) -> Result<Expr> {
    let mut a = args(obj, n, pointer)?;
    if a.len() != 1 {
        return Err(Error::schema(format!("{pointer}/args"), "expected exactly one argument"));
    }
    Ok(a.pop().unwrap())
}

fn coord(obj: &Map<String, Value>, n: Option<usize>, pointer: &str) -> Result<Coord> {
    let p = format!("{pointer}/index");
    let idx = obj["index"].as_object().ok_or_else(|| Error::schema(&p, "expected an object"))?;
    for key in idx.keys() {
        if key != "block" && key != "i" {
            return Err(Error::schema(format!("{p}/{key}"), "unknown field"));
        }
    }
    let block = match idx.get("block").and_then(Value::as_str) {
        Some("x") => Block::X,
        Some("y") => Block::Y,
        Some("z") => Block::Z,
        _ => return Err(Error::schema(format!("{p}/block"), "expected \"x\", \"y\" or \"z\"")),
    };
    let i = idx
        .get("i")
        .and_then(Value::as_u64)
        .filter(|i| *i >= 1)
        .ok_or_else(|| Error::schema(format!("{p}/i"), "expected a positive integer"))?
        as usize;
    if let Some(n) = n {
        if i > n {
            return Err(Error::schema(format!("{p}/i"), format!("index {i} exceeds n = {n}")));
        }
    }
    Ok(Coord::new(block, i - 1))
}

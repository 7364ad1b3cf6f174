//! The execution engine: runs a parsed VPL program against a scene through
//! the ImagePatch API, with hard step limits and seedable perception noise.
//!
//! `execute` is a total, pure function of `(program, scene, limits, noise)`:
//! every runtime condition is reported inside the returned [`ExecOutcome`],
//! never as a panic. Programs have no access to files, network, or the
//! environment; the only observable effects are the step counter and the
//! optional API-call trace.

mod api;

pub use api::{
    api_crop_directional, api_exists, api_find, api_simple_query, api_verify_property,
    bool_to_yesno, CropDirection, NoiseModel, PatchVal, Region,
};

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::fmt;
use std::rc::Rc;

use serde::{Deserialize, Serialize};

use crate::lang::ast::{BinOp, Expr, Program, Stmt, UnaryOp};
use crate::scene::Scene;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecLimits {
    pub max_steps: u64,
    pub max_list_length: usize,
}

impl Default for ExecLimits {
    fn default() -> Self {
        ExecLimits { max_steps: 100_000, max_list_length: 10_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExecStatus {
    Ok,
    ParseError,
    RuntimeError,
    StepLimitExceeded,
}

impl fmt::Display for ExecStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExecStatus::Ok => write!(f, "OK"),
            ExecStatus::ParseError => write!(f, "ParseError"),
            ExecStatus::RuntimeError => write!(f, "RuntimeError"),
            ExecStatus::StepLimitExceeded => write!(f, "StepLimitExceeded"),
        }
    }
}

/// Plain, shareable result value of an execution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RuntimeValue {
    None,
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
    Image,
    Patch(PatchVal),
    List(Vec<RuntimeValue>),
}

impl RuntimeValue {
    pub fn type_name(&self) -> &'static str {
        match self {
            RuntimeValue::None => "none",
            RuntimeValue::Bool(_) => "bool",
            RuntimeValue::Int(_) => "int",
            RuntimeValue::Float(_) => "float",
            RuntimeValue::Str(_) => "str",
            RuntimeValue::Image => "image",
            RuntimeValue::Patch(_) => "patch",
            RuntimeValue::List(_) => "list",
        }
    }

    /// Compact display for traces and the exec CLI.
    pub fn summary(&self) -> String {
        match self {
            RuntimeValue::None => "None".into(),
            RuntimeValue::Bool(b) => if *b { "True" } else { "False" }.into(),
            RuntimeValue::Int(i) => i.to_string(),
            RuntimeValue::Float(x) => format!("{x:?}"),
            RuntimeValue::Str(s) => format!("{s:?}"),
            RuntimeValue::Image => "<image>".into(),
            RuntimeValue::Patch(p) => format!(
                "<patch {} [{},{},{},{}]>",
                p.category.as_deref().unwrap_or("-"),
                p.region.left,
                p.region.upper,
                p.region.right,
                p.region.lower
            ),
            RuntimeValue::List(items) => {
                let inner: Vec<String> = items.iter().map(|v| v.summary()).collect();
                format!("[{}]", inner.join(", "))
            }
        }
    }
}

/// One API call observed during execution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub ordinal: u32,
    pub method: String,
    pub args: String,
    pub result: String,
}

impl fmt::Display for TraceEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:>4}  {}({}) -> {}", self.ordinal, self.method, self.args, self.result)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecOutcome {
    pub status: ExecStatus,
    pub result: Option<RuntimeValue>,
    pub steps_used: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<TraceEntry>>,
}

impl ExecOutcome {
    pub fn parse_failure(error: String) -> ExecOutcome {
        ExecOutcome {
            status: ExecStatus::ParseError,
            result: None,
            steps_used: 0,
            error: Some(error),
            trace: None,
        }
    }
}

/// Run a program. Deterministic given all four arguments; never panics on a
/// parser-accepted program.
pub fn execute(program: &Program, scene: &Scene, limits: &ExecLimits, noise: &NoiseModel) -> ExecOutcome {
    execute_traced(program, scene, limits, noise, false)
}

pub fn execute_traced(
    program: &Program,
    scene: &Scene,
    limits: &ExecLimits,
    noise: &NoiseModel,
    trace: bool,
) -> ExecOutcome {
    let mut interp = Interp {
        scene,
        limits,
        noise,
        steps: 0,
        trace: if trace { Some(Vec::new()) } else { None },
        env: BTreeMap::new(),
    };
    interp.env.insert(program.param.clone(), Value::Image);
    let flow = interp.block(&program.body);
    let steps_used = interp.steps.min(limits.max_steps);
    let trace = interp.trace.take();
    match flow {
        Ok(()) => ExecOutcome {
            status: ExecStatus::Ok,
            result: Some(RuntimeValue::None),
            steps_used,
            error: None,
            trace,
        },
        Err(Interrupt::Return(v)) => ExecOutcome {
            status: ExecStatus::Ok,
            result: Some(to_runtime(&v)),
            steps_used,
            error: None,
            trace,
        },
        Err(Interrupt::Error(msg)) => ExecOutcome {
            status: ExecStatus::RuntimeError,
            result: None,
            steps_used,
            error: Some(msg),
            trace,
        },
        Err(Interrupt::StepLimit) => ExecOutcome {
            status: ExecStatus::StepLimitExceeded,
            result: None,
            steps_used,
            error: Some(format!("step limit of {} exceeded", limits.max_steps)),
            trace,
        },
    }
}

/// Interpreter-internal values; lists are shared and mutable so `sort` and
/// `append` behave like their Python counterparts.
#[derive(Debug, Clone)]
enum Value {
    None,
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
    Image,
    Patch(PatchVal),
    List(Rc<RefCell<Vec<Value>>>),
}

impl Value {
    fn type_name(&self) -> &'static str {
        match self {
            Value::None => "none",
            Value::Bool(_) => "bool",
            Value::Int(_) => "int",
            Value::Float(_) => "float",
            Value::Str(_) => "str",
            Value::Image => "image",
            Value::Patch(_) => "patch",
            Value::List(_) => "list",
        }
    }
}

fn to_runtime(v: &Value) -> RuntimeValue {
    match v {
        Value::None => RuntimeValue::None,
        Value::Bool(b) => RuntimeValue::Bool(*b),
        Value::Int(i) => RuntimeValue::Int(*i),
        Value::Float(x) => RuntimeValue::Float(*x),
        Value::Str(s) => RuntimeValue::Str(s.clone()),
        Value::Image => RuntimeValue::Image,
        Value::Patch(p) => RuntimeValue::Patch(p.clone()),
        Value::List(items) => RuntimeValue::List(items.borrow().iter().map(to_runtime).collect()),
    }
}

enum Interrupt {
    Return(Value),
    Error(String),
    StepLimit,
}

type Flow<T> = Result<T, Interrupt>;

struct Interp<'a> {
    scene: &'a Scene,
    limits: &'a ExecLimits,
    noise: &'a NoiseModel,
    steps: u64,
    trace: Option<Vec<TraceEntry>>,
    env: BTreeMap<String, Value>,
}

impl<'a> Interp<'a> {
    fn step(&mut self) -> Flow<()> {
        self.steps += 1;
        if self.steps > self.limits.max_steps {
            return Err(Interrupt::StepLimit);
        }
        Ok(())
    }

    fn fail<T>(&self, msg: impl Into<String>) -> Flow<T> {
        Err(Interrupt::Error(msg.into()))
    }

    fn record(&mut self, method: &str, args: String, result: String) {
        if let Some(trace) = &mut self.trace {
            let ordinal = trace.len() as u32 + 1;
            trace.push(TraceEntry { ordinal, method: method.to_string(), args, result });
        }
    }

    fn block(&mut self, body: &[Stmt]) -> Flow<()> {
        for stmt in body {
            self.stmt(stmt)?;
        }
        Ok(())
    }

    fn stmt(&mut self, stmt: &Stmt) -> Flow<()> {
        self.step()?;
        match stmt {
            Stmt::Assign { target, value, .. } => {
                let v = self.expr(value)?;
                self.env.insert(target.clone(), v);
                Ok(())
            }
            Stmt::ExprStmt { expr, .. } => {
                self.expr(expr)?;
                Ok(())
            }
            Stmt::For { var, iterable, body, .. } => {
                let iterable = self.expr(iterable)?;
                let Value::List(list) = iterable else {
                    return self.fail(format!(
                        "for-loop expects a list, got {}",
                        iterable.type_name()
                    ));
                };
                // Live-list iteration by index, so appending inside the loop
                // extends it (the step limit bounds runaway loops).
                let mut idx = 0usize;
                loop {
                    self.step()?;
                    let item = {
                        let borrowed = list.borrow();
                        if idx >= borrowed.len() {
                            break;
                        }
                        borrowed[idx].clone()
                    };
                    self.env.insert(var.clone(), item);
                    self.block(body)?;
                    idx += 1;
                }
                Ok(())
            }
            Stmt::If { arms, else_body, .. } => {
                for (cond, body) in arms {
                    let c = self.expr(cond)?;
                    let Value::Bool(c) = c else {
                        return self.fail(format!("if-condition must be bool, got {}", c.type_name()));
                    };
                    if c {
                        return self.block(body);
                    }
                }
                if let Some(body) = else_body {
                    return self.block(body);
                }
                Ok(())
            }
            Stmt::Return { value, .. } => {
                let v = self.expr(value)?;
                Err(Interrupt::Return(v))
            }
        }
    }

    fn expr(&mut self, expr: &Expr) -> Flow<Value> {
        self.step()?;
        match expr {
            Expr::Ident { name, .. } => match self.env.get(name) {
                Some(v) => Ok(v.clone()),
                None => self.fail(format!("name `{name}` is not defined")),
            },
            Expr::Str { value, .. } => Ok(Value::Str(value.clone())),
            Expr::Int { value, .. } => Ok(Value::Int(*value)),
            Expr::Float { value, .. } => Ok(Value::Float(*value)),
            Expr::Bool { value, .. } => Ok(Value::Bool(*value)),
            Expr::List { items, .. } => {
                let mut out = Vec::with_capacity(items.len());
                for item in items {
                    out.push(self.expr(item)?);
                }
                Ok(Value::List(Rc::new(RefCell::new(out))))
            }
            Expr::Attr { obj, name, .. } => {
                let obj = self.expr(obj)?;
                let Value::Patch(p) = obj else {
                    return self.fail(format!("attribute `{name}` on {}", obj.type_name()));
                };
                Ok(match name.as_str() {
                    "left" => Value::Int(p.region.left),
                    "right" => Value::Int(p.region.right),
                    "upper" => Value::Int(p.region.upper),
                    "lower" => Value::Int(p.region.lower),
                    "horizontal_center" => Value::Float(p.region.horizontal_center()),
                    "vertical_center" => Value::Float(p.region.vertical_center()),
                    "area" => Value::Int(p.region.area()),
                    "category" => match &p.category {
                        Some(c) => Value::Str(c.clone()),
                        None => Value::None,
                    },
                    other => return self.fail(format!("unknown attribute `{other}`")),
                })
            }
            Expr::Index { obj, index, .. } => {
                let obj = self.expr(obj)?;
                let index = self.expr(index)?;
                let Value::List(list) = obj else {
                    return self.fail(format!("indexing {}", obj.type_name()));
                };
                let Value::Int(i) = index else {
                    return self.fail(format!("list index must be int, got {}", index.type_name()));
                };
                let borrowed = list.borrow();
                let len = borrowed.len() as i64;
                let eff = if i < 0 { len + i } else { i };
                if eff < 0 || eff >= len {
                    return self.fail(format!("list index {i} out of range for length {len}"));
                }
                Ok(borrowed[eff as usize].clone())
            }
            Expr::Call { func, args, .. } => {
                let mut vals = Vec::with_capacity(args.len());
                for a in args {
                    vals.push(self.expr(a)?);
                }
                self.call_free(func, vals)
            }
            Expr::MethodCall { obj, method, args, .. } => {
                let obj = self.expr(obj)?;
                let mut vals = Vec::with_capacity(args.len());
                for a in args {
                    vals.push(self.expr(a)?);
                }
                self.call_method(obj, method, vals)
            }
            Expr::SortBy { obj, key_attr, .. } => {
                let obj = self.expr(obj)?;
                let Value::List(list) = obj else {
                    return self.fail(format!("sort on {}", obj.type_name()));
                };
                let mut items = list.borrow_mut();
                for item in items.iter() {
                    if !matches!(item, Value::Patch(_)) {
                        return self.fail(format!(
                            "sort key `{key_attr}` needs a list of patches, found {}",
                            item.type_name()
                        ));
                    }
                }
                let key = |v: &Value| -> f64 {
                    let Value::Patch(p) = v else { unreachable!() };
                    match key_attr.as_str() {
                        "area" => p.region.area() as f64,
                        "horizontal_center" => p.region.horizontal_center(),
                        "vertical_center" => p.region.vertical_center(),
                        "left" => p.region.left as f64,
                        "right" => p.region.right as f64,
                        "upper" => p.region.upper as f64,
                        "lower" => p.region.lower as f64,
                        _ => 0.0,
                    }
                };
                // Stable ascending sort; keys are finite by construction.
                items.sort_by(|a, b| key(a).partial_cmp(&key(b)).unwrap());
                Ok(Value::None)
            }
            Expr::Unary { op, operand, .. } => {
                let v = self.expr(operand)?;
                match op {
                    UnaryOp::Not => match v {
                        Value::Bool(b) => Ok(Value::Bool(!b)),
                        other => self.fail(format!("`not` on {}", other.type_name())),
                    },
                    UnaryOp::Neg => match v {
                        Value::Int(i) => Ok(Value::Int(-i)),
                        Value::Float(x) => Ok(Value::Float(-x)),
                        other => self.fail(format!("negation of {}", other.type_name())),
                    },
                }
            }
            Expr::Binary { op, lhs, rhs, .. } => self.binary(*op, lhs, rhs),
        }
    }

    fn call_free(&mut self, func: &str, mut args: Vec<Value>) -> Flow<Value> {
        match func {
            "ImagePatch" => match args.pop() {
                Some(Value::Image) => Ok(Value::Patch(PatchVal::full(self.scene))),
                Some(other) => {
                    self.fail(format!("ImagePatch expects the image, got {}", other.type_name()))
                }
                None => self.fail("ImagePatch expects one argument"),
            },
            "bool_to_yesno" => match args.pop() {
                Some(Value::Bool(b)) => Ok(Value::Str(bool_to_yesno(b).to_string())),
                Some(other) => {
                    self.fail(format!("bool_to_yesno expects a bool, got {}", other.type_name()))
                }
                None => self.fail("bool_to_yesno expects one argument"),
            },
            "len" => match args.pop() {
                Some(Value::List(list)) => Ok(Value::Int(list.borrow().len() as i64)),
                Some(Value::Str(s)) => Ok(Value::Int(s.chars().count() as i64)),
                Some(other) => self.fail(format!("len of {}", other.type_name())),
                None => self.fail("len expects one argument"),
            },
            "abs" => match args.pop() {
                Some(Value::Int(i)) => Ok(Value::Int(i.abs())),
                Some(Value::Float(x)) => Ok(Value::Float(x.abs())),
                Some(other) => self.fail(format!("abs of {}", other.type_name())),
                None => self.fail("abs expects one argument"),
            },
            other => self.fail(format!("unknown function `{other}`")),
        }
    }

    fn want_str(&self, v: &Value, what: &str) -> Flow<String> {
        match v {
            Value::Str(s) => Ok(s.clone()),
            other => Err(Interrupt::Error(format!("{what} must be a string, got {}", other.type_name()))),
        }
    }

    fn want_coord(&self, v: &Value, what: &str) -> Flow<i64> {
        match v {
            Value::Int(i) => Ok(*i),
            Value::Float(x) if x.fract() == 0.0 => Ok(*x as i64),
            other => Err(Interrupt::Error(format!("{what} must be an integer, got {}", other.type_name()))),
        }
    }

    fn call_method(&mut self, obj: Value, method: &str, args: Vec<Value>) -> Flow<Value> {
        match (&obj, method) {
            (Value::List(list), "append") => {
                let item = args.into_iter().next().expect("arity checked at parse");
                let mut items = list.borrow_mut();
                if items.len() >= self.limits.max_list_length {
                    return self.fail(format!(
                        "list exceeds the {}-element limit",
                        self.limits.max_list_length
                    ));
                }
                items.push(item);
                Ok(Value::None)
            }
            (Value::Patch(patch), "find") => {
                let name = self.want_str(&args[0], "object name")?;
                if name.is_empty() {
                    return self.fail("object name must be nonempty");
                }
                let found = api_find(patch, &name, self.scene, self.noise);
                self.record("find", format!("{name:?}"), format!("{} patches", found.len()));
                let items: Vec<Value> = found.into_iter().map(Value::Patch).collect();
                Ok(Value::List(Rc::new(RefCell::new(items))))
            }
            (Value::Patch(patch), "exists") => {
                let name = self.want_str(&args[0], "object name")?;
                if name.is_empty() {
                    return self.fail("object name must be nonempty");
                }
                let hit = api_exists(patch, &name, self.scene, self.noise);
                self.record("exists", format!("{name:?}"), hit.to_string());
                Ok(Value::Bool(hit))
            }
            (Value::Patch(patch), "verify_property") => {
                let name = self.want_str(&args[0], "object name")?;
                let prop = self.want_str(&args[1], "visual property")?;
                let hit = api_verify_property(patch, &name, &prop, self.scene, self.noise);
                self.record("verify_property", format!("{name:?}, {prop:?}"), hit.to_string());
                Ok(Value::Bool(hit))
            }
            (Value::Patch(patch), "simple_query") => {
                let question = self.want_str(&args[0], "question")?;
                let answer = api_simple_query(patch, &question, self.scene, self.noise);
                self.record("simple_query", format!("{question:?}"), format!("{answer:?}"));
                Ok(Value::Str(answer))
            }
            (Value::Patch(patch), m)
                if matches!(
                    m,
                    "crop_left_of_bbox" | "crop_right_of_bbox" | "crop_above_bbox" | "crop_below_bbox"
                ) =>
            {
                let left = self.want_coord(&args[0], "left")?;
                let upper = self.want_coord(&args[1], "upper")?;
                let right = self.want_coord(&args[2], "right")?;
                let lower = self.want_coord(&args[3], "lower")?;
                let direction = match m {
                    "crop_left_of_bbox" => CropDirection::Left,
                    "crop_right_of_bbox" => CropDirection::Right,
                    "crop_above_bbox" => CropDirection::Above,
                    _ => CropDirection::Below,
                };
                let cropped =
                    api_crop_directional(patch, direction, (left, upper, right, lower), self.scene);
                self.record(
                    m,
                    format!("{left}, {upper}, {right}, {lower}"),
                    format!(
                        "region [{},{},{},{}]",
                        cropped.region.left, cropped.region.upper, cropped.region.right, cropped.region.lower
                    ),
                );
                Ok(Value::Patch(cropped))
            }
            (other, m) => self.fail(format!("method `{m}` on {}", other.type_name())),
        }
    }

    fn binary(&mut self, op: BinOp, lhs: &Expr, rhs: &Expr) -> Flow<Value> {
        // Boolean operators short-circuit.
        if matches!(op, BinOp::And | BinOp::Or) {
            let l = self.expr(lhs)?;
            let Value::Bool(l) = l else {
                return self.fail(format!("`{}` on {}", op.symbol(), l.type_name()));
            };
            if (op == BinOp::And && !l) || (op == BinOp::Or && l) {
                return Ok(Value::Bool(l));
            }
            let r = self.expr(rhs)?;
            let Value::Bool(r) = r else {
                return self.fail(format!("`{}` on {}", op.symbol(), r.type_name()));
            };
            return Ok(Value::Bool(r));
        }

        let l = self.expr(lhs)?;
        let r = self.expr(rhs)?;
        match op {
            BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div => self.arith(op, l, r),
            BinOp::Eq | BinOp::Ne => {
                let eq = self.values_equal(&l, &r)?;
                Ok(Value::Bool(if op == BinOp::Eq { eq } else { !eq }))
            }
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
                let (a, b) = match (&l, &r) {
                    (Value::Int(a), Value::Int(b)) => (*a as f64, *b as f64),
                    (Value::Int(a), Value::Float(b)) => (*a as f64, *b),
                    (Value::Float(a), Value::Int(b)) => (*a, *b as f64),
                    (Value::Float(a), Value::Float(b)) => (*a, *b),
                    _ => {
                        return self.fail(format!(
                            "`{}` between {} and {}",
                            op.symbol(),
                            l.type_name(),
                            r.type_name()
                        ))
                    }
                };
                Ok(Value::Bool(match op {
                    BinOp::Lt => a < b,
                    BinOp::Le => a <= b,
                    BinOp::Gt => a > b,
                    _ => a >= b,
                }))
            }
            BinOp::And | BinOp::Or => unreachable!("handled above"),
        }
    }

    fn arith(&mut self, op: BinOp, l: Value, r: Value) -> Flow<Value> {
        if let (Value::Str(a), Value::Str(b), BinOp::Add) = (&l, &r, op) {
            return Ok(Value::Str(format!("{a}{b}")));
        }
        let (a, b, int_args) = match (&l, &r) {
            (Value::Int(a), Value::Int(b)) => (*a as f64, *b as f64, true),
            (Value::Int(a), Value::Float(b)) => (*a as f64, *b, false),
            (Value::Float(a), Value::Int(b)) => (*a, *b as f64, false),
            (Value::Float(a), Value::Float(b)) => (*a, *b, false),
            _ => {
                return self.fail(format!(
                    "`{}` between {} and {}",
                    op.symbol(),
                    l.type_name(),
                    r.type_name()
                ))
            }
        };
        match op {
            BinOp::Add | BinOp::Sub | BinOp::Mul => {
                if int_args {
                    let (a, b) = (a as i64, b as i64);
                    let v = match op {
                        BinOp::Add => a.checked_add(b),
                        BinOp::Sub => a.checked_sub(b),
                        _ => a.checked_mul(b),
                    };
                    match v {
                        Some(v) => Ok(Value::Int(v)),
                        None => self.fail("integer overflow"),
                    }
                } else {
                    let v = match op {
                        BinOp::Add => a + b,
                        BinOp::Sub => a - b,
                        _ => a * b,
                    };
                    Ok(Value::Float(v))
                }
            }
            BinOp::Div => {
                // True division, like Python 3.
                if b == 0.0 {
                    return self.fail("division by zero");
                }
                Ok(Value::Float(a / b))
            }
            _ => unreachable!(),
        }
    }

    fn values_equal(&self, l: &Value, r: &Value) -> Flow<bool> {
        Ok(match (l, r) {
            (Value::Int(a), Value::Int(b)) => a == b,
            (Value::Float(a), Value::Float(b)) => a == b,
            (Value::Int(a), Value::Float(b)) | (Value::Float(b), Value::Int(a)) => *a as f64 == *b,
            (Value::Str(a), Value::Str(b)) => a == b,
            (Value::Bool(a), Value::Bool(b)) => a == b,
            (Value::None, Value::None) => true,
            (Value::None, _) | (_, Value::None) => false,
            _ => {
                return Err(Interrupt::Error(format!(
                    "`==` between {} and {}",
                    l.type_name(),
                    r.type_name()
                )))
            }
        })
    }
}

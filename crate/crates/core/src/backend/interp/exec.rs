//! Tree-walking evaluator. Work items run one after another, so a kernel
//! may only rely on the result of its own work item.

use super::compile::{BinOp, Builtin, Expr, KernelDef, Pos, Stmt, UnOp, BUF_AUX, BUF_IN, BUF_OUT};
use crate::backend::KernelArgs;

enum Flow {
    Next,
    Return,
}

struct Env<'a, 'b> {
    kernel: &'a str,
    gid: usize,
    args: &'a mut KernelArgs<'b>,
    locals: Vec<f64>,
}

type EResult<T> = Result<T, String>;

pub fn run(def: &KernelDef, mut args: KernelArgs<'_>) -> EResult<()> {
    let mut env = Env { kernel: &def.name, gid: 0, args: &mut args, locals: vec![0.0; def.slots] };
    for gid in 0..env.args.global_size {
        env.gid = gid;
        env.block(&def.body)?;
    }
    Ok(())
}

fn truthy(v: f64) -> bool {
    v != 0.0
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

impl Env<'_, '_> {
    fn fail(&self, pos: Pos, message: impl std::fmt::Display) -> String {
        format!("{} (work item {}, line {}): {message}", self.kernel, self.gid, pos.line)
    }

    fn block(&mut self, stmts: &[Stmt]) -> EResult<Flow> {
        for s in stmts {
            if let Flow::Return = self.stmt(s)? {
                return Ok(Flow::Return);
            }
        }
        Ok(Flow::Next)
    }

    fn stmt(&mut self, s: &Stmt) -> EResult<Flow> {
        match s {
            Stmt::Set(slot, e) => self.locals[*slot] = self.eval(e)?,
            Stmt::Expr(e) => {
                self.eval(e)?;
            }
            Stmt::If(c, then, otherwise) => {
                let branch = if truthy(self.eval(c)?) { then } else { otherwise };
                return self.block(branch);
            }
            Stmt::For(slot, start, end, body) => {
                let (start, end) = (self.eval(start)?.floor() as i64, self.eval(end)?.floor() as i64);
                for i in start..end {
                    self.locals[*slot] = i as f64;
                    if let Flow::Return = self.block(body)? {
                        return Ok(Flow::Return);
                    }
                }
            }
            Stmt::Return => return Ok(Flow::Return),
            Stmt::Fail(message, pos) => return Err(self.fail(*pos, message)),
        }
        Ok(Flow::Next)
    }

    fn eval(&mut self, e: &Expr) -> EResult<f64> {
        Ok(match e {
            Expr::Const(v) => *v,
            Expr::Local(slot) => self.locals[*slot],
            Expr::Unary(UnOp::Neg, a) => -self.eval(a)?,
            Expr::Unary(UnOp::Not, a) => flag(!truthy(self.eval(a)?)),
            Expr::Binary(BinOp::And, a, b) => flag(truthy(self.eval(a)?) && truthy(self.eval(b)?)),
            Expr::Binary(BinOp::Or, a, b) => flag(truthy(self.eval(a)?) || truthy(self.eval(b)?)),
            Expr::Binary(op, a, b) => {
                let (a, b) = (self.eval(a)?, self.eval(b)?);
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a / b,
                    BinOp::Rem => a % b,
                    BinOp::Lt => flag(a < b),
                    BinOp::Le => flag(a <= b),
                    BinOp::Gt => flag(a > b),
                    BinOp::Ge => flag(a >= b),
                    BinOp::Eq => flag(a == b),
                    BinOp::Ne => flag(a != b),
                    BinOp::And | BinOp::Or => unreachable!("short-circuited above"),
                }
            }
            Expr::Call(f, args, pos) => {
                let mut v = [0.0; 3];
                for (slot, a) in v.iter_mut().zip(args) {
                    *slot = self.eval(a)?;
                }
                self.call(*f, v, *pos)?
            }
        })
    }

    fn index(&self, v: f64, pos: Pos) -> EResult<usize> {
        if v < 0.0 || v.fract() != 0.0 || !v.is_finite() {
            return Err(self.fail(pos, format!("invalid index {v}")));
        }
        Ok(v as usize)
    }

    fn read_bytes(&self, buf: f64, off: usize, n: usize, pos: Pos) -> EResult<&[u8]> {
        let bytes: &[u8] = if buf == BUF_IN {
            self.args.input.map_or(&*self.args.output, |v| v.data)
        } else if buf == BUF_OUT {
            self.args.output
        } else if buf == BUF_AUX {
            self.args.aux.ok_or_else(|| self.fail(pos, "no auxiliary buffer bound"))?.data
        } else {
            return Err(self.fail(pos, format!("unknown buffer selector {buf}")));
        };
        off.checked_add(n)
            .and_then(|end| bytes.get(off..end))
            .ok_or_else(|| self.fail(pos, format!("load of {n} bytes at {off} out of bounds ({} bytes)", bytes.len())))
    }

    fn write_bytes(&mut self, buf: f64, off: usize, data: &[u8], pos: Pos) -> EResult<()> {
        if buf != BUF_OUT {
            return Err(self.fail(pos, "stores are only allowed to OUT"));
        }
        let len = self.args.output.len();
        match off.checked_add(data.len()).and_then(|end| self.args.output.get_mut(off..end)) {
            Some(dst) => {
                dst.copy_from_slice(data);
                Ok(())
            }
            None => Err(self.fail(pos, format!("store of {} bytes at {off} out of bounds ({len} bytes)", data.len()))),
        }
    }

    fn param(&self, off: usize, n: usize, pos: Pos) -> EResult<&[u8]> {
        off.checked_add(n)
            .and_then(|end| self.args.params.get(off..end))
            .ok_or_else(|| self.fail(pos, format!("parameter read at {off} beyond block of {} bytes", self.args.params.len())))
    }

    fn call(&mut self, f: Builtin, a: [f64; 3], pos: Pos) -> EResult<f64> {
        Ok(match f {
            Builtin::Gid => self.gid as f64,
            Builtin::GlobalSize => self.args.global_size as f64,
            Builtin::ParLen => self.args.params.len() as f64,
            Builtin::Hdr => {
                let header = if a[0] == BUF_IN {
                    self.args.input_header()
                } else if a[0] == BUF_OUT {
                    self.args.output_header
                } else if a[0] == BUF_AUX {
                    self.args.aux.ok_or_else(|| self.fail(pos, "no auxiliary buffer bound"))?.header
                } else {
                    return Err(self.fail(pos, format!("unknown buffer selector {}", a[0])));
                };
                let off = self.index(a[1], pos)? * 8;
                let word = header
                    .get(off..off + 8)
                    .ok_or_else(|| self.fail(pos, format!("header word {} out of range", a[1])))?;
                u64::from_le_bytes(word.try_into().expect("8 bytes")) as f64
            }
            Builtin::LdU8 => {
                let off = self.index(a[1], pos)?;
                f64::from(self.read_bytes(a[0], off, 1, pos)?[0])
            }
            Builtin::LdF32 => {
                let off = self.index(a[1], pos)?;
                let b = self.read_bytes(a[0], off, 4, pos)?;
                f64::from(f32::from_le_bytes(b.try_into().expect("4 bytes")))
            }
            Builtin::StU8 => {
                let off = self.index(a[1], pos)?;
                self.write_bytes(a[0], off, &[a[2].clamp(0.0, 255.0) as u8], pos)?;
                0.0
            }
            Builtin::StF32 => {
                let off = self.index(a[1], pos)?;
                self.write_bytes(a[0], off, &(a[2] as f32).to_le_bytes(), pos)?;
                0.0
            }
            Builtin::ParU32 => {
                let off = self.index(a[0], pos)?;
                f64::from(u32::from_le_bytes(self.param(off, 4, pos)?.try_into().expect("4 bytes")))
            }
            Builtin::ParF32 => {
                let off = self.index(a[0], pos)?;
                f64::from(f32::from_le_bytes(self.param(off, 4, pos)?.try_into().expect("4 bytes")))
            }
            Builtin::ParF64 => {
                let off = self.index(a[0], pos)?;
                f64::from_le_bytes(self.param(off, 8, pos)?.try_into().expect("8 bytes"))
            }
            Builtin::Sqrt => a[0].sqrt(),
            Builtin::Sin => a[0].sin(),
            Builtin::Cos => a[0].cos(),
            Builtin::Floor => a[0].floor(),
            Builtin::Round => a[0].round(),
            Builtin::Abs => a[0].abs(),
            Builtin::Min => a[0].min(a[1]),
            Builtin::Max => a[0].max(a[1]),
            Builtin::Clamp => a[0].clamp(a[1], a[2]),
            Builtin::Idiv => {
                if a[1] == 0.0 {
                    return Err(self.fail(pos, "integer division by zero"));
                }
                (a[0] / a[1]).floor()
            }
        })
    }
}

//! Parameter checkpoints.
//!
//! Text format:
//!
//! ```text
//! agent-params v1
//! input 7
//! hidden 64 64
//! actor 4866
//! <one value per line, 17 significant digits>
//! critic 4801
//! <values>
//! ```
//!
//! The binary format carries the same content: magic `AGPB`, then u32 LE
//! version, input dim, hidden count, each hidden dim, and for each network a
//! u64 LE length followed by f64 LE values.

use std::fmt::Write as _;

use super::{AgentParams, Mlp, NetLayout};
use crate::error::{Error, Result};

const TEXT_MAGIC: &str = "agent-params v1";
const BIN_MAGIC: &[u8; 4] = b"AGPB";
const VERSION: u32 = 1;

pub fn write_text(params: &AgentParams) -> String {
    let mut out = String::with_capacity(25 * (params.actor.len() + params.critic.len()) + 64);
    out.push_str(TEXT_MAGIC);
    out.push('\n');
    let _ = writeln!(out, "input {}", params.layout.input_dim);
    out.push_str("hidden");
    for h in &params.layout.hidden_dims {
        let _ = write!(out, " {h}");
    }
    out.push('\n');
    for (name, values) in [("actor", &params.actor), ("critic", &params.critic)] {
        let _ = writeln!(out, "{name} {}", values.len());
        for v in values.iter() {
            let _ = writeln!(out, "{v:.16e}");
        }
    }
    out
}

fn parse_err(msg: impl Into<String>) -> Error {
    Error::Parse(msg.into())
}

pub fn read_text(text: &str) -> Result<AgentParams> {
    let mut lines = text.lines();
    let mut next = |what: &str| lines.next().ok_or_else(|| parse_err(format!("missing {what}")));
    if next("magic")?.trim() != TEXT_MAGIC {
        return Err(parse_err("not an agent-params v1 file"));
    }
    let keyed = |line: &str, key: &str| -> Result<Vec<usize>> {
        let mut it = line.split_whitespace();
        if it.next() != Some(key) {
            return Err(parse_err(format!("expected '{key}' line, got '{line}'")));
        }
        it.map(|s| s.parse().map_err(|_| parse_err(format!("bad integer '{s}'")))).collect()
    };
    let input = keyed(next("input")?, "input")?;
    let [input_dim] = input[..] else {
        return Err(parse_err("input line needs one value"));
    };
    let hidden_dims = keyed(next("hidden")?, "hidden")?;
    let layout = NetLayout { input_dim, hidden_dims };
    layout.validate()?;

    let mut read_vec = |key: &str| -> Result<Vec<f64>> {
        let header = keyed(next(key)?, key)?;
        let [n] = header[..] else {
            return Err(parse_err(format!("{key} line needs a length")));
        };
        (0..n)
            .map(|_| {
                let line = next("value")?;
                line.trim().parse::<f64>().map_err(|_| parse_err(format!("bad value '{line}'")))
            })
            .collect()
    };
    let actor = read_vec("actor")?;
    let critic = read_vec("critic")?;
    let params = AgentParams { layout, actor, critic };
    params.validate()?;
    Ok(params)
}

pub fn write_binary(params: &AgentParams) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 * (params.actor.len() + params.critic.len()) + 64);
    out.extend_from_slice(BIN_MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(params.layout.input_dim as u32).to_le_bytes());
    out.extend_from_slice(&(params.layout.hidden_dims.len() as u32).to_le_bytes());
    for &h in &params.layout.hidden_dims {
        out.extend_from_slice(&(h as u32).to_le_bytes());
    }
    for values in [&params.actor, &params.critic] {
        out.extend_from_slice(&(values.len() as u64).to_le_bytes());
        for v in values.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Cursor<'a>(&'a [u8]);

impl Cursor<'_> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        if self.0.len() < N {
            return Err(parse_err("truncated binary checkpoint"));
        }
        let (head, rest) = self.0.split_at(N);
        self.0 = rest;
        Ok(head.try_into().unwrap())
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take()?))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take()?))
    }

    fn f64s(&mut self, max: usize) -> Result<Vec<f64>> {
        let n = self.u64()? as usize;
        if n != max {
            return Err(parse_err(format!("expected {max} values, header says {n}")));
        }
        (0..n).map(|_| Ok(f64::from_le_bytes(self.take()?))).collect()
    }
}

pub fn read_binary(bytes: &[u8]) -> Result<AgentParams> {
    let mut c = Cursor(bytes);
    if &c.take::<4>()? != BIN_MAGIC {
        return Err(parse_err("bad binary checkpoint magic"));
    }
    if c.u32()? != VERSION {
        return Err(parse_err("unsupported checkpoint version"));
    }
    let input_dim = c.u32()? as usize;
    let n_hidden = c.u32()? as usize;
    if n_hidden > 64 {
        return Err(parse_err("implausible hidden layer count"));
    }
    let hidden_dims = (0..n_hidden).map(|_| c.u32().map(|h| h as usize)).collect::<Result<_>>()?;
    let layout = NetLayout { input_dim, hidden_dims };
    layout.validate()?;
    let actor = c.f64s(Mlp::param_count(&layout.actor_dims()))?;
    let critic = c.f64s(Mlp::param_count(&layout.critic_dims()))?;
    if !c.0.is_empty() {
        return Err(parse_err("trailing bytes after checkpoint"));
    }
    let params = AgentParams { layout, actor, critic };
    params.validate()?;
    Ok(params)
}

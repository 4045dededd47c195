//! Versioned plain-text snapshot of the success buffer.
//!
//! ```text
//! vlreward-buffer 1
//! capacity 50000
//! pairs 2
//! <trajectory_id> <state_dim> <state...> <action_dim> <action...>
//! ...
//! ```
//!
//! Fields are space separated in exactly this order; reals use the shortest
//! decimal form that reads back to the same `f64`, so a save/load cycle is
//! lossless. Pairs are listed oldest first.

use std::fmt::Write as _;

use vlreward_core::selfimitate::{SuccessBuffer, SuccessPair};

pub const BUFFER_FORMAT: &str = "vlreward-buffer";
pub const BUFFER_VERSION: u32 = 1;

pub fn write_buffer(buf: &SuccessBuffer) -> String {
    let mut s = format!("{BUFFER_FORMAT} {BUFFER_VERSION}\ncapacity {}\npairs {}\n", buf.capacity(), buf.len());
    for p in buf.iter() {
        let _ = write!(s, "{} {}", p.trajectory_id, p.state.len());
        for x in &p.state {
            let _ = write!(s, " {x:?}");
        }
        let _ = write!(s, " {}", p.action.len());
        for x in &p.action {
            let _ = write!(s, " {x:?}");
        }
        s.push('\n');
    }
    s
}

pub fn read_buffer(text: &str) -> Result<SuccessBuffer, String> {
    let mut lines = text.lines();
    let mut header = |name: &str| -> Result<String, String> {
        let line = lines.next().ok_or_else(|| format!("missing `{name}` line"))?;
        let (k, v) = line.split_once(' ').ok_or_else(|| format!("malformed `{name}` line"))?;
        if k != name {
            return Err(format!("expected `{name}`, found `{k}`"));
        }
        Ok(v.to_string())
    };
    let version = header(BUFFER_FORMAT)?;
    if version != BUFFER_VERSION.to_string() {
        return Err(format!("unsupported buffer version {version}"));
    }
    let capacity: usize = header("capacity")?.parse().map_err(|e| format!("capacity: {e}"))?;
    let count: usize = header("pairs")?.parse().map_err(|e| format!("pairs: {e}"))?;
    let mut buf = SuccessBuffer::new(capacity).map_err(|e| e.to_string())?;
    if count > capacity {
        return Err(format!("{count} pairs exceed capacity {capacity}"));
    }
    let mut read = 0;
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let err = |m: &str| format!("pair {}: {m}", i + 1);
        let fields: Vec<&str> = line.split(' ').collect();
        let mut pos = 0;
        let mut take = || -> Result<&str, String> {
            let f = fields.get(pos).copied().ok_or_else(|| err("truncated"))?;
            pos += 1;
            Ok(f)
        };
        let trajectory_id: u64 = take()?.parse().map_err(|_| err("bad id"))?;
        let mut vector = || -> Result<Vec<f64>, String> {
            let n: usize = take()?.parse().map_err(|_| err("bad length"))?;
            (0..n).map(|_| take()?.parse::<f64>().map_err(|_| err("bad number"))).collect()
        };
        let state = vector()?;
        let action = vector()?;
        if pos != fields.len() {
            return Err(err("trailing fields"));
        }
        buf.push(SuccessPair { trajectory_id, state, action });
        read += 1;
    }
    if read != count {
        return Err(format!("header announces {count} pairs, found {read}"));
    }
    Ok(buf)
}

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{PemError, Result};
use crate::market::AgentId;

pub const TRACE_HEADER: [&str; 5] = ["window", "agent_id", "generation_kwh", "load_kwh", "battery_kwh"];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRecord {
    pub t: u32,
    pub agent_id: AgentId,
    pub generation: f64,
    pub load: f64,
    pub battery: f64,
}

pub fn load_traces(path: impl AsRef<Path>) -> Result<Vec<TraceRecord>> {
    let file = std::fs::File::open(path.as_ref())
        .map_err(|e| PemError::Io(format!("{}: {e}", path.as_ref().display())))?;
    read_traces(file)
}

/// Parses trace CSV. The battery column may be omitted (then 0).
pub fn read_traces<R: Read>(input: R) -> Result<Vec<TraceRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    let with_battery = header == TRACE_HEADER;
    if !with_battery && header != TRACE_HEADER[..4] {
        return Err(PemError::Parse {
            line: 1,
            msg: format!("header must be `{}`, got `{}`", TRACE_HEADER.join(","), header.join(",")),
        });
    }
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let bad = |msg: String| PemError::Parse { line, msg };
        let field = |i: usize| row.get(i).ok_or_else(|| bad(format!("missing column {}", TRACE_HEADER[i])));
        let real = |i: usize| -> Result<f64> {
            let s = field(i)?;
            let v: f64 = s
                .parse()
                .map_err(|_| bad(format!("{}: not a number: {s:?}", TRACE_HEADER[i])))?;
            if !v.is_finite() {
                return Err(bad(format!("{}: not finite", TRACE_HEADER[i])));
            }
            Ok(v)
        };
        let t: u32 = field(0)?
            .parse()
            .map_err(|_| bad(format!("window: not an integer: {:?}", &row[0])))?;
        let id: u16 = field(1)?
            .parse()
            .map_err(|_| bad(format!("agent_id: not an integer: {:?}", &row[1])))?;
        let rec = TraceRecord {
            t,
            agent_id: AgentId(id),
            generation: real(2)?,
            load: real(3)?,
            battery: if with_battery { real(4)? } else { 0.0 },
        };
        if rec.generation < 0.0 || rec.load < 0.0 {
            return Err(bad("generation and load must be nonnegative".into()));
        }
        if id == crate::protocol::BROADCAST {
            return Err(bad(format!("agent id {id} is reserved")));
        }
        if !seen.insert((rec.t, rec.agent_id)) {
            return Err(PemError::Integrity(format!(
                "line {line}: duplicate record for agent {id} in window {t}"
            )));
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn write_traces<W: Write>(records: &[TraceRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_HEADER)?;
    for r in records {
        w.write_record(&[
            r.t.to_string(),
            r.agent_id.0.to_string(),
            r.generation.to_string(),
            r.load.to_string(),
            r.battery.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Records grouped by window, each group sorted by agent id.
pub fn by_window(records: &[TraceRecord]) -> BTreeMap<u32, Vec<TraceRecord>> {
    let mut m: BTreeMap<u32, Vec<TraceRecord>> = BTreeMap::new();
    for r in records {
        m.entry(r.t).or_default().push(*r);
    }
    for v in m.values_mut() {
        v.sort_by_key(|r| r.agent_id);
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_row() {
        let recs = read_traces("window,agent_id,generation_kwh,load_kwh,battery_kwh\n1,7,2.5,1.0,0.0\n".as_bytes()).unwrap();
        assert_eq!(
            recs,
            vec![TraceRecord {
                t: 1,
                agent_id: AgentId(7),
                generation: 2.5,
                load: 1.0,
                battery: 0.0
            }]
        );
    }

    #[test]
    fn battery_is_optional() {
        let recs = read_traces("window,agent_id,generation_kwh,load_kwh\n1,1,1,2\n2,1,3,0.5\n".as_bytes()).unwrap();
        assert!(recs.iter().all(|r| r.battery == 0.0));
        assert_eq!(recs.len(), 2);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = read_traces("window,agent_id,generation_kwh,load_kwh,battery_kwh\n1,1,1,1,0\n2,1,abc,1,0\n".as_bytes()).unwrap_err();
        assert!(matches!(err, PemError::Parse { line: 3, .. }), "{err:?}");
        let err = read_traces("window,agent_id,generation_kwh,load_kwh,battery_kwh\n1,1,1,1\n".as_bytes()).unwrap_err();
        assert!(matches!(err, PemError::Parse { line: 2, .. }), "{err:?}");
        let err = read_traces("t,id,g,l\n".as_bytes()).unwrap_err();
        assert!(matches!(err, PemError::Parse { line: 1, .. }));
    }

    #[test]
    fn duplicates_are_integrity_errors() {
        let err = read_traces("window,agent_id,generation_kwh,load_kwh\n1,1,1,2\n1,1,3,0.5\n".as_bytes()).unwrap_err();
        assert!(matches!(err, PemError::Integrity(_)));
    }

    #[test]
    fn write_read_round_trip() {
        let recs = vec![
            TraceRecord { t: 1, agent_id: AgentId(2), generation: 0.123456, load: 1.5, battery: -0.25 },
            TraceRecord { t: 2, agent_id: AgentId(2), generation: 3.0, load: 0.0, battery: 0.0 },
        ];
        let mut buf = Vec::new();
        write_traces(&recs, &mut buf).unwrap();
        assert_eq!(read_traces(buf.as_slice()).unwrap(), recs);
    }
}

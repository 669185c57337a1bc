//! Fixed-header CSV and JSON outputs.
//!
//! Coordinates and energies are written with 12 significant digits.

use std::collections::BTreeMap;
use std::io::Write;

use crate::error::Result;
use crate::experiments::{PairRow, SlopeCheck, SweepRow};
use crate::sampling::{MobileNode, Relay};

/// `x` with 12 significant digits.
pub fn sig12(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.11e}")
    } else {
        format!("{x}")
    }
}

fn opt<T>(value: Option<T>, show: impl Fn(T) -> String) -> String {
    value.map(show).unwrap_or_default()
}

pub fn write_nodes_csv<W: Write>(nodes: &[MobileNode], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["id", "orientation", "level", "index", "pos", "x", "y"])?;
    for node in nodes {
        let (x, y) = node.point();
        w.write_record([
            node.id.to_string(),
            node.street.orientation.as_char().to_string(),
            node.street.level.to_string(),
            node.street.index.to_string(),
            sig12(node.pos),
            sig12(x),
            sig12(y),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_relays_csv<W: Write>(relays: &[Relay], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["id", "h_level", "h_index", "v_level", "v_index", "x", "y"])?;
    for relay in relays {
        let c = relay.crossing;
        let (x, y) = c.point();
        w.write_record([
            relay.id.to_string(),
            c.h_street.level.to_string(),
            c.h_street.index.to_string(),
            c.v_street.level.to_string(),
            c.v_street.index.to_string(),
            sig12(x),
            sig12(y),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_pairs_csv<W: Write>(rows: &[PairRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "pair_id",
        "s",
        "t",
        "k_or_M",
        "exact_energy",
        "upto_energy",
        "hops",
        "max_power",
        "feasible",
    ])?;
    for r in rows {
        w.write_record([
            r.pair_id.to_string(),
            r.s.to_string(),
            r.t.to_string(),
            format!("{}", r.k_or_m),
            opt(r.exact_energy, sig12),
            opt(r.upto_energy, sig12),
            opt(r.hops, |h| h.to_string()),
            opt(r.max_power, sig12),
            u8::from(r.feasible).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Values use the shortest round-trip form; infeasible results read `inf`.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["n", "replicate", "seed", "metric", "value"])?;
    for r in rows {
        w.write_record([
            r.n.to_string(),
            r.replicate.to_string(),
            r.seed.to_string(),
            r.metric.clone(),
            format!("{}", r.value),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `{metric: {slope, stderr, r_squared, ..., pass}}`, keys sorted.
pub fn write_slopes_json<W: Write>(slopes: &BTreeMap<String, SlopeCheck>, mut out: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, slopes)?;
    writeln!(out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::{Crossing, StreetId};

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(sig12(0.5), "5.00000000000e-1");
        assert_eq!(sig12(1.0 / 3.0), "3.33333333333e-1");
        assert_eq!(sig12(f64::INFINITY), "inf");
        let back: f64 = sig12(0.123456789012345).parse().unwrap();
        assert!((back - 0.123456789012).abs() < 1e-15);
    }

    #[test]
    fn headers() {
        let street = StreetId::vertical(1, 3).unwrap();
        let mut buf = Vec::new();
        write_nodes_csv(&[MobileNode { id: 0, street, pos: 0.25 }], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "id,orientation,level,index,pos,x,y\n0,V,1,3,2.50000000000e-1,7.50000000000e-1,2.50000000000e-1\n"
        );
        let relay = Relay {
            id: 0,
            crossing: Crossing {
                h_street: StreetId::horizontal(0, 1).unwrap(),
                v_street: street,
            },
        };
        let mut buf = Vec::new();
        write_relays_csv(&[relay], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("id,h_level,h_index,v_level,v_index,x,y\n0,0,1,1,3,7.5"));

        let mut buf = Vec::new();
        write_sweep_csv(&[], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "n,replicate,seed,metric,value\n");
        let mut buf = Vec::new();
        write_pairs_csv(&[], &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "pair_id,s,t,k_or_M,exact_energy,upto_energy,hops,max_power,feasible\n"
        );
    }
}

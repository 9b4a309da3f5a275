//! Field snapshots: header `(n1, n2, n3, L1, L2, L3)` followed by the
//! component-major, node-ordered values.
//!
//! Binary layout (little endian): three `u64` resolutions, three `f64`
//! lengths, then `3 n1 n2 n3` `f64` values. The CSV layout has a header row
//! `n1,n2,n3,L1,L2,L3`, one row with those values, then one value per line.

use std::io::{BufRead, Read, Write};

use crate::error::{Error, Result};
use crate::mesh::{Grid, VectorField};
use crate::num::Real;

pub fn write_binary<T: Real, W: Write>(field: &VectorField<T>, mut w: W) -> Result<()> {
    let g = field.grid();
    for n in g.n() {
        w.write_all(&(n as u64).to_le_bytes())?;
    }
    for l in g.lengths() {
        w.write_all(&l.as_f64().to_le_bytes())?;
    }
    for &x in field.as_slice() {
        w.write_all(&x.as_f64().to_le_bytes())?;
    }
    Ok(())
}

pub fn read_binary<T: Real, R: Read>(mut r: R) -> Result<VectorField<T>> {
    let mut buf = [0u8; 8];
    let mut n = [0usize; 3];
    for slot in &mut n {
        r.read_exact(&mut buf)?;
        *slot = usize::try_from(u64::from_le_bytes(buf))
            .map_err(|_| Error::Format("resolution does not fit in usize".into()))?;
    }
    let mut lengths = [T::zero(); 3];
    for slot in &mut lengths {
        r.read_exact(&mut buf)?;
        *slot = T::lit(f64::from_le_bytes(buf));
    }
    let grid = Grid::new(lengths, n)?;
    let count = 3 * grid.node_count();
    let mut data = Vec::with_capacity(count);
    for _ in 0..count {
        r.read_exact(&mut buf)?;
        data.push(T::lit(f64::from_le_bytes(buf)));
    }
    if r.read(&mut buf)? != 0 {
        return Err(Error::Format("trailing bytes after field data".into()));
    }
    VectorField::from_data(&grid, data)
}

pub fn write_csv<T: Real, W: Write>(field: &VectorField<T>, mut w: W) -> Result<()> {
    let g = field.grid();
    let [n1, n2, n3] = g.n();
    let [l1, l2, l3] = g.lengths().map(|l| l.as_f64());
    writeln!(w, "n1,n2,n3,L1,L2,L3")?;
    writeln!(w, "{n1},{n2},{n3},{l1:.16e},{l2:.16e},{l3:.16e}")?;
    for &x in field.as_slice() {
        writeln!(w, "{:.16e}", x.as_f64())?;
    }
    Ok(())
}

pub fn read_csv<T: Real, R: BufRead>(r: R) -> Result<VectorField<T>> {
    let mut lines = r.lines();
    let mut next = |what: &str| -> Result<String> {
        lines
            .next()
            .ok_or_else(|| Error::Format(format!("missing {what}")))?
            .map_err(Error::from)
    };
    let header = next("header row")?;
    if header.trim() != "n1,n2,n3,L1,L2,L3" {
        return Err(Error::Format(format!("unexpected header row {header:?}")));
    }
    let dims = next("dimension row")?;
    let cols: Vec<&str> = dims.trim().split(',').collect();
    if cols.len() != 6 {
        return Err(Error::Format(format!("dimension row needs 6 columns, got {}", cols.len())));
    }
    let parse_usize = |s: &str| s.trim().parse::<usize>().map_err(|e| Error::Format(format!("{s:?}: {e}")));
    let parse_f64 = |s: &str| s.trim().parse::<f64>().map_err(|e| Error::Format(format!("{s:?}: {e}")));
    let n = [parse_usize(cols[0])?, parse_usize(cols[1])?, parse_usize(cols[2])?];
    let lengths = [parse_f64(cols[3])?, parse_f64(cols[4])?, parse_f64(cols[5])?].map(T::lit);
    let grid = Grid::new(lengths, n)?;
    let mut data = Vec::with_capacity(3 * grid.node_count());
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let v = line
            .trim()
            .parse::<f64>()
            .map_err(|e| Error::Format(format!("value line {}: {e}", lineno + 3)))?;
        data.push(T::lit(v));
    }
    VectorField::from_data(&grid, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    proptest! {
        #[test]
        fn binary_and_csv_round_trip(seed in any::<u64>(), n1 in 1usize..4, n2 in 1usize..4, n3 in 1usize..4) {
            let g = Grid::new([1.0, 0.7, 2.5], [n1, n2, n3]).unwrap();
            let f = VectorField::random(&g, 3.0, &mut ChaCha8Rng::seed_from_u64(seed));
            let mut bin = Vec::new();
            write_binary(&f, &mut bin).unwrap();
            prop_assert_eq!(bin.len(), 48 + 8 * 3 * g.node_count());
            prop_assert_eq!(&read_binary::<f64, _>(&bin[..]).unwrap(), &f);
            let mut csv = Vec::new();
            write_csv(&f, &mut csv).unwrap();
            prop_assert_eq!(&read_csv::<f64, _>(&csv[..]).unwrap(), &f);
        }
    }

    #[test]
    fn truncated_input_is_rejected() {
        let g = Grid::new([1.0; 3], [2; 3]).unwrap();
        let f = VectorField::<f64>::zeros(&g);
        let mut bin = Vec::new();
        write_binary(&f, &mut bin).unwrap();
        assert!(read_binary::<f64, _>(&bin[..bin.len() - 8]).is_err());
        let text = "n1,n2,n3,L1,L2,L3\n1,1,1,1,1,1\n0.0\n0.0\n";
        assert!(matches!(read_csv::<f64, _>(text.as_bytes()), Err(Error::GridMismatch(_))));
    }
}

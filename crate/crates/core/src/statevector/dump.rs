//! Debug dump of raw amplitudes: `"QPSV"`, `u32` N (little endian), then
//! `2^N` pairs of little-endian `f64` (re, im).

use std::io::{Read, Write};

use num_complex::Complex64 as C64;

use super::StateVector;
use crate::error::{Error, Result};

pub const DUMP_MAGIC: &[u8; 4] = b"QPSV";

pub fn write_dump<W: Write>(state: &StateVector, mut w: W) -> std::io::Result<()> {
    w.write_all(DUMP_MAGIC)?;
    w.write_all(&(state.n() as u32).to_le_bytes())?;
    for a in state.amplitudes() {
        w.write_all(&a.re.to_le_bytes())?;
        w.write_all(&a.im.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_dump<R: Read>(mut r: R) -> Result<StateVector> {
    let io = |e| Error::io("<dump>", e);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(io)?;
    if &magic != DUMP_MAGIC {
        return Err(Error::Config("not a QPSV dump".into()));
    }
    let mut word = [0u8; 4];
    r.read_exact(&mut word).map_err(io)?;
    let n = u32::from_le_bytes(word) as usize;
    if n > super::DEFAULT_STATEVECTOR_CAP {
        return Err(Error::Capability(format!("dump holds N={n} qubits")));
    }
    let mut amps = Vec::with_capacity(1 << n);
    let mut buf = [0u8; 16];
    for _ in 0..(1usize << n) {
        r.read_exact(&mut buf).map_err(io)?;
        let re = f64::from_le_bytes(buf[..8].try_into().unwrap());
        let im = f64::from_le_bytes(buf[8..].try_into().unwrap());
        amps.push(C64::new(re, im));
    }
    StateVector::from_amplitudes(n, amps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::InitialState;
    use crate::statevector::prepare_initial;

    #[test]
    fn header_layout_and_round_trip() {
        let s = prepare_initial(InitialState::Ghz, 4).unwrap();
        let mut bytes = Vec::new();
        write_dump(&s, &mut bytes).unwrap();
        assert_eq!(&bytes[..4], b"QPSV");
        assert_eq!(&bytes[4..8], &[4, 0, 0, 0]);
        assert_eq!(bytes.len(), 8 + 16 * 16);
        assert_eq!(read_dump(&bytes[..]).unwrap(), s);
        assert!(read_dump(&b"NOPE0000"[..]).is_err());
    }
}

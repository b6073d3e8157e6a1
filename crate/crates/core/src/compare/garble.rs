//! Garbled less-than comparator (free-XOR with point-and-permute).
//!
//! The circuit computes the borrow out of `a - b` bit by bit from the least
//! significant end:
//!
//! ```text
//! c_0     = 0
//! c_{i+1} = c_i ^ ((!a_i ^ c_i) & (b_i ^ c_i))      // maj(!a_i, b_i, c_i)
//! a < b  <=> c_w
//! ```
//!
//! Only the `w` AND gates need tables; XOR and NOT are free.

use rand::RngCore;
use sha2::{Digest, Sha256};

use crate::error::{PemError, Result};

pub const LABEL_BYTES: usize = 16;
pub const MAX_WIDTH: u32 = 128;

#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct WireLabel(pub [u8; LABEL_BYTES]);

impl std::fmt::Debug for WireLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "WireLabel(")?;
        for b in &self.0[..4] {
            write!(f, "{b:02x}")?;
        }
        write!(f, "..)")
    }
}

impl WireLabel {
    fn random<R: RngCore + ?Sized>(rng: &mut R) -> Self {
        let mut l = [0u8; LABEL_BYTES];
        rng.fill_bytes(&mut l);
        WireLabel(l)
    }

    fn xor(&self, other: &WireLabel) -> WireLabel {
        let mut out = [0u8; LABEL_BYTES];
        for (o, (a, b)) in out.iter_mut().zip(self.0.iter().zip(other.0.iter())) {
            *o = a ^ b;
        }
        WireLabel(out)
    }

    /// Point-and-permute color.
    pub fn color(&self) -> u8 {
        self.0[LABEL_BYTES - 1] & 1
    }

    pub fn to_u128(&self) -> u128 {
        u128::from_be_bytes(self.0)
    }

    pub fn from_u128(v: u128) -> Self {
        WireLabel(v.to_be_bytes())
    }
}

/// The two labels of one wire.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WireLabelPair {
    pub label0: WireLabel,
    pub label1: WireLabel,
    /// Color of `label0`; the evaluator sees colors, never truth values.
    pub permute_bit: u8,
}

impl WireLabelPair {
    fn from_zero(label0: WireLabel, delta: &WireLabel) -> Self {
        WireLabelPair {
            label0,
            label1: label0.xor(delta),
            permute_bit: label0.color(),
        }
    }

    pub fn select(&self, bit: bool) -> WireLabel {
        if bit {
            self.label1
        } else {
            self.label0
        }
    }
}

/// Everything the evaluator receives apart from its own input labels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GarbledCircuit {
    pub width: u32,
    /// Label of the constant-zero carry input.
    pub carry_in: WireLabel,
    /// One 4-row table per AND gate, rows indexed by the input colors.
    pub and_tables: Vec<[WireLabel; 4]>,
    /// Output hashes for `false` and `true`.
    pub output_decoding: [WireLabel; 2],
}

/// Garbler-side state: the full circuit plus the input label map.
#[derive(Clone, Debug)]
pub struct GarbledComparator {
    circuit: GarbledCircuit,
    /// Label pairs for the evaluator's input `a` (least significant bit first).
    evaluator_inputs: Vec<WireLabelPair>,
    /// Label pairs for the garbler's input `b`.
    garbler_inputs: Vec<WireLabelPair>,
}

fn gate_hash(a: &WireLabel, b: &WireLabel, gate: u32) -> WireLabel {
    let mut h = Sha256::new();
    h.update(b"pem/and");
    h.update(a.0);
    h.update(b.0);
    h.update(gate.to_be_bytes());
    let d = h.finalize();
    WireLabel(d[..LABEL_BYTES].try_into().expect("digest is 32 bytes"))
}

fn output_hash(l: &WireLabel) -> WireLabel {
    let mut h = Sha256::new();
    h.update(b"pem/out");
    h.update(l.0);
    let d = h.finalize();
    WireLabel(d[..LABEL_BYTES].try_into().expect("digest is 32 bytes"))
}

fn check_width(width: u32) -> Result<()> {
    if width == 0 || width > MAX_WIDTH {
        return Err(PemError::Config(format!(
            "comparator width {width} outside [1, {MAX_WIDTH}]"
        )));
    }
    Ok(())
}

/// Garbles a fresh `width`-bit comparator computing `[a < b]`, where `a` is the
/// evaluator's input and `b` the garbler's.
pub fn garble_lt_circuit<R: RngCore + ?Sized>(width: u32, rng: &mut R) -> Result<GarbledComparator> {
    check_width(width)?;
    let mut delta = WireLabel::random(rng);
    delta.0[LABEL_BYTES - 1] |= 1;

    let evaluator_inputs: Vec<_> = (0..width)
        .map(|_| WireLabelPair::from_zero(WireLabel::random(rng), &delta))
        .collect();
    let garbler_inputs: Vec<_> = (0..width)
        .map(|_| WireLabelPair::from_zero(WireLabel::random(rng), &delta))
        .collect();

    let carry_in = WireLabel::random(rng);
    // zero-label of the running carry
    let mut carry0 = carry_in;
    let mut and_tables = Vec::with_capacity(width as usize);

    for i in 0..width as usize {
        // zero-labels; NOT is free: zero-label of !a is a's one-label
        let not_a0 = evaluator_inputs[i].label1;
        let x0 = not_a0.xor(&carry0);
        let y0 = garbler_inputs[i].label0.xor(&carry0);
        let z0 = WireLabel::random(rng);

        let mut table = [WireLabel::default(); 4];
        for vx in [false, true] {
            for vy in [false, true] {
                let lx = if vx { x0.xor(&delta) } else { x0 };
                let ly = if vy { y0.xor(&delta) } else { y0 };
                let lz = if vx && vy { z0.xor(&delta) } else { z0 };
                let row = usize::from(lx.color()) * 2 + usize::from(ly.color());
                table[row] = gate_hash(&lx, &ly, i as u32).xor(&lz);
            }
        }
        and_tables.push(table);
        carry0 = carry0.xor(&z0);
    }

    let output_decoding = [output_hash(&carry0), output_hash(&carry0.xor(&delta))];
    Ok(GarbledComparator {
        circuit: GarbledCircuit {
            width,
            carry_in,
            and_tables,
            output_decoding,
        },
        evaluator_inputs,
        garbler_inputs,
    })
}

fn bits_of(v: u128, width: u32) -> impl Iterator<Item = bool> {
    (0..width).map(move |i| (v >> i) & 1 == 1)
}

pub fn check_fits(v: u128, width: u32) -> Result<()> {
    if width < 128 && v >> width != 0 {
        return Err(PemError::Sizing(format!("value needs more than {width} bits")));
    }
    Ok(())
}

impl GarbledComparator {
    pub fn width(&self) -> u32 {
        self.circuit.width
    }

    pub fn circuit(&self) -> &GarbledCircuit {
        &self.circuit
    }

    /// Label pairs the evaluator obtains one of per bit through oblivious transfer.
    pub fn evaluator_label_pairs(&self) -> &[WireLabelPair] {
        &self.evaluator_inputs
    }

    /// Labels encoding the garbler's own input, sent in the clear.
    pub fn garbler_input_labels(&self, b: u128) -> Result<Vec<WireLabel>> {
        check_fits(b, self.width())?;
        Ok(self
            .garbler_inputs
            .iter()
            .zip(bits_of(b, self.width()))
            .map(|(pair, bit)| pair.select(bit))
            .collect())
    }

    /// Evaluator labels for a known input; used by tests and the in-process driver.
    pub fn evaluator_input_labels(&self, a: u128) -> Result<Vec<WireLabel>> {
        check_fits(a, self.width())?;
        Ok(self
            .evaluator_inputs
            .iter()
            .zip(bits_of(a, self.width()))
            .map(|(pair, bit)| pair.select(bit))
            .collect())
    }
}

impl GarbledCircuit {
    /// Evaluates on one label per input wire and decodes the output bit.
    pub fn evaluate(&self, evaluator: &[WireLabel], garbler: &[WireLabel]) -> Result<bool> {
        let w = self.width as usize;
        if evaluator.len() != w || garbler.len() != w || self.and_tables.len() != w {
            return Err(PemError::Protocol(format!(
                "comparator expects {w} labels per party and {w} tables"
            )));
        }
        let mut carry = self.carry_in;
        for i in 0..w {
            let x = evaluator[i].xor(&carry);
            let y = garbler[i].xor(&carry);
            let row = usize::from(x.color()) * 2 + usize::from(y.color());
            let z = gate_hash(&x, &y, i as u32).xor(&self.and_tables[i][row]);
            carry = carry.xor(&z);
        }
        let h = output_hash(&carry);
        if h == self.output_decoding[0] {
            Ok(false)
        } else if h == self.output_decoding[1] {
            Ok(true)
        } else {
            Err(PemError::Decode)
        }
    }

    /// Serialized size: width, carry label, tables, decoding.
    pub fn encoded_len(&self) -> usize {
        4 + LABEL_BYTES + 4 + self.and_tables.len() * 4 * LABEL_BYTES + 2 * LABEL_BYTES
    }

    pub fn write_to(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.width.to_be_bytes());
        out.extend_from_slice(&self.carry_in.0);
        out.extend_from_slice(&(self.and_tables.len() as u32).to_be_bytes());
        for t in &self.and_tables {
            for row in t {
                out.extend_from_slice(&row.0);
            }
        }
        for d in &self.output_decoding {
            out.extend_from_slice(&d.0);
        }
    }

    pub fn read_from(bytes: &[u8]) -> Result<(Self, &[u8])> {
        let mut cur = crate::wire::Reader::new(bytes);
        let width = cur.u32()?;
        check_width(width).map_err(|e| PemError::Wire(e.to_string()))?;
        let carry_in = WireLabel(cur.array()?);
        let count = cur.u32()? as usize;
        if count != width as usize {
            return Err(PemError::Wire("table count does not match width".into()));
        }
        let mut and_tables = Vec::with_capacity(count);
        for _ in 0..count {
            let mut t = [WireLabel::default(); 4];
            for row in t.iter_mut() {
                *row = WireLabel(cur.array()?);
            }
            and_tables.push(t);
        }
        let output_decoding = [WireLabel(cur.array()?), WireLabel(cur.array()?)];
        Ok((
            GarbledCircuit {
                width,
                carry_in,
                and_tables,
                output_decoding,
            },
            cur.rest(),
        ))
    }
}

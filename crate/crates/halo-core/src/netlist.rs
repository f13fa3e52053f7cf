//! Gate-level model of an 8-bit signed MAC unit.
//!
//! The netlist is a Baugh-Wooley 8x8 signed array multiplier feeding a 32-bit
//! ripple-carry accumulator, built as a topologically ordered DAG of simple
//! gates with integer picosecond delays. Two simulation paths exist: a
//! combinational settle (topological sweep) and an event-driven transition
//! simulator that reports settling time of the primary outputs and weighted
//! net toggle counts.

use std::collections::BTreeMap;

pub type NetId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum GateKind {
    And,
    Or,
    Xor,
    Not,
    Nand,
    FullAdderSum,
    FullAdderCarry,
}

#[derive(Debug, Clone)]
pub struct Gate {
    pub kind: GateKind,
    pub inputs: Vec<NetId>,
    pub output: NetId,
    /// Propagation delay in picoseconds. Strictly positive.
    pub delay_ps: u32,
    /// Relative switching-energy weight of a toggle on this gate's output.
    pub energy_weight: f64,
}

impl Gate {
    fn eval(&self, v: &[bool]) -> bool {
        let a = v[self.inputs[0]];
        match self.kind {
            GateKind::Not => !a,
            GateKind::And => a && v[self.inputs[1]],
            GateKind::Or => a || v[self.inputs[1]],
            GateKind::Nand => !(a && v[self.inputs[1]]),
            GateKind::Xor => a ^ v[self.inputs[1]],
            GateKind::FullAdderSum => a ^ v[self.inputs[1]] ^ v[self.inputs[2]],
            GateKind::FullAdderCarry => {
                let b = v[self.inputs[1]];
                let c = v[self.inputs[2]];
                (a && b) || (a && c) || (b && c)
            }
        }
    }
}

/// Per-kind gate delays in picoseconds.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct GateDelays {
    pub not_ps: u32,
    pub and_ps: u32,
    pub or_ps: u32,
    pub nand_ps: u32,
    pub xor_ps: u32,
    pub fa_sum_ps: u32,
    pub fa_carry_ps: u32,
}

impl Default for GateDelays {
    fn default() -> Self {
        GateDelays {
            not_ps: 1,
            and_ps: 1,
            or_ps: 1,
            nand_ps: 1,
            xor_ps: 2,
            fa_sum_ps: 2,
            fa_carry_ps: 2,
        }
    }
}

impl GateDelays {
    fn for_kind(&self, kind: GateKind) -> u32 {
        match kind {
            GateKind::Not => self.not_ps,
            GateKind::And => self.and_ps,
            GateKind::Or => self.or_ps,
            GateKind::Nand => self.nand_ps,
            GateKind::Xor => self.xor_ps,
            GateKind::FullAdderSum => self.fa_sum_ps,
            GateKind::FullAdderCarry => self.fa_carry_ps,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GateNetlist {
    pub gates: Vec<Gate>,
    pub net_count: usize,
    pub weight_bits: [NetId; 8],
    pub activation_bits: [NetId; 8],
    pub accumulator_bits: [NetId; 32],
    pub primary_outputs: [NetId; 32],
    /// net -> indices of gates reading it.
    fanout: Vec<Vec<u32>>,
}

struct Builder {
    gates: Vec<Gate>,
    net_count: usize,
    delays: GateDelays,
}

impl Builder {
    fn new_net(&mut self) -> NetId {
        let id = self.net_count;
        self.net_count += 1;
        id
    }

    fn gate(&mut self, kind: GateKind, inputs: Vec<NetId>) -> NetId {
        let output = self.new_net();
        self.gates.push(Gate {
            kind,
            inputs,
            output,
            delay_ps: self.delays.for_kind(kind),
            energy_weight: 1.0,
        });
        output
    }

    fn full_adder(&mut self, a: NetId, b: NetId, c: NetId) -> (NetId, NetId) {
        let sum = self.gate(GateKind::FullAdderSum, vec![a, b, c]);
        let carry = self.gate(GateKind::FullAdderCarry, vec![a, b, c]);
        (sum, carry)
    }

    fn half_adder(&mut self, a: NetId, b: NetId) -> (NetId, NetId) {
        let sum = self.gate(GateKind::Xor, vec![a, b]);
        let carry = self.gate(GateKind::And, vec![a, b]);
        (sum, carry)
    }

    /// Adds an operand row (consecutive bits starting at `offset`) into the
    /// running partial sum with a ripple-carry chain, propagating the carry to
    /// the top of the sum. Overflow past the sum width is dropped.
    fn ripple_add_row(&mut self, sum: &mut [NetId], row: &[NetId], offset: usize) {
        let width = sum.len();
        let mut carry: Option<NetId> = None;
        for (k, &bit) in row.iter().enumerate() {
            let pos = offset + k;
            if pos >= width {
                break;
            }
            match carry {
                None => {
                    let (s, c) = self.half_adder(sum[pos], bit);
                    sum[pos] = s;
                    carry = Some(c);
                }
                Some(cin) => {
                    let (s, c) = self.full_adder(sum[pos], bit, cin);
                    sum[pos] = s;
                    carry = Some(c);
                }
            }
        }
        let mut pos = offset + row.len();
        while let Some(cin) = carry {
            if pos >= width {
                break;
            }
            let (s, c) = self.half_adder(sum[pos], cin);
            sum[pos] = s;
            carry = Some(c);
            pos += 1;
        }
    }
}

/// Builds the default MAC netlist: Baugh-Wooley signed 8x8 multiplier plus a
/// 32-bit accumulator add, computing `y = w * a + acc` mod 2^32.
pub fn build_default_mac_netlist() -> GateNetlist {
    build_mac_netlist(GateDelays::default())
}

pub fn build_mac_netlist(delays: GateDelays) -> GateNetlist {
    let mut b = Builder {
        gates: Vec::new(),
        net_count: 0,
        delays,
    };

    let mut weight_bits = [0; 8];
    let mut activation_bits = [0; 8];
    let mut accumulator_bits = [0; 32];
    for slot in weight_bits.iter_mut() {
        *slot = b.new_net();
    }
    for slot in activation_bits.iter_mut() {
        *slot = b.new_net();
    }
    for slot in accumulator_bits.iter_mut() {
        *slot = b.new_net();
    }

    // Constant nets: XOR(x, x) is identically 0 regardless of x.
    let const0 = b.gate(GateKind::Xor, vec![weight_bits[0], weight_bits[0]]);
    let const1 = b.gate(GateKind::Not, vec![const0]);

    // Baugh-Wooley array multiplier: partial-product rows are folded into the
    // running sum one after another with ripple-carry adders, so switching
    // activity entering at a low-order weight bit traverses every later row.
    // Correction constants land at bits 8 and 15.
    let mut product: Vec<NetId> = vec![const0; 16];
    product[8] = const1;
    product[15] = const1;

    for i in 0..7 {
        let mut row = Vec::with_capacity(8);
        for j in 0..7 {
            row.push(b.gate(GateKind::And, vec![weight_bits[i], activation_bits[j]]));
        }
        row.push(b.gate(GateKind::Nand, vec![weight_bits[i], activation_bits[7]]));
        b.ripple_add_row(&mut product, &row, i);
    }
    let mut sign_row = Vec::with_capacity(8);
    for j in 0..7 {
        sign_row.push(b.gate(GateKind::Nand, vec![weight_bits[7], activation_bits[j]]));
    }
    sign_row.push(b.gate(GateKind::And, vec![weight_bits[7], activation_bits[7]]));
    b.ripple_add_row(&mut product, &sign_row, 7);

    // Sign-extend the product to 32 bits and add the accumulator with a
    // ripple-carry chain.
    let sign = product[15];
    let mut primary_outputs = [0; 32];
    let mut carry: Option<NetId> = None;
    for i in 0..32 {
        let p = if i < 16 { product[i] } else { sign };
        match carry {
            None => {
                let (s, c) = b.half_adder(p, accumulator_bits[i]);
                primary_outputs[i] = s;
                carry = Some(c);
            }
            Some(cin) => {
                let (s, c) = b.full_adder(p, accumulator_bits[i], cin);
                primary_outputs[i] = s;
                carry = Some(c);
            }
        }
    }

    let mut fanout = vec![Vec::new(); b.net_count];
    for (gi, g) in b.gates.iter().enumerate() {
        for &n in &g.inputs {
            fanout[n].push(gi as u32);
        }
    }
    for list in fanout.iter_mut() {
        list.dedup();
    }

    GateNetlist {
        gates: b.gates,
        net_count: b.net_count,
        weight_bits,
        activation_bits,
        accumulator_bits,
        primary_outputs,
        fanout,
    }
}

impl GateNetlist {
    /// Scales every gate's energy weight; used by the linearity checks and by
    /// callers substituting relative per-gate energy data.
    pub fn scale_energy_weights(&mut self, factor: f64) {
        for g in &mut self.gates {
            g.energy_weight *= factor;
        }
    }

    fn apply_inputs(&self, values: &mut [bool], w: i8, a: i8, acc: i32) {
        let wb = w as u8;
        let ab = a as u8;
        let accb = acc as u32;
        for i in 0..8 {
            values[self.weight_bits[i]] = (wb >> i) & 1 == 1;
            values[self.activation_bits[i]] = (ab >> i) & 1 == 1;
        }
        for i in 0..32 {
            values[self.accumulator_bits[i]] = (accb >> i) & 1 == 1;
        }
    }

    /// Settles the circuit combinationally (gates are in topological order).
    pub fn settle(&self, w: i8, a: i8, acc: i32) -> Vec<bool> {
        let mut values = vec![false; self.net_count];
        self.apply_inputs(&mut values, w, a, acc);
        for g in &self.gates {
            values[g.output] = g.eval(&values);
        }
        values
    }

    fn read_outputs(&self, values: &[bool]) -> i32 {
        let mut out: u32 = 0;
        for i in 0..32 {
            if values[self.primary_outputs[i]] {
                out |= 1 << i;
            }
        }
        out as i32
    }

    /// Evaluates `w * a + acc` through the gate network.
    pub fn evaluate(&self, w: i8, a: i8, acc: i32) -> i32 {
        let values = self.settle(w, a, acc);
        self.read_outputs(&values)
    }

    /// Event-driven transition simulation with transport delays.
    ///
    /// `values` must hold a settled state. The activation inputs are switched
    /// to `a_next` at t=0 and events are propagated in time order. Returns the
    /// time of the last primary-output change and the energy-weighted count of
    /// driven-net toggles (glitches included). `values` holds the new settled
    /// state on return.
    pub fn transition(&self, values: &mut [bool], a_next: i8) -> TransitionStats {
        let ab = a_next as u8;
        // time -> (net, new value), applied in push order within a bucket.
        let mut queue: BTreeMap<u32, Vec<(NetId, bool)>> = BTreeMap::new();
        let mut initial = Vec::new();
        for i in 0..8 {
            let bit = (ab >> i) & 1 == 1;
            if values[self.activation_bits[i]] != bit {
                initial.push((self.activation_bits[i], bit));
            }
        }
        if initial.is_empty() {
            return TransitionStats::default();
        }
        queue.insert(0, initial);

        let mut is_output = vec![false; self.net_count];
        for &n in &self.primary_outputs {
            is_output[n] = true;
        }
        let driver: Vec<Option<u32>> = {
            let mut d = vec![None; self.net_count];
            for (gi, g) in self.gates.iter().enumerate() {
                d[g.output] = Some(gi as u32);
            }
            d
        };

        let mut stats = TransitionStats::default();
        let mut touched: Vec<u32> = Vec::new();
        let mut seen = vec![false; self.gates.len()];
        while let Some((&t, _)) = queue.iter().next() {
            let changes = queue.remove(&t).unwrap();
            touched.clear();
            for (net, val) in changes {
                if values[net] == val {
                    continue;
                }
                values[net] = val;
                if let Some(gi) = driver[net] {
                    stats.weighted_toggles += self.gates[gi as usize].energy_weight;
                }
                if is_output[net] {
                    stats.settle_time_ps = stats.settle_time_ps.max(t);
                }
                for &gi in &self.fanout[net] {
                    if !seen[gi as usize] {
                        seen[gi as usize] = true;
                        touched.push(gi);
                    }
                }
            }
            for &gi in &touched {
                seen[gi as usize] = false;
            }
            touched.sort_unstable();
            for &gi in &touched {
                let g = &self.gates[gi as usize];
                let new_val = g.eval(values);
                // Transport delay: schedule unconditionally; a no-op event is
                // filtered on application and does not propagate.
                queue
                    .entry(t + g.delay_ps)
                    .or_default()
                    .push((g.output, new_val));
            }
        }
        stats
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct TransitionStats {
    /// Time of the last primary-output change; 0 if outputs never moved.
    pub settle_time_ps: u32,
    /// Energy-weighted count of driven-net value changes.
    pub weighted_toggles: f64,
}

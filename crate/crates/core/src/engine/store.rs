use bitvec::prelude::*;

use crate::codec::Bits;
use crate::error::{CdcError, Result};

/// How a node came to hold an intermediate value.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    Absent,
    /// Computed by the node's own Map tasks.
    Local,
    /// Recovered from shuffle messages.
    Decoded,
}

/// One node's intermediate values, a dense `Q x N-bar` grid of `T`-bit slots.
#[derive(Clone, Debug)]
pub struct NodeStore {
    bits: Bits,
    provenance: Vec<Provenance>,
}

/// Every node's intermediate values.
#[derive(Clone, Debug)]
pub struct IntermediateStore {
    functions: usize,
    files: usize,
    value_bits: usize,
    nodes: Vec<NodeStore>,
}

impl IntermediateStore {
    pub fn new(nodes: usize, functions: usize, files: usize, value_bits: usize) -> Self {
        let node = Self::empty_node(functions, files, value_bits);
        Self {
            functions,
            files,
            value_bits,
            nodes: vec![node; nodes],
        }
    }

    pub(crate) fn from_nodes(
        functions: usize,
        files: usize,
        value_bits: usize,
        nodes: Vec<NodeStore>,
    ) -> Self {
        Self {
            functions,
            files,
            value_bits,
            nodes,
        }
    }

    pub(crate) fn empty_node(functions: usize, files: usize, value_bits: usize) -> NodeStore {
        NodeStore {
            bits: Bits::repeat(false, functions * files * value_bits),
            provenance: vec![Provenance::Absent; functions * files],
        }
    }

    pub fn nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn functions(&self) -> usize {
        self.functions
    }

    /// N-bar.
    pub fn files(&self) -> usize {
        self.files
    }

    pub fn value_bits(&self) -> usize {
        self.value_bits
    }

    fn slot(&self, function: usize, file: usize) -> usize {
        debug_assert!((1..=self.functions).contains(&function));
        debug_assert!((1..=self.files).contains(&file));
        (function - 1) * self.files + (file - 1)
    }

    pub fn provenance(&self, node: usize, function: usize, file: usize) -> Provenance {
        self.nodes[node - 1].provenance[self.slot(function, file)]
    }

    pub fn holds(&self, node: usize, function: usize, file: usize) -> bool {
        self.provenance(node, function, file) != Provenance::Absent
    }

    pub fn get(&self, node: usize, function: usize, file: usize) -> Option<&BitSlice<u8, Msb0>> {
        let i = self.slot(function, file);
        let n = &self.nodes[node - 1];
        (n.provenance[i] != Provenance::Absent)
            .then(|| &n.bits[i * self.value_bits..(i + 1) * self.value_bits])
    }

    pub fn require(
        &self,
        node: usize,
        function: usize,
        file: usize,
    ) -> Result<&BitSlice<u8, Msb0>> {
        self.get(node, function, file)
            .ok_or(CdcError::MissingValue {
                node,
                function,
                file,
            })
    }

    pub fn put(
        &mut self,
        node: usize,
        function: usize,
        file: usize,
        value: &BitSlice<u8, Msb0>,
        provenance: Provenance,
    ) -> Result<()> {
        let i = self.slot(function, file);
        let t = self.value_bits;
        self.nodes[node - 1].put(i, t, value, provenance)
    }

    /// Flips one bit of a held value; used to check that verification notices.
    pub fn flip_bit(
        &mut self,
        node: usize,
        function: usize,
        file: usize,
        bit: usize,
    ) -> Result<()> {
        let i = self.slot(function, file);
        let t = self.value_bits;
        let n = &mut self.nodes[node - 1];
        if n.provenance[i] == Provenance::Absent || bit >= t {
            return Err(CdcError::MissingValue {
                node,
                function,
                file,
            });
        }
        let pos = i * t + bit;
        let old = n.bits[pos];
        n.bits.set(pos, !old);
        Ok(())
    }

    /// How many values of `function` node `node` holds with the given provenance.
    pub fn count(&self, node: usize, function: usize, provenance: Provenance) -> usize {
        let lo = self.slot(function, 1);
        self.nodes[node - 1].provenance[lo..lo + self.files]
            .iter()
            .filter(|&&p| p == provenance)
            .count()
    }
}

impl NodeStore {
    pub(crate) fn put(
        &mut self,
        slot: usize,
        value_bits: usize,
        value: &BitSlice<u8, Msb0>,
        provenance: Provenance,
    ) -> Result<()> {
        if value.len() != value_bits {
            return Err(CdcError::Decode(format!(
                "value of {} bits written to a {value_bits}-bit slot",
                value.len()
            )));
        }
        self.bits[slot * value_bits..(slot + 1) * value_bits].copy_from_bitslice(value);
        self.provenance[slot] = provenance;
        Ok(())
    }
}

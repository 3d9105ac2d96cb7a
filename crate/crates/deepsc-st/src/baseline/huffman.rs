//! Canonical Huffman coding over the text-token alphabet.

use std::collections::{BTreeMap, BinaryHeap, HashMap};
use std::cmp::Reverse;

use super::bits::BitVector;
use super::BaselineError;

/// A prefix-free codebook in canonical form: codes are fully determined by
/// the per-token lengths, so the `(token, length)` table is the shared
/// description both ends reconstruct from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HuffmanCodebook {
    /// token -> (code value, code length), code stored MSB-first
    codes: BTreeMap<char, (u32, u8)>,
    /// (length, code value) -> token
    decode: HashMap<(u8, u32), char>,
    max_len: u8,
}

impl HuffmanCodebook {
    /// Builds an optimal prefix code from token counts. Ties are broken by
    /// token order so the result is deterministic; a single-token alphabet
    /// gets a 1-bit code.
    pub fn build(frequencies: &BTreeMap<char, u64>) -> Result<Self, BaselineError> {
        let positive: Vec<(char, u64)> = frequencies
            .iter()
            .filter(|(_, &c)| c > 0)
            .map(|(&t, &c)| (t, c))
            .collect();
        if positive.is_empty() {
            return Err(BaselineError::EmptyFrequencies);
        }
        if positive.len() == 1 {
            let mut lengths = BTreeMap::new();
            lengths.insert(positive[0].0, 1u8);
            return Ok(Self::from_lengths(&lengths));
        }
        // heap entries: (count, tie sequence, node index); leaves enter in
        // token order, merges in creation order
        #[derive(Debug)]
        enum Node {
            Leaf(char),
            Merge(usize, usize),
        }
        let mut nodes: Vec<Node> = Vec::new();
        let mut heap: BinaryHeap<Reverse<(u64, usize, usize)>> = BinaryHeap::new();
        let mut seq = 0usize;
        for (t, c) in &positive {
            nodes.push(Node::Leaf(*t));
            heap.push(Reverse((*c, seq, nodes.len() - 1)));
            seq += 1;
        }
        while heap.len() > 1 {
            let Reverse((c1, _, n1)) = heap.pop().expect("len > 1");
            let Reverse((c2, _, n2)) = heap.pop().expect("len > 1");
            nodes.push(Node::Merge(n1, n2));
            heap.push(Reverse((c1 + c2, seq, nodes.len() - 1)));
            seq += 1;
        }
        let Reverse((_, _, root)) = heap.pop().expect("one root");
        let mut lengths = BTreeMap::new();
        let mut stack = vec![(root, 0u8)];
        while let Some((n, depth)) = stack.pop() {
            match &nodes[n] {
                Node::Leaf(t) => {
                    lengths.insert(*t, depth);
                }
                Node::Merge(a, b) => {
                    stack.push((*a, depth + 1));
                    stack.push((*b, depth + 1));
                }
            }
        }
        Ok(Self::from_lengths(&lengths))
    }

    /// Reconstructs the canonical codebook from `(token, length)` pairs.
    pub fn from_lengths(lengths: &BTreeMap<char, u8>) -> Self {
        let mut order: Vec<(u8, char)> = lengths.iter().map(|(&t, &l)| (l, t)).collect();
        order.sort();
        let mut codes = BTreeMap::new();
        let mut decode = HashMap::new();
        let mut code = 0u32;
        let mut prev_len = 0u8;
        let mut max_len = 0u8;
        for (len, token) in order {
            code <<= len - prev_len;
            codes.insert(token, (code, len));
            decode.insert((len, code), token);
            max_len = max_len.max(len);
            code += 1;
            prev_len = len;
        }
        Self {
            codes,
            decode,
            max_len,
        }
    }

    /// `(token, length)` table for sharing the codebook.
    pub fn to_lengths(&self) -> Vec<(char, u8)> {
        self.codes.iter().map(|(&t, &(_, l))| (t, l)).collect()
    }

    pub fn code_len(&self, token: char) -> Option<u8> {
        self.codes.get(&token).map(|&(_, l)| l)
    }

    pub fn encode(&self, text: &str) -> Result<BitVector, BaselineError> {
        let mut bits = Vec::new();
        for t in text.chars() {
            let &(code, len) = self
                .codes
                .get(&t)
                .ok_or(BaselineError::TokenNotInCodebook(t))?;
            for i in (0..len).rev() {
                bits.push((code >> i) & 1 == 1);
            }
        }
        Ok(bits)
    }

    /// Decodes as much as possible. The flag is `true` when the stream ended
    /// exactly on a codeword boundary.
    pub fn decode(&self, bits: &[bool]) -> (String, bool) {
        let mut out = String::new();
        let mut code = 0u32;
        let mut len = 0u8;
        for &b in bits {
            code = (code << 1) | u32::from(b);
            len += 1;
            if let Some(&t) = self.decode.get(&(len, code)) {
                out.push(t);
                code = 0;
                len = 0;
            } else if len > self.max_len {
                return (out, false);
            }
        }
        (out, len == 0)
    }
}

/// Reference per-mille character counts for lowercase English text over the
/// 28 non-blank tokens. Used to build the shared default codebook.
pub fn english_frequencies() -> BTreeMap<char, u64> {
    let mut m = BTreeMap::new();
    for (c, f) in [
        ('a', 65u64),
        ('b', 12),
        ('c', 22),
        ('d', 34),
        ('e', 102),
        ('f', 18),
        ('g', 16),
        ('h', 49),
        ('i', 56),
        ('j', 2),
        ('k', 6),
        ('l', 32),
        ('m', 19),
        ('n', 54),
        ('o', 60),
        ('p', 15),
        ('q', 1),
        ('r', 48),
        ('s', 50),
        ('t', 73),
        ('u', 22),
        ('v', 8),
        ('w', 19),
        ('x', 2),
        ('y', 16),
        ('z', 1),
        ('\'', 2),
        (' ', 180),
    ] {
        m.insert(c, f);
    }
    m
}

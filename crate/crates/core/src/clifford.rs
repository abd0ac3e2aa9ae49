//! Exact single-qubit Clifford group machinery for randomized benchmarking.
//!
//! Group elements are represented as signed permutations of the Pauli axes
//! (the 24 octahedral rotations), so composition, inversion, and recovery
//! are integer-exact. The 2x2 unitaries are derived views, defined up to
//! global phase.

use num_complex::Complex64 as C64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Pauli axis indices: 0 = X, 1 = Y, 2 = Z.
const AXIS_Z: u8 = 2;

/// Action on the Pauli axes: entry `i` is the (axis, sign) image of axis `i`
/// under conjugation, `U sigma_i U^dag = sign * sigma_axis`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct AxisMap([(u8, i8); 3]);

impl AxisMap {
    const IDENTITY: AxisMap = AxisMap([(0, 1), (1, 1), (2, 1)]);

    /// `self` applied first, then `other`.
    fn then(&self, other: &AxisMap) -> AxisMap {
        let mut out = [(0u8, 0i8); 3];
        for (o, (mid, s1)) in out.iter_mut().zip(self.0) {
            let (fin, s2) = other.0[mid as usize];
            *o = (fin, s1 * s2);
        }
        AxisMap(out)
    }

    /// Whether the rotation carries the +z Bloch pole (|0>) to -z (|1>).
    fn ground_to_excited(&self) -> bool {
        let (axis, sign) = self.0[AXIS_Z as usize];
        axis == AXIS_Z && sign == -1
    }
}

type Mat2 = [[C64; 2]; 2];

fn mat_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = [[C64::new(0.0, 0.0); 2]; 2];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

/// |tr(A^dag B)| = 2 iff A and B are equal up to a global phase.
pub(crate) fn unitaries_equal_mod_phase(a: &Mat2, b: &Mat2) -> bool {
    let mut tr = C64::new(0.0, 0.0);
    for i in 0..2 {
        for k in 0..2 {
            tr += a[k][i].conj() * b[k][i];
        }
    }
    (tr.norm() - 2.0).abs() < 1e-9
}

/// The seven calibrated physical gates available to the compiler.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhysicalGate {
    I,
    XPi,
    XHalf,
    XHalfNeg,
    YPi,
    YHalf,
    YHalfNeg,
}

impl PhysicalGate {
    pub const ALL: [PhysicalGate; 7] = [
        PhysicalGate::I,
        PhysicalGate::XPi,
        PhysicalGate::XHalf,
        PhysicalGate::XHalfNeg,
        PhysicalGate::YPi,
        PhysicalGate::YHalf,
        PhysicalGate::YHalfNeg,
    ];

    /// Gates the compiler searches over; identity never shortens a word.
    const COMPILE_SET: [PhysicalGate; 6] = [
        PhysicalGate::XPi,
        PhysicalGate::XHalf,
        PhysicalGate::XHalfNeg,
        PhysicalGate::YPi,
        PhysicalGate::YHalf,
        PhysicalGate::YHalfNeg,
    ];

    fn axis_map(&self) -> AxisMap {
        // conventions follow U(theta) = exp(-i theta sigma/2)
        match self {
            PhysicalGate::I => AxisMap::IDENTITY,
            PhysicalGate::XPi => AxisMap([(0, 1), (1, -1), (2, -1)]),
            PhysicalGate::XHalf => AxisMap([(0, 1), (2, 1), (1, -1)]),
            PhysicalGate::XHalfNeg => AxisMap([(0, 1), (2, -1), (1, 1)]),
            PhysicalGate::YPi => AxisMap([(0, -1), (1, 1), (2, -1)]),
            PhysicalGate::YHalf => AxisMap([(2, -1), (1, 1), (0, 1)]),
            PhysicalGate::YHalfNeg => AxisMap([(2, 1), (1, 1), (0, -1)]),
        }
    }

    fn unitary(&self) -> Mat2 {
        let c = std::f64::consts::FRAC_1_SQRT_2;
        let zero = C64::new(0.0, 0.0);
        let one = C64::new(1.0, 0.0);
        match self {
            PhysicalGate::I => [[one, zero], [zero, one]],
            PhysicalGate::XPi => [[zero, C64::new(0.0, -1.0)], [C64::new(0.0, -1.0), zero]],
            PhysicalGate::XHalf => {
                [[C64::new(c, 0.0), C64::new(0.0, -c)], [C64::new(0.0, -c), C64::new(c, 0.0)]]
            }
            PhysicalGate::XHalfNeg => {
                [[C64::new(c, 0.0), C64::new(0.0, c)], [C64::new(0.0, c), C64::new(c, 0.0)]]
            }
            PhysicalGate::YPi => [[zero, C64::new(-1.0, 0.0)], [one, zero]],
            PhysicalGate::YHalf => {
                [[C64::new(c, 0.0), C64::new(-c, 0.0)], [C64::new(c, 0.0), C64::new(c, 0.0)]]
            }
            PhysicalGate::YHalfNeg => {
                [[C64::new(c, 0.0), C64::new(c, 0.0)], [C64::new(-c, 0.0), C64::new(c, 0.0)]]
            }
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            PhysicalGate::I => "I",
            PhysicalGate::XPi => "X_pi",
            PhysicalGate::XHalf => "X_pi/2",
            PhysicalGate::XHalfNeg => "X_-pi/2",
            PhysicalGate::YPi => "Y_pi",
            PhysicalGate::YHalf => "Y_pi/2",
            PhysicalGate::YHalfNeg => "Y_-pi/2",
        }
    }
}

struct GroupTables {
    #[cfg_attr(not(test), allow(dead_code))]
    maps: Vec<AxisMap>,
    unitaries: Vec<Mat2>,
    compose: [[u8; 24]; 24],
    inverse: [u8; 24],
    ground_to_excited: [bool; 24],
    decompose: Vec<Vec<PhysicalGate>>,
    gate_index: [u8; 7],
}

static TABLES: OnceLock<GroupTables> = OnceLock::new();

fn tables() -> &'static GroupTables {
    TABLES.get_or_init(build_tables)
}

fn build_tables() -> GroupTables {
    // Breadth-first closure over two quarter-turn generators fixes the
    // canonical indexing, with the identity discovered first at index 0.
    let generators = [PhysicalGate::XHalf, PhysicalGate::YHalf];
    let mut maps: Vec<AxisMap> = vec![AxisMap::IDENTITY];
    let mut unitaries: Vec<Mat2> = vec![PhysicalGate::I.unitary()];
    let mut head = 0;
    while head < maps.len() {
        let current = maps[head];
        let current_u = unitaries[head];
        for g in generators {
            let next = current.then(&g.axis_map());
            if !maps.contains(&next) {
                maps.push(next);
                unitaries.push(mat_mul(&g.unitary(), &current_u));
            }
        }
        head += 1;
    }
    assert_eq!(maps.len(), 24, "single-qubit Clifford group has 24 elements");

    let index_of = |m: &AxisMap| -> u8 {
        maps.iter().position(|x| x == m).expect("group is closed") as u8
    };

    let mut compose = [[0u8; 24]; 24];
    for (a, ma) in maps.iter().enumerate() {
        for (b, mb) in maps.iter().enumerate() {
            compose[a][b] = index_of(&ma.then(mb));
        }
    }
    let mut inverse = [0u8; 24];
    for a in 0..24 {
        inverse[a] = (0..24)
            .find(|&b| compose[a][b as usize] == 0)
            .expect("every element has an inverse") as u8;
    }
    let mut ground_to_excited = [false; 24];
    for (a, m) in maps.iter().enumerate() {
        ground_to_excited[a] = m.ground_to_excited();
    }

    // Shortest-word compilation table over the six non-identity gates,
    // enumerated in a fixed order so the table is deterministic. Exhaustive
    // search to depth 3 covers all 24 elements.
    let mut decompose: Vec<Option<Vec<PhysicalGate>>> = vec![None; 24];
    decompose[0] = Some(vec![PhysicalGate::I]);
    let mut frontier: Vec<(AxisMap, Vec<PhysicalGate>)> = vec![(AxisMap::IDENTITY, vec![])];
    for _depth in 0..3 {
        let mut next_frontier = Vec::new();
        for (m, word) in &frontier {
            for g in PhysicalGate::COMPILE_SET {
                let nm = m.then(&g.axis_map());
                let idx = index_of(&nm) as usize;
                let mut nw = word.clone();
                nw.push(g);
                if decompose[idx].is_none() {
                    decompose[idx] = Some(nw.clone());
                }
                next_frontier.push((nm, nw));
            }
        }
        frontier = next_frontier;
        if decompose.iter().all(Option::is_some) {
            break;
        }
    }
    let decompose: Vec<Vec<PhysicalGate>> =
        decompose.into_iter().map(|w| w.expect("depth 3 covers the group")).collect();

    // Verify the table recomposes correctly, axis map and unitary alike.
    for (idx, word) in decompose.iter().enumerate() {
        let mut m = AxisMap::IDENTITY;
        let mut u = PhysicalGate::I.unitary();
        for g in word {
            m = m.then(&g.axis_map());
            u = mat_mul(&g.unitary(), &u);
        }
        assert_eq!(m, maps[idx], "decompose table mismatch at {idx}");
        assert!(
            unitaries_equal_mod_phase(&u, &unitaries[idx]),
            "decompose unitary mismatch at {idx}"
        );
    }

    let mut gate_index = [0u8; 7];
    for (k, g) in PhysicalGate::ALL.iter().enumerate() {
        gate_index[k] = index_of(&g.axis_map());
    }

    GroupTables { maps, unitaries, compose, inverse, ground_to_excited, decompose, gate_index }
}

/// One of the 24 single-qubit Clifford group elements, by canonical index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CliffordElement(u8);

impl CliffordElement {
    pub const IDENTITY: CliffordElement = CliffordElement(0);

    pub fn from_index(index: u8) -> Result<Self> {
        if index >= 24 {
            return Err(Error::usage(format!("Clifford index {index} out of range 0..24")));
        }
        Ok(CliffordElement(index))
    }

    pub fn index(&self) -> u8 {
        self.0
    }

    pub fn all() -> impl Iterator<Item = CliffordElement> {
        (0..24).map(CliffordElement)
    }

    /// Group product: `self` applied first, then `other`.
    pub fn then(&self, other: CliffordElement) -> CliffordElement {
        CliffordElement(tables().compose[self.0 as usize][other.0 as usize])
    }

    pub fn inverse(&self) -> CliffordElement {
        CliffordElement(tables().inverse[self.0 as usize])
    }

    /// The 2x2 unitary view, defined up to global phase.
    pub fn unitary(&self) -> [[C64; 2]; 2] {
        tables().unitaries[self.0 as usize]
    }

    /// Whether this element maps |0> to |1> (up to phase).
    pub fn maps_ground_to_excited(&self) -> bool {
        tables().ground_to_excited[self.0 as usize]
    }

    /// Fixed compilation into at most three physical gates, applied in
    /// list order.
    pub fn decompose(&self) -> &'static [PhysicalGate] {
        &tables().decompose[self.0 as usize]
    }
}

impl From<PhysicalGate> for CliffordElement {
    fn from(gate: PhysicalGate) -> Self {
        let k = PhysicalGate::ALL.iter().position(|g| *g == gate).expect("gate is enumerated");
        CliffordElement(tables().gate_index[k])
    }
}

/// Compose a gate sequence in application order.
pub fn compose_sequence(sequence: &[CliffordElement]) -> CliffordElement {
    sequence.iter().fold(CliffordElement::IDENTITY, |acc, c| acc.then(*c))
}

/// The recovery gate: the lowest-index element C such that running the
/// sequence and then C carries |0> to |1>.
pub fn recovery_gate(sequence: &[CliffordElement]) -> CliffordElement {
    let product = compose_sequence(sequence);
    CliffordElement::all()
        .find(|c| product.then(*c).maps_ground_to_excited())
        .expect("four elements always satisfy the recovery condition")
}

/// Uniform draw over the 24 elements.
pub fn random_clifford<R: Rng + ?Sized>(rng: &mut R) -> CliffordElement {
    CliffordElement(rng.random_range(0..24u8))
}

/// Expected excited-state probability of the benchmarking decay model,
/// c1 + c2 p^N with the SPAM constants fixed by the readout errors:
/// c1 = (1 + eps0 - eps1)/2 and c2 = (1 - eps0 - eps1)/2.
pub fn depolarizing_prediction(p: f64, n: u64, eps0: f64, eps1: f64) -> f64 {
    let c1 = 0.5 * (1.0 + eps0 - eps1);
    let c2 = 0.5 * (1.0 - eps0 - eps1);
    c1 + c2 * p.powi(n as i32)
}

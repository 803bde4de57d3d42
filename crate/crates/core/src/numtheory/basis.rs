//! Random integral bases of a cubic field.
//!
//! The row vector `(theta, theta^2, 1)` is multiplied by a random word in the
//! generators of `SL(3, Z)`, normalized by its third component and reduced
//! mod 1. Entries grow exponentially with the word length, so all of this is
//! done with big integers.

use num_bigint::BigInt;
use num_traits::{One, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::cubic::{CubicField, CubicFieldElement};
use crate::error::{Error, Result};
use crate::map::FrequencyVector;
use crate::parallel::Execution;
use crate::rng::substream;

pub type IntMatrix = [[BigInt; 3]; 3];

/// Transvections generating `SL(3, Z)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Generator {
    /// `I + E12`
    E12,
    /// `I + E23`
    E23,
    /// `I + E31`
    E31,
    /// `I - E12`
    E12Inverse,
}

impl Generator {
    pub const ALL: [Generator; 4] = [Generator::E12, Generator::E23, Generator::E31, Generator::E12Inverse];

    pub fn matrix(self) -> IntMatrix {
        let mut m = identity();
        let (i, j, v) = match self {
            Generator::E12 => (0, 1, 1),
            Generator::E23 => (1, 2, 1),
            Generator::E31 => (2, 0, 1),
            Generator::E12Inverse => (0, 1, -1),
        };
        m[i][j] = BigInt::from(v);
        m
    }

    pub fn name(self) -> &'static str {
        match self {
            Generator::E12 => "E12",
            Generator::E23 => "E23",
            Generator::E31 => "E31",
            Generator::E12Inverse => "E12^-1",
        }
    }
}

pub fn identity() -> IntMatrix {
    std::array::from_fn(|i| std::array::from_fn(|j| if i == j { BigInt::one() } else { BigInt::zero() }))
}

pub fn mat_mul(a: &IntMatrix, b: &IntMatrix) -> IntMatrix {
    std::array::from_fn(|i| std::array::from_fn(|j| (0..3).map(|k| &a[i][k] * &b[k][j]).sum()))
}

pub fn determinant(m: &IntMatrix) -> BigInt {
    &m[0][0] * (&m[1][1] * &m[2][2] - &m[1][2] * &m[2][1]) - &m[0][1] * (&m[1][0] * &m[2][2] - &m[1][2] * &m[2][0])
        + &m[0][2] * (&m[1][0] * &m[2][1] - &m[1][1] * &m[2][0])
}

/// Product of `word_length` generators drawn uniformly.
pub fn random_word<R: Rng>(word_length: usize, rng: &mut R) -> (Vec<Generator>, IntMatrix) {
    let word: Vec<Generator> = (0..word_length)
        .map(|_| Generator::ALL[rng.random_range(0..Generator::ALL.len())])
        .collect();
    let m = word.iter().fold(identity(), |acc, g| mat_mul(&acc, &g.matrix()));
    (word, m)
}

#[derive(Debug, Clone)]
pub struct IntegralBasis {
    pub field: CubicField,
    pub word: Vec<Generator>,
    pub matrix: IntMatrix,
    pub exact: [CubicFieldElement; 2],
    pub omega: FrequencyVector,
}

const MAX_ATTEMPTS: usize = 64;

/// `(theta, theta^2, 1) * G` normalized by its third entry, reduced mod 1.
pub fn basis_vector(field: CubicField, matrix: &IntMatrix) -> Result<Option<[CubicFieldElement; 2]>> {
    // power-basis coefficients of theta, theta^2 and 1
    let row = [[0, 1, 0], [0, 0, 1], [1, 0, 0]].map(|c| CubicFieldElement::new(field, c));
    let v: Vec<CubicFieldElement> = (0..3)
        .map(|j| {
            (0..3).fold(CubicFieldElement::new(field, [0, 0, 0]), |acc, i| {
                &acc + &(&row[i] * &CubicFieldElement::from_integer(field, matrix[i][j].clone()))
            })
        })
        .collect();
    if v[2].is_zero() {
        return Ok(None);
    }
    let inv = v[2].inverse()?;
    Ok(Some([(&v[0] * &inv).fract(), (&v[1] * &inv).fract()]))
}

fn draw_basis<R: Rng>(field: CubicField, word_length: usize, rng: &mut R) -> Result<IntegralBasis> {
    for _ in 0..MAX_ATTEMPTS {
        let (word, matrix) = random_word(word_length, rng);
        if let Some(exact) = basis_vector(field, &matrix)? {
            let omega = FrequencyVector::new(exact[0].to_f64(), exact[1].to_f64());
            return Ok(IntegralBasis {
                field,
                word,
                matrix,
                exact,
                omega,
            });
        }
    }
    Err(Error::BasisRegeneration(MAX_ATTEMPTS))
}

/// One random basis vector for `field`.
pub fn random_integral_basis(field: CubicField, word_length: usize, seed: u64) -> Result<IntegralBasis> {
    draw_basis(field, word_length, &mut substream(seed, "integral-basis", 0))
}

/// `count` independent random bases; sample `i` uses substream `i`.
pub fn random_integral_bases(
    field: CubicField,
    word_length: usize,
    count: usize,
    seed: u64,
    exec: Execution,
) -> Result<Vec<IntegralBasis>> {
    exec.map_range(count, |i| draw_basis(field, word_length, &mut substream(seed, "integral-basis", i as u64)))
        .into_iter()
        .collect()
}

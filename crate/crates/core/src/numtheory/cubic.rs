//! Exact arithmetic in the cubic fields `Q(theta)` with `|D| < 50`.
//!
//! An element is `a + b theta + c theta^2` with rational coefficients, where
//! `theta^3 = k theta^2 + l theta + m`. Ordering queries (sign, floor) use an
//! isolating interval for `theta` with dyadic endpoints, bisected until the
//! answer is certain.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;
use std::sync::OnceLock;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::map::FrequencyVector;

/// The four real cubic fields used for rotation vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CubicField {
    /// `x^3 - x - 1`, the spiral mean `sigma`.
    Spiral,
    /// `x^3 - x^2 - 1`, root `kappa`.
    D31,
    /// `x^3 - x^2 - x - 1`, the tribonacci constant `tau`.
    D44,
    /// `x^3 + x^2 - 2x - 1`, `alpha = 2 cos(2 pi / 7)`.
    D49,
}

impl CubicField {
    pub const ALL: [CubicField; 4] = [CubicField::Spiral, CubicField::D31, CubicField::D44, CubicField::D49];

    /// `(k, l, m)` with `theta^3 = k theta^2 + l theta + m`.
    pub fn coefficients(self) -> (i64, i64, i64) {
        match self {
            CubicField::Spiral => (0, 1, 1),
            CubicField::D31 => (1, 0, 1),
            CubicField::D44 => (1, 1, 1),
            CubicField::D49 => (-1, 2, 1),
        }
    }

    pub fn discriminant(self) -> i64 {
        match self {
            CubicField::Spiral => -23,
            CubicField::D31 => -31,
            CubicField::D44 => -44,
            CubicField::D49 => 49,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CubicField::Spiral => "spiral",
            CubicField::D31 => "D31",
            CubicField::D44 => "D44",
            CubicField::D49 => "D49",
        }
    }

    /// The root in double precision.
    ///
    /// Each root is computed by a fixed closed form rather than rounded from
    /// the exact value. Tabulated constants downstream were produced this way,
    /// and for long approximant scans the last bit matters.
    pub fn root(self) -> f64 {
        match self {
            CubicField::Spiral => {
                let r = 69f64.sqrt();
                ((9.0 + r) / 18.0).cbrt() + ((9.0 - r) / 18.0).cbrt()
            }
            CubicField::D49 => 2.0 * (std::f64::consts::TAU / 7.0).cos(),
            CubicField::D31 | CubicField::D44 => {
                let (k, l, m) = self.coefficients();
                let (k, l, m) = (k as f64, l as f64, m as f64);
                let mut x = 1.5;
                for _ in 0..60 {
                    let p = ((x - k) * x - l) * x - m;
                    let dp = (3.0 * x - 2.0 * k) * x - l;
                    let next = x - p / dp;
                    if next == x {
                        break;
                    }
                    x = next;
                }
                x
            }
        }
    }

    fn poly_sign(self, x: &BigRational) -> std::cmp::Ordering {
        let (k, l, m) = self.coefficients();
        let v = ((x - BigRational::from_integer(k.into())) * x - BigRational::from_integer(l.into())) * x
            - BigRational::from_integer(m.into());
        v.cmp(&BigRational::zero())
    }

    /// Bisect `[lo, hi]` once, keeping the half that brackets the root.
    fn bisect(self, iv: &mut Interval) {
        let mid = (&iv.lo + &iv.hi) / BigRational::from_integer(2.into());
        // p(lo) < 0 < p(hi) for every field here
        match self.poly_sign(&mid) {
            std::cmp::Ordering::Less => iv.lo = mid,
            std::cmp::Ordering::Greater => iv.hi = mid,
            std::cmp::Ordering::Equal => unreachable!("irreducible cubic has no rational root"),
        }
    }

    /// Isolating interval of width `2^-96`, computed once per field.
    fn base_interval(self) -> &'static Interval {
        static CACHE: [OnceLock<Interval>; 4] = [OnceLock::new(), OnceLock::new(), OnceLock::new(), OnceLock::new()];
        let slot = match self {
            CubicField::Spiral => 0,
            CubicField::D31 => 1,
            CubicField::D44 => 2,
            CubicField::D49 => 3,
        };
        CACHE[slot].get_or_init(|| {
            // every intended root lies in [1, 2], and is the only root there
            let mut iv = Interval {
                lo: BigRational::one(),
                hi: BigRational::from_integer(2.into()),
            };
            for _ in 0..96 {
                self.bisect(&mut iv);
            }
            iv
        })
    }

    /// A rational interval known to contain `theta` and no other root.
    pub fn isolating_interval(self) -> (BigRational, BigRational) {
        let iv = self.base_interval();
        (iv.lo.clone(), iv.hi.clone())
    }

    pub fn theta(self) -> CubicFieldElement {
        CubicFieldElement::new(self, [0, 1, 0])
    }
}

impl fmt::Display for CubicField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CubicField {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "spiral" | "d23" | "d-23" | "-23" => Ok(CubicField::Spiral),
            "d31" | "d-31" | "-31" => Ok(CubicField::D31),
            "d44" | "d-44" | "-44" | "tribonacci" => Ok(CubicField::D44),
            "d49" | "49" => Ok(CubicField::D49),
            _ => Err(Error::UnknownField(s.to_string())),
        }
    }
}

#[derive(Debug, Clone)]
struct Interval {
    lo: BigRational,
    hi: BigRational,
}

/// `a + b theta + c theta^2` in one of the cubic fields.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CubicFieldElement {
    field: CubicField,
    coeffs: [BigRational; 3],
}

fn rat(v: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

impl CubicFieldElement {
    pub fn new(field: CubicField, coeffs: [i64; 3]) -> Self {
        CubicFieldElement {
            field,
            coeffs: coeffs.map(rat),
        }
    }

    pub fn from_rationals(field: CubicField, coeffs: [BigRational; 3]) -> Self {
        CubicFieldElement { field, coeffs }
    }

    pub fn from_integer(field: CubicField, v: BigInt) -> Self {
        CubicFieldElement {
            field,
            coeffs: [BigRational::from_integer(v), BigRational::zero(), BigRational::zero()],
        }
    }

    pub fn field(&self) -> CubicField {
        self.field
    }

    pub fn coefficients(&self) -> &[BigRational; 3] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(Zero::is_zero)
    }

    fn is_rational(&self) -> bool {
        self.coeffs[1].is_zero() && self.coeffs[2].is_zero()
    }

    /// Multiplicative inverse, by solving `self * x = 1` in the power basis.
    pub fn inverse(&self) -> Result<CubicFieldElement> {
        if self.is_zero() {
            return Err(Error::ZeroDivision);
        }
        let theta = self.field.theta();
        let col1 = self * &theta;
        let col2 = &col1 * &theta;
        // columns are self * 1, self * theta, self * theta^2
        let mut a = [[BigRational::zero(), BigRational::zero(), BigRational::zero()], [
            BigRational::zero(),
            BigRational::zero(),
            BigRational::zero(),
        ], [BigRational::zero(), BigRational::zero(), BigRational::zero()]];
        for (j, col) in [self, &col1, &col2].into_iter().enumerate() {
            for i in 0..3 {
                a[i][j] = col.coeffs[i].clone();
            }
        }
        let x = solve3(a, [rat(1), rat(0), rat(0)]).ok_or(Error::ZeroDivision)?;
        Ok(CubicFieldElement {
            field: self.field,
            coeffs: x,
        })
    }

    pub fn checked_div(&self, rhs: &CubicFieldElement) -> Result<CubicFieldElement> {
        Ok(self * &rhs.inverse()?)
    }

    /// Enclosure of the value for a given enclosure of `theta` (`theta > 0`).
    fn enclose(&self, iv: &Interval) -> (BigRational, BigRational) {
        let [a, b, c] = &self.coeffs;
        let lin = |coef: &BigRational, lo: &BigRational, hi: &BigRational| {
            if coef.is_negative() {
                (coef * hi, coef * lo)
            } else {
                (coef * lo, coef * hi)
            }
        };
        let (bl, bh) = lin(b, &iv.lo, &iv.hi);
        let (cl, ch) = lin(c, &(&iv.lo * &iv.lo), &(&iv.hi * &iv.hi));
        (a + bl + cl, a + bh + ch)
    }

    /// Refine until `accept(lo, hi)` returns a verdict.
    fn decide<T>(&self, mut accept: impl FnMut(&BigRational, &BigRational) -> Option<T>) -> T {
        let mut iv = self.field.base_interval().clone();
        loop {
            let (lo, hi) = self.enclose(&iv);
            if let Some(v) = accept(&lo, &hi) {
                return v;
            }
            for _ in 0..32 {
                self.field.bisect(&mut iv);
            }
        }
    }

    /// Exact sign (`-1`, `0` or `1`).
    pub fn signum(&self) -> i32 {
        if self.is_rational() {
            return match self.coeffs[0].cmp(&BigRational::zero()) {
                std::cmp::Ordering::Less => -1,
                std::cmp::Ordering::Equal => 0,
                std::cmp::Ordering::Greater => 1,
            };
        }
        // irrational, so never zero and refinement terminates
        self.decide(|lo, hi| {
            if lo.is_positive() {
                Some(1)
            } else if hi.is_negative() {
                Some(-1)
            } else {
                None
            }
        })
    }

    /// Exact floor.
    pub fn floor(&self) -> BigInt {
        if self.is_rational() {
            return self.coeffs[0].floor().to_integer();
        }
        self.decide(|lo, hi| {
            let fl = lo.floor();
            // hi < fl + 1 and the value is irrational, so it is in (fl, fl + 1)
            if *hi < &fl + BigRational::one() {
                Some(fl.to_integer())
            } else {
                None
            }
        })
    }

    /// Value rounded to double precision (within an ulp or so).
    pub fn to_f64(&self) -> f64 {
        if self.is_rational() {
            return self.coeffs[0].to_f64().unwrap_or(f64::NAN);
        }
        let (lo, hi) = self.decide(|lo, hi| {
            let width = hi - lo;
            let scale = lo.abs().max(hi.abs());
            // width below 2^-64 relative
            let bound = scale / BigRational::from_integer(BigInt::one() << 64u32);
            (width <= bound).then(|| (lo.clone(), hi.clone()))
        });
        let mid = (lo + hi) / rat(2);
        mid.to_f64().unwrap_or(f64::NAN)
    }

    /// `self - floor(self)`.
    pub fn fract(&self) -> CubicFieldElement {
        self - &CubicFieldElement::from_integer(self.field, self.floor())
    }

    pub fn pow(&self, n: u32) -> CubicFieldElement {
        let mut out = CubicFieldElement::new(self.field, [1, 0, 0]);
        for _ in 0..n {
            out = &out * self;
        }
        out
    }
}

fn solve3(mut a: [[BigRational; 3]; 3], mut b: [BigRational; 3]) -> Option<[BigRational; 3]> {
    for col in 0..3 {
        let pivot = (col..3).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, pivot);
        b.swap(col, pivot);
        for r in 0..3 {
            if r != col && !a[r][col].is_zero() {
                let f = &a[r][col] / &a[col][col];
                for c in col..3 {
                    let t = &f * &a[col][c];
                    a[r][c] -= t;
                }
                let t = &f * &b[col];
                b[r] -= t;
            }
        }
    }
    Some([&b[0] / &a[0][0], &b[1] / &a[1][1], &b[2] / &a[2][2]])
}

impl fmt::Display for CubicFieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c] = &self.coeffs;
        write!(f, "{a} + {b}θ + {c}θ²")
    }
}

fn same_field(x: &CubicFieldElement, y: &CubicFieldElement) {
    assert_eq!(x.field, y.field, "mixed cubic fields");
}

impl Add for &CubicFieldElement {
    type Output = CubicFieldElement;

    fn add(self, rhs: &CubicFieldElement) -> CubicFieldElement {
        same_field(self, rhs);
        CubicFieldElement {
            field: self.field,
            coeffs: [
                &self.coeffs[0] + &rhs.coeffs[0],
                &self.coeffs[1] + &rhs.coeffs[1],
                &self.coeffs[2] + &rhs.coeffs[2],
            ],
        }
    }
}

impl Sub for &CubicFieldElement {
    type Output = CubicFieldElement;

    fn sub(self, rhs: &CubicFieldElement) -> CubicFieldElement {
        same_field(self, rhs);
        CubicFieldElement {
            field: self.field,
            coeffs: [
                &self.coeffs[0] - &rhs.coeffs[0],
                &self.coeffs[1] - &rhs.coeffs[1],
                &self.coeffs[2] - &rhs.coeffs[2],
            ],
        }
    }
}

impl Neg for &CubicFieldElement {
    type Output = CubicFieldElement;

    fn neg(self) -> CubicFieldElement {
        CubicFieldElement {
            field: self.field,
            coeffs: [-&self.coeffs[0], -&self.coeffs[1], -&self.coeffs[2]],
        }
    }
}

impl Mul for &CubicFieldElement {
    type Output = CubicFieldElement;

    fn mul(self, rhs: &CubicFieldElement) -> CubicFieldElement {
        same_field(self, rhs);
        let [a1, b1, c1] = &self.coeffs;
        let [a2, b2, c2] = &rhs.coeffs;
        let e0 = a1 * a2;
        let e1 = a1 * b2 + b1 * a2;
        let e2 = a1 * c2 + b1 * b2 + c1 * a2;
        let e3 = b1 * c2 + c1 * b2;
        let e4 = c1 * c2;
        let (k, l, m) = self.field.coefficients();
        let (k, l, m) = (rat(k), rat(l), rat(m));
        // theta^3 = k theta^2 + l theta + m
        // theta^4 = (k^2 + l) theta^2 + (k l + m) theta + k m
        let a = e0 + &m * &e3 + &k * &m * &e4;
        let b = e1 + &l * &e3 + (&k * &l + &m) * &e4;
        let c = e2 + &k * &e3 + (&k * &k + &l) * &e4;
        CubicFieldElement {
            field: self.field,
            coeffs: [a, b, c],
        }
    }
}

/// A component of a tabulated rotation vector, in terms of the root.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RootExpr {
    /// `theta - 1`
    MinusOne,
    /// `1 / theta`
    Inverse,
    /// `1 / theta^2`
    InverseSquared,
    /// `theta^2 - 1`
    SquareMinusOne,
}

impl RootExpr {
    fn eval_f64(self, t: f64) -> f64 {
        match self {
            RootExpr::MinusOne => t - 1.0,
            RootExpr::Inverse => 1.0 / t,
            RootExpr::InverseSquared => 1.0 / (t * t),
            RootExpr::SquareMinusOne => t * t - 1.0,
        }
    }

    fn eval_exact(self, field: CubicField) -> CubicFieldElement {
        let theta = field.theta();
        match self {
            RootExpr::MinusOne => CubicFieldElement::new(field, [-1, 1, 0]),
            RootExpr::Inverse => theta.inverse().expect("theta is nonzero"),
            RootExpr::InverseSquared => theta.pow(2).inverse().expect("theta is nonzero"),
            RootExpr::SquareMinusOne => CubicFieldElement::new(field, [-1, 0, 1]),
        }
    }

    fn label(self, sym: &str) -> String {
        match self {
            RootExpr::MinusOne => format!("{sym}-1"),
            RootExpr::Inverse => format!("1/{sym}"),
            RootExpr::InverseSquared => format!("1/{sym}^2"),
            RootExpr::SquareMinusOne => format!("{sym}^2-1"),
        }
    }
}

/// A named rotation vector with components in a cubic field.
#[derive(Debug, Clone)]
pub struct FieldVector {
    pub field: CubicField,
    pub variant: &'static str,
    pub components: [RootExpr; 2],
    pub omega: FrequencyVector,
    pub exact: [CubicFieldElement; 2],
}

impl FieldVector {
    pub fn label(&self) -> String {
        let sym = match self.field {
            CubicField::Spiral => "sigma",
            CubicField::D31 => "kappa",
            CubicField::D44 => "tau",
            CubicField::D49 => "alpha",
        };
        format!("({}, {})", self.components[0].label(sym), self.components[1].label(sym))
    }
}

/// Tabulated variants per field. The first entry is the default.
fn variants(field: CubicField) -> &'static [(&'static str, [RootExpr; 2])] {
    use RootExpr::*;
    match field {
        CubicField::Spiral => &[("a", [MinusOne, Inverse]), ("b", [Inverse, MinusOne]), ("sq", [Inverse, InverseSquared])],
        CubicField::D31 => &[("a", [MinusOne, Inverse]), ("b", [Inverse, MinusOne])],
        CubicField::D44 => &[("a", [MinusOne, Inverse]), ("b", [Inverse, MinusOne])],
        CubicField::D49 => &[
            ("d", [SquareMinusOne, MinusOne]),
            ("a", [MinusOne, Inverse]),
            ("b", [Inverse, MinusOne]),
            ("c", [MinusOne, SquareMinusOne]),
        ],
    }
}

pub fn variant_names(field: CubicField) -> Vec<&'static str> {
    variants(field).iter().map(|v| v.0).collect()
}

/// The tabulated vector `variant` of `field` (`None` picks the default:
/// `(alpha^2-1, alpha-1)` for D49 and `(theta-1, 1/theta)` otherwise).
pub fn cubic_field_vector(field: CubicField, variant: Option<&str>) -> Result<FieldVector> {
    let table = variants(field);
    let &(name, components) = match variant {
        None => &table[0],
        Some(v) => table
            .iter()
            .find(|(n, _)| n.eq_ignore_ascii_case(v))
            .ok_or_else(|| Error::UnknownField(format!("{field} variant {v}")))?,
    };
    let t = field.root();
    Ok(FieldVector {
        field,
        variant: name,
        components,
        omega: FrequencyVector::new(components[0].eval_f64(t), components[1].eval_f64(t)),
        exact: components.map(|c| c.eval_exact(field)),
    })
}

/// Parse `field` or `field-variant`, e.g. `spiral-sq`, `D49`, `D44-b`.
pub fn named_vector(name: &str) -> Result<FieldVector> {
    match name.split_once('-') {
        Some((f, v)) if !f.is_empty() => cubic_field_vector(f.parse()?, Some(v)),
        _ => cubic_field_vector(name.parse()?, None),
    }
}

/// Every tabulated vector of every field.
pub fn all_field_vectors() -> Vec<FieldVector> {
    CubicField::ALL
        .iter()
        .flat_map(|&f| variants(f).iter().map(move |(v, _)| cubic_field_vector(f, Some(v)).expect("tabulated")))
        .collect()
}

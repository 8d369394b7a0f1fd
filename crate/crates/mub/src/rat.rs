//! Exact rational scalars and closed rational intervals.
//!
//! All certified arithmetic in the solver runs over `rug::Rational` with
//! closed intervals `[lo, hi]`; interval endpoints stay exact, so containment
//! is never lost to rounding.

use rug::ops::Pow;
use rug::{Integer, Rational};
use std::cmp::Ordering;

pub type Int = Integer;
pub type Rat = Rational;

/// Parses a decimal string ("-1.25e-3", "0.5", "7") or a fraction ("3/4").
pub fn rat_from_decimal(s: &str) -> Result<Rat, String> {
    let s = s.trim();
    if s.is_empty() {
        return Err("empty numeric string".into());
    }
    if s.contains('/') {
        return s
            .parse::<Rat>()
            .map_err(|e| format!("bad fraction {s:?}: {e}"));
    }
    let (mant, exp) = match s.find(['e', 'E']) {
        Some(i) => {
            let e: i64 = s[i + 1..]
                .parse()
                .map_err(|e| format!("bad exponent in {s:?}: {e}"))?;
            (&s[..i], e)
        }
        None => (s, 0),
    };
    let (int_part, frac_part) = match mant.find('.') {
        Some(i) => (&mant[..i], &mant[i + 1..]),
        None => (mant, ""),
    };
    let digits = format!("{int_part}{frac_part}");
    if digits.is_empty() || digits == "-" || digits == "+" {
        return Err(format!("bad numeric string {s:?}"));
    }
    let num: Int = digits
        .parse()
        .map_err(|e| format!("bad mantissa in {s:?}: {e}"))?;
    let shift = exp - frac_part.len() as i64;
    let mut r = Rat::from(num);
    match shift.cmp(&0) {
        Ordering::Greater => r *= Rat::from(Int::from(10).pow(shift as u32)),
        Ordering::Less => r /= Rat::from(Int::from(10).pow((-shift) as u32)),
        Ordering::Equal => {}
    }
    Ok(r)
}

/// Formats a rational as a decimal string with `digits` significant digits.
///
/// Exact when the value is a decimal fraction of that length; otherwise
/// rounded to nearest. No locale, no thousands separators.
pub fn rat_to_decimal(r: &Rat, digits: u32) -> String {
    if r.cmp0() == Ordering::Equal {
        return "0".into();
    }
    let neg = r.cmp0() == Ordering::Less;
    let a = Rat::from(r.clone().abs());
    // decimal exponent e with 10^e <= a < 10^(e+1)
    let mut e: i64 = 0;
    let ten = Rat::from(10);
    let mut t = a.clone();
    while t >= ten {
        t /= &ten;
        e += 1;
    }
    let one = Rat::from(1);
    while t < one {
        t *= &ten;
        e -= 1;
    }
    // mantissa m = round(a * 10^(digits-1-e)), an integer with `digits` digits
    let shift = digits as i64 - 1 - e;
    let mut scaled = a;
    match shift.cmp(&0) {
        Ordering::Greater => scaled *= Rat::from(Int::from(10).pow(shift as u32)),
        Ordering::Less => scaled /= Rat::from(Int::from(10).pow((-shift) as u32)),
        Ordering::Equal => {}
    }
    let m = scaled.round();
    let mut mi = m.numer().clone();
    // rounding can carry to digits+1 digits (e.g. 999.96 -> 1000.0)
    if mi.to_string().len() as u32 > digits {
        mi /= 10;
        e += 1;
    }
    let ms = mi.to_string();
    let sign = if neg { "-" } else { "" };
    format!("{sign}{}", place_point(&ms, e))
}

/// Lays out mantissa digits `ms` (value ms[0].ms[1..] × 10^e) as a decimal
/// string, plain when the exponent is moderate, otherwise in e-notation.
pub(crate) fn place_point(ms: &str, e: i64) -> String {
    let n = ms.len() as i64;
    if e >= 0 && e < n + 6 {
        // digits before the point: e+1
        let body = if e + 1 >= n {
            format!("{ms}{}", "0".repeat((e + 1 - n) as usize))
        } else {
            let s = format!("{}.{}", &ms[..(e + 1) as usize], &ms[(e + 1) as usize..]);
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        };
        body
    } else if e < 0 && e > -6 {
        let s = format!("0.{}{}", "0".repeat((-e - 1) as usize), ms);
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        let point = format!("{}.{}", &ms[..1], &ms[1..]);
        let body = point.trim_end_matches('0').trim_end_matches('.');
        format!("{body}e{e}")
    }
}

/// Nearest rational of the form m/10^k with `digits` significant decimal
/// digits. Zero stays zero.
pub fn round_sig(r: &Rat, digits: u32) -> Rat {
    if r.cmp0() == Ordering::Equal {
        return Rat::new();
    }
    let a = Rat::from(r.clone().abs());
    let ten = Rat::from(10);
    let one = Rat::from(1);
    let mut e: i64 = 0;
    let mut t = a.clone();
    while t >= ten {
        t /= &ten;
        e += 1;
    }
    while t < one {
        t *= &ten;
        e -= 1;
    }
    let shift = digits as i64 - 1 - e;
    let scale = Rat::from(Int::from(10).pow(shift.unsigned_abs() as u32));
    let mut scaled = a;
    if shift >= 0 {
        scaled *= &scale;
    } else {
        scaled /= &scale;
    }
    let mut out = Rat::from(scaled.round());
    if shift >= 0 {
        out /= &scale;
    } else {
        out *= &scale;
    }
    if r.cmp0() == Ordering::Less {
        out = -out;
    }
    out
}

/// `10^(-k)` as an exact rational.
pub fn pow10_neg(k: u32) -> Rat {
    Rat::from((Int::from(1), Int::from(10).pow(k)))
}

/// Closed interval with exact rational endpoints.
#[derive(Clone, Debug, PartialEq)]
pub struct RInt {
    pub lo: Rat,
    pub hi: Rat,
}

impl RInt {
    pub fn point(v: Rat) -> Self {
        RInt { lo: v.clone(), hi: v }
    }

    pub fn new(lo: Rat, hi: Rat) -> Self {
        debug_assert!(lo <= hi);
        RInt { lo, hi }
    }

    pub fn zero() -> Self {
        RInt::point(Rat::new())
    }

    pub fn width(&self) -> Rat {
        Rat::from(&self.hi - &self.lo)
    }

    pub fn mid(&self) -> Rat {
        Rat::from(&self.lo + &self.hi) / 2
    }

    pub fn contains_zero(&self) -> bool {
        self.lo.cmp0() != Ordering::Greater && self.hi.cmp0() != Ordering::Less
    }

    pub fn contains(&self, v: &Rat) -> bool {
        &self.lo <= v && v <= &self.hi
    }

    pub fn intersects(&self, other: &RInt) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }

    /// Certified sign: `Some(Greater)` if the whole interval is > 0,
    /// `Some(Less)` if < 0, `Some(Equal)` if identically zero, else `None`.
    pub fn sign(&self) -> Option<Ordering> {
        if self.lo.cmp0() == Ordering::Greater {
            Some(Ordering::Greater)
        } else if self.hi.cmp0() == Ordering::Less {
            Some(Ordering::Less)
        } else if self.lo.cmp0() == Ordering::Equal && self.hi.cmp0() == Ordering::Equal {
            Some(Ordering::Equal)
        } else {
            None
        }
    }

    /// Supremum of |x| over the interval.
    pub fn mag_hi(&self) -> Rat {
        let a = Rat::from(self.lo.clone().abs());
        let b = Rat::from(self.hi.clone().abs());
        if a > b {
            a
        } else {
            b
        }
    }

    /// Infimum of |x| over the interval (0 if the interval straddles 0).
    pub fn mag_lo(&self) -> Rat {
        if self.contains_zero() {
            Rat::new()
        } else if self.lo.cmp0() == Ordering::Greater {
            self.lo.clone()
        } else {
            Rat::from(self.hi.clone().abs())
        }
    }

    pub fn add(&self, o: &RInt) -> RInt {
        RInt {
            lo: Rat::from(&self.lo + &o.lo),
            hi: Rat::from(&self.hi + &o.hi),
        }
    }

    pub fn sub(&self, o: &RInt) -> RInt {
        RInt {
            lo: Rat::from(&self.lo - &o.hi),
            hi: Rat::from(&self.hi - &o.lo),
        }
    }

    pub fn neg(&self) -> RInt {
        RInt {
            lo: -self.hi.clone(),
            hi: -self.lo.clone(),
        }
    }

    pub fn mul(&self, o: &RInt) -> RInt {
        let mut cands = [
            Rat::from(&self.lo * &o.lo),
            Rat::from(&self.lo * &o.hi),
            Rat::from(&self.hi * &o.lo),
            Rat::from(&self.hi * &o.hi),
        ];
        cands.sort();
        RInt {
            lo: cands[0].clone(),
            hi: cands[3].clone(),
        }
    }

    pub fn scale(&self, c: &Rat) -> RInt {
        if c.cmp0() == Ordering::Less {
            RInt {
                lo: Rat::from(&self.hi * c),
                hi: Rat::from(&self.lo * c),
            }
        } else {
            RInt {
                lo: Rat::from(&self.lo * c),
                hi: Rat::from(&self.hi * c),
            }
        }
    }

    pub fn pow(&self, e: u32) -> RInt {
        match e {
            0 => RInt::point(Rat::from(1)),
            1 => self.clone(),
            _ => {
                let lo_p = Rat::from(self.lo.clone().pow(e));
                let hi_p = Rat::from(self.hi.clone().pow(e));
                if e % 2 == 1 {
                    RInt { lo: lo_p, hi: hi_p }
                } else if self.contains_zero() {
                    let m = if lo_p > hi_p { lo_p } else { hi_p };
                    RInt { lo: Rat::new(), hi: m }
                } else if self.lo.cmp0() == Ordering::Greater {
                    RInt { lo: lo_p, hi: hi_p }
                } else {
                    RInt { lo: hi_p, hi: lo_p }
                }
            }
        }
    }

    /// Widens endpoints outward to denominators 2^bits, bounding denominator
    /// growth during long refinement runs without losing containment.
    pub fn outward_round(&self, bits: u32) -> RInt {
        let scale = Int::from(1) << bits;
        let lo = Rat::from(&self.lo * &scale).floor();
        let hi = Rat::from(&self.hi * &scale).ceil();
        RInt {
            lo: Rat::from((lo.numer().clone(), scale.clone())),
            hi: Rat::from((hi.numer().clone(), scale)),
        }
    }
}

/// Rational enclosure of √3 with width ≤ 10^(-tol_digits), by Newton
/// iteration from a seed bracket; endpoints certified by squaring.
pub fn sqrt3_interval(tol_digits: u32) -> RInt {
    sqrt_interval(&Rat::from(3), tol_digits)
}

/// Rational enclosure of √r (r ≥ 0) with width ≤ 10^(-tol_digits).
pub fn sqrt_interval(r: &Rat, tol_digits: u32) -> RInt {
    assert!(r.cmp0() != Ordering::Less, "sqrt of negative rational");
    if r.cmp0() == Ordering::Equal {
        return RInt::zero();
    }
    let tol = pow10_neg(tol_digits);
    // Newton on f(x) = x^2 - r from an upper seed: xk decreases to sqrt(r).
    let mut x = (r.clone() + Rat::from(1)) / Rat::from(2); // >= sqrt(r) by AM-GM
    if x.clone().square() < *r {
        x = Rat::from(2) * Rat::from(r.clone()); // fallback upper bound
    }
    loop {
        let next = (x.clone() + Rat::from(r / &x)) / 2;
        // next >= sqrt(r) always; lower bound via r / next
        let lo = Rat::from(r / &next);
        if Rat::from(&next - &lo) <= tol {
            // trim endpoint size: round outward at matching precision
            let bits = (tol_digits as f64 * 3.33).ceil() as u32 + 8;
            return RInt::new(lo, next).outward_round(bits);
        }
        x = next;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimal_round_trip() {
        for s in ["0", "1", "-1", "0.5", "-0.125", "3.25e2", "1e-3"] {
            let r = rat_from_decimal(s).unwrap();
            let back = rat_from_decimal(&rat_to_decimal(&r, 40)).unwrap();
            assert_eq!(r, back, "{s}");
        }
        // non-terminating decimals round to 40 significant digits
        let r = rat_from_decimal("12/7").unwrap();
        let back = rat_from_decimal(&rat_to_decimal(&r, 40)).unwrap();
        let err = Rat::from(&r - &back).abs();
        assert!(err < pow10_neg(38), "12/7 round trip err {err}");
        assert_eq!(rat_from_decimal("0.5").unwrap(), Rat::from((1, 2)));
        assert_eq!(rat_from_decimal("-2.5e-1").unwrap(), Rat::from((-1, 4)));
    }

    #[test]
    fn sig_rounding() {
        let r = rat_from_decimal("1.73205").unwrap();
        assert_eq!(round_sig(&r, 3), rat_from_decimal("1.73").unwrap());
        assert_eq!(round_sig(&r, 5), rat_from_decimal("1.7321").unwrap());
    }

    #[test]
    fn sqrt3_bounds() {
        let s = sqrt3_interval(30);
        assert!(s.lo.clone().square() < Rat::from(3));
        assert!(s.hi.clone().square() > Rat::from(3));
        assert!(s.width() <= pow10_neg(30));
    }

    #[test]
    fn interval_pow_straddle() {
        let i = RInt::new(Rat::from(-2), Rat::from(1));
        let sq = i.pow(2);
        assert_eq!(sq.lo, Rat::new());
        assert_eq!(sq.hi, Rat::from(4));
        let cb = i.pow(3);
        assert_eq!(cb.lo, Rat::from(-8));
        assert_eq!(cb.hi, Rat::from(1));
    }
}

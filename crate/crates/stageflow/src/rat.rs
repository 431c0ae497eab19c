//! Exact rational arithmetic helpers.
//!
//! Every flow value, residual and objective in this crate is a `Rat`
//! (an arbitrary `i64` ratio kept in lowest terms by `num`). Nothing is ever
//! rounded; verification is exact or it is nothing.

use num::rational::Ratio;
use num::{One, Signed, Zero};

pub type Rat = Ratio<i64>;

pub fn rat(num: i64, den: i64) -> Rat {
    Ratio::new(num, den)
}

pub fn int(v: i64) -> Rat {
    Ratio::from_integer(v)
}

pub fn zero() -> Rat {
    Rat::zero()
}

pub fn one() -> Rat {
    Rat::one()
}

pub fn abs(v: Rat) -> Rat {
    v.abs()
}

/// Canonical text form: always `num/den`, lowest terms, den > 0.
pub fn fmt_rat(v: Rat) -> String {
    format!("{}/{}", v.numer(), v.denom())
}

/// Accepts `num/den` or a bare integer.
pub fn parse_rat(s: &str) -> Result<Rat, String> {
    let s = s.trim();
    let (n, d) = match s.split_once('/') {
        Some((n, d)) => (n, d),
        None => (s, "1"),
    };
    let n: i64 = n
        .trim()
        .parse()
        .map_err(|_| format!("bad rational numerator in {s:?}"))?;
    let d: i64 = d
        .trim()
        .parse()
        .map_err(|_| format!("bad rational denominator in {s:?}"))?;
    if d == 0 {
        return Err(format!("zero denominator in {s:?}"));
    }
    Ok(Ratio::new(n, d))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn format_is_always_fraction() {
        assert_eq!(fmt_rat(int(192)), "192/1");
        assert_eq!(fmt_rat(rat(259, 4)), "259/4");
        assert_eq!(fmt_rat(rat(-6, 4)), "-3/2");
    }

    #[test]
    fn parse_round_trip() {
        for s in ["1/2", "192/1", "-7/3", "0/1", "2405/4"] {
            let v = parse_rat(s).unwrap();
            assert_eq!(fmt_rat(v), s);
        }
        assert_eq!(parse_rat("192").unwrap(), int(192));
        assert_eq!(parse_rat(" 96 / 5 ").unwrap(), rat(96, 5));
    }

    #[test]
    fn parse_rejects_garbage() {
        assert!(parse_rat("1/0").is_err());
        assert!(parse_rat("x/2").is_err());
        assert!(parse_rat("1/2/3").is_err());
        assert!(parse_rat("").is_err());
    }
}

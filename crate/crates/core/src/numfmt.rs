//! Fixed-precision number formatting for artifacts.

/// Significant digits kept in every emitted number.
pub const SIGNIFICANT_DIGITS: usize = 9;

const DIGITS: i32 = SIGNIFICANT_DIGITS as i32;
const LOW: u64 = 100_000_000;
const HIGH: u64 = 1_000_000_000;
// 10^k is exact in f64 up to k = 22
const POW10: [f64; 23] = [
    1e0, 1e1, 1e2, 1e3, 1e4, 1e5, 1e6, 1e7, 1e8, 1e9, 1e10, 1e11, 1e12, 1e13, 1e14, 1e15, 1e16,
    1e17, 1e18, 1e19, 1e20, 1e21, 1e22,
];

/// `|x| ≈ mantissa · 10^(exp − 8)` with a nine-digit `mantissa`.
struct Decimal {
    negative: bool,
    mantissa: u64,
    exp: i32,
}

fn scaled(a: f64, exp: i32) -> Option<u64> {
    let shift = DIGITS - 1 - exp;
    let p = *POW10.get(shift.unsigned_abs() as usize)?;
    let v = if shift >= 0 { a * p } else { a / p };
    Some(v.round() as u64)
}

fn decompose(x: f64) -> Option<Decimal> {
    if x == 0.0 || !x.is_finite() {
        return None;
    }
    let a = x.abs();
    let mut exp = a.log10().floor() as i32;
    let fast = (|| {
        let mut m = scaled(a, exp)?;
        if m < LOW {
            exp -= 1;
            m = scaled(a, exp)?;
        }
        if m >= HIGH {
            exp += 1;
            m = scaled(a, exp)?;
        }
        (LOW..HIGH).contains(&m).then_some(m)
    })();
    let (mantissa, exp) = match fast {
        Some(m) => (m, exp),
        None => {
            let sci = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, a);
            let (m, e) = sci.split_once('e').expect("exponent form");
            (
                m.replace('.', "").parse().expect("digits"),
                e.parse().expect("exponent"),
            )
        }
    };
    Some(Decimal {
        negative: x < 0.0,
        mantissa,
        exp,
    })
}

/// Rounds `x` to nine significant digits.
pub fn round_sig(x: f64) -> f64 {
    let Some(d) = decompose(x) else {
        return x;
    };
    let shift = DIGITS - 1 - d.exp;
    let m = d.mantissa as f64;
    let v = match POW10.get(shift.unsigned_abs() as usize) {
        // both operands exact, so the result is correctly rounded
        Some(&p) if shift >= 0 => m / p,
        Some(&p) => m * p,
        None => format!("{}e{}", d.mantissa, -shift)
            .parse()
            .expect("decimal"),
    };
    if d.negative {
        -v
    } else {
        v
    }
}

/// Shortest decimal text of `x` rounded to nine significant digits, never
/// in exponent notation. For normal `x` this is the `Display` text of
/// `round_sig(x)`, with `-0` folded to `0`.
pub fn fmt_num(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    let Some(d) = decompose(x) else {
        return "0".to_owned();
    };
    let digits = d.mantissa.to_string();
    let digits = digits.trim_end_matches('0');
    let mut out = String::with_capacity(digits.len() + 8);
    if d.negative {
        out.push('-');
    }
    if d.exp < 0 {
        out.push_str("0.");
        out.extend(std::iter::repeat_n('0', (-d.exp - 1) as usize));
        out.push_str(digits);
    } else {
        let int_len = d.exp as usize + 1;
        if digits.len() <= int_len {
            out.push_str(digits);
            out.extend(std::iter::repeat_n('0', int_len - digits.len()));
        } else {
            out.push_str(&digits[..int_len]);
            out.push('.');
            out.push_str(&digits[int_len..]);
        }
    }
    out
}

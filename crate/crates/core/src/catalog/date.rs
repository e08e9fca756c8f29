//! Calendar dates encoded as `yyyymmdd` integers.
//!
//! Range predicates on dates reduce to plain integer comparisons, which is
//! what generated kernels rely on.

pub fn encode(year: i64, month: i64, day: i64) -> i64 {
    year * 10_000 + month * 100 + day
}

pub fn decode(v: i64) -> (i64, i64, i64) {
    (v / 10_000, (v / 100) % 100, v % 100)
}

pub fn is_leap(year: i64) -> bool {
    (year % 4 == 0 && year % 100 != 0) || year % 400 == 0
}

pub fn days_in_month(year: i64, month: i64) -> i64 {
    match month {
        1 | 3 | 5 | 7 | 8 | 10 | 12 => 31,
        4 | 6 | 9 | 11 => 30,
        2 if is_leap(year) => 29,
        2 => 28,
        _ => 0,
    }
}

pub fn is_valid(v: i64) -> bool {
    let (y, m, d) = decode(v);
    (1..=9999).contains(&y) && (1..=12).contains(&m) && d >= 1 && d <= days_in_month(y, m)
}

/// Parses `YYYY-MM-DD`.
pub fn parse(s: &[u8]) -> Option<i64> {
    if s.len() != 10 || s[4] != b'-' || s[7] != b'-' {
        return None;
    }
    let digits = |r: std::ops::Range<usize>| -> Option<i64> {
        s[r].iter().try_fold(0i64, |acc, &b| b.is_ascii_digit().then(|| acc * 10 + i64::from(b - b'0')))
    };
    let v = encode(digits(0..4)?, digits(5..7)?, digits(8..10)?);
    is_valid(v).then_some(v)
}

pub fn format(v: i64) -> String {
    let (y, m, d) = decode(v);
    format!("{y:04}-{m:02}-{d:02}")
}

// Civil-from-days conversions (proleptic Gregorian, day 0 = 1970-01-01).
fn days_from_civil(y: i64, m: i64, d: i64) -> i64 {
    let y = if m <= 2 { y - 1 } else { y };
    let era = y.div_euclid(400);
    let yoe = y - era * 400;
    let mp = (m + 9) % 12;
    let doy = (153 * mp + 2) / 5 + d - 1;
    let doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    era * 146_097 + doe - 719_468
}

fn civil_from_days(z: i64) -> (i64, i64, i64) {
    let z = z + 719_468;
    let era = z.div_euclid(146_097);
    let doe = z - era * 146_097;
    let yoe = (doe - doe / 1460 + doe / 36_524 - doe / 146_096) / 365;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let d = doy - (153 * mp + 2) / 5 + 1;
    let m = if mp < 10 { mp + 3 } else { mp - 9 };
    let y = yoe + era * 400 + i64::from(m <= 2);
    (y, m, d)
}

pub fn to_days(v: i64) -> i64 {
    let (y, m, d) = decode(v);
    days_from_civil(y, m, d)
}

pub fn from_days(days: i64) -> i64 {
    let (y, m, d) = civil_from_days(days);
    encode(y, m, d)
}

pub fn add_days(v: i64, days: i64) -> i64 {
    from_days(to_days(v) + days)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_iso_dates() {
        assert_eq!(parse(b"1994-01-01"), Some(19_940_101));
        assert_eq!(parse(b"1996-02-29"), Some(19_960_229));
        assert_eq!(parse(b"1995-02-29"), None);
        assert_eq!(parse(b"1994-13-01"), None);
        assert_eq!(parse(b"1994-1-01"), None);
        assert_eq!(parse(b"19940101"), None);
    }

    #[test]
    fn day_arithmetic_round_trips() {
        assert_eq!(to_days(19_700_101), 0);
        assert_eq!(add_days(19_941_231, 1), 19_950_101);
        assert_eq!(add_days(19_960_228, 1), 19_960_229);
        for d in -1000..20_000 {
            assert_eq!(to_days(from_days(d)), d);
            assert!(is_valid(from_days(d)));
        }
    }
}

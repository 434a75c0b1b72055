//! Fixed-column two-line element parsing into circular-orbit elements.

use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::scenario::{OrbitElements, SatId, MU_EARTH};

const LINE_LEN: usize = 69;
const ECCENTRICITY_WARN: f64 = 0.05;
const DEFAULT_EARTH_RADIUS: f64 = 6378e3;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TleCatalog {
    pub elements: Vec<OrbitElements>,
    /// Non-fatal remarks, e.g. eccentric orbits approximated as circular.
    pub warnings: Vec<String>,
}

/// Modulo-10 checksum over the first 68 columns: digits count their value,
/// minus signs count one.
pub fn checksum(line: &str) -> u32 {
    line.bytes()
        .take(LINE_LEN - 1)
        .map(|b| match b {
            b'0'..=b'9' => u32::from(b - b'0'),
            b'-' => 1,
            _ => 0,
        })
        .sum::<u32>()
        % 10
}

/// Altitude of the circular orbit with the given mean motion (rev/day).
pub fn altitude_from_mean_motion(rev_per_day: f64, earth_radius: f64) -> f64 {
    let n = rev_per_day * TAU / 86_400.0;
    (MU_EARTH / (n * n)).cbrt() - earth_radius
}

pub fn parse_tle(text: &str) -> Result<TleCatalog> {
    parse_tle_with_radius(text, DEFAULT_EARTH_RADIUS)
}

pub fn parse_tle_with_radius(text: &str, earth_radius: f64) -> Result<TleCatalog> {
    let lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end()))
        .filter(|(_, l)| !l.is_empty())
        .collect();

    let mut catalog = TleCatalog::default();
    let mut i = 0;
    while i < lines.len() {
        let (no, line) = lines[i];
        if !is_element_line(line, b'1') {
            // name line of a three-line set
            if i + 1 >= lines.len() || !lines[i + 1].1.starts_with('1') {
                return Err(Error::Parse {
                    line: no,
                    message: "expected element line 1 after name line".into(),
                });
            }
            i += 1;
            continue;
        }
        let Some(&(no2, line2)) = lines.get(i + 1) else {
            return Err(Error::Parse {
                line: no,
                message: "element line 1 without a following line 2".into(),
            });
        };
        check_line(no, line, b'1')?;
        check_line(no2, line2, b'2')?;
        let (elements, warning) = parse_pair(no, line, no2, line2, earth_radius)?;
        if let Some(w) = warning {
            catalog.warnings.push(w);
        }
        catalog.elements.push(elements);
        i += 2;
    }
    Ok(catalog)
}

fn is_element_line(line: &str, tag: u8) -> bool {
    let b = line.as_bytes();
    b.len() >= 2 && b[0] == tag && b[1] == b' '
}

fn check_line(no: usize, line: &str, tag: u8) -> Result<()> {
    if !line.is_ascii() || line.len() != LINE_LEN {
        return Err(Error::Parse {
            line: no,
            message: format!(
                "expected {LINE_LEN} columns, found {}",
                line.chars().count()
            ),
        });
    }
    if line.as_bytes()[0] != tag {
        return Err(Error::Parse {
            line: no,
            message: format!("expected line number {}", tag as char),
        });
    }
    let stated = line.as_bytes()[LINE_LEN - 1];
    if !stated.is_ascii_digit() || u32::from(stated - b'0') != checksum(line) {
        return Err(Error::Parse {
            line: no,
            message: format!("checksum mismatch (computed {})", checksum(line)),
        });
    }
    Ok(())
}

/// 1-based inclusive column range.
fn field<T: std::str::FromStr>(
    no: usize,
    line: &str,
    from: usize,
    to: usize,
    name: &str,
) -> Result<T> {
    line[from - 1..to].trim().parse().map_err(|_| Error::Parse {
        line: no,
        message: format!("cannot parse {name} from columns {from}-{to}"),
    })
}

fn parse_pair(
    no1: usize,
    line1: &str,
    no2: usize,
    line2: &str,
    earth_radius: f64,
) -> Result<(OrbitElements, Option<String>)> {
    let id1: SatId = field(no1, line1, 3, 7, "catalog number")?;
    let id2: SatId = field(no2, line2, 3, 7, "catalog number")?;
    if id1 != id2 {
        return Err(Error::Parse {
            line: no2,
            message: format!("catalog number {id2} does not match line 1 ({id1})"),
        });
    }
    let inclination: f64 = field(no2, line2, 9, 16, "inclination")?;
    let raan: f64 = field(no2, line2, 18, 25, "right ascension")?;
    let ecc_digits: String = line2[26..33].trim().to_string();
    let eccentricity: f64 = format!("0.{ecc_digits}")
        .parse()
        .map_err(|_| Error::Parse {
            line: no2,
            message: "cannot parse eccentricity from columns 27-33".into(),
        })?;
    let arg_perigee: f64 = field(no2, line2, 35, 42, "argument of perigee")?;
    let mean_anomaly: f64 = field(no2, line2, 44, 51, "mean anomaly")?;
    let mean_motion: f64 = field(no2, line2, 53, 63, "mean motion")?;
    if mean_motion <= 0.0 {
        return Err(Error::Parse {
            line: no2,
            message: "mean motion must be positive".into(),
        });
    }

    let altitude = altitude_from_mean_motion(mean_motion, earth_radius);
    // circular orbit: argument of latitude = perigee argument + mean anomaly
    let phase0 = (arg_perigee + mean_anomaly).to_radians().rem_euclid(TAU);
    let elements = OrbitElements {
        sat_id: id1,
        altitude,
        inclination: inclination.to_radians(),
        raan: raan.to_radians(),
        phase0,
        angular_rate: mean_motion * TAU / 86_400.0,
    };
    let warning = (eccentricity > ECCENTRICITY_WARN).then(|| {
        format!(
            "satellite {id1}: eccentricity {eccentricity} approximated as circular (line {no2})"
        )
    });
    Ok((elements, warning))
}

#[cfg(test)]
mod tests {
    use super::*;

    const ISS: &str = "ISS (ZARYA)
1 25544U 98067A   08264.51782528 -.00002182  00000-0 -11606-4 0  2927
2 25544  51.6416 247.4627 0006703 130.5360 325.0288 15.72125391563537
";

    /// Builds a line 2 with a valid checksum.
    fn line2(id: u32, incl: &str, ecc: &str, mm: &str) -> String {
        let body = format!("2 {id:05} {incl:>8} 247.4627 {ecc} 130.5360 325.0288 {mm:>11}56353");
        assert_eq!(body.len(), 68, "{body}");
        format!("{body}{}", checksum(&body))
    }

    fn line1(id: u32) -> String {
        let body =
            format!("1 {id:05}U 98067A   08264.51782528 -.00002182  00000-0 -11606-4 0  292");
        assert_eq!(body.len(), 68);
        format!("{body}{}", checksum(&body))
    }

    #[test]
    fn parses_three_line_set() {
        let cat = parse_tle(ISS).unwrap();
        assert_eq!(cat.elements.len(), 1);
        let e = &cat.elements[0];
        assert_eq!(e.sat_id, 25544);
        assert!((e.inclination - 51.6416f64.to_radians()).abs() < 1e-12);
        assert!((e.raan - 247.4627f64.to_radians()).abs() < 1e-12);
        assert!(cat.warnings.is_empty());
        assert!(e.is_kepler_consistent(6378e3));
    }

    #[test]
    fn empty_text_is_empty_catalog() {
        assert!(parse_tle("").unwrap().elements.is_empty());
        assert!(parse_tle("\n\n").unwrap().elements.is_empty());
    }

    #[test]
    fn altitude_from_mean_motion_matches_kepler() {
        let text = format!(
            "{}\n{}\n",
            line1(44713),
            line2(44713, "53.0541", "0001400", "15.05000000")
        );
        let cat = parse_tle(&text).unwrap();
        let e = &cat.elements[0];
        // oracle: a = (mu / n^2)^(1/3) with n in rad/s, minus r_e
        let n = 15.05 * 2.0 * std::f64::consts::PI / 86400.0;
        let a = (3.986004418e14 / (n * n)).powf(1.0 / 3.0);
        assert!((e.altitude - (a - 6378e3)).abs() < 1e-6);
        assert!((e.altitude - 551_643.0).abs() < 5_000.0);
        assert!((e.inclination - 0.925969).abs() < 1e-6);
    }

    #[test]
    fn bad_checksum_names_line() {
        let bad = ISS.replace("15.72125391563537", "15.72125391563538");
        match parse_tle(&bad) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn short_line_rejected() {
        let text = "1 25544U 98067A\n2 25544  51.6416\n";
        match parse_tle(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn eccentric_orbit_warns_but_is_kept() {
        let text = format!(
            "{}\n{}\n",
            line1(1),
            line2(1, "53.0000", "0600000", "15.05000000")
        );
        let cat = parse_tle(&text).unwrap();
        assert_eq!(cat.elements.len(), 1);
        assert_eq!(cat.warnings.len(), 1);
    }

    #[test]
    fn checksum_counts_minus_as_one() {
        assert_eq!(checksum("1 -"), 2);
        assert_eq!(checksum("abc"), 0);
    }
}

//! Parsers for the compact flag syntaxes.

use matchgate_sim::model::{BitString, Measurement, MeasurementBasis};

/// `"1=0,3=1"` into `(qubit, bit)` pairs.
pub fn parse_outcome(text: &str) -> Result<Vec<(usize, u8)>, String> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|item| {
            let (q, b) = item
                .split_once('=')
                .ok_or_else(|| format!("outcome entry '{item}' is not of the form qubit=bit"))?;
            let qubit = parse_qubit(q)?;
            let bit = match b.trim() {
                "0" => 0,
                "1" => 1,
                other => return Err(format!("bit '{other}' for qubit {qubit} is not 0 or 1")),
            };
            Ok((qubit, bit))
        })
        .collect::<Result<Vec<_>, _>>()
        .and_then(|v| {
            if v.is_empty() {
                Err("empty outcome".into())
            } else {
                Ok(v)
            }
        })
}

fn parse_qubit(text: &str) -> Result<usize, String> {
    text.trim()
        .parse::<usize>()
        .map_err(|_| format!("'{}' is not a qubit index", text.trim()))
}

/// `"1,2,5"` into qubit indices.
pub fn parse_subset(text: &str) -> Result<Vec<usize>, String> {
    let v: Vec<usize> = text
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(parse_qubit)
        .collect::<Result<_, _>>()?;
    if v.is_empty() {
        return Err("empty qubit list".into());
    }
    Ok(v)
}

/// `"01,1"` into per-round bit strings; an empty string is the empty trace.
pub fn parse_trace(text: &str) -> Result<Vec<BitString>, String> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<BitString>().map_err(|e| format!("trace entry '{s}': {e}")))
        .collect()
}

/// `"2,3@1.5707963:0"`: a bare qubit measures Z, `q@theta:phi` a rotated basis.
pub fn parse_measure(text: &str) -> Result<Vec<Measurement>, String> {
    let v: Vec<Measurement> = text
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|item| match item.split_once('@') {
            None => Ok(Measurement::computational(parse_qubit(item)?)),
            Some((q, angles)) => {
                let qubit = parse_qubit(q)?;
                let (t, p) = angles
                    .split_once(':')
                    .ok_or_else(|| format!("basis '{angles}' is not of the form theta:phi"))?;
                let num = |s: &str| s.trim().parse::<f64>().map_err(|_| format!("'{s}' is not a number"));
                let basis = MeasurementBasis::rotated(num(t)?, num(p)?).map_err(|e| e.to_string())?;
                Ok(Measurement { qubit, basis })
            }
        })
        .collect::<Result<_, String>>()?;
    if v.is_empty() {
        return Err("empty measurement list".into());
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn outcomes() {
        assert_eq!(parse_outcome("1=0, 3=1").unwrap(), vec![(1, 0), (3, 1)]);
        assert!(parse_outcome("1=2").is_err());
        assert!(parse_outcome("x=1").is_err());
        assert!(parse_outcome("").is_err());
    }

    #[test]
    fn subsets_and_traces() {
        assert_eq!(parse_subset("3,1").unwrap(), vec![3, 1]);
        assert!(parse_subset(",").is_err());
        assert_eq!(parse_trace("").unwrap(), vec![]);
        assert_eq!(parse_trace("01,1").unwrap().len(), 2);
        assert!(parse_trace("012").is_err());
    }

    #[test]
    fn measurements() {
        let m = parse_measure("2,1@1.5:0.25").unwrap();
        assert!(m[0].basis.is_computational());
        assert_eq!(m[1].qubit, 1);
        assert!(!m[1].basis.is_computational());
        assert!(parse_measure("1@4:0").is_err());
    }
}
